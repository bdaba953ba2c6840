//! `motifscope` command line tool.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use log::error;

use motifscope::pipeline::config::RunConfig;
use motifscope::pipeline::io::create_dir;
use motifscope::pipeline::manifest::DatasetManifest;
use motifscope::pipeline::run::{
    check_cv_preconditions, load_features, load_motifs, load_prepared, load_scored, run_pipeline, stage_discover,
    stage_evaluate, stage_features, stage_preprocess, stage_score, stage_select, stage_train, RunContext, MOTIFS_FILE,
    SCORED_FILE, SELECTED_FILE,
};
use motifscope::pipeline::synth::{generate_synthetic_dataset, SynthSpec};
use motifscope::Error;

#[derive(Debug, Parser)]
#[command(name = "motifscope", version, about = "Motif discovery and classification for multichannel recordings")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Restricts the run to one band.
    #[arg(long, global = true)]
    band: Option<String>,
    /// Directory for every artifact.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Shuffles subject labels with the seed (permutation baseline).
    #[arg(long, global = true)]
    permute_labels: bool,
}

#[derive(Debug, Args)]
struct ManifestArg {
    /// Dataset manifest CSV.
    #[arg(long)]
    manifest: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Filters, cleans and band-splits every recording.
    Preprocess(ManifestArg),
    /// Discovers motifs in the preprocessed recordings.
    Discover,
    /// Scores motifs by how well they separate the classes.
    Score,
    /// Keeps the top motifs per class and group.
    Select,
    /// Builds one feature matrix per band.
    Features,
    /// Fits the final model per band on all subjects.
    Train,
    /// Cross-validates each band and writes reports.
    Evaluate,
    /// Runs every stage.
    Pipeline(ManifestArg),
    /// Writes a synthetic dataset with planted motifs.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Output directory for recordings, manifest, ground truth and config.
    #[arg(long)]
    dir: PathBuf,
    /// Subjects per class [default: 10].
    #[arg(long)]
    n_per_class: Option<usize>,
    /// Recording duration in seconds [default: 60].
    #[arg(long)]
    duration_s: Option<f64>,
    /// Background noise standard deviation [default: 1].
    #[arg(long)]
    noise: Option<f64>,
    /// Planted burst amplitude [default: 4].
    #[arg(long)]
    amplitude: Option<f64>,
}

fn load_config(g: &GlobalArgs) -> motifscope::Result<RunConfig> {
    let mut cfg = match &g.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = g.seed {
        cfg.seed = seed;
    }
    if let Some(band) = &g.band {
        cfg.restrict_to_band(band)?;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let g = &cli.global;
    rayon::ThreadPoolBuilder::new()
        .num_threads(g.threads)
        .build_global()
        .context("starting worker pool")?;

    if let Command::Synth(a) = &cli.command {
        let d = SynthSpec::default();
        let spec = SynthSpec {
            n_per_class: a.n_per_class.unwrap_or(d.n_per_class),
            duration_s: a.duration_s.unwrap_or(d.duration_s),
            noise: a.noise.unwrap_or(d.noise),
            amplitude: a.amplitude.unwrap_or(d.amplitude),
            seed: g.seed.unwrap_or(d.seed),
            ..d
        };
        let out = generate_synthetic_dataset(&spec, &a.dir)?;
        log::info!(
            "stage=synth subjects={} plants={} manifest={}",
            2 * spec.n_per_class,
            out.plants.len(),
            out.manifest_path.display()
        );
        return Ok(());
    }

    let ctx = RunContext {
        config: load_config(g)?,
        out_dir: g.out_dir.clone(),
        permute_labels: g.permute_labels,
    };
    create_dir(&ctx.out_dir)?;
    let bands: Vec<String> = ctx.config.bands.iter().map(|b| b.name.clone()).collect();

    match &cli.command {
        Command::Preprocess(m) => {
            stage_preprocess(&ctx, &DatasetManifest::load(&m.manifest)?)?;
        }
        Command::Discover => {
            stage_discover(&ctx, &load_prepared(&ctx)?)?;
        }
        Command::Score => {
            let prepared = load_prepared(&ctx)?;
            let motifs = load_motifs(&ctx, MOTIFS_FILE).map_err(|e| e.in_stage("score"))?;
            stage_score(&ctx, &prepared, &motifs)?;
        }
        Command::Select => {
            let scored = load_scored(&ctx, SCORED_FILE).map_err(|e| e.in_stage("select"))?;
            stage_select(&ctx, &scored)?;
        }
        Command::Features => {
            let prepared = load_prepared(&ctx)?;
            let selected = load_scored(&ctx, SELECTED_FILE).map_err(|e| e.in_stage("features"))?;
            stage_features(&ctx, &prepared, &selected)?;
        }
        Command::Train => {
            for b in &bands {
                let fm = load_features(&ctx, b).map_err(|e| e.in_stage("train"))?;
                stage_train(&ctx, b, &fm)?;
            }
        }
        Command::Evaluate => {
            for b in &bands {
                let fm = load_features(&ctx, b).map_err(|e| e.in_stage("evaluate"))?;
                check_cv_preconditions(&fm.labels, ctx.config.classify.folds)?;
                stage_evaluate(&ctx, b, &fm)?;
            }
        }
        Command::Pipeline(m) => {
            run_pipeline(&ctx, &DatasetManifest::load(&m.manifest)?)?;
        }
        Command::Synth(_) => unreachable!(),
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(e) => e.exit_code() as u8,
        None => 4,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
