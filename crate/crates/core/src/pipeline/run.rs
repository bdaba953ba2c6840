//! Stage orchestration.
//!
//! Every stage reads its inputs from and writes its outputs to the output
//! directory, so a run can be resumed from any stage:
//!
//! | stage        | reads                                  | writes |
//! |--------------|----------------------------------------|--------|
//! | `preprocess` | manifest, recordings                   | `prep/<band>/` |
//! | `discover`   | `prep/`                                | `motifs.jsonl` |
//! | `score`      | `prep/`, `motifs.jsonl`                | `scored_motifs.jsonl` |
//! | `select`     | `scored_motifs.jsonl`                  | `selected_motifs.jsonl` |
//! | `features`   | `prep/`, `selected_motifs.jsonl`       | `features_<band>.csv` |
//! | `evaluate`   | `features_<band>.csv`                  | `report_<band>.json`, `folds_<band>.csv`, `fisher_<band>.csv`, `model_<band>.json` |
//! | `train`      | `features_<band>.csv`                  | `model_<band>.json` |

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::cv::{evaluate_matrix, permuted_labels, select_final_model};
use crate::classify::{fisher_projection, select_columns, EstimatorSpec, EvalReport, Model};
use crate::dataset::{check_dataset, SubjectRecord};
use crate::error::{Error, Result};
use crate::features::{build_feature_matrix, FeatureMatrix};
use crate::motiflets::{extract_motifs, Motif};
use crate::selection::{score_motifs, select_balanced, ScoredMotif};
use crate::signal::{
    average_reference, bandpass, decimate, extract_band, reject_artifact_windows, trim_edges, BandSpec, Recording,
};

use super::config::{PreprocessConfig, RunConfig};
use super::io::{create_dir, read_jsonl, read_prepared, write_json, write_jsonl, write_prepared};
use super::manifest::DatasetManifest;

pub const MOTIFS_FILE: &str = "motifs.jsonl";
pub const SCORED_FILE: &str = "scored_motifs.jsonl";
pub const SELECTED_FILE: &str = "selected_motifs.jsonl";

pub fn features_file(band: &str) -> String {
    format!("features_{band}.csv")
}

pub fn report_file(band: &str) -> String {
    format!("report_{band}.json")
}

pub fn folds_file(band: &str) -> String {
    format!("folds_{band}.csv")
}

pub fn fisher_file(band: &str) -> String {
    format!("fisher_{band}.csv")
}

pub fn model_file(band: &str) -> String {
    format!("model_{band}.json")
}

/// Settings shared by every stage.
#[derive(Clone, Debug)]
pub struct RunContext {
    pub config: RunConfig,
    pub out_dir: PathBuf,
    /// Shuffle subject labels with the run seed before scoring, for
    /// permutation baselines.
    pub permute_labels: bool,
}

/// One band of the preprocessed dataset.
#[derive(Clone, Debug)]
pub struct PreparedBand {
    pub band: BandSpec,
    pub subjects: Vec<SubjectRecord>,
    /// Artifact windows removed from each subject, in subject order.
    pub removed: Vec<Vec<usize>>,
}

/// A final model with the grid point and features it was fitted on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub band: String,
    pub estimator: EstimatorSpec,
    pub features: Vec<String>,
    pub model: Model,
}

fn timed<T>(stage: &'static str, band: &str, f: impl FnOnce() -> Result<(T, String)>) -> Result<T> {
    let start = Instant::now();
    let (out, counts) = f().map_err(|e| e.in_stage(stage))?;
    info!(
        "stage={stage} band={band} {counts} elapsed_ms={}",
        start.elapsed().as_millis()
    );
    Ok(out)
}

fn path(ctx: &RunContext, name: &str) -> PathBuf {
    ctx.out_dir.join(name)
}

/// Broadband chain: optional decimation, edge trimming, average reference,
/// band-pass and artifact-window rejection. Returns the cleaned recording
/// and the indices of the removed windows.
pub fn preprocess_recording(rec: &Recording, p: &PreprocessConfig) -> Result<(Recording, Vec<usize>)> {
    let mut rec = rec.clone();
    if p.decimate_to_hz > 0.0 && rec.rate > p.decimate_to_hz {
        let ratio = rec.rate / p.decimate_to_hz;
        if (ratio - ratio.round()).abs() < 1e-9 {
            rec = decimate(&rec, ratio.round() as usize)?;
        } else {
            log::warn!(
                "rate {} Hz is not a multiple of {} Hz; skipping decimation",
                rec.rate,
                p.decimate_to_hz
            );
        }
    }
    rec = trim_edges(&rec, p.trim_s)?;
    if p.average_reference {
        rec = average_reference(&rec)?;
    }
    rec = bandpass(&rec, p.broadband_low_hz, p.broadband_high_hz)?;
    let cleaned = reject_artifact_windows(&rec, p.artifact_window_s, p.artifact_power_z)?;
    Ok((cleaned.recording, cleaned.removed))
}

/// Preprocesses every subject and extracts every configured band.
pub fn prepare_subjects(subjects: &[SubjectRecord], cfg: &RunConfig) -> Result<Vec<PreparedBand>> {
    check_dataset(subjects)?;
    let per_subject: Vec<(Vec<SubjectRecord>, Vec<usize>)> = subjects
        .par_iter()
        .map(|s| {
            let tag = |e: Error| match e {
                Error::InvalidArgument(m) => Error::invalid(format!("subject {}: {m}", s.id)),
                Error::EmptyRecording(m) => Error::EmptyRecording(format!("subject {}: {m}", s.id)),
                e => e,
            };
            let (clean, removed) = preprocess_recording(&s.recording, &cfg.preprocess).map_err(tag)?;
            if !removed.is_empty() {
                log::debug!("subject {}: removed artifact windows {removed:?}", s.id);
            }
            let bands = cfg
                .bands
                .iter()
                .map(|b| {
                    Ok(SubjectRecord {
                        recording: extract_band(&clean, b).map_err(tag)?,
                        ..s.clone()
                    })
                })
                .collect::<Result<_>>()?;
            Ok((bands, removed))
        })
        .collect::<Result<_>>()?;
    Ok(cfg
        .bands
        .iter()
        .enumerate()
        .map(|(i, b)| PreparedBand {
            band: b.clone(),
            subjects: per_subject.iter().map(|(v, _)| v[i].clone()).collect(),
            removed: per_subject.iter().map(|(_, r)| r.clone()).collect(),
        })
        .collect())
}

/// Fails early when the labels cannot support cross-validation.
pub fn check_cv_preconditions(labels: &[u8], folds: usize) -> Result<()> {
    let n1 = labels.iter().filter(|&&l| l == 1).count();
    if labels.len() < folds {
        return Err(Error::invalid(format!(
            "{} subject(s) cannot be split into {folds} folds",
            labels.len()
        ))
        .in_stage("cv"));
    }
    if n1 == 0 || n1 == labels.len() {
        return Err(Error::invalid("cross-validation needs subjects of both classes").in_stage("cv"));
    }
    Ok(())
}

fn apply_permutation(ctx: &RunContext, subjects: &mut [SubjectRecord]) {
    if ctx.permute_labels {
        let labels: Vec<u8> = subjects.iter().map(|s| s.label).collect();
        for (s, l) in subjects.iter_mut().zip(permuted_labels(&labels, ctx.config.seed ^ 0x7E57)) {
            s.label = l;
        }
    }
}

pub fn stage_preprocess(ctx: &RunContext, manifest: &DatasetManifest) -> Result<Vec<PreparedBand>> {
    let subjects = timed("preprocess", "all", || {
        let s = manifest.load_subjects()?;
        let n = s.len();
        Ok((s, format!("subjects={n}")))
    })?;
    let names: Vec<&str> = ctx.config.bands.iter().map(|b| b.name.as_str()).collect();
    timed("preprocess", &names.join(","), || {
        let bands = prepare_subjects(&subjects, &ctx.config)?;
        for b in &bands {
            let rows: Vec<(SubjectRecord, Vec<usize>)> =
                b.subjects.iter().cloned().zip(b.removed.iter().cloned()).collect();
            write_prepared(&ctx.out_dir, &b.band, &rows)?;
        }
        let samples: usize = bands.iter().flat_map(|b| &b.subjects).map(|s| s.recording.n_samples()).sum();
        Ok((bands, format!("subjects={} band_samples={samples}", subjects.len())))
    })
}

pub fn load_prepared(ctx: &RunContext) -> Result<Vec<PreparedBand>> {
    ctx.config
        .bands
        .iter()
        .map(|b| {
            let (band, mut subjects, removed) = read_prepared(&ctx.out_dir, &b.name)?;
            if band != *b {
                return Err(Error::Config(format!(
                    "prepared band {} was built with different settings; rerun preprocess",
                    b.name
                )));
            }
            apply_permutation(ctx, &mut subjects);
            Ok(PreparedBand { band, subjects, removed })
        })
        .collect()
}

fn restrict_channels(subjects: &[SubjectRecord], channels: &[String]) -> Result<Vec<SubjectRecord>> {
    if channels.is_empty() {
        return Ok(subjects.to_vec());
    }
    subjects
        .iter()
        .map(|s| {
            let idx: Vec<usize> = channels
                .iter()
                .map(|c| {
                    s.recording
                        .channel_index(c)
                        .ok_or_else(|| Error::Config(format!("subject {} has no channel {c}", s.id)))
                })
                .collect::<Result<_>>()?;
            let mut rec = s.recording.clone();
            rec.channels = channels.to_vec();
            rec.data = idx.iter().map(|&i| s.recording.data[i].clone()).collect();
            Ok(SubjectRecord { recording: rec, ..s.clone() })
        })
        .collect()
}

pub fn stage_discover(ctx: &RunContext, bands: &[PreparedBand]) -> Result<Vec<Motif>> {
    let mut all = Vec::new();
    for b in bands {
        let motifs = timed("discover", &b.band.name, || {
            let d = &ctx.config.discovery;
            let subjects = restrict_channels(&b.subjects, &d.channels)?;
            let lengths = d.lengths(b.band.target_rate);
            let m = extract_motifs(&subjects, &b.band, &lengths, &d.discovery())?;
            let n = m.len();
            Ok((m, format!("motifs={n}")))
        })?;
        all.extend(motifs);
    }
    write_jsonl(&path(ctx, MOTIFS_FILE), &all).map_err(|e| e.in_stage("discover"))?;
    Ok(all)
}

fn band_motifs(motifs: &[Motif], band: &str) -> Vec<Motif> {
    motifs.iter().filter(|m| m.band == band).cloned().collect()
}

pub fn stage_score(ctx: &RunContext, bands: &[PreparedBand], motifs: &[Motif]) -> Result<Vec<ScoredMotif>> {
    let mut all = Vec::new();
    for b in bands {
        let scored = timed("score", &b.band.name, || {
            let mine = band_motifs(motifs, &b.band.name);
            if mine.is_empty() {
                return Err(Error::invalid(format!("no motifs for band {}", b.band.name)));
            }
            let s = score_motifs(&mine, &b.subjects, ctx.config.selection.percentage)?;
            let n = s.len();
            Ok((s, format!("scored={n}")))
        })?;
        all.extend(scored);
    }
    write_jsonl(&path(ctx, SCORED_FILE), &all).map_err(|e| e.in_stage("score"))?;
    Ok(all)
}

pub fn stage_select(ctx: &RunContext, scored: &[ScoredMotif]) -> Result<Vec<ScoredMotif>> {
    let mut all = Vec::new();
    for b in &ctx.config.bands {
        let kept = timed("select", &b.name, || {
            let mine: Vec<ScoredMotif> = scored.iter().filter(|s| s.motif.band == b.name).cloned().collect();
            let kept = select_balanced(&mine, ctx.config.selection.n_per_cell);
            if kept.is_empty() {
                return Err(Error::invalid(format!("no scored motifs for band {}", b.name)));
            }
            let n = kept.len();
            Ok((kept, format!("candidates={} selected={n}", mine.len())))
        })?;
        all.extend(kept);
    }
    write_jsonl(&path(ctx, SELECTED_FILE), &all).map_err(|e| e.in_stage("select"))?;
    Ok(all)
}

fn write_matrix(path: &Path, fm: &FeatureMatrix) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    fm.write_csv(BufWriter::new(f))
}

pub fn stage_features(ctx: &RunContext, bands: &[PreparedBand], selected: &[ScoredMotif]) -> Result<Vec<FeatureMatrix>> {
    bands
        .iter()
        .map(|b| {
            timed("features", &b.band.name, || {
                let mine: Vec<ScoredMotif> = selected.iter().filter(|s| s.motif.band == b.band.name).cloned().collect();
                let fm = build_feature_matrix(&b.subjects, &mine, &b.band)?;
                write_matrix(&path(ctx, &features_file(&b.band.name)), &fm)?;
                let counts = format!("rows={} cols={}", fm.n_rows(), fm.n_cols());
                Ok((fm, counts))
            })
        })
        .collect()
}

pub fn load_features(ctx: &RunContext, band: &str) -> Result<FeatureMatrix> {
    let p = path(ctx, &features_file(band));
    let f = File::open(&p).map_err(|e| Error::io(&p, e))?;
    FeatureMatrix::read_csv(f).map_err(|e| Error::data(&p, e.to_string()))
}

fn write_fisher(path: &Path, fm: &FeatureMatrix, columns: &[usize]) -> Result<()> {
    let projection = fisher_projection(&select_columns(&fm.values, columns), &fm.labels)?;
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::data(path, e.to_string()))?;
    w.write_record(["subject", "label", "group", "projection"])?;
    for (i, p) in projection.iter().enumerate() {
        w.write_record([
            fm.rows[i].clone(),
            fm.labels[i].to_string(),
            fm.groups[i].clone(),
            p.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Cross-validates one band's feature matrix and writes the report, the
/// per-fold table, the Fisher projection and the final model.
pub fn stage_evaluate(ctx: &RunContext, band: &str, fm: &FeatureMatrix) -> Result<EvalReport> {
    timed("evaluate", band, || {
        let grid = ctx.config.classify.grid.grid()?;
        let cv = ctx.config.classify.cv(ctx.config.seed);
        let (report, model) = evaluate_matrix(fm, &grid, &cv)?;
        write_json(&path(ctx, &report_file(band)), &report)?;
        let folds_path = path(ctx, &folds_file(band));
        let f = File::create(&folds_path).map_err(|e| Error::io(&folds_path, e))?;
        report.write_folds_csv(BufWriter::new(f))?;
        write_fisher(&path(ctx, &fisher_file(band)), fm, &report.selected_features)?;
        write_json(
            &path(ctx, &model_file(band)),
            &TrainedModel {
                band: band.to_string(),
                estimator: report.chosen.clone(),
                features: report.selected_feature_ids.clone(),
                model,
            },
        )?;
        let counts = format!(
            "folds={} mean_validation_f1={:.4} mean_validation_accuracy={:.4}",
            report.n_folds, report.mean_validation_f1, report.mean_validation_accuracy
        );
        Ok((report, counts))
    })
}

/// Grid search and feature elimination on all subjects; writes the model.
pub fn stage_train(ctx: &RunContext, band: &str, fm: &FeatureMatrix) -> Result<TrainedModel> {
    timed("train", band, || {
        fm.validate()?;
        let grid = ctx.config.classify.grid.grid()?;
        let cv = ctx.config.classify.cv(ctx.config.seed);
        let (spec, selected, model) = select_final_model(&fm.values, &fm.labels, &fm.groups, &grid, &cv)?;
        let trained = TrainedModel {
            band: band.to_string(),
            estimator: spec,
            features: selected.iter().map(|&j| fm.cols[j].clone()).collect(),
            model,
        };
        write_json(&path(ctx, &model_file(band)), &trained)?;
        let counts = format!("features={}", trained.features.len());
        Ok((trained, counts))
    })
}

pub fn load_motifs(ctx: &RunContext, name: &str) -> Result<Vec<Motif>> {
    read_jsonl(&path(ctx, name))
}

pub fn load_scored(ctx: &RunContext, name: &str) -> Result<Vec<ScoredMotif>> {
    read_jsonl(&path(ctx, name))
}

/// Runs every stage and returns the report of each band.
pub fn run_pipeline(ctx: &RunContext, manifest: &DatasetManifest) -> Result<Vec<EvalReport>> {
    create_dir(&ctx.out_dir)?;
    let labels: Vec<u8> = manifest.entries.iter().map(|e| e.resolved_label()).collect::<Result<_>>()?;
    check_cv_preconditions(&labels, ctx.config.classify.folds)?;

    let mut bands = stage_preprocess(ctx, manifest)?;
    for b in &mut bands {
        apply_permutation(ctx, &mut b.subjects);
    }
    let motifs = stage_discover(ctx, &bands)?;
    let scored = stage_score(ctx, &bands, &motifs)?;
    let selected = stage_select(ctx, &scored)?;
    let matrices = stage_features(ctx, &bands, &selected)?;
    bands
        .iter()
        .zip(&matrices)
        .map(|(b, fm)| stage_evaluate(ctx, &b.band.name, fm))
        .collect()
}
