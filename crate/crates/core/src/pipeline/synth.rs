//! Synthetic two-class datasets with planted motif families.
//!
//! Every subject gets white Gaussian noise on each channel. Class-1
//! subjects additionally carry a class-specific alpha-band burst planted
//! several times in one channel, and every subject carries a second, common
//! burst family in another channel. Plant positions are written to
//! `ground_truth.csv`.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{BandSpec, Recording};

use super::config::{GridChoice, RunConfig};
use super::io::{create_dir, write_recording_csv, write_text};
use super::manifest::{DatasetManifest, ManifestEntry};

pub const CLASS_SPECIFIC: &str = "class_specific";
pub const COMMON: &str = "common";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_per_class: usize,
    pub rate: f64,
    pub duration_s: f64,
    pub channels: Vec<String>,
    /// Channel carrying the class-specific family.
    pub specific_channel: String,
    /// Channel carrying the common family.
    pub common_channel: String,
    pub occurrences: usize,
    pub motif_s: f64,
    pub amplitude: f64,
    /// Standard deviation of the background noise.
    pub noise: f64,
    /// Leading and trailing seconds kept free of plants.
    pub margin_s: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_per_class: 10,
            rate: 250.0,
            duration_s: 60.0,
            channels: vec!["O1".into(), "O2".into(), "Fz".into()],
            specific_channel: "O2".into(),
            common_channel: "Fz".into(),
            occurrences: 5,
            motif_s: 1.5,
            amplitude: 4.0,
            noise: 1.0,
            margin_s: 3.0,
            seed: 0,
        }
    }
}

/// One planted occurrence, in samples of the raw recording.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Plant {
    pub subject: String,
    pub label: u8,
    pub family: String,
    pub channel: String,
    pub start: usize,
    pub length: usize,
}

#[derive(Clone, Debug)]
pub struct SynthOutput {
    pub manifest_path: PathBuf,
    pub config_path: PathBuf,
    pub ground_truth_path: PathBuf,
    pub plants: Vec<Plant>,
}

/// Class-specific burst: two alpha tones under a raised-cosine envelope.
pub fn specific_waveform(len: usize, rate: f64) -> Vec<f64> {
    let dur = len as f64 / rate;
    (0..len)
        .map(|i| {
            let t = i as f64 / rate;
            let env = (PI * t / dur).sin().powi(2);
            env * ((2.0 * PI * 9.0 * t).sin() + 0.8 * (2.0 * PI * 11.5 * t + 1.0).sin())
        })
        .collect()
}

/// Common burst: an 8.5 Hz to 12 Hz chirp under the same envelope.
pub fn common_waveform(len: usize, rate: f64) -> Vec<f64> {
    let dur = len as f64 / rate;
    let sweep = 3.5 / (2.0 * dur);
    (0..len)
        .map(|i| {
            let t = i as f64 / rate;
            let env = (PI * t / dur).sin().powi(2);
            env * (2.0 * PI * (8.5 * t + sweep * t * t)).sin()
        })
        .collect()
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::invalid(format!("synthetic spec: {m}")));
        if self.n_per_class < 2 {
            return bad("need at least 2 subjects per class");
        }
        if !(self.rate > 0.0 && self.duration_s > 0.0 && self.motif_s > 0.0) {
            return bad("rate, duration and motif length must be positive");
        }
        if !(self.noise >= 0.0 && self.amplitude > 0.0) {
            return bad("noise must be >= 0 and amplitude > 0");
        }
        for c in [&self.specific_channel, &self.common_channel] {
            if !self.channels.contains(c) {
                return bad(&format!("channel {c} is not in the channel list"));
            }
        }
        if self.specific_channel == self.common_channel {
            return bad("plant channels must differ");
        }
        let usable = self.duration_s - 2.0 * self.margin_s;
        // each occurrence needs its own length plus a gap of half a length
        if usable < 2.0 * self.occurrences as f64 * self.motif_s * 1.5 {
            return bad("recording too short for the requested plants");
        }
        Ok(())
    }

    fn subject_id(&self, i: usize) -> String {
        let width = (2 * self.n_per_class).to_string().len().max(2);
        format!("sub{:0width$}", i + 1)
    }

    /// Start positions of `count` non-overlapping bursts separated by at
    /// least half a burst.
    fn positions(&self, rng: &mut ChaCha8Rng, count: usize, len: usize, n: usize) -> Vec<usize> {
        let margin = (self.margin_s * self.rate).round() as usize;
        let gap = len / 2;
        let slack = n - 2 * margin - count * (len + gap);
        // distribute the slack randomly between the bursts
        let mut cuts: Vec<usize> = (0..count).map(|_| rng.random_range(0..=slack)).collect();
        cuts.sort_unstable();
        cuts.iter()
            .enumerate()
            .map(|(i, &c)| margin + c + i * (len + gap))
            .collect()
    }
}

/// Writes recordings, `manifest.csv`, `ground_truth.csv` and a matching
/// `config.toml` into `dir`.
pub fn generate_synthetic_dataset(spec: &SynthSpec, dir: &Path) -> Result<SynthOutput> {
    spec.validate()?;
    create_dir(&dir.join("recordings"))?;
    let n = (spec.duration_s * spec.rate).round() as usize;
    let len = (spec.motif_s * spec.rate).round() as usize;
    let specific = specific_waveform(len, spec.rate);
    let common = common_waveform(len, spec.rate);
    let c_spec = spec.channels.iter().position(|c| *c == spec.specific_channel).unwrap();
    let c_common = spec.channels.iter().position(|c| *c == spec.common_channel).unwrap();

    let mut entries = Vec::new();
    let mut plants = Vec::new();
    for i in 0..2 * spec.n_per_class {
        let id = spec.subject_id(i);
        let label = (i % 2) as u8;
        let group = if (i / 2) % 2 == 0 { "F" } else { "M" };
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ (0x5EED_0000 + i as u64));
        let mut data: Vec<Vec<f64>> = spec
            .channels
            .iter()
            .map(|_| (0..n).map(|_| spec.noise * rng.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        // both families share one position draw so bursts never overlap in time
        let families: Vec<(&str, usize, &Vec<f64>)> = if label == 1 {
            vec![(CLASS_SPECIFIC, c_spec, &specific), (COMMON, c_common, &common)]
        } else {
            vec![(COMMON, c_common, &common)]
        };
        let total = families.len() * spec.occurrences;
        let mut slots = spec.positions(&mut rng, total, len, n);
        // shuffle which slot belongs to which family
        for j in (1..slots.len()).rev() {
            slots.swap(j, rng.random_range(0..=j));
        }
        for (f, (family, channel, wave)) in families.iter().enumerate() {
            let mut starts = slots[f * spec.occurrences..(f + 1) * spec.occurrences].to_vec();
            starts.sort_unstable();
            for &s in &starts {
                for (k, v) in wave.iter().enumerate() {
                    data[*channel][s + k] += spec.amplitude * v;
                }
                plants.push(Plant {
                    subject: id.clone(),
                    label,
                    family: family.to_string(),
                    channel: spec.channels[*channel].clone(),
                    start: s,
                    length: len,
                });
            }
        }
        let rec = Recording::new(spec.channels.clone(), data, spec.rate)?;
        let file = PathBuf::from("recordings").join(format!("{id}.csv"));
        write_recording_csv(&dir.join(&file), &rec)?;
        entries.push(ManifestEntry {
            id,
            path: file,
            rate_hz: spec.rate,
            group: Some(group.into()),
            label: Some(label),
            baseline_score: None,
            followup_score: None,
        });
    }
    plants.sort_by(|a, b| (&a.subject, &a.family, a.start).cmp(&(&b.subject, &b.family, b.start)));

    let manifest_path = dir.join("manifest.csv");
    DatasetManifest { entries }.write(&manifest_path)?;
    let ground_truth_path = dir.join("ground_truth.csv");
    let mut w = csv::Writer::from_path(&ground_truth_path).map_err(|e| Error::data(&ground_truth_path, e.to_string()))?;
    for p in &plants {
        w.serialize(p)?;
    }
    w.flush().map_err(|e| Error::io(&ground_truth_path, e))?;
    let config_path = dir.join("config.toml");
    write_text(&config_path, &synthetic_config(spec).to_toml()?)?;
    Ok(SynthOutput {
        manifest_path,
        config_path,
        ground_truth_path,
        plants,
    })
}

pub fn read_ground_truth(path: &Path) -> Result<Vec<Plant>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::data(path, e.to_string()))?;
    r.deserialize().map(|p| p.map_err(|e| Error::data(path, e.to_string()))).collect()
}

/// Run configuration suited to a synthetic dataset: alpha band only, short
/// trims, no artifact rejection and candidate lengths from half to twice the
/// planted motif length.
pub fn synthetic_config(spec: &SynthSpec) -> RunConfig {
    let mut cfg = RunConfig {
        seed: spec.seed,
        bands: vec![BandSpec::alpha()],
        ..RunConfig::default()
    };
    cfg.preprocess.decimate_to_hz = 0.0;
    cfg.preprocess.trim_s = 1.0;
    cfg.preprocess.artifact_power_z = f64::INFINITY;
    cfg.discovery.min_length_s = spec.motif_s / 2.0;
    cfg.discovery.max_length_s = spec.motif_s * 2.0;
    cfg.discovery.n_lengths = 5;
    cfg.classify.grid = GridChoice::Preset("compact".into());
    cfg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::io::read_recording_csv;

    fn small() -> SynthSpec {
        SynthSpec {
            n_per_class: 2,
            duration_s: 30.0,
            occurrences: 3,
            ..SynthSpec::default()
        }
    }

    #[test]
    fn writes_every_file() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SynthSpec { n_per_class: 10, duration_s: 40.0, ..SynthSpec::default() };
        let out = generate_synthetic_dataset(&spec, dir.path()).unwrap();
        let m = DatasetManifest::load(&out.manifest_path).unwrap();
        assert_eq!(m.entries.len(), 20);
        assert_eq!(std::fs::read_dir(dir.path().join("recordings")).unwrap().count(), 20);
        assert_eq!(m.entries.iter().filter(|e| e.label == Some(1)).count(), 10);
        assert_eq!(read_ground_truth(&out.ground_truth_path).unwrap(), out.plants);
        assert_eq!(out.plants.len(), 10 * 5 + 20 * 5);
        RunConfig::load(&out.config_path).unwrap();
    }

    #[test]
    fn noiseless_plants_are_exact_copies() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SynthSpec { noise: 0.0, ..small() };
        let out = generate_synthetic_dataset(&spec, dir.path()).unwrap();
        let m = DatasetManifest::load(&out.manifest_path).unwrap();
        for p in &out.plants {
            let e = m.entries.iter().find(|e| e.id == p.subject).unwrap();
            let rec = read_recording_csv(&e.path, spec.rate).unwrap();
            let c = rec.channel_index(&p.channel).unwrap();
            let wave = if p.family == CLASS_SPECIFIC {
                specific_waveform(p.length, spec.rate)
            } else {
                common_waveform(p.length, spec.rate)
            };
            let expected: Vec<f64> = wave.iter().map(|v| v * spec.amplitude).collect();
            assert_eq!(&rec.data[c][p.start..p.start + p.length], expected.as_slice());
        }
    }

    #[test]
    fn plants_do_not_overlap_and_respect_margins() {
        let dir = tempfile::tempdir().unwrap();
        let spec = small();
        let out = generate_synthetic_dataset(&spec, dir.path()).unwrap();
        let margin = (spec.margin_s * spec.rate) as usize;
        let n = (spec.duration_s * spec.rate) as usize;
        for a in &out.plants {
            assert!(a.start >= margin && a.start + a.length <= n - margin);
            for b in &out.plants {
                if a.subject == b.subject && a != b {
                    assert!(a.start + a.length <= b.start || b.start + b.length <= a.start);
                }
            }
        }
    }

    #[test]
    fn same_seed_same_files() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        generate_synthetic_dataset(&small(), a.path()).unwrap();
        generate_synthetic_dataset(&small(), b.path()).unwrap();
        for f in ["manifest.csv", "ground_truth.csv", "recordings/sub01.csv", "recordings/sub04.csv"] {
            assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap());
        }
    }

    #[test]
    fn rejects_tiny_classes() {
        let dir = tempfile::tempdir().unwrap();
        assert!(generate_synthetic_dataset(&SynthSpec { n_per_class: 1, ..small() }, dir.path()).is_err());
    }
}
