//! Run configuration, loaded from TOML.
//!
//! Every section has defaults, so an empty file is a valid configuration.
//!
//! ```toml
//! seed = 7
//!
//! [[bands]]
//! name = "alpha"
//! low = 8.0
//! high = 12.0
//! target_rate = 24.0
//!
//! [preprocess]
//! trim_s = 30.0
//! artifact_power_z = 3.0
//!
//! [discovery]
//! min_length_s = 0.2
//! max_length_s = 8.0
//!
//! [classify]
//! grid = "compact"
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classify::{ClassifierGrid, CvConfig, EstimatorSpec};
use crate::error::{Error, Result};
use crate::motiflets::{length_grid, DiscoveryConfig, DEFAULT_ELBOW_ALPHA, DEFAULT_K_MAX};
use crate::selection::{DEFAULT_N_PER_CELL, DEFAULT_PERCENTAGE};
use crate::signal::BandSpec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub bands: Vec<BandSpec>,
    pub preprocess: PreprocessConfig,
    pub discovery: DiscoverySettings,
    pub selection: SelectionConfig,
    pub classify: ClassifyConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            bands: vec![BandSpec::theta(), BandSpec::alpha(), BandSpec::beta()],
            preprocess: PreprocessConfig::default(),
            discovery: DiscoverySettings::default(),
            selection: SelectionConfig::default(),
            classify: ClassifyConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    /// Decimate to this rate first when the input rate is an integer
    /// multiple of it; `0` keeps the input rate.
    pub decimate_to_hz: f64,
    pub trim_s: f64,
    pub average_reference: bool,
    pub broadband_low_hz: f64,
    pub broadband_high_hz: f64,
    pub artifact_window_s: f64,
    /// `inf` disables artifact rejection.
    pub artifact_power_z: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            decimate_to_hz: 250.0,
            trim_s: 30.0,
            average_reference: true,
            broadband_low_hz: 1.0,
            broadband_high_hz: 40.0,
            artifact_window_s: 2.0,
            artifact_power_z: 3.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscoverySettings {
    pub min_length_s: f64,
    pub max_length_s: f64,
    pub n_lengths: usize,
    pub k_max: usize,
    pub elbow_alpha: f64,
    /// Channels searched for motifs; empty means all.
    pub channels: Vec<String>,
}

impl Default for DiscoverySettings {
    fn default() -> Self {
        DiscoverySettings {
            min_length_s: 0.2,
            max_length_s: 8.0,
            n_lengths: 12,
            k_max: DEFAULT_K_MAX,
            elbow_alpha: DEFAULT_ELBOW_ALPHA,
            channels: Vec::new(),
        }
    }
}

impl DiscoverySettings {
    pub fn lengths(&self, rate: f64) -> Vec<usize> {
        length_grid(self.min_length_s, self.max_length_s, self.n_lengths, rate)
    }

    pub fn discovery(&self) -> DiscoveryConfig {
        DiscoveryConfig {
            k_max: self.k_max,
            elbow_alpha: self.elbow_alpha,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionConfig {
    pub percentage: f64,
    pub n_per_cell: usize,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            percentage: DEFAULT_PERCENTAGE,
            n_per_cell: DEFAULT_N_PER_CELL,
        }
    }
}

/// A named grid or an explicit list of grid points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridChoice {
    Preset(String),
    Custom(Vec<EstimatorSpec>),
}

impl GridChoice {
    pub fn grid(&self) -> Result<ClassifierGrid> {
        match self {
            GridChoice::Preset(name) => match name.as_str() {
                "full" => Ok(ClassifierGrid::full()),
                "compact" => Ok(ClassifierGrid::compact()),
                "trees" => Ok(ClassifierGrid::decision_trees()),
                "forests" => Ok(ClassifierGrid::random_forests()),
                "logistic" => Ok(ClassifierGrid::logistic()),
                "single_tree" => Ok(ClassifierGrid::single_tree()),
                other => Err(Error::Config(format!(
                    "unknown classifier grid {other:?}; expected full, compact, trees, forests, logistic or single_tree"
                ))),
            },
            GridChoice::Custom(specs) => Ok(ClassifierGrid { specs: specs.clone() }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifyConfig {
    pub folds: usize,
    /// Features kept by recursive elimination; `0` disables elimination.
    pub rfe_target: usize,
    pub grid: GridChoice,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig {
            folds: 5,
            rfe_target: 8,
            grid: GridChoice::Preset("compact".into()),
        }
    }
}

impl ClassifyConfig {
    pub fn cv(&self, seed: u64) -> CvConfig {
        CvConfig {
            folds: self.folds,
            seed,
            rfe_target: (self.rfe_target > 0).then_some(self.rfe_target),
        }
    }
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Config(msg()))
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Keeps only the named band.
    pub fn restrict_to_band(&mut self, name: &str) -> Result<()> {
        let band = self
            .bands
            .iter()
            .find(|b| b.name == name)
            .cloned()
            .or_else(|| [BandSpec::theta(), BandSpec::alpha(), BandSpec::beta()].into_iter().find(|b| b.name == name))
            .ok_or_else(|| Error::Config(format!("unknown band {name:?}")))?;
        self.bands = vec![band];
        Ok(())
    }

    pub fn band(&self, name: &str) -> Result<&BandSpec> {
        self.bands
            .iter()
            .find(|b| b.name == name)
            .ok_or_else(|| Error::Config(format!("band {name:?} is not configured")))
    }

    pub fn validate(&self) -> Result<()> {
        check(!self.bands.is_empty(), || "no bands configured".into())?;
        for (i, b) in self.bands.iter().enumerate() {
            b.validate().map_err(|e| Error::Config(e.to_string()))?;
            check(!self.bands[..i].iter().any(|o| o.name == b.name), || format!("band {} listed twice", b.name))?;
        }
        let p = &self.preprocess;
        check(p.decimate_to_hz >= 0.0 && p.decimate_to_hz.is_finite(), || "decimate_to_hz must be >= 0".into())?;
        check(p.trim_s >= 0.0 && p.trim_s.is_finite(), || "trim_s must be >= 0".into())?;
        check(
            p.broadband_low_hz > 0.0 && p.broadband_low_hz < p.broadband_high_hz,
            || "need 0 < broadband_low_hz < broadband_high_hz".into(),
        )?;
        check(p.artifact_window_s > 0.0 && p.artifact_window_s.is_finite(), || "artifact_window_s must be > 0".into())?;
        check(!p.artifact_power_z.is_nan(), || "artifact_power_z is NaN".into())?;
        for b in &self.bands {
            check(b.low >= p.broadband_low_hz && b.high <= p.broadband_high_hz, || {
                format!("band {} lies outside the broadband filter", b.name)
            })?;
        }
        let d = &self.discovery;
        check(
            d.min_length_s > 0.0 && d.min_length_s <= d.max_length_s && d.max_length_s.is_finite(),
            || "need 0 < min_length_s <= max_length_s".into(),
        )?;
        check(d.n_lengths >= 1, || "n_lengths must be >= 1".into())?;
        check(d.k_max >= 2, || "k_max must be >= 2".into())?;
        check(d.elbow_alpha > 0.0 && d.elbow_alpha.is_finite(), || "elbow_alpha must be > 0".into())?;
        let s = &self.selection;
        check(s.percentage > 0.0 && s.percentage <= 1.0, || "percentage must lie in (0, 1]".into())?;
        check(s.n_per_cell >= 1, || "n_per_cell must be >= 1".into())?;
        let c = &self.classify;
        check(c.folds >= 2, || "folds must be >= 2".into())?;
        c.grid.grid()?.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }
}
