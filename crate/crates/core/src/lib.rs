//! Motif-based classification of multichannel time series.
//!
//! The crate covers the whole workflow: EEG-style preprocessing
//! ([`signal`]), z-normalized similarity search ([`series`]), k-Motiflet
//! discovery with automatic choice of occurrence count and motif length
//! ([`motiflets`]), motif matching ([`matching`]), discriminative ranking
//! ([`selection`]), feature matrices ([`features`]), interpretable
//! classifiers with cross-validation ([`classify`]) and the end-to-end
//! orchestration used by the command line tool ([`pipeline`]).

pub mod classify;
pub mod dataset;
pub mod error;
pub mod features;
pub mod matching;
pub mod motiflets;
pub mod pipeline;
pub mod selection;
pub mod series;
pub mod signal;

pub use classify::EvalReport;
pub use dataset::SubjectRecord;
pub use error::{Error, Result};
pub use features::FeatureMatrix;
pub use matching::MatchSet;
pub use motiflets::{ElbowAnalysis, Motif, MotifletSet};
pub use selection::ScoredMotif;
pub use series::{DistanceProfile, Series};
pub use signal::{BandSpec, Recording};
