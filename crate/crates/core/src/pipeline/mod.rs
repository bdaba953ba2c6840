//! End-to-end orchestration: configuration, dataset manifests, file
//! formats, synthetic data and the stage runner behind the command line
//! tool.

pub mod config;
pub mod io;
pub mod manifest;
pub mod run;
pub mod synth;

pub use config::RunConfig;
pub use manifest::{derive_label, DatasetManifest};
pub use run::{run_pipeline, RunContext};
pub use synth::{generate_synthetic_dataset, SynthSpec};
