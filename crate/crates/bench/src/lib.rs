//! Experiment presets, table reproduction and report writing on top of
//! [`sparsepg`].

pub mod config;
pub mod error;
pub mod experiments;
pub mod report;

pub use config::{ExperimentConfig, ModeKind, Preset, ProblemKind, Target};
pub use error::{BenchError, Result};
