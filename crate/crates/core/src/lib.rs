//! Excursion-set volumes of subordinated Gaussian random fields.

pub mod error;
pub mod excursion;
pub mod fieldgen;
pub mod grid;
pub mod hermite;
pub mod limit_lab;
pub mod lrd;
pub mod models;
pub mod normalizer;
pub mod oracle;
pub mod quadrature;
pub mod report;
pub mod rng;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
pub use fieldgen::VolatilityLaw;
pub use grid::{FieldSample, GridSpec};
pub use limit_lab::{ExperimentConfig, ExperimentReport, FgnExperiment, VolatilityExperiment};
pub use lrd::{ConditionReport, LrdClass, Verdict};
pub use models::{CovarianceModel, SpectralDensity, Subordinator};
pub use normalizer::{NormalizationMethod, NormalizationPlan};
pub use report::RunManifest;
