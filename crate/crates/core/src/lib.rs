//! Sugeno fuzzy classifiers built by subtractive clustering, with the
//! per-input cluster radii tuned by genetic algorithms, particle swarm
//! optimization and simulated annealing.
//!
//! The crate is organised bottom-up:
//!
//! * [`dataset`] – field-interaction records, binary-word encodings,
//!   normalization and stratified splitting.
//! * [`synthgen`] – seeded synthetic datasets labelled by rule tables.
//! * [`subclust`] – subtractive clustering with per-dimension radii.
//! * [`fis`] – first-order Sugeno inference systems seeded from clusters.
//! * [`metrics`] – confusion counts, the geometric accuracy score and the
//!   counted fitness function.
//! * [`optim`] – binary/real GA, PSO and SA engines.
//! * [`harness`] – experiment specs, comparison grids and report rendering.

pub mod dataset;
pub mod error;
pub mod fis;
pub mod harness;
pub mod metrics;
pub mod optim;
pub mod rng;
pub mod subclust;
pub mod synthgen;

pub use dataset::{
    Dataset, EncodedSample, FieldRecord, InteractionLabels, NormParams, Split, TargetLayout,
};
pub use error::{Error, Result};
pub use fis::{build_fis, SugenoFis};
pub use harness::{ComparisonReport, ExperimentSpec, OptimizeReport};
pub use metrics::{ConfusionCounts, FitnessContext, FitnessOptions};
pub use optim::{Objective, OptimizerConfig, RunReport};
pub use subclust::{subclust, ClusterModel, RadiusVector};
pub use synthgen::{FieldName, FieldProfile, LabelRuleSet};
