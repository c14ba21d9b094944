//! Group-aware random-walk node embeddings and their fairness evaluation.
//!
//! The pipeline reweights a graph's edges so walks cross (or avoid) group
//! boundaries, samples second-order random walks, trains skip-gram
//! embeddings, and scores how well label propagation over those embeddings
//! recovers a sensitive attribute (awareness, disparity) and a control
//! attribute (performance).

pub mod config;
pub mod crosswalk;
pub mod embed;
pub mod error;
pub mod eval;
pub mod graph;
pub mod metrics;
pub mod pca;
pub mod pipeline;
pub mod propagation;
pub mod rng;
pub mod sbm;
pub mod sweep;
pub mod walk;
pub mod weights;

pub use config::{ExperimentConfig, Intervention, Preset};
pub use error::{Error, Result};
pub use eval::EvaluationReport;
pub use graph::{AttributedGraph, GroupPartition};
pub use pipeline::{run_experiment, ExperimentReport};
pub use sweep::{run_sweep, summarize, SweepSpec};
