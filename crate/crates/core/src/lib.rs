//! Compatibility-matrix estimation for node classification on sparsely
//! labeled graphs.
//!
//! The pipeline has two steps. First, [`summary::factorized_summaries`]
//! condenses the graph and its seed labels into `k × k` path statistics
//! in `O(m k ℓmax)`. Second, an estimator in [`estimate`] fits a
//! compatibility matrix to those statistics, without touching the graph
//! again. [`propagation::linbp_propagate`] then labels the remaining nodes.
//!
//! ```
//! use compatest::prelude::*;
//!
//! let h = CompatibilityMatrix::skew(3, 8.0).unwrap();
//! let (g, labels) = generate_graph(&GeneratorSpec::new(3000, 30_000, h.clone(), 1)).unwrap();
//! let seeds = sample_seeds(&labels, 0.05, 2).unwrap();
//! let summaries = factorized_summaries(&g, &seeds, 5, Variant::Row).unwrap();
//! let est = dcer_estimate(&summaries, &EstimatorConfig::default(), 3).unwrap();
//! assert!(est.h_hat.l2_distance(&h) < 0.1);
//! let beliefs = linbp_propagate(&g, &seeds, &est.h_hat, &PropagationConfig::default()).unwrap();
//! let acc = macro_accuracy(&label_argmax(&beliefs), &labels, &seeds).unwrap();
//! assert!(acc > 0.8);
//! ```

pub mod cli;
pub mod compat;
pub mod error;
pub mod estimate;
pub mod experiment;
pub mod generator;
pub mod graph;
pub mod propagation;
pub mod summary;

pub use error::{Error, Result};

/// The types and functions most programs need.
pub mod prelude {
    pub use crate::compat::{
        center, extract_free_params, matrix_power, reconstruct_h, CompatibilityMatrix, FreeParams,
    };
    pub use crate::error::{Error, Result};
    pub use crate::estimate::{
        dce_energy, dce_estimate, dce_gradient, dcer_estimate, heuristic_compatibility,
        holdout_estimate, lce_estimate, mce_estimate, mce_from_summaries, EstimationResult,
        EstimatorConfig, Level, Method,
    };
    pub use crate::experiment::{macro_accuracy, run_experiment, sample_seeds, ExperimentConfig};
    pub use crate::generator::{generate, generate_graph, plan_block_counts, DegreeDist, GeneratorSpec};
    pub use crate::graph::{load_edge_list, load_labels, spectral_radius, BeliefMatrix, LabelSet, SparseGraph};
    pub use crate::propagation::{
        compute_epsilon, label_argmax, linbp_energy, linbp_propagate, rwr_propagate, PropagationConfig,
    };
    pub use crate::summary::{
        backtracking_summaries, factorized_summaries, nb_walk_counts_dense, normalize_statistics,
        weight_vector, GraphSummaries, Variant,
    };
}
