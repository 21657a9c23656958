//! Sparse Bayesian inference for binary symptom checkers.
//!
//! A patient is a sparse disease vector `d`; the binary knowledge matrix `A`
//! maps it to dense symptom intensities `z = A d`, and the checker only sees
//! `s = sign(z + w)`, possibly with gaps. [`gvamp`] recovers `d` by
//! generalized vector approximate message passing; [`baselines`] holds the
//! least-squares, lasso and support-scan comparisons; [`eval`] measures them
//! all on one dataset.
//!
//! ```no_run
//! use ampdx::prelude::*;
//!
//! let checker = SymptomChecker::demo();
//! let obs = encode_observation(&["redness", "dander"], &[], checker.catalog(), AbsenceMode::AssumeAbsent)?;
//! let result = checker.infer(&obs, Algorithm::Gvamp)?;
//! for (id, score) in result.top(3) {
//!     println!("{:<24} {score:.3}", checker.catalog().diseases()[id]);
//! }
//! # Ok::<(), ampdx::Error>(())
//! ```
//!
//! The `examples/` directory has one runnable program per capability.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod cli;
pub mod denoisers;
pub mod engine;
pub mod error;
pub mod eval;
pub mod gvamp;
pub mod model;
pub mod quadrature;
pub mod service;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::baselines::{solve_admm, solve_sparse_scan, solve_uls, AdmmConfig, SparseScanConfig};
    pub use crate::denoisers::{ChannelKind, ChannelModel, PriorModel};
    pub use crate::engine::{Algorithm, EngineConfig, Inference, SymptomChecker};
    pub use crate::error::{Error, Result};
    pub use crate::eval::{generate_synthetic, run_benchmark, GeneratorConfig, MatrixSource};
    pub use crate::gvamp::{run_gvamp, GvampConfig};
    pub use crate::model::{
        encode_observation, AbsenceMode, Catalog, KnowledgeMatrix, NoiseModel, Symptom, SymptomObservation,
        Vignette,
    };
}
