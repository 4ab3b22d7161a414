//! Accelerated proximal gradient methods for composite problems `f = h + psi`
//! that adapt to an unknown strong-convexity parameter when the optimal value
//! `f*` is known.
//!
//! The crate is organised as:
//!
//! * [`problems`]: smooth oracles, proximal penalties, gradient mapping.
//! * [`estimators`]: online strong-convexity estimate and the local-mu diagnostic.
//! * [`solvers`]: PGD, APG, the estimate-sequence schemes, FISTA and restart.
//! * [`verification`]: spectral ground-truth instances and bound checkers.
//! * [`data`]: LIBSVM loading, synthetic generators and experiment presets.
//! * [`experiment`]: reference values, experiment runner and CSV output.
//!
//! Batch workloads (instance batteries, solver sweeps) go through [`exec`],
//! which uses rayon when the `parallel` feature is enabled.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod estimators;
pub mod exec;
pub mod experiment;
pub mod problems;
pub mod rng;
pub mod solvers;
pub mod verification;

pub use error::{Error, Result};
pub use problems::{CompositeProblem, Penalty, Point, SmoothFunction};
pub use solvers::{SolverConfig, SolverKind, Trace};
