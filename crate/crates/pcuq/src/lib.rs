//! Polynomial chaos surrogates for forward uncertainty propagation.
//!
//! The crate builds spectral surrogates of expensive forward models by
//! non-intrusive spectral projection on full-tensor Gauss grids, then runs
//! the downstream studies that surrogates make cheap: distribution and
//! percentile tracking, variance-based global sensitivity analysis
//! (first-order, second-order, total, and aggregate interaction indices),
//! exceedance-risk estimation, and chance-constrained design search.
//!
//! Model evaluations can come from the built-in test models or from any
//! external simulator through a node/result CSV protocol: write the
//! quadrature nodes, run the solver per node, ingest the results, project.

pub mod analysis;
pub mod basis;
pub mod cli;
pub mod design;
pub mod error;
pub mod models;
pub mod projection;
pub mod quadrature;
pub mod sensitivity;
pub mod util;

pub use basis::{MultiIndex, PcBasis, PolyFamily};
pub use error::{Error, Result};
pub use projection::{EvaluationTable, PcSurrogate};
pub use quadrature::QuadratureRule;
