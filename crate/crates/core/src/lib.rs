//! Algebraic multigrid with root-node, energy-minimizing interpolation.
//!
//! The crate provides three setup methods (root-node, smoothed aggregation
//! and classical C/F), multigrid cycles with Krylov acceleration, work-unit
//! accounting, dense reference oracles for the interpolation theory, and
//! generators for a family of model problems.

// `!(x > 0.0)` deliberately treats NaN as failure; index loops mirror the formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod aggregation;
pub mod complexity;
pub mod cycle;
pub mod error;
pub mod hierarchy;
pub mod interpolation;
pub mod problems;
pub mod relax;
pub mod sparse;
pub mod spectral;
pub mod strength;
pub mod theory;

pub use complexity::{Bucket, WorkLedger};
pub use error::{AmgError, Result};
pub use hierarchy::{setup, Hierarchy, Method, SetupOptions};
pub use sparse::SparseMatrix;
