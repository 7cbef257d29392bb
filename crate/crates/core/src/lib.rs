//! Weighted conditional type operators `T = M_w E M_u` on finite measure spaces.
//!
//! The crate is organised in two layers that never share code paths:
//!
//! * closed forms ([`measure`], [`condop`], [`classify`], [`kernel`]) work on
//!   block-level conditional expectations and never build a matrix;
//! * the [`oracle`] layer materializes operators as dense complex matrices on
//!   `L²(μ)` and answers the same questions by brute force (power iteration,
//!   Hermitian functional calculus, SVD, shifted QR).
//!
//! Everything above them ([`gen`], [`instance`], [`report`]) wires the two
//! together into generators, an instance file format and reproducible reports.

// `!(x > 0.0)` is used on purpose: unlike `x <= 0.0` it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classify;
pub mod condop;
mod error;
pub mod gen;
pub mod instance;
pub mod kernel;
pub mod measure;
pub mod oracle;
pub mod report;

pub use nalgebra::Complex;

pub use classify::{CriterionVerdict, SpectrumReport, Status};
pub use condop::{CondOpSpec, PolarParts, Side};
pub use error::{Error, Result};
pub use instance::InstanceFile;
pub use kernel::KernelSpec;
pub use measure::{CFun, MeasureSpace, Partition, SupportSet};
pub use oracle::DenseOperator;

/// Complex scalar used throughout: a pair of `f64`.
pub type C64 = Complex<f64>;

/// Default relative support tolerance `τ_supp`.
pub const DEFAULT_SUPP_TOL: f64 = 1e-10;

/// Default relative tolerance for closed-form versus oracle comparisons.
pub const DEFAULT_TOL: f64 = 1e-8;

/// Default depth of the commuting-family check.
pub const DEFAULT_DEPTH: usize = 4;
