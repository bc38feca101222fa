//! Numerical laboratory for the equidistribution of common zeros of random
//! holomorphic sections over sequences of Hermitian line bundles on the model
//! spaces CP^1 and CP^1 x CP^1.
//!
//! The crate builds the chain
//!
//!   metric weights -> L^2 Gram matrices -> orthonormal frames -> Bergman
//!   kernels / Fubini-Study currents -> random section ensembles -> common
//!   zero sets -> discrepancy and rate statistics,
//!
//! together with the bookkeeping needed to verify the quantitative
//! assumptions (two-sided Bergman bounds, curvature convergence rates,
//! intermediate degrees, dimension growth) on concrete bundle sequences.

pub mod basis;
pub mod bergman;
pub mod ddc;
pub mod discrepancy;
pub mod ensembles;
pub mod error;
pub mod field;
pub mod grid;
pub mod growth;
pub mod linalg;
pub mod metrics;
pub mod numeric;
pub mod rng;
pub mod space;
pub mod testfn;
pub mod zeros;

pub use error::{CoreError, Result};
pub use space::{ChartPoint, FactorPoint, ModelSpace};
