//! Index and nullity invariants `(i, ν)` for linear self-adjoint
//! boundary-value problems on `[0, 1]` and on rectangles, plus certifiers and
//! solvers for asymptotically linear problems built on them.

pub mod elliptic;
pub mod error;
pub mod index;
pub mod nonlinear;
pub mod numerics;
pub mod oracles;
pub mod problems;
pub mod spectral;

pub use error::{Error, Result};

/// `f64` matrix used throughout the engines.
pub type Matrix = numerics::DenseMatrix<f64>;
/// `f64` eigendecomposition.
pub type Eigen = numerics::EigenDecomposition<f64>;
