//! Dense small-matrix kernels.
//!
//! Everything here is generic over [`Real`], so the same routines run in
//! `f32` or `f64`. The index engines above this layer use the `f64`
//! aliases exported from the crate root.

mod eig;
mod expm;
mod inertia;
mod lu;
mod matrix;
mod ode;
mod svd;

pub use eig::{sym_eig, EigenDecomposition};
pub use expm::expm;
pub use inertia::{block_chain_inertia, dense_inertia, BlockChain, Inertia};
pub use lu::Lu;
pub use matrix::DenseMatrix;
pub use ode::{integrate_linear, magnus4_propagate, rk4_propagate};
pub use svd::{rank_deficiency, rank_deficiency_scaled, svd, Svd};

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign};

/// Floating-point scalar accepted by the kernels.
pub trait Real:
    Float + FromPrimitive + NumAssign + Sum + Debug + Display + Send + Sync + Default + 'static
{
    /// Converts an `f64` literal into the scalar type.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Default relative threshold for rank decisions.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;
