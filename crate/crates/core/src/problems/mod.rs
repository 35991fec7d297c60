//! Boundary-value problem classes, coefficient functions and validation.

mod function;
pub mod schema;

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

pub use function::MatrixFunction;
pub(crate) use function::spectral_radius;

use crate::error::{Error, Result};
use crate::numerics::{sym_eig, Lu};
use crate::Matrix;

/// Uniform sample count used when checking pointwise invariants.
pub const VALIDATION_POINTS: usize = 257;

const COMPAT_TOL: f64 = 1e-10;
const SYMPLECTIC_TOL: f64 = 1e-10;

/// Boundary conditions for `(Λx')' + Bx = 0`.
#[derive(Debug, Clone, PartialEq)]
pub enum SecondOrderBc {
    /// `x(0)cos α − Λ(0)x'(0)sin α = 0`, `x(1)cos β − Λ(1)x'(1)sin β = 0`.
    SturmLiouville { alpha: f64, beta: f64 },
    /// `x(1) = M x(0)`, `x'(1) = N x'(0)`.
    GeneralizedPeriodic { m: Matrix, n: Matrix },
}

impl SecondOrderBc {
    pub fn dirichlet() -> Self {
        Self::SturmLiouville {
            alpha: 0.0,
            beta: std::f64::consts::PI,
        }
    }

    pub fn periodic(n: usize) -> Self {
        Self::GeneralizedPeriodic {
            m: Matrix::identity(n),
            n: Matrix::identity(n),
        }
    }

    pub fn antiperiodic(n: usize) -> Self {
        Self::GeneralizedPeriodic {
            m: Matrix::scaled_identity(n, -1.0),
            n: Matrix::scaled_identity(n, -1.0),
        }
    }

    /// `M = aI`, `N = a⁻¹I`, compatible with any constant `Λ`.
    pub fn scalar(n: usize, a: f64) -> Self {
        Self::GeneralizedPeriodic {
            m: Matrix::scaled_identity(n, a),
            n: Matrix::scaled_identity(n, 1.0 / a),
        }
    }

    pub fn is_periodic_type(&self) -> bool {
        matches!(self, Self::GeneralizedPeriodic { .. })
    }
}

/// `(Λ(t)x')' + B(t)x = 0` on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondOrderProblem {
    pub lambda: MatrixFunction,
    pub b: MatrixFunction,
    pub bc: SecondOrderBc,
}

impl SecondOrderProblem {
    pub fn new(lambda: MatrixFunction, b: MatrixFunction, bc: SecondOrderBc) -> Result<Self> {
        let p = Self { lambda, b, bc };
        p.validate()?;
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.b.dim()
    }

    /// Same `Λ` and boundary data with a different `B`.
    pub fn with_b(&self, b: MatrixFunction) -> Self {
        Self {
            lambda: self.lambda.clone(),
            b,
            bc: self.bc.clone(),
        }
    }

    /// `inf_t λ_min(Λ(t))`.
    pub fn lambda_min_eigenvalue(&self) -> f64 {
        self.lambda
            .validation_samples(VALIDATION_POINTS)
            .iter()
            .map(|m| sym_eig(m).map_or(f64::NAN, |e| e.min_eigenvalue()))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.b.dim();
        if self.lambda.dim() != n {
            return Err(Error::ShapeMismatch(format!(
                "Lambda is {}x{} but B is {n}x{n}",
                self.lambda.dim(),
                self.lambda.dim()
            )));
        }
        let lmin = self.lambda_min_eigenvalue();
        if lmin.is_nan() || lmin <= 0.0 {
            return Err(Error::PositivityViolation(format!(
                "smallest eigenvalue of Lambda on the sample grid is {lmin:e}"
            )));
        }
        match &self.bc {
            SecondOrderBc::SturmLiouville { alpha, beta } => check_angles(*alpha, *beta),
            SecondOrderBc::GeneralizedPeriodic { m, n: nm } => {
                check_square(m, n, "M")?;
                check_square(nm, n, "N")?;
                if Lu::new(m).is_err() {
                    return Err(Error::InvalidMatrix("M must be invertible".into()));
                }
                let l0 = self.lambda.eval(0.0);
                let l1 = self.lambda.eval_left(1.0);
                let lhs = m.transpose().matmul(&l1).matmul(nm);
                let defect = (&lhs - &l0).max_abs();
                if defect > COMPAT_TOL * l0.max_abs().max(1.0) {
                    return Err(Error::CompatibilityViolation(format!(
                        "|M^T Lambda(1) N - Lambda(0)| = {defect:e}"
                    )));
                }
                Ok(())
            }
        }
    }
}

/// Boundary conditions for `ẋ = J B(t) x` with `x = (x₁, x₂)`.
#[derive(Debug, Clone, PartialEq)]
pub enum FirstOrderBc {
    /// `x₁(0)cos α + x₂(0)sin α = 0`, `x₁(1)cos β + x₂(1)sin β = 0`.
    Bolza { alpha: f64, beta: f64 },
    /// `x(1) = P x(0)` with `P` symplectic.
    Symplectic { p: Matrix },
}

/// `ẋ = J B(t) x` on `[0, 1]`, `B` of size `2n`.
#[derive(Debug, Clone, PartialEq)]
pub struct FirstOrderProblem {
    pub b: MatrixFunction,
    pub bc: FirstOrderBc,
    /// Index assigned to `B = 0` for symplectic end conditions.
    pub anchor: i64,
}

impl FirstOrderProblem {
    pub fn new(b: MatrixFunction, bc: FirstOrderBc) -> Result<Self> {
        let p = Self { b, bc, anchor: 0 };
        p.validate()?;
        Ok(p)
    }

    /// Half dimension `n`.
    pub fn half_dim(&self) -> usize {
        self.b.dim() / 2
    }

    pub fn with_b(&self, b: MatrixFunction) -> Self {
        Self {
            b,
            bc: self.bc.clone(),
            anchor: self.anchor,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.b.dim();
        if d == 0 || d % 2 != 0 {
            return Err(Error::ShapeMismatch(format!(
                "first-order coefficient must be 2n x 2n, got {d}x{d}"
            )));
        }
        match &self.bc {
            FirstOrderBc::Bolza { alpha, beta } => check_angles(*alpha, *beta),
            FirstOrderBc::Symplectic { p } => {
                check_square(p, d, "P")?;
                let defect = p.symplectic_defect();
                if defect > SYMPLECTIC_TOL * p.max_abs().powi(2).max(1.0) {
                    return Err(Error::NotSymplectic(format!(
                        "|P^T J P - J| = {defect:e}"
                    )));
                }
                Ok(())
            }
        }
    }
}

/// Domain of the Dirichlet Laplacian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Geometry {
    Interval { length: f64 },
    Rectangle { l1: f64, l2: f64 },
}

impl Geometry {
    pub fn lengths(&self) -> (f64, Option<f64>) {
        match *self {
            Geometry::Interval { length } => (length, None),
            Geometry::Rectangle { l1, l2 } => (l1, Some(l2)),
        }
    }
}

/// Scalar potential `b` on the domain.
#[derive(Clone)]
pub enum ScalarField {
    Constant(f64),
    /// Values on a uniform tensor grid including the boundary, `values[i][j]`
    /// at `(i·L1/(nx−1), j·L2/(ny−1))`, bilinear interpolation. Intervals use a
    /// single row.
    Sampled(Vec<Vec<f64>>),
    /// Closure `(x, y) ↦ b`; `y` is 0 on intervals.
    Function(Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant(c) => f.debug_tuple("Constant").field(c).finish(),
            Self::Sampled(v) => f
                .debug_struct("Sampled")
                .field("shape", &(v.len(), v.first().map_or(0, Vec::len)))
                .finish(),
            Self::Function(_) => f.write_str("Function(..)"),
        }
    }
}

impl ScalarField {
    pub fn function(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::Function(Arc::new(f))
    }

    /// Value at `(x, y)` of a domain with side lengths `(l1, l2)`.
    pub fn eval(&self, x: f64, y: f64, l1: f64, l2: f64) -> f64 {
        match self {
            Self::Constant(c) => *c,
            Self::Function(f) => f(x, y),
            Self::Sampled(v) => {
                let nx = v.len();
                let ny = v[0].len();
                let (i, wx) = locate(x / l1, nx);
                if ny == 1 {
                    // interval stored as a column
                    return v[i][0] * (1.0 - wx) + v[(i + 1).min(nx - 1)][0] * wx;
                }
                if nx == 1 {
                    let (j, wy) = locate(x / l1, ny);
                    return v[0][j] * (1.0 - wy) + v[0][(j + 1).min(ny - 1)] * wy;
                }
                let (j, wy) = locate(y / l2, ny);
                let (i1, j1) = ((i + 1).min(nx - 1), (j + 1).min(ny - 1));
                (1.0 - wx) * ((1.0 - wy) * v[i][j] + wy * v[i][j1])
                    + wx * ((1.0 - wy) * v[i1][j] + wy * v[i1][j1])
            }
        }
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self {
            Self::Constant(c) => Some(*c),
            _ => None,
        }
    }
}

fn locate(u: f64, n: usize) -> (usize, f64) {
    if n < 2 {
        return (0, 0.0);
    }
    let x = u.clamp(0.0, 1.0) * (n - 1) as f64;
    let k = (x.floor() as usize).min(n - 2);
    (k, x - k as f64)
}

/// `Δu + b u = 0` with Dirichlet conditions on an interval or rectangle.
#[derive(Debug, Clone)]
pub struct EllipticProblem {
    pub geometry: Geometry,
    pub b: ScalarField,
}

impl EllipticProblem {
    pub fn new(geometry: Geometry, b: ScalarField) -> Result<Self> {
        let p = Self { geometry, b };
        p.validate()?;
        Ok(p)
    }

    /// `sup |b|` over a sample grid (exact for constant and sampled fields).
    pub fn b_sup(&self) -> f64 {
        match &self.b {
            ScalarField::Constant(c) => c.abs(),
            ScalarField::Sampled(v) => v.iter().flatten().fold(0.0, |a, x| a.max(x.abs())),
            ScalarField::Function(_) => {
                let (l1, l2) = self.geometry.lengths();
                let l2 = l2.unwrap_or(1.0);
                let m = 129;
                let mut s: f64 = 0.0;
                for i in 0..m {
                    for j in 0..m {
                        let x = l1 * i as f64 / (m - 1) as f64;
                        let y = l2 * j as f64 / (m - 1) as f64;
                        s = s.max(self.b.eval(x, y, l1, l2).abs());
                    }
                }
                s
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (l1, l2) = self.geometry.lengths();
        if !(l1 > 0.0 && l1.is_finite()) || l2.is_some_and(|l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::DomainError(format!(
                "side lengths must be positive, got {:?}",
                self.geometry
            )));
        }
        match &self.b {
            ScalarField::Sampled(v) => {
                let ny = v.first().map_or(0, Vec::len);
                if v.is_empty() || ny == 0 || v.iter().any(|r| r.len() != ny) {
                    return Err(Error::ShapeMismatch("b grid must be rectangular".into()));
                }
                if matches!(self.geometry, Geometry::Rectangle { .. }) && (v.len() < 2 || ny < 2) {
                    return Err(Error::ShapeMismatch(
                        "rectangle potentials need at least 2x2 samples".into(),
                    ));
                }
            }
            ScalarField::Constant(_) | ScalarField::Function(_) => {}
        }
        let s = self.b_sup();
        if !s.is_finite() {
            return Err(Error::InvalidMatrix("b must be bounded".into()));
        }
        Ok(())
    }
}

/// Any validated problem.
#[derive(Debug, Clone)]
pub enum Problem {
    SecondOrder(SecondOrderProblem),
    FirstOrder(FirstOrderProblem),
    Elliptic(EllipticProblem),
}

impl Problem {
    pub fn validate(&self) -> Result<()> {
        match self {
            Problem::SecondOrder(p) => p.validate(),
            Problem::FirstOrder(p) => p.validate(),
            Problem::Elliptic(p) => p.validate(),
        }
    }
}

/// Checks every invariant of `p` and hands it back unchanged.
pub fn validate(p: Problem) -> Result<Problem> {
    p.validate()?;
    Ok(p)
}

/// `B(t) + λ·I`.
pub fn shift(b: &MatrixFunction, lambda: f64) -> MatrixFunction {
    b.shift(lambda)
}

/// Segment `s ↦ (1 − s)B₀ + sB₁`.
#[derive(Debug, Clone, PartialEq)]
pub struct PencilPath {
    pub b0: MatrixFunction,
    pub b1: MatrixFunction,
    /// Set when `B₁ − B₀ ⪰ ε·I` with `ε > 0` on the sample grid.
    pub monotone: bool,
    /// Smallest sampled eigenvalue of `B₁ − B₀`, clamped at 0.
    pub epsilon: f64,
}

impl PencilPath {
    pub fn at(&self, s: f64) -> MatrixFunction {
        MatrixFunction::lerp(&self.b0, &self.b1, s)
    }
}

/// Builds the pencil `B₀ → B₁` and records whether it is monotone.
pub fn path(b0: &MatrixFunction, b1: &MatrixFunction) -> Result<PencilPath> {
    if b0.dim() != b1.dim() {
        return Err(Error::ShapeMismatch(format!(
            "path endpoints are {}x{} and {}x{}",
            b0.dim(),
            b0.dim(),
            b1.dim(),
            b1.dim()
        )));
    }
    let eps = min_gap(b0, b1);
    Ok(PencilPath {
        b0: b0.clone(),
        b1: b1.clone(),
        monotone: eps > 0.0,
        epsilon: eps.max(0.0),
    })
}

/// `inf_t λ_min(B₁(t) − B₀(t))` on the validation grid.
pub fn min_gap(b0: &MatrixFunction, b1: &MatrixFunction) -> f64 {
    let diff = MatrixFunction::lin_comb(1.0, b1, -1.0, b0);
    diff.validation_samples(VALIDATION_POINTS)
        .iter()
        .map(|m| sym_eig(m).map_or(f64::NAN, |e| e.min_eigenvalue()))
        .fold(f64::INFINITY, f64::min)
}

fn check_angles(alpha: f64, beta: f64) -> Result<()> {
    let pi = std::f64::consts::PI;
    if !(0.0..pi).contains(&alpha) {
        return Err(Error::AngleOutOfRange(format!(
            "alpha must lie in [0, pi), got {alpha}"
        )));
    }
    if !(beta > 0.0 && beta <= pi) {
        return Err(Error::AngleOutOfRange(format!(
            "beta must lie in (0, pi], got {beta}"
        )));
    }
    Ok(())
}

fn check_square(m: &Matrix, n: usize, name: &str) -> Result<()> {
    if m.rows() != n || m.cols() != n {
        return Err(Error::ShapeMismatch(format!(
            "{name} is {}x{}, expected {n}x{n}",
            m.rows(),
            m.cols()
        )));
    }
    if !m.is_finite() {
        return Err(Error::InvalidMatrix(format!("{name} has non-finite entries")));
    }
    Ok(())
}
