//! Asymptotically linear problems: hypothesis certification, a
//! homotopy-Newton collocation solver and the dual variational minimizer.
//!
//! A nonlinear problem pairs a linear template (its boundary data and, for
//! second-order systems, `Λ`) with a pointwise force `F(t, x)`:
//!
//! * second order: `(Λx')' + F(t, x) = 0`,
//! * first order: `ẋ = J F(t, x)`,
//! * elliptic: `Δu + f(x, u) = 0` with Dirichlet data.
//!
//! The `B` stored in the template is ignored.

mod certify;
mod discrete;
mod dual;
mod solve;

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::problems::{EllipticProblem, Geometry, MatrixFunction, Problem, ScalarField};
use crate::Matrix;

pub use certify::{
    certify, CertificateReport, CertifyData, HypothesisRecord, Part, Status, Theorem, Verdict,
};
pub use dual::{dual_solve, fenchel_conjugate, ConjugatePoint, DualOptions};
pub use solve::{discrete_distance, solve_bvp, CertificateLink, DualDiagnostics, GridCheck, Solution, SolveOptions};

/// Position: `[t, 0]` on intervals, `[x, y]` on rectangles.
pub type Point = [f64; 2];
pub type VectorField = Arc<dyn Fn(Point, &[f64]) -> Vec<f64> + Send + Sync>;
pub type MatrixField = Arc<dyn Fn(Point, &[f64]) -> Matrix + Send + Sync>;
pub type ScalarMap = Arc<dyn Fn(Point, &[f64]) -> f64 + Send + Sync>;

/// A `C²` potential with its gradient and Hessian.
#[derive(Clone)]
pub struct Potential {
    pub value: ScalarMap,
    pub gradient: VectorField,
    pub hessian: MatrixField,
}

impl Potential {
    pub fn new(
        value: impl Fn(Point, &[f64]) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(Point, &[f64]) -> Vec<f64> + Send + Sync + 'static,
        hessian: impl Fn(Point, &[f64]) -> Matrix + Send + Sync + 'static,
    ) -> Self {
        Self {
            value: Arc::new(value),
            gradient: Arc::new(gradient),
            hessian: Arc::new(hessian),
        }
    }
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Potential(..)")
    }
}

/// The pointwise force together with whatever structure is known about it.
#[derive(Clone)]
pub struct Nonlinearity {
    pub dim: usize,
    pub force: VectorField,
    /// `∂F/∂x`; central differences are used when absent.
    pub jacobian: Option<MatrixField>,
    /// `B(t, x)` in `F = B(t, x)x + h(t, x)`.
    pub slope: Option<MatrixField>,
    pub remainder: Option<VectorField>,
    /// `V` with `F = ∇V`.
    pub potential: Option<Potential>,
}

impl fmt::Debug for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Nonlinearity")
            .field("dim", &self.dim)
            .field("jacobian", &self.jacobian.is_some())
            .field("slope", &self.slope.is_some())
            .field("remainder", &self.remainder.is_some())
            .field("potential", &self.potential.is_some())
            .finish()
    }
}

impl Nonlinearity {
    pub fn new(dim: usize, force: impl Fn(Point, &[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        Self {
            dim,
            force: Arc::new(force),
            jacobian: None,
            slope: None,
            remainder: None,
            potential: None,
        }
    }

    pub fn with_jacobian(mut self, j: impl Fn(Point, &[f64]) -> Matrix + Send + Sync + 'static) -> Self {
        self.jacobian = Some(Arc::new(j));
        self
    }

    /// `F = ∇V`, with `∂F/∂x = V''`.
    pub fn from_potential(dim: usize, v: Potential) -> Self {
        let g = v.gradient.clone();
        Self {
            dim,
            force: g,
            jacobian: Some(v.hessian.clone()),
            slope: None,
            remainder: None,
            potential: Some(v),
        }
    }

    /// `F = B(t, x)x + h(t, x)`.
    pub fn asymptotically_linear(
        dim: usize,
        slope: impl Fn(Point, &[f64]) -> Matrix + Send + Sync + 'static,
        remainder: impl Fn(Point, &[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        let slope: MatrixField = Arc::new(slope);
        let remainder: VectorField = Arc::new(remainder);
        let (s, r) = (slope.clone(), remainder.clone());
        let force: VectorField = Arc::new(move |p, x| {
            let mut f = s(p, x).matvec(x);
            for (fi, hi) in f.iter_mut().zip(r(p, x)) {
                *fi += hi;
            }
            f
        });
        Self {
            dim,
            force,
            jacobian: None,
            slope: Some(slope),
            remainder: Some(remainder),
            potential: None,
        }
    }

    /// `F = B(t)x + h(t)` for a coefficient of a one-dimensional template.
    pub fn linear(b: MatrixFunction, forcing: impl Fn(Point) -> Vec<f64> + Send + Sync + 'static) -> Self {
        let dim = b.dim();
        let bj = b.clone();
        let forcing = Arc::new(forcing);
        let fr = forcing.clone();
        Self::asymptotically_linear(dim, move |p, _| b.eval(p[0]), move |p, _| fr(p))
            .with_jacobian(move |p, _| bj.eval(p[0]))
    }

    pub fn eval(&self, p: Point, x: &[f64]) -> Vec<f64> {
        (self.force)(p, x)
    }

    /// `∂F/∂x`, by central differences when no Jacobian was supplied.
    pub fn jacobian_at(&self, p: Point, x: &[f64]) -> Matrix {
        if let Some(j) = &self.jacobian {
            return j(p, x);
        }
        let n = x.len();
        let mut out = Matrix::zeros(n, n);
        let mut xp = x.to_vec();
        for j in 0..n {
            let h = 1e-6 * (1.0 + x[j].abs());
            xp[j] = x[j] + h;
            let fp = self.eval(p, &xp);
            xp[j] = x[j] - h;
            let fm = self.eval(p, &xp);
            xp[j] = x[j];
            for i in 0..n {
                out[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        out
    }

    /// Checks finiteness on a sample box of half-width `radius`, and the
    /// splitting `F = Bx + h` when both parts are supplied.
    pub fn validate(&self, points: &[Point], radius: f64) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let mut states: Vec<Vec<f64>> = vec![vec![0.0; self.dim]];
        for k in 0..self.dim {
            for s in [-radius, radius] {
                let mut e = vec![0.0; self.dim];
                e[k] = s;
                states.push(e);
            }
        }
        for _ in 0..16 {
            states.push((0..self.dim).map(|_| rng.gen_range(-radius..=radius)).collect());
        }
        for &p in points {
            for x in &states {
                let f = self.eval(p, x);
                if f.len() != self.dim {
                    return Err(Error::ShapeMismatch(format!(
                        "force returns {} components, expected {}",
                        f.len(),
                        self.dim
                    )));
                }
                if f.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NumericalBlowup(format!("force is not finite at {p:?}, {x:?}")));
                }
                if let (Some(s), Some(h)) = (&self.slope, &self.remainder) {
                    let mut g = s(p, x).matvec(x);
                    for (gi, hi) in g.iter_mut().zip(h(p, x)) {
                        *gi += hi;
                    }
                    let scale = 1.0 + f.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
                    let err = f.iter().zip(&g).fold(0.0_f64, |a, (u, v)| a.max((u - v).abs()));
                    if err > 1e-10 * scale {
                        return Err(Error::DomainError(format!(
                            "force differs from B(t,x)x + h(t,x) by {err:e} at {p:?}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// State dimension of a template: `n`, `2n`, or 1 for elliptic problems.
pub fn state_dim(template: &Problem) -> usize {
    match template {
        Problem::SecondOrder(p) => p.dim(),
        Problem::FirstOrder(p) => p.b.dim(),
        Problem::Elliptic(_) => 1,
    }
}

/// A linear template with a nonlinear force.
#[derive(Debug, Clone)]
pub struct NonlinearProblem {
    pub template: Problem,
    pub nonlinearity: Nonlinearity,
}

impl NonlinearProblem {
    pub fn new(template: Problem, nonlinearity: Nonlinearity) -> Result<Self> {
        template.validate()?;
        let n = state_dim(&template);
        if nonlinearity.dim != n {
            return Err(Error::DimensionMismatch(format!(
                "template has state dimension {n}, nonlinearity {}",
                nonlinearity.dim
            )));
        }
        let points: Vec<Point> = match &template {
            Problem::Elliptic(EllipticProblem {
                geometry: Geometry::Rectangle { l1, l2 },
                ..
            }) => (0..5)
                .flat_map(|i| (0..5).map(move |j| [l1 * i as f64 / 4.0, l2 * j as f64 / 4.0]))
                .collect(),
            Problem::Elliptic(EllipticProblem {
                geometry: Geometry::Interval { length },
                ..
            }) => (0..9).map(|i| [length * i as f64 / 8.0, 0.0]).collect(),
            _ => (0..9).map(|i| [i as f64 / 8.0, 0.0]).collect(),
        };
        nonlinearity.validate(&points, 10.0)?;
        Ok(Self { template, nonlinearity })
    }
}

/// A linear coefficient in the form the template expects.
#[derive(Debug, Clone)]
pub enum Coefficient {
    Matrix(MatrixFunction),
    Scalar(ScalarField),
}

impl From<MatrixFunction> for Coefficient {
    fn from(m: MatrixFunction) -> Self {
        Self::Matrix(m)
    }
}

impl From<ScalarField> for Coefficient {
    fn from(s: ScalarField) -> Self {
        Self::Scalar(s)
    }
}

impl Coefficient {
    /// The template with its `B` (or `b`) replaced by this coefficient.
    pub fn problem_with(&self, template: &Problem) -> Result<Problem> {
        let p = match (template, self) {
            (Problem::SecondOrder(p), Coefficient::Matrix(b)) => Problem::SecondOrder(p.with_b(b.clone())),
            (Problem::FirstOrder(p), Coefficient::Matrix(b)) => Problem::FirstOrder(p.with_b(b.clone())),
            (Problem::Elliptic(p), Coefficient::Scalar(b)) => Problem::Elliptic(EllipticProblem {
                geometry: p.geometry,
                b: b.clone(),
            }),
            (Problem::Elliptic(_), Coefficient::Matrix(_)) => {
                return Err(Error::ShapeMismatch("elliptic templates take a scalar field".into()))
            }
            (_, Coefficient::Scalar(_)) => {
                return Err(Error::ShapeMismatch("ODE templates take a matrix function".into()))
            }
        };
        p.validate()?;
        Ok(p)
    }

    /// Value at a physical point.
    pub fn at(&self, template: &Problem, p: Point) -> Matrix {
        match (self, template) {
            (Coefficient::Matrix(b), _) => b.eval(p[0]),
            (Coefficient::Scalar(b), Problem::Elliptic(e)) => {
                let (l1, l2) = e.geometry.lengths();
                Matrix::scaled_identity(1, b.eval(p[0], p[1], l1, l2.unwrap_or(1.0)))
            }
            (Coefficient::Scalar(b), _) => Matrix::scaled_identity(1, b.eval(p[0], p[1], 1.0, 1.0)),
        }
    }

    /// Values on a sample grid covering the domain.
    pub fn samples(&self, template: &Problem) -> Vec<Matrix> {
        match (self, template) {
            (Coefficient::Matrix(b), _) => b.validation_samples(crate::problems::VALIDATION_POINTS),
            (Coefficient::Scalar(_), Problem::Elliptic(e)) => {
                let (l1, l2) = e.geometry.lengths();
                let m = 65;
                let ys: Vec<f64> = match l2 {
                    Some(l2) => (0..m).map(|j| l2 * j as f64 / (m - 1) as f64).collect(),
                    None => vec![0.0],
                };
                (0..m)
                    .flat_map(|i| ys.iter().map(move |&y| [l1 * i as f64 / (m - 1) as f64, y]))
                    .map(|p| self.at(template, p))
                    .collect()
            }
            (Coefficient::Scalar(_), _) => (0..65).map(|i| self.at(template, [i as f64 / 64.0, 0.0])).collect(),
        }
    }

    pub fn shifted(&self, mu: f64) -> Self {
        match self {
            Coefficient::Matrix(b) => Coefficient::Matrix(b.shift(mu)),
            Coefficient::Scalar(ScalarField::Constant(c)) => Coefficient::Scalar(ScalarField::Constant(c + mu)),
            Coefficient::Scalar(ScalarField::Sampled(v)) => Coefficient::Scalar(ScalarField::Sampled(
                v.iter().map(|r| r.iter().map(|x| x + mu).collect()).collect(),
            )),
            Coefficient::Scalar(ScalarField::Function(f)) => {
                let f = f.clone();
                Coefficient::Scalar(ScalarField::function(move |x, y| f(x, y) + mu))
            }
        }
    }

    /// Zero coefficient of the right shape for `template`.
    pub fn zero(template: &Problem) -> Self {
        match template {
            Problem::SecondOrder(p) => Coefficient::Matrix(MatrixFunction::zero(p.dim())),
            Problem::FirstOrder(p) => Coefficient::Matrix(MatrixFunction::zero(p.b.dim())),
            Problem::Elliptic(_) => Coefficient::Scalar(ScalarField::Constant(0.0)),
        }
    }
}
