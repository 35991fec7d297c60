//! Discretizations shared by the Newton and dual solvers.
//!
//! Every template becomes a system `R(z) = A z − Σ_p Q_p F_p(x_p) = 0` with
//! `x_p = Σ E_p z` the state at evaluation point `p`. Second-order problems
//! use linear elements with a lumped mass (so `Q_p = w_p E_pᵀ` and `A` is
//! symmetric), first-order problems the implicit midpoint rule, and
//! rectangles sine-series collocation on the interior grid.

use crate::error::{Error, Result};
use crate::numerics::Lu;
use crate::problems::{FirstOrderBc, FirstOrderProblem, Geometry, Problem, SecondOrderBc, SecondOrderProblem};
use crate::Matrix;

use super::{Coefficient, Nonlinearity, Point};

const GAUSS_X: [f64; 3] = [0.112_701_665_379_258_31, 0.5, 0.887_298_334_620_741_7];
const GAUSS_W: [f64; 3] = [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0];

pub(crate) type Stencil = Vec<(usize, Matrix)>;

pub(crate) struct Discretization {
    pub n: usize,
    pub blocks: usize,
    pub a: Matrix,
    /// Evaluation points in the model frame.
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    pub eval: Vec<Stencil>,
    pub inject: Vec<Stencil>,
    /// Dividing row block `i` by `row_scale[i]` gives the strong-form residual.
    pub row_scale: Vec<f64>,
    /// Quadrature weight of row block `i`; zero marks boundary rows.
    pub row_weight: Vec<f64>,
    /// Output nodes in the model frame.
    pub nodes: Vec<Point>,
    pub node_map: Vec<Stencil>,
    pub symmetric: bool,
    /// Model coordinates are physical ones scaled by this factor...
    pub stretch: f64,
    /// ...and the model force is the physical one times this factor.
    pub scale: f64,
}

/// Finer grid size used for the second solve.
pub(crate) fn refine(template: &Problem, size: usize) -> usize {
    match template {
        Problem::Elliptic(e) if matches!(e.geometry, Geometry::Rectangle { .. }) => 2 * size + 1,
        _ => 2 * size,
    }
}

impl Discretization {
    pub fn build(template: &Problem, size: usize) -> Result<Self> {
        match template {
            Problem::SecondOrder(p) => second_order(p, size, 1.0, 1.0),
            Problem::FirstOrder(p) => first_order(p, size),
            Problem::Elliptic(e) => match e.geometry {
                Geometry::Interval { length } => {
                    let unit = SecondOrderProblem::new(
                        crate::problems::MatrixFunction::scalar(1, 1.0),
                        crate::problems::MatrixFunction::zero(1),
                        SecondOrderBc::dirichlet(),
                    )?;
                    second_order(&unit, size, length, length * length)
                }
                Geometry::Rectangle { l1, l2 } => rectangle(l1, l2, size),
            },
        }
    }

    pub fn dof(&self) -> usize {
        self.blocks * self.n
    }

    pub fn phys(&self, p: Point) -> Point {
        [self.stretch * p[0], p[1]]
    }

    /// `B` at every evaluation point, in the model frame.
    pub fn coefficient(&self, c: &Coefficient, template: &Problem) -> Vec<Matrix> {
        self.points
            .iter()
            .map(|&p| c.at(template, self.phys(p)).scale(self.scale))
            .collect()
    }

    fn apply(&self, st: &Stencil, z: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = vec![0.0; n];
        for (j, c) in st {
            let zj = &z[j * n..(j + 1) * n];
            for (r, xr) in x.iter_mut().enumerate() {
                *xr += (0..n).map(|k| c[(r, k)] * zj[k]).sum::<f64>();
            }
        }
        x
    }

    pub fn states(&self, z: &[f64]) -> Vec<Vec<f64>> {
        self.eval.iter().map(|st| self.apply(st, z)).collect()
    }

    pub fn node_values(&self, z: &[f64]) -> Vec<Vec<f64>> {
        self.node_map.iter().map(|st| self.apply(st, z)).collect()
    }

    /// `A z − Σ Q_p f_p`.
    pub fn residual(&self, z: &[f64], forces: &[Vec<f64>]) -> Vec<f64> {
        let n = self.n;
        let mut r = self.a.matvec(z);
        for (st, f) in self.inject.iter().zip(forces) {
            for (i, c) in st {
                for a in 0..n {
                    r[i * n + a] -= (0..n).map(|k| c[(a, k)] * f[k]).sum::<f64>();
                }
            }
        }
        r
    }

    /// `A − Σ Q_p D_p E_p`.
    pub fn jacobian(&self, d: &[Matrix]) -> Matrix {
        let n = self.n;
        let mut j = self.a.clone();
        for ((qi, ej), dp) in self.inject.iter().zip(&self.eval).zip(d) {
            for (i, q) in qi {
                let qd = q.matmul(dp);
                for (k, e) in ej {
                    let blk = qd.matmul(e);
                    for a in 0..n {
                        for b in 0..n {
                            j[(i * n + a, k * n + b)] -= blk[(a, b)];
                        }
                    }
                }
            }
        }
        j
    }

    /// Strong-form discrete L² norm of the interior rows and max norm of the
    /// boundary rows.
    pub fn norms(&self, r: &[f64]) -> (f64, f64) {
        let n = self.n;
        let mut l2 = 0.0;
        let mut bd: f64 = 0.0;
        for (i, (&s, &w)) in self.row_scale.iter().zip(&self.row_weight).enumerate() {
            let blk = &r[i * n..(i + 1) * n];
            if w == 0.0 {
                bd = blk.iter().fold(bd, |a, v| a.max((v / s).abs()));
            } else {
                l2 += w * blk.iter().map(|v| (v / s).powi(2)).sum::<f64>();
            }
        }
        (l2.sqrt(), bd)
    }
}

/// Forces and their Jacobians along the homotopy
/// `F_λ = λ·B₁x + (1 − λ)·F(x)`.
pub(crate) struct System<'a> {
    pub disc: &'a Discretization,
    pub nl: &'a Nonlinearity,
    pub b1: Vec<Matrix>,
}

impl System<'_> {
    pub fn forces(&self, z: &[f64], lam: f64) -> (Vec<Vec<f64>>, Vec<Matrix>) {
        let d = self.disc;
        let xs = d.states(z);
        let mut fs = Vec::with_capacity(xs.len());
        let mut js = Vec::with_capacity(xs.len());
        for ((x, &p), b1) in xs.iter().zip(&d.points).zip(&self.b1) {
            let lin = b1.matvec(x);
            if lam == 1.0 {
                fs.push(lin);
                js.push(b1.clone());
                continue;
            }
            let q = d.phys(p);
            let f = self.nl.eval(q, x);
            let jf = self.nl.jacobian_at(q, x);
            fs.push(lin.iter().zip(&f).map(|(l, f)| lam * l + (1.0 - lam) * d.scale * f).collect());
            js.push(b1.scale(lam).axpy((1.0 - lam) * d.scale, &jf));
        }
        (fs, js)
    }

    pub fn merit(&self, z: &[f64], lam: f64) -> f64 {
        let (f, _) = self.forces(z, lam);
        let (a, b) = self.disc.norms(&self.disc.residual(z, &f));
        a.max(b)
    }
}

pub(crate) enum NewtonFailure {
    Singular(String),
    Diverged(String),
}

/// Damped Newton at fixed `λ`. Returns the iterate, iteration count and the
/// final merit.
pub(crate) fn newton(
    sys: &System<'_>,
    z0: &[f64],
    lam: f64,
    tol: f64,
    max_iter: usize,
) -> std::result::Result<(Vec<f64>, usize, f64), NewtonFailure> {
    let d = sys.disc;
    let mut z = z0.to_vec();
    let mut m = sys.merit(&z, lam);
    if !m.is_finite() {
        return Err(NewtonFailure::Diverged("non-finite residual at the start".into()));
    }
    for it in 0..max_iter {
        if m <= 0.01 * tol {
            return Ok((z, it, m));
        }
        let (f, jd) = sys.forces(&z, lam);
        let r = d.residual(&z, &f);
        let jac = d.jacobian(&jd);
        let lu = Lu::new(&jac).map_err(|e| NewtonFailure::Singular(e.to_string()))?;
        if lu.pivot_ratio < 1e-14 {
            return Err(NewtonFailure::Singular(format!("pivot ratio {:e}", lu.pivot_ratio)));
        }
        let step = lu.solve_vec(&r);
        let mut alpha = 1.0;
        let mut accepted = false;
        while alpha >= 1.0 / 1024.0 {
            let trial: Vec<f64> = z.iter().zip(&step).map(|(a, s)| a - alpha * s).collect();
            let mt = sys.merit(&trial, lam);
            if mt.is_finite() && mt <= (1.0 - 1e-4 * alpha) * m {
                z = trial;
                m = mt;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            if m <= tol {
                return Ok((z, it, m));
            }
            return Err(NewtonFailure::Diverged(format!("line search stalled at residual {m:e}")));
        }
    }
    if m <= tol {
        Ok((z, max_iter, m))
    } else {
        Err(NewtonFailure::Diverged(format!(
            "{max_iter} iterations, residual {m:e}"
        )))
    }
}

fn add_block(a: &mut Matrix, n: usize, i: usize, j: usize, b: &Matrix) {
    for r in 0..n {
        for c in 0..n {
            a[(i * n + r, j * n + c)] += b[(r, c)];
        }
    }
}

fn second_order(p: &SecondOrderProblem, elements: usize, stretch: f64, scale: f64) -> Result<Discretization> {
    let n = p.dim();
    let ne = elements.max(2);
    let h = 1.0 / ne as f64;
    let id = Matrix::identity(n);
    let zero = Matrix::zeros(n, n);
    let mut diag = vec![zero.clone(); ne + 1];
    let mut off = vec![zero.clone(); ne];
    for e in 0..ne {
        let t0 = e as f64 * h;
        let mut lbar = zero.clone();
        for q in 0..3 {
            lbar = lbar.axpy(GAUSS_W[q], &p.lambda.eval(t0 + GAUSS_X[q] * h));
        }
        let stiff = lbar.scale(1.0 / h);
        diag[e] = &diag[e] + &stiff;
        diag[e + 1] = &diag[e + 1] + &stiff;
        off[e] = -&stiff;
    }
    let mut node_map: Vec<Stencil> = vec![vec![]; ne + 1];
    let blocks = match &p.bc {
        SecondOrderBc::SturmLiouville { alpha, beta } => {
            let lo = usize::from(alpha.sin() == 0.0);
            let hi = ne - usize::from(beta.sin().abs() < 1e-15);
            if lo == 0 {
                diag[0] = diag[0].axpy(alpha.cos() / alpha.sin(), &id);
            }
            if hi == ne {
                diag[ne] = diag[ne].axpy(-beta.cos() / beta.sin(), &id);
            }
            for (k, m) in node_map.iter_mut().enumerate().take(hi + 1).skip(lo) {
                *m = vec![(k - lo, id.clone())];
            }
            hi + 1 - lo
        }
        SecondOrderBc::GeneralizedPeriodic { m, .. } => {
            for (k, nm) in node_map.iter_mut().enumerate().take(ne) {
                *nm = vec![(k, id.clone())];
            }
            node_map[ne] = vec![(0, m.clone())];
            ne
        }
    };
    let mut a = Matrix::zeros(blocks * n, blocks * n);
    let mut couple = |k: usize, l: usize, kb: &Matrix| {
        for (bi, ci) in &node_map[k] {
            for (bj, cj) in &node_map[l] {
                add_block(&mut a, n, *bi, *bj, &ci.transpose().matmul(kb).matmul(cj));
            }
        }
    };
    for (k, d) in diag.iter().enumerate() {
        couple(k, k, d);
    }
    for (e, o) in off.iter().enumerate() {
        couple(e, e + 1, o);
        couple(e + 1, e, &o.transpose());
    }
    let a = a.symmetrized();
    let mut points = vec![];
    let mut weights = vec![];
    let mut eval = vec![];
    let mut inject = vec![];
    let mut row_scale = vec![0.0; blocks];
    for (k, st) in node_map.iter().enumerate() {
        if st.is_empty() {
            continue;
        }
        let w = if k == 0 || k == ne { 0.5 * h } else { h };
        points.push([k as f64 * h, 0.0]);
        weights.push(w);
        eval.push(st.clone());
        inject.push(st.iter().map(|(j, c)| (*j, c.transpose().scale(w))).collect());
        for (j, _) in st {
            row_scale[*j] += w;
        }
    }
    Ok(Discretization {
        n,
        blocks,
        a,
        points,
        weights,
        eval,
        inject,
        row_weight: row_scale.clone(),
        row_scale,
        nodes: (0..=ne).map(|k| [k as f64 * h, 0.0]).collect(),
        node_map,
        symmetric: true,
        stretch,
        scale,
    })
}

fn first_order(p: &FirstOrderProblem, elements: usize) -> Result<Discretization> {
    let d = p.b.dim();
    let half = d / 2;
    let ne = elements.max(2);
    let h = 1.0 / ne as f64;
    let id = Matrix::identity(d);
    let blocks = ne + 1;
    let mut a = Matrix::zeros(blocks * d, blocks * d);
    for k in 0..ne {
        add_block(&mut a, d, k, k, &id.scale(-1.0 / h));
        add_block(&mut a, d, k, k + 1, &id.scale(1.0 / h));
    }
    let r0 = ne * d;
    match &p.bc {
        FirstOrderBc::Bolza { alpha, beta } => {
            for i in 0..half {
                a[(r0 + i, i)] = alpha.cos();
                a[(r0 + i, half + i)] = alpha.sin();
                a[(r0 + half + i, ne * d + i)] = beta.cos();
                a[(r0 + half + i, ne * d + half + i)] = beta.sin();
            }
        }
        FirstOrderBc::Symplectic { p: pm } => {
            for i in 0..d {
                a[(r0 + i, ne * d + i)] = 1.0;
                for j in 0..d {
                    a[(r0 + i, j)] -= pm[(i, j)];
                }
            }
        }
    }
    let j = Matrix::symplectic_j(half);
    let half_id = id.scale(0.5);
    let mut row_weight = vec![h; ne];
    row_weight.push(0.0);
    Ok(Discretization {
        n: d,
        blocks,
        a,
        points: (0..ne).map(|k| [(k as f64 + 0.5) * h, 0.0]).collect(),
        weights: vec![h; ne],
        eval: (0..ne).map(|k| vec![(k, half_id.clone()), (k + 1, half_id.clone())]).collect(),
        inject: (0..ne).map(|k| vec![(k, j.clone())]).collect(),
        row_scale: vec![1.0; blocks],
        row_weight,
        nodes: (0..=ne).map(|k| [k as f64 * h, 0.0]).collect(),
        node_map: (0..=ne).map(|k| vec![(k, id.clone())]).collect(),
        symmetric: false,
        stretch: 1.0,
        scale: 1.0,
    })
}

/// `−d²/dx²` on `m` interior nodes of `(0, l)` in the sine basis.
fn sine_laplacian(l: f64, m: usize) -> Matrix {
    let s = Matrix::from_rows(
        &(1..=m)
            .map(|i| {
                (1..=m)
                    .map(|j| (std::f64::consts::PI * (i * j) as f64 / (m + 1) as f64).sin())
                    .collect()
            })
            .collect::<Vec<_>>(),
    )
    .expect("square");
    let d: Vec<f64> = (1..=m)
        .map(|j| (std::f64::consts::PI * j as f64 / l).powi(2) * 2.0 / (m + 1) as f64)
        .collect();
    s.matmul(&Matrix::from_diag(&d)).matmul(&s).symmetrized()
}

fn rectangle(l1: f64, l2: f64, m: usize) -> Result<Discretization> {
    if m < 3 {
        return Err(Error::DomainError("need at least 3 collocation nodes per axis".into()));
    }
    let (hx, hy) = (l1 / (m + 1) as f64, l2 / (m + 1) as f64);
    let w = hx * hy;
    let dx = sine_laplacian(l1, m);
    let dy = sine_laplacian(l2, m);
    let dof = m * m;
    let mut a = Matrix::zeros(dof, dof);
    for i in 0..m {
        for j in 0..m {
            let r = i * m + j;
            for k in 0..m {
                a[(r, k * m + j)] += w * dx[(i, k)];
                a[(r, i * m + k)] += w * dy[(j, k)];
            }
        }
    }
    let id = Matrix::identity(1);
    let points: Vec<Point> = (0..m)
        .flat_map(|i| (0..m).map(move |j| [(i + 1) as f64 * hx, (j + 1) as f64 * hy]))
        .collect();
    let eval: Vec<Stencil> = (0..dof).map(|k| vec![(k, id.clone())]).collect();
    Ok(Discretization {
        n: 1,
        blocks: dof,
        a,
        nodes: points.clone(),
        weights: vec![w; dof],
        inject: (0..dof).map(|k| vec![(k, id.scale(w))]).collect(),
        node_map: eval.clone(),
        eval,
        points,
        row_scale: vec![w; dof],
        row_weight: vec![w; dof],
        symmetric: true,
        stretch: 1.0,
        scale: 1.0,
    })
}
