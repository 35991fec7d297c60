//! Fundamental solutions, boundary matching matrices and nullity.
//!
//! Second-order problems are rewritten with `z = (y, x)`, `y = Λx'`, as
//! `ż = J·diag(Λ⁻¹, B)·z`. Angle-type conditions give an `n×n` matching matrix
//! `W·γ(1)·V`, where the columns of `V` span the admissible initial states and
//! `W` expresses the terminal condition. Periodic-type conditions give
//! `γ(1) − P`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{expm, magnus4_propagate, rank_deficiency_scaled, svd, Lu, DEFAULT_RANK_TOL};
use crate::problems::{
    FirstOrderBc, FirstOrderProblem, MatrixFunction, Problem, SecondOrderBc, SecondOrderProblem,
};
use crate::Matrix;

/// Default Magnus step count on `[0, 1]`.
pub const DEFAULT_STEPS: usize = 256;
/// Two resolutions must agree on `γ(1)` to this relative accuracy.
pub const STABILITY_TOL: f64 = 1e-9;
/// Accepted symplectic defect, relative to `max(1, ‖γ‖²)`.
pub const DEFECT_TOL: f64 = 1e-8;

/// Symmetric generator `S(t)` of `ż = J S(t) z`.
#[derive(Debug, Clone, PartialEq)]
pub enum Hamiltonian {
    /// `S = diag(Λ⁻¹, B)`.
    SecondOrder { lambda: MatrixFunction, b: MatrixFunction },
    /// `S = B`.
    FirstOrder { b: MatrixFunction },
}

impl Hamiltonian {
    /// Half the state dimension.
    pub fn half_dim(&self) -> usize {
        match self {
            Self::SecondOrder { b, .. } => b.dim(),
            Self::FirstOrder { b } => b.dim() / 2,
        }
    }

    pub fn s(&self, t: f64) -> Matrix {
        let ev = |f: &MatrixFunction| f.eval(t);
        match self {
            Self::SecondOrder { lambda, b } => {
                let l = ev(lambda);
                let linv = Lu::new(&l)
                    .map(|lu| lu.inverse().symmetrized())
                    .unwrap_or_else(|_| Matrix::zeros(l.rows(), l.cols()).scale(f64::NAN));
                Matrix::block_diag(&[&linv, &ev(b)])
            }
            Self::FirstOrder { b } => ev(b),
        }
    }

    /// The coefficient `J S(t)`.
    pub fn coefficient(&self, t: f64) -> Matrix {
        Matrix::symplectic_j(self.half_dim()).matmul(&self.s(t))
    }

    fn partition(&self) -> Vec<f64> {
        let mut p = match self {
            Self::SecondOrder { lambda, b } => {
                let mut p = lambda.partition();
                p.extend(b.partition());
                p
            }
            Self::FirstOrder { b } => b.partition(),
        };
        p.sort_by(f64::total_cmp);
        p.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
        p
    }

    fn piecewise_constant(&self) -> bool {
        match self {
            Self::SecondOrder { lambda, b } => {
                lambda.is_piecewise_constant() && b.is_piecewise_constant()
            }
            Self::FirstOrder { b } => b.is_piecewise_constant(),
        }
    }

    /// Same generator with `B` replaced by `B + μ·I` (the `x`-block only for
    /// second-order problems).
    pub fn shifted(&self, mu: f64) -> Self {
        match self {
            Self::SecondOrder { lambda, b } => Self::SecondOrder {
                lambda: lambda.clone(),
                b: b.shift(mu),
            },
            Self::FirstOrder { b } => Self::FirstOrder { b: b.shift(mu) },
        }
    }
}

/// End conditions of the first-order system.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryData {
    /// `z(0) ∈ range V` (`2n×n`) and `W z(1) = 0` (`n×2n`).
    Angles { v: Matrix, w: Matrix },
    /// `z(1) = P z(0)`.
    Periodic { p: Matrix },
}

impl BoundaryData {
    pub fn max_nullity(&self) -> usize {
        match self {
            Self::Angles { v, .. } => v.cols(),
            Self::Periodic { p } => p.rows(),
        }
    }
}

/// A problem rewritten as `ż = J S(t) z` with linear end conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct FirstOrderForm {
    pub hamiltonian: Hamiltonian,
    pub boundary: BoundaryData,
}

fn angle_blocks(n: usize, v_top: f64, v_bot: f64, w_left: f64, w_right: f64) -> (Matrix, Matrix) {
    let id = Matrix::identity(n);
    let v = Matrix::vstack(&[&id.scale(v_top), &id.scale(v_bot)]);
    let w = Matrix::hstack(&[&id.scale(w_left), &id.scale(w_right)]);
    (v, w)
}

/// First-order form of `(Λx')' + Bx = 0` with state `z = (y, x)`, `y = Λx'`.
pub fn to_first_order(p: &SecondOrderProblem) -> FirstOrderForm {
    let n = p.dim();
    let boundary = match &p.bc {
        SecondOrderBc::SturmLiouville { alpha, beta } => {
            let (v, w) = angle_blocks(n, alpha.cos(), alpha.sin(), -beta.sin(), beta.cos());
            BoundaryData::Angles { v, w }
        }
        SecondOrderBc::GeneralizedPeriodic { m, n: nm } => {
            let l0inv = Lu::new(&p.lambda.eval(0.0))
                .expect("validated Lambda is invertible")
                .inverse();
            let top = p.lambda.eval_left(1.0).matmul(nm).matmul(&l0inv);
            BoundaryData::Periodic {
                p: Matrix::block_diag(&[&top, m]),
            }
        }
    };
    FirstOrderForm {
        hamiltonian: Hamiltonian::SecondOrder {
            lambda: p.lambda.clone(),
            b: p.b.clone(),
        },
        boundary,
    }
}

/// First-order form of `ẋ = J B x` with Bolza or symplectic end conditions.
pub fn first_order_form(p: &FirstOrderProblem) -> FirstOrderForm {
    let n = p.half_dim();
    let boundary = match &p.bc {
        FirstOrderBc::Bolza { alpha, beta } => {
            let (v, w) = angle_blocks(n, -alpha.sin(), alpha.cos(), beta.cos(), beta.sin());
            BoundaryData::Angles { v, w }
        }
        FirstOrderBc::Symplectic { p } => BoundaryData::Periodic { p: p.clone() },
    };
    FirstOrderForm {
        hamiltonian: Hamiltonian::FirstOrder { b: p.b.clone() },
        boundary,
    }
}

/// Integration settings for [`monodromy`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Resolution {
    /// Integrator steps on `[0, 1]` at the first attempt.
    pub steps: usize,
    /// How often the step count may double before giving up.
    pub max_doublings: usize,
}

impl Default for Resolution {
    fn default() -> Self {
        Self {
            steps: DEFAULT_STEPS,
            max_doublings: 5,
        }
    }
}

/// Sampled fundamental solution `γ(t)` with `γ(0) = I`.
#[derive(Debug, Clone, PartialEq)]
pub struct Monodromy {
    pub times: Vec<f64>,
    pub gamma: Vec<Matrix>,
    /// `max_k ‖γ_kᵀ J γ_k − J‖_F / max(1, ‖γ_k‖_F²)`.
    pub defect: f64,
    /// Step count used, 0 when every piece was exponentiated exactly.
    pub steps: usize,
}

impl Monodromy {
    pub fn end(&self) -> &Matrix {
        self.gamma.last().expect("monodromy has at least one sample")
    }
}

fn relative_defect(g: &Matrix) -> f64 {
    g.symplectic_defect() / g.frobenius_norm().powi(2).max(1.0)
}

fn propagate(h: &Hamiltonian, steps: usize, record: bool) -> Result<(Vec<f64>, Vec<Matrix>)> {
    let n2 = 2 * h.half_dim();
    let j = Matrix::symplectic_j(h.half_dim());
    let part = h.partition();
    let exact = h.piecewise_constant();
    let mut g = Matrix::identity(n2);
    let mut times = vec![0.0];
    let mut gammas = vec![g.clone()];
    for w in part.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        if exact {
            let s = h.s(0.5 * (a + b));
            if !s.is_finite() {
                return Err(Error::NumericalBlowup(format!("non-finite coefficient on [{a}, {b}]")));
            }
            g = expm(&j.matmul(&s).scale(b - a)).matmul(&g);
            if !g.is_finite() {
                return Err(Error::NumericalBlowup("fundamental solution overflowed".into()));
            }
            if record {
                times.push(b);
                gammas.push(g.clone());
            }
            continue;
        }
        let k = ((steps as f64 * (b - a)).ceil() as usize).max(1);
        // Gauss nodes are interior, so one-sided limits are never needed.
        let coef = |t: f64| j.matmul(&h.s(t));
        if record {
            let hstep = (b - a) / k as f64;
            for i in 0..k {
                let t0 = a + i as f64 * hstep;
                let t1 = if i + 1 == k { b } else { t0 + hstep };
                g = magnus4_propagate(&coef, t0, t1, 1, &g)?;
                times.push(t1);
                gammas.push(g.clone());
            }
        } else {
            g = magnus4_propagate(&coef, a, b, k, &g)?;
        }
    }
    if !record {
        times.push(1.0);
        gammas.push(g);
    }
    Ok((times, gammas))
}

/// Fundamental solution of `ż = J S(t) z` on `[0, 1]`.
///
/// Pieces on which `S` is constant are exponentiated exactly. Otherwise a
/// fourth-order Magnus scheme is run at `steps` and `2·steps`, doubling until
/// `γ(1)` is stable to
/// [`STABILITY_TOL`] and the symplectic defect is below [`DEFECT_TOL`].
pub fn monodromy(h: &Hamiltonian, res: &Resolution) -> Result<Monodromy> {
    transition(h, res, true)
}

/// Like [`monodromy`] but keeps only `γ(1)`.
pub fn end_transition(h: &Hamiltonian, res: &Resolution) -> Result<Monodromy> {
    transition(h, res, false)
}

/// `γ(1)` from a single pass at `steps` without the stability check. Meant
/// for locating crossings, not for deciding rank.
pub fn quick_transition(h: &Hamiltonian, steps: usize) -> Result<Matrix> {
    let steps = if h.piecewise_constant() { 0 } else { steps.max(16) };
    let (_, g) = propagate(h, steps, false)?;
    Ok(g.last().cloned().expect("end sample"))
}

fn transition(h: &Hamiltonian, res: &Resolution, record: bool) -> Result<Monodromy> {
    if res.steps < 16 {
        return Err(Error::ResolutionExceeded(format!(
            "integrator needs at least 16 steps, got {}",
            res.steps
        )));
    }
    let finish = |times: Vec<f64>, gamma: Vec<Matrix>, steps: usize| -> Result<Monodromy> {
        let defect = gamma.iter().map(relative_defect).fold(0.0, f64::max);
        if defect > DEFECT_TOL {
            return Err(Error::ResolutionExceeded(format!(
                "symplectic defect {defect:e} exceeds {DEFECT_TOL:e}"
            )));
        }
        Ok(Monodromy { times, gamma, defect, steps })
    };
    if h.piecewise_constant() {
        let (t, g) = propagate(h, 0, record)?;
        return finish(t, g, 0);
    }
    let mut steps = res.steps;
    let (_, coarse) = propagate(h, steps, false)?;
    let mut prev = coarse.last().cloned().expect("end sample");
    for _ in 0..=res.max_doublings {
        let fine_steps = 2 * steps;
        let (t, g) = propagate(h, fine_steps, record)?;
        let end = g.last().expect("end sample");
        let change = (end - &prev).frobenius_norm() / end.frobenius_norm().max(1.0);
        let defect = g.iter().map(relative_defect).fold(0.0, f64::max);
        if change <= STABILITY_TOL && defect <= DEFECT_TOL {
            return finish(t, g, fine_steps);
        }
        prev = end.clone();
        steps = fine_steps;
    }
    Err(Error::ResolutionExceeded(format!(
        "fundamental solution not stable at {steps} steps"
    )))
}

/// Boundary matching matrix and the scale its singular values are read
/// against.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchingMatrix {
    pub matrix: Matrix,
    /// `max(1, ‖γ(1)‖_F, ‖P‖_F)`.
    pub scale: f64,
}

impl MatchingMatrix {
    /// Singular values divided by [`scale`](Self::scale), ascending.
    pub fn normalized_singular_values(&self) -> Vec<f64> {
        let mut s: Vec<f64> = svd(&self.matrix)
            .singular_values
            .iter()
            .map(|x| x / self.scale)
            .collect();
        s.reverse();
        s
    }
}

/// `W·γ(1)·V` for angle-type data, `γ(1) − P` for periodic-type data.
pub fn matching_matrix(gamma1: &Matrix, bc: &BoundaryData) -> Result<MatchingMatrix> {
    let d = gamma1.rows();
    let gnorm = gamma1.frobenius_norm().max(1.0);
    match bc {
        BoundaryData::Angles { v, w } => {
            if v.rows() != d || w.cols() != d {
                return Err(Error::DimensionMismatch(format!(
                    "fundamental solution is {d}x{d}, boundary blocks are {}x{} and {}x{}",
                    v.rows(),
                    v.cols(),
                    w.rows(),
                    w.cols()
                )));
            }
            Ok(MatchingMatrix {
                matrix: w.matmul(gamma1).matmul(v),
                scale: gnorm,
            })
        }
        BoundaryData::Periodic { p } => {
            if p.rows() != d {
                return Err(Error::DimensionMismatch(format!(
                    "fundamental solution is {d}x{d}, P is {}x{}",
                    p.rows(),
                    p.cols()
                )));
            }
            Ok(MatchingMatrix {
                matrix: gamma1 - p,
                scale: gnorm.max(p.frobenius_norm()),
            })
        }
    }
}

/// Nullity with a kernel basis given as initial states `z(0)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Nullity {
    pub nu: usize,
    pub kernel: Vec<Vec<f64>>,
    /// Normalized singular values of the matching matrix, ascending.
    pub singular_values: Vec<f64>,
}

/// `ν` and kernel of a problem in first-order form.
pub fn form_nullity(form: &FirstOrderForm, res: &Resolution) -> Result<Nullity> {
    let m = end_transition(&form.hamiltonian, res)?;
    let mm = matching_matrix(m.end(), &form.boundary)?;
    let (nu, _) = rank_deficiency_scaled(&mm.matrix, DEFAULT_RANK_TOL, mm.scale)?;
    if nu > form.boundary.max_nullity() {
        return Err(Error::VerificationFailed(format!(
            "nullity {nu} exceeds the bound {}",
            form.boundary.max_nullity()
        )));
    }
    let dec = svd(&mm.matrix);
    let cols = dec.v.cols();
    let kernel = (cols - nu..cols)
        .map(|k| {
            let c = dec.v.col(k);
            match &form.boundary {
                BoundaryData::Angles { v, .. } => v.matvec(&c),
                BoundaryData::Periodic { .. } => c,
            }
        })
        .collect();
    Ok(Nullity {
        nu,
        kernel,
        singular_values: mm.normalized_singular_values(),
    })
}

/// `ν = dim ker(A + B)` for any problem class.
pub fn nullity(p: &Problem) -> Result<Nullity> {
    let res = Resolution::default();
    match p {
        Problem::SecondOrder(q) => form_nullity(&to_first_order(q), &res),
        Problem::FirstOrder(q) => form_nullity(&first_order_form(q), &res),
        Problem::Elliptic(q) => {
            let r = crate::elliptic::elliptic_index(q)?;
            Ok(Nullity {
                nu: r.nu,
                kernel: vec![],
                singular_values: vec![],
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{MatrixFunction as MF, SecondOrderBc};
    use std::f64::consts::PI;

    fn second(b: MF, bc: SecondOrderBc) -> SecondOrderProblem {
        let n = b.dim();
        SecondOrderProblem::new(MF::scalar(n, 1.0), b, bc).unwrap()
    }

    #[test]
    fn zero_generator_gives_identity() {
        let h = Hamiltonian::FirstOrder { b: MF::zero(2) };
        let m = monodromy(&h, &Resolution::default()).unwrap();
        assert_eq!(*m.end(), Matrix::identity(2));
    }

    #[test]
    fn identity_generator_rotates_one_radian() {
        let h = Hamiltonian::FirstOrder { b: MF::scalar(2, 1.0) };
        let g = monodromy(&h, &Resolution::default()).unwrap();
        let want = Matrix::from_rows(&[vec![1f64.cos(), -1f64.sin()], vec![1f64.sin(), 1f64.cos()]]).unwrap();
        assert!((g.end() - &want).max_abs() < 1e-14);
    }

    #[test]
    fn magnus_path_matches_exponential_for_near_constant_generator() {
        // A grid-sampled, almost constant coefficient forces the stepping path.
        let s = Matrix::from_rows(&[
            vec![2.0, 0.3, -0.1, 0.0],
            vec![0.3, 1.0, 0.2, 0.4],
            vec![-0.1, 0.2, -1.5, 0.1],
            vec![0.0, 0.4, 0.1, 0.7],
        ])
        .unwrap();
        let mut vals = vec![s.clone(); 3];
        vals[1] = s.axpy(1e-13, &Matrix::identity(4));
        let h = Hamiltonian::FirstOrder { b: MF::sampled(vals).unwrap() };
        let m = end_transition(&h, &Resolution::default()).unwrap();
        assert!(m.steps > 0);
        let want = expm(&Matrix::symplectic_j(2).matmul(&s));
        assert!((m.end() - &want).max_abs() < 1e-8);
        assert!(m.defect <= DEFECT_TOL);
    }

    #[test]
    fn symplectic_defect_small_for_time_dependent_generator() {
        let b = MF::from_fn(33, |t| {
            Matrix::from_rows(&[vec![1.0 + t, t * t], vec![t * t, 3.0 * (5.0 * t).sin()]]).unwrap()
        })
        .unwrap();
        let m = monodromy(&Hamiltonian::FirstOrder { b }, &Resolution::default()).unwrap();
        assert!(m.defect <= DEFECT_TOL);
        assert_eq!(m.gamma.len(), m.times.len());
    }

    #[test]
    fn second_order_coefficient_layout() {
        let p = second(MF::zero(1), SecondOrderBc::dirichlet());
        let f = to_first_order(&p);
        let c = f.hamiltonian.coefficient(0.3);
        let want = Matrix::symplectic_j(1).matmul(&Matrix::from_diag(&[1.0, 0.0]));
        assert_eq!(c, want);
        match f.boundary {
            BoundaryData::Angles { v, .. } => {
                // Only y(0) is free: x(0) = 0.
                assert_eq!(v[(1, 0)], 0.0);
            }
            _ => panic!(),
        }
    }

    #[test]
    fn periodic_end_map_is_identity() {
        let f = to_first_order(&second(MF::zero(2), SecondOrderBc::periodic(2)));
        assert_eq!(f.boundary, BoundaryData::Periodic { p: Matrix::identity(4) });
    }

    #[test]
    fn bolza_constants_are_killed() {
        let p = FirstOrderProblem::new(MF::zero(2), FirstOrderBc::Bolza { alpha: 0.0, beta: PI / 2.0 }).unwrap();
        let nu = nullity(&Problem::FirstOrder(p)).unwrap();
        assert_eq!(nu.nu, 0);
    }

    #[test]
    fn symplectic_identity_full_kernel() {
        let p = FirstOrderProblem::new(MF::zero(2), FirstOrderBc::Symplectic { p: Matrix::identity(2) }).unwrap();
        assert_eq!(nullity(&Problem::FirstOrder(p)).unwrap().nu, 2);
    }

    #[test]
    fn antiperiodic_at_pi_squared_has_two_solutions() {
        let p = second(MF::scalar(1, PI * PI), SecondOrderBc::antiperiodic(1));
        assert_eq!(nullity(&Problem::SecondOrder(p)).unwrap().nu, 2);
    }

    #[test]
    fn dirichlet_nullities() {
        let p = second(MF::zero(1), SecondOrderBc::dirichlet());
        assert_eq!(nullity(&Problem::SecondOrder(p)).unwrap().nu, 0);
        let p = second(MF::scalar(1, PI * PI), SecondOrderBc::dirichlet());
        let nu = nullity(&Problem::SecondOrder(p.clone())).unwrap();
        assert_eq!(nu.nu, 1);
        // The kernel vector, propagated, satisfies x(1) = 0.
        let m = monodromy(&to_first_order(&p).hamiltonian, &Resolution::default()).unwrap();
        let z1 = m.end().matvec(&nu.kernel[0]);
        assert!(z1[1].abs() < 1e-6);
    }

    #[test]
    fn periodic_zero_potential_has_constant_kernel() {
        let p = second(MF::zero(3), SecondOrderBc::periodic(3));
        assert_eq!(nullity(&Problem::SecondOrder(p)).unwrap().nu, 3);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let bc = BoundaryData::Periodic { p: Matrix::identity(2) };
        assert!(matches!(
            matching_matrix(&Matrix::identity(4), &bc),
            Err(Error::DimensionMismatch(_))
        ));
    }
}
