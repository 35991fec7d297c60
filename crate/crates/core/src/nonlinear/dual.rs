//! Dual variational method for potentials that are convex after a shift.
//!
//! With `N = V − ½⟨B₁x, x⟩` strongly convex and `L` the discrete operator of
//! `(Λx')' + B₁x` (invertible since `ν(B₁) = 0`), critical points of
//! `ψ(u) = ½⟨L⁻¹u, u⟩ + Σ w_p N*(u_p)` give solutions `x = −L⁻¹u`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{sym_eig, Lu};
use crate::problems::Problem;
use crate::Matrix;

use super::discrete::{refine, Discretization, System};
use super::solve::{solution_on, DualDiagnostics, GridCheck, Solution};
use super::{Coefficient, NonlinearProblem, Point, Potential};

const NEWTON_TOL: f64 = 1e-13;

/// `N*(u) = sup_y ⟨u, y⟩ − N(y)` with its maximizer.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConjugatePoint {
    pub u: Vec<f64>,
    pub value: f64,
    pub y: Vec<f64>,
    pub iterations: usize,
}

/// Solves `∇N(y) = u` by damped Newton from `y = u`.
pub fn fenchel_conjugate(n: &Potential, u: &[f64], t: Point) -> Result<ConjugatePoint> {
    let obj = |y: &[f64]| (n.value)(t, y) - dot(u, y);
    let mut y = u.to_vec();
    let resid = |y: &[f64]| -> Vec<f64> { (n.gradient)(t, y).iter().zip(u).map(|(a, b)| a - b).collect() };
    let sup = |v: &[f64]| v.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
    for it in 0..100 {
        let g = resid(&y);
        let gn = sup(&g);
        let h = (n.hessian)(t, &y);
        let scale = 1.0 + sup(u) + h.max_abs() * sup(&y);
        if gn <= NEWTON_TOL * scale {
            let value = dot(u, &y) - (n.value)(t, &y);
            return Ok(ConjugatePoint {
                u: u.to_vec(),
                value,
                y,
                iterations: it,
            });
        }
        let lmin = sym_eig(&h.symmetrized())?.min_eigenvalue();
        if !(lmin > 0.0) {
            return Err(Error::NotStronglyConvex(format!(
                "smallest Hessian eigenvalue {lmin:e} at {y:?}"
            )));
        }
        let step = Lu::new(&h)?.solve_vec(&g);
        let f0 = obj(&y);
        let slope = -dot(&g, &step);
        let mut alpha = 1.0;
        loop {
            let trial: Vec<f64> = y.iter().zip(&step).map(|(a, s)| a - alpha * s).collect();
            if obj(&trial) <= f0 + 1e-4 * alpha * slope || sup(&resid(&trial)) < 0.5 * gn || alpha < 1e-10 {
                y = trial;
                break;
            }
            alpha *= 0.5;
        }
    }
    Err(Error::NoConvergence(format!("conjugate at u = {u:?}")))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone)]
pub struct DualOptions {
    /// Same meaning as in `SolveOptions`; defaults to the refined grid of the
    /// Newton solver so the two can be compared node by node.
    pub grid: usize,
    pub gradient_tol: f64,
    pub primal_tol: f64,
    pub gap_tol: f64,
    pub max_iter: usize,
}

impl DualOptions {
    pub fn for_problem(p: &NonlinearProblem) -> Self {
        let base = super::SolveOptions::for_problem(p).grid;
        Self {
            grid: refine(&p.template, base),
            gradient_tol: 1e-7,
            primal_tol: 1e-6,
            gap_tol: 1e-8,
            max_iter: 20_000,
        }
    }
}

/// Potential `N = s·V − ½⟨B₁x, x⟩` at one evaluation point, in the model frame.
fn shifted_potential(v: &Potential, b1: Matrix, phys: Point, s: f64) -> Potential {
    let (vv, vg, vh) = (v.value.clone(), v.gradient.clone(), v.hessian.clone());
    let (b_a, b_b, b_c) = (b1.clone(), b1.clone(), b1);
    Potential::new(
        move |_, x| s * vv(phys, x) - 0.5 * dot(x, &b_a.matvec(x)),
        move |_, x| {
            let bx = b_b.matvec(x);
            vg(phys, x).iter().zip(bx).map(|(g, b)| s * g - b).collect()
        },
        move |_, x| vh(phys, x).scale(s).axpy(-1.0, &b_c),
    )
}

/// Minimizes the dual functional by gradient descent with backtracking and
/// recovers the primal solution.
pub fn dual_solve(p: &NonlinearProblem, b1: &Coefficient, opts: &DualOptions) -> Result<Solution> {
    let v = p
        .nonlinearity
        .potential
        .as_ref()
        .ok_or_else(|| Error::DomainError("dual method needs a potential".into()))?;
    if matches!(p.template, Problem::FirstOrder(_)) {
        return Err(Error::DomainError("dual method is implemented for self-adjoint second-order and elliptic templates".into()));
    }
    let idx = crate::index::index(&b1.problem_with(&p.template)?)?;
    if idx.nu != 0 {
        return Err(Error::DomainError(format!("nu(B1) = {} but the dual method needs 0", idx.nu)));
    }
    let disc = Discretization::build(&p.template, opts.grid)?;
    debug_assert!(disc.symmetric);
    let b1p = disc.coefficient(b1, &p.template);
    let lop = disc.jacobian(&b1p);
    let lu = Lu::new(&lop).map_err(|e| Error::SingularJacobian {
        lambda: 1.0,
        detail: e.to_string(),
    })?;
    let pots: Vec<Potential> = disc
        .points
        .iter()
        .zip(&b1p)
        .map(|(&q, b)| shifted_potential(v, b.clone(), disc.phys(q), disc.scale))
        .collect();
    let n = disc.n;
    let np = disc.points.len();
    let w = &disc.weights;

    // x(u) = E L⁻¹ Σ Q_p u_p, which is −(operator of (Λx')' + B₁x)⁻¹ u.
    let primal = |u: &[Vec<f64>]| -> (Vec<f64>, Vec<Vec<f64>>) {
        let zero = vec![0.0; disc.dof()];
        let rhs: Vec<f64> = disc.residual(&zero, u).iter().map(|r| -r).collect();
        let z = lu.solve_vec(&rhs);
        let xs = disc.states(&z);
        (z, xs)
    };
    let evaluate = |u: &[Vec<f64>]| -> Result<(f64, Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<f64>)> {
        let (z, xs) = primal(u);
        let conj: Vec<ConjugatePoint> = (0..np)
            .into_par_iter()
            .map(|k| fenchel_conjugate(&pots[k], &u[k], [0.0, 0.0]))
            .collect::<Result<_>>()?;
        let mut psi = 0.0;
        let mut grad = Vec::with_capacity(np);
        for k in 0..np {
            psi += w[k] * (conj[k].value - 0.5 * dot(&u[k], &xs[k]));
            grad.push(conj[k].y.iter().zip(&xs[k]).map(|(y, x)| y - x).collect());
        }
        Ok((psi, grad, xs, z))
    };
    let wnorm = |g: &[Vec<f64>]| -> f64 {
        g.iter().zip(w).map(|(v, wk)| wk * dot(v, v)).sum::<f64>().sqrt()
    };

    let mut u: Vec<Vec<f64>> = vec![vec![0.0; n]; np];
    let (mut psi, mut grad, _, mut z) = evaluate(&u)?;
    let mut history = vec![psi];
    let mut tau = 1.0;
    let mut iterations = 0;
    let mut gnorm = wnorm(&grad);
    while gnorm > opts.gradient_tol {
        if iterations >= opts.max_iter {
            return Err(Error::LineSearchFailed(format!(
                "{iterations} iterations, gradient norm {gnorm:e}"
            )));
        }
        loop {
            let trial: Vec<Vec<f64>> = u
                .iter()
                .zip(&grad)
                .map(|(a, g)| a.iter().zip(g).map(|(x, y)| x - tau * y).collect())
                .collect();
            let (pt, gt, _, zt) = evaluate(&trial)?;
            if pt <= psi - 1e-4 * tau * gnorm * gnorm {
                u = trial;
                psi = pt;
                grad = gt;
                z = zt;
                tau = (tau * 2.0).min(1e6);
                break;
            }
            tau *= 0.5;
            if tau < 1e-14 {
                return Err(Error::LineSearchFailed(format!(
                    "no decrease from psi = {psi:e} with gradient norm {gnorm:e}"
                )));
            }
        }
        history.push(psi);
        iterations += 1;
        gnorm = wnorm(&grad);
    }

    let sys = System {
        disc: &disc,
        nl: &p.nonlinearity,
        b1: b1p.clone(),
    };
    let (grid, values, res, bd) = solution_on(&disc, &z, &sys);
    let xs = disc.states(&z);
    let gap: f64 = (0..np)
        .map(|k| {
            let c = fenchel_conjugate(&pots[k], &u[k], [0.0, 0.0])?;
            Ok(w[k] * (c.value + (pots[k].value)([0.0, 0.0], &xs[k]) - dot(&u[k], &xs[k])).abs())
        })
        .sum::<Result<f64>>()?;
    if !(res <= opts.primal_tol && bd <= opts.primal_tol) {
        return Err(Error::PrimalResidualLarge(format!(
            "dual converged (gradient {gnorm:e}) but the primal residual is {res:e}"
        )));
    }
    if gap > opts.gap_tol {
        return Err(Error::PrimalResidualLarge(format!("Fenchel gap {gap:e} above {:e}", opts.gap_tol)));
    }
    Ok(Solution {
        method: "dual".into(),
        grid,
        values,
        residual: res,
        boundary_residual: bd,
        checks: vec![GridCheck {
            size: opts.grid,
            residual: res,
            boundary_residual: bd,
        }],
        richardson_error: None,
        shift: 0.0,
        homotopy_steps: 0,
        newton_iterations: 0,
        distinct_solutions: 1,
        certificate: None,
        dual: Some(DualDiagnostics {
            iterations,
            gradient_norm: gnorm,
            fenchel_gap: gap,
            psi: history,
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinear::{solve_bvp, discrete_distance, Nonlinearity, SolveOptions};
    use crate::problems::{MatrixFunction as MF, SecondOrderBc, SecondOrderProblem};
    use std::f64::consts::PI;

    fn quartic() -> Potential {
        Potential::new(
            |_, y| y[0].powi(4) / 4.0 + y[0] * y[0] / 2.0,
            |_, y| vec![y[0].powi(3) + y[0]],
            |_, y| Matrix::scaled_identity(1, 3.0 * y[0] * y[0] + 1.0),
        )
    }

    #[test]
    fn conjugate_closed_forms() {
        let half = Potential::new(
            |_, y| 0.5 * dot(y, y),
            |_, y| y.to_vec(),
            |_, y| Matrix::identity(y.len()),
        );
        let c = fenchel_conjugate(&half, &[1.5, -2.0], [0.0, 0.0]).unwrap();
        assert!((c.value - 0.5 * (2.25 + 4.0)).abs() < 1e-14);
        let a = 3.0;
        let quad = Potential::new(
            move |_, y| 0.5 * a * y[0] * y[0],
            move |_, y| vec![a * y[0]],
            move |_, _| Matrix::scaled_identity(1, a),
        );
        let c = fenchel_conjugate(&quad, &[2.0], [0.0, 0.0]).unwrap();
        assert!((c.value - 4.0 / (2.0 * a)).abs() < 1e-14);
    }

    #[test]
    fn quartic_conjugate_matches_grid_search() {
        let c = fenchel_conjugate(&quartic(), &[2.0], [0.0, 0.0]).unwrap();
        assert!((c.y[0] - 1.0).abs() < 1e-12);
        assert!((c.value - 1.25).abs() < 1e-12);
        let best = (0..=400_000)
            .map(|k| -2.0 + 4.0 * k as f64 / 400_000.0)
            .map(|y| 2.0 * y - (y.powi(4) / 4.0 + y * y / 2.0))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((best - c.value).abs() < 1e-9);
    }

    #[test]
    fn concave_potential_is_rejected() {
        let p = Potential::new(|_, y| -y[0] * y[0], |_, y| vec![-2.0 * y[0]], |_, _| Matrix::scaled_identity(1, -2.0));
        assert!(matches!(
            fenchel_conjugate(&p, &[1.0], [0.0, 0.0]),
            Err(Error::NotStronglyConvex(_))
        ));
    }

    fn dirichlet() -> Problem {
        Problem::SecondOrder(
            SecondOrderProblem::new(MF::scalar(1, 1.0), MF::zero(1), SecondOrderBc::dirichlet()).unwrap(),
        )
    }

    fn instance(b: f64, delta: f64, amp: f64) -> NonlinearProblem {
        let v = Potential::new(
            move |q, x| 0.5 * b * x[0] * x[0] + delta * ((1.0 + x[0] * x[0]).sqrt() - 1.0) + amp * (PI * q[0]).sin() * x[0],
            move |q, x| vec![b * x[0] + delta * x[0] / (1.0 + x[0] * x[0]).sqrt() + amp * (PI * q[0]).sin()],
            move |_, x| Matrix::scaled_identity(1, b + delta * (1.0 + x[0] * x[0]).powf(-1.5)),
        );
        NonlinearProblem::new(dirichlet(), Nonlinearity::from_potential(1, v)).unwrap()
    }

    #[test]
    fn quadratic_potential_gives_zero() {
        let p = instance(20.0, 0.0, 0.0);
        let s = dual_solve(&p, &MF::scalar(1, 19.0).into(), &DualOptions::for_problem(&p)).unwrap();
        assert!(s.values.iter().all(|v| v[0].abs() < 1e-9));
    }

    #[test]
    fn dual_agrees_with_newton() {
        let p = instance(20.0, 0.5, 3.0);
        let b1: Coefficient = MF::scalar(1, 19.0).into();
        let d = dual_solve(&p, &b1, &DualOptions::for_problem(&p)).unwrap();
        let diag = d.dual.as_ref().unwrap();
        assert!(diag.psi.windows(2).all(|w| w[1] <= w[0]));
        assert!(diag.fenchel_gap <= 1e-8);
        assert!(d.residual <= 1e-6);
        let s = solve_bvp(
            &p,
            &SolveOptions {
                b1: Some(b1),
                multistarts: 0,
                ..SolveOptions::for_problem(&p)
            },
        )
        .unwrap();
        let dist = discrete_distance(&d, &s).unwrap();
        assert!(dist < 1e-5, "{dist}");
        assert!(s.values.iter().any(|v| v[0].abs() > 1e-3));
    }
}
