//! Homotopy-Newton solver.
//!
//! The discrete system is continued along `F_λ = λ·B₁x + (1 − λ)·F(x)` from
//! `λ = 1`, where it is linear with the trivial solution, to `λ = 0`. When
//! `ν(B₁) ≠ 0` the start coefficient is lowered by a small `ε` that leaves
//! `i(B₁)` unchanged. The run is repeated on a refined grid and accepted only
//! when both residuals meet the tolerance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

use super::certify::{CertificateReport, Verdict};
use super::discrete::{newton, refine, Discretization, NewtonFailure, System};
use super::{Coefficient, NonlinearProblem, Point};

#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Elements (intervals) or collocation nodes per axis (rectangles) on the
    /// coarse grid.
    pub grid: usize,
    pub tol: f64,
    /// Initial number of continuation steps; steps adapt afterwards.
    pub homotopy_steps: usize,
    pub multistarts: usize,
    pub seed: u64,
    /// Start coefficient; zero when absent.
    pub b1: Option<Coefficient>,
    pub certificate: Option<CertificateReport>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            grid: 64,
            tol: 1e-8,
            homotopy_steps: 10,
            multistarts: 8,
            seed: 0,
            b1: None,
            certificate: None,
        }
    }
}

impl SolveOptions {
    /// Coarse grid suited to the template: rectangles use far fewer nodes.
    pub fn for_problem(p: &NonlinearProblem) -> Self {
        let mut o = Self::default();
        if let crate::problems::Problem::Elliptic(e) = &p.template {
            if matches!(e.geometry, crate::problems::Geometry::Rectangle { .. }) {
                o.grid = 11;
            }
        }
        o
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridCheck {
    pub size: usize,
    pub residual: f64,
    pub boundary_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateLink {
    pub theorem: String,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualDiagnostics {
    pub iterations: usize,
    pub gradient_norm: f64,
    pub fenchel_gap: f64,
    /// `ψ` after every accepted step.
    pub psi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Solution {
    pub method: String,
    /// Physical coordinates of the nodes.
    pub grid: Vec<Point>,
    pub values: Vec<Vec<f64>>,
    /// Strong-form residual, discrete L².
    pub residual: f64,
    pub boundary_residual: f64,
    /// The solves that were checked, coarse first.
    pub checks: Vec<GridCheck>,
    /// `max |x_fine − x_coarse| / 3` over shared nodes.
    pub richardson_error: Option<f64>,
    /// Amount subtracted from `B₁` at the homotopy start.
    pub shift: f64,
    pub homotopy_steps: usize,
    pub newton_iterations: usize,
    /// Distinct solutions seen on the coarse grid, including the continued one.
    pub distinct_solutions: usize,
    pub certificate: Option<CertificateLink>,
    pub dual: Option<DualDiagnostics>,
}

/// RMS difference over nodes the two solutions share, if any.
pub fn discrete_distance(a: &Solution, b: &Solution) -> Option<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    let mut j = 0;
    for (p, x) in a.grid.iter().zip(&a.values) {
        // Both grids are ordered the same way, so one forward pass suffices
        // for nested 1D meshes; fall back to a search otherwise.
        let hit = (j..b.grid.len())
            .find(|&k| same(&b.grid[k], p))
            .or_else(|| (0..b.grid.len()).find(|&k| same(&b.grid[k], p)));
        if let Some(k) = hit {
            j = k;
            sum += x.iter().zip(&b.values[k]).map(|(u, v)| (u - v).powi(2)).sum::<f64>();
            count += 1;
        }
    }
    (count > 0).then(|| (sum / count as f64).sqrt())
}

fn same(p: &Point, q: &Point) -> bool {
    (p[0] - q[0]).abs() < 1e-10 && (p[1] - q[1]).abs() < 1e-10
}

pub(crate) struct Continued {
    pub z: Vec<f64>,
    pub steps: usize,
    pub iterations: usize,
}

fn continuation(sys: &System<'_>, tol: f64, steps: usize) -> Result<Continued> {
    let dof = sys.disc.dof();
    let zero = vec![0.0; dof];
    let (mut z, mut iterations, _) = match newton(sys, &zero, 1.0, tol, 5) {
        Ok(r) => r,
        Err(NewtonFailure::Singular(d) | NewtonFailure::Diverged(d)) => {
            return Err(Error::SingularJacobian { lambda: 1.0, detail: d })
        }
    };
    let mut prev: Option<(f64, Vec<f64>)> = None;
    let mut lam = 1.0;
    let mut step = 1.0 / steps.max(1) as f64;
    let mut taken = 0;
    let mut last_singular: Option<String> = None;
    while lam > 0.0 {
        let target = (lam - step).max(0.0);
        let guess: Vec<f64> = match &prev {
            Some((lp, zp)) => {
                let r = (lam - target) / (lp - lam);
                z.iter().zip(zp).map(|(a, b)| a + r * (a - b)).collect()
            }
            None => z.clone(),
        };
        let inner_tol = if target == 0.0 { tol } else { tol.max(1e-10) };
        match newton(sys, &guess, target, inner_tol, 40) {
            Ok((zn, it, _)) => {
                iterations += it;
                taken += 1;
                prev = Some((lam, std::mem::replace(&mut z, zn)));
                lam = target;
                step = (step * 1.5).min(0.5);
                last_singular = None;
            }
            Err(f) => {
                if let NewtonFailure::Singular(d) = f {
                    last_singular = Some(d);
                }
                step *= 0.5;
                if step < 1e-6 {
                    return Err(match last_singular {
                        Some(detail) => Error::SingularJacobian { lambda: target, detail },
                        None => Error::ContinuationStalled(format!("step underflow at lambda = {lam}")),
                    });
                }
            }
        }
    }
    Ok(Continued {
        z,
        steps: taken,
        iterations,
    })
}

/// Downward shift of `B₁`, halved from `10⁻²(1 + sup‖B₁‖)` until `ν = 0` with
/// the same `i`.
fn start_shift(p: &NonlinearProblem, b1: &Coefficient) -> Result<f64> {
    let base = crate::index::index(&b1.problem_with(&p.template)?)?;
    if base.nu == 0 {
        return Ok(0.0);
    }
    let scale = 1.0 + b1.samples(&p.template).iter().fold(0.0_f64, |a, m| a.max(m.max_abs()));
    let mut eps = 1e-2 * scale;
    for _ in 0..12 {
        let r = crate::index::index(&b1.shifted(-eps).problem_with(&p.template)?)?;
        if r.nu == 0 && r.i == base.i {
            return Ok(eps);
        }
        eps *= 0.5;
    }
    Err(Error::DomainError(
        "no admissible shift below the spectral gap of the start coefficient".into(),
    ))
}

pub(crate) fn solution_on(disc: &Discretization, z: &[f64], sys: &System<'_>) -> (Vec<Point>, Vec<Vec<f64>>, f64, f64) {
    let (f, _) = sys.forces(z, 0.0);
    let (res, bd) = disc.norms(&disc.residual(z, &f));
    let grid = disc.nodes.iter().map(|&q| disc.phys(q)).collect();
    (grid, disc.node_values(z), res, bd)
}

/// Solves the nonlinear problem by continuation from the linear start
/// problem with coefficient `opts.b1`.
pub fn solve_bvp(p: &NonlinearProblem, opts: &SolveOptions) -> Result<Solution> {
    let b1 = opts.b1.clone().unwrap_or_else(|| Coefficient::zero(&p.template));
    let shift = start_shift(p, &b1)?;
    let start = if shift > 0.0 { b1.shifted(-shift) } else { b1 };

    let mut checks = vec![];
    let mut fine_values: Option<(Vec<Point>, Vec<Vec<f64>>)> = None;
    let mut coarse_values: Option<(Vec<Point>, Vec<Vec<f64>>)> = None;
    let mut steps = 0;
    let mut iterations = 0;
    let mut distinct = 1;
    let mut last = (0.0, 0.0);
    for (level, size) in [opts.grid, refine(&p.template, opts.grid)].into_iter().enumerate() {
        let disc = Discretization::build(&p.template, size)?;
        let sys = System {
            b1: disc.coefficient(&start, &p.template),
            disc: &disc,
            nl: &p.nonlinearity,
        };
        let c = continuation(&sys, opts.tol, opts.homotopy_steps)?;
        steps += c.steps;
        iterations += c.iterations;
        let (grid, values, res, bd) = solution_on(&disc, &c.z, &sys);
        checks.push(GridCheck {
            size,
            residual: res,
            boundary_residual: bd,
        });
        if !(res <= opts.tol && bd <= opts.tol) {
            return Err(Error::NewtonDiverged(format!(
                "residual {res:e} (boundary {bd:e}) above {:e} on grid {size}",
                opts.tol
            )));
        }
        if level == 0 {
            distinct = multistart(&sys, &c.z, opts)?;
            coarse_values = Some((grid, values));
        } else {
            fine_values = Some((grid, values));
        }
        last = (res, bd);
    }
    let (grid, values) = fine_values.expect("fine grid solved");
    let (cg, cv) = coarse_values.expect("coarse grid solved");
    let mut sol = Solution {
        method: "homotopy-newton".into(),
        grid,
        values,
        residual: last.0,
        boundary_residual: last.1,
        checks,
        richardson_error: None,
        shift,
        homotopy_steps: steps,
        newton_iterations: iterations,
        distinct_solutions: distinct,
        certificate: opts.certificate.as_ref().map(|c| CertificateLink {
            theorem: c.theorem.clone(),
            verdict: c.verdict,
        }),
        dual: None,
    };
    let coarse = Solution {
        grid: cg,
        values: cv,
        ..sol.clone()
    };
    sol.richardson_error = richardson(&coarse, &sol);
    Ok(sol)
}

fn richardson(coarse: &Solution, fine: &Solution) -> Option<f64> {
    let mut worst: Option<f64> = None;
    for (p, x) in coarse.grid.iter().zip(&coarse.values) {
        if let Some(k) = fine.grid.iter().position(|q| same(p, q)) {
            let d = x.iter().zip(&fine.values[k]).fold(0.0_f64, |a, (u, v)| a.max((u - v).abs()));
            worst = Some(worst.unwrap_or(0.0).max(d / 3.0));
        }
    }
    worst
}

/// Newton from random starts at `λ = 0`; returns the number of distinct
/// solutions found, counting `z`.
fn multistart(sys: &System<'_>, z: &[f64], opts: &SolveOptions) -> Result<usize> {
    if opts.multistarts == 0 {
        return Ok(1);
    }
    let amp = 2.0 * z.iter().fold(1.0_f64, |a, v| a.max(v.abs()));
    let found: Vec<Vec<f64>> = (0..opts.multistarts)
        .into_par_iter()
        .filter_map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(k as u64));
            let z0: Vec<f64> = z.iter().map(|_| rng.gen_range(-amp..=amp)).collect();
            newton(sys, &z0, 0.0, opts.tol, 60).ok().map(|r| r.0)
        })
        .collect();
    let mut sols: Vec<Vec<f64>> = vec![z.to_vec()];
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    for s in found {
        let dup = sols.iter().any(|t| {
            let d: Vec<f64> = s.iter().zip(t).map(|(a, b)| a - b).collect();
            norm(&d) <= 1e-6 * (1.0 + norm(t))
        });
        if !dup {
            sols.push(s);
        }
    }
    Ok(sols.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinear::Nonlinearity;
    use crate::problems::{MatrixFunction as MF, Problem, SecondOrderBc, SecondOrderProblem};
    use crate::Matrix;
    use std::f64::consts::PI;

    fn dirichlet() -> Problem {
        Problem::SecondOrder(
            SecondOrderProblem::new(MF::scalar(1, 1.0), MF::zero(1), SecondOrderBc::dirichlet()).unwrap(),
        )
    }

    #[test]
    fn zero_force_gives_zero() {
        let p = NonlinearProblem::new(dirichlet(), Nonlinearity::new(1, |_, _| vec![0.0])).unwrap();
        let s = solve_bvp(&p, &SolveOptions::default()).unwrap();
        assert!(s.values.iter().all(|v| v[0].abs() < 1e-12));
        assert_eq!(s.distinct_solutions, 1);
    }

    #[test]
    fn linear_force_matches_closed_form() {
        // x'' + b x + 1 = 0, x(0) = x(1) = 0.
        let b = 5.0;
        let nl = Nonlinearity::linear(MF::scalar(1, b), |_| vec![1.0]);
        let p = NonlinearProblem::new(dirichlet(), nl).unwrap();
        let s = solve_bvp(&p, &SolveOptions::default()).unwrap();
        assert!(s.residual <= 1e-8);
        let w = b.sqrt();
        let exact = |t: f64| ((w * (t - 0.5)).cos() / (w / 2.0).cos() - 1.0) / b;
        let err = s.grid.iter().zip(&s.values).fold(0.0_f64, |a, (p, v)| a.max((v[0] - exact(p[0])).abs()));
        assert!(err < 1e-4, "{err}");
        let r = s.richardson_error.unwrap();
        assert!(r < 1e-4 && r > 0.05 * err, "{r} vs {err}");
    }

    #[test]
    fn linear_force_matches_dense_solve() {
        let b = MF::from_fn(33, |t| Matrix::scaled_identity(1, 3.0 + t)).unwrap();
        let nl = Nonlinearity::linear(b.clone(), |p| vec![(PI * p[0]).sin()]);
        let p = NonlinearProblem::new(dirichlet(), nl).unwrap();
        let opts = SolveOptions {
            multistarts: 0,
            ..SolveOptions::default()
        };
        let s = solve_bvp(&p, &opts).unwrap();
        // Direct solve of the same discrete linear system.
        let d = Discretization::build(&p.template, 128).unwrap();
        let bp: Vec<Matrix> = d.points.iter().map(|q| b.eval(q[0])).collect();
        let jac = d.jacobian(&bp);
        let zero = vec![0.0; d.dof()];
        let forcing: Vec<Vec<f64>> = d.points.iter().map(|q| vec![(PI * q[0]).sin()]).collect();
        let rhs: Vec<f64> = d.residual(&zero, &forcing).iter().map(|v| -v).collect();
        let z = crate::numerics::Lu::new(&jac).unwrap().solve_vec(&rhs);
        let x = d.node_values(&z);
        let err = x.iter().zip(&s.values).fold(0.0_f64, |a, (u, v)| a.max((u[0] - v[0]).abs()));
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn resonant_start_is_shifted() {
        // B1 = π² is a Dirichlet eigenvalue; the solver lowers it.
        let nl = Nonlinearity::new(1, |p, x| vec![20.0 * x[0] + x[0] / (1.0 + x[0] * x[0]) + (PI * p[0]).sin()]);
        let p = NonlinearProblem::new(dirichlet(), nl).unwrap();
        let opts = SolveOptions {
            b1: Some(MF::scalar(1, PI * PI).into()),
            multistarts: 2,
            ..SolveOptions::default()
        };
        let s = solve_bvp(&p, &opts).unwrap();
        assert!(s.shift > 0.0);
        assert!(s.residual <= 1e-8 && s.checks.len() == 2);
    }

    #[test]
    fn bolza_linear_system() {
        // With B = diag{b, 1} and h = (1, 0) the first component solves
        // x'' + b x + 1 = 0.
        use crate::problems::{FirstOrderBc, FirstOrderProblem};
        let t = FirstOrderProblem::new(MF::zero(2), FirstOrderBc::Bolza { alpha: 0.0, beta: PI }).unwrap();
        let bmat = Matrix::from_diag(&[5.0, 1.0]);
        let nl = Nonlinearity::linear(MF::constant(bmat).unwrap(), |_| vec![1.0, 0.0]);
        let p = NonlinearProblem::new(Problem::FirstOrder(t), nl).unwrap();
        let s = solve_bvp(
            &p,
            &SolveOptions {
                multistarts: 0,
                ..SolveOptions::default()
            },
        )
        .unwrap();
        assert!(s.residual <= 1e-8 && s.boundary_residual <= 1e-8);
        let w = 5.0_f64.sqrt();
        let exact = |t: f64| ((w * (t - 0.5)).cos() / (w / 2.0).cos() - 1.0) / 5.0;
        let err = s
            .grid
            .iter()
            .zip(&s.values)
            .fold(0.0_f64, |a, (q, v)| a.max((v[0] - exact(q[0])).abs()));
        assert!(err < 1e-3, "{err}");
    }

    fn example311(forcing: f64) -> NonlinearProblem {
        let t = SecondOrderProblem::new(MF::scalar(1, 1.0), MF::zero(1), SecondOrderBc::antiperiodic(1)).unwrap();
        let (b1, b2) = (PI * PI + 0.1, 9.0 * PI * PI - 0.1);
        let nl = Nonlinearity::asymptotically_linear(
            1,
            move |_, x| {
                let r = x[0] * x[0];
                Matrix::scaled_identity(1, b1 * (r.cos()).powi(2) + b2 * (r.sin()).powi(2))
            },
            move |p, x| {
                let a = x[0].abs();
                vec![x[0] / (1.0 + a * a) * (a * p[0]).sin() + forcing * (5.0 * PI * p[0]).sin()]
            },
        );
        NonlinearProblem::new(Problem::SecondOrder(t), nl).unwrap()
    }

    #[test]
    fn example_instance_converges() {
        for forcing in [0.0, 50.0] {
            let p = example311(forcing);
            let opts = SolveOptions {
                b1: Some(MF::scalar(1, PI * PI + 0.1).into()),
                ..SolveOptions::default()
            };
            let s = solve_bvp(&p, &opts).unwrap();
            assert!(s.residual <= 1e-8 && s.checks.iter().all(|c| c.residual <= 1e-8));
            assert!(s.distinct_solutions >= 1);
            if forcing > 0.0 {
                assert!(s.values.iter().any(|v| v[0].abs() > 1e-2));
            }
        }
    }

    #[test]
    fn rectangle_collocation() {
        use crate::problems::{EllipticProblem, Geometry, ScalarField};
        let e = EllipticProblem::new(Geometry::Rectangle { l1: 1.0, l2: 1.0 }, ScalarField::Constant(0.0)).unwrap();
        // Δu + 25u + u/(1+u²) + 10 = 0; 25 sits between 2π² and 5π².
        let nl = Nonlinearity::new(1, |_, u| vec![25.0 * u[0] + u[0] / (1.0 + u[0] * u[0]) + 10.0]);
        let p = NonlinearProblem::new(Problem::Elliptic(e), nl).unwrap();
        let opts = SolveOptions {
            b1: Some(ScalarField::Constant(25.0).into()),
            multistarts: 2,
            ..SolveOptions::for_problem(&p)
        };
        let s = solve_bvp(&p, &opts).unwrap();
        assert!(s.residual <= 1e-8);
        let umax = s.values.iter().fold(0.0_f64, |a, v| a.max(v[0].abs()));
        assert!(s.richardson_error.unwrap() < 1e-2 * umax);
    }
}
