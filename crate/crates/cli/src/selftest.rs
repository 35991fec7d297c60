//! Oracle-equivalence corpus: closed forms against the numerical engines.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use spectra_index::elliptic::elliptic_index;
use spectra_index::index::index_sweep;
use spectra_index::oracles::{dirichlet_constant, example38, rectangle_constant, Case, ConstantSpectrum};
use spectra_index::problems::{EllipticProblem, Geometry, MatrixFunction, ScalarField, SecondOrderBc, SecondOrderProblem};
use spectra_index::{Matrix, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseRow {
    pub family: String,
    pub input: String,
    pub expected: (i64, usize),
    /// `None` when the engine returned an error.
    pub computed: Option<(i64, usize)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub agrees: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelftestReport {
    pub seed: u64,
    pub cases: usize,
    pub mismatches: usize,
    pub rows: Vec<CaseRow>,
}

#[derive(Debug, Clone, Copy)]
enum Family {
    Periodic,
    Antiperiodic,
    Dirichlet,
    Rectangle,
}

impl Family {
    fn name(self) -> &'static str {
        match self {
            Family::Periodic => "periodic",
            Family::Antiperiodic => "antiperiodic",
            Family::Dirichlet => "dirichlet",
            Family::Rectangle => "rectangle",
        }
    }

    // Written exactly as the closed forms evaluate them.
    fn level(self, lam: f64, j: u64) -> f64 {
        match self {
            Family::Periodic => 4.0 * lam * (j * j) as f64 * PI * PI,
            Family::Antiperiodic => lam * ((2 * j - 1) as f64 * PI).powi(2),
            _ => lam * (j * j) as f64 * PI * PI,
        }
    }
}

/// Householder reflection `I − 2vvᵀ/|v|²`.
fn reflection(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
    let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let s: f64 = v.iter().map(|x| x * x).sum();
    let mut q = Matrix::identity(n);
    if s > 1e-6 {
        for i in 0..n {
            for j in 0..n {
                q[(i, j)] -= 2.0 * v[i] * v[j] / s;
            }
        }
    }
    q
}

enum Job {
    Ode(Family, ConstantSpectrum, Matrix),
    Rect(f64, f64, f64),
}

fn jobs(seed: u64, per_family: usize) -> Vec<Job> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for fam in [Family::Periodic, Family::Antiperiodic, Family::Dirichlet] {
        for k in 0..per_family {
            let n = 1 + k % 3;
            let lam = [0.5, 1.0, 2.0][k % 3];
            let mut alphas: Vec<f64> = (0..n).map(|_| rng.gen_range(-20.0..150.0 * lam)).collect();
            if k % 4 == 3 {
                alphas[0] = fam.level(lam, rng.gen_range(1..=2));
            }
            let spec = ConstantSpectrum::new(alphas, lam).expect("finite spectrum");
            let q = reflection(&mut rng, n);
            out.push(Job::Ode(fam, spec, q));
        }
    }
    for k in 0..per_family {
        let (l1, l2) = (rng.gen_range(0.7..1.5), rng.gen_range(0.7..1.5));
        let b = if k % 4 == 3 {
            let (j, m) = (rng.gen_range(1..=2u64), rng.gen_range(1..=2u64));
            PI * PI * (j * j) as f64 / (l1 * l1) + PI * PI * (m * m) as f64 / (l2 * l2)
        } else {
            rng.gen_range(-5.0..80.0)
        };
        out.push(Job::Rect(b, l1, l2));
    }
    out
}

fn run_job(job: &Job) -> CaseRow {
    let (family, input, expected, computed): (_, _, Result<(i64, usize)>, Result<(i64, usize)>) = match job {
        Job::Ode(fam, spec, q) => {
            let n = spec.dim();
            let expected = match fam {
                Family::Periodic => example38(Case::Periodic, spec).map(|r| (r.i, r.nu)),
                Family::Antiperiodic => example38(Case::Antiperiodic, spec).map(|r| (r.i, r.nu)),
                _ => Ok(dirichlet_constant(spec)).map(|r| (r.i, r.nu)),
            };
            let bc = match fam {
                Family::Periodic => SecondOrderBc::periodic(n),
                Family::Antiperiodic => SecondOrderBc::antiperiodic(n),
                _ => SecondOrderBc::dirichlet(),
            };
            let computed = MatrixFunction::constant(spec.matrix(Some(q)))
                .and_then(|b| SecondOrderProblem::new(MatrixFunction::scalar(n, spec.lambda), b, bc))
                .and_then(|p| index_sweep(&p))
                .map(|r| (r.i, r.nu));
            let input = format!("lambda={} alphas={:?}", spec.lambda, spec.alphas);
            (fam.name(), input, expected, computed)
        }
        Job::Rect(b, l1, l2) => {
            let expected = rectangle_constant(*b, *l1, *l2).map(|r| (r.i, r.nu));
            let computed = EllipticProblem::new(Geometry::Rectangle { l1: *l1, l2: *l2 }, ScalarField::Constant(*b))
                .and_then(|p| elliptic_index(&p))
                .map(|r| (r.i, r.nu));
            (Family::Rectangle.name(), format!("b={b} l1={l1} l2={l2}"), expected, computed)
        }
    };
    let expected = expected.expect("oracle inputs are in range");
    let (computed, error) = match computed {
        Ok(c) => (Some(c), None),
        Err(e) => (None, Some(format!("{}: {e}", e.name()))),
    };
    CaseRow {
        family: family.to_string(),
        input,
        expected,
        agrees: computed == Some(expected),
        computed,
        error,
    }
}

pub fn run(seed: u64, per_family: usize) -> SelftestReport {
    let rows: Vec<CaseRow> = jobs(seed, per_family).par_iter().map(run_job).collect();
    SelftestReport {
        seed,
        cases: rows.len(),
        mismatches: rows.iter().filter(|r| !r.agrees).count(),
        rows,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflection_is_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let q = reflection(&mut rng, 3);
        let e = q.matmul(&q.transpose());
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((e[(i, j)] - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn corpus_is_deterministic() {
        let a = jobs(5, 4);
        let b = jobs(5, 4);
        assert_eq!(a.len(), 16);
        for (x, y) in a.iter().zip(&b) {
            match (x, y) {
                (Job::Ode(_, s, _), Job::Ode(_, t, _)) => assert_eq!(s, t),
                (Job::Rect(b1, ..), Job::Rect(b2, ..)) => assert_eq!(b1, b2),
                _ => panic!("corpus order changed"),
            }
        }
    }
}
