//! Index of `Δu + b u = 0` with Dirichlet data on an interval or rectangle.
//!
//! `i` is the number of negative eigenvalues of `−Δ − b`, `ν` the dimension of
//! its kernel. Both are read from the Galerkin matrix in the tensor sine basis,
//! whose eigenvalues are upper bounds for the true ones.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::index::{index_sweep, Crossing, CrossingSet, IndexResult, Validation};
use crate::numerics::{dense_inertia, sym_eig};
use crate::problems::{
    EllipticProblem, Geometry, MatrixFunction, ScalarField, SecondOrderBc, SecondOrderProblem,
};
use crate::Matrix;

/// Starting truncation per axis.
pub const DEFAULT_MODES: usize = 8;
const MAX_MODES_1D: usize = 512;
const MAX_MODES_2D: usize = 32;
/// Eigenvalues are listed as crossings only up to this matrix size.
const CROSSING_LIST_DIM: usize = 256;

/// Matrix of `−Δ − b` in the sine basis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GalerkinOperator {
    /// Modes per axis.
    pub k: usize,
    /// `(j, k)` frequency pair of each basis function; `k = 0` on intervals.
    pub modes: Vec<(usize, usize)>,
    #[serde(skip)]
    pub matrix: Matrix,
    /// Simpson intervals per axis, 0 when `b` is constant.
    pub quadrature: usize,
}

/// `π²(j²/L₁² + k²/L₂²)`, or `π² j²/L²` on an interval.
pub fn mode_eigenvalue(geometry: &Geometry, j: usize, k: usize) -> f64 {
    match *geometry {
        Geometry::Interval { length } => (PI * j as f64 / length).powi(2),
        Geometry::Rectangle { l1, l2 } => {
            (PI * j as f64 / l1).powi(2) + (PI * k as f64 / l2).powi(2)
        }
    }
}

fn simpson(n: usize, len: f64) -> (Vec<f64>, Vec<f64>) {
    let n = n + n % 2;
    let h = len / n as f64;
    let x = (0..=n).map(|q| q as f64 * h).collect();
    let w = (0..=n)
        .map(|q| {
            let c = if q == 0 || q == n {
                1.0
            } else if q % 2 == 1 {
                4.0
            } else {
                2.0
            };
            c * h / 3.0
        })
        .collect();
    (x, w)
}

/// Normalized sine modes `√(2/L) sin(jπx/L)`, `j = 1..=k`, at the nodes.
fn sines(x: &[f64], len: f64, k: usize) -> Vec<Vec<f64>> {
    let c = (2.0 / len).sqrt();
    (1..=k)
        .map(|j| x.iter().map(|&t| c * (j as f64 * PI * t / len).sin()).collect())
        .collect()
}

/// Galerkin matrix of `−Δ − b` with `k` modes per axis.
pub fn assemble(p: &EllipticProblem, k: usize) -> Result<GalerkinOperator> {
    if k < 4 {
        return Err(Error::Config(format!("need at least 4 modes per axis, got {k}")));
    }
    match p.geometry {
        Geometry::Interval { length } => {
            let modes: Vec<(usize, usize)> = (1..=k).map(|j| (j, 0)).collect();
            let mut m = Matrix::from_diag(
                &modes.iter().map(|&(j, _)| mode_eigenvalue(&p.geometry, j, 0)).collect::<Vec<_>>(),
            );
            let quadrature = match p.b.as_constant() {
                Some(c) => {
                    m = m.axpy(-c, &Matrix::identity(k));
                    0
                }
                None => {
                    let q = (64 * k).max(4096);
                    let (x, w) = simpson(q, length);
                    let bw: Vec<f64> = x
                        .iter()
                        .zip(&w)
                        .map(|(&t, &wt)| wt * p.b.eval(t, 0.0, length, 1.0))
                        .collect();
                    let s = sines(&x, length, k);
                    for a in 0..k {
                        for c in a..k {
                            let v: f64 = (0..x.len()).map(|q| bw[q] * s[a][q] * s[c][q]).sum();
                            m[(a, c)] -= v;
                            if a != c {
                                m[(c, a)] -= v;
                            }
                        }
                    }
                    q
                }
            };
            Ok(GalerkinOperator {
                k,
                modes,
                matrix: m,
                quadrature,
            })
        }
        Geometry::Rectangle { l1, l2 } => {
            let modes: Vec<(usize, usize)> =
                (1..=k).flat_map(|j| (1..=k).map(move |kk| (j, kk))).collect();
            let dim = modes.len();
            let diag: Vec<f64> = modes.iter().map(|&(j, kk)| mode_eigenvalue(&p.geometry, j, kk)).collect();
            let mut m = Matrix::from_diag(&diag);
            let quadrature = match p.b.as_constant() {
                Some(c) => {
                    m = m.axpy(-c, &Matrix::identity(dim));
                    0
                }
                None => {
                    let q = (8 * k).max(128);
                    let (x, wx) = simpson(q, l1);
                    let (y, wy) = simpson(q, l2);
                    let sx = sines(&x, l1, k);
                    let sy = sines(&y, l2, k);
                    // t[qy][a][c] = Σ_qx wx b(x, y) sx_a sx_c
                    let t: Vec<Vec<f64>> = y
                        .par_iter()
                        .map(|&yy| {
                            let bw: Vec<f64> =
                                x.iter().zip(&wx).map(|(&xx, &w)| w * p.b.eval(xx, yy, l1, l2)).collect();
                            let mut out = vec![0.0; k * k];
                            for a in 0..k {
                                for c in a..k {
                                    let v: f64 = (0..x.len()).map(|i| bw[i] * sx[a][i] * sx[c][i]).sum();
                                    out[a * k + c] = v;
                                    out[c * k + a] = v;
                                }
                            }
                            out
                        })
                        .collect();
                    // Block (kb, kd) of the (x-mode, y-mode) ordered matrix.
                    let pairs: Vec<(usize, usize)> =
                        (0..k).flat_map(|b| (b..k).map(move |d| (b, d))).collect();
                    let blocks: Vec<Vec<f64>> = pairs
                        .par_iter()
                        .map(|&(b, d)| {
                            let mut out = vec![0.0; k * k];
                            for (qy, tq) in t.iter().enumerate() {
                                let u = wy[qy] * sy[b][qy] * sy[d][qy];
                                if u == 0.0 {
                                    continue;
                                }
                                for (o, v) in out.iter_mut().zip(tq) {
                                    *o += u * v;
                                }
                            }
                            out
                        })
                        .collect();
                    // Basis index of (j, kk) is (j-1)·k + (kk-1).
                    for (&(b, d), blk) in pairs.iter().zip(&blocks) {
                        for a in 0..k {
                            for c in 0..k {
                                let v = blk[a * k + c];
                                m[(a * k + b, c * k + d)] -= v;
                                if b != d {
                                    m[(c * k + d, a * k + b)] -= v;
                                }
                            }
                        }
                    }
                    q
                }
            };
            Ok(GalerkinOperator {
                k,
                modes,
                matrix: m.symmetrized(),
                quadrature,
            })
        }
    }
}

/// Eigenvalue band treated as zero.
pub fn zero_tol(p: &EllipticProblem) -> f64 {
    1e-6 * (1.0 + p.b_sup())
}

/// `λ_min` with no crossings below it: `−Δ ≥ 0` gives `−‖b‖∞ − 1`.
pub fn lambda_lower_bound(p: &EllipticProblem) -> f64 {
    -p.b_sup() - 1.0
}

fn counts(op: &GalerkinOperator, tol: f64) -> (i64, usize) {
    let n = op.matrix.rows();
    let plus = op.matrix.axpy(tol, &Matrix::identity(n));
    let minus = op.matrix.axpy(-tol, &Matrix::identity(n));
    let below = dense_inertia(&plus, 0.0).negative;
    let upto = dense_inertia(&minus, 0.0).negative;
    (below as i64, upto.saturating_sub(below))
}

/// Galerkin `(i, ν)` starting at `k0` modes per axis and doubling until the
/// counts repeat on three consecutive truncations. For constant `b` the
/// matrix is diagonal and the counts are exact once every mode below `b` is
/// included.
pub fn galerkin_index(p: &EllipticProblem, k0: usize) -> Result<IndexResult> {
    let tol = zero_tol(p);
    let mut tolerances = BTreeMap::from([("zero_band".to_string(), tol)]);
    let cap = match p.geometry {
        Geometry::Interval { .. } => MAX_MODES_1D,
        Geometry::Rectangle { .. } => MAX_MODES_2D,
    };
    let mut k = k0.max(4);
    let mut history: Vec<(i64, usize)> = Vec::new();
    while k <= cap {
        let op = assemble(p, k)?;
        let c = counts(&op, tol);
        history.push(c);
        let n = history.len();
        if n >= 3 && history[n - 1] == history[n - 2] && history[n - 2] == history[n - 3] {
            let neg = if p.b.as_constant().is_some() {
                let mut d: Vec<f64> = op.matrix.diag().into_iter().filter(|&e| e < -tol).collect();
                d.sort_by(f64::total_cmp);
                d
            } else if op.matrix.rows() <= CROSSING_LIST_DIM {
                sym_eig(&op.matrix)?
                    .eigenvalues
                    .into_iter()
                    .filter(|&e| e < -tol)
                    .collect()
            } else {
                vec![]
            };
            tolerances.insert("modes_per_axis".into(), k as f64);
            tolerances.insert("quadrature".into(), op.quadrature as f64);
            tolerances.insert("lambda_min".into(), lambda_lower_bound(p));
            return Ok(IndexResult {
                i: c.0,
                nu: c.1,
                crossings: CrossingSet {
                    interval: (lambda_lower_bound(p), 0.0),
                    crossings: crossings(&neg),
                    width: 0.0,
                },
                anchor: None,
                validation: Validation::none(),
                tolerances,
            });
        }
        k *= 2;
    }
    Err(Error::NoConvergence(format!(
        "Galerkin counts {history:?} did not settle by {cap} modes per axis"
    )))
}

fn crossings(neg: &[f64]) -> Vec<Crossing> {
    let mut out: Vec<Crossing> = Vec::new();
    for &e in neg {
        match out.last_mut() {
            Some(c) if (c.at - e).abs() <= 1e-9 * (1.0 + e.abs()) => c.multiplicity += 1,
            _ => out.push(Crossing { at: e, multiplicity: 1 }),
        }
    }
    out
}

/// The Dirichlet Sturm–Liouville problem `x'' + L² b(Lt) x = 0` on `[0, 1]`
/// equivalent to an interval problem, when `b` can be represented exactly.
pub fn interval_as_second_order(p: &EllipticProblem) -> Option<SecondOrderProblem> {
    let Geometry::Interval { length } = p.geometry else {
        return None;
    };
    let l2 = length * length;
    let b = match &p.b {
        ScalarField::Constant(c) => MatrixFunction::scalar(1, l2 * c),
        ScalarField::Sampled(v) => {
            let vals: Vec<f64> = if v[0].len() == 1 {
                v.iter().map(|r| r[0]).collect()
            } else if v.len() == 1 {
                v[0].clone()
            } else {
                return None;
            };
            if vals.len() < 2 {
                MatrixFunction::scalar(1, l2 * vals[0])
            } else {
                MatrixFunction::sampled(vals.iter().map(|x| Matrix::from_diag(&[l2 * x])).collect()).ok()?
            }
        }
        ScalarField::Function(_) => return None,
    };
    SecondOrderProblem::new(MatrixFunction::scalar(1, 1.0), b, SecondOrderBc::dirichlet()).ok()
}

/// `(i, ν)` of `Δ + b`. Interval problems are cross-checked against the
/// second-order engine.
pub fn elliptic_index(p: &EllipticProblem) -> Result<IndexResult> {
    let mut r = galerkin_index(p, DEFAULT_MODES)?;
    if let Some(sl) = interval_as_second_order(p) {
        let s = index_sweep(&sl)?;
        if (s.i, s.nu) != (r.i, r.nu) {
            return Err(Error::ValidatorDisagreement(format!(
                "sine Galerkin gives ({}, {}), Sturm-Liouville engine ({}, {})",
                r.i, r.nu, s.i, s.nu
            )));
        }
        r.validation = Validation {
            method: "sturm_liouville".into(),
            i: Some(s.i),
            nu: Some(s.nu),
            agrees: true,
            rescans: s.validation.rescans,
        };
    }
    Ok(r)
}
