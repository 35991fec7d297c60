//! Piecewise-linear finite elements for `(Λx')' + Bx` as an independent
//! check on the shooting engine.
//!
//! The quadratic form
//! `q(x) = −∫Λx'·x' + ∫Bx·x + cot β·|x(1)|² − cot α·|x(0)|²`
//! is assembled exactly on a mesh containing every breakpoint, so discrete
//! eigenvalues are Rayleigh–Ritz lower bounds of the true ones and converge
//! like `h²`. Counts come from Sylvester inertia of `K − σG`; eigenvalues
//! near zero are bisected on two nested meshes and Richardson-extrapolated.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{block_chain_inertia, BlockChain};
use crate::problems::{SecondOrderBc, SecondOrderProblem};
use crate::Matrix;

/// Default number of uniform elements on the coarsest mesh.
pub const DEFAULT_ELEMENTS: usize = 128;
const MAX_LEVELS: usize = 9;

// Three-point Gauss–Legendre rule on [0, 1].
const GAUSS_X: [f64; 3] = [0.112_701_665_379_258_31, 0.5, 0.887_298_334_620_741_7];
const GAUSS_W: [f64; 3] = [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0];

/// Outcome of [`count`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GalerkinCount {
    pub i: i64,
    pub nu: usize,
    /// Elements on the finest mesh used.
    pub elements: usize,
    /// Extrapolated eigenvalues that fell in the near-zero window.
    pub near_zero: Vec<f64>,
    pub zero_tol: f64,
}

/// Assembled stiffness-like form `K` and mass `G` in block-chain layout.
pub(crate) struct Fem {
    k: BlockChain<f64>,
    g: BlockChain<f64>,
}

impl Fem {
    pub(crate) fn assemble(p: &SecondOrderProblem, mesh: &[f64]) -> Self {
        let n = p.dim();
        let ne = mesh.len() - 1;
        let zero = Matrix::zeros(n, n);
        let mut kd = vec![zero.clone(); ne + 1];
        let mut ks = vec![zero.clone(); ne];
        let mut gd = vec![zero.clone(); ne + 1];
        let mut gs = vec![zero.clone(); ne];
        for e in 0..ne {
            let (t0, t1) = (mesh[e], mesh[e + 1]);
            let h = t1 - t0;
            let mut lbar = zero.clone();
            let mut baa = zero.clone();
            let mut bab = zero.clone();
            let mut bbb = zero.clone();
            for q in 0..3 {
                let t = t0 + GAUSS_X[q] * h;
                let w = GAUSS_W[q];
                lbar = lbar.axpy(w, &p.lambda.eval(t));
                let bq = p.b.eval(t);
                let (pa, pb) = (1.0 - GAUSS_X[q], GAUSS_X[q]);
                baa = baa.axpy(w * h * pa * pa, &bq);
                bab = bab.axpy(w * h * pa * pb, &bq);
                bbb = bbb.axpy(w * h * pb * pb, &bq);
            }
            let stiff = lbar.scale(1.0 / h);
            kd[e] = &(&kd[e] - &stiff) + &baa;
            kd[e + 1] = &(&kd[e + 1] - &stiff) + &bbb;
            ks[e] = &stiff + &bab;
            let id = Matrix::identity(n);
            gd[e] = gd[e].axpy(h / 3.0, &id);
            gd[e + 1] = gd[e + 1].axpy(h / 3.0, &id);
            gs[e] = id.scale(h / 6.0);
        }
        match &p.bc {
            SecondOrderBc::SturmLiouville { alpha, beta } => {
                let (lo, hi) = (
                    usize::from(alpha.sin() == 0.0),
                    ne - usize::from(beta.sin().abs() < 1e-15),
                );
                if *alpha != 0.0 {
                    kd[0] = kd[0].axpy(-alpha.cos() / alpha.sin(), &Matrix::identity(n));
                }
                if lo <= hi && hi == ne {
                    kd[ne] = kd[ne].axpy(beta.cos() / beta.sin(), &Matrix::identity(n));
                }
                let chain = |d: &[Matrix], s: &[Matrix]| BlockChain {
                    diag: d[lo..=hi].to_vec(),
                    sub: s[lo..hi].to_vec(),
                    corner: None,
                    border: vec![],
                };
                Self {
                    k: chain(&kd, &ks),
                    g: chain(&gd, &gs),
                }
            }
            SecondOrderBc::GeneralizedPeriodic { m, .. } => {
                // x_N = M x_0 is eliminated; node 0 becomes the border.
                let mt = m.transpose();
                let build = |d: &[Matrix], s: &[Matrix]| {
                    let corner = &d[0] + &mt.matmul(&d[ne]).matmul(m);
                    let diag = d[1..ne].to_vec();
                    let sub = s[1..ne - 1].to_vec();
                    let first = s[0].clone();
                    let last = s[ne - 1].transpose().matmul(m);
                    BlockChain {
                        diag,
                        sub,
                        corner: Some(corner.symmetrized()),
                        border: vec![(0, first), (ne - 2, last)],
                    }
                };
                Self {
                    k: build(&kd, &ks),
                    g: build(&gd, &gs),
                }
            }
        }
    }

    /// Number of discrete eigenvalues `μ` of `K c = μ G c` with `μ > σ`.
    pub(crate) fn count_above(&self, sigma: f64) -> usize {
        let comb = |a: &Matrix, b: &Matrix| a.axpy(-sigma, b);
        let chain = BlockChain {
            diag: self.k.diag.iter().zip(&self.g.diag).map(|(a, b)| comb(a, b)).collect(),
            sub: self.k.sub.iter().zip(&self.g.sub).map(|(a, b)| comb(a, b)).collect(),
            corner: match (&self.k.corner, &self.g.corner) {
                (Some(a), Some(b)) => Some(comb(a, b)),
                _ => None,
            },
            border: self
                .k
                .border
                .iter()
                .zip(&self.g.border)
                .map(|((i, a), (_, b))| (*i, comb(a, b)))
                .collect(),
        };
        block_chain_inertia(&chain).positive
    }

    /// The `r`-th largest eigenvalue (1-based) by bisection on the count.
    fn eigenvalue(&self, r: usize, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
        let mut guard = 0;
        while self.count_above(lo) < r && guard < 200 {
            lo = lo - (hi - lo).abs().max(1.0);
            guard += 1;
        }
        while self.count_above(hi) >= r && guard < 400 {
            hi = hi + (hi - lo).abs().max(1.0);
            guard += 1;
        }
        for _ in 0..200 {
            if hi - lo <= tol {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if self.count_above(mid) >= r {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Mesh containing a uniform grid of `elements` cells and every breakpoint
/// of `Λ` and `B`.
pub(crate) fn base_mesh(p: &SecondOrderProblem, elements: usize) -> Vec<f64> {
    let mut m: Vec<f64> = (0..=elements).map(|k| k as f64 / elements as f64).collect();
    m.extend(p.lambda.breakpoints());
    m.extend(p.b.breakpoints());
    m.sort_by(f64::total_cmp);
    m.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    m
}

fn refine(mesh: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * mesh.len());
    for w in mesh.windows(2) {
        out.push(w[0]);
        out.push(0.5 * (w[0] + w[1]));
    }
    out.push(1.0);
    out
}

/// Width of the near-zero band.
pub(crate) fn zero_tol(p: &SecondOrderProblem) -> f64 {
    1e-7 * (1.0 + p.b.sup_norm())
}

fn window(p: &SecondOrderProblem, mesh: &[f64], ztol: f64) -> f64 {
    let h = mesh.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let lmin = p.lambda_min_eigenvalue();
    let lmax = p.lambda.sup_norm();
    let omega2 = (p.b.sup_norm() + 1.0) / lmin;
    let err = h * h / 12.0 * lmax * omega2 * omega2;
    (4.0 * err).max(100.0 * ztol)
}

struct Level {
    mesh: Vec<f64>,
    fem: Fem,
}

fn classify(p: &SecondOrderProblem, coarse: &Level, fine: &Level, ztol: f64) -> (i64, usize, Vec<f64>) {
    let w = window(p, &coarse.mesh, ztol);
    let sure = fine.fem.count_above(w);
    let upto = fine.fem.count_above(-w);
    let btol = 1e-13 * (1.0 + p.b.sup_norm());
    let mut pos = 0;
    let mut zero = 0;
    let mut near = Vec::new();
    for r in (sure + 1)..=upto {
        let mf = fine.fem.eigenvalue(r, -w, w, btol);
        let mc = coarse.fem.eigenvalue(r, mf - w, mf, btol);
        let rich = (4.0 * mf - mc) / 3.0;
        near.push(rich);
        if rich.abs() <= ztol {
            zero += 1;
        } else if rich > 0.0 {
            pos += 1;
        }
    }
    ((sure + pos) as i64, zero, near)
}

/// Discrete index and nullity, doubling the mesh from `elements` cells until
/// two consecutive levels agree.
pub fn count(p: &SecondOrderProblem, elements: usize) -> Result<GalerkinCount> {
    let elements = elements.max(8);
    let ztol = zero_tol(p);
    let mut levels: Vec<Level> = Vec::new();
    let mut mesh = base_mesh(p, elements);
    let mut prev: Option<(i64, usize)> = None;
    for _ in 0..MAX_LEVELS {
        let fem = Fem::assemble(p, &mesh);
        levels.push(Level {
            mesh: mesh.clone(),
            fem,
        });
        if levels.len() >= 2 {
            let k = levels.len();
            let (i, nu, near) = classify(p, &levels[k - 2], &levels[k - 1], ztol);
            if prev == Some((i, nu)) {
                return Ok(GalerkinCount {
                    i,
                    nu,
                    elements: mesh.len() - 1,
                    near_zero: near,
                    zero_tol: ztol,
                });
            }
            prev = Some((i, nu));
            // Only the last two levels are needed from here on.
            if levels.len() > 2 {
                levels.remove(0);
            }
        }
        mesh = refine(&mesh);
    }
    Err(Error::NoConvergence(format!(
        "finite-element counts did not settle by {} elements",
        mesh.len() - 1
    )))
}

/// Number of discrete eigenvalues above `sigma` on a mesh of `elements`
/// uniform cells plus breakpoints. Used for a-posteriori bound checks.
pub(crate) fn count_above_on(p: &SecondOrderProblem, elements: usize, sigma: f64) -> usize {
    let mesh = base_mesh(p, elements);
    Fem::assemble(p, &mesh).count_above(sigma)
}
