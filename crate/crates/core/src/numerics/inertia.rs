//! Sylvester inertia of symmetric matrices without computing eigenvalues.

use super::{sym_eig, DenseMatrix, Real};

/// Counts of positive, negative and (numerically) zero eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Inertia {
    pub positive: usize,
    pub negative: usize,
    pub zero: usize,
}

impl Inertia {
    fn add(&mut self, other: Inertia) {
        self.positive += other.positive;
        self.negative += other.negative;
        self.zero += other.zero;
    }
}

/// Symmetric block-tridiagonal matrix, optionally bordered by one extra block
/// row/column coupled to arbitrary chain nodes (used for cyclic closures).
#[derive(Debug, Clone)]
pub struct BlockChain<T> {
    /// Diagonal blocks `A_kk`.
    pub diag: Vec<DenseMatrix<T>>,
    /// Sub-diagonal blocks `A_{k+1,k}`.
    pub sub: Vec<DenseMatrix<T>>,
    /// Border diagonal block.
    pub corner: Option<DenseMatrix<T>>,
    /// `(k, A_{k,border})` couplings between chain node `k` and the border.
    pub border: Vec<(usize, DenseMatrix<T>)>,
}

/// Inertia of a [`BlockChain`] by block LDLᵀ elimination along the chain and a
/// final Schur complement on the border (Haynsworth additivity).
///
/// Pivot blocks whose eigenvalues fall below `pivmin` in magnitude are nudged
/// to `-pivmin`, the usual safeguard for Sturm counts.
pub fn block_chain_inertia<T: Real>(chain: &BlockChain<T>) -> Inertia {
    let m = chain.diag.len();
    let mut inertia = Inertia::default();
    if m == 0 {
        if let Some(c) = &chain.corner {
            inertia.add(small_inertia(c, T::zero()).0);
        }
        return inertia;
    }
    if let Some(folded) = fold_cycle(chain) {
        return block_chain_inertia(&folded);
    }
    let bdim = chain.corner.as_ref().map_or(0, DenseMatrix::rows);
    let scale = chain
        .diag
        .iter()
        .map(DenseMatrix::max_abs)
        .fold(T::one(), T::max);
    let pivmin = T::epsilon() * T::lit(16.0) * scale;

    let coupling = |k: usize| -> DenseMatrix<T> {
        let n = chain.diag[k].rows();
        let mut e = DenseMatrix::zeros(n, bdim);
        for (idx, blk) in &chain.border {
            if *idx == k {
                e = &e + blk;
            }
        }
        e
    };

    let mut d = chain.diag[0].clone();
    let mut e = coupling(0);
    let mut schur = chain.corner.clone().unwrap_or_else(|| DenseMatrix::zeros(0, 0));
    for k in 0..m {
        let (inr, dinv) = small_inertia(&d, pivmin);
        inertia.add(inr);
        if bdim > 0 {
            let dinv_e = dinv.matmul(&e);
            schur = &schur - &e.transpose().matmul(&dinv_e);
        }
        if k + 1 < m {
            let l = &chain.sub[k];
            let l_dinv = l.matmul(&dinv);
            d = &chain.diag[k + 1] - &l_dinv.matmul(&l.transpose());
            d = d.symmetrized();
            if bdim > 0 {
                e = &coupling(k + 1) - &l_dinv.matmul(&e);
            }
        }
    }
    if bdim > 0 {
        inertia.add(small_inertia(&schur.symmetrized(), pivmin).0);
    }
    inertia
}

// A border coupled only to the two ends of the chain closes a cycle
// v_0 = border, v_1..v_m = chain. Pairing v_j with v_{L-j} turns the cycle
// into a plain chain, so no Schur complement on the border is needed.
fn fold_cycle<T: Real>(chain: &BlockChain<T>) -> Option<BlockChain<T>> {
    let corner = chain.corner.as_ref()?;
    let m = chain.diag.len();
    if m < 2 || chain.border.iter().any(|(k, _)| *k != 0 && *k != m - 1) {
        return None;
    }
    let len = m + 1;
    let diag_of = |v: usize| if v == 0 { corner } else { &chain.diag[v - 1] };
    // undirected edges (i, j, A_ij)
    let mut edges: Vec<(usize, usize, DenseMatrix<T>)> = chain
        .sub
        .iter()
        .enumerate()
        .map(|(k, s)| (k + 2, k + 1, s.clone()))
        .collect();
    for (k, blk) in &chain.border {
        edges.push((k + 1, 0, blk.clone()));
    }
    let node = |v: usize| v.min(len - v);
    let groups = len / 2 + 1;
    let members = |g: usize| -> Vec<usize> {
        if g == 0 || 2 * g == len {
            vec![g]
        } else {
            vec![g, len - g]
        }
    };
    let offset = |v: usize| -> usize {
        let g = node(v);
        if v == g { 0 } else { diag_of(g).rows() }
    };
    let mut diag: Vec<DenseMatrix<T>> = (0..groups)
        .map(|g| {
            let mem = members(g);
            let dim: usize = mem.iter().map(|&v| diag_of(v).rows()).sum();
            let mut d = DenseMatrix::zeros(dim, dim);
            for &v in &mem {
                let o = offset(v);
                let b = diag_of(v);
                for i in 0..b.rows() {
                    for j in 0..b.cols() {
                        d[(o + i, o + j)] = b[(i, j)];
                    }
                }
            }
            d
        })
        .collect();
    let mut sub: Vec<DenseMatrix<T>> = (0..groups - 1)
        .map(|g| DenseMatrix::zeros(diag[g + 1].rows(), diag[g].rows()))
        .collect();
    for (i, j, blk) in edges {
        let (gi, gj) = (node(i), node(j));
        let (oi, oj) = (offset(i), offset(j));
        for r in 0..blk.rows() {
            for c in 0..blk.cols() {
                let x = blk[(r, c)];
                if gi == gj {
                    diag[gi][(oi + r, oj + c)] += x;
                    diag[gi][(oj + c, oi + r)] += x;
                } else if gi == gj + 1 {
                    sub[gj][(oi + r, oj + c)] += x;
                } else if gj == gi + 1 {
                    sub[gi][(oj + c, oi + r)] += x;
                } else {
                    return None;
                }
            }
        }
    }
    Some(BlockChain {
        diag,
        sub,
        corner: None,
        border: vec![],
    })
}

// Inertia and (safeguarded) inverse of a small symmetric block.
fn small_inertia<T: Real>(d: &DenseMatrix<T>, pivmin: T) -> (Inertia, DenseMatrix<T>) {
    let n = d.rows();
    let mut inr = Inertia::default();
    if n == 1 {
        let mut v = d[(0, 0)];
        if v.abs() <= pivmin {
            v = -pivmin.max(T::min_positive_value());
        }
        if v > T::zero() {
            inr.positive = 1;
        } else {
            inr.negative = 1;
        }
        return (inr, DenseMatrix::scaled_identity(1, T::one() / v));
    }
    let eig = match sym_eig(&d.symmetrized()) {
        Ok(e) => e,
        Err(_) => {
            inr.negative = n;
            return (inr, DenseMatrix::scaled_identity(n, T::nan()));
        }
    };
    let mut inv = DenseMatrix::zeros(n, n);
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        let lam = if lam.abs() <= pivmin {
            -pivmin.max(T::min_positive_value())
        } else {
            lam
        };
        if lam > T::zero() {
            inr.positive += 1;
        } else {
            inr.negative += 1;
        }
        let q = &eig.eigenvectors;
        for i in 0..n {
            let qi = q[(i, k)] / lam;
            for j in 0..n {
                inv[(i, j)] += qi * q[(j, k)];
            }
        }
    }
    (inr, inv)
}

/// Inertia of a dense symmetric matrix by Bunch–Kaufman diagonal pivoting.
/// Pivots with magnitude at most `zero_tol` are reported as zero.
pub fn dense_inertia<T: Real>(s: &DenseMatrix<T>, zero_tol: T) -> Inertia {
    assert!(s.is_square(), "inertia needs a square matrix");
    let n = s.rows();
    let mut a = s.symmetrized().to_rows();
    let mut inr = Inertia::default();
    if a.iter().enumerate().all(|(i, row)| {
        row.iter()
            .enumerate()
            .all(|(j, &v)| i == j || v == T::zero())
    }) {
        for (i, row) in a.iter().enumerate() {
            classify(row[i], zero_tol, &mut inr);
        }
        return inr;
    }
    let alpha = (T::one() + T::lit(17.0).sqrt()) / T::lit(8.0);
    let mut k = 0;
    while k < n {
        let absakk = a[k][k].abs();
        let (imax, colmax) = ((k + 1)..n)
            .map(|i| (i, a[i][k].abs()))
            .fold((k, T::zero()), |best, cur| if cur.1 > best.1 { cur } else { best });
        if absakk.max(colmax) == T::zero() {
            classify(T::zero(), zero_tol, &mut inr);
            k += 1;
            continue;
        }
        let mut two_by_two = false;
        let mut kp = k;
        if absakk < alpha * colmax {
            let rowmax = (k..n)
                .filter(|&j| j != imax)
                .map(|j| a[imax][j].abs())
                .fold(T::zero(), T::max);
            if absakk * rowmax >= alpha * colmax * colmax {
                // keep the 1x1 pivot at k
            } else if a[imax][imax].abs() >= alpha * rowmax {
                kp = imax;
            } else {
                kp = imax;
                two_by_two = true;
            }
        }
        let kk = if two_by_two { k + 1 } else { k };
        if kp != kk {
            a.swap(kp, kk);
            for row in a.iter_mut() {
                row.swap(kp, kk);
            }
        }
        if !two_by_two {
            let d = a[k][k];
            classify(d, zero_tol, &mut inr);
            if d != T::zero() {
                let (head, tail) = a.split_at_mut(k + 1);
                let pivot = &head[k][k + 1..];
                for row in tail.iter_mut() {
                    let f = row[k] / d;
                    if f == T::zero() {
                        continue;
                    }
                    for (x, &v) in row[k + 1..].iter_mut().zip(pivot) {
                        *x -= f * v;
                    }
                }
            }
            k += 1;
        } else {
            let (p, q, r) = (a[k][k], a[k][k + 1], a[k + 1][k + 1]);
            let det = p * r - q * q;
            // Bunch–Kaufman 2x2 pivots are indefinite.
            inr.positive += 1;
            inr.negative += 1;
            let (head, tail) = a.split_at_mut(k + 2);
            let (r0, r1) = (&head[k][k + 2..], &head[k + 1][k + 2..]);
            for row in tail.iter_mut() {
                let (x, y) = (row[k], row[k + 1]);
                let w0 = (r * x - q * y) / det;
                let w1 = (p * y - q * x) / det;
                for ((z, &u), &v) in row[k + 2..].iter_mut().zip(r0).zip(r1) {
                    *z -= w0 * u + w1 * v;
                }
            }
            k += 2;
        }
    }
    inr
}

fn classify<T: Real>(d: T, zero_tol: T, inr: &mut Inertia) {
    if d.abs() <= zero_tol {
        inr.zero += 1;
    } else if d > T::zero() {
        inr.positive += 1;
    } else {
        inr.negative += 1;
    }
}
