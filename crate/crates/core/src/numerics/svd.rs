use super::{DenseMatrix, Real};
use crate::error::{Error, Result};

/// Singular values (descending) and the matching right singular vectors as
/// columns of `v`.
#[derive(Debug, Clone)]
pub struct Svd<T> {
    pub singular_values: Vec<T>,
    pub v: DenseMatrix<T>,
}

/// One-sided Jacobi SVD. Suited to the small matrices used for boundary
/// matching; small singular values are computed to high relative accuracy.
///
/// Wide inputs are padded with zero rows, so `v` always has `cols` columns and
/// the trailing columns of `v` span the kernel.
pub fn svd<T: Real>(a: &DenseMatrix<T>) -> Svd<T> {
    let (m, n) = a.shape();
    let rows = m.max(n);
    // Column-major working copy.
    let mut u: Vec<Vec<T>> = (0..n)
        .map(|j| {
            let mut c = vec![T::zero(); rows];
            for i in 0..m {
                c[i] = a[(i, j)];
            }
            c
        })
        .collect();
    let mut v: Vec<Vec<T>> = (0..n)
        .map(|j| {
            let mut c = vec![T::zero(); n];
            c[j] = T::one();
            c
        })
        .collect();
    let eps = T::epsilon();
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let (alpha, beta, gamma) = {
                    let (cp, cq) = (&u[p], &u[q]);
                    let mut alpha = T::zero();
                    let mut beta = T::zero();
                    let mut gamma = T::zero();
                    for (&x, &y) in cp.iter().zip(cq) {
                        alpha += x * x;
                        beta += y * y;
                        gamma += x * y;
                    }
                    (alpha, beta, gamma)
                };
                if gamma == T::zero() || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::lit(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                rotate(&mut u, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }
    let mut norms: Vec<(T, usize)> = u
        .iter()
        .enumerate()
        .map(|(j, c)| (c.iter().map(|&x| x * x).sum::<T>().sqrt(), j))
        .collect();
    norms.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));
    let mut vm = DenseMatrix::zeros(n, n);
    for (col, &(_, j)) in norms.iter().enumerate() {
        for i in 0..n {
            vm[(i, col)] = v[j][i];
        }
    }
    Svd {
        singular_values: norms.iter().take(m.min(n)).map(|&(s, _)| s).collect(),
        v: vm,
    }
}

fn rotate<T: Real>(cols: &mut [Vec<T>], p: usize, q: usize, c: T, s: T) {
    let (left, right) = cols.split_at_mut(q);
    let cp = &mut left[p];
    let cq = &mut right[0];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let xp = *x;
        let yq = *y;
        *x = c * xp - s * yq;
        *y = s * xp + c * yq;
    }
}

/// Number of singular values at or below `tol · σ_max` (or below `tol` in
/// absolute terms when `σ_max < tol`), together with the singular values.
pub fn rank_deficiency<T: Real>(s: &DenseMatrix<T>, tol: T) -> Result<(usize, Vec<T>)> {
    check_tol(tol)?;
    let sv = svd(s).singular_values;
    let smax = sv.first().copied().unwrap_or(T::zero());
    let bound = if smax < tol { tol } else { tol * smax };
    Ok((count_deficiency(s, &sv, bound), sv))
}

/// Like [`rank_deficiency`] but measured against an external scale, e.g. the
/// norm of the fundamental solution a matching matrix was built from.
pub fn rank_deficiency_scaled<T: Real>(
    s: &DenseMatrix<T>,
    tol: T,
    scale: T,
) -> Result<(usize, Vec<T>)> {
    check_tol(tol)?;
    let sv = svd(s).singular_values;
    let bound = tol * scale.max(T::min_positive_value());
    Ok((count_deficiency(s, &sv, bound), sv))
}

fn count_deficiency<T: Real>(s: &DenseMatrix<T>, sv: &[T], bound: T) -> usize {
    // Columns beyond the row count are kernel directions by construction.
    let structural = s.cols().saturating_sub(s.rows());
    structural + sv.iter().filter(|&&x| x <= bound).count()
}

fn check_tol<T: Real>(tol: T) -> Result<()> {
    if !(tol > T::zero() && tol < T::one()) {
        return Err(Error::InvalidMatrix(format!(
            "rank tolerance must lie in (0, 1), got {tol}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    type M = DenseMatrix<f64>;

    #[test]
    fn zero_matrix_is_fully_deficient() {
        let (d, _) = rank_deficiency(&M::zeros(2, 2), 1e-8).unwrap();
        assert_eq!(d, 2);
    }

    #[test]
    fn identity_has_full_rank() {
        let (d, sv) = rank_deficiency(&M::identity(4), 1e-8).unwrap();
        assert_eq!(d, 0);
        assert_eq!(sv, vec![1.0; 4]);
    }

    #[test]
    fn tiny_diagonal_entry_counts() {
        let (d, _) = rank_deficiency(&M::from_diag(&[1.0, 1e-14]), 1e-8).unwrap();
        assert_eq!(d, 1);
    }

    #[test]
    fn tolerance_must_be_in_unit_interval() {
        assert!(rank_deficiency(&M::identity(2), 0.0).is_err());
        assert!(rank_deficiency(&M::identity(2), 1.5).is_err());
    }

    #[test]
    fn singular_values_of_rotation_scaled() {
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        let a = M::from_rows(&[vec![3.0 * c, -s], vec![3.0 * s, c]]).unwrap();
        let sv = svd(&a).singular_values;
        assert_relative_eq!(sv[0], 3.0, epsilon = 1e-14);
        assert_relative_eq!(sv[1], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn kernel_vector_is_last_column() {
        let a = M::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        let out = svd(&a);
        let k = out.v.col(1);
        let r = a.matvec(&k);
        assert!(r.iter().all(|x| x.abs() < 1e-14));
    }

    #[test]
    fn wide_matrix_reports_structural_kernel() {
        let a = M::from_rows(&[vec![1.0, 0.0, 0.0]]).unwrap();
        let (d, sv) = rank_deficiency(&a, 1e-8).unwrap();
        assert_eq!(sv.len(), 1);
        assert_eq!(d, 2);
    }
}
