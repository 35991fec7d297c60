use crate::error::{Error, Result};
use crate::numerics::sym_eig;
use crate::Matrix;

const SYM_TOL: f64 = 1e-12;

/// A symmetric matrix-valued coefficient on `[0, 1]`.
///
/// Piecewise-constant functions use half-open pieces `[t_k, t_{k+1})`, the
/// last one closed at 1. Grid-sampled functions interpolate linearly between
/// the values at `k / (m - 1)`. Samples are symmetrized on construction.
#[derive(Debug, Clone, PartialEq)]
pub enum MatrixFunction {
    Constant(Matrix),
    PiecewiseConstant { breaks: Vec<f64>, values: Vec<Matrix> },
    GridSampled { values: Vec<Matrix> },
    /// `Σ c_k F_k`, produced by shifts and pencils of unlike variants.
    Combination(Vec<(f64, MatrixFunction)>),
}

fn checked_sample(m: &Matrix, what: &str) -> Result<Matrix> {
    if !m.is_square() {
        return Err(Error::ShapeMismatch(format!(
            "{what}: sample is {}x{}, expected square",
            m.rows(),
            m.cols()
        )));
    }
    if !m.is_finite() {
        return Err(Error::InvalidMatrix(format!("{what}: non-finite sample")));
    }
    if !m.is_symmetric(SYM_TOL) {
        return Err(Error::InvalidMatrix(format!(
            "{what}: sample is not symmetric to {SYM_TOL:e}"
        )));
    }
    Ok(m.symmetrized())
}

impl MatrixFunction {
    pub fn constant(m: Matrix) -> Result<Self> {
        Ok(Self::Constant(checked_sample(&m, "constant")?))
    }

    /// `c · I_n`.
    pub fn scalar(n: usize, c: f64) -> Self {
        Self::Constant(Matrix::scaled_identity(n, c))
    }

    pub fn zero(n: usize) -> Self {
        Self::scalar(n, 0.0)
    }

    pub fn piecewise(breaks: Vec<f64>, values: Vec<Matrix>) -> Result<Self> {
        if values.len() != breaks.len() + 1 {
            return Err(Error::ShapeMismatch(format!(
                "{} breakpoints need {} values, got {}",
                breaks.len(),
                breaks.len() + 1,
                values.len()
            )));
        }
        let mut prev = 0.0;
        for &b in &breaks {
            if !(b > prev && b < 1.0) {
                return Err(Error::InvalidMatrix(format!(
                    "breakpoints must increase strictly inside (0, 1), got {breaks:?}"
                )));
            }
            prev = b;
        }
        let values = values
            .iter()
            .map(|v| checked_sample(v, "piecewise"))
            .collect::<Result<Vec<_>>>()?;
        same_dims(&values)?;
        if breaks.is_empty() {
            return Ok(Self::Constant(values[0].clone()));
        }
        Ok(Self::PiecewiseConstant { breaks, values })
    }

    pub fn sampled(values: Vec<Matrix>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::ShapeMismatch(
                "grid-sampled function needs at least 2 samples".into(),
            ));
        }
        let values = values
            .iter()
            .map(|v| checked_sample(v, "sampled"))
            .collect::<Result<Vec<_>>>()?;
        same_dims(&values)?;
        Ok(Self::GridSampled { values })
    }

    /// Samples `f` on a uniform grid of `points` nodes.
    pub fn from_fn(points: usize, f: impl Fn(f64) -> Matrix) -> Result<Self> {
        let points = points.max(2);
        let values = (0..points)
            .map(|k| f(k as f64 / (points - 1) as f64))
            .collect();
        Self::sampled(values)
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Constant(m) => m.rows(),
            Self::PiecewiseConstant { values, .. } | Self::GridSampled { values } => {
                values[0].rows()
            }
            Self::Combination(terms) => terms.first().map_or(0, |(_, f)| f.dim()),
        }
    }

    /// Value at `t` (right-continuous at breakpoints).
    pub fn eval(&self, t: f64) -> Matrix {
        self.eval_side(t, false)
    }

    /// Left limit at `t` (equals [`eval`](Self::eval) away from breakpoints).
    pub fn eval_left(&self, t: f64) -> Matrix {
        self.eval_side(t, true)
    }

    fn eval_side(&self, t: f64, left: bool) -> Matrix {
        let t = t.clamp(0.0, 1.0);
        match self {
            Self::Constant(m) => m.clone(),
            Self::PiecewiseConstant { breaks, values } => {
                let k = if left {
                    breaks.iter().take_while(|&&b| b < t).count()
                } else {
                    breaks.iter().take_while(|&&b| b <= t).count()
                };
                values[k].clone()
            }
            Self::GridSampled { values } => {
                let m = values.len() - 1;
                let x = t * m as f64;
                let k = (x.floor() as usize).min(m - 1);
                let w = x - k as f64;
                values[k].scale(1.0 - w).axpy(w, &values[k + 1])
            }
            Self::Combination(terms) => {
                let mut acc = Matrix::zeros(self.dim(), self.dim());
                for (c, f) in terms {
                    acc = acc.axpy(*c, &f.eval_side(t, left));
                }
                acc
            }
        }
    }

    /// Interior points where the function may fail to be affine: breakpoints
    /// and grid nodes. Sorted, deduplicated.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out = match self {
            Self::Constant(_) => vec![],
            Self::PiecewiseConstant { breaks, .. } => breaks.clone(),
            Self::GridSampled { values } => {
                let m = values.len() - 1;
                (1..m).map(|k| k as f64 / m as f64).collect()
            }
            Self::Combination(terms) => terms.iter().flat_map(|(_, f)| f.breakpoints()).collect(),
        };
        out.sort_by(f64::total_cmp);
        out.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
        out
    }

    /// `[0, b_1, …, b_k, 1]`: on each piece the function is affine in `t`.
    pub fn partition(&self) -> Vec<f64> {
        let mut p = vec![0.0];
        p.extend(self.breakpoints());
        p.push(1.0);
        p
    }

    /// True when the function is constant on every piece of its partition.
    pub fn is_piecewise_constant(&self) -> bool {
        match self {
            Self::Constant(_) | Self::PiecewiseConstant { .. } => true,
            Self::GridSampled { values } => values.windows(2).all(|w| w[0] == w[1]),
            Self::Combination(terms) => terms.iter().all(|(_, f)| f.is_piecewise_constant()),
        }
    }

    /// One-sided values at every partition node. Convex or concave spectral
    /// quantities of an affine-on-pieces function attain their extremes here.
    pub fn extreme_samples(&self) -> Vec<Matrix> {
        let p = self.partition();
        let mut out = Vec::with_capacity(2 * p.len());
        for (k, &t) in p.iter().enumerate() {
            if k > 0 {
                out.push(self.eval_left(t));
            }
            if k + 1 < p.len() {
                out.push(self.eval(t));
            }
        }
        out
    }

    /// Extreme samples plus a uniform grid of `points` nodes.
    pub fn validation_samples(&self, points: usize) -> Vec<Matrix> {
        let mut out = self.extreme_samples();
        if points >= 2 {
            out.extend((0..points).map(|k| self.eval(k as f64 / (points - 1) as f64)));
        }
        out
    }

    /// `sup_t ‖F(t)‖₂`.
    pub fn sup_norm(&self) -> f64 {
        self.extreme_samples()
            .iter()
            .map(spectral_radius)
            .fold(0.0, f64::max)
    }

    /// `inf_t λ_min(F(t))`.
    pub fn min_eigenvalue(&self) -> f64 {
        self.extreme_samples()
            .iter()
            .map(|m| sym_eig(m).map_or(f64::NAN, |e| e.min_eigenvalue()))
            .fold(f64::INFINITY, f64::min)
    }

    /// `c · self`, preserving the variant.
    pub fn scaled(&self, c: f64) -> Self {
        self.map_values(&|m| m.scale(c))
            .unwrap_or_else(|| Self::Combination(vec![(c, self.clone())]))
    }

    /// `F(t) + λ·I`. Keeps the variant of `F`.
    pub fn shift(&self, lambda: f64) -> Self {
        let n = self.dim();
        let id = Matrix::scaled_identity(n, lambda);
        match self.map_values(&|m| m + &id) {
            Some(f) => f,
            None => match self {
                Self::Combination(terms) => {
                    let mut terms = terms.clone();
                    match terms
                        .iter_mut()
                        .find(|(c, f)| *c != 0.0 && matches!(f, Self::Constant(_))) {
                        Some((c, Self::Constant(m))) => {
                            *m = m.axpy(1.0 / *c, &id);
                        }
                        _ => terms.push((1.0, Self::Constant(id))),
                    }
                    Self::Combination(terms)
                }
                _ => unreachable!("non-combination variants map structurally"),
            },
        }
    }

    fn map_values(&self, f: &dyn Fn(&Matrix) -> Matrix) -> Option<Self> {
        match self {
            Self::Constant(m) => Some(Self::Constant(f(m).symmetrized())),
            Self::PiecewiseConstant { breaks, values } => Some(Self::PiecewiseConstant {
                breaks: breaks.clone(),
                values: values.iter().map(|v| f(v).symmetrized()).collect(),
            }),
            Self::GridSampled { values } => Some(Self::GridSampled {
                values: values.iter().map(|v| f(v).symmetrized()).collect(),
            }),
            Self::Combination(_) => None,
        }
    }

    /// The principal `len×len` block starting at `start`. `None` for
    /// combinations.
    pub fn principal_block(&self, start: usize, len: usize) -> Option<Self> {
        self.map_values(&|m| m.block(start, start, len, len))
    }

    /// `a·F + b·G`, merged into a single variant when the partitions allow.
    pub fn lin_comb(a: f64, f: &Self, b: f64, g: &Self) -> Self {
        use MatrixFunction::*;
        let mix = |x: &Matrix, y: &Matrix| x.scale(a).axpy(b, y).symmetrized();
        match (f, g) {
            (Constant(x), Constant(y)) => Constant(mix(x, y)),
            (Constant(x), PiecewiseConstant { breaks, values }) => PiecewiseConstant {
                breaks: breaks.clone(),
                values: values.iter().map(|y| mix(x, y)).collect(),
            },
            (PiecewiseConstant { breaks, values }, Constant(y)) => PiecewiseConstant {
                breaks: breaks.clone(),
                values: values.iter().map(|x| mix(x, y)).collect(),
            },
            (
                PiecewiseConstant { breaks: b1, values: v1 },
                PiecewiseConstant { breaks: b2, values: v2 },
            ) if b1 == b2 => PiecewiseConstant {
                breaks: b1.clone(),
                values: v1.iter().zip(v2).map(|(x, y)| mix(x, y)).collect(),
            },
            (PiecewiseConstant { .. }, PiecewiseConstant { .. }) => {
                let mut breaks = f.breakpoints();
                breaks.extend(g.breakpoints());
                breaks.sort_by(f64::total_cmp);
                breaks.dedup();
                let mut nodes = vec![0.0];
                nodes.extend(&breaks);
                let values = nodes.iter().map(|&t| mix(&f.eval(t), &g.eval(t))).collect();
                PiecewiseConstant { breaks, values }
            }
            (Constant(x), GridSampled { values }) => GridSampled {
                values: values.iter().map(|y| mix(x, y)).collect(),
            },
            (GridSampled { values }, Constant(y)) => GridSampled {
                values: values.iter().map(|x| mix(x, y)).collect(),
            },
            (GridSampled { values: v1 }, GridSampled { values: v2 }) if v1.len() == v2.len() => {
                GridSampled {
                    values: v1.iter().zip(v2).map(|(x, y)| mix(x, y)).collect(),
                }
            }
            _ => Combination(vec![(a, f.clone()), (b, g.clone())]),
        }
    }

    /// `(1 − s)·F + s·G`.
    pub fn lerp(f: &Self, g: &Self, s: f64) -> Self {
        Self::lin_comb(1.0 - s, f, s, g)
    }

    /// `diag{F, G}` pointwise.
    pub fn block_diag(f: &Self, g: &Self) -> Self {
        use MatrixFunction::*;
        let bd = |x: &Matrix, y: &Matrix| Matrix::block_diag(&[x, y]);
        match (f, g) {
            (Constant(x), Constant(y)) => Constant(bd(x, y)),
            (GridSampled { values: v1 }, GridSampled { values: v2 }) if v1.len() == v2.len() => {
                GridSampled {
                    values: v1.iter().zip(v2).map(|(x, y)| bd(x, y)).collect(),
                }
            }
            _ if f.is_piecewise_constant() && g.is_piecewise_constant() => {
                let mut breaks = f.breakpoints();
                breaks.extend(g.breakpoints());
                breaks.sort_by(f64::total_cmp);
                breaks.dedup();
                let mut nodes = vec![0.0];
                nodes.extend(&breaks);
                let values = nodes.iter().map(|&t| bd(&f.eval(t), &g.eval(t))).collect();
                if breaks.is_empty() {
                    Constant(bd(&f.eval(0.0), &g.eval(0.0)))
                } else {
                    PiecewiseConstant { breaks, values }
                }
            }
            _ => {
                // Resample on a common grid fine enough for both partitions.
                let m = f.partition().len().max(g.partition().len()).max(2) * 4 + 1;
                let values = (0..m)
                    .map(|k| {
                        let t = k as f64 / (m - 1) as f64;
                        bd(&f.eval(t), &g.eval(t))
                    })
                    .collect();
                GridSampled { values }
            }
        }
    }
}

fn same_dims(values: &[Matrix]) -> Result<()> {
    let n = values[0].rows();
    if values.iter().any(|v| v.rows() != n) {
        return Err(Error::ShapeMismatch(
            "samples of one function must share a dimension".into(),
        ));
    }
    Ok(())
}

pub(crate) fn spectral_radius(m: &Matrix) -> f64 {
    sym_eig(m).map_or(f64::NAN, |e| e.spectral_radius())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(d: &[f64]) -> Matrix {
        Matrix::from_diag(d)
    }

    #[test]
    fn shift_of_zero_is_minus_identity() {
        let f = MatrixFunction::zero(2).shift(-1.0);
        assert_eq!(f.eval(0.3), Matrix::scaled_identity(2, -1.0));
    }

    #[test]
    fn shift_keeps_constant_variant() {
        let f = MatrixFunction::constant(diag(&[2.0, 3.0])).unwrap();
        assert_eq!(f.shift(-2.0), MatrixFunction::Constant(diag(&[0.0, 1.0])));
    }

    #[test]
    fn shift_is_additive() {
        let f = MatrixFunction::from_fn(9, |t| {
            Matrix::from_rows(&[vec![t, 1.0 - t], vec![1.0 - t, t * t]]).unwrap()
        })
        .unwrap();
        let lhs = f.shift(0.7).shift(-2.2);
        let rhs = f.shift(-1.5);
        for k in 0..=20 {
            let t = k as f64 / 20.0;
            assert!((&lhs.eval(t) - &rhs.eval(t)).max_abs() < 1e-14);
        }
        let c = MatrixFunction::Combination(vec![(2.0, f.clone())]);
        let lhs = c.shift(0.7).shift(-2.2);
        for k in 0..=20 {
            let t = k as f64 / 20.0;
            assert!((&lhs.eval(t) - &f.eval(t).scale(2.0).axpy(-1.5, &Matrix::identity(2))).max_abs() < 1e-14);
        }
    }

    #[test]
    fn piecewise_is_half_open() {
        let f = MatrixFunction::piecewise(vec![0.5], vec![diag(&[1.0]), diag(&[2.0])]).unwrap();
        assert_eq!(f.eval(0.5)[(0, 0)], 2.0);
        assert_eq!(f.eval_left(0.5)[(0, 0)], 1.0);
        assert_eq!(f.eval(1.0)[(0, 0)], 2.0);
        assert!(f.is_piecewise_constant());
    }

    #[test]
    fn sampled_interpolates_linearly() {
        let f = MatrixFunction::sampled(vec![diag(&[0.0]), diag(&[2.0]), diag(&[0.0])]).unwrap();
        assert!((f.eval(0.25)[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((f.eval(0.75)[(0, 0)] - 1.0).abs() < 1e-15);
        assert_eq!(f.breakpoints(), vec![0.5]);
        assert_eq!(f.sup_norm(), 2.0);
    }

    #[test]
    fn rejects_asymmetric_and_bad_breaks() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        assert!(MatrixFunction::constant(a).is_err());
        assert!(MatrixFunction::piecewise(vec![1.2], vec![diag(&[1.0]), diag(&[1.0])]).is_err());
    }

    #[test]
    fn tiny_asymmetry_is_symmetrized() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0 + 1e-14, 1.0]]).unwrap();
        let f = MatrixFunction::constant(a).unwrap();
        let m = f.eval(0.0);
        assert_eq!(m[(0, 1)], m[(1, 0)]);
    }

    #[test]
    fn lin_comb_merges_piecewise_partitions() {
        let f = MatrixFunction::piecewise(vec![0.3], vec![diag(&[1.0]), diag(&[2.0])]).unwrap();
        let g = MatrixFunction::piecewise(vec![0.6], vec![diag(&[10.0]), diag(&[20.0])]).unwrap();
        let h = MatrixFunction::lerp(&f, &g, 0.5);
        assert!(matches!(h, MatrixFunction::PiecewiseConstant { .. }));
        for t in [0.1, 0.4, 0.9] {
            let want = 0.5 * f.eval(t)[(0, 0)] + 0.5 * g.eval(t)[(0, 0)];
            assert!((h.eval(t)[(0, 0)] - want).abs() < 1e-15);
        }
    }

    #[test]
    fn block_diag_of_constants() {
        let f = MatrixFunction::block_diag(&MatrixFunction::scalar(1, 2.0), &MatrixFunction::scalar(2, 1.0));
        assert_eq!(f.eval(0.5), diag(&[2.0, 1.0, 1.0]));
    }
}
