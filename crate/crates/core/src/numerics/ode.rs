use super::expm::expm;
use super::{DenseMatrix, Real};
use crate::error::{Error, Result};

/// State-transition matrices of `Φ' = C(t) Φ`, `Φ(0) = I`, on the uniform grid
/// `t_k = k / steps` of `[0, 1]`, by classical fourth-order Runge–Kutta with the
/// coefficient sampled at the stage nodes.
pub fn integrate_linear<T, F>(coef: F, dim: usize, steps: usize) -> Result<Vec<DenseMatrix<T>>>
where
    T: Real,
    F: Fn(T) -> DenseMatrix<T>,
{
    if steps < 16 {
        return Err(Error::ResolutionExceeded(format!(
            "integrator needs at least 16 steps, got {steps}"
        )));
    }
    let mut out = Vec::with_capacity(steps + 1);
    let mut phi = DenseMatrix::identity(dim);
    out.push(phi.clone());
    let h = T::one() / T::from_usize(steps).unwrap_or(T::one());
    for k in 0..steps {
        let t = T::from_usize(k).unwrap_or(T::zero()) * h;
        phi = rk4_step(&coef, t, h, &phi)?;
        out.push(phi.clone());
    }
    Ok(out)
}

/// Propagates `phi0` from `t0` to `t1` with `steps` RK4 steps.
pub fn rk4_propagate<T, F>(
    coef: F,
    t0: T,
    t1: T,
    steps: usize,
    phi0: &DenseMatrix<T>,
) -> Result<DenseMatrix<T>>
where
    T: Real,
    F: Fn(T) -> DenseMatrix<T>,
{
    let steps = steps.max(1);
    let h = (t1 - t0) / T::from_usize(steps).unwrap_or(T::one());
    let mut phi = phi0.clone();
    for k in 0..steps {
        let t = t0 + T::from_usize(k).unwrap_or(T::zero()) * h;
        phi = rk4_step(&coef, t, h, &phi)?;
    }
    Ok(phi)
}

/// Propagates `phi0` from `t0` to `t1` with `steps` fourth-order Magnus
/// steps, `Φ ← exp(Ω)Φ` with
/// `Ω = h/2·(A₁ + A₂) + √3/12·h²·(A₂A₁ − A₁A₂)` at the two Gauss nodes.
/// For Hamiltonian coefficients each factor is exactly symplectic.
pub fn magnus4_propagate<T, F>(
    coef: F,
    t0: T,
    t1: T,
    steps: usize,
    phi0: &DenseMatrix<T>,
) -> Result<DenseMatrix<T>>
where
    T: Real,
    F: Fn(T) -> DenseMatrix<T>,
{
    let steps = steps.max(1);
    let h = (t1 - t0) / T::from_usize(steps).unwrap_or(T::one());
    let half = T::lit(0.5);
    let off = T::lit(3f64.sqrt() / 6.0);
    let comm = T::lit(3f64.sqrt() / 12.0) * h * h;
    let mut phi = phi0.clone();
    for k in 0..steps {
        let t = t0 + T::from_usize(k).unwrap_or(T::zero()) * h;
        let a1 = coef(t + (half - off) * h);
        let a2 = coef(t + (half + off) * h);
        if !(a1.is_finite() && a2.is_finite()) {
            return Err(Error::NumericalBlowup(format!(
                "non-finite coefficient sample near t = {t}"
            )));
        }
        let omega = (&a1 + &a2)
            .scale(half * h)
            .axpy(comm, &(&a2.matmul(&a1) - &a1.matmul(&a2)));
        phi = expm(&omega).matmul(&phi);
        if !phi.is_finite() {
            return Err(Error::NumericalBlowup(format!("state overflowed near t = {t}")));
        }
    }
    Ok(phi)
}

fn rk4_step<T, F>(coef: &F, t: T, h: T, phi: &DenseMatrix<T>) -> Result<DenseMatrix<T>>
where
    T: Real,
    F: Fn(T) -> DenseMatrix<T>,
{
    let half = T::lit(0.5);
    let c0 = coef(t);
    let cm = coef(t + half * h);
    let c1 = coef(t + h);
    if !(c0.is_finite() && cm.is_finite() && c1.is_finite()) {
        return Err(Error::NumericalBlowup(format!(
            "non-finite coefficient sample near t = {t}"
        )));
    }
    let k1 = c0.matmul(phi);
    let k2 = cm.matmul(&phi.axpy(half * h, &k1));
    let k3 = cm.matmul(&phi.axpy(half * h, &k2));
    let k4 = c1.matmul(&phi.axpy(h, &k3));
    let sixth = h / T::lit(6.0);
    let two = T::lit(2.0);
    let next = phi
        .axpy(sixth, &k1)
        .axpy(sixth * two, &k2)
        .axpy(sixth * two, &k3)
        .axpy(sixth, &k4);
    if !next.is_finite() {
        return Err(Error::NumericalBlowup(format!(
            "state transition overflowed near t = {t}"
        )));
    }
    Ok(next)
}
