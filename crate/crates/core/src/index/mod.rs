//! Index `i` and nullity `ν` by counting crossings along shifts and pencils,
//! with an independent finite-element check.

pub mod galerkin;
pub mod scan;

use std::collections::BTreeMap;

use serde::Serialize;

pub use galerkin::GalerkinCount;
pub use scan::{find_crossings, find_crossings_scaled, Crossing, CrossingSet, ScanOptions};

use crate::error::{Error, Result};
use crate::problems::{
    path, FirstOrderBc, FirstOrderProblem, MatrixFunction, PencilPath, Problem, SecondOrderBc,
    SecondOrderProblem, VALIDATION_POINTS,
};
use crate::spectral::{
    end_transition, first_order_form, form_nullity, matching_matrix, quick_transition, to_first_order,
    FirstOrderForm, Resolution,
};
use crate::Matrix;

/// Reference value an index was built on.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Anchor {
    pub description: String,
    pub value: i64,
}

/// Outcome of the independent check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Validation {
    /// `"galerkin"`, `"sturm_liouville"`, `"exact"` or `"none"`.
    pub method: String,
    pub i: Option<i64>,
    pub nu: Option<usize>,
    pub agrees: bool,
    /// Scans repeated at a finer grid before agreement.
    pub rescans: usize,
}

impl Validation {
    pub fn none() -> Self {
        Self {
            method: "none".into(),
            i: None,
            nu: None,
            agrees: true,
            rescans: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndexResult {
    pub i: i64,
    pub nu: usize,
    pub crossings: CrossingSet,
    pub anchor: Option<Anchor>,
    pub validation: Validation,
    pub tolerances: BTreeMap<String, f64>,
}

/// Settings shared by the sweep and pencil engines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepOptions {
    pub scan: ScanOptions,
    pub resolution: Resolution,
    /// How often the scan grid may double after a validator disagreement.
    pub max_rescans: usize,
    pub validate: bool,
    pub galerkin_elements: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            scan: ScanOptions::default(),
            resolution: Resolution::default(),
            max_rescans: 4,
            validate: true,
            galerkin_elements: galerkin::DEFAULT_ELEMENTS,
        }
    }
}

fn singular_values(form: &FirstOrderForm, res: &Resolution, precise: bool) -> Result<(Vec<f64>, f64)> {
    let g = if precise {
        end_transition(&form.hamiltonian, res)?.end().clone()
    } else {
        quick_transition(&form.hamiltonian, res.steps)?
    };
    let m = matching_matrix(&g, &form.boundary)?;
    Ok((m.normalized_singular_values(), m.scale))
}

fn tolerances(opts: &SweepOptions, width: f64) -> BTreeMap<String, f64> {
    BTreeMap::from([
        ("rank".to_string(), crate::numerics::DEFAULT_RANK_TOL),
        ("crossing_width".to_string(), width),
        ("stability".to_string(), crate::spectral::STABILITY_TOL),
        ("scan_points".to_string(), opts.scan.points as f64),
    ])
}

/// `λ_min < 0` such that `ν(B + λI) = 0` for every `λ ≤ λ_min`.
///
/// Uses the trace inequality `|x(t₀)|² ≤ ε∫|x'|² + (1 + 1/ε)∫|x|²` to bound
/// the boundary terms, then checks the bound against a coarse discrete
/// spectrum.
pub fn lambda_lower_bound(p: &SecondOrderProblem) -> Result<f64> {
    let lbar = match &p.bc {
        SecondOrderBc::GeneralizedPeriodic { .. } => 0.0,
        SecondOrderBc::SturmLiouville { alpha, beta } => {
            // Only boundary terms that lower the form need bounding:
            // cot α |x(0)|² enters with a plus sign, cot β |x(1)|² with a minus.
            let cot = |x: f64| if x.sin().abs() < 1e-15 { 0.0 } else { x.cos() / x.sin() };
            let l0 = p.lambda.eval(0.0).norm2().max(1.0);
            let l1 = p.lambda.eval_left(1.0).norm2().max(1.0);
            let a = (-cot(*alpha)).max(0.0) * l0 + cot(*beta).max(0.0) * l1;
            if a == 0.0 {
                0.0
            } else {
                let eps = (p.lambda_min_eigenvalue() / (2.0 * a + 1.0)).min(1.0);
                a * (1.0 + 1.0 / eps)
            }
        }
    };
    let lmin = -lbar - p.b.sup_norm() - 1.0;
    if galerkin::count_above_on(p, 256, -lmin) != 0 {
        return Err(Error::VerificationFailed(format!(
            "discrete spectrum reaches beyond the bound {:e}",
            -lmin
        )));
    }
    Ok(lmin)
}

/// `(i, ν)` of a second-order problem by counting crossings of
/// `λ ↦ ν(B + λI)` on `[λ_min, 0)`.
pub fn index_sweep(p: &SecondOrderProblem) -> Result<IndexResult> {
    index_sweep_with(p, &SweepOptions::default())
}

pub fn index_sweep_with(p: &SecondOrderProblem, opts: &SweepOptions) -> Result<IndexResult> {
    let lmin = lambda_lower_bound(p)?;
    let form = to_first_order(p);
    let nu = form_nullity(&form, &opts.resolution)?.nu;
    let sv = |lam: f64, precise: bool| {
        let f = FirstOrderForm {
            hamiltonian: form.hamiltonian.shifted(lam),
            boundary: form.boundary.clone(),
        };
        singular_values(&f, &opts.resolution, precise)
    };
    let gal = if opts.validate {
        Some(galerkin::count(p, opts.galerkin_elements)?)
    } else {
        None
    };
    if let Some(g) = &gal {
        if g.nu != nu {
            return Err(Error::ValidatorDisagreement(format!(
                "nullity {nu} from the matching matrix, {} from finite elements",
                g.nu
            )));
        }
    }
    let mut scan = opts.scan;
    let mut last = 0;
    for rescans in 0..=opts.max_rescans {
        let set = find_crossings_scaled(&sv, lmin, 0.0, &scan)?;
        let i = set.count_inside(lmin, 0.0) as i64;
        let mut tol = tolerances(opts, set.width);
        tol.insert("lambda_min".into(), lmin);
        let validation = match &gal {
            None => Validation::none(),
            Some(g) if g.i == i => Validation {
                method: "galerkin".into(),
                i: Some(g.i),
                nu: Some(g.nu),
                agrees: true,
                rescans,
            },
            Some(_) => {
                last = i;
                scan.points *= 2;
                continue;
            }
        };
        if let Some(g) = &gal {
            tol.insert("galerkin_zero".into(), g.zero_tol);
        }
        return Ok(IndexResult {
            i,
            nu,
            crossings: set,
            anchor: None,
            validation,
            tolerances: tol,
        });
    }
    Err(Error::ValidatorDisagreement(format!(
        "crossing count {last} vs finite-element index {} after {} rescans",
        gal.map_or(0, |g| g.i),
        opts.max_rescans
    )))
}

/// A family of problems sharing everything but `B`.
pub trait Template: Sync {
    fn b_dim(&self) -> usize;
    fn form(&self, b: &MatrixFunction) -> FirstOrderForm;
    /// Independent index for coefficient `b`, when a validator exists.
    fn galerkin_index(&self, b: &MatrixFunction) -> Option<Result<i64>>;
}

impl Template for SecondOrderProblem {
    fn b_dim(&self) -> usize {
        self.dim()
    }

    fn form(&self, b: &MatrixFunction) -> FirstOrderForm {
        to_first_order(&self.with_b(b.clone()))
    }

    fn galerkin_index(&self, b: &MatrixFunction) -> Option<Result<i64>> {
        Some(galerkin::count(&self.with_b(b.clone()), galerkin::DEFAULT_ELEMENTS).map(|c| c.i))
    }
}

impl Template for FirstOrderProblem {
    fn b_dim(&self) -> usize {
        2 * self.half_dim()
    }

    fn form(&self, b: &MatrixFunction) -> FirstOrderForm {
        first_order_form(&self.with_b(b.clone()))
    }

    fn galerkin_index(&self, _b: &MatrixFunction) -> Option<Result<i64>> {
        None
    }
}

/// Relative index along a monotone pencil with its crossing record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelativeIndex {
    pub value: i64,
    /// `ν(B₀)`, counted at `s = 0`.
    pub nu_start: usize,
    pub crossings: CrossingSet,
    pub validation: Validation,
}

fn check_dim<T: Template + ?Sized>(t: &T, b: &MatrixFunction) -> Result<()> {
    if b.dim() != t.b_dim() {
        return Err(Error::ShapeMismatch(format!(
            "coefficient is {0}x{0}, template expects {1}x{1}",
            b.dim(),
            t.b_dim()
        )));
    }
    Ok(())
}

/// `I(B₀, B₁) = Σ_{s ∈ [0, 1)} ν(B₀ + s(B₁ − B₀))` for `B₁ − B₀ ⪰ ε > 0`.
pub fn relative_index_monotone<T: Template + ?Sized>(t: &T, path: &PencilPath) -> Result<i64> {
    relative_index_monotone_with(t, path, &SweepOptions::default()).map(|r| r.value)
}

pub fn relative_index_monotone_with<T: Template + ?Sized>(
    t: &T,
    path: &PencilPath,
    opts: &SweepOptions,
) -> Result<RelativeIndex> {
    check_dim(t, &path.b0)?;
    check_dim(t, &path.b1)?;
    if !path.monotone {
        return Err(Error::NotMonotone(format!(
            "B1 - B0 is not uniformly positive definite (smallest sampled eigenvalue {:e})",
            crate::problems::min_gap(&path.b0, &path.b1)
        )));
    }
    let nu0 = form_nullity(&t.form(&path.b0), &opts.resolution)?.nu;
    let sv = |s: f64, precise: bool| singular_values(&t.form(&path.at(s)), &opts.resolution, precise);
    let expected = if opts.validate {
        match (t.galerkin_index(&path.b1), t.galerkin_index(&path.b0)) {
            (Some(a), Some(b)) => Some(a? - b?),
            _ => None,
        }
    } else {
        None
    };
    let mut scan = opts.scan;
    let mut last = 0;
    for rescans in 0..=opts.max_rescans {
        let set = find_crossings_scaled(&sv, 0.0, 1.0, &scan)?;
        let value = (nu0 + set.count_inside(0.0, 1.0)) as i64;
        let validation = match expected {
            None => Validation::none(),
            Some(e) if e == value => Validation {
                method: "galerkin".into(),
                i: Some(e),
                nu: None,
                agrees: true,
                rescans,
            },
            Some(_) => {
                last = value;
                scan.points *= 2;
                continue;
            }
        };
        return Ok(RelativeIndex {
            value,
            nu_start: nu0,
            crossings: set,
            validation,
        });
    }
    Err(Error::ValidatorDisagreement(format!(
        "pencil crossing count {last} vs finite-element difference {}",
        expected.unwrap_or(0)
    )))
}

/// Shift `k` with `kI − B ⪰ I` for both coefficients.
pub fn dominating_shift(b1: &MatrixFunction, b2: &MatrixFunction) -> f64 {
    let rho = |b: &MatrixFunction| {
        b.validation_samples(VALIDATION_POINTS)
            .iter()
            .map(crate::problems::spectral_radius)
            .fold(0.0, f64::max)
    };
    1.0 + rho(b1).max(rho(b2))
}

/// `I(B₁, B₂)` for arbitrary symmetric `B₁`, `B₂` via a common dominating
/// multiple of the identity.
pub fn relative_index<T: Template + ?Sized>(t: &T, b1: &MatrixFunction, b2: &MatrixFunction) -> Result<i64> {
    relative_index_with_shift(t, b1, b2, dominating_shift(b1, b2), &SweepOptions::default())
}

/// `I(B₁, kI) − I(B₂, kI)`. Any `k` with `kI − B_j ⪰ ε > 0` gives the same value.
pub fn relative_index_with_shift<T: Template + ?Sized>(
    t: &T,
    b1: &MatrixFunction,
    b2: &MatrixFunction,
    k: f64,
    opts: &SweepOptions,
) -> Result<i64> {
    check_dim(t, b1)?;
    check_dim(t, b2)?;
    let top = MatrixFunction::scalar(t.b_dim(), k);
    let a = relative_index_monotone_with(t, &path(b1, &top)?, opts)?.value;
    let b = relative_index_monotone_with(t, &path(b2, &top)?, opts)?.value;
    Ok(a - b)
}

/// `(i_{B₀}(B), ν(B))` with `i_{B₀}(B) = I(B₀, B) − ν(B₀)`, for `B − B₀ ⪰ ε > 0`.
pub fn ekeland_index<T: Template + ?Sized>(
    t: &T,
    b: &MatrixFunction,
    b0: &MatrixFunction,
) -> Result<(i64, usize)> {
    let opts = SweepOptions::default();
    let r = relative_index_monotone_with(t, &path(b0, b)?, &opts)?;
    let nu = form_nullity(&t.form(b), &opts.resolution)?.nu;
    Ok((r.value - r.nu_start as i64, nu))
}

/// `B = diag{B', I}` exactly, when that holds on every sample.
fn second_order_part(b: &MatrixFunction, n: usize) -> Option<MatrixFunction> {
    let ok = b.validation_samples(VALIDATION_POINTS).iter().all(|m| {
        let off = m.block(0, n, n, n).max_abs();
        let low = (&m.block(n, n, n, n) - &Matrix::identity(n)).max_abs();
        off <= 1e-14 && low <= 1e-14
    });
    if ok {
        b.principal_block(0, n)
    } else {
        None
    }
}

/// `(i, ν)` of `ẋ = J B(t) x` with Bolza or symplectic end conditions.
///
/// Bolza problems are anchored at `B = diag{0, I}`, which is the
/// Sturm–Liouville problem `x'' = 0` with the same angles. Symplectic problems
/// are anchored at `B = 0` with the caller's anchor value.
pub fn index_first_order(p: &FirstOrderProblem) -> Result<IndexResult> {
    let opts = SweepOptions::default();
    let n = p.half_dim();
    let nu = form_nullity(&first_order_form(p), &opts.resolution)?.nu;
    let (anchor, base) = match &p.bc {
        FirstOrderBc::Bolza { alpha, beta } => {
            let sl = SecondOrderProblem::new(
                MatrixFunction::scalar(n, 1.0),
                MatrixFunction::zero(n),
                SecondOrderBc::SturmLiouville { alpha: *alpha, beta: *beta },
            )?;
            let a = index_sweep(&sl)?.i;
            let base = MatrixFunction::block_diag(&MatrixFunction::zero(n), &MatrixFunction::scalar(n, 1.0));
            (
                Anchor {
                    description: "B = diag{0, I}, equal to x'' = 0 with the same angles".into(),
                    value: a,
                },
                base,
            )
        }
        FirstOrderBc::Symplectic { .. } => (
            Anchor {
                description: "B = 0".into(),
                value: p.anchor,
            },
            MatrixFunction::zero(2 * n),
        ),
    };
    let k = dominating_shift(&p.b, &base);
    let rel = relative_index_with_shift(p, &base, &p.b, k, &opts)?;
    let i = anchor.value + rel;
    let mut validation = Validation::none();
    if let (FirstOrderBc::Bolza { alpha, beta }, Some(b1)) = (&p.bc, second_order_part(&p.b, n)) {
        let sl = SecondOrderProblem::new(
            MatrixFunction::scalar(n, 1.0),
            b1,
            SecondOrderBc::SturmLiouville { alpha: *alpha, beta: *beta },
        )?;
        let r = index_sweep(&sl)?;
        if (r.i, r.nu) != (i, nu) {
            return Err(Error::ValidatorDisagreement(format!(
                "first-order engine gives ({i}, {nu}), second-order engine ({}, {})",
                r.i, r.nu
            )));
        }
        validation = Validation {
            method: "sturm_liouville".into(),
            i: Some(r.i),
            nu: Some(r.nu),
            agrees: true,
            rescans: 0,
        };
    }
    let mut tol = tolerances(&opts, opts.scan.width_rel);
    tol.insert("dominating_shift".into(), k);
    Ok(IndexResult {
        i,
        nu,
        crossings: CrossingSet::empty((0.0, 1.0)),
        anchor: Some(anchor),
        validation,
        tolerances: tol,
    })
}

/// `(i, ν)` for any problem class.
pub fn index(p: &Problem) -> Result<IndexResult> {
    match p {
        Problem::SecondOrder(q) => index_sweep(q),
        Problem::FirstOrder(q) => index_first_order(q),
        Problem::Elliptic(q) => crate::elliptic::elliptic_index(q),
    }
}

/// Discrete `(i, ν)` from the Galerkin validators, starting at `truncation`
/// elements (second order) or modes per axis (elliptic).
pub fn galerkin_count(p: &Problem, truncation: usize) -> Result<(i64, usize)> {
    match p {
        Problem::SecondOrder(q) => galerkin::count(q, truncation).map(|c| (c.i, c.nu)),
        Problem::Elliptic(q) => crate::elliptic::galerkin_index(q, truncation).map(|r| (r.i, r.nu)),
        Problem::FirstOrder(_) => Err(Error::DomainError(
            "no Galerkin validator for first-order problems; use index_first_order".into(),
        )),
    }
}
