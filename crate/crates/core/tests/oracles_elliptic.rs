use std::f64::consts::PI;

use spectra_index::elliptic::{assemble, elliptic_index, mode_eigenvalue};
use spectra_index::index::galerkin_count;
use spectra_index::oracles::{
    dirichlet_constant, example38, example38_with, rectangle_constant, scalar_mu0, Case, ConstantSpectrum, JRange,
};
use spectra_index::problems::{EllipticProblem, Geometry, Problem, ScalarField};
use spectra_index::Error;

fn spec(alphas: &[f64], lambda: f64) -> ConstantSpectrum {
    ConstantSpectrum::new(alphas.to_vec(), lambda).unwrap()
}

fn pair(r: spectra_index::oracles::OracleResult) -> (i64, usize) {
    (r.i, r.nu)
}

#[test]
fn periodic_and_antiperiodic_counts() {
    // α = 5: level 0 only; α = 39.5: level 0 and the pair at 4π² ≈ 39.48.
    assert_eq!(pair(example38(Case::Periodic, &spec(&[5.0, 39.5], 1.0)).unwrap()), (4, 0));
    assert_eq!(pair(example38(Case::Periodic, &spec(&[0.0], 1.0)).unwrap()), (0, 1));
    assert_eq!(pair(example38(Case::Periodic, &spec(&[-3.0], 1.0)).unwrap()), (0, 0));
    assert_eq!(pair(example38(Case::Antiperiodic, &spec(&[PI * PI], 1.0)).unwrap()), (0, 2));
    assert_eq!(pair(example38(Case::Antiperiodic, &spec(&[10.0, 100.0], 1.0)).unwrap()), (6, 0));
    // λ scales every level.
    assert_eq!(pair(example38(Case::Antiperiodic, &spec(&[10.0], 2.0)).unwrap()), (0, 0));
}

#[test]
fn scalar_case() {
    assert!(matches!(scalar_mu0(1.0), Err(Error::DomainError(_))));
    assert!(matches!(scalar_mu0(0.0), Err(Error::DomainError(_))));
    // 2/(1/a + a) lies in (0, 1) for a = 2, so μ₀ = arccos(0.8).
    let mu = scalar_mu0(2.0).unwrap();
    assert!((mu - 0.8f64.acos()).abs() < 1e-15);
    let a = (2.0 * PI - mu).powi(2) + 1.0;
    let r = example38(Case::Scalar(2.0), &spec(&[a], 1.0)).unwrap();
    assert_eq!(pair(r), (2, 0));
    assert_eq!(r.j_range, Some(JRange::FromZero));
    let r = example38_with(Case::Scalar(2.0), &spec(&[a], 1.0), JRange::FromOne).unwrap();
    assert_eq!(pair(r), (0, 0));
}

#[test]
fn dirichlet_and_rectangle_counts() {
    assert_eq!(pair(dirichlet_constant(&spec(&[PI * PI, 50.0], 1.0))), (2, 1));
    assert_eq!(pair(rectangle_constant(2.0 * PI * PI, 1.0, 1.0).unwrap()), (0, 1));
    // The oracle compares levels exactly, so the level is written as it sums them.
    assert_eq!(pair(rectangle_constant(PI * PI + 4.0 * PI * PI, 1.0, 1.0).unwrap()), (1, 2));
    assert_eq!(pair(rectangle_constant(0.0, 1.0, 1.0).unwrap()), (0, 0));
    // Levels π²(j² + k²/4) on [0, 1] × [0, 2] below 3π²: (1,1) and (1,2).
    assert_eq!(pair(rectangle_constant(3.0 * PI * PI, 1.0, 2.0).unwrap()), (2, 0));
    assert!(rectangle_constant(1.0, -1.0, 1.0).is_err());
}

#[test]
fn spectrum_validation() {
    assert!(matches!(ConstantSpectrum::new(vec![], 1.0), Err(Error::InvalidMatrix(_))));
    assert!(matches!(ConstantSpectrum::new(vec![1.0], 0.0), Err(Error::PositivityViolation(_))));
    assert_eq!(spec(&[3.0, -1.0], 1.0).alphas, vec![-1.0, 3.0]);
}

#[test]
fn mode_eigenvalues() {
    let sq = Geometry::Rectangle { l1: 1.0, l2: 2.0 };
    assert!((mode_eigenvalue(&sq, 1, 2) - 2.0 * PI * PI).abs() < 1e-12);
    let iv = Geometry::Interval { length: 0.5 };
    assert!((mode_eigenvalue(&iv, 1, 0) - 4.0 * PI * PI).abs() < 1e-12);
}

/// `∫₀¹ sin(πx) cos(mπx) dx`.
fn sin_cos(m: i64) -> f64 {
    let f = |k: i64| {
        if k == 0 {
            0.0
        } else {
            (1.0 - (-1f64).powi(k as i32)) / (k as f64 * PI)
        }
    };
    0.5 * (f(1 + m) + f(1 - m))
}

#[test]
fn assembled_matrix_for_a_sine_potential() {
    let p = EllipticProblem::new(
        Geometry::Interval { length: 1.0 },
        ScalarField::function(|x, _| (PI * x).sin()),
    )
    .unwrap();
    let g = assemble(&p, 6).unwrap();
    assert_eq!(g.modes.len(), 6);
    assert!(g.quadrature > 0);
    for a in 1..=6i64 {
        for c in 1..=6i64 {
            // 2∫ sin(πx) sin(aπx) sin(cπx) dx
            let b = sin_cos(a - c) - sin_cos(a + c);
            let diag = if a == c { (a as f64 * PI).powi(2) } else { 0.0 };
            let got = g.matrix[(a as usize - 1, c as usize - 1)];
            assert!((got - (diag - b)).abs() < 1e-10, "({a}, {c}): {got} vs {}", diag - b);
        }
    }
    assert!(matches!(assemble(&p, 3), Err(Error::Config(_))));
}

#[test]
fn constant_potential_shifts_the_diagonal() {
    let p = EllipticProblem::new(Geometry::Rectangle { l1: 1.0, l2: 1.0 }, ScalarField::Constant(3.0)).unwrap();
    let g = assemble(&p, 4).unwrap();
    assert_eq!(g.quadrature, 0);
    for (r, &(j, k)) in g.modes.iter().enumerate() {
        let want = PI * PI * (j * j + k * k) as f64 - 3.0;
        assert!((g.matrix[(r, r)] - want).abs() < 1e-12);
    }
}

#[test]
fn elliptic_index_examples() {
    let run = |geom: Geometry, b: f64| {
        let p = EllipticProblem::new(geom, ScalarField::Constant(b)).unwrap();
        let r = elliptic_index(&p).unwrap();
        (r.i, r.nu)
    };
    let unit = Geometry::Rectangle { l1: 1.0, l2: 1.0 };
    assert_eq!(run(unit, 0.0), (0, 0));
    assert_eq!(run(unit, 2.5 * PI * PI), (1, 0));
    assert_eq!(run(unit, 5.0 * PI * PI), (1, 2));
    let iv = Geometry::Interval { length: 1.0 };
    assert_eq!(run(iv, 0.0), (0, 0));
    assert_eq!(run(iv, PI * PI), (0, 1));
    assert_eq!(run(iv, 50.0), (2, 0));
}

#[test]
fn sampled_potential_matches_galerkin_count() {
    // b = 30 + 10x(1 − x) on the unit square, sampled on a 9 × 9 grid.
    let values: Vec<Vec<f64>> =
        (0..9).map(|i| (0..9).map(|_| 30.0 + 10.0 * (i as f64 / 8.0) * (1.0 - i as f64 / 8.0)).collect()).collect();
    let p = EllipticProblem::new(Geometry::Rectangle { l1: 1.0, l2: 1.0 }, ScalarField::Sampled(values)).unwrap();
    let r = elliptic_index(&p).unwrap();
    // 2π² ≈ 19.7 < b ≤ 32.5 < 5π² ≈ 49.3.
    assert_eq!((r.i, r.nu), (1, 0));
    assert_eq!(galerkin_count(&Problem::Elliptic(p), 8).unwrap(), (1, 0));
}
