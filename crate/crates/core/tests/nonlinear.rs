use std::f64::consts::PI;

use spectra_index::nonlinear::{
    certify, dual_solve, fenchel_conjugate, solve_bvp, CertifyData, DualOptions, NonlinearProblem, Nonlinearity,
    Potential, SolveOptions, Status, Theorem, Verdict,
};
use spectra_index::problems::{MatrixFunction as MF, Problem, SecondOrderBc, SecondOrderProblem};
use spectra_index::{Error, Matrix};

fn template(bc: SecondOrderBc) -> Problem {
    Problem::SecondOrder(SecondOrderProblem::new(MF::scalar(1, 1.0), MF::zero(1), bc).unwrap())
}

fn status(r: &spectra_index::nonlinear::CertificateReport, id: &str) -> Status {
    r.records.iter().find(|h| h.id == id).unwrap_or_else(|| panic!("no record {id}")).status
}

#[test]
fn theorem_ids_parse() {
    assert_eq!("3.10".parse::<Theorem>().unwrap(), Theorem::T3_10);
    assert_eq!(Theorem::T1_9.id(), "1.9");
    assert_eq!(Theorem::all().count(), 16);
    assert!(matches!("2.1".parse::<Theorem>(), Err(Error::Config(_))));
}

#[test]
fn antiperiodic_example_and_mutant() {
    let t = template(SecondOrderBc::antiperiodic(1));
    let (b1, b2) = (PI * PI + 0.1, 9.0 * PI * PI - 0.1);
    let data = CertifyData::new(MF::scalar(1, b1), MF::scalar(1, b2))
        .assert("slope-bounds")
        .assert("sublinear-remainder");
    let r = certify(Theorem::T3_10, &t, &data);
    assert_eq!(r.verdict, Verdict::Certified);
    // Both sit between the antiperiodic pairs at π² and 9π².
    assert_eq!(r.indices["B1"], (2, 0));
    assert_eq!(r.indices["B2"], (2, 0));

    let mutant = CertifyData::new(MF::scalar(1, b1), MF::scalar(1, 9.0 * PI * PI))
        .assert("slope-bounds")
        .assert("sublinear-remainder");
    let r = certify(Theorem::T3_10, &t, &mutant);
    assert_eq!(r.verdict, Verdict::Refuted);
    assert_eq!(status(&r, "nu(B2)=0"), Status::Fail);

    // Without the analytic assertions nothing can be concluded.
    let bare = CertifyData::new(MF::scalar(1, b1), MF::scalar(1, b2));
    assert_eq!(certify(Theorem::T3_10, &t, &bare).verdict, Verdict::Inconclusive);
}

#[test]
fn wrong_setting_is_refuted() {
    let t = template(SecondOrderBc::dirichlet());
    let data = CertifyData::new(MF::scalar(1, 1.0), MF::scalar(1, 2.0));
    let r = certify(Theorem::T3_10, &t, &data);
    assert_eq!(r.verdict, Verdict::Refuted);
    assert_eq!(status(&r, "setting"), Status::Fail);
}

#[test]
fn convex_family_with_equal_bounds() {
    let t = template(SecondOrderBc::dirichlet());
    let data = CertifyData::new(MF::scalar(1, 5.0), MF::scalar(1, 5.0))
        .assert("convex-shift")
        .assert("upper-quadratic-bound");
    let r = certify(Theorem::T1_9, &t, &data);
    assert_eq!(status(&r, "B1<=B2"), Status::Pass);
    assert_eq!(status(&r, "i(B1)+nu(B1)=i(B2)"), Status::Pass);
    assert_eq!(r.verdict, Verdict::Certified);

    // B1 = π² is resonant: i(B1) + ν(B1) = 1 = i(π² + 1).
    let r = certify(
        Theorem::T1_9,
        &t,
        &CertifyData::new(MF::scalar(1, PI * PI), MF::scalar(1, PI * PI + 1.0)).assert("convex-shift"),
    );
    assert_eq!(status(&r, "i(B1)+nu(B1)=i(B2)"), Status::Pass);
    let r = certify(Theorem::T1_9, &t, &CertifyData::new(MF::scalar(1, 0.0), MF::scalar(1, 20.0)));
    assert_eq!(status(&r, "i(B1)+nu(B1)=i(B2)"), Status::Fail);
}

#[test]
fn linear_force_matches_closed_form() {
    // x'' + bx + c sin(πt) = 0 with Dirichlet ends: x = c sin(πt)/(π² − b).
    let (b, c) = (4.0, 2.0);
    let nl = Nonlinearity::linear(MF::scalar(1, b), move |p| vec![c * (PI * p[0]).sin()]);
    let p = NonlinearProblem::new(template(SecondOrderBc::dirichlet()), nl).unwrap();
    let opts = SolveOptions {
        multistarts: 0,
        ..SolveOptions::for_problem(&p)
    };
    let s = solve_bvp(&p, &opts).unwrap();
    assert!(s.residual <= 1e-8);
    let err = s
        .grid
        .iter()
        .zip(&s.values)
        .map(|(q, v)| (v[0] - c * (PI * q[0]).sin() / (PI * PI - b)).abs())
        .fold(0.0, f64::max);
    let est = s.richardson_error.unwrap();
    assert!(err < 1e-4, "{err}");
    assert!(err <= 10.0 * est, "{err} vs estimate {est}");
}

#[test]
fn zero_force_gives_zero_solution() {
    let p = NonlinearProblem::new(
        template(SecondOrderBc::periodic(1)),
        Nonlinearity::new(1, |_, x| vec![-x[0]]).with_jacobian(|_, _| Matrix::scaled_identity(1, -1.0)),
    )
    .unwrap();
    let s = solve_bvp(&p, &SolveOptions::for_problem(&p)).unwrap();
    assert!(s.values.iter().all(|v| v[0].abs() < 1e-12));
}

#[test]
fn dimension_mismatch_is_rejected() {
    let nl = Nonlinearity::new(2, |_, x| x.to_vec());
    assert!(matches!(
        NonlinearProblem::new(template(SecondOrderBc::dirichlet()), nl),
        Err(Error::DimensionMismatch(_))
    ));
}

fn quartic() -> Potential {
    Potential::new(
        |_, y| y[0].powi(4) / 4.0 + y[0] * y[0] / 2.0,
        |_, y| vec![y[0].powi(3) + y[0]],
        |_, y| Matrix::scaled_identity(1, 3.0 * y[0] * y[0] + 1.0),
    )
}

#[test]
fn conjugates() {
    let c = fenchel_conjugate(&quartic(), &[2.0], [0.0, 0.0]).unwrap();
    // y³ + y = 2 at y = 1, so N*(2) = 2 − 3/4.
    assert!((c.y[0] - 1.0).abs() < 1e-12);
    assert!((c.value - 1.25).abs() < 1e-12);
    let half = Potential::new(
        |_, y| 0.5 * (y[0] * y[0] + y[1] * y[1]),
        |_, y| y.to_vec(),
        |_, _| Matrix::identity(2),
    );
    let c = fenchel_conjugate(&half, &[3.0, 4.0], [0.0, 0.0]).unwrap();
    assert!((c.value - 12.5).abs() < 1e-12);
}

#[test]
fn dual_solve_of_quadratic_potential() {
    let b = 20.0;
    let v = Potential::new(
        move |_, x| 0.5 * b * x[0] * x[0],
        move |_, x| vec![b * x[0]],
        move |_, _| Matrix::scaled_identity(1, b),
    );
    let p = NonlinearProblem::new(template(SecondOrderBc::dirichlet()), Nonlinearity::from_potential(1, v)).unwrap();
    let s = dual_solve(&p, &MF::scalar(1, 19.0).into(), &DualOptions::for_problem(&p)).unwrap();
    assert!(s.values.iter().all(|v| v[0].abs() < 1e-9));
    assert!(s.dual.unwrap().fenchel_gap <= 1e-8);
}

#[test]
fn dual_solve_needs_a_potential() {
    let p = NonlinearProblem::new(
        template(SecondOrderBc::dirichlet()),
        Nonlinearity::new(1, |_, x| vec![x[0]]),
    )
    .unwrap();
    assert!(matches!(
        dual_solve(&p, &MF::scalar(1, 0.0).into(), &DualOptions::for_problem(&p)),
        Err(Error::DomainError(_))
    ));
}
