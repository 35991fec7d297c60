use std::f64::consts::PI;

use spectra_index::index::{
    dominating_shift, ekeland_index, galerkin_count, index, index_first_order, index_sweep, lambda_lower_bound,
    relative_index, relative_index_monotone,
};
use spectra_index::problems::{
    path, shift, validate, FirstOrderBc, FirstOrderProblem, MatrixFunction as MF, Problem, SecondOrderBc,
    SecondOrderProblem,
};
use spectra_index::spectral::{
    matching_matrix, monodromy, nullity, to_first_order, BoundaryData, Hamiltonian, Resolution,
};
use spectra_index::{Error, Matrix};

fn second(b: MF, bc: SecondOrderBc) -> SecondOrderProblem {
    let n = b.dim();
    SecondOrderProblem::new(MF::scalar(n, 1.0), b, bc).unwrap()
}

fn dirichlet(b: f64) -> SecondOrderProblem {
    second(MF::scalar(1, b), SecondOrderBc::dirichlet())
}

fn max_diff(a: &Matrix, b: &Matrix) -> f64 {
    a.axpy(-1.0, b).max_abs()
}

fn rows(r: &[&[f64]]) -> Matrix {
    Matrix::from_rows(&r.iter().map(|x| x.to_vec()).collect::<Vec<_>>()).unwrap()
}

#[test]
fn validation_accepts_and_rejects() {
    assert!(validate(Problem::SecondOrder(dirichlet(0.0))).is_ok());
    let shear = rows(&[&[1.0, 1.0], &[0.0, 1.0]]);
    assert!(FirstOrderProblem::new(MF::zero(2), FirstOrderBc::Symplectic { p: shear }).is_ok());
    let stretch = rows(&[&[2.0, 0.0], &[0.0, 1.0]]);
    assert!(matches!(
        FirstOrderProblem::new(MF::zero(2), FirstOrderBc::Symplectic { p: stretch }),
        Err(Error::NotSymplectic(_))
    ));
    assert!(matches!(
        SecondOrderProblem::new(MF::scalar(1, -1.0), MF::zero(1), SecondOrderBc::dirichlet()),
        Err(Error::PositivityViolation(_))
    ));
    assert!(matches!(
        SecondOrderProblem::new(
            MF::scalar(1, 1.0),
            MF::zero(1),
            SecondOrderBc::SturmLiouville { alpha: PI, beta: 1.0 }
        ),
        Err(Error::AngleOutOfRange(_))
    ));
    // Λ(0) = 1, Λ(1) = 2 breaks MᵀΛ(1)N = Λ(0) for periodic ends.
    let lam = MF::from_fn(9, |t| Matrix::scaled_identity(1, 1.0 + t)).unwrap();
    assert!(matches!(
        SecondOrderProblem::new(lam, MF::zero(1), SecondOrderBc::periodic(1)),
        Err(Error::CompatibilityViolation(_))
    ));
}

#[test]
fn pencil_paths() {
    let b = MF::scalar(2, 3.0);
    let p = path(&b, &b).unwrap();
    assert!(!p.monotone);
    assert_eq!(p.epsilon, 0.0);
    let p = path(&MF::zero(2), &MF::scalar(2, 1.0)).unwrap();
    assert!(p.monotone);
    assert!((p.epsilon - 1.0).abs() < 1e-14);
    let mixed = MF::constant(Matrix::from_diag(&[1.0, -1.0])).unwrap();
    assert!(!path(&MF::zero(2), &mixed).unwrap().monotone);
    assert!(matches!(path(&MF::zero(1), &MF::zero(2)), Err(Error::ShapeMismatch(_))));
    let s = shift(&mixed, 2.5).eval(0.3);
    assert!(max_diff(&s, &Matrix::from_diag(&[3.5, 1.5])) == 0.0);
}

#[test]
fn first_order_form_of_second_order_problem() {
    // z = (Λx', x): p' = −Bx, x' = Λ⁻¹p.
    let f = to_first_order(&dirichlet(0.0));
    assert!(max_diff(&f.hamiltonian.coefficient(0.5), &rows(&[&[0.0, 0.0], &[1.0, 0.0]])) == 0.0);
    let f = to_first_order(&dirichlet(4.0));
    assert!(max_diff(&f.hamiltonian.coefficient(0.5), &rows(&[&[0.0, -4.0], &[1.0, 0.0]])) == 0.0);
    assert!(matches!(f.boundary, BoundaryData::Angles { .. }));
    let f = to_first_order(&second(MF::zero(2), SecondOrderBc::periodic(2)));
    match f.boundary {
        BoundaryData::Periodic { p } => assert!(max_diff(&p, &Matrix::identity(4)) < 1e-15),
        other => panic!("{other:?}"),
    }
}

#[test]
fn monodromy_closed_forms() {
    let res = Resolution::default();
    let m = monodromy(&Hamiltonian::FirstOrder { b: MF::zero(2) }, &res).unwrap();
    assert!(max_diff(m.end(), &Matrix::identity(2)) < 1e-14);

    // ẋ = Jx is a rotation by one radian.
    let m = monodromy(&Hamiltonian::FirstOrder { b: MF::scalar(2, 1.0) }, &res).unwrap();
    let (c, s) = (1f64.cos(), 1f64.sin());
    assert!(max_diff(m.end(), &rows(&[&[c, -s], &[s, c]])) < 1e-12);
    assert!(m.defect < 1e-12);

    // p' = −bx, x' = p.
    let b = 7.0f64;
    let w = b.sqrt();
    let h = Hamiltonian::SecondOrder {
        lambda: MF::scalar(1, 1.0),
        b: MF::scalar(1, b),
    };
    let m = monodromy(&h, &res).unwrap();
    let want = rows(&[&[w.cos(), -w * w.sin()], &[w.sin() / w, w.cos()]]);
    assert!(max_diff(m.end(), &want) < 1e-11);

    // Piecewise coefficient: the product of the two pieces.
    let pw = MF::piecewise(vec![0.5], vec![Matrix::scaled_identity(1, 4.0), Matrix::scaled_identity(1, 16.0)])
        .unwrap();
    let m = monodromy(
        &Hamiltonian::SecondOrder {
            lambda: MF::scalar(1, 1.0),
            b: pw,
        },
        &res,
    )
    .unwrap();
    let piece = |w: f64| rows(&[&[(w / 2.0).cos(), -w * (w / 2.0).sin()], &[(w / 2.0).sin() / w, (w / 2.0).cos()]]);
    assert!(max_diff(m.end(), &piece(4.0).matmul(&piece(2.0))) < 1e-11);
}

#[test]
fn nullity_examples() {
    let nu = |p: SecondOrderProblem| nullity(&Problem::SecondOrder(p)).unwrap().nu;
    assert_eq!(nu(dirichlet(0.0)), 0);
    assert_eq!(nu(dirichlet(PI * PI)), 1);
    assert_eq!(nu(dirichlet(9.0 * PI * PI)), 1);
    assert_eq!(nu(second(MF::zero(3), SecondOrderBc::periodic(3))), 3);
    assert_eq!(nu(second(MF::scalar(1, PI * PI), SecondOrderBc::antiperiodic(1))), 2);
    assert_eq!(nu(second(MF::scalar(1, 4.0 * PI * PI), SecondOrderBc::periodic(1))), 2);
    let fo = FirstOrderProblem::new(MF::zero(4), FirstOrderBc::Symplectic { p: Matrix::identity(4) }).unwrap();
    assert_eq!(nullity(&Problem::FirstOrder(fo)).unwrap().nu, 4);

    // x'' = 0, x(0) = 0, x'(1) = 0 has only the zero solution.
    let mixed = second(MF::zero(1), SecondOrderBc::SturmLiouville { alpha: 0.0, beta: PI / 2.0 });
    assert_eq!(nu(mixed), 0);

    // The kernel of the Dirichlet problem at π² is sin(πt), sampled in (p, x).
    let k = nullity(&Problem::SecondOrder(dirichlet(PI * PI))).unwrap();
    assert_eq!(k.kernel.len(), 1);
}

#[test]
fn matching_matrix_rank_drop() {
    let g = Matrix::identity(2);
    let m = matching_matrix(&g, &BoundaryData::Periodic { p: Matrix::identity(2) }).unwrap();
    assert!(m.matrix.max_abs() == 0.0);
    let r = Matrix::from_rows(&[vec![0.0, -1.0], vec![1.0, 0.0]]).unwrap();
    let m = matching_matrix(&r, &BoundaryData::Periodic { p: Matrix::identity(2) }).unwrap();
    assert!(m.normalized_singular_values().iter().all(|s| *s > 0.1));
}

#[test]
fn lower_bounds() {
    assert!(lambda_lower_bound(&dirichlet(10.0)).unwrap() <= -11.0);
    let robin = second(MF::zero(1), SecondOrderBc::SturmLiouville { alpha: PI / 4.0, beta: 3.0 * PI / 4.0 });
    let l = lambda_lower_bound(&robin).unwrap();
    assert!(l < 0.0);
    let shifted = robin.with_b(MF::scalar(1, l));
    assert_eq!(galerkin_count(&Problem::SecondOrder(shifted), 200).unwrap(), (0, 0));
}

#[test]
fn sweep_examples() {
    let ix = |p: SecondOrderProblem| {
        let r = index_sweep(&p).unwrap();
        (r.i, r.nu)
    };
    assert_eq!(ix(dirichlet(0.0)), (0, 0));
    assert_eq!(ix(dirichlet(PI * PI)), (0, 1));
    assert_eq!(ix(dirichlet(20.0)), (1, 0));
    assert_eq!(ix(dirichlet(50.0)), (2, 0));
    // Periodic, B = diag(5, 39.5): 1 + (1 + 2) from the levels 0 and 4π².
    let b = MF::constant(Matrix::from_diag(&[5.0, 39.5])).unwrap();
    assert_eq!(ix(second(b, SecondOrderBc::periodic(2))), (4, 0));
    assert_eq!(ix(second(MF::zero(2), SecondOrderBc::periodic(2))), (0, 2));
    // Antiperiodic levels (2j − 1)²π².
    assert_eq!(ix(second(MF::scalar(1, 20.0), SecondOrderBc::antiperiodic(1))), (2, 0));
}

#[test]
fn sweep_is_rotation_invariant() {
    let (c, s) = (0.6, 0.8);
    let q = rows(&[&[c, -s], &[s, c]]);
    let d = Matrix::from_diag(&[12.0, 45.0]);
    let b = q.matmul(&d).matmul(&q.transpose()).symmetrized();
    let r = index_sweep(&second(MF::constant(b).unwrap(), SecondOrderBc::dirichlet())).unwrap();
    // 12 passes π²; 45 passes π² and 4π².
    assert_eq!((r.i, r.nu), (3, 0));
    assert!(r.validation.agrees);
}

#[test]
fn relative_index_is_additive() {
    let t = dirichlet(0.0);
    let (a, b, c) = (MF::scalar(1, -5.0), MF::scalar(1, 20.0), MF::scalar(1, 60.0));
    let ab = relative_index(&t, &a, &b).unwrap();
    let bc = relative_index(&t, &b, &c).unwrap();
    let ac = relative_index(&t, &a, &c).unwrap();
    assert_eq!(ab + bc, ac);
    assert_eq!(ac, 2);
    assert_eq!(relative_index(&t, &c, &a).unwrap(), -2);
    let k = dominating_shift(&a, &c);
    assert!(k >= 60.0);
    let r = relative_index_monotone(&t, &path(&a, &c).unwrap()).unwrap();
    assert_eq!(r, 2);
}

#[test]
fn first_order_examples() {
    let bolza = |b: MF| FirstOrderProblem::new(b, FirstOrderBc::Bolza { alpha: 0.0, beta: PI }).unwrap();
    let base = MF::block_diag(&MF::zero(1), &MF::scalar(1, 1.0));
    let r = index_first_order(&bolza(base)).unwrap();
    assert_eq!((r.i, r.nu), (0, 0));
    // diag{2π², 1} is x'' + 2π²x = 0 with Dirichlet ends.
    let b = MF::block_diag(&MF::scalar(1, 2.0 * PI * PI), &MF::scalar(1, 1.0));
    let r = index_first_order(&bolza(b)).unwrap();
    assert_eq!((r.i, r.nu), (1, 0));
    assert_eq!(r.validation.method, "sturm_liouville");

    let sym = FirstOrderProblem::new(MF::zero(2), FirstOrderBc::Symplectic { p: Matrix::identity(2) }).unwrap();
    let r = index(&Problem::FirstOrder(sym)).unwrap();
    assert_eq!((r.i, r.nu), (0, 2));
}

#[test]
fn ekeland_example() {
    let t = dirichlet(0.0);
    assert_eq!(ekeland_index(&t, &MF::scalar(1, 2.0 * PI * PI), &MF::zero(1)).unwrap(), (1, 0));
    assert_eq!(ekeland_index(&t, &MF::scalar(1, 4.0 * PI * PI), &MF::zero(1)).unwrap(), (1, 1));
}

#[test]
fn galerkin_counts() {
    assert_eq!(galerkin_count(&Problem::SecondOrder(dirichlet(0.0)), 100).unwrap(), (0, 0));
    assert_eq!(galerkin_count(&Problem::SecondOrder(dirichlet(50.0)), 100).unwrap(), (2, 0));
    let b = MF::constant(Matrix::from_diag(&[5.0, 39.5])).unwrap();
    let p = Problem::SecondOrder(second(b, SecondOrderBc::periodic(2)));
    assert_eq!(galerkin_count(&p, 100).unwrap(), (4, 0));
    let fo = FirstOrderProblem::new(MF::zero(2), FirstOrderBc::Bolza { alpha: 0.0, beta: PI }).unwrap();
    assert!(matches!(galerkin_count(&Problem::FirstOrder(fo), 100), Err(Error::DomainError(_))));
}
