use approx::assert_abs_diff_eq;
use proptest::prelude::*;

use spectra_index::numerics::{
    block_chain_inertia, dense_inertia, expm, integrate_linear, rank_deficiency, sym_eig, BlockChain, Inertia,
};
use spectra_index::Matrix;

fn sym_from(n: usize, v: &[f64]) -> Matrix {
    let mut m = Matrix::zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        for j in i..n {
            m[(i, j)] = v[k];
            m[(j, i)] = v[k];
            k += 1;
        }
    }
    m
}

fn max_diff(a: &Matrix, b: &Matrix) -> f64 {
    a.axpy(-1.0, b).max_abs()
}

fn sign_count(eigs: &[f64]) -> Inertia {
    Inertia {
        positive: eigs.iter().filter(|&&e| e > 0.0).count(),
        negative: eigs.iter().filter(|&&e| e < 0.0).count(),
        zero: eigs.iter().filter(|&&e| e == 0.0).count(),
    }
}

/// Dense matrix of a chain: nodes `0..m`, then the border block last.
fn assemble(chain: &BlockChain<f64>) -> Matrix {
    let sizes: Vec<usize> = chain.diag.iter().map(Matrix::rows).collect();
    let mut offs = vec![0];
    for s in &sizes {
        offs.push(offs.last().unwrap() + s);
    }
    let bdim = chain.corner.as_ref().map_or(0, Matrix::rows);
    let n = offs[sizes.len()] + bdim;
    let mut a = Matrix::zeros(n, n);
    for (k, d) in chain.diag.iter().enumerate() {
        a.set_block(offs[k], offs[k], d);
    }
    for (k, s) in chain.sub.iter().enumerate() {
        a.set_block(offs[k + 1], offs[k], s);
        a.set_block(offs[k], offs[k + 1], &s.transpose());
    }
    if let Some(c) = &chain.corner {
        let b0 = offs[sizes.len()];
        a.set_block(b0, b0, c);
        for (k, e) in &chain.border {
            let old = a.block(offs[*k], b0, e.rows(), e.cols());
            let sum = old.axpy(1.0, e);
            a.set_block(offs[*k], b0, &sum);
            a.set_block(b0, offs[*k], &sum.transpose());
        }
    }
    a
}

#[test]
fn eig_of_identity_and_diagonal() {
    let e = sym_eig(&Matrix::identity(3)).unwrap();
    assert_eq!(e.eigenvalues, vec![1.0, 1.0, 1.0]);
    let e = sym_eig(&Matrix::from_diag(&[5.0, -2.0, 0.0])).unwrap();
    for (got, want) in e.eigenvalues.iter().zip([-2.0, 0.0, 5.0]) {
        assert_abs_diff_eq!(*got, want, epsilon = 1e-14);
    }
}

#[test]
fn rank_deficiency_examples() {
    assert_eq!(rank_deficiency(&Matrix::zeros(2, 2), 1e-8).unwrap().0, 2);
    assert_eq!(rank_deficiency(&Matrix::identity(4), 1e-8).unwrap().0, 0);
    let (d, sv) = rank_deficiency(&Matrix::from_diag(&[1.0, 1e-14]), 1e-8).unwrap();
    assert_eq!(d, 1);
    assert!(sv[0] >= sv[1]);
}

#[test]
fn integrate_zero_and_constant() {
    let phi = integrate_linear(|_| Matrix::zeros(2, 2), 2, 32).unwrap();
    assert!(phi.iter().all(|p| max_diff(p, &Matrix::identity(2)) == 0.0));
    let c = Matrix::from_rows(&[vec![0.3, -1.2], vec![0.7, -0.1]]).unwrap();
    let phi = integrate_linear(|_| c.clone(), 2, 256).unwrap();
    assert!(max_diff(phi.last().unwrap(), &expm(&c)) < 1e-8);
}

#[test]
fn expm_of_rotation_generator() {
    let j = Matrix::from_rows(&[vec![0.0, -1.0], vec![1.0, 0.0]]).unwrap();
    let (c, s) = (1f64.cos(), 1f64.sin());
    let want = Matrix::from_rows(&[vec![c, -s], vec![s, c]]).unwrap();
    assert!(max_diff(&expm(&j), &want) < 1e-14);
}

#[test]
fn cyclic_chain_near_singular_pivots() {
    // Periodic second-difference matrix shifted next to its double eigenvalue.
    // Gaps down to about 3e-9 of the diagonal are resolved.
    let m = 40;
    let h = 1.0 / m as f64;
    let mu = (2.0 - 2.0 * (2.0 * std::f64::consts::PI * 3.0 / m as f64).cos()) / (h * h);
    for delta in [-1e-1, 1e-1, -1e-3, 1e-3, -1e-5, 1e-5] {
        let s = mu + delta;
        let d = Matrix::from_diag(&[2.0 / (h * h) - s]);
        let off = Matrix::from_diag(&[-1.0 / (h * h)]);
        let chain = BlockChain {
            diag: vec![d.clone(); m - 1],
            sub: vec![off.clone(); m - 2],
            corner: Some(d.clone()),
            border: vec![(0, off.clone()), (m - 2, off.clone())],
        };
        let eigs = sym_eig(&assemble(&chain)).unwrap().eigenvalues;
        assert_eq!(block_chain_inertia(&chain), sign_count(&eigs), "delta {delta}");
    }
}

fn chain_strategy() -> impl Strategy<Value = (BlockChain<f64>, bool)> {
    (1usize..4, 2usize..9, any::<bool>()).prop_flat_map(|(b, m, cyclic)| {
        let tri = b * (b + 1) / 2;
        (
            prop::collection::vec(prop::collection::vec(-3.0..3.0f64, tri), m),
            prop::collection::vec(prop::collection::vec(-2.0..2.0f64, b * b), m - 1),
            prop::collection::vec(-3.0..3.0f64, tri),
            prop::collection::vec(prop::collection::vec(-2.0..2.0f64, b * b), 2),
        )
            .prop_map(move |(d, s, c, e)| {
                let sq = |v: &Vec<f64>| Matrix::from_row_major(b, b, v.clone()).unwrap();
                let mut chain = BlockChain {
                    diag: d.iter().map(|v| sym_from(b, v)).collect(),
                    sub: s.iter().map(sq).collect(),
                    corner: None,
                    border: vec![],
                };
                if cyclic {
                    chain.diag.pop();
                    chain.sub.pop();
                    let last = chain.diag.len() - 1;
                    chain.corner = Some(sym_from(b, &c));
                    chain.border = vec![(0, sq(&e[0])), (last, sq(&e[1]))];
                }
                (chain, cyclic)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn eig_reconstructs(n in 1usize..9, seed in prop::collection::vec(-5.0..5.0f64, 45)) {
        let s = sym_from(n, &seed);
        let e = sym_eig(&s).unwrap();
        prop_assert!(max_diff(&e.reconstruct(), &s) < 1e-10);
        let q = &e.eigenvectors;
        prop_assert!(max_diff(&q.transpose().matmul(q), &Matrix::identity(n)) < 1e-10);
        prop_assert!(e.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn dense_inertia_matches_eigen_signs(n in 1usize..9, seed in prop::collection::vec(-5.0..5.0f64, 45)) {
        let s = sym_from(n, &seed);
        let eigs = sym_eig(&s).unwrap().eigenvalues;
        prop_assume!(eigs.iter().all(|e| e.abs() > 1e-6));
        prop_assert_eq!(dense_inertia(&s, 0.0), sign_count(&eigs));
    }

    #[test]
    fn chain_inertia_matches_dense((chain, _cyclic) in chain_strategy()) {
        let a = assemble(&chain);
        let eigs = sym_eig(&a).unwrap().eigenvalues;
        prop_assume!(eigs.iter().all(|e| e.abs() > 1e-6));
        prop_assert_eq!(block_chain_inertia(&chain), sign_count(&eigs));
    }

    #[test]
    fn expm_inverse(seed in prop::collection::vec(-1.0..1.0f64, 9)) {
        let a = Matrix::from_row_major(3, 3, seed).unwrap();
        let prod = expm(&a).matmul(&expm(&a.scale(-1.0)));
        prop_assert!(max_diff(&prod, &Matrix::identity(3)) < 1e-12);
    }
}
