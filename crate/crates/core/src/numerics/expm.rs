use super::{DenseMatrix, Lu, Real};

// Degree-13 Padé numerator coefficients.
const PADE13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

// ‖A‖₁ bound below which the [13/13] approximant is accurate to unit roundoff.
const THETA13: f64 = 5.371_920_351_148_152;

// Degree and θ_m for the low-order approximants.
const LOW: [(f64, &[f64]); 4] = [
    (1.495_585_217_958_292e-2, &[120.0, 60.0, 12.0, 1.0]),
    (2.539_398_330_063_23e-1, &[30_240.0, 15_120.0, 3_360.0, 420.0, 30.0, 1.0]),
    (
        9.504_178_996_162_932e-1,
        &[17_297_280.0, 8_648_640.0, 1_995_840.0, 277_200.0, 25_200.0, 1_512.0, 56.0, 1.0],
    ),
    (
        2.097_847_961_257_068,
        &[
            17_643_225_600.0,
            8_821_612_800.0,
            2_075_673_600.0,
            302_702_400.0,
            30_270_240.0,
            2_162_160.0,
            110_880.0,
            3_960.0,
            90.0,
            1.0,
        ],
    ),
];

fn low_degree<T: Real>(a: &DenseMatrix<T>, b: &[f64]) -> DenseMatrix<T> {
    let n = a.rows();
    let id = DenseMatrix::identity(n);
    let a2 = a.matmul(a);
    // Even powers A^0, A^2, A^4, ...
    let mut pow = id.clone();
    let mut u = DenseMatrix::zeros(n, n);
    let mut v = DenseMatrix::zeros(n, n);
    for k in (0..b.len()).step_by(2) {
        v = v.axpy(T::lit(b[k]), &pow);
        if k + 1 < b.len() {
            u = u.axpy(T::lit(b[k + 1]), &pow);
        }
        pow = pow.matmul(&a2);
    }
    let u = a.matmul(&u);
    match Lu::new(&(&v - &u)) {
        Ok(lu) => lu.solve(&(&v + &u)),
        Err(_) => DenseMatrix::zeros(n, n).scale(T::nan()),
    }
}

/// Matrix exponential by scaling and squaring with a [13/13] Padé
/// approximant. Small arguments use the lowest degree among 3, 5, 7, 9 that
/// is accurate to unit roundoff.
///
/// # Panics
/// If `s` is not square.
pub fn expm<T: Real>(s: &DenseMatrix<T>) -> DenseMatrix<T> {
    assert!(s.is_square(), "expm needs a square matrix");
    let n = s.rows();
    if n == 0 {
        return s.clone();
    }
    let norm = s.norm1().to_f64_lossy();
    if norm == 0.0 {
        return DenseMatrix::identity(n);
    }
    if let Some(k) = LOW.iter().position(|(theta, _)| norm <= *theta) {
        return low_degree(s, LOW[k].1);
    }
    let squarings = if norm > THETA13 {
        (norm / THETA13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let a = s.scale(T::lit(2f64.powi(-squarings)));
    let b: Vec<T> = PADE13.iter().map(|&c| T::lit(c)).collect();
    let id = DenseMatrix::identity(n);
    let a2 = a.matmul(&a);
    let a4 = a2.matmul(&a2);
    let a6 = a4.matmul(&a2);

    let u_inner = a6
        .scale(b[13])
        .axpy(b[11], &a4)
        .axpy(b[9], &a2);
    let u_tail = a6
        .scale(b[7])
        .axpy(b[5], &a4)
        .axpy(b[3], &a2)
        .axpy(b[1], &id);
    let u = a.matmul(&(&a6.matmul(&u_inner) + &u_tail));

    let v_inner = a6
        .scale(b[12])
        .axpy(b[10], &a4)
        .axpy(b[8], &a2);
    let v = &a6.matmul(&v_inner)
        + &a6
            .scale(b[6])
            .axpy(b[4], &a4)
            .axpy(b[2], &a2)
            .axpy(b[0], &id);

    let p = &v + &u;
    let q = &v - &u;
    let mut r = match Lu::new(&q) {
        Ok(lu) => lu.solve(&p),
        // q is nonsingular for ‖a‖₁ ≤ θ₁₃; this only triggers on non-finite input.
        Err(_) => return DenseMatrix::zeros(n, n).scale(T::nan()),
    };
    for _ in 0..squarings {
        r = r.matmul(&r);
    }
    r
}
