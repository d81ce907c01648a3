use super::matrix::Matrix;

/// Matrix exponential by scaling-and-squaring with a Taylor series summed to
/// machine precision.
pub fn expm(a: &Matrix) -> Matrix {
    assert!(a.is_square(), "expm of non-square matrix");
    let n = a.rows();
    // Scale so the series converges fast.
    let norm = a.max_abs() * n as f64;
    let s = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a.scale(0.5_f64.powi(s));

    let mut result = Matrix::identity(n);
    let mut term = Matrix::identity(n);
    for k in 1..=60 {
        term = term.matmul(&scaled).scale(1.0 / k as f64);
        result = result.add(&term);
        if term.max_abs() < 1e-18 * result.max_abs().max(1.0) {
            break;
        }
    }
    for _ in 0..s {
        result = result.matmul(&result);
    }
    result
}

/// Zero-order-hold discretization of a continuous pair (A, B):
/// returns (e^{A dt}, int_0^dt e^{A tau} dtau * B), computed from the
/// exponential of the augmented matrix [[A, B], [0, 0]].
pub fn c2d(a_cont: &Matrix, b_cont: &Matrix, dt: f64) -> (Matrix, Matrix) {
    assert!(a_cont.is_square());
    assert_eq!(a_cont.rows(), b_cont.rows());
    assert!(dt > 0.0, "dt must be positive");
    let n = a_cont.rows();
    let m = b_cont.cols();
    let mut aug = Matrix::zeros(n + m, n + m);
    aug.set_block(0, 0, &a_cont.scale(dt));
    aug.set_block(0, n, &b_cont.scale(dt));
    let e = expm(&aug);
    (e.block(0, 0, n, n), e.block(0, n, n, m))
}
