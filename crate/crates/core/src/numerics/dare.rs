use super::matrix::Matrix;
use crate::error::{Error, Result};

const MAX_ITER: usize = 10_000;
const TOL: f64 = 1e-12;

/// Solve the discrete algebraic Riccati equation
/// `P = A'PA - A'PB (R + B'PB)^{-1} B'PA + Q`
/// for the stabilizing solution via the structured doubling algorithm.
pub fn dare_solve(a: &Matrix, b: &Matrix, q: &Matrix, r: &Matrix) -> Result<Matrix> {
    if !a.is_square() || a.rows() != b.rows() || !q.is_square() || q.rows() != a.rows() {
        return Err(Error::Dimension("dare_solve shape mismatch".into()));
    }
    if !r.is_square() || r.rows() != b.cols() {
        return Err(Error::Dimension("dare_solve R shape mismatch".into()));
    }
    if q.symmetry_defect() > 1e-10 * q.max_abs().max(1.0) {
        return Err(Error::Precondition("Q must be symmetric".into()));
    }
    r.cholesky()
        .map_err(|_| Error::Precondition("R must be positive definite".into()))?;

    let n = a.rows();
    let r_inv = r.inverse()?;
    let mut ak = a.clone();
    let mut gk = b.matmul(&r_inv).matmul(&b.transpose());
    let mut hk = q.clone();

    let mut converged = false;
    let mut iterations = 0;
    for it in 0..MAX_ITER {
        iterations = it + 1;
        // W = I + G_k H_k
        let w = Matrix::identity(n).add(&gk.matmul(&hk));
        let w_inv = w
            .inverse()
            .map_err(|_| Error::SolverDiverged {
                solver: "dare (doubling)",
                iterations,
                residual: f64::INFINITY,
            })?;
        let winv_a = w_inv.matmul(&ak);
        let a_next = ak.matmul(&winv_a);
        let g_next = gk.add(&ak.matmul(&w_inv).matmul(&gk).matmul(&ak.transpose()));
        let h_next = hk.add(&ak.transpose().matmul(&hk).matmul(&winv_a));

        let dh = h_next.sub(&hk).frobenius_norm();
        ak = a_next;
        gk = g_next;
        let scale = h_next.frobenius_norm().max(1.0);
        hk = h_next;
        if dh < TOL * scale {
            converged = true;
            break;
        }
    }
    let p = hk.symmetrize();
    let res = dare_residual(a, b, q, r, &p)?;
    if !converged || res > 1e-10 {
        return Err(Error::SolverDiverged {
            solver: "dare (doubling)",
            iterations,
            residual: res,
        });
    }
    Ok(p)
}

/// Frobenius norm of `P - (A'PA - A'PB (R+B'PB)^{-1} B'PA + Q)`.
pub fn dare_residual(a: &Matrix, b: &Matrix, q: &Matrix, r: &Matrix, p: &Matrix) -> Result<f64> {
    let atpa = a.transpose().matmul(p).matmul(a);
    let btpb = b.transpose().matmul(p).matmul(b);
    let btpa = b.transpose().matmul(p).matmul(a);
    let inner = r.add(&btpb).inverse()?;
    let rhs = atpa.sub(&btpa.transpose().matmul(&inner).matmul(&btpa)).add(q);
    Ok(p.sub(&rhs).frobenius_norm())
}

/// LQR state-feedback gain `K = (R + B'PB)^{-1} B'PA` from the DARE solution.
pub fn lqr_gain(a: &Matrix, b: &Matrix, r: &Matrix, p: &Matrix) -> Result<Matrix> {
    let btpb = b.transpose().matmul(p).matmul(b);
    let btpa = b.transpose().matmul(p).matmul(a);
    r.add(&btpb).solve(&btpa)
}
