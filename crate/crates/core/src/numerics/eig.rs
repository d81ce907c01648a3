use super::matrix::Matrix;
use num_complex::Complex64;

/// Largest eigenvalue magnitude of a square matrix.
pub fn spectral_radius(a: &Matrix) -> f64 {
    eigenvalues(a)
        .iter()
        .fold(0.0_f64, |m, l| m.max(l.norm()))
}

/// All eigenvalues, via Hessenberg reduction followed by a complex
/// Wilkinson-shifted QR iteration. Intended for small (<= ~16x16) matrices.
pub fn eigenvalues(a: &Matrix) -> Vec<Complex64> {
    assert!(a.is_square(), "eigenvalues of non-square matrix");
    let n = a.rows();
    if n == 0 {
        return vec![];
    }
    if n == 1 {
        return vec![Complex64::new(a[(0, 0)], 0.0)];
    }
    let balanced = balance(a);
    let hess = hessenberg(&balanced);
    let mut h: Vec<Complex64> = hess.data().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    qr_iterate(&mut h, n);
    (0..n).map(|i| h[i * n + i]).collect()
}

/// Parlett-Reinsch balancing: diagonal similarity scaling by powers of two.
fn balance(a: &Matrix) -> Matrix {
    let n = a.rows();
    let mut m = a.clone();
    let radix = 2.0_f64;
    for _ in 0..50 {
        let mut done = true;
        for i in 0..n {
            let mut c: f64 = 0.0;
            let mut r: f64 = 0.0;
            for j in 0..n {
                if j != i {
                    c += m[(j, i)].abs();
                    r += m[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let mut f = 1.0;
            let s = c + r;
            let mut c2 = c;
            let mut r2 = r;
            while c2 < r2 / radix {
                c2 *= radix;
                r2 /= radix;
                f *= radix;
            }
            while c2 >= r2 * radix {
                c2 /= radix;
                r2 *= radix;
                f /= radix;
            }
            if (c2 + r2) < 0.95 * s {
                done = false;
                for j in 0..n {
                    m[(i, j)] /= f;
                }
                for j in 0..n {
                    m[(j, i)] *= f;
                }
            }
        }
        if done {
            break;
        }
    }
    m
}

/// Householder reduction to upper Hessenberg form.
fn hessenberg(a: &Matrix) -> Matrix {
    let n = a.rows();
    let mut h = a.clone();
    for k in 0..n.saturating_sub(2) {
        // Householder vector for column k below the subdiagonal.
        let mut alpha = 0.0;
        for i in k + 1..n {
            alpha += h[(i, k)] * h[(i, k)];
        }
        alpha = alpha.sqrt();
        if alpha == 0.0 {
            continue;
        }
        if h[(k + 1, k)] > 0.0 {
            alpha = -alpha;
        }
        let mut v = vec![0.0; n];
        v[k + 1] = h[(k + 1, k)] - alpha;
        for i in k + 2..n {
            v[i] = h[(i, k)];
        }
        let vtv: f64 = v.iter().map(|x| x * x).sum();
        if vtv == 0.0 {
            continue;
        }
        let beta = 2.0 / vtv;
        // H := (I - beta v v') H
        for j in 0..n {
            let mut dot = 0.0;
            for i in k + 1..n {
                dot += v[i] * h[(i, j)];
            }
            let s = beta * dot;
            for i in k + 1..n {
                h[(i, j)] -= s * v[i];
            }
        }
        // H := H (I - beta v v')
        for i in 0..n {
            let mut dot = 0.0;
            for j in k + 1..n {
                dot += h[(i, j)] * v[j];
            }
            let s = beta * dot;
            for j in k + 1..n {
                h[(i, j)] -= s * v[j];
            }
        }
        // Clean the annihilated entries.
        h[(k + 1, k)] = alpha;
        for i in k + 2..n {
            h[(i, k)] = 0.0;
        }
    }
    h
}

/// Shifted QR iteration on a complex upper-Hessenberg matrix stored row-major.
fn qr_iterate(h: &mut [Complex64], n: usize) {
    let eps = f64::EPSILON;
    let idx = |i: usize, j: usize| i * n + j;
    let mut hi = n - 1;
    let mut iters_on_block = 0usize;
    let mut total = 0usize;
    let max_total = 200 * n * n;

    loop {
        // Deflate negligible subdiagonals.
        for i in 1..=hi {
            let small = eps * (h[idx(i - 1, i - 1)].norm() + h[idx(i, i)].norm() + 1e-300);
            if h[idx(i, i - 1)].norm() <= small {
                h[idx(i, i - 1)] = Complex64::new(0.0, 0.0);
            }
        }
        // Shrink the active block from the bottom.
        while hi > 0 && h[idx(hi, hi - 1)].norm() == 0.0 {
            hi -= 1;
            iters_on_block = 0;
        }
        if hi == 0 {
            return;
        }
        // Find the top of the unreduced block ending at hi.
        let mut lo = hi;
        while lo > 0 && h[idx(lo, lo - 1)].norm() != 0.0 {
            lo -= 1;
        }

        total += 1;
        iters_on_block += 1;
        if total > max_total {
            // Leave whatever converged; remaining diagonal entries are still
            // the best available estimates.
            return;
        }

        // Wilkinson shift from the trailing 2x2 block, with an exceptional
        // shift if the block stagnates.
        let mu = if iters_on_block % 30 == 0 {
            h[idx(hi, hi)] + Complex64::new(h[idx(hi, hi - 1)].norm(), 0.0)
        } else {
            let a = h[idx(hi - 1, hi - 1)];
            let b = h[idx(hi - 1, hi)];
            let c = h[idx(hi, hi - 1)];
            let d = h[idx(hi, hi)];
            let tr2 = (a + d) * 0.5;
            let disc = ((a - d) * 0.5 * ((a - d) * 0.5) + b * c).sqrt();
            let l1 = tr2 + disc;
            let l2 = tr2 - disc;
            if (l1 - d).norm() <= (l2 - d).norm() {
                l1
            } else {
                l2
            }
        };

        // Explicit shifted QR step on the active block.
        for i in lo..=hi {
            h[idx(i, i)] -= mu;
        }
        let mut rots: Vec<(Complex64, Complex64)> = Vec::with_capacity(hi - lo);
        for k in lo..hi {
            let a = h[idx(k, k)];
            let b = h[idx(k + 1, k)];
            let r = (a.norm_sqr() + b.norm_sqr()).sqrt();
            let (c, s) = if r == 0.0 {
                (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0))
            } else {
                (a.conj() / r, b.conj() / r)
            };
            rots.push((c, s));
            // Rows k, k+1 of columns k..=hi.
            for j in k..=hi {
                let x = h[idx(k, j)];
                let y = h[idx(k + 1, j)];
                h[idx(k, j)] = c * x + s * y;
                h[idx(k + 1, j)] = -s.conj() * x + c.conj() * y;
            }
        }
        for (k, (c, s)) in (lo..hi).zip(rots.into_iter()) {
            // Columns k, k+1 of rows lo..=min(k+1, hi) (+1 fill row).
            let top = lo;
            let bottom = (k + 1).min(hi);
            for i in top..=bottom {
                let x = h[idx(i, k)];
                let y = h[idx(i, k + 1)];
                h[idx(i, k)] = x * c.conj() + y * s.conj();
                h[idx(i, k + 1)] = -x * s + y * c;
            }
        }
        for i in lo..=hi {
            h[idx(i, i)] += mu;
        }
    }
}
