use crate::linalg::{svd_jacobi, DenseMatrix, DenseVector};

/// Unconstrained least squares on the columns in `passive`, via the SVD
/// pseudo-inverse.
fn least_squares(c: &DenseMatrix, d: &DenseVector, passive: &[usize]) -> Vec<f64> {
    let sub = c.select_cols(passive);
    let svd = svd_jacobi(&sub);
    let tol = svd.s.first().copied().unwrap_or(0.0) * 1e-12 * (c.rows().max(passive.len()) as f64);
    let mut x = vec![0.0; passive.len()];
    for (k, &s) in svd.s.iter().enumerate() {
        if s <= tol {
            continue;
        }
        let coef = svd.u.column(k).dot(d) / s;
        for (i, xi) in x.iter_mut().enumerate() {
            *xi += coef * svd.v.get(i, k);
        }
    }
    x
}

/// Lawson–Hanson non-negative least squares: `min ‖C y − d‖` over `y ≥ 0`.
pub fn nnls(c: &DenseMatrix, d: &DenseVector) -> DenseVector {
    let (m, n) = c.shape();
    assert_eq!(m, d.len(), "nnls rhs length");
    let mut y = vec![0.0; n];
    let mut passive = vec![false; n];
    let scale = c.max_abs().max(1.0) * d.inf_norm().max(1.0);
    let tol = 1e-12 * scale * (m.max(n) as f64);
    let max_outer = 3 * n + 10;
    for _ in 0..max_outer {
        let yv = DenseVector::from_raw(y.clone());
        let resid = d.sub(&c.mul_vec(&yv));
        let w = c.tr_mul_vec(&resid);
        let mut best = None;
        for j in 0..n {
            if !passive[j] && w[j] > tol && best.is_none_or(|b: usize| w[j] > w[b]) {
                best = Some(j);
            }
        }
        let Some(j) = best else { break };
        passive[j] = true;
        loop {
            let idx: Vec<usize> = (0..n).filter(|&k| passive[k]).collect();
            let z = least_squares(c, d, &idx);
            if z.iter().all(|&v| v > 0.0) {
                for (k, &i) in idx.iter().enumerate() {
                    y[i] = z[k];
                }
                break;
            }
            let mut alpha = f64::INFINITY;
            for (k, &i) in idx.iter().enumerate() {
                if z[k] <= 0.0 {
                    let a = y[i] / (y[i] - z[k]);
                    if a < alpha {
                        alpha = a;
                    }
                }
            }
            for (k, &i) in idx.iter().enumerate() {
                y[i] += alpha * (z[k] - y[i]);
                if y[i] <= tol * 1e-3 {
                    y[i] = 0.0;
                    passive[i] = false;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
    }
    DenseVector::from_raw(y)
}
