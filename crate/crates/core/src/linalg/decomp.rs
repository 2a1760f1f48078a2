//! Dense factorizations: LU with partial pivoting, Householder QR with column
//! pivoting and one-sided Jacobi SVD.

use super::vector::dot;
use super::{DenseMatrix, DenseVector};

/// LU factorization `P A = L U` of a square matrix.
#[derive(Clone, Debug)]
pub struct Lu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
    sign: f64,
    singular: bool,
}

impl Lu {
    pub fn new(a: &DenseMatrix) -> Self {
        assert!(a.is_square(), "LU needs a square matrix");
        let n = a.rows();
        let mut lu = a.as_slice().to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        let scale = a.max_abs();
        let threshold = (n as f64) * f64::EPSILON * scale;
        let mut singular = n > 0 && scale == 0.0;
        for k in 0..n {
            let mut p = k;
            let mut best = lu[k * n + k].abs();
            for i in k + 1..n {
                let v = lu[i * n + k].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= threshold {
                singular = true;
                if best == 0.0 {
                    continue;
                }
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let pivot = lu[k * n + k];
            for i in k + 1..n {
                let f = lu[i * n + k] / pivot;
                lu[i * n + k] = f;
                if f != 0.0 {
                    for j in k + 1..n {
                        lu[i * n + j] -= f * lu[k * n + j];
                    }
                }
            }
        }
        Self { n, lu, perm, sign, singular }
    }

    pub fn is_singular(&self) -> bool {
        self.singular
    }

    pub fn determinant(&self) -> f64 {
        let mut det = self.sign;
        for k in 0..self.n {
            det *= self.lu[k * self.n + k];
        }
        det
    }

    /// `log|det A|`, finite even when the determinant itself would underflow.
    pub fn log_abs_determinant(&self) -> f64 {
        (0..self.n).map(|k| self.lu[k * self.n + k].abs().ln()).sum()
    }

    pub fn solve(&self, b: &DenseVector) -> Option<DenseVector> {
        if self.singular {
            return None;
        }
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let s = dot(&self.lu[i * n..i * n + i], &x[..i]);
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let s = dot(&self.lu[i * n + i + 1..(i + 1) * n], &x[i + 1..]);
            x[i] = (x[i] - s) / self.lu[i * n + i];
        }
        Some(DenseVector::from_raw(x))
    }

    /// Solves `A X = B` column by column.
    pub fn solve_matrix(&self, b: &DenseMatrix) -> Option<DenseMatrix> {
        let mut out = DenseMatrix::zeros(self.n, b.cols());
        for j in 0..b.cols() {
            let col = self.solve(&b.column(j))?;
            for i in 0..self.n {
                out.set(i, j, col[i]);
            }
        }
        Some(out)
    }
}

/// Householder QR with column pivoting, `A P = Q R`, with `Q` kept explicitly
/// (full `m × m`).
#[derive(Clone, Debug)]
pub struct PivotedQr {
    q: DenseMatrix,
    r: DenseMatrix,
    perm: Vec<usize>,
}

impl PivotedQr {
    pub fn new(a: &DenseMatrix) -> Self {
        let (m, n) = a.shape();
        // column-major working copy
        let mut cols: Vec<Vec<f64>> = (0..n).map(|j| a.column(j).into_vec()).collect();
        let mut perm: Vec<usize> = (0..n).collect();
        let steps = m.min(n);
        let mut reflectors: Vec<(Vec<f64>, f64)> = Vec::with_capacity(steps);
        for k in 0..steps {
            let mut p = k;
            let mut best = -1.0;
            for (j, c) in cols.iter().enumerate().skip(k) {
                let nrm = dot(&c[k..], &c[k..]);
                if nrm > best {
                    best = nrm;
                    p = j;
                }
            }
            cols.swap(k, p);
            perm.swap(k, p);
            let x = &cols[k][k..];
            let norm = dot(x, x).sqrt();
            if norm == 0.0 {
                reflectors.push((vec![0.0; m - k], 0.0));
                continue;
            }
            let alpha = if x[0] >= 0.0 { -norm } else { norm };
            let mut v = x.to_vec();
            v[0] -= alpha;
            let vtv = dot(&v, &v);
            let beta = if vtv > 0.0 { 2.0 / vtv } else { 0.0 };
            for c in cols.iter_mut().skip(k) {
                let s = beta * dot(&v, &c[k..]);
                for (ci, vi) in c[k..].iter_mut().zip(&v) {
                    *ci -= s * vi;
                }
            }
            reflectors.push((v, beta));
        }
        let r = DenseMatrix::from_fn(steps, n, |i, j| if i <= j { cols[j][i] } else { 0.0 });
        // Q = H_0 H_1 ... H_{s-1}; accumulate by applying reflectors to I in reverse.
        let mut qcols: Vec<Vec<f64>> = (0..m).map(|j| DenseVector::unit(m, j).into_vec()).collect();
        for (k, (v, beta)) in reflectors.iter().enumerate().rev() {
            if *beta == 0.0 {
                continue;
            }
            for c in qcols.iter_mut() {
                let s = beta * dot(v, &c[k..]);
                for (ci, vi) in c[k..].iter_mut().zip(v) {
                    *ci -= s * vi;
                }
            }
        }
        let q = DenseMatrix::from_fn(m, m, |i, j| qcols[j][i]);
        Self { q, r, perm }
    }

    pub fn q(&self) -> &DenseMatrix {
        &self.q
    }

    /// Upper-trapezoidal `min(m,n) × n` factor.
    pub fn r(&self) -> &DenseMatrix {
        &self.r
    }

    /// `perm[i]` is the original column placed at position `i`.
    pub fn perm(&self) -> &[usize] {
        &self.perm
    }
}

/// Thin singular value decomposition `A = U diag(s) Vᵀ`, singular values sorted
/// in decreasing order.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: DenseMatrix,
    pub s: Vec<f64>,
    pub v: DenseMatrix,
}

const JACOBI_MAX_SWEEPS: usize = 80;

/// One-sided (Hestenes) Jacobi SVD. Accurate to high relative precision on
/// the small dense matrices used here, including the smallest singular value.
pub fn svd_jacobi(a: &DenseMatrix) -> Svd {
    let (m, n) = a.shape();
    if m < n {
        let t = svd_jacobi(&a.transpose());
        return Svd { u: t.v, s: t.s, v: t.u };
    }
    let mut u: Vec<Vec<f64>> = (0..n).map(|j| a.column(j).into_vec()).collect();
    let mut v: Vec<Vec<f64>> = (0..n).map(|j| DenseVector::unit(n, j).into_vec()).collect();
    let tol = (m as f64) * f64::EPSILON;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = dot(&u[p], &u[p]);
                let beta = dot(&u[q], &u[q]);
                let gamma = dot(&u[p], &u[q]);
                if gamma == 0.0 || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut u, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }
    let mut order: Vec<(f64, usize)> = u.iter().enumerate().map(|(j, c)| (dot(c, c).sqrt(), j)).collect();
    order.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
    let s: Vec<f64> = order.iter().map(|o| o.0).collect();
    let umat = DenseMatrix::from_fn(m, n, |i, k| {
        let (sig, j) = order[k];
        if sig > 0.0 {
            u[j][i] / sig
        } else {
            0.0
        }
    });
    let vmat = DenseMatrix::from_fn(n, n, |i, k| v[order[k].1][i]);
    Svd { u: umat, s, v: vmat }
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (lo, hi) = cols.split_at_mut(q);
    let cp = &mut lo[p];
    let cq = &mut hi[0];
    for (xp, xq) in cp.iter_mut().zip(cq.iter_mut()) {
        let a = *xp;
        let b = *xq;
        *xp = c * a - s * b;
        *xq = s * a + c * b;
    }
}
