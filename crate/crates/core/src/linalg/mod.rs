//! Dense real linear algebra over binary64.
//!
//! Everything here is deterministic: plain left-to-right accumulation, fixed
//! start vectors, no internal parallelism. The target regime is matrices of a
//! few dozen rows (the projected MPC problems are 16-dimensional).

mod decomp;
mod matrix;
mod vector;

pub use decomp::{svd_jacobi, Lu, PivotedQr, Svd};
pub use matrix::DenseMatrix;
pub use vector::DenseVector;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("non-finite entry at flat index {index}")]
    NonFinite { index: usize },
    #[error("{op}: dimension mismatch {left:?} vs {right:?}")]
    DimensionMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("power iteration did not converge within {iterations} iterations")]
    NonConvergence { iterations: usize },
    #[error("matrix has numerical rank {rank} < {expected}; dependent rows {dependent_rows:?}")]
    RankDeficient {
        rank: usize,
        expected: usize,
        dependent_rows: Vec<usize>,
    },
    #[error("{0}")]
    InvalidInput(&'static str),
}

/// Unit-norm singular direction together with its singular value.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularPair {
    pub sigma: f64,
    pub direction: DenseVector,
}

/// Relative rank tolerance used by the null-space and min-norm routines.
pub const RANK_TOLERANCE: f64 = 1e-10;

pub fn two_norm(v: &DenseVector) -> f64 {
    v.two_norm()
}

pub fn frobenius_norm(a: &DenseMatrix) -> f64 {
    a.frobenius_norm()
}

/// The row-norm operator: entry `i` is `‖row_i(A)‖₂`.
pub fn row_norms(a: &DenseMatrix) -> DenseVector {
    a.row_norms()
}

/// Default iteration cap for [`power_iteration_top`].
pub fn power_iteration_cap(n: usize) -> usize {
    10 * n + 200
}

/// Largest singular value and its left singular direction, by power
/// iteration on `A Aᵀ` started from the all-ones vector.
///
/// Convergence is declared when the eigen-residual `‖A Aᵀ y − μ y‖` falls
/// below `1e-11·μ`. A start vector orthogonal to the top direction converges
/// to a lower pair; [`top_singular_pair`] guards against that.
pub fn power_iteration_top(a: &DenseMatrix) -> Result<SingularPair, LinalgError> {
    power_iteration_top_with_cap(a, power_iteration_cap(a.rows()))
}

pub fn power_iteration_top_with_cap(a: &DenseMatrix, cap: usize) -> Result<SingularPair, LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::InvalidInput("power iteration needs a square matrix"));
    }
    let m = a.rows();
    if m == 0 || a.max_abs() == 0.0 {
        return Err(LinalgError::InvalidInput("power iteration needs a nonzero matrix"));
    }
    let mut y = DenseVector::ones(m).scaled(1.0 / (m as f64).sqrt());
    for _ in 0..cap {
        let z = a.tr_mul_vec(&y);
        let w = a.mul_vec(&z);
        let mu = z.dot(&z);
        if mu == 0.0 {
            // start vector in the left null space; nudge deterministically
            y = DenseVector::unit(m, 0);
            continue;
        }
        let mut resid = w.clone();
        resid.axpy(-mu, &y);
        let wn = w.two_norm();
        let next = w.scaled(1.0 / wn);
        if resid.two_norm() <= 1e-11 * mu {
            let z = a.tr_mul_vec(&next);
            return Ok(SingularPair { sigma: z.two_norm(), direction: next });
        }
        y = next;
    }
    Err(LinalgError::NonConvergence { iterations: cap })
}

/// Top singular pair with a dense-decomposition fallback when power
/// iteration stalls or lands on an impossible value (`σ̂ √n < ‖A‖_F`).
pub fn top_singular_pair(a: &DenseMatrix) -> SingularPair {
    if let Ok(pair) = power_iteration_top(a) {
        let n = a.cols().max(1) as f64;
        if pair.sigma * n.sqrt() >= a.frobenius_norm() * (1.0 - 1e-12) {
            return pair;
        }
    }
    let svd = svd_jacobi(a);
    SingularPair { sigma: svd.s[0], direction: svd.u.column(0) }
}

/// Smallest singular value of a square matrix via Jacobi SVD. Returns `0`
/// for exactly singular input.
pub fn min_singular_estimate(a: &DenseMatrix) -> f64 {
    assert!(a.is_square(), "min_singular_estimate needs a square matrix");
    if a.rows() == 0 {
        return 0.0;
    }
    let svd = svd_jacobi(a);
    let smax = svd.s[0];
    let smin = *svd.s.last().unwrap();
    // below the rounding floor the computed value is noise
    if smin <= smax * (a.rows() as f64) * f64::EPSILON * 0.5 {
        0.0
    } else {
        smin
    }
}

/// Largest singular value (operator 2-norm) via Jacobi SVD.
pub fn operator_norm(a: &DenseMatrix) -> f64 {
    if a.rows() == 0 || a.cols() == 0 {
        return 0.0;
    }
    svd_jacobi(a).s[0]
}

/// Numerical rank with relative tolerance `tol·σ_max`.
pub fn numerical_rank(a: &DenseMatrix, tol: f64) -> usize {
    if a.rows() == 0 || a.cols() == 0 {
        return 0;
    }
    let s = svd_jacobi(a).s;
    let cut = tol * s[0];
    s.iter().filter(|&&x| x > cut && x > 0.0).count()
}

/// Factorization of a full-row-rank `d × n` matrix `A` through the pivoted QR
/// of `Aᵀ`. Serves both the null-space basis and minimum-norm solves.
#[derive(Clone, Debug)]
pub struct RowSpaceFactor {
    qr: PivotedQr,
    d: usize,
    n: usize,
}

impl RowSpaceFactor {
    pub fn new(a: &DenseMatrix) -> Result<Self, LinalgError> {
        let (d, n) = a.shape();
        let qr = PivotedQr::new(&a.transpose());
        let rank = numerical_rank(a, RANK_TOLERANCE);
        if rank < d {
            let dependent_rows = qr.perm()[rank..d].to_vec();
            return Err(LinalgError::RankDeficient { rank, expected: d, dependent_rows });
        }
        Ok(Self { qr, d, n })
    }

    /// Orthonormal basis of `null(A)`, `n × (n − d)`.
    pub fn null_basis(&self) -> DenseMatrix {
        let idx: Vec<usize> = (self.d..self.n).collect();
        self.qr.q().select_cols(&idx)
    }

    /// Minimum-norm `x` with `A x = y`.
    pub fn solve(&self, y: &DenseVector) -> DenseVector {
        assert_eq!(y.len(), self.d, "min-norm rhs length");
        let r = self.qr.r();
        let perm = self.qr.perm();
        // Rᵀ w = Pᵀ y, forward substitution
        let mut w = vec![0.0; self.d];
        for i in 0..self.d {
            let mut s = y[perm[i]];
            for k in 0..i {
                s -= r.get(k, i) * w[k];
            }
            w[i] = s / r.get(i, i);
        }
        let q = self.qr.q();
        DenseVector::from_raw(
            (0..self.n)
                .map(|row| {
                    let mut acc = 0.0;
                    for (k, wk) in w.iter().enumerate() {
                        acc += q.get(row, k) * wk;
                    }
                    acc
                })
                .collect(),
        )
    }
}

/// Orthonormal basis `M` (`n × (n−d)`) of the null space of a full-row-rank
/// `d × n` matrix with `d < n`.
pub fn null_space_basis(a: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
    if a.rows() >= a.cols() {
        return Err(LinalgError::InvalidInput("null_space_basis needs fewer rows than columns"));
    }
    Ok(RowSpaceFactor::new(a)?.null_basis())
}

/// Minimum 2-norm solution of `A x = y` for full-row-rank `A`.
pub fn min_norm_solve(a: &DenseMatrix, y: &DenseVector) -> Result<DenseVector, LinalgError> {
    if y.len() != a.rows() {
        return Err(LinalgError::DimensionMismatch {
            op: "min_norm_solve",
            left: a.shape(),
            right: (y.len(), 1),
        });
    }
    Ok(RowSpaceFactor::new(a)?.solve(y))
}
