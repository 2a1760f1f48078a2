//! A-priori guarantees for the ellipsoid solver: iteration counts, bounds on
//! the ellipsoid shape and center, floating-point error constants, and the
//! polytope computations that turn a parametric problem into `(r, R, V)`.

mod nnls;
mod polytope;
mod report;

use thiserror::Error;

use crate::ellipsoid::cut_coefficients;
use crate::linalg::{operator_norm, DenseMatrix, DenseVector, Lu};

pub use nnls::nnls;
pub use polytope::{
    compute_big_r, compute_v_linear, eliminate_equalities, extreme_polytopes, inscribed_ball, is_bounded,
    project_inequalities, soc_linear_inner, ParamPolytope, Polytope, Projection,
};
pub use report::{format_f64, Certificate, CertificateInputs, NoteValue};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CertifyError {
    #[error("equality rows are linearly dependent (rank {rank} < {expected}); redundant rows: {dependent_rows:?}")]
    RankDeficient { rank: usize, expected: usize, dependent_rows: Vec<usize> },
    #[error("equalities pin every variable; nothing is left to optimize")]
    NoFreeVariables,
    #[error("polytope has no interior (certified radius {radius:e}); decrease r_o")]
    EmptyInterior { radius: f64 },
    #[error("unbounded: {0}")]
    Unbounded(String),
    #[error("bounded block is singular")]
    SingularBlock,
    #[error("widening coefficient {lambda} makes n_lambda_{which} diverge")]
    Divergent { which: &'static str, lambda: f64 },
    #[error("shape matrix is singular")]
    SingularShape,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("solver failure: {0}")]
    Solver(String),
}

/// `⌈2n(n+1)·ln((R/r)(V/ε))⌉`, or 0 once the log argument is at most 1.
pub fn iteration_bound(n: usize, r: f64, big_r: f64, v: f64, epsilon: f64) -> u64 {
    let arg = (big_r / r) * (v / epsilon);
    if !(arg > 1.0) {
        return 0;
    }
    let nf = n as f64;
    (2.0 * nf * (nf + 1.0) * arg.ln()).ceil() as u64
}

/// Iteration budgets under widening.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WideningBudget {
    /// `⌈N / (1 − n(n+1) ln λ)⌉`, `None` when divergent.
    pub n_lambda_paper: Option<u64>,
    /// `⌈N / (1 − 2n(n+1) ln λ)⌉`, consistent with `|det|` scaling as `λⁿ`.
    pub n_lambda_safe: Option<u64>,
    pub convergent_paper: bool,
    pub convergent_safe: bool,
    pub lambda: f64,
}

impl WideningBudget {
    pub fn paper(&self) -> Result<u64, CertifyError> {
        self.n_lambda_paper.ok_or(CertifyError::Divergent { which: "paper", lambda: self.lambda })
    }

    pub fn safe(&self) -> Result<u64, CertifyError> {
        self.n_lambda_safe.ok_or(CertifyError::Divergent { which: "safe", lambda: self.lambda })
    }
}

pub fn widening_budget(n: usize, big_n: u64, lambda: f64) -> Result<WideningBudget, CertifyError> {
    if !(lambda >= 1.0 && lambda.is_finite()) {
        return Err(CertifyError::InvalidInput(format!("lambda must be ≥ 1, got {lambda}")));
    }
    let nf = n as f64;
    let k = nf * (nf + 1.0) * lambda.ln();
    let budget = |den: f64| (den > 0.0).then(|| (big_n as f64 / den).ceil() as u64);
    let n_lambda_paper = budget(1.0 - k);
    let n_lambda_safe = budget(1.0 - 2.0 * k);
    Ok(WideningBudget {
        n_lambda_paper,
        n_lambda_safe,
        convergent_paper: n_lambda_paper.is_some(),
        convergent_safe: n_lambda_safe.is_some(),
        lambda,
    })
}

/// Largest `λ` for which `n_lambda_paper` stays finite.
pub fn convergence_threshold_paper(n: usize) -> f64 {
    let nf = n as f64;
    (1.0 / (nf * (nf + 1.0))).exp()
}

pub fn convergence_threshold_safe(n: usize) -> f64 {
    let nf = n as f64;
    (1.0 / (2.0 * nf * (nf + 1.0))).exp()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionBounds {
    pub sigma_min_floor: f64,
    pub sigma_max_cap: f64,
    pub cond_bound: f64,
    pub norm_b_bound: f64,
    pub norm_c_bound: f64,
}

/// Bounds on `σ(B)`, `k(B)`, `‖B‖` and `‖c‖` along a run with early stop and
/// corrective steps.
pub fn condition_bounds(n: usize, r: f64, big_r: f64, v: f64, epsilon: f64, x_c_norm: f64) -> ConditionBounds {
    let s = ((n + 1) as f64).sqrt();
    let sigma_min_floor = r * epsilon / (2.0 * v);
    let sigma_max_cap = 4.0 * big_r * s;
    ConditionBounds {
        sigma_min_floor,
        sigma_max_cap,
        cond_bound: 8.0 * big_r * v * s / (r * epsilon),
        norm_b_bound: sigma_max_cap,
        norm_c_bound: big_r + x_c_norm + sigma_max_cap,
    }
}

/// binary64 unit roundoff.
pub const UNIT_ROUNDOFF: f64 = 1.0 / 9_007_199_254_740_992.0;
/// Smallest positive subnormal, `2⁻¹⁰⁷⁴`.
pub const UNDERFLOW_UNIT: f64 = 5e-324;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FpElementary {
    pub u: f64,
    pub eta: f64,
    pub a_n: f64,
    pub gamma_n: f64,
}

fn a_const(n: usize) -> f64 {
    let nu = n as f64 * UNIT_ROUNDOFF;
    nu / (1.0 - nu)
}

pub fn fp_elementary(n: usize) -> Result<FpElementary, CertifyError> {
    if !((2 * n) as f64 * UNIT_ROUNDOFF < 1.0) {
        return Err(CertifyError::InvalidInput(format!("n = {n} too large for the rounding model")));
    }
    // eta/u = 2^-1021 is exact; multiplying in this order keeps gamma_n normal
    let ratio = 2f64.powi(-1021);
    Ok(FpElementary {
        u: UNIT_ROUNDOFF,
        eta: UNDERFLOW_UNIT,
        a_n: a_const(n),
        gamma_n: a_const(2 * n) * ratio,
    })
}

/// `(E_B, E_c)`, the rounding error bounds on one ellipsoid update.
pub fn fp_error_constants(n: usize, norm_b: f64, norm_c: f64) -> (f64, f64) {
    let u = UNIT_ROUNDOFF;
    let nf = n as f64;
    let (alpha, beta) = cut_coefficients(n);
    let e_c = u * ((16.0 * nf * nf + 16.0 * nf + 3.0) * norm_b + norm_c);
    let e_b = u * norm_b * ((nf * nf / (1.0 - nf * u) + 2.0) * beta.abs() + nf + 2.0 * alpha.abs() + 1.0);
    (e_b, e_c)
}

/// Smallest `λ` certified by the analytical sufficient condition.
pub fn widening_coefficient(n: usize, cond: f64, norm_b: f64, e_b: f64, e_c: f64) -> f64 {
    let nf = n as f64;
    let kb = cond / norm_b;
    1.0 + kb * nf.sqrt() * (nf.sqrt() * cond * e_b + e_c + kb * nf * e_b * e_c)
}

/// `‖fl(B)⁻¹B‖ + ‖fl(B)⁻¹‖·‖c − fl(c)‖` with operator 2-norms.
pub fn widening_lhs(b: &DenseMatrix, c: &DenseVector, b_fl: &DenseMatrix, c_fl: &DenseVector) -> Result<f64, CertifyError> {
    let n = b.rows();
    if !b.is_square() || b_fl.shape() != b.shape() || c.len() != n || c_fl.len() != n {
        return Err(CertifyError::Dimension("widening check needs square B and matching centers".into()));
    }
    let inv = Lu::new(b_fl)
        .solve_matrix(&DenseMatrix::identity(n))
        .ok_or(CertifyError::SingularShape)?;
    Ok(operator_norm(&inv.matmul(b)) + operator_norm(&inv) * c.sub(c_fl).two_norm())
}

/// Whether `E(B, c) ⊆ E(λ·fl(B), fl(c))` is certified by the sufficient condition.
pub fn widening_check(
    b: &DenseMatrix,
    c: &DenseVector,
    b_fl: &DenseMatrix,
    c_fl: &DenseVector,
    lambda: f64,
) -> Result<bool, CertifyError> {
    Ok(widening_lhs(b, c, b_fl, c_fl)? <= lambda)
}
