//! Ellipsoids `E(B, c) = { B u + c : ‖u‖ ≤ 1 }` and the two transformations
//! the solver applies to them: the central cut and the corrective step that
//! caps the largest semi-axis.

mod solver;

pub use solver::{
    separation_oracle, solve, write_trace_csv, BestPoint, CutKind, SolveFailure, SolverConfig, SolverOutcome,
    SolverStatus, StepKind, TraceRow,
};

use thiserror::Error;

use crate::linalg::{top_singular_pair, DenseMatrix, DenseVector, Lu, SingularPair};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EllipsoidError {
    #[error("ellipsoid shape matrix is numerically singular")]
    SingularShape,
    #[error("cut vector is zero after normalization (‖Bᵀe‖ = 0)")]
    ZeroCutVector,
    #[error("dimension {0} too small; the cut update needs n ≥ 2")]
    DimensionTooSmall(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("corrective step not triggered: σ_max = {sigma} ≤ {threshold}")]
    NotTriggered { sigma: f64, threshold: f64 },
    #[error("ellipsoid does not meet the enclosing ball (|h| = {offset} > σ + R = {limit})")]
    EmptyIntersection { offset: f64, limit: f64 },
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
}

/// Ellipsoid `E(B, c)` with nonsingular shape `B`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ellipsoid {
    shape: DenseMatrix,
    center: DenseVector,
}

impl Ellipsoid {
    pub fn new(shape: DenseMatrix, center: DenseVector) -> Result<Self, EllipsoidError> {
        if !shape.is_square() || shape.rows() != center.len() {
            return Err(EllipsoidError::DimensionMismatch { expected: center.len(), got: shape.rows() });
        }
        Ok(Self { shape, center })
    }

    /// Euclidean ball `B_R(center)`.
    pub fn ball(center: DenseVector, radius: f64) -> Self {
        let n = center.len();
        Self { shape: DenseMatrix::identity(n).scaled(radius), center }
    }

    pub fn shape(&self) -> &DenseMatrix {
        &self.shape
    }

    pub fn center(&self) -> &DenseVector {
        &self.center
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn abs_det(&self) -> f64 {
        Lu::new(&self.shape).determinant().abs()
    }

    /// `E(λB, c)`
    pub fn widened(mut self, lambda: f64) -> Self {
        if lambda != 1.0 {
            self.shape = self.shape.scaled(lambda);
        }
        self
    }

    /// Membership test `‖B⁻¹(z − c)‖ ≤ 1 + 1e-12`, via a linear solve.
    pub fn contains(&self, z: &DenseVector) -> Result<bool, EllipsoidError> {
        self.contains_with_tolerance(z, 1e-12)
    }

    pub fn contains_with_tolerance(&self, z: &DenseVector, tol: f64) -> Result<bool, EllipsoidError> {
        Ok(self.normalized_radius(z)? <= 1.0 + tol)
    }

    /// `‖B⁻¹(z − c)‖`: below one inside, above one outside.
    pub fn normalized_radius(&self, z: &DenseVector) -> Result<f64, EllipsoidError> {
        if z.len() != self.dim() {
            return Err(EllipsoidError::DimensionMismatch { expected: self.dim(), got: z.len() });
        }
        let lu = Lu::new(&self.shape);
        let u = lu.solve(&z.sub(&self.center)).ok_or(EllipsoidError::SingularShape)?;
        Ok(u.two_norm())
    }

    /// `p = Bᵀe / ‖Bᵀe‖`.
    pub fn normalize_cut(&self, e: &DenseVector) -> Result<DenseVector, EllipsoidError> {
        if e.len() != self.dim() {
            return Err(EllipsoidError::DimensionMismatch { expected: self.dim(), got: e.len() });
        }
        let bte = self.shape.tr_mul_vec(e);
        let nrm = bte.two_norm();
        if nrm == 0.0 || !nrm.is_finite() {
            return Err(EllipsoidError::ZeroCutVector);
        }
        Ok(bte.scaled(1.0 / nrm))
    }

    /// Minimum-volume ellipsoid containing the half `{x ∈ E : eᵀ(x − c) ≤ 0}`,
    /// then widened by `lambda`.
    ///
    /// ```text
    /// c⁺ = c − B p / (n+1)
    /// B⁺ = λ [ α B + β (B p) pᵀ ],  α = n/√(n²−1),  β = n/(n+1) − α
    /// ```
    pub fn cut_update(&self, e: &DenseVector, lambda: f64) -> Result<Ellipsoid, EllipsoidError> {
        let n = self.dim();
        if n < 2 {
            return Err(EllipsoidError::DimensionTooSmall(n));
        }
        let p = self.normalize_cut(e)?;
        let (alpha, beta) = cut_coefficients(n);
        let bp = self.shape.mul_vec(&p);
        let mut center = self.center.clone();
        center.axpy(-1.0 / (n as f64 + 1.0), &bp);
        let shape = DenseMatrix::from_fn(n, n, |i, j| {
            lambda * (alpha * self.shape.get(i, j) + beta * bp[i] * p[j])
        });
        Ok(Ellipsoid { shape, center })
    }

    /// Corrective step for an ellipsoid whose largest semi-axis exceeds
    /// `2R√(n+1)`; see [`Ellipsoid::corrective_step_with`].
    pub fn corrective_step(&self, radius: f64, ball_center: &DenseVector) -> Result<Ellipsoid, EllipsoidError> {
        let pair = top_singular_pair(&self.shape);
        self.corrective_step_with(&pair, radius, ball_center)
    }

    /// Replaces `E` by an ellipsoid of smaller volume that still contains
    /// `E ∩ B_R(x_c)`.
    ///
    /// With `e` the top left singular direction (`B v = σ e`), `E ∩ B_R(x_c)`
    /// lies in the slab `|eᵀ(x − x_c)| ≤ R`. In the unit-ball coordinates of
    /// `E` that slab is `|vᵀu − m| ≤ ρ` with `ρ = R/σ`, and the ellipsoid with
    /// semi-axis `a = ρ√(n+1)` along `v`, `b = √((n+1)/n)` across, centered at
    /// `m v`, encloses ball ∩ slab. The volume ratio is `a·b^(n−1) < γ` and the
    /// new largest semi-axis is `max(aσ, bσ₂) ≤ 2R√(n+1)` when `σ₂ ≤ 2R√n`.
    pub fn corrective_step_with(
        &self,
        pair: &SingularPair,
        radius: f64,
        ball_center: &DenseVector,
    ) -> Result<Ellipsoid, EllipsoidError> {
        let n = self.dim();
        if n < 2 {
            return Err(EllipsoidError::DimensionTooSmall(n));
        }
        if ball_center.len() != n {
            return Err(EllipsoidError::DimensionMismatch { expected: n, got: ball_center.len() });
        }
        let nf = n as f64;
        let sigma = pair.sigma;
        let threshold = 2.0 * radius * (nf + 1.0).sqrt();
        if sigma <= threshold {
            return Err(EllipsoidError::NotTriggered { sigma, threshold });
        }
        let e = &pair.direction;
        let v = self.shape.tr_mul_vec(e).scaled(1.0 / sigma);
        let h = e.dot(&self.center.sub(ball_center));
        if h.abs() > sigma + radius {
            return Err(EllipsoidError::EmptyIntersection { offset: h.abs(), limit: sigma + radius });
        }
        let rho = radius / sigma;
        let mid = (-h / sigma).clamp(-1.0 + rho, 1.0 - rho);
        let a = rho * (nf + 1.0).sqrt();
        let b = ((nf + 1.0) / nf).sqrt();
        let mut center = self.center.clone();
        center.axpy(mid * sigma, e);
        let coef = (a - b) * sigma;
        let shape = DenseMatrix::from_fn(n, n, |i, j| b * self.shape.get(i, j) + coef * e[i] * v[j]);
        Ok(Ellipsoid { shape, center })
    }
}

/// `(α, β)` of the central-cut shape update in dimension `n`.
pub fn cut_coefficients(n: usize) -> (f64, f64) {
    let nf = n as f64;
    let alpha = nf / (nf * nf - 1.0).sqrt();
    let beta = nf / (nf + 1.0) - alpha;
    (alpha, beta)
}

/// Closed-form `|det B⁺| / |det B|` of an unwidened central cut: `αⁿ(1 + β/α)`.
pub fn cut_volume_ratio(n: usize) -> f64 {
    let (alpha, beta) = cut_coefficients(n);
    alpha.powi(n as i32) * (1.0 + beta / alpha)
}

/// Guaranteed per-step volume reduction `γ = exp(−1/(2(n+1)))`.
pub fn volume_reduction_bound(n: usize) -> f64 {
    (-1.0 / (2.0 * (n as f64 + 1.0))).exp()
}
