//! Standard-form second-order cone programs
//!
//! ```text
//!     minimize    fᵀx
//!     subject to  ‖A_i x + b_i‖₂ ≤ c_iᵀx + d_i,   i = 1..m
//! ```
//!
//! A cone with zero rows in `A_i` is an ordinary linear inequality.
//! Constraint functions are written `g_i(x) = ‖A_i x + b_i‖ − c_iᵀx − d_i`,
//! so a point satisfies cone `i` when `g_i(x) ≤ 0`.

use thiserror::Error;

use crate::linalg::{DenseMatrix, DenseVector};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SocpError {
    #[error("cone {index}: {what}")]
    Dimension { index: usize, what: String },
    #[error("problem must have at least one constraint")]
    NoConstraints,
    #[error("problem dimension must be positive")]
    EmptyDimension,
}

/// One constraint `‖A x + b‖₂ ≤ cᵀx + d`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeConstraint {
    a: DenseMatrix,
    b: DenseVector,
    c: DenseVector,
    d: f64,
}

impl ConeConstraint {
    pub fn new(a: DenseMatrix, b: DenseVector, c: DenseVector, d: f64) -> Result<Self, SocpError> {
        if a.rows() != b.len() {
            return Err(SocpError::Dimension {
                index: 0,
                what: format!("A has {} rows but b has length {}", a.rows(), b.len()),
            });
        }
        if a.rows() > 0 && a.cols() != c.len() {
            return Err(SocpError::Dimension {
                index: 0,
                what: format!("A has {} columns but c has length {}", a.cols(), c.len()),
            });
        }
        if !d.is_finite() {
            return Err(SocpError::Dimension { index: 0, what: "d is not finite".into() });
        }
        let a = if a.rows() == 0 { DenseMatrix::zeros(0, c.len()) } else { a };
        Ok(Self { a, b, c, d })
    }

    /// Linear constraint `0 ≤ cᵀx + d`.
    pub fn linear(c: DenseVector, d: f64) -> Self {
        let n = c.len();
        Self { a: DenseMatrix::zeros(0, n), b: DenseVector::zeros(0), c, d }
    }

    /// Linear constraint `aᵀx ≤ rhs`, i.e. `c = −a`, `d = rhs`.
    pub fn halfspace(a: &DenseVector, rhs: f64) -> Self {
        Self::linear(a.scaled(-1.0), rhs)
    }

    pub fn a(&self) -> &DenseMatrix {
        &self.a
    }

    pub fn b(&self) -> &DenseVector {
        &self.b
    }

    pub fn c(&self) -> &DenseVector {
        &self.c
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    /// Number of norm rows `n_i`.
    pub fn size(&self) -> usize {
        self.a.rows()
    }

    pub fn is_linear(&self) -> bool {
        self.a.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }

    fn residual(&self, x: &DenseVector) -> DenseVector {
        self.a.mul_vec(x).add(&self.b)
    }

    /// `g(x) = ‖A x + b‖ − cᵀx − d`.
    pub fn value(&self, x: &DenseVector) -> f64 {
        let lin = -self.c.dot(x) - self.d;
        if self.is_linear() {
            lin
        } else {
            self.residual(x).two_norm() + lin
        }
    }

    /// A subgradient of `g` at `x`. At the cone vertex (`A x + b = 0`) the
    /// norm term contributes nothing and the result is `−c`.
    pub fn subgradient(&self, x: &DenseVector) -> DenseVector {
        let mut g = self.c.scaled(-1.0);
        if !self.is_linear() {
            let w = self.residual(x);
            let nw = w.two_norm();
            if nw > 0.0 {
                g.axpy(1.0 / nw, &self.a.tr_mul_vec(&w));
            }
        }
        g
    }
}

/// Standard-form SOCP.
#[derive(Debug, Clone, PartialEq)]
pub struct SocpProblem {
    f: DenseVector,
    cones: Vec<ConeConstraint>,
}

impl SocpProblem {
    pub fn new(f: DenseVector, cones: Vec<ConeConstraint>) -> Result<Self, SocpError> {
        let n = f.len();
        if n == 0 {
            return Err(SocpError::EmptyDimension);
        }
        if cones.is_empty() {
            return Err(SocpError::NoConstraints);
        }
        for (index, k) in cones.iter().enumerate() {
            if k.dim() != n || k.a.cols() != n {
                return Err(SocpError::Dimension {
                    index,
                    what: format!("cone has dimension {} but problem has {}", k.dim(), n),
                });
            }
        }
        Ok(Self { f, cones })
    }

    pub fn dim(&self) -> usize {
        self.f.len()
    }

    pub fn cost_vector(&self) -> &DenseVector {
        &self.f
    }

    pub fn cones(&self) -> &[ConeConstraint] {
        &self.cones
    }

    pub fn num_constraints(&self) -> usize {
        self.cones.len()
    }

    /// Total number of norm rows `Σ n_i`; zero means the problem is an LP.
    pub fn size_vector(&self) -> Vec<usize> {
        self.cones.iter().map(ConeConstraint::size).collect()
    }

    /// Copy of the problem without constraint `i`.
    pub fn without_constraint(&self, i: usize) -> Result<Self, SocpError> {
        let mut cones = self.cones.clone();
        cones.remove(i);
        Self::new(self.f.clone(), cones)
    }
}

/// Result of evaluating every constraint at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    pub values: DenseVector,
    pub worst_index: usize,
    pub feasible: bool,
}

impl FeasibilityReport {
    pub fn worst_value(&self) -> f64 {
        self.values[self.worst_index]
    }
}

pub fn constraint_value(p: &SocpProblem, x: &DenseVector, i: usize) -> f64 {
    p.cones[i].value(x)
}

pub fn constraint_subgradient(p: &SocpProblem, x: &DenseVector, i: usize) -> DenseVector {
    p.cones[i].subgradient(x)
}

/// Feasibility with the exact (zero) tolerance.
pub fn feasibility(p: &SocpProblem, x: &DenseVector) -> FeasibilityReport {
    feasibility_with_tolerance(p, x, 0.0)
}

/// `feasible` holds iff every `g_i(x) ≤ tolerance`. Ties on the worst value
/// resolve to the smallest index.
pub fn feasibility_with_tolerance(p: &SocpProblem, x: &DenseVector, tolerance: f64) -> FeasibilityReport {
    let values: Vec<f64> = p.cones.iter().map(|k| k.value(x)).collect();
    let mut worst_index = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[worst_index] {
            worst_index = i;
        }
    }
    let feasible = values[worst_index] <= tolerance;
    FeasibilityReport { values: DenseVector::from_raw(values), worst_index, feasible }
}

pub fn cost(p: &SocpProblem, x: &DenseVector) -> f64 {
    p.f.dot(x)
}

/// `x` is better than the incumbent `y` when it is feasible and strictly
/// cheaper (any feasible point beats an absent incumbent).
pub fn is_better(p: &SocpProblem, x: &DenseVector, y: Option<&DenseVector>) -> bool {
    if !feasibility(p, x).feasible {
        return false;
    }
    match y {
        None => true,
        Some(y) => cost(p, x) < cost(p, y),
    }
}
