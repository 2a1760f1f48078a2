use std::fmt;
use std::io::Write;

use super::{Ellipsoid, EllipsoidError};
use crate::certify::{iteration_bound, widening_budget};
use crate::linalg::{min_singular_estimate, svd_jacobi, top_singular_pair, DenseVector, Lu};
use crate::socp::{constraint_subgradient, cost, feasibility, SocpProblem};

/// Which half-space the oracle produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutKind {
    /// Center feasible; cut along the cost gradient.
    FeasibleCostCut,
    /// Center infeasible; cut along a subgradient of the worst constraint.
    InfeasibleConstraintCut,
}

/// Separation oracle at the center `c`. The kept half is `{x : eᵀ(x − c) ≤ 0}`.
pub fn separation_oracle(p: &SocpProblem, c: &DenseVector) -> Result<(CutKind, DenseVector), EllipsoidError> {
    if c.len() != p.dim() {
        return Err(EllipsoidError::DimensionMismatch { expected: p.dim(), got: c.len() });
    }
    let report = feasibility(p, c);
    let (kind, e) = if report.feasible {
        (CutKind::FeasibleCostCut, p.cost_vector().clone())
    } else {
        (CutKind::InfeasibleConstraintCut, constraint_subgradient(p, c, report.worst_index))
    };
    if e.iter().all(|&x| x == 0.0) {
        return Err(EllipsoidError::ZeroCutVector);
    }
    Ok((kind, e))
}

/// Solver parameters. `r`, `big_r` and `v` are the certified inner radius,
/// enclosing radius and cost range of the feasible set.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub epsilon: f64,
    pub r: f64,
    pub big_r: f64,
    pub v: f64,
    /// Center `x_c` of the ball `B_R(x_c)` that encloses the feasible set.
    pub ball_center: DenseVector,
    /// Center of the initial ellipsoid `B_R(init_center)`.
    pub init_center: DenseVector,
    pub lambda: f64,
    pub budget: usize,
    pub sigma_min_floor: f64,
    pub sigma_max_trigger: f64,
    pub record_trace: bool,
}

impl SolverConfig {
    /// Configuration with `λ = 1`, both centers at the origin and the
    /// certified iteration bound as budget.
    pub fn new(n: usize, epsilon: f64, r: f64, big_r: f64, v: f64) -> Result<Self, EllipsoidError> {
        for (name, x) in [("epsilon", epsilon), ("r", r), ("R", big_r), ("V", v)] {
            if !(x > 0.0 && x.is_finite()) {
                return Err(EllipsoidError::InvalidConfig(format!("{name} must be positive, got {x}")));
            }
        }
        let budget = iteration_bound(n, r, big_r, v, epsilon).max(1) as usize;
        Ok(Self {
            epsilon,
            r,
            big_r,
            v,
            ball_center: DenseVector::zeros(n),
            init_center: DenseVector::zeros(n),
            lambda: 1.0,
            budget,
            sigma_min_floor: r * epsilon / v,
            sigma_max_trigger: 2.0 * big_r * ((n + 1) as f64).sqrt(),
            record_trace: false,
        })
    }

    /// Sets the widening coefficient and re-derives the budget as the safe
    /// widened iteration count.
    pub fn with_lambda(mut self, lambda: f64) -> Result<Self, EllipsoidError> {
        let n = self.init_center.len();
        let base = iteration_bound(n, self.r, self.big_r, self.v, self.epsilon);
        let wb = widening_budget(n, base, lambda).map_err(|e| EllipsoidError::InvalidConfig(e.to_string()))?;
        let safe = wb
            .n_lambda_safe
            .ok_or_else(|| EllipsoidError::InvalidConfig(format!("lambda = {lambda} diverges for n = {n}")))?;
        self.lambda = lambda;
        self.budget = safe.max(1) as usize;
        Ok(self)
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }

    /// Uses `center` both as the initial center and as `x_c`.
    pub fn with_center(mut self, center: DenseVector) -> Self {
        self.ball_center = center.clone();
        self.init_center = center;
        self
    }

    pub fn with_trace(mut self, on: bool) -> Self {
        self.record_trace = on;
        self
    }

    fn validate(&self, n: usize) -> Result<(), EllipsoidError> {
        let bad = |m: String| Err(EllipsoidError::InvalidConfig(m));
        if self.init_center.len() != n || self.ball_center.len() != n {
            return bad(format!("centers must have length {n}"));
        }
        if !(self.lambda >= 1.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be ≥ 1, got {}", self.lambda));
        }
        if self.budget == 0 {
            return bad("budget must be ≥ 1".into());
        }
        if !(self.big_r > 0.0 && self.big_r.is_finite()) {
            return bad(format!("R must be positive, got {}", self.big_r));
        }
        if !(self.sigma_min_floor >= 0.0) || !(self.sigma_max_trigger > 0.0) {
            return bad("singular-value thresholds must be nonnegative / positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverStatus {
    /// Budget exhausted with a feasible incumbent.
    EpsilonOptimal,
    /// The ellipsoid became flatter than `rε/V` after a feasible point was seen.
    EarlyFlatStop,
    NoFeasiblePointFound,
}

impl fmt::Display for SolverStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SolverStatus::EpsilonOptimal => "EpsilonOptimal",
            SolverStatus::EarlyFlatStop => "EarlyFlatStop",
            SolverStatus::NoFeasiblePointFound => "NoFeasiblePointFound",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BestPoint {
    pub point: DenseVector,
    pub cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepKind {
    CostCut,
    ConstraintCut,
    Corrective,
}

impl StepKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            StepKind::CostCut => "cost",
            StepKind::ConstraintCut => "constraint",
            StepKind::Corrective => "corrective",
        }
    }
}

/// One row of the iteration log. `det_ratio` is `|det B⁺| / |det B|` of the
/// step, singular values are those of `B⁺`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub kind: StepKind,
    pub det_ratio: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub best_cost: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOutcome {
    pub status: SolverStatus,
    pub best: Option<BestPoint>,
    pub iterations_used: usize,
    pub corrective_steps: usize,
    pub trace: Option<Vec<TraceRow>>,
}

/// Solver failure together with the partial log.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveFailure {
    pub error: EllipsoidError,
    pub iterations_used: usize,
    pub best: Option<BestPoint>,
    pub trace: Vec<TraceRow>,
}

impl fmt::Display for SolveFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "solver failed after {} iterations: {}", self.iterations_used, self.error)
    }
}

impl std::error::Error for SolveFailure {}

struct Tracer {
    rows: Option<Vec<TraceRow>>,
}

impl Tracer {
    fn record(&mut self, iter: usize, kind: StepKind, before: &Ellipsoid, after: &Ellipsoid, best: &Option<BestPoint>) {
        let Some(rows) = self.rows.as_mut() else { return };
        let ld0 = Lu::new(before.shape()).log_abs_determinant();
        let ld1 = Lu::new(after.shape()).log_abs_determinant();
        let s = svd_jacobi(after.shape()).s;
        rows.push(TraceRow {
            iter,
            kind,
            det_ratio: (ld1 - ld0).exp(),
            sigma_min: *s.last().unwrap(),
            sigma_max: s[0],
            best_cost: best.as_ref().map(|b| b.cost),
        });
    }
}

/// Ellipsoid method with corrective steps and widening.
///
/// Starts from `B_R(init_center)`. Each iteration either applies a corrective
/// step (when the Frobenius screen and a power-iteration confirmation both
/// exceed `sigma_max_trigger`) or queries the oracle, updates the incumbent
/// and cuts. The loop stops early once a feasible point is known and
/// `σ_min(B)` drops below `sigma_min_floor`.
pub fn solve(p: &SocpProblem, cfg: &SolverConfig) -> Result<SolverOutcome, SolveFailure> {
    let n = p.dim();
    let fail = |error, iterations_used, best: Option<BestPoint>, tracer: Tracer| SolveFailure {
        error,
        iterations_used,
        best,
        trace: tracer.rows.unwrap_or_default(),
    };
    let mut tracer = Tracer { rows: cfg.record_trace.then(Vec::new) };
    if n < 2 {
        return Err(fail(EllipsoidError::DimensionTooSmall(n), 0, None, tracer));
    }
    if let Err(e) = cfg.validate(n) {
        return Err(fail(e, 0, None, tracer));
    }

    let mut ell = Ellipsoid::ball(cfg.init_center.clone(), cfg.big_r);
    let mut best: Option<BestPoint> = None;
    let mut corrective_steps = 0;
    let mut status = None;
    let mut used = 0;

    for iter in 0..cfg.budget {
        used = iter + 1;
        if ell.shape().frobenius_norm() > cfg.sigma_max_trigger {
            let pair = top_singular_pair(ell.shape());
            if pair.sigma > cfg.sigma_max_trigger {
                let next = match ell.corrective_step_with(&pair, cfg.big_r, &cfg.ball_center) {
                    Ok(e) => e.widened(cfg.lambda),
                    Err(e) => return Err(fail(e, used, best, tracer)),
                };
                tracer.record(iter, StepKind::Corrective, &ell, &next, &best);
                ell = next;
                corrective_steps += 1;
                continue;
            }
        }

        let (kind, e) = match separation_oracle(p, ell.center()) {
            Ok(x) => x,
            Err(EllipsoidError::ZeroCutVector) if feasibility(p, ell.center()).feasible => {
                // zero cost gradient: every feasible point is optimal
                let c = ell.center().clone();
                let better = best.as_ref().is_none_or(|b| cost(p, &c) < b.cost);
                if better {
                    best = Some(BestPoint { cost: cost(p, &c), point: c });
                }
                status = Some(SolverStatus::EpsilonOptimal);
                break;
            }
            Err(e) => return Err(fail(e, used, best, tracer)),
        };
        if kind == CutKind::FeasibleCostCut {
            let c = ell.center();
            let fc = cost(p, c);
            if best.as_ref().is_none_or(|b| fc < b.cost) {
                best = Some(BestPoint { point: c.clone(), cost: fc });
            }
        }
        let next = match ell.cut_update(&e, cfg.lambda) {
            Ok(x) => x,
            Err(err) => return Err(fail(err, used, best, tracer)),
        };
        let step = match kind {
            CutKind::FeasibleCostCut => StepKind::CostCut,
            CutKind::InfeasibleConstraintCut => StepKind::ConstraintCut,
        };
        tracer.record(iter, step, &ell, &next, &best);
        ell = next;
        if !ell.shape().is_finite() || !ell.center().is_finite() {
            return Err(fail(EllipsoidError::SingularShape, used, best, tracer));
        }

        if best.is_some() && cfg.sigma_min_floor > 0.0 && min_singular_estimate(ell.shape()) < cfg.sigma_min_floor {
            status = Some(SolverStatus::EarlyFlatStop);
            break;
        }
    }

    let status = status.unwrap_or(if best.is_some() {
        SolverStatus::EpsilonOptimal
    } else {
        SolverStatus::NoFeasiblePointFound
    });
    Ok(SolverOutcome { status, best, iterations_used: used, corrective_steps, trace: tracer.rows })
}

/// Writes `iter,kind,det_ratio,sigma_min,sigma_max,best_cost` rows.
pub fn write_trace_csv<W: Write>(rows: &[TraceRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["iter", "kind", "det_ratio", "sigma_min", "sigma_max", "best_cost"])?;
    for r in rows {
        w.write_record([
            r.iter.to_string(),
            r.kind.as_str().to_string(),
            format!("{:e}", r.det_ratio),
            format!("{:e}", r.sigma_min),
            format!("{:e}", r.sigma_max),
            r.best_cost.map(|c| c.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
