//! Lowered model → parameterized cone program over `y = [z; t]`.

use super::affine::Affine;
use super::semantic::{LoweredConstraint, LoweredCost, Variable};
use super::{MpcError, MpcModel};
use crate::certify::{
    compute_big_r, compute_v_linear, eliminate_equalities, extreme_polytopes, inscribed_ball, project_inequalities,
    Certificate, CertificateInputs, ParamPolytope, Projection,
};
use crate::ellipsoid::{solve, SolveFailure, SolverConfig, SolverOutcome, TraceRow};
use crate::linalg::{DenseMatrix, DenseVector};
use crate::socp::{ConeConstraint, SocpProblem};

#[derive(Debug, Clone, PartialEq)]
pub struct CompileOptions {
    /// Recompute `r`, `R`, `V` from the family and record them as notes.
    pub recompute: bool,
    /// Radius of the parameter ball; defaults to `V / n_t`.
    pub r_o: Option<f64>,
    /// Upper bound on each epigraph variable; defaults to `2√(max n_i)·V/n_t`.
    pub t_max: Option<f64>,
    /// Alternative per-column norm bound on the bounded block, reported as
    /// `R_bounded_alt`.
    pub alt_column_norm_bound: Option<f64>,
}

impl Default for CompileOptions {
    fn default() -> Self {
        Self { recompute: true, r_o: None, t_max: None, alt_column_norm_bound: None }
    }
}

/// `‖a y + b0 + bo x_o‖ ≤ cᵀy + d0 + d_oᵀx_o`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamCone {
    pub a: DenseMatrix,
    pub b0: DenseVector,
    pub bo: DenseMatrix,
    pub c: DenseVector,
    pub d0: f64,
    pub d_o: DenseVector,
}

impl ParamCone {
    pub fn size(&self) -> usize {
        self.a.rows()
    }

    pub fn at(&self, x_o: &DenseVector) -> ConeConstraint {
        let d = self.d0 + self.d_o.dot(x_o);
        if self.size() == 0 {
            return ConeConstraint::linear(self.c.clone(), d);
        }
        let b = self.b0.add(&self.bo.mul_vec(x_o));
        ConeConstraint::new(self.a.clone(), b, self.c.clone(), d).expect("shapes fixed at compile time")
    }
}

/// Values recomputed from the family, next to the declared ones.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Recomputed {
    pub r: Option<f64>,
    pub r_center: Option<DenseVector>,
    pub big_r_bounded: Option<f64>,
    pub big_r_alt: Option<f64>,
    pub big_r_with_epigraph: Option<f64>,
    pub u_bound: Option<f64>,
    pub bounded_block: Vec<String>,
    pub v: Option<f64>,
    /// Reasons for values that could not be computed.
    pub failures: Vec<(String, String)>,
}

#[derive(Debug, Clone)]
pub struct CompiledFamily {
    pub variables: Vec<Variable>,
    pub input_dim: usize,
    pub projection: Projection,
    pub b_eq: DenseVector,
    /// Linear inequalities over `z`.
    pub polytope: ParamPolytope,
    /// Linear rows, then norm constraints, then epigraph cones, then `t ≤ t_max`.
    pub cones: Vec<ParamCone>,
    pub cost_f: DenseVector,
    pub n_z: usize,
    pub n_t: usize,
    pub t_max: f64,
    pub r_o: f64,
    pub certificate: Certificate,
    pub recomputed: Option<Recomputed>,
    cost: LoweredCost,
    constraints: Vec<LoweredConstraint>,
    output: Option<Affine>,
}

#[derive(Debug, Clone)]
pub struct InstanceSolution {
    /// Output expression at the recovered decision (empty if no output).
    pub u_applied: DenseVector,
    pub outcome: SolverOutcome,
    /// Recovered full decision vector `X`.
    pub x: DenseVector,
    /// Solver point `[z; t]`.
    pub y: DenseVector,
    /// `‖x_o‖ > r_o`: outside the certified parameter ball.
    pub outside_ball: bool,
    /// Objective of the original model at `X`.
    pub objective: f64,
}

/// Projected pieces of affine rows: `lin·M`, `lin·A1·b_eq + cst`, `lin·A2 + inp`.
/// Rows of `lin·M` that cancel to rounding level are set to exact zeros.
fn project_rows(e: &Affine, proj: &Projection, b_eq: &DenseVector) -> (DenseMatrix, DenseVector, DenseMatrix) {
    let mut a = e.lin.matmul(&proj.m);
    let lin_norms = e.lin.row_norms();
    let a_norms = a.row_norms();
    for i in 0..a.rows() {
        if a_norms[i] <= 1e-12 * lin_norms[i] {
            for j in 0..a.cols() {
                a.set(i, j, 0.0);
            }
        }
    }
    let b0 = e.lin.mul_vec(&proj.a1.mul_vec(b_eq)).add(&DenseVector::from_raw(e.cst.clone()));
    let bo = e.lin.matmul(&proj.a2).add(&e.inp);
    (a, b0, bo)
}

fn pad_cols(m: &DenseMatrix, n: usize) -> DenseMatrix {
    DenseMatrix::from_fn(m.rows(), n, |i, j| if j < m.cols() { m.get(i, j) } else { 0.0 })
}

fn pad(v: &DenseVector, n: usize) -> DenseVector {
    DenseVector::from_fn(n, |i| if i < v.len() { v[i] } else { 0.0 })
}

fn stack_rows(rows: &[Affine], n_x: usize, n_o: usize) -> Affine {
    if rows.is_empty() {
        return Affine {
            rows: 0,
            cols: 1,
            lin: DenseMatrix::zeros(0, n_x),
            inp: DenseMatrix::zeros(0, n_o),
            cst: Vec::new(),
        };
    }
    Affine::vcat(rows)
}

/// Two-sided single-entry bounds on each entry of `X`.
fn entry_bounds(constraints: &[LoweredConstraint], n_x: usize) -> Vec<(Option<f64>, Option<f64>)> {
    let mut out = vec![(None, None); n_x];
    for c in constraints {
        for e in &c.inequalities {
            if e.inp.max_abs() != 0.0 {
                continue;
            }
            let nz: Vec<usize> = (0..n_x).filter(|&j| e.lin.get(0, j) != 0.0).collect();
            let [j] = nz.as_slice() else { continue };
            let s = e.lin.get(0, *j);
            let v = -e.cst[0] / s;
            let slot = &mut out[*j];
            if s > 0.0 {
                slot.1 = Some(slot.1.map_or(v, |u: f64| u.min(v)));
            } else {
                slot.0 = Some(slot.0.map_or(v, |l: f64| l.max(v)));
            }
        }
    }
    out
}

/// Compiles with recomputation enabled.
pub fn compile(model: &MpcModel) -> Result<CompiledFamily, MpcError> {
    compile_with(model, &CompileOptions::default())
}

pub fn compile_with(model: &MpcModel, opts: &CompileOptions) -> Result<CompiledFamily, MpcError> {
    let n_x = model.n_x();
    let n_o = model.input.1;

    // split equalities into parameter pinning and plain equalities
    let mut pins: Vec<Option<DenseVector>> = vec![None; n_o];
    let mut eq_rows: Vec<Affine> = Vec::new();
    let mut ineq_rows: Vec<Affine> = Vec::new();
    for c in &model.constraints {
        for e in &c.equalities {
            if e.inp.max_abs() == 0.0 {
                eq_rows.push(e.clone());
                continue;
            }
            let nz: Vec<usize> = (0..n_o).filter(|&i| e.inp.get(0, i) != 0.0).collect();
            let [i] = nz.as_slice() else {
                return Err(MpcError::Unsupported(format!(
                    "constraint {} couples several input entries in one equality",
                    c.name
                )));
            };
            if e.cst[0] != 0.0 {
                return Err(MpcError::Unsupported(format!(
                    "constraint {} pins the input with a constant offset",
                    c.name
                )));
            }
            if pins[*i].is_some() {
                return Err(MpcError::Unsupported(format!(
                    "input entry {} is pinned more than once (constraint {})",
                    i + 1,
                    c.name
                )));
            }
            let t = e.inp.get(0, *i);
            pins[*i] = Some(DenseVector::from_fn(n_x, |j| -e.lin.get(0, j) / t));
        }
        ineq_rows.extend(c.inequalities.iter().cloned());
    }
    let pinned: Vec<usize> = (0..n_o).filter(|&i| pins[i].is_some()).collect();
    let s = DenseMatrix::from_fn(pinned.len(), n_x, |k, j| pins[pinned[k]].as_ref().unwrap()[j]);
    let eq = stack_rows(&eq_rows, n_x, n_o);
    let b_eq = DenseVector::from_raw(eq.cst.iter().map(|x| -x).collect());
    let mut proj = eliminate_equalities(&eq.lin, &b_eq, &s)?;
    // widen A2 so that every input entry owns a column
    let a2 = &proj.a2;
    proj.a2 = DenseMatrix::from_fn(n_x, n_o, |j, i| match pinned.iter().position(|&p| p == i) {
        Some(k) => a2.get(j, k),
        None => 0.0,
    });

    let n_z = proj.n_z;
    let n_t = model.cost.norms.len();
    let n = n_z + n_t;
    let info = model.information;

    let ineq = stack_rows(&ineq_rows, n_x, n_o);
    let b_ineq = DenseVector::from_raw(ineq.cst.iter().map(|x| -x).collect());
    let mut pp = project_inequalities(&ineq.lin, &b_ineq, &proj, &b_eq, 0.0)?;
    pp.q = pp.q.sub(&ineq.inp);
    pp.a_f = project_rows(&ineq, &proj, &b_eq).0;

    let mut cones = Vec::new();
    for i in 0..pp.a_f.rows() {
        cones.push(ParamCone {
            a: DenseMatrix::zeros(0, n),
            b0: DenseVector::zeros(0),
            bo: DenseMatrix::zeros(0, n_o),
            c: pad(&pp.a_f.row_vector(i).scaled(-1.0), n),
            d0: pp.b_o[i],
            d_o: pp.q.row_vector(i),
        });
    }
    for c in &model.constraints {
        for k in &c.cones {
            let (a, b0, bo) = project_rows(&k.arg, &proj, &b_eq);
            let (ca, cb0, cbo) = project_rows(&k.bound, &proj, &b_eq);
            cones.push(ParamCone {
                a: pad_cols(&a, n),
                b0,
                bo,
                c: pad(&ca.row_vector(0), n),
                d0: cb0[0],
                d_o: cbo.row_vector(0),
            });
        }
    }
    let mut max_size = 1;
    for (k, (_, arg)) in model.cost.norms.iter().enumerate() {
        let (a, b0, bo) = project_rows(arg, &proj, &b_eq);
        max_size = max_size.max(a.rows());
        cones.push(ParamCone {
            a: pad_cols(&a, n),
            b0,
            bo,
            c: DenseVector::unit(n, n_z + k),
            d0: 0.0,
            d_o: DenseVector::zeros(n_o),
        });
    }

    let t_max = match (opts.t_max, info.v) {
        (Some(t), _) => t,
        _ if n_t == 0 => 0.0,
        (None, Some(v)) => 2.0 * (max_size as f64).sqrt() * v / n_t as f64,
        (None, None) => return Err(MpcError::MissingInformation("V".into())),
    };
    for k in 0..n_t {
        cones.push(ParamCone {
            a: DenseMatrix::zeros(0, n),
            b0: DenseVector::zeros(0),
            bo: DenseMatrix::zeros(0, n_o),
            c: DenseVector::unit(n, n_z + k).scaled(-1.0),
            d0: t_max,
            d_o: DenseVector::zeros(n_o),
        });
    }

    let lin_cost = proj.m.tr_mul_vec(&model.cost.linear.lin.row_vector(0));
    let coefs = DenseVector::from_fn(n_t, |k| model.cost.norms[k].0);
    let cost_f = lin_cost.concat(&coefs);

    let r_o = match (opts.r_o, info.v) {
        (Some(r), _) => r,
        (None, Some(v)) if n_t > 0 => v / n_t as f64,
        _ => return Err(MpcError::MissingInformation("r_o (parameter radius)".into())),
    };
    pp.r_o = r_o;

    let mut fam = CompiledFamily {
        variables: model.variables.clone(),
        input_dim: n_o,
        projection: proj,
        b_eq,
        polytope: pp,
        cones,
        cost_f,
        n_z,
        n_t,
        t_max,
        r_o,
        certificate: placeholder_certificate(),
        recomputed: None,
        cost: model.cost.clone(),
        constraints: model.constraints.clone(),
        output: model.output.clone(),
    };

    let rec = if opts.recompute { Some(fam.recompute(opts)) } else { None };
    let pick = |declared: Option<f64>, computed: Option<f64>, name: &str| {
        declared.or(computed).ok_or_else(|| MpcError::MissingInformation(name.to_string()))
    };
    let r = pick(info.r, rec.as_ref().and_then(|x| x.r), "r")?;
    let big_r = pick(info.big_r, rec.as_ref().and_then(|x| x.big_r_with_epigraph.or(x.big_r_bounded)), "R")?;
    let v = pick(info.v, rec.as_ref().and_then(|x| x.v), "V")?;
    let eps = info.eps.ok_or_else(|| MpcError::MissingInformation("eps".into()))?;
    let lambda = match info.lambda {
        Some(l) => l,
        None if opts.recompute => 1.0,
        None => return Err(MpcError::MissingInformation("lambda".into())),
    };
    let mut cert = Certificate::assemble(&CertificateInputs {
        n,
        r,
        big_r,
        v,
        epsilon: eps,
        lambda,
        z_bar2: DenseVector::zeros(n),
        x_c_norm: 0.0,
    })?;
    cert.note("r_o", r_o);
    cert.note("t_max", t_max);
    cert.note("n_z", n_z as i64);
    cert.note("n_t", n_t as i64);
    if info.lambda.is_none() {
        cert.note("lambda_defaulted", true);
    }
    if let Some(rec) = &rec {
        let num = |x: Option<f64>| x.map_or(crate::certify::NoteValue::Text("unavailable".into()), Into::into);
        cert.note("r_recomputed", num(rec.r));
        cert.note("R_bounded", num(rec.big_r_bounded));
        cert.note("R_bounded_alt", num(rec.big_r_alt));
        cert.note("R_with_epigraph", num(rec.big_r_with_epigraph));
        cert.note("V_recomputed", num(rec.v));
        cert.note("u_bound", num(rec.u_bound));
        if let Some(alt) = opts.alt_column_norm_bound {
            cert.note("u_bound_alt_column_norm", alt);
        }
        cert.note("bounded_block", rec.bounded_block.join(","));
        for (what, why) in &rec.failures {
            cert.note(&format!("{what}_failure"), why.as_str());
        }
    }
    fam.certificate = cert;
    fam.recomputed = rec;
    Ok(fam)
}

fn placeholder_certificate() -> Certificate {
    Certificate::assemble(&CertificateInputs {
        n: 1,
        r: 1.0,
        big_r: 1.0,
        v: 1.0,
        epsilon: 1.0,
        lambda: 1.0,
        z_bar2: DenseVector::zeros(1),
        x_c_norm: 0.0,
    })
    .expect("constant inputs")
}

impl CompiledFamily {
    /// Dimension of the solver variable `[z; t]`.
    pub fn dim(&self) -> usize {
        self.n_z + self.n_t
    }

    pub fn n_x(&self) -> usize {
        self.projection.n_x
    }

    pub fn num_groups(&self) -> usize {
        self.constraints.len()
    }

    pub fn group_names(&self) -> Vec<&str> {
        self.constraints.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn variable(&self, name: &str) -> Option<&Variable> {
        self.variables.iter().find(|v| v.name == name)
    }

    /// Output dimension (0 when the output section is empty).
    pub fn output_dim(&self) -> usize {
        self.output.as_ref().map_or(0, Affine::len)
    }

    /// Cone program for parameter `x_o`.
    pub fn instance(&self, x_o: &DenseVector) -> Result<SocpProblem, MpcError> {
        self.check_param(x_o)?;
        let cones = self.cones.iter().map(|c| c.at(x_o)).collect();
        SocpProblem::new(self.cost_f.clone(), cones).map_err(|e| MpcError::Unsupported(e.to_string()))
    }

    fn check_param(&self, x_o: &DenseVector) -> Result<(), MpcError> {
        if x_o.len() != self.input_dim {
            return Err(MpcError::Solve {
                x_o: x_o.as_slice().to_vec(),
                detail: format!("input has length {}, expected {}", x_o.len(), self.input_dim),
            });
        }
        Ok(())
    }

    /// `X` from a solver point `y = [z; t]`.
    pub fn recover(&self, x_o: &DenseVector, y: &DenseVector) -> DenseVector {
        self.projection.reconstruct(&self.b_eq, x_o, &y.slice(0, self.n_z))
    }

    /// Epigraph values `t_k = ‖arg_k‖` at `X`, for mapping model points into `y`.
    pub fn lift(&self, x: &DenseVector, x_o: &DenseVector) -> DenseVector {
        let z = self.projection.m.tr_mul_vec(&x.sub(&self.projection.a1.mul_vec(&self.b_eq)).sub(&self.projection.a2.mul_vec(x_o)));
        let t = DenseVector::from_fn(self.n_t, |k| self.cost.norms[k].1.eval(x, x_o).two_norm());
        z.concat(&t)
    }

    pub fn output_at(&self, x: &DenseVector, x_o: &DenseVector) -> DenseVector {
        self.output.as_ref().map_or_else(|| DenseVector::zeros(0), |o| o.eval(x, x_o))
    }

    /// Objective of the original model at `X`.
    pub fn objective(&self, x: &DenseVector, x_o: &DenseVector) -> f64 {
        let norms: f64 = self.cost.norms.iter().map(|(c, a)| c * a.eval(x, x_o).two_norm()).sum();
        norms + self.cost.linear.eval(x, x_o)[0]
    }

    /// Largest violation of each constraint group at `(X, x_o)`.
    pub fn check_original(&self, x: &DenseVector, x_o: &DenseVector) -> Vec<(String, f64)> {
        self.constraints.iter().map(|c| (c.name.clone(), c.violation(x, x_o))).collect()
    }

    /// Solver configuration from the certificate: budget `N_λ` (safe).
    pub fn solver_config(&self) -> Result<SolverConfig, MpcError> {
        let c = &self.certificate;
        SolverConfig::new(self.dim(), c.epsilon, c.r, c.big_r, c.v)
            .and_then(|cfg| cfg.with_lambda(c.lambda))
            .map_err(|e| MpcError::Solve { x_o: Vec::new(), detail: e.to_string() })
    }

    pub fn solve_instance(&self, x_o: &DenseVector) -> Result<InstanceSolution, MpcError> {
        let cfg = self.solver_config()?;
        self.solve_instance_with(x_o, &cfg).map_err(|(e, _)| e)
    }

    /// Solves with an explicit configuration; on failure also returns the
    /// partial trace.
    pub fn solve_instance_with(
        &self,
        x_o: &DenseVector,
        cfg: &SolverConfig,
    ) -> Result<InstanceSolution, (MpcError, Vec<TraceRow>)> {
        let fail = |detail: String, trace: Vec<TraceRow>| {
            (MpcError::Solve { x_o: x_o.as_slice().to_vec(), detail }, trace)
        };
        let p = self.instance(x_o).map_err(|e| (e, Vec::new()))?;
        let outcome = match solve(&p, cfg) {
            Ok(o) => o,
            Err(SolveFailure { error, iterations_used, trace, .. }) => {
                return Err(fail(format!("{error} after {iterations_used} iterations"), trace));
            }
        };
        let Some(best) = outcome.best.clone() else {
            let trace = outcome.trace.clone().unwrap_or_default();
            return Err(fail(format!("{} after {} iterations", outcome.status, outcome.iterations_used), trace));
        };
        let x = self.recover(x_o, &best.point);
        Ok(InstanceSolution {
            u_applied: self.output_at(&x, x_o),
            objective: self.objective(&x, x_o),
            outside_ball: x_o.two_norm() > self.r_o,
            x,
            y: best.point,
            outcome,
        })
    }

    /// Linear inner approximation of every cone over `y`: each row of a cone
    /// of size `n_i` becomes `±√n_i·(a_j y + b_j) ≤ cᵀy + d`.
    pub fn relaxed_family(&self) -> ParamPolytope {
        let n = self.dim();
        let n_o = self.input_dim;
        let mut rows: Vec<DenseVector> = Vec::new();
        let mut b = Vec::new();
        let mut q: Vec<DenseVector> = Vec::new();
        for k in &self.cones {
            if k.size() == 0 {
                rows.push(k.c.scaled(-1.0));
                b.push(k.d0);
                q.push(k.d_o.clone());
                continue;
            }
            let s = (k.size() as f64).sqrt();
            for j in 0..k.size() {
                for sign in [1.0, -1.0] {
                    rows.push(k.a.row_vector(j).scaled(sign * s).sub(&k.c));
                    b.push(k.d0 - sign * s * k.b0[j]);
                    q.push(k.d_o.sub(&k.bo.row_vector(j).scaled(sign * s)));
                }
            }
        }
        ParamPolytope {
            a_f: DenseMatrix::from_fn(rows.len(), n, |i, j| rows[i][j]),
            b_o: DenseVector::from_raw(b),
            q: DenseMatrix::from_fn(q.len(), n_o, |i, j| q[i][j]),
            r_o: self.r_o,
        }
    }

    fn recompute(&self, opts: &CompileOptions) -> Recomputed {
        let mut rec = Recomputed::default();
        let (pmin, _) = extreme_polytopes(&self.relaxed_family());
        match inscribed_ball(&pmin.a, &pmin.b) {
            Ok((c, r)) => {
                rec.r = Some(r);
                rec.r_center = Some(c);
            }
            Err(e) => rec.failures.push(("r".into(), e.to_string())),
        }

        let bounds = entry_bounds(&self.constraints, self.n_x());
        let mut idx = Vec::new();
        let mut sq = 0.0;
        for v in &self.variables {
            let ok = (0..v.len()).all(|k| matches!(bounds[v.offset + k], (Some(_), Some(_))));
            if !ok {
                continue;
            }
            rec.bounded_block.push(v.name.clone());
            for k in 0..v.len() {
                let (lo, hi) = bounds[v.offset + k];
                sq += lo.unwrap().abs().max(hi.unwrap().abs()).powi(2);
                idx.push(v.offset + k);
            }
        }
        if idx.is_empty() {
            rec.failures.push(("R".into(), "no variable is bounded entrywise on both sides".into()));
        } else {
            let p = &self.projection;
            let m2 = p.m.select_rows(&idx);
            let a21 = p.a1.select_rows(&idx);
            let a22 = p.a2.select_rows(&idx);
            let u_bound = sq.sqrt();
            rec.u_bound = Some(u_bound);
            match compute_big_r(&m2, &a21, &a22, &self.b_eq, u_bound, self.r_o) {
                Ok(r) => {
                    rec.big_r_bounded = Some(r);
                    rec.big_r_with_epigraph = Some((r * r + self.n_t as f64 * self.t_max * self.t_max).sqrt());
                }
                Err(e) => rec.failures.push(("R".into(), e.to_string())),
            }
            if let Some(c) = opts.alt_column_norm_bound {
                let cols: usize = self
                    .variables
                    .iter()
                    .filter(|v| rec.bounded_block.contains(&v.name))
                    .map(|v| v.cols)
                    .sum();
                if let Ok(r) = compute_big_r(&m2, &a21, &a22, &self.b_eq, c * (cols as f64).sqrt(), self.r_o) {
                    rec.big_r_alt = Some(r);
                }
            }
        }

        if self.n_t > 0 {
            let lin = self.cost.linear.lin.max_abs() != 0.0;
            if lin {
                rec.failures.push(("V".into(), "mixed norm and linear cost".into()));
            } else {
                rec.v = Some(self.n_t as f64 * self.t_max * self.cost.norms.iter().map(|n| n.0).fold(0.0, f64::max));
            }
        } else {
            let mut pp = self.polytope.clone();
            pp.r_o = self.r_o;
            match compute_v_linear(&pp, &self.projection, &self.cost.linear.lin.row_vector(0), &self.b_eq) {
                Ok(v) => rec.v = Some(v),
                Err(e) => rec.failures.push(("V".into(), e.to_string())),
            }
        }
        rec
    }
}
