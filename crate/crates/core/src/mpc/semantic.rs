//! Name resolution, shape checking and lowering of a parsed program to
//! affine rows and cones over the flattened decision vector.

use indexmap::IndexMap;

use super::affine::Affine;
use super::ast::{Expr, IndexArg, OutputSpec, Program, Range, Rel};
use super::parser::{Pos, SourceMap};
use super::MpcError;
use crate::linalg::{DenseMatrix, DenseVector};

/// Decision variable with its offset in `X` (column-major per variable,
/// declaration order).
#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
}

impl Variable {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Position of entry `(i, j)` (0-based) in `X`.
    pub fn index(&self, i: usize, j: usize) -> usize {
        self.offset + i + j * self.rows
    }
}

/// The five scalars of the Information section.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Information {
    pub r: Option<f64>,
    pub big_r: Option<f64>,
    pub v: Option<f64>,
    pub eps: Option<f64>,
    pub lambda: Option<f64>,
}

/// `‖arg‖₂ ≤ bound` with `arg` a vector and `bound` a scalar.
#[derive(Debug, Clone, PartialEq)]
pub struct LoweredCone {
    pub arg: Affine,
    pub bound: Affine,
}

/// One named constraint statement after expansion of its range.
#[derive(Debug, Clone, PartialEq)]
pub struct LoweredConstraint {
    pub name: String,
    /// Rows `e(X, x_o) = 0`.
    pub equalities: Vec<Affine>,
    /// Rows `e(X, x_o) ≤ 0`.
    pub inequalities: Vec<Affine>,
    pub cones: Vec<LoweredCone>,
}

impl LoweredConstraint {
    /// Largest violation at `(X, x_o)`: `|e|` for equalities, `max(e, 0)` otherwise.
    pub fn violation(&self, x: &DenseVector, x_o: &DenseVector) -> f64 {
        let mut worst: f64 = 0.0;
        for e in &self.equalities {
            worst = worst.max(e.eval(x, x_o)[0].abs());
        }
        for e in &self.inequalities {
            worst = worst.max(e.eval(x, x_o)[0]);
        }
        for c in &self.cones {
            worst = worst.max(c.arg.eval(x, x_o).two_norm() - c.bound.eval(x, x_o)[0]);
        }
        worst
    }
}

/// Cost `Σ coef_k ‖arg_k‖ + linear`, with every `coef_k > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LoweredCost {
    pub norms: Vec<(f64, Affine)>,
    pub linear: Affine,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lowered {
    pub cost: LoweredCost,
    pub constraints: Vec<LoweredConstraint>,
    /// `None` when the output section is present but empty.
    pub output: Option<Affine>,
}

pub struct Resolved {
    pub input: (String, usize),
    pub constants: IndexMap<String, DenseMatrix>,
    pub variables: Vec<Variable>,
    pub information: Information,
    pub lowered: Lowered,
}

struct Scope<'a> {
    constants: &'a IndexMap<String, DenseMatrix>,
    variables: &'a [Variable],
    input: Option<(&'a str, usize)>,
    n_x: usize,
    bindings: Vec<(String, i64)>,
    context: String,
    pos: Pos,
}

/// Linear combination of norms plus an affine part.
struct Convex {
    norms: Vec<(f64, Affine)>,
    aff: Affine,
}

fn scale_convex(mut x: Convex, s: f64) -> Convex {
    for n in &mut x.norms {
        n.0 *= s;
    }
    x.aff = x.aff.scaled(s);
    x
}

fn contains_norm(e: &Expr) -> bool {
    match e {
        Expr::Norm(_) => true,
        Expr::Neg(a) => contains_norm(a),
        Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => contains_norm(a) || contains_norm(b),
        Expr::Sum { body, .. } => contains_norm(body),
        Expr::Matrix(rows) => rows.iter().flatten().any(contains_norm),
        Expr::Index(_, args) => args.iter().any(|a| matches!(a, IndexArg::At(e) if contains_norm(e))),
        Expr::Num(_) | Expr::Ident(_) => false,
    }
}

impl<'a> Scope<'a> {
    fn n_o(&self) -> usize {
        self.input.map_or(0, |i| i.1)
    }

    fn undefined(&self, name: &str) -> MpcError {
        MpcError::UndefinedIdentifier {
            name: name.to_string(),
            context: self.context.clone(),
            line: self.pos.line,
            col: self.pos.col,
        }
    }

    fn mismatch(&self, op: &str, left: (usize, usize), right: (usize, usize)) -> MpcError {
        MpcError::DimensionMismatch {
            context: self.context.clone(),
            op: op.to_string(),
            left,
            right,
            line: self.pos.line,
            col: self.pos.col,
        }
    }

    fn invalid(&self, detail: String) -> MpcError {
        MpcError::Invalid { context: self.context.clone(), detail, line: self.pos.line, col: self.pos.col }
    }

    fn nonconvex(&self, detail: &str) -> MpcError {
        MpcError::NonConvexConstruct {
            context: self.context.clone(),
            detail: detail.to_string(),
            line: self.pos.line,
            col: self.pos.col,
        }
    }

    fn scalar(&self, x: f64) -> Affine {
        Affine::scalar(x, self.n_x, self.n_o())
    }

    fn integer(&mut self, e: &Expr, what: &str) -> Result<i64, MpcError> {
        let v = self.eval(e)?;
        if !v.is_scalar() || !v.is_constant() {
            return Err(self.invalid(format!("{what} must be a constant scalar")));
        }
        let x = v.cst[0];
        if (x - x.round()).abs() > 1e-9 {
            return Err(self.invalid(format!("{what} must be an integer, got {x}")));
        }
        Ok(x.round() as i64)
    }

    fn range_values(&mut self, r: &Range) -> Result<Vec<i64>, MpcError> {
        let lo = self.integer(&r.lo, "range start")?;
        let hi = self.integer(&r.hi, "range end")?;
        Ok((lo..=hi).collect())
    }

    fn with_binding<T>(&mut self, var: &str, k: i64, f: impl FnOnce(&mut Self) -> Result<T, MpcError>) -> Result<T, MpcError> {
        self.bindings.push((var.to_string(), k));
        let out = f(self);
        self.bindings.pop();
        out
    }

    /// Whole named object as an affine value.
    fn lookup(&self, name: &str) -> Result<Affine, MpcError> {
        if let Some((_, k)) = self.bindings.iter().rev().find(|(n, _)| n == name) {
            return Ok(self.scalar(*k as f64));
        }
        if let Some(v) = self.variables.iter().find(|v| v.name == name) {
            let n = v.len();
            let mut lin = DenseMatrix::zeros(n, self.n_x);
            for k in 0..n {
                lin.set(k, v.offset + k, 1.0);
            }
            return Ok(Affine { rows: v.rows, cols: v.cols, lin, inp: DenseMatrix::zeros(n, self.n_o()), cst: vec![0.0; n] });
        }
        if let Some((iname, dim)) = self.input {
            if iname == name {
                return Ok(Affine {
                    rows: dim,
                    cols: 1,
                    lin: DenseMatrix::zeros(dim, self.n_x),
                    inp: DenseMatrix::identity(dim),
                    cst: vec![0.0; dim],
                });
            }
        }
        if let Some(m) = self.constants.get(name) {
            return Ok(Affine::constant(m, self.n_x, self.n_o()));
        }
        Err(self.undefined(name))
    }

    fn index_set(&mut self, arg: &IndexArg, extent: usize, name: &str) -> Result<Vec<usize>, MpcError> {
        match arg {
            IndexArg::All => Ok((0..extent).collect()),
            IndexArg::At(e) => {
                let k = self.integer(e, "index")?;
                if k < 1 || k as usize > extent {
                    return Err(self.invalid(format!("index {k} out of range 1..{extent} for '{name}'")));
                }
                Ok(vec![k as usize - 1])
            }
        }
    }

    fn eval(&mut self, e: &Expr) -> Result<Affine, MpcError> {
        match e {
            Expr::Num(x) => Ok(self.scalar(*x)),
            Expr::Ident(name) => self.lookup(name),
            Expr::Index(name, args) => {
                let base = self.lookup(name)?;
                let (rows, cols) = base.shape();
                let (ri, ci) = match args.as_slice() {
                    [a] if cols == 1 => (self.index_set(a, rows, name)?, vec![0]),
                    [a] if rows == 1 => (vec![0], self.index_set(a, cols, name)?),
                    [a, b] => (self.index_set(a, rows, name)?, self.index_set(b, cols, name)?),
                    _ => {
                        return Err(self.invalid(format!(
                            "'{name}' is {rows}x{cols} and cannot take {} indices",
                            args.len()
                        )))
                    }
                };
                let idx: Vec<usize> = ci.iter().flat_map(|&j| ri.iter().map(move |&i| i + j * rows)).collect();
                Ok(base.pick(&idx, ri.len(), ci.len()))
            }
            Expr::Neg(a) => Ok(self.eval(a)?.scaled(-1.0)),
            Expr::Add(a, b) | Expr::Sub(a, b) => {
                let x = self.eval(a)?;
                let y = self.eval(b)?;
                let op = if matches!(e, Expr::Add(..)) { "+" } else { "-" };
                let (x, y) = self.align(op, x, y)?;
                Ok(if op == "+" { x.add(&y) } else { x.sub(&y) })
            }
            Expr::Mul(a, b) => {
                let x = self.eval(a)?;
                let y = self.eval(b)?;
                self.multiply(x, y)
            }
            Expr::Matrix(rows) => {
                if rows.is_empty() {
                    return Ok(Affine::constant(&DenseMatrix::zeros(0, 0), self.n_x, self.n_o()));
                }
                let mut blocks = Vec::new();
                for row in rows {
                    let mut parts = Vec::new();
                    for entry in row {
                        parts.push(self.eval(entry)?);
                    }
                    for p in &parts[1..] {
                        if p.rows != parts[0].rows {
                            return Err(self.mismatch("horizontal concatenation", parts[0].shape(), p.shape()));
                        }
                    }
                    blocks.push(Affine::hcat(&parts));
                }
                for b in &blocks[1..] {
                    if b.cols != blocks[0].cols {
                        return Err(self.mismatch("vertical concatenation", blocks[0].shape(), b.shape()));
                    }
                }
                Ok(Affine::vcat(&blocks))
            }
            Expr::Norm(_) => Err(self.nonconvex("a norm can only appear in the objective or on the smaller side of '<='")),
            Expr::Sum { body, range } => {
                let mut acc: Option<Affine> = None;
                for k in self.range_values(range)? {
                    let term = self.with_binding(&range.var, k, |s| s.eval(body))?;
                    acc = Some(match acc {
                        None => term,
                        Some(a) => {
                            let (a, t) = self.align("+", a, term)?;
                            a.add(&t)
                        }
                    });
                }
                Ok(acc.unwrap_or_else(|| self.scalar(0.0)))
            }
        }
    }

    fn align(&self, op: &str, x: Affine, y: Affine) -> Result<(Affine, Affine), MpcError> {
        if x.shape() == y.shape() {
            Ok((x, y))
        } else if x.is_scalar() {
            Ok((x.broadcast(y.rows, y.cols), y))
        } else if y.is_scalar() {
            let (r, c) = x.shape();
            Ok((x, y.broadcast(r, c)))
        } else {
            Err(self.mismatch(op, x.shape(), y.shape()))
        }
    }

    fn multiply(&self, x: Affine, y: Affine) -> Result<Affine, MpcError> {
        let (xc, yc) = (x.is_constant(), y.is_constant());
        if !xc && !yc {
            return Err(self.nonconvex("product of two decision-dependent expressions"));
        }
        if x.is_scalar() && xc {
            return Ok(y.scaled(x.cst[0]));
        }
        if y.is_scalar() && yc {
            return Ok(x.scaled(y.cst[0]));
        }
        if x.cols != y.rows {
            return Err(self.mismatch("*", x.shape(), y.shape()));
        }
        if xc {
            Ok(y.left_mul(&x.to_matrix()))
        } else {
            Ok(x.right_mul(&y.to_matrix()))
        }
    }

    fn eval_convex(&mut self, e: &Expr) -> Result<Convex, MpcError> {
        if !contains_norm(e) {
            return Ok(Convex { norms: Vec::new(), aff: self.eval(e)? });
        }
        match e {
            Expr::Norm(a) => {
                if contains_norm(a) {
                    return Err(self.nonconvex("nested norms are not supported"));
                }
                let arg = self.eval(a)?.flatten();
                Ok(Convex { norms: vec![(1.0, arg)], aff: self.scalar(0.0) })
            }
            Expr::Neg(a) => Ok(scale_convex(self.eval_convex(a)?, -1.0)),
            Expr::Add(a, b) | Expr::Sub(a, b) => {
                let x = self.eval_convex(a)?;
                let mut y = self.eval_convex(b)?;
                if matches!(e, Expr::Sub(..)) {
                    y = scale_convex(y, -1.0);
                }
                self.add_convex(x, y)
            }
            Expr::Mul(a, b) => {
                let (c, other) = if contains_norm(a) { (b, a) } else { (a, b) };
                if contains_norm(c) {
                    return Err(self.nonconvex("product of two norms"));
                }
                let k = self.eval(c)?;
                if !(k.is_scalar() && k.is_constant()) {
                    return Err(self.nonconvex("a norm may only be scaled by a constant scalar"));
                }
                let x = self.eval_convex(other)?;
                Ok(scale_convex(x, k.cst[0]))
            }
            Expr::Sum { body, range } => {
                let mut acc = Convex { norms: Vec::new(), aff: self.scalar(0.0) };
                for k in self.range_values(range)? {
                    let term = self.with_binding(&range.var, k, |s| s.eval_convex(body))?;
                    acc = self.add_convex(acc, term)?;
                }
                Ok(acc)
            }
            _ => Err(self.nonconvex("norms may not appear inside indices or matrix literals")),
        }
    }

    fn add_convex(&self, mut x: Convex, y: Convex) -> Result<Convex, MpcError> {
        let has_norms = !x.norms.is_empty() || !y.norms.is_empty();
        if has_norms && (!x.aff.is_scalar() || !y.aff.is_scalar()) {
            return Err(self.mismatch("+", x.aff.shape(), y.aff.shape()));
        }
        let (a, b) = self.align("+", x.aff, y.aff)?;
        x.aff = a.add(&b);
        x.norms.extend(y.norms);
        Ok(x)
    }

    fn constant_value(&mut self, e: &Expr, what: &str) -> Result<DenseMatrix, MpcError> {
        let v = self.eval(e)?;
        if !v.is_constant() {
            return Err(self.invalid(format!("{what} must not depend on variables or the input")));
        }
        Ok(v.to_matrix())
    }

    fn lower_constraint(&mut self, c: &super::ast::Constraint, out: &mut LoweredConstraint) -> Result<(), MpcError> {
        let lhs = self.eval_convex(&c.lhs)?;
        let rhs = self.eval_convex(&c.rhs)?;
        let has_norm = !lhs.norms.is_empty() || !rhs.norms.is_empty();
        if has_norm {
            // normalize to Σ coef‖·‖ + aff ≤ 0
            let combined = match c.rel {
                Rel::Eq => return Err(self.nonconvex("equality involving a norm")),
                Rel::Le => self.add_convex(lhs, scale_convex(rhs, -1.0))?,
                Rel::Ge => self.add_convex(rhs, scale_convex(lhs, -1.0))?,
            };
            if combined.norms.iter().any(|n| n.0 < 0.0) {
                return Err(self.nonconvex("norm on the larger side of an inequality"));
            }
            let active: Vec<&(f64, Affine)> = combined.norms.iter().filter(|n| n.0 > 0.0).collect();
            match active.as_slice() {
                [] => out.inequalities.push(combined.aff),
                [(coef, arg)] => out.cones.push(LoweredCone { arg: arg.clone(), bound: combined.aff.scaled(-1.0 / coef) }),
                _ => {
                    return Err(self.invalid("at most one norm per constraint is supported".into()));
                }
            }
            return Ok(());
        }
        let (l, r) = self.align(c.rel.as_str(), lhs.aff, rhs.aff)?;
        let diff = match c.rel {
            Rel::Ge => r.sub(&l),
            _ => l.sub(&r),
        };
        for k in 0..diff.len() {
            let row = diff.pick(&[k], 1, 1);
            if row.is_constant() {
                let v = row.cst[0];
                let ok = if c.rel == Rel::Eq { v.abs() <= 1e-12 } else { v <= 0.0 };
                if !ok {
                    return Err(self.invalid(format!("constant relation is violated ({v})")));
                }
                continue;
            }
            if c.rel == Rel::Eq {
                out.equalities.push(row);
            } else {
                out.inequalities.push(row);
            }
        }
        Ok(())
    }
}

pub fn resolve(p: &Program, map: &SourceMap) -> Result<Resolved, MpcError> {
    let mut constants: IndexMap<String, DenseMatrix> = IndexMap::new();
    let empty: Vec<Variable> = Vec::new();
    let mut scope = Scope {
        constants: &IndexMap::new(),
        variables: &empty,
        input: None,
        n_x: 0,
        bindings: Vec::new(),
        context: "Input".into(),
        pos: map.input,
    };
    let input_dim = scope.integer(&p.input_dim, "input dimension")?;
    if input_dim < 1 {
        return Err(scope.invalid("input dimension must be positive".into()));
    }
    let input_dim = input_dim as usize;

    for (i, (name, e)) in p.constants.iter().enumerate() {
        let value = {
            let mut s = Scope {
                constants: &constants,
                variables: &empty,
                input: None,
                n_x: 0,
                bindings: Vec::new(),
                context: format!("constant {name}"),
                pos: map.constants.get(i).copied().unwrap_or_default(),
            };
            if name == &p.input_name {
                return Err(s.invalid(format!("'{name}' is already the input name")));
            }
            s.constant_value(e, "a constant")?
        };
        constants.insert(name.clone(), value);
    }

    let mut variables: Vec<Variable> = Vec::new();
    let mut offset = 0;
    for (i, v) in p.variables.iter().enumerate() {
        let mut s = Scope {
            constants: &constants,
            variables: &empty,
            input: None,
            n_x: 0,
            bindings: Vec::new(),
            context: format!("variable {}", v.name),
            pos: map.variables.get(i).copied().unwrap_or_default(),
        };
        if constants.contains_key(&v.name) || v.name == p.input_name || variables.iter().any(|w| w.name == v.name) {
            return Err(s.invalid(format!("'{}' is already defined", v.name)));
        }
        let rows = s.integer(&v.rows, "row count")?;
        let cols = s.integer(&v.cols, "column count")?;
        if rows < 1 || cols < 1 {
            return Err(s.invalid("variable dimensions must be positive".into()));
        }
        let var = Variable { name: v.name.clone(), rows: rows as usize, cols: cols as usize, offset };
        offset += var.len();
        variables.push(var);
    }
    let n_x = offset;

    let mut scope = Scope {
        constants: &constants,
        variables: &variables,
        input: Some((&p.input_name, input_dim)),
        n_x,
        bindings: Vec::new(),
        context: "objective".into(),
        pos: map.objective,
    };
    let cost = scope.eval_convex(&p.objective)?;
    if !cost.aff.is_scalar() {
        return Err(scope.mismatch("objective", cost.aff.shape(), (1, 1)));
    }
    if cost.norms.iter().any(|n| n.0 < 0.0) {
        return Err(scope.nonconvex("negatively weighted norm in the objective"));
    }
    let cost = LoweredCost { norms: cost.norms.into_iter().filter(|n| n.0 > 0.0).collect(), linear: cost.aff };

    let mut lowered_constraints = Vec::new();
    for (i, c) in p.constraints.iter().enumerate() {
        scope.context = format!("constraint {}", c.name);
        scope.pos = map.constraints.get(i).copied().unwrap_or_default();
        if lowered_constraints.iter().any(|l: &LoweredConstraint| l.name == c.name) {
            return Err(scope.invalid(format!("duplicate constraint name '{}'", c.name)));
        }
        let mut out = LoweredConstraint {
            name: c.name.clone(),
            equalities: Vec::new(),
            inequalities: Vec::new(),
            cones: Vec::new(),
        };
        match &c.range {
            None => scope.lower_constraint(c, &mut out)?,
            Some(r) => {
                for k in scope.range_values(r)? {
                    scope.with_binding(&r.var, k, |s| s.lower_constraint(c, &mut out))?;
                }
            }
        }
        lowered_constraints.push(out);
    }

    scope.context = "output".into();
    scope.pos = map.output;
    let output = match &p.output {
        OutputSpec::Empty => None,
        OutputSpec::Expr(e) => Some(scope.eval(e)?.flatten()),
        OutputSpec::Default => {
            let last = variables.last().expect("at least one variable");
            let col = Expr::Index(last.name.clone(), vec![IndexArg::All, IndexArg::At(Expr::Num(1.0))]);
            Some(scope.eval(&col)?.flatten())
        }
    };

    let mut information = Information::default();
    if let Some(info) = &p.information {
        for (i, (name, e)) in info.iter().enumerate() {
            let mut s = Scope {
                constants: &constants,
                variables: &empty,
                input: None,
                n_x: 0,
                bindings: Vec::new(),
                context: format!("information {name}"),
                pos: map.information.get(i).copied().unwrap_or_default(),
            };
            let m = s.constant_value(e, "an information value")?;
            if m.shape() != (1, 1) {
                return Err(s.mismatch("information value", m.shape(), (1, 1)));
            }
            let x = m.get(0, 0);
            let slot = match name.as_str() {
                "r" => &mut information.r,
                "R" => &mut information.big_r,
                "V" => &mut information.v,
                "eps" => &mut information.eps,
                "lambda" => &mut information.lambda,
                _ => return Err(s.invalid(format!("unknown information field '{name}' (expected r, R, V, eps, lambda)"))),
            };
            *slot = Some(x);
        }
    }

    Ok(Resolved {
        input: (p.input_name.clone(), input_dim),
        constants,
        variables,
        information,
        lowered: Lowered { cost, constraints: lowered_constraints, output },
    })
}
