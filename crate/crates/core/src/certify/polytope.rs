use super::nnls::nnls;
use super::CertifyError;
use crate::ellipsoid::{solve, BestPoint, SolverConfig};
use crate::linalg::{svd_jacobi, DenseMatrix, DenseVector, LinalgError, RowSpaceFactor};
use crate::socp::{ConeConstraint, SocpProblem};

/// `X = A1·b_eq + A2·x_o + M·z` parameterizes every solution of
/// `A_eq X = b_eq`, `S X = x_o`.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub a1: DenseMatrix,
    pub a2: DenseMatrix,
    pub m: DenseMatrix,
    pub n_x: usize,
    pub n_z: usize,
    pub d: usize,
}

impl Projection {
    pub fn reconstruct(&self, b_eq: &DenseVector, x_o: &DenseVector, z: &DenseVector) -> DenseVector {
        self.a1.mul_vec(b_eq).add(&self.a2.mul_vec(x_o)).add(&self.m.mul_vec(z))
    }

    /// Number of pinned (parameter) rows.
    pub fn n_o(&self) -> usize {
        self.a2.cols()
    }
}

/// Removes the equalities `A_eq X = b_eq` and the parameter pinning `S X = x_o`.
///
/// `M` is an orthonormal basis of `null([A_eq; S])`; the columns of `A1`/`A2`
/// are minimum-norm solutions against unit right-hand sides.
pub fn eliminate_equalities(a_eq: &DenseMatrix, b_eq: &DenseVector, s: &DenseMatrix) -> Result<Projection, CertifyError> {
    let n_x = s.cols().max(a_eq.cols());
    if (a_eq.rows() > 0 && a_eq.cols() != n_x) || (s.rows() > 0 && s.cols() != n_x) {
        return Err(CertifyError::Dimension(format!(
            "A_eq is {}x{} but S is {}x{}",
            a_eq.rows(),
            a_eq.cols(),
            s.rows(),
            s.cols()
        )));
    }
    if b_eq.len() != a_eq.rows() {
        return Err(CertifyError::Dimension(format!("b_eq has length {} for {} equalities", b_eq.len(), a_eq.rows())));
    }
    let a_eq = if a_eq.rows() == 0 { DenseMatrix::zeros(0, n_x) } else { a_eq.clone() };
    let s = if s.rows() == 0 { DenseMatrix::zeros(0, n_x) } else { s.clone() };
    let k = a_eq.vstack(&s);
    let d = k.rows();
    let factor = RowSpaceFactor::new(&k).map_err(|e| match e {
        LinalgError::RankDeficient { rank, expected, dependent_rows } => {
            CertifyError::RankDeficient { rank, expected, dependent_rows }
        }
        other => CertifyError::InvalidInput(other.to_string()),
    })?;
    if d >= n_x {
        return Err(CertifyError::NoFreeVariables);
    }
    let m = factor.null_basis();
    let cols: Vec<DenseVector> = (0..d).map(|i| factor.solve(&DenseVector::unit(d, i))).collect();
    let n_eq = a_eq.rows();
    let a1 = DenseMatrix::from_fn(n_x, n_eq, |i, j| cols[j][i]);
    let a2 = DenseMatrix::from_fn(n_x, d - n_eq, |i, j| cols[n_eq + j][i]);
    Ok(Projection { a1, a2, m, n_x, n_z: n_x - d, d })
}

/// Polytope `{z : A z ≤ b}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polytope {
    pub a: DenseMatrix,
    pub b: DenseVector,
}

impl Polytope {
    pub fn new(a: DenseMatrix, b: DenseVector) -> Result<Self, CertifyError> {
        if a.rows() != b.len() {
            return Err(CertifyError::Dimension(format!("{} rows but {} offsets", a.rows(), b.len())));
        }
        Ok(Self { a, b })
    }

    pub fn dim(&self) -> usize {
        self.a.cols()
    }

    /// Largest `a_iᵀz − b_i`.
    pub fn max_violation(&self, z: &DenseVector) -> f64 {
        let az = self.a.mul_vec(z);
        (0..self.b.len()).map(|i| az[i] - self.b[i]).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn contains(&self, z: &DenseVector, tol: f64) -> bool {
        self.b.is_empty() || self.max_violation(z) <= tol
    }
}

/// Family `P(x_o) = {z : A_f z ≤ b_o + Q x_o}` for `‖x_o‖ ≤ r_o`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamPolytope {
    pub a_f: DenseMatrix,
    pub b_o: DenseVector,
    pub q: DenseMatrix,
    pub r_o: f64,
}

impl ParamPolytope {
    pub fn at(&self, x_o: &DenseVector) -> Polytope {
        Polytope { a: self.a_f.clone(), b: self.b_o.add(&self.q.mul_vec(x_o)) }
    }
}

/// `A_f = A_ineq M`, `b_o = b_ineq − A_ineq A1 b_eq`, `Q = −A_ineq A2`.
pub fn project_inequalities(
    a_ineq: &DenseMatrix,
    b_ineq: &DenseVector,
    proj: &Projection,
    b_eq: &DenseVector,
    r_o: f64,
) -> Result<ParamPolytope, CertifyError> {
    if a_ineq.rows() != b_ineq.len() || (a_ineq.rows() > 0 && a_ineq.cols() != proj.n_x) {
        return Err(CertifyError::Dimension(format!(
            "A_ineq is {}x{}, b_ineq has length {}, n_x = {}",
            a_ineq.rows(),
            a_ineq.cols(),
            b_ineq.len(),
            proj.n_x
        )));
    }
    if b_eq.len() != proj.a1.cols() {
        return Err(CertifyError::Dimension(format!("b_eq has length {}, expected {}", b_eq.len(), proj.a1.cols())));
    }
    let a_ineq = if a_ineq.rows() == 0 { DenseMatrix::zeros(0, proj.n_x) } else { a_ineq.clone() };
    Ok(ParamPolytope {
        a_f: a_ineq.matmul(&proj.m),
        b_o: b_ineq.sub(&a_ineq.mul_vec(&proj.a1.mul_vec(b_eq))),
        q: a_ineq.matmul(&proj.a2).scaled(-1.0),
        r_o,
    })
}

/// `(P_min, P_max)`: offsets `b_o ∓ r_o·ν(Q)` with `ν` the row norms.
pub fn extreme_polytopes(pp: &ParamPolytope) -> (Polytope, Polytope) {
    let nu = pp.q.row_norms().scaled(pp.r_o);
    (
        Polytope { a: pp.a_f.clone(), b: pp.b_o.sub(&nu) },
        Polytope { a: pp.a_f.clone(), b: pp.b_o.add(&nu) },
    )
}

/// A nonempty `{z : A z ≤ b}` is bounded iff the rows of `A` positively span
/// the whole space, checked by expressing each `±e_j` as a nonnegative
/// combination of rows.
pub fn is_bounded(a: &DenseMatrix) -> bool {
    let n = a.cols();
    if a.rows() == 0 || n == 0 {
        return n == 0;
    }
    let at = a.transpose();
    let scale = a.max_abs();
    for j in 0..n {
        for s in [1.0, -1.0] {
            let target = DenseVector::unit(n, j).scaled(s * scale);
            let y = nnls(&at, &target);
            if at.mul_vec(&y).sub(&target).two_norm() > 1e-9 * scale {
                return false;
            }
        }
    }
    true
}

fn solver_failure(e: impl std::fmt::Display) -> CertifyError {
    CertifyError::Solver(e.to_string())
}

/// Minimizes `fᵀy` over `cones` with the ellipsoid solver started from
/// `B_R(0)`.
fn lp_minimize(
    f: DenseVector,
    cones: Vec<ConeConstraint>,
    big_r: f64,
    v: f64,
    eps: f64,
) -> Result<Option<BestPoint>, CertifyError> {
    let n = f.len();
    let p = SocpProblem::new(f, cones).map_err(solver_failure)?;
    let cfg = SolverConfig::new(n, eps, eps, big_r, v.max(eps)).map_err(solver_failure)?;
    let out = solve(&p, &cfg).map_err(solver_failure)?;
    Ok(out.best)
}

const BOX_ATTEMPTS: i32 = 5;

/// Rows shorter than this fraction of the longest row count as zero rows.
const NEGLIGIBLE_ROW: f64 = 1e-12;

/// Chebyshev center and radius of `{z : A z ≤ b}`, computed by the ellipsoid
/// solver on `max ρ s.t. a_iᵀz + ‖a_i‖ρ ≤ b_i`.
///
/// The returned radius is `min_i (b_i − a_iᵀz)/‖a_i‖` at the returned center,
/// so the ball is inside the polytope regardless of solver accuracy.
pub fn inscribed_ball(a: &DenseMatrix, b: &DenseVector) -> Result<(DenseVector, f64), CertifyError> {
    if a.rows() != b.len() {
        return Err(CertifyError::Dimension(format!("{} rows but {} offsets", a.rows(), b.len())));
    }
    let n = a.cols();
    if n == 0 {
        return Err(CertifyError::InvalidInput("polytope dimension must be positive".into()));
    }
    let norms = a.row_norms();
    let tiny = NEGLIGIBLE_ROW * norms.inf_norm();
    let mut rows = Vec::new();
    for i in 0..a.rows() {
        if norms[i] <= tiny {
            if b[i] < 0.0 {
                return Err(CertifyError::EmptyInterior { radius: 0.0 });
            }
            continue;
        }
        rows.push(i);
    }
    let a = a.select_rows(&rows);
    let norms = a.row_norms();
    let b = DenseVector::from_fn(rows.len(), |k| b[rows[k]]);
    if !is_bounded(&a) {
        return Err(CertifyError::Unbounded("polytope is unbounded".into()));
    }
    let scale = (0..b.len()).map(|i| b[i].abs() / norms[i]).fold(1.0, f64::max);
    let eps = 1e-7 * scale;
    let radius_at = |z: &DenseVector| {
        let az = a.mul_vec(z);
        (0..b.len()).map(|i| (b[i] - az[i]) / norms[i]).fold(f64::INFINITY, f64::min)
    };
    for attempt in 0..BOX_ATTEMPTS {
        let l = 4.0 * scale * 10f64.powi(attempt);
        let mut cones = Vec::with_capacity(b.len() + 2 * n + 2);
        for i in 0..b.len() {
            let mut row = a.row(i).to_vec();
            row.push(norms[i]);
            cones.push(ConeConstraint::halfspace(&DenseVector::from_raw(row), b[i]));
        }
        for j in 0..=n {
            cones.push(ConeConstraint::halfspace(&DenseVector::unit(n + 1, j), l));
            let lower = if j == n { 0.0 } else { l };
            cones.push(ConeConstraint::halfspace(&DenseVector::unit(n + 1, j).scaled(-1.0), lower));
        }
        let f = DenseVector::unit(n + 1, n).scaled(-1.0);
        let best = lp_minimize(f, cones, l * ((n + 1) as f64).sqrt(), l, eps)?;
        let Some(best) = best else {
            return Err(CertifyError::EmptyInterior { radius: 0.0 });
        };
        let z = best.point.slice(0, n);
        let radius = radius_at(&z);
        if radius < 1e-9 {
            return Err(CertifyError::EmptyInterior { radius });
        }
        if l - z.inf_norm() > radius + eps {
            return Ok((z, radius));
        }
    }
    Err(CertifyError::Unbounded("inscribed ball keeps touching the artificial box".into()))
}

/// `R = ‖M₂⁺‖·(u_bound + ‖A₂₁ b_eq‖ + ‖A₂₂‖·r_o)`, with `‖M₂⁺‖ = 1/σ_min(M₂)`
/// and `M₂` required to have full column rank.
pub fn compute_big_r(
    m2: &DenseMatrix,
    a21: &DenseMatrix,
    a22: &DenseMatrix,
    b_eq: &DenseVector,
    u_bound: f64,
    r_o: f64,
) -> Result<f64, CertifyError> {
    if m2.rows() < m2.cols() || m2.cols() == 0 {
        return Err(CertifyError::SingularBlock);
    }
    let s_min = *svd_jacobi(m2).s.last().unwrap();
    if !(s_min > 0.0) || s_min <= 1e-12 * svd_jacobi(m2).s[0] {
        return Err(CertifyError::SingularBlock);
    }
    let a21b = if a21.cols() == 0 { 0.0 } else { a21.mul_vec(b_eq).two_norm() };
    let a22n = if a22.cols() == 0 || a22.rows() == 0 { 0.0 } else { svd_jacobi(a22).s[0] };
    Ok((u_bound + a21b + a22n * r_o) / s_min)
}

/// Range `max − min` of the linear cost `cᵀX` over the parametric feasible
/// set `{(x_o, z) : A_f z ≤ b_o + Q x_o, ‖x_o‖ ≤ r_o}`.
pub fn compute_v_linear(
    pp: &ParamPolytope,
    proj: &Projection,
    cost: &DenseVector,
    b_eq: &DenseVector,
) -> Result<f64, CertifyError> {
    let _ = b_eq;
    if cost.len() != proj.n_x {
        return Err(CertifyError::Dimension(format!("cost has length {}, n_x = {}", cost.len(), proj.n_x)));
    }
    let n_o = proj.n_o();
    let n_z = proj.n_z;
    let g = proj.a2.tr_mul_vec(cost).concat(&proj.m.tr_mul_vec(cost));
    let gn = g.two_norm();
    if gn == 0.0 {
        return Ok(0.0);
    }
    let pad = usize::from(n_o + n_z < 2);
    let dim = n_o + n_z + pad;
    let g = g.concat(&DenseVector::zeros(pad));
    let norms = pp.a_f.row_norms();
    let q_norms = pp.q.row_norms();
    let tiny = NEGLIGIBLE_ROW * norms.inf_norm();
    let scale = (0..pp.b_o.len())
        .filter(|&i| norms[i] > tiny)
        .map(|i| (pp.b_o[i].abs() + pp.r_o * q_norms[i]) / norms[i])
        .fold(1.0f64.max(pp.r_o), f64::max);
    let eps = 1e-6 * gn * scale;

    let base_cones = || {
        let mut cones = Vec::new();
        for i in 0..pp.b_o.len() {
            let mut row = DenseVector::zeros(dim);
            for j in 0..n_o {
                row[j] = -pp.q.get(i, j);
            }
            for j in 0..n_z {
                row[n_o + j] = pp.a_f.get(i, j);
            }
            cones.push(ConeConstraint::halfspace(&row, pp.b_o[i]));
        }
        if n_o > 0 {
            let sel = DenseMatrix::from_fn(n_o, dim, |i, j| if i == j { 1.0 } else { 0.0 });
            cones.push(
                ConeConstraint::new(sel, DenseVector::zeros(n_o), DenseVector::zeros(dim), pp.r_o)
                    .expect("selector cone is well formed"),
            );
        }
        if pad == 1 {
            cones.push(ConeConstraint::halfspace(&DenseVector::unit(dim, dim - 1), 1.0));
            cones.push(ConeConstraint::halfspace(&DenseVector::unit(dim, dim - 1).scaled(-1.0), 1.0));
        }
        cones
    };

    for attempt in 0..BOX_ATTEMPTS {
        let l = 4.0 * scale * 10f64.powi(attempt);
        let mut cones = base_cones();
        for j in 0..n_z {
            cones.push(ConeConstraint::halfspace(&DenseVector::unit(dim, n_o + j), l));
            cones.push(ConeConstraint::halfspace(&DenseVector::unit(dim, n_o + j).scaled(-1.0), l));
        }
        let xo2 = if n_o > 0 { pp.r_o * pp.r_o } else { 0.0 };
        let big_r = (xo2 + (n_z as f64) * l * l + pad as f64).sqrt();
        let v = 2.0 * gn * big_r;
        let (lo, hi) = std::thread::scope(|s| {
            let lo = s.spawn(|| lp_minimize(g.clone(), cones.clone(), big_r, v, eps));
            let hi = s.spawn(|| lp_minimize(g.scaled(-1.0), cones.clone(), big_r, v, eps));
            (lo.join().expect("LP thread panicked"), hi.join().expect("LP thread panicked"))
        });
        let (Some(lo), Some(hi)) = (lo?, hi?) else {
            return Err(CertifyError::Solver("no feasible point found in the parameter family".into()));
        };
        let on_box = |p: &DenseVector| (0..n_z).any(|j| p[n_o + j].abs() >= l - 10.0 * eps / gn);
        if !on_box(&lo.point) && !on_box(&hi.point) {
            return Ok(-hi.cost - lo.cost);
        }
    }
    Err(CertifyError::Unbounded("cost range keeps growing with the artificial box".into()))
}

/// Linear inner approximation of second-order cones: each
/// `‖A'z + b'‖ ≤ c'ᵀz + d'` with `n_i` rows becomes the `2n_i` rows
/// `±√n_i·(A'z + b')_j ≤ c'ᵀz + d'`. Linear cones pass through as `−c'ᵀz ≤ d'`.
pub fn soc_linear_inner(cones: &[ConeConstraint]) -> (DenseMatrix, DenseVector) {
    let Some(first) = cones.first() else {
        return (DenseMatrix::zeros(0, 0), DenseVector::zeros(0));
    };
    let n = first.dim();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut rhs = Vec::new();
    for k in cones {
        let c = k.c();
        if k.is_linear() {
            rows.push(c.iter().map(|x| -x).collect());
            rhs.push(k.d());
            continue;
        }
        let s = (k.size() as f64).sqrt();
        for j in 0..k.size() {
            for sign in [1.0, -1.0] {
                rows.push((0..n).map(|i| sign * s * k.a().get(j, i) - c[i]).collect());
                rhs.push(k.d() - sign * s * k.b()[j]);
            }
        }
    }
    let a = DenseMatrix::from_fn(rows.len(), n, |i, j| rows[i][j]);
    (a, DenseVector::from_raw(rhs))
}
