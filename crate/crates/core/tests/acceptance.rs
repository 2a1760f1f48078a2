//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits nonzero when any criterion fails.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use ellcert::certify::{
    convergence_threshold_paper, eliminate_equalities, extreme_polytopes, fp_error_constants, inscribed_ball,
    iteration_bound, widening_budget, widening_check, widening_coefficient, NoteValue, ParamPolytope,
};
use ellcert::ellipsoid::{
    cut_coefficients, cut_volume_ratio, solve, volume_reduction_bound, Ellipsoid, SolverConfig, StepKind,
};
use ellcert::linalg::{min_singular_estimate, operator_norm, svd_jacobi, DenseMatrix, DenseVector};
use ellcert::mpc::{self, CompileOptions};
use ellcert::socp::{feasibility, ConeConstraint, SocpProblem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const HELI: &str = include_str!("data/helicopter.mpc");

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn v(x: &[f64]) -> DenseVector {
    DenseVector::new(x.to_vec()).unwrap()
}

fn m(rows: &[&[f64]]) -> DenseMatrix {
    DenseMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> DenseMatrix {
    let svd = svd_jacobi(&random_matrix(rng, n, n));
    svd.u.matmul(&svd.v.transpose())
}

fn with_spectrum(rng: &mut ChaCha8Rng, s: &[f64]) -> DenseMatrix {
    let n = s.len();
    let u = random_orthogonal(rng, n);
    let w = random_orthogonal(rng, n);
    u.matmul(&DenseMatrix::from_diag(s)).matmul(&w.transpose())
}

fn unit_ball_point(rng: &mut ChaCha8Rng, n: usize) -> DenseVector {
    loop {
        let u = DenseVector::from_fn(n, |_| rng.gen_range(-1.0..1.0));
        if u.two_norm() <= 1.0 {
            return u;
        }
    }
}

fn cone(a: DenseMatrix, c: DenseVector, d: f64) -> ConeConstraint {
    let k = a.rows();
    ConeConstraint::new(a, DenseVector::zeros(k), c, d).unwrap()
}

fn iteration_count() -> Outcome {
    let n = iteration_bound(16, 8.0612, 322.0, 162.0, 0.25);
    ensure!(n == 5528, "iteration_bound = {n}, expected 5528");
    Ok(format!("iteration_bound(16, 8.0612, 322, 162, 0.25) = {n}"))
}

fn widened_budget() -> Outcome {
    let w = widening_budget(16, 5528, 1.000695409372118).map_err(|e| e.to_string())?;
    let paper = w.n_lambda_paper.ok_or("n_lambda_paper diverges")?;
    ensure!(paper.abs_diff(6817) <= 1, "N_lambda_paper = {paper}, expected 6817 ± 1");
    ensure!(w.convergent_paper, "convergent_paper is false");
    let threshold = convergence_threshold_paper(16);
    ensure!(threshold == (1.0f64 / 272.0).exp(), "threshold {threshold}");
    ensure!(1.000695409372118 < threshold, "lambda above threshold {threshold}");
    Ok(format!("N_lambda_paper = {paper}, convergent below exp(1/272) = {threshold:.10}"))
}

fn half_disk_cut() -> Outcome {
    let ell = Ellipsoid::ball(DenseVector::zeros(2), 1.0);
    let next = ell.cut_update(&v(&[1.0, 0.0]), 1.0).map_err(|e| e.to_string())?;
    let want_c = v(&[-1.0 / 3.0, 0.0]);
    let want_b = DenseMatrix::from_diag(&[2.0 / 3.0, 2.0 / 3f64.sqrt()]);
    let dc = next.center().sub(&want_c).inf_norm();
    let db = next.shape().sub(&want_b).max_abs();
    ensure!(dc <= 1e-12 && db <= 1e-12, "center error {dc:e}, shape error {db:e}");
    Ok(format!("center error {dc:.1e}, shape error {db:.1e}"))
}

fn volume_ratio() -> Outcome {
    for n in 2..=50 {
        let (ratio, gamma) = (cut_volume_ratio(n), volume_reduction_bound(n));
        let (alpha, beta) = cut_coefficients(n);
        let direct = alpha.powi(n as i32) * (1.0 + beta / alpha);
        ensure!(direct <= gamma + 1e-12, "n = {n}: {direct} > {gamma}");
        ensure!((direct - ratio).abs() <= 1e-15, "n = {n}: closed form mismatch");
    }
    let mut worst = 0.0f64;
    let mut cuts = 0;
    for n in [2usize, 5, 9] {
        let ball = cone(DenseMatrix::identity(n), DenseVector::zeros(n), 1.0);
        let p = SocpProblem::new(DenseVector::ones(n), vec![ball]).unwrap();
        let cfg = SolverConfig::new(n, 1e-3, 1.0, 1.0, 2.0 * (n as f64).sqrt())
            .unwrap()
            .with_center(DenseVector::from_fn(n, |i| 0.1 * i as f64))
            .with_trace(true);
        let out = solve(&p, &cfg).map_err(|e| e.to_string())?;
        let closed = cut_volume_ratio(n);
        for row in out.trace.unwrap_or_default() {
            if row.kind != StepKind::Corrective {
                worst = worst.max((row.det_ratio / closed - 1.0).abs());
                cuts += 1;
            }
        }
    }
    ensure!(cuts > 0, "no cuts recorded");
    ensure!(worst <= 1e-9, "measured det ratio off by {worst:e} relative");
    Ok(format!("n = 2..50 below the bound; {cuts} measured cuts within {worst:.1e}"))
}

fn containment() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut checked = 0usize;
    let mut max_plain = 0.0f64;
    let mut max_wide = 0.0f64;
    for pair in 0..200 {
        let n = 2 + pair % 2;
        let s: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..3.0)).collect();
        let shape = with_spectrum(&mut rng, &s);
        let center = DenseVector::from_fn(n, |_| rng.gen_range(-2.0..2.0));
        let ell = Ellipsoid::new(shape, center).unwrap();
        let e = DenseVector::from_fn(n, |_| rng.gen_range(-1.0..1.0));
        let plain = ell.cut_update(&e, 1.0).unwrap();
        let wide = ell.cut_update(&e, 1.001).unwrap();
        let mut kept = 0;
        while kept < 1000 {
            let x = ell.shape().mul_vec(&unit_ball_point(&mut rng, n)).add(ell.center());
            if e.dot(&x.sub(ell.center())) > 0.0 {
                continue;
            }
            kept += 1;
            let rp = plain.normalized_radius(&x).unwrap();
            let rw = wide.normalized_radius(&x).unwrap();
            ensure!(rp <= 1.0 + 1e-9, "pair {pair}: kept point at radius {rp}");
            ensure!(rw < 1.0, "pair {pair}: widened radius {rw} not strictly inside");
            max_plain = max_plain.max(rp);
            max_wide = max_wide.max(rw);
        }
        checked += kept;
    }
    Ok(format!("{checked} points; max radius {max_plain:.12} (lambda 1), {max_wide:.12} (lambda 1.001)"))
}

fn corrective_contract() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut sampled = 0usize;
    for inst in 0..100 {
        let n = rng.gen_range(2..7);
        let nf = n as f64;
        let radius = rng.gen_range(0.5..2.0);
        let trigger = 2.0 * radius * (nf + 1.0).sqrt();
        let mut s = vec![trigger * rng.gen_range(1.05..20.0)];
        let tight = inst % 2 == 0;
        for _ in 1..n {
            let cap = if tight { 2.0 * radius * nf.sqrt() } else { trigger * 0.99 };
            s.push(rng.gen_range(0.05..1.0) * cap);
        }
        s.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let shape = with_spectrum(&mut rng, &s);
        let x_c = DenseVector::from_fn(n, |_| rng.gen_range(-3.0..3.0));
        let center = x_c.add(&unit_ball_point(&mut rng, n).scaled(radius));
        let ell = Ellipsoid::new(shape, center).unwrap();
        let next = ell.corrective_step(radius, &x_c).map_err(|e| format!("instance {inst}: {e}"))?;
        let ratio = next.abs_det() / ell.abs_det();
        ensure!(ratio <= volume_reduction_bound(n), "instance {inst}: volume ratio {ratio}");
        let sigma2 = svd_jacobi(ell.shape()).s[1];
        if sigma2 <= 2.0 * radius * nf.sqrt() {
            let top = operator_norm(next.shape());
            ensure!(top <= trigger * (1.0 + 1e-12), "instance {inst}: sigma_max {top} > {trigger}");
        }
        for _ in 0..2000 {
            let x = x_c.add(&unit_ball_point(&mut rng, n).scaled(radius));
            if ell.contains(&x).unwrap() {
                sampled += 1;
                let r = next.normalized_radius(&x).unwrap();
                ensure!(r <= 1.0 + 1e-9, "instance {inst}: point of E ∩ B at radius {r}");
            }
        }
    }
    ensure!(sampled > 1000, "only {sampled} intersection samples");
    Ok(format!("100 instances, {sampled} intersection samples contained"))
}

fn analytic_socp() -> Outcome {
    let ball = cone(DenseMatrix::identity(2), DenseVector::zeros(2), 1.0);
    let p = SocpProblem::new(v(&[1.0, 1.0]), vec![ball]).unwrap();
    let cfg = SolverConfig::new(2, 1e-2, 1.0, 1.0, 2.0 * 2f64.sqrt()).unwrap();
    let out = solve(&p, &cfg).map_err(|e| e.to_string())?;
    let best = out.best.ok_or("no incumbent")?;
    ensure!(feasibility(&p, &best.point).feasible, "incumbent infeasible");
    ensure!(best.cost <= -2f64.sqrt() + 1e-2, "ball cost {}", best.cost);
    ensure!(out.iterations_used <= 68, "{} iterations", out.iterations_used);
    let rows: Vec<ConeConstraint> = (0..2)
        .flat_map(|i| [1.0, -1.0].map(|s| ConeConstraint::halfspace(&DenseVector::unit(2, i).scaled(s), 1.0)))
        .collect();
    let bx = SocpProblem::new(v(&[1.0, 0.0]), rows).unwrap();
    let cfg = SolverConfig::new(2, 1e-2, 1.0, 2f64.sqrt(), 2.0).unwrap();
    let out_box = solve(&bx, &cfg).map_err(|e| e.to_string())?;
    let bb = out_box.best.ok_or("no box incumbent")?;
    ensure!(feasibility(&bx, &bb.point).feasible && bb.cost <= -0.99, "box cost {}", bb.cost);
    Ok(format!("ball cost {:.6} in {} iterations; box cost {:.6}", best.cost, out.iterations_used, bb.cost))
}

fn worked_family() -> ParamPolytope {
    ParamPolytope {
        a_f: m(&[&[-1.0, 1.0], &[1.0, 1.0], &[1.0, -0.5], &[0.0, 1.0], &[-1.0, 0.0], &[0.0, -1.0]]),
        b_o: v(&[1.0, 2.0, 1.0, 1.5, 0.5, 0.5]),
        q: DenseMatrix::from_fn(6, 1, |_, _| 1.0),
        r_o: 0.5,
    }
}

fn extreme_sets() -> Outcome {
    let pp = worked_family();
    let (lo, hi) = extreme_polytopes(&pp);
    ensure!(lo.b.as_slice() == [0.5, 1.5, 0.5, 1.0, 0.0, 0.0], "P_min offsets {:?}", lo.b);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut hits = (0usize, 0usize);
    for _ in 0..1000 {
        let x_o = v(&[rng.gen_range(-0.5..=0.5)]);
        let p = pp.at(&x_o);
        for i in 0..6 {
            ensure!(lo.b[i] <= p.b[i] && p.b[i] <= hi.b[i], "offsets out of order at x_o = {x_o:?}");
        }
        for _ in 0..50 {
            let z = DenseVector::from_fn(2, |_| rng.gen_range(-1.5..3.0));
            if lo.contains(&z, 0.0) {
                hits.0 += 1;
                ensure!(p.contains(&z, 0.0), "P_min point outside P({x_o:?})");
            }
            if p.contains(&z, 0.0) {
                hits.1 += 1;
                ensure!(hi.contains(&z, 0.0), "P({x_o:?}) point outside P_max");
            }
        }
    }
    Ok(format!("1000 parameters; {} P_min and {} P(x_o) samples in the chain", hits.0, hits.1))
}

fn grid_radius(a: &DenseMatrix, b: &DenseVector, lo: [f64; 2], hi: [f64; 2]) -> (f64, [f64; 2]) {
    let norms = a.row_norms();
    let mut best = (f64::NEG_INFINITY, [0.0, 0.0]);
    for i in 0..400 {
        for j in 0..400 {
            let z = [lo[0] + (hi[0] - lo[0]) * i as f64 / 399.0, lo[1] + (hi[1] - lo[1]) * j as f64 / 399.0];
            let d = (0..a.rows())
                .map(|k| (b[k] - a.get(k, 0) * z[0] - a.get(k, 1) * z[1]) / norms[k])
                .fold(f64::INFINITY, f64::min);
            if d > best.0 {
                best = (d, z);
            }
        }
    }
    best
}

fn chebyshev_ball() -> Outcome {
    let sq = m(&[&[1.0, 0.0], &[-1.0, 0.0], &[0.0, 1.0], &[0.0, -1.0]]);
    let (c, r) = inscribed_ball(&sq, &DenseVector::ones(4)).map_err(|e| e.to_string())?;
    ensure!(c.inf_norm() <= 1e-6 && (r - 1.0).abs() <= 1e-6, "unit square: center {c:?}, radius {r}");
    let (lo, _) = extreme_polytopes(&worked_family());
    let (_, radius) = inscribed_ball(&lo.a, &lo.b).map_err(|e| e.to_string())?;
    let (coarse, at) = grid_radius(&lo.a, &lo.b, [-0.5, -0.5], [2.0, 2.0]);
    let h = 2.5 / 399.0;
    let (fine, _) = grid_radius(&lo.a, &lo.b, [at[0] - h, at[1] - h], [at[0] + h, at[1] + h]);
    let oracle = coarse.max(fine);
    ensure!((radius - oracle).abs() <= 1e-3, "P_min radius {radius}, grid {oracle}");
    Ok(format!("unit square radius {r:.9}; P_min radius {radius:.6} vs grid {oracle:.6}"))
}

fn equality_elimination() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let (mut worst_res, mut worst_orth) = (0.0f64, 0.0f64);
    for inst in 0..100 {
        let n_x = rng.gen_range(3..12);
        let n_o = rng.gen_range(1..3.min(n_x));
        let n_eq = rng.gen_range(0..n_x - n_o);
        let a_eq = random_matrix(&mut rng, n_eq, n_x);
        let s = random_matrix(&mut rng, n_o, n_x);
        let b_eq = DenseVector::from_fn(n_eq, |_| rng.gen_range(-5.0..5.0));
        let proj = eliminate_equalities(&a_eq, &b_eq, &s).map_err(|e| format!("instance {inst}: {e}"))?;
        let mtm = proj.m.transpose().matmul(&proj.m);
        worst_orth = worst_orth.max(mtm.sub(&DenseMatrix::identity(proj.n_z)).max_abs());
        for _ in 0..5 {
            let x_o = DenseVector::from_fn(n_o, |_| rng.gen_range(-5.0..5.0));
            let z = DenseVector::from_fn(proj.n_z, |_| rng.gen_range(-5.0..5.0));
            let x = proj.reconstruct(&b_eq, &x_o, &z);
            let r1 = if n_eq > 0 { a_eq.mul_vec(&x).sub(&b_eq).inf_norm() } else { 0.0 };
            let r2 = s.mul_vec(&x).sub(&x_o).inf_norm();
            worst_res = worst_res.max(r1).max(r2);
        }
    }
    ensure!(worst_res <= 1e-9, "reconstruction residual {worst_res:e}");
    ensure!(worst_orth <= 1e-10, "MᵀM − I = {worst_orth:e}");
    Ok(format!("residual {worst_res:.1e}, orthonormality {worst_orth:.1e}"))
}

fn fp_constants() -> Outcome {
    let u = 2f64.powi(-53);
    let (e_b, e_c) = fp_error_constants(2, 1.0, 1.0);
    ensure!(e_c == 100.0 * u, "E_c = {e_c:e}");
    let (alpha, beta) = cut_coefficients(2);
    let approx = (6.0 * beta.abs() + 2.0 * alpha + 3.0) * u;
    let exact = ((4.0 / (1.0 - 2.0 * u) + 2.0) * beta.abs() + 2.0 + 2.0 * alpha + 1.0) * u;
    ensure!(e_b == exact, "E_B = {e_b:e}, formula {exact:e}");
    ensure!((e_b / approx - 1.0).abs() <= 1e-14, "E_B = {e_b:e} vs (6|β|+2α+3)u = {approx:e}");
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst_lhs = 0.0f64;
    for inst in 0..200 {
        let n = rng.gen_range(2..5);
        let s: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..20.0)).collect();
        let b = with_spectrum(&mut rng, &s);
        let c = DenseVector::from_fn(n, |_| rng.gen_range(-10.0..10.0));
        let nb = operator_norm(&b);
        let cond = nb / min_singular_estimate(&b);
        let (e_b, e_c) = fp_error_constants(n, nb, c.two_norm());
        let db = random_matrix(&mut rng, n, n);
        let db = db.scaled(e_b / operator_norm(&db));
        let dc = DenseVector::from_fn(n, |_| rng.gen_range(-1.0..1.0));
        let dc = dc.scaled(e_c / dc.two_norm());
        let (b_fl, c_fl) = (b.add(&db), c.add(&dc));
        let lambda = widening_coefficient(n, cond, nb, e_b, e_c);
        let ok = widening_check(&b, &c, &b_fl, &c_fl, lambda).map_err(|e| e.to_string())?;
        ensure!(ok, "instance {inst}: sufficient condition fails at lambda = {lambda}");
        let wide = Ellipsoid::new(b_fl.scaled(lambda), c_fl).unwrap();
        for _ in 0..200 {
            let x = b.mul_vec(&unit_ball_point(&mut rng, n)).add(&c);
            let r = wide.normalized_radius(&x).unwrap();
            ensure!(r <= 1.0 + 1e-12, "instance {inst}: point at radius {r}");
            worst_lhs = worst_lhs.max(r);
        }
    }
    Ok(format!("E_c = 100u, E_B/u = {:.6}; 200 perturbations contained (max radius {worst_lhs:.15})", e_b / u))
}

fn parser_fidelity() -> Outcome {
    let model = mpc::parse(HELI).map_err(|e| e.to_string())?;
    ensure!(model.input == ("xo".to_string(), 6), "input {:?}", model.input);
    let shape = |name: &str| model.constant(name).map(|c| c.shape());
    ensure!(shape("A") == Some((6, 6)) && shape("B") == Some((6, 2)), "plant constants {:?} {:?}", shape("A"), shape("B"));
    let dims: Vec<(String, usize, usize)> = model.variables.iter().map(|x| (x.name.clone(), x.rows, x.cols)).collect();
    ensure!(dims == [("x".into(), 6, 6), ("u".into(), 2, 5)], "variables {dims:?}");
    let info = &model.information;
    let want = [(info.r, 8.06), (info.big_r, 322.0), (info.v, 162.0), (info.eps, 0.25), (info.lambda, 1.000695409372118)];
    for (got, expect) in want {
        ensure!(got == Some(expect), "information value {got:?}, expected {expect}");
    }
    let broken = [
        ("x(6,H) u(2,M)", "x(6 H) u(2,M)"),
        ("k = 1..H )", "k = 1..H"),
        ("A*x(:,k)", "A*x(:,k"),
        ("Information", "constraint12: x(1,k) <= q ,k=2..H;\nInformation"),
        ("-30 <= u(1,k)", "-30 <= w(1,k)"),
        ("eps = 0.25", "eps = [1 2]"),
    ];
    for (from, to) in broken {
        let text = HELI.replacen(from, to, 1);
        ensure!(text != HELI, "variant `{to}` did not apply");
        match mpc::parse(&text) {
            Ok(_) => return Err(format!("variant `{to}` was accepted")),
            Err(e) => ensure!(e.location().is_some(), "variant `{to}` has no location: {e}"),
        }
    }
    let groups = model.num_groups();
    ensure!(groups == 11, "{groups} constraint groups parsed, expected 11 (other checks passed)");
    Ok(format!("{groups} groups; {} malformed variants located", broken.len()))
}

fn helicopter_pipeline() -> Outcome {
    let start = Instant::now();
    let model = mpc::parse(HELI).map_err(|e| e.to_string())?;
    let fam = mpc::compile(&model).map_err(|e| e.to_string())?;
    ensure!(fam.dim() == 16 && fam.n_z == 10 && fam.n_t == 6, "n = {}, n_z = {}, n_t = {}", fam.dim(), fam.n_z, fam.n_t);
    let a = model.constant("A").unwrap();
    let b = model.constant("B").unwrap();
    let aobs = model.constant("Aobs").unwrap();
    let traj = mpc::simulate(&fam, a, b, &v(&[25.0, 15.0, 0.0, 0.0, 0.0, 0.0]), 30).map_err(|e| e.to_string())?;
    if let Some(e) = &traj.failure {
        return Err(format!("closed loop stopped: {e}"));
    }
    ensure!(traj.rows.len() == 31, "{} rows", traj.rows.len());
    let mut worst = 0.0f64;
    for row in &traj.rows {
        let x = &row.x;
        let obs = aobs.mul_vec(x);
        let viol = [-x[0], x[1].abs() - 40.0, obs[0], obs[1]].into_iter().fold(0.0f64, f64::max);
        ensure!(viol <= 1e-6, "step {}: state constraint violated by {viol}", row.step);
        worst = worst.max(viol);
    }
    let last = traj.final_state().two_norm();
    ensure!(last < 2.0, "final ‖x‖ = {last}");
    let secs = start.elapsed().as_secs_f64();
    ensure!(secs <= 300.0, "took {secs:.1} s");
    Ok(format!("n = 16; 30 steps feasible (worst {worst:.1e}); final ‖x‖ = {last:.4}; {secs:.1} s"))
}

fn soft_reproduction() -> Outcome {
    let model = mpc::parse(HELI).map_err(|e| e.to_string())?;
    let opts = CompileOptions { alt_column_norm_bound: Some(60.0), ..CompileOptions::default() };
    let fam = mpc::compile_with(&model, &opts).map_err(|e| e.to_string())?;
    let rec = fam.recomputed.as_ref().ok_or("no recomputed values")?;
    let big_r = rec.big_r_bounded.ok_or("R not recomputed")?;
    ensure!((big_r / 322.0 - 1.0).abs() <= 0.2, "R = {big_r}, outside ±20% of 322");
    let alt = rec.big_r_alt.ok_or("alternative R not recorded")?;
    let notes = &fam.certificate.notes;
    ensure!(notes.get("R_bounded_alt") == Some(&NoteValue::Number(alt)), "alternative R missing from the report");
    let Some(NoteValue::Number(worst)) = notes.get("lambda_worst_case") else {
        return Err("worst-case lambda missing".into());
    };
    ensure!((worst - 1.045).abs() <= 5e-3, "worst-case lambda {worst}");
    let flagged = notes.get("lambda_worst_case_convergent_paper") == Some(&NoteValue::Bool(false));
    ensure!(flagged, "worst-case lambda not flagged divergent");
    let wb = widening_budget(16, fam.certificate.big_n, *worst).map_err(|e| e.to_string())?;
    ensure!(!wb.convergent_paper && wb.paper().is_err(), "n_lambda_paper should diverge at {worst}");
    Ok(format!("R = {big_r:.2} ({:+.1}%), alternative R = {alt:.2}; worst-case lambda {worst:.6} flagged divergent", (big_r / 322.0 - 1.0) * 100.0))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 14] = [
        ("iteration bound", iteration_count),
        ("widened budget", widened_budget),
        ("half-disk cut", half_disk_cut),
        ("volume ratio", volume_ratio),
        ("localizer containment", containment),
        ("corrective step", corrective_contract),
        ("analytic SOCP", analytic_socp),
        ("extreme polyhedral sets", extreme_sets),
        ("Chebyshev ball", chebyshev_ball),
        ("equality elimination", equality_elimination),
        ("fp constants", fp_constants),
        ("parser fidelity", parser_fidelity),
        ("helicopter pipeline", helicopter_pipeline),
        ("soft reproduction", soft_reproduction),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match result {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
