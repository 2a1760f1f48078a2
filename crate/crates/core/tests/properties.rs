use ellcert::certify::{
    condition_bounds, extreme_polytopes, iteration_bound, soc_linear_inner, widening_budget, widening_coefficient,
    ParamPolytope,
};
use ellcert::ellipsoid::{cut_volume_ratio, volume_reduction_bound, Ellipsoid};
use ellcert::linalg::{
    frobenius_norm, min_norm_solve, min_singular_estimate, null_space_basis, operator_norm, power_iteration_top,
    row_norms, svd_jacobi, DenseMatrix, DenseVector, Lu,
};
use ellcert::mpc;
use ellcert::socp::{feasibility, ConeConstraint, SocpProblem};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = DenseMatrix> {
    prop::collection::vec(-10.0f64..10.0, rows * cols).prop_map(move |d| DenseMatrix::new(rows, cols, d).unwrap())
}

fn vector(len: usize) -> impl Strategy<Value = DenseVector> {
    prop::collection::vec(-10.0f64..10.0, len).prop_map(|d| DenseVector::new(d).unwrap())
}

fn sized_matrix(max: usize) -> impl Strategy<Value = DenseMatrix> {
    (1..=max, 1..=max).prop_flat_map(|(r, c)| matrix(r, c))
}

fn square(max: usize) -> impl Strategy<Value = DenseMatrix> {
    (2..=max).prop_flat_map(|n| matrix(n, n))
}

fn to_na(a: &DenseMatrix) -> DMatrix<f64> {
    DMatrix::from_fn(a.rows(), a.cols(), |i, j| a.get(i, j))
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> DenseMatrix {
    let svd = svd_jacobi(&random_matrix(rng, n, n));
    svd.u.matmul(&svd.v.transpose())
}

fn unit_ball_point(rng: &mut ChaCha8Rng, n: usize) -> DenseVector {
    loop {
        let u = DenseVector::from_fn(n, |_| rng.gen_range(-1.0..1.0));
        if u.two_norm() <= 1.0 {
            return u;
        }
    }
}

fn well_conditioned(rng: &mut ChaCha8Rng, n: usize) -> DenseMatrix {
    let u = random_orthogonal(rng, n);
    let v = random_orthogonal(rng, n);
    let s: Vec<f64> = (0..n).map(|_| rng.gen_range(0.3..3.0)).collect();
    u.matmul(&DenseMatrix::from_diag(&s)).matmul(&v.transpose())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn products_match_naive_loops(a in sized_matrix(6), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = rng.gen_range(1..6);
        let b = random_matrix(&mut rng, a.cols(), k);
        let c = a.matmul(&b);
        for i in 0..a.rows() {
            for j in 0..k {
                let mut s = 0.0;
                let mut mag = 0.0;
                for l in 0..a.cols() {
                    s += a.get(i, l) * b.get(l, j);
                    mag += (a.get(i, l) * b.get(l, j)).abs();
                }
                prop_assert!((c.get(i, j) - s).abs() <= 1e-13 * (1.0 + mag));
            }
        }
        let x = DenseVector::from_fn(a.cols(), |_| rng.gen_range(-1.0..1.0));
        let ax = a.mul_vec(&x);
        let oracle = to_na(&a) * nalgebra::DVector::from_column_slice(x.as_slice());
        for i in 0..a.rows() {
            prop_assert!((ax[i] - oracle[i]).abs() <= 1e-12);
        }
    }

    #[test]
    fn row_norms_are_row_two_norms(a in sized_matrix(6)) {
        let nu = row_norms(&a);
        prop_assert_eq!(nu.len(), a.rows());
        for i in 0..a.rows() {
            prop_assert_eq!(nu[i], a.row_vector(i).two_norm());
        }
    }

    #[test]
    fn singular_value_ordering(a in square(6)) {
        let lo = min_singular_estimate(&a);
        let top = operator_norm(&a);
        prop_assert!(lo <= top * (1.0 + 1e-12));
        prop_assert!(top <= frobenius_norm(&a) * (1.0 + 1e-12));
        prop_assert!(lo >= 0.0);
    }

    #[test]
    fn svd_matches_nalgebra(a in sized_matrix(6)) {
        let ours = svd_jacobi(&a).s;
        let mut theirs: Vec<f64> = to_na(&a).svd(false, false).singular_values.iter().copied().collect();
        theirs.sort_by(|x, y| y.partial_cmp(x).unwrap());
        let scale = theirs[0].max(1.0);
        for (s, t) in ours.iter().zip(&theirs) {
            prop_assert!((s - t).abs() <= 1e-11 * scale, "{} vs {}", s, t);
        }
    }

    #[test]
    fn determinant_matches_nalgebra(a in square(6)) {
        let ours = Lu::new(&a).determinant();
        let theirs = to_na(&a).determinant();
        prop_assert!((ours - theirs).abs() <= 1e-9 * (1.0 + theirs.abs()), "{} vs {}", ours, theirs);
    }

    #[test]
    fn lu_solve_residual(seed in any::<u64>(), n in 2usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = well_conditioned(&mut rng, n);
        let b = DenseVector::from_fn(n, |_| rng.gen_range(-5.0..5.0));
        let x = Lu::new(&a).solve(&b).unwrap();
        prop_assert!(a.mul_vec(&x).sub(&b).two_norm() <= 1e-10 * (1.0 + b.two_norm()));
    }

    #[test]
    fn null_space_invariants(seed in any::<u64>(), d in 1usize..5, extra in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = d + extra;
        let a = random_matrix(&mut rng, d, n);
        let m = null_space_basis(&a).unwrap();
        prop_assert_eq!(m.shape(), (n, n - d));
        let mtm = m.transpose().matmul(&m);
        prop_assert!(mtm.sub(&DenseMatrix::identity(n - d)).max_abs() <= 1e-10);
        prop_assert!(a.matmul(&m).frobenius_norm() <= 1e-10 * (1.0 + a.frobenius_norm()));
    }

    #[test]
    fn min_norm_solution_matches_pseudo_inverse(seed in any::<u64>(), d in 1usize..5, extra in 0usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = d + extra;
        let a = random_matrix(&mut rng, d, n);
        let y = DenseVector::from_fn(d, |_| rng.gen_range(-3.0..3.0));
        let x = min_norm_solve(&a, &y).unwrap();
        prop_assert!(a.mul_vec(&x).sub(&y).two_norm() <= 1e-9 * (1.0 + y.two_norm()));
        let pinv = to_na(&a).pseudo_inverse(1e-14).unwrap();
        let oracle = pinv * nalgebra::DVector::from_column_slice(y.as_slice());
        let err: f64 = (0..n).map(|i| (x[i] - oracle[i]).powi(2)).sum::<f64>().sqrt();
        prop_assert!(err <= 1e-8 * (1.0 + x.two_norm()), "{}", err);
    }

    #[test]
    fn power_iteration_on_separated_spectra(seed in any::<u64>(), n in 2usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_orthogonal(&mut rng, n);
        let v = random_orthogonal(&mut rng, n);
        let s: Vec<f64> = (0..n).map(|i| 10.0 / (1.0 + i as f64) + rng.gen_range(0.0..0.1)).collect();
        let a = u.matmul(&DenseMatrix::from_diag(&s)).matmul(&v.transpose());
        let top = power_iteration_top(&a).unwrap();
        prop_assert!((top.sigma - s[0]).abs() <= 1e-9 * s[0], "{} vs {}", top.sigma, s[0]);
        prop_assert!((top.direction.two_norm() - 1.0).abs() <= 1e-12);
        prop_assert!((top.direction.dot(&u.column(0)).abs() - 1.0).abs() <= 1e-8);
    }

    #[test]
    fn subgradient_inequality(a in matrix(3, 4), b in vector(3), c in vector(4), d in -5.0f64..5.0,
                              x in vector(4), y in vector(4)) {
        let cone = ConeConstraint::new(a, b, c, d).unwrap();
        let g = cone.subgradient(&x);
        let lower = cone.value(&x) + g.dot(&y.sub(&x));
        prop_assert!(cone.value(&y) >= lower - 1e-9 * (1.0 + lower.abs()));
    }

    #[test]
    fn linear_constraints_are_affine(c in vector(3), d in -5.0f64..5.0, x in vector(3), y in vector(3), t in 0.0f64..1.0) {
        let cone = ConeConstraint::linear(c, d);
        let mid = x.scaled(t).add(&y.scaled(1.0 - t));
        let blend = t * cone.value(&x) + (1.0 - t) * cone.value(&y);
        prop_assert!((cone.value(&mid) - blend).abs() <= 1e-10 * (1.0 + blend.abs()));
    }

    #[test]
    fn dropping_a_constraint_keeps_feasibility(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cones: Vec<ConeConstraint> = (0..4)
            .map(|_| {
                let a = random_matrix(&mut rng, 2, 3);
                let b = DenseVector::from_fn(2, |_| rng.gen_range(-1.0..1.0));
                let c = DenseVector::from_fn(3, |_| rng.gen_range(-1.0..1.0));
                ConeConstraint::new(a, b, c, rng.gen_range(0.0..4.0)).unwrap()
            })
            .collect();
        let p = SocpProblem::new(DenseVector::ones(3), cones).unwrap();
        let x = DenseVector::from_fn(3, |_| rng.gen_range(-2.0..2.0));
        if feasibility(&p, &x).feasible {
            for i in 0..p.num_constraints() {
                prop_assert!(feasibility(&p.without_constraint(i).unwrap(), &x).feasible);
            }
        }
    }

    #[test]
    fn cut_determinant_ratio(seed in any::<u64>(), n in 2usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shape = well_conditioned(&mut rng, n);
        let center = DenseVector::from_fn(n, |_| rng.gen_range(-1.0..1.0));
        let e = DenseVector::from_fn(n, |_| rng.gen_range(-1.0..1.0));
        let ell = Ellipsoid::new(shape, center).unwrap();
        let next = ell.cut_update(&e, 1.0).unwrap();
        let ratio = next.abs_det() / ell.abs_det();
        prop_assert!((ratio / cut_volume_ratio(n) - 1.0).abs() <= 1e-9);
        prop_assert!(ratio <= volume_reduction_bound(n));
        let lambda = 1.01;
        let wide = ell.cut_update(&e, lambda).unwrap();
        prop_assert!((wide.abs_det() / next.abs_det() / lambda.powi(n as i32) - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn normalized_cut_has_unit_length(seed in any::<u64>(), n in 2usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ell = Ellipsoid::new(well_conditioned(&mut rng, n), DenseVector::zeros(n)).unwrap();
        let e = DenseVector::from_fn(n, |_| rng.gen_range(-1.0..1.0));
        prop_assert!((ell.normalize_cut(&e).unwrap().two_norm() - 1.0).abs() <= 1e-14);
    }

    #[test]
    fn cut_keeps_the_half_ellipsoid(seed in any::<u64>(), n in 2usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ell = Ellipsoid::new(well_conditioned(&mut rng, n), DenseVector::from_fn(n, |_| rng.gen_range(-1.0..1.0))).unwrap();
        let e = DenseVector::from_fn(n, |_| rng.gen_range(-1.0..1.0));
        let next = ell.cut_update(&e, 1.0).unwrap();
        for _ in 0..100 {
            let x = ell.shape().mul_vec(&unit_ball_point(&mut rng, n)).add(ell.center());
            if e.dot(&x.sub(ell.center())) <= 0.0 {
                prop_assert!(next.contains_with_tolerance(&x, 1e-9).unwrap());
            }
        }
    }

    #[test]
    fn iteration_bound_is_monotone(r in 0.1f64..10.0, big_r in 10.0f64..1000.0, v in 1.0f64..500.0,
                                   eps in 0.01f64..1.0, n in 2usize..30) {
        let base = iteration_bound(n, r, big_r, v, eps);
        prop_assert!(iteration_bound(n, r, big_r * 2.0, v, eps) >= base);
        prop_assert!(iteration_bound(n, r, big_r, v * 2.0, eps) >= base);
        prop_assert!(iteration_bound(n, r * 2.0, big_r, v, eps) <= base);
        prop_assert!(iteration_bound(n, r, big_r, v, eps * 2.0) <= base);
        prop_assert!(iteration_bound(n + 1, r, big_r, v, eps) >= base);
    }

    #[test]
    fn widened_budgets_are_ordered(n in 2usize..20, big_n in 1u64..100_000, t in 0.0f64..1.0) {
        let threshold = (1.0 / (2.0 * (n * (n + 1)) as f64)).exp();
        let lambda = 1.0 + t * (threshold - 1.0) * 0.999;
        let w = widening_budget(n, big_n, lambda).unwrap();
        let paper = w.paper().unwrap();
        let safe = w.safe().unwrap();
        prop_assert!(big_n <= paper && paper <= safe);
    }

    #[test]
    fn condition_bound_formula(n in 2usize..40, r in 0.1f64..10.0, big_r in 10.0f64..1000.0,
                               v in 1.0f64..500.0, eps in 0.01f64..1.0) {
        let c = condition_bounds(n, r, big_r, v, eps, 0.0);
        prop_assert!(c.sigma_min_floor < c.sigma_max_cap);
        prop_assert!((c.cond_bound / (c.sigma_max_cap / c.sigma_min_floor) - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn widening_coefficient_grows_with_condition(n in 2usize..20, cond in 1.0f64..1e6, nb in 1.0f64..100.0) {
        let u = 2f64.powi(-53);
        let lam = widening_coefficient(n, cond, nb, u * nb, u * nb);
        prop_assert!(lam >= 1.0);
        prop_assert!(widening_coefficient(n, cond * 2.0, nb, u * nb, u * nb) >= lam);
    }

    #[test]
    fn extreme_polytopes_bracket_the_family(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (rows, n, n_o) = (6, 2, 2);
        let pp = ParamPolytope {
            a_f: random_matrix(&mut rng, rows, n),
            b_o: DenseVector::from_fn(rows, |_| rng.gen_range(0.5..2.0)),
            q: random_matrix(&mut rng, rows, n_o),
            r_o: rng.gen_range(0.0..0.5),
        };
        let (lo, hi) = extreme_polytopes(&pp);
        for _ in 0..50 {
            let x_o = unit_ball_point(&mut rng, n_o).scaled(pp.r_o);
            let p = pp.at(&x_o);
            let z = DenseVector::from_fn(n, |_| rng.gen_range(-3.0..3.0));
            if lo.contains(&z, 0.0) {
                prop_assert!(p.contains(&z, 1e-12));
            }
            if p.contains(&z, 0.0) {
                prop_assert!(hi.contains(&z, 1e-12));
            }
        }
    }

    #[test]
    fn linear_inner_approximation_is_inside_the_cone(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cone = ConeConstraint::new(
            random_matrix(&mut rng, 3, 3),
            DenseVector::from_fn(3, |_| rng.gen_range(-0.5..0.5)),
            DenseVector::from_fn(3, |_| rng.gen_range(-0.2..0.2)),
            rng.gen_range(1.0..3.0),
        )
        .unwrap();
        let (a, b) = soc_linear_inner(std::slice::from_ref(&cone));
        for _ in 0..200 {
            let z = DenseVector::from_fn(3, |_| rng.gen_range(-3.0..3.0));
            let az = a.mul_vec(&z);
            if (0..b.len()).all(|i| az[i] <= b[i]) {
                prop_assert!(cone.value(&z) <= 1e-9);
            }
        }
    }
}

fn toy_model(h: usize, a: [f64; 4], umax: f64, xmax: f64, w: f64) -> String {
    format!(
        "Input\nxo(2)\nConstants\nH = {h}; A = [{} {}; {} {}]; B = [0; 1];\nVariables\nx(2,H+1) u(1,H)\n\
         Minimize\nsum( || x(:,k) || + {w}*u(1,k), k=1..H)\nSubjectTo\ninit: x(:,1) = xo;\n\
         dyn: x(:,k+1) = A*x(:,k) + B*u(:,k), k=1..H;\nub: u(1,k) <= {umax}, k=1..H;\n\
         lb: -{umax} <= u(1,k), k=1..H;\nxb: -[{xmax};{xmax}] <= x(:,k), k=2..H+1;\n\
         Information\nr = 0.1; R = 10; V = 8; eps = 0.01;\n",
        a[0], a[1], a[2], a[3]
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn printed_models_parse_back(h in 1usize..6, a in prop::array::uniform4(-2.0f64..2.0),
                                 umax in 0.5f64..40.0, xmax in 1.0f64..50.0, w in -3.0f64..3.0) {
        let m = mpc::parse(&toy_model(h, a, umax, xmax, w)).unwrap();
        let again = mpc::parse(&m.to_string()).unwrap();
        prop_assert_eq!(&again.program, &m.program);
        prop_assert_eq!(&again.constants, &m.constants);
        prop_assert_eq!(m.n_x(), 2 * (h + 1) + h);
        prop_assert_eq!(m.num_groups(), 5);
        prop_assert_eq!(m.num_norm_atoms(), h);
    }
}
