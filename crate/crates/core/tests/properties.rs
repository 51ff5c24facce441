mod common;

use std::sync::Arc;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wavesys::asymptotics::{classify_values, fit_exponent, ClassifyConfig, Requirement};
use wavesys::cli::builtins;
use wavesys::cli::spec::{parse_spec, SolverChoice};
use wavesys::genfunc::{
    compute_norm, default_sweep, CoefficientNet, Compact, Expr, Mollifier, NormKind, NormRequest, PiecewiseExpr, Rescaling, SampleGrid,
    SampledField, SpaceTimeBox,
};
use wavesys::linalg::{self, Matrix, SymMatrix};
use wavesys::solver::{masked_l2, solve_system, solve_wave, Boundary, GridSpec};
use wavesys::transform::{
    coefficient_differences, constant_problem, system_to_wave, wave_to_system, Domain, ValidationSample, WaveProblem,
};

use common::{closed, random_spd};

fn rescaling() -> impl Strategy<Value = Rescaling> {
    prop_oneof![Just(Rescaling::Model), Just(Rescaling::Log)]
}

fn sweep_eps() -> impl Strategy<Value = f64> {
    (4i32..=14).prop_map(|k| 2f64.powi(-k))
}

fn rel_frobenius(a: &Matrix, b: &Matrix) -> f64 {
    a.zip_with(b, |x, y| x - y).unwrap().frobenius() / b.frobenius()
}

/// Smooth test field `α sin(βx) + γ x²` on `[-1, 1]`, several time levels.
fn smooth_field(alpha: f64, beta: f64, gamma: f64, times: Vec<f64>, n: usize) -> SampledField {
    let grid = SampleGrid::uniform(times, &[-1.0], &[1.0], &[n]);
    SampledField::from_fn(grid, 1, move |t, x| vec![(1.0 + t) * (alpha * (beta * x[0]).sin() + gamma * x[0] * x[0])])
}

fn polynomial_problem(r0: f64, r1: f64, g0: f64, a0: f64, b0: f64, b1: f64, c0: f64) -> WaveProblem {
    let domain = Domain::new(vec![-1.0], vec![1.0], 0.5).unwrap();
    let mut p = constant_problem(domain, 0.5, Matrix::diag(&[1.0])).unwrap();
    p.r = closed("R", &format!("{r0} + {r1}*x^2"), 1).assume_spd().unwrap();
    p.g = closed("g", &format!("{g0}*x"), 1);
    p.a = closed("a", &format!("{a0}"), 1);
    p.b = closed("b", &format!("{b0} + {b1}*x"), 1);
    p.c = closed("c", &format!("{c0}*x^2"), 1);
    p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn mollifier_has_unit_mass(r in rescaling(), dim in 1usize..=3, eps in sweep_eps()) {
        let m = Mollifier::new(r, dim).unwrap();
        prop_assert!((m.mass(eps).unwrap() - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn mollification_preserves_constants(r in rescaling(), c in -5.0f64..5.0, eps in sweep_eps(), x in -1.0f64..1.0) {
        let domain = Domain::new(vec![-1.0], vec![1.0], 1.0).unwrap();
        let space = SpaceTimeBox::new(1.0, &domain.padded_lower(), &domain.padded_upper());
        let raw = Arc::new(PiecewiseExpr::from_expr(&Expr::parse(&format!("{c}")).unwrap(), 1, space).unwrap());
        let net = CoefficientNet::mollified("c", raw, r, domain.padded_lower(), domain.padded_upper()).unwrap();
        let v = net.eval_scalar(eps, 0.5, &[x]).unwrap();
        prop_assert!((v - c).abs() <= 1e-10 * c.abs().max(1.0), "{v} vs {c}");
    }

    #[test]
    fn norms_grow_with_order_and_compact(
        alpha in -3.0f64..3.0,
        beta in 0.5f64..6.0,
        gamma in -2.0f64..2.0,
        inner in 0.1f64..0.9,
        outer in 0.0f64..0.1,
    ) {
        let f = smooth_field(alpha, beta, gamma, vec![0.0, 0.5], 201);
        let w = |k| compute_norm(&f, &NormRequest { kind: NormKind::WInf, order: k, compact: None }).unwrap();
        prop_assert!(w(0) <= w(1) && w(1) <= w(2));
        let small = Compact::shrunk(&[-1.0], &[1.0], inner);
        let large = Compact::shrunk(&[-1.0], &[1.0], inner + outer);
        prop_assert!(large.contains(&small));
        let s = compute_norm(&f, &NormRequest::sup(Some(small))).unwrap();
        let l = compute_norm(&f, &NormRequest::sup(Some(large))).unwrap();
        prop_assert!(s <= l);
    }

    #[test]
    fn mixed_norm_is_bounded_by_horizon_times_sup(
        alpha in -3.0f64..3.0,
        beta in 0.5f64..6.0,
        gamma in -2.0f64..2.0,
        horizon in 0.1f64..4.0,
        levels in 2usize..12,
    ) {
        let times: Vec<f64> = (0..levels).map(|i| horizon * i as f64 / (levels - 1) as f64).collect();
        let f = smooth_field(alpha, beta, gamma, times, 41);
        let mixed = compute_norm(&f, &NormRequest::mixed(None)).unwrap();
        let sup = compute_norm(&f, &NormRequest::sup(None)).unwrap();
        prop_assert!(mixed <= horizon * sup * (1.0 + 1e-14));
    }

    #[test]
    fn sqrt_inverts_square(seed in any::<u64>(), n in 1usize..=6, cond in 1.0f64..1e3) {
        let a = random_spd(&mut ChaCha8Rng::seed_from_u64(seed), n, cond);
        let back = linalg::spd_sqrt(&a.square()).unwrap();
        prop_assert!(rel_frobenius(back.as_matrix(), a.as_matrix()) <= 1e-8);
    }

    #[test]
    fn sqrt_commutes_and_has_root_spectrum(seed in any::<u64>(), n in 1usize..=6, cond in 1.0f64..1e6) {
        let r = random_spd(&mut ChaCha8Rng::seed_from_u64(seed), n, cond);
        let s = linalg::spd_sqrt(&r).unwrap();
        let (rm, sm) = (r.as_matrix(), s.as_matrix());
        let comm = sm.matmul(rm).unwrap().zip_with(&rm.matmul(sm).unwrap(), |a, b| a - b).unwrap();
        prop_assert!(comm.frobenius() <= 1e-10 * r.frobenius() * s.frobenius());
        let es = linalg::sym_eig(&s).unwrap().values;
        let er = linalg::sym_eig(&r).unwrap().values;
        for (a, b) in es.iter().zip(&er) {
            prop_assert!((a - b.sqrt()).abs() <= 1e-10 * b.sqrt());
        }
    }

    #[test]
    fn signature_is_scale_invariant(entries in prop::collection::vec(-5.0f64..5.0, 16), n in 1usize..=4, alpha in 1e-3f64..1e3) {
        let g = SymMatrix::from_fn(n, |i, j| entries[i.min(j) * 4 + i.max(j)]);
        let scaled = SymMatrix::from_fn(n, |i, j| alpha * g.as_matrix()[(i, j)]);
        let a = linalg::lorentzian_check(&g).unwrap();
        let b = linalg::lorentzian_check(&scaled).unwrap();
        prop_assert_eq!(a.verdict, b.verdict);
        prop_assert_eq!(a.negative + a.zero + a.positive, n);
    }

    #[test]
    fn divergence_is_linear(c in prop::collection::vec(-2.0f64..2.0, 8), x in -1.0f64..1.0, y in -1.0f64..1.0, h in 1e-3f64..1e-1) {
        let s = |_: f64, p: &[f64]| Matrix::from_rows(&[vec![c[0] * p[0] * p[1], c[1] * p[1]], vec![c[2] * p[0].sin(), c[3] * p[0] * p[0]]]);
        let t = |_: f64, p: &[f64]| Matrix::from_rows(&[vec![c[4] * p[1].cos(), c[5] * p[0]], vec![c[6], c[7] * p[0] * p[1] * p[1]]]);
        let sum = |t0: f64, p: &[f64]| s(t0, p)?.zip_with(&t(t0, p)?, |a, b| a + b);
        let ds = linalg::matrix_divergence(s, 0.0, &[x, y], h).unwrap();
        let dt = linalg::matrix_divergence(t, 0.0, &[x, y], h).unwrap();
        let dsum = linalg::matrix_divergence(sum, 0.0, &[x, y], h).unwrap();
        for i in 0..2 {
            let scale = ds[i].abs() + dt[i].abs() + 1.0;
            prop_assert!((dsum[i] - ds[i] - dt[i]).abs() <= 1e-12 * scale / h);
        }
    }

    #[test]
    fn planted_exponents_are_recovered(p in 0.0f64..3.0, scale in 1e-3f64..1e3) {
        let eps = default_sweep();
        let v: Vec<f64> = eps.iter().map(|e| scale * e.powf(-p)).collect();
        prop_assert!((fit_exponent(&eps, &v).unwrap().p - p).abs() <= 0.05);
    }

    #[test]
    fn faster_growth_never_fits_a_smaller_exponent(
        p in 0.0f64..3.0,
        scale in 1e-2f64..1e2,
        extra in 0.0f64..2.0,
        log_weight in 0.0f64..5.0,
        wiggle in prop::collection::vec(0.9f64..1.1, 11),
    ) {
        let eps = default_sweep();
        let v1: Vec<f64> = eps.iter().zip(&wiggle).map(|(e, w)| scale * w * e.powf(-p)).collect();
        let v2: Vec<f64> = eps
            .iter()
            .zip(&v1)
            .map(|(e, v)| v * e.powf(-extra) * (1.0 + log_weight * (1.0 / e).ln()))
            .collect();
        let p1 = fit_exponent(&eps, &v1).unwrap().p;
        let p2 = fit_exponent(&eps, &v2).unwrap().p;
        prop_assert!(p1 <= p2 + 0.05, "{p1} > {p2}");
    }

    #[test]
    fn classes_respect_the_inclusion_chain(
        p in -1.0f64..3.0,
        q in 0.0f64..4.0,
        c in 0.1f64..10.0,
        kind in 0usize..3,
    ) {
        let eps = default_sweep();
        let v: Vec<f64> = eps
            .iter()
            .map(|e| match kind {
                0 => c * e.powf(-p),
                1 => c + q * (1.0 / e).ln(),
                _ => c * (1.0 + (1.0 / e).ln()).powf(q),
            })
            .collect();
        let (_, class) = classify_values(&eps, &v, &ClassifyConfig::default()).unwrap();
        if class.satisfies(Requirement::Bounded) {
            prop_assert!(class.satisfies(Requirement::LogType));
        }
        if class.satisfies(Requirement::LogType) {
            prop_assert!(class.satisfies(Requirement::Moderate));
        }
    }

    #[test]
    fn spec_survives_serialization(
        name in prop::sample::select(builtins::NAMES.to_vec()),
        h in 0.005f64..0.05,
        k in 4i32..12,
        r in rescaling(),
        solver in prop_oneof![Just(SolverChoice::System), Just(SolverChoice::Wave), Just(SolverChoice::Both)],
    ) {
        let mut spec = parse_spec(builtins::text(name).unwrap()).unwrap();
        spec.grid.h = h;
        spec.mollifier = r;
        spec.outputs.eps = vec![2f64.powi(-k), 2f64.powi(-k - 2)];
        spec.outputs.solver = solver;
        let again = parse_spec(&spec.to_toml().unwrap()).unwrap();
        prop_assert_eq!(again, spec);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn transform_round_trips_with_symmetric_blocks(
        r0 in 0.5f64..3.0,
        r1 in 0.0f64..1.0,
        g0 in -0.3f64..0.3,
        a0 in -1.0f64..1.0,
        b0 in -1.0f64..1.0,
        b1 in -1.0f64..1.0,
        c0 in -1.0f64..1.0,
    ) {
        let p = polynomial_problem(r0, r1, g0, a0, b0, b1, c0);
        let sys = wave_to_system(&p).unwrap();
        let sample = ValidationSample::default_for(&p.domain, p.horizon);
        for i in 0..sample.grid.num_points() {
            let (t, x) = sample.grid.point(i);
            for a in &sys.a {
                let m = a.eval(0.1, t, &x).unwrap();
                prop_assert!(m == m.transpose());
            }
        }
        let (q, _) = system_to_wave(&sys).unwrap();
        for (name, d) in coefficient_differences(&p, &q, &sample).unwrap() {
            prop_assert!(d <= 1e-8, "{name}: {d}");
        }
    }

    #[test]
    fn zero_data_stays_zero(
        r0 in 0.5f64..3.0,
        r1 in 0.0f64..1.0,
        g0 in -0.3f64..0.3,
        a0 in -1.0f64..1.0,
        b0 in -1.0f64..1.0,
        c0 in -1.0f64..1.0,
        eps in sweep_eps(),
    ) {
        let p = polynomial_problem(r0, r1, g0, a0, b0, 0.0, c0);
        let grid = GridSpec { h: 0.05, ..Default::default() };
        let sys = solve_system(&wave_to_system(&p).unwrap(), eps, &grid).unwrap();
        let wave = solve_wave(&p, eps, &grid).unwrap();
        prop_assert_eq!(sys.max_abs, 0.0);
        prop_assert_eq!(wave.max_abs, 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    /// Periodic, constant coefficients, no lower-order terms: the discrete
    /// L² norm of the state must not grow over ten horizons.
    #[test]
    fn energy_stays_bounded_without_lower_order_terms(speed in 0.5f64..2.0, mode in 1u32..4, amp in 0.1f64..3.0) {
        let domain = Domain::new(vec![0.0], vec![1.0], 0.0).unwrap();
        let mut p = constant_problem(domain, 10.0, Matrix::diag(&[speed * speed])).unwrap();
        p.u0 = closed("u0", &format!("{amp}*sin({}*pi*x)", 2 * mode), 1);
        p.u1 = closed("u1", &format!("{amp}*cos({}*pi*x)", 2 * mode), 1);
        let grid = GridSpec { h: 0.02, boundary: Boundary::Periodic, snapshots: 40, ..Default::default() };
        let sol = solve_system(&wave_to_system(&p).unwrap(), 0.1, &grid).unwrap();
        let mask = vec![true; sol.snapshots[0].values.len()];
        let norms: Vec<f64> = sol.snapshots.iter().map(|s| masked_l2(&s.values, &mask, grid.h)).collect();
        let start = norms[0];
        for (s, n) in sol.snapshots.iter().zip(&norms) {
            prop_assert!(*n <= start * (1.0 + 1e-9), "t={}: {n} > {start}", s.t);
        }
    }
}
