//! Randomized invariants. Plants are built from a proptest-chosen seed so a
//! shrunk failure reproduces exactly.

mod common;

use hinfsf::hinfnorm::{
    closed_loop, freq_sweep_norm, hinf_norm, hinf_norm_bisect, log_grid, NormOptions,
};
use hinfsf::linalg;
use hinfsf::model::{
    io, is_incidence_matrix, validate_system, CostWeights, GainMatrix, LtiSystem, StateSpace,
};
use hinfsf::positivity::{
    closed_loop_positivity_condition, disturbance_to_state, internal_positivity, is_metzler,
};
use hinfsf::riccati::{care_residual, synth_are, CareOptions};
use hinfsf::simulate::{feedback_response, step_response};
use hinfsf::synthesis::{
    optimal_gamma, reduce_coordination, synth_coordinated, synth_optimal, synth_weighted,
    CoordinatedPlant,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;

fn dims() -> impl Strategy<Value = (usize, usize, u64)> {
    (1usize..=6, 1usize..=6, any::<u64>())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn validated_state_matrix_is_exactly_symmetric((n, m, seed) in dims(), rel in 0.0f64..1e-10) {
        let mut rng = common::rng(seed);
        let a = common::random_sym_hurwitz(&mut rng, n);
        let noise = common::uniform(&mut rng, n, n, -1.0, 1.0) * (rel * a.amax());
        let b = common::uniform(&mut rng, n, m, -1.0, 1.0);
        let sys = validate_system(a + noise, b, 1e-9, 1e-9).unwrap();
        prop_assert_eq!(sys.a(), &sys.a().transpose());
        prop_assert!(linalg::max_real_part(sys.a()).unwrap() <= -1e-9);
    }

    #[test]
    fn sparsity_survives_round_trip((n, m, seed) in dims(), tol in 0.0f64..0.5) {
        let mut rng = common::rng(seed);
        let l = DMatrix::from_fn(m, n, |_, _| if rng.random_bool(0.4) { 0.0 } else { rng.random_range(-1.0..1.0) });
        let g = GainMatrix::new(l);
        let back = io::parse_gain(&io::gain_to_json(&g)).unwrap();
        prop_assert!(back.sparsity(tol).same_mask(&g.sparsity(tol)));
        prop_assert_eq!(back, g);
    }

    #[test]
    fn incidence_matrices_give_metzler_products(n in 2usize..=7, m in 1usize..=8, seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let b = common::random_incidence(&mut rng, n, m);
        prop_assert!(is_incidence_matrix(&b));
        prop_assert!(is_metzler(&-(&b * b.transpose()), 0.0).unwrap().is_metzler);
        let sys = LtiSystem::new(common::random_diagonal_a(&mut rng, n), b).unwrap();
        prop_assert!(closed_loop_positivity_condition(&sys, 1e-12).unwrap());
    }

    #[test]
    fn output_scaling_scales_the_norm((n, m, seed) in dims(), alpha in 0.05f64..20.0) {
        let mut rng = common::rng(seed);
        let sys = common::random_system(&mut rng, n, m);
        let ss = closed_loop(&sys, &synth_optimal(&sys).unwrap()).unwrap();
        let scaled = StateSpace::new(ss.a.clone(), ss.b.clone(), &ss.c * alpha, &ss.d * alpha).unwrap();
        let g = hinf_norm(&ss).unwrap().gamma;
        let ga = hinf_norm(&scaled).unwrap().gamma;
        let tol = 2.0 * 1e-6 * (ga.max(1.0) + alpha * g.max(1.0));
        prop_assert!((ga - alpha * g).abs() <= tol, "{} vs {}", ga, alpha * g);
    }

    #[test]
    fn bracket_contains_sweep_bound((n, m, seed) in dims()) {
        let mut rng = common::rng(seed);
        let sys = common::random_system(&mut rng, n, m);
        let l = GainMatrix::new(common::uniform(&mut rng, m, n, -0.3, 0.3));
        let Ok(ss) = closed_loop(&sys, &l) else { return Ok(()) };
        let r = hinf_norm(&ss).unwrap();
        let sweep = freq_sweep_norm(&ss, &log_grid(1e-3, 1e3, 200)).unwrap();
        prop_assert!(sweep <= r.upper * (1.0 + 1e-12));
        prop_assert!(r.lower <= r.upper);
    }

    #[test]
    fn optimal_gain_attains_closed_form_gamma((n, m, seed) in dims()) {
        let mut rng = common::rng(seed);
        let sys = common::random_system(&mut rng, n, m);
        let g = optimal_gamma(&sys);
        let r = hinf_norm(&closed_loop(&sys, &synth_optimal(&sys).unwrap()).unwrap()).unwrap();
        prop_assert!((r.gamma - g).abs() <= 2e-6 * g.max(1.0));
    }

    #[test]
    fn weighted_identity_is_optimal_bitwise((n, m, seed) in dims()) {
        let mut rng = common::rng(seed);
        let sys = common::random_system(&mut rng, n, m);
        let a = synth_weighted(&sys, &CostWeights::identity(n, m), 1e-12).unwrap();
        prop_assert_eq!(a, synth_optimal(&sys).unwrap());
    }

    #[test]
    fn positivity_equivalence_on_diagonal_plants((n, m, seed) in dims()) {
        let mut rng = common::rng(seed);
        let sys = common::random_diagonal_system(&mut rng, n, m);
        let from_b = is_metzler(&-(sys.b() * sys.b().transpose()), 1e-12).unwrap().is_metzler;
        let l = synth_optimal(&sys).unwrap();
        let from_loop = is_metzler(&(sys.a() + sys.b() * &l.l), 1e-12).unwrap().is_metzler;
        prop_assert_eq!(from_b, from_loop);
        prop_assert_eq!(closed_loop_positivity_condition(&sys, 1e-12).unwrap(), from_b);
    }

    /// Diagonal weights keep the loop Metzler when every product
    /// `b_ik b_jk` (i != j) is nonpositive, as for scaled incidence matrices.
    #[test]
    fn diagonal_weights_keep_incidence_loops_metzler(n in 2usize..=6, m in 1usize..=6, seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let scale = DMatrix::from_diagonal(&DVector::from_fn(m, |_, _| rng.random_range(0.1..3.0)));
        let b = common::random_incidence(&mut rng, n, m) * scale;
        let sys = LtiSystem::new(common::random_diagonal_a(&mut rng, n), b).unwrap();
        prop_assert!(is_metzler(&-(sys.b() * sys.b().transpose()), 0.0).unwrap().is_metzler);
        let q = DMatrix::from_diagonal(&DVector::from_fn(n, |_, _| rng.random_range(0.1..5.0)));
        let r = DMatrix::from_diagonal(&DVector::from_fn(m, |_, _| rng.random_range(0.1..5.0)));
        let w = CostWeights::new(q, r, 1e-12).unwrap();
        let l = synth_weighted(&sys, &w, 1e-12).unwrap();
        prop_assert!(is_metzler(&(sys.a() + sys.b() * &l.l), 1e-12).unwrap().is_metzler);
    }

    #[test]
    fn coordinated_paths_agree(nu in 2usize..=5, m in 1usize..=3, seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let plant = CoordinatedPlant::new(common::random_blocks(&mut rng, nu, m, 3), 1e-9, 1e-9).unwrap();
        let stacked = synth_coordinated(&plant).unwrap().stacked();
        for j in 0..stacked.ncols() {
            for r in 0..m {
                let s: f64 = (0..nu).map(|i| stacked[(i * m + r, j)]).sum();
                prop_assert!(s.abs() <= 1e-12);
            }
        }
        let via = reduce_coordination(&plant).unwrap().solve(1e-12).unwrap();
        prop_assert!(common::max_abs_diff(&stacked, &via.l) <= 1e-12);
    }

    #[test]
    fn halving_dt_reproduces_samples((n, m, seed) in dims()) {
        let mut rng = common::rng(seed);
        let sys = common::random_system(&mut rng, n, m);
        let l = synth_optimal(&sys).unwrap();
        let w = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let coarse = feedback_response(&sys, &l, &w, 5.0, 0.02).unwrap();
        let fine = feedback_response(&sys, &l, &w, 5.0, 0.01).unwrap();
        let scale = coarse.states.iter().map(|x| x.amax()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        for (k, x) in coarse.states.iter().enumerate() {
            let gap = (x - &fine.states[2 * k]).amax();
            prop_assert!(gap <= 1e-9 * scale, "step {}: {:e}", k, gap);
        }
    }

    #[test]
    fn response_settles_to_dc_value((n, m, seed) in dims()) {
        let mut rng = common::rng(seed);
        let sys = common::random_system(&mut rng, n, m);
        let l = synth_optimal(&sys).unwrap();
        let a_cl = sys.a() + sys.b() * &l.l;
        let rate = -linalg::max_real_part(&a_cl).unwrap();
        let horizon = 30.0 / rate;
        let w = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let t = feedback_response(&sys, &l, &w, horizon, horizon / 500.0).unwrap();
        let dc = -linalg::solve(&a_cl, &DMatrix::from_column_slice(n, 1, w.as_slice())).unwrap();
        let last = DMatrix::from_column_slice(n, 1, t.states.last().unwrap().as_slice());
        prop_assert!((&last - &dc).amax() <= 1e-6 * dc.amax().max(f64::MIN_POSITIVE));
    }

    #[test]
    fn positive_loops_keep_states_nonnegative(n in 2usize..=6, m in 1usize..=6, seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let b = common::random_incidence(&mut rng, n, m);
        let sys = LtiSystem::new(common::random_diagonal_a(&mut rng, n), b).unwrap();
        let l = synth_optimal(&sys).unwrap();
        let ss = disturbance_to_state(&sys, &l.l).unwrap();
        prop_assert!(internal_positivity(&ss, 1e-12).unwrap().verdict);
        let w = DVector::from_fn(n, |_, _| rng.random_range(0.0..2.0));
        let t = step_response(&ss, &w, 10.0, 0.05).unwrap();
        prop_assert!(t.min_state() >= -1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn perturbations_never_beat_the_optimum((n, m, seed) in dims()) {
        let mut rng = common::rng(seed);
        let sys = common::random_system(&mut rng, n, m);
        let l = synth_optimal(&sys).unwrap();
        let g = optimal_gamma(&sys);
        let opts = NormOptions::default();
        for scale in [1e-2, 1e-1, 1.0] {
            for _ in 0..10 {
                let dl = common::uniform(&mut rng, m, n, -1.0, 1.0);
                let dl = &dl * (scale / linalg::spectral_norm(&dl));
                let Ok(ss) = closed_loop(&sys, &GainMatrix::new(&l.l + dl)) else { continue };
                let r = hinf_norm_bisect(&ss, &opts).unwrap();
                prop_assert!(r.upper >= g - 2e-6 * g.max(1.0), "{} < {}", r.upper, g);
            }
        }
    }

    #[test]
    fn riccati_iteration_reaches_the_optimum((n, m, seed) in dims()) {
        let mut rng = common::rng(seed);
        let sys = common::random_system(&mut rng, n, m);
        let g = optimal_gamma(&sys);
        let are = synth_are(&sys, 1e-6).unwrap();
        prop_assert!((are.achieved_gamma - g).abs() <= 1e-4 * g.max(1.0));
        let bound = CareOptions::default().care_tol * (1.0 + are.care.x.norm().powi(2));
        prop_assert!(care_residual(&sys, are.achieved_gamma, &are.care.x) <= bound);
        let r = hinf_norm(&closed_loop(&sys, &are.gain).unwrap()).unwrap();
        prop_assert!(r.lower <= are.achieved_gamma);
    }
}

#[test]
fn experiment_ignores_thread_count() {
    use hinfsf::simulate::{run_comparison_experiment, ExperimentConfig};
    let cfg = ExperimentConfig {
        num_systems: 12,
        horizon: 2.0,
        ..ExperimentConfig::default()
    };
    let pooled = run_comparison_experiment(&cfg).unwrap();
    let single = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| run_comparison_experiment(&cfg).unwrap());
    assert_eq!(pooled, single);
    assert_eq!(pooled.to_csv().unwrap(), single.to_csv().unwrap());
}
