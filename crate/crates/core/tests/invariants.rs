use narxid::benchmarks::find_preset;
use narxid::estimation::{
    constrained_ls_estimate_regression, els_estimate_regression, ls_estimate_regression, ElsConfig,
    LinearConstraint,
};
use narxid::evaluation::{mape, monte_carlo_noise_sweep, shoelace_area};
use narxid::experiment::ExperimentConfig;
use narxid::hysteresis::hysteresis_signals;
use narxid::input_design::sine_input;
use narxid::regression::build_regression;
use narxid::selection::frols_rank_regression;
use narxid::{
    free_run_simulate, generate_candidates, one_step_predict, CandidateSet, ModelMeta, NarxModel,
    SimulationOptions, TimeSeriesData, Variable,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pool() -> CandidateSet {
    generate_candidates(ModelMeta::new(2, 2, 2, 1), &[Variable::Output, Variable::Input], false).unwrap()
}

/// Random input and a noisy, mildly nonlinear output.
fn record(seed: u64, n: usize) -> TimeSeriesData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut y = vec![0.0; n];
    for k in 2..n {
        y[k] = 0.5 * y[k - 1] - 0.1 * y[k - 2] + u[k - 1] + 0.2 * u[k - 2] * u[k - 2]
            + 0.05 * rng.random_range(-1.0..1.0);
    }
    TimeSeriesData::new(u, y, 1.0, "random").unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn regression_times_theta_is_one_step_prediction(seed in 0u64..1000, mask in 1u32..(1 << 14)) {
        let pool = pool();
        let data = record(seed, 120);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let terms: Vec<_> = pool.terms().iter().enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0).map(|(_, t)| t.clone()).collect();
        let theta: Vec<f64> = terms.iter().map(|_| rng.random_range(-1.0..1.0)).collect();
        let model = NarxModel::new(terms.clone(), theta.clone(), pool.meta(), 1.0).unwrap();
        let pred = one_step_predict(&model, &data).unwrap();
        let reg = narxid::regression::build_regression_terms(&terms, &data, None, None).unwrap();
        prop_assert_eq!(pred.first_sample, reg.first_sample);
        let direct = &reg.matrix * nalgebra::DVector::from_vec(theta);
        prop_assert_eq!(pred.values.as_slice(), direct.as_slice());
    }

    #[test]
    fn phi2_is_a_sign(x in prop::collection::vec(-10.0f64..10.0, 2..60)) {
        let (phi1, phi2) = hysteresis_signals(&x);
        for k in 1..x.len() {
            prop_assert!([-1.0, 0.0, 1.0].contains(&phi2[k]));
            prop_assert_eq!(phi2[k], phi1[k].signum() * (phi1[k] != 0.0) as i32 as f64);
        }
    }

    #[test]
    fn ls_residual_is_orthogonal_and_constraint_costs_residual(seed in 0u64..1000) {
        let data = record(seed, 200);
        let reg = build_regression(&pool(), &data, None).unwrap();
        let ls = ls_estimate_regression(&reg).unwrap();
        let e = nalgebra::DVector::from_vec(ls.residuals.clone());
        for j in 0..reg.cols() {
            let c = reg.matrix.column(j);
            prop_assert!(c.dot(&e).abs() < 1e-8 * c.norm() * e.norm());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 7);
        let constraint = LinearConstraint {
            coefficients: (0..reg.cols()).map(|_| rng.random_range(-1.0..1.0)).collect(),
            value: rng.random_range(-1.0..1.0),
        };
        let con = constrained_ls_estimate_regression(&reg, std::slice::from_ref(&constraint)).unwrap();
        let dot: f64 = constraint.coefficients.iter().zip(&con.theta).map(|(a, b)| a * b).sum();
        prop_assert!((dot - constraint.value).abs() < 1e-9);
        let norm = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>();
        prop_assert!(norm(&con.residuals) >= norm(&ls.residuals) * (1.0 - 1e-12));
    }

    #[test]
    fn els_without_noise_terms_is_ls(seed in 0u64..1000) {
        let data = record(seed, 150);
        let reg = build_regression(&pool(), &data, None).unwrap();
        let ls = ls_estimate_regression(&reg).unwrap();
        let els = els_estimate_regression(&reg, 0, &ElsConfig::default()).unwrap();
        prop_assert_eq!(ls.theta, els.theta);
        prop_assert!(els.change_norms.iter().all(|c| c.is_finite()));
    }

    #[test]
    fn frols_energy_decomposition_and_order_invariance(seed in 0u64..1000) {
        let data = record(seed, 150);
        let reg = build_regression(&pool(), &data, None).unwrap();
        let ranking = frols_rank_regression(&reg, 8, 0.0).unwrap();
        let total: f64 = ranking.err.iter().sum::<f64>() + ranking.residual_energy;
        prop_assert!((total - 1.0).abs() < 1e-6, "{}", total);

        let yy = reg.target.dot(&reg.target);
        let best = (0..reg.cols())
            .map(|j| { let c = reg.matrix.column(j); c.dot(&reg.target).powi(2) / (c.dot(&c) * yy) })
            .fold(f64::MIN, f64::max);
        prop_assert!((ranking.err[0] - best).abs() <= 1e-12);

        let mut order: Vec<usize> = (0..reg.cols()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..order.len()).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        let shuffled = frols_rank_regression(&reg.select_columns(&order), 8, 0.0).unwrap();
        prop_assert_eq!(&shuffled.terms, &ranking.terms);
    }

    #[test]
    fn mape_is_affine_invariant(
        y in prop::collection::vec(-5.0f64..5.0, 5..40),
        noise in prop::collection::vec(-0.5f64..0.5, 40),
        scale in prop_oneof![-10.0f64..-0.1, 0.1f64..10.0],
        offset in -100.0f64..100.0,
    ) {
        prop_assume!(y.iter().cloned().fold(f64::MIN, f64::max) - y.iter().cloned().fold(f64::MAX, f64::min) > 1e-3);
        let y_hat: Vec<f64> = y.iter().zip(&noise).map(|(a, b)| a + b).collect();
        let t = |v: &[f64]| v.iter().map(|x| scale * x + offset).collect::<Vec<_>>();
        let before = mape(&y, &y_hat).unwrap();
        let after = mape(&t(&y), &t(&y_hat)).unwrap();
        prop_assert!((before - after).abs() <= 1e-9 * before.max(1.0), "{} vs {}", before, after);
    }
}

#[test]
fn monte_carlo_sweep_is_bit_reproducible() {
    let cfg = ExperimentConfig::heating();
    let setup = cfg.setup().unwrap();
    let a = monte_carlo_noise_sweep(&setup, &[0.0, 0.1], 2, 9).unwrap();
    let b = monte_carlo_noise_sweep(&setup, &[0.0, 0.1], 2, 9).unwrap();
    assert_eq!(a.seeds, b.seeds);
    assert_eq!(a.mapes, b.mapes);
    let c = monte_carlo_noise_sweep(&setup, &[0.0, 0.1], 2, 10).unwrap();
    assert_ne!(a.seeds, c.seeds);
}

/// Free-run loop area over the last of four periods of a sine.
fn preset_loop_area(name: &str, amp: f64, freq: f64, offset: f64) -> f64 {
    let m = find_preset(name).unwrap().narx().unwrap().clone();
    let per = (1.0 / (freq * m.ts)).round() as usize;
    let u = sine_input(amp, freq, 0.0, offset, 4 * per, m.ts);
    let y0 = vec![0.0; m.max_output_lag()];
    let y = free_run_simulate(&m, &u, &y0, SimulationOptions::with_bound(1e6))
        .unwrap()
        .into_result()
        .unwrap();
    shoelace_area(&u[3 * per..], &y[3 * per..])
}

#[test]
fn valve_model_traces_a_positive_loop() {
    let area = preset_loop_area("valve-narx", 0.45, 0.1, 3.0);
    assert!(area > 0.0, "{area}");
}

#[test]
#[ignore = "the printed Bouc-Wen NARX coefficients trace the loop clockwise: +7.89 phi2(k-1) makes y lead u"]
fn bouc_wen_model_traces_a_positive_loop() {
    let area = preset_loop_area("bouc-wen-narx", 50.0, 0.2, 0.0);
    assert!(area > 0.0, "{area}");
}
