use narxid::input_design::{block_start, design_input, design_segment, InputDesignSpec};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn heating() -> InputDesignSpec {
    InputDesignSpec {
        frequencies: vec![0.001, 0.005],
        segment_lengths: vec![1000, 1000],
        operating_points: vec![0.3, 0.5, 0.7],
        amplitudes: vec![0.2, 0.2, 0.2],
        sample_interval: 1.0,
        filter_order: 5,
    }
}

fn bouc_wen() -> InputDesignSpec {
    InputDesignSpec {
        frequencies: vec![0.2, 5.0],
        segment_lengths: vec![16000, 3200],
        operating_points: vec![0.0, 0.0],
        amplitudes: vec![25.0, 50.0],
        sample_interval: 0.005,
        filter_order: 5,
    }
}

/// Fraction of (mean-removed) periodogram power above `f` Hz, by direct DFT.
fn power_fraction_above(x: &[f64], f: f64, ts: f64) -> f64 {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let (mut total, mut above) = (0.0, 0.0);
    for m in 1..=n / 2 {
        let w = 2.0 * std::f64::consts::PI * m as f64 / n as f64;
        let (mut re, mut im) = (0.0, 0.0);
        for (k, v) in x.iter().enumerate() {
            re += (v - mean) * (w * k as f64).cos();
            im -= (v - mean) * (w * k as f64).sin();
        }
        let p = re * re + im * im;
        total += p;
        if m as f64 / (n as f64 * ts) > f {
            above += p;
        }
    }
    above / total
}

#[test]
fn segment_power_concentrates_below_twice_band_edge() {
    // Single zero-centred operating point so block offsets do not add
    // their own step spectrum.
    let mut spec = InputDesignSpec {
        frequencies: vec![0.02, 0.05],
        segment_lengths: vec![2000, 2000],
        operating_points: vec![0.0],
        amplitudes: vec![1.0],
        sample_interval: 1.0,
        filter_order: 5,
    };
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in 0..2 {
            let s = design_segment(i, &spec, &mut rng).unwrap();
            let frac = power_fraction_above(&s, 2.0 * spec.frequencies[i], 1.0);
            assert!(frac < 0.05, "seed {seed} segment {i}: {frac}");
        }
    }
    spec.sample_interval = 0.005;
    spec.frequencies = vec![0.2, 5.0];
    spec.segment_lengths = vec![4000, 4000];
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for i in 0..2 {
        let s = design_segment(i, &spec, &mut rng).unwrap();
        let frac = power_fraction_above(&s, 2.0 * spec.frequencies[i], 0.005);
        assert!(frac < 0.05, "segment {i}: {frac}");
    }
}

#[test]
fn heating_input_visits_each_level_twice() {
    let spec = heating();
    let u = design_input(&spec, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    assert_eq!(u.len(), 2000);
    for seg in 0..2 {
        for (j, o) in spec.operating_points.iter().enumerate() {
            let a = seg * 1000 + block_start(1000, 3, j);
            let b = seg * 1000 + block_start(1000, 3, j + 1);
            let mean = u[a..b].iter().sum::<f64>() / (b - a) as f64;
            // Slow segments hold one excursion per block, so the block mean
            // sits within the excursion amplitude of its level.
            assert!((mean - o).abs() < 0.2, "segment {seg} level {o}: mean {mean}");
        }
    }
}

#[test]
fn bouc_wen_input_grows_in_amplitude() {
    let spec = bouc_wen();
    let u = design_input(&spec, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
    assert_eq!(u.len(), 19200);
    let peak = |s: &[f64]| s.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mean = u.iter().sum::<f64>() / u.len() as f64;
    assert!(mean.abs() < 10.0, "{mean}");
    // Block peaks follow the amplitude schedule within the smoothing overshoot.
    let blocks = [(0, 8000, 25.0), (8000, 16000, 50.0), (16000, 17600, 25.0), (17600, 19200, 50.0)];
    for (a, b, g) in blocks {
        let p = peak(&u[a..b]);
        assert!(p <= g * 1.05 + 2.5 && p > 0.5 * g, "[{a},{b}): {p}");
    }
}

#[test]
fn identification_and_validation_seeds_differ() {
    let spec = heating();
    let a = design_input(&spec, &mut ChaCha8Rng::seed_from_u64(10)).unwrap();
    let b = design_input(&spec, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
    assert_ne!(a, b);
}

#[test]
fn filters_are_stable_for_both_presets() {
    for spec in [heating(), bouc_wen()] {
        for i in 0..spec.frequencies.len() {
            let f = spec.segment_filter(i).unwrap();
            assert!(f.is_stable());
            assert!((f.dc_gain() - 1.0).abs() < 1e-6);
        }
        assert!(spec.final_filter().unwrap().is_stable());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn same_seed_same_input(seed in any::<u64>()) {
        let spec = heating();
        let a = design_input(&spec, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let b = design_input(&spec, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn segments_stay_in_envelope(seed in any::<u64>(), which in 0usize..2) {
        let spec = if which == 0 { heating() } else { bouc_wen() };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (lo, hi) = spec.envelope();
        for i in 0..spec.frequencies.len() {
            let s = design_segment(i, &spec, &mut rng).unwrap();
            prop_assert!(s.iter().all(|v| *v >= lo - 1e-12 && *v <= hi + 1e-12));
        }
    }

    #[test]
    fn designed_input_stays_in_envelope(seed in any::<u64>(), which in 0usize..2) {
        let spec = if which == 0 { heating() } else { bouc_wen() };
        let u = design_input(&spec, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let (lo, hi) = spec.envelope();
        // Smoothing a signal confined to [lo, hi] keeps it within the
        // impulse-response L1 norm times the half-width around the centre.
        let l1 = spec.final_filter().unwrap().impulse_l1_norm(20_000);
        let (c, r) = ((hi + lo) / 2.0, (hi - lo) / 2.0);
        for v in &u {
            prop_assert!((v - c).abs() <= l1 * r + 1e-9, "{} outside {} ± {}", v, c, l1 * r);
        }
    }
}
