use hawkes_dt::analysis::{
    kolmogorov_survival, ks_two_sample, log_log_slope, marginal_convergence_experiment,
    wasserstein1, AnalysisError, ExperimentSpec, SampleSet, KS_LEVEL,
};
use hawkes_dt::rng::mix_seed;
use hawkes_dt::{simulate_exact, state_at, HawkesParams, PathRng, PathSeed};
use proptest::prelude::*;
use rayon::prelude::*;

fn set(values: Vec<f64>) -> SampleSet {
    SampleSet::new("s", values).unwrap()
}

/// Alternating series for the Kolmogorov tail, summed until the terms vanish.
fn kolmogorov_series(x: f64) -> f64 {
    let mut sum = 0.0;
    for k in 1..2000 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * x * x).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term == 0.0 {
            break;
        }
    }
    2.0 * sum
}

#[test]
fn kolmogorov_tail_matches_series() {
    // The series is accurate wherever it converges quickly enough to trust.
    for i in 0..200 {
        let x = 0.5 + 2.5 * i as f64 / 200.0;
        let a = kolmogorov_survival(x);
        let b = kolmogorov_series(x);
        assert!((a - b).abs() < 1e-12, "x = {x}: {a} vs {b}");
    }
    // Critical values of the Kolmogorov distribution.
    assert!((kolmogorov_survival(1.358_099) - 0.05).abs() < 1e-6);
    assert!((kolmogorov_survival(1.627_624) - 0.01).abs() < 1e-6);
    assert_eq!(kolmogorov_survival(0.0), 1.0);
    assert!(kolmogorov_survival(0.1) > 1.0 - 1e-12);
}

#[test]
fn ks_on_hand_computed_samples() {
    let a = set((0..100).map(f64::from).collect());
    let b = set((50..150).map(f64::from).collect());
    let ks = ks_two_sample(&a, &b).unwrap();
    assert_eq!(ks.statistic, 0.5);
    let expected = kolmogorov_series(50f64.sqrt() * 0.5);
    assert!((ks.pvalue - expected).abs() < 1e-15);
    // Pairwise gaps of 50 between sorted samples.
    assert_eq!(wasserstein1(&a, &b).unwrap(), 50.0);
}

#[test]
fn near_ties_are_ties() {
    let mut rng = PathRng::new(PathSeed::new(3, 0));
    let base: Vec<f64> = (0..500).map(|_| 1.0 + rng.uniform()).collect();
    let nudged: Vec<f64> = base.iter().map(|v| v * (1.0 + 1e-14)).collect();
    let ks = ks_two_sample(&set(base.clone()), &set(nudged)).unwrap();
    assert_eq!(ks.statistic, 0.0);
    assert_eq!(ks.pvalue, 1.0);
}

#[test]
fn wasserstein_unequal_sizes() {
    let mut rng = PathRng::new(PathSeed::new(4, 0));
    let a: Vec<f64> = (0..300).map(|_| rng.uniform()).collect();
    let doubled: Vec<f64> = a.iter().chain(&a).copied().collect();
    assert!(wasserstein1(&set(a.clone()), &set(doubled)).unwrap().abs() < 1e-15);
    let shifted: Vec<f64> = a.iter().chain(&a).map(|v| v + 0.25).collect();
    let w = wasserstein1(&set(a), &set(shifted)).unwrap();
    assert!((w - 0.25).abs() < 1e-12, "{w}");
}

#[test]
fn small_and_bad_samples_are_rejected() {
    let small = set(vec![1.0; 50]);
    let ok = set(vec![1.0; 200]);
    assert!(matches!(
        ks_two_sample(&small, &ok),
        Err(AnalysisError::InsufficientSamples { got: 50, .. })
    ));
    assert!(matches!(
        wasserstein1(&ok, &small),
        Err(AnalysisError::InsufficientSamples { .. })
    ));
    assert!(matches!(
        SampleSet::new("x", vec![1.0, f64::NAN]),
        Err(AnalysisError::NonFinite)
    ));
    assert!(matches!(
        log_log_slope(&[1.0, 2.0], &[1.0, 2.0]),
        Err(AnalysisError::TooFewRows(2))
    ));
}

#[test]
fn slope_of_exact_power_law() {
    let xs = [1e-1, 1e-2, 1e-3, 1e-4];
    let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(0.75)).collect();
    assert!((log_log_slope(&xs, &ys).unwrap() - 0.75).abs() < 1e-12);
}

#[test]
fn ks_calibration_under_the_null() {
    // Two independent exact samples of lambda_T: the test should reject at the
    // 1% level in about one repetition out of a hundred.
    let p = HawkesParams::fig4();
    let t = 1.0;
    let draw = |master: u64| -> SampleSet {
        let values = (0..10_000u64)
            .into_par_iter()
            .map(|i| {
                let rec = simulate_exact(&p, t, PathSeed::new(master, i));
                state_at(&rec, &p, t).unwrap().lambda
            })
            .collect();
        set(values)
    };
    let accepted = (0..100u64)
        .filter(|&r| {
            let a = draw(mix_seed(7_000, 2 * r));
            let b = draw(mix_seed(7_000, 2 * r + 1));
            ks_two_sample(&a, &b).unwrap().pvalue > KS_LEVEL
        })
        .count();
    assert!(accepted >= 98, "accepted {accepted} of 100");
}

fn spec<'a>(p: &'a HawkesParams, n_list: &'a [u64], seed: u64) -> ExperimentSpec<'a> {
    ExperimentSpec {
        params: p,
        oracle: None,
        t: 1.0,
        n_list,
        paths: 400,
        seed,
    }
}

#[test]
fn experiment_is_reproducible() {
    let p = HawkesParams::fig4();
    let ns = [1000u64, 10, 100];
    let a = marginal_convergence_experiment(&spec(&p, &ns, 11)).unwrap();
    let b = marginal_convergence_experiment(&spec(&p, &ns, 11)).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), 1);
    let rows = &a[0].rows;
    assert_eq!(
        rows.iter().map(|r| r.n).collect::<Vec<_>>(),
        vec![10, 100, 1000]
    );
    // One shared exact arm.
    assert!(rows.windows(2).all(|w| w[0].mean_exact == w[1].mean_exact));
    let c = marginal_convergence_experiment(&spec(&p, &ns, 12)).unwrap();
    assert_ne!(a[0].rows[0].mean_dthp, c[0].rows[0].mean_dthp);
}

#[test]
fn experiment_without_excitation_is_deterministic_flow() {
    // With alpha = 0 both arms follow the same deterministic relaxation.
    let mut p = HawkesParams::fig4();
    p.kernel.alpha = 0.0;
    let ns = [10u64, 100];
    let reports = marginal_convergence_experiment(&spec(&p, &ns, 5)).unwrap();
    let flow = p.lambda_inf + (p.x0 - p.lambda_inf) * (-p.kernel.beta).exp();
    for r in &reports[0].rows {
        assert_eq!(r.ks_statistic, 0.0);
        assert!(r.wasserstein1 < 1e-12);
        assert!((r.mean_dthp - flow).abs() < 1e-12 && (r.mean_exact - flow).abs() < 1e-12);
    }
    assert!(reports[0].passes());
}

#[test]
fn experiment_rejects_bad_setups() {
    let p = HawkesParams::fig4();
    let mut s = spec(&p, &[5], 1);
    assert!(matches!(
        marginal_convergence_experiment(&s),
        Err(AnalysisError::InvalidExperiment(_))
    ));
    s.n_list = &[100];
    s.paths = 10;
    assert!(matches!(
        marginal_convergence_experiment(&s),
        Err(AnalysisError::InsufficientSamples { .. })
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ks_and_w1_are_symmetric(seed in 0u64..1000, n in 100usize..400, m in 100usize..400, shift in -1.0f64..1.0) {
        let mut rng = PathRng::new(PathSeed::new(seed, 0));
        let a = set((0..n).map(|_| rng.uniform()).collect());
        let b = set((0..m).map(|_| rng.uniform() + shift).collect());
        let ab = ks_two_sample(&a, &b).unwrap();
        let ba = ks_two_sample(&b, &a).unwrap();
        prop_assert_eq!(ab, ba);
        prop_assert!((0.0..=1.0).contains(&ab.statistic) && (0.0..=1.0).contains(&ab.pvalue));
        let w_ab = wasserstein1(&a, &b).unwrap();
        let w_ba = wasserstein1(&b, &a).unwrap();
        prop_assert!((w_ab - w_ba).abs() <= 1e-12 * w_ab.max(1.0));
        prop_assert!(w_ab >= 0.0);
    }

    #[test]
    fn w1_of_a_translate_is_the_shift(seed in 0u64..1000, n in 100usize..400, shift in 0.0f64..3.0) {
        let mut rng = PathRng::new(PathSeed::new(seed, 1));
        let a: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
        let b: Vec<f64> = a.iter().map(|v| v + shift).collect();
        let w = wasserstein1(&set(a), &set(b)).unwrap();
        prop_assert!((w - shift).abs() < 1e-12);
    }
}
