use evsr::poisson_sampler::{
    sample_event_sequence, sample_homogeneous, PointProcessSpec, DEFAULT_HEADROOM,
};
use evsr::rate_field::RateFunction;
use evsr::rng::{keyed_rng, seeded_rng, StreamKey};
use evsr::stats::{correlation, ks_one_sample, ks_one_sample_critical, mean, std_dev};
use evsr::Polarity;
use rand::Rng;

#[test]
fn homogeneous_counts_have_poisson_moments() {
    let (rate, horizon) = (1e-3, 1e6);
    let mut rng = seeded_rng(1);
    let counts: Vec<f64> = (0..10_000)
        .map(|_| sample_homogeneous(rate, horizon, &mut rng).unwrap().len() as f64)
        .collect();
    let (m, v) = (mean(&counts), std_dev(&counts).powi(2));
    // standard errors: sqrt(1000 / 1e4) for the mean, about 14 for the variance
    assert!((m - 1000.0).abs() < 1.5, "mean {m}");
    assert!((v - 1000.0).abs() < 70.0, "variance {v}");
}

#[test]
fn homogeneous_gaps_are_exponential() {
    let rate = 0.01;
    let mut rng = seeded_rng(2);
    let times = sample_homogeneous(rate, 2e6, &mut rng).unwrap();
    let gaps: Vec<f64> = std::iter::once(times[0])
        .chain(times.windows(2).map(|w| w[1] - w[0]))
        .collect();
    let d = ks_one_sample(&gaps, |x| 1.0 - (-rate * x).exp());
    assert!(d < ks_one_sample_critical(gaps.len(), 0.01), "D = {d}");
}

#[test]
fn constant_rate_gives_uniform_times() {
    let horizon = 1000;
    let spec = PointProcessSpec::new(
        5,
        RateFunction::constant(0.02, horizon, 50).unwrap(),
        horizon,
    )
    .unwrap();
    let mut rng = seeded_rng(3);
    let mut pooled = Vec::new();
    for _ in 0..10_000 {
        let s = sample_event_sequence(&spec, DEFAULT_HEADROOM, &mut rng).unwrap();
        assert_eq!(s.times.len(), 5);
        pooled.extend(s.times.iter().map(|&t| t as f64));
    }
    // integer ticks against the continuous law: allow one tick of slack
    let d = ks_one_sample(&pooled, |x| (x / horizon as f64).clamp(0.0, 1.0));
    let crit = ks_one_sample_critical(pooled.len(), 0.01) + 1.0 / horizon as f64;
    assert!(d < crit, "D = {d}, critical {crit}");
}

#[test]
fn two_bin_rate_splits_one_to_three() {
    let rate = RateFunction::new(500, vec![1.0 / 3.0, 1.0]).unwrap();
    let spec = PointProcessSpec::new(1, rate, 1000).unwrap();
    let mut rng = seeded_rng(4);
    let n = 10_000;
    let late = (0..n)
        .filter(|_| {
            sample_event_sequence(&spec, DEFAULT_HEADROOM, &mut rng)
                .unwrap()
                .times[0]
                >= 500
        })
        .count();
    let frac = late as f64 / n as f64;
    let se = (0.75f64 * 0.25 / n as f64).sqrt();
    assert!((frac - 0.75).abs() < 4.0 * se, "fraction {frac}");
}

#[test]
fn exact_counts_for_random_shapes() {
    let mut rng = seeded_rng(5);
    for trial in 0..300 {
        let horizon = rng.random_range(1..20_000u32);
        let bin = rng.random_range(1..2_000u32);
        let bins = horizon.div_ceil(bin) as usize + 1;
        let values: Vec<f64> = (0..bins)
            .map(|_| {
                if rng.random_bool(0.4) {
                    0.0
                } else {
                    rng.random_range(0.0..1.0)
                }
            })
            .collect();
        let n = rng.random_range(0..200usize);
        let spec =
            PointProcessSpec::new(n, RateFunction::new(bin, values).unwrap(), horizon).unwrap();
        let mut sample_rng = keyed_rng(trial, StreamKey::new(0, 0, Polarity::On, 0));
        let s = sample_event_sequence(&spec, DEFAULT_HEADROOM, &mut sample_rng).unwrap();
        assert_eq!(s.times.len(), n, "trial {trial}");
        assert!(s.times.iter().all(|&t| (1..=horizon).contains(&t)));
        assert!(s.times.windows(2).all(|w| w[0] <= w[1]));
        if spec.rate_max() > 0.0 && !s.uniform_fallback {
            // no event where the rate is zero
            assert!(s
                .times
                .iter()
                .all(|&t| spec.rate.at(t as f64 - 0.5) > 0.0 || spec.rate.at(t as f64) > 0.0));
        }
    }
}

#[test]
fn zero_rate_and_over_capacity_are_flagged() {
    let mut rng = seeded_rng(6);
    let silent =
        PointProcessSpec::new(7, RateFunction::constant(0.0, 100, 10).unwrap(), 100).unwrap();
    let s = sample_event_sequence(&silent, DEFAULT_HEADROOM, &mut rng).unwrap();
    assert!(s.uniform_fallback);
    assert_eq!(s.times.len(), 7);
    let crowded =
        PointProcessSpec::new(30, RateFunction::constant(1.0, 10, 5).unwrap(), 10).unwrap();
    let s = sample_event_sequence(&crowded, DEFAULT_HEADROOM, &mut rng).unwrap();
    assert!(s.over_capacity);
    assert_eq!(s.times.len(), 30);
}

#[test]
fn distinct_keys_are_uncorrelated() {
    let horizon = 10_000;
    let spec = PointProcessSpec::new(
        200,
        RateFunction::constant(0.02, horizon, 100).unwrap(),
        horizon,
    )
    .unwrap();
    let binned = |key: StreamKey| {
        let mut rng = keyed_rng(42, key);
        let s = sample_event_sequence(&spec, DEFAULT_HEADROOM, &mut rng).unwrap();
        let mut counts = [0.0; 10];
        for t in s.times {
            counts[((t - 1) / 1000) as usize] += 1.0;
        }
        counts
    };
    let pairs: Vec<([f64; 10], [f64; 10])> = (0..1000u16)
        .map(|i| {
            let (x, y) = (i % 40, i / 40);
            (
                binned(StreamKey::new(x, y, Polarity::On, 3)),
                binned(StreamKey::new(x + 1, y, Polarity::On, 3)),
            )
        })
        .collect();
    for b in 0..10 {
        let a: Vec<f64> = pairs.iter().map(|p| p.0[b]).collect();
        let c: Vec<f64> = pairs.iter().map(|p| p.1[b]).collect();
        let rho = correlation(&a, &c);
        assert!(rho.abs() < 0.1, "bin {b}: rho {rho}");
    }
    let key = StreamKey::new(5, 5, Polarity::Off, 1);
    assert_eq!(binned(key), binned(key));
}
