//! Draw event times for one pixel by thinning and compare them with the
//! exact inverse-transform sampler.

use evsr::poisson_sampler::{
    sample_conditional_oracle, sample_event_sequence, PointProcessSpec, DEFAULT_HEADROOM,
};
use evsr::rate_field::RateFunction;
use evsr::rng::{keyed_rng, seeded_rng, StreamKey};
use evsr::stats::{ks_two_sample, ks_two_sample_critical};
use evsr::Polarity;

fn main() -> evsr::Result<()> {
    // a rate that rises then falls over 10 ms
    let values: Vec<f64> = (0..20)
        .map(|k| 1.0 - ((k as f64 - 8.0) / 12.0).abs())
        .collect();
    let spec = PointProcessSpec::new(12, RateFunction::new(500, values)?, 10_000)?;

    let mut rng = keyed_rng(7, StreamKey::new(3, 4, Polarity::On, 0));
    let one = sample_event_sequence(&spec, DEFAULT_HEADROOM, &mut rng)?;
    println!("12 events after {} batch(es): {:?}", one.batches, one.times);

    let (mut a, mut b) = (Vec::new(), Vec::new());
    let mut oracle_rng = seeded_rng(1);
    for _ in 0..2_000 {
        a.extend(sample_event_sequence(&spec, DEFAULT_HEADROOM, &mut rng)?.times);
        b.extend(sample_conditional_oracle(&spec, &mut oracle_rng)?.times);
    }
    let d = ks_two_sample(&a, &b);
    println!(
        "KS distance thinning vs oracle: {d:.4} (critical {:.4} at 1%)",
        ks_two_sample_critical(a.len(), b.len(), 0.01)
    );
    Ok(())
}
