//! Nonhomogeneous Poisson event sequences with an exact event count.
//!
//! [`sample_event_sequence`] is the thinning sampler: batches of a
//! homogeneous process at a dominating rate `λ*` are thinned against the
//! binned rate `λ(t)` until `N` events have been accepted.
//! [`sample_conditional_oracle`] draws the same law directly (given its
//! count, a Poisson process has i.i.d. event times with density
//! `λ(t) / ∫λ`) and exists to verify the thinning path.
//!
//! Both return integer microseconds in `[1, T]`, sorted, with ties spread to
//! distinct consecutive ticks when `N <= T`.

use rand::Rng;
use rand_distr::{Distribution, Exp, Poisson};

use crate::error::{Error, Result};
use crate::rate_field::{bin_of_f64, RateFunction};

pub const DEFAULT_HEADROOM: f64 = 2.0;

/// Target event count, rate shape and horizon for one pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct PointProcessSpec {
    pub n_target: usize,
    pub rate: RateFunction,
    /// `T`, µs. Events are placed in `(0, T]`.
    pub horizon: u32,
}

impl PointProcessSpec {
    pub fn new(n_target: usize, rate: RateFunction, horizon: u32) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::arg("horizon must be at least 1 µs"));
        }
        if rate.span() < horizon as u64 {
            return Err(Error::arg(format!(
                "rate covers {} µs, shorter than the horizon {horizon}",
                rate.span()
            )));
        }
        Ok(PointProcessSpec {
            n_target,
            rate,
            horizon,
        })
    }

    fn active_bins(&self) -> usize {
        bin_of_f64(self.horizon as f64, self.rate.bin_width()) + 1
    }

    /// Largest rate value over the bins intersecting `(0, T]`.
    pub fn rate_max(&self) -> f64 {
        self.rate.values()[..self.active_bins()]
            .iter()
            .copied()
            .fold(0.0, f64::max)
    }
}

/// Sampled times plus the conditions met while producing them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sampled {
    pub times: Vec<u32>,
    /// The rate had zero mass, so times were drawn uniformly on `(0, T]`.
    pub uniform_fallback: bool,
    /// `N > T`: not enough distinct microsecond ticks, ties were kept.
    pub over_capacity: bool,
    /// Homogeneous batches generated (0 for the oracle and the fallback).
    pub batches: usize,
}

/// Homogeneous Poisson process of `rate` events/µs on `(0, horizon]`,
/// built from exponential gaps. Strictly increasing.
pub fn sample_homogeneous<R: Rng + ?Sized>(
    rate: f64,
    horizon: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if !(rate.is_finite() && rate > 0.0) {
        return Err(Error::arg(format!(
            "homogeneous rate must be positive, got {rate}"
        )));
    }
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::arg(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    let gap = Exp::new(rate).map_err(|e| Error::arg(e.to_string()))?;
    let mut out = Vec::with_capacity((rate * horizon * 1.2) as usize + 4);
    let mut t = 0.0;
    loop {
        t += gap.sample(rng);
        if t > horizon {
            return Ok(out);
        }
        if out.last().is_none_or(|&last| t > last) {
            out.push(t);
        }
    }
}

/// Keep each candidate `s` with probability `λ(s) / λ*`. Order is preserved.
pub fn thin<R: Rng + ?Sized>(
    candidates: &[f64],
    rate: &RateFunction,
    lambda_star: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if !(lambda_star.is_finite() && lambda_star > 0.0) {
        return Err(Error::arg(format!(
            "λ* must be positive, got {lambda_star}"
        )));
    }
    let mut out = Vec::new();
    for &s in candidates {
        let l = rate.at(s);
        if l > lambda_star * (1.0 + 1e-12) {
            return Err(Error::Contract(format!(
                "rate {l} at t = {s} exceeds the dominating rate {lambda_star}"
            )));
        }
        if rng.random::<f64>() * lambda_star < l {
            out.push(s);
        }
    }
    Ok(out)
}

/// Uniform draw on `(0, horizon]`.
fn uniform_open_closed<R: Rng + ?Sized>(horizon: f64, rng: &mut R) -> f64 {
    horizon * (1.0 - rng.random::<f64>())
}

/// Exactly `spec.n_target` event times by thinning.
///
/// The dominating rate is the per-pixel maximum of `λ(t)`, scaled so one
/// batch yields on average `headroom · N` accepted events. A batch is a
/// homogeneous Poisson count `N*` with its points visited in generation
/// order, which for a homogeneous process is an exchangeable order of
/// i.i.d. uniforms. Stopping after the `N`-th acceptance therefore keeps a
/// uniformly chosen subset of the batch and the result has the exact
/// conditional law. When a batch runs out, a fresh one is drawn.
pub fn sample_event_sequence<R: Rng + ?Sized>(
    spec: &PointProcessSpec,
    headroom: f64,
    rng: &mut R,
) -> Result<Sampled> {
    if !(headroom.is_finite() && headroom > 0.0) {
        return Err(Error::arg(format!(
            "headroom must be positive, got {headroom}"
        )));
    }
    let n = spec.n_target;
    let horizon = spec.horizon as f64;
    if n == 0 {
        return Ok(finish(Vec::new(), spec.horizon, false, 0));
    }
    let mass = spec.rate.integral(spec.horizon);
    if mass <= 0.0 {
        let times = (0..n).map(|_| uniform_open_closed(horizon, rng)).collect();
        return Ok(finish(times, spec.horizon, true, 0));
    }
    let rate_max = spec.rate_max();
    // physical rate = scale · λ(t), chosen so a batch yields headroom·N on average
    let scale = headroom * n as f64 / mass;
    let lambda_star = scale * rate_max;
    let batch = Poisson::new(lambda_star * horizon).map_err(|e| Error::arg(e.to_string()))?;

    let mut accepted = Vec::with_capacity(n);
    let mut batches = 0;
    'outer: loop {
        batches += 1;
        let n_star = batch.sample(rng) as u64;
        for _ in 0..n_star {
            let s = uniform_open_closed(horizon, rng);
            if rng.random::<f64>() * rate_max < spec.rate.at(s) {
                accepted.push(s);
                if accepted.len() == n {
                    break 'outer;
                }
            }
        }
    }
    Ok(finish(accepted, spec.horizon, false, batches))
}

/// Exact conditional sampler: `N` i.i.d. draws from `λ(t) / ∫λ` by inverse
/// transform of the piecewise-linear cumulative rate.
pub fn sample_conditional_oracle<R: Rng + ?Sized>(
    spec: &PointProcessSpec,
    rng: &mut R,
) -> Result<Sampled> {
    let n = spec.n_target;
    let horizon = spec.horizon as f64;
    if n == 0 {
        return Ok(finish(Vec::new(), spec.horizon, false, 0));
    }
    let w = spec.rate.bin_width() as f64;
    // cumulative mass at the right edge of each bin, clipped to the horizon
    let mut edges = Vec::new();
    let mut cum = Vec::new();
    let mut total = 0.0;
    for (i, &v) in spec.rate.values().iter().enumerate() {
        let start = i as f64 * w;
        if start >= horizon {
            break;
        }
        let len = w.min(horizon - start);
        total += v * len;
        cum.push(total);
        edges.push((start, v));
    }
    if total <= 0.0 {
        let times = (0..n).map(|_| uniform_open_closed(horizon, rng)).collect();
        return Ok(finish(times, spec.horizon, true, 0));
    }
    let times = (0..n)
        .map(|_| {
            let target = total * (1.0 - rng.random::<f64>());
            let b = cum.partition_point(|&c| c < target).min(cum.len() - 1);
            let before = if b == 0 { 0.0 } else { cum[b - 1] };
            let (start, v) = edges[b];
            (start + (target - before) / v).clamp(f64::MIN_POSITIVE, horizon)
        })
        .collect();
    Ok(finish(times, spec.horizon, false, 0))
}

fn finish(times: Vec<f64>, horizon: u32, uniform_fallback: bool, batches: usize) -> Sampled {
    let (times, over_capacity) = quantize(times, horizon);
    Sampled {
        times,
        uniform_fallback,
        over_capacity,
        batches,
    }
}

/// Round continuous times in `(0, T]` up to integer µs, sort, and spread
/// ties onto distinct consecutive ticks when there is room.
pub fn quantize(times: Vec<f64>, horizon: u32) -> (Vec<u32>, bool) {
    let mut ticks: Vec<u32> = times
        .into_iter()
        .map(|t| (t.ceil() as u32).clamp(1, horizon.max(1)))
        .collect();
    ticks.sort_unstable();
    let n = ticks.len();
    if n > horizon as usize {
        return (ticks, true);
    }
    for i in 1..n {
        if ticks[i] <= ticks[i - 1] {
            ticks[i] = ticks[i - 1] + 1;
        }
    }
    if n > 0 && ticks[n - 1] > horizon {
        ticks[n - 1] = horizon;
        for i in (0..n - 1).rev() {
            if ticks[i] >= ticks[i + 1] {
                ticks[i] = ticks[i + 1] - 1;
            } else {
                break;
            }
        }
    }
    (ticks, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded_rng;

    fn flat(v: f64, horizon: u32, bin: u32) -> RateFunction {
        RateFunction::constant(v, horizon, bin).unwrap()
    }

    #[test]
    fn zero_target_is_empty() {
        let spec = PointProcessSpec::new(0, flat(1.0, 1000, 50), 1000).unwrap();
        let s = sample_event_sequence(&spec, 2.0, &mut seeded_rng(0)).unwrap();
        assert!(s.times.is_empty());
    }

    #[test]
    fn exact_count_sorted_in_range() {
        let mut rng = seeded_rng(3);
        for n in [1usize, 5, 17, 200] {
            let spec = PointProcessSpec::new(n, flat(1.0, 1000, 50), 1000).unwrap();
            let s = sample_event_sequence(&spec, 2.0, &mut rng).unwrap();
            assert_eq!(s.times.len(), n);
            assert!(s.times.windows(2).all(|w| w[0] < w[1]));
            assert!(s.times.iter().all(|&t| (1..=1000).contains(&t)));
        }
    }

    #[test]
    fn silent_rate_falls_back_to_uniform() {
        let spec = PointProcessSpec::new(4, flat(0.0, 1000, 50), 1000).unwrap();
        let s = sample_event_sequence(&spec, 2.0, &mut seeded_rng(1)).unwrap();
        assert!(s.uniform_fallback);
        assert_eq!(s.times.len(), 4);
        let o = sample_conditional_oracle(&spec, &mut seeded_rng(1)).unwrap();
        assert!(o.uniform_fallback);
    }

    #[test]
    fn over_capacity_keeps_ties() {
        let spec = PointProcessSpec::new(12, flat(1.0, 10, 5), 10).unwrap();
        let s = sample_event_sequence(&spec, 2.0, &mut seeded_rng(2)).unwrap();
        assert!(s.over_capacity);
        assert_eq!(s.times.len(), 12);
        assert!(s.times.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn quantize_spreads_ties() {
        let (t, over) = quantize(vec![3.2, 3.9, 4.0, 9.99, 10.0], 10);
        assert!(!over);
        assert_eq!(t, vec![4, 5, 6, 9, 10]);
        let (t, _) = quantize(vec![10.0, 10.0, 10.0], 10);
        assert_eq!(t, vec![8, 9, 10]);
    }

    #[test]
    fn homogeneous_is_deterministic_and_can_be_empty() {
        let a = sample_homogeneous(0.001, 1e6, &mut seeded_rng(11)).unwrap();
        let b = sample_homogeneous(0.001, 1e6, &mut seeded_rng(11)).unwrap();
        assert_eq!(a, b);
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        assert!(sample_homogeneous(0.0, 10.0, &mut seeded_rng(0)).is_err());
        // mean gap 1e9 µs vs a 1 µs horizon
        let e = sample_homogeneous(1e-9, 1.0, &mut seeded_rng(0)).unwrap();
        assert!(e.is_empty());
    }

    #[test]
    fn thinning_edge_cases() {
        let mut rng = seeded_rng(5);
        let cand = sample_homogeneous(0.01, 10_000.0, &mut rng).unwrap();
        let all = thin(&cand, &flat(1.0, 10_000, 100), 1.0, &mut rng).unwrap();
        assert_eq!(all, cand);
        let none = thin(&cand, &flat(0.0, 10_000, 100), 1.0, &mut rng).unwrap();
        assert!(none.is_empty());
        assert!(matches!(
            thin(&cand, &flat(1.0, 10_000, 100), 0.5, &mut rng),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn rate_must_cover_horizon() {
        assert!(PointProcessSpec::new(1, flat(1.0, 100, 50), 101).is_err());
        assert!(PointProcessSpec::new(1, flat(1.0, 100, 50), 0).is_err());
    }
}
