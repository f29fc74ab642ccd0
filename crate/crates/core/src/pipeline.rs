//! The two-stage super-resolution pipeline and the experiment protocols
//! built on it.
//!
//! Per window and polarity, stage 1 upscales the low-resolution count map and
//! rounds it to integer per-pixel targets; stage 2 samples each
//! high-resolution pixel's events from its kernel-filtered rate function.
//! Polarities are merged and windows stitched back on the timeline.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rayon::prelude::*;

use crate::count_map::{build_full_count_map, CountMap};
use crate::error::{Error, Result};
use crate::event_stream::{Event, EventStream, Polarity, TimeWindow};
use crate::metrics::{dfrf, rate_curves_csv, reconstruct_frame, rmse_psth, Frame, MetricReport};
use crate::poisson_sampler::{sample_event_sequence, PointProcessSpec, DEFAULT_HEADROOM};
use crate::rate_field::{build_rate_field, lr_neighbourhood_rate, Kernel, RateFunction};
use crate::rng::{keyed_rng, StreamKey};
use crate::sparse_sr::{upscale_count_map, DictionaryPair, SparseCodeConfig};
use crate::stats;

/// How the total event count of each super-resolved map is fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TotalScale {
    /// Keep whatever total the count-map upscaling produced.
    #[default]
    None,
    /// `factor ×` the low-resolution total.
    Linear,
    /// `factor² ×` the low-resolution total.
    Quadratic,
}

impl TotalScale {
    pub fn name(self) -> &'static str {
        match self {
            TotalScale::None => "none",
            TotalScale::Linear => "linear",
            TotalScale::Quadratic => "quadratic",
        }
    }
}

impl FromStr for TotalScale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(TotalScale::None),
            "linear" => Ok(TotalScale::Linear),
            "quadratic" => Ok(TotalScale::Quadratic),
            other => Err(Error::arg(format!(
                "unknown total_scale `{other}` (expected none, linear or quadratic)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SrConfig {
    pub factor: usize,
    /// µs.
    pub window_length: u32,
    /// Rate-function bin, µs.
    pub rate_bin: u32,
    /// PSTH bin used by the metrics, µs.
    pub metric_bin: u32,
    pub kernel: Kernel,
    pub total_scale: TotalScale,
    pub seed: u64,
    pub sparse: SparseCodeConfig,
    /// Dominating-rate headroom of the thinning sampler.
    pub headroom: f64,
    pub dictionary: Option<PathBuf>,
}

impl Default for SrConfig {
    fn default() -> Self {
        SrConfig {
            factor: 2,
            window_length: 200_000,
            rate_bin: 50,
            metric_bin: 100,
            kernel: Kernel::default(),
            total_scale: TotalScale::None,
            seed: 0,
            sparse: SparseCodeConfig::default(),
            headroom: DEFAULT_HEADROOM,
            dictionary: None,
        }
    }
}

impl SrConfig {
    pub fn validate(&self) -> Result<()> {
        if self.factor < 2 {
            return Err(Error::arg(format!(
                "magnification factor must be >= 2, got {}",
                self.factor
            )));
        }
        if self.window_length == 0 || self.rate_bin == 0 || self.metric_bin == 0 {
            return Err(Error::arg(
                "window length and bin widths must be at least 1 µs",
            ));
        }
        if !(self.headroom.is_finite() && self.headroom > 0.0) {
            return Err(Error::arg(format!(
                "headroom must be positive, got {}",
                self.headroom
            )));
        }
        self.sparse.validate()
    }

    /// Apply one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::arg(format!("invalid value `{value}` for `{key}`")))
        }
        match key {
            "factor" => self.factor = num(key, value)?,
            "window_length" => self.window_length = num(key, value)?,
            "rate_bin" => self.rate_bin = num(key, value)?,
            "metric_bin" => self.metric_bin = num(key, value)?,
            "kernel" => self.kernel = Kernel::parse(value)?,
            "total_scale" => self.total_scale = value.parse()?,
            "seed" => self.seed = num(key, value)?,
            "lambda" => self.sparse.lambda = num(key, value)?,
            "beta" => self.sparse.beta = num(key, value)?,
            "max_iter" => self.sparse.max_iter = num(key, value)?,
            "tol" => self.sparse.tol = num(key, value)?,
            "headroom" => self.headroom = num(key, value)?,
            "dictionary" => self.dictionary = Some(PathBuf::from(value)),
            other => return Err(Error::arg(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }
}

impl fmt::Display for SrConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let k = self.kernel.weights();
        let kernel: Vec<String> = k.iter().flatten().map(|w| w.to_string()).collect();
        writeln!(f, "factor = {}", self.factor)?;
        writeln!(f, "window_length = {}", self.window_length)?;
        writeln!(f, "rate_bin = {}", self.rate_bin)?;
        writeln!(f, "metric_bin = {}", self.metric_bin)?;
        writeln!(f, "kernel = \"{}\"", kernel.join(","))?;
        writeln!(f, "total_scale = {}", self.total_scale.name())?;
        writeln!(f, "seed = {}", self.seed)?;
        writeln!(f, "lambda = {}", self.sparse.lambda)?;
        writeln!(f, "beta = {}", self.sparse.beta)?;
        writeln!(f, "max_iter = {}", self.sparse.max_iter)?;
        writeln!(f, "tol = {}", self.sparse.tol)?;
        writeln!(f, "headroom = {}", self.headroom)?;
        if let Some(d) = &self.dictionary {
            writeln!(f, "dictionary = \"{}\"", d.display())?;
        }
        Ok(())
    }
}

/// Round non-negative reals to integers summing to `total` by the
/// largest-remainder method. Values are first scaled to sum to `total`;
/// ties in the remainder go to the lower index. An all-zero input is
/// treated as uniform.
pub fn apportion(values: &[f64], total: u64) -> Vec<u64> {
    if values.is_empty() {
        return Vec::new();
    }
    let sum: f64 = values.iter().sum();
    let quotas: Vec<f64> = if sum > 0.0 {
        values.iter().map(|v| v * total as f64 / sum).collect()
    } else {
        vec![total as f64 / values.len() as f64; values.len()]
    };
    let mut out: Vec<u64> = quotas.iter().map(|q| q.floor() as u64).collect();
    let assigned: u64 = out.iter().sum();
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (quotas[a] - quotas[a].floor(), quotas[b] - quotas[b].floor());
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    // floating-point rounding can leave the floors a little over or under
    if assigned <= total {
        for &i in order.iter().cycle().take((total - assigned) as usize) {
            out[i] += 1;
        }
    } else {
        let mut excess = assigned - total;
        for &i in order.iter().rev().cycle() {
            if excess == 0 {
                break;
            }
            if out[i] > 0 {
                out[i] -= 1;
                excess -= 1;
            }
        }
    }
    out
}

/// Consecutive windows `[k·L, min((k+1)·L, D))`; the last one also holds
/// events stamped exactly at `D`.
pub fn window_bounds(duration: u32, window_length: u32) -> Result<Vec<TimeWindow>> {
    if window_length == 0 {
        return Err(Error::arg("window length must be at least 1 µs"));
    }
    let mut out = Vec::new();
    let mut t0 = 0u32;
    loop {
        let end = t0.saturating_add(window_length);
        if end >= duration {
            out.push(TimeWindow::new(t0, duration.saturating_add(1))?);
            return Ok(out);
        }
        out.push(TimeWindow::new(t0, end)?);
        t0 = end;
    }
}

/// Stage-1 count upscaler.
#[derive(Debug, Clone, Copy)]
pub enum CountUpscaler<'a> {
    /// Coupled-dictionary sparse coding.
    Sparse(&'a DictionaryPair),
    /// Every high-resolution child receives `1/α²` of its parent's count.
    Nearest,
}

/// Stage-2 rate model.
#[derive(Debug, Clone, Copy)]
pub enum TimeModel {
    /// Kernel-filtered low-resolution PSTHs.
    Filtered,
    /// Flat rate: times uniform over the window.
    Uniform,
}

/// Per window and polarity bookkeeping of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSummary {
    pub window: TimeWindow,
    pub polarity: Polarity,
    pub lr_events: usize,
    /// Real-valued total of the upscaled map before rounding.
    pub upscaled_total: f64,
    /// Events sampled, equal to the sum of the rounded targets.
    pub hr_events: usize,
    pub fallback_pixels: usize,
    pub over_capacity_pixels: usize,
}

#[derive(Debug, Clone)]
pub struct SrRun {
    pub stream: EventStream,
    pub windows: Vec<WindowSummary>,
}

/// Super-resolve `stream` by `config.factor` with the given dictionary.
pub fn super_resolve(
    stream: &EventStream,
    dict: &DictionaryPair,
    config: &SrConfig,
) -> Result<EventStream> {
    Ok(run_pipeline(
        stream,
        CountUpscaler::Sparse(dict),
        TimeModel::Filtered,
        config,
    )?
    .stream)
}

/// Nearest-neighbour count upscaling followed by uniform-time sampling.
pub fn baseline_super_resolve(stream: &EventStream, config: &SrConfig) -> Result<EventStream> {
    Ok(run_pipeline(stream, CountUpscaler::Nearest, TimeModel::Uniform, config)?.stream)
}

/// The general pipeline, returning per-window bookkeeping alongside the stream.
pub fn run_pipeline(
    stream: &EventStream,
    upscaler: CountUpscaler<'_>,
    time_model: TimeModel,
    config: &SrConfig,
) -> Result<SrRun> {
    config.validate()?;
    let f = config.factor;
    if let CountUpscaler::Sparse(dict) = upscaler {
        if dict.factor() != f {
            return Err(Error::arg(format!(
                "dictionary factor {} does not match configured factor {f}",
                dict.factor()
            )));
        }
    }
    let (hw, hh) = (stream.width() as usize * f, stream.height() as usize * f);
    if hw > u16::MAX as usize || hh > u16::MAX as usize {
        return Err(Error::arg(format!(
            "output geometry {hw}x{hh} exceeds 65535"
        )));
    }
    if stream.duration() < config.rate_bin {
        return Err(Error::arg(format!(
            "stream of {} µs is shorter than one rate bin ({} µs)",
            stream.duration(),
            config.rate_bin
        )));
    }
    let windows = window_bounds(stream.duration(), config.window_length)?;
    let jobs: Vec<(usize, TimeWindow, Polarity)> = windows
        .iter()
        .enumerate()
        .flat_map(|(k, &w)| Polarity::BOTH.map(|p| (k, w, p)))
        .collect();
    let results = jobs
        .par_iter()
        .map(|&(k, w, p)| resolve_window(stream, k, w, p, upscaler, time_model, config))
        .collect::<Result<Vec<_>>>()?;
    let mut events = Vec::new();
    let mut summaries = Vec::new();
    for (ev, summary) in results {
        events.extend(ev);
        summaries.push(summary);
    }
    Ok(SrRun {
        stream: EventStream::new(hw as u16, hh as u16, stream.duration(), events)?,
        windows: summaries,
    })
}

fn resolve_window(
    stream: &EventStream,
    index: usize,
    window: TimeWindow,
    polarity: Polarity,
    upscaler: CountUpscaler<'_>,
    time_model: TimeModel,
    config: &SrConfig,
) -> Result<(Vec<Event>, WindowSummary)> {
    let f = config.factor;
    let slice = stream.slice(window)?;
    // output times lie in (0, horizon] relative to the window origin
    let horizon = window.t1.min(stream.duration()) - window.t0;
    let lr = build_full_count_map(&slice, polarity);
    let lr_total = lr.total();
    let (lw, lh) = (lr.width(), lr.height());
    let (hw, hh) = (lw * f, lh * f);

    let mut summary = WindowSummary {
        window,
        polarity,
        lr_events: lr_total as usize,
        upscaled_total: 0.0,
        hr_events: 0,
        fallback_pixels: 0,
        over_capacity_pixels: 0,
    };
    if lr_total == 0.0 || horizon == 0 {
        return Ok((Vec::new(), summary));
    }

    let hr: CountMap = match upscaler {
        CountUpscaler::Sparse(dict) => upscale_count_map(&lr, dict, &config.sparse)?,
        CountUpscaler::Nearest => {
            let share = 1.0 / (f * f) as f64;
            let values = (0..hw * hh)
                .map(|i| lr.get((i % hw) / f, (i / hw) / f) * share)
                .collect();
            CountMap::from_values(hw, hh, values, polarity)?
        }
    };
    summary.upscaled_total = hr.total();
    let total = match config.total_scale {
        TotalScale::None => hr.total().round() as u64,
        TotalScale::Linear => (lr_total * f as f64).round() as u64,
        TotalScale::Quadratic => (lr_total * (f * f) as f64).round() as u64,
    };
    let targets = apportion(hr.values(), total);

    let field = match time_model {
        TimeModel::Filtered => Some(build_rate_field(&slice, polarity, config.rate_bin)?),
        TimeModel::Uniform => None,
    };
    let flat = RateFunction::constant(1.0, horizon, config.rate_bin)?;

    // one rate per low-resolution parent, shared by its f×f children
    let per_parent = (0..lw * lh)
        .into_par_iter()
        .map(|parent| {
            let (px, py) = (parent % lw, parent / lw);
            let children: Vec<(usize, usize, u64)> = (0..f * f)
                .map(|c| (px * f + c % f, py * f + c / f))
                .map(|(i, j)| (i, j, targets[j * hw + i]))
                .filter(|c| c.2 > 0)
                .collect();
            if children.is_empty() {
                return Ok((Vec::new(), 0, 0));
            }
            let rate = match &field {
                Some(field) => lr_neighbourhood_rate(field, px, py, &config.kernel),
                None => flat.clone(),
            };
            let mut events = Vec::new();
            let (mut fallback, mut over) = (0, 0);
            for (i, j, n) in children {
                let spec = PointProcessSpec::new(n as usize, rate.clone(), horizon)?;
                let key = StreamKey::new(i as u16, j as u16, polarity, index as u32);
                let mut rng = keyed_rng(config.seed, key);
                let sampled = sample_event_sequence(&spec, config.headroom, &mut rng)?;
                fallback += sampled.uniform_fallback as usize;
                over += sampled.over_capacity as usize;
                events.extend(
                    sampled
                        .times
                        .into_iter()
                        .map(|t| Event::new(window.t0 + t, i as u16, j as u16, polarity)),
                );
            }
            Ok((events, fallback, over))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut events = Vec::with_capacity(total as usize);
    for (ev, fb, oc) in per_parent {
        events.extend(ev);
        summary.fallback_pixels += fb;
        summary.over_capacity_pixels += oc;
    }
    summary.hr_events = events.len();
    Ok((events, summary))
}

/// Streams and derived artifacts from one experiment run.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub report: MetricReport,
    pub lr: EventStream,
    pub hr: EventStream,
    /// `(name, frame)` pairs: low-resolution input shown at output size,
    /// super-resolved output, and ground truth when there is one.
    pub frames: Vec<(String, Frame)>,
    /// `bin_start_us,f_lr,f_hr`.
    pub curves_csv: String,
}

fn frames_for(
    lr: &EventStream,
    hr: &EventStream,
    gt: Option<&EventStream>,
    factor: usize,
) -> Result<Vec<(String, Frame)>> {
    let full = TimeWindow::new(0, hr.duration().saturating_add(1))?;
    let mut frames = vec![
        (
            "lr".to_string(),
            reconstruct_frame(lr, full).upscale_nearest(factor),
        ),
        ("sr".to_string(), reconstruct_frame(hr, full)),
    ];
    if let Some(gt) = gt {
        frames.push(("groundtruth".to_string(), reconstruct_frame(gt, full)));
    }
    Ok(frames)
}

fn report(
    config: &SrConfig,
    lr: &EventStream,
    hr: &EventStream,
    rmse: Option<f64>,
    dfrf: Option<f64>,
) -> Result<MetricReport> {
    Ok(MetricReport {
        rmse,
        dfrf,
        lr_events: lr.len(),
        hr_events: hr.len(),
        factor: config.factor,
        rate_bin: config.rate_bin,
        metric_bin: config.metric_bin,
        window_length: config.window_length,
        windows: window_bounds(lr.duration(), config.window_length)?.len(),
        seed: config.seed,
    })
}

/// Treat `groundtruth` as the high-resolution truth: downsample it by the
/// configured factor, super-resolve back and score the PSTH RMSE.
pub fn experiment_reconstruction(
    groundtruth: &EventStream,
    dict: &DictionaryPair,
    config: &SrConfig,
) -> Result<ExperimentOutput> {
    let lr = groundtruth.downsample_spatial(config.factor as u16)?;
    let hr = super_resolve(&lr, dict, config)?;
    let rmse = rmse_psth(&hr, groundtruth, config.metric_bin)?;
    let dfrf_value = if lr.is_empty() {
        None
    } else {
        Some(dfrf(&hr, &lr, config.metric_bin)?)
    };
    Ok(ExperimentOutput {
        report: report(config, &lr, &hr, Some(rmse), dfrf_value)?,
        frames: frames_for(&lr, &hr, Some(groundtruth), config.factor)?,
        curves_csv: rate_curves_csv(&lr, &hr, config.metric_bin),
        lr,
        hr,
    })
}

/// Same protocol with the baseline pipeline in place of the sparse one.
pub fn baseline_reconstruction_rmse(groundtruth: &EventStream, config: &SrConfig) -> Result<f64> {
    let lr = groundtruth.downsample_spatial(config.factor as u16)?;
    let hr = baseline_super_resolve(&lr, config)?;
    rmse_psth(&hr, groundtruth, config.metric_bin)
}

/// Super-resolve `stream` as recorded and score the DFRF against it.
pub fn experiment_magnification(
    stream: &EventStream,
    dict: &DictionaryPair,
    config: &SrConfig,
) -> Result<ExperimentOutput> {
    let hr = super_resolve(stream, dict, config)?;
    let d = dfrf(&hr, stream, config.metric_bin)?;
    Ok(ExperimentOutput {
        report: report(config, stream, &hr, None, Some(d))?,
        frames: frames_for(stream, &hr, None, config.factor)?,
        curves_csv: rate_curves_csv(stream, &hr, config.metric_bin),
        lr: stream.clone(),
        hr,
    })
}

/// Reconstruction RMSE for each rate bin in `bins`.
pub fn experiment_bin_sweep(
    groundtruth: &EventStream,
    dict: &DictionaryPair,
    config: &SrConfig,
    bins: &[u32],
) -> Result<Vec<(u32, f64)>> {
    bins.iter()
        .map(|&b| {
            let cfg = SrConfig {
                rate_bin: b,
                ..config.clone()
            };
            Ok((
                b,
                experiment_reconstruction(groundtruth, dict, &cfg)?
                    .report
                    .rmse
                    .unwrap_or(f64::NAN),
            ))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessSummary {
    pub seeds: Vec<u64>,
    pub rmse: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

/// Repeat the reconstruction experiment once per seed.
pub fn experiment_robustness(
    groundtruth: &EventStream,
    dict: &DictionaryPair,
    config: &SrConfig,
    seeds: &[u64],
) -> Result<RobustnessSummary> {
    if seeds.is_empty() {
        return Err(Error::arg("robustness needs at least one seed"));
    }
    let rmse = seeds
        .iter()
        .map(|&seed| {
            let cfg = SrConfig {
                seed,
                ..config.clone()
            };
            Ok(experiment_reconstruction(groundtruth, dict, &cfg)?
                .report
                .rmse
                .unwrap_or(f64::NAN))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(RobustnessSummary {
        seeds: seeds.to_vec(),
        mean: stats::mean(&rmse),
        std: stats::std_dev(&rmse),
        min: rmse.iter().copied().fold(f64::INFINITY, f64::min),
        max: rmse.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        rmse,
    })
}
