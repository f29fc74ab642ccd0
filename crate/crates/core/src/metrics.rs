//! Evaluation of super-resolved streams: per-pixel PSTH RMSE, the relative
//! difference between total firing-rate curves (DFRF), and grey-scale frames.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::event_stream::{EventStream, Polarity, TimeWindow};
use crate::rate_field::{bin_count, bin_of};

pub const DEFAULT_METRIC_BIN: u32 = 100;

/// Max-normalized PSTH of every pixel, both polarities merged, as sparse
/// `(bin, value)` lists.
fn merged_psths(stream: &EventStream, bin_width: u32) -> Vec<Vec<(u32, f64)>> {
    let w = stream.width() as usize;
    let mut pixels: Vec<Vec<(u32, f64)>> = vec![Vec::new(); stream.pixel_count()];
    for e in stream.events() {
        let b = bin_of(e.t, bin_width) as u32;
        let px = &mut pixels[e.y as usize * w + e.x as usize];
        match px.last_mut() {
            Some((last, c)) if *last == b => *c += 1.0,
            _ => px.push((b, 1.0)),
        }
    }
    for px in &mut pixels {
        let max = px.iter().map(|p| p.1).fold(0.0, f64::max);
        px.iter_mut().for_each(|p| p.1 /= max);
    }
    pixels
}

/// Sum of squared differences between two sparse, bin-sorted vectors.
fn sparse_sq_diff(a: &[(u32, f64)], b: &[(u32, f64)]) -> f64 {
    let (mut i, mut j) = (0, 0);
    let mut acc = 0.0;
    while i < a.len() || j < b.len() {
        let ba = a.get(i).map_or(u32::MAX, |p| p.0);
        let bb = b.get(j).map_or(u32::MAX, |p| p.0);
        let d = if ba == bb {
            let d = a[i].1 - b[j].1;
            i += 1;
            j += 1;
            d
        } else if ba < bb {
            i += 1;
            a[i - 1].1
        } else {
            j += 1;
            b[j - 1].1
        };
        acc += d * d;
    }
    acc
}

/// Root mean squared difference between the per-pixel normalized PSTHs of
/// two streams with the same geometry and duration.
pub fn rmse_psth(candidate: &EventStream, reference: &EventStream, bin_width: u32) -> Result<f64> {
    if bin_width == 0 {
        return Err(Error::arg("bin width must be at least 1 µs"));
    }
    if candidate.width() != reference.width() || candidate.height() != reference.height() {
        return Err(Error::arg(format!(
            "geometry mismatch: {}x{} vs {}x{}",
            candidate.width(),
            candidate.height(),
            reference.width(),
            reference.height()
        )));
    }
    if candidate.duration() != reference.duration() {
        return Err(Error::arg(format!(
            "duration mismatch: {} vs {}",
            candidate.duration(),
            reference.duration()
        )));
    }
    let n_bins = bin_count(reference.duration(), bin_width) as f64;
    let a = merged_psths(candidate, bin_width);
    let b = merged_psths(reference, bin_width);
    let total: f64 = a
        .iter()
        .zip(&b)
        .map(|(pa, pb)| sparse_sq_diff(pa, pb) / n_bins)
        .sum();
    Ok((total / candidate.pixel_count() as f64).sqrt())
}

/// Total event count per bin across all pixels, divided by the bin width
/// (events per µs).
pub fn total_rate_curve(stream: &EventStream, bin_width: u32) -> Vec<f64> {
    let mut curve = vec![0.0; bin_count(stream.duration(), bin_width)];
    for e in stream.events() {
        curve[bin_of(e.t, bin_width)] += 1.0;
    }
    curve.iter_mut().for_each(|c| *c /= bin_width as f64);
    curve
}

/// Relative RMS difference (percent) between the total rate curve of `hr`,
/// rescaled to the same total as `lr`, and that of `lr`.
pub fn dfrf(hr: &EventStream, lr: &EventStream, bin_width: u32) -> Result<f64> {
    if bin_width == 0 {
        return Err(Error::arg("bin width must be at least 1 µs"));
    }
    if hr.duration() != lr.duration() {
        return Err(Error::arg(format!(
            "duration mismatch: {} vs {}",
            hr.duration(),
            lr.duration()
        )));
    }
    if lr.is_empty() {
        return Err(Error::UndefinedMetric(
            "reference stream has no events".into(),
        ));
    }
    let f_l = total_rate_curve(lr, bin_width);
    let mut f_h = total_rate_curve(hr, bin_width);
    let (sl, sh): (f64, f64) = (f_l.iter().sum(), f_h.iter().sum());
    if sh > 0.0 {
        f_h.iter_mut().for_each(|v| *v *= sl / sh);
    }
    let n = f_l.len() as f64;
    let mse = f_h
        .iter()
        .zip(&f_l)
        .map(|(h, l)| (h - l).powi(2))
        .sum::<f64>()
        / n;
    Ok(100.0 * mse.sqrt() / (sl / n))
}

/// `bin_start_us,f_lr,f_hr` lines; `f_hr` is not rescaled.
pub fn rate_curves_csv(lr: &EventStream, hr: &EventStream, bin_width: u32) -> String {
    let f_l = total_rate_curve(lr, bin_width);
    let f_h = total_rate_curve(hr, bin_width);
    let mut out = String::from("bin_start_us,f_lr,f_hr\n");
    for i in 0..f_l.len().max(f_h.len()) {
        let _ = writeln!(
            out,
            "{},{},{}",
            i as u64 * bin_width as u64,
            f_l.get(i).copied().unwrap_or(0.0),
            f_h.get(i).copied().unwrap_or(0.0)
        );
    }
    out
}

/// 8-bit grey-scale image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl Frame {
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    /// Binary PGM (P5, maxval 255).
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    /// Pixel replication, for showing a low-resolution frame at output size.
    pub fn upscale_nearest(&self, factor: usize) -> Frame {
        let (w, h) = (self.width * factor, self.height * factor);
        let pixels = (0..w * h)
            .map(|i| self.get((i % w) / factor, (i / w) / factor))
            .collect();
        Frame {
            width: w,
            height: h,
            pixels,
        }
    }
}

/// Integrate ON minus OFF events per pixel inside `window` and map the
/// balance symmetrically around mid-grey: `128 + 127·s / max|s|`.
pub fn reconstruct_frame(stream: &EventStream, window: TimeWindow) -> Frame {
    let w = stream.width() as usize;
    let mut balance = vec![0i64; stream.pixel_count()];
    for e in stream.events().iter().filter(|e| window.contains(e.t)) {
        balance[e.y as usize * w + e.x as usize] += match e.p {
            Polarity::On => 1,
            Polarity::Off => -1,
        };
    }
    let max = balance.iter().map(|s| s.abs()).max().unwrap_or(0);
    let pixels = balance
        .iter()
        .map(|&s| {
            if max == 0 {
                128
            } else {
                (128.0 + 127.0 * s as f64 / max as f64).round() as u8
            }
        })
        .collect();
    Frame {
        width: w,
        height: stream.height() as usize,
        pixels,
    }
}

/// Results of one evaluation run plus the configuration that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    /// PSTH RMSE against a ground truth, when one exists.
    pub rmse: Option<f64>,
    /// Percent.
    pub dfrf: Option<f64>,
    pub lr_events: usize,
    pub hr_events: usize,
    pub factor: usize,
    pub rate_bin: u32,
    pub metric_bin: u32,
    pub window_length: u32,
    pub windows: usize,
    pub seed: u64,
}

impl MetricReport {
    /// Flat `key=value` lines.
    pub fn to_key_value(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "nan".to_string(), |v| format!("{v:.6}"));
        let mut out = String::new();
        let _ = writeln!(out, "rmse={}", opt(self.rmse));
        let _ = writeln!(out, "dfrf_percent={}", opt(self.dfrf));
        let _ = writeln!(out, "lr_events={}", self.lr_events);
        let _ = writeln!(out, "hr_events={}", self.hr_events);
        let _ = writeln!(out, "factor={}", self.factor);
        let _ = writeln!(out, "rate_bin_us={}", self.rate_bin);
        let _ = writeln!(out, "metric_bin_us={}", self.metric_bin);
        let _ = writeln!(out, "window_length_us={}", self.window_length);
        let _ = writeln!(out, "windows={}", self.windows);
        let _ = writeln!(out, "seed={}", self.seed);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event_stream::Event;

    fn ev(t: u32, x: u16, y: u16, p: Polarity) -> Event {
        Event::new(t, x, y, p)
    }

    #[test]
    fn rmse_of_self_is_zero() {
        let s = EventStream::new(
            3,
            3,
            1000,
            vec![ev(5, 0, 0, Polarity::On), ev(700, 2, 1, Polarity::Off)],
        )
        .unwrap();
        assert_eq!(rmse_psth(&s, &s, 100).unwrap(), 0.0);
    }

    #[test]
    fn rmse_hand_evaluated() {
        // reference PSTH [1, 0] at pixel 0, candidate [0, 1], 2x1 sensor
        let r = EventStream::new(2, 1, 200, vec![ev(50, 0, 0, Polarity::On)]).unwrap();
        let c = EventStream::new(2, 1, 200, vec![ev(150, 0, 0, Polarity::On)]).unwrap();
        let v = rmse_psth(&c, &r, 100).unwrap();
        assert!((v - 0.5f64.sqrt()).abs() < 1e-12);
        assert_eq!(v, rmse_psth(&r, &c, 100).unwrap());
        let other = EventStream::empty(1, 2, 200).unwrap();
        assert!(rmse_psth(&c, &other, 100).is_err());
    }

    #[test]
    fn dfrf_examples() {
        let events: Vec<Event> = (0..50)
            .map(|i| ev(i * 20 + 3, (i % 4) as u16, 0, Polarity::On))
            .collect();
        let lr = EventStream::new(4, 1, 1000, events.clone()).unwrap();
        assert_eq!(dfrf(&lr, &lr, 100).unwrap(), 0.0);
        let tripled: Vec<Event> = events.iter().flat_map(|e| [*e, *e, *e]).collect();
        let hr = EventStream::new(4, 1, 1000, tripled).unwrap();
        assert!(dfrf(&hr, &lr, 100).unwrap().abs() < 1e-9);
        let empty = EventStream::empty(4, 1, 1000).unwrap();
        assert!(matches!(
            dfrf(&hr, &empty, 100),
            Err(Error::UndefinedMetric(_))
        ));
    }

    #[test]
    fn frames() {
        let empty = EventStream::empty(4, 4, 100).unwrap();
        let w = TimeWindow::new(0, 100).unwrap();
        assert!(reconstruct_frame(&empty, w)
            .pixels
            .iter()
            .all(|&p| p == 128));

        let events = vec![
            ev(1, 1, 1, Polarity::On),
            ev(2, 1, 1, Polarity::On),
            ev(3, 1, 1, Polarity::On),
            ev(4, 1, 1, Polarity::On),
            ev(5, 2, 2, Polarity::On),
            ev(6, 2, 2, Polarity::Off),
        ];
        let s = EventStream::new(4, 4, 100, events).unwrap();
        let f = reconstruct_frame(&s, w);
        assert_eq!(f.get(1, 1), 255);
        assert_eq!(f.get(2, 2), 128);
        assert_eq!(f.get(0, 0), 128);
        let pgm = f.to_pgm();
        assert!(pgm.starts_with(b"P5\n4 4\n255\n"));
        assert_eq!(pgm.len(), 11 + 16);
        assert_eq!(f.upscale_nearest(2).get(3, 3), 255);
    }

    #[test]
    fn curves_csv_header() {
        let s = EventStream::new(1, 1, 200, vec![ev(10, 0, 0, Polarity::On)]).unwrap();
        let csv = rate_curves_csv(&s, &s, 100);
        assert_eq!(csv, "bin_start_us,f_lr,f_hr\n0,0.01,0.01\n100,0,0\n");
    }
}
