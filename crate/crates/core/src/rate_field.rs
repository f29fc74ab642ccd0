//! Per-pixel rate functions (max-normalized PSTHs) and the spatial kernel
//! that synthesizes high-resolution rate functions from low-resolution
//! neighbourhoods.
//!
//! Bin `i` covers `(i·Δt, (i+1)·Δt]`. An event stamped exactly at 0 is
//! counted in bin 0.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::event_stream::{EventStream, Polarity};

/// Bin index of an integer timestamp.
#[inline]
pub fn bin_of(t: u32, bin_width: u32) -> usize {
    if t == 0 {
        0
    } else {
        ((t - 1) / bin_width) as usize
    }
}

/// Bin index of a continuous time in `(0, T]`.
#[inline]
pub fn bin_of_f64(t: f64, bin_width: u32) -> usize {
    let b = (t / bin_width as f64).ceil() - 1.0;
    if b <= 0.0 {
        0
    } else {
        b as usize
    }
}

pub fn bin_count(horizon: u32, bin_width: u32) -> usize {
    (horizon.div_ceil(bin_width) as usize).max(1)
}

/// Binned rate shape with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateFunction {
    bin_width: u32,
    values: Vec<f64>,
}

impl RateFunction {
    pub fn new(bin_width: u32, values: Vec<f64>) -> Result<Self> {
        if bin_width == 0 {
            return Err(Error::arg("bin width must be at least 1 µs"));
        }
        if values.is_empty() {
            return Err(Error::arg("rate function needs at least one bin"));
        }
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0 && **v <= 1.0)) {
            return Err(Error::arg(format!(
                "rate values must lie in [0, 1], got {v}"
            )));
        }
        Ok(RateFunction { bin_width, values })
    }

    /// Constant rate over `ceil(horizon / bin_width)` bins.
    pub fn constant(value: f64, horizon: u32, bin_width: u32) -> Result<Self> {
        if bin_width == 0 {
            return Err(Error::arg("bin width must be at least 1 µs"));
        }
        Self::new(bin_width, vec![value; bin_count(horizon, bin_width)])
    }

    pub fn bin_width(&self) -> u32 {
        self.bin_width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n_bins(&self) -> usize {
        self.values.len()
    }

    /// End of the last bin, µs.
    pub fn span(&self) -> u64 {
        self.values.len() as u64 * self.bin_width as u64
    }

    /// Value of the bin containing continuous time `t`.
    pub fn at(&self, t: f64) -> f64 {
        let b = bin_of_f64(t, self.bin_width).min(self.values.len() - 1);
        self.values[b]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Area under the rate over `(0, horizon]`, in value·µs.
    pub fn integral(&self, horizon: u32) -> f64 {
        let w = self.bin_width as f64;
        let mut total = 0.0;
        for (i, v) in self.values.iter().enumerate() {
            let start = i as f64 * w;
            if start >= horizon as f64 {
                break;
            }
            total += v * w.min(horizon as f64 - start);
        }
        total
    }

    pub fn is_silent(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }
}

/// Max-normalized histogram of `times` over `ceil(horizon / bin_width)` bins.
pub fn build_psth(times: &[u32], horizon: u32, bin_width: u32) -> Result<RateFunction> {
    if bin_width == 0 {
        return Err(Error::arg("bin width must be at least 1 µs"));
    }
    let mut counts = vec![0.0; bin_count(horizon, bin_width)];
    for &t in times {
        if t > horizon {
            return Err(Error::arg(format!("event time {t} outside (0, {horizon}]")));
        }
        counts[bin_of(t, bin_width)] += 1.0;
    }
    normalize(&mut counts);
    RateFunction::new(bin_width, counts)
}

fn normalize(counts: &mut [f64]) {
    let max = counts.iter().copied().fold(0.0, f64::max);
    if max > 0.0 {
        counts.iter_mut().for_each(|c| *c /= max);
    }
}

/// 3×3 non-negative spatial kernel with unit sum, indexed `[row][col]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kernel {
    weights: [[f64; 3]; 3],
}

impl Kernel {
    pub fn new(weights: [[f64; 3]; 3]) -> Result<Self> {
        let flat = weights.iter().flatten();
        if flat.clone().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::arg("kernel weights must be finite and non-negative"));
        }
        let sum: f64 = flat.sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::arg(format!(
                "kernel weights must sum to 1, got {sum}"
            )));
        }
        Ok(Kernel { weights })
    }

    /// Center-only kernel: nearest-neighbour rate interpolation.
    pub fn nearest() -> Self {
        Kernel {
            weights: [[0.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 0.0]],
        }
    }

    pub fn weights(&self) -> &[[f64; 3]; 3] {
        &self.weights
    }

    /// Parse nine comma- or whitespace-separated weights in row-major order.
    pub fn parse(text: &str) -> Result<Self> {
        let vals: Vec<f64> = text
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| Error::arg(format!("invalid kernel weight `{s}`")))
            })
            .collect::<Result<_>>()?;
        if vals.len() != 9 {
            return Err(Error::arg(format!(
                "kernel needs 9 weights, got {}",
                vals.len()
            )));
        }
        let mut w = [[0.0; 3]; 3];
        for (i, v) in vals.into_iter().enumerate() {
            w[i / 3][i % 3] = v;
        }
        Kernel::new(w)
    }
}

impl Default for Kernel {
    fn default() -> Self {
        default_kernel()
    }
}

/// `(1/16)·[[0,1,0],[1,12,1],[0,1,0]]`.
pub fn default_kernel() -> Kernel {
    let s = 1.0 / 16.0;
    Kernel {
        weights: [[0.0, s, 0.0], [s, 12.0 * s, s], [0.0, s, 0.0]],
    }
}

/// Rate functions for every pixel of one polarity. Stored sparsely: most
/// pixels fire in only a few bins.
#[derive(Debug, Clone, PartialEq)]
pub struct RateField {
    width: usize,
    height: usize,
    bin_width: u32,
    n_bins: usize,
    pixels: Vec<Vec<(u32, f64)>>,
}

impl RateField {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bin_width(&self) -> u32 {
        self.bin_width
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    /// Non-zero `(bin, value)` pairs of one pixel, ascending by bin.
    pub fn sparse(&self, x: usize, y: usize) -> &[(u32, f64)] {
        &self.pixels[y * self.width + x]
    }

    pub fn pixel(&self, x: usize, y: usize) -> RateFunction {
        let mut values = vec![0.0; self.n_bins];
        for &(b, v) in self.sparse(x, y) {
            values[b as usize] = v;
        }
        RateFunction {
            bin_width: self.bin_width,
            values,
        }
    }

    pub fn active_pixels(&self) -> usize {
        self.pixels.iter().filter(|p| !p.is_empty()).count()
    }

    /// One line per pixel: `row,col,v0,v1,...`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for y in 0..self.height {
            for x in 0..self.width {
                let _ = write!(out, "{y},{x}");
                for v in self.pixel(x, y).values() {
                    let _ = write!(out, ",{v}");
                }
                out.push('\n');
            }
        }
        out
    }
}

/// Per-pixel normalized PSTHs of the given polarity over the stream duration.
pub fn build_rate_field(
    stream: &EventStream,
    polarity: Polarity,
    bin_width: u32,
) -> Result<RateField> {
    if bin_width == 0 {
        return Err(Error::arg("bin width must be at least 1 µs"));
    }
    let (w, h) = (stream.width() as usize, stream.height() as usize);
    let mut pixels: Vec<Vec<(u32, f64)>> = vec![Vec::new(); w * h];
    // events are time-sorted, so each pixel's bins arrive in ascending order
    for e in stream.events().iter().filter(|e| e.p == polarity) {
        let b = bin_of(e.t, bin_width) as u32;
        let px = &mut pixels[e.y as usize * w + e.x as usize];
        match px.last_mut() {
            Some((last, c)) if *last == b => *c += 1.0,
            _ => px.push((b, 1.0)),
        }
    }
    for px in &mut pixels {
        let max = px.iter().map(|p| p.1).fold(0.0, f64::max);
        for p in px.iter_mut() {
            p.1 /= max;
        }
    }
    Ok(RateField {
        width: w,
        height: h,
        bin_width,
        n_bins: bin_count(stream.duration(), bin_width),
        pixels,
    })
}

/// Rate function of high-resolution pixel `(i, j)` (column, row) at
/// magnification `factor`: the kernel-weighted sum of the 3×3 low-resolution
/// neighbourhood around `(i / factor, j / factor)`, edges clamped.
pub fn hr_rate_function(
    field: &RateField,
    i: usize,
    j: usize,
    factor: usize,
    kernel: &Kernel,
) -> Result<RateFunction> {
    if factor == 0 {
        return Err(Error::arg("magnification factor must be positive"));
    }
    if i >= field.width * factor || j >= field.height * factor {
        return Err(Error::arg(format!(
            "pixel ({i}, {j}) outside {}x{}",
            field.width * factor,
            field.height * factor
        )));
    }
    Ok(lr_neighbourhood_rate(field, i / factor, j / factor, kernel))
}

/// Kernel-filtered rate at low-resolution pixel `(x, y)`; every
/// high-resolution pixel inside that block shares it.
pub fn lr_neighbourhood_rate(
    field: &RateField,
    x: usize,
    y: usize,
    kernel: &Kernel,
) -> RateFunction {
    let mut values = vec![0.0; field.n_bins];
    for (ky, row) in kernel.weights.iter().enumerate() {
        for (kx, &w) in row.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let nx = (x as isize + kx as isize - 1).clamp(0, field.width as isize - 1) as usize;
            let ny = (y as isize + ky as isize - 1).clamp(0, field.height as isize - 1) as usize;
            for &(b, v) in field.sparse(nx, ny) {
                values[b as usize] += w * v;
            }
        }
    }
    // convex combination of [0,1] values; trim rounding overshoot
    values.iter_mut().for_each(|v| *v = v.min(1.0));
    RateFunction {
        bin_width: field.bin_width,
        values,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event_stream::Event;
    use proptest::prelude::*;

    #[test]
    fn psth_examples() {
        assert_eq!(
            build_psth(&[25, 75], 100, 50).unwrap().values(),
            &[1.0, 1.0]
        );
        assert_eq!(
            build_psth(&[10, 20, 80], 100, 50).unwrap().values(),
            &[1.0, 0.5]
        );
        assert_eq!(build_psth(&[], 100, 50).unwrap().values(), &[0.0, 0.0]);
        assert!(build_psth(&[101], 100, 50).is_err());
        // bins are right-closed
        assert_eq!(
            build_psth(&[50, 51], 100, 50).unwrap().values(),
            &[1.0, 1.0]
        );
    }

    #[test]
    fn default_kernel_weights() {
        let k = default_kernel();
        let w = k.weights();
        assert_eq!(w[1][1], 12.0 / 16.0);
        assert_eq!([w[0][0], w[0][2], w[2][0], w[2][2]], [0.0; 4]);
        assert!((w.iter().flatten().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(Kernel::new([[0.5; 3]; 3]).is_err());
        assert_eq!(
            Kernel::parse("0 0.0625 0 0.0625 0.75 0.0625 0 0.0625 0").unwrap(),
            k
        );
    }

    fn stream(events: Vec<Event>, w: u16, h: u16, d: u32) -> EventStream {
        EventStream::new(w, h, d, events).unwrap()
    }

    #[test]
    fn interior_pixel_center_only() {
        let s = stream(vec![Event::new(10, 1, 1, Polarity::On)], 3, 3, 100);
        let f = build_rate_field(&s, Polarity::On, 50).unwrap();
        let r = hr_rate_function(&f, 2, 2, 2, &default_kernel()).unwrap();
        assert_eq!(r.values(), &[0.75, 0.0]);
        // the neighbour to the right sees 1/16 of the centre
        let r = hr_rate_function(&f, 4, 2, 2, &default_kernel()).unwrap();
        assert_eq!(r.values(), &[1.0 / 16.0, 0.0]);
        assert!(hr_rate_function(&f, 6, 0, 2, &default_kernel()).is_err());
    }

    #[test]
    fn uniform_and_empty_fields() {
        let mut events = Vec::new();
        for y in 0..4 {
            for x in 0..4 {
                events.push(Event::new(30, x, y, Polarity::Off));
                events.push(Event::new(130, x, y, Polarity::Off));
                events.push(Event::new(140, x, y, Polarity::Off));
            }
        }
        let s = stream(events, 4, 4, 200);
        let f = build_rate_field(&s, Polarity::Off, 100).unwrap();
        assert_eq!(f.n_bins(), 2);
        for (i, j) in [(0, 0), (3, 5), (7, 7)] {
            let r = hr_rate_function(&f, i, j, 2, &default_kernel()).unwrap();
            assert_eq!(r.values(), f.pixel(0, 0).values());
        }
        let on = build_rate_field(&s, Polarity::On, 100).unwrap();
        assert_eq!(on.active_pixels(), 0);
        let r = hr_rate_function(&on, 3, 3, 2, &default_kernel()).unwrap();
        assert!(r.is_silent());
    }

    #[test]
    fn field_bin_count_and_single_pixel() {
        let s = stream(vec![Event::new(999, 2, 0, Polarity::On)], 4, 2, 1001);
        let f = build_rate_field(&s, Polarity::On, 50).unwrap();
        assert_eq!(f.n_bins(), 21);
        assert_eq!(f.active_pixels(), 1);
        assert_eq!(f.pixel(2, 0).values()[19], 1.0);
        assert!(f.to_csv().starts_with("0,0,0,"));
    }

    #[test]
    fn integral_respects_horizon() {
        let r = RateFunction::new(50, vec![1.0, 0.5, 1.0]).unwrap();
        assert_eq!(r.integral(150), 125.0);
        assert_eq!(r.integral(120), 50.0 + 25.0 + 20.0);
    }

    proptest! {
        #[test]
        fn hr_rate_is_bounded_by_neighbourhood(
            seed in any::<u64>(), i in 0usize..10, j in 0usize..10,
        ) {
            let mut events = Vec::new();
            let mut s = seed;
            for n in 0..40u32 {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let x = (s >> 33) as u16 % 5;
                let y = (s >> 45) as u16 % 5;
                events.push(Event::new((s >> 20) as u32 % 400 + n % 3, x, y, Polarity::On));
            }
            let st = stream(events, 5, 5, 402);
            let f = build_rate_field(&st, Polarity::On, 40).unwrap();
            let r = hr_rate_function(&f, i, j, 2, &default_kernel()).unwrap();
            let (x, y) = (i / 2, j / 2);
            for b in 0..f.n_bins() {
                let mut hi: f64 = 0.0;
                for dy in -1isize..=1 {
                    for dx in -1isize..=1 {
                        let nx = (x as isize + dx).clamp(0, 4) as usize;
                        let ny = (y as isize + dy).clamp(0, 4) as usize;
                        hi = hi.max(f.pixel(nx, ny).values()[b]);
                    }
                }
                prop_assert!(r.values()[b] <= hi + 1e-12);
                prop_assert!(r.values()[b] >= 0.0);
            }
            // nearest kernel at factor 1 reproduces the input exactly
            let nn = hr_rate_function(&f, i % 5, j % 5, 1, &Kernel::nearest()).unwrap();
            prop_assert_eq!(nn, f.pixel(i % 5, j % 5));
        }
    }
}
