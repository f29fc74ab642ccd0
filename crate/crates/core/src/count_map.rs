//! Per-pixel event-count maps and their patch decomposition.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::event_stream::{EventStream, Polarity, TimeWindow};

/// Per-pixel event counts for one polarity, row-major. Integer-valued when
/// built from events, real-valued after super-resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct CountMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
    polarity: Polarity,
}

impl CountMap {
    pub fn zeros(width: usize, height: usize, polarity: Polarity) -> Result<Self> {
        Self::from_values(width, height, vec![0.0; width * height], polarity)
    }

    pub fn from_values(
        width: usize,
        height: usize,
        values: Vec<f64>,
        polarity: Polarity,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::arg("count map dimensions must be non-zero"));
        }
        if values.len() != width * height {
            return Err(Error::arg(format!(
                "expected {} values for a {width}x{height} map, got {}",
                width * height,
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::arg(format!(
                "counts must be finite and non-negative, got {v}"
            )));
        }
        Ok(CountMap {
            width,
            height,
            values,
            polarity,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn polarity(&self) -> Polarity {
        self.polarity
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Block-sum downsampling by `factor`, the count-domain equivalent of
    /// [`EventStream::downsample_spatial`].
    pub fn block_sum(&self, factor: usize) -> Result<CountMap> {
        if factor == 0 || !self.width.is_multiple_of(factor) || !self.height.is_multiple_of(factor)
        {
            return Err(Error::arg(format!(
                "{}x{} map is not divisible by {factor}",
                self.width, self.height
            )));
        }
        let (w, h) = (self.width / factor, self.height / factor);
        let mut out = vec![0.0; w * h];
        for y in 0..self.height {
            for x in 0..self.width {
                out[(y / factor) * w + x / factor] += self.get(x, y);
            }
        }
        CountMap::from_values(w, h, out, self.polarity)
    }

    /// ASCII PGM (P2); maxval is the largest count rounded up, at least 1.
    pub fn to_pgm(&self) -> String {
        let maxval = (self.max().ceil() as u64).max(1);
        let mut out = format!("P2\n{} {}\n{}\n", self.width, self.height, maxval);
        for row in self.values.chunks(self.width) {
            let line: Vec<String> = row
                .iter()
                .map(|v| format!("{}", v.round() as u64))
                .collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    /// One CSV line per row.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in self.values.chunks(self.width) {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "{}", line.join(","));
        }
        out
    }

    pub fn from_csv(text: &str, polarity: Polarity) -> Result<CountMap> {
        let mut values = Vec::new();
        let mut width = None;
        let mut height = 0;
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row: Vec<f64> = line
                .split(',')
                .map(|v| {
                    v.trim().parse::<f64>().map_err(|_| Error::Parse {
                        line: i + 1,
                        msg: format!("invalid count `{}`", v.trim()),
                    })
                })
                .collect::<Result<_>>()?;
            match width {
                None => width = Some(row.len()),
                Some(w) if w != row.len() => {
                    return Err(Error::Parse {
                        line: i + 1,
                        msg: format!("row has {} values, expected {w}", row.len()),
                    })
                }
                _ => {}
            }
            values.extend(row);
            height += 1;
        }
        let width = width.ok_or(Error::Parse {
            line: 1,
            msg: "empty count map".into(),
        })?;
        CountMap::from_values(width, height, values, polarity)
    }
}

/// Count events of `polarity` per pixel with `t` inside `window`.
pub fn build_count_map(stream: &EventStream, window: TimeWindow, polarity: Polarity) -> CountMap {
    let (w, h) = (stream.width() as usize, stream.height() as usize);
    let mut values = vec![0.0; w * h];
    for e in stream.events() {
        if e.p == polarity && window.contains(e.t) {
            values[e.y as usize * w + e.x as usize] += 1.0;
        }
    }
    CountMap {
        width: w,
        height: h,
        values,
        polarity,
    }
}

/// Count map over the stream's whole duration, `t = duration` included.
pub fn build_full_count_map(stream: &EventStream, polarity: Polarity) -> CountMap {
    let window = TimeWindow {
        t0: 0,
        t1: stream.duration().saturating_add(1),
    };
    build_count_map(stream, window, polarity)
}

/// Patch origins along one axis: stride `size - overlap`, last one clamped
/// so the final patch ends exactly at `len`.
pub fn patch_offsets(len: usize, size: usize, overlap: usize) -> Result<Vec<usize>> {
    if overlap >= size {
        return Err(Error::arg(format!(
            "overlap {overlap} must be smaller than patch size {size}"
        )));
    }
    if size == 0 || size > len {
        return Err(Error::arg(format!(
            "patch size {size} does not fit a length of {len}"
        )));
    }
    let stride = size - overlap;
    let mut offsets = vec![0];
    loop {
        let last = *offsets.last().unwrap();
        if last + size >= len {
            break;
        }
        offsets.push((last + stride).min(len - size));
    }
    Ok(offsets)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub row: usize,
    pub col: usize,
    /// Row-major `patch_size²` values.
    pub values: Vec<f64>,
}

/// Square patches in raster order.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchGrid {
    pub patch_size: usize,
    pub overlap: usize,
    pub patches: Vec<Patch>,
}

pub fn extract_patches(map: &CountMap, patch_size: usize, overlap: usize) -> Result<PatchGrid> {
    let rows = patch_offsets(map.height, patch_size, overlap)?;
    let cols = patch_offsets(map.width, patch_size, overlap)?;
    let mut patches = Vec::with_capacity(rows.len() * cols.len());
    for &row in &rows {
        for &col in &cols {
            let mut values = Vec::with_capacity(patch_size * patch_size);
            for dy in 0..patch_size {
                let start = (row + dy) * map.width + col;
                values.extend_from_slice(&map.values[start..start + patch_size]);
            }
            patches.push(Patch { row, col, values });
        }
    }
    Ok(PatchGrid {
        patch_size,
        overlap,
        patches,
    })
}

/// Average overlapping patches back into a map.
pub fn assemble_patches(
    grid: &PatchGrid,
    width: usize,
    height: usize,
    polarity: Polarity,
) -> Result<CountMap> {
    let mut sum = vec![0.0; width * height];
    let mut hits = vec![0u32; width * height];
    let n = grid.patch_size;
    for p in &grid.patches {
        if p.row + n > height || p.col + n > width || p.values.len() != n * n {
            return Err(Error::arg(format!(
                "patch at ({}, {}) does not fit a {width}x{height} map",
                p.row, p.col
            )));
        }
        for dy in 0..n {
            for dx in 0..n {
                let idx = (p.row + dy) * width + p.col + dx;
                sum[idx] += p.values[dy * n + dx];
                hits[idx] += 1;
            }
        }
    }
    let mut values = Vec::with_capacity(width * height);
    for (i, (s, h)) in sum.into_iter().zip(hits).enumerate() {
        if h == 0 {
            return Err(Error::Internal(format!(
                "pixel ({}, {}) not covered by any patch",
                i % width,
                i / width
            )));
        }
        values.push(s / h as f64);
    }
    CountMap::from_values(width, height, values, polarity)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event_stream::Event;
    use proptest::prelude::*;

    fn map(w: usize, h: usize, f: impl Fn(usize, usize) -> f64) -> CountMap {
        let values = (0..w * h).map(|i| f(i % w, i / w)).collect();
        CountMap::from_values(w, h, values, Polarity::On).unwrap()
    }

    #[test]
    fn counts_events_by_polarity() {
        let on = Polarity::On;
        let events = vec![
            Event::new(1, 2, 2, on),
            Event::new(2, 2, 2, on),
            Event::new(3, 2, 2, on),
            Event::new(4, 0, 1, on),
            Event::new(5, 1, 1, Polarity::Off),
        ];
        let s = EventStream::new(4, 4, 10, events).unwrap();
        let w = TimeWindow::new(0, 10).unwrap();
        let m = build_count_map(&s, w, on);
        assert_eq!(m.get(2, 2), 3.0);
        assert_eq!(m.get(0, 1), 1.0);
        assert_eq!(m.total(), 4.0);
        let off = build_count_map(&s, w, Polarity::Off);
        assert_eq!(m.total() + off.total(), s.len() as f64);

        let empty = EventStream::empty(4, 4, 10).unwrap();
        assert_eq!(build_count_map(&empty, w, on).total(), 0.0);
    }

    #[test]
    fn offsets_follow_stride_and_clamp() {
        assert_eq!(patch_offsets(5, 3, 1).unwrap(), vec![0, 2]);
        assert_eq!(patch_offsets(6, 3, 1).unwrap(), vec![0, 2, 3]);
        assert_eq!(patch_offsets(3, 3, 1).unwrap(), vec![0]);
        assert!(patch_offsets(6, 3, 3).is_err());
        assert!(patch_offsets(2, 3, 1).is_err());
    }

    #[test]
    fn extract_counts() {
        let m = map(5, 5, |x, y| (x + 10 * y) as f64);
        let g = extract_patches(&m, 3, 1).unwrap();
        assert_eq!(g.patches.len(), 4);
        let origins: Vec<_> = g.patches.iter().map(|p| (p.row, p.col)).collect();
        assert_eq!(origins, vec![(0, 0), (0, 2), (2, 0), (2, 2)]);
        assert_eq!(g.patches[3].values[0], 22.0);
        let g6 = extract_patches(&map(6, 6, |_, _| 1.0), 3, 1).unwrap();
        assert_eq!(g6.patches.len(), 9);
        assert!(extract_patches(&m, 3, 3).is_err());
    }

    #[test]
    fn assemble_averages_overlaps() {
        let grid = PatchGrid {
            patch_size: 2,
            overlap: 1,
            patches: vec![
                Patch {
                    row: 0,
                    col: 0,
                    values: vec![2.0; 4],
                },
                Patch {
                    row: 0,
                    col: 1,
                    values: vec![4.0; 4],
                },
            ],
        };
        let m = assemble_patches(&grid, 3, 2, Polarity::On).unwrap();
        assert_eq!(m.values(), &[2.0, 3.0, 4.0, 2.0, 3.0, 4.0]);

        let single = map(4, 4, |x, y| (x * y) as f64);
        let g = extract_patches(&single, 4, 0).unwrap();
        assert_eq!(assemble_patches(&g, 4, 4, Polarity::On).unwrap(), single);
    }

    #[test]
    fn uncovered_pixel_is_internal_error() {
        let grid = PatchGrid {
            patch_size: 1,
            overlap: 0,
            patches: vec![Patch {
                row: 0,
                col: 0,
                values: vec![1.0],
            }],
        };
        assert!(matches!(
            assemble_patches(&grid, 2, 1, Polarity::On),
            Err(Error::Internal(_))
        ));
    }

    #[test]
    fn csv_and_pgm() {
        let m = map(3, 2, |x, y| (x + y) as f64);
        assert_eq!(m.to_csv(), "0,1,2\n1,2,3\n");
        assert_eq!(CountMap::from_csv(&m.to_csv(), Polarity::On).unwrap(), m);
        assert_eq!(m.to_pgm(), "P2\n3 2\n3\n0 1 2\n1 2 3\n");
    }

    proptest! {
        #[test]
        fn assemble_inverts_extract(
            w in 3usize..12, h in 3usize..12, size in 1usize..4, ov in 0usize..3,
            seed in any::<u64>(),
        ) {
            prop_assume!(ov < size && size <= w.min(h));
            let m = map(w, h, |x, y| ((x as u64 * 31 + y as u64 * 17 + seed) % 13) as f64);
            let g = extract_patches(&m, size, ov).unwrap();
            prop_assert_eq!(assemble_patches(&g, w, h, Polarity::On).unwrap(), m);
        }

        #[test]
        fn counts_are_additive_over_windows(
            times in proptest::collection::vec(0u32..1000, 0..60), split in 1u32..999,
        ) {
            let events: Vec<Event> = times.iter().enumerate()
                .map(|(i, &t)| Event::new(t, (i % 4) as u16, (i / 4 % 4) as u16, Polarity::On))
                .collect();
            let s = EventStream::new(4, 4, 1000, events).unwrap();
            let whole = build_count_map(&s, TimeWindow::new(0, 1000).unwrap(), Polarity::On);
            let a = build_count_map(&s, TimeWindow::new(0, split).unwrap(), Polarity::On);
            let b = build_count_map(&s, TimeWindow::new(split, 1000).unwrap(), Polarity::On);
            for i in 0..16 {
                prop_assert_eq!(whole.values()[i], a.values()[i] + b.values()[i]);
            }
        }
    }
}
