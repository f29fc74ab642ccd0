//! Address-event data model.
//!
//! An [`EventStream`] is a sensor geometry, a duration in microseconds and a
//! list of [`Event`]s kept in canonical order: ascending timestamp, ties
//! broken by row, then column, then polarity (OFF before ON). Every stream
//! produced by this crate is canonical, so serializing the same multiset of
//! events always yields the same bytes.
//!
//! Two on-disk formats are supported:
//!
//! * text (`.evt`): a `width height duration_us` header line followed by one
//!   `t_us,x,y,p` line per event, `p` being `1` or `-1`;
//! * binary (`.evsr`): little-endian, 16-byte header (`EVSR`, u16 width,
//!   u16 height, u32 duration, u32 count) followed by 10-byte records
//!   (u32 t, u16 x, u16 y, i8 p, u8 pad).

use std::fmt::Write as _;

use crate::error::{Error, Result};

pub const BINARY_MAGIC: [u8; 4] = *b"EVSR";
pub const BINARY_HEADER_LEN: usize = 16;
pub const BINARY_RECORD_LEN: usize = 10;

/// Event polarity. The derived order puts OFF before ON, matching `-1 < +1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Polarity {
    Off,
    On,
}

impl Polarity {
    pub const BOTH: [Polarity; 2] = [Polarity::On, Polarity::Off];

    pub fn sign(self) -> i8 {
        match self {
            Polarity::On => 1,
            Polarity::Off => -1,
        }
    }

    pub fn from_sign(sign: i64) -> Option<Self> {
        match sign {
            1 => Some(Polarity::On),
            -1 => Some(Polarity::Off),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Polarity::On => "on",
            Polarity::Off => "off",
        }
    }
}

/// A single address event. Field order matters: the derived `Ord` is the
/// canonical `(t, y, x, p)` order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Event {
    /// Microseconds since the stream origin.
    pub t: u32,
    pub y: u16,
    pub x: u16,
    pub p: Polarity,
}

impl Event {
    pub fn new(t: u32, x: u16, y: u16, p: Polarity) -> Self {
        Event { t, y, x, p }
    }
}

/// Half-open time interval `[t0, t1)` in microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeWindow {
    pub t0: u32,
    pub t1: u32,
}

impl TimeWindow {
    pub fn new(t0: u32, t1: u32) -> Result<Self> {
        if t0 >= t1 {
            return Err(Error::arg(format!("inverted or empty window [{t0}, {t1})")));
        }
        Ok(TimeWindow { t0, t1 })
    }

    pub fn len(&self) -> u32 {
        self.t1 - self.t0
    }

    pub fn is_empty(&self) -> bool {
        self.t1 <= self.t0
    }

    pub fn contains(&self, t: u32) -> bool {
        self.t0 <= t && t < self.t1
    }
}

/// Validated, canonically ordered, immutable event stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventStream {
    width: u16,
    height: u16,
    duration: u32,
    events: Vec<Event>,
}

impl EventStream {
    /// Validates every event against the geometry and sorts into canonical order.
    pub fn new(width: u16, height: u16, duration: u32, mut events: Vec<Event>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::arg("sensor geometry must be non-zero"));
        }
        for e in &events {
            check_event(e, width, height, duration)?;
        }
        events.sort_unstable();
        Ok(EventStream {
            width,
            height,
            duration,
            events,
        })
    }

    pub fn empty(width: u16, height: u16, duration: u32) -> Result<Self> {
        Self::new(width, height, duration, Vec::new())
    }

    pub fn width(&self) -> u16 {
        self.width
    }

    pub fn height(&self) -> u16 {
        self.height
    }

    pub fn duration(&self) -> u32 {
        self.duration
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn into_events(self) -> Vec<Event> {
        self.events
    }

    pub fn count_polarity(&self, p: Polarity) -> usize {
        self.events.iter().filter(|e| e.p == p).count()
    }

    /// Events with `t0 <= t < t1`, re-based so the window starts at 0.
    pub fn slice(&self, window: TimeWindow) -> Result<EventStream> {
        if window.is_empty() {
            return Err(Error::arg(format!(
                "inverted or empty window [{}, {})",
                window.t0, window.t1
            )));
        }
        if window.t1 > self.duration.saturating_add(1) {
            return Err(Error::arg(format!(
                "window end {} beyond stream duration {}",
                window.t1, self.duration
            )));
        }
        let lo = self.events.partition_point(|e| e.t < window.t0);
        let hi = self.events.partition_point(|e| e.t < window.t1);
        let events = self.events[lo..hi]
            .iter()
            .map(|e| Event {
                t: e.t - window.t0,
                ..*e
            })
            .collect();
        // already sorted: re-basing is monotone
        Ok(EventStream {
            width: self.width,
            height: self.height,
            duration: window.len(),
            events,
        })
    }

    /// Partition into `(on, off)` streams sharing this stream's geometry.
    pub fn split_polarity(&self) -> (EventStream, EventStream) {
        let (on, off): (Vec<Event>, Vec<Event>) =
            self.events.iter().partition(|e| e.p == Polarity::On);
        let make = |events| EventStream {
            width: self.width,
            height: self.height,
            duration: self.duration,
            events,
        };
        (make(on), make(off))
    }

    /// Union of the given streams in canonical order. All inputs must share a
    /// geometry and already live on a common timeline.
    pub fn merge<'a, I>(streams: I) -> Result<EventStream>
    where
        I: IntoIterator<Item = &'a EventStream>,
    {
        let mut iter = streams.into_iter();
        let first = iter
            .next()
            .ok_or_else(|| Error::arg("merge needs at least one stream"))?;
        let mut out = first.clone();
        for s in iter {
            if s.width != out.width || s.height != out.height {
                return Err(Error::arg(format!(
                    "geometry mismatch: {}x{} vs {}x{}",
                    out.width, out.height, s.width, s.height
                )));
            }
            out.duration = out.duration.max(s.duration);
            out.events.extend_from_slice(&s.events);
        }
        out.events.sort_unstable();
        Ok(out)
    }

    /// Shift every timestamp by `offset` and extend the duration accordingly.
    pub fn shifted(&self, offset: u32) -> Result<EventStream> {
        let duration = self
            .duration
            .checked_add(offset)
            .ok_or_else(|| Error::arg("timestamp overflow while shifting"))?;
        Ok(EventStream {
            width: self.width,
            height: self.height,
            duration,
            events: self
                .events
                .iter()
                .map(|e| Event {
                    t: e.t + offset,
                    ..*e
                })
                .collect(),
        })
    }

    /// Spatial downsampling by an integer factor: `(x, y) -> (x / k, y / k)`.
    pub fn downsample_spatial(&self, factor: u16) -> Result<EventStream> {
        if factor < 2 {
            return Err(Error::arg(format!(
                "downsampling factor must be >= 2, got {factor}"
            )));
        }
        if !self.width.is_multiple_of(factor) || !self.height.is_multiple_of(factor) {
            return Err(Error::arg(format!(
                "{}x{} is not divisible by {factor}",
                self.width, self.height
            )));
        }
        let mut events: Vec<Event> = self
            .events
            .iter()
            .map(|e| Event {
                x: e.x / factor,
                y: e.y / factor,
                ..*e
            })
            .collect();
        events.sort_unstable();
        Ok(EventStream {
            width: self.width / factor,
            height: self.height / factor,
            duration: self.duration,
            events,
        })
    }

    pub fn parse_text(bytes: &[u8]) -> Result<EventStream> {
        let text = std::str::from_utf8(bytes).map_err(|_| Error::Parse {
            line: 1,
            msg: "input is not ASCII text".into(),
        })?;
        let mut lines = text.split('\n').enumerate();
        let (width, height, duration) = loop {
            match lines.next() {
                None => {
                    return Err(Error::Parse {
                        line: 1,
                        msg: "missing header".into(),
                    })
                }
                Some((_, l)) if l.trim().is_empty() => continue,
                Some((i, l)) => break parse_header(i + 1, l)?,
            }
        };
        let mut events = Vec::new();
        for (i, raw) in lines {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            let e = parse_event_line(i + 1, line)?;
            check_event(&e, width, height, duration).map_err(|err| Error::Parse {
                line: i + 1,
                msg: match err {
                    Error::Argument(m) => m,
                    other => other.to_string(),
                },
            })?;
            events.push(e);
        }
        EventStream::new(width, height, duration, events)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(16 + self.events.len() * 16);
        let _ = writeln!(out, "{} {} {}", self.width, self.height, self.duration);
        for e in &self.events {
            let _ = writeln!(out, "{},{},{},{}", e.t, e.x, e.y, e.p.sign());
        }
        out
    }

    pub fn read_binary(bytes: &[u8]) -> Result<EventStream> {
        if bytes.len() < BINARY_HEADER_LEN {
            return Err(Error::Format("truncated header".into()));
        }
        if bytes[0..4] != BINARY_MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let width = u16::from_le_bytes([bytes[4], bytes[5]]);
        let height = u16::from_le_bytes([bytes[6], bytes[7]]);
        let duration = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        let count = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
        let payload = &bytes[BINARY_HEADER_LEN..];
        let expected = count
            .checked_mul(BINARY_RECORD_LEN)
            .ok_or_else(|| Error::Format("event count overflow".into()))?;
        if payload.len() < expected {
            return Err(Error::Format(format!(
                "truncated record: expected {count} events, payload holds {} bytes",
                payload.len()
            )));
        }
        if payload.len() > expected {
            return Err(Error::Format("trailing bytes after last record".into()));
        }
        if width == 0 || height == 0 {
            return Err(Error::Format("zero sensor geometry".into()));
        }
        let mut events = Vec::with_capacity(count);
        for (i, rec) in payload.chunks_exact(BINARY_RECORD_LEN).enumerate() {
            let t = u32::from_le_bytes(rec[0..4].try_into().unwrap());
            let x = u16::from_le_bytes([rec[4], rec[5]]);
            let y = u16::from_le_bytes([rec[6], rec[7]]);
            let p = Polarity::from_sign(rec[8] as i8 as i64)
                .ok_or_else(|| Error::Format(format!("record {i}: polarity {}", rec[8] as i8)))?;
            if rec[9] != 0 {
                return Err(Error::Format(format!("record {i}: non-zero pad byte")));
            }
            let e = Event::new(t, x, y, p);
            check_event(&e, width, height, duration)
                .map_err(|err| Error::Format(format!("record {i}: {err}")))?;
            if let Some(prev) = events.last() {
                if *prev > e {
                    return Err(Error::Format(format!("unsorted payload at record {i}")));
                }
            }
            events.push(e);
        }
        Ok(EventStream {
            width,
            height,
            duration,
            events,
        })
    }

    pub fn write_binary(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(BINARY_HEADER_LEN + self.events.len() * BINARY_RECORD_LEN);
        out.extend_from_slice(&BINARY_MAGIC);
        out.extend_from_slice(&self.width.to_le_bytes());
        out.extend_from_slice(&self.height.to_le_bytes());
        out.extend_from_slice(&self.duration.to_le_bytes());
        out.extend_from_slice(&(self.events.len() as u32).to_le_bytes());
        for e in &self.events {
            out.extend_from_slice(&e.t.to_le_bytes());
            out.extend_from_slice(&e.x.to_le_bytes());
            out.extend_from_slice(&e.y.to_le_bytes());
            out.push(e.p.sign() as u8);
            out.push(0);
        }
        out
    }
}

fn check_event(e: &Event, width: u16, height: u16, duration: u32) -> Result<()> {
    if e.x >= width {
        return Err(Error::arg(format!(
            "x out of range: {} >= width {width}",
            e.x
        )));
    }
    if e.y >= height {
        return Err(Error::arg(format!(
            "y out of range: {} >= height {height}",
            e.y
        )));
    }
    if e.t > duration {
        return Err(Error::arg(format!(
            "t out of range: {} > duration {duration}",
            e.t
        )));
    }
    Ok(())
}

fn parse_header(line: usize, text: &str) -> Result<(u16, u16, u32)> {
    let fields: Vec<&str> = text.split_whitespace().collect();
    if fields.len() != 3 {
        return Err(Error::Parse {
            line,
            msg: "header must be `width height duration_us`".into(),
        });
    }
    let bad = |what: &str| Error::Parse {
        line,
        msg: format!("invalid {what} in header"),
    };
    let width = fields[0].parse().map_err(|_| bad("width"))?;
    let height = fields[1].parse().map_err(|_| bad("height"))?;
    let duration = fields[2].parse().map_err(|_| bad("duration"))?;
    if width == 0 || height == 0 {
        return Err(Error::Parse {
            line,
            msg: "sensor geometry must be non-zero".into(),
        });
    }
    Ok((width, height, duration))
}

fn parse_event_line(line: usize, text: &str) -> Result<Event> {
    let fields: Vec<&str> = text.split(',').map(str::trim).collect();
    if fields.len() != 4 {
        return Err(Error::Parse {
            line,
            msg: format!("expected `t,x,y,p`, got {} fields", fields.len()),
        });
    }
    let bad = |what: &str, v: &str| Error::Parse {
        line,
        msg: format!("invalid {what} `{v}`"),
    };
    let t = fields[0].parse().map_err(|_| bad("timestamp", fields[0]))?;
    let x = fields[1].parse().map_err(|_| bad("x", fields[1]))?;
    let y = fields[2].parse().map_err(|_| bad("y", fields[2]))?;
    let p = fields[3]
        .parse::<i64>()
        .ok()
        .and_then(Polarity::from_sign)
        .ok_or_else(|| bad("polarity (must be 1 or -1)", fields[3]))?;
    Ok(Event::new(t, x, y, p))
}
