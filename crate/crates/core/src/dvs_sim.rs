//! Synthetic DVS recordings from analytic intensity scenes.
//!
//! Each pixel tracks `L(t) = ln I(t)` on a fixed time grid and emits an event
//! whenever `L` has moved by at least `theta` from the reference level of the
//! last event. The reference then advances by exactly `±theta`, so the long-run
//! event rate is `(1/theta) d/dt ln I`. Crossing times are located by linear
//! interpolation inside the step.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::event_stream::{Event, EventStream, Polarity};
use crate::rng::{keyed_rng, StreamKey};

/// Anything that can report a strictly positive luminance per pixel and time.
pub trait Scene: Sync {
    fn width(&self) -> u16;
    fn height(&self) -> u16;
    /// Microseconds.
    fn duration(&self) -> u32;
    /// Luminance of pixel `(x, y)` at time `t_us` (microseconds, fractional allowed).
    fn intensity(&self, x: u16, y: u16, t_us: f64) -> f64;
}

/// Parametric scene families. Background luminance is 1.0; moving objects
/// have luminance `1.0 + contrast`. Speeds are in pixels per second.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SceneKind {
    Uniform,
    /// `I(t) = exp(k t)` on every pixel, `k` per second.
    ExpRamp {
        k: f64,
    },
    /// Vertical bar whose left edge starts at column 0 and moves towards +x.
    MovingBar {
        speed: f64,
        bar_width: f64,
        contrast: f64,
    },
    /// Disk centred at `(radius, height / 2)` at t = 0, moving towards +x.
    MovingDisk {
        speed: f64,
        radius: f64,
        contrast: f64,
    },
}

/// Named parameters for [`SceneKind::from_name`]; unused fields are ignored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneParams {
    pub k: f64,
    pub speed: f64,
    pub bar_width: f64,
    pub radius: f64,
    pub contrast: f64,
}

impl Default for SceneParams {
    fn default() -> Self {
        SceneParams {
            k: 10.0,
            speed: 64.0,
            bar_width: 8.0,
            radius: 8.0,
            contrast: 1.0,
        }
    }
}

impl SceneKind {
    pub fn from_name(name: &str, params: &SceneParams) -> Result<Self> {
        let kind = match name {
            "uniform" => SceneKind::Uniform,
            "exp_ramp" => SceneKind::ExpRamp { k: params.k },
            "moving_bar" => SceneKind::MovingBar {
                speed: params.speed,
                bar_width: params.bar_width,
                contrast: params.contrast,
            },
            "moving_disk" => SceneKind::MovingDisk {
                speed: params.speed,
                radius: params.radius,
                contrast: params.contrast,
            },
            other => return Err(Error::arg(format!("unknown scene kind `{other}`"))),
        };
        kind.validate()?;
        Ok(kind)
    }

    pub fn name(&self) -> &'static str {
        match self {
            SceneKind::Uniform => "uniform",
            SceneKind::ExpRamp { .. } => "exp_ramp",
            SceneKind::MovingBar { .. } => "moving_bar",
            SceneKind::MovingDisk { .. } => "moving_disk",
        }
    }

    fn validate(&self) -> Result<()> {
        let positive = |v: f64, what: &str| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::arg(format!("{what} must be positive, got {v}")))
            }
        };
        match *self {
            SceneKind::Uniform => Ok(()),
            SceneKind::ExpRamp { k } if k.is_finite() => Ok(()),
            SceneKind::ExpRamp { k } => {
                Err(Error::arg(format!("ramp rate must be finite, got {k}")))
            }
            SceneKind::MovingBar {
                speed,
                bar_width,
                contrast,
            } => {
                positive(speed, "speed")?;
                positive(bar_width, "bar width")?;
                positive(contrast, "contrast")
            }
            SceneKind::MovingDisk {
                speed,
                radius,
                contrast,
            } => {
                positive(speed, "speed")?;
                positive(radius, "radius")?;
                positive(contrast, "contrast")
            }
        }
    }
}

/// A parametric scene on a concrete sensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntensityScene {
    pub width: u16,
    pub height: u16,
    pub duration: u32,
    pub kind: SceneKind,
}

impl IntensityScene {
    pub fn new(kind: SceneKind, width: u16, height: u16, duration: u32) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::arg("scene geometry must be non-zero"));
        }
        kind.validate()?;
        Ok(IntensityScene {
            width,
            height,
            duration,
            kind,
        })
    }
}

/// Length of `[a, b) ∩ [c, d)`.
fn overlap(a: f64, b: f64, c: f64, d: f64) -> f64 {
    (b.min(d) - a.max(c)).max(0.0)
}

impl Scene for IntensityScene {
    fn width(&self) -> u16 {
        self.width
    }

    fn height(&self) -> u16 {
        self.height
    }

    fn duration(&self) -> u32 {
        self.duration
    }

    fn intensity(&self, x: u16, y: u16, t_us: f64) -> f64 {
        let t = t_us * 1e-6;
        match self.kind {
            SceneKind::Uniform => 1.0,
            SceneKind::ExpRamp { k } => (k * t).exp(),
            SceneKind::MovingBar {
                speed,
                bar_width,
                contrast,
            } => {
                // area coverage of the pixel footprint [x, x+1) by the bar
                let left = speed * t;
                let px = x as f64;
                1.0 + contrast * overlap(px, px + 1.0, left, left + bar_width)
            }
            SceneKind::MovingDisk {
                speed,
                radius,
                contrast,
            } => {
                let cx = radius + speed * t;
                let cy = self.height as f64 / 2.0;
                let dx = x as f64 + 0.5 - cx;
                let dy = y as f64 + 0.5 - cy;
                let d = (dx * dx + dy * dy).sqrt();
                // anti-aliased edge one pixel wide
                let coverage = (radius - d + 0.5).clamp(0.0, 1.0);
                1.0 + contrast * coverage
            }
        }
    }
}

/// Pixel model parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    /// Contrast threshold in log-intensity units.
    pub theta: f64,
    /// Sampling interval of the log-intensity tracker, µs.
    pub time_step: u32,
    /// Half-width of uniform timestamp jitter in µs; 0 disables it.
    pub jitter_us: u32,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            theta: 0.1,
            time_step: 100,
            jitter_us: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta.is_finite() && self.theta > 0.0) {
            return Err(Error::arg(format!(
                "theta must be positive, got {}",
                self.theta
            )));
        }
        if self.time_step == 0 {
            return Err(Error::arg("time_step must be at least 1 µs"));
        }
        Ok(())
    }
}

/// Simulate the temporal-contrast pixel array over the scene's whole duration.
///
/// Output is deterministic for a given `(scene, config, seed)`; the seed only
/// matters when `config.jitter_us > 0`.
pub fn simulate<S: Scene + ?Sized>(
    scene: &S,
    config: &SimConfig,
    seed: u64,
) -> Result<EventStream> {
    config.validate()?;
    let (w, h) = (scene.width(), scene.height());
    let per_pixel: Vec<Vec<Event>> = (0..w as usize * h as usize)
        .into_par_iter()
        .map(|idx| {
            let x = (idx % w as usize) as u16;
            let y = (idx / w as usize) as u16;
            simulate_pixel(scene, config, seed, x, y)
        })
        .collect::<Result<_>>()?;
    EventStream::new(
        w,
        h,
        scene.duration(),
        per_pixel.into_iter().flatten().collect(),
    )
}

fn log_intensity<S: Scene + ?Sized>(scene: &S, x: u16, y: u16, t: f64) -> Result<f64> {
    let i = scene.intensity(x, y, t);
    if !(i > 0.0 && i.is_finite()) {
        return Err(Error::Domain(format!(
            "intensity {i} at pixel ({x}, {y}), t = {t} µs is not strictly positive"
        )));
    }
    Ok(i.ln())
}

fn simulate_pixel<S: Scene + ?Sized>(
    scene: &S,
    config: &SimConfig,
    seed: u64,
    x: u16,
    y: u16,
) -> Result<Vec<Event>> {
    let duration = scene.duration();
    let theta = config.theta;
    let eps = theta * 1e-9;
    let step = config.time_step as f64;
    let mut jitter =
        (config.jitter_us > 0).then(|| keyed_rng(seed, StreamKey::new(x, y, Polarity::On, 0)));

    let mut events = Vec::new();
    let mut t_a = 0.0;
    let mut l_a = log_intensity(scene, x, y, 0.0)?;
    let mut l_ref = l_a;
    while t_a < duration as f64 {
        let t_b = (t_a + step).min(duration as f64);
        let l_b = log_intensity(scene, x, y, t_b)?;
        loop {
            let diff = l_b - l_ref;
            let p = if diff >= theta - eps {
                Polarity::On
            } else if diff <= -(theta - eps) {
                Polarity::Off
            } else {
                break;
            };
            let level = l_ref + p.sign() as f64 * theta;
            let frac = if l_b != l_a {
                ((level - l_a) / (l_b - l_a)).clamp(0.0, 1.0)
            } else {
                1.0
            };
            let mut t = (t_a + frac * (t_b - t_a)).round();
            if let Some(rng) = jitter.as_mut() {
                let j = config.jitter_us as i64;
                t += rng.random_range(-j..=j) as f64;
            }
            let t = t.clamp(0.0, duration as f64) as u32;
            events.push(Event::new(t, x, y, p));
            l_ref = level;
        }
        t_a = t_b;
        l_a = l_b;
    }
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_scene_is_silent() {
        let scene = IntensityScene::new(SceneKind::Uniform, 8, 8, 100_000).unwrap();
        let s = simulate(&scene, &SimConfig::default(), 0).unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn scene_definitions() {
        let ramp = IntensityScene::new(SceneKind::ExpRamp { k: 10.0 }, 4, 4, 1_000_000).unwrap();
        assert!((ramp.intensity(1, 2, 250_000.0) - (2.5f64).exp()).abs() < 1e-12);
        let bar = IntensityScene::new(
            SceneKind::MovingBar {
                speed: 64.0,
                bar_width: 8.0,
                contrast: 1.0,
            },
            32,
            32,
            200_000,
        )
        .unwrap();
        for x in 0..32 {
            let expected = if x < 8 { 2.0 } else { 1.0 };
            assert_eq!(bar.intensity(x, 5, 0.0), expected, "column {x}");
        }
    }

    #[test]
    fn invalid_scene_parameters() {
        let p = SceneParams {
            contrast: 0.0,
            ..Default::default()
        };
        assert!(SceneKind::from_name("moving_bar", &p).is_err());
        assert!(SceneKind::from_name("checkerboard", &SceneParams::default()).is_err());
        let p = SceneParams {
            speed: -1.0,
            ..Default::default()
        };
        assert!(SceneKind::from_name("moving_disk", &p).is_err());
    }

    struct Dark;
    impl Scene for Dark {
        fn width(&self) -> u16 {
            2
        }
        fn height(&self) -> u16 {
            2
        }
        fn duration(&self) -> u32 {
            1000
        }
        fn intensity(&self, _: u16, _: u16, t: f64) -> f64 {
            1.0 - t / 500.0
        }
    }

    #[test]
    fn non_positive_intensity_is_a_domain_error() {
        assert!(matches!(
            simulate(&Dark, &SimConfig::default(), 0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn monotone_trace_gives_only_on_events() {
        let scene = IntensityScene::new(SceneKind::ExpRamp { k: 3.0 }, 3, 3, 500_000).unwrap();
        let s = simulate(&scene, &SimConfig::default(), 0).unwrap();
        assert!(!s.is_empty());
        assert!(s.events().iter().all(|e| e.p == Polarity::On));
    }

    #[test]
    fn jitter_is_seeded() {
        let scene = IntensityScene::new(SceneKind::ExpRamp { k: 10.0 }, 2, 2, 100_000).unwrap();
        let cfg = SimConfig {
            jitter_us: 20,
            ..Default::default()
        };
        let a = simulate(&scene, &cfg, 5).unwrap();
        let b = simulate(&scene, &cfg, 5).unwrap();
        assert_eq!(a, b);
    }
}
