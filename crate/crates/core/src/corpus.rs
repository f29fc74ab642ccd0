//! Deterministic synthetic recordings for dictionary training and evaluation.
//!
//! Scenes are made of sprites (bars, squares, disks) moving at constant
//! velocity over a background of luminance 1. Sprite geometry is drawn in
//! units of the sensor width, so one seed describes the same motion at any
//! resolution.

use rand::Rng;

use crate::count_map::{build_full_count_map, CountMap};
use crate::dvs_sim::{simulate, IntensityScene, Scene, SceneKind, SimConfig};
use crate::error::{Error, Result};
use crate::event_stream::{EventStream, Polarity};
use crate::rng::seeded_rng;
use crate::sparse_sr::{train_dictionaries, DictionaryPair, DEFAULT_ATOMS};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    /// Full-height bar of the given width.
    VerticalBar {
        width: f64,
    },
    /// Full-width bar of the given height.
    HorizontalBar {
        height: f64,
    },
    Square {
        side: f64,
    },
    Disk {
        radius: f64,
    },
    /// Full-field sinusoidal grating; `angle` is the direction of its wave
    /// vector in radians. Only the velocity component along it matters.
    Grating {
        period: f64,
        angle: f64,
    },
}

/// One moving object. Positions are the object's centre in pixels at t = 0,
/// velocities in pixels per second. Luminance inside is `1 + contrast`;
/// `contrast` must exceed −1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sprite {
    pub shape: Shape,
    pub x0: f64,
    pub y0: f64,
    pub vx: f64,
    pub vy: f64,
    pub contrast: f64,
}

fn overlap(a: f64, b: f64, c: f64, d: f64) -> f64 {
    (b.min(d) - a.max(c)).max(0.0)
}

impl Sprite {
    /// Fraction of pixel `(x, y)` covered at time `t` (seconds).
    fn coverage(&self, x: f64, y: f64, t: f64) -> f64 {
        let cx = self.x0 + self.vx * t;
        let cy = self.y0 + self.vy * t;
        match self.shape {
            Shape::VerticalBar { width } => overlap(x, x + 1.0, cx - width / 2.0, cx + width / 2.0),
            Shape::HorizontalBar { height } => {
                overlap(y, y + 1.0, cy - height / 2.0, cy + height / 2.0)
            }
            Shape::Square { side } => {
                let h = side / 2.0;
                overlap(x, x + 1.0, cx - h, cx + h) * overlap(y, y + 1.0, cy - h, cy + h)
            }
            Shape::Disk { radius } => {
                let d = ((x + 0.5 - cx).powi(2) + (y + 0.5 - cy).powi(2)).sqrt();
                (radius - d + 0.5).clamp(0.0, 1.0)
            }
            Shape::Grating { period, angle } => {
                let u = (x + 0.5 - cx) * angle.cos() + (y + 0.5 - cy) * angle.sin();
                0.5 * (1.0 + (std::f64::consts::TAU * u / period).sin())
            }
        }
    }
}

/// A scene of independently moving sprites; luminance factors multiply.
#[derive(Debug, Clone, PartialEq)]
pub struct SpriteScene {
    pub width: u16,
    pub height: u16,
    pub duration: u32,
    pub sprites: Vec<Sprite>,
}

impl SpriteScene {
    pub fn new(width: u16, height: u16, duration: u32, sprites: Vec<Sprite>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::arg("scene geometry must be non-zero"));
        }
        if let Some(s) = sprites
            .iter()
            .find(|s| !(s.contrast > -1.0 && s.contrast.is_finite()))
        {
            return Err(Error::arg(format!(
                "sprite contrast must exceed -1, got {}",
                s.contrast
            )));
        }
        Ok(SpriteScene {
            width,
            height,
            duration,
            sprites,
        })
    }

    /// Two to four sprites with geometry and speed drawn relative to the
    /// sensor width; every sprite crosses part of the field of view.
    pub fn random(width: u16, height: u16, duration: u32, seed: u64) -> Result<Self> {
        let mut rng = seeded_rng(seed);
        let (w, h) = (width as f64, height as f64);
        let secs = duration as f64 * 1e-6;
        let n = rng.random_range(2..=4);
        let sprites = (0..n)
            .map(|_| {
                let shape = match rng.random_range(0..4) {
                    0 => Shape::VerticalBar {
                        width: w * rng.random_range(0.06..0.2),
                    },
                    1 => Shape::HorizontalBar {
                        height: h * rng.random_range(0.06..0.2),
                    },
                    2 => Shape::Square {
                        side: w * rng.random_range(0.15..0.4),
                    },
                    _ => Shape::Disk {
                        radius: w * rng.random_range(0.08..0.22),
                    },
                };
                // travel a quarter to a full sensor width over the recording
                let travel = w * rng.random_range(0.25..1.0);
                let angle = rng.random_range(0.0..std::f64::consts::TAU);
                let (vx, vy) = (travel / secs * angle.cos(), travel / secs * angle.sin());
                // start so that the midpoint of the path lies inside the sensor
                let mx = rng.random_range(0.2..0.8) * w;
                let my = rng.random_range(0.2..0.8) * h;
                let contrast = if rng.random_bool(0.7) {
                    rng.random_range(0.5..2.0)
                } else {
                    -rng.random_range(0.35..0.7)
                };
                Sprite {
                    shape,
                    x0: mx - vx * secs / 2.0,
                    y0: my - vy * secs / 2.0,
                    vx,
                    vy,
                    contrast,
                }
            })
            .collect();
        SpriteScene::new(width, height, duration, sprites)
    }
}

impl Scene for SpriteScene {
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
        let (x, y) = (x as f64, y as f64);
        self.sprites
            .iter()
            .map(|s| 1.0 + s.contrast * s.coverage(x, y, t))
            .product()
    }
}

/// A named synthetic recording.
#[derive(Debug, Clone)]
pub struct Recording {
    pub name: String,
    pub stream: EventStream,
}

/// Seeds below this value are reserved for training scenes; evaluation
/// scenes use seeds at or above it so the two never coincide.
pub const EVALUATION_SEED_BASE: u64 = 1_000_000;

pub fn random_recording(
    width: u16,
    height: u16,
    duration: u32,
    seed: u64,
    sim: &SimConfig,
) -> Result<EventStream> {
    let scene = SpriteScene::random(width, height, duration, seed)?;
    simulate(&scene, sim, seed)
}

/// Five evaluation recordings: a moving bar, a moving disk and three random
/// sprite scenes.
pub fn evaluation_corpus(
    width: u16,
    height: u16,
    duration: u32,
    sim: &SimConfig,
) -> Result<Vec<Recording>> {
    let secs = duration as f64 * 1e-6;
    let w = width as f64;
    let bar = SceneKind::MovingBar {
        speed: 0.6 * w / secs,
        bar_width: w / 8.0,
        contrast: 1.5,
    };
    let disk = SceneKind::MovingDisk {
        speed: 0.6 * w / secs,
        radius: w / 5.0,
        contrast: 1.5,
    };
    let mut out = Vec::new();
    for kind in [bar, disk] {
        let scene = IntensityScene::new(kind, width, height, duration)?;
        out.push(Recording {
            name: kind.name().to_string(),
            stream: simulate(&scene, sim, 0)?,
        });
    }
    for i in 0..3 {
        let seed = EVALUATION_SEED_BASE + i;
        out.push(Recording {
            name: format!("sprites_{i}"),
            stream: random_recording(width, height, duration, seed, sim)?,
        });
    }
    Ok(out)
}

/// Two busy recordings in which every pixel fires throughout: a drifting
/// grating alone, and a second grating with a bright disk and a dark bar
/// moving across it. Used where total firing rates need many events per
/// time bin.
pub fn dense_corpus(
    width: u16,
    height: u16,
    duration: u32,
    sim: &SimConfig,
) -> Result<Vec<Recording>> {
    let secs = duration as f64 * 1e-6;
    let (w, h) = (width as f64, height as f64);
    let grating = |period: f64, angle: f64, hz: f64, contrast: f64| Sprite {
        shape: Shape::Grating { period, angle },
        x0: 0.0,
        y0: 0.0,
        vx: period * hz * angle.cos(),
        vy: period * hz * angle.sin(),
        contrast,
    };
    let scenes = [
        ("grating", vec![grating(w / 4.0, 0.5, 20.0, 3.0)]),
        (
            "grating_objects",
            vec![
                grating(w / 3.0, 2.0, 15.0, 2.0),
                Sprite {
                    shape: Shape::Disk { radius: w / 6.0 },
                    x0: 0.1 * w,
                    y0: 0.4 * h,
                    vx: 0.8 * w / secs,
                    vy: 0.2 * h / secs,
                    contrast: 1.5,
                },
                Sprite {
                    shape: Shape::HorizontalBar { height: h / 8.0 },
                    x0: 0.0,
                    y0: 0.9 * h,
                    vx: 0.0,
                    vy: -0.8 * h / secs,
                    contrast: -0.6,
                },
            ],
        ),
    ];
    scenes
        .into_iter()
        .map(|(name, sprites)| {
            let scene = SpriteScene::new(width, height, duration, sprites)?;
            Ok(Recording {
                name: name.to_string(),
                stream: simulate(&scene, sim, 0)?,
            })
        })
        .collect()
}

/// Count maps (both polarities) of `recordings` random training scenes at
/// `width × height`.
pub fn training_maps(
    width: u16,
    height: u16,
    duration: u32,
    recordings: usize,
    sim: &SimConfig,
) -> Result<Vec<CountMap>> {
    let mut maps = Vec::with_capacity(2 * recordings);
    for seed in 0..recordings as u64 {
        let s = random_recording(width, height, duration, seed, sim)?;
        for p in Polarity::BOTH {
            maps.push(build_full_count_map(&s, p));
        }
    }
    Ok(maps)
}

/// Train a dictionary for `factor` on random scenes whose low-resolution
/// size is `lr_width × lr_height`.
pub fn train_synthetic_dictionary(
    factor: usize,
    lr_width: u16,
    lr_height: u16,
    duration: u32,
    recordings: usize,
    seed: u64,
) -> Result<DictionaryPair> {
    let f = u16::try_from(factor).map_err(|_| Error::arg("factor too large"))?;
    let maps = training_maps(
        lr_width * f,
        lr_height * f,
        duration,
        recordings,
        &SimConfig::default(),
    )?;
    train_dictionaries(&maps, factor, DEFAULT_ATOMS, seed)
}
