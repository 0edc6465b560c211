//! Procedural rectified stereo scene with exact disparity.
//!
//! A textured background plane at one disparity and a textured foreground
//! rectangle at a larger one. Both views are rendered by point-sampling the
//! same continuous textures, so the right view is exactly what an ideal
//! warp of the left view would produce outside occlusions.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dibr::{DepthMap, WarpDirection, WarpParams};
use crate::error::{Error, Result};
use crate::image::ImageGray;

pub const SCENE_SIZE: usize = 256;
pub const BACKGROUND_DISPARITY: f64 = 4.0;
pub const FOREGROUND_DISPARITY: f64 = 10.5;
/// Depth levels are stored in quarter pels.
pub const DISPARITY_SCALE: f64 = 0.25;

/// Foreground rectangle in left-view coordinates: `[x0, x1) x [y0, y1)`.
const FOREGROUND: (f64, f64, f64, f64) = (96.0, 176.0, 72.0, 184.0);

#[derive(Debug, Clone)]
struct Wave {
    fx: f64,
    fy: f64,
    phase: f64,
    amp: f64,
}

#[derive(Debug, Clone)]
struct Block {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    offset: f64,
}

#[derive(Debug, Clone)]
struct Texture {
    base: f64,
    waves: Vec<Wave>,
    blocks: Vec<Block>,
}

impl Texture {
    fn random(rng: &mut ChaCha8Rng, base: f64, n_waves: usize, n_blocks: usize, extent: f64) -> Self {
        let waves = (0..n_waves)
            .map(|_| {
                let period = rng.random_range(10.0..48.0);
                let angle: f64 = rng.random_range(0.0..std::f64::consts::PI);
                Wave {
                    fx: angle.cos() / period,
                    fy: angle.sin() / period,
                    phase: rng.random_range(0.0..std::f64::consts::TAU),
                    amp: rng.random_range(4.0..12.0),
                }
            })
            .collect();
        let blocks = (0..n_blocks)
            .map(|_| {
                let x0 = rng.random_range(0.0..extent);
                let y0 = rng.random_range(0.0..extent);
                let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                Block {
                    x0,
                    x1: x0 + rng.random_range(12.0..60.0),
                    y0,
                    y1: y0 + rng.random_range(12.0..60.0),
                    offset: sign * rng.random_range(25.0..45.0),
                }
            })
            .collect();
        Self { base, waves, blocks }
    }

    fn eval(&self, x: f64, y: f64) -> f64 {
        let tau = std::f64::consts::TAU;
        let mut v = self.base;
        for w in &self.waves {
            v += w.amp * (tau * (w.fx * x + w.fy * y) + w.phase).sin();
        }
        for b in &self.blocks {
            if x >= b.x0 && x < b.x1 && y >= b.y0 && y < b.y1 {
                v += b.offset;
            }
        }
        v
    }
}

/// Left (high-quality source) and right (target) views plus right-view disparity.
#[derive(Debug, Clone)]
pub struct StereoScene {
    pub left: ImageGray,
    pub right: ImageGray,
    /// Disparity of the right view in quarter-pel levels.
    pub depth_levels: Vec<u16>,
    pub meta: SceneMeta,
}

impl StereoScene {
    pub fn depth(&self) -> Result<DepthMap> {
        DepthMap::from_levels(self.meta.width, self.meta.height, &self.depth_levels)
    }

    pub fn warp_params(&self) -> Result<WarpParams> {
        WarpParams::new(self.meta.disparity_scale, self.meta.direction)
    }
}

/// Renders the 256x256 scene for `seed`. Samples are already 8-bit integers.
pub fn synthesize(seed: u64) -> StereoScene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let size = SCENE_SIZE as f64;
    let background = Texture::random(&mut rng, 110.0, 6, 14, size);
    let foreground = Texture::random(&mut rng, 150.0, 4, 4, size);
    let (fx0, fx1, fy0, fy1) = FOREGROUND;
    let in_fg = |x: f64, y: f64| x >= fx0 && x < fx1 && y >= fy0 && y < fy1;
    let sample = |x: f64, y: f64| {
        let v = if in_fg(x, y) {
            foreground.eval(x - fx0, y - fy0)
        } else {
            background.eval(x, y)
        };
        v.round().clamp(0.0, 255.0)
    };

    let n = SCENE_SIZE;
    let left = ImageGray::from_fn(n, n, |x, y| sample(x as f64, y as f64)).expect("scene size is nonzero");
    let mut depth_levels = Vec::with_capacity(n * n);
    let right = ImageGray::from_fn(n, n, |x, y| {
        let (u, v) = (x as f64, y as f64);
        if in_fg(u + FOREGROUND_DISPARITY, v) {
            depth_levels.push((FOREGROUND_DISPARITY / DISPARITY_SCALE) as u16);
            sample(u + FOREGROUND_DISPARITY, v)
        } else {
            depth_levels.push((BACKGROUND_DISPARITY / DISPARITY_SCALE) as u16);
            background.eval(u + BACKGROUND_DISPARITY, v).round().clamp(0.0, 255.0)
        }
    })
    .expect("scene size is nonzero");

    StereoScene {
        left,
        right,
        depth_levels,
        meta: SceneMeta {
            width: n,
            height: n,
            disparity_scale: DISPARITY_SCALE,
            direction: WarpDirection::LeftToRight,
            seed: Some(seed),
        },
    }
}

/// Contents of `scene.meta`: `key=value` lines, `#` comments allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneMeta {
    pub width: usize,
    pub height: usize,
    pub disparity_scale: f64,
    pub direction: WarpDirection,
    pub seed: Option<u64>,
}

impl SceneMeta {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "width={}", self.width);
        let _ = writeln!(s, "height={}", self.height);
        let _ = writeln!(s, "disparity_scale={}", self.disparity_scale);
        let _ = writeln!(s, "direction={}", self.direction.name());
        if let Some(seed) = self.seed {
            let _ = writeln!(s, "seed={seed}");
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |reason: String| Error::format("scene.meta", reason);
        let mut width = None;
        let mut height = None;
        let mut scale = None;
        let mut direction = None;
        let mut seed = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("line {}: expected key=value", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            let dup = || bad(format!("line {}: duplicate key '{key}'", lineno + 1));
            let num = |what: &str| bad(format!("line {}: invalid {what} '{value}'", lineno + 1));
            match key {
                "width" => {
                    let v: usize = value.parse().map_err(|_| num("width"))?;
                    if width.replace(v).is_some() {
                        return Err(dup());
                    }
                }
                "height" => {
                    let v: usize = value.parse().map_err(|_| num("height"))?;
                    if height.replace(v).is_some() {
                        return Err(dup());
                    }
                }
                "disparity_scale" => {
                    let v: f64 = value.parse().map_err(|_| num("disparity_scale"))?;
                    if !v.is_finite() {
                        return Err(num("disparity_scale"));
                    }
                    if scale.replace(v).is_some() {
                        return Err(dup());
                    }
                }
                "direction" => {
                    let v = WarpDirection::parse(value).map_err(|_| num("direction"))?;
                    if direction.replace(v).is_some() {
                        return Err(dup());
                    }
                }
                "seed" => {
                    let v: u64 = value.parse().map_err(|_| num("seed"))?;
                    if seed.replace(v).is_some() {
                        return Err(dup());
                    }
                }
                _ => return Err(bad(format!("line {}: unknown key '{key}'", lineno + 1))),
            }
        }
        let width = width.ok_or_else(|| bad("missing width".into()))?;
        let height = height.ok_or_else(|| bad("missing height".into()))?;
        if width == 0 || height == 0 {
            return Err(bad("zero dimension".into()));
        }
        Ok(Self {
            width,
            height,
            disparity_scale: scale.ok_or_else(|| bad("missing disparity_scale".into()))?,
            direction: direction.unwrap_or(WarpDirection::LeftToRight),
            seed,
        })
    }
}
