//! Patch-wise end-to-end denoising and PSNR evaluation.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::dibr::median_fill;
use crate::error::{Error, Result};
use crate::filters::{apply_filter, FilterSpec};
use crate::graph::{build_graph, NormalizedLaplacian, WeightParams};
use crate::image::{HoleMask, ImageGray};

pub const DEFAULT_PATCH_SIZE: usize = 64;
pub const MIN_PATCH_SIZE: usize = 8;

/// Zero-mean Gaussian noise of standard deviation `sigma`.
///
/// Samples come from ChaCha20 seeded with `seed` (`rand_chacha`'s
/// `seed_from_u64`), mapped through `rand_distr::StandardNormal`, and are
/// consumed in row-major pixel order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub seed: u64,
}

/// Adds noise without clamping; `sigma = 0` returns the input unchanged.
pub fn add_gaussian_noise(img: &ImageGray, spec: &NoiseSpec) -> Result<ImageGray> {
    if !(spec.sigma.is_finite() && spec.sigma >= 0.0) {
        return Err(Error::InvalidParameter(format!("noise sigma {}", spec.sigma)));
    }
    if spec.sigma == 0.0 {
        return Ok(img.clone());
    }
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let mut out = img.clone();
    for v in out.samples_mut() {
        let z: f64 = StandardNormal.sample(&mut rng);
        *v += spec.sigma * z;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Patch {
    pub x0: usize,
    pub y0: usize,
    pub w: usize,
    pub h: usize,
}

/// Disjoint tiling in row-major order; the last row and column may be narrower.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatchGrid {
    pub width: usize,
    pub height: usize,
    pub patch_size: usize,
    pub patches: Vec<Patch>,
}

impl PatchGrid {
    pub fn new(width: usize, height: usize, patch_size: usize) -> Result<Self> {
        if patch_size < MIN_PATCH_SIZE {
            return Err(Error::InvalidParameter(format!(
                "patch size must be at least {MIN_PATCH_SIZE}, got {patch_size}"
            )));
        }
        let mut patches = Vec::new();
        for y0 in (0..height).step_by(patch_size) {
            for x0 in (0..width).step_by(patch_size) {
                patches.push(Patch {
                    x0,
                    y0,
                    w: patch_size.min(width - x0),
                    h: patch_size.min(height - y0),
                });
            }
        }
        Ok(Self {
            width,
            height,
            patch_size,
            patches,
        })
    }
}

pub fn split_patches(img: &ImageGray, patch_size: usize) -> Result<(PatchGrid, Vec<ImageGray>)> {
    let grid = PatchGrid::new(img.width(), img.height(), patch_size)?;
    let tiles = grid
        .patches
        .iter()
        .map(|p| img.crop(p.x0, p.y0, p.w, p.h))
        .collect::<Result<_>>()?;
    Ok((grid, tiles))
}

pub fn merge_patches(grid: &PatchGrid, tiles: &[ImageGray]) -> Result<ImageGray> {
    crate::error::check_len("patch count", grid.patches.len(), tiles.len())?;
    let mut out = ImageGray::filled(grid.width, grid.height, 0.0)?;
    for (p, t) in grid.patches.iter().zip(tiles) {
        t.ensure_same_dims(p.w, p.h, "patch")?;
        out.paste(t, p.x0, p.y0)?;
    }
    Ok(out)
}

/// Filters one patch: graph from the guide, filter applied to the noisy samples.
pub fn denoise_patch(
    noisy: &ImageGray,
    guide: &ImageGray,
    mask: &HoleMask,
    spec: &FilterSpec,
    weights: &WeightParams,
) -> Result<ImageGray> {
    noisy.ensure_same_dims(guide.width(), guide.height(), "noisy vs guide")?;
    let g = build_graph(guide, mask, weights)?;
    let l = NormalizedLaplacian::from_graph(&g);
    let out = apply_filter(spec, &l, &g, noisy.samples())?;
    ImageGray::new(noisy.width(), noisy.height(), out.into_inner())
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenoiseReport {
    pub filter: FilterSpec,
    pub weights: WeightParams,
    pub patch_size: usize,
    pub patch_count: usize,
    pub hole_pixels: usize,
    /// Wall time per patch, in grid order. Not part of the serialized report.
    pub patch_times: Vec<Duration>,
    pub noise: Option<NoiseSpec>,
    pub psnr_noisy_db: Option<f64>,
    pub psnr_denoised_db: Option<f64>,
}

impl DenoiseReport {
    /// Fills the PSNR fields against a clean reference.
    pub fn evaluate(&mut self, clean: &ImageGray, noisy: &ImageGray, denoised: &ImageGray) -> Result<()> {
        self.psnr_noisy_db = Some(psnr(clean, noisy, 255.0)?);
        self.psnr_denoised_db = Some(psnr(clean, denoised, 255.0)?);
        Ok(())
    }

    pub fn total_time(&self) -> Duration {
        self.patch_times.iter().sum()
    }

    fn rows(&self) -> Vec<(&'static str, String)> {
        let mut rows = vec![
            ("filter", self.filter.kind.name().to_string()),
            ("k", self.filter.k.to_string()),
            ("l", self.filter.l.to_string()),
            ("rho", self.filter.rho.to_string()),
            ("oracle", self.filter.oracle.to_string()),
            ("sigma_r", self.weights.sigma_r.to_string()),
            ("sigma_s", self.weights.sigma_s.to_string()),
            ("patch_size", self.patch_size.to_string()),
            ("patch_count", self.patch_count.to_string()),
            ("hole_pixels", self.hole_pixels.to_string()),
        ];
        if let Some(n) = self.noise {
            rows.push(("noise_sigma", n.sigma.to_string()));
            rows.push(("noise_seed", n.seed.to_string()));
        }
        if let Some(p) = self.psnr_noisy_db {
            rows.push(("psnr_noisy_db", fmt_db(p, 6)));
        }
        if let Some(p) = self.psnr_denoised_db {
            rows.push(("psnr_denoised_db", fmt_db(p, 6)));
        }
        rows
    }

    /// `metric,value` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("metric,value\n");
        for (k, v) in self.rows() {
            let _ = writeln!(s, "{k},{v}");
        }
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{} denoising report\n", self.filter.label());
        for (k, v) in self.rows() {
            let _ = writeln!(s, "  {k:<18} {v}");
        }
        if let (Some(a), Some(b)) = (self.psnr_noisy_db, self.psnr_denoised_db) {
            let _ = writeln!(s, "  {:<18} {}", "psnr_gain_db", fmt_db(b - a, 2));
        }
        s
    }
}

/// `inf` for an exact match, fixed decimals otherwise.
pub fn fmt_db(v: f64, decimals: usize) -> String {
    if v.is_infinite() && v > 0.0 {
        "inf".to_string()
    } else {
        format!("{v:.decimals$}")
    }
}

/// Per-patch graph filtering followed by the 3x3 median pass on hole pixels.
///
/// Patches are filtered in parallel on the current rayon pool and gathered in
/// grid order, so the result does not depend on the thread count.
pub fn denoise(
    noisy: &ImageGray,
    guide: &ImageGray,
    mask: &HoleMask,
    spec: &FilterSpec,
    weights: &WeightParams,
    patch_size: usize,
) -> Result<(ImageGray, DenoiseReport)> {
    spec.validate()?;
    noisy.ensure_same_dims(guide.width(), guide.height(), "noisy vs guide")?;
    mask.matches(noisy)?;
    let grid = PatchGrid::new(noisy.width(), noisy.height(), patch_size)?;
    let results: Vec<(ImageGray, Duration)> = grid
        .patches
        .par_iter()
        .map(|p| {
            let start = Instant::now();
            let out = denoise_patch(
                &noisy.crop(p.x0, p.y0, p.w, p.h)?,
                &guide.crop(p.x0, p.y0, p.w, p.h)?,
                &mask.crop(p.x0, p.y0, p.w, p.h)?,
                spec,
                weights,
            )?;
            Ok((out, start.elapsed()))
        })
        .collect::<Result<_>>()?;
    let (tiles, patch_times): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let filtered = merge_patches(&grid, &tiles)?;
    let out = median_fill(&filtered, mask)?;
    let report = DenoiseReport {
        filter: *spec,
        weights: *weights,
        patch_size,
        patch_count: grid.patches.len(),
        hole_pixels: mask.hole_count(),
        patch_times,
        noise: None,
        psnr_noisy_db: None,
        psnr_denoised_db: None,
    };
    Ok((out, report))
}

/// `10 log10(peak^2 / MSE)`; identical images give `+inf`.
pub fn psnr(a: &ImageGray, b: &ImageGray, peak: f64) -> Result<f64> {
    a.ensure_same_dims(b.width(), b.height(), "psnr operands")?;
    let mse = a
        .samples()
        .iter()
        .zip(b.samples())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / a.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}
