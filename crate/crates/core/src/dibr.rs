//! Depth-based warping of the high-quality view into the noisy view.
//!
//! Views are assumed rectified, so depth reduces to a horizontal disparity and
//! the warp is a per-row resampling. Source positions are rounded to the
//! quarter-pel grid and interpolated with the HEVC luma filters.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::{HoleMask, ImageGray};

/// HEVC luma interpolation taps for phases 0, 1/4, 1/2, 3/4, over source
/// offsets `-3..=4` around the integer position.
pub const LUMA_TAPS: [[i32; 8]; 4] = [
    [0, 0, 0, 64, 0, 0, 0, 0],
    [-1, 4, -10, 58, 17, -5, 1, 0],
    [-1, 4, -11, 40, 40, -11, 4, -1],
    [0, 1, -5, 17, 58, -10, 4, -1],
];

/// Disparity margin for the occlusion test, in pixels.
pub const OCCLUSION_DISPARITY_GAP: f64 = 1.0;
/// Source-position proximity for the occlusion test, in quarter pels (0.75 px).
pub const OCCLUSION_RADIUS_QPEL: i64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubPel {
    Full,
    Quarter,
    Half,
    ThreeQuarter,
}

impl SubPel {
    pub fn from_index(i: usize) -> Self {
        match i & 3 {
            0 => SubPel::Full,
            1 => SubPel::Quarter,
            2 => SubPel::Half,
            _ => SubPel::ThreeQuarter,
        }
    }

    pub fn index(self) -> usize {
        match self {
            SubPel::Full => 0,
            SubPel::Quarter => 1,
            SubPel::Half => 2,
            SubPel::ThreeQuarter => 3,
        }
    }
}

/// Interpolates between `samples[3]` and `samples[4]` at the given phase.
/// The full-pel phase returns `samples[3]` exactly; no clipping is applied.
pub fn interp_subpel(samples: &[f64; 8], phase: SubPel) -> f64 {
    if phase == SubPel::Full {
        return samples[3];
    }
    let taps = &LUMA_TAPS[phase.index()];
    let acc: f64 = taps.iter().zip(samples).map(|(&t, &s)| t as f64 * s).sum();
    acc / 64.0
}

/// Per-pixel disparity for the target view, in stored depth units.
///
/// [`WarpParams::disparity_scale`] converts these values to pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl DepthMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        crate::error::check_len("depth values", width.saturating_mul(height), values.len())?;
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter("depth map must be non-empty".into()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite disparity {v}")));
        }
        Ok(Self { width, height, values })
    }

    /// Depth from stored integer levels, e.g. a 16-bit PGM.
    pub fn from_levels(width: usize, height: usize, levels: &[u16]) -> Result<Self> {
        Self::new(width, height, levels.iter().map(|&v| v as f64).collect())
    }

    pub fn constant(width: usize, height: usize, d: f64) -> Result<Self> {
        Self::new(width, height, vec![d; width.saturating_mul(height)])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WarpDirection {
    /// Source is the left view: `u' = u + s d`.
    LeftToRight,
    /// Source is the right view: `u' = u - s d`.
    RightToLeft,
}

impl WarpDirection {
    pub fn name(self) -> &'static str {
        match self {
            WarpDirection::LeftToRight => "left_to_right",
            WarpDirection::RightToLeft => "right_to_left",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "left_to_right" | "l2r" => Ok(WarpDirection::LeftToRight),
            "right_to_left" | "r2l" => Ok(WarpDirection::RightToLeft),
            _ => Err(Error::InvalidParameter(format!("unknown warp direction '{s}'"))),
        }
    }

    fn sign(self) -> f64 {
        match self {
            WarpDirection::LeftToRight => 1.0,
            WarpDirection::RightToLeft => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WarpParams {
    pub disparity_scale: f64,
    pub direction: WarpDirection,
}

impl WarpParams {
    pub fn new(disparity_scale: f64, direction: WarpDirection) -> Result<Self> {
        if !disparity_scale.is_finite() {
            return Err(Error::InvalidParameter(format!("disparity scale {disparity_scale}")));
        }
        Ok(Self {
            disparity_scale,
            direction,
        })
    }
}

/// How often each interpolation phase was used.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WarpStats {
    pub phase_counts: [usize; 4],
    pub out_of_range: usize,
    pub occluded: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WarpResult {
    pub guide: ImageGray,
    pub mask: HoleMask,
    pub stats: WarpStats,
}

/// Backward warp: every target pixel samples the source at `u +- s d` on its row.
///
/// A pixel becomes a hole when its quarter-pel source position falls outside
/// `[0, width - 1]`, or when another pixel of the row whose disparity is larger
/// by more than [`OCCLUSION_DISPARITY_GAP`] lands within 0.75 px of the same
/// source position (the nearer surface wins). Hole pixels keep the sampled
/// value if one exists, else 0.
pub fn warp_guide(source: &ImageGray, depth: &DepthMap, params: &WarpParams) -> Result<WarpResult> {
    source.ensure_same_dims(depth.width(), depth.height(), "depth vs source")?;
    let (w, h) = (source.width(), source.height());
    let sign = params.direction.sign();
    let scale = params.disparity_scale;

    let rows: Vec<(Vec<f64>, Vec<bool>, WarpStats)> = (0..h)
        .into_par_iter()
        .map(|y| warp_row(source.row(y), &depth.values[y * w..(y + 1) * w], sign * scale))
        .collect();

    let mut guide = Vec::with_capacity(w * h);
    let mut flags = Vec::with_capacity(w * h);
    let mut stats = WarpStats::default();
    for (g, m, s) in rows {
        guide.extend(g);
        flags.extend(m);
        for (acc, c) in stats.phase_counts.iter_mut().zip(s.phase_counts) {
            *acc += c;
        }
        stats.out_of_range += s.out_of_range;
        stats.occluded += s.occluded;
    }
    Ok(WarpResult {
        guide: ImageGray::new(w, h, guide)?,
        mask: HoleMask::new(w, h, flags)?,
        stats,
    })
}

fn warp_row(src: &[f64], disp: &[f64], signed_scale: f64) -> (Vec<f64>, Vec<bool>, WarpStats) {
    let w = src.len();
    let max_q = 4 * (w as i64 - 1);
    let mut stats = WarpStats::default();
    // Quarter-pel source positions.
    let pos: Vec<i64> = (0..w)
        .map(|u| ((u as f64 + signed_scale * disp[u]) * 4.0).round() as i64)
        .collect();

    let mut out = vec![0.0; w];
    let mut hole = vec![false; w];
    for u in 0..w {
        let q = pos[u];
        if q < 0 || q > max_q {
            hole[u] = true;
            stats.out_of_range += 1;
            continue;
        }
        let base = q.div_euclid(4);
        let phase = SubPel::from_index(q.rem_euclid(4) as usize);
        stats.phase_counts[phase.index()] += 1;
        let mut taps = [0.0; 8];
        for (t, off) in taps.iter_mut().zip(-3i64..=4) {
            let x = (base + off).clamp(0, w as i64 - 1) as usize;
            *t = src[x];
        }
        out[u] = interp_subpel(&taps, phase);
    }

    // Occlusion: sort by source position, then scan each pixel's neighbourhood.
    let mut order: Vec<usize> = (0..w).collect();
    order.sort_by_key(|&u| (pos[u], u));
    for (rank, &u) in order.iter().enumerate() {
        if hole[u] {
            continue;
        }
        let limit = disp[u] * signed_scale.abs() + OCCLUSION_DISPARITY_GAP;
        let near = |&&v: &&usize| disp[v] * signed_scale.abs() > limit;
        let before = order[..rank]
            .iter()
            .rev()
            .take_while(|&&v| pos[u] - pos[v] <= OCCLUSION_RADIUS_QPEL)
            .any(|v| near(&v));
        let after = order[rank + 1..]
            .iter()
            .take_while(|&&v| pos[v] - pos[u] <= OCCLUSION_RADIUS_QPEL)
            .any(|v| near(&v));
        if before || after {
            hole[u] = true;
            stats.occluded += 1;
        }
    }
    (out, hole, stats)
}

/// Replaces each hole pixel by the median of its in-bounds, non-hole 3x3
/// neighbours in `img`. Even counts take the lower middle value; holes with no
/// such neighbour keep their value.
pub fn median_fill(img: &ImageGray, mask: &HoleMask) -> Result<ImageGray> {
    mask.matches(img)?;
    let (w, h) = (img.width(), img.height());
    let mut out = img.clone();
    let mut buf = Vec::with_capacity(8);
    for y in 0..h {
        for x in 0..w {
            if !mask.is_hole(x, y) {
                continue;
            }
            buf.clear();
            for ny in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                for nx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                    if !mask.is_hole(nx, ny) {
                        buf.push(img.get(nx, ny));
                    }
                }
            }
            if buf.is_empty() {
                continue;
            }
            buf.sort_by(f64::total_cmp);
            out.set(x, y, buf[(buf.len() - 1) / 2]);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn taps_sum_to_64() {
        for taps in LUMA_TAPS {
            assert_eq!(taps.iter().sum::<i32>(), 64);
        }
        // The quarter and three-quarter filters mirror each other.
        let mut rev = LUMA_TAPS[1];
        rev.reverse();
        assert_eq!(rev, LUMA_TAPS[3]);
    }

    #[test]
    fn full_phase_is_exact() {
        let s = [0.1, 7.3, 19.0, 123.456789, 8.0, -4.0, 1e-3, 255.0];
        assert_eq!(interp_subpel(&s, SubPel::Full).to_bits(), s[3].to_bits());
    }

    #[test]
    fn constant_samples_any_phase() {
        for i in 0..4 {
            let v = interp_subpel(&[37.25; 8], SubPel::from_index(i));
            assert_abs_diff_eq!(v, 37.25, epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_depth_is_identity() {
        let src = ImageGray::from_fn(9, 4, |x, y| (x * x + 3 * y) as f64 + 0.125).unwrap();
        let depth = DepthMap::constant(9, 4, 0.0).unwrap();
        let r = warp_guide(&src, &depth, &WarpParams::new(1.0, WarpDirection::LeftToRight).unwrap()).unwrap();
        assert_eq!(r.guide, src);
        assert_eq!(r.mask.hole_count(), 0);
    }

    #[test]
    fn unit_depth_shifts_one_column() {
        let src = ImageGray::from_fn(6, 3, |x, y| (10 * x + y) as f64).unwrap();
        let depth = DepthMap::constant(6, 3, 1.0).unwrap();
        let r = warp_guide(&src, &depth, &WarpParams::new(1.0, WarpDirection::LeftToRight).unwrap()).unwrap();
        for y in 0..3 {
            for x in 0..5 {
                assert_eq!(r.guide.get(x, y), src.get(x + 1, y));
                assert!(!r.mask.is_hole(x, y));
            }
            assert!(r.mask.is_hole(5, y));
        }
        assert_eq!(r.stats.phase_counts[1..], [0, 0, 0]);
    }

    #[test]
    fn dimension_mismatch() {
        let src = ImageGray::filled(4, 4, 0.0).unwrap();
        let depth = DepthMap::constant(4, 3, 0.0).unwrap();
        let p = WarpParams::new(1.0, WarpDirection::LeftToRight).unwrap();
        assert!(matches!(
            warp_guide(&src, &depth, &p),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn occluded_background_is_marked() {
        // Columns 6..9 are foreground (d = 4), the rest background (d = 1); u' = u - d.
        let src = ImageGray::from_fn(12, 1, |x, _| x as f64).unwrap();
        let disp: Vec<f64> = (0..12).map(|u| if (6..9).contains(&u) { 4.0 } else { 1.0 }).collect();
        let depth = DepthMap::new(12, 1, disp).unwrap();
        let r = warp_guide(&src, &depth, &WarpParams::new(1.0, WarpDirection::RightToLeft).unwrap()).unwrap();
        // Foreground 6,7,8 -> 2,3,4; background 3,4,5 -> 2,3,4 are occluded.
        let holes: Vec<usize> = (0..12).filter(|&u| r.mask.is_hole(u, 0)).collect();
        assert_eq!(holes, vec![0, 3, 4, 5]);
        assert_eq!(r.stats.occluded, 3);
        assert_eq!(r.stats.out_of_range, 1);
    }

    #[test]
    fn median_of_eight_takes_lower_middle() {
        let vals = [1.0, 2.0, 3.0, 4.0, 0.0, 5.0, 6.0, 7.0, 8.0];
        let img = ImageGray::new(3, 3, vals.to_vec()).unwrap();
        let mut flags = vec![false; 9];
        flags[4] = true;
        let mask = HoleMask::new(3, 3, flags).unwrap();
        let out = median_fill(&img, &mask).unwrap();
        assert_eq!(out.get(1, 1), 4.0);
    }

    #[test]
    fn median_constant_neighbourhood_and_no_holes() {
        let mut img = ImageGray::filled(3, 3, 9.0).unwrap();
        img.set(1, 1, -100.0);
        let mut flags = vec![false; 9];
        flags[4] = true;
        let out = median_fill(&img, &HoleMask::new(3, 3, flags).unwrap()).unwrap();
        assert_eq!(out.get(1, 1), 9.0);
        assert_eq!(median_fill(&img, &HoleMask::empty(3, 3).unwrap()).unwrap(), img);
    }

    #[test]
    fn isolated_hole_block_keeps_values() {
        let img = ImageGray::from_fn(3, 3, |x, y| (x + y) as f64).unwrap();
        let out = median_fill(&img, &HoleMask::full(3, 3).unwrap()).unwrap();
        assert_eq!(out, img);
    }
}
