//! Row-major grayscale images and hole masks.

use crate::error::{Error, Result};

/// A single-channel image with real-valued samples, nominally in `[0, 255]`.
///
/// Samples stay unquantized and unclamped; conversion to 8 bits happens only
/// when an image is written out (see [`ImageGray::to_u8`]).
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGray {
    width: usize,
    height: usize,
    samples: Vec<f64>,
}

impl ImageGray {
    pub fn new(width: usize, height: usize, samples: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        let n = width
            .checked_mul(height)
            .ok_or_else(|| Error::InvalidParameter("image dimensions overflow".into()))?;
        crate::error::check_len("image samples", n, samples.len())?;
        Ok(Self { width, height, samples })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width.saturating_mul(height)])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut samples = Vec::with_capacity(width.saturating_mul(height));
        for y in 0..height {
            for x in 0..width {
                samples.push(f(x, y));
            }
        }
        Self::new(width, height, samples)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [f64] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.samples[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: f64) {
        self.samples[y * self.width + x] = value;
    }

    pub fn row(&self, y: usize) -> &[f64] {
        &self.samples[y * self.width..(y + 1) * self.width]
    }

    /// Copies out the `w`x`h` window with top-left corner `(x0, y0)`.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<Self> {
        check_window(self.width, self.height, x0, y0, w, h)?;
        let mut samples = Vec::with_capacity(w * h);
        for y in y0..y0 + h {
            let start = y * self.width + x0;
            samples.extend_from_slice(&self.samples[start..start + w]);
        }
        Self::new(w, h, samples)
    }

    /// Writes `src` into this image with its top-left corner at `(x0, y0)`.
    pub fn paste(&mut self, src: &ImageGray, x0: usize, y0: usize) -> Result<()> {
        check_window(self.width, self.height, x0, y0, src.width, src.height)?;
        for y in 0..src.height {
            let dst = (y0 + y) * self.width + x0;
            self.samples[dst..dst + src.width].copy_from_slice(src.row(y));
        }
        Ok(())
    }

    pub fn ensure_same_dims(&self, width: usize, height: usize, what: &'static str) -> Result<()> {
        crate::error::check_len(what, self.width * self.height, width * height)?;
        if self.width != width {
            return Err(Error::dims(what, self.width, width));
        }
        Ok(())
    }

    /// Quantizes to 8 bits: round half away from zero, then clamp to `[0, 255]`.
    pub fn to_u8(&self) -> Vec<u8> {
        self.samples.iter().map(|&v| quantize_u8(v)).collect()
    }
}

#[inline]
pub fn quantize_u8(v: f64) -> u8 {
    if v.is_nan() {
        return 0;
    }
    v.round().clamp(0.0, 255.0) as u8
}

/// Per-pixel hole flags; `true` marks a pixel with no reliable guide sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HoleMask {
    width: usize,
    height: usize,
    flags: Vec<bool>,
}

impl HoleMask {
    pub fn new(width: usize, height: usize, flags: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter(format!(
                "mask dimensions must be positive, got {width}x{height}"
            )));
        }
        crate::error::check_len("mask flags", width.saturating_mul(height), flags.len())?;
        Ok(Self { width, height, flags })
    }

    pub fn empty(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![false; width.saturating_mul(height)])
    }

    pub fn full(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![true; width.saturating_mul(height)])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    #[inline]
    pub fn is_hole(&self, x: usize, y: usize) -> bool {
        self.flags[y * self.width + x]
    }

    pub fn hole_count(&self) -> usize {
        self.flags.iter().filter(|&&h| h).count()
    }

    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<Self> {
        check_window(self.width, self.height, x0, y0, w, h)?;
        let mut flags = Vec::with_capacity(w * h);
        for y in y0..y0 + h {
            let start = y * self.width + x0;
            flags.extend_from_slice(&self.flags[start..start + w]);
        }
        Self::new(w, h, flags)
    }

    pub fn matches(&self, img: &ImageGray) -> Result<()> {
        img.ensure_same_dims(self.width, self.height, "mask vs image")
    }
}

fn check_window(width: usize, height: usize, x0: usize, y0: usize, w: usize, h: usize) -> Result<()> {
    let fits = x0.checked_add(w).is_some_and(|e| e <= width) && y0.checked_add(h).is_some_and(|e| e <= height);
    if !fits || w == 0 || h == 0 {
        return Err(Error::InvalidParameter(format!(
            "window {w}x{h}+{x0}+{y0} outside {width}x{height} image"
        )));
    }
    Ok(())
}
