//! Slice preprocessing: non-local means denoising, min-max intensity
//! normalization to `[0, 1]`, and center crop/pad to a fixed canvas.
//!
//! The three steps run in that order on raw intensities; the canvas default
//! is [`CANVAS`] pixels square.

use crate::error::{Error, Result};
use crate::grid::{reflect_index, Image2D, LabelMask2D};
use crate::real::Real;
use serde::{Deserialize, Serialize};

/// Output canvas edge length for [`preprocess_slice`].
pub const CANVAS: usize = 256;

/// Default patch radius (3x3 patches).
pub const DEFAULT_PATCH_RADIUS: usize = 1;
/// Default search radius (11x11 window).
pub const DEFAULT_SEARCH_RADIUS: usize = 5;
/// Default filtering strength as a fraction of the slice intensity range.
pub const DEFAULT_H_FACTOR: f64 = 0.08;

/// Non-local means parameters with an absolute filtering strength.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NlmParams {
    /// Half-width of the similarity patch.
    pub patch_radius: usize,
    /// Half-width of the candidate search window.
    pub search_radius: usize,
    /// Filtering strength, in the intensity units of the image.
    pub h: f64,
    /// Noise standard deviation for the `max(d^2 - 2*sigma^2, 0)` offset.
    pub sigma: f64,
}

impl NlmParams {
    pub fn new(patch_radius: usize, search_radius: usize, h: f64, sigma: f64) -> Result<Self> {
        let p = Self { patch_radius, search_radius, h, sigma };
        p.validate()?;
        Ok(p)
    }

    /// Default parameters for `image`, with `h` tied to the slice intensity
    /// range so raw scanner units do not need rescaling first.
    pub fn default_for<T: Real>(image: &Image2D<T>) -> Self {
        Self::relative_to_range(image, DEFAULT_PATCH_RADIUS, DEFAULT_SEARCH_RADIUS, DEFAULT_H_FACTOR, 0.0)
    }

    /// Resolves a range-relative strength against a concrete slice:
    /// `h = h_factor * (max - min)`, floored to stay positive on constant
    /// slices (where the output is the constant regardless of `h`).
    pub fn relative_to_range<T: Real>(
        image: &Image2D<T>,
        patch_radius: usize,
        search_radius: usize,
        h_factor: f64,
        sigma_factor: f64,
    ) -> Self {
        let range = image
            .min_max()
            .map(|(lo, hi)| (hi - lo).to_f64().unwrap_or(0.0))
            .unwrap_or(0.0);
        Self {
            patch_radius,
            search_radius,
            h: (h_factor * range).max(1e-12),
            sigma: sigma_factor * range,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.patch_radius < 1 {
            return Err(Error::InvalidParameter("patch_radius must be >= 1".into()));
        }
        if self.search_radius < self.patch_radius {
            return Err(Error::InvalidParameter(
                "search_radius must be >= patch_radius".into(),
            ));
        }
        if self.h.is_nan() || self.h <= 0.0 {
            return Err(Error::InvalidParameter("filtering strength h must be > 0".into()));
        }
        if self.sigma < 0.0 {
            return Err(Error::InvalidParameter("sigma must be >= 0".into()));
        }
        Ok(())
    }
}

/// Non-local means denoising.
///
/// Each output pixel is the similarity-weighted average of the pixels in
/// its search window (clipped to the image): candidate `q` gets weight
/// `exp(-max(d2 - 2*sigma^2, 0) / h^2)` where `d2` is the mean squared
/// intensity difference between the patches around `p` and `q`. Patches
/// near the border are read through half-sample reflection. The result is
/// clamped to the input intensity range, which a weighted average can leave
/// only by rounding.
pub fn nlm_denoise<T: Real>(image: &Image2D<T>, p: &NlmParams) -> Result<Image2D<T>> {
    p.validate()?;
    if image.is_empty() {
        return Err(Error::InvalidParameter("cannot denoise an empty image".into()));
    }
    let (w, h) = (image.width(), image.height());
    let (lo, hi) = image.min_max().expect("nonempty image");
    let pr = p.patch_radius as isize;
    let sr = p.search_radius as isize;
    let patch_len = ((2 * pr + 1) * (2 * pr + 1)) as f64;
    let h2 = p.h * p.h;
    let two_sigma2 = 2.0 * p.sigma * p.sigma;

    let value = |r: isize, c: isize| -> f64 {
        image.get(reflect_index(r, h), reflect_index(c, w)).to_f64().unwrap_or(0.0)
    };

    let mut out = Vec::with_capacity(w * h);
    for row in 0..h as isize {
        for col in 0..w as isize {
            let center = image.get(row as usize, col as usize).to_f64().unwrap_or(0.0);
            let mut weight_sum = 0.0;
            let mut delta_sum = 0.0;
            for qr in (row - sr).max(0)..=(row + sr).min(h as isize - 1) {
                for qc in (col - sr).max(0)..=(col + sr).min(w as isize - 1) {
                    let mut d2 = 0.0;
                    for dr in -pr..=pr {
                        for dc in -pr..=pr {
                            let diff = value(row + dr, col + dc) - value(qr + dr, qc + dc);
                            d2 += diff * diff;
                        }
                    }
                    d2 /= patch_len;
                    let weight = (-(d2 - two_sigma2).max(0.0) / h2).exp();
                    weight_sum += weight;
                    delta_sum += weight * (value(qr, qc) - center);
                }
            }
            // Accumulating offsets from the center value keeps constant
            // regions bit-exact.
            let denoised = center + delta_sum / weight_sum;
            let denoised = denoised
                .max(lo.to_f64().unwrap_or(denoised))
                .min(hi.to_f64().unwrap_or(denoised));
            out.push(T::from_f64_lossy(denoised));
        }
    }
    Image2D::new(w, h, image.spacing(), out)
}

/// Min-max rescale to `[0, 1]`: `v' = (v - min) / (max - min)`. A constant
/// slice maps to all zeros.
pub fn normalize_intensity<T: Real>(image: &Image2D<T>) -> Result<Image2D<T>> {
    if image.is_empty() {
        return Err(Error::InvalidParameter("cannot normalize an empty image".into()));
    }
    let (lo, hi) = image.min_max().expect("nonempty image");
    if hi == lo {
        return Ok(image.map(|_| T::zero()));
    }
    let span = hi - lo;
    Ok(image.map(|v| (v - lo) / span))
}

fn crop_or_pad_axis(len: usize, target: usize) -> (usize, usize) {
    // Returns (src_offset, dst_offset). Odd surplus goes to the high side.
    if len >= target {
        ((len - target) / 2, 0)
    } else {
        (0, (target - len) / 2)
    }
}

/// Center crop or symmetric pad to a `target x target` canvas. When a
/// dimension is cropped, the surplus splits low/high with the extra pixel
/// removed from the high side; padding mirrors that rule. Pad values are 0
/// for the image and background for the mask, and both receive identical
/// geometry.
pub fn crop_or_pad<T: Real>(
    image: &Image2D<T>,
    mask: Option<&LabelMask2D>,
    target: usize,
) -> Result<(Image2D<T>, Option<LabelMask2D>)> {
    if target == 0 {
        return Err(Error::InvalidParameter("target size must be > 0".into()));
    }
    if let Some(m) = mask {
        if m.width() != image.width() || m.height() != image.height() {
            return Err(Error::ShapeMismatch(format!(
                "image {}x{} vs mask {}x{}",
                image.width(),
                image.height(),
                m.width(),
                m.height()
            )));
        }
    }
    let (w, h) = (image.width(), image.height());
    let (src_c, dst_c) = crop_or_pad_axis(w, target);
    let (src_r, dst_r) = crop_or_pad_axis(h, target);
    let copy_w = w.min(target);
    let copy_h = h.min(target);

    let mut out = Image2D::constant(target, target, T::zero());
    out.set_spacing(image.spacing())?;
    for r in 0..copy_h {
        for c in 0..copy_w {
            out.set(dst_r + r, dst_c + c, image.get(src_r + r, src_c + c));
        }
    }
    let out_mask = mask.map(|m| {
        let mut om = LabelMask2D::background(target, target);
        for r in 0..copy_h {
            for c in 0..copy_w {
                om.set(dst_r + r, dst_c + c, m.get(src_r + r, src_c + c));
            }
        }
        om
    });
    Ok((out, out_mask))
}

/// Full slice preprocessing: denoise, normalize, then crop/pad to
/// [`CANVAS`] square.
pub fn preprocess_slice<T: Real>(
    image: &Image2D<T>,
    mask: Option<&LabelMask2D>,
    nlm: &NlmParams,
) -> Result<(Image2D<T>, Option<LabelMask2D>)> {
    let denoised = nlm_denoise(image, nlm)?;
    let normalized = normalize_intensity(&denoised)?;
    crop_or_pad(&normalized, mask, CANVAS)
}
