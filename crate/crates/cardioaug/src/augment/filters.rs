//! Intensity transforms: Gaussian blur, unsharp-mask sharpening, additive
//! shift, and gamma correction.
//!
//! These operate on normalized slices and each maps `[0, 1]` into `[0, 1]`:
//! blur and gamma do so inherently, while sharpening and shifting clamp the
//! raw result, so gamma's domain stays valid anywhere in a stack.

use crate::error::{Error, Result};
use crate::grid::{reflect_index, Image2D};
use crate::real::Real;

/// Discrete Gaussian kernel: `exp(-i^2 / (2 sigma^2))` for
/// `i in -r..=r` with `r = ceil(3 sigma)`, normalized to unit sum.
fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let r = (3.0 * sigma).ceil() as isize;
    let mut k: Vec<f64> = (-r..=r)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    for v in &mut k {
        *v /= sum;
    }
    k
}

fn convolve_axis<T: Real>(image: &Image2D<T>, kernel: &[f64], along_rows: bool) -> Image2D<T> {
    let (w, h) = (image.width(), image.height());
    let r = (kernel.len() / 2) as isize;
    let vals = image.values();
    // Tap-major accumulation: each output pixel still sums its taps in
    // ascending kernel order, so the result is bit-identical to a
    // per-pixel loop while the interior runs without reflection logic.
    let mut acc = vec![0.0_f64; w * h];
    if along_rows {
        for row in 0..h {
            let line = &vals[row * w..(row + 1) * w];
            let out_line = &mut acc[row * w..(row + 1) * w];
            for (j, &kv) in kernel.iter().enumerate() {
                let off = j as isize - r;
                let lo = (-off).max(0).min(w as isize) as usize;
                let hi = (w as isize - off.max(0)).max(lo as isize) as usize;
                if lo < hi {
                    let src = &line[(lo as isize + off) as usize..(hi as isize + off) as usize];
                    for (o, v) in out_line[lo..hi].iter_mut().zip(src) {
                        *o += kv * v.to_f64().unwrap_or(0.0);
                    }
                }
                for col in (0..lo).chain(hi..w) {
                    let v = line[reflect_index(col as isize + off, w)];
                    out_line[col] += kv * v.to_f64().unwrap_or(0.0);
                }
            }
        }
    } else {
        for row in 0..h {
            let out_line = &mut acc[row * w..(row + 1) * w];
            for (j, &kv) in kernel.iter().enumerate() {
                let src_row = reflect_index(row as isize + j as isize - r, h);
                let line = &vals[src_row * w..(src_row + 1) * w];
                for (o, v) in out_line.iter_mut().zip(line) {
                    *o += kv * v.to_f64().unwrap_or(0.0);
                }
            }
        }
    }
    let out = acc.into_iter().map(T::from_f64_lossy).collect();
    Image2D::new(w, h, image.spacing(), out).expect("dimensions unchanged")
}

/// Separable Gaussian blur with half-sample symmetric borders. The kernel
/// has unit sum, so the blur preserves the image mean exactly (up to
/// floating-point rounding) and maps `[0, 1]` into `[0, 1]`.
pub fn gaussian_blur<T: Real>(image: &Image2D<T>, sigma: f64) -> Result<Image2D<T>> {
    if sigma <= 0.0 || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!("blur sigma must be > 0, got {sigma}")));
    }
    if image.is_empty() {
        return Err(Error::InvalidParameter("cannot blur an empty image".into()));
    }
    let kernel = gaussian_kernel(sigma);
    let horizontal = convolve_axis(image, &kernel, true);
    Ok(convolve_axis(&horizontal, &kernel, false))
}

/// Unsharp masking: `clamp(v + amount * (v - blur(v)), 0, 1)`.
pub fn unsharp_mask<T: Real>(image: &Image2D<T>, sigma: f64, amount: f64) -> Result<Image2D<T>> {
    if amount < 0.0 || !amount.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "sharpen amount must be >= 0, got {amount}"
        )));
    }
    let blurred = gaussian_blur(image, sigma)?;
    let a = T::from_f64_lossy(amount);
    let mut out = image.clone();
    for (o, &b) in out.values_mut().iter_mut().zip(blurred.values()) {
        *o = (*o + a * (*o - b)).max(T::zero()).min(T::one());
    }
    Ok(out)
}

/// Additive intensity shift `clamp(v + delta, 0, 1)`.
pub fn intensity_shift<T: Real>(image: &Image2D<T>, delta: f64) -> Image2D<T> {
    let d = T::from_f64_lossy(delta);
    image.map(|v| (v + d).max(T::zero()).min(T::one()))
}

/// Gamma correction `v^gamma`, defined only on normalized input; values
/// outside `[0, 1]` are rejected rather than silently clamped.
pub fn gamma_correct<T: Real>(image: &Image2D<T>, gamma: f64) -> Result<Image2D<T>> {
    if gamma <= 0.0 || !gamma.is_finite() {
        return Err(Error::InvalidParameter(format!("gamma must be > 0, got {gamma}")));
    }
    if let Some(bad) = image
        .values()
        .iter()
        .find(|&&v| v < T::zero() || v > T::one())
    {
        return Err(Error::UnnormalizedInput { value: bad.to_f64().unwrap_or(f64::NAN) });
    }
    let g = T::from_f64_lossy(gamma);
    Ok(image.map(|v| v.powf(g)))
}

/// Clamps every value into `[0, 1]`.
pub fn clamp_unit<T: Real>(image: &Image2D<T>) -> Image2D<T> {
    image.map(|v| v.max(T::zero()).min(T::one()))
}
