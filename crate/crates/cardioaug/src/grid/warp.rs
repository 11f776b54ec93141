use super::affine::Affine2D;
use super::{Image2D, LabelMask2D, LABEL_BG};
use crate::error::{Error, Result};
use crate::real::Real;

/// Interpolation mode for image resampling. Masks always use nearest.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interp {
    Bilinear,
    Nearest,
}

/// Resamples `image` through the pull transform `a`: each output pixel
/// `(x, y)` takes the interpolated input value at `a(x, y)`. Samples that
/// fall outside the input take `fill`.
pub fn warp<T: Real>(image: &Image2D<T>, a: &Affine2D<T>, interp: Interp, fill: T) -> Result<Image2D<T>> {
    if image.is_empty() {
        return Err(Error::InvalidParameter("cannot warp an empty image".into()));
    }
    if !a.is_invertible() {
        return Err(Error::DegenerateTransform);
    }
    let (w, h) = (image.width(), image.height());
    let mut out = Vec::with_capacity(w * h);
    for row in 0..h {
        for col in 0..w {
            let (sx, sy) = a.apply(T::from_f64_lossy(col as f64), T::from_f64_lossy(row as f64));
            let v = match interp {
                Interp::Bilinear => sample_bilinear(image, sx, sy, fill),
                Interp::Nearest => sample_nearest(image, sx, sy).unwrap_or(fill),
            };
            out.push(v);
        }
    }
    Image2D::new(w, h, image.spacing(), out)
}

/// Resamples a label mask through `a` with nearest-neighbor lookup;
/// out-of-bounds samples become background.
pub fn warp_mask(mask: &LabelMask2D, a: &Affine2D<f64>) -> Result<LabelMask2D> {
    if !a.is_invertible() {
        return Err(Error::DegenerateTransform);
    }
    let (w, h) = (mask.width(), mask.height());
    let mut out = Vec::with_capacity(w * h);
    for row in 0..h {
        for col in 0..w {
            let (sx, sy) = a.apply(col as f64, row as f64);
            let label = nearest_index(sx, w)
                .zip(nearest_index(sy, h))
                .map_or(LABEL_BG, |(c, r)| mask.get(r, c));
            out.push(label);
        }
    }
    LabelMask2D::new(w, h, out)
}

#[inline]
fn nearest_index<T: Real>(coord: T, len: usize) -> Option<usize> {
    let idx = (coord + T::from_f64_lossy(0.5)).floor();
    if idx >= T::zero() && idx < T::from_f64_lossy(len as f64) {
        idx.to_usize()
    } else {
        None
    }
}

#[inline]
fn sample_nearest<T: Real>(image: &Image2D<T>, x: T, y: T) -> Option<T> {
    let c = nearest_index(x, image.width())?;
    let r = nearest_index(y, image.height())?;
    Some(image.get(r, c))
}

/// Bilinear blend of the four surrounding pixels; neighbors outside the
/// image contribute `fill`. Zero-weight neighbors contribute exactly
/// nothing, so sampling at integer coordinates reproduces the pixel value
/// bit-for-bit.
#[inline]
fn sample_bilinear<T: Real>(image: &Image2D<T>, x: T, y: T, fill: T) -> T {
    let x0f = x.floor();
    let y0f = y.floor();
    let fx = x - x0f;
    let fy = y - y0f;
    let one = T::one();
    let (w, h) = (image.width(), image.height());

    // Samples whose 2x2 neighborhood lies fully inside skip the
    // per-neighbor bounds tests; edge samples take the checked path.
    let interior = if x0f >= T::zero() && y0f >= T::zero() {
        match (x0f.to_usize(), y0f.to_usize()) {
            (Some(c), Some(r)) if c + 1 < w && r + 1 < h => Some((r, c)),
            _ => None,
        }
    } else {
        None
    };
    let (v00, v10, v01, v11) = match interior {
        Some((r, c)) => {
            let vals = image.values();
            let base = r * w + c;
            (vals[base], vals[base + 1], vals[base + w], vals[base + w + 1])
        }
        None => {
            let fetch = |xf: T, yf: T| -> T {
                if xf < T::zero() || yf < T::zero() {
                    return fill;
                }
                match (xf.to_usize(), yf.to_usize()) {
                    (Some(c), Some(r)) if c < w && r < h => image.get(r, c),
                    _ => fill,
                }
            };
            (
                fetch(x0f, y0f),
                fetch(x0f + one, y0f),
                fetch(x0f, y0f + one),
                fetch(x0f + one, y0f + one),
            )
        }
    };

    let top = v00 * (one - fx) + v10 * fx;
    let bottom = v01 * (one - fx) + v11 * fx;
    top * (one - fy) + bottom * fy
}
