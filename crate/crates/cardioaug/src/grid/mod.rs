//! Raster types, affine geometry, resampling, and seeded random streams.
//!
//! Coordinates are `(x, y)` with `x` along columns and `y` along rows;
//! storage is row-major. Pixel `(col, row)` sits at continuous coordinate
//! `(col as f, row as f)`, so the center of a `w x h` image is
//! `((w-1)/2, (h-1)/2)`.

mod affine;
mod rng;
mod warp;

pub use affine::Affine2D;
pub use rng::{make_stream, RandomStream, SeedSpec};
pub use warp::{warp, warp_mask, Interp};

use crate::error::{Error, Result};
use crate::real::{kahan_sum, Real};

/// Background label.
pub const LABEL_BG: u8 = 0;
/// Left-ventricle blood pool.
pub const LABEL_LV: u8 = 1;
/// Left-ventricular myocardium.
pub const LABEL_MYO: u8 = 2;
/// Right-ventricle blood pool.
pub const LABEL_RV: u8 = 3;
/// Number of classes including background.
pub const NUM_CLASSES: usize = 4;
/// The three foreground structures, in report order.
pub const FOREGROUND_LABELS: [u8; 3] = [LABEL_LV, LABEL_MYO, LABEL_RV];

/// Human-readable name of a class label.
pub fn label_name(label: u8) -> &'static str {
    match label {
        LABEL_BG => "BG",
        LABEL_LV => "LV",
        LABEL_MYO => "MYO",
        LABEL_RV => "RV",
        _ => "?",
    }
}

/// Folds an out-of-bounds index back into `0..n` by half-sample symmetric
/// reflection (`... c b a | a b c | c b a ...`), the boundary rule shared by
/// the denoising and blur kernels.
#[inline]
pub(crate) fn reflect_index(i: isize, n: usize) -> usize {
    debug_assert!(n > 0);
    let n = n as isize;
    let period = 2 * n;
    let mut m = i % period;
    if m < 0 {
        m += period;
    }
    if m < n {
        m as usize
    } else {
        (period - 1 - m) as usize
    }
}

/// A single grayscale slice with physical pixel spacing.
///
/// `spacing` is `(row_mm, col_mm)`: millimeters per pixel step along rows
/// and columns respectively.
#[derive(Debug, Clone, PartialEq)]
pub struct Image2D<T> {
    width: usize,
    height: usize,
    spacing: (f64, f64),
    values: Vec<T>,
}

impl<T: Real> Image2D<T> {
    /// Builds an image from row-major values.
    pub fn new(width: usize, height: usize, spacing: (f64, f64), values: Vec<T>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::ShapeMismatch(format!(
                "expected {} values for {width}x{height}, got {}",
                width * height,
                values.len()
            )));
        }
        if !(spacing.0 > 0.0 && spacing.1 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "spacing must be positive, got ({}, {})",
                spacing.0, spacing.1
            )));
        }
        Ok(Self { width, height, spacing, values })
    }

    /// Constant-valued image with unit spacing.
    pub fn constant(width: usize, height: usize, value: T) -> Self {
        Self {
            width,
            height,
            spacing: (1.0, 1.0),
            values: vec![value; width * height],
        }
    }

    /// Builds an image by evaluating `f(row, col)`, with unit spacing.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut values = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                values.push(f(r, c));
            }
        }
        Self { width, height, spacing: (1.0, 1.0), values }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn spacing(&self) -> (f64, f64) {
        self.spacing
    }

    pub fn set_spacing(&mut self, spacing: (f64, f64)) -> Result<()> {
        if !(spacing.0 > 0.0 && spacing.1 > 0.0) {
            return Err(Error::InvalidParameter("spacing must be positive".into()));
        }
        self.spacing = spacing;
        Ok(())
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> T {
        debug_assert!(row < self.height && col < self.width);
        self.values[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: T) {
        debug_assert!(row < self.height && col < self.width);
        self.values[row * self.width + col] = value;
    }

    /// Minimum and maximum intensity; `None` for an empty image.
    pub fn min_max(&self) -> Option<(T, T)> {
        let first = *self.values.first()?;
        let mut lo = first;
        let mut hi = first;
        for &v in &self.values {
            if v < lo {
                lo = v;
            }
            if v > hi {
                hi = v;
            }
        }
        Some((lo, hi))
    }

    /// Mean intensity via compensated summation.
    pub fn mean(&self) -> T {
        if self.values.is_empty() {
            return T::zero();
        }
        kahan_sum(self.values.iter().copied()) / T::from_f64_lossy(self.values.len() as f64)
    }

    /// Applies `f` to every value, keeping dimensions and spacing.
    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            width: self.width,
            height: self.height,
            spacing: self.spacing,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// True if every value lies in `[0, 1]`.
    pub fn is_unit_range(&self) -> bool {
        self.values.iter().all(|&v| v >= T::zero() && v <= T::one())
    }
}

/// Per-pixel class labels aligned to an [`Image2D`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMask2D {
    width: usize,
    height: usize,
    labels: Vec<u8>,
}

impl LabelMask2D {
    pub fn new(width: usize, height: usize, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != width * height {
            return Err(Error::ShapeMismatch(format!(
                "expected {} labels for {width}x{height}, got {}",
                width * height,
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l as usize >= NUM_CLASSES) {
            return Err(Error::InvalidLabel { value: bad });
        }
        Ok(Self { width, height, labels })
    }

    /// All-background mask.
    pub fn background(width: usize, height: usize) -> Self {
        Self { width, height, labels: vec![LABEL_BG; width * height] }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Result<Self> {
        let mut labels = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                labels.push(f(r, c));
            }
        }
        Self::new(width, height, labels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u8 {
        debug_assert!(row < self.height && col < self.width);
        self.labels[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, label: u8) {
        debug_assert!(row < self.height && col < self.width && (label as usize) < NUM_CLASSES);
        self.labels[row * self.width + col] = label;
    }

    /// Number of pixels carrying `label`.
    pub fn count(&self, label: u8) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    /// The set of labels present.
    pub fn label_set(&self) -> [bool; NUM_CLASSES] {
        let mut present = [false; NUM_CLASSES];
        for &l in &self.labels {
            present[l as usize] = true;
        }
        present
    }

    /// Centroid `(x, y)` of foreground pixels (label != 0), or `None` if the
    /// mask is all background.
    pub fn foreground_centroid(&self) -> Option<(f64, f64)> {
        let mut n = 0usize;
        let mut sx = 0.0;
        let mut sy = 0.0;
        for r in 0..self.height {
            for c in 0..self.width {
                if self.get(r, c) != LABEL_BG {
                    n += 1;
                    sx += c as f64;
                    sy += r as f64;
                }
            }
        }
        (n > 0).then(|| (sx / n as f64, sy / n as f64))
    }
}

/// Binary attention weights derived from a label mask: 1 on cardiac
/// foreground, 0 on background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttentionMask {
    width: usize,
    height: usize,
    weights: Vec<u8>,
}

impl AttentionMask {
    /// Foreground test on a label mask.
    pub fn from_labels(mask: &LabelMask2D) -> Self {
        Self {
            width: mask.width(),
            height: mask.height(),
            weights: mask.labels().iter().map(|&l| u8::from(l != LABEL_BG)).collect(),
        }
    }

    /// Builds from explicit binary weights.
    pub fn new(width: usize, height: usize, weights: Vec<u8>) -> Result<Self> {
        if weights.len() != width * height {
            return Err(Error::ShapeMismatch(format!(
                "expected {} weights for {width}x{height}, got {}",
                width * height,
                weights.len()
            )));
        }
        if weights.iter().any(|&w| w > 1) {
            return Err(Error::InvalidParameter("attention weights must be 0 or 1".into()));
        }
        Ok(Self { width, height, weights })
    }

    /// All-ones mask.
    pub fn ones(width: usize, height: usize) -> Self {
        Self { width, height, weights: vec![1; width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn weights(&self) -> &[u8] {
        &self.weights
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.weights[row * self.width + col]
    }
}

/// Identification carried along with a slice through the pipeline.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SliceMeta {
    pub subject: String,
    pub slice_index: u32,
}

/// An image/mask pair flowing through preprocessing and augmentation.
#[derive(Debug, Clone, PartialEq)]
pub struct SlicePair<T> {
    pub image: Image2D<T>,
    pub mask: LabelMask2D,
    pub meta: SliceMeta,
}

impl<T: Real> SlicePair<T> {
    pub fn new(image: Image2D<T>, mask: LabelMask2D) -> Result<Self> {
        if image.width() != mask.width() || image.height() != mask.height() {
            return Err(Error::ShapeMismatch(format!(
                "image {}x{} vs mask {}x{}",
                image.width(),
                image.height(),
                mask.width(),
                mask.height()
            )));
        }
        Ok(Self { image, mask, meta: SliceMeta::default() })
    }

    pub fn with_meta(mut self, meta: SliceMeta) -> Self {
        self.meta = meta;
        self
    }
}
