//! Stacked augmentation: six parameterized transforms sampled per slice and
//! applied jointly to image and mask.
//!
//! A stack holds at most one transform per slot, in a fixed canonical
//! order — blur-or-sharpen, intensity shift, gamma, shear, rotate, scale.
//! Intensity transforms run sequentially on the image alone; the spatial
//! tail is composed into a single center-anchored affine and resampled once
//! (bilinear for the image, nearest for the mask), so a stack costs exactly
//! one interpolation pass regardless of how many spatial transforms it
//! contains.

mod filters;

pub use filters::{clamp_unit, gamma_correct, gaussian_blur, intensity_shift, unsharp_mask};

use crate::error::{Error, Result};
use crate::grid::{
    make_stream, warp, warp_mask, Affine2D, Interp, RandomStream, SeedSpec, SlicePair,
};
use crate::real::Real;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// One parameterized transform. Parameters are stored as `f64` and converted
/// to the working scalar at application time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransformSpec {
    /// Gaussian smoothing with standard deviation `sigma`.
    Blur { sigma: f64 },
    /// Unsharp masking with blur width `sigma` and strength `amount`.
    Sharpen { sigma: f64, amount: f64 },
    /// Additive intensity shift by `delta`.
    IntensityShift { delta: f64 },
    /// Contrast adjustment `v^gamma`.
    Gamma { gamma: f64 },
    /// Column shear with slope `m` about the image center.
    Shear { m: f64 },
    /// Rotation by `degrees` about the image center.
    Rotate { degrees: f64 },
    /// Uniform scaling by factor `1 + m` about the image center.
    Scale { m: f64 },
}

impl TransformSpec {
    /// Canonical slot index. Blur and Sharpen share slot 0, which is what
    /// makes a strictly-increasing-rank stack contain at most one of them.
    pub fn rank(&self) -> u8 {
        match self {
            Self::Blur { .. } | Self::Sharpen { .. } => 0,
            Self::IntensityShift { .. } => 1,
            Self::Gamma { .. } => 2,
            Self::Shear { .. } => 3,
            Self::Rotate { .. } => 4,
            Self::Scale { .. } => 5,
        }
    }

    pub fn is_spatial(&self) -> bool {
        matches!(self, Self::Shear { .. } | Self::Rotate { .. } | Self::Scale { .. })
    }

    /// Checks this transform's parameter against `ranges`.
    pub fn validate_against(&self, ranges: &ParameterRanges) -> Result<()> {
        let check = |name: &str, v: f64, (lo, hi): (f64, f64)| -> Result<()> {
            if !v.is_finite() || v < lo || v > hi {
                return Err(Error::InvalidParameter(format!(
                    "{name} = {v} outside [{lo}, {hi}]"
                )));
            }
            Ok(())
        };
        match *self {
            Self::Blur { sigma } => check("blur sigma", sigma, ranges.sigma),
            Self::Sharpen { sigma, amount } => {
                check("sharpen sigma", sigma, ranges.sigma)?;
                check("sharpen amount", amount, ranges.sharpen_amount)
            }
            Self::IntensityShift { delta } => check("shift delta", delta, ranges.shift),
            Self::Gamma { gamma } => check("gamma", gamma, ranges.gamma),
            Self::Shear { m } => check("shear m", m, ranges.shear),
            Self::Rotate { degrees } => check("rotation degrees", degrees, ranges.rotate_deg),
            Self::Scale { m } => check("scale m", m, ranges.scale),
        }
    }
}

/// An ordered list of transforms, at most one per slot, in canonical order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<TransformSpec>", into = "Vec<TransformSpec>")]
pub struct TransformStack {
    specs: Vec<TransformSpec>,
}

impl TransformStack {
    /// Wraps `specs`, rejecting out-of-order or duplicate slots.
    pub fn new(specs: Vec<TransformSpec>) -> Result<Self> {
        for pair in specs.windows(2) {
            if pair[1].rank() <= pair[0].rank() {
                return Err(Error::InvalidParameter(format!(
                    "transform stack out of canonical order: {:?} cannot follow {:?}",
                    pair[1], pair[0]
                )));
            }
        }
        Ok(Self { specs })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn specs(&self) -> &[TransformSpec] {
        &self.specs
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    /// Checks every parameter against `ranges`.
    pub fn validate_against(&self, ranges: &ParameterRanges) -> Result<()> {
        self.specs.iter().try_for_each(|s| s.validate_against(ranges))
    }
}

impl TryFrom<Vec<TransformSpec>> for TransformStack {
    type Error = Error;

    fn try_from(specs: Vec<TransformSpec>) -> Result<Self> {
        Self::new(specs)
    }
}

impl From<TransformStack> for Vec<TransformSpec> {
    fn from(stack: TransformStack) -> Self {
        stack.specs
    }
}

/// Per-slot inclusion probabilities for [`sample_stack`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SlotProbabilities {
    pub blur_sharpen: f64,
    pub intensity_shift: f64,
    pub gamma: f64,
    pub shear: f64,
    pub rotate: f64,
    pub scale: f64,
}

impl Default for SlotProbabilities {
    fn default() -> Self {
        Self {
            blur_sharpen: 0.5,
            intensity_shift: 0.5,
            gamma: 0.5,
            shear: 0.5,
            rotate: 0.5,
            scale: 0.5,
        }
    }
}

impl SlotProbabilities {
    fn as_array(&self) -> [(&'static str, f64); 6] {
        [
            ("blur_sharpen", self.blur_sharpen),
            ("intensity_shift", self.intensity_shift),
            ("gamma", self.gamma),
            ("shear", self.shear),
            ("rotate", self.rotate),
            ("scale", self.scale),
        ]
    }
}

/// Closed parameter intervals, one per transform kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParameterRanges {
    pub sigma: (f64, f64),
    pub sharpen_amount: (f64, f64),
    pub shift: (f64, f64),
    pub gamma: (f64, f64),
    pub shear: (f64, f64),
    pub rotate_deg: (f64, f64),
    pub scale: (f64, f64),
}

impl Default for ParameterRanges {
    fn default() -> Self {
        Self::REFERENCE
    }
}

impl ParameterRanges {
    /// The reference intervals the defaults are pinned to.
    pub const REFERENCE: Self = Self {
        sigma: (0.1, 2.0),
        sharpen_amount: (0.5, 1.5),
        shift: (-0.05, 0.05),
        gamma: (0.6, 1.7),
        shear: (-0.1, 0.1),
        rotate_deg: (-15.0, 15.0),
        scale: (-0.1, 0.1),
    };

    fn fields(&self) -> [(&'static str, (f64, f64)); 7] {
        [
            ("sigma", self.sigma),
            ("sharpen_amount", self.sharpen_amount),
            ("shift", self.shift),
            ("gamma", self.gamma),
            ("shear", self.shear),
            ("rotate_deg", self.rotate_deg),
            ("scale", self.scale),
        ]
    }

    fn validate(&self, allow_extended: bool) -> Result<()> {
        for ((name, (lo, hi)), (_, (ref_lo, ref_hi))) in
            self.fields().into_iter().zip(Self::REFERENCE.fields())
        {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::InvalidParameter(format!(
                    "range {name} = [{lo}, {hi}] is not a valid interval"
                )));
            }
            if !allow_extended && (lo < ref_lo || hi > ref_hi) {
                return Err(Error::InvalidParameter(format!(
                    "range {name} = [{lo}, {hi}] exceeds reference [{ref_lo}, {ref_hi}] \
                     (set allow_extended_ranges to override)"
                )));
            }
        }
        if self.sigma.0 <= 0.0 {
            return Err(Error::InvalidParameter("sigma range must be positive".into()));
        }
        if self.gamma.0 <= 0.0 {
            return Err(Error::InvalidParameter("gamma range must be positive".into()));
        }
        if self.sharpen_amount.0 < 0.0 {
            return Err(Error::InvalidParameter("sharpen amount must be >= 0".into()));
        }
        if self.scale.0 <= -1.0 {
            return Err(Error::InvalidParameter(
                "scale m must stay above -1 (zero scale factor)".into(),
            ));
        }
        Ok(())
    }
}

/// Sampling policy: inclusion probabilities, parameter ranges, and the seed
/// that roots every per-slice random stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentPolicy {
    pub probabilities: SlotProbabilities,
    pub ranges: ParameterRanges,
    /// Root seed; per-slice streams replace its (subject, slice, epoch) path.
    pub seed: SeedSpec,
    /// Permits ranges wider than [`ParameterRanges::REFERENCE`].
    pub allow_extended_ranges: bool,
}

impl Default for AugmentPolicy {
    fn default() -> Self {
        Self {
            probabilities: SlotProbabilities::default(),
            ranges: ParameterRanges::default(),
            seed: SeedSpec::root(0),
            allow_extended_ranges: false,
        }
    }
}

impl AugmentPolicy {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in self.probabilities.as_array() {
            if !(0.0..=1.0).contains(&p) || !p.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "probability {name} = {p} outside [0, 1]"
                )));
            }
        }
        self.ranges.validate(self.allow_extended_ranges)
    }

    /// The stream for one (subject, slice, epoch) work item under this
    /// policy's global seed.
    pub fn stream_for(&self, subject: &str, slice_index: u32, epoch: u32) -> RandomStream {
        make_stream(&SeedSpec::new(self.seed.global_seed, subject, slice_index, epoch))
    }
}

#[inline]
fn draw(stream: &mut RandomStream, (lo, hi): (f64, f64)) -> f64 {
    stream.random_range(lo..=hi)
}

/// Draws one stack: each slot is included independently with its policy
/// probability, the blur/sharpen slot resolving to one of the two by a fair
/// coin, and every parameter drawn uniformly from its range. The stream is
/// consumed in fixed slot order, so a given (policy, stream state) pair
/// always yields the same stack.
pub fn sample_stack(policy: &AugmentPolicy, stream: &mut RandomStream) -> Result<TransformStack> {
    policy.validate()?;
    let p = &policy.probabilities;
    let r = &policy.ranges;
    let mut specs = Vec::new();

    if stream.random_bool(p.blur_sharpen) {
        if stream.random_bool(0.5) {
            specs.push(TransformSpec::Blur { sigma: draw(stream, r.sigma) });
        } else {
            specs.push(TransformSpec::Sharpen {
                sigma: draw(stream, r.sigma),
                amount: draw(stream, r.sharpen_amount),
            });
        }
    }
    if stream.random_bool(p.intensity_shift) {
        specs.push(TransformSpec::IntensityShift { delta: draw(stream, r.shift) });
    }
    if stream.random_bool(p.gamma) {
        specs.push(TransformSpec::Gamma { gamma: draw(stream, r.gamma) });
    }
    if stream.random_bool(p.shear) {
        specs.push(TransformSpec::Shear { m: draw(stream, r.shear) });
    }
    if stream.random_bool(p.rotate) {
        specs.push(TransformSpec::Rotate { degrees: draw(stream, r.rotate_deg) });
    }
    if stream.random_bool(p.scale) {
        specs.push(TransformSpec::Scale { m: draw(stream, r.scale) });
    }
    TransformStack::new(specs)
}

/// Composes the spatial specs into one affine about the image center:
/// `Scale(1+m) ∘ Rotate(θ) ∘ Shear(m)`. Non-spatial specs are rejected.
pub fn build_spatial_affine<T: Real>(
    specs: &[TransformSpec],
    width: usize,
    height: usize,
) -> Result<Affine2D<T>> {
    let (cx, cy) = Affine2D::<T>::grid_center(width, height);
    let mut affine = Affine2D::identity();
    // Right-to-left composition: later factors act innermost, so folding
    // Shear, Rotate, Scale in stack order builds Scale ∘ Rotate ∘ Shear.
    for spec in specs {
        let factor = match *spec {
            TransformSpec::Shear { m } => Affine2D::shear_cols(T::from_f64_lossy(m)),
            TransformSpec::Rotate { degrees } => {
                Affine2D::rotation_deg(T::from_f64_lossy(degrees))
            }
            TransformSpec::Scale { m } => {
                Affine2D::scale_uniform(T::from_f64_lossy(1.0 + m))?
            }
            other => {
                return Err(Error::InvalidParameter(format!(
                    "non-spatial transform {other:?} in spatial composition"
                )))
            }
        };
        affine = factor.about_point(cx, cy).compose(&affine);
    }
    if !affine.is_invertible() {
        return Err(Error::DegenerateTransform);
    }
    Ok(affine)
}

/// Applies `stack` to a normalized pair: intensity transforms in order on
/// the image, then the composed spatial affine once — bilinear with zero
/// fill for the image, nearest with background fill for the mask, identical
/// geometry for both.
pub fn apply_stack<T: Real>(pair: &SlicePair<T>, stack: &TransformStack) -> Result<SlicePair<T>> {
    if let Some(idx) = pair
        .image
        .values()
        .iter()
        .position(|&v| v < T::zero() || v > T::one())
    {
        return Err(Error::UnnormalizedInput {
            value: pair.image.values()[idx].to_f64().unwrap_or(f64::NAN),
        });
    }

    let mut image = pair.image.clone();
    let mut spatial: Vec<TransformSpec> = Vec::new();
    for spec in stack.specs() {
        match *spec {
            TransformSpec::Blur { sigma } => image = gaussian_blur(&image, sigma)?,
            TransformSpec::Sharpen { sigma, amount } => {
                image = unsharp_mask(&image, sigma, amount)?
            }
            TransformSpec::IntensityShift { delta } => image = intensity_shift(&image, delta),
            TransformSpec::Gamma { gamma } => image = gamma_correct(&image, gamma)?,
            spatial_spec => spatial.push(spatial_spec),
        }
    }

    let mask;
    if spatial.is_empty() {
        mask = pair.mask.clone();
    } else {
        let affine = build_spatial_affine::<T>(&spatial, image.width(), image.height())?;
        image = warp(&image, &affine, Interp::Bilinear, T::zero())?;
        // The mask warps through the same geometry, carried at full
        // precision regardless of the image scalar.
        let affine64 = build_spatial_affine::<f64>(&spatial, image.width(), image.height())?;
        mask = warp_mask(&pair.mask, &affine64)?;
    }
    Ok(SlicePair { image, mask, meta: pair.meta.clone() })
}

/// Samples a stack from the per-slice stream addressed by the pair's own
/// metadata and applies it. Returns the augmented pair together with the
/// stack so callers can record it for exact replay.
pub fn augment_pair<T: Real>(
    pair: &SlicePair<T>,
    policy: &AugmentPolicy,
    epoch: u32,
) -> Result<(SlicePair<T>, TransformStack)> {
    let mut stream = policy.stream_for(&pair.meta.subject, pair.meta.slice_index, epoch);
    let stack = sample_stack(policy, &mut stream)?;
    let out = apply_stack(pair, &stack)?;
    Ok((out, stack))
}
