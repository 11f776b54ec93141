//! Reconstruction and segmentation loss kernels with analytic gradients.
//!
//! Three families: the masked attention-reconstruction L1 and its unmasked
//! counterpart, their composite `global + lambda * attention` (default
//! `lambda = 0.5`), and class-weighted cross-entropy over per-pixel
//! probabilities. Every loss returns a [`LossValue`] whose gradient is taken
//! with respect to the reconstruction (second) argument — the tensor a
//! training loop would backpropagate into. A central-difference oracle
//! ([`finite_diff_grad`]) and a batched verification suite
//! ([`run_gradient_suite`]) ship alongside the kernels.

use crate::error::{Error, Result};
use crate::grid::{make_stream, AttentionMask, LabelMask2D, SeedSpec, NUM_CLASSES};
use crate::real::{kahan_sum, Real};
use rand::Rng;
use serde::Serialize;

/// Default composite mixing weight.
pub const DEFAULT_LAMBDA: f64 = 0.5;
/// Default central-difference step.
pub const DEFAULT_FD_STEP: f64 = 1e-4;
/// Relative tolerance for gradient verification.
pub const FD_REL_TOL: f64 = 1e-4;
/// Absolute floor below which gradient elements are compared additively.
pub const FD_ABS_TOL: f64 = 1e-9;

/// A dense `(height, width, channels)` array of finite scalars; plain 2D
/// grids use `channels = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct RealGrid<T> {
    height: usize,
    width: usize,
    channels: usize,
    values: Vec<T>,
}

impl<T: Real> RealGrid<T> {
    pub fn new(height: usize, width: usize, channels: usize, values: Vec<T>) -> Result<Self> {
        if channels == 0 {
            return Err(Error::InvalidParameter("channels must be >= 1".into()));
        }
        if values.len() != height * width * channels {
            return Err(Error::ShapeMismatch(format!(
                "expected {} values for {height}x{width}x{channels}, got {}",
                height * width * channels,
                values.len()
            )));
        }
        if let Some(idx) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue(idx));
        }
        Ok(Self { height, width, channels, values })
    }

    /// Single-channel grid from row-major values.
    pub fn from_2d(height: usize, width: usize, values: Vec<T>) -> Result<Self> {
        Self::new(height, width, 1, values)
    }

    /// Builds by evaluating `f(row, col, channel)`; the values must be finite.
    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> T,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(height * width * channels);
        for r in 0..height {
            for c in 0..width {
                for ch in 0..channels {
                    values.push(f(r, c, ch));
                }
            }
        }
        Self::new(height, width, channels, values)
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self { height, width, channels, values: vec![T::zero(); height * width * channels] }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize, channel: usize) -> usize {
        debug_assert!(row < self.height && col < self.width && channel < self.channels);
        (row * self.width + col) * self.channels + channel
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, channel: usize) -> T {
        self.values[self.index(row, col, channel)]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, channel: usize, value: T) {
        let i = self.index(row, col, channel);
        self.values[i] = value;
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.shape() == other.shape()
    }

    /// Copy with `delta` added to the flat element `idx` (finite-difference
    /// probing).
    pub fn perturbed(&self, idx: usize, delta: T) -> Self {
        let mut out = self.clone();
        out.values[idx] = out.values[idx] + delta;
        out
    }
}

/// Per-class loss weights `(background, LV, MYO, RV)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(default)]
pub struct ClassWeights {
    pub background: f64,
    pub lv: f64,
    pub myo: f64,
    pub rv: f64,
}

impl Default for ClassWeights {
    fn default() -> Self {
        Self::REFERENCE
    }
}

impl ClassWeights {
    /// The reference ratio 0.19 : 0.24 : 0.31 : 0.26.
    pub const REFERENCE: Self = Self { background: 0.19, lv: 0.24, myo: 0.31, rv: 0.26 };

    pub fn new(background: f64, lv: f64, myo: f64, rv: f64) -> Result<Self> {
        let w = Self { background, lv, myo, rv };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let arr = self.as_array();
        if arr.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidParameter(
                "class weights must be finite and nonnegative".into(),
            ));
        }
        if arr.iter().all(|&w| w == 0.0) {
            return Err(Error::InvalidParameter("at least one class weight must be > 0".into()));
        }
        Ok(())
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.background, self.lv, self.myo, self.rv]
    }

    /// Weight for a label in `0..=3`.
    pub fn get(&self, label: u8) -> f64 {
        self.as_array()[label as usize]
    }
}

/// A loss scalar plus, when available, its gradient with respect to the
/// reconstruction argument of the op that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct LossValue<T> {
    pub value: T,
    pub gradient: Option<RealGrid<T>>,
}

fn require_same_shape<T: Real>(a: &RealGrid<T>, b: &RealGrid<T>) -> Result<()> {
    if !a.same_shape(b) {
        return Err(Error::ShapeMismatch(format!(
            "grid shapes {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

fn require_mask_shape<T: Real>(grid: &RealGrid<T>, m: &AttentionMask) -> Result<()> {
    if m.width() != grid.width() || m.height() != grid.height() {
        return Err(Error::ShapeMismatch(format!(
            "mask {}x{} vs grid {:?}",
            m.width(),
            m.height(),
            grid.shape()
        )));
    }
    Ok(())
}

#[inline]
fn sign<T: Real>(v: T) -> T {
    if v > T::zero() {
        T::one()
    } else if v < T::zero() {
        -T::one()
    } else {
        T::zero() // subgradient choice at the kink
    }
}

/// Mean of `|x - x_rec|` weighted per pixel by the binary mask `m`; the mean
/// runs over all `N` elements, masked or not. Gradient w.r.t. `x_rec` is
/// `-sign(x - x_rec) * m / N`.
pub fn masked_l1<T: Real>(
    x: &RealGrid<T>,
    x_rec: &RealGrid<T>,
    m: &AttentionMask,
) -> Result<LossValue<T>> {
    require_same_shape(x, x_rec)?;
    require_mask_shape(x, m)?;
    let n = T::from_f64_lossy(x.len() as f64);
    let mut grad = x_rec.clone();
    let mut terms = Vec::with_capacity(x.len());
    for r in 0..x.height() {
        for c in 0..x.width() {
            let weight = T::from_f64_lossy(m.get(r, c) as f64);
            for ch in 0..x.channels() {
                let residual = x.get(r, c, ch) - x_rec.get(r, c, ch);
                terms.push(weight * residual.abs());
                grad.set(r, c, ch, -sign(residual) * weight / n);
            }
        }
    }
    Ok(LossValue { value: kahan_sum(terms) / n, gradient: Some(grad) })
}

/// Mean absolute difference over all elements; gradient w.r.t. `y_rec`.
pub fn plain_l1<T: Real>(y: &RealGrid<T>, y_rec: &RealGrid<T>) -> Result<LossValue<T>> {
    require_same_shape(y, y_rec)?;
    let n = T::from_f64_lossy(y.len() as f64);
    let mut grad = y_rec.clone();
    let mut terms = Vec::with_capacity(y.len());
    for (i, (&a, &b)) in y.values().iter().zip(y_rec.values()).enumerate() {
        let residual = a - b;
        terms.push(residual.abs());
        grad.values[i] = -sign(residual) / n;
    }
    Ok(LossValue { value: kahan_sum(terms) / n, gradient: Some(grad) })
}

/// The attention-reconstruction loss: masked source-side L1 plus unmasked
/// target-side L1. The two terms differentiate with respect to different
/// tensors, so the combined value carries no single gradient; use the
/// component ops when gradients are needed.
pub fn attention_rec_loss<T: Real>(
    x: &RealGrid<T>,
    x_rec: &RealGrid<T>,
    m: &AttentionMask,
    y: &RealGrid<T>,
    y_rec: &RealGrid<T>,
) -> Result<LossValue<T>> {
    let source = masked_l1(x, x_rec, m)?;
    let target = plain_l1(y, y_rec)?;
    Ok(LossValue { value: source.value + target.value, gradient: None })
}

/// `global + lambda * attention`. Gradients combine linearly when both
/// terms carry one of the same shape (i.e. both were taken with respect to
/// the same tensor); otherwise the result's gradient is absent.
pub fn composite_rec_loss<T: Real>(
    global: &LossValue<T>,
    attention: &LossValue<T>,
    lambda: f64,
) -> LossValue<T> {
    assert!(lambda >= 0.0 && lambda.is_finite(), "lambda must be a nonnegative real");
    let lam = T::from_f64_lossy(lambda);
    let gradient = match (&global.gradient, &attention.gradient) {
        (Some(g), Some(a)) if g.same_shape(a) => {
            let mut out = g.clone();
            for (o, &av) in out.values.iter_mut().zip(a.values()) {
                *o = *o + lam * av;
            }
            Some(out)
        }
        _ => None,
    };
    LossValue { value: global.value + lam * attention.value, gradient }
}

fn wce_impl<T: Real>(
    probs: &RealGrid<T>,
    labels: &LabelMask2D,
    w: &ClassWeights,
    check_simplex: bool,
) -> Result<LossValue<T>> {
    w.validate()?;
    if probs.channels() != NUM_CLASSES {
        return Err(Error::ShapeMismatch(format!(
            "expected {NUM_CLASSES} probability channels, got {}",
            probs.channels()
        )));
    }
    if labels.width() != probs.width() || labels.height() != probs.height() {
        return Err(Error::ShapeMismatch(format!(
            "labels {}x{} vs probabilities {:?}",
            labels.width(),
            labels.height(),
            probs.shape()
        )));
    }
    let pixels = probs.height() * probs.width();
    let n = T::from_f64_lossy(pixels as f64);
    let simplex_tol = T::from_f64_lossy(1e-6);
    let mut grad = RealGrid::zeros(probs.height(), probs.width(), probs.channels());
    let mut terms = Vec::with_capacity(pixels);
    for r in 0..probs.height() {
        for c in 0..probs.width() {
            if check_simplex {
                let mut sum = T::zero();
                for ch in 0..NUM_CLASSES {
                    let p = probs.get(r, c, ch);
                    if p < T::zero() {
                        return Err(Error::InvalidParameter(format!(
                            "negative probability {p} at pixel ({r}, {c}), class {ch}"
                        )));
                    }
                    sum = sum + p;
                }
                if (sum - T::one()).abs() > simplex_tol {
                    return Err(Error::InvalidParameter(format!(
                        "probabilities at pixel ({r}, {c}) sum to {sum}, not 1"
                    )));
                }
            }
            let label = labels.get(r, c);
            let p = probs.get(r, c, label as usize);
            if p <= T::zero() {
                return Err(Error::NonPositiveProbability { row: r, col: c, class: label });
            }
            let weight = T::from_f64_lossy(w.get(label));
            terms.push(-weight * p.ln());
            grad.set(r, c, label as usize, -weight / (n * p));
        }
    }
    Ok(LossValue { value: kahan_sum(terms) / n, gradient: Some(grad) })
}

/// Class-weighted cross-entropy over per-pixel probabilities: mean over
/// pixels of `-w[label] * ln(p[label])`. Each pixel's probabilities must be
/// nonnegative and sum to 1 within 1e-6. The gradient w.r.t. `probs` is
/// `-w[label] / (N * p[label])` at the true class and 0 elsewhere.
pub fn weighted_cross_entropy<T: Real>(
    probs: &RealGrid<T>,
    labels: &LabelMask2D,
    w: &ClassWeights,
) -> Result<LossValue<T>> {
    wce_impl(probs, labels, w, true)
}

/// [`weighted_cross_entropy`] without the per-pixel simplex check. Finite
/// differencing perturbs one probability at a time, which necessarily leaves
/// the simplex; this entry point keeps the loss total on that neighborhood.
pub fn weighted_cross_entropy_unchecked<T: Real>(
    probs: &RealGrid<T>,
    labels: &LabelMask2D,
    w: &ClassWeights,
) -> Result<LossValue<T>> {
    wce_impl(probs, labels, w, false)
}

/// Central-difference gradient: element `i` gets
/// `(f(x + h e_i) - f(x - h e_i)) / (2h)`.
pub fn finite_diff_grad<T: Real>(
    loss_fn: impl Fn(&RealGrid<T>) -> T,
    input: &RealGrid<T>,
    h: f64,
) -> RealGrid<T> {
    let step = T::from_f64_lossy(h);
    let two_h = step + step;
    let mut out = input.clone();
    for i in 0..input.len() {
        let plus = loss_fn(&input.perturbed(i, step));
        let minus = loss_fn(&input.perturbed(i, -step));
        out.values[i] = (plus - minus) / two_h;
    }
    out
}

/// Outcome of verifying one operation's analytic gradient against central
/// differences over a batch of random grids.
#[derive(Debug, Clone, Serialize)]
pub struct GradientCheck {
    pub op: String,
    pub grids: usize,
    pub elements_checked: usize,
    /// Elements excluded for sitting within `10h` of an L1 kink.
    pub elements_skipped: usize,
    pub max_abs_err: f64,
    pub max_rel_err: f64,
    pub passed: bool,
}

/// Full gradient-verification report.
#[derive(Debug, Clone, Serialize)]
pub struct GradientSuite {
    pub seed: u64,
    pub step: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub checks: Vec<GradientCheck>,
    pub passed: bool,
}

struct CheckAccum {
    checked: usize,
    skipped: usize,
    max_abs: f64,
    max_rel: f64,
    ok: bool,
}

impl CheckAccum {
    fn new() -> Self {
        Self { checked: 0, skipped: 0, max_abs: 0.0, max_rel: 0.0, ok: true }
    }

    /// Compares per element; `skip(i)` marks kink-adjacent elements.
    fn compare(&mut self, analytic: &RealGrid<f64>, fd: &RealGrid<f64>, skip: impl Fn(usize) -> bool) {
        for i in 0..analytic.len() {
            if skip(i) {
                self.skipped += 1;
                continue;
            }
            let a = analytic.values()[i];
            let f = fd.values()[i];
            let abs = (a - f).abs();
            let scale = a.abs().max(f.abs());
            self.checked += 1;
            self.max_abs = self.max_abs.max(abs);
            if scale > FD_ABS_TOL {
                self.max_rel = self.max_rel.max(abs / scale);
            }
            if abs > FD_ABS_TOL + FD_REL_TOL * scale {
                self.ok = false;
            }
        }
    }

    fn into_check(self, op: &str, grids: usize) -> GradientCheck {
        GradientCheck {
            op: op.to_string(),
            grids,
            elements_checked: self.checked,
            elements_skipped: self.skipped,
            max_abs_err: self.max_abs,
            max_rel_err: self.max_rel,
            passed: self.ok,
        }
    }
}

fn random_grid(stream: &mut crate::grid::RandomStream, h: usize, w: usize) -> RealGrid<f64> {
    RealGrid::from_fn(h, w, 1, |_, _, _| stream.random_range(0.0..1.0)).expect("finite values")
}

fn random_attention(stream: &mut crate::grid::RandomStream, h: usize, w: usize) -> AttentionMask {
    let weights = (0..h * w).map(|_| u8::from(stream.random_bool(0.5))).collect();
    AttentionMask::new(w, h, weights).expect("binary weights")
}

fn softmax4(logits: [f64; 4]) -> [f64; 4] {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps = logits.map(|l| (l - m).exp());
    let sum: f64 = exps.iter().sum();
    exps.map(|e| e / sum)
}

/// Verifies the analytic gradients of the masked L1, plain L1, composite,
/// and weighted cross-entropy losses against central differences
/// (`h = 1e-4`, relative tolerance 1e-4) on `grids_per_op` seeded random
/// grids per operation. Cross-entropy probabilities come from softmaxed
/// logits in `[-1.5, 1.5]`, keeping every probability large enough that the
/// difference quotient's truncation error stays well under the tolerance.
pub fn run_gradient_suite(seed: u64, grids_per_op: usize) -> GradientSuite {
    let h = DEFAULT_FD_STEP;
    let kink = 10.0 * h;
    let (gh, gw) = (8usize, 8usize);
    let mut checks = Vec::new();

    // masked_l1, gradient w.r.t. x_rec.
    let mut acc = CheckAccum::new();
    for g in 0..grids_per_op {
        let mut stream = make_stream(&SeedSpec::new(seed, "losscheck/masked_l1", g as u32, 0));
        let x = random_grid(&mut stream, gh, gw);
        let x_rec = random_grid(&mut stream, gh, gw);
        let m = random_attention(&mut stream, gh, gw);
        let analytic = masked_l1(&x, &x_rec, &m).unwrap().gradient.unwrap();
        let fd = finite_diff_grad(|p| masked_l1(&x, p, &m).unwrap().value, &x_rec, h);
        acc.compare(&analytic, &fd, |i| (x.values()[i] - x_rec.values()[i]).abs() < kink);
    }
    checks.push(acc.into_check("masked_l1", grids_per_op));

    // plain_l1, gradient w.r.t. y_rec.
    let mut acc = CheckAccum::new();
    for g in 0..grids_per_op {
        let mut stream = make_stream(&SeedSpec::new(seed, "losscheck/plain_l1", g as u32, 0));
        let y = random_grid(&mut stream, gh, gw);
        let y_rec = random_grid(&mut stream, gh, gw);
        let analytic = plain_l1(&y, &y_rec).unwrap().gradient.unwrap();
        let fd = finite_diff_grad(|p| plain_l1(&y, p).unwrap().value, &y_rec, h);
        acc.compare(&analytic, &fd, |i| (y.values()[i] - y_rec.values()[i]).abs() < kink);
    }
    checks.push(acc.into_check("plain_l1", grids_per_op));

    // composite of two L1 terms differentiated w.r.t. the same tensor.
    let mut acc = CheckAccum::new();
    for g in 0..grids_per_op {
        let mut stream = make_stream(&SeedSpec::new(seed, "losscheck/composite", g as u32, 0));
        let y = random_grid(&mut stream, gh, gw);
        let y_rec = random_grid(&mut stream, gh, gw);
        let m = random_attention(&mut stream, gh, gw);
        let composite = composite_rec_loss(
            &plain_l1(&y, &y_rec).unwrap(),
            &masked_l1(&y, &y_rec, &m).unwrap(),
            DEFAULT_LAMBDA,
        );
        let analytic = composite.gradient.unwrap();
        let fd = finite_diff_grad(
            |p| {
                plain_l1(&y, p).unwrap().value
                    + DEFAULT_LAMBDA * masked_l1(&y, p, &m).unwrap().value
            },
            &y_rec,
            h,
        );
        acc.compare(&analytic, &fd, |i| (y.values()[i] - y_rec.values()[i]).abs() < kink);
    }
    checks.push(acc.into_check("composite_rec_loss", grids_per_op));

    // weighted cross-entropy, gradient w.r.t. probs; FD probes leave the
    // simplex, so the unchecked evaluation is differentiated.
    let mut acc = CheckAccum::new();
    let weights = ClassWeights::default();
    for g in 0..grids_per_op {
        let mut stream = make_stream(&SeedSpec::new(seed, "losscheck/wce", g as u32, 0));
        let mut probs = RealGrid::zeros(gh, gw, NUM_CLASSES);
        for r in 0..gh {
            for c in 0..gw {
                let logits = [0; 4].map(|_| stream.random_range(-1.5..1.5));
                let p = softmax4(logits);
                for (ch, &v) in p.iter().enumerate() {
                    probs.set(r, c, ch, v);
                }
            }
        }
        let labels = LabelMask2D::from_fn(gw, gh, |_, _| stream.random_range(0..4u8)).unwrap();
        let analytic = weighted_cross_entropy(&probs, &labels, &weights)
            .unwrap()
            .gradient
            .unwrap();
        let fd = finite_diff_grad(
            |p| weighted_cross_entropy_unchecked(p, &labels, &weights).unwrap().value,
            &probs,
            h,
        );
        acc.compare(&analytic, &fd, |_| false);
    }
    checks.push(acc.into_check("weighted_cross_entropy", grids_per_op));

    let passed = checks.iter().all(|c| c.passed);
    GradientSuite {
        seed,
        step: h,
        rel_tol: FD_REL_TOL,
        abs_tol: FD_ABS_TOL,
        checks,
        passed,
    }
}
