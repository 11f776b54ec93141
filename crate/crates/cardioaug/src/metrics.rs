//! Segmentation quality metrics and the per-vendor evaluation report.
//!
//! Two per-class metrics are provided:
//!
//! * [`dice`] — the Dice overlap coefficient `2|P∩T| / (|P| + |T|)`, computed
//!   by exact voxel counting. Both volumes empty for the class scores 1.0;
//!   exactly one empty scores 0.0.
//! * [`hausdorff`] — a symmetric boundary distance in millimetres, either the
//!   classic maximum ([`HdMode::Max`]) or the pooled 95th percentile
//!   ([`HdMode::P95`]) of the directed boundary-to-boundary distances.
//!
//! Boundaries are extracted with face connectivity (6 neighbours in 3-D, 4 in
//! a single-slice volume); voxels outside the volume count as background, so
//! foreground touching the volume edge is boundary. Distances are Euclidean
//! in physical space: voxel indices are scaled by the volume spacing before
//! any distance is taken. The production path computes an exact anisotropic
//! squared Euclidean distance transform (per-axis lower-envelope passes) and
//! samples it at the opposing boundary, which is equivalent to the quadratic
//! all-pairs scan but linear in the volume size.
//!
//! [`evaluate_dataset`] aggregates per-subject scores into a [`MetricReport`]
//! of per-vendor, per-class means with a fixed column order (vendors A→D,
//! classes LV→MYO→RV, Dice before Hausdorff) rendered as CSV or JSON. Vendors
//! without annotated subjects keep `n/a` cells rather than vanishing from the
//! table.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{label_name, FOREGROUND_LABELS};
use crate::postprocess::{check_class, LabelVolume};
use crate::real::kahan_sum;

/// MRI scanner vendor tag, the grouping key of the evaluation report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Vendor {
    A,
    B,
    C,
    D,
}

impl Vendor {
    /// All vendors in report column order.
    pub const ALL: [Vendor; 4] = [Vendor::A, Vendor::B, Vendor::C, Vendor::D];

    /// Column-order index (A = 0 … D = 3).
    pub fn index(self) -> usize {
        match self {
            Vendor::A => 0,
            Vendor::B => 1,
            Vendor::C => 2,
            Vendor::D => 3,
        }
    }

    /// Single-letter name used in column headers.
    pub fn letter(self) -> char {
        match self {
            Vendor::A => 'A',
            Vendor::B => 'B',
            Vendor::C => 'C',
            Vendor::D => 'D',
        }
    }
}

impl fmt::Display for Vendor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

impl std::str::FromStr for Vendor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" | "a" => Ok(Vendor::A),
            "B" | "b" => Ok(Vendor::B),
            "C" | "c" => Ok(Vendor::C),
            "D" | "d" => Ok(Vendor::D),
            other => Err(Error::InvalidParameter(format!(
                "unknown vendor {other:?} (expected A, B, C, or D)"
            ))),
        }
    }
}

/// How the symmetric Hausdorff distance condenses the directed distances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HdMode {
    /// Maximum over both directed distance sets (classic Hausdorff).
    Max,
    /// 95th percentile of both directed distance sets pooled together,
    /// with linear interpolation between order statistics.
    P95,
}

impl fmt::Display for HdMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HdMode::Max => write!(f, "max"),
            HdMode::P95 => write!(f, "p95"),
        }
    }
}

/// Outcome of a Hausdorff computation.
///
/// When exactly one of the two volumes lacks the class entirely there is no
/// finite boundary-to-boundary distance; `mm` is then the physical diagonal
/// of the volume bounding box (the largest distance the volume can express)
/// and `one_side_empty` is set so downstream consumers can tell a sentinel
/// from a genuine measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HausdorffResult {
    /// Distance in millimetres.
    pub mm: f64,
    /// True iff exactly one side had no voxels of the class and `mm` is the
    /// volume-diagonal sentinel.
    pub one_side_empty: bool,
}

/// Dice overlap of class `cls` between `pred` and `truth`, in `[0, 1]`.
///
/// Counting is exact (integers), so identical volumes score exactly 1.0.
/// Both sides empty of the class scores 1.0; exactly one side empty scores
/// 0.0. The volumes must have identical dimensions.
pub fn dice(pred: &LabelVolume, truth: &LabelVolume, cls: u8) -> Result<f64> {
    check_class(cls)?;
    check_same_shape(pred, truth)?;
    let mut inter = 0_u64;
    let mut p_count = 0_u64;
    let mut t_count = 0_u64;
    for (ps, ts) in pred.slices().iter().zip(truth.slices()) {
        for r in 0..ps.height() {
            for c in 0..ps.width() {
                let p = ps.get(r, c) == cls;
                let t = ts.get(r, c) == cls;
                p_count += u64::from(p);
                t_count += u64::from(t);
                inter += u64::from(p && t);
            }
        }
    }
    if p_count + t_count == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / (p_count + t_count) as f64)
}

/// Voxel indices `(slice, row, col)` of the class-`cls` boundary.
///
/// A foreground voxel is boundary iff at least one face neighbour is not of
/// the class. Face connectivity is 6-neighbour for volumes with more than one
/// slice and 4-neighbour (in-plane) for single-slice volumes, so that a lone
/// slice is treated as a 2-D object rather than having every voxel touch the
/// missing slices above and below. Out-of-bounds neighbours count as
/// background.
pub fn boundary_voxels(vol: &LabelVolume, cls: u8) -> Result<Vec<[usize; 3]>> {
    check_class(cls)?;
    let (d, h, w) = (vol.depth(), vol.height(), vol.width());
    let mut out = Vec::new();
    for s in 0..d {
        for r in 0..h {
            for c in 0..w {
                if vol.get(s, r, c) != cls {
                    continue;
                }
                let mut neighbours: Vec<(isize, isize, isize)> =
                    vec![(0, -1, 0), (0, 1, 0), (0, 0, -1), (0, 0, 1)];
                if d > 1 {
                    neighbours.push((-1, 0, 0));
                    neighbours.push((1, 0, 0));
                }
                let is_boundary = neighbours.into_iter().any(|(ds, dr, dc)| {
                    let ns = s as isize + ds;
                    let nr = r as isize + dr;
                    let nc = c as isize + dc;
                    if ns < 0
                        || nr < 0
                        || nc < 0
                        || ns >= d as isize
                        || nr >= h as isize
                        || nc >= w as isize
                    {
                        return true;
                    }
                    vol.get(ns as usize, nr as usize, nc as usize) != cls
                });
                if is_boundary {
                    out.push([s, r, c]);
                }
            }
        }
    }
    Ok(out)
}

/// Boundary of one class as physical-space points, in millimetres.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySet {
    points_mm: Vec<[f64; 3]>,
}

impl BoundarySet {
    /// Extract the class boundary of `vol` and scale it by the volume spacing.
    pub fn from_volume(vol: &LabelVolume, cls: u8) -> Result<Self> {
        let (s_mm, r_mm, c_mm) = vol.spacing();
        let points_mm = boundary_voxels(vol, cls)?
            .into_iter()
            .map(|[s, r, c]| [s as f64 * s_mm, r as f64 * r_mm, c as f64 * c_mm])
            .collect();
        Ok(Self { points_mm })
    }

    /// Boundary points in millimetres, in scan order.
    pub fn points_mm(&self) -> &[[f64; 3]] {
        &self.points_mm
    }

    pub fn is_empty(&self) -> bool {
        self.points_mm.is_empty()
    }

    pub fn len(&self) -> usize {
        self.points_mm.len()
    }
}

/// Symmetric Hausdorff distance of class `cls` between `pred` and `truth`.
///
/// Both volumes must share dimensions and spacing. Distances are Euclidean in
/// millimetres between the two class boundaries. If both boundaries are empty
/// the distance is 0; if exactly one is empty the result carries the
/// volume-diagonal sentinel (see [`HausdorffResult`]).
pub fn hausdorff(
    pred: &LabelVolume,
    truth: &LabelVolume,
    cls: u8,
    mode: HdMode,
) -> Result<HausdorffResult> {
    check_class(cls)?;
    check_same_shape(pred, truth)?;
    if pred.spacing() != truth.spacing() {
        return Err(Error::ShapeMismatch(format!(
            "volume spacings differ: {:?} vs {:?}",
            pred.spacing(),
            truth.spacing()
        )));
    }
    let b_pred = boundary_voxels(pred, cls)?;
    let b_truth = boundary_voxels(truth, cls)?;
    match (b_pred.is_empty(), b_truth.is_empty()) {
        (true, true) => {
            return Ok(HausdorffResult {
                mm: 0.0,
                one_side_empty: false,
            })
        }
        (true, false) | (false, true) => {
            return Ok(HausdorffResult {
                mm: pred.diagonal_mm(),
                one_side_empty: true,
            })
        }
        (false, false) => {}
    }
    let dims = (pred.depth(), pred.height(), pred.width());
    let spacing = pred.spacing();
    // Exact anisotropic EDT of each boundary, sampled at the other boundary.
    let edt_truth = squared_edt(dims, spacing, &b_truth);
    let edt_pred = squared_edt(dims, spacing, &b_pred);
    let d_pt = sample_distances(dims, &edt_truth, &b_pred);
    let d_tp = sample_distances(dims, &edt_pred, &b_truth);
    let mm = match mode {
        HdMode::Max => {
            let sup_pt = d_pt.iter().cloned().fold(0.0_f64, f64::max);
            let sup_tp = d_tp.iter().cloned().fold(0.0_f64, f64::max);
            sup_pt.max(sup_tp)
        }
        HdMode::P95 => {
            let mut pooled = d_pt;
            pooled.extend_from_slice(&d_tp);
            pooled.sort_by(|a, b| a.partial_cmp(b).expect("distances are finite"));
            percentile_sorted(&pooled, 0.95)
        }
    };
    Ok(HausdorffResult {
        mm,
        one_side_empty: false,
    })
}

fn check_same_shape(a: &LabelVolume, b: &LabelVolume) -> Result<()> {
    let da = (a.depth(), a.height(), a.width());
    let db = (b.depth(), b.height(), b.width());
    if da != db {
        return Err(Error::ShapeMismatch(format!(
            "volume dimensions differ: {da:?} vs {db:?}"
        )));
    }
    Ok(())
}

/// Linear-interpolation percentile of an ascending-sorted nonempty slice,
/// `q` in `[0, 1]`.
fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let rank = q * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Exact anisotropic squared Euclidean distance transform.
///
/// Returns, for every voxel of a `dims`-shaped grid, the squared distance in
/// mm² to the nearest site, computed by three per-axis lower-envelope passes
/// (each pass minimises `f(x') + step²·(x − x')²` along one axis). Sites get
/// 0; a grid with no sites would stay at infinity, but callers only invoke
/// this with a nonempty site list.
fn squared_edt(
    dims: (usize, usize, usize),
    spacing: (f64, f64, f64),
    sites: &[[usize; 3]],
) -> Vec<f64> {
    let (d, h, w) = dims;
    let (s_mm, r_mm, c_mm) = spacing;
    let idx = |s: usize, r: usize, c: usize| (s * h + r) * w + c;
    let mut dist2 = vec![f64::INFINITY; d * h * w];
    for &[s, r, c] in sites {
        dist2[idx(s, r, c)] = 0.0;
    }
    let mut line = Vec::new();
    // Columns.
    for s in 0..d {
        for r in 0..h {
            line.clear();
            line.extend((0..w).map(|c| dist2[idx(s, r, c)]));
            let out = dt1d(&line, c_mm * c_mm);
            for (c, v) in out.into_iter().enumerate() {
                dist2[idx(s, r, c)] = v;
            }
        }
    }
    // Rows.
    for s in 0..d {
        for c in 0..w {
            line.clear();
            line.extend((0..h).map(|r| dist2[idx(s, r, c)]));
            let out = dt1d(&line, r_mm * r_mm);
            for (r, v) in out.into_iter().enumerate() {
                dist2[idx(s, r, c)] = v;
            }
        }
    }
    // Slices.
    for r in 0..h {
        for c in 0..w {
            line.clear();
            line.extend((0..d).map(|s| dist2[idx(s, r, c)]));
            let out = dt1d(&line, s_mm * s_mm);
            for (s, v) in out.into_iter().enumerate() {
                dist2[idx(s, r, c)] = v;
            }
        }
    }
    dist2
}

/// One-dimensional squared distance transform (lower envelope of parabolas):
/// `out[q] = min over p of (f[p] + step2 · (q − p)²)`.
fn dt1d(f: &[f64], step2: f64) -> Vec<f64> {
    let n = f.len();
    let mut out = vec![f64::INFINITY; n];
    // Hull of parabola apex positions and the left edge of each one's reign.
    let mut verts: Vec<usize> = Vec::with_capacity(n);
    let mut edges: Vec<f64> = Vec::with_capacity(n + 1);
    for q in 0..n {
        if !f[q].is_finite() {
            continue;
        }
        loop {
            match (verts.last(), edges.last()) {
                (Some(&vk), Some(&zk)) => {
                    let qf = q as f64;
                    let vf = vk as f64;
                    let s = ((f[q] + step2 * qf * qf) - (f[vk] + step2 * vf * vf))
                        / (2.0 * step2 * (qf - vf));
                    if s <= zk {
                        verts.pop();
                        edges.pop();
                        continue;
                    }
                    verts.push(q);
                    edges.push(s);
                }
                _ => {
                    verts.push(q);
                    edges.push(f64::NEG_INFINITY);
                }
            }
            break;
        }
    }
    if verts.is_empty() {
        return out;
    }
    edges.push(f64::INFINITY);
    let mut k = 0;
    for (q, slot) in out.iter_mut().enumerate() {
        while edges[k + 1] < q as f64 {
            k += 1;
        }
        let dq = q as f64 - verts[k] as f64;
        *slot = f[verts[k]] + step2 * dq * dq;
    }
    out
}

/// Distances in mm from each voxel of `from` under the squared transform.
fn sample_distances(
    dims: (usize, usize, usize),
    edt2: &[f64],
    from: &[[usize; 3]],
) -> Vec<f64> {
    let (_, h, w) = dims;
    from.iter()
        .map(|&[s, r, c]| edt2[(s * h + r) * w + c].sqrt())
        .collect()
}

/// One subject's identity for evaluation: id, vendor, and whether ground
/// truth exists for it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubjectInfo {
    pub id: String,
    pub vendor: Vendor,
    pub annotated: bool,
}

/// Per-vendor, per-class mean metrics for one method.
///
/// Cell layout is fixed: vendors A→D outer, classes LV→MYO→RV inner, Dice
/// block before Hausdorff block. `None` cells (vendors with no annotated
/// subjects evaluated) render as `n/a`. Dice is in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    /// Row label for the method/configuration being scored.
    pub method: String,
    /// Which Hausdorff condensation the `hd_mm` cells hold.
    pub hd_mode: HdMode,
    /// Mean Dice in percent, `[vendor][class]`.
    pub dice_percent: [[Option<f64>; 3]; 4],
    /// Mean Hausdorff distance in millimetres, `[vendor][class]`.
    pub hd_mm: [[Option<f64>; 3]; 4],
    /// Number of subjects scored per vendor.
    pub subjects_scored: [usize; 4],
}

impl MetricReport {
    /// Column headers in fixed order: `method`, then Dice per vendor × class,
    /// then Hausdorff per vendor × class.
    pub fn csv_header() -> String {
        let mut cols = vec!["method".to_string()];
        for prefix in ["Dice", "HD"] {
            for vendor in Vendor::ALL {
                for cls in FOREGROUND_LABELS {
                    cols.push(format!("{prefix}_{}_{}", vendor.letter(), label_name(cls)));
                }
            }
        }
        cols.join(",")
    }

    /// The report as a two-line CSV: header and the method row. Dice cells
    /// use one decimal, Hausdorff cells two; absent cells are `n/a`.
    pub fn to_csv(&self) -> String {
        let mut row = vec![self.method.clone()];
        for v in 0..4 {
            for k in 0..3 {
                row.push(match self.dice_percent[v][k] {
                    Some(x) => format!("{x:.1}"),
                    None => "n/a".to_string(),
                });
            }
        }
        for v in 0..4 {
            for k in 0..3 {
                row.push(match self.hd_mm[v][k] {
                    Some(x) => format!("{x:.2}"),
                    None => "n/a".to_string(),
                });
            }
        }
        format!("{}\n{}\n", Self::csv_header(), row.join(","))
    }
}

/// Score `predictions` against `truths` and aggregate per vendor and class.
///
/// Every prediction and truth id must appear in `subjects`; truths may only
/// exist for annotated subjects, and every annotated subject that was
/// predicted must have a truth. Violations produce an error listing the
/// offending ids. Subjects listed but not predicted are simply skipped, so a
/// subset of a cohort can be scored. Aggregation iterates subjects in their
/// listed order, independent of the order of `predictions`.
pub fn evaluate_dataset(
    predictions: &[(String, LabelVolume)],
    truths: &[(String, LabelVolume)],
    subjects: &[SubjectInfo],
    mode: HdMode,
    method: &str,
) -> Result<MetricReport> {
    let mut info: HashMap<&str, &SubjectInfo> = HashMap::new();
    for s in subjects {
        if info.insert(s.id.as_str(), s).is_some() {
            return Err(Error::InvalidParameter(format!(
                "duplicate subject id {:?} in subject list",
                s.id
            )));
        }
    }
    let mut preds: HashMap<&str, &LabelVolume> = HashMap::new();
    for (id, vol) in predictions {
        if preds.insert(id.as_str(), vol).is_some() {
            return Err(Error::InvalidParameter(format!(
                "duplicate prediction for subject {id:?}"
            )));
        }
    }
    let mut truth_map: HashMap<&str, &LabelVolume> = HashMap::new();
    for (id, vol) in truths {
        if truth_map.insert(id.as_str(), vol).is_some() {
            return Err(Error::InvalidParameter(format!(
                "duplicate ground truth for subject {id:?}"
            )));
        }
    }

    let mut unmatched: Vec<String> = Vec::new();
    for (id, _) in predictions {
        if !info.contains_key(id.as_str()) {
            unmatched.push(format!("{id} (prediction without subject entry)"));
        }
    }
    for (id, _) in truths {
        match info.get(id.as_str()) {
            None => unmatched.push(format!("{id} (truth without subject entry)")),
            Some(s) if !s.annotated => {
                unmatched.push(format!("{id} (truth for unannotated subject)"))
            }
            Some(s) if !preds.contains_key(s.id.as_str()) => {
                unmatched.push(format!("{id} (truth without prediction)"))
            }
            _ => {}
        }
    }
    for s in subjects {
        if s.annotated
            && preds.contains_key(s.id.as_str())
            && !truth_map.contains_key(s.id.as_str())
        {
            unmatched.push(format!("{} (annotated but no truth supplied)", s.id));
        }
    }
    if !unmatched.is_empty() {
        unmatched.sort();
        return Err(Error::UnmatchedSubjects(unmatched.join(", ")));
    }

    let mut dice_acc: [[Vec<f64>; 3]; 4] = Default::default();
    let mut hd_acc: [[Vec<f64>; 3]; 4] = Default::default();
    let mut scored = [0_usize; 4];
    for s in subjects {
        let Some(pred) = preds.get(s.id.as_str()) else {
            continue;
        };
        let Some(truth) = truth_map.get(s.id.as_str()) else {
            continue; // unannotated subject: nothing to score against
        };
        let v = s.vendor.index();
        scored[v] += 1;
        for (k, cls) in FOREGROUND_LABELS.into_iter().enumerate() {
            dice_acc[v][k].push(100.0 * dice(pred, truth, cls)?);
            hd_acc[v][k].push(hausdorff(pred, truth, cls, mode)?.mm);
        }
    }

    let mean = |xs: &[f64]| -> Option<f64> {
        if xs.is_empty() {
            None
        } else {
            Some(kahan_sum(xs.iter().copied()) / xs.len() as f64)
        }
    };
    let mut dice_percent: [[Option<f64>; 3]; 4] = Default::default();
    let mut hd_mm: [[Option<f64>; 3]; 4] = Default::default();
    for v in 0..4 {
        for k in 0..3 {
            dice_percent[v][k] = mean(&dice_acc[v][k]);
            hd_mm[v][k] = mean(&hd_acc[v][k]);
        }
    }
    Ok(MetricReport {
        method: method.to_string(),
        hd_mode: mode,
        dice_percent,
        hd_mm,
        subjects_scored: scored,
    })
}
