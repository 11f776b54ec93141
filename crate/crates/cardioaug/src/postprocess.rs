//! Connected-component analysis over stacked label volumes and removal of
//! structures smaller than a voxel threshold (default 30, strict `<`).
//!
//! Components are computed per class independently, under either per-slice
//! 8-connectivity or full 3D 26-connectivity. Component ids are assigned by
//! scan order of first encounter (slice-major, then row, then column), so a
//! labeling is a pure deterministic function of the volume.

use crate::error::{Error, Result};
use crate::grid::{label_name, LabelMask2D, FOREGROUND_LABELS, LABEL_BG, NUM_CLASSES};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Default voxel threshold: components with fewer voxels are removed.
pub const DEFAULT_MIN_VOXELS: usize = 30;

/// Neighborhood used for component analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Connectivity {
    /// 8-neighborhood within each slice; slices never connect.
    #[serde(rename = "2d8")]
    TwoD8,
    /// 26-neighborhood across the full volume.
    #[serde(rename = "3d26")]
    ThreeD26,
}

impl Connectivity {
    /// The full neighborhood stencil as `(slice, row, col)` offsets.
    pub fn offsets(self) -> &'static [(i32, i32, i32)] {
        const IN_SLICE: [(i32, i32, i32); 8] = [
            (0, -1, -1),
            (0, -1, 0),
            (0, -1, 1),
            (0, 0, -1),
            (0, 0, 1),
            (0, 1, -1),
            (0, 1, 0),
            (0, 1, 1),
        ];
        const FULL: [(i32, i32, i32); 26] = [
            (-1, -1, -1),
            (-1, -1, 0),
            (-1, -1, 1),
            (-1, 0, -1),
            (-1, 0, 0),
            (-1, 0, 1),
            (-1, 1, -1),
            (-1, 1, 0),
            (-1, 1, 1),
            (0, -1, -1),
            (0, -1, 0),
            (0, -1, 1),
            (0, 0, -1),
            (0, 0, 1),
            (0, 1, -1),
            (0, 1, 0),
            (0, 1, 1),
            (1, -1, -1),
            (1, -1, 0),
            (1, -1, 1),
            (1, 0, -1),
            (1, 0, 0),
            (1, 0, 1),
            (1, 1, -1),
            (1, 1, 0),
            (1, 1, 1),
        ];
        match self {
            Self::TwoD8 => &IN_SLICE,
            Self::ThreeD26 => &FULL,
        }
    }

    /// The half of the neighborhood that precedes a voxel in scan order.
    fn prior_offsets(self) -> &'static [(i32, i32, i32)] {
        const IN_SLICE: [(i32, i32, i32); 4] =
            [(0, -1, -1), (0, -1, 0), (0, -1, 1), (0, 0, -1)];
        const FULL: [(i32, i32, i32); 13] = [
            (-1, -1, -1),
            (-1, -1, 0),
            (-1, -1, 1),
            (-1, 0, -1),
            (-1, 0, 0),
            (-1, 0, 1),
            (-1, 1, -1),
            (-1, 1, 0),
            (-1, 1, 1),
            (0, -1, -1),
            (0, -1, 0),
            (0, -1, 1),
            (0, 0, -1),
        ];
        match self {
            Self::TwoD8 => &IN_SLICE,
            Self::ThreeD26 => &FULL,
        }
    }
}

impl fmt::Display for Connectivity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::TwoD8 => "2d8",
            Self::ThreeD26 => "3d26",
        })
    }
}

/// A stack of label slices with physical voxel spacing
/// `(slice_mm, row_mm, col_mm)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelVolume {
    slices: Vec<LabelMask2D>,
    spacing: (f64, f64, f64),
}

impl LabelVolume {
    pub fn new(slices: Vec<LabelMask2D>, spacing: (f64, f64, f64)) -> Result<Self> {
        if !(spacing.0 > 0.0 && spacing.1 > 0.0 && spacing.2 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "volume spacing must be positive, got {spacing:?}"
            )));
        }
        if let Some(first) = slices.first() {
            let (w, h) = (first.width(), first.height());
            if let Some(odd) = slices.iter().find(|s| s.width() != w || s.height() != h) {
                return Err(Error::ShapeMismatch(format!(
                    "slice {}x{} in a {w}x{h} volume",
                    odd.width(),
                    odd.height()
                )));
            }
        }
        Ok(Self { slices, spacing })
    }

    /// Single-slice volume.
    pub fn single(slice: LabelMask2D, spacing: (f64, f64, f64)) -> Result<Self> {
        Self::new(vec![slice], spacing)
    }

    pub fn depth(&self) -> usize {
        self.slices.len()
    }

    pub fn width(&self) -> usize {
        self.slices.first().map_or(0, |s| s.width())
    }

    pub fn height(&self) -> usize {
        self.slices.first().map_or(0, |s| s.height())
    }

    pub fn spacing(&self) -> (f64, f64, f64) {
        self.spacing
    }

    /// Replace the voxel spacing; all components must stay positive.
    pub fn set_spacing(&mut self, spacing: (f64, f64, f64)) -> Result<()> {
        if !(spacing.0 > 0.0 && spacing.1 > 0.0 && spacing.2 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "volume spacing must be positive, got {spacing:?}"
            )));
        }
        self.spacing = spacing;
        Ok(())
    }

    pub fn slices(&self) -> &[LabelMask2D] {
        &self.slices
    }

    #[inline]
    pub fn get(&self, slice: usize, row: usize, col: usize) -> u8 {
        self.slices[slice].get(row, col)
    }

    /// Total voxels carrying `label`.
    pub fn count(&self, label: u8) -> usize {
        self.slices.iter().map(|s| s.count(label)).sum()
    }

    /// Physical diagonal of the volume's bounding box in millimeters.
    pub fn diagonal_mm(&self) -> f64 {
        let (ds, dr, dc) = self.spacing;
        let z = self.depth() as f64 * ds;
        let y = self.height() as f64 * dr;
        let x = self.width() as f64 * dc;
        (z * z + y * y + x * x).sqrt()
    }
}

/// A per-voxel component labeling for one class: id 0 marks voxels outside
/// the class, ids `1..=sizes.len()` are components in scan order of first
/// encounter; `sizes[i]` is the voxel count of component `i + 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentLabeling {
    pub ids: Vec<u32>,
    pub sizes: Vec<usize>,
}

impl ComponentLabeling {
    pub fn component_count(&self) -> usize {
        self.sizes.len()
    }
}

pub(crate) fn check_class(cls: u8) -> Result<()> {
    if cls == LABEL_BG {
        return Err(Error::BackgroundClass);
    }
    if cls as usize >= NUM_CLASSES {
        return Err(Error::InvalidClass(cls));
    }
    Ok(())
}

struct UnionFind {
    parent: Vec<u32>,
}

impl UnionFind {
    fn new() -> Self {
        Self { parent: Vec::new() }
    }

    fn make(&mut self) -> u32 {
        let id = self.parent.len() as u32;
        self.parent.push(id);
        id
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let grand = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = grand;
            x = grand;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra != rb {
            // Lower root wins, keeping roots stable under scan order.
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi as usize] = lo;
        }
    }
}

/// Labels the connected components of class `cls` (two-pass union-find).
pub fn connected_components(
    vol: &LabelVolume,
    cls: u8,
    connectivity: Connectivity,
) -> Result<ComponentLabeling> {
    check_class(cls)?;
    let (d, h, w) = (vol.depth(), vol.height(), vol.width());
    let mut provisional = vec![u32::MAX; d * h * w];
    let mut uf = UnionFind::new();
    let prior = connectivity.prior_offsets();

    let idx = |s: usize, r: usize, c: usize| (s * h + r) * w + c;
    for s in 0..d {
        for r in 0..h {
            for c in 0..w {
                if vol.get(s, r, c) != cls {
                    continue;
                }
                let mut label = u32::MAX;
                for &(ds, dr, dc) in prior {
                    let (ns, nr, nc) = (s as i32 + ds, r as i32 + dr, c as i32 + dc);
                    if ns < 0 || nr < 0 || nc < 0 {
                        continue;
                    }
                    let (ns, nr, nc) = (ns as usize, nr as usize, nc as usize);
                    if ns >= d || nr >= h || nc >= w {
                        continue;
                    }
                    let neighbor = provisional[idx(ns, nr, nc)];
                    if neighbor == u32::MAX {
                        continue;
                    }
                    if label == u32::MAX {
                        label = neighbor;
                    } else {
                        uf.union(label, neighbor);
                    }
                }
                if label == u32::MAX {
                    label = uf.make();
                }
                provisional[idx(s, r, c)] = label;
            }
        }
    }

    // Second pass: compress to final ids in scan order of first encounter.
    let mut final_of_root = vec![0u32; uf.parent.len()];
    let mut sizes = Vec::new();
    let mut ids = vec![0u32; d * h * w];
    for (i, &p) in provisional.iter().enumerate() {
        if p == u32::MAX {
            continue;
        }
        let root = uf.find(p) as usize;
        if final_of_root[root] == 0 {
            sizes.push(0);
            final_of_root[root] = sizes.len() as u32;
        }
        let id = final_of_root[root];
        ids[i] = id;
        sizes[id as usize - 1] += 1;
    }
    Ok(ComponentLabeling { ids, sizes })
}

/// One component's fate in a cleanup pass.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentEntry {
    pub id: u32,
    pub voxels: usize,
    pub removed: bool,
}

/// Components of one class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassComponents {
    pub class: u8,
    pub name: String,
    pub components: Vec<ComponentEntry>,
}

/// Everything [`remove_small_components`] did, per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentReport {
    pub min_voxels: usize,
    pub connectivity: Connectivity,
    pub classes: Vec<ClassComponents>,
}

impl ComponentReport {
    /// Total voxels relabeled to background.
    pub fn removed_voxels(&self) -> usize {
        self.classes
            .iter()
            .flat_map(|c| &c.components)
            .filter(|e| e.removed)
            .map(|e| e.voxels)
            .sum()
    }
}

/// Relabels to background, per class independently, every component with
/// fewer than `min_voxels` voxels (strict inequality: a component of exactly
/// `min_voxels` survives). Idempotent.
pub fn remove_small_components(
    vol: &LabelVolume,
    min_voxels: usize,
    connectivity: Connectivity,
) -> Result<(LabelVolume, ComponentReport)> {
    if min_voxels < 1 {
        return Err(Error::InvalidParameter("min_voxels must be >= 1".into()));
    }
    let (d, h, w) = (vol.depth(), vol.height(), vol.width());
    let mut out = vol.clone();
    let mut classes = Vec::with_capacity(FOREGROUND_LABELS.len());
    for cls in FOREGROUND_LABELS {
        let labeling = connected_components(vol, cls, connectivity)?;
        let components = labeling
            .sizes
            .iter()
            .enumerate()
            .map(|(i, &voxels)| ComponentEntry {
                id: i as u32 + 1,
                voxels,
                removed: voxels < min_voxels,
            })
            .collect::<Vec<_>>();
        if components.iter().any(|e| e.removed) {
            for s in 0..d {
                for r in 0..h {
                    for c in 0..w {
                        let id = labeling.ids[(s * h + r) * w + c];
                        if id != 0 && labeling.sizes[id as usize - 1] < min_voxels {
                            out.slices[s].set(r, c, LABEL_BG);
                        }
                    }
                }
            }
        }
        classes.push(ClassComponents { class: cls, name: label_name(cls).to_string(), components });
    }
    Ok((out, ComponentReport { min_voxels, connectivity, classes }))
}
