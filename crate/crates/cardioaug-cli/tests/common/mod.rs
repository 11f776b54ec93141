//! Shared fixtures: synthetic 16-bit slices, label masks, and manifests.

#![allow(dead_code)] // each integration test binary uses a subset

use std::path::{Path, PathBuf};

use image::{ImageBuffer, Luma};

use cardioaug::metrics::Vendor;
use cardioaug_cli::manifest::{manifest_json, DatasetManifest, SpacingMm, SubjectEntry};

pub const SPACING: SpacingMm = SpacingMm {
    slice: 9.0,
    row: 1.25,
    col: 1.25,
};

/// Write a 16-bit grayscale PNG generated per pixel (row, col).
pub fn write_raw_slice(path: &Path, w: u32, h: u32, f: impl Fn(u32, u32) -> u16) {
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    let img: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_fn(w, h, |x, y| Luma([f(y, x)]));
    img.save(path).unwrap();
}

/// Write an 8-bit label PNG generated per pixel (row, col).
pub fn write_mask_slice(path: &Path, w: u32, h: u32, f: impl Fn(u32, u32) -> u8) {
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    let img: ImageBuffer<Luma<u8>, Vec<u8>> =
        ImageBuffer::from_fn(w, h, |x, y| Luma([f(y, x)]));
    img.save(path).unwrap();
}

/// A smooth off-center blob intensity pattern in raw 16-bit units.
pub fn blob_intensity(r: u32, c: u32, w: u32, h: u32) -> u16 {
    let (cx, cy) = (w as f64 * 0.4, h as f64 * 0.55);
    let dx = c as f64 - cx;
    let dy = r as f64 - cy;
    let v = (-(dx * dx + dy * dy) / (w as f64 * h as f64 / 40.0)).exp();
    (v * 50_000.0 + 2_000.0 + ((r * 37 + c * 11) % 101) as f64 * 20.0) as u16
}

/// A disk of LV inside a MYO ring near the blob center.
pub fn blob_label(r: u32, c: u32, w: u32, h: u32) -> u8 {
    let (cx, cy) = (w as f64 * 0.4, h as f64 * 0.55);
    let dx = c as f64 - cx;
    let dy = r as f64 - cy;
    let d = (dx * dx + dy * dy).sqrt();
    let scale = w.min(h) as f64 / 16.0;
    if d < 2.0 * scale {
        1
    } else if d < 3.0 * scale {
        2
    } else {
        0
    }
}

/// Build a dataset of image slices (+ masks when annotated) under `dir` and
/// return the manifest path. `subjects` is (id, vendor, annotated, slices).
pub fn make_dataset(
    dir: &Path,
    size: (u32, u32),
    subjects: &[(&str, Vendor, bool, usize)],
) -> PathBuf {
    let (w, h) = size;
    let mut entries = Vec::new();
    for &(id, vendor, annotated, n) in subjects {
        let mut slices = Vec::new();
        let mut masks = Vec::new();
        for i in 0..n {
            let rel = PathBuf::from(id).join(format!("raw_{i:04}.png"));
            // Vary intensities per slice so hashes differ.
            let offset = (i as u32) * 400;
            write_raw_slice(&dir.join(&rel), w, h, |r, c| {
                blob_intensity(r, c, w, h).saturating_add(offset as u16)
            });
            slices.push(rel);
            if annotated {
                let rel = PathBuf::from(id).join(format!("rawmask_{i:04}.png"));
                write_mask_slice(&dir.join(&rel), w, h, |r, c| blob_label(r, c, w, h));
                masks.push(rel);
            }
        }
        entries.push(SubjectEntry {
            id: id.to_string(),
            vendor,
            annotated,
            phase: Some("ED".to_string()),
            spacing_mm: SPACING,
            slices,
            masks,
        });
    }
    let manifest = DatasetManifest::new(entries);
    let path = dir.join("manifest.json");
    std::fs::write(&path, manifest_json(&manifest)).unwrap();
    path
}

/// One mask-only subject: `(id, vendor, annotated, slices_of_rows_of_labels)`.
pub type MaskSubject<'a> = (&'a str, Vendor, bool, Vec<Vec<Vec<u8>>>);

/// Mask-only manifest (predictions / truth) from per-subject label volumes.
/// Masks are written for every subject; `annotated` only marks truth
/// availability downstream.
pub fn make_mask_manifest(dir: &Path, name: &str, subjects: &[MaskSubject<'_>]) -> PathBuf {
    let mut entries = Vec::new();
    for (id, vendor, annotated, volume) in subjects {
        let mut masks = Vec::new();
        for (i, plane) in volume.iter().enumerate() {
            let h = plane.len() as u32;
            let w = plane[0].len() as u32;
            let rel = PathBuf::from(format!("{name}_{id}")).join(format!("mask_{i:04}.png"));
            write_mask_slice(&dir.join(&rel), w, h, |r, c| plane[r as usize][c as usize]);
            masks.push(rel);
        }
        entries.push(SubjectEntry {
            id: id.to_string(),
            vendor: *vendor,
            annotated: *annotated,
            phase: None,
            spacing_mm: SPACING,
            slices: Vec::new(),
            masks,
        });
    }
    let manifest = DatasetManifest::new(entries);
    let path = dir.join(format!("{name}.json"));
    std::fs::write(&path, manifest_json(&manifest)).unwrap();
    path
}

/// Map of relative path → SHA-256 for every file under `root`.
pub fn hash_tree(root: &Path) -> std::collections::BTreeMap<String, String> {
    let mut out = std::collections::BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().display().to_string();
                out.insert(rel, cardioaug_cli::pngio::hash_file(&path).unwrap());
            }
        }
    }
    out
}
