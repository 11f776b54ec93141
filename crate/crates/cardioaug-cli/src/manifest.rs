//! Dataset manifest: the JSON index of subjects, their slice and mask files,
//! vendor tags, and physical voxel spacing.
//!
//! Spacing is stored per subject, not per vendor — scans from the same
//! vendor can differ in resolution. File paths are interpreted relative to
//! the manifest's own directory, so a dataset directory can be relocated
//! wholesale. `load_manifest` validates the schema and checks every
//! referenced file exists, naming the offending subject in each error;
//! decoding errors, by contrast, surface per work item during a run so one
//! corrupt file cannot sink a whole dataset.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use cardioaug::metrics::Vendor;

use crate::error::{CliError, Result};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

/// Physical voxel spacing in millimetres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpacingMm {
    /// Distance between slice planes.
    pub slice: f64,
    /// Row pitch within a slice.
    pub row: f64,
    /// Column pitch within a slice.
    pub col: f64,
}

impl SpacingMm {
    /// In-plane spacing as `(row_mm, col_mm)`.
    pub fn in_plane(&self) -> (f64, f64) {
        (self.row, self.col)
    }

    /// Volume spacing as `(slice_mm, row_mm, col_mm)`.
    pub fn volume(&self) -> (f64, f64, f64) {
        (self.slice, self.row, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectEntry {
    pub id: String,
    pub vendor: Vendor,
    /// Whether ground-truth masks exist for this subject.
    pub annotated: bool,
    /// Cardiac phase / time-point tag (e.g. `ED`, `ES`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<String>,
    pub spacing_mm: SpacingMm,
    /// Slice image files, in anatomical order.
    pub slices: Vec<PathBuf>,
    /// Mask files, parallel to `slices`. Required when `annotated`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub masks: Vec<PathBuf>,
}

impl SubjectEntry {
    pub fn has_masks(&self) -> bool {
        !self.masks.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub schema_version: u32,
    pub subjects: Vec<SubjectEntry>,
}

impl DatasetManifest {
    pub fn new(subjects: Vec<SubjectEntry>) -> Self {
        Self {
            schema_version: MANIFEST_SCHEMA_VERSION,
            subjects,
        }
    }

    /// Structural validation: schema version, unique filesystem-safe ids,
    /// positive spacing, and mask/slice count agreement.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != MANIFEST_SCHEMA_VERSION {
            return Err(CliError::Validation(format!(
                "unsupported manifest schema_version {} (expected {MANIFEST_SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let mut seen = HashSet::new();
        for s in &self.subjects {
            if s.id.is_empty()
                || !s
                    .id
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
                || s.id.starts_with('.')
            {
                return Err(CliError::Validation(format!(
                    "subject id {:?} is not a safe path component",
                    s.id
                )));
            }
            if !seen.insert(s.id.as_str()) {
                return Err(CliError::Validation(format!(
                    "duplicate subject id {:?} in manifest",
                    s.id
                )));
            }
            let sp = s.spacing_mm;
            if !(sp.slice > 0.0 && sp.row > 0.0 && sp.col > 0.0) {
                return Err(CliError::Validation(format!(
                    "subject {}: spacing must be positive, got {sp:?}",
                    s.id
                )));
            }
            if s.annotated && s.masks.is_empty() {
                return Err(CliError::Validation(format!(
                    "subject {} is annotated but lists no masks",
                    s.id
                )));
            }
            // Mask-only manifests (predictions, postprocess input) list no
            // slices; when both lists are present they must be parallel.
            if !s.masks.is_empty() && !s.slices.is_empty() && s.masks.len() != s.slices.len() {
                return Err(CliError::Validation(format!(
                    "mask count mismatch: subject {} has {} slices but {} masks",
                    s.id,
                    s.slices.len(),
                    s.masks.len()
                )));
            }
        }
        Ok(())
    }

    /// Resolve every file path against `base` (the manifest's directory).
    pub fn resolved_against(&self, base: &Path) -> Self {
        let resolve = |p: &PathBuf| {
            if p.is_absolute() {
                p.clone()
            } else {
                base.join(p)
            }
        };
        let subjects = self
            .subjects
            .iter()
            .map(|s| SubjectEntry {
                slices: s.slices.iter().map(resolve).collect(),
                masks: s.masks.iter().map(resolve).collect(),
                ..s.clone()
            })
            .collect();
        Self {
            schema_version: self.schema_version,
            subjects,
        }
    }

    /// Every referenced file must exist; errors name the subject.
    pub fn check_files_exist(&self) -> Result<()> {
        for s in &self.subjects {
            for p in s.slices.iter().chain(&s.masks) {
                if !p.is_file() {
                    return Err(CliError::Validation(format!(
                        "subject {}: referenced file {} does not exist",
                        s.id,
                        p.display()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn subject(&self, id: &str) -> Option<&SubjectEntry> {
        self.subjects.iter().find(|s| s.id == id)
    }
}

/// Load, validate, and resolve a manifest from `path`.
pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let bytes = std::fs::read(path).map_err(CliError::io(path))?;
    let manifest: DatasetManifest = serde_json::from_slice(&bytes).map_err(|e| {
        CliError::Validation(format!("{}: invalid manifest: {e}", path.display()))
    })?;
    manifest.validate()?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let resolved = manifest.resolved_against(base);
    resolved.check_files_exist()?;
    Ok(resolved)
}

/// Serialize a manifest to pretty JSON (trailing newline included).
pub fn manifest_json(manifest: &DatasetManifest) -> String {
    let mut s = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(id: &str, annotated: bool, n_slices: usize, n_masks: usize) -> SubjectEntry {
        SubjectEntry {
            id: id.to_string(),
            vendor: Vendor::A,
            annotated,
            phase: Some("ED".to_string()),
            spacing_mm: SpacingMm {
                slice: 9.0,
                row: 1.25,
                col: 1.25,
            },
            slices: (0..n_slices).map(|i| PathBuf::from(format!("{id}/s{i}.png"))).collect(),
            masks: (0..n_masks).map(|i| PathBuf::from(format!("{id}/m{i}.png"))).collect(),
        }
    }

    #[test]
    fn well_formed_manifest_validates() {
        let m = DatasetManifest::new(vec![entry("s01", true, 3, 3), entry("s02", false, 2, 0)]);
        m.validate().unwrap();
    }

    #[test]
    fn mask_count_mismatch_names_subject() {
        let m = DatasetManifest::new(vec![entry("s07", true, 10, 9)]);
        let err = m.validate().unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("mask count mismatch"), "{msg}");
        assert!(msg.contains("s07"), "{msg}");
    }

    #[test]
    fn annotated_subject_requires_masks() {
        let m = DatasetManifest::new(vec![entry("s01", true, 3, 0)]);
        let msg = m.validate().unwrap_err().to_string();
        assert!(msg.contains("s01") && msg.contains("no masks"), "{msg}");
    }

    #[test]
    fn unknown_vendor_fails_to_parse() {
        let json = r#"{
            "schema_version": 1,
            "subjects": [{
                "id": "x", "vendor": "E", "annotated": false,
                "spacing_mm": {"slice": 9.0, "row": 1.0, "col": 1.0},
                "slices": []
            }]
        }"#;
        let err = serde_json::from_str::<DatasetManifest>(json).unwrap_err();
        assert!(err.to_string().contains("unknown variant `E`"), "{err}");
    }

    #[test]
    fn duplicate_and_unsafe_ids_are_rejected() {
        let m = DatasetManifest::new(vec![entry("s01", false, 1, 0), entry("s01", false, 1, 0)]);
        assert!(m.validate().unwrap_err().to_string().contains("duplicate"));
        let m = DatasetManifest::new(vec![entry("../evil", false, 1, 0)]);
        assert!(m
            .validate()
            .unwrap_err()
            .to_string()
            .contains("safe path component"));
    }

    #[test]
    fn schema_version_is_enforced() {
        let mut m = DatasetManifest::new(vec![]);
        m.schema_version = 2;
        assert!(m
            .validate()
            .unwrap_err()
            .to_string()
            .contains("schema_version"));
    }

    #[test]
    fn load_checks_referenced_files_and_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let mut e = entry("s01", false, 1, 0);
        e.slices = vec![PathBuf::from("s01/slice.png")];
        let m = DatasetManifest::new(vec![e]);
        let path = dir.path().join("manifest.json");
        std::fs::write(&path, manifest_json(&m)).unwrap();

        // Referenced file missing → validation error naming the subject.
        let msg = load_manifest(&path).unwrap_err().to_string();
        assert!(msg.contains("s01") && msg.contains("does not exist"), "{msg}");

        // Create it (content is irrelevant at load time) and retry.
        std::fs::create_dir_all(dir.path().join("s01")).unwrap();
        std::fs::write(dir.path().join("s01/slice.png"), b"stub").unwrap();
        let loaded = load_manifest(&path).unwrap();
        assert_eq!(loaded.subjects.len(), 1);
        // Paths come back resolved against the manifest directory.
        assert!(loaded.subjects[0].slices[0].is_absolute());
    }
}
