//! `evaluate`: score predicted masks against ground truth and emit the
//! per-vendor report as CSV and JSON, optionally cleaning predictions with
//! the connected-component filter first.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;

use cardioaug::metrics::{evaluate_dataset, HdMode, SubjectInfo};
use cardioaug::postprocess::{remove_small_components, ComponentReport, Connectivity, LabelVolume};

use crate::commands::mask_file;
use crate::config::{load_config, parse_connectivity, parse_hd_mode};
use crate::error::{CliError, Result};
use crate::manifest::{load_manifest, SubjectEntry};
use crate::pngio::{read_mask, write_bytes_atomic, write_mask};

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Manifest of predicted masks (JSON); the `masks` field holds the
    /// predictions.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Manifest of ground-truth masks (JSON); subjects without truth are
    /// listed with `annotated: false`.
    #[arg(long)]
    pub truth: PathBuf,
    /// Pipeline config (JSON); defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory for reports (and postprocessed masks).
    #[arg(long)]
    pub out: PathBuf,
    /// Remove small connected components from predictions before scoring.
    #[arg(long, default_value_t = false)]
    pub postprocess: bool,
    /// Hausdorff condensation: max or p95.
    #[arg(long = "hd-mode", value_parser = parse_hd_mode)]
    pub hd_mode: Option<HdMode>,
    /// Component connectivity: 2d8 or 3d26.
    #[arg(long, value_parser = parse_connectivity)]
    pub connectivity: Option<Connectivity>,
    /// Minimum component size kept by --postprocess.
    #[arg(long = "min-voxels")]
    pub min_voxels: Option<usize>,
    /// Report row label.
    #[arg(long)]
    pub method: Option<String>,
}

pub fn run_evaluate(args: &EvaluateArgs) -> Result<()> {
    let config = load_config(args.config.as_deref())?;
    let hd_mode = args.hd_mode.unwrap_or(config.metrics.hd_mode);
    let connectivity = args.connectivity.unwrap_or(config.postprocess.connectivity);
    let min_voxels = args.min_voxels.unwrap_or(config.postprocess.min_voxels);
    let method = args.method.clone().unwrap_or(config.metrics.method);

    let pred_manifest = load_manifest(&args.manifest)?;
    let truth_manifest = load_manifest(&args.truth)?;
    std::fs::create_dir_all(&args.out).map_err(CliError::io(&args.out))?;

    // The truth manifest is the subject authority; prediction entries must
    // agree with it on vendor and spacing where they overlap.
    for p in &pred_manifest.subjects {
        if !p.has_masks() {
            return Err(CliError::Validation(format!(
                "subject {}: prediction manifest lists no masks",
                p.id
            )));
        }
        if let Some(t) = truth_manifest.subject(&p.id) {
            if t.vendor != p.vendor {
                return Err(CliError::Validation(format!(
                    "subject {}: vendor {} in predictions but {} in truth",
                    p.id, p.vendor, t.vendor
                )));
            }
            if t.spacing_mm != p.spacing_mm {
                return Err(CliError::Validation(format!(
                    "subject {}: spacing {:?} in predictions but {:?} in truth",
                    p.id, p.spacing_mm, t.spacing_mm
                )));
            }
        }
    }

    let mut predictions = Vec::with_capacity(pred_manifest.subjects.len());
    for s in &pred_manifest.subjects {
        predictions.push((s.id.clone(), load_mask_volume(s)?));
    }

    if args.postprocess {
        let mut reports: BTreeMap<String, ComponentReport> = BTreeMap::new();
        for (id, volume) in &mut predictions {
            let (cleaned, report) =
                remove_small_components(volume, min_voxels, connectivity).map_err(CliError::Core)?;
            write_cleaned_masks(&args.out, id, &cleaned)?;
            reports.insert(id.clone(), report);
            *volume = cleaned;
        }
        let mut json =
            serde_json::to_string_pretty(&reports).expect("component reports serialize");
        json.push('\n');
        write_bytes_atomic(&args.out.join("postprocess.json"), json.as_bytes())?;
    }

    let mut truths = Vec::new();
    let mut subjects = Vec::with_capacity(truth_manifest.subjects.len());
    for s in &truth_manifest.subjects {
        subjects.push(SubjectInfo {
            id: s.id.clone(),
            vendor: s.vendor,
            annotated: s.annotated,
        });
        if s.annotated {
            truths.push((s.id.clone(), load_mask_volume(s)?));
        }
    }

    let report =
        evaluate_dataset(&predictions, &truths, &subjects, hd_mode, &method).map_err(CliError::Core)?;

    let csv = report.to_csv();
    write_bytes_atomic(&args.out.join("report.csv"), csv.as_bytes())?;
    let mut json = serde_json::to_string_pretty(&report).expect("report serializes");
    json.push('\n');
    write_bytes_atomic(&args.out.join("report.json"), json.as_bytes())?;
    print!("{csv}");
    Ok(())
}

/// Stack a subject's mask files into a volume with the subject's spacing.
fn load_mask_volume(subject: &SubjectEntry) -> Result<LabelVolume> {
    let mut slices = Vec::with_capacity(subject.masks.len());
    for path in &subject.masks {
        slices.push(read_mask(path)?);
    }
    LabelVolume::new(slices, subject.spacing_mm.volume()).map_err(|e| {
        CliError::Validation(format!("subject {}: {e}", subject.id))
    })
}

fn write_cleaned_masks(out: &Path, subject_id: &str, volume: &LabelVolume) -> Result<()> {
    let dir = out.join("postprocessed").join(subject_id);
    for (i, slice) in volume.slices().iter().enumerate() {
        write_mask(&dir.join(mask_file(i)), slice)?;
    }
    Ok(())
}
