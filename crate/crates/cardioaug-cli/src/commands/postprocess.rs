//! `postprocess`: apply the small-component filter to every subject's mask
//! volume and write the cleaned masks plus a per-subject component report.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};


use clap::Args;
use rayon::prelude::*;

use cardioaug::postprocess::{remove_small_components, ComponentReport, Connectivity, LabelVolume};

use crate::commands::{mask_file, with_pool};
use crate::config::{load_config, parse_connectivity};
use crate::error::{CliError, Result};
use crate::manifest::{load_manifest, SubjectEntry};
use crate::pngio::{read_mask, write_bytes_atomic, write_mask};

#[derive(Debug, Args)]
pub struct PostprocessArgs {
    /// Manifest whose `masks` entries are to be cleaned (JSON).
    #[arg(long)]
    pub manifest: PathBuf,
    /// Pipeline config (JSON); defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Component connectivity: 2d8 or 3d26.
    #[arg(long, value_parser = parse_connectivity)]
    pub connectivity: Option<Connectivity>,
    /// Minimum component size to keep.
    #[arg(long = "min-voxels")]
    pub min_voxels: Option<usize>,
    /// Worker threads (default: one per core).
    #[arg(long)]
    pub threads: Option<usize>,
}

pub fn run_postprocess(args: &PostprocessArgs) -> Result<()> {
    let config = load_config(args.config.as_deref())?;
    let connectivity = args.connectivity.unwrap_or(config.postprocess.connectivity);
    let min_voxels = args.min_voxels.unwrap_or(config.postprocess.min_voxels);
    let manifest = load_manifest(&args.manifest)?;
    std::fs::create_dir_all(&args.out).map_err(CliError::io(&args.out))?;

    for s in &manifest.subjects {
        if !s.has_masks() {
            return Err(CliError::Validation(format!(
                "subject {}: manifest lists no masks to postprocess",
                s.id
            )));
        }
    }

    type SubjectOutcome = (String, std::result::Result<ComponentReport, String>);
    let results: Vec<SubjectOutcome> = with_pool(args.threads, || {
        manifest
            .subjects
            .par_iter()
            .map(|s| {
                let outcome = clean_subject(s, min_voxels, connectivity, &args.out)
                    .map_err(|e| e.to_string());
                (s.id.clone(), outcome)
            })
            .collect()
    })?;

    let mut reports: BTreeMap<String, ComponentReport> = BTreeMap::new();
    let mut failures: BTreeMap<String, String> = BTreeMap::new();
    for (id, outcome) in results {
        match outcome {
            Ok(report) => {
                reports.insert(id, report);
            }
            Err(msg) => {
                failures.insert(id, msg);
            }
        }
    }

    #[derive(serde::Serialize)]
    struct ComponentsFile<'a> {
        min_voxels: usize,
        connectivity: Connectivity,
        subjects: &'a BTreeMap<String, ComponentReport>,
        failures: &'a BTreeMap<String, String>,
    }
    let mut json = serde_json::to_string_pretty(&ComponentsFile {
        min_voxels,
        connectivity,
        subjects: &reports,
        failures: &failures,
    })
    .expect("component reports serialize");
    json.push('\n');
    write_bytes_atomic(&args.out.join("components.json"), json.as_bytes())?;

    println!(
        "postprocessed {} of {} subjects into {}",
        reports.len(),
        manifest.subjects.len(),
        args.out.display()
    );
    if !failures.is_empty() {
        return Err(CliError::Partial {
            failed: failures.len(),
            total: manifest.subjects.len(),
        });
    }
    Ok(())
}

fn clean_subject(
    subject: &SubjectEntry,
    min_voxels: usize,
    connectivity: Connectivity,
    out: &Path,
) -> Result<ComponentReport> {
    let mut slices = Vec::with_capacity(subject.masks.len());
    for path in &subject.masks {
        slices.push(read_mask(path)?);
    }
    let volume = LabelVolume::new(slices, subject.spacing_mm.volume())
        .map_err(|e| CliError::Validation(format!("subject {}: {e}", subject.id)))?;
    let (cleaned, report) =
        remove_small_components(&volume, min_voxels, connectivity).map_err(CliError::Core)?;
    let dir = out.join(&subject.id);
    for (i, slice) in cleaned.slices().iter().enumerate() {
        write_mask(&dir.join(mask_file(i)), slice)?;
    }
    Ok(report)
}
