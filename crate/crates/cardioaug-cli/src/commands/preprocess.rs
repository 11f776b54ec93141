//! `preprocess`: denoise, normalize, and crop/pad every slice of a dataset,
//! emitting a derived manifest plus a provenance log.

use std::path::PathBuf;

use clap::Args;
use rayon::prelude::*;

use cardioaug::preprocess::preprocess_slice;

use crate::commands::{mask_file, slice_file, with_pool};
use crate::config::load_config;
use crate::error::{CliError, Result};
use crate::manifest::{load_manifest, manifest_json, DatasetManifest, SubjectEntry};
use crate::pngio::{
    hash_file, read_mask, read_raw_image, sha256_hex, write_bytes_atomic, write_mask,
    write_unit_image,
};
use crate::provenance::{FileRecord, ProvenanceEntry, ProvenanceLog};

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    /// Dataset manifest (JSON).
    #[arg(long)]
    pub manifest: PathBuf,
    /// Pipeline config (JSON); defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads (default: one per core).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Override the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Preprocess every subject. A failing slice fails its whole subject (no
/// partial subject output); other subjects are unaffected. Returns
/// `CliError::Partial` if any subject failed, after writing the provenance
/// log and a derived manifest of the successful subjects.
pub fn run_preprocess(args: &PreprocessArgs) -> Result<()> {
    let config = load_config(args.config.as_deref())?.with_seed_override(args.seed);
    let manifest = load_manifest(&args.manifest)?;
    std::fs::create_dir_all(&args.out).map_err(CliError::io(&args.out))?;

    let results: Vec<(Option<SubjectEntry>, Vec<ProvenanceEntry>)> = with_pool(args.threads, || {
        manifest
            .subjects
            .par_iter()
            .map(|subject| process_subject(subject, &config, &args.out))
            .collect()
    })?;

    let mut log = ProvenanceLog::new(
        "preprocess",
        config.seed,
        sha256_hex(config.canonical_json().as_bytes()),
    );
    let mut derived_subjects = Vec::new();
    for (entry, prov) in results {
        log.extend_sorted(prov);
        derived_subjects.extend(entry);
    }
    derived_subjects.sort_by(|a, b| a.id.cmp(&b.id));

    let derived = DatasetManifest::new(derived_subjects);
    write_bytes_atomic(&args.out.join("manifest.json"), manifest_json(&derived).as_bytes())?;
    log.write(&args.out.join("provenance.json"))?;

    let failed = manifest.subjects.len() - derived.subjects.len();
    println!(
        "preprocessed {} of {} subjects into {}",
        derived.subjects.len(),
        manifest.subjects.len(),
        args.out.display()
    );
    if failed > 0 {
        return Err(CliError::Partial {
            failed,
            total: manifest.subjects.len(),
        });
    }
    Ok(())
}

/// Returns the derived manifest entry (None on failure) plus provenance
/// entries. All slices are processed in memory before anything is written,
/// so a decode error leaves no partial subject output behind.
fn process_subject(
    subject: &SubjectEntry,
    config: &crate::config::PipelineConfig,
    out: &std::path::Path,
) -> (Option<SubjectEntry>, Vec<ProvenanceEntry>) {
    match try_process_subject(subject, config, out) {
        Ok((entry, prov)) => (Some(entry), prov),
        Err((slice_index, err)) => (
            None,
            vec![ProvenanceEntry::failed(
                &subject.id,
                slice_index,
                None,
                err.to_string(),
            )],
        ),
    }
}

type SliceFailure = (u32, CliError);

fn try_process_subject(
    subject: &SubjectEntry,
    config: &crate::config::PipelineConfig,
    out: &std::path::Path,
) -> std::result::Result<(SubjectEntry, Vec<ProvenanceEntry>), SliceFailure> {
    let in_plane = subject.spacing_mm.in_plane();
    // Decode and process every slice before writing anything.
    let mut processed = Vec::with_capacity(subject.slices.len());
    for (i, slice_path) in subject.slices.iter().enumerate() {
        let fail = |e: CliError| (i as u32, e);
        let image = read_raw_image(slice_path, in_plane).map_err(fail)?;
        let mask = match subject.masks.get(i) {
            Some(p) => Some(read_mask(p).map_err(fail)?),
            None => None,
        };
        let nlm = config.nlm.params_for(&image).map_err(|e| fail(CliError::Core(e)))?;
        let (image, mask) =
            preprocess_slice(&image, mask.as_ref(), &nlm).map_err(|e| fail(CliError::Core(e)))?;
        processed.push((image, mask));
    }

    let subject_dir = out.join(&subject.id);
    let mut entries = Vec::with_capacity(processed.len());
    let mut out_slices = Vec::new();
    let mut out_masks = Vec::new();
    for (i, (image, mask)) in processed.into_iter().enumerate() {
        let fail = |e: CliError| (i as u32, e);
        let mut entry = ProvenanceEntry::ok(&subject.id, i as u32, None);
        entry.inputs.push(FileRecord {
            path: subject.slices[i].display().to_string(),
            sha256: hash_file(&subject.slices[i]).map_err(fail)?,
        });
        if let Some(p) = subject.masks.get(i) {
            entry.inputs.push(FileRecord {
                path: p.display().to_string(),
                sha256: hash_file(p).map_err(fail)?,
            });
        }

        let rel_image = PathBuf::from(&subject.id).join(slice_file(i));
        let image_path = subject_dir.join(slice_file(i));
        write_unit_image(&image_path, &image).map_err(fail)?;
        entry.outputs.push(FileRecord {
            path: rel_image.display().to_string(),
            sha256: hash_file(&image_path).map_err(fail)?,
        });
        out_slices.push(rel_image);

        if let Some(mask) = mask {
            let rel_mask = PathBuf::from(&subject.id).join(mask_file(i));
            let mask_path = subject_dir.join(mask_file(i));
            write_mask(&mask_path, &mask).map_err(fail)?;
            entry.outputs.push(FileRecord {
                path: rel_mask.display().to_string(),
                sha256: hash_file(&mask_path).map_err(fail)?,
            });
            out_masks.push(rel_mask);
        }
        entries.push(entry);
    }

    let derived = SubjectEntry {
        slices: out_slices,
        masks: out_masks,
        ..subject.clone()
    };
    Ok((derived, entries))
}
