//! `augment`: draw and apply one transform stack per (slice, epoch), writing
//! the augmented pair plus a JSON recipe that allows bit-exact replay.

use std::path::{Path, PathBuf};

use clap::Args;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use cardioaug::augment::{apply_stack, augment_pair, TransformStack};
use cardioaug::grid::{SliceMeta, SlicePair};

use crate::commands::{augmented_stem, with_pool};
use crate::config::{load_config, PipelineConfig};
use crate::error::{CliError, Result};
use crate::manifest::{load_manifest, DatasetManifest, SubjectEntry};
use crate::pngio::{
    hash_file, read_mask, read_unit_image, sha256_hex, write_bytes_atomic, write_mask,
    write_unit_image,
};
use crate::provenance::{FileRecord, ProvenanceEntry, ProvenanceLog};

#[derive(Debug, Args)]
pub struct AugmentArgs {
    /// Dataset manifest of preprocessed slices (JSON).
    #[arg(long)]
    pub manifest: PathBuf,
    /// Pipeline config (JSON); defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Augmented replicas per slice.
    #[arg(long, default_value_t = 1)]
    pub epochs: u32,
    /// Worker threads (default: one per core).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Override the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Replay one recorded recipe instead of sampling new stacks.
    #[arg(long)]
    pub replay: Option<PathBuf>,
}

/// A recorded augmentation: everything needed to reproduce one output pair
/// byte for byte from its source slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recipe {
    pub subject: String,
    pub slice_index: u32,
    pub epoch: u32,
    pub global_seed: u64,
    pub stack: TransformStack,
}

pub fn run_augment(args: &AugmentArgs) -> Result<()> {
    let config = load_config(args.config.as_deref())?.with_seed_override(args.seed);
    let manifest = load_manifest(&args.manifest)?;
    std::fs::create_dir_all(&args.out).map_err(CliError::io(&args.out))?;

    if let Some(recipe_path) = &args.replay {
        return replay_recipe(recipe_path, &manifest, &config, &args.out);
    }

    if let Some(s) = manifest.subjects.iter().find(|s| !s.annotated) {
        return Err(CliError::Validation(format!(
            "subject {} is not annotated; augmentation needs image+mask pairs",
            s.id
        )));
    }

    let items: Vec<(usize, usize)> = manifest
        .subjects
        .iter()
        .enumerate()
        .flat_map(|(si, s)| (0..s.slices.len()).map(move |i| (si, i)))
        .collect();

    let results: Vec<Vec<ProvenanceEntry>> = with_pool(args.threads, || {
        items
            .par_iter()
            .map(|&(si, i)|

                process_slice(&manifest.subjects[si], i, args.epochs, &config, &args.out))
            .collect()
    })?;

    let mut log = ProvenanceLog::new(
        "augment",
        config.seed,
        sha256_hex(config.canonical_json().as_bytes()),
    );
    for prov in results {
        log.extend_sorted(prov);
    }
    log.write(&args.out.join("provenance.json"))?;

    let failed = log.failed_count();
    let total = log.entries.len();
    println!(
        "augmented {} (slice, epoch) pairs into {}",
        total - failed,
        args.out.display()
    );
    if failed > 0 {
        return Err(CliError::Partial { failed, total });
    }
    Ok(())
}

/// All epochs of one slice; the source files are read once.
fn process_slice(
    subject: &SubjectEntry,
    slice_index: usize,
    epochs: u32,
    config: &PipelineConfig,
    out: &Path,
) -> Vec<ProvenanceEntry> {
    let pair = match load_pair(subject, slice_index) {
        Ok(p) => p,
        Err(e) => {
            // The slice is unreadable: every epoch of it fails.
            return (0..epochs)
                .map(|epoch| {
                    ProvenanceEntry::failed(
                        &subject.id,
                        slice_index as u32,
                        Some(epoch),
                        e.to_string(),
                    )
                })
                .collect();
        }
    };
    let inputs = match input_records(subject, slice_index) {
        Ok(r) => r,
        Err(e) => {
            return vec![ProvenanceEntry::failed(
                &subject.id,
                slice_index as u32,
                None,
                e.to_string(),
            )]
        }
    };

    (0..epochs)
        .map(|epoch| {
            match augment_one(subject, &pair, epoch, config, out) {
                Ok(outputs) => {
                    let mut entry =
                        ProvenanceEntry::ok(&subject.id, slice_index as u32, Some(epoch));
                    entry.inputs = inputs.clone();
                    entry.outputs = outputs;
                    entry
                }
                Err(e) => ProvenanceEntry::failed(
                    &subject.id,
                    slice_index as u32,
                    Some(epoch),
                    e.to_string(),
                ),
            }
        })
        .collect()
}

fn load_pair(subject: &SubjectEntry, slice_index: usize) -> Result<SlicePair<f64>> {
    let image = read_unit_image(
        &subject.slices[slice_index],
        subject.spacing_mm.in_plane(),
    )?;
    let mask = read_mask(&subject.masks[slice_index])?;
    let pair = SlicePair::new(image, mask).map_err(CliError::Core)?;
    Ok(pair.with_meta(SliceMeta {
        subject: subject.id.clone(),
        slice_index: slice_index as u32,
    }))
}

fn input_records(subject: &SubjectEntry, slice_index: usize) -> Result<Vec<FileRecord>> {
    let mut records = Vec::with_capacity(2);
    for p in [&subject.slices[slice_index], &subject.masks[slice_index]] {
        records.push(FileRecord {
            path: p.display().to_string(),
            sha256: hash_file(p)?,
        });
    }
    Ok(records)
}

fn augment_one(
    subject: &SubjectEntry,
    pair: &SlicePair<f64>,
    epoch: u32,
    config: &PipelineConfig,
    out: &Path,
) -> Result<Vec<FileRecord>> {
    let (augmented, stack) =
        augment_pair(pair, &config.augment, epoch).map_err(CliError::Core)?;
    let recipe = Recipe {
        subject: subject.id.clone(),
        slice_index: pair.meta.slice_index,
        epoch,
        global_seed: config.augment.seed.global_seed,
        stack,
    };
    write_outputs(subject, &augmented, &recipe, out)
}

/// Write image, mask, and recipe for one augmented pair; returns the output
/// records (relative path + hash) in a fixed order.
fn write_outputs(
    subject: &SubjectEntry,
    augmented: &SlicePair<f64>,
    recipe: &Recipe,
    out: &Path,
) -> Result<Vec<FileRecord>> {
    let stem = augmented_stem(recipe.slice_index as usize, recipe.epoch);
    let dir = out.join(&subject.id);
    let mut records = Vec::with_capacity(3);

    let image_rel = PathBuf::from(&subject.id).join(format!("{stem}_image.png"));
    let image_path = dir.join(format!("{stem}_image.png"));
    write_unit_image(&image_path, &augmented.image)?;
    records.push(FileRecord {
        path: image_rel.display().to_string(),
        sha256: hash_file(&image_path)?,
    });

    let mask_rel = PathBuf::from(&subject.id).join(format!("{stem}_mask.png"));
    let mask_path = dir.join(format!("{stem}_mask.png"));
    write_mask(&mask_path, &augmented.mask)?;
    records.push(FileRecord {
        path: mask_rel.display().to_string(),
        sha256: hash_file(&mask_path)?,
    });

    let recipe_rel = PathBuf::from(&subject.id).join(format!("{stem}_recipe.json"));
    let recipe_path = dir.join(format!("{stem}_recipe.json"));
    let mut json = serde_json::to_string_pretty(recipe).expect("recipe serializes");
    json.push('\n');
    write_bytes_atomic(&recipe_path, json.as_bytes())?;
    records.push(FileRecord {
        path: recipe_rel.display().to_string(),
        sha256: hash_file(&recipe_path)?,
    });

    Ok(records)
}

/// Re-apply a recorded stack to its source slice. The stack is used exactly
/// as stored — nothing is re-sampled — so the outputs are byte-identical to
/// the original run's.
fn replay_recipe(
    recipe_path: &Path,
    manifest: &DatasetManifest,
    config: &PipelineConfig,
    out: &Path,
) -> Result<()> {
    let bytes = std::fs::read(recipe_path).map_err(CliError::io(recipe_path))?;
    let recipe: Recipe = serde_json::from_slice(&bytes).map_err(|e| {
        CliError::Validation(format!("{}: invalid recipe: {e}", recipe_path.display()))
    })?;
    let subject = manifest.subject(&recipe.subject).ok_or_else(|| {
        CliError::Validation(format!(
            "recipe subject {} not present in the manifest",
            recipe.subject
        ))
    })?;
    let idx = recipe.slice_index as usize;
    if idx >= subject.slices.len() || idx >= subject.masks.len() {
        return Err(CliError::Validation(format!(
            "recipe slice index {idx} out of range for subject {}",
            subject.id
        )));
    }
    let pair = load_pair(subject, idx)?;
    let augmented = apply_stack(&pair, &recipe.stack).map_err(CliError::Core)?;
    let outputs = write_outputs(subject, &augmented, &recipe, out)?;

    let mut log = ProvenanceLog::new(
        "augment --replay",
        config.seed,
        sha256_hex(config.canonical_json().as_bytes()),
    );
    let mut entry = ProvenanceEntry::ok(&subject.id, recipe.slice_index, Some(recipe.epoch));
    entry.inputs = input_records(subject, idx)?;
    entry.inputs.push(FileRecord {
        path: recipe_path.display().to_string(),
        sha256: sha256_hex(&bytes),
    });
    entry.outputs = outputs;
    log.extend_sorted([entry]);
    log.write(&out.join("provenance.json"))?;
    println!(
        "replayed {} slice {} epoch {} into {}",
        recipe.subject,
        recipe.slice_index,
        recipe.epoch,
        out.display()
    );
    Ok(())
}
