//! `bench`: measure augmentation throughput on a synthetic 256×256 pair
//! with every transform slot forced on (the heaviest realistic stack).

use clap::Args;
use rayon::prelude::*;
use serde::Serialize;

use cardioaug::augment::{augment_pair, AugmentPolicy, SlotProbabilities};
use cardioaug::grid::{Image2D, LabelMask2D, SliceMeta, SlicePair, LABEL_LV, LABEL_MYO};
use cardioaug::preprocess::CANVAS;

use crate::commands::with_pool;
use crate::error::{CliError, Result};

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    /// Approximate measurement duration in seconds.
    #[arg(long, default_value_t = 2.0)]
    pub seconds: f64,
    /// Required throughput per core (pairs/s); below this the command exits
    /// with the check-failure code. Pass 0 to always succeed.
    #[arg(long = "min-rate", default_value_t = 200.0)]
    pub min_rate: f64,
}

#[derive(Debug, Serialize)]
struct BenchReport {
    threads: usize,
    pairs: usize,
    seconds: f64,
    pairs_per_sec: f64,
    pairs_per_sec_per_core: f64,
    min_rate: f64,
    passed: bool,
}

/// A deterministic, realistic workload: smooth blob image with a two-class
/// ring mask, full canvas size.
pub fn synthetic_pair() -> SlicePair<f64> {
    let (w, h) = (CANVAS, CANVAS);
    let (cx, cy) = (w as f64 * 0.45, h as f64 * 0.55);
    let image = Image2D::from_fn(w, h, |r, c| {
        let dx = c as f64 - cx;
        let dy = r as f64 - cy;
        let d2 = dx * dx + dy * dy;
        ((-d2 / 2400.0).exp() * 0.9 + 0.05 * ((r * 31 + c * 17) % 7) as f64 / 7.0).min(1.0)
    });
    let mask = LabelMask2D::from_fn(w, h, |r, c| {
        let dx = c as f64 - cx;
        let dy = r as f64 - cy;
        let d = (dx * dx + dy * dy).sqrt();
        if d < 20.0 {
            LABEL_LV
        } else if d < 32.0 {
            LABEL_MYO
        } else {
            0
        }
    })
    .expect("labels are valid");
    SlicePair::new(image, mask)
        .expect("dimensions match")
        .with_meta(SliceMeta {
            subject: "bench".to_string(),
            slice_index: 0,
        })
}

/// Policy with every slot probability at 1 so each pair pays for the whole
/// stack: one of blur/sharpen, shift, gamma, shear, rotate, and scale.
fn full_stack_policy() -> AugmentPolicy {
    AugmentPolicy {
        probabilities: SlotProbabilities {
            blur_sharpen: 1.0,
            intensity_shift: 1.0,
            gamma: 1.0,
            shear: 1.0,
            rotate: 1.0,
            scale: 1.0,
        },
        ..AugmentPolicy::default()
    }
}

/// Measured pairs/s/core over roughly `seconds` of augmentation.
pub fn measure_rate(threads: usize, seconds: f64) -> Result<(usize, f64, f64)> {
    if threads == 0 {
        return Err(CliError::Validation("--threads must be at least 1".into()));
    }
    let pair = synthetic_pair();
    let policy = full_stack_policy();

    // Warmup, and a per-pair cost estimate for batch sizing.
    let t0 = std::time::Instant::now();
    augment_pair(&pair, &policy, u32::MAX).map_err(CliError::Core)?;
    let per_pair = t0.elapsed().as_secs_f64().max(1e-4);
    let batch = ((0.1 / per_pair).ceil() as usize).clamp(1, 4096) * threads;

    let mut epoch = 0u32;
    let mut pairs = 0usize;
    let start = std::time::Instant::now();
    with_pool(Some(threads), || -> Result<()> {
        while start.elapsed().as_secs_f64() < seconds {
            (epoch..epoch + batch as u32)
                .into_par_iter()
                .try_for_each(|e| {
                    augment_pair(&pair, &policy, e).map(|_| ()).map_err(CliError::Core)
                })?;
            epoch += batch as u32;
            pairs += batch;
        }
        Ok(())
    })??;
    let elapsed = start.elapsed().as_secs_f64();
    Ok((pairs, elapsed, pairs as f64 / elapsed))
}

pub fn run_bench(args: &BenchArgs) -> Result<()> {
    let (pairs, elapsed, rate) = measure_rate(args.threads, args.seconds)?;
    let per_core = rate / args.threads as f64;
    let report = BenchReport {
        threads: args.threads,
        pairs,
        seconds: elapsed,
        pairs_per_sec: rate,
        pairs_per_sec_per_core: per_core,
        min_rate: args.min_rate,
        passed: per_core >= args.min_rate,
    };
    let mut json = serde_json::to_string_pretty(&report).expect("report serializes");
    json.push('\n');
    print!("{json}");
    if !report.passed {
        return Err(CliError::CheckFailure(format!(
            "bench: {per_core:.1} pairs/s/core is below the {:.1} target",
            args.min_rate
        )));
    }
    Ok(())
}
