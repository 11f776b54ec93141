//! Subcommand implementations. Each `run_*` function is pure orchestration
//! over the library kernels plus file I/O, and is callable from tests
//! without going through the binary.

pub mod augment;
pub mod bench;
pub mod evaluate;
pub mod losscheck;
pub mod postprocess;
pub mod preprocess;

use crate::error::{CliError, Result};

/// Run `f` inside a rayon pool of the requested width (`None` = one worker
/// per core). Output content must not depend on the worker count; only wall
/// time may.
pub(crate) fn with_pool<T: Send>(
    threads: Option<usize>,
    f: impl FnOnce() -> T + Send,
) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Validation(format!("cannot build thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Canonical output file names, shared across subcommands so artifacts from
/// one stage are addressable by the next.
pub(crate) fn slice_file(index: usize) -> String {
    format!("slice_{index:04}.png")
}

pub(crate) fn mask_file(index: usize) -> String {
    format!("mask_{index:04}.png")
}

pub(crate) fn augmented_stem(slice_index: usize, epoch: u32) -> String {
    format!("s{slice_index:04}_e{epoch:03}")
}
