//! Provenance log: what produced each artifact, from which inputs, under
//! which configuration.
//!
//! Every emitted file appears in exactly one entry together with the SHA-256
//! of its content and of every input it was derived from, so a rerun can be
//! compared hash-for-hash. Logs deliberately contain no timestamps or host
//! details: two runs with the same inputs, config, and seed must be
//! byte-identical, log included. Entries are sorted by (subject, slice,
//! epoch) before writing so worker scheduling cannot leak into the output.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::pngio::write_bytes_atomic;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    /// Path relative to the output directory (inputs: relative to the
    /// manifest directory or absolute).
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProvenanceEntry {
    pub subject: String,
    pub slice_index: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epoch: Option<u32>,
    /// `"ok"` or `"error"`.
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub inputs: Vec<FileRecord>,
    pub outputs: Vec<FileRecord>,
}

impl ProvenanceEntry {
    pub fn ok(subject: &str, slice_index: u32, epoch: Option<u32>) -> Self {
        Self {
            subject: subject.to_string(),
            slice_index,
            epoch,
            status: "ok".to_string(),
            error: None,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn failed(subject: &str, slice_index: u32, epoch: Option<u32>, error: String) -> Self {
        Self {
            status: "error".to_string(),
            error: Some(error),
            ..Self::ok(subject, slice_index, epoch)
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProvenanceLog {
    pub tool: String,
    pub version: String,
    /// Subcommand that produced this log.
    pub command: String,
    pub seed: u64,
    /// SHA-256 of the canonical config JSON the run used.
    pub config_sha256: String,
    pub entries: Vec<ProvenanceEntry>,
}

impl ProvenanceLog {
    pub fn new(command: &str, seed: u64, config_sha256: String) -> Self {
        Self {
            tool: "cardioaug".to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed,
            config_sha256,
            entries: Vec::new(),
        }
    }

    /// Add entries and restore the canonical (subject, slice, epoch) order.
    pub fn extend_sorted(&mut self, entries: impl IntoIterator<Item = ProvenanceEntry>) {
        self.entries.extend(entries);
        self.entries.sort_by(|a, b| {
            (&a.subject, a.slice_index, a.epoch).cmp(&(&b.subject, b.slice_index, b.epoch))
        });
    }

    pub fn failed_count(&self) -> usize {
        self.entries.iter().filter(|e| !e.is_ok()).count()
    }

    /// Write as pretty JSON (atomically).
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut json = serde_json::to_string_pretty(self).expect("log serializes");
        json.push('\n');
        write_bytes_atomic(path, json.as_bytes())
    }
}
