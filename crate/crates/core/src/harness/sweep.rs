//! Independent runs over one parameter axis, with a shared index file.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;

use super::config::{RunConfig, SweepAxis};
use super::output::write_run;
use super::run::run;

pub const INDEX_FILE: &str = "index.jsonl";

/// One line of the sweep index.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepEntry {
    pub axis: SweepAxis,
    pub value: f64,
    pub index: usize,
    pub directory: PathBuf,
    /// `None` when the child failed before producing a manifest.
    pub passed: Option<bool>,
    pub final_delta_s: Option<f64>,
    pub process_i_decay_ratio: Option<f64>,
    pub error: Option<String>,
}

/// Appends one JSON line under an exclusive file lock.
fn append_locked(index: &Path, entry: &SweepEntry) -> Result<()> {
    let file = OpenOptions::new().create(true).append(true).open(index)?;
    file.lock()?;
    let line = serde_json::to_string(entry).expect("entry serializes") + "\n";
    let outcome = (&file).write_all(line.as_bytes());
    file.unlock()?;
    outcome?;
    Ok(())
}

/// Runs one child per value in parallel. Child failures are recorded in
/// the index and do not stop the sweep. Entries come back in input order.
pub fn run_sweep(cfg: &RunConfig, axis: SweepAxis, values: &[f64], out: &Path) -> Result<Vec<SweepEntry>> {
    std::fs::create_dir_all(out)?;
    let index = out.join(INDEX_FILE);
    let entries: Vec<SweepEntry> = values
        .par_iter()
        .enumerate()
        .map(|(i, &value)| {
            let directory = out.join(format!("{axis}-{i:03}"));
            let child = cfg.with_axis(axis, value);
            let outcome = child.validate().and_then(|_| run(&child)).and_then(|r| {
                write_run(&r, &directory)?;
                Ok(r)
            });
            let entry = match outcome {
                Ok(r) => SweepEntry {
                    axis,
                    value,
                    index: i,
                    directory,
                    passed: Some(r.manifest.passed()),
                    final_delta_s: Some(r.manifest.summary.final_delta_s),
                    process_i_decay_ratio: r.manifest.summary.process_i_decay_ratio,
                    error: None,
                },
                Err(e) => SweepEntry {
                    axis,
                    value,
                    index: i,
                    directory,
                    passed: None,
                    final_delta_s: None,
                    process_i_decay_ratio: None,
                    error: Some(e.to_string()),
                },
            };
            append_locked(&index, &entry).map(|_| entry)
        })
        .collect::<Result<_>>()?;
    Ok(entries)
}
