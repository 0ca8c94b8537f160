//! Run orchestration: configuration, Process (I)/(II) runs, verification
//! suites, sweeps and output files.

pub mod config;
pub mod manifest;
pub mod output;
pub mod run;
pub mod sweep;
pub mod verify;

pub use config::{KernelFile, PathChoice, RunConfig, SweepAxis};
pub use manifest::{RunManifest, Verdict};
pub use output::{read_series, write_run, write_series};
pub use run::{run, RunResult};
pub use sweep::run_sweep;
pub use verify::{run_verify, VerifyOptions};
