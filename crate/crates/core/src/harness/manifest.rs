//! Structured run record: config echo, verdicts, summary scalars.

use std::path::Path;

use serde::Serialize;

use crate::drive::DriveReport;
use crate::error::Result;

use super::config::RunConfig;
use super::run::{ProcessIAnalysis, ProcessIIAnalysis};

/// Written into every manifest.
pub const FINITE_VOLUME_CAVEAT: &str = "Convergence to equilibrium or to a time-periodic state is a statement about \
infinite systems. These runs use a finite lattice, so they can only show decay before boundary reflections return \
to the local region. Every convergence verdict uses data up to window.end and nothing later. None of them claims \
the infinite-volume limit.";

/// One invariant check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub bound: f64,
    /// `"<="`, `">="` or `"flag"`.
    pub relation: &'static str,
}

impl Verdict {
    pub fn at_most(name: &str, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            pass: value <= bound,
            value,
            bound,
            relation: "<=",
        }
    }

    pub fn at_least(name: &str, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            pass: value >= bound,
            value,
            bound,
            relation: ">=",
        }
    }

    pub fn flag(name: &str, pass: bool) -> Self {
        Self {
            name: name.into(),
            pass,
            value: if pass { 1.0 } else { 0.0 },
            bound: 1.0,
            relation: "flag",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Window {
    pub start: f64,
    pub end: f64,
    pub t_end: f64,
    /// The series runs past the window; later rows carry no convergence claim.
    pub beyond_window: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Summary {
    pub final_delta_s: f64,
    pub final_rel_s: f64,
    pub final_work: f64,
    pub first_law_residual: Option<f64>,
    pub integrability_constant: Option<f64>,
    pub process_i_decay_ratio: Option<f64>,
    pub process_i_sdot_ratio: Option<f64>,
    pub process_ii_cycle_distance: Option<f64>,
    pub process_i: Option<ProcessIAnalysis>,
    pub process_ii: Option<ProcessIIAnalysis>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub config: RunConfig,
    pub version: String,
    pub path: String,
    /// `"charge conserving"` or `"charge non-conserving"`.
    pub charge: String,
    pub drive: DriveReport,
    pub elapsed_seconds: f64,
    /// Accepted and rejected fast-path steps.
    pub steps: (usize, usize),
    pub window: Window,
    pub verdicts: Vec<Verdict>,
    pub summary: Summary,
    pub warnings: Vec<String>,
    pub caveat: String,
}

impl RunManifest {
    pub fn new(cfg: &RunConfig, report: &DriveReport, elapsed_seconds: f64) -> Self {
        let mut warnings = report.failures.clone();
        if !report.charge_conserving {
            warnings.push("drive does not commute with the number operator".into());
        }
        Self {
            config: cfg.clone(),
            version: env!("CARGO_PKG_VERSION").into(),
            path: cfg.path.to_string(),
            charge: if report.charge_conserving {
                "charge conserving"
            } else {
                "charge non-conserving"
            }
            .into(),
            drive: report.clone(),
            elapsed_seconds,
            steps: (0, 0),
            window: Window::default(),
            verdicts: Vec::new(),
            summary: Summary::default(),
            warnings,
            caveat: FINITE_VOLUME_CAVEAT.into(),
        }
    }

    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Verdict> {
        self.verdicts.iter().filter(|v| !v.pass)
    }

    pub fn verdict(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn write<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }
}
