use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qtherm::harness::{self, KernelFile, PathChoice, RunConfig, RunManifest, SweepAxis, VerifyOptions};
use qtherm::quadratic::norm::{self, SMALLNESS_THRESHOLD};
use qtherm::Error;

#[derive(Parser)]
#[command(name = "qtherm", version, about = "Driven free-fermion lattice processes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Overrides {
    /// exact, quadratic or both
    #[arg(long)]
    path: Option<PathChoice>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured process and write series.csv and manifest.json
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run the process plus every invariant suite
    Verify {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        /// Break the propagator under test (checks that the suite catches it)
        #[arg(long, hide = true)]
        corrupt_propagator: bool,
    },
    /// One run per value of a parameter
    Sweep {
        config: PathBuf,
        #[arg(long)]
        axis: SweepAxis,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Smallness norm of the kernels in a TOML file
    Norm { kernels: PathBuf },
}

fn load(config: &PathBuf, o: &Overrides) -> Result<RunConfig, Error> {
    let mut cfg = RunConfig::load(config)?;
    if let Some(p) = o.path {
        cfg.path = p;
    }
    if let Some(d) = &o.out {
        cfg.output.directory = d.clone();
    }
    if let Some(s) = o.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn report(manifest: &RunManifest) -> ExitCode {
    for v in &manifest.verdicts {
        let mark = if v.pass { "pass" } else { "FAIL" };
        println!("{mark} {:<40} {:>12.4e} {} {:.4e}", v.name, v.value, v.relation, v.bound);
    }
    for w in &manifest.warnings {
        println!("warning: {w}");
    }
    if manifest.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn execute(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Run { config, overrides } => {
            let cfg = load(&config, &overrides)?;
            let result = harness::run(&cfg)?;
            harness::write_run(&result, &cfg.output.directory)?;
            println!("wrote {} rows to {}", result.records.len(), cfg.output.directory.display());
            Ok(report(&result.manifest))
        }
        Command::Verify {
            config,
            overrides,
            corrupt_propagator,
        } => {
            let cfg = load(&config, &overrides)?;
            let opts = VerifyOptions {
                corrupt_propagator,
                ..Default::default()
            };
            let result = harness::run_verify(&cfg, &opts)?;
            harness::write_run(&result, &cfg.output.directory)?;
            Ok(report(&result.manifest))
        }
        Command::Sweep {
            config,
            axis,
            values,
            overrides,
        } => {
            let cfg = load(&config, &overrides)?;
            let entries = harness::run_sweep(&cfg, axis, &values, &cfg.output.directory)?;
            let mut ok = true;
            for e in &entries {
                match (&e.error, e.passed) {
                    (Some(err), _) => {
                        ok = false;
                        println!("{axis} = {}: error: {err}", e.value);
                    }
                    (None, passed) => {
                        ok &= passed == Some(true);
                        let ds = e.final_delta_s.unwrap_or(f64::NAN);
                        println!(
                            "{axis} = {}: dS = {ds:.6e} {}",
                            e.value,
                            if passed == Some(true) { "pass" } else { "FAIL" }
                        );
                    }
                }
            }
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Norm { kernels } => {
            let file = KernelFile::load(&kernels)?;
            let lattice = file.lattice()?;
            for (i, k) in file.kernels.iter().enumerate() {
                let est = norm::kernel_norm(k, &lattice)?;
                let weight = 2f64.powi(5 * k.degree as i32) * k.degree as f64;
                println!(
                    "kernel {i} (degree {}): {:.6e} ± {:.1e}, weighted {:.6e}",
                    k.degree,
                    est.value,
                    est.richardson_estimate,
                    weight * est.value
                );
            }
            let total = norm::drive_norm(&file.kernels, &lattice)?;
            let pass = total.value < SMALLNESS_THRESHOLD;
            println!(
                "total {:.6e} ± {:.1e}, threshold {:.6e}: {}",
                total.value,
                total.richardson_estimate,
                SMALLNESS_THRESHOLD,
                if pass { "small" } else { "not small" }
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
