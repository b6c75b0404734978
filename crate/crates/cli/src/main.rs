mod plot;
mod svg;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use mimalloc::MiMalloc;
use shear_core::harness::{self, fit_decay, ExperimentConfig, SeriesField, Summary};

#[global_allocator]
static GLOBAL: MiMalloc = MiMalloc;

const ENV_HELP: &str = "\
Environment:
  SHEAR_OUTPUT_DIR  output directory for run/sweep (overrides the config's output_dir)
  SHEAR_THREADS     cap on the number of cells run in parallel
  RUST_LOG          log filter (default: info)

Exit codes:
  0  every completed cell and sweep check passed
  1  execution error, or some cells failed to run
  2  at least one checker failed";

#[derive(Parser, Debug)]
#[command(
    name = "shear",
    version,
    about = "Perturbed shear flows on the periodic strip: sweeps, checks, fits and plots"
)]
#[command(after_help = ENV_HELP)]
struct Cli {
    /// Maximum number of cells run in parallel.
    #[arg(long, global = true, env = "SHEAR_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one cell (one m, one sigma) of a config and write its bundle.
    Run {
        /// Config file (JSON or TOML).
        config: PathBuf,
        /// Box half-height; defaults to the first entry of m_list.
        #[arg(long)]
        m: Option<usize>,
        /// Perturbation size; defaults to the first entry of sigma_list.
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long, env = "SHEAR_OUTPUT_DIR")]
        output_dir: Option<PathBuf>,
    },
    /// Run every (m, sigma) cell of a config and write the bundle.
    Sweep {
        config: PathBuf,
        #[arg(long, env = "SHEAR_OUTPUT_DIR")]
        output_dir: Option<PathBuf>,
    },
    /// Re-run every checker on the series stored in a bundle.
    Check {
        bundle: PathBuf,
        /// Print the full summary as JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Fit a power law `c <t>^alpha` to one series column of every cell.
    Fit {
        bundle: PathBuf,
        /// Column: U1, U2, dU1, dU2, J, J1 or J2.
        #[arg(long)]
        field: SeriesField,
        /// Time window as `start,end`.
        #[arg(long, value_parser = parse_window)]
        window: (f64, f64),
        /// Restrict to one cell, e.g. `m4_s0.01`.
        #[arg(long)]
        cell: Option<String>,
    },
    /// Write SVG line plots of every series kind and of the indicator.
    Plot {
        bundle: PathBuf,
        /// Destination directory; defaults to `<bundle>/plots`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_window(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected `start,end`")?;
    let a: f64 = a.trim().parse().map_err(|e| format!("window start: {e}"))?;
    let b: f64 = b.trim().parse().map_err(|e| format!("window end: {e}"))?;
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err("window needs finite start < end".into());
    }
    Ok((a, b))
}

fn load_config(path: &Path, output_dir: Option<PathBuf>) -> Result<ExperimentConfig> {
    let mut cfg =
        ExperimentConfig::load(path).with_context(|| format!("config {}", path.display()))?;
    if let Some(dir) = output_dir {
        cfg.output_dir = dir;
    }
    Ok(cfg)
}

fn print_summary(summary: &Summary) {
    for c in &summary.cells {
        let status = match c.pass {
            Some(true) => "pass",
            Some(false) => "FAIL",
            None => "ERROR",
        };
        let inf_d = c.inf_d.map_or("-".to_string(), |d| format!("{d:.4}"));
        print!("{:<16} {status:<5} inf D = {inf_d}", c.cell);
        if !c.failed_checks.is_empty() {
            print!("  failed: {}", c.failed_checks.join(", "));
        }
        if let Some(e) = &c.error {
            print!("  error: {e}");
        }
        println!();
    }
    for s in summary.sweep_checks.iter().filter(|s| !s.pass) {
        println!(
            "sweep check {} FAILED (margin {:.3e})",
            s.check_name, s.margin
        );
    }
    println!(
        "{} cell(s), {} failed to run, {} checker failure(s)",
        summary.cells.len(),
        summary.failed_cells,
        summary.checker_failures
    );
}

fn run_and_report(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<i32> {
    let summary = harness::run_experiment(cfg, threads)?;
    print_summary(&summary);
    println!("bundle written to {}", cfg.output_dir.display());
    Ok(summary.exit_code())
}

fn fit(bundle: &Path, field: SeriesField, window: (f64, f64), only: Option<&str>) -> Result<i32> {
    let (_, cells) = harness::load_bundle(bundle)
        .with_context(|| format!("reading bundle {}", bundle.display()))?;
    let mut code = 0;
    let mut matched = false;
    println!(
        "{:<16} {:>10} {:>12} {:>10} {:>8}",
        "cell", "alpha", "log_prefac", "residual", "samples"
    );
    for c in &cells {
        let name = c.name();
        if only.is_some_and(|o| o != name) {
            continue;
        }
        matched = true;
        let r = match &c.result {
            Ok(r) => r,
            Err(e) => {
                println!("{name:<16} not run: {e}");
                code = 1;
                continue;
            }
        };
        match fit_decay(&r.series, field, window) {
            Ok(f) => println!(
                "{name:<16} {:>10.4} {:>12.4} {:>10.2e} {:>8}",
                f.alpha, f.log_prefactor, f.residual, f.samples
            ),
            Err(e) => {
                println!("{name:<16} fit failed: {e}");
                code = 1;
            }
        }
    }
    if !matched {
        bail!("no cell named {}", only.unwrap_or_default());
    }
    Ok(code)
}

fn execute(cli: Cli) -> Result<i32> {
    let threads = cli.threads;
    match cli.command {
        Command::Run {
            config,
            m,
            sigma,
            output_dir,
        } => {
            let mut cfg = load_config(&config, output_dir)?;
            let m = m
                .or(cfg.m_list.first().copied())
                .context("m_list is empty")?;
            let sigma = sigma
                .or(cfg.sigma_list.first().copied())
                .context("sigma_list is empty")?;
            cfg.m_list = vec![m];
            cfg.sigma_list = vec![sigma];
            run_and_report(&cfg, threads)
        }
        Command::Sweep { config, output_dir } => {
            run_and_report(&load_config(&config, output_dir)?, threads)
        }
        Command::Check { bundle, json } => {
            let (_, _, summary) = harness::recheck(&bundle)
                .with_context(|| format!("checking bundle {}", bundle.display()))?;
            if json {
                println!("{}", serde_json::to_string_pretty(&summary)?);
            } else {
                print_summary(&summary);
            }
            Ok(summary.exit_code())
        }
        Command::Fit {
            bundle,
            field,
            window,
            cell,
        } => fit(&bundle, field, window, cell.as_deref()),
        Command::Plot { bundle, out } => {
            let out = out.unwrap_or_else(|| bundle.join("plots"));
            for p in plot::plot_bundle(&bundle, &out)? {
                println!("{}", p.display());
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
