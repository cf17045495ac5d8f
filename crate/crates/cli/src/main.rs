//! `snsqkd` command-line front end.
//!
//! Exit codes: 0 success, 1 invalid configuration or parameters, 2 an oracle
//! check failed.

mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;
use snsqkd::estimator::{analyze, BoundSet, KeyRateReport, Optimizer};
use snsqkd::oracle::{run_suite, VerifyReport};
use snsqkd::{ChannelParams, PhaseMode, SimulationResult, Simulator};

use config::ExperimentConfig;

#[derive(Debug, Parser)]
#[command(name = "snsqkd", version, about = "Sending-or-not-sending twin-field QKD simulator and analyzer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// RNG seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Phase handling: compensation or postselection; overrides the config.
    #[arg(long, global = true)]
    mode: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Monte Carlo run of the protocol; writes simulation.json and tally.csv.
    Simulate,
    /// Optimised key rate over the configured sweep; writes curve.csv.
    Curve {
        /// Add a log10(rate) column.
        #[arg(long)]
        log10: bool,
    },
    /// Optimise q, mu (and lambda) for the configured channel; writes optimize.json.
    Optimize,
    /// Run the Fock-space oracle suite; writes verify.json.
    Verify {
        /// Fock cutoff for the identity checks.
        #[arg(long)]
        cutoff: Option<usize>,
        /// Random measurement devices per intensity.
        #[arg(long)]
        trials: Option<usize>,
        /// Replace the X+ bounds with a sign-flipped variant.
        #[arg(long)]
        inject_sign_error: bool,
    },
}

/// Error carrying the process exit code.
#[derive(Debug)]
pub struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    pub fn validation(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }

    fn verification(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<snsqkd::Error> for Failure {
    fn from(e: snsqkd::Error) -> Self {
        Failure::validation(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::validation(format!("i/o: {e}"))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output = Some(out.clone());
    }
    if let Some(mode) = &cli.mode {
        let mode: PhaseMode = mode.parse()?;
        if let Some(p) = cfg.protocol.as_mut() {
            p.phase_mode = mode;
        } else if mode != PhaseMode::Compensation {
            return Err(Failure::validation("--mode needs a `protocol` section in the config"));
        }
    }
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::validation(format!("--threads: {e}")))?;
    }
    let out_dir = cfg.output.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out_dir)?;

    match cli.command {
        Command::Simulate => simulate(&cfg, &out_dir),
        Command::Curve { log10 } => curve(&cfg, &out_dir, log10),
        Command::Optimize => optimize(&cfg, &out_dir),
        Command::Verify {
            cutoff,
            trials,
            inject_sign_error,
        } => {
            if let Some(c) = cutoff {
                cfg.verify.cutoff = c;
                cfg.verify.coarse_cutoff = cfg.verify.coarse_cutoff.min(c.saturating_sub(1).max(1));
            }
            if let Some(t) = trials {
                cfg.verify.cauchy_trials = t;
            }
            cfg.verify.inject_sign_error |= inject_sign_error;
            verify(&cfg, &out_dir)
        }
    }
}

#[derive(Serialize)]
struct SimulationReport<'a> {
    config: &'a ExperimentConfig,
    result: SimulationResult,
    /// Bounds and key rate from the subset-v yields, when they are defined.
    analysis: Option<Analysis>,
}

#[derive(Serialize)]
struct Analysis {
    bounds: BoundSet,
    key_rate: KeyRateReport,
}

fn simulate(cfg: &ExperimentConfig, out: &std::path::Path) -> Result<(), Failure> {
    let params = cfg
        .protocol
        .clone()
        .ok_or_else(|| Failure::validation("`protocol` section is required for simulate"))?;
    let sim = Simulator::new(params.clone(), cfg.channel.clone(), cfg.options.clone())?;
    let result = sim.run(cfg.seed);
    let analysis = match (&result.yields, result.e_z_observed) {
        (Some(y), Some(e_z)) => analyze(y, e_z, &params, &cfg.options)
            .ok()
            .map(|(bounds, key_rate)| Analysis { bounds, key_rate }),
        _ => None,
    };
    let post = params.phase_mode == PhaseMode::PostSelection;
    output::write_tally_csv(&out.join("tally.csv"), cfg, &result.tally, post)?;
    let report = SimulationReport {
        config: cfg,
        result,
        analysis,
    };
    output::write_json(&out.join("simulation.json"), &report)?;
    if let Some(a) = &report.analysis {
        println!(
            "E_Z = {:.6}, e_ph <= {:.6}, rate = {:.6e} per window",
            a.key_rate.e_z, a.key_rate.e_ph_upper, a.key_rate.rate_per_window
        );
    }
    Ok(())
}

fn curve(cfg: &ExperimentConfig, out: &std::path::Path, log10: bool) -> Result<(), Failure> {
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Failure::validation("`sweep` section is required for curve"))?;
    if sweep.distances_km.is_empty() || sweep.e_a.is_empty() {
        return Err(Failure::validation("sweep lists must be non-empty"));
    }
    let optimizer = Optimizer::new(cfg.grid.clone(), cfg.options.clone(), cfg.n_windows());
    let mut e_as = sweep.e_a.clone();
    let mut ls = sweep.distances_km.clone();
    e_as.sort_by(f64::total_cmp);
    ls.sort_by(f64::total_cmp);
    let mut rows = Vec::new();
    for &e_a in &e_as {
        for &l in &ls {
            let mut ch = cfg.channel.clone();
            ch.distance_km = l;
            ch.e_a = e_a;
            let r = optimizer.optimize(&ch, cfg.f(), cfg.phase_mode())?;
            rows.push(output::CurveRow {
                distance_km: l,
                e_a,
                result: r,
            });
        }
    }
    output::write_curve_csv(&out.join("curve.csv"), cfg, &rows, log10)?;
    Ok(())
}

#[derive(Serialize)]
struct OptimizeReport<'a> {
    config: &'a ExperimentConfig,
    channel: &'a ChannelParams,
    result: snsqkd::OptimizeResult,
}

fn optimize(cfg: &ExperimentConfig, out: &std::path::Path) -> Result<(), Failure> {
    let optimizer = Optimizer::new(cfg.grid.clone(), cfg.options.clone(), cfg.n_windows());
    let result = optimizer.optimize(&cfg.channel, cfg.f(), cfg.phase_mode())?;
    println!(
        "q = {:.6}, mu = {:.6e}, rate = {:.6e} per window{}",
        result.q,
        result.mu,
        result.report.rate_per_window,
        if result.report.no_key { " (no key)" } else { "" }
    );
    output::write_json(
        &out.join("optimize.json"),
        &OptimizeReport {
            config: cfg,
            channel: &cfg.channel,
            result,
        },
    )?;
    Ok(())
}

fn verify(cfg: &ExperimentConfig, out: &std::path::Path) -> Result<(), Failure> {
    let report: VerifyReport = run_suite(&cfg.verify, &cfg.channel)?;
    println!("{:<58} {:>12} {:>10}  result", "check", "value", "tolerance");
    for c in &report.checks {
        println!(
            "{:<58} {:>12.3e} {:>10.1e}  {}",
            c.name,
            c.value,
            c.tolerance,
            if c.passed { "pass" } else { "FAIL" }
        );
    }
    output::write_json(&out.join("verify.json"), &report)?;
    if report.all_passed {
        Ok(())
    } else {
        let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        Err(Failure::verification(format!(
            "{} of {} checks failed, first: {}",
            failed.len(),
            report.checks.len(),
            failed[0]
        )))
    }
}
