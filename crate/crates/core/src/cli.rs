//! The `wfuse` command-line front end.
//!
//! Every command writes its outputs plus a `<command>_manifest.json` into the
//! `--out` directory. Exit codes: 0 on success, 1 on runtime failures such as
//! I/O errors, 2 on usage or validation errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::fock::w_state;
use crate::fusion::{self, ClickModel, DetectionModel, Ports};
use crate::protocol::{self, ProtocolConfig};
use crate::stats::{log_space, loglog_slope};
use crate::witness::{self, ScanOptions, StateSummary, WitnessParams};
use crate::SCHEMA_VERSION;

/// Relative standard error above which `sweep` warns about too few trials.
const STDERR_TARGET: f64 = 0.05;

#[derive(Debug, Parser)]
#[command(name = "wfuse", version, about = "W-state fusion, witnesses and protocol rates")]
pub struct Cli {
    /// Master seed; WFUSE_SEED takes precedence when set.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Protocol configuration JSON (rates, sweep).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads, defaults to the available parallelism.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Branch table and heralded state of a W_N ⊗ W_N fusion.
    Fuse(FuseArgs),
    /// Optimise and certify a witness for a measured state summary.
    Witness(WitnessArgs),
    /// Monte-Carlo and closed-form rates at a single p.
    Rates(RatesArgs),
    /// Rates over a logarithmic p grid with fitted scaling exponents.
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum PortsArg {
    One,
    Two,
}

impl From<PortsArg> for Ports {
    fn from(p: PortsArg) -> Ports {
        match p {
            PortsArg::One => Ports::One,
            PortsArg::Two => Ports::Two,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ClickArg {
    Linearized,
    Exact,
}

impl From<ClickArg> for ClickModel {
    fn from(c: ClickArg) -> ClickModel {
        match c {
            ClickArg::Linearized => ClickModel::Linearized,
            ClickArg::Exact => ClickModel::Exact,
        }
    }
}

#[derive(Debug, Args)]
pub struct FuseArgs {
    /// Size of each input W state.
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0.25)]
    pub eta: f64,
    #[arg(long, value_enum, default_value_t = PortsArg::One)]
    pub ports: PortsArg,
    #[arg(long, value_enum, default_value_t = ClickArg::Linearized)]
    pub click_model: ClickArg,
    #[arg(long, default_value_t = 1.0)]
    pub visibility: f64,
    /// With two ports, ignore which port clicked.
    #[arg(long)]
    pub sign_blind: bool,
}

#[derive(Debug, Args)]
pub struct WitnessArgs {
    /// State summary JSON with p0, p1, p2, F and optional err.
    #[arg(long)]
    pub summary: PathBuf,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub k: usize,
    /// Step of the α, β, γ scan.
    #[arg(long, default_value_t = witness::DEFAULT_SCAN_STEP)]
    pub scan_step: f64,
    /// θ grid points per axis.
    #[arg(long, default_value_t = witness::DEFAULT_GRID)]
    pub theta_grid: usize,
    #[arg(long, default_value_t = witness::DEFAULT_TOLERANCE)]
    pub tolerance: f64,
    /// Use these parameters instead of scanning, as `alpha,beta,gamma`.
    #[arg(long, value_delimiter = ',', num_args = 3)]
    pub params: Option<Vec<f64>>,
    #[arg(long, default_value_t = 10_000)]
    pub resamples: usize,
    #[arg(long, default_value_t = 50)]
    pub bins: usize,
}

#[derive(Debug, Args)]
pub struct RatesArgs {
    /// Override the configured per-attempt herald probability.
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long, default_value_t = 1_000_000)]
    pub trials: u64,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, default_value_t = 1e-4)]
    pub p_min: f64,
    #[arg(long, default_value_t = 1e-2)]
    pub p_max: f64,
    #[arg(long, default_value_t = 7)]
    pub points: usize,
    #[arg(long, default_value_t = 1_000_000)]
    pub trials: u64,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub command: String,
    pub config: Value,
    pub seed: u64,
    pub version: String,
    pub outputs: Vec<PathBuf>,
    pub wall_clock_s: f64,
}

/// Entry point used by the binary.
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 1 })
        }
    }
}

/// Executes a parsed command line.
pub fn run(mut cli: Cli) -> Result<()> {
    if let Ok(s) = std::env::var("WFUSE_SEED") {
        cli.seed = s
            .trim()
            .parse()
            .map_err(|_| Error::param("WFUSE_SEED", format!("`{s}` is not an unsigned 64-bit integer")))?;
    }
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::param("threads", "must be at least 1"));
        }
        // fails only if a pool already exists, e.g. when called twice in-process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    fs::create_dir_all(&cli.out)?;
    let start = Instant::now();
    let (name, config, outputs) = match &cli.command {
        Command::Fuse(a) => ("fuse", json!(a_fuse(a)), cmd_fuse(a, &cli.out)?),
        Command::Witness(a) => {
            let (config, outputs) = cmd_witness(a, cli.seed, &cli.out)?;
            ("witness", config, outputs)
        }
        Command::Rates(a) => {
            let cfg = load_config(cli.config.as_deref())?;
            let (config, outputs) = cmd_rates(a, cfg, cli.seed, &cli.out)?;
            ("rates", config, outputs)
        }
        Command::Sweep(a) => {
            let cfg = load_config(cli.config.as_deref())?;
            let (config, outputs) = cmd_sweep(a, cfg, cli.seed, &cli.out)?;
            ("sweep", config, outputs)
        }
    };
    let manifest = RunManifest {
        schema_version: SCHEMA_VERSION,
        command: name.to_string(),
        config,
        seed: cli.seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        outputs,
        wall_clock_s: start.elapsed().as_secs_f64(),
    };
    write_json(&cli.out.join(format!("{name}_manifest.json")), &manifest)?;
    Ok(())
}

fn a_fuse(a: &FuseArgs) -> Value {
    json!({
        "n": a.n,
        "eta": a.eta,
        "ports": Ports::from(a.ports),
        "click_model": ClickModel::from(a.click_model),
        "visibility": a.visibility,
        "sign_resolving": !a.sign_blind,
    })
}

fn load_config(path: Option<&Path>) -> Result<ProtocolConfig> {
    let cfg: ProtocolConfig = match path {
        Some(p) => serde_json::from_str(&fs::read_to_string(p)?)?,
        None => ProtocolConfig::default(),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn cmd_fuse(a: &FuseArgs, out: &Path) -> Result<Vec<PathBuf>> {
    let mut det = DetectionModel::new(a.eta)?
        .with_ports(a.ports.into())
        .with_click_model(a.click_model.into())
        .with_visibility(a.visibility);
    if a.sign_blind {
        det = det.sign_blind();
    }
    det.validate()?;
    let table = fusion::branch_table(a.n, &det)?;
    let state = fusion::conditional_fused_state(a.n, &det)?;
    let pops = state.populations();
    let vacuum = pops.p0;
    let target = w_state(2 * (a.n - 1))?;
    let fidelity = state.fidelity(&target)?;
    let herald = fusion::herald_probability(a.n, &det)?;

    let csv_path = out.join("fuse_branches.csv");
    let mut w = csv::Writer::from_path(&csv_path)?;
    w.write_record(["N", "branch", "probability_predetect", "probability_heralded", "vacuum_fraction"])?;
    for row in &table {
        w.write_record([
            a.n.to_string(),
            row.branch.name().to_string(),
            num(row.probability_predetect),
            num(row.probability_heralded),
            num(vacuum),
        ])?;
    }
    w.flush()?;

    let json_path = out.join("fuse_state.json");
    write_json(
        &json_path,
        &json!({
            "schema_version": SCHEMA_VERSION,
            "n": a.n,
            "detection": det,
            "herald_probability": herald,
            "populations": {"p0": pops.p0, "p1": pops.p1, "p2": pops.p2},
            "fidelity": fidelity,
            "vacuum_fraction": vacuum,
            "state": state,
        }),
    )?;

    println!("N = {}, herald probability = {herald:.6}", a.n);
    for row in &table {
        println!(
            "  {:<12} {:.6}  heralded {:.6}",
            row.branch.name(),
            row.probability_predetect,
            row.probability_heralded
        );
    }
    println!(
        "heralded state: p0 = {:.6}, p1 = {:.6}, p2 = {:.6}, F = {fidelity:.6}",
        pops.p0, pops.p1, pops.p2
    );
    Ok(vec![csv_path, json_path])
}

fn read_summary(path: &Path) -> Result<StateSummary> {
    let value: Value = serde_json::from_str(&fs::read_to_string(path)?)?;
    if let Some(v) = value.get("schema_version") {
        let found = v.as_u64().unwrap_or(0) as u32;
        if found != SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                expected: SCHEMA_VERSION,
                found,
            });
        }
    }
    let summary: StateSummary = serde_json::from_value(value)?;
    summary.validate()?;
    Ok(summary)
}

fn cmd_witness(a: &WitnessArgs, seed: u64, out: &Path) -> Result<(Value, Vec<PathBuf>)> {
    let summary = read_summary(&a.summary)?;
    let opts = ScanOptions {
        step: a.scan_step,
        grid_resolution: a.theta_grid,
        tolerance: a.tolerance,
    };
    let (params, certificate) = match &a.params {
        Some(v) => {
            let params = WitnessParams::new(v[0], v[1], v[2], a.n, a.k)?;
            (params, witness::is_valid_witness(&params, a.theta_grid, a.tolerance)?)
        }
        None => {
            let best = witness::optimize_witness(&summary, a.n, a.k, &opts)?;
            (best.params, best.certificate)
        }
    };
    let expectation = witness::evaluate_witness(&params, &summary);
    let distribution = match summary.err {
        Some(_) => Some(witness::witness_distribution(&params, &summary, a.resamples, seed, a.bins)?),
        None => None,
    };

    let mut outputs = Vec::new();
    let report_path = out.join("witness_report.json");
    write_json(
        &report_path,
        &json!({
            "schema_version": SCHEMA_VERSION,
            "n": a.n,
            "k": a.k,
            "summary": summary,
            "alpha": params.alpha,
            "beta": params.beta,
            "gamma": params.gamma,
            "expectation": expectation,
            "valid": certificate.valid,
            "min_value": certificate.min_value,
            "argmin": certificate.argmin,
            "negative_fraction": distribution.as_ref().map(|d| d.negative_fraction),
            "resamples": distribution.as_ref().map(|_| a.resamples),
        }),
    )?;
    outputs.push(report_path);
    if let Some(d) = &distribution {
        let path = out.join("witness_histogram.csv");
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["bin_left", "bin_right", "count"])?;
        for b in &d.histogram {
            w.write_record([num(b.left), num(b.right), b.count.to_string()])?;
        }
        w.flush()?;
        outputs.push(path);
    }

    println!(
        "witness (α, β, γ) = ({:.4}, {:.4}, {:.4}), valid = {}, min f = {:.3e}",
        params.alpha, params.beta, params.gamma, certificate.valid, certificate.min_value
    );
    println!("expectation = {expectation:.6}");
    if let Some(d) = &distribution {
        println!("negative fraction = {:.4} over {} resamples", d.negative_fraction, a.resamples);
    }
    let config = json!({
        "summary": a.summary,
        "n": a.n,
        "k": a.k,
        "scan": opts,
        "params": a.params,
        "resamples": a.resamples,
        "bins": a.bins,
    });
    Ok((config, outputs))
}

fn cmd_rates(a: &RatesArgs, mut cfg: ProtocolConfig, seed: u64, out: &Path) -> Result<(Value, Vec<PathBuf>)> {
    if let Some(p) = a.p {
        cfg.p = p;
    }
    let enhanced = protocol::simulate_memory_enhanced(&cfg, a.trials, seed)?;
    let memoryless = protocol::simulate_memoryless(&cfg, a.trials, seed ^ 1)?;
    let analytic = protocol::analytic_rates(&cfg)?;
    let path = out.join("rates.json");
    write_json(
        &path,
        &json!({
            "schema_version": SCHEMA_VERSION,
            "config": cfg,
            "trials": a.trials,
            "enhanced": enhanced,
            "memoryless": memoryless,
            "enhancement_factor": enhanced.coincidences_per_hour / memoryless.coincidences_per_hour,
            "analytic": analytic,
        }),
    )?;
    println!(
        "p = {}: enhanced {:.6e} ± {:.2e} /h (closed form {:.6e}), memoryless {:.6e} ± {:.2e} /h (closed form {:.6e})",
        cfg.p,
        enhanced.coincidences_per_hour,
        enhanced.coincidences_per_hour_stderr,
        analytic.enhanced.coincidences_per_hour,
        memoryless.coincidences_per_hour,
        memoryless.coincidences_per_hour_stderr,
        analytic.memoryless.coincidences_per_hour,
    );
    Ok((json!({"protocol": cfg, "trials": a.trials}), vec![path]))
}

fn cmd_sweep(a: &SweepArgs, cfg: ProtocolConfig, seed: u64, out: &Path) -> Result<(Value, Vec<PathBuf>)> {
    if !(a.p_min > 0.0 && a.p_min < a.p_max && a.p_max <= 1.0) {
        return Err(Error::param("p_min", format!("need 0 < p_min < p_max ≤ 1, got {} and {}", a.p_min, a.p_max)));
    }
    if a.points < 2 {
        return Err(Error::param("points", "need at least 2 points"));
    }
    let ps = log_space(a.p_min, a.p_max, a.points);
    let points = protocol::sweep(&cfg, &ps, a.trials, seed)?;

    let path = out.join("sweep.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record([
        "p",
        "rate_enhanced",
        "rate_enhanced_stderr",
        "rate_memoryless",
        "rate_memoryless_stderr",
        "enhancement_factor",
        "mean_cycle_time_s",
        "herald2_fraction",
    ])?;
    for pt in &points {
        w.write_record([
            num(pt.p),
            num(pt.enhanced.coincidences_per_hour),
            num(pt.enhanced.coincidences_per_hour_stderr),
            num(pt.memoryless.coincidences_per_hour),
            num(pt.memoryless.coincidences_per_hour_stderr),
            num(pt.enhancement_factor()),
            num(pt.enhanced.mean_cycle_time_s),
            num(pt.enhanced.herald2_success_fraction),
        ])?;
    }
    w.flush()?;

    for pt in &points {
        for (label, r) in [("enhanced", &pt.enhanced), ("memoryless", &pt.memoryless)] {
            let rel = r.coincidences_per_hour_stderr / r.coincidences_per_hour;
            if !(rel <= STDERR_TARGET) {
                eprintln!(
                    "warning: {label} rate at p = {:.3e} has relative stderr {rel:.3}; increase --trials",
                    pt.p
                );
            }
        }
    }
    let enhanced: Vec<f64> = points.iter().map(|p| p.enhanced.coincidences_per_hour).collect();
    let memoryless: Vec<f64> = points.iter().map(|p| p.memoryless.coincidences_per_hour).collect();
    println!("slope enhanced: {:.4}", loglog_slope(&ps, &enhanced));
    println!("slope memoryless: {:.4}", loglog_slope(&ps, &memoryless));

    let config = json!({
        "protocol": cfg,
        "p_min": a.p_min,
        "p_max": a.p_max,
        "points": a.points,
        "trials": a.trials,
    });
    Ok((config, vec![path]))
}
