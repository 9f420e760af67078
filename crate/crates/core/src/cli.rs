//! Command-line front end.
//!
//! Every command that writes `<out>` also writes `<out>.meta.json` holding
//! the resolved configuration under `resolved_config`; feeding that file back
//! through `--config` reproduces the outputs.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::estimator::TruncationRule;
use crate::experiments::{
    diagnostic_paths, emit_diagnostics, run_consistency_experiment, run_discretization_sweep,
    write_table_csv, ExceedanceTable, ExperimentConfig,
};
use crate::pipeline::{
    forecast_station, load_station_csv, synthetic_station, write_errors_csv, write_predictions_csv,
    write_station_csv, ForecastConfig, SyntheticStationConfig,
};
use crate::procgen::{simulate, ModelConfig, SineSynthesis};

#[derive(Debug, Parser)]
#[command(name = "arbx", version, about = "ARBX(1) simulation, estimation and forecasting")]
struct Cli {
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON configuration (or a previous run's .meta.json).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one trajectory and write its curves.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Trajectory length.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Exceedance table across sample sizes.
    Experiment {
        #[command(flatten)]
        common: Common,
        /// Run a single sample size.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        rule: Option<TruncationRule>,
    },
    /// Exceedance table across discretization steps.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        rule: Option<TruncationRule>,
    },
    /// L_k and consistency-ratio series.
    Diagnostics {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        rule: Option<TruncationRule>,
    },
    /// LOOCV errors and the plug-in forecast for one station.
    Forecast {
        #[command(flatten)]
        common: Common,
        /// Station CSV.
        #[arg(long)]
        station: Option<PathBuf>,
        #[arg(long)]
        rule: Option<TruncationRule>,
    },
    /// Check a configuration file without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
        /// Also build the model and test stationarity.
        #[arg(long)]
        stationarity: bool,
    },
    /// Write a synthetic station CSV.
    SynthStation {
        #[command(flatten)]
        common: Common,
    },
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or("ARBX_LOG", "warn"))
        .format_timestamp(None)
        .try_init();
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error[{}]: {}", e.category(), e);
            1
        }
    }
}

fn execute(cli: Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Error::Config("--threads must be positive".into()));
        }
        // a pool may already exist when run() is called twice in-process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let threads = rayon::current_num_threads();
    match cli.command {
        Command::Simulate { common, n } => cmd_simulate(common, n, threads),
        Command::Experiment { common, n, rule } => cmd_table(common, n, rule, threads, false),
        Command::Sweep { common, n, rule } => cmd_table(common, n, rule, threads, true),
        Command::Diagnostics { common, rule } => cmd_diagnostics(common, rule, threads),
        Command::Forecast {
            common,
            station,
            rule,
        } => cmd_forecast(common, station, rule, threads),
        Command::Validate {
            config,
            stationarity,
        } => cmd_validate(&config, stationarity),
        Command::SynthStation { common } => cmd_synth(common, threads),
    }
}

fn read_json(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut v: Value = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    if let Some(inner) = v.get_mut("resolved_config") {
        v = inner.take();
    }
    Ok(v)
}

fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => serde_json::from_value(read_json(p)?)
            .map_err(|e| Error::Config(format!("{}: {e}", p.display()))),
    }
}

fn meta_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

fn write_meta(out: &Path, command: &str, seed: u64, threads: usize, config: &impl Serialize, summary: Value) -> Result<()> {
    let meta = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "seed": seed,
        "threads": threads,
        "resolved_config": config,
        "summary": summary,
    });
    let path = meta_path(out);
    let text = serde_json::to_string_pretty(&meta)? + "\n";
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => {
            std::fs::create_dir_all(p).map_err(|e| Error::io(p, e))
        }
        _ => Ok(()),
    }
}

/// Trajectory length, seed and model of `simulate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub model: ModelConfig,
    pub n: usize,
    pub seed: u64,
    pub output_path: String,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            n: 1000,
            seed: 0,
            output_path: "trajectory.csv".into(),
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SimulateInput {
    Full(SimulateConfig),
    Model(ModelConfig),
}

fn cmd_simulate(common: Common, n: Option<usize>, threads: usize) -> Result<()> {
    let mut config = match &common.config {
        None => SimulateConfig::default(),
        Some(p) => {
            let v = read_json(p)?;
            match serde_json::from_value::<SimulateInput>(v) {
                Ok(SimulateInput::Full(c)) => c,
                Ok(SimulateInput::Model(model)) => SimulateConfig {
                    model,
                    ..SimulateConfig::default()
                },
                Err(_) => {
                    return Err(Error::Config(format!(
                        "{}: neither a simulation nor a model configuration",
                        p.display()
                    )))
                }
            }
        }
    };
    if let Some(n) = n {
        config.n = n;
    }
    if let Some(s) = common.seed {
        config.seed = s;
    }
    if let Some(o) = &common.out {
        config.output_path = o.to_string_lossy().into_owned();
    }
    let spec = config.model.build()?;
    let traj = simulate(&spec, config.n, config.model.burn_in, config.seed)?;
    let out = PathBuf::from(&config.output_path);
    ensure_parent(&out)?;
    let syn = SineSynthesis::new(traj.grid(), traj.truncation());
    let file = std::fs::File::create(&out).map_err(|e| Error::io(&out, e))?;
    let mut w = std::io::BufWriter::new(file);
    let io = |e| Error::io(&out, e);
    writeln!(w, "t,component,x,value").map_err(io)?;
    let xs = traj.grid().abscissae();
    let m = traj.truncation();
    // t = 0 is the state preceding the sample
    for t in 0..=traj.len() {
        let row: Vec<f64> = if t == 0 {
            traj.initial_coefficients().iter().copied().collect()
        } else {
            traj.coefficients().row(t - 1).iter().copied().collect()
        };
        for c in 0..spec.b() + 1 {
            let coeffs = &row[c * m..(c + 1) * m];
            let curve = syn.curve(coeffs);
            for (x, v) in xs.iter().zip(curve.values()) {
                writeln!(w, "{t},{c},{x},{v}").map_err(io)?;
            }
        }
    }
    w.flush().map_err(io)?;
    let summary = json!({
        "states": traj.len(),
        "grid_points": traj.grid().len(),
        "innovation_clipped_mass": spec.innovation_covariance().clipped_mass(),
        "innovation_raw_min_eigenvalue": spec.innovation_covariance().raw_min_eigenvalue(),
        "stationarity": spec.stationarity(),
    });
    write_meta(&out, "simulate", config.seed, threads, &config, summary)?;
    println!("wrote {} states to {}", traj.len(), out.display());
    Ok(())
}

fn resolve_experiment(common: &Common, n: Option<usize>, rule: Option<TruncationRule>) -> Result<ExperimentConfig> {
    let mut config: ExperimentConfig = load_config(common.config.as_deref())?;
    if let Some(n) = n {
        config.sample_sizes = vec![n];
    }
    if let Some(r) = rule {
        config.truncation_rule = r;
    }
    if let Some(s) = common.seed {
        config.rng_seed = s;
    }
    if let Some(o) = &common.out {
        config.output_path = o.to_string_lossy().into_owned();
    }
    Ok(config)
}

fn print_table(table: &ExceedanceTable) {
    println!("n,delta_h,gamma_family,exceed,total,pct");
    for r in &table.rows {
        println!("{},{},{},{},{},{}", r.n, r.delta_h, r.gamma_family, r.exceed, r.total, r.pct);
    }
}

fn cmd_table(common: Common, n: Option<usize>, rule: Option<TruncationRule>, threads: usize, sweep: bool) -> Result<()> {
    let config = resolve_experiment(&common, n, rule)?;
    let table = if sweep {
        run_discretization_sweep(&config)?
    } else {
        run_consistency_experiment(&config)?
    };
    let out = PathBuf::from(&config.output_path);
    ensure_parent(&out)?;
    write_table_csv(&table, &out)?;
    let summary = json!({ "cells": table.cells, "skipped": table.skipped });
    let name = if sweep { "sweep" } else { "experiment" };
    write_meta(&out, name, config.rng_seed, threads, &config, summary)?;
    print_table(&table);
    Ok(())
}

fn cmd_diagnostics(common: Common, rule: Option<TruncationRule>, threads: usize) -> Result<()> {
    let config = resolve_experiment(&common, None, rule)?;
    let out = PathBuf::from(&config.output_path);
    ensure_parent(&out)?;
    let d = emit_diagnostics(&config, &out)?;
    let (a3, ratio) = diagnostic_paths(&out);
    let summary = json!({
        "a3_series": a3.to_string_lossy(),
        "ratio_series": ratio.to_string_lossy(),
        "a3_points": d.a3.len(),
        "ratio_points": d.ratio.len(),
    });
    write_meta(&out, "diagnostics", config.rng_seed, threads, &config, summary)?;
    println!("wrote {} and {}", a3.display(), ratio.display());
    Ok(())
}

fn cmd_forecast(common: Common, station: Option<PathBuf>, rule: Option<TruncationRule>, threads: usize) -> Result<()> {
    let mut config: ForecastConfig = load_config(common.config.as_deref())?;
    if let Some(s) = station {
        config.station = Some(s.to_string_lossy().into_owned());
    }
    if let Some(r) = rule {
        config.rules = vec![r];
    }
    let path = config
        .station
        .clone()
        .ok_or_else(|| Error::Config("no station file (use --station)".into()))?;
    let series = load_station_csv(Path::new(&path))?;
    let report = forecast_station(&series, &config)?;
    let out = common
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}_forecast.csv", report.station)));
    ensure_parent(&out)?;
    write_predictions_csv(&report, &out)?;
    let errors_path = errors_path(&out);
    write_errors_csv(&report, &errors_path)?;
    let summary = json!({
        "errors": report.errors,
        "errors_csv": errors_path.to_string_lossy(),
        "fold_truncation": report
            .fold_truncation
            .iter()
            .map(|(r, k)| json!({"rule": r.name(), "k_n": k}))
            .collect::<Vec<_>>(),
        "prediction_rule": report.prediction_rule.name(),
        "prediction_k": report.prediction_k,
        "months": report.months,
        "imputed": report.imputed,
    });
    write_meta(&out, "forecast", 0, threads, &config, summary)?;
    for r in &report.errors {
        println!("{} {} E = {}", r.station, r.truncation_rule, r.e);
    }
    Ok(())
}

/// `<dir>/<stem>_errors.csv` beside the predictions file.
pub fn errors_path(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "forecast".into());
    out.parent()
        .unwrap_or_else(|| Path::new(""))
        .join(format!("{stem}_errors.csv"))
}

/// Checks of one configuration file; empty `failures` means it passes.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub kind: &'static str,
    pub failures: Vec<String>,
    pub notes: Vec<String>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum AnyConfig {
    Experiment(ExperimentConfig),
    Model(ModelConfig),
    Forecast(ForecastConfig),
    Simulate(SimulateConfig),
    Synthetic(SyntheticStationConfig),
}

pub fn validate_config(path: &Path, stationarity: bool) -> Result<ValidationReport> {
    let v = read_json(path)?;
    let parsed: AnyConfig = serde_json::from_value(v).map_err(|_| {
        Error::Config(format!(
            "{}: not a model, experiment, forecast or synthetic-station configuration",
            path.display()
        ))
    })?;
    let (kind, failures, model) = match parsed {
        AnyConfig::Experiment(c) => ("experiment", c.violations(), Some(c.model.clone())),
        AnyConfig::Forecast(c) => ("forecast", c.violations(), None),
        AnyConfig::Simulate(c) => ("simulate", c.model.violations(), Some(c.model)),
        AnyConfig::Model(c) => ("model", c.violations(), Some(c)),
        AnyConfig::Synthetic(c) => {
            let failures = synthetic_station(&c).err().map(|e| e.to_string()).into_iter().collect();
            ("synthetic station", failures, None)
        }
    };
    let mut report = ValidationReport {
        kind,
        failures,
        notes: Vec::new(),
    };
    if stationarity && report.failures.is_empty() {
        if let Some(m) = model {
            let spec = m.build()?;
            match spec.stationarity().j0 {
                Some(j0) => report.notes.push(format!("stationarity: norm of power {j0} below one")),
                None => report
                    .failures
                    .push("stationarity: no power up to 20 has norm below one".into()),
            }
            report.notes.push(format!(
                "innovation covariance clipped mass {:e} (raw minimum eigenvalue {:e})",
                spec.innovation_covariance().clipped_mass(),
                spec.innovation_covariance().raw_min_eigenvalue()
            ));
        }
    }
    Ok(report)
}

fn cmd_validate(path: &Path, stationarity: bool) -> Result<()> {
    let report = validate_config(path, stationarity)?;
    for f in &report.failures {
        println!("FAIL {f}");
    }
    for n in &report.notes {
        println!("note {n}");
    }
    if report.failures.is_empty() {
        println!("PASS {} configuration {}", report.kind, path.display());
        Ok(())
    } else {
        Err(Error::Config(format!(
            "{} invariant(s) violated in {}",
            report.failures.len(),
            path.display()
        )))
    }
}

fn cmd_synth(common: Common, threads: usize) -> Result<()> {
    let mut config: SyntheticStationConfig = load_config(common.config.as_deref())?;
    if let Some(s) = common.seed {
        config.seed = s;
    }
    let series = synthetic_station(&config)?;
    let out = common
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}.csv", config.station_id)));
    ensure_parent(&out)?;
    write_station_csv(&series, &out)?;
    let summary = json!({ "days": series.len(), "missing": series.missing_count() });
    write_meta(&out, "synth-station", config.seed, threads, &config, summary)?;
    println!("wrote {} days to {}", series.len(), out.display());
    Ok(())
}
