//! Command-line runner: loads or presets a scenario configuration, applies
//! flag overrides, dispatches Monte Carlo trials, and emits machine-readable
//! results (`ospa_mean.csv`, `report.json`, optional per-run traces).
//!
//! Exit codes: 0 on success, 1 for configuration problems (parse failures,
//! invariant violations, bad flag values), 2 for runtime failures.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use time::format_description::well_known::Rfc3339;
use time::OffsetDateTime;

use pbf_core::config::{ScenarioConfig, SCHEMA_VERSION};
use pbf_core::eval::{self, McReport, TrialRecord};
use pbf_core::smc::SupMode;

#[derive(Parser)]
#[command(
    name = "pbf",
    version,
    about = "Possibilistic Bernoulli filter: multistatic Doppler simulation runner"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run Monte Carlo trials and write results to the output directory.
    Run(RunArgs),
    /// Check a configuration file and exit.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Configuration file path, or `paper-default` for the built-in preset.
    #[arg(long, default_value = "paper-default")]
    config: String,
    /// Number of Monte Carlo runs (defaults to the config value).
    #[arg(long)]
    runs: Option<usize>,
    /// Base seed; run `i` uses seed + i (defaults to the config value).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Particle-budget override.
    #[arg(long)]
    particles: Option<usize>,
    /// Detection-possibility override `d0,d1` applied to every sensor
    /// (knowledge interval [1−d0, d1] of the detection probability).
    #[arg(long, value_name = "D0,D1", value_parser = parse_pd_interval)]
    pd_interval: Option<(f64, f64)>,
    /// Sup-approximation override: `ancestor` or `exact`.
    #[arg(long, value_parser = parse_sup_mode)]
    sup_mode: Option<SupMode>,
    /// Also write a per-step trace CSV for every run.
    #[arg(long)]
    trace: bool,
    /// Trial parallelism: 0 uses all cores, 1 runs sequentially, any other
    /// value builds a pool of that size. Results are identical either way.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Validate the effective configuration (after overrides) and exit.
    #[arg(long)]
    validate_only: bool,
}

#[derive(Args)]
struct ValidateArgs {
    /// Configuration file path, or `paper-default`.
    #[arg(long)]
    config: String,
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Runtime(String),
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(msg) => write!(f, "configuration error: {msg}"),
            Failure::Runtime(msg) => write!(f, "runtime error: {msg}"),
        }
    }
}

impl Failure {
    fn exit_code(&self) -> ExitCode {
        match self {
            Failure::Config(_) => ExitCode::from(1),
            Failure::Runtime(_) => ExitCode::from(2),
        }
    }
}

fn parse_sup_mode(s: &str) -> Result<SupMode, String> {
    match s {
        "ancestor" => Ok(SupMode::Ancestor),
        "exact" => Ok(SupMode::Exact),
        other => Err(format!("expected `ancestor` or `exact`, got `{other}`")),
    }
}

fn parse_pd_interval(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected `d0,d1`, got `{s}`"))?;
    let d0: f64 = a.trim().parse().map_err(|_| format!("bad d0 `{a}`"))?;
    let d1: f64 = b.trim().parse().map_err(|_| format!("bad d1 `{b}`"))?;
    Ok((d0, d1))
}

fn load_config(source: &str) -> Result<ScenarioConfig, Failure> {
    if source == "paper-default" {
        return Ok(ScenarioConfig::paper_default());
    }
    ScenarioConfig::from_path(source).map_err(|e| Failure::Config(format!("{source}: {e}")))
}

fn effective_config(args: &RunArgs) -> Result<ScenarioConfig, Failure> {
    let mut cfg = load_config(&args.config)?;
    if let Some(runs) = args.runs {
        cfg.runs.runs = runs;
    }
    if let Some(seed) = args.seed {
        cfg.runs.base_seed = seed;
    }
    if let Some(particles) = args.particles {
        cfg.smc.particles = particles;
    }
    if let Some((d0, d1)) = args.pd_interval {
        for s in &mut cfg.sensors {
            s.d0 = d0;
            s.d1 = d1;
        }
    }
    if let Some(mode) = args.sup_mode {
        cfg.smc.sup_mode = mode;
    }
    cfg.validate().map_err(|e| Failure::Config(e.to_string()))?;
    Ok(cfg)
}

/// 17 significant digits: enough to round-trip any f64 exactly.
fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt_state(est: &Option<pbf_core::scenario::TargetState>) -> [String; 4] {
    match est {
        Some(s) => [fmt_f64(s.x), fmt_f64(s.vx), fmt_f64(s.y), fmt_f64(s.vy)],
        None => Default::default(),
    }
}

fn ospa_csv(report: &McReport) -> String {
    let mut out = String::from("step,mean_ospa,runs_confirmed_fraction\n");
    for (i, (ospa, frac)) in report
        .mean_ospa
        .iter()
        .zip(&report.confirmed_fraction)
        .enumerate()
    {
        let _ = writeln!(out, "{},{},{}", i + 1, fmt_f64(*ospa), fmt_f64(*frac));
    }
    out
}

fn trace_csv(trial: &TrialRecord) -> String {
    let mut out = String::from(
        "step,truth_x,truth_vx,truth_y,truth_vy,scan,q0_pred,q1_pred,q0,q1,confirmed,est_x,est_vx,est_y,est_vy,ospa\n",
    );
    for s in &trial.steps {
        // Scans per sensor separated by `;`, measurements within a sensor
        // separated by spaces; empty field for an empty scan.
        let scan = s
            .scan
            .iter()
            .map(|z| z.iter().map(|&v| fmt_f64(v)).collect::<Vec<_>>().join(" "))
            .collect::<Vec<_>>()
            .join(";");
        let [ex, evx, ey, evy] = fmt_opt_state(&s.estimate);
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            s.step,
            fmt_f64(s.truth.x),
            fmt_f64(s.truth.vx),
            fmt_f64(s.truth.y),
            fmt_f64(s.truth.vy),
            scan,
            fmt_f64(s.q0_pred),
            fmt_f64(s.q1_pred),
            fmt_f64(s.q0),
            fmt_f64(s.q1),
            u8::from(s.confirmed),
            ex,
            evx,
            ey,
            evy,
            fmt_f64(s.ospa),
        );
    }
    out
}

/// Top-level result document; `generated_at` is the only field that varies
/// between identical invocations.
#[derive(Serialize)]
struct RunReport<'a> {
    schema_version: u32,
    generated_at: String,
    config: &'a ScenarioConfig,
    report: &'a McReport,
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    std::fs::write(path, contents)
        .map_err(|e| Failure::Runtime(format!("writing {}: {e}", path.display())))
}

fn run_command(args: &RunArgs) -> Result<(), Failure> {
    let cfg = effective_config(args)?;
    if args.validate_only {
        println!(
            "configuration OK ({} sensors, {} runs)",
            cfg.sensors.len(),
            cfg.runs.runs
        );
        return Ok(());
    }

    let trials = eval::run_trials(&cfg, cfg.runs.runs, cfg.runs.base_seed, args.threads)
        .map_err(|e| Failure::Runtime(e.to_string()))?;
    let report = McReport::from_trials(&trials, cfg.runs.base_seed)
        .map_err(|e| Failure::Runtime(e.to_string()))?;

    std::fs::create_dir_all(&args.out)
        .map_err(|e| Failure::Runtime(format!("creating {}: {e}", args.out.display())))?;
    write_file(&args.out.join("ospa_mean.csv"), &ospa_csv(&report))?;

    let generated_at = OffsetDateTime::now_utc()
        .format(&Rfc3339)
        .map_err(|e| Failure::Runtime(format!("formatting timestamp: {e}")))?;
    let doc = RunReport {
        schema_version: SCHEMA_VERSION,
        generated_at,
        config: &cfg,
        report: &report,
    };
    let json = serde_json::to_string_pretty(&doc)
        .map_err(|e| Failure::Runtime(format!("serialising report: {e}")))?;
    write_file(&args.out.join("report.json"), &json)?;

    if args.trace {
        for (k, trial) in trials.iter().enumerate() {
            write_file(
                &args.out.join(format!("trace_run{k}.csv")),
                &trace_csv(trial),
            )?;
        }
    }

    println!(
        "wrote {} ({} runs, establishment rate {:.2}, mean OSPA at final step {:.1} m)",
        args.out.display(),
        report.runs,
        report.establishment_rate,
        report.mean_ospa.last().copied().unwrap_or(f64::NAN),
    );
    Ok(())
}

fn validate_command(args: &ValidateArgs) -> Result<(), Failure> {
    let cfg = load_config(&args.config)?;
    cfg.validate().map_err(|e| Failure::Config(e.to_string()))?;
    println!(
        "configuration OK ({} sensors, {} runs)",
        cfg.sensors.len(),
        cfg.runs.runs
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help/--version land here too; only usage mistakes are errors.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Run(args) => run_command(args),
        Command::Validate(args) => validate_command(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("{failure}");
            failure.exit_code()
        }
    }
}
