//! `nbody` — run direct-summation N-body simulations, benchmark sweeps and
//! performance-model predictions, emitting plot-ready CSV.
//!
//! Exit status: 0 on success, 1 on runtime failure (e.g. a collapsing time
//! step or I/O error), 2 on usage errors.

mod config_file;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use nbody_core::config::{Backend, SimConfig};
use nbody_core::diagnostics::{fit_power_law, measure_run, RunStatistics};
use nbody_core::error::Error as CoreError;
use nbody_core::hermite;
use nbody_core::perf::{self, ScenarioFlags};
use nbody_core::plummer::{generate_plummer, PlummerParams};
use nbody_core::snapshot;

/// Column set shared by every statistics CSV writer, in this exact order.
const STATS_COLUMNS: &str = "impl,N,wall_seconds,wall_seconds_x4,n_steps,mean_block_size,\
pairwise_interactions,bytes_sent,bytes_received,energy_error";

const MODEL_COLUMNS: &str =
    "profile,scenario,N,n_block,n_steps,t_pred_corr,t_force,t_comm,t_step,total_seconds,\
measured_x4,status";

#[derive(Parser)]
#[command(name = "nbody", version, about = "Direct-summation N-body runs and performance modelling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write a final snapshot plus a one-row stats CSV.
    Run(RunArgs),
    /// Sweep over particle counts, appending stats rows and power-law fits.
    Bench(BenchArgs),
    /// Evaluate the analytic performance model over a range of N.
    Model(ModelArgs),
}

#[derive(Args)]
struct CommonSimArgs {
    /// Particle count for generated initial conditions.
    #[arg(long)]
    n: Option<usize>,
    /// PRNG seed; all randomness in the toolchain flows from it.
    #[arg(long)]
    seed: Option<u64>,
    /// Force backend: ref64 or stream32.
    #[arg(long)]
    backend: Option<String>,
    /// Accumulate force contributions smallest-first.
    #[arg(long)]
    sorted_accumulation: bool,
    /// Softening length.
    #[arg(long)]
    eps: Option<f64>,
    /// Aarseth time-step accuracy parameter.
    #[arg(long)]
    eta: Option<f64>,
    /// Maximum (power-of-two) time step.
    #[arg(long)]
    dt_max: Option<f64>,
    /// End time of the run.
    #[arg(long)]
    t_end: Option<f64>,
    /// Start of the measurement window.
    #[arg(long)]
    measure_from: Option<f64>,
    /// Flat key=value config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonSimArgs,
    /// Start from this snapshot instead of generating initial conditions.
    #[arg(long)]
    snapshot: Option<PathBuf>,
    /// Output stem: writes <out>.snap.txt and <out>.csv.
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    common: CommonSimArgs,
    /// Comma-separated particle counts, ascending.
    #[arg(long)]
    n_list: Option<String>,
    /// Sweep CSV path; fits land next to it in <stem>_fits.csv.
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct ModelArgs {
    /// Hardware profile: grape6af, 8800gtx, fx1400, xeon, or all.
    #[arg(long)]
    profile: Option<String>,
    /// Single particle count.
    #[arg(long)]
    n: Option<u64>,
    /// Comma-separated particle counts.
    #[arg(long)]
    n_list: Option<String>,
    /// Comma-separated scenario flags: block-only, host-free, fe1.
    #[arg(long)]
    scenario: Option<String>,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<String>,
    /// Flat key=value config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
}

enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

fn runtime(err: CoreError) -> CliError {
    CliError::Runtime(err.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Model(args) => cmd_model(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let (tag, msg) = match &err {
                CliError::Usage(m) => ("usage error", m),
                CliError::Runtime(m) => ("error", m),
            };
            eprintln!("nbody: {tag}: {msg}");
            ExitCode::from(err.exit_code())
        }
    }
}

/// One resolved option: command line beats config file beats default.
fn resolve<T: FromStr>(
    flag: Option<T>,
    cfg: &BTreeMap<String, String>,
    key: &str,
    default: T,
) -> Result<T, CliError> {
    if let Some(v) = flag {
        return Ok(v);
    }
    match cfg.get(key) {
        Some(raw) => raw
            .parse()
            .map_err(|_| CliError::Usage(format!("config key {key}: cannot parse \"{raw}\""))),
        None => Ok(default),
    }
}

fn load_config(path: &Option<PathBuf>) -> Result<BTreeMap<String, String>, CliError> {
    match path {
        Some(p) => config_file::load(p).map_err(CliError::Usage),
        None => Ok(BTreeMap::new()),
    }
}

const KNOWN_KEYS: &[&str] = &[
    "n",
    "n-list",
    "seed",
    "backend",
    "sorted-accumulation",
    "eps",
    "eta",
    "dt-max",
    "t-end",
    "measure-from",
    "snapshot",
    "out",
    "profile",
    "scenario",
];

fn reject_unknown_keys(cfg: &BTreeMap<String, String>) -> Result<(), CliError> {
    for key in cfg.keys() {
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(CliError::Usage(format!("unknown config key \"{key}\"")));
        }
    }
    Ok(())
}

struct ResolvedSim {
    cfg: SimConfig,
    n: usize,
    backend_label: &'static str,
}

fn resolve_sim(common: &CommonSimArgs, cfg_map: &BTreeMap<String, String>) -> Result<ResolvedSim, CliError> {
    let defaults = SimConfig::default();
    let mut cfg = SimConfig::default();

    let backend_str = resolve(common.backend.clone(), cfg_map, "backend", "ref64".to_string())?;
    cfg.backend = Backend::from_str(&backend_str).map_err(CliError::Usage)?;
    let backend_label = match cfg.backend {
        Backend::Reference64 => "ref64",
        Backend::Stream32 => "stream32",
    };

    let eps = resolve(common.eps, cfg_map, "eps", defaults.eps)?;
    cfg.set_eps(eps);
    cfg.eta = resolve(common.eta, cfg_map, "eta", defaults.eta)?;
    cfg.dt_max = resolve(common.dt_max, cfg_map, "dt-max", defaults.dt_max)?;
    cfg.t_end = resolve(common.t_end, cfg_map, "t-end", defaults.t_end)?;
    cfg.measure_from = resolve(common.measure_from, cfg_map, "measure-from", defaults.measure_from)?;
    cfg.seed = resolve(common.seed, cfg_map, "seed", defaults.seed)?;
    cfg.sorted_accumulation = if common.sorted_accumulation {
        true
    } else {
        resolve(None, cfg_map, "sorted-accumulation", false)?
    };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;

    let n = resolve(common.n, cfg_map, "n", 256usize)?;
    Ok(ResolvedSim { cfg, n, backend_label })
}

fn stats_csv_row(impl_name: &str, n: usize, stats: &RunStatistics) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{}",
        impl_name,
        n,
        stats.wall_seconds,
        4.0 * stats.wall_seconds,
        stats.n_steps_total,
        stats.mean_block_size(),
        stats.pairwise_interactions,
        stats.bytes_sent,
        stats.bytes_received,
        stats.energy_error,
    )
}

fn cmd_run(args: RunArgs) -> Result<(), CliError> {
    let cfg_map = load_config(&args.common.config)?;
    reject_unknown_keys(&cfg_map)?;
    let resolved = resolve_sim(&args.common, &cfg_map)?;
    let out_stem = resolve(args.out.clone(), &cfg_map, "out", "run_out".to_string())?;
    let snapshot_path = args.snapshot.clone().or_else(|| cfg_map.get("snapshot").map(PathBuf::from));

    let mut sys = match &snapshot_path {
        Some(path) => snapshot::read_snapshot_file(path).map_err(runtime)?,
        None => {
            if resolved.n < 2 {
                return Err(CliError::Usage(format!(
                    "a system needs at least 2 particles, got {}",
                    resolved.n
                )));
            }
            generate_plummer(&PlummerParams::new(resolved.n, resolved.cfg.seed)).map_err(runtime)?
        }
    };

    let stats = hermite::run(&mut sys, &resolved.cfg, &mut []).map_err(runtime)?;

    let snap_path = PathBuf::from(format!("{out_stem}.snap.txt"));
    snapshot::write_snapshot_file(&snap_path, &sys).map_err(runtime)?;
    let csv_path = PathBuf::from(format!("{out_stem}.csv"));
    let mut csv = String::new();
    csv.push_str(STATS_COLUMNS);
    csv.push('\n');
    csv.push_str(&stats_csv_row(resolved.backend_label, sys.len(), &stats));
    csv.push('\n');
    std::fs::write(&csv_path, csv).map_err(|e| CliError::Runtime(e.to_string()))?;

    println!(
        "N = {}  backend = {}  energy_error = {:e}  wall_seconds = {:.6}  (window [{}, {}])",
        sys.len(),
        resolved.backend_label,
        stats.energy_error,
        stats.wall_seconds,
        resolved.cfg.measure_from,
        resolved.cfg.t_end,
    );
    println!("wrote {} and {}", snap_path.display(), csv_path.display());
    Ok(())
}

fn parse_n_list(spec: &str) -> Result<Vec<usize>, CliError> {
    let mut out = Vec::new();
    for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let n: usize =
            item.parse().map_err(|_| CliError::Usage(format!("bad particle count \"{item}\"")))?;
        out.push(n);
    }
    if out.is_empty() {
        return Err(CliError::Usage("empty particle-count list".into()));
    }
    if out.windows(2).any(|w| w[0] >= w[1]) || out[0] < 2 {
        return Err(CliError::Usage("particle counts must be ascending and >= 2".into()));
    }
    Ok(out)
}

fn fits_path(out: &str) -> String {
    match out.strip_suffix(".csv") {
        Some(stem) => format!("{stem}_fits.csv"),
        None => format!("{out}_fits.csv"),
    }
}

fn cmd_bench(args: BenchArgs) -> Result<(), CliError> {
    let cfg_map = load_config(&args.common.config)?;
    reject_unknown_keys(&cfg_map)?;
    let resolved = resolve_sim(&args.common, &cfg_map)?;
    let n_list_spec =
        resolve(args.n_list.clone(), &cfg_map, "n-list", "256,512,1024,2048,4096".to_string())?;
    let n_list = parse_n_list(&n_list_spec)?;
    let out = resolve(args.out.clone(), &cfg_map, "out", "bench.csv".to_string())?;

    let mut file = std::io::BufWriter::new(
        std::fs::File::create(&out).map_err(|e| CliError::Runtime(e.to_string()))?,
    );
    writeln!(file, "{STATS_COLUMNS}").map_err(|e| CliError::Runtime(e.to_string()))?;

    let mut block_samples = Vec::new();
    let mut step_samples = Vec::new();
    for &n in &n_list {
        let params = PlummerParams::new(n, resolved.cfg.seed);
        // A failing N aborts the sweep; rows written so far stay on disk.
        let stats = measure_run(&resolved.cfg, &params).map_err(runtime)?;
        writeln!(file, "{}", stats_csv_row(resolved.backend_label, n, &stats))
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        file.flush().map_err(|e| CliError::Runtime(e.to_string()))?;
        eprintln!(
            "N = {n}: {} block steps, mean block {:.2}, energy error {:e}",
            stats.n_steps_total,
            stats.mean_block_size(),
            stats.energy_error
        );
        block_samples.push((n as f64, stats.mean_block_size()));
        // The window covers a quarter time unit; x4 converts to the
        // steps-per-time-unit convention of the fitted law.
        step_samples.push((n as f64, 4.0 * stats.n_steps_total as f64));
    }

    let fits = fits_path(&out);
    let mut fit_file = std::fs::File::create(&fits).map_err(|e| CliError::Runtime(e.to_string()))?;
    writeln!(fit_file, "quantity,prefactor,exponent,residual_rms,n_samples")
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    for (name, samples) in [("mean_block_size", &block_samples), ("n_steps_per_unit", &step_samples)] {
        let fit = fit_power_law(samples).map_err(runtime)?;
        writeln!(
            fit_file,
            "{},{},{},{},{}",
            name,
            fit.prefactor,
            fit.exponent,
            fit.residual_rms(),
            fit.sample_points.len()
        )
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    eprintln!("wrote {out} and {fits}");
    Ok(())
}

fn cmd_model(args: ModelArgs) -> Result<(), CliError> {
    let cfg_map = load_config(&args.config)?;
    reject_unknown_keys(&cfg_map)?;
    let profile_spec = resolve(args.profile.clone(), &cfg_map, "profile", "all".to_string())?;
    let scenario_spec = resolve(args.scenario.clone(), &cfg_map, "scenario", String::new())?;
    let scenario = ScenarioFlags::parse(&scenario_spec).map_err(|e| CliError::Usage(e.to_string()))?;

    let profiles = if profile_spec == "all" {
        perf::builtin_profiles()
    } else {
        vec![perf::profile_by_id(&profile_spec)
            .ok_or_else(|| CliError::Usage(format!("unknown profile \"{profile_spec}\"")))?]
    };

    let n_list: Vec<u64> = if let Some(n) = args.n {
        vec![n]
    } else {
        let spec = resolve(
            args.n_list.clone(),
            &cfg_map,
            "n-list",
            "256,512,1024,2048,4096,8192,16384,32768,65536,131072,262144,524288".to_string(),
        )?;
        parse_n_list(&spec)?.into_iter().map(|n| n as u64).collect()
    };

    let table2 = perf::table2_reference();
    let mut out: Box<dyn Write> = match &args.out {
        Some(path) => Box::new(std::io::BufWriter::new(
            std::fs::File::create(path).map_err(|e| CliError::Runtime(e.to_string()))?,
        )),
        None => Box::new(std::io::stdout().lock()),
    };
    writeln!(out, "{MODEL_COLUMNS}").map_err(|e| CliError::Runtime(e.to_string()))?;

    for profile in &profiles {
        for &n in &n_list {
            let measured: String = table2
                .iter()
                .find(|c| c.hardware == profile.name && c.n == n)
                .map(|c| (4.0 * c.quarter_unit_seconds).to_string())
                .unwrap_or_default();
            let line = match perf::predict(profile, n, scenario) {
                Ok(p) => format!(
                    "{},{},{},{},{},{},{},{},{},{},{},ok",
                    profile.name,
                    scenario.label(),
                    n,
                    p.n_block,
                    p.n_steps,
                    p.t_pred_corr,
                    p.t_force,
                    p.t_comm,
                    p.t_step,
                    p.total_seconds,
                    measured,
                ),
                Err(CoreError::OverCapacity { .. }) => format!(
                    "{},{},{},,,,,,,,{},over-capacity",
                    profile.name,
                    scenario.label(),
                    n,
                    measured,
                ),
                Err(other) => return Err(CliError::Usage(other.to_string())),
            };
            writeln!(out, "{line}").map_err(|e| CliError::Runtime(e.to_string()))?;
        }
    }
    if let Some(path) = &args.out {
        eprintln!("wrote {path}");
    }
    Ok(())
}
