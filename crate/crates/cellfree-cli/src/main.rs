//! Command-line front end for the cell-free uplink simulator.
//!
//! Three subcommands, all deterministic for a fixed configuration:
//!
//! * `se` — Monte Carlo spectral-efficiency campaign; writes per-sample and
//!   distribution CSVs.
//! * `fronthaul` — per-block fronthaul load of each operating mode across a
//!   grid of user counts.
//! * `complexity` — per-user multiplication counts across the same grid.
//!
//! Every run writes a `manifest.json` with the fully resolved configuration;
//! passing that manifest back through `--config` reproduces the run byte for
//! byte.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use cellfree_core::accounting::{fronthaul_scalars, mult_report, CostScheme};
use cellfree_core::assignment::assign;
use cellfree_core::topology::generate_setup;
use cellfree_core::{run_campaign, NetworkConfig, Scheme, SimError};

#[derive(Parser)]
#[command(name = "cellfree", version, about = "Uplink simulator for cell-free massive MIMO")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a spectral-efficiency campaign
    Se(SeArgs),
    /// Tabulate fronthaul load over a grid of user counts
    Fronthaul(SweepArgs),
    /// Tabulate arithmetic cost over a grid of user counts
    Complexity(SweepArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Configuration file: TOML with network keys, or a manifest.json from a
    /// previous run. Missing keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Override the configuration's random seed
    #[arg(long)]
    seed: Option<u64>,

    /// Output directory, created if missing
    #[arg(long)]
    out: PathBuf,

    /// Number of worker threads (default: all cores)
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct SeArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Comma-separated schemes to evaluate (default: all six)
    #[arg(long, value_delimiter = ',')]
    schemes: Option<Vec<String>>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Comma-separated user counts to sweep (default: 20,40,60,80,100)
    #[arg(long = "k-grid", value_delimiter = ',')]
    k_grid: Option<Vec<usize>>,
}

/// Record of a finished run: the resolved configuration plus the sweep
/// parameters, written next to the data and accepted back via `--config`.
/// Explicit flags win over manifest values, which win over built-in defaults.
#[derive(Serialize, Deserialize)]
struct Manifest {
    command: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    version: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    finished_utc: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    schemes: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    k_grid: Option<Vec<usize>>,
    config: NetworkConfig,
}

enum CliError {
    Usage(String),
    Sim(SimError),
    Io(PathBuf, std::io::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Sim(e) => write!(f, "{e}"),
            CliError::Io(path, e) => write!(f, "{}: {e}", path.display()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        CliError::Sim(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Sim(SimError::Config(_)) => 2,
            CliError::Sim(_) => 3,
            CliError::Io(..) => 4,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Se(args) => run_se(args),
        Command::Fronthaul(args) => run_sweep(args, "fronthaul"),
        Command::Complexity(args) => run_sweep(args, "complexity"),
    }
}

/// Loads the configuration, applying the seed override. A `.json` file is
/// read as a run manifest (returned alongside, so its sweep parameters can be
/// reused); anything else as TOML network keys.
fn load_config(common: &CommonArgs) -> Result<(NetworkConfig, Option<Manifest>), CliError> {
    let mut manifest = None;
    let mut cfg = match &common.config {
        None => NetworkConfig::default(),
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Io(path.clone(), e))?;
            if path.extension().is_some_and(|ext| ext == "json") {
                let parsed: Manifest = serde_json::from_str(&text).map_err(|e| {
                    CliError::Sim(SimError::Config(format!(
                        "{}: not a run manifest: {e}",
                        path.display()
                    )))
                })?;
                let cfg = parsed.config.clone();
                manifest = Some(parsed);
                cfg
            } else {
                toml::from_str(&text).map_err(|e| {
                    CliError::Sim(SimError::Config(format!("{}: {e}", path.display())))
                })?
            }
        }
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok((cfg, manifest))
}

fn install_workers(common: &CommonArgs) -> Result<(), CliError> {
    if let Some(workers) = common.workers {
        if workers == 0 {
            return Err(CliError::Usage("--workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .map_err(|e| CliError::Usage(format!("worker pool: {e}")))?;
    }
    Ok(())
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| CliError::Io(path.clone(), e))
}

fn prepare_out_dir(common: &CommonArgs) -> Result<(), CliError> {
    fs::create_dir_all(&common.out).map_err(|e| CliError::Io(common.out.clone(), e))
}

/// Fixed-width scientific float formatting: 17 significant digits, enough to
/// reproduce any f64 exactly.
fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn run_se(args: SeArgs) -> Result<(), CliError> {
    let (cfg, manifest) = load_config(&args.common)?;
    install_workers(&args.common)?;
    let names = args
        .schemes
        .or(manifest.and_then(|m| m.schemes))
        .unwrap_or_else(|| Scheme::ALL.iter().map(|s| s.name().to_string()).collect());
    let schemes: Vec<Scheme> = names
        .iter()
        .map(|s| s.parse())
        .collect::<Result<_, SimError>>()?;

    let output = run_campaign(&cfg, &schemes)?;

    let mut samples_csv = String::from("scheme,setup,ue,se\n");
    for s in &output.samples {
        samples_csv.push_str(&format!("{},{},{},{}\n", s.scheme, s.setup, s.ue, fmt_f64(s.se)));
    }
    let mut cdf_csv = String::from("scheme,se,cdf\n");
    for &scheme in &output.schemes {
        for (se, fraction) in output.cdf(scheme) {
            cdf_csv.push_str(&format!("{scheme},{},{}\n", fmt_f64(se), fmt_f64(fraction)));
        }
    }
    let manifest = stamped_manifest(Manifest {
        command: "se".into(),
        version: String::new(),
        finished_utc: String::new(),
        schemes: Some(output.schemes.iter().map(|s| s.name().to_string()).collect()),
        k_grid: None,
        config: cfg,
    });

    prepare_out_dir(&args.common)?;
    write_file(&args.common.out, "se_samples.csv", &samples_csv)?;
    write_file(&args.common.out, "se_cdf.csv", &cdf_csv)?;
    write_manifest(&args.common.out, &manifest)
}

/// Shared driver for the fronthaul and complexity sweeps: both walk the same
/// user-count grid and average per-setup counts over the configured number of
/// setups.
fn run_sweep(args: SweepArgs, what: &str) -> Result<(), CliError> {
    let (base, manifest) = load_config(&args.common)?;
    install_workers(&args.common)?;
    let k_grid = args
        .k_grid
        .or(manifest.and_then(|m| m.k_grid))
        .unwrap_or_else(|| vec![20, 40, 60, 80, 100]);
    if k_grid.is_empty() {
        return Err(CliError::Usage("--k-grid needs at least one user count".into()));
    }

    let (header, file_name) = match what {
        "fronthaul" => ("scheme,k,mean_scalars\n", "fronthaul.csv"),
        _ => ("scheme,k,mean_mults\n", "complexity.csv"),
    };
    let mut rows: Vec<(CostScheme, usize, f64)> = Vec::new();
    for &k in &k_grid {
        let cfg = NetworkConfig { ue_count: k, ..base.clone() };
        cfg.validate()?;
        let mut totals = [0.0f64; 4];
        let mut samples = [0usize; 4];
        for setup in 0..cfg.num_setups as u64 {
            let (_, stats) = generate_setup(&cfg, setup)?;
            let assignment = assign(&stats, &cfg)?;
            for (i, &scheme) in CostScheme::ALL.iter().enumerate() {
                if what == "fronthaul" {
                    totals[i] += fronthaul_scalars(scheme, &assignment, &cfg) as f64;
                    samples[i] += 1;
                } else {
                    for m in mult_report(scheme, &assignment, &cfg) {
                        totals[i] += m as f64;
                        samples[i] += 1;
                    }
                }
            }
        }
        for (i, &scheme) in CostScheme::ALL.iter().enumerate() {
            rows.push((scheme, k, totals[i] / samples[i] as f64));
        }
    }
    // Scheme-major output to match the spectral-efficiency files.
    rows.sort_by_key(|&(scheme, k, _)| (scheme.name(), k));

    let mut csv = String::from(header);
    for (scheme, k, mean) in rows {
        csv.push_str(&format!("{scheme},{k},{}\n", fmt_f64(mean)));
    }
    let manifest = stamped_manifest(Manifest {
        command: what.into(),
        version: String::new(),
        finished_utc: String::new(),
        schemes: None,
        k_grid: Some(k_grid),
        config: base,
    });

    prepare_out_dir(&args.common)?;
    write_file(&args.common.out, file_name, &csv)?;
    write_manifest(&args.common.out, &manifest)
}

/// Fills in the build/run metadata fields. Only the data files are promised
/// to be byte-identical across reruns; the manifest carries a timestamp.
fn stamped_manifest(mut manifest: Manifest) -> Manifest {
    manifest.version = env!("CARGO_PKG_VERSION").to_string();
    manifest.finished_utc =
        humantime::format_rfc3339_seconds(std::time::SystemTime::now()).to_string();
    manifest
}

fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<(), CliError> {
    let json = serde_json::to_string_pretty(manifest)
        .expect("manifest serialization cannot fail") + "\n";
    write_file(dir, "manifest.json", &json)
}
