//! Command-line driver for the channel simulator.
//!
//! Exit status: 0 success, 1 invalid input, 2 numerical failure, 3 failed
//! cross-validation.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use gbsm_core::antenna::PolarizationConfig;
use gbsm_core::experiments::{
    aoa_table, capacity_table, cross_table, cross_validate, demo_path, motion_table,
    run_aoa_map, run_capacity_sweep, run_motion_demo, run_stcf_sweep, stcf_table,
};
use gbsm_core::scenario::{load_scenario, ScenarioConfig};
use gbsm_core::table::Table;
use gbsm_core::{Error, Result};

#[derive(Parser)]
#[command(name = "gbsm", version, about = "Polarized MIMO channel simulator with moving scatterer clusters")]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory; CSV goes to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Parses and validates a scenario.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Correlation over time and element spacing.
    Stcf {
        #[command(flatten)]
        common: Common,
        /// Times in seconds, comma separated.
        #[arg(long, value_delimiter = ',')]
        times: Option<Vec<f64>>,
        /// Receive spacings in wavelengths.
        #[arg(long, value_delimiter = ',')]
        spacings: Option<Vec<f64>>,
        /// Transmit spacings in wavelengths.
        #[arg(long, value_delimiter = ',')]
        tx_spacings: Option<Vec<f64>>,
        /// Polarization labels (presets or custom labels from the scenario).
        #[arg(long, value_delimiter = ',')]
        polarizations: Option<Vec<String>>,
    },
    /// Ergodic capacity over time and SNR.
    Capacity {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        times: Option<Vec<f64>>,
        /// Reference SNRs in dB.
        #[arg(long, value_delimiter = ',')]
        snrs: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        polarizations: Option<Vec<String>>,
        /// Channel draws per row.
        #[arg(long)]
        draws: Option<usize>,
    },
    /// Receive-side angle-of-arrival density maps.
    AoaMap {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        times: Option<Vec<f64>>,
        /// Elevation grid points (poles included).
        #[arg(long, default_value_t = 37)]
        n_theta: usize,
        /// Azimuth grid points.
        #[arg(long, default_value_t = 72)]
        n_phi: usize,
    },
    /// Sample paths of the heaviest moving receive cluster.
    MotionDemo {
        #[command(flatten)]
        common: Common,
        /// Random paths in addition to the noise-free path 0.
        #[arg(long, default_value_t = 10)]
        paths: usize,
    },
    /// Quadrature against sampled scatterers, entry by entry.
    CrossValidate {
        #[command(flatten)]
        common: Common,
        /// Scatterers drawn per side.
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        /// Overrides the Gauss-Legendre node count (disables refinement).
        #[arg(long)]
        n_theta: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        polarizations: Option<Vec<String>>,
        #[arg(long, default_value_t = 0.0)]
        time: f64,
    },
}

enum Outcome {
    Done,
    CrossValidationFailed,
}

fn load(common: &Common) -> Result<ScenarioConfig> {
    let mut cfg = load_scenario(&common.scenario)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn polarizations(cfg: &ScenarioConfig, labels: &Option<Vec<String>>) -> Result<Vec<PolarizationConfig>> {
    match labels {
        None => Ok(cfg.polarizations.clone()),
        Some(ls) => ls.iter().map(|l| cfg.polarization(l)).collect(),
    }
}

fn emit(table: &Table, out: &Option<PathBuf>, name: &str) -> Result<()> {
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let path = dir.join(name);
            table.write(&path)?;
            info!("wrote {} rows to {}", table.len(), path.display());
        }
        None => print!("{}", table.to_csv_string()?),
    }
    Ok(())
}

fn validate(path: &Path) -> Result<Outcome> {
    let cfg = load_scenario(path)?;
    let labels: Vec<&str> = cfg.polarizations.iter().map(|p| p.label.as_str()).collect();
    println!("scenario ok: {}", path.display());
    println!("  wavelength_m      {}", cfg.wavelength);
    println!(
        "  arrays            tx {} x {} wl, rx {} x {} wl",
        cfg.tx.array.num_elements(),
        cfg.tx.array.spacing(),
        cfg.rx.array.num_elements(),
        cfg.rx.array.spacing()
    );
    println!("  clusters          tx {}, rx {}", cfg.tx.mixture.len(), cfg.rx.mixture.len());
    println!("  polarizations     {}", labels.join(", "));
    println!("  seed              {}", cfg.seed);
    for pol in &cfg.polarizations {
        cfg.scene(pol)?;
    }
    Ok(Outcome::Done)
}

fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Validate { scenario } => validate(&scenario),
        Command::Stcf {
            common,
            times,
            spacings,
            tx_spacings,
            polarizations: labels,
        } => {
            let cfg = load(&common)?;
            let pols = polarizations(&cfg, &labels)?;
            let times = times.unwrap_or_else(|| cfg.sweep.times.clone());
            let rx = spacings.unwrap_or_else(|| cfg.sweep.rx_spacings.clone());
            let tx = tx_spacings.unwrap_or_else(|| cfg.sweep.tx_spacings.clone());
            let rows = run_stcf_sweep(&cfg, &times, &tx, &rx, &pols)?;
            let dim = cfg.tx.array.num_elements() * cfg.rx.array.num_elements();
            emit(&stcf_table(&rows, dim), &common.out, "stcf.csv")?;
            Ok(Outcome::Done)
        }
        Command::Capacity {
            common,
            times,
            snrs,
            polarizations: labels,
            draws,
        } => {
            let mut cfg = load(&common)?;
            if let Some(d) = draws {
                cfg.n_channel_draws = d;
            }
            let pols = polarizations(&cfg, &labels)?;
            let times = times.unwrap_or_else(|| cfg.sweep.times.clone());
            let snrs = snrs.unwrap_or_else(|| cfg.sweep.snrs_db.clone());
            let rows = run_capacity_sweep(&cfg, &times, &snrs, &pols)?;
            emit(&capacity_table(&rows), &common.out, "capacity.csv")?;
            Ok(Outcome::Done)
        }
        Command::AoaMap {
            common,
            times,
            n_theta,
            n_phi,
        } => {
            let cfg = load(&common)?;
            let times = times.unwrap_or_else(|| cfg.sweep.times.clone());
            let cells = run_aoa_map(&cfg, &times, n_theta, n_phi)?;
            emit(&aoa_table(&cells), &common.out, "aoa_map.csv")?;
            Ok(Outcome::Done)
        }
        Command::MotionDemo { common, paths } => {
            let cfg = load(&common)?;
            let samples = run_motion_demo(&demo_path(&cfg)?, paths, cfg.seed)?;
            emit(&motion_table(&samples), &common.out, "motion_demo.csv")?;
            Ok(Outcome::Done)
        }
        Command::CrossValidate {
            common,
            samples,
            n_theta,
            polarizations: labels,
            time,
        } => {
            let mut cfg = load(&common)?;
            if let Some(n) = n_theta {
                cfg.quadrature.n_polar = n;
                cfg.quadrature.adaptive = false;
            }
            let pols = polarizations(&cfg, &labels)?;
            let mut all = Vec::new();
            let mut failed = 0;
            for pol in &pols {
                let checks = cross_validate(&cfg, pol, time, samples)?;
                let bad = checks.iter().filter(|c| !c.pass).count();
                eprintln!("{}: {}/{} entries within 3 standard errors", pol.label, checks.len() - bad, checks.len());
                failed += bad;
                all.push((pol.label.clone(), checks));
            }
            for (label, checks) in &all {
                let name = format!("cross_validation_{}.csv", label.to_ascii_lowercase());
                emit(&cross_table(checks), &common.out, &name)?;
            }
            Ok(if failed == 0 {
                Outcome::Done
            } else {
                Outcome::CrossValidationFailed
            })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::CrossValidationFailed) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            report_source(&e);
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn report_source(e: &Error) {
    if let Error::BeyondHorizon { .. } = e {
        eprintln!("hint: requested times must lie within every cluster path's horizon");
    }
}
