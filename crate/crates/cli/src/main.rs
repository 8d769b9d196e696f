use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use larmor_core::harness::config::{Budget, MHZ, US};
use larmor_core::harness::{bench, direct_compare, export, make_signal, run_tracking, sweep};
use larmor_core::harness::{CompareSpec, FilterKind, Format, RunConfig, SweepAxis};
use larmor_core::Error;

/// Track a drifting Larmor frequency from simulated Ramsey shots and benchmark
/// the Gaussian-mixture filter against an exact grid filter.
#[derive(Debug, Parser)]
#[command(name = "larmor", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// Plain-text `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run seed (`track`) or first seed (`compare`, `sweep`, `bench`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output encoding.
    #[arg(long, global = true, default_value = "json", value_parser = parse_format)]
    format: Format,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// One tracking run: JSON record, or the trajectory with `--format csv`.
    Track {
        #[arg(long, value_parser = parse_filter)]
        filter: Option<FilterKind>,
        /// Also write the trajectory CSV here.
        #[arg(long)]
        trajectory: Option<PathBuf>,
        /// Also write the ground-truth signal CSV here.
        #[arg(long)]
        signal: Option<PathBuf>,
    },
    /// Both filters on shared signals, one table row per (T2*, overhead) pair.
    Compare {
        /// Coherence times in us, comma separated (`inf` allowed).
        #[arg(long, value_delimiter = ',')]
        t2star: Vec<f64>,
        /// Overhead times in us, comma separated.
        #[arg(long, value_delimiter = ',')]
        overhead: Vec<f64>,
        /// Diffusion coefficient in MHz Hz^(1/2).
        #[arg(long)]
        kappa: Option<f64>,
        #[arg(long, default_value_t = 200)]
        runs: usize,
        /// First seed; defaults to `--seed`, then 0.
        #[arg(long)]
        seed0: Option<u64>,
        /// Also write the per-run CSV here.
        #[arg(long)]
        runs_csv: Option<PathBuf>,
    },
    /// Mean MSE and parameter counts of both filters across one parameter.
    Sweep {
        #[arg(long, value_parser = parse_axis)]
        axis: SweepAxis,
        /// Sweep values (MHz Hz^(1/2) for kappa, us for overhead), comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long, default_value_t = 100)]
        runs_per_point: usize,
    },
    /// Per-shot compute time of both filters, measured sequentially.
    Bench {
        #[arg(long, default_value_t = 5)]
        runs: usize,
    },
}

fn parse_format(s: &str) -> Result<Format, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_filter(s: &str) -> Result<FilterKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_axis(s: &str) -> Result<SweepAxis, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("larmor: {e}");
            ExitCode::from(if e.is_io() { 3 } else { 2 })
        }
    }
}

fn load_config(global: &Global, mut base: RunConfig) -> larmor_core::Result<RunConfig> {
    if let Some(path) = &global.config {
        let text = std::fs::read_to_string(path).map_err(|e| with_path(path, e.into()))?;
        base.apply_text(&text)?;
    }
    if let Some(seed) = global.seed {
        base.seed = seed;
    }
    Ok(base)
}

fn with_path(path: &Path, e: Error) -> Error {
    match e {
        Error::Io(e) => Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display()))),
        e => e,
    }
}

fn create(path: &Path) -> larmor_core::Result<io::BufWriter<std::fs::File>> {
    export::create(path).map_err(|e| with_path(path, e))
}

fn output(path: Option<&Path>) -> larmor_core::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(io::BufWriter::new(io::stdout().lock())),
    })
}

fn run(cli: Cli) -> larmor_core::Result<()> {
    let g = &cli.global;
    match cli.command {
        Command::Track { filter, trajectory, signal } => {
            let mut cfg = load_config(g, RunConfig::default())?;
            if let Some(f) = filter {
                cfg.filter = f;
            }
            cfg.validate()?;
            let sig = make_signal(&cfg, cfg.seed)?;
            let record = run_tracking(&cfg, &sig)?;
            if let Some(p) = signal {
                sig.write_csv(create(&p)?)?;
            }
            if let Some(p) = trajectory {
                export::write_trajectory_csv(&record.rows, create(&p)?)?;
            }
            let out = output(g.out.as_deref())?;
            match g.format {
                Format::Json => export::write_json(&record, out)?,
                Format::Csv => export::write_trajectory_csv(&record.rows, out)?,
            }
            let s = &record.summary;
            eprintln!(
                "{} seed {}: mse {:.4} MHz^2, failed {}, {} shots{}",
                s.filter,
                s.seed,
                s.mse,
                s.failed,
                s.n_meas,
                if s.truncated { " (truncated)" } else { "" }
            );
        }
        Command::Compare { t2star, overhead, kappa, runs, seed0, runs_csv } => {
            let mut base = load_config(g, RunConfig::default())?;
            if let Some(k) = kappa {
                base.kappa = k * MHZ;
            }
            let pairs = settings_pairs(&t2star, &overhead, &base)?;
            let seed0 = seed0.unwrap_or(base.seed);
            let mut results = Vec::with_capacity(pairs.len());
            for (t2, oh) in pairs {
                let mut cfg = base.clone();
                cfg.t2_star = t2;
                cfg.t_oh = oh;
                let c = direct_compare(&CompareSpec::from_base(&cfg, runs, seed0))?;
                eprintln!(
                    "T2* {} us, overhead {} us: grid F.R. {:.3}, gaussian F.R. {:.3}, speed increase {:.2}",
                    c.row.t2star_us, c.row.overhead_us, c.row.grid_fail_rate, c.row.gaussian_fail_rate, c.row.speed_increase
                );
                results.push(c);
            }
            if let Some(p) = runs_csv {
                let all: Vec<_> = results.iter().flat_map(|c| c.grid.iter().chain(&c.gaussian)).cloned().collect();
                export::write_runs_csv(&all, create(&p)?)?;
            }
            let out = output(g.out.as_deref())?;
            match g.format {
                Format::Json => export::write_json(&results, out)?,
                Format::Csv => {
                    let rows: Vec<_> = results.iter().map(|c| c.row.clone()).collect();
                    export::write_table_csv(&rows, out)?
                }
            }
        }
        Command::Sweep { axis, values, runs_per_point } => {
            let mut base = RunConfig::default();
            base.budget = Budget::Measurements(1000);
            let base = load_config(g, base)?;
            let rows = sweep(&base, axis, &values, runs_per_point, base.seed)?;
            let out = output(g.out.as_deref())?;
            match g.format {
                Format::Json => export::write_json(&rows, out)?,
                Format::Csv => export::write_table_csv(&rows, out)?,
            }
        }
        Command::Bench { runs } => {
            let base = load_config(g, RunConfig::default())?;
            if runs == 0 {
                return Err(Error::config("bench needs at least one run"));
            }
            let row = bench(&CompareSpec::from_base(&base, runs, base.seed))?;
            eprintln!(
                "grid {:.0} ns/shot, gaussian {:.0} ns/shot, speed increase {:.2}",
                row.grid_compute_ns, row.gaussian_compute_ns, row.speed_increase
            );
            let out = output(g.out.as_deref())?;
            match g.format {
                Format::Json => export::write_json(&row, out)?,
                Format::Csv => export::write_table_csv(&[row], out)?,
            }
        }
    }
    Ok(())
}

/// Zip the T2* and overhead lists (us), broadcasting a single value or the config default.
fn settings_pairs(t2star: &[f64], overhead: &[f64], base: &RunConfig) -> larmor_core::Result<Vec<(f64, f64)>> {
    let t2: Vec<f64> = if t2star.is_empty() { vec![base.t2_star] } else { t2star.iter().map(|&v| v * US).collect() };
    let oh: Vec<f64> = if overhead.is_empty() { vec![base.t_oh] } else { overhead.iter().map(|&v| v * US).collect() };
    let n = t2.len().max(oh.len());
    if (t2.len() != n && t2.len() != 1) || (oh.len() != n && oh.len() != 1) {
        return Err(Error::config("--t2star and --overhead need equal lengths or a single value"));
    }
    Ok((0..n).map(|i| (t2[i.min(t2.len() - 1)], oh[i.min(oh.len() - 1)])).collect())
}
