use std::path::PathBuf;
use std::process::ExitCode;

use adaptive_apg::data::{preset, preset_catalog, PresetOptions};
use adaptive_apg::exec::Execution;
use adaptive_apg::experiment::{
    run_experiment, ExperimentConfig, ReferenceCache, RunStatus, CONFIG_KEYS,
};
use adaptive_apg::verification::{run_battery, Battery};
use clap::{Parser, Subcommand};

fn config_help() -> String {
    let width = CONFIG_KEYS.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let mut out = String::from("Config keys (file lines `key = value`, or --set key=value):\n");
    for (k, v) in CONFIG_KEYS {
        out.push_str(&format!("  {k:width$}  {v}\n"));
    }
    out
}

#[derive(Parser)]
#[command(
    name = "adaptive-apg",
    version,
    about = "Accelerated proximal gradient experiments"
)]
#[command(after_help = config_help())]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the solvers of a config file and write trace CSVs.
    #[command(after_help = config_help())]
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        max_iters: Option<usize>,
        #[arg(long)]
        gap_tol: Option<f64>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        data_dir: Option<PathBuf>,
        /// Replace the solver list; repeatable.
        #[arg(long = "solver")]
        solvers: Vec<String>,
        /// Replace the restart decay rates; repeatable.
        #[arg(long = "gamma")]
        gammas: Vec<f64>,
        #[arg(long)]
        synthetic_fallback: bool,
        #[arg(long)]
        sequential: bool,
        /// Any config key, `key=value`; repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
    },
    /// Compute (or load from cache) the reference optimal value of a preset.
    Reference {
        preset: String,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        data_dir: Option<PathBuf>,
        #[arg(long)]
        synthetic_fallback: bool,
    },
    /// Run a battery of bound checks; exits nonzero on any violation.
    Verify {
        #[arg(long, default_value = "spectral")]
        battery: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Where to write the per-row CSV.
        #[arg(long, default_value = "verify.csv")]
        out: PathBuf,
        #[arg(long)]
        sequential: bool,
    },
    /// List the problem presets.
    Presets,
}

fn execution(sequential: bool) -> Execution {
    if sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

fn run(cli: Cli) -> adaptive_apg::error::Result<ExitCode> {
    match cli.command {
        Command::Run {
            config,
            seed,
            max_iters,
            gap_tol,
            out_dir,
            data_dir,
            solvers,
            gammas,
            synthetic_fallback,
            sequential,
            sets,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            for s in &sets {
                let (k, v) = s.split_once('=').ok_or_else(|| {
                    adaptive_apg::error::Error::Config(format!(
                        "--set expects key=value, got {s:?}"
                    ))
                })?;
                cfg.set(k.trim(), v.trim())?;
            }
            if let Some(v) = seed {
                cfg.seed = v;
            }
            if let Some(v) = max_iters {
                cfg.max_iters = v;
            }
            if let Some(v) = gap_tol {
                cfg.gap_tol = Some(v);
            }
            if let Some(v) = out_dir {
                cfg.out_dir = v;
            }
            if let Some(v) = data_dir {
                cfg.data_dir = Some(v);
            }
            if !solvers.is_empty() {
                cfg.solvers = solvers;
            }
            if !gammas.is_empty() {
                cfg.gammas = gammas;
            }
            cfg.synthetic_fallback |= synthetic_fallback;
            if sequential {
                cfg.execution = Execution::Sequential;
            }
            let outcome = run_experiment(&cfg)?;
            match outcome.reference_hit {
                Some(true) => println!("f* = {} (cached reference)", outcome.f_star),
                Some(false) => println!("f* = {} (new reference)", outcome.f_star),
                None => println!("f* = {} (known)", outcome.f_star),
            }
            let mut failed = false;
            for row in &outcome.summary {
                let status = match &row.status {
                    RunStatus::Finished(reason) => format!("{reason:?}"),
                    RunStatus::Diverged { k } => {
                        failed = true;
                        format!("diverged at k={k}")
                    }
                    RunStatus::Failed(msg) => {
                        failed = true;
                        format!("failed: {msg}")
                    }
                };
                let gap = row
                    .final_gap
                    .map(|g| format!("{g:e}"))
                    .unwrap_or_else(|| "-".into());
                println!("{:<16} {:<24} final gap {gap}", row.solver, status);
            }
            println!(
                "wrote {} files to {}",
                outcome.files.len(),
                cfg.out_dir.display()
            );
            Ok(if failed {
                ExitCode::FAILURE
            } else {
                ExitCode::SUCCESS
            })
        }
        Command::Reference {
            preset: name,
            tol,
            out_dir,
            seed,
            data_dir,
            synthetic_fallback,
        } => {
            let built = preset(
                &name,
                &PresetOptions {
                    data_dir,
                    synthetic_fallback,
                    seed,
                    ..PresetOptions::default()
                },
            )?;
            if let Some(fs) = built.problem.f_star() {
                println!("{name}: f* = {fs} (known)");
                return Ok(ExitCode::SUCCESS);
            }
            let cache = ReferenceCache::new(&out_dir);
            let (record, hit) = cache.get_or_compute(&built.problem, tol)?;
            println!(
                "{name}: f* = {} ||g_L|| = {:e} by {} in {} iterations{}",
                record.f_star,
                record.cert,
                record.solver,
                record.iters,
                if hit { " (cached)" } else { "" }
            );
            println!("{}", cache.path_for(&record.hash).display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify {
            battery,
            seed,
            out,
            sequential,
        } => {
            let battery: Battery = battery.parse()?;
            let report = run_battery(battery, seed, execution(sequential))?;
            std::fs::write(&out, report.to_csv())?;
            print!("{}", report.summary());
            println!("rows written to {}", out.display());
            Ok(if report.is_clean() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::Presets => {
            for (name, what) in preset_catalog() {
                println!("{name:<20} {what}");
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
