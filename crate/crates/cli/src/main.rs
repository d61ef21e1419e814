use std::path::{Path, PathBuf};
use std::process::ExitCode;

use adam_regret::fmt::num;
use adam_regret_cli::fuzz::{cmd_fuzz, cmd_replay, load_fuzz_config, FuzzOverrides};
use adam_regret_cli::race::cmd_race;
use adam_regret_cli::run::cmd_run;
use adam_regret_cli::{CliError, CliResult, RunConfig, THREADS_ENV};
use clap::{Parser, Subcommand};

/// ADAM regret-bound experiments.
///
/// Exit codes: 0 success, 1 config error, 2 numeric failure,
/// 3 unbounded minimizer, 10 fuzz found a confirmed violation.
#[derive(Parser)]
#[command(name = "adam-regret", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one optimizer and evaluate the regret bound.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config and problem seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config output_dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run several optimizers on one problem and record objective curves.
    Race {
        /// One run config per member; repeat the flag.
        #[arg(long, required = true)]
        config: Vec<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Defaults to the first config's output_dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Randomized search for violations of the moment-ratio inequality.
    Fuzz {
        /// Optional grid file.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        tmax: Option<usize>,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "fuzz-out")]
        out: PathBuf,
        /// Also screen a synthetic record known to violate the inequality.
        #[arg(long)]
        inject_known_violation: bool,
    },
    /// Recompute the sides of a serialized record.
    Replay {
        #[arg(long)]
        file: PathBuf,
    },
}

fn load(path: &Path, seed: Option<u64>) -> CliResult<RunConfig> {
    let cfg = RunConfig::load(path)?;
    Ok(match seed {
        Some(s) => cfg.with_seed(s),
        None => cfg,
    })
}

fn execute(command: Command) -> CliResult<i32> {
    match command {
        Command::Run { config, seed, out } => {
            let cfg = load(&config, seed)?;
            let out = out.unwrap_or_else(|| cfg.output_dir.clone());
            let s = cmd_run(&cfg, &out)?;
            println!("R(T) = {}", num(s.regret));
            if let Some(r) = s.reports.first() {
                println!("bound = {}, slack = {}", num(r.bound), num(r.slack));
            }
            for f in &s.files {
                println!("wrote {}", f.display());
            }
            Ok(0)
        }
        Command::Race { config, seed, out } => {
            let configs = config.iter().map(|c| load(c, seed)).collect::<CliResult<Vec<_>>>()?;
            let out = match out {
                Some(o) => o,
                None => configs
                    .first()
                    .map(|c| c.output_dir.clone())
                    .ok_or_else(|| CliError::Config("race needs at least 2 configs".into()))?,
            };
            let s = cmd_race(&configs, &out)?;
            for (label, value) in &s.finals {
                println!("{label}: final objective {}", num(*value));
            }
            for f in &s.files {
                println!("wrote {}", f.display());
            }
            Ok(0)
        }
        Command::Fuzz {
            config,
            trials,
            tmax,
            d,
            seed,
            out,
            inject_known_violation,
        } => {
            let overrides = FuzzOverrides { trials, tmax, d, seed };
            let cfg = load_fuzz_config(config.as_deref(), &overrides)?;
            let o = cmd_fuzz(&cfg, inject_known_violation, &out)?;
            print!("{}", o.summary.to_text());
            Ok(o.exit_code)
        }
        Command::Replay { file } => {
            let (rec, r) = cmd_replay(&file)?;
            println!("T = {}, d = {}", rec.seq.len(), rec.seq.dim());
            println!("recorded slack {}", num(r.recorded_slack));
            println!("replayed slack {}", num(r.replayed_slack));
            println!("relative error {}", num(r.relative_error));
            println!("violated       {}", r.violated);
            if r.relative_error <= 1e-12 {
                Ok(0)
            } else {
                Err(CliError::Numeric(
                    "replayed slack differs from the recorded value".into(),
                ))
            }
        }
    }
}

fn configure_threads() -> CliResult<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .parse()
            .map_err(|_| CliError::Config(format!("{THREADS_ENV} = {v:?} is not a thread count")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("{THREADS_ENV}: {e}")))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = configure_threads().and_then(|_| execute(cli.command));
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
