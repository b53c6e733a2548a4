//! Experiments over products of random stochastic matrices: limit-law fits,
//! fixed-point and positivity checks, pushforward tests, and the exchange,
//! simplices, and polling applications. Every run emits one JSON report;
//! exit code 0 means the run's statistical verdict passed, 1 that it failed,
//! and 2 that the invocation or configuration was unusable.

mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{
    cmd_check, cmd_exchange, cmd_limit, cmd_polling, cmd_pushforward, cmd_sample, cmd_simplices,
    CheckArgs, ExchangeArgs, LimitArgs, PollingArgs, PushforwardArgs, SampleArgs, SimplicesArgs,
};
use config::{
    ensemble_from_flags, load_config, parse_list, parse_matrix, resolve_seed, CliError,
    EnsembleSpec, FileConfig,
};

#[derive(Parser)]
#[command(
    name = "stochwalk",
    version,
    about = "Simulate products of random stochastic matrices and verify their limit laws"
)]
struct Cli {
    /// JSON config file; flags override its fields
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed (beats config and STOCHWALK_SEED)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Cap on worker threads; results do not depend on it
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Write the JSON report here instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Write row-level data as RFC 4180 CSV (limit, apps simplices, sample)
    #[arg(long, global = true)]
    csv: Option<PathBuf>,
    /// Level for the statistical tests
    #[arg(long, global = true)]
    level: Option<f64>,
    /// Ensemble kind: cyclic, leader, identity, dirichlet, or file:<path>
    #[arg(long, global = true)]
    ensemble: Option<String>,
    /// Dimension for the cyclic, leader, and identity ensembles
    #[arg(long, global = true)]
    d: Option<usize>,
    /// Row-parameter matrix for dirichlet ensembles: JSON, file:<path>, or ones<R>x<C>
    #[arg(long, visible_alias = "A", global = true)]
    a: Option<String>,
    /// Parameter vector, comma separated or JSON
    #[arg(long, global = true)]
    t: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run replicated left products to convergence and fit the limit row law
    Limit {
        #[arg(long)]
        replicates: Option<usize>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        max_n: Option<usize>,
    },
    /// Verify the gamma fixed point and product positivity for a candidate t
    Check {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        max_m: Option<usize>,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Test Y X against the column-parameter Dirichlet law, both gamma and Dirichlet sides
    Pushforward {
        /// Column parameters; defaults to the column sums of --a
        #[arg(long)]
        s: Option<String>,
        #[arg(long)]
        n: Option<usize>,
    },
    /// Application experiments
    Apps {
        #[command(subcommand)]
        app: App,
    },
    /// Dump raw draws
    Sample {
        #[arg(long)]
        n: Option<usize>,
        /// matrices, dirichlet, gamma, or limit-rows
        #[arg(long)]
        what: Option<String>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        max_n: Option<usize>,
    },
}

#[derive(Subcommand)]
enum App {
    /// Random exchange chain tested against its stationary law
    Exchange {
        #[arg(long)]
        burn_in: Option<usize>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        thin: Option<usize>,
    },
    /// Nested random simplices driven by the ensemble
    Simplices {
        #[arg(long)]
        replicates: Option<usize>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        max_n: Option<usize>,
        /// Simplex vertices as a JSON matrix or file:<path>; standard simplex by default
        #[arg(long)]
        frame: Option<String>,
    },
    /// Cyclic polling walk restricted to one residue
    Polling {
        /// Residue whose subchain is observed (1-based)
        #[arg(long)]
        r: Option<usize>,
        /// Stationary parameters; derived from the ensemble when omitted
        #[arg(long)]
        beta: Option<String>,
        #[arg(long)]
        burn_in: Option<usize>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        thin: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<bool, CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    }
    let csv_ok = matches!(
        &cli.command,
        Command::Limit { .. }
            | Command::Sample { .. }
            | Command::Apps {
                app: App::Simplices { .. }
            }
    );
    if cli.csv.is_some() && !csv_ok {
        return Err(CliError::Usage(
            "--csv is only produced by limit, apps simplices, and sample".into(),
        ));
    }

    let cfg = match &cli.config {
        Some(p) => load_config(p)?,
        None => FileConfig::default(),
    };
    let seed = resolve_seed(cli.seed, cfg.seed)?;
    let level = cli.level.or(cfg.level).unwrap_or(0.01);
    if !(level > 0.0 && level < 1.0) {
        return Err(CliError::Usage(format!(
            "--level must be strictly between 0 and 1, got {level}"
        )));
    }
    let spec = || -> Result<EnsembleSpec, CliError> {
        match &cli.ensemble {
            Some(kind) => ensemble_from_flags(kind, cli.d, cli.a.as_deref()),
            None => cfg.ensemble.clone().ok_or_else(|| {
                CliError::Usage("no ensemble given: pass --ensemble or set it in the config".into())
            }),
        }
    };
    let t = match &cli.t {
        Some(s) => Some(parse_list(s)?),
        None => cfg.t.clone(),
    };

    let report = match &cli.command {
        Command::Limit {
            replicates,
            epsilon,
            max_n,
        } => cmd_limit(&LimitArgs {
            spec: spec()?,
            seed,
            replicates: replicates.or(cfg.replicates).unwrap_or(10_000),
            epsilon: epsilon.or(cfg.epsilon).unwrap_or(1e-10),
            max_n: max_n.or(cfg.max_n).unwrap_or(10_000),
            level,
            target: t,
            csv: cli.csv.clone(),
        })?,
        Command::Check { n, max_m, trials } => cmd_check(&CheckArgs {
            spec: spec()?,
            seed,
            t: t.ok_or_else(|| CliError::Usage("check needs a candidate --t".into()))?,
            n: n.or(cfg.n).unwrap_or(100_000),
            level,
            max_m: max_m.or(cfg.max_m).unwrap_or(50),
            trials: trials.or(cfg.trials).unwrap_or(10_000),
        })?,
        Command::Pushforward { s, n } => {
            let alpha = match &cli.a {
                Some(x) => parse_matrix(x)?,
                None => cfg.alpha.clone().ok_or_else(|| {
                    CliError::Usage("pushforward needs --a (row-parameter matrix)".into())
                })?,
            };
            cmd_pushforward(&PushforwardArgs {
                alpha,
                seed,
                t,
                s: match s {
                    Some(x) => Some(parse_list(x)?),
                    None => cfg.s.clone(),
                },
                n: n.or(cfg.n).unwrap_or(100_000),
                level,
            })?
        }
        Command::Apps { app } => match app {
            App::Exchange {
                burn_in,
                samples,
                thin,
            } => cmd_exchange(&ExchangeArgs {
                spec: spec()?,
                seed,
                t: t.ok_or_else(|| {
                    CliError::Usage("exchange needs --t (stationary parameters)".into())
                })?,
                burn_in: burn_in.or(cfg.burn_in).unwrap_or(1_000),
                samples: samples.or(cfg.samples).unwrap_or(20_000),
                thin: thin.or(cfg.thin),
                level,
            })?,
            App::Simplices {
                replicates,
                epsilon,
                max_n,
                frame,
            } => cmd_simplices(&SimplicesArgs {
                spec: spec()?,
                seed,
                frame: match frame {
                    Some(x) => Some(parse_matrix(x)?),
                    None => cfg.frame.clone(),
                },
                replicates: replicates.or(cfg.replicates).unwrap_or(10_000),
                epsilon: epsilon.or(cfg.epsilon).unwrap_or(1e-10),
                max_n: max_n.or(cfg.max_n).unwrap_or(10_000),
                target: t,
                level,
                csv: cli.csv.clone(),
            })?,
            App::Polling {
                r,
                beta,
                burn_in,
                samples,
                thin,
            } => cmd_polling(&PollingArgs {
                spec: spec()?,
                seed,
                r: r.or(cfg.r)
                    .ok_or_else(|| CliError::Usage("polling needs --r (served residue)".into()))?,
                beta: match beta {
                    Some(x) => Some(parse_list(x)?),
                    None => cfg.beta.clone(),
                },
                burn_in: burn_in.or(cfg.burn_in).unwrap_or(1_000),
                samples: samples.or(cfg.samples).unwrap_or(20_000),
                thin: thin.or(cfg.thin),
                level,
            })?,
        },
        Command::Sample {
            n,
            what,
            epsilon,
            max_n,
        } => {
            let spec_opt = if cli.ensemble.is_some() || cfg.ensemble.is_some() {
                Some(spec()?)
            } else {
                None
            };
            cmd_sample(&SampleArgs {
                spec: spec_opt,
                seed,
                t,
                n: n.or(cfg.n).unwrap_or(10),
                what: what.clone().or(cfg.what.clone()),
                epsilon: epsilon.or(cfg.epsilon).unwrap_or(1e-10),
                max_n: max_n.or(cfg.max_n).unwrap_or(10_000),
                csv: cli.csv.clone(),
            })?
        }
    };

    report.write(cli.out.as_deref())?;
    Ok(report.pass)
}
