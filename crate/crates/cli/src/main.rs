mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use commands::{Ctx, OracleArgs, RunError};
use config::{parse_poly, parse_sweep, ConfigError, RunConfig};
use report::{config_hash, write_json};

#[derive(Parser)]
#[command(name = "jj", version, about = "Renormalization of Jacobi matrices by real polynomials")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Multiplies every tolerance.
    #[arg(long, global = true, default_value_t = 1.0)]
    tol_scale: f64,
    /// Worker threads (`auto` or a count); falls back to JJ_THREADS.
    #[arg(long, global = true)]
    threads: Option<String>,
    /// RNG seed for randomized checks.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// One renormalization step with the identity checks.
    Renorm {
        #[arg(long)]
        poly: Option<String>,
        #[arg(long)]
        branch: Option<String>,
        #[arg(long)]
        window: Option<usize>,
    },
    /// Fixed-point or tower iteration.
    Iterate {
        #[arg(long)]
        poly: Option<String>,
        #[arg(long)]
        branch: Option<String>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        window: Option<usize>,
        /// Iterate even when the polynomial is not sufficiently hyperbolic.
        #[arg(long)]
        force: bool,
    },
    /// Balanced measure and L₂ eigenmeasure oracles.
    Oracle {
        #[arg(long)]
        poly: Option<String>,
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long)]
        n_coeffs: Option<usize>,
        /// trace.json of a fixed-point run to compare against.
        #[arg(long)]
        compare: Option<PathBuf>,
        #[arg(long)]
        ruelle: bool,
    },
    /// Even/odd splitting and the Darboux factorization (quadratic case).
    Darboux {
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long)]
        pairs: Option<usize>,
        /// Comma-separated ρ values.
        #[arg(long)]
        sweep: Option<String>,
    },
    /// Prints which hypotheses hold for the configured polynomial.
    Diagnose {
        #[arg(long)]
        poly: Option<String>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Renorm { .. } => "renorm",
            Command::Iterate { .. } => "iterate",
            Command::Oracle { .. } => "oracle",
            Command::Darboux { .. } => "darboux",
            Command::Diagnose { .. } => "diagnose",
        }
    }
}

fn apply_overrides(cfg: &mut RunConfig, cmd: &Command) -> Result<(), ConfigError> {
    let set_poly = |cfg: &mut RunConfig, p: &Option<String>| -> Result<(), ConfigError> {
        if let Some(p) = p {
            cfg.poly = parse_poly(p)?;
        }
        Ok(())
    };
    match cmd {
        Command::Renorm { poly, branch, window } => {
            set_poly(cfg, poly)?;
            if let Some(b) = branch {
                cfg.branch = b.clone();
            }
            if let Some(w) = window {
                cfg.window = *w;
            }
        }
        Command::Iterate { poly, branch, steps, window, force } => {
            set_poly(cfg, poly)?;
            if let Some(b) = branch {
                cfg.branch = b.clone();
            }
            if let Some(s) = steps {
                cfg.steps = *s;
            }
            if let Some(w) = window {
                cfg.window = *w;
            }
            cfg.force |= *force;
        }
        Command::Oracle { poly, depth, n_coeffs, ruelle, .. } => {
            set_poly(cfg, poly)?;
            if let Some(d) = depth {
                cfg.oracle.depth = *d;
            }
            if let Some(n) = n_coeffs {
                cfg.oracle.n_coeffs = *n;
            }
            cfg.oracle.ruelle |= *ruelle;
        }
        Command::Darboux { rho, pairs, sweep } => {
            if let Some(r) = rho {
                cfg.darboux.rho = *r;
            }
            if let Some(n) = pairs {
                cfg.darboux.pairs = *n;
            }
            if let Some(s) = sweep {
                cfg.darboux.sweep = parse_sweep(s)?;
            }
        }
        Command::Diagnose { poly } => set_poly(cfg, poly)?,
    }
    Ok(())
}

fn thread_count(flag: Option<&str>) -> Result<Option<usize>, ConfigError> {
    let raw = match flag {
        Some(s) => Some(s.to_string()),
        None => std::env::var("JJ_THREADS").ok(),
    };
    match raw.as_deref().map(str::trim) {
        None | Some("") | Some("auto") => Ok(None),
        Some(s) => match s.parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(ConfigError(format!("invalid thread count {s:?}"))),
        },
    }
}

fn setup(cli: &Cli) -> Result<Ctx, ConfigError> {
    let mut cfg = match &cli.global.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    apply_overrides(&mut cfg, &cli.command)?;
    if let Some(s) = cli.global.seed {
        cfg.rng_seed = Some(s);
    }
    cfg.validate(!matches!(cli.command, Command::Diagnose { .. }))?;
    let s = cli.global.tol_scale;
    if !(s.is_finite() && s > 0.0) {
        return Err(ConfigError(format!("--tol-scale must be positive, got {s}")));
    }
    if let Some(n) = thread_count(cli.global.threads.as_deref())? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| ConfigError(e.to_string()))?;
    }
    Ok(Ctx { cfg, out: cli.global.out.clone(), tol_scale: s })
}

fn run(cli: &Cli) -> Result<bool, RunError> {
    let ctx = setup(cli)?;
    if let Command::Diagnose { .. } = cli.command {
        print!("{}", commands::diagnose(&ctx)?);
        return Ok(true);
    }
    std::fs::create_dir_all(&ctx.out).map_err(|e| RunError::Config(format!("{}: {e}", ctx.out.display())))?;
    let rep = match &cli.command {
        Command::Renorm { .. } => commands::renorm(&ctx)?,
        Command::Iterate { .. } => commands::iterate(&ctx)?,
        Command::Oracle { compare, .. } => commands::oracle(&ctx, &OracleArgs { compare: compare.clone() })?,
        Command::Darboux { .. } => commands::darboux(&ctx)?,
        Command::Diagnose { .. } => unreachable!(),
    };
    let name = cli.command.name();
    let effective = json!({ "command": name, "run": ctx.cfg, "tol_scale": ctx.tol_scale });
    let hash = config_hash(&effective);
    write_json(&ctx.out.join("report.json"), &rep.to_value(name, &effective, &hash))?;
    for (k, c) in &rep.checks {
        println!(
            "{k:<32} {:>12.3e}  tol {:>10.3e}  {}",
            c.value,
            c.tolerance,
            if c.pass { "PASS" } else { "FAIL" }
        );
    }
    if !rep.pass() {
        eprintln!("failed checks: {}", rep.failing().join(", "));
    }
    Ok(rep.pass())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(RunError::Numeric(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(RunError::Config(m)) => {
            eprintln!("config error: {m}");
            ExitCode::from(2)
        }
    }
}
