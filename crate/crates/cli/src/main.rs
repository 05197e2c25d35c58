use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use garch_copula::garch::GridLimit;
use garch_copula::ingestion::write_price_panel;
use garch_copula::optimizer::Objective;
use garch_copula_cli::artifacts::verify_dir;
use garch_copula_cli::config::{DataConfig, DependenceKind, Overrides, RunConfig};
use garch_copula_cli::error::io;
use garch_copula_cli::synthetic::{synthetic_panel, SyntheticSpec};
use garch_copula_cli::{CliError, Pipeline, Result};

#[derive(Parser)]
#[command(name = "garch-copula", version, about = "ARMA-GARCH + copula/vine portfolio pipeline")]
struct Cli {
    #[command(flatten)]
    opts: RunOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunOpts {
    /// TOML run configuration.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Price CSV (replaces `data.input`).
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    /// Output directory (default: config, then $GARCH_COPULA_OUTPUT, then ./garch-copula-out).
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Largest ARMA/GARCH order searched: `small` (≤1) or `full` (≤3).
    #[arg(long, global = true)]
    grid_limit: Option<GridLimit>,
    /// gaussian, t, clayton, gumbel, rvine, cvine, dvine or auto.
    #[arg(long, global = true)]
    kind: Option<DependenceKind>,
    /// Parametric-bootstrap replicates for the goodness-of-fit tests.
    #[arg(long, global = true)]
    gof_bootstrap: Option<usize>,
    #[arg(long, global = true, value_enum)]
    target: Option<TargetArg>,
    /// Per-asset weight floor.
    #[arg(long, global = true)]
    bound: Option<f64>,
    #[arg(long, global = true)]
    risk_free: Option<f64>,
    #[arg(long, global = true)]
    paths: Option<usize>,
    /// Comma-separated evaluation horizons in days.
    #[arg(long, global = true, value_delimiter = ',')]
    horizons: Option<Vec<usize>>,
    /// Backtest rebalancing window in days.
    #[arg(long, global = true)]
    window: Option<usize>,
    /// Total backtest horizon in days.
    #[arg(long, global = true)]
    backtest_horizon: Option<usize>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum TargetArg {
    MinVariance,
    Tangency,
}

#[derive(Subcommand)]
enum Command {
    /// Read, repair and difference the price panel.
    Ingest,
    /// Select an ARMA-GARCH model per asset.
    Fit,
    /// Fit the dependence model on the standardized residuals.
    Dependence,
    /// Simulate joint return paths.
    Simulate,
    /// Compute optimal weights.
    Optimize,
    /// Rolling-window backtest.
    Backtest,
    /// Every stage plus the summary report.
    Run,
    /// Summary report (runs missing stages).
    Report,
    /// Check artifacts against the manifest and the configuration hash.
    Verify {
        /// Directory to check (default: the configured output directory).
        dir: Option<PathBuf>,
    },
    /// Write a synthetic price panel.
    Synth {
        /// Destination CSV.
        out: PathBuf,
        #[arg(long, default_value_t = 5)]
        assets: usize,
        #[arg(long, default_value_t = 1000)]
        days: usize,
        /// Add one asset with about 20% of its prices missing.
        #[arg(long)]
        sparse: bool,
    },
}

impl RunOpts {
    fn overrides(&self) -> Overrides {
        Overrides {
            input: self.input.clone(),
            output_dir: self.output.clone(),
            seed: self.seed,
            grid_limit: self.grid_limit,
            kind: self.kind,
            gof_bootstrap: self.gof_bootstrap,
            target: self.target.map(|t| match t {
                TargetArg::MinVariance => Objective::MinVariance,
                TargetArg::Tangency => Objective::Tangency,
            }),
            bound: self.bound,
            risk_free: self.risk_free,
            n_paths: self.paths,
            horizons: self.horizons.clone(),
            window: self.window,
            backtest_horizon: self.backtest_horizon,
        }
    }

    fn config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => {
                let (Some(input), Some(seed)) = (&self.input, self.seed) else {
                    return Err(CliError::Config("either --config or both --input and --seed are required".into()));
                };
                RunConfig {
                    seed,
                    output_dir: None,
                    data: DataConfig {
                        input: input.clone(),
                        assets: Vec::new(),
                        start: None,
                        end: None,
                        missing_threshold: garch_copula::ingestion::DEFAULT_MISSING_THRESHOLD,
                    },
                    fit: Default::default(),
                    dependence: Default::default(),
                    optimize: Default::default(),
                    simulation: Default::default(),
                    backtest: Default::default(),
                }
            }
        };
        cfg.apply(&self.overrides());
        cfg.validate()?;
        Ok(cfg)
    }
}

fn print_summary(p: &Pipeline) {
    let dir = p.art.dir().display();
    println!("config hash {}", p.art.hash());
    println!("artifacts in {dir}");
}

fn execute(cli: Cli) -> Result<bool> {
    if let Some(n) = cli.opts.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let stage = match cli.command {
        Command::Synth { out, assets, days, sparse } => {
            let spec = SyntheticSpec { n_assets: assets, n_days: days, seed: cli.opts.seed.unwrap_or(1), sparse_asset: sparse, ..Default::default() };
            let panel = synthetic_panel(&spec)?;
            if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(io(dir))?;
            }
            let file = std::fs::File::create(&out).map_err(io(&out))?;
            write_price_panel(file, &panel)?;
            println!("wrote {} ({} assets, {} days)", out.display(), panel.assets.len(), days);
            return Ok(true);
        }
        Command::Verify { dir } => {
            let cfg = cli.opts.config();
            let (dir, expected) = match (dir, &cfg) {
                (Some(d), Ok(c)) => (d, Some(c.hash()?)),
                (Some(d), Err(_)) => (d, None),
                (None, Ok(c)) => (c.output_dir(), Some(c.hash()?)),
                (None, Err(_)) => return Err(cfg.expect_err("error branch")),
            };
            let problems = verify_dir(&dir, expected.as_deref())?;
            for p in &problems {
                eprintln!("verify: {p}");
            }
            if problems.is_empty() {
                println!("verified {}", dir.display());
            }
            return Ok(problems.is_empty());
        }
        c => c,
    };

    let mut p = Pipeline::new(cli.opts.config()?)?;
    match stage {
        Command::Ingest => {
            let ing = p.ingest()?;
            println!(
                "{} assets retained, {} return rows for fitting, {} held out",
                ing.assets.len(),
                ing.fit_rows.len(),
                ing.holdout.len()
            );
        }
        Command::Fit => {
            for f in p.fit()? {
                println!(
                    "{:<12} {}{} ARMA({},{}) {:<11} BIC/T {:.4}",
                    f.asset_id,
                    f.model.garch.variant.name(),
                    f.order_label(),
                    f.model.arma.m,
                    f.model.arma.n,
                    f.model.innovation.dist.name(),
                    f.bic_per_obs
                );
            }
        }
        Command::Dependence => {
            let d = p.dependence()?;
            for r in &d.comparison {
                let mark = if r.selected { "*" } else { " " };
                match (r.bic, r.gof_p) {
                    (Some(b), g) => println!("{mark} {:<10} BIC {b:>12.2}  GoF p {}", r.model, g.map_or("-".into(), |g| format!("{g:.3}"))),
                    _ => println!("  {:<10} failed: {}", r.model, r.error.as_deref().unwrap_or("")),
                }
            }
        }
        Command::Simulate => {
            let s = p.simulate()?;
            println!("{} paths × {} days × {} assets", s.n_paths, s.horizon, s.n_assets());
        }
        Command::Optimize => {
            let o = p.optimize()?;
            for (a, w) in o.assets.iter().zip(&o.portfolio.weights) {
                println!("{a:<12} {w:.4}");
            }
            for h in &o.horizons {
                if let Some(r) = h.report {
                    println!("{:>3}d  SR {:.4}  ASR {:.4}", h.horizon, r.sharpe, r.adjusted_sharpe);
                }
            }
        }
        Command::Backtest => {
            let b = p.backtest()?;
            for w in &b.result.windows {
                match &w.report {
                    Some(r) => println!("window {} ({} days)  SR {:.4}  ASR {:.4}", w.index + 1, w.days, r.sharpe, r.adjusted_sharpe),
                    None => println!("window {} ({} days)  {}", w.index + 1, w.days, w.report_error.as_deref().unwrap_or("")),
                }
            }
        }
        Command::Run | Command::Report => {
            let r = p.report()?;
            println!("{} assets, dependence: {}", r.assets.len(), r.selected_dependence);
            for (a, w) in r.optimization.assets.iter().zip(&r.optimization.portfolio.weights) {
                println!("  {a:<12} {w:.4}");
            }
        }
        Command::Verify { .. } | Command::Synth { .. } => unreachable!("handled above"),
    }
    print_summary(&p);
    for i in &p.incomplete {
        eprintln!("incomplete: {i}");
    }
    Ok(p.incomplete.is_empty())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
