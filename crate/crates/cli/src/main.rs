use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use gwd_core::experiments::{
    self, compute_distance, parse_methods, ComparisonConfig, DistanceParams, Method, Table,
    TrafficConfig, TrafficExperiment,
};
use gwd_core::traffic::{write_time_series, KeyValueConfig, SimulationConfig};
use gwd_core::{run_simulation, DiscreteMeasure, Error, PrParams, SsConfig};

/// Classical and generalized Wasserstein distances on 1-D grids, and the
/// traffic experiments built on them.
#[derive(Parser, Debug)]
#[command(name = "gwd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Distance between two measure files (`x,mass` CSV on the same grid).
    Dist {
        supply: PathBuf,
        demand: PathBuf,
        /// One of w1, fg, pr, ghk, ss.
        #[arg(long, short)]
        method: Method,
        /// Creation/destruction weight (pr) or entropy weight (ghk).
        #[arg(long, default_value_t = 1.0)]
        a: f64,
        /// Transport weight (pr, ghk).
        #[arg(long, default_value_t = 1.0)]
        b: f64,
        /// Cost exponent (w1, fg, pr).
        #[arg(long, default_value_t = 1.0)]
        p: f64,
        /// Seed of the ss random search.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the transport plan as `j,k,x_j,x_k,mass` rows.
        #[arg(long)]
        plan: Option<PathBuf>,
    },
    /// Reference experiments on synthetic measures: comparison (moving
    /// indicators), fg_test1, fg_test2, pr_test1, pr_test2, ghk_test1,
    /// ss_test2.
    Compare {
        #[arg(default_value = "comparison")]
        experiment: String,
        /// Supply height of the moving indicators (2 gives equal masses).
        #[arg(long, default_value_t = 2.0)]
        alpha: f64,
        #[arg(long)]
        methods: Option<String>,
        /// Seed of every ss random search.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Distances between the two scenarios of traffic1, traffic2 or
    /// traffic3 over time.
    Traffic {
        experiment: TrafficExperiment,
        #[arg(long, default_value = "fg,pr,ghk")]
        methods: String,
        /// Seed of the random boundary fluxes (traffic1).
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Overrides the experiment's pr creation price.
        #[arg(long)]
        a: Option<f64>,
        /// Sample every this many steps.
        #[arg(long, default_value_t = 10)]
        every: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Runs one LWR or ARZ simulation from a `key = value` file and writes
    /// `t,x,rho[,v]` rows.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// Twelve decimals without trailing zeros, so that rounding noise in the last
/// bits does not show.
fn short(v: f64) -> String {
    let s = format!("{v:.12}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

fn load(path: &Path) -> Result<DiscreteMeasure> {
    DiscreteMeasure::load_csv(path).with_context(|| format!("cannot read measure {}", path.display()))
}

fn write_table(table: &Table, out: Option<&Path>) -> Result<()> {
    let mut w = output(out)?;
    table.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Dist { supply, demand, method, a, b, p, seed, plan } => {
            let ms = load(&supply)?;
            let md = load(&demand)?;
            let params = DistanceParams {
                a,
                b,
                p,
                ss: SsConfig { seed, ..SsConfig::default() },
                ..DistanceParams::default()
            };
            let d = compute_distance(method, &ms, &md, &params)?;
            println!("{}", short(d.value));
            if let Some(path) = plan {
                let gamma = d
                    .plan
                    .ok_or_else(|| Error::InvalidParameter(format!("method `{method}` produces no transport plan")))?;
                let mut w = output(Some(&path))?;
                gamma.write_csv(ms.grid(), &mut w)?;
                w.flush()?;
            }
        }
        Command::Compare { experiment, alpha, methods, seed, out } => {
            let ss = SsConfig { seed, ..SsConfig::default() };
            let table = match experiment.as_str() {
                "comparison" => {
                    let mut cfg = ComparisonConfig::new(alpha);
                    cfg.ss.seed = seed;
                    if let Some(m) = methods {
                        cfg.methods = parse_methods(&m)?;
                    }
                    let rows = experiments::run_comparison(&cfg)?;
                    experiments::comparison_table(&cfg, &rows)
                }
                "fg_test1" => experiments::fg_test1()?,
                "fg_test2" => experiments::fg_test2(50)?,
                "pr_test1" => experiments::pr_test1(200)?,
                "pr_test2" => experiments::pr_test2(100)?,
                "ghk_test1" => experiments::ghk_test1(&ss)?,
                "ss_test2" => experiments::ss_test2(6, &ss)?,
                other => {
                    return Err(Error::InvalidParameter(format!(
                        "unknown experiment `{other}` (comparison, fg_test1, fg_test2, pr_test1, pr_test2, ghk_test1, ss_test2)"
                    ))
                    .into())
                }
            };
            write_table(&table, out.as_deref())?;
        }
        Command::Traffic { experiment, methods, seed, a, every, out } => {
            let mut cfg = TrafficConfig::new(experiment);
            cfg.methods = parse_methods(&methods)?;
            cfg.seed = seed;
            cfg.sample_every = every;
            if let Some(a) = a {
                cfg.pr = PrParams::new(a, cfg.pr.b, cfg.pr.p)?;
            }
            let outcome = experiments::run_traffic(&cfg)?;
            write_table(&experiments::traffic_table(&cfg, &outcome), out.as_deref())?;
        }
        Command::Simulate { config, out } => {
            let kv = KeyValueConfig::load(&config).with_context(|| format!("cannot read {}", config.display()))?;
            let cfg = SimulationConfig::from_key_value(&kv)?;
            let run = run_simulation(&cfg)?;
            let comments = vec![
                format!("config = {}", config.display()),
                format!("model = {}", cfg.model.name()),
                format!("max_conservation_error = {:e}", run.max_conservation_error),
            ];
            let mut w = output(out.as_deref())?;
            write_time_series(&mut w, &cfg.grid, &run.states, &comments)?;
            w.flush()?;
        }
    }
    Ok(())
}

/// 1 for bad input, 2 when a solver or simulation fails on valid input.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<Error>()) {
        Some(
            Error::Lp(_)
            | Error::BigCostActive { .. }
            | Error::NotConverged { .. }
            | Error::BudgetExceeded { .. }
            | Error::DensityOutOfRange { .. },
        ) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
