use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use constrained_risk::bounds::bound_from_models;
use constrained_risk::divergence::{affinity, AffinityMethod};
use constrained_risk::error::Result;
use constrained_risk::experiments::{run, ExperimentConfig, ExperimentKind};
use constrained_risk::sim::{mc_risk, violation_search, EstimatorSpec, RiskEstimate};
use constrained_risk::{LossFn, Model};

/// Constrained risk lower bounds, χ²-affinities and their Monte Carlo checks.
#[derive(Parser)]
#[command(name = "crisk", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Closed,
    Quad,
    Mc,
}

#[derive(Subcommand)]
enum Command {
    /// χ²-affinity of P1 relative to P0.
    Affinity {
        #[arg(long)]
        p1: Model,
        #[arg(long)]
        p0: Model,
        #[arg(long, value_enum, default_value = "quad")]
        method: Method,
        /// Monte Carlo draws.
        #[arg(long, default_value_t = 1_000_000)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Lower bound on the risk at P1 given a risk budget at P0.
    Bound {
        #[arg(long)]
        loss: LossFn,
        #[arg(long)]
        p0: Model,
        #[arg(long)]
        p1: Model,
        /// Risk budget at P0 (δᵏ for power losses).
        #[arg(long)]
        delta: f64,
        #[arg(long, value_enum, default_value = "quad")]
        affinity_method: Method,
        #[arg(long, default_value_t = 1_000_000)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Monte Carlo risk of an estimator.
    Simulate {
        /// mean, hodges, hodges:<tau> or const:<c>.
        #[arg(long)]
        est: EstimatorSpec,
        #[arg(long)]
        model: Model,
        #[arg(long)]
        loss: LossFn,
        #[arg(long, default_value_t = 10_000)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Search random finite instances for violations of the bound.
    Oracle {
        #[arg(long, default_value_t = 10_000)]
        instances: usize,
        #[arg(long)]
        loss: LossFn,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run an experiment driver.
    Experiment {
        /// prop1, prop2, prop3, mean or discussion.
        kind: ExperimentKind,
        /// JSON config; missing fields take the driver's defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn method(m: Method, count: usize, seed: u64) -> AffinityMethod {
    match m {
        Method::Closed => AffinityMethod::Closed,
        Method::Quad => AffinityMethod::Quadrature,
        Method::Mc => AffinityMethod::MonteCarlo { count, seed },
    }
}

#[derive(Serialize)]
struct SimulateOutput {
    estimator: String,
    model: String,
    loss: String,
    risk: RiskEstimate,
}

fn emit<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn execute(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Affinity { p1, p0, method: m, count, seed } => {
            emit(&affinity(&p1, &p0, method(m, count, seed))?)?;
            Ok(true)
        }
        Command::Bound { loss, p0, p1, delta, affinity_method, count, seed } => {
            emit(&bound_from_models(&p1, &p0, &loss, delta, method(affinity_method, count, seed))?)?;
            Ok(true)
        }
        Command::Simulate { est, model, loss, reps, seed } => {
            let e = est.build(model.n())?;
            let risk = mc_risk(&e, &model, &loss, reps, seed)?;
            emit(&SimulateOutput { estimator: e.name().to_string(), model: model.to_string(), loss: loss.to_string(), risk })?;
            Ok(true)
        }
        Command::Oracle { instances, loss, seed } => {
            let report = violation_search(instances, &loss, seed)?;
            emit(&report)?;
            Ok(report.violations == 0)
        }
        Command::Experiment { kind, config, out, csv } => {
            let cfg = match config {
                Some(path) => ExperimentConfig::from_json(kind, &std::fs::read_to_string(path)?)?,
                None => ExperimentConfig::defaults(kind),
            };
            let report = run(&cfg)?;
            let json = report.to_json()?;
            println!("{json}");
            if let Some(path) = out.or_else(|| cfg.output_path.as_ref().map(PathBuf::from)) {
                std::fs::write(path, format!("{json}\n"))?;
            }
            if let Some(path) = csv {
                report.write_csv(BufWriter::new(File::create(path)?))?;
            }
            Ok(report.rows_ok)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
