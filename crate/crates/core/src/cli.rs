//! `concord` command-line interface.
//!
//! Exit codes: 0 success, 1 certificate failure, 2 usage or input errors,
//! 3 solve stopped at `--max-iter`, 4 solve aborted (step underflow or inner
//! solver cap).

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::bench::{run_plan, BenchPlan, CellSpec, LambdaSpec, RunOptions};
use crate::certificates::{dual_feasibility_from_data, kkt_check, level_set_bounds_at, KktReport};
use crate::io::{
    format_float, read_covariance_csv, read_dense_csv, read_sparse_triplets, write_bench_table, write_dense_csv,
    write_sparse_triplets, write_trace,
};
use crate::model::{objective, sample_covariance, CovarianceMatrix, DataMatrix, PenaltyMatrix};
use crate::solvers::{solve, Problem, SolverConfig, Variant};
use crate::synth::{generate_sparse_concentration, sample_gaussian, SynthSpec};
use crate::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CERTIFICATE_FAILED: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_MAX_ITER: i32 = 3;
pub const EXIT_ABORTED: i32 = 4;

#[derive(Parser, Debug)]
#[command(
    name = "concord",
    version,
    about = "Sparse concentration matrix estimation with CONCORD"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a sparse concentration matrix and Gaussian samples from it.
    Synth(SynthArgs),
    /// Estimate a sparse concentration matrix.
    Solve(SolveArgs),
    /// Run a timing benchmark and write a summary table.
    Bench(BenchArgs),
    /// Check optimality conditions of an estimate.
    Certify(CertifyArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    p: usize,
    /// Nonzero off-diagonal pairs.
    #[arg(long)]
    pairs: usize,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_data: PathBuf,
    #[arg(long)]
    out_truth: PathBuf,
}

#[derive(Args, Debug)]
#[group(id = "input", required = true, multiple = false, args = ["data", "cov"])]
struct InputArgs {
    /// Observations, one row per sample.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Covariance matrix.
    #[arg(long)]
    cov: Option<PathBuf>,
    /// Input CSV has a header line.
    #[arg(long)]
    header: bool,
    /// Use the data as given instead of subtracting column means.
    #[arg(long)]
    no_center: bool,
}

enum Input {
    Data(DataMatrix),
    Covariance(CovarianceMatrix),
}

impl InputArgs {
    fn load(&self) -> Result<Input> {
        match (&self.data, &self.cov) {
            (Some(path), None) => {
                let y = read_dense_csv(path, self.header)?;
                Ok(Input::Data(if self.no_center { y } else { y.centered()? }))
            }
            (None, Some(path)) => Ok(Input::Covariance(read_covariance_csv(path, self.header)?)),
            _ => unreachable!("clap enforces exactly one input"),
        }
    }
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    lambda: f64,
    #[arg(long, value_enum, default_value_t = Variant::CcIsta0)]
    variant: Variant,
    #[arg(long, default_value_t = 1e-5)]
    eps_subg: f64,
    #[arg(long, default_value_t = 1e-8)]
    eps_func: f64,
    #[arg(long, default_value_t = 1000)]
    max_iter: usize,
    /// Estimate as sparse triplets.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-iteration trace CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// JSON plan; inline flags describe a single cell otherwise.
    #[arg(long, conflicts_with_all = ["p", "n", "pairs", "lambda", "grid", "variants"])]
    plan: Option<PathBuf>,
    #[arg(long, required_unless_present = "plan")]
    p: Option<usize>,
    #[arg(long, value_delimiter = ',', required_unless_present = "plan")]
    n: Vec<usize>,
    #[arg(long)]
    pairs: Option<usize>,
    #[arg(long, value_delimiter = ',', conflicts_with = "grid")]
    lambda: Vec<f64>,
    /// Number of log-spaced penalties below `1.05·λ_max`.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [Variant::Concord, Variant::CcIsta0, Variant::CcFista1])]
    variants: Vec<Variant>,
    #[arg(long, default_value_t = 1)]
    repetitions: usize,
    #[arg(long, default_value_t = 1e-5)]
    eps_subg: f64,
    #[arg(long, default_value_t = 1e-8)]
    eps_func: f64,
    #[arg(long, default_value_t = 1000)]
    max_iter: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    trace_dir: Option<PathBuf>,
}

impl BenchArgs {
    fn plan(&self) -> Result<BenchPlan> {
        if let Some(path) = &self.plan {
            return BenchPlan::read(path);
        }
        let lambda = match (self.grid, self.lambda.is_empty()) {
            (Some(k), _) => LambdaSpec::Grid(k),
            (None, false) => LambdaSpec::Values(self.lambda.clone()),
            (None, true) => LambdaSpec::Grid(3),
        };
        let plan = BenchPlan {
            cells: vec![CellSpec {
                p: self.p.expect("clap requires --p without --plan"),
                n: self.n.clone(),
                pairs: self.pairs,
                lambda,
                seed: self.seed,
                variants: self.variants.clone(),
                repetitions: self.repetitions,
                eps_subg: self.eps_subg,
                eps_func: self.eps_func,
                max_iter: self.max_iter,
            }],
        };
        plan.validate()?;
        Ok(plan)
    }
}

#[derive(Args, Debug)]
struct CertifyArgs {
    /// Estimate as sparse triplets.
    #[arg(long)]
    estimate: PathBuf,
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    lambda: f64,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
}

#[derive(Serialize)]
struct Bounds {
    m: f64,
    a: f64,
    log_a: f64,
    b: f64,
    lipschitz: f64,
}

#[derive(Serialize)]
struct Certificate {
    kkt: KktReport,
    objective: f64,
    /// Level set of the default starting point `diag(1/√s_ii)`.
    bounds: Bounds,
    estimate_in_bounds: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    dual_excess_from_data: Option<f64>,
}

/// Parses `args` (including the program name) and runs the subcommand.
/// Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let outcome = match cli.command {
        Command::Synth(a) => cmd_synth(&a),
        Command::Solve(a) => cmd_solve(&a),
        Command::Bench(a) => cmd_bench(&a),
        Command::Certify(a) => cmd_certify(&a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::StepUnderflow { .. } | Error::InnerSolverCap { .. } => EXIT_ABORTED,
                _ => EXIT_INPUT,
            }
        }
    }
}

fn cmd_synth(a: &SynthArgs) -> Result<i32> {
    let spec = SynthSpec::new(a.p, a.pairs, a.n, a.seed);
    let truth = generate_sparse_concentration(&spec)?;
    let y = sample_gaussian(&truth, a.n, a.seed)?;
    write_dense_csv(y.values(), &a.out_data)?;
    write_sparse_triplets(&truth, &a.out_truth)?;
    println!("p={} n={} nnz={} seed={}", a.p, a.n, truth.nnz_offdiag(), a.seed);
    Ok(EXIT_OK)
}

fn cmd_solve(a: &SolveArgs) -> Result<i32> {
    let problem = match a.input.load()? {
        Input::Data(y) => Problem::from_data(&y, false)?,
        Input::Covariance(s) => Problem::from_covariance(s),
    };
    let penalty = PenaltyMatrix::uniform(problem.p(), a.lambda)?;
    let config = SolverConfig::new(a.variant)
        .with_tolerances(a.eps_subg, a.eps_func)
        .with_max_iter(a.max_iter);
    let result = solve(&problem, &penalty, &config)?;
    if let Some(path) = &a.out {
        write_sparse_triplets(&result.estimate, path)?;
    }
    if let Some(path) = &a.trace {
        write_trace(&result.trace, path)?;
    }
    println!(
        "variant={} converged={} iterations={} objective={} delta_subg={} nnz={} seconds={:.6}",
        result.variant,
        result.converged,
        result.iterations,
        format_float(result.objective),
        format_float(result.delta_subg),
        result.estimate.nnz_offdiag(),
        result.wall_time.as_secs_f64()
    );
    Ok(if result.converged { EXIT_OK } else { EXIT_MAX_ITER })
}

fn cmd_bench(a: &BenchArgs) -> Result<i32> {
    let plan = a.plan()?;
    let mut options = RunOptions::from_env()?;
    options.trace_dir = a.trace_dir.clone();
    let report = run_plan(&plan, &options)?;
    write_bench_table(&report.rows, &report.variants, &a.out)?;
    println!("{} rows written to {}", report.rows.len(), a.out.display());
    Ok(EXIT_OK)
}

fn cmd_certify(a: &CertifyArgs) -> Result<i32> {
    let estimate = read_sparse_triplets(&a.estimate)?;
    let (s, data) = match a.input.load()? {
        Input::Data(y) => (sample_covariance(&y, false)?, Some(y)),
        Input::Covariance(s) => (s, None),
    };
    if estimate.p() != s.p() {
        return Err(Error::DimensionMismatch {
            expected: s.p(),
            found: estimate.p(),
        });
    }
    let penalty = PenaltyMatrix::uniform(s.p(), a.lambda)?;
    let kkt = kkt_check(&estimate, &s, &penalty, a.tol)?;
    let start = Problem::from_covariance(s.clone()).default_initial()?;
    let lb = level_set_bounds_at(&s, &penalty, &start)?;
    let dual_excess_from_data = match &data {
        Some(y) => Some(dual_feasibility_from_data(y, &estimate, &penalty)?),
        None => None,
    };
    let pass = kkt.pass;
    let cert = Certificate {
        objective: objective(&estimate, &s, &penalty)?,
        estimate_in_bounds: lb.contains_diagonal(estimate.min_diagonal(), estimate.max_diagonal()),
        kkt,
        bounds: Bounds {
            m: lb.m,
            a: lb.a,
            log_a: lb.log_a,
            b: lb.b,
            lipschitz: lb.lipschitz,
        },
        dual_excess_from_data,
    };
    let json = serde_json::to_string_pretty(&cert).map_err(|e| Error::InvalidInput(e.to_string()))?;
    println!("{json}");
    Ok(if pass { EXIT_OK } else { EXIT_CERTIFICATE_FAILED })
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(run(["concord", "solve", "--lambda", "0.1"]), EXIT_INPUT);
        assert_eq!(
            run([
                "concord",
                "synth",
                "--p",
                "3",
                "--pairs",
                "1",
                "--n",
                "4",
                "--out-truth",
                "t"
            ]),
            EXIT_INPUT
        );
        assert_eq!(
            run(["concord", "solve", "--cov", "a", "--data", "b", "--lambda", "0.1"]),
            EXIT_INPUT
        );
    }
}
