//! Benchmark plans: synthetic cells × penalties × variants, timed and
//! tabulated.
//!
//! Cells run concurrently (one solve per worker, each solve sequential
//! internally) and rows are merged back in plan order, so the table layout
//! does not depend on scheduling. Only the timing columns vary between runs.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::io::{write_trace, BenchEntry, BenchRow};
use crate::model::{sample_covariance, DataMatrix, PenaltyMatrix};
use crate::solvers::{solve, Problem, SolverConfig, Variant};
use crate::synth::{generate_sparse_concentration, lambda_grid, sample_gaussian, SynthSpec};
use crate::{Error, Exec, Result};

/// Environment variable capping the number of benchmark workers.
pub const THREADS_ENV: &str = "CONCORD_THREADS";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LambdaSpec {
    /// Log-spaced grid on `[0.05·λ_max, 1.05·λ_max]` of each sample.
    Grid(usize),
    Values(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellSpec {
    pub p: usize,
    pub n: Vec<usize>,
    /// Nonzero off-diagonal pairs of the true matrix; about 1% of the
    /// available slots when omitted.
    #[serde(default)]
    pub pairs: Option<usize>,
    pub lambda: LambdaSpec,
    #[serde(default)]
    pub seed: u64,
    pub variants: Vec<Variant>,
    #[serde(default = "one")]
    pub repetitions: usize,
    #[serde(default = "default_eps_subg")]
    pub eps_subg: f64,
    #[serde(default = "default_eps_func")]
    pub eps_func: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn one() -> usize {
    1
}
fn default_eps_subg() -> f64 {
    1e-5
}
fn default_eps_func() -> f64 {
    1e-8
}
fn default_max_iter() -> usize {
    1000
}

impl CellSpec {
    pub fn pairs(&self) -> usize {
        self.pairs
            .unwrap_or_else(|| ((self.p * self.p.saturating_sub(1) / 2) as f64 * 0.01).round() as usize)
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if self.n.is_empty() {
            return bad("cell needs at least one sample size".into());
        }
        if self.variants.is_empty() {
            return bad("cell needs at least one variant".into());
        }
        if self.repetitions == 0 {
            return bad("repetitions must be at least 1".into());
        }
        match &self.lambda {
            LambdaSpec::Grid(k) if *k < 2 => bad(format!("grid needs at least 2 points, got {k}")),
            LambdaSpec::Values(v) if v.is_empty() => bad("empty lambda list".into()),
            LambdaSpec::Values(v) if v.iter().any(|l| !(*l >= 0.0) || !l.is_finite()) => {
                bad("lambda values must be finite and nonnegative".into())
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchPlan {
    pub cells: Vec<CellSpec>,
}

impl BenchPlan {
    pub fn from_json(text: &str) -> Result<Self> {
        let plan: BenchPlan =
            serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("invalid bench plan: {e}")))?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::InvalidInput(m) => Error::parse(path, 1, 1, m),
            e => e,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.cells.is_empty() {
            return Err(Error::InvalidInput("plan has no cells".into()));
        }
        self.cells.iter().try_for_each(CellSpec::validate)
    }

    /// All variants of the plan, in order of first appearance.
    pub fn variants(&self) -> Vec<Variant> {
        let mut out = Vec::new();
        for c in &self.cells {
            for v in &c.variants {
                if !out.contains(v) {
                    out.push(*v);
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Worker cap; all available cores when `None`.
    pub threads: Option<usize>,
    /// Directory for per-run traces (first repetition of each run).
    pub trace_dir: Option<PathBuf>,
}

impl RunOptions {
    /// Reads the worker cap from the environment.
    pub fn from_env() -> Result<Self> {
        let threads = match std::env::var(THREADS_ENV) {
            Ok(v) => match v.trim().parse::<usize>() {
                Ok(t) if t > 0 => Some(t),
                _ => {
                    return Err(Error::InvalidInput(format!(
                        "{THREADS_ENV} must be a positive integer, got `{v}`"
                    )))
                }
            },
            Err(_) => None,
        };
        Ok(RunOptions {
            threads,
            trace_dir: None,
        })
    }
}

/// One `(p, n, λ)` row waiting to run.
struct Task {
    cell: usize,
    p: usize,
    n: usize,
    lambda_index: usize,
    lambda: f64,
    problem: Arc<Problem>,
}

#[derive(Clone, Debug)]
pub struct BenchReport {
    pub variants: Vec<Variant>,
    pub rows: Vec<BenchRow>,
}

/// Generates the data for every cell and runs all solves.
pub fn run_plan(plan: &BenchPlan, options: &RunOptions) -> Result<BenchReport> {
    plan.validate()?;
    let variants = plan.variants();
    if let Some(dir) = &options.trace_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }

    let mut tasks = Vec::new();
    for (ci, cell) in plan.cells.iter().enumerate() {
        let truth = generate_sparse_concentration(&SynthSpec::new(cell.p, cell.pairs(), 1, cell.seed))?;
        for &n in &cell.n {
            let y = sample_gaussian(&truth, n, cell.seed.wrapping_add(n as u64))?;
            let lambdas = match &cell.lambda {
                LambdaSpec::Grid(k) => lambda_grid(&sample_covariance(&y, true)?, *k)?,
                LambdaSpec::Values(v) => v.clone(),
            };
            let problem = Arc::new(Problem::from_data(&y.centered()?, false)?);
            for (li, &lambda) in lambdas.iter().enumerate() {
                tasks.push(Task {
                    cell: ci,
                    p: cell.p,
                    n,
                    lambda_index: li,
                    lambda,
                    problem: Arc::clone(&problem),
                });
            }
        }
    }

    let run = |t: &Task| run_task(t, &plan.cells[t.cell], &variants, options.trace_dir.as_deref());
    let rows = run_all(&tasks, options.threads, run)?;
    Ok(BenchReport { variants, rows })
}

#[cfg(feature = "parallel")]
fn run_all<F>(tasks: &[Task], threads: Option<usize>, f: F) -> Result<Vec<BenchRow>>
where
    F: Fn(&Task) -> Result<BenchRow> + Send + Sync,
{
    use rayon::prelude::*;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidInput(format!("cannot start worker pool: {e}")))?;
    pool.install(|| tasks.par_iter().map(&f).collect())
}

#[cfg(not(feature = "parallel"))]
fn run_all<F>(tasks: &[Task], _threads: Option<usize>, f: F) -> Result<Vec<BenchRow>>
where
    F: Fn(&Task) -> Result<BenchRow>,
{
    tasks.iter().map(f).collect()
}

fn run_task(task: &Task, cell: &CellSpec, variants: &[Variant], trace_dir: Option<&Path>) -> Result<BenchRow> {
    let penalty = PenaltyMatrix::uniform(task.p, task.lambda)?;
    let mut nz_pct = None;
    let mut entries = Vec::with_capacity(variants.len());
    for &variant in variants {
        if !cell.variants.contains(&variant) {
            entries.push(BenchEntry::Skipped);
            continue;
        }
        let config = SolverConfig::new(variant)
            .with_tolerances(cell.eps_subg, cell.eps_func)
            .with_max_iter(cell.max_iter)
            .with_exec(Exec::Sequential);
        let mut seconds = Vec::with_capacity(cell.repetitions);
        let mut outcome = None;
        for rep in 0..cell.repetitions {
            match solve(&task.problem, &penalty, &config) {
                Ok(result) => {
                    seconds.push(result.wall_time.as_secs_f64());
                    if rep == 0 {
                        if let Some(dir) = trace_dir {
                            let name = format!("p{}_n{}_l{}_{}.csv", task.p, task.n, task.lambda_index, variant);
                            write_trace(&result.trace, dir.join(name))?;
                        }
                    }
                    if nz_pct.is_none() {
                        nz_pct = Some(result.estimate.nz_percent());
                    }
                    outcome = Some(Ok(result.iterations));
                }
                Err(e) => {
                    outcome = Some(Err(e.to_string()));
                    break;
                }
            }
        }
        entries.push(match outcome.expect("at least one repetition") {
            Ok(iterations) => BenchEntry::Done {
                iterations,
                seconds: median(&mut seconds),
            },
            Err(msg) => BenchEntry::Failed(msg),
        });
    }
    Ok(BenchRow {
        p: task.p,
        n: task.n,
        lambda: task.lambda,
        nz_pct,
        entries,
    })
}

/// Median; the mean of the two middle values for even lengths.
pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    }
}

/// Data for one `(p, n)` benchmark sample, as generated by [`run_plan`].
pub fn cell_sample(p: usize, pairs: usize, n: usize, seed: u64) -> Result<DataMatrix> {
    let truth = generate_sparse_concentration(&SynthSpec::new(p, pairs, 1, seed))?;
    sample_gaussian(&truth, n, seed.wrapping_add(n as u64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plan_parsing() {
        let plan = BenchPlan::from_json(
            r#"{"cells":[{"p":20,"n":[10,30],"lambda":{"grid":3},"seed":4,
                "variants":["concord","ccista_0"],"repetitions":2}]}"#,
        )
        .unwrap();
        let c = &plan.cells[0];
        assert_eq!(c.lambda, LambdaSpec::Grid(3));
        assert_eq!(c.pairs(), 2);
        assert_eq!(c.eps_subg, 1e-5);
        assert_eq!(plan.variants(), vec![Variant::Concord, Variant::CcIsta0]);

        assert!(BenchPlan::from_json(r#"{"cells":[]}"#).is_err());
        assert!(
            BenchPlan::from_json(r#"{"cells":[{"p":5,"n":[5],"lambda":{"values":[0.1]},"variants":["bogus"]}]}"#)
                .is_err()
        );
        assert!(BenchPlan::from_json(
            r#"{"cells":[{"p":5,"n":[5],"lambda":{"values":[0.1]},"variants":["pnopt"],"repetitions":0}]}"#
        )
        .is_err());
    }

    #[test]
    fn median_rule() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(median(&mut [7.0]), 7.0);
    }

    #[test]
    fn small_plan_runs() {
        let plan = BenchPlan {
            cells: vec![CellSpec {
                p: 12,
                n: vec![20, 40],
                pairs: Some(6),
                lambda: LambdaSpec::Grid(2),
                seed: 1,
                variants: vec![Variant::Concord, Variant::CcIsta0],
                repetitions: 3,
                eps_subg: 1e-5,
                eps_func: 1e-8,
                max_iter: 1000,
            }],
        };
        let report = run_plan(
            &plan,
            &RunOptions {
                threads: Some(2),
                trace_dir: None,
            },
        )
        .unwrap();
        assert_eq!(report.rows.len(), 4);
        assert_eq!(
            report.rows.iter().map(|r| (r.n, r.lambda > 0.0)).collect::<Vec<_>>(),
            vec![(20, true), (20, true), (40, true), (40, true)]
        );
        for r in &report.rows {
            assert!(r.entries.iter().all(|e| matches!(e, BenchEntry::Done { .. })));
            // the top of the grid exceeds λ_max: diagonal estimate
        }
        assert_eq!(report.rows[0].nz_pct, Some(0.0));
    }
}
