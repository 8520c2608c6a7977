//! Command-line front end. Every command writes one JSON document (to
//! `--out` or standard output) carrying `"schema": 1`.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::deflation::{compute_gsvd, tgsvd_solve, TgsvdOutput, TgsvdPlan};
use crate::error::{GsvdError, Result};
use crate::gdgsvd::{
    ConvergenceRecord, DeflationMode, SolverOptions, StopRule, Variant, Which,
};
use crate::mdgsvd::mdgsvd_solve;
use crate::operator::{read_matrix_market, read_vectors, MatrixPair};
use crate::problems::{gen_example, gen_regu_problem, ProblemInstance, RegProblem};
use crate::regularization::{run_tikhonov, TikhonovConfig, TikhonovMode};

pub const SCHEMA: u32 = 1;

pub const EXIT_CONVERGED: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;

/// Thread cap for `bench`.
pub const THREADS_ENV: &str = "GSVD_ITER_THREADS";

#[derive(Debug, Parser)]
#[command(name = "gsvd-iter", version, about = "Extremal generalized singular values of a matrix pair")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute extremal generalized singular pairs of a pair read from Matrix Market files.
    Solve(SolveArgs),
    /// Median matrix-vector products over repeated trials on a synthetic example.
    Bench(BenchArgs),
    /// Tikhonov regularization through an approximate truncated GSVD.
    Tikhonov(TikhonovArgs),
    /// Write a generated problem to Matrix Market files.
    GenExport(GenExportArgs),
}

#[derive(Debug, Args, Clone)]
pub struct SolverFlags {
    #[arg(long, value_enum, default_value = "largest")]
    pub which: Which,
    #[arg(long, value_enum, default_value = "gd")]
    pub algorithm: Variant,
    #[arg(long, default_value_t = 10)]
    pub min_dim: usize,
    #[arg(long, default_value_t = 30)]
    pub max_dim: usize,
    #[arg(long, default_value_t = 100)]
    pub max_restarts: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl SolverFlags {
    fn options(&self) -> SolverOptions {
        SolverOptions {
            which: self.which,
            min_dim: self.min_dim,
            max_dim: self.max_dim,
            max_restarts: self.max_restarts,
            tol: self.tol,
            seed: self.seed,
            variant: self.algorithm,
            ..SolverOptions::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    #[command(flatten)]
    pub solver: SolverFlags,
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    #[arg(long, value_enum, default_value = "restrict")]
    pub deflation: DeflationMode,
    /// Vectors spanning part of the null space of B, locked as the pair (1, 0).
    #[arg(long)]
    pub seed_vectors: Option<PathBuf>,
    /// Include u, v and x vectors in the output.
    #[arg(long)]
    pub vectors: bool,
    /// Convergence history as CSV.
    #[arg(long)]
    pub curve: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchStop {
    /// Stop on the value error against the known extremal pair.
    Value,
    /// Stop on the backward error estimate.
    Backward,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub example: String,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 25)]
    pub trials: usize,
    /// Seed of the generated instance; trials vary only the start vector.
    #[arg(long, default_value_t = 0)]
    pub instance_seed: u64,
    #[arg(long, value_enum, default_value = "value")]
    pub stop: BenchStop,
    #[command(flatten)]
    pub solver: SolverFlags,
    /// Per-trial rows as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TikhonovArgs {
    #[arg(long)]
    pub problem: String,
    #[arg(long, default_value_t = 256)]
    pub n: usize,
    #[arg(long, default_value_t = 15)]
    pub pairs: usize,
    #[arg(long, default_value_t = 0.01)]
    pub noise: f64,
    /// Seeds both the noise and the solver start vectors.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "first")]
    pub mode: TikhonovMode,
    #[arg(long, value_enum, default_value = "md")]
    pub algorithm: Variant,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 10)]
    pub min_dim: usize,
    #[arg(long, default_value_t = 30)]
    pub max_dim: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenExportArgs {
    /// Synthetic example id (1, 2a-c, 3a-c, 4).
    #[arg(long, conflicts_with = "problem", required_unless_present = "problem")]
    pub example: Option<String>,
    /// Regularization problem name.
    #[arg(long)]
    pub problem: Option<String>,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub dir: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parse arguments, run the command and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_CONVERGED };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

pub fn execute(cmd: &Command) -> Result<i32> {
    match cmd {
        Command::Solve(a) => cmd_solve(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Tikhonov(a) => cmd_tikhonov(a),
        Command::GenExport(a) => cmd_gen_export(a),
    }
}

fn with_context(path: &Path, e: GsvdError) -> GsvdError {
    match e {
        GsvdError::Io(io) => GsvdError::Io(std::io::Error::new(
            io.kind(),
            format!("{}: {io}", path.display()),
        )),
        GsvdError::Parse { line, message } => GsvdError::Parse {
            line,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    }
}

fn emit(out: Option<&Path>, value: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("JSON values serialize");
    match out {
        Some(path) => {
            let mut f = BufWriter::new(File::create(path).map_err(|e| with_context(path, e.into()))?);
            writeln!(f, "{text}")?;
            f.flush()?;
        }
        None => writeln!(std::io::stdout().lock(), "{text}")?,
    }
    Ok(())
}

fn exit_code(converged: bool) -> i32 {
    if converged {
        EXIT_CONVERGED
    } else {
        EXIT_NOT_CONVERGED
    }
}

fn finite_or_null(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

fn matrix_columns(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    m.column_iter().map(|c| c.iter().copied().collect()).collect()
}

/// Convergence history as CSV with a fixed column order.
pub fn write_curve(path: &Path, records: &[ConvergenceRecord]) -> Result<()> {
    let mut f = BufWriter::new(File::create(path).map_err(|e| with_context(path, e.into()))?);
    writeln!(f, "solve,mv,dim,c1,s1,residual_norm,backward_error,value_error")?;
    for (i, rec) in records.iter().enumerate() {
        for e in &rec.entries {
            let ve = e.value_error.map(|v| format!("{v:e}")).unwrap_or_default();
            writeln!(
                f,
                "{i},{},{},{:e},{:e},{:e},{:e},{ve}",
                e.mv, e.dim, e.c1, e.s1, e.residual_norm, e.backward_error
            )?;
        }
    }
    f.flush()?;
    Ok(())
}

fn load_pair(a: &Path, b: &Path) -> Result<MatrixPair> {
    let ma = read_matrix_market(a).map_err(|e| with_context(a, e))?;
    let mb = read_matrix_market(b).map_err(|e| with_context(b, e))?;
    MatrixPair::new(ma.into_operator(), mb.into_operator())
}

fn solve_json(out: &TgsvdOutput, vectors: bool) -> Value {
    let g = &out.gsvd;
    let pairs: Vec<Value> = (0..g.len())
        .map(|i| json!({ "c": g.c[i], "s": g.s[i], "sigma": finite_or_null(g.c[i] / g.s[i]) }))
        .collect();
    let mut v = json!({
        "pairs": pairs,
        "mv_count": out.mv_count,
        "lock_mv": out.lock_mv,
        "converged": out.converged,
        "solves": out.solves,
        "records": out.records,
    });
    if vectors {
        v["vectors"] = json!({
            "u": matrix_columns(&g.u),
            "v": matrix_columns(&g.v),
            "x": matrix_columns(&g.x()),
        });
    }
    v
}

pub fn cmd_solve(args: &SolveArgs) -> Result<i32> {
    let start = Instant::now();
    let pair = load_pair(&args.a, &args.b)?;
    let mut opts = args.solver.options();
    opts.count = args.count;
    opts.deflation = args.deflation;
    let out = match &args.seed_vectors {
        Some(path) => {
            let seeds = read_vectors(path).map_err(|e| with_context(path, e))?;
            if args.count <= seeds.len() {
                return Err(GsvdError::InvalidOptions(format!(
                    "--count {} must exceed the number of seed vectors ({})",
                    args.count,
                    seeds.len()
                )));
            }
            let plan = TgsvdPlan {
                solves: args.count - seeds.len(),
                total: args.count,
                seeds,
            };
            tgsvd_solve(&pair, &plan, &opts)?
        }
        None => compute_gsvd(&pair, &opts)?,
    };
    if let Some(path) = &args.curve {
        write_curve(path, &out.records)?;
    }
    let mut doc = json!({
        "schema": SCHEMA,
        "command": "solve",
        "which": opts.which,
        "algorithm": opts.variant,
        "deflation": opts.deflation,
        "count": opts.count,
        "tol": opts.tol,
        "seed": opts.seed,
    });
    merge(&mut doc, solve_json(&out, args.vectors));
    doc["wall_time_s"] = json!(start.elapsed().as_secs_f64());
    emit(args.out.as_deref(), &doc)?;
    Ok(exit_code(out.converged))
}

fn merge(doc: &mut Value, extra: Value) {
    if let (Value::Object(d), Value::Object(e)) = (doc, extra) {
        d.extend(e);
    }
}

/// One benchmark trial.
#[derive(Clone, Debug, Serialize)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    pub mv_count: usize,
    pub restarts: usize,
    pub converged: bool,
    pub monotonicity_violations: usize,
}

/// Median of a nonempty sample; the mean of the two middle values for even
/// sizes.
pub fn median(values: &[usize]) -> f64 {
    let mut v = values.to_vec();
    v.sort_unstable();
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2] as f64
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2]) as f64
    }
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(text) = std::env::var(THREADS_ENV) {
        let k: usize = text.trim().parse().map_err(|_| {
            GsvdError::InvalidOptions(format!("{THREADS_ENV} must be a positive integer, got `{text}`"))
        })?;
        builder = builder.num_threads(k.max(1));
    }
    builder
        .build()
        .map_err(|e| GsvdError::InvalidOptions(format!("thread pool: {e}")))
}

/// Run `trials` single-pair solves on one instance with start seeds
/// `0..trials`; results are ordered by trial index.
pub fn bench_trials(
    inst: &ProblemInstance,
    base: &SolverOptions,
    trials: usize,
) -> Result<Vec<TrialResult>> {
    let pool = thread_pool()?;
    pool.install(|| {
        (0..trials)
            .into_par_iter()
            .map(|t| {
                let opts = SolverOptions {
                    seed: t as u64,
                    ..base.clone()
                };
                let out = match opts.variant {
                    Variant::Gd => crate::gdgsvd::gdgsvd_solve(&inst.pair, &opts),
                    Variant::BbGd => crate::gdgsvd::bb_gdgsvd_solve(&inst.pair, &opts),
                    Variant::Md => mdgsvd_solve(&inst.pair, &opts),
                }?;
                Ok(TrialResult {
                    trial: t,
                    seed: t as u64,
                    mv_count: out.mv_count,
                    restarts: out.restarts,
                    converged: out.converged,
                    monotonicity_violations: out.record.monotonicity_violations(opts.which, 1e-12),
                })
            })
            .collect()
    })
}

pub fn cmd_bench(args: &BenchArgs) -> Result<i32> {
    if args.trials == 0 {
        return Err(GsvdError::InvalidOptions("--trials must be at least 1".into()));
    }
    let start = Instant::now();
    let inst = gen_example(&args.example, args.n, args.instance_seed)?;
    let mut opts = args.solver.options();
    opts.stop = match (args.stop, inst.exact_pair(opts.which)) {
        (BenchStop::Value, Some((c, s))) => StopRule::ValueError { c, s },
        (BenchStop::Value, None) => {
            return Err(GsvdError::InvalidOptions(format!(
                "example {} has no known pair for --stop value",
                args.example
            )))
        }
        (BenchStop::Backward, _) => StopRule::BackwardError,
    };
    let results = bench_trials(&inst, &opts, args.trials)?;
    let counts: Vec<usize> = results.iter().map(|r| r.mv_count).collect();
    let all_converged = results.iter().all(|r| r.converged);
    if let Some(path) = &args.csv {
        let mut f = BufWriter::new(File::create(path).map_err(|e| with_context(path, e.into()))?);
        writeln!(f, "trial,seed,mv_count,restarts,converged,monotonicity_violations")?;
        for r in &results {
            writeln!(
                f,
                "{},{},{},{},{},{}",
                r.trial, r.seed, r.mv_count, r.restarts, r.converged, r.monotonicity_violations
            )?;
        }
        f.flush()?;
    }
    let doc = json!({
        "schema": SCHEMA,
        "command": "bench",
        "example": args.example,
        "n": args.n,
        "instance_seed": args.instance_seed,
        "which": opts.which,
        "algorithm": opts.variant,
        "stop": args.stop,
        "tol": opts.tol,
        "min_dim": opts.min_dim,
        "max_dim": opts.max_dim,
        "trials": results,
        "median_mv": median(&counts),
        "converged": results.iter().filter(|r| r.converged).count(),
        "wall_time_s": start.elapsed().as_secs_f64(),
    });
    emit(args.out.as_deref(), &doc)?;
    Ok(exit_code(all_converged))
}

pub fn cmd_tikhonov(args: &TikhonovArgs) -> Result<i32> {
    let start = Instant::now();
    let problem: RegProblem = args.problem.parse()?;
    let mut cfg = TikhonovConfig::new(problem, args.n);
    cfg.pairs = args.pairs;
    cfg.noise = args.noise;
    cfg.noise_seed = args.seed;
    cfg.mode = args.mode;
    cfg.solver.variant = args.algorithm;
    cfg.solver.tol = args.tol;
    cfg.solver.seed = args.seed;
    cfg.solver.min_dim = args.min_dim;
    cfg.solver.max_dim = args.max_dim;
    let report = run_tikhonov(&cfg)?;
    let mut doc = json!({ "schema": SCHEMA, "command": "tikhonov", "seed": args.seed, "tol": args.tol });
    let mut body = serde_json::to_value(&report).expect("report serializes");
    body["sigma"] = Value::Array(report.sigma.iter().map(|&s| finite_or_null(s)).collect());
    merge(&mut doc, body);
    doc["wall_time_s"] = json!(start.elapsed().as_secs_f64());
    emit(args.out.as_deref(), &doc)?;
    Ok(exit_code(report.converged))
}

pub fn cmd_gen_export(args: &GenExportArgs) -> Result<i32> {
    let inst = match (&args.example, &args.problem) {
        (Some(id), _) => gen_example(id, args.n, args.seed)?,
        (None, Some(name)) => gen_regu_problem(name.parse()?, args.n)?,
        (None, None) => {
            return Err(GsvdError::InvalidOptions(
                "one of --example or --problem is required".into(),
            ))
        }
    };
    inst.export(&args.dir).map_err(|e| with_context(&args.dir, e))?;
    let exact: Option<Vec<Value>> = inst
        .exact
        .as_ref()
        .map(|e| e.iter().map(|&(c, s)| json!({ "c": c, "s": s })).collect());
    let doc = json!({
        "schema": SCHEMA,
        "command": "gen-export",
        "label": inst.label,
        "n": inst.n(),
        "dir": args.dir.display().to_string(),
        "exact_pairs": exact,
    });
    emit(args.out.as_deref(), &doc)?;
    Ok(EXIT_CONVERGED)
}
