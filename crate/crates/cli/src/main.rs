//! `mot`: command-line front end for mot-core.
//!
//! Exit codes: 0 ok, 1 other failure, 2 unreadable or invalid input,
//! 3 solver ran out of iterations, 4 size cap, 5 file system error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use mot_core::bench::{self, SyntheticRun, WeightVector};
use mot_core::driver::{approx_mot, ApproxConfig, RoundTarget};
use mot_core::hardness::{self, TuVerdict};
use mot_core::io;
use mot_core::oracle::{self, DEFAULT_ORACLE_CAP};
use mot_core::report::fmt_f64;
use mot_core::{MotError, SolveReport, SolverKind};

const OUT_DIR_ENV: &str = "MOT_OUT_DIR";

#[derive(Parser)]
#[command(name = "mot", version, about = "Multimarginal optimal transport by greedy and accelerated Sinkhorn")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Approximate the transport problem given by a cost tensor and marginals.
    Solve(SolveArgs),
    /// Synthetic-image experiments.
    #[command(subcommand)]
    Bench(BenchCommand),
    /// Search the constraint matrix of the (n, m) problem for a non-unimodular minor.
    #[command(alias = "tu-check")]
    Tu(TuArgs),
    /// Exact linear programming on small instances.
    #[command(subcommand)]
    Oracle(OracleCommand),
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Greedy,
    Accel,
}

impl From<SolverArg> for SolverKind {
    fn from(s: SolverArg) -> Self {
        match s {
            SolverArg::Greedy => SolverKind::Greedy,
            SolverArg::Accel => SolverKind::Accelerated,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum BenchSolverArg {
    Greedy,
    Accel,
    Both,
}

impl BenchSolverArg {
    fn kinds(self) -> Vec<SolverKind> {
        match self {
            BenchSolverArg::Greedy => vec![SolverKind::Greedy],
            BenchSolverArg::Accel => vec![SolverKind::Accelerated],
            BenchSolverArg::Both => vec![SolverKind::Greedy, SolverKind::Accelerated],
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum RoundTargetArg {
    Original,
    Smoothed,
}

#[derive(Args)]
struct InstanceArgs {
    /// Cost tensor (inline JSON or manifest with a binary data file).
    #[arg(long)]
    cost: PathBuf,
    /// JSON array of marginal vectors.
    #[arg(long)]
    marginals: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    /// Overrides epsilon / (2 m log n).
    #[arg(long)]
    eta: Option<f64>,
    /// Overrides min(1, epsilon / (8 ||C||_inf)).
    #[arg(long)]
    eps_prime: Option<f64>,
    #[arg(long, value_enum, default_value = "greedy")]
    solver: SolverArg,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long, value_enum, default_value = "original")]
    round_target: RoundTargetArg,
    /// Compare against the exact LP optimum when the instance is small enough.
    #[arg(long)]
    oracle: bool,
    /// Output directory (default: $MOT_OUT_DIR or the current directory).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Solver traces and d(X) on random image triples.
    Synthetic(SyntheticArgs),
    /// Free-support barycenter of synthetic images as a weighted point cloud.
    Barycenter(BarycenterArgs),
}

#[derive(Args)]
struct SyntheticArgs {
    #[arg(long, default_value_t = 5)]
    side: usize,
    /// Number of seeds, run as `seed, seed + 1, ...`.
    #[arg(long, default_value_t = 10)]
    seeds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 3)]
    m: usize,
    #[arg(long, value_delimiter = ',', default_value = "0.2")]
    eta_list: Vec<f64>,
    #[arg(long, default_value_t = 1e-6)]
    eps_prime: f64,
    #[arg(long, value_enum, default_value = "both")]
    solver: BenchSolverArg,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BarycenterArgs {
    #[arg(long, default_value_t = 5)]
    side: usize,
    #[arg(long, default_value_t = 3)]
    m: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.2)]
    eta: f64,
    #[arg(long, default_value_t = 1e-6)]
    eps_prime: f64,
    #[arg(long, value_enum, default_value = "greedy")]
    solver: SolverArg,
    /// Barycenter weights; uniform when omitted.
    #[arg(long, value_delimiter = ',')]
    lambda: Option<Vec<f64>>,
    /// Also write a g x g PGM rendering.
    #[arg(long)]
    raster: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TuArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    #[arg(long)]
    max_order: Option<usize>,
    /// Axis whose block keeps all n rows; 0 to strip the last row of every block after the first.
    #[arg(long, default_value_t = hardness::DEFAULT_FULL_BLOCK)]
    full_block: usize,
    #[arg(long, default_value_t = hardness::DEFAULT_TU_BUDGET)]
    budget: u64,
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Solve the transport LP with the simplex method.
    Solve(OracleArgs),
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    /// Exact rational arithmetic instead of f64.
    #[arg(long)]
    exact: bool,
    #[arg(long, default_value_t = DEFAULT_ORACLE_CAP)]
    cap: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct RunManifest {
    command: String,
    params: Value,
    inputs: Vec<InputHash>,
    version: &'static str,
}

#[derive(Serialize)]
struct InputHash {
    path: String,
    sha256: String,
}

impl RunManifest {
    fn new(command: &str, params: Value, inputs: &[&Path]) -> Result<Self, MotError> {
        let inputs = inputs
            .iter()
            .map(|p| {
                let bytes = fs::read(p)?;
                Ok(InputHash {
                    path: p.display().to_string(),
                    sha256: hex::encode(Sha256::digest(&bytes)),
                })
            })
            .collect::<Result<_, MotError>>()?;
        Ok(RunManifest {
            command: command.to_string(),
            params,
            inputs,
            version: env!("CARGO_PKG_VERSION"),
        })
    }
}

fn exit_code(e: &MotError) -> u8 {
    match e {
        MotError::Parse(_)
        | MotError::Shape(_)
        | MotError::ShapeMismatch { .. }
        | MotError::InvalidInstance(_) => 2,
        MotError::NonConvergence { .. } => 3,
        MotError::SizeCap { .. } => 4,
        MotError::Io(_) => 5,
        MotError::AxisOutOfRange { .. } | MotError::Domain(_) => 1,
    }
}

fn out_dir(arg: Option<PathBuf>) -> Result<PathBuf, MotError> {
    let dir = arg
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn write_json(path: &Path, v: &impl Serialize) -> Result<(), MotError> {
    fs::write(path, serde_json::to_string_pretty(v)? + "\n")?;
    Ok(())
}

/// Report as JSON without the per-iteration trace, which goes to CSV.
fn report_summary(r: &SolveReport) -> Result<Value, MotError> {
    let mut v = serde_json::to_value(r)?;
    if let Some(obj) = v.as_object_mut() {
        obj.remove("trace");
    }
    Ok(v)
}

fn cmd_solve(a: SolveArgs) -> Result<(), MotError> {
    let inst = io::read_instance(&a.instance.cost, &a.instance.marginals)?;
    let dir = out_dir(a.out)?;
    let mut config = ApproxConfig::new(a.epsilon, a.solver.into());
    config.eta = a.eta;
    config.eps_prime = a.eps_prime;
    config.max_iter = a.max_iter;
    config.round_target = match a.round_target {
        RoundTargetArg::Original => RoundTarget::Original,
        RoundTargetArg::Smoothed => RoundTarget::Smoothed,
    };
    let mut params = serde_json::to_value(&config)?;
    let manifest_inputs = [a.instance.cost.as_path(), a.instance.marginals.as_path()];

    let res = match approx_mot(&inst, &config) {
        Ok(res) => res,
        Err(MotError::NonConvergence { max_iter, last_residue, report }) => {
            fs::write(dir.join("trace.csv"), report.trace_csv())?;
            let manifest = RunManifest::new("solve", params, &manifest_inputs)?;
            write_json(
                &dir.join("result.json"),
                &json!({ "manifest": manifest, "converged": false, "report": report_summary(&report)? }),
            )?;
            return Err(MotError::NonConvergence { max_iter, last_residue, report });
        }
        Err(e) => return Err(e),
    };
    params["resolved"] = serde_json::to_value(&res.params)?;

    let mut oracle_value = Value::Null;
    let mut gap = Value::Null;
    let mut satisfied = Value::Null;
    if a.oracle {
        match oracle::solve_exact_lp(&inst) {
            Ok(sol) => {
                let g = res.objective - sol.value;
                oracle_value = json!(sol.value);
                gap = json!(g);
                satisfied = json!(g <= a.epsilon);
            }
            Err(MotError::SizeCap { .. }) => {}
            Err(e) => return Err(e),
        }
    }

    let plan_files = io::write_tensor(&dir.join("plan.json"), &res.plan)?;
    fs::write(dir.join("trace.csv"), res.report.trace_csv())?;
    let manifest = RunManifest::new("solve", params, &manifest_inputs)?;
    let bundle = json!({
        "manifest": manifest,
        "converged": true,
        "objective": res.objective,
        "pre_round_objective": res.pre_round_objective,
        "pre_round_violation": res.pre_round_violation,
        "certified_gap": res.certified_gap(),
        "rounding": res.rounding,
        "report": report_summary(&res.report)?,
        "plan_files": plan_files.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect::<Vec<_>>(),
        "guarantee": { "oracle_value": oracle_value, "gap": gap, "satisfied": satisfied },
    });
    write_json(&dir.join("result.json"), &bundle)?;
    println!("objective {}", fmt_f64(res.objective));
    println!("iterations {}", res.report.iterations);
    if let Some(v) = oracle_value.as_f64() {
        println!("oracle {}", fmt_f64(v));
    }
    if satisfied == json!(false) {
        return Err(MotError::Domain(format!("gap {gap} exceeds epsilon {}", a.epsilon)));
    }
    Ok(())
}

fn run_jobs(tasks: &[(SolverKind, f64, u64)], a: &SyntheticArgs) -> Vec<Result<(SyntheticRun, f64), MotError>> {
    let run = |&(kind, eta, seed): &(SolverKind, f64, u64)| {
        let start = Instant::now();
        bench::run_synthetic(a.side, a.m, seed, eta, a.eps_prime, kind, a.max_iter).map(|r| (r, start.elapsed().as_secs_f64()))
    };
    let jobs = a.jobs.max(1).min(tasks.len().max(1));
    if jobs == 1 {
        return tasks.iter().map(run).collect();
    }
    let chunk = tasks.len().div_ceil(jobs);
    std::thread::scope(|s| {
        let handles: Vec<_> = tasks.chunks(chunk).map(|c| s.spawn(move || c.iter().map(run).collect::<Vec<_>>())).collect();
        handles.into_iter().flat_map(|h| h.join().expect("bench worker panicked")).collect()
    })
}

fn cmd_bench_synthetic(a: SyntheticArgs) -> Result<(), MotError> {
    let dir = out_dir(a.out.clone())?;
    let traces = dir.join("traces");
    fs::create_dir_all(&traces)?;
    let mut tasks = Vec::new();
    for kind in a.solver.kinds() {
        for &eta in &a.eta_list {
            for s in 0..a.seeds as u64 {
                tasks.push((kind, eta, a.seed + s));
            }
        }
    }
    let results = run_jobs(&tasks, &a);

    let mut runs = String::from("seed,solver,eta,t,trace_file,d\n");
    let mut timings = String::from("seed,solver,eta,runtime_s\n");
    let mut summary = Vec::new();
    for (i, ((kind, eta, seed), res)) in tasks.iter().zip(results).enumerate() {
        let (run, secs) = res?;
        let report = run.report.as_ref().expect("run keeps its report");
        let eta_idx = a.eta_list.iter().position(|e| e == eta).unwrap_or(i);
        let file = format!("{}_eta{}_seed{}.csv", kind.name(), eta_idx, seed);
        fs::write(traces.join(&file), report.trace_csv())?;
        runs.push_str(&format!("{},{},{},{},traces/{},{}\n", seed, kind.name(), fmt_f64(*eta), run.iterations, file, fmt_f64(run.d)));
        timings.push_str(&format!("{},{},{},{}\n", seed, kind.name(), fmt_f64(*eta), fmt_f64(secs)));
        summary.push(run);
    }
    fs::write(dir.join("runs.csv"), runs)?;
    // wall-clock times differ between runs, so they stay out of the reproducible files
    fs::write(dir.join("timings.csv"), timings)?;

    let mut per_solver = Vec::new();
    for kind in a.solver.kinds() {
        for &eta in &a.eta_list {
            let mut its: Vec<usize> = summary.iter().filter(|r| r.solver == kind && r.eta == eta).map(|r| r.iterations).collect();
            its.sort_unstable();
            let median = if its.is_empty() {
                0.0
            } else if its.len() % 2 == 1 {
                its[its.len() / 2] as f64
            } else {
                (its[its.len() / 2 - 1] + its[its.len() / 2]) as f64 / 2.0
            };
            per_solver.push(json!({ "solver": kind, "eta": eta, "median_iterations": median, "runs": its.len() }));
        }
    }
    let params = json!({
        "side": a.side, "m": a.m, "seed": a.seed, "seeds": a.seeds, "eta_list": a.eta_list,
        "eps_prime": a.eps_prime, "max_iter": a.max_iter,
        "fg_fraction": bench::DEFAULT_FG_FRACTION,
    });
    let manifest = RunManifest::new("bench synthetic", params, &[])?;
    write_json(&dir.join("summary.json"), &json!({ "manifest": manifest, "medians": per_solver, "runs": summary }))?;
    println!("{} runs written to {}", summary.len(), dir.display());
    if summary.iter().any(|r| !r.converged) {
        return Err(MotError::NonConvergence {
            max_iter: a.max_iter.unwrap_or(0),
            last_residue: summary.iter().map(|r| r.final_residue).fold(0.0, f64::max),
            report: Box::new(summary.into_iter().find(|r| !r.converged).and_then(|r| r.report).expect("report kept")),
        });
    }
    Ok(())
}

fn cmd_bench_barycenter(a: BarycenterArgs) -> Result<(), MotError> {
    let dir = out_dir(a.out)?;
    let lambda = match &a.lambda {
        Some(l) => WeightVector::new(l.clone())?,
        None => WeightVector::uniform(a.m),
    };
    if lambda.len() != a.m {
        return Err(MotError::InvalidInstance(format!("{} weights for {} images", lambda.len(), a.m)));
    }
    let (cloud, report) = bench::synthetic_barycenter(a.side, a.m, a.seed, a.eta, a.eps_prime, a.solver.into(), &lambda)?;
    fs::write(dir.join("barycenter.csv"), cloud.to_csv())?;
    if let Some(g) = a.raster {
        let img = bench::rasterize(&cloud, g)?;
        fs::write(dir.join("barycenter.pgm"), bench::to_pgm(&img, g))?;
    }
    let params = json!({
        "side": a.side, "m": a.m, "seed": a.seed, "eta": a.eta, "eps_prime": a.eps_prime,
        "solver": SolverKind::from(a.solver), "lambda": lambda.as_slice(), "raster": a.raster,
        "mass_threshold": bench::DEFAULT_MASS_THRESHOLD,
    });
    let manifest = RunManifest::new("bench barycenter", params, &[])?;
    write_json(
        &dir.join("result.json"),
        &json!({ "manifest": manifest, "points": cloud.len(), "total_weight": cloud.total_weight(), "report": report_summary(&report)? }),
    )?;
    println!("{} support points", cloud.len());
    Ok(())
}

fn cmd_tu(a: TuArgs) -> Result<(), MotError> {
    let mat = hardness::build_primal_constraints_with(a.n, a.m, a.full_block)?;
    println!("constraint matrix ({} x {}):", mat.rows(), mat.cols());
    print!("{mat}");
    let verdict = hardness::tu_check_with_budget(&mat, a.max_order, a.budget)?;
    match &verdict {
        TuVerdict::TuUpToOrder { order, checked } => {
            println!("verdict: every minor up to order {order} is in {{-1, 0, 1}} ({checked} checked)");
        }
        TuVerdict::Witness(w) => {
            println!("verdict: not totally unimodular");
            println!("witness rows {:?} cols {:?} det = {}", w.rows, w.cols, w.det);
        }
        TuVerdict::Partial { incomplete_order, checked } => {
            println!("verdict: inconclusive, budget ran out at order {incomplete_order} ({checked} checked)");
        }
    }
    println!("{}", serde_json::to_string(&verdict)?);
    Ok(())
}

fn cmd_oracle(a: OracleArgs) -> Result<(), MotError> {
    let inst = io::read_instance(&a.instance.cost, &a.instance.marginals)?;
    oracle::build_lp_with_cap(&inst, a.cap)?;
    let (sol, exact) = if a.exact {
        let (sol, v) = oracle::solve_exact_lp_rational(&inst)?;
        (sol, Some(v.to_string()))
    } else {
        (oracle::solve_exact_lp(&inst)?, None)
    };
    let manifest = RunManifest::new(
        "oracle solve",
        json!({ "exact": a.exact, "cap": a.cap }),
        &[a.instance.cost.as_path(), a.instance.marginals.as_path()],
    )?;
    let out = json!({
        "manifest": manifest,
        "status": sol.status,
        "value": sol.value,
        "exact_value": exact,
        "pivots": sol.iterations,
        "plan": sol.plan.data(),
    });
    if let Some(d) = a.out {
        let dir = out_dir(Some(d))?;
        write_json(&dir.join("oracle.json"), &out)?;
    }
    println!("status {:?}", sol.status);
    println!("value {}", fmt_f64(sol.value));
    if let Some(v) = exact {
        println!("exact {v}");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Bench(BenchCommand::Synthetic(a)) => cmd_bench_synthetic(a),
        Command::Bench(BenchCommand::Barycenter(a)) => cmd_bench_barycenter(a),
        Command::Tu(a) => cmd_tu(a),
        Command::Oracle(OracleCommand::Solve(a)) => cmd_oracle(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
