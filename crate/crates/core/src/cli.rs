//! Command-line front end: `gen`, `solve`, `sweep` and `eval`.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::admm::SolveOptions;
use crate::bench::{run_method, run_sweep, Method, MethodRun, SweepConfig};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::model::{
    default_threads, generate_synthetic, load_dense_csv, load_partial, save_dense_csv, save_partial, save_side_info,
    Hyperparams, PartialMatrix, SideInfo,
};
use crate::objective::{evaluate, Estimate, Metrics};

/// File names written by `gen` and read by default elsewhere.
pub const OBSERVED_FILE: &str = "observed.txt";
pub const SIDE_INFO_FILE: &str = "side_info.csv";
pub const TRUTH_FILE: &str = "truth.csv";

#[derive(Debug, Parser)]
#[command(name = "sidelrm", version, about = "Low-rank completion with side information")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic instance to a directory
    Gen(GenArgs),
    /// Fit one instance with ADMM or a baseline
    Solve(SolveArgs),
    /// Run a parameter sweep from a key=value config
    Sweep(SweepArgs),
    /// Recompute metrics of a saved estimate
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 100)]
    m: usize,
    /// Rank of the hidden matrix
    #[arg(long, visible_alias = "rank", default_value_t = 5)]
    k: usize,
    #[arg(long, default_value_t = 150)]
    d: usize,
    #[arg(long, default_value_t = 0.9)]
    miss_frac: f64,
    #[arg(long, default_value_t = 2.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory, created if needed
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ProblemArgs {
    /// Observed entries: `n m nnz` header then `i j value` lines, 1-based
    #[arg(long)]
    data: PathBuf,
    /// Side information, n×d headerless CSV
    #[arg(long)]
    side_info: PathBuf,
    /// Ground truth, n×m headerless CSV
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// admm, iterative-svd, soft-impute or scaled-gd
    #[arg(long, default_value = "admm")]
    method: String,
    #[arg(long, default_value_t = 5)]
    rank: usize,
    #[arg(long, default_value_t = 10.0)]
    rho1: f64,
    #[arg(long, default_value_t = 10.0)]
    rho2: f64,
    /// Iteration cap [default: 20 for admm, 500/100/1000 for the baselines]
    #[arg(long)]
    max_iter: Option<usize>,
    /// ADMM stops once both squared primal residuals fall below this
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Worker threads [default: available cores, at most 24]
    #[arg(long)]
    threads: Option<usize>,
    /// Seed of the randomized eigensolvers
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory, created if needed
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// Per-trial CSV; means go to `<stem>.summary.csv`
    #[arg(long, default_value = "sweep.csv")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Directory holding U.csv and V.csv from `solve`
    #[arg(long, conflicts_with = "xhat", required_unless_present = "xhat")]
    solution: Option<PathBuf>,
    /// Dense n×m estimate instead of factors
    #[arg(long)]
    xhat: Option<PathBuf>,
    /// Write metrics.csv here instead of printing
    #[arg(long)]
    out: Option<PathBuf>,
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn real(x: f64) -> String {
    format!("{x:.16e}")
}

fn gen(a: &GenArgs) -> Result<String> {
    let (data, y, truth) = generate_synthetic::<f64>(a.n, a.m, a.k, a.d, a.miss_frac, a.sigma, a.seed)?;
    create_dir(&a.out)?;
    save_partial(&data, a.out.join(OBSERVED_FILE))?;
    save_side_info(&y, a.out.join(SIDE_INFO_FILE))?;
    save_dense_csv(&truth.a_true, a.out.join(TRUTH_FILE))?;
    Ok(format!(
        "wrote {}×{} instance ({} observed) to {}",
        a.n,
        a.m,
        data.nnz(),
        a.out.display()
    ))
}

struct Problem {
    data: PartialMatrix<f64>,
    y: SideInfo<f64>,
    truth: Option<Mat<f64>>,
}

fn load_problem(p: &ProblemArgs) -> Result<Problem> {
    let data = load_partial::<f64>(&p.data)?;
    let (n, m) = (data.nrows(), data.ncols());
    let y = SideInfo::new(load_dense_csv(&p.side_info, Some(n), None)?)?;
    let truth = p
        .truth
        .as_ref()
        .map(|t| load_dense_csv(t, Some(n), Some(m)))
        .transpose()?;
    Ok(Problem { data, y, truth })
}

/// `key,value` lines of a metrics file.
fn metrics_csv(m: &Metrics<f64>, extra: &[(&str, String)]) -> String {
    let mut out = String::from("metric,value\n");
    for (k, v) in extra {
        let _ = writeln!(out, "{k},{v}");
    }
    let o = &m.objective;
    for (k, v) in [("objective", o.total), ("fit", o.fit), ("side", o.side), ("reg", o.reg)] {
        let _ = writeln!(out, "{k},{}", real(v));
    }
    if let Some(e) = m.err_l2 {
        let _ = writeln!(out, "err_l2,{}", real(e));
    }
    let _ = writeln!(out, "r2,{}", real(m.r2));
    let _ = writeln!(out, "fitted_rank,{}", m.fitted_rank);
    out
}

/// Factors written to disk: ADMM and ScaledGD keep theirs, dense
/// estimates are split as `(LΣ, R)` from their compact SVD.
fn output_factors(est: &Estimate<f64>) -> (Mat<f64>, Mat<f64>) {
    match est {
        Estimate::Factored { u, v } => (u.clone(), v.clone()),
        Estimate::Dense(_) => {
            let c = est.compact_svd();
            (c.u.scale_cols(&c.s), c.v)
        }
    }
}

/// Per-iteration traces, one row each; the last row names the reason
/// the run stopped.
fn report_csv(run: &MethodRun<f64>) -> String {
    let mut out = String::from("iteration,phi_res,psi_res,dual_res,objective,termination\n");
    let opt = |v: Option<&f64>| v.map(|x| real(*x)).unwrap_or_default();
    match &run.report {
        Some(r) if r.iterations > 0 => {
            for t in 0..r.iterations {
                let last = t + 1 == r.iterations;
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    t + 1,
                    opt(r.phi_residual_trace.get(t)),
                    opt(r.psi_residual_trace.get(t)),
                    opt(r.dual_residual_trace.get(t)),
                    opt(r.objective_trace.get(t)),
                    if last {
                        run.termination.to_string()
                    } else {
                        String::new()
                    }
                );
            }
        }
        _ => {
            let _ = writeln!(out, "{},,,,,{}", run.iterations, run.termination);
        }
    }
    out
}

fn solve(a: &SolveArgs) -> Result<String> {
    let method: Method = a.method.parse()?;
    let p = load_problem(&a.problem)?;
    let hp = Hyperparams {
        k: a.rank,
        lambda: a.problem.lambda,
        gamma: a.problem.gamma,
        rho1: a.rho1,
        rho2: a.rho2,
        eps: a.tol,
        max_iters: a.max_iter.unwrap_or(20),
        threads: a.threads.unwrap_or_else(default_threads),
        seed: a.seed,
    };
    let run = run_method(method, &p.data, &p.y, &hp, a.max_iter, &SolveOptions::default())?;
    let (u, v) = output_factors(&run.estimate);
    // metrics of the factors as written, so that `eval` reproduces them
    let written = Estimate::Factored {
        u: u.clone(),
        v: v.clone(),
    };
    let metrics = evaluate(&written, &p.data, p.y.matrix(), p.truth.as_ref(), hp.lambda, hp.gamma)?;

    create_dir(&a.out)?;
    save_dense_csv(&u, a.out.join("U.csv"))?;
    save_dense_csv(&v, a.out.join("V.csv"))?;
    write_text(&a.out.join("report.csv"), &report_csv(&run))?;
    let extra = [
        ("method", method.to_string()),
        ("termination", run.termination.to_string()),
        ("iterations", run.iterations.to_string()),
        ("time_ms", real(run.wall_time.as_secs_f64() * 1e3)),
        ("flags", run.flags.join(";").replace(',', " ")),
    ];
    write_text(&a.out.join("metrics.csv"), &metrics_csv(&metrics, &extra))?;
    Ok(format!(
        "{method}: {} after {} iterations, objective {:.6e}{}",
        run.termination,
        run.iterations,
        metrics.objective.total,
        metrics.err_l2.map(|e| format!(", err_l2 {e:.6e}")).unwrap_or_default()
    ))
}

fn sweep(a: &SweepArgs) -> Result<String> {
    let cfg = SweepConfig::<f64>::from_file(&a.config)?;
    let s = run_sweep(&cfg, &a.out)?;
    let failed = s.rows.iter().filter(|r| r.outcome.is_err()).count();
    Ok(format!(
        "{} rows ({failed} failed) written to {}, means in {}",
        s.rows.len(),
        s.csv_path.display(),
        s.summary_path.display()
    ))
}

fn eval(a: &EvalArgs) -> Result<String> {
    let p = load_problem(&a.problem)?;
    let (n, m) = (p.data.nrows(), p.data.ncols());
    let est = match (&a.solution, &a.xhat) {
        (Some(dir), _) => {
            let u = load_dense_csv(dir.join("U.csv"), Some(n), None)?;
            let v = load_dense_csv(dir.join("V.csv"), Some(m), Some(u.ncols()))?;
            Estimate::Factored { u, v }
        }
        (None, Some(x)) => Estimate::Dense(load_dense_csv(x, Some(n), Some(m))?),
        (None, None) => return Err(Error::param("eval needs --solution or --xhat")),
    };
    let metrics = evaluate(
        &est,
        &p.data,
        p.y.matrix(),
        p.truth.as_ref(),
        a.problem.lambda,
        a.problem.gamma,
    )?;
    let text = metrics_csv(&metrics, &[]);
    match &a.out {
        Some(dir) => {
            create_dir(dir)?;
            write_text(&dir.join("metrics.csv"), &text)?;
            Ok(format!("metrics written to {}", dir.join("metrics.csv").display()))
        }
        None => Ok(text.trim_end().to_string()),
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code: 0 on success, 1 for bad input, 2 when a solver fails.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let result = match &cli.command {
        Command::Gen(a) => gen(a),
        Command::Solve(a) => solve(a),
        Command::Sweep(a) => sweep(a),
        Command::Eval(a) => eval(a),
    };
    match result {
        Ok(msg) => {
            println!("{msg}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
