//! Sensitivity sweeps over one problem dimension, written as CSV.
//!
//! A config file holds flat `key = value` lines; lists are comma-separated
//! and `#` starts a comment:
//!
//! ```text
//! vary = n
//! values = 200, 400
//! m = 100
//! k = 5
//! d = 150
//! trials = 3
//! methods = admm, soft_impute
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use super::runner::{run_method, Method, MethodRun};
use crate::admm::SolveOptions;
use crate::error::{Error, Result};
use crate::model::{generate_synthetic, Hyperparams};
use crate::objective::evaluate;
use crate::scalar::Real;

/// Columns of the per-trial CSV, in order.
pub const TRIAL_COLUMNS: [&str; 19] = [
    "method",
    "n",
    "m",
    "k",
    "d",
    "seed",
    "objective",
    "err_l2",
    "r2",
    "fitted_rank",
    "time_ms",
    "t_U_ms",
    "t_V_ms",
    "t_P_ms",
    "t_Z_ms",
    "iters",
    "phi_res",
    "psi_res",
    "dual_res",
];

/// Numeric columns averaged in the summary.
pub const METRIC_COLUMNS: [&str; 13] = [
    "objective",
    "err_l2",
    "r2",
    "fitted_rank",
    "time_ms",
    "t_U_ms",
    "t_V_ms",
    "t_P_ms",
    "t_Z_ms",
    "iters",
    "phi_res",
    "psi_res",
    "dual_res",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepParam {
    N,
    M,
    D,
    K,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::N => "n",
            SweepParam::M => "m",
            SweepParam::D => "d",
            SweepParam::K => "k",
        }
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "n" => Ok(SweepParam::N),
            "m" => Ok(SweepParam::M),
            "d" => Ok(SweepParam::D),
            "k" => Ok(SweepParam::K),
            other => Err(Error::param(format!("cannot vary `{other}` (expected n, m, d or k)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig<T> {
    pub vary: SweepParam,
    pub values: Vec<usize>,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub d: usize,
    pub trials: usize,
    pub methods: Vec<Method>,
    /// Solver settings; `k` is overridden per cell.
    pub hyper: Hyperparams<T>,
    pub miss_frac: f64,
    pub sigma: f64,
    pub base_seed: u64,
    /// When off, every time column is left empty so that repeated runs
    /// produce identical files.
    pub timings: bool,
    /// Runs trials concurrently; timings then contend and are marked
    /// unreliable in the summary.
    pub parallel: bool,
}

impl<T: Real> Default for SweepConfig<T> {
    fn default() -> Self {
        SweepConfig {
            vary: SweepParam::N,
            values: Vec::new(),
            n: 1000,
            m: 100,
            k: 5,
            d: 150,
            trials: 1,
            methods: Method::ALL.to_vec(),
            hyper: Hyperparams::new(5),
            miss_frac: 0.9,
            sigma: 2.0,
            base_seed: 0,
            timings: true,
            parallel: false,
        }
    }
}

fn parse_num<N: FromStr>(v: &str) -> std::result::Result<N, String> {
    v.trim()
        .parse()
        .map_err(|_| format!("`{}` is not a valid number", v.trim()))
}

fn parse_bool(v: &str) -> std::result::Result<bool, String> {
    match v.trim() {
        "on" | "true" | "yes" | "1" => Ok(true),
        "off" | "false" | "no" | "0" => Ok(false),
        other => Err(format!("`{other}` is not on/off")),
    }
}

fn parse_list<N>(
    v: &str,
    item: impl Fn(&str) -> std::result::Result<N, String>,
) -> std::result::Result<Vec<N>, String> {
    v.split(',').filter(|s| !s.trim().is_empty()).map(item).collect()
}

impl<T: Real> SweepConfig<T> {
    /// Parses config text; `path` only labels error messages.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut cfg = SweepConfig::default();
        let mut seen: Vec<String> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let perr = |msg: String| Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                msg,
            };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| perr(format!("expected `key = value`, found `{line}`")))?;
            let key = key.trim().to_ascii_lowercase();
            if seen.contains(&key) {
                return Err(perr(format!("duplicate key `{key}`")));
            }
            let set: std::result::Result<(), String> = match key.as_str() {
                "vary" => value.parse().map(|p| cfg.vary = p).map_err(|e: Error| e.to_string()),
                "values" => parse_list(value, parse_num).map(|v| cfg.values = v),
                "n" => parse_num(value).map(|v| cfg.n = v),
                "m" => parse_num(value).map(|v| cfg.m = v),
                "k" => parse_num(value).map(|v| cfg.k = v),
                "d" => parse_num(value).map(|v| cfg.d = v),
                "trials" => parse_num(value).map(|v| cfg.trials = v),
                "methods" => {
                    parse_list(value, |s| s.parse::<Method>().map_err(|e| e.to_string())).map(|v| cfg.methods = v)
                }
                "lambda" => parse_num(value).map(|v: f64| cfg.hyper.lambda = T::lit(v)),
                "gamma" => parse_num(value).map(|v: f64| cfg.hyper.gamma = T::lit(v)),
                "rho1" => parse_num(value).map(|v: f64| cfg.hyper.rho1 = T::lit(v)),
                "rho2" => parse_num(value).map(|v: f64| cfg.hyper.rho2 = T::lit(v)),
                "tol" => parse_num(value).map(|v: f64| cfg.hyper.eps = T::lit(v)),
                "max_iter" => parse_num(value).map(|v| cfg.hyper.max_iters = v),
                "threads" => parse_num(value).map(|v| cfg.hyper.threads = v),
                "miss_frac" => parse_num(value).map(|v| cfg.miss_frac = v),
                "sigma" => parse_num(value).map(|v| cfg.sigma = v),
                "base_seed" | "seed" => parse_num(value).map(|v| cfg.base_seed = v),
                "timings" => parse_bool(value).map(|v| cfg.timings = v),
                "parallel" => parse_bool(value).map(|v| cfg.parallel = v),
                other => Err(format!("unknown key `{other}`")),
            };
            set.map_err(perr)?;
            seen.push(key);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path)
    }

    /// `(n, m, k, d)` of the cell where the varied parameter takes `value`.
    pub fn dims(&self, value: usize) -> (usize, usize, usize, usize) {
        let (mut n, mut m, mut k, mut d) = (self.n, self.m, self.k, self.d);
        match self.vary {
            SweepParam::N => n = value,
            SweepParam::M => m = value,
            SweepParam::K => k = value,
            SweepParam::D => d = value,
        }
        (n, m, k, d)
    }

    /// Data seed of trial `trial` at the `value_index`-th value.
    pub fn seed(&self, value_index: usize, trial: usize) -> u64 {
        self.base_seed * 1_000_000 + value_index as u64 * 1000 + trial as u64
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::param("sweep needs at least one value"));
        }
        if self.values.len() > 1000 || self.trials > 1000 {
            return Err(Error::param("at most 1000 values and 1000 trials per sweep"));
        }
        if self.trials == 0 {
            return Err(Error::param("trials must be at least 1"));
        }
        if self.methods.is_empty() {
            return Err(Error::param("sweep needs at least one method"));
        }
        if self.base_seed > (u64::MAX - 1_000_000) / 1_000_000 {
            return Err(Error::param("base_seed too large"));
        }
        if !(0.0..1.0).contains(&self.miss_frac) || !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::param(
                "miss_frac must lie in [0, 1) and sigma must be nonnegative",
            ));
        }
        Hyperparams {
            k: self.k,
            ..self.hyper.clone()
        }
        .validate()?;
        for &v in &self.values {
            let (n, m, k, d) = self.dims(v);
            if v == 0 {
                return Err(Error::param("sweep values must be positive"));
            }
            if k >= n.min(m) || d == 0 {
                return Err(Error::param(format!(
                    "cell {}={v} gives n={n}, m={m}, k={k}, d={d}; need 1 <= k < min(n, m) and d >= 1",
                    self.vary.name()
                )));
            }
        }
        Ok(())
    }
}

/// Metrics of one successful trial.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrialMetrics {
    pub objective: f64,
    pub err_l2: f64,
    pub r2: f64,
    pub fitted_rank: usize,
    pub time_ms: Option<f64>,
    /// `[U, V, P, Z]`, ADMM with timings on.
    pub subproblem_ms: Option<[f64; 4]>,
    pub iters: usize,
    pub phi_res: Option<f64>,
    pub psi_res: Option<f64>,
    pub dual_res: Option<f64>,
}

impl TrialMetrics {
    /// Values in [`METRIC_COLUMNS`] order; `None` for empty fields.
    pub fn values(&self) -> [Option<f64>; 13] {
        let sub = |i: usize| self.subproblem_ms.map(|t| t[i]);
        [
            Some(self.objective),
            Some(self.err_l2),
            Some(self.r2),
            Some(self.fitted_rank as f64),
            self.time_ms,
            sub(0),
            sub(1),
            sub(2),
            sub(3),
            Some(self.iters as f64),
            self.phi_res,
            self.psi_res,
            self.dual_res,
        ]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialRow {
    pub method: Method,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub d: usize,
    pub seed: u64,
    /// `Err` carries the failure class written to the CSV.
    pub outcome: std::result::Result<TrialMetrics, String>,
}

fn real(x: f64) -> String {
    format!("{x:.9e}")
}

impl TrialRow {
    /// CSV line without the trailing newline. Failed trials write
    /// `error:<class>` in the objective column and leave the rest empty.
    pub fn to_csv(&self) -> String {
        let mut s = format!(
            "{},{},{},{},{},{}",
            self.method, self.n, self.m, self.k, self.d, self.seed
        );
        match &self.outcome {
            Ok(t) => {
                for (name, v) in METRIC_COLUMNS.iter().zip(t.values()) {
                    s.push(',');
                    match v {
                        Some(x) if matches!(*name, "fitted_rank" | "iters") => {
                            let _ = write!(s, "{}", x as usize);
                        }
                        Some(x) => s.push_str(&real(x)),
                        None => {}
                    }
                }
            }
            Err(class) => {
                let _ = write!(s, ",error:{class}");
                s.push_str(&",".repeat(METRIC_COLUMNS.len() - 1));
            }
        }
        s
    }
}

/// Per-(method, value) means over the successful trials.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryCell {
    pub method: Method,
    pub value: usize,
    pub trials: usize,
    pub errors: usize,
    /// In [`METRIC_COLUMNS`] order; `None` when no trial reported the field.
    pub means: [Option<f64>; 13],
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSummary {
    pub rows: Vec<TrialRow>,
    pub cells: Vec<SummaryCell>,
    pub csv_path: PathBuf,
    pub summary_path: PathBuf,
}

/// `results.csv` → `results.summary.csv`; other names get the suffix appended.
pub fn summary_path(out: &Path) -> PathBuf {
    match (out.extension(), out.file_stem()) {
        (Some(ext), Some(stem)) if ext == "csv" => {
            out.with_file_name(format!("{}.summary.csv", stem.to_string_lossy()))
        }
        _ => PathBuf::from(format!("{}.summary.csv", out.display())),
    }
}

fn error_class(e: &Error) -> &'static str {
    match e {
        Error::Parameter(_) => "parameter",
        Error::Parse { .. } => "parse",
        Error::Convergence { .. } => "convergence",
        Error::Numerical { .. } => "numerical",
        Error::Io { .. } => "io",
    }
}

fn ms(d: std::time::Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

fn metrics_of<T: Real>(
    run: &MethodRun<T>,
    data: &crate::model::PartialMatrix<T>,
    y: &crate::model::SideInfo<T>,
    truth: &crate::linalg::Mat<T>,
    hp: &Hyperparams<T>,
    timings: bool,
) -> Result<TrialMetrics> {
    let mt = evaluate(&run.estimate, data, y.matrix(), Some(truth), hp.lambda, hp.gamma)?;
    let last = |v: &[T]| v.last().map(|x| x.as_f64());
    let (phi_res, psi_res, dual_res) = match &run.report {
        Some(r) => (
            last(&r.phi_residual_trace),
            last(&r.psi_residual_trace),
            last(&r.dual_residual_trace),
        ),
        None => (None, None, None),
    };
    let t = TrialMetrics {
        objective: mt.objective.total.as_f64(),
        err_l2: mt.err_l2.map(|e| e.as_f64()).unwrap_or(f64::NAN),
        r2: mt.r2.as_f64(),
        fitted_rank: mt.fitted_rank,
        time_ms: timings.then(|| ms(run.wall_time)),
        subproblem_ms: run
            .subproblem_times
            .filter(|_| timings)
            .map(|s| [ms(s.u), ms(s.v), ms(s.p), ms(s.z)]),
        iters: run.iterations,
        phi_res,
        psi_res,
        dual_res,
    };
    if t.values().iter().flatten().all(|x| x.is_finite()) {
        Ok(t)
    } else {
        Err(Error::Numerical {
            iteration: run.iterations,
            msg: "non-finite metric".into(),
        })
    }
}

/// All method rows of one `(value, trial)` cell.
fn run_cell<T: Real>(cfg: &SweepConfig<T>, value_index: usize, trial: usize) -> Vec<TrialRow> {
    let (n, m, k, d) = cfg.dims(cfg.values[value_index]);
    let seed = cfg.seed(value_index, trial);
    let row = |method, outcome| TrialRow {
        method,
        n,
        m,
        k,
        d,
        seed,
        outcome,
    };
    let (data, y, truth) = match generate_synthetic::<T>(n, m, k, d, cfg.miss_frac, cfg.sigma, seed) {
        Ok(inst) => inst,
        Err(e) => {
            let class = error_class(&e).to_string();
            return cfg.methods.iter().map(|&mt| row(mt, Err(class.clone()))).collect();
        }
    };
    let hp = Hyperparams {
        k,
        seed,
        ..cfg.hyper.clone()
    };
    let opts = SolveOptions {
        record_objective: false,
        ..SolveOptions::default()
    };
    cfg.methods
        .iter()
        .map(|&method| {
            let outcome = run_method(method, &data, &y, &hp, None, &opts)
                .and_then(|run| metrics_of(&run, &data, &y, &truth.a_true, &hp, cfg.timings))
                .map_err(|e| error_class(&e).to_string());
            row(method, outcome)
        })
        .collect()
}

/// Means of each metric over the successful rows of `rows`.
pub fn column_means<'a>(rows: impl IntoIterator<Item = &'a TrialRow>) -> [Option<f64>; 13] {
    let mut sum = [0.0; 13];
    let mut count = [0usize; 13];
    for r in rows {
        if let Ok(t) = &r.outcome {
            for (i, v) in t.values().into_iter().enumerate() {
                if let Some(x) = v {
                    sum[i] += x;
                    count[i] += 1;
                }
            }
        }
    }
    std::array::from_fn(|i| (count[i] > 0).then(|| sum[i] / count[i] as f64))
}

fn summarize<T>(cfg: &SweepConfig<T>, rows: &[TrialRow]) -> Vec<SummaryCell> {
    let per_value = cfg.trials * cfg.methods.len();
    let mut cells = Vec::new();
    for (vi, &value) in cfg.values.iter().enumerate() {
        let block = &rows[vi * per_value..(vi + 1) * per_value];
        for &method in &cfg.methods {
            let mine: Vec<&TrialRow> = block.iter().filter(|r| r.method == method).collect();
            cells.push(SummaryCell {
                method,
                value,
                trials: mine.len(),
                errors: mine.iter().filter(|r| r.outcome.is_err()).count(),
                means: column_means(mine.iter().copied()),
            });
        }
    }
    cells
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Per-trial CSV text, header included.
pub fn trial_csv(rows: &[TrialRow]) -> String {
    let mut out = TRIAL_COLUMNS.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_csv());
        out.push('\n');
    }
    out
}

fn summary_csv<T>(cfg: &SweepConfig<T>, cells: &[SummaryCell]) -> String {
    let timing_note = match (cfg.timings, cfg.parallel) {
        (false, _) => "off",
        (true, true) => "unreliable",
        (true, false) => "measured",
    };
    let mut out = format!(
        "method,{},trials,errors,{},timings\n",
        cfg.vary.name(),
        METRIC_COLUMNS.join(",")
    );
    for c in cells {
        let _ = write!(out, "{},{},{},{}", c.method, c.value, c.trials, c.errors);
        for v in c.means {
            out.push(',');
            if let Some(x) = v {
                out.push_str(&real(x));
            }
        }
        let _ = writeln!(out, ",{timing_note}");
    }
    out
}

/// Runs every method on every `(value, trial)` instance and writes the
/// per-trial CSV to `out` and the means next to it. Failed trials become
/// error rows; the sweep itself fails only on bad configs or I/O.
pub fn run_sweep<T: Real>(cfg: &SweepConfig<T>, out: impl AsRef<Path>) -> Result<SweepSummary> {
    cfg.validate()?;
    let out = out.as_ref();
    let cells: Vec<(usize, usize)> = (0..cfg.values.len())
        .flat_map(|vi| (0..cfg.trials).map(move |t| (vi, t)))
        .collect();
    let rows: Vec<TrialRow> = if cfg.parallel {
        cells
            .par_iter()
            .flat_map_iter(|&(vi, t)| run_cell(cfg, vi, t))
            .collect()
    } else {
        cells.iter().flat_map(|&(vi, t)| run_cell(cfg, vi, t)).collect()
    };
    let summary = summarize(cfg, &rows);
    let spath = summary_path(out);
    write_file(out, &trial_csv(&rows))?;
    write_file(&spath, &summary_csv(cfg, &summary))?;
    Ok(SweepSummary {
        rows,
        cells: summary,
        csv_path: out.to_path_buf(),
        summary_path: spath,
    })
}
