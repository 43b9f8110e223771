//! Mixed-projection ADMM for rank-constrained completion with side
//! information.
//!
//! The rank constraint is modeled with a projection `P = MMᵀ` of rank `k`
//! and a copy `Z` of `U`, giving the constraints `(I − P)Z = 0` and
//! `Z = U` with multipliers `Φ` and `Ψ`. Each sweep updates `(U, P)`, then
//! `(V, Z)`, then takes a dual ascent step.

mod diagnostics;
mod updates;

pub use diagnostics::{
    augmented_lagrangian, dual_residual, first_order_check, lagrangian_terms, DualResidual, FirstOrderReport,
    LagrangianTerms,
};
pub use updates::{update_duals, update_p, update_p_with_basis, update_u, update_v, update_z, SideBasis};

use diagnostics::dual_residual_inner;
use updates::leading_eigvecs;

use std::fmt;
use std::time::{Duration, Instant};

use crate::bench::timers::{Section, SubproblemTimers};
use crate::error::{Error, Result};
use crate::linalg::{project_unchecked, truncated_svd_with_info, Mat, SubspaceOptions};
use crate::model::{Hyperparams, PartialMatrix, SideInfo};
use crate::objective::objective_factored;
use crate::scalar::Real;

/// Primal and dual iterates. `M` is the orthonormal factor of `P = MMᵀ`.
#[derive(Clone, Debug, PartialEq)]
pub struct IterateState<T> {
    pub u: Mat<T>,
    pub v: Mat<T>,
    pub m: Mat<T>,
    pub z: Mat<T>,
    pub phi: Mat<T>,
    pub psi: Mat<T>,
}

impl<T: Real> IterateState<T> {
    /// `(I − P)Z`
    pub fn phi_residual(&self) -> Mat<T> {
        self.z.sub(&project_unchecked(&self.m, &self.z))
    }

    /// `Z − U`
    pub fn psi_residual(&self) -> Mat<T> {
        self.z.sub(&self.u)
    }

    pub fn is_finite(&self) -> bool {
        [&self.u, &self.v, &self.m, &self.z, &self.phi, &self.psi]
            .iter()
            .all(|x| x.is_finite())
    }

    /// The estimate `UVᵀ`, dense.
    pub fn estimate(&self) -> Mat<T> {
        self.u.matmul_t(&self.v)
    }
}

/// Observed column indices per row and observed row indices per column.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ObservationMasks {
    by_row: Vec<Vec<usize>>,
    by_col: Vec<Vec<usize>>,
}

impl ObservationMasks {
    pub fn new<T: Real>(data: &PartialMatrix<T>) -> Self {
        ObservationMasks {
            by_row: (0..data.nrows()).map(|i| data.row(i).0.to_vec()).collect(),
            by_col: (0..data.ncols()).map(|j| data.col(j).0.to_vec()).collect(),
        }
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.by_row[i]
    }

    pub fn col(&self, j: usize) -> &[usize] {
        &self.by_col[j]
    }

    pub fn nrows(&self) -> usize {
        self.by_row.len()
    }

    pub fn ncols(&self) -> usize {
        self.by_col.len()
    }

    /// Number of observed pairs.
    pub fn len(&self) -> usize {
        self.by_row.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    ToleranceMet,
    MaxIters,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::ToleranceMet => "tolerance_met",
            Termination::MaxIters => "max_iters",
        })
    }
}

/// Augmented Lagrangian change across one block update.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlockDescent<T> {
    pub iteration: usize,
    pub block: Section,
    /// Value of the block-dependent part before and after the update.
    pub before: T,
    pub after: T,
    /// `‖X_t − X_{t+1}‖_F²` of the updated block (zero for `P`).
    pub step_sq: T,
}

impl<T: Real> BlockDescent<T> {
    pub fn decrease(&self) -> T {
        self.before - self.after
    }
}

/// Per-iteration diagnostics of a solve.
#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport<T> {
    pub iterations: usize,
    /// `‖(I − P)Z‖_F`
    pub phi_residual_trace: Vec<T>,
    /// `‖Z − U‖_F`
    pub psi_residual_trace: Vec<T>,
    /// `‖P₂ − P₁P₂‖_F`, empty when disabled
    pub dual_residual_trace: Vec<T>,
    /// Objective at `X = UVᵀ`, empty when disabled
    pub objective_trace: Vec<T>,
    pub subproblem_times: SubproblemTimers,
    pub total_time: Duration,
    pub termination: Termination,
    pub warnings: Vec<String>,
    /// Filled only when requested in [`SolveOptions`].
    pub block_descent: Vec<BlockDescent<T>>,
}

#[derive(Clone, Debug)]
pub struct SolveOptions<T> {
    pub record_objective: bool,
    pub record_dual_residual: bool,
    pub record_block_descent: bool,
    pub subspace: SubspaceOptions<T>,
}

impl<T: Real> Default for SolveOptions<T> {
    fn default() -> Self {
        SolveOptions {
            record_objective: true,
            record_dual_residual: true,
            record_block_descent: false,
            subspace: SubspaceOptions::default(),
        }
    }
}

/// Rank-`k` SVD initialization of the zero-filled data:
/// `U = Z = LΣ^½`, `M = L`, `V = RΣ^½`, `Φ = Ψ = 1`.
pub fn initial_state<T: Real>(data: &PartialMatrix<T>, k: usize, opts: &SubspaceOptions<T>) -> Result<IterateState<T>> {
    let (svd, info) = truncated_svd_with_info(data, k, opts, None)?;
    if !info.converged {
        return Err(Error::Convergence {
            what: "initial truncated SVD",
            iterations: info.iterations,
            residual: info.residual,
        });
    }
    let root: Vec<T> = svd.s.iter().map(|s| s.sqrt()).collect();
    let u = svd.u.scale_cols(&root);
    let n = data.nrows();
    Ok(IterateState {
        z: u.clone(),
        u,
        v: svd.v.scale_cols(&root),
        m: svd.u,
        phi: Mat::filled(n, k, T::one()),
        psi: Mat::filled(n, k, T::one()),
    })
}

/// Runs the ADMM with default reporting options.
pub fn solve<T: Real>(
    data: &PartialMatrix<T>,
    y: &SideInfo<T>,
    hp: &Hyperparams<T>,
) -> Result<(IterateState<T>, SolveReport<T>)> {
    solve_with(data, y, hp, &SolveOptions::default(), |_, _| {})
}

fn guard<T: Real>(x: &Mat<T>, what: &str, iteration: usize) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::Numerical {
            iteration,
            msg: format!("non-finite entries after the {what} update"),
        })
    }
}

fn with_iteration<T>(r: Result<T>, iteration: usize) -> Result<T> {
    r.map_err(|e| match e {
        Error::Numerical { msg, .. } => Error::Numerical { iteration, msg },
        other => other,
    })
}

/// Runs the ADMM. `observe(t, state)` is called after every iteration
/// `t = 1, 2, ...`.
pub fn solve_with<T: Real>(
    data: &PartialMatrix<T>,
    y: &SideInfo<T>,
    hp: &Hyperparams<T>,
    opts: &SolveOptions<T>,
    mut observe: impl FnMut(usize, &IterateState<T>) + Send,
) -> Result<(IterateState<T>, SolveReport<T>)> {
    hp.validate()?;
    let (n, m) = (data.nrows(), data.ncols());
    y.check_rows(n)?;
    if hp.k > n.min(m) {
        return Err(Error::param(format!("rank {} exceeds min(n, m) = {}", hp.k, n.min(m))));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(hp.threads)
        .build()
        .map_err(|e| Error::param(format!("cannot start {} worker threads: {e}", hp.threads)))?;
    pool.install(|| run(data, y.matrix(), hp, opts, &mut observe))
}

fn run<T: Real>(
    data: &PartialMatrix<T>,
    y: &Mat<T>,
    hp: &Hyperparams<T>,
    opts: &SolveOptions<T>,
    observe: &mut impl FnMut(usize, &IterateState<T>),
) -> Result<(IterateState<T>, SolveReport<T>)> {
    let started = Instant::now();
    let masks = ObservationMasks::new(data);
    let sub = SubspaceOptions {
        seed: hp.seed,
        ..opts.subspace.clone()
    };
    let mut s = initial_state(data, hp.k, &sub)?;
    let mut timers = SubproblemTimers::default();
    let mut report = SolveReport {
        iterations: 0,
        phi_residual_trace: Vec::new(),
        psi_residual_trace: Vec::new(),
        dual_residual_trace: Vec::new(),
        objective_trace: Vec::new(),
        subproblem_times: SubproblemTimers::default(),
        total_time: Duration::ZERO,
        termination: Termination::MaxIters,
        warnings: Vec::new(),
        block_descent: Vec::new(),
    };
    let (lambda, gamma, rho1, rho2) = (hp.lambda, hp.gamma, hp.rho1, hp.rho2);
    let terms = |s: &IterateState<T>| lagrangian_terms(s, data, y, lambda, gamma, rho1, rho2);
    let side = (lambda != T::zero()).then(|| timers.time(Section::P, || SideBasis::new(y)));
    let mut rank_warned = false;

    for t in 1..=hp.max_iters {
        // (U, P) from (V_t, Z_t, Φ_t, Ψ_t); the two blocks do not interact
        let before = opts.record_block_descent.then(|| terms(&s));
        let u_new = timers.time(Section::U, || update_u(&s.v, &s.z, &s.psi, data, &masks, gamma, rho2));
        let u_new = with_iteration(u_new, t)?;
        guard(&u_new, "U", t)?;
        let du = u_new.sub(&s.u).norm_sq();
        s.u = u_new;
        let after_u = opts.record_block_descent.then(|| terms(&s));

        let m_new = timers.time(Section::P, || {
            leading_eigvecs(side.as_ref(), y, &s.z, &s.phi, lambda, rho1, hp.k)
        })?;
        guard(&m_new.0, "P", t)?;
        s.m = m_new.0;
        let after_p = opts.record_block_descent.then(|| terms(&s));

        // (V, Z) from (U_{t+1}, P_{t+1}, Φ_t, Ψ_t)
        let v_new = timers.time(Section::V, || update_v(&s.u, data, &masks, gamma));
        let v_new = with_iteration(v_new, t)?;
        guard(&v_new, "V", t)?;
        let dv = v_new.sub(&s.v).norm_sq();
        s.v = v_new;
        let after_v = opts.record_block_descent.then(|| terms(&s));

        let z_new = timers.time(Section::Z, || update_z(&s.u, &s.m, &s.phi, &s.psi, rho1, rho2))?;
        guard(&z_new, "Z", t)?;
        let dz = z_new.sub(&s.z).norm_sq();
        s.z = z_new;

        if let (Some(b), Some(au), Some(ap), Some(av)) = (before, after_u, after_p, after_v) {
            let az = terms(&s);
            let rec = |block, before: T, after: T, step_sq| BlockDescent {
                iteration: t,
                block,
                before,
                after,
                step_sq,
            };
            report.block_descent.extend([
                rec(Section::U, b.u_part(), au.u_part(), du),
                rec(Section::P, au.p_part(), ap.p_part(), T::zero()),
                rec(Section::V, ap.v_part(), av.v_part(), dv),
                rec(Section::Z, av.z_part(), az.z_part(), dz),
            ]);
        }

        let (phi, psi) = update_duals(&s, rho1, rho2);
        guard(&phi, "Phi", t)?;
        guard(&psi, "Psi", t)?;
        s.phi = phi;
        s.psi = psi;

        let r1 = s.phi_residual().frobenius_norm();
        let r2 = s.psi_residual().frobenius_norm();
        report.phi_residual_trace.push(r1);
        report.psi_residual_trace.push(r2);
        if opts.record_dual_residual {
            let d = dual_residual_inner(side.as_ref(), &s, y, lambda)?;
            if d.z_rank < hp.k && !rank_warned {
                report.warnings.push(format!(
                    "iteration {t}: Z has numerical rank {} < {}; dual residual uses the actual rank",
                    d.z_rank, hp.k
                ));
                rank_warned = true;
            }
            report.dual_residual_trace.push(d.value);
        }
        if opts.record_objective {
            let o = objective_factored(&s.u, &s.v, data, y, lambda, gamma)?;
            report.objective_trace.push(o.total);
        }
        report.iterations = t;
        observe(t, &s);

        if (r1 * r1).max(r2 * r2) <= hp.eps {
            report.termination = Termination::ToleranceMet;
            break;
        }
    }

    report.subproblem_times = timers;
    report.total_time = started.elapsed();
    Ok((s, report))
}
