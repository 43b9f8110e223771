//! Reference completion methods: Iterative-SVD, Soft-Impute and ScaledGD.

use std::time::{Duration, Instant};

use crate::admm::Termination;
use crate::error::{Error, Result};
use crate::linalg::{dense, soft_threshold_factors, truncated_svd_with_info, Mat, SubspaceOptions};
use crate::model::PartialMatrix;
use crate::objective::{ols_alpha_factored, Estimate};
use crate::scalar::Real;

/// Output of a baseline run.
#[derive(Clone, Debug)]
pub struct BaselineResult<T> {
    pub estimate: Estimate<T>,
    pub iterations: usize,
    pub wall_time: Duration,
    pub termination: Termination,
    /// Irregularities met along the way, such as a regularized inverse.
    pub flags: Vec<String>,
}

impl<T> BaselineResult<T> {
    fn flag(&mut self, f: &str) {
        if !self.flags.iter().any(|g| g == f) {
            self.flags.push(f.to_string());
        }
    }
}

fn check_rank<T: Real>(data: &PartialMatrix<T>, k: usize) -> Result<()> {
    let lim = data.nrows().min(data.ncols());
    if k == 0 || k > lim {
        return Err(Error::param(format!("rank {k} outside 1..={lim}")));
    }
    Ok(())
}

/// Missing-entry bookkeeping shared by the imputation methods.
struct Missing {
    /// Unobserved columns of each row.
    rows: Vec<Vec<usize>>,
}

impl Missing {
    fn new<T: Real>(data: &PartialMatrix<T>) -> Self {
        let m = data.ncols();
        let rows = (0..data.nrows())
            .map(|i| {
                let (obs, _) = data.row(i);
                let mut out = Vec::with_capacity(m - obs.len());
                let mut it = obs.iter().peekable();
                for j in 0..m {
                    if it.peek() == Some(&&j) {
                        it.next();
                    } else {
                        out.push(j);
                    }
                }
                out
            })
            .collect();
        Missing { rows }
    }

    fn count(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }
}

/// Row-average imputation: missing entries take the mean of the observed
/// entries in their row, or the global observed mean for empty rows.
pub fn row_average_fill<T: Real>(data: &PartialMatrix<T>) -> Result<Mat<T>> {
    if data.nnz() == 0 {
        return Err(Error::param("no observed entries"));
    }
    let global = data.iter().map(|(_, _, v)| v).sum::<T>() / T::from_usize_lossy(data.nnz());
    let mut x = Mat::zeros(data.nrows(), data.ncols());
    for i in 0..data.nrows() {
        let (cols, vals) = data.row(i);
        let fill = if vals.is_empty() {
            global
        } else {
            vals.iter().copied().sum::<T>() / T::from_usize_lossy(vals.len())
        };
        x.row_mut(i).iter_mut().for_each(|v| *v = fill);
        for (&j, &v) in cols.iter().zip(vals) {
            x[(i, j)] = v;
        }
    }
    Ok(x)
}

/// Row-wise weights `c_j` with `v̂ᵀ(ṼᵀṼ)⁻¹ = c_jᵀ`, where `Ṽ` is `V` without
/// row `j`. Uses Sherman-Morrison on `VᵀV`, switching to a pseudo-inverse
/// (cutoff `σ₁·1e-10`) when removing the row makes the system singular.
fn leave_one_out_weights<T: Real>(v: &Mat<T>) -> (Mat<T>, bool) {
    let (m, k) = v.shape();
    let g = v.gram();
    let cut = T::lit(1e-10);
    let chol = dense::cholesky(&g);
    let mut out = Mat::zeros(m, k);
    let mut used_pinv = false;
    for j in 0..m {
        let vh = v.row(j);
        let w = chol
            .as_ref()
            .map(|l| {
                let mut w = vh.to_vec();
                dense::cholesky_solve_in_place(l, &mut w);
                w
            })
            .unwrap_or_else(|| dense::psd_pinv_solve(&g, vh, cut));
        let s = crate::linalg::dot(vh, &w);
        let denom = T::one() - s;
        // ṼᵀṼ = G − v̂v̂ᵀ; its smallest eigenvalue along G⁻¹v̂ is about 1 − s
        let top = (0..k).map(|p| g[(p, p)]).fold(T::zero(), |a, b| a.max(b));
        let c = if chol.is_some() && denom > cut * top.max(T::one()) {
            w.iter().map(|&x| x / denom).collect::<Vec<_>>()
        } else {
            used_pinv = true;
            let mut gt = g.clone();
            for p in 0..k {
                for q in 0..k {
                    gt[(p, q)] -= vh[p] * vh[q];
                }
            }
            dense::psd_pinv_solve(&gt, vh, cut)
        };
        out.row_mut(j).copy_from_slice(&c);
    }
    (out, used_pinv)
}

/// Iterative-SVD: alternate a rank-`k` SVD of the current fill with
/// leave-one-out regressions of each missing entry on the right factors.
/// Stops when the change over the missing entries, in Frobenius norm,
/// drops below `0.01`.
pub fn iterative_svd<T: Real>(data: &PartialMatrix<T>, k: usize, max_iters: usize) -> Result<BaselineResult<T>> {
    iterative_svd_with_tol(data, k, max_iters, T::lit(0.01))
}

/// [`iterative_svd`] with a custom stopping threshold on the change.
pub fn iterative_svd_with_tol<T: Real>(
    data: &PartialMatrix<T>,
    k: usize,
    max_iters: usize,
    threshold: T,
) -> Result<BaselineResult<T>> {
    let started = Instant::now();
    if !(threshold >= T::zero()) {
        return Err(Error::param("change threshold must be nonnegative"));
    }
    check_rank(data, k)?;
    let mut x = row_average_fill(data)?;
    let missing = Missing::new(data);
    let mut res = BaselineResult {
        estimate: Estimate::Dense(Mat::zeros(0, 0)),
        iterations: 0,
        wall_time: Duration::ZERO,
        termination: Termination::MaxIters,
        flags: Vec::new(),
    };
    if missing.count() == 0 {
        res.termination = Termination::ToleranceMet;
        res.estimate = Estimate::Dense(x);
        res.wall_time = started.elapsed();
        return Ok(res);
    }
    let opts = SubspaceOptions::default();
    let mut v_prev: Option<Mat<T>> = None;
    for t in 1..=max_iters {
        let (svd, info) = truncated_svd_with_info(&x, k, &opts, v_prev.as_ref())?;
        if !info.converged {
            res.flag("svd_not_converged");
        }
        let (c, used_pinv) = leave_one_out_weights(&svd.v);
        if used_pinv {
            res.flag("pseudo_inverse");
        }
        let mut change = T::zero();
        let mut next = Vec::with_capacity(missing.count());
        for (i, cols) in missing.rows.iter().enumerate() {
            if cols.is_empty() {
                continue;
            }
            let xi = x.row(i);
            let b = svd.v.t_matvec(xi);
            for &j in cols {
                let vh = svd.v.row(j);
                let cj = c.row(j);
                let mut val = T::zero();
                for p in 0..k {
                    val += cj[p] * (b[p] - vh[p] * xi[j]);
                }
                let d = val - xi[j];
                change += d * d;
                next.push((i, j, val));
            }
        }
        for (i, j, v) in next {
            x[(i, j)] = v;
        }
        if !x.is_finite() {
            return Err(Error::Numerical {
                iteration: t,
                msg: "non-finite imputed values in Iterative-SVD".into(),
            });
        }
        res.iterations = t;
        v_prev = Some(svd.v);
        if change.sqrt() < threshold {
            res.termination = Termination::ToleranceMet;
            break;
        }
    }
    res.estimate = Estimate::Dense(x);
    res.wall_time = started.elapsed();
    Ok(res)
}

/// Default Soft-Impute threshold: `σ₁(A_zero-filled) / 50`.
pub fn default_soft_impute_tau<T: Real>(data: &PartialMatrix<T>) -> Result<T> {
    if data.nnz() == 0 {
        return Ok(T::zero());
    }
    let (svd, _) = truncated_svd_with_info(data, 1, &SubspaceOptions::default(), None)?;
    Ok(svd.s[0] / T::lit(50.0))
}

/// Soft-Impute: `Z ← S_τ(P_Ω(A) + P_Ω^⊥(Z))` from `Z = 0`, keeping at most
/// `k_cap` singular values, until
/// `‖Z_t − Z_{t+1}‖_F² / max(‖Z_t‖_F², 1e-30) < eps`.
pub fn soft_impute<T: Real>(
    data: &PartialMatrix<T>,
    tau: T,
    eps: T,
    k_cap: usize,
    max_iters: usize,
) -> Result<BaselineResult<T>> {
    let started = Instant::now();
    if !(tau >= T::zero()) {
        return Err(Error::param("tau must be nonnegative"));
    }
    if !(eps > T::zero()) {
        return Err(Error::param("eps must be positive"));
    }
    check_rank(data, k_cap)?;
    let (n, m) = (data.nrows(), data.ncols());
    let mut z = Mat::zeros(n, m);
    let mut factors = (Mat::zeros(n, 0), Mat::zeros(m, 0));
    let mut basis: Option<Mat<T>> = None;
    let mut res = BaselineResult {
        estimate: Estimate::Dense(Mat::zeros(0, 0)),
        iterations: 0,
        wall_time: Duration::ZERO,
        termination: Termination::MaxIters,
        flags: Vec::new(),
    };
    let floor = T::lit(1e-30);
    for t in 1..=max_iters {
        let mut filled = z.clone();
        for (i, j, v) in data.iter() {
            filled[(i, j)] = v;
        }
        let (shrunk, b) = soft_threshold_factors(&filled, tau, Some(k_cap), 0, basis.as_ref())?;
        let next = shrunk.reconstruct();
        if !next.is_finite() {
            return Err(Error::Numerical {
                iteration: t,
                msg: "non-finite iterate in Soft-Impute".into(),
            });
        }
        let ratio = z.sub(&next).norm_sq() / z.norm_sq().max(floor);
        z = next;
        factors = (shrunk.u.scale_cols(&shrunk.s), shrunk.v);
        basis = Some(b);
        res.iterations = t;
        if ratio < eps {
            res.termination = Termination::ToleranceMet;
            break;
        }
    }
    res.estimate = Estimate::Factored {
        u: factors.0,
        v: factors.1,
    };
    res.wall_time = started.elapsed();
    Ok(res)
}

/// The factored surrogate minimized by ScaledGD at fixed regression
/// weights `α`:
/// `Σ_Ω((UVᵀ)_ij − A_ij)² + λ‖Y − UVᵀα‖_F² + (γ/2)(‖U‖_F² + ‖V‖_F²)`.
#[allow(clippy::too_many_arguments)]
pub fn scaled_gd_loss<T: Real>(
    data: &PartialMatrix<T>,
    y: &Mat<T>,
    u: &Mat<T>,
    v: &Mat<T>,
    alpha: &Mat<T>,
    lambda: T,
    gamma: T,
) -> T {
    let e = y.sub(&u.matmul(&v.t_matmul(alpha)));
    data.fit_residual_factored(u, v) + lambda * e.norm_sq() + T::lit(0.5) * gamma * (u.norm_sq() + v.norm_sq())
}

/// Gradients `(∇_U, ∇_V)` of [`scaled_gd_loss`] at fixed `α`.
#[allow(clippy::too_many_arguments)]
pub fn scaled_gd_gradient<T: Real>(
    data: &PartialMatrix<T>,
    y: &Mat<T>,
    u: &Mat<T>,
    v: &Mat<T>,
    alpha: &Mat<T>,
    lambda: T,
    gamma: T,
) -> (Mat<T>, Mat<T>) {
    let two = T::lit(2.0);
    let k = u.ncols();
    let mut gu = u.scale(gamma);
    let mut gv = v.scale(gamma);
    // 2 P_Ω(UVᵀ − A) V and its transpose counterpart
    for (i, j, a) in data.iter() {
        let (ui, vj) = (u.row(i), v.row(j));
        let r = two * (crate::linalg::dot(ui, vj) - a);
        for p in 0..k {
            gu[(i, p)] += r * vj[p];
            gv[(j, p)] += r * ui[p];
        }
    }
    if lambda != T::zero() {
        // E = Y − UVᵀα; ∂/∂U = −2λ E αᵀV, ∂/∂V = −2λ α EᵀU
        let e = y.sub(&u.matmul(&v.t_matmul(alpha)));
        gu.axpy(-two * lambda, &e.matmul(&alpha.t_matmul(v)));
        gv.axpy(-two * lambda, &alpha.matmul(&e.t_matmul(u)));
    }
    (gu, gv)
}

/// `G⁻¹` for a small Gram matrix, adding `1e-10·tr(G)` to the diagonal when
/// it is not numerically positive definite. The flag reports the jitter.
fn gram_inverse<T: Real>(g: &Mat<T>) -> (Mat<T>, bool) {
    let k = g.nrows();
    let invert = |l: &Mat<T>| {
        let mut inv = Mat::zeros(k, k);
        for c in 0..k {
            let mut e = vec![T::zero(); k];
            e[c] = T::one();
            dense::cholesky_solve_in_place(l, &mut e);
            inv.set_col(c, &e);
        }
        inv
    };
    if let Some(l) = dense::cholesky(g) {
        return (invert(&l), false);
    }
    let jitter = T::lit(1e-10) * g.trace().max(T::min_positive_value());
    let mut gj = g.clone();
    for p in 0..k {
        gj[(p, p)] += jitter;
    }
    match dense::cholesky(&gj) {
        Some(l) => (invert(&l), true),
        None => (Mat::identity(k).scale(T::one() / jitter), true),
    }
}

/// ScaledGD on the factored surrogate with spectral initialization, step
/// `η = 1/(10σ₁)` and preconditioners `(VᵀV)⁻¹`, `(UᵀU)⁻¹`. The regression
/// weights are refit before each step. Stops after `max_iters` steps or
/// once the relative decrease of the loss drops below `1e-3`.
pub fn scaled_gd<T: Real>(
    data: &PartialMatrix<T>,
    y: &Mat<T>,
    lambda: T,
    gamma: T,
    k: usize,
    max_iters: usize,
) -> Result<BaselineResult<T>> {
    let started = Instant::now();
    check_rank(data, k)?;
    if y.nrows() != data.nrows() {
        return Err(Error::param(format!(
            "side information has {} rows, data has {}",
            y.nrows(),
            data.nrows()
        )));
    }
    if !(lambda >= T::zero()) || !(gamma >= T::zero()) {
        return Err(Error::param("lambda and gamma must be nonnegative"));
    }
    let (svd, _) = truncated_svd_with_info(data, k, &SubspaceOptions::default(), None)?;
    let sigma1 = svd.s[0];
    if !(sigma1 > T::zero()) {
        return Err(Error::param(
            "zero-filled data has no spectrum; cannot set the step size",
        ));
    }
    let eta = T::one() / (T::lit(10.0) * sigma1);
    let root: Vec<T> = svd.s.iter().map(|s| s.sqrt()).collect();
    let mut u = svd.u.scale_cols(&root);
    let mut v = svd.v.scale_cols(&root);

    let mut res = BaselineResult {
        estimate: Estimate::Dense(Mat::zeros(0, 0)),
        iterations: 0,
        wall_time: Duration::ZERO,
        termination: Termination::MaxIters,
        flags: Vec::new(),
    };
    let mut alpha = ols_alpha_factored(&u, &v, y)?;
    let mut prev = scaled_gd_loss(data, y, &u, &v, &alpha, lambda, gamma);
    let rel_tol = T::lit(1e-3);
    for t in 1..=max_iters {
        let (gu, gv) = scaled_gd_gradient(data, y, &u, &v, &alpha, lambda, gamma);
        let (pv, jv) = gram_inverse(&v.gram());
        let (pu, ju) = gram_inverse(&u.gram());
        if jv || ju {
            res.flag("ridge_jitter");
        }
        let u_next = u.sub(&gu.matmul(&pv).scale(eta));
        let v_next = v.sub(&gv.matmul(&pu).scale(eta));
        if !(u_next.is_finite() && v_next.is_finite()) {
            return Err(Error::Numerical {
                iteration: t,
                msg: "non-finite factors in ScaledGD".into(),
            });
        }
        u = u_next;
        v = v_next;
        alpha = ols_alpha_factored(&u, &v, y)?;
        let cur = scaled_gd_loss(data, y, &u, &v, &alpha, lambda, gamma);
        res.iterations = t;
        if cur > prev * (T::one() + T::lit(1e-9)) {
            res.flag("objective_increase");
        }
        let improvement = (prev - cur) / prev.max(T::min_positive_value());
        prev = cur;
        if improvement < rel_tol {
            res.termination = Termination::ToleranceMet;
            break;
        }
    }
    res.estimate = Estimate::Factored { u, v };
    res.wall_time = started.elapsed();
    Ok(res)
}

#[cfg(test)]
mod tests;
