//! The regularized completion objective with side information,
//!
//! ```text
//! f(X) = Σ_Ω (X_ij − A_ij)² + λ‖(I − X X⁺) Y‖_F² + γ‖X‖_*,
//! ```
//!
//! obtained by minimizing `‖Y − Xα‖_F²` over `α` in closed form, together
//! with evaluation metrics.

use crate::error::{Error, Result};
use crate::linalg::{dense, Mat};
use crate::model::PartialMatrix;
use crate::scalar::Real;

/// The three terms of the objective and their sum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObjectiveBreakdown<T> {
    pub fit: T,
    pub side: T,
    pub reg: T,
    pub total: T,
}

impl<T: Real> ObjectiveBreakdown<T> {
    fn new(fit: T, side: T, reg: T) -> Self {
        ObjectiveBreakdown {
            fit,
            side,
            reg,
            total: fit + side + reg,
        }
    }
}

/// Quality measures of an estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Metrics<T> {
    /// `None` when no ground truth is available.
    pub err_l2: Option<T>,
    pub r2: T,
    pub fitted_rank: usize,
    pub objective: ObjectiveBreakdown<T>,
}

/// A method's output: either a dense matrix or low-rank factors `U Vᵀ`.
#[derive(Clone, Debug, PartialEq)]
pub enum Estimate<T> {
    Dense(Mat<T>),
    Factored { u: Mat<T>, v: Mat<T> },
}

impl<T: Real> Estimate<T> {
    pub fn shape(&self) -> (usize, usize) {
        match self {
            Estimate::Dense(x) => x.shape(),
            Estimate::Factored { u, v } => (u.nrows(), v.nrows()),
        }
    }

    pub fn to_dense(&self) -> Mat<T> {
        match self {
            Estimate::Dense(x) => x.clone(),
            Estimate::Factored { u, v } => u.matmul_t(v),
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            Estimate::Dense(x) => x.is_finite(),
            Estimate::Factored { u, v } => u.is_finite() && v.is_finite(),
        }
    }

    pub fn compact_svd(&self) -> CompactSvd<T> {
        match self {
            Estimate::Dense(x) => compact_svd(x),
            Estimate::Factored { u, v } => compact_svd_factored(u, v),
        }
    }
}

/// SVD restricted to the numerical rank.
#[derive(Clone, Debug)]
pub struct CompactSvd<T> {
    pub u: Mat<T>,
    pub s: Vec<T>,
    pub v: Mat<T>,
}

/// Singular values above `σ₁·max(n, m)·ε` count toward the rank.
fn rank_cutoff<T: Real>(s1: T, n: usize, m: usize) -> T {
    s1 * T::from_usize_lossy(n.max(m)) * T::epsilon()
}

fn truncate_to_rank<T: Real>(u: Mat<T>, s: Vec<T>, v: Mat<T>, n: usize, m: usize) -> CompactSvd<T> {
    let cut = rank_cutoff(s.first().copied().unwrap_or_else(T::zero), n, m);
    let r = s.iter().take_while(|&&x| x > cut).count();
    CompactSvd {
        u: u.first_cols(r),
        s: s[..r].to_vec(),
        v: v.first_cols(r),
    }
}

pub fn compact_svd<T: Real>(x: &Mat<T>) -> CompactSvd<T> {
    let (n, m) = x.shape();
    if n == 0 || m == 0 {
        return CompactSvd {
            u: Mat::zeros(n, 0),
            s: vec![],
            v: Mat::zeros(m, 0),
        };
    }
    let d = dense::svd(x);
    truncate_to_rank(d.u, d.s, d.v, n, m)
}

/// Compact SVD of `U_f V_fᵀ` from thin QR factorizations of both factors
/// and an SVD of the `k×k` core, in `O((n + m)k²)`.
pub fn compact_svd_factored<T: Real>(uf: &Mat<T>, vf: &Mat<T>) -> CompactSvd<T> {
    assert_eq!(uf.ncols(), vf.ncols(), "factor widths differ");
    let (n, m, k) = (uf.nrows(), vf.nrows(), uf.ncols());
    if k == 0 || k > n || k > m {
        return compact_svd(&uf.matmul_t(vf));
    }
    // U_f = Qu Ru with Ru = QuᵀU_f; exact because Qu contains a basis of
    // col(U_f) (padding columns are orthogonal to it)
    let qu = dense::orthonormalize(uf);
    let qv = dense::orthonormalize(vf);
    let core = qu.t_matmul(uf).matmul_t(&qv.t_matmul(vf));
    let d = dense::svd(&core);
    truncate_to_rank(qu.matmul(&d.u), d.s, qv.matmul(&d.v), n, m)
}

pub fn nuclear_norm<T: Real>(x: &Mat<T>) -> T {
    compact_svd(x).s.iter().copied().sum()
}

/// Number of singular values above `σ₁·max(n, m)·ε`.
pub fn fitted_rank<T: Real>(x: &Mat<T>) -> usize {
    compact_svd(x).s.len()
}

pub fn fitted_rank_factored<T: Real>(u: &Mat<T>, v: &Mat<T>) -> usize {
    compact_svd_factored(u, v).s.len()
}

fn check_rows<T: Real>(x_rows: usize, y: &Mat<T>) -> Result<()> {
    if x_rows != y.nrows() {
        return Err(Error::param(format!(
            "estimate has {x_rows} rows but side information has {}",
            y.nrows()
        )));
    }
    Ok(())
}

/// `α = V Σ⁺ Uᵀ Y` with singular values below `σ₁·1e-12` dropped.
fn alpha_from_svd<T: Real>(u: &Mat<T>, s: &[T], v: &Mat<T>, y: &Mat<T>) -> Mat<T> {
    let cut = s.first().copied().unwrap_or_else(T::zero) * T::lit(1e-12);
    let r = s.iter().take_while(|&&x| x > cut && x > T::zero()).count();
    let inv: Vec<T> = s[..r].iter().map(|&x| T::one() / x).collect();
    let uty = u.first_cols(r).t_matmul(y);
    let scaled = Mat::from_fn(r, y.ncols(), |i, j| uty[(i, j)] * inv[i]);
    v.first_cols(r).matmul(&scaled)
}

/// Minimum-norm least-squares `α* = (XᵀX)⁺XᵀY`.
pub fn ols_alpha<T: Real>(x: &Mat<T>, y: &Mat<T>) -> Result<Mat<T>> {
    check_rows(x.nrows(), y)?;
    if x.ncols() == 0 {
        return Ok(Mat::zeros(0, y.ncols()));
    }
    let d = dense::svd(x);
    Ok(alpha_from_svd(&d.u, &d.s, &d.v, y))
}

/// [`ols_alpha`] for `X = U_f V_fᵀ` without forming `X`.
pub fn ols_alpha_factored<T: Real>(uf: &Mat<T>, vf: &Mat<T>, y: &Mat<T>) -> Result<Mat<T>> {
    check_rows(uf.nrows(), y)?;
    let c = compact_svd_factored(uf, vf);
    Ok(alpha_from_svd(&c.u, &c.s, &c.v, y))
}

fn check_data<T: Real>(n: usize, m: usize, data: &PartialMatrix<T>, y: &Mat<T>) -> Result<()> {
    if (n, m) != (data.nrows(), data.ncols()) {
        return Err(Error::param(format!(
            "estimate is {n}x{m} but data is {}x{}",
            data.nrows(),
            data.ncols()
        )));
    }
    check_rows(n, y)
}

/// Objective through an explicit pseudo-inverse of the Gram matrix `XᵀX`.
/// Slow and only moderately accurate; kept as an independent reference.
pub fn objective_naive<T: Real>(
    x: &Mat<T>,
    data: &PartialMatrix<T>,
    y: &Mat<T>,
    lambda: T,
    gamma: T,
) -> Result<ObjectiveBreakdown<T>> {
    check_data(x.nrows(), x.ncols(), data, y)?;
    let fit = data.fit_residual(x);
    let gram = x.gram();
    let xty = x.t_matmul(y);
    let cutoff = T::lit(1e-10);
    let mut alpha = Mat::zeros(x.ncols(), y.ncols());
    for c in 0..y.ncols() {
        alpha.set_col(c, &dense::psd_pinv_solve(&gram, &xty.col(c), cutoff));
    }
    let resid = y.sub(&x.matmul(&alpha));
    let side = lambda * resid.norm_sq();
    // ‖X‖_* as the sum of square roots of the Gram eigenvalues
    let eig = dense::symmetric_eig(&gram);
    let top = eig.values.first().copied().unwrap_or_else(T::zero);
    let nuc: T = eig
        .values
        .iter()
        .filter(|&&l| l > top * cutoff && l > T::zero())
        .map(|&l| l.sqrt())
        .sum();
    Ok(ObjectiveBreakdown::new(fit, side, gamma * nuc))
}

fn objective_from_svd<T: Real>(fit: T, c: &CompactSvd<T>, y: &Mat<T>, lambda: T, gamma: T) -> ObjectiveBreakdown<T> {
    // λ Tr(Yᵀ(I − UUᵀ)Y), evaluated as the norm of the projected residual
    let resid = y.sub(&c.u.matmul(&c.u.t_matmul(y)));
    let side = lambda * resid.norm_sq();
    let nuc: T = c.s.iter().copied().sum();
    ObjectiveBreakdown::new(fit, side, gamma * nuc)
}

/// Objective through a compact SVD `X = U Σ Vᵀ` at numerical rank.
pub fn objective_svd<T: Real>(
    x: &Mat<T>,
    data: &PartialMatrix<T>,
    y: &Mat<T>,
    lambda: T,
    gamma: T,
) -> Result<ObjectiveBreakdown<T>> {
    check_data(x.nrows(), x.ncols(), data, y)?;
    let fit = data.fit_residual(x);
    Ok(objective_from_svd(fit, &compact_svd(x), y, lambda, gamma))
}

/// Objective at `X = U_f V_fᵀ` in `O(k·n·(m + d))` without forming `X`.
pub fn objective_factored<T: Real>(
    uf: &Mat<T>,
    vf: &Mat<T>,
    data: &PartialMatrix<T>,
    y: &Mat<T>,
    lambda: T,
    gamma: T,
) -> Result<ObjectiveBreakdown<T>> {
    if uf.ncols() != vf.ncols() {
        return Err(Error::param("factor widths differ"));
    }
    check_data(uf.nrows(), vf.nrows(), data, y)?;
    let fit = data.fit_residual_factored(uf, vf);
    Ok(objective_from_svd(fit, &compact_svd_factored(uf, vf), y, lambda, gamma))
}

pub fn objective_estimate<T: Real>(
    est: &Estimate<T>,
    data: &PartialMatrix<T>,
    y: &Mat<T>,
    lambda: T,
    gamma: T,
) -> Result<ObjectiveBreakdown<T>> {
    match est {
        Estimate::Dense(x) => objective_svd(x, data, y, lambda, gamma),
        Estimate::Factored { u, v } => objective_factored(u, v, data, y, lambda, gamma),
    }
}

/// A priori bound `(Σ_Ω A_ij² + λ‖Y‖_F²)/γ` on the spectral norm of any
/// minimizer.
pub fn spectral_bound<T: Real>(data: &PartialMatrix<T>, y: &Mat<T>, lambda: T, gamma: T) -> Result<T> {
    if !(gamma > T::zero()) {
        return Err(Error::param("gamma must be positive"));
    }
    Ok((data.observed_sq_sum() + lambda * y.norm_sq()) / gamma)
}

/// The perturbation `Δ = γ U Vᵀ` attaining `max ⟨X, Δ⟩` over the spectral
/// ball of radius `γ`, and that maximum.
pub fn worst_case_delta<T: Real>(x: &Mat<T>, gamma: T) -> Result<(Mat<T>, T)> {
    if !(gamma >= T::zero()) {
        return Err(Error::param("gamma must be nonnegative"));
    }
    let c = compact_svd(x);
    let delta = c.u.matmul_t(&c.v).scale(gamma);
    let inner = x.dot(&delta);
    Ok((delta, inner))
}

/// `‖X̂ − A‖_F² / ‖A‖_F²`
pub fn err_l2<T: Real>(x_hat: &Mat<T>, a_true: &Mat<T>) -> Result<T> {
    if x_hat.shape() != a_true.shape() {
        return Err(Error::param(format!(
            "estimate is {:?} but truth is {:?}",
            x_hat.shape(),
            a_true.shape()
        )));
    }
    let den = a_true.norm_sq();
    if den == T::zero() {
        return Err(Error::param("reference matrix is zero"));
    }
    Ok(x_hat.sub(a_true).norm_sq() / den)
}

fn r_squared_from_fit<T: Real>(y: &Mat<T>, y_hat: &Mat<T>) -> Result<T> {
    let (n, d) = y.shape();
    if d == 0 {
        return Err(Error::param("side information has no columns"));
    }
    let mut ss_res = T::zero();
    let mut ss_tot = T::zero();
    for c in 0..d {
        let col = y.col(c);
        let mean = col.iter().copied().sum::<T>() / T::from_usize_lossy(n.max(1));
        for (i, &v) in col.iter().enumerate() {
            let r = v - y_hat[(i, c)];
            ss_res += r * r;
            ss_tot += (v - mean) * (v - mean);
        }
    }
    if ss_tot == T::zero() {
        if ss_res == T::zero() {
            return Ok(T::one());
        }
        return Err(Error::param("side information is constant; R² undefined"));
    }
    Ok(T::one() - ss_res / ss_tot)
}

/// Pooled coefficient of determination of `Y` regressed on `X̂` with a
/// refitted `α̂`.
pub fn r_squared<T: Real>(x_hat: &Mat<T>, y: &Mat<T>) -> Result<T> {
    let alpha = ols_alpha(x_hat, y)?;
    r_squared_from_fit(y, &x_hat.matmul(&alpha))
}

fn r_squared_svd<T: Real>(c: &CompactSvd<T>, y: &Mat<T>) -> Result<T> {
    let alpha = alpha_from_svd(&c.u, &c.s, &c.v, y);
    // X̂ α = U Σ Vᵀ α
    let y_hat = c.u.scale_cols(&c.s).matmul(&c.v.t_matmul(&alpha));
    r_squared_from_fit(y, &y_hat)
}

/// All metrics of an estimate in one pass over its compact SVD.
pub fn evaluate<T: Real>(
    est: &Estimate<T>,
    data: &PartialMatrix<T>,
    y: &Mat<T>,
    truth: Option<&Mat<T>>,
    lambda: T,
    gamma: T,
) -> Result<Metrics<T>> {
    let (n, m) = est.shape();
    check_data(n, m, data, y)?;
    let c = est.compact_svd();
    let fit = match est {
        Estimate::Dense(x) => data.fit_residual(x),
        Estimate::Factored { u, v } => data.fit_residual_factored(u, v),
    };
    let objective = objective_from_svd(fit, &c, y, lambda, gamma);
    let err = match truth {
        Some(a) => Some(err_l2(&est.to_dense(), a)?),
        None => None,
    };
    Ok(Metrics {
        err_l2: err,
        r2: r_squared_svd(&c, y)?,
        fitted_rank: c.s.len(),
        objective,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture_value(t: f64) -> f64 {
        let data = PartialMatrix::new(2, 1, vec![]).unwrap();
        let x = Mat::from_rows(&[[t], [t + 1.0]]);
        let y = Mat::from_rows(&[[1.0], [1.0]]);
        objective_svd(&x, &data, &y, 1.0, 1.0).unwrap().total
    }

    #[test]
    fn line_restriction_values() {
        assert!((fixture_value(-1.0) - 2.0).abs() < 1e-9);
        assert!((fixture_value(0.0) - 2.0).abs() < 1e-9);
        assert!((fixture_value(-0.5) - (2.0 + 0.5f64.sqrt())).abs() < 1e-9);
        assert!((fixture_value(3.0) - 5.04).abs() < 1e-9);
        assert!((fixture_value(-4.0) - 5.04).abs() < 1e-9);
    }

    #[test]
    fn zero_estimate_objective() {
        let data = PartialMatrix::new(2, 2, vec![(0, 0, 3.0), (1, 1, -1.0)]).unwrap();
        let y = Mat::from_rows(&[[1.0, 2.0], [0.5, 0.0]]);
        let x = Mat::zeros(2, 2);
        let want = 10.0 + 2.0 * 5.25;
        for f in [objective_naive::<f64>, objective_svd::<f64>] {
            let o = f(&x, &data, &y, 2.0, 7.0).unwrap();
            assert!((o.total - want).abs() < 1e-12);
            assert_eq!(o.reg, 0.0);
        }
    }

    #[test]
    fn isolated_regularizer() {
        let data = PartialMatrix::<f64>::new(2, 2, vec![]).unwrap();
        let y = Mat::from_rows(&[[1.0], [5.0]]);
        let x = Mat::from_diag(&[2.0, 1.0]);
        let o = objective_naive(&x, &data, &y, 0.0, 3.0).unwrap();
        assert!((o.total - 9.0).abs() < 1e-12);
    }

    #[test]
    fn ols_special_cases() {
        let x = Mat::from_rows(&[[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]]);
        let y = Mat::from_rows(&[[2.0], [3.0], [4.0]]);
        assert_eq!(ols_alpha(&x, &y).unwrap(), x.t_matmul(&y));
        let z = ols_alpha(&Mat::zeros(3, 2), &y).unwrap();
        assert_eq!(z, Mat::zeros(2, 1));
    }

    #[test]
    fn spectral_bound_formula() {
        let data = PartialMatrix::new(2, 2, vec![(0, 0, 2.0)]).unwrap();
        let y = Mat::zeros(2, 1);
        assert_eq!(spectral_bound(&data, &y, 1.0, 1.0).unwrap(), 4.0);
        assert!(spectral_bound(&data, &y, 1.0, 0.0).is_err());
    }

    #[test]
    fn delta_and_errors() {
        let (_, inner) = worst_case_delta(&Mat::<f64>::from_diag(&[2.0, 1.0]), 3.0).unwrap();
        assert!((inner - 9.0).abs() < 1e-12);
        let (d, inner) = worst_case_delta(&Mat::<f64>::zeros(3, 2), 1.0).unwrap();
        assert_eq!(inner, 0.0);
        assert_eq!(d.shape(), (3, 2));

        let a = Mat::from_rows(&[[1.0, 2.0], [3.0, 4.0]]);
        assert_eq!(err_l2(&a, &a).unwrap(), 0.0);
        assert_eq!(err_l2(&Mat::zeros(2, 2), &a).unwrap(), 1.0);
        assert_eq!(err_l2(&a.scale(2.0), &a).unwrap(), 1.0);
        assert!(err_l2(&a, &Mat::zeros(2, 2)).is_err());
    }

    #[test]
    fn r2_cases() {
        let x: Mat<f64> = Mat::from_rows(&[[1.0, 0.0], [2.0, 1.0], [0.0, 3.0], [1.0, 1.0]]);
        let y = x.matmul(&Mat::from_rows(&[[1.0], [-2.0]]));
        assert!((r_squared(&x, &y).unwrap() - 1.0).abs() < 1e-12);
        // null model: plain formula value, not clipped
        let yc = y.col(0);
        let mean = yc.iter().sum::<f64>() / 4.0;
        let tot: f64 = yc.iter().map(|v| (v - mean).powi(2)).sum();
        let ss: f64 = yc.iter().map(|v| v * v).sum();
        let r0 = r_squared(&Mat::zeros(4, 2), &y).unwrap();
        assert!(r0 <= 0.0 && (r0 - (1.0 - ss / tot)).abs() < 1e-12);
        let c = Mat::filled(4, 1, 2.0);
        assert!(r_squared(&Mat::zeros(4, 2), &c).is_err());
    }

    #[test]
    fn rank_cases() {
        assert_eq!(fitted_rank(&Mat::<f64>::zeros(4, 3)), 0);
        let u = Mat::from_fn(6, 2, |i, j| ((i + 1) * (j + 2)) as f64 + (i * j) as f64 * 0.3);
        let v = Mat::from_fn(5, 2, |i, j| (i as f64 - j as f64).cos());
        assert_eq!(fitted_rank(&u.matmul_t(&v)), 2);
        assert_eq!(fitted_rank_factored(&u, &v), 2);
    }
}
