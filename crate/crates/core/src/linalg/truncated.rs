//! Leading singular triplets and eigenpairs by randomized block subspace
//! iteration, plus the thresholded SVD and factored projections built on
//! them.

use super::dense::{self, normalize_column_signs};
use super::mat::Mat;
use super::operator::{LinearMap, Shifted};
use crate::error::{Error, Result};
use crate::rng::Rng64;
use crate::scalar::Real;

/// Inputs whose smaller dimension is at most this use a dense decomposition.
pub const DENSE_CUTOFF: usize = 32;

/// Rank-k singular triplets, sorted non-increasing.
#[derive(Clone, Debug)]
pub struct TruncatedSvd<T> {
    pub u: Mat<T>,
    pub s: Vec<T>,
    pub v: Mat<T>,
}

impl<T: Real> TruncatedSvd<T> {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    /// `U diag(s) Vᵀ`
    pub fn reconstruct(&self) -> Mat<T> {
        self.u.scale_cols(&self.s).matmul_t(&self.v)
    }
}

/// Leading eigenpairs of a symmetric operator, algebraically non-increasing.
#[derive(Clone, Debug)]
pub struct TopEig<T> {
    pub vectors: Mat<T>,
    pub values: Vec<T>,
}

#[derive(Clone, Debug)]
pub struct SubspaceOptions<T> {
    pub seed: u64,
    /// Stop once every wanted Ritz pair has residual at most `tol` times the
    /// largest Ritz value in magnitude.
    pub tol: T,
    pub oversample: usize,
    /// Power iterations always performed before convergence is checked.
    pub power_iters: usize,
    pub max_iters: usize,
}

impl<T: Real> Default for SubspaceOptions<T> {
    fn default() -> Self {
        SubspaceOptions {
            seed: 0x5eed,
            tol: T::lit(1e-10),
            oversample: 10,
            power_iters: 4,
            max_iters: 300,
        }
    }
}

impl<T: Real> SubspaceOptions<T> {
    pub fn with_seed(seed: u64) -> Self {
        SubspaceOptions {
            seed,
            ..Default::default()
        }
    }

    fn effective_tol(&self) -> T {
        self.tol.max(T::epsilon() * T::lit(64.0))
    }
}

/// Outcome of an iterative decomposition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterInfo {
    pub iterations: usize,
    /// Largest relative Ritz residual at exit.
    pub residual: f64,
    pub converged: bool,
}

fn check_rank(k: usize, limit: usize, what: &str) -> Result<()> {
    if k == 0 || k > limit {
        return Err(Error::param(format!("{what}: rank {k} outside 1..={limit}")));
    }
    Ok(())
}

fn gaussian_block<T: Real>(rows: usize, cols: usize, seed: u64) -> Mat<T> {
    let mut rng = Rng64::seed(seed);
    Mat::from_fn(rows, cols, |_, _| T::lit(rng.normal()))
}

/// Starting block: the columns of `start` (if any) topped up with Gaussian
/// columns.
fn initial_block<T: Real>(rows: usize, width: usize, seed: u64, start: Option<&Mat<T>>) -> Mat<T> {
    let g = gaussian_block(rows, width, seed);
    match start {
        Some(s) if s.nrows() == rows && s.ncols() > 0 => {
            let take = s.ncols().min(width);
            Mat::from_fn(rows, width, |i, j| if j < take { s[(i, j)] } else { g[(i, j)] })
        }
        _ => g,
    }
}

/// Leading `k` singular triplets of `op`, returning an error when the
/// iteration budget is exhausted.
pub fn truncated_svd<T: Real, L: LinearMap<T> + ?Sized>(
    op: &L,
    k: usize,
    opts: &SubspaceOptions<T>,
) -> Result<TruncatedSvd<T>> {
    let (svd, info) = truncated_svd_with_info(op, k, opts, None)?;
    if !info.converged {
        return Err(Error::Convergence {
            what: "truncated SVD",
            iterations: info.iterations,
            residual: info.residual,
        });
    }
    Ok(svd)
}

/// Like [`truncated_svd`], but never fails on non-convergence: the best
/// iterate is returned together with its diagnostics. `start` optionally
/// seeds the right-singular subspace (e.g. from a previous solve).
pub fn truncated_svd_with_info<T: Real, L: LinearMap<T> + ?Sized>(
    op: &L,
    k: usize,
    opts: &SubspaceOptions<T>,
    start: Option<&Mat<T>>,
) -> Result<(TruncatedSvd<T>, IterInfo)> {
    let (r, c) = (op.nrows(), op.ncols());
    check_rank(k, r.min(c), "truncated_svd")?;

    if r.min(c) <= DENSE_CUTOFF {
        let d = dense::svd(&op.to_dense());
        let out = TruncatedSvd {
            u: d.u.first_cols(k),
            s: d.s[..k].to_vec(),
            v: d.v.first_cols(k),
        };
        let info = IterInfo {
            iterations: 0,
            residual: 0.0,
            converged: true,
        };
        return Ok((out, info));
    }

    let tol = opts.effective_tol();
    let l = (k + opts.oversample).min(r.min(c));
    let mut q = dense::orthonormalize(&op.apply_block(&initial_block(c, l, opts.seed, start)));
    let mut best: Option<(TruncatedSvd<T>, T)> = None;
    let mut iterations = 0;

    while iterations < opts.max_iters.max(opts.power_iters) {
        iterations += 1;
        // Rayleigh-Ritz on the current left basis: B = AᵀQ = Ub S Vbᵀ, so
        // A ≈ Q Vb S Ubᵀ.
        let b = op.apply_transpose_block(&q);
        if iterations < opts.power_iters {
            q = dense::orthonormalize(&op.apply_block(&dense::orthonormalize(&b)));
            continue;
        }
        let small = dense::svd(&b);
        let u = q.matmul(&small.v).first_cols(k);
        let v = small.u.first_cols(k);
        let s: Vec<T> = small.s[..k].to_vec();
        let smax = small.s[0];
        if smax == T::zero() {
            // zero operator: any orthonormal pair is exact
            let mut svd = TruncatedSvd { u, s, v };
            normalize_column_signs(&mut svd.u, Some(&mut svd.v));
            let info = IterInfo {
                iterations,
                residual: 0.0,
                converged: true,
            };
            return Ok((svd, info));
        }
        let av = op.apply_block(&v);
        let mut worst = T::zero();
        for j in 0..k {
            let mut e = T::zero();
            for i in 0..r {
                let d = av[(i, j)] - s[j] * u[(i, j)];
                e += d * d;
            }
            worst = worst.max(e.sqrt() / smax);
        }
        let candidate = TruncatedSvd { u, s, v };
        if best.as_ref().is_none_or(|(_, w)| worst < *w) {
            best = Some((candidate, worst));
        }
        if worst <= tol {
            break;
        }
        q = dense::orthonormalize(&op.apply_block(&dense::orthonormalize(&b)));
    }

    let (mut svd, worst) = best.expect("at least one Ritz step");
    normalize_column_signs(&mut svd.u, Some(&mut svd.v));
    let info = IterInfo {
        iterations,
        residual: worst.as_f64(),
        converged: worst <= tol,
    };
    Ok((svd, info))
}

/// Leading `k` eigenpairs (largest algebraic eigenvalues) of a symmetric
/// operator.
pub fn symmetric_eig_topk<T: Real, L: LinearMap<T> + ?Sized>(
    op: &L,
    k: usize,
    opts: &SubspaceOptions<T>,
) -> Result<TopEig<T>> {
    let (eig, info) = symmetric_eig_topk_with_info(op, k, opts, None, None)?;
    if !info.converged {
        return Err(Error::Convergence {
            what: "symmetric eigensolver",
            iterations: info.iterations,
            residual: info.residual,
        });
    }
    Ok(eig)
}

/// Probes `⟨op v, w⟩ = ⟨op w, v⟩` on a few random pairs, relative to the
/// magnitudes involved.
pub fn check_symmetric<T: Real, L: LinearMap<T> + ?Sized>(op: &L, seed: u64) -> Result<()> {
    let n = op.nrows();
    if n != op.ncols() {
        return Err(Error::param(format!("operator is {}x{}, not square", n, op.ncols())));
    }
    let probes = gaussian_block::<T>(n, 6, seed ^ 0x5a5a);
    let images = op.apply_block(&probes);
    for p in 0..3 {
        let (v, w) = (probes.col(2 * p), probes.col(2 * p + 1));
        let (av, aw) = (images.col(2 * p), images.col(2 * p + 1));
        let lhs = super::mat::dot(&av, &w);
        let rhs = super::mat::dot(&aw, &v);
        let scale = (super::mat::norm2(&av) * super::mat::norm2(&w))
            .max(super::mat::norm2(&aw) * super::mat::norm2(&v))
            .max(T::one());
        if (lhs - rhs).abs() > T::lit(1e-8) * scale {
            return Err(Error::param(format!(
                "operator is not symmetric: probe mismatch {:e}",
                (lhs - rhs).abs().as_f64()
            )));
        }
    }
    Ok(())
}

/// Eigen-solver with diagnostics. `spectrum_floor` is a known lower bound
/// on the smallest eigenvalue; without it one is estimated from a few power
/// steps. `start` optionally seeds the iteration with a previous basis.
pub fn symmetric_eig_topk_with_info<T: Real, L: LinearMap<T> + ?Sized>(
    op: &L,
    k: usize,
    opts: &SubspaceOptions<T>,
    spectrum_floor: Option<T>,
    start: Option<&Mat<T>>,
) -> Result<(TopEig<T>, IterInfo)> {
    check_symmetric(op, opts.seed)?;
    let n = op.nrows();
    check_rank(k, n, "symmetric_eig_topk")?;

    if n <= DENSE_CUTOFF {
        let e = dense::symmetric_eig(&op.to_dense());
        let out = TopEig {
            vectors: e.vectors.first_cols(k),
            values: e.values[..k].to_vec(),
        };
        let info = IterInfo {
            iterations: 0,
            residual: 0.0,
            converged: true,
        };
        return Ok((out, info));
    }

    let tol = opts.effective_tol();
    let l = (k + opts.oversample).min(n);
    let shift = match spectrum_floor {
        Some(f) => (-f).max(T::zero()),
        None => estimate_spectral_radius(op, l, opts.seed) * T::lit(2.0),
    };
    let shifted = Shifted { op, shift };

    let mut q = dense::orthonormalize(&initial_block(n, l, opts.seed, start));
    let mut best: Option<(TopEig<T>, T)> = None;
    let mut iterations = 0;

    while iterations < opts.max_iters.max(opts.power_iters) {
        iterations += 1;
        let aq = op.apply_block(&q);
        if iterations < opts.power_iters {
            let mut next = aq;
            next.axpy(shift, &q);
            q = dense::orthonormalize(&next);
            continue;
        }
        // Rayleigh-Ritz with the unshifted operator
        let h = q.t_matmul(&aq);
        let small = dense::symmetric_eig(&h);
        let w = small.vectors.first_cols(k);
        let vectors = q.matmul(&w);
        let values: Vec<T> = small.values[..k].to_vec();
        let scale = small.values.iter().fold(T::zero(), |a, &x| a.max(x.abs()));
        if scale == T::zero() {
            let mut out = TopEig { vectors, values };
            normalize_column_signs(&mut out.vectors, None);
            let info = IterInfo {
                iterations,
                residual: 0.0,
                converged: true,
            };
            return Ok((out, info));
        }
        let av = aq.matmul(&w);
        let mut worst = T::zero();
        for j in 0..k {
            let mut e = T::zero();
            for i in 0..n {
                let d = av[(i, j)] - values[j] * vectors[(i, j)];
                e += d * d;
            }
            worst = worst.max(e.sqrt() / scale);
        }
        let candidate = TopEig { vectors, values };
        if best.as_ref().is_none_or(|(_, b)| worst < *b) {
            best = Some((candidate, worst));
        }
        if worst <= tol {
            break;
        }
        q = dense::orthonormalize(&shifted.apply_block(&q));
    }

    let (mut out, worst) = best.expect("at least one Ritz step");
    normalize_column_signs(&mut out.vectors, None);
    let info = IterInfo {
        iterations,
        residual: worst.as_f64(),
        converged: worst <= tol,
    };
    Ok((out, info))
}

/// Largest Ritz value magnitude after a few plain block power steps.
fn estimate_spectral_radius<T: Real, L: LinearMap<T> + ?Sized>(op: &L, l: usize, seed: u64) -> T {
    let mut q = dense::orthonormalize(&gaussian_block(op.nrows(), l, seed ^ 0xa5a5));
    for _ in 0..6 {
        q = dense::orthonormalize(&op.apply_block(&q));
    }
    let h = q.t_matmul(&op.apply_block(&q));
    let e = dense::symmetric_eig(&h);
    e.values.iter().fold(T::zero(), |a, &x| a.max(x.abs()))
}

/// `Σ max(σᵢ − τ, 0) uᵢ vᵢᵀ`, keeping at most `max_rank` leading terms.
pub fn soft_threshold_svd<T: Real>(x: &Mat<T>, tau: T, max_rank: Option<usize>) -> Result<Mat<T>> {
    let (svd, _) = soft_threshold_factors(x, tau, max_rank, 0x50f7, None)?;
    Ok(svd.reconstruct())
}

/// Factored form of [`soft_threshold_svd`]: the shrunk triplets (zero
/// singular values dropped) and the right singular basis computed before
/// shrinkage, which callers may use to warm-start the next call.
pub fn soft_threshold_factors<T: Real>(
    x: &Mat<T>,
    tau: T,
    max_rank: Option<usize>,
    seed: u64,
    start: Option<&Mat<T>>,
) -> Result<(TruncatedSvd<T>, Mat<T>)> {
    if !(tau >= T::zero()) {
        return Err(Error::param("soft threshold must be nonnegative"));
    }
    let full = x.nrows().min(x.ncols());
    let r = max_rank.unwrap_or(full).min(full);
    if r == 0 {
        let empty = TruncatedSvd {
            u: Mat::zeros(x.nrows(), 0),
            s: vec![],
            v: Mat::zeros(x.ncols(), 0),
        };
        return Ok((empty, Mat::zeros(x.ncols(), 0)));
    }
    let svd = if r == full || full <= DENSE_CUTOFF {
        let d = dense::svd(x);
        TruncatedSvd {
            u: d.u.first_cols(r),
            s: d.s[..r].to_vec(),
            v: d.v.first_cols(r),
        }
    } else {
        let opts = SubspaceOptions::with_seed(seed);
        truncated_svd_with_info(x, r, &opts, start)?.0
    };
    let basis = svd.v.clone();
    let keep = svd.s.iter().filter(|&&s| s > tau).count();
    let shrunk = TruncatedSvd {
        u: svd.u.first_cols(keep),
        s: svd.s[..keep].iter().map(|&s| s - tau).collect(),
        v: svd.v.first_cols(keep),
    };
    Ok((shrunk, basis))
}

/// Checks `MᵀM = I` to within `1e-6` (Frobenius).
pub fn check_orthonormal<T: Real>(m: &Mat<T>) -> Result<()> {
    let dev = m.gram().sub(&Mat::identity(m.ncols())).frobenius_norm();
    if !(dev <= T::lit(1e-6)) {
        return Err(Error::param(format!(
            "projection factor is not orthonormal (‖MᵀM − I‖ = {:e})",
            dev.as_f64()
        )));
    }
    Ok(())
}

/// `M(MᵀR)`: the orthogonal projection of `R` onto `span(M)` without
/// forming `MMᵀ`.
pub fn apply_projection<T: Real>(m: &Mat<T>, r: &Mat<T>) -> Result<Mat<T>> {
    if m.nrows() != r.nrows() {
        return Err(Error::param(format!(
            "projection factor has {} rows, operand has {}",
            m.nrows(),
            r.nrows()
        )));
    }
    check_orthonormal(m)?;
    Ok(project_unchecked(m, r))
}

pub(crate) fn project_unchecked<T: Real>(m: &Mat<T>, r: &Mat<T>) -> Mat<T> {
    m.matmul(&m.t_matmul(r))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_diagonal() {
        let svd = truncated_svd(&Mat::<f64>::identity(5), 3, &Default::default()).unwrap();
        assert_eq!(svd.s, vec![1.0, 1.0, 1.0]);

        let d = Mat::from_diag(&[3.0, 2.0, 1.0]);
        let svd = truncated_svd(&d, 2, &Default::default()).unwrap();
        assert_eq!(svd.s, vec![3.0, 2.0]);
        assert_eq!(svd.u.col(0), vec![1.0, 0.0, 0.0]);
        assert_eq!(svd.v.col(1), vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn rank_out_of_range() {
        let a = Mat::<f64>::identity(4);
        assert!(matches!(
            truncated_svd(&a, 0, &Default::default()),
            Err(Error::Parameter(_))
        ));
        assert!(matches!(
            truncated_svd(&a, 5, &Default::default()),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn randomized_path_matches_dense() {
        let mut rng = Rng64::seed(1);
        // decaying spectrum so the leading triplets are well separated
        let g1 = Mat::from_fn(80, 60, |_, _| rng.normal());
        let g2 = Mat::from_fn(60, 60, |_, _| rng.normal());
        let q = dense::orthonormalize(&g2);
        let decay: Vec<f64> = (0..60).map(|i| 0.8f64.powi(i)).collect();
        let a = dense::orthonormalize(&g1).scale_cols(&decay).matmul_t(&q);
        let svd = truncated_svd(&a, 6, &Default::default()).unwrap();
        for (i, s) in svd.s.iter().enumerate() {
            assert!((s - decay[i]).abs() < 1e-9, "{i}: {s}");
        }
        assert!(svd.u.gram().sub(&Mat::identity(6)).max_abs() < 1e-10);
        assert!(svd.v.gram().sub(&Mat::identity(6)).max_abs() < 1e-10);
    }

    #[test]
    fn eig_diag_and_zero() {
        let e = symmetric_eig_topk(&Mat::from_diag(&[5.0, 1.0, 0.0]), 1, &Default::default()).unwrap();
        assert_eq!(e.values, vec![5.0]);
        assert_eq!(e.vectors.col(0), vec![1.0, 0.0, 0.0]);

        let z = Mat::<f64>::zeros(40, 40);
        let e = symmetric_eig_topk(&z, 2, &Default::default()).unwrap();
        assert_eq!(e.values, vec![0.0, 0.0]);
        assert!(e.vectors.gram().sub(&Mat::identity(2)).max_abs() < 1e-12);
    }

    #[test]
    fn eig_rejects_asymmetric() {
        let a = Mat::from_fn(5, 5, |i, j| (i * 5 + j) as f64);
        assert!(matches!(
            symmetric_eig_topk(&a, 2, &Default::default()),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn eig_indefinite_selects_algebraic_top() {
        // large negative eigenvalues must not crowd out small positive ones
        let mut diag: Vec<f64> = (0..50).map(|i| -100.0 - i as f64).collect();
        diag[7] = 3.0;
        diag[20] = 2.0;
        let mut rng = Rng64::seed(4);
        let q = dense::orthonormalize(&Mat::from_fn(50, 50, |_, _| rng.normal()));
        let a = q.scale_cols(&diag).matmul_t(&q);
        let e = symmetric_eig_topk(&a, 2, &Default::default()).unwrap();
        assert!((e.values[0] - 3.0).abs() < 1e-8);
        assert!((e.values[1] - 2.0).abs() < 1e-8);
    }

    #[test]
    fn soft_threshold_cases() {
        let x = Mat::from_fn(6, 4, |i, j| ((i * 3 + j) as f64).sin());
        let same = soft_threshold_svd(&x, 0.0, None).unwrap();
        assert!(same.sub(&x).max_abs() < 1e-10);

        let s1 = dense::svd(&x).s[0];
        assert!(soft_threshold_svd(&x, s1, None).unwrap().max_abs() == 0.0);

        let d = soft_threshold_svd(&Mat::from_diag(&[3.0, 1.0]), 2.0, None).unwrap();
        assert!(d.sub(&Mat::from_diag(&[1.0, 0.0])).max_abs() < 1e-12);

        assert!(soft_threshold_svd(&x, -1.0, None).is_err());
    }

    #[test]
    fn projection_cases() {
        let m = Mat::<f64>::identity(4);
        let r = Mat::from_fn(4, 2, |i, j| (i + j) as f64);
        assert_eq!(apply_projection(&m, &r).unwrap(), r);

        let m = Mat::from_rows(&[[1.0], [0.0], [0.0]]);
        let r = Mat::from_rows(&[[0.0], [2.0], [-1.0]]);
        assert_eq!(apply_projection(&m, &r).unwrap().max_abs(), 0.0);

        let bad = Mat::from_rows(&[[2.0], [0.0], [0.0]]);
        assert!(apply_projection(&bad, &r).is_err());
    }
}
