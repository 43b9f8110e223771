use super::{GroundTruth, PartialMatrix, SideInfo};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::rng::Rng64;
use crate::scalar::Real;

/// Random instance with a rank-`k` target and linear side information.
///
/// Draw order from a single stream seeded with `seed`: `U` (n×k), `V`
/// (m×k), `β` (m×d), each row-major and uniform on `[0, 1)`; then the noise
/// `N` (n×d, normal with standard deviation `sigma`); then the hidden
/// entries, `⌊miss_frac·n·m⌋` positions taken by a partial Fisher-Yates
/// shuffle of the row-major index grid. `A = UVᵀ` and `Y = Aβ + N`.
pub fn generate_synthetic<T: Real>(
    n: usize,
    m: usize,
    k: usize,
    d: usize,
    miss_frac: f64,
    sigma: f64,
    seed: u64,
) -> Result<(PartialMatrix<T>, SideInfo<T>, GroundTruth<T>)> {
    if k == 0 || k >= n.min(m) {
        return Err(Error::param(format!(
            "rank k = {k} must satisfy 1 <= k < min(n, m) = {}",
            n.min(m)
        )));
    }
    if !(0.0..1.0).contains(&miss_frac) {
        return Err(Error::param(format!("missing fraction {miss_frac} outside [0, 1)")));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::param(format!("noise level {sigma} must be nonnegative")));
    }

    let mut rng = Rng64::seed(seed);
    let u = Mat::<f64>::from_fn(n, k, |_, _| rng.uniform());
    let v = Mat::<f64>::from_fn(m, k, |_, _| rng.uniform());
    let beta = Mat::<f64>::from_fn(m, d, |_, _| rng.uniform());
    let noise = Mat::<f64>::from_fn(n, d, |_, _| sigma * rng.normal());

    let total = n * m;
    let hidden_count = (miss_frac * total as f64).floor() as usize;
    let mut grid: Vec<usize> = (0..total).collect();
    for t in 0..hidden_count {
        let j = t + rng.below((total - t) as u64) as usize;
        grid.swap(t, j);
    }
    let mut hidden = vec![false; total];
    for &p in &grid[..hidden_count] {
        hidden[p] = true;
    }

    let a = u.matmul_t(&v);
    let mut y = a.matmul(&beta);
    y.axpy(1.0, &noise);

    let a_t: Mat<T> = a.cast();
    let data = PartialMatrix::from_dense(&a_t, |i, j| !hidden[i * m + j]);
    let side = SideInfo::new(y.cast())?;
    let truth = GroundTruth {
        a_true: a_t,
        beta: beta.cast(),
        noise_sigma: T::lit(sigma),
    };
    Ok((data, side, truth))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dense;

    #[test]
    fn counts_and_determinism() {
        let (p, _, _) = generate_synthetic::<f64>(10, 8, 2, 3, 0.9, 1.0, 5).unwrap();
        assert_eq!(p.nnz(), 8);
        let (q, _, _) = generate_synthetic::<f64>(10, 8, 2, 3, 0.9, 1.0, 5).unwrap();
        assert_eq!(p, q);
        let (full, _, _) = generate_synthetic::<f64>(10, 8, 2, 3, 0.0, 1.0, 5).unwrap();
        assert_eq!(full.nnz(), 80);
    }

    #[test]
    fn noiseless_side_info_is_exact() {
        let (_, y, t) = generate_synthetic::<f64>(12, 9, 3, 4, 0.5, 0.0, 1).unwrap();
        let diff = y.matrix().sub(&t.a_true.matmul(&t.beta)).max_abs();
        assert!(diff <= 1e-12);
    }

    #[test]
    fn ground_truth_has_generating_rank() {
        let (_, _, t) = generate_synthetic::<f64>(30, 20, 4, 2, 0.3, 1.0, 9).unwrap();
        let s = dense::svd(&t.a_true).s;
        assert_eq!(s.iter().filter(|&&x| x > 1e-8 * s[0]).count(), 4);
    }

    #[test]
    fn rejects_bad_rank_and_fraction() {
        assert!(generate_synthetic::<f64>(5, 4, 4, 1, 0.1, 0.0, 0).is_err());
        assert!(generate_synthetic::<f64>(5, 4, 2, 1, 1.0, 0.0, 0).is_err());
    }
}
