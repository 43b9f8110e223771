//! Matrix-free linear operators.

use super::mat::Mat;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// A linear map `R^ncols -> R^nrows` known only through products.
///
/// The block methods default to column-by-column application; dense and
/// structured implementations override them with blocked kernels.
pub trait LinearMap<T: Real>: Sync {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    fn apply(&self, x: &[T]) -> Vec<T>;
    fn apply_transpose(&self, x: &[T]) -> Vec<T>;

    fn apply_block(&self, x: &Mat<T>) -> Mat<T> {
        assert_eq!(x.nrows(), self.ncols());
        let mut out = Mat::zeros(self.nrows(), x.ncols());
        for j in 0..x.ncols() {
            out.set_col(j, &self.apply(&x.col(j)));
        }
        out
    }

    fn apply_transpose_block(&self, x: &Mat<T>) -> Mat<T> {
        assert_eq!(x.nrows(), self.nrows());
        let mut out = Mat::zeros(self.ncols(), x.ncols());
        for j in 0..x.ncols() {
            out.set_col(j, &self.apply_transpose(&x.col(j)));
        }
        out
    }

    /// Materializes the operator. Intended for small sizes and tests.
    fn to_dense(&self) -> Mat<T> {
        if self.ncols() <= self.nrows() {
            self.apply_block(&Mat::identity(self.ncols()))
        } else {
            self.apply_transpose_block(&Mat::identity(self.nrows())).transpose()
        }
    }
}

impl<T: Real> LinearMap<T> for Mat<T> {
    fn nrows(&self) -> usize {
        Mat::nrows(self)
    }
    fn ncols(&self) -> usize {
        Mat::ncols(self)
    }
    fn apply(&self, x: &[T]) -> Vec<T> {
        self.matvec(x)
    }
    fn apply_transpose(&self, x: &[T]) -> Vec<T> {
        self.t_matvec(x)
    }
    fn apply_block(&self, x: &Mat<T>) -> Mat<T> {
        self.matmul(x)
    }
    fn apply_transpose_block(&self, x: &Mat<T>) -> Mat<T> {
        self.t_matmul(x)
    }
    fn to_dense(&self) -> Mat<T> {
        self.clone()
    }
}

impl<T: Real, L: LinearMap<T> + ?Sized> LinearMap<T> for &L {
    fn nrows(&self) -> usize {
        (**self).nrows()
    }
    fn ncols(&self) -> usize {
        (**self).ncols()
    }
    fn apply(&self, x: &[T]) -> Vec<T> {
        (**self).apply(x)
    }
    fn apply_transpose(&self, x: &[T]) -> Vec<T> {
        (**self).apply_transpose(x)
    }
    fn apply_block(&self, x: &Mat<T>) -> Mat<T> {
        (**self).apply_block(x)
    }
    fn apply_transpose_block(&self, x: &Mat<T>) -> Mat<T> {
        (**self).apply_transpose_block(x)
    }
}

/// `op + shift·I` for a square operator.
pub struct Shifted<'a, T, L: ?Sized> {
    pub op: &'a L,
    pub shift: T,
}

impl<T: Real, L: LinearMap<T> + ?Sized> LinearMap<T> for Shifted<'_, T, L> {
    fn nrows(&self) -> usize {
        self.op.nrows()
    }
    fn ncols(&self) -> usize {
        self.op.ncols()
    }
    fn apply(&self, x: &[T]) -> Vec<T> {
        let mut y = self.op.apply(x);
        for (a, &b) in y.iter_mut().zip(x) {
            *a += self.shift * b;
        }
        y
    }
    fn apply_transpose(&self, x: &[T]) -> Vec<T> {
        let mut y = self.op.apply_transpose(x);
        for (a, &b) in y.iter_mut().zip(x) {
            *a += self.shift * b;
        }
        y
    }
    fn apply_block(&self, x: &Mat<T>) -> Mat<T> {
        let mut y = self.op.apply_block(x);
        y.axpy(self.shift, x);
        y
    }
    fn apply_transpose_block(&self, x: &Mat<T>) -> Mat<T> {
        let mut y = self.op.apply_transpose_block(x);
        y.axpy(self.shift, x);
        y
    }
}

/// The symmetric matrix `λYYᵀ + (ρ1/2)ZZᵀ + ½(ΦZᵀ + ZΦᵀ)` held as the
/// product `F1 F2ᵀ` of two thin factors that are never assembled.
pub struct PgramOperator<'a, T> {
    y: &'a Mat<T>,
    z: &'a Mat<T>,
    phi: &'a Mat<T>,
    lambda: T,
    rho1: T,
}

/// Builds the implicit operator for the P-subproblem. Applying it to an
/// `n×c` block costs `O(n·(d + k)·c)`.
pub fn build_pgram_operator<'a, T: Real>(
    y: &'a Mat<T>,
    z: &'a Mat<T>,
    phi: &'a Mat<T>,
    lambda: T,
    rho1: T,
) -> Result<PgramOperator<'a, T>> {
    let n = y.nrows();
    if z.nrows() != n || phi.nrows() != n {
        return Err(Error::param(format!(
            "row mismatch: Y has {n}, Z has {}, Phi has {}",
            z.nrows(),
            phi.nrows()
        )));
    }
    if z.ncols() != phi.ncols() {
        return Err(Error::param(format!(
            "Z has {} columns but Phi has {}",
            z.ncols(),
            phi.ncols()
        )));
    }
    if !(lambda >= T::zero()) || !(rho1 >= T::zero()) {
        return Err(Error::param("lambda and rho1 must be nonnegative"));
    }
    Ok(PgramOperator {
        y,
        z,
        phi,
        lambda,
        rho1,
    })
}

impl<T: Real> PgramOperator<'_, T> {
    pub fn dim(&self) -> usize {
        self.y.nrows()
    }

    /// The factors `(F1, F2)` with `C̄ = F1 F2ᵀ`, materialized. Testing aid.
    pub fn factors(&self) -> (Mat<T>, Mat<T>) {
        let half = T::lit(0.5).sqrt();
        let sl = self.lambda.sqrt();
        let sr = (self.rho1 * T::lit(0.5)).sqrt();
        let f1 = self
            .y
            .scale(sl)
            .hcat(&self.z.scale(sr))
            .hcat(&self.phi.scale(half))
            .hcat(&self.z.scale(half));
        let f2 = self
            .y
            .scale(sl)
            .hcat(&self.z.scale(sr))
            .hcat(&self.z.scale(half))
            .hcat(&self.phi.scale(half));
        (f1, f2)
    }

    /// The compression `QᵀC̄Q` for an `n×c` block `Q`, formed from the thin
    /// products `QᵀY`, `QᵀZ`, `QᵀΦ`.
    pub fn compress(&self, q: &Mat<T>) -> Mat<T> {
        assert_eq!(q.nrows(), self.dim());
        let half = T::lit(0.5);
        let gz = q.t_matmul(self.z);
        let gp = q.t_matmul(self.phi);
        let mut h = gz.matmul_t(&gz).scale(self.rho1 * half);
        let cross = gp.matmul_t(&gz);
        h.axpy(half, &cross);
        h.axpy(half, &cross.transpose());
        if self.lambda != T::zero() {
            let gy = q.t_matmul(self.y);
            h.axpy(self.lambda, &gy.matmul_t(&gy));
        }
        h
    }

    /// Upper bound on the magnitude of the most negative eigenvalue:
    /// the only indefinite part is `½(ΦZᵀ + ZΦᵀ)`, bounded by `‖Φ‖₂‖Z‖₂`.
    pub fn negative_spectrum_bound(&self) -> T {
        spectral_norm_thin(self.phi) * spectral_norm_thin(self.z)
    }
}

/// Spectral norm of a thin matrix through its small Gram matrix.
fn spectral_norm_thin<T: Real>(a: &Mat<T>) -> T {
    if a.ncols() == 0 {
        return T::zero();
    }
    let g = a.gram();
    let e = super::dense::symmetric_eig(&g);
    e.values[0].max(T::zero()).sqrt()
}

impl<T: Real> LinearMap<T> for PgramOperator<'_, T> {
    fn nrows(&self) -> usize {
        self.dim()
    }
    fn ncols(&self) -> usize {
        self.dim()
    }
    fn apply(&self, x: &[T]) -> Vec<T> {
        self.apply_block(&Mat::col_vector(x)).into_vec()
    }
    fn apply_transpose(&self, x: &[T]) -> Vec<T> {
        self.apply(x)
    }
    fn apply_block(&self, x: &Mat<T>) -> Mat<T> {
        assert_eq!(x.nrows(), self.dim());
        let half = T::lit(0.5);
        let ytx = self.y.t_matmul(x).scale(self.lambda);
        let ztx = self.z.t_matmul(x);
        let phitx = self.phi.t_matmul(x);
        let mut zcoef = ztx.scale(self.rho1 * half);
        zcoef.axpy(half, &phitx);
        let mut out = self.y.matmul(&ytx);
        out.axpy(T::one(), &self.z.matmul(&zcoef));
        out.axpy(T::one(), &self.phi.matmul(&ztx.scale(half)));
        out
    }
    fn apply_transpose_block(&self, x: &Mat<T>) -> Mat<T> {
        self.apply_block(x)
    }
}
