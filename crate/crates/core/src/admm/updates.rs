//! Closed-form block updates of the augmented Lagrangian.

use rayon::prelude::*;

use super::{IterateState, ObservationMasks};
use crate::error::{Error, Result};
use crate::linalg::{build_pgram_operator, dense, project_unchecked, LinearMap, Mat};
use crate::model::PartialMatrix;
use crate::scalar::Real;

fn check_masks<T: Real>(data: &PartialMatrix<T>, masks: &ObservationMasks) -> Result<()> {
    if masks.nrows() != data.nrows() || masks.ncols() != data.ncols() || masks.len() != data.nnz() {
        return Err(Error::param("observation masks do not match the data"));
    }
    Ok(())
}

/// Solves `[2 Fᵀ W F + c I] x = 2 Fᵀ W a + b` for one row, where `W`
/// selects the rows `idx` of `F` with targets `vals`.
fn masked_row_solve<T: Real>(f: &Mat<T>, idx: &[usize], vals: &[T], c: T, b: &mut [T]) -> Option<()> {
    let k = f.ncols();
    let two = T::lit(2.0);
    let mut g = Mat::zeros(k, k);
    for p in 0..k {
        g[(p, p)] = c;
    }
    for (&j, &a) in idx.iter().zip(vals) {
        let fj = f.row(j);
        for p in 0..k {
            let w = two * fj[p];
            b[p] += w * a;
            for q in 0..=p {
                g[(p, q)] += w * fj[q];
            }
        }
    }
    for p in 0..k {
        for q in 0..p {
            g[(q, p)] = g[(p, q)];
        }
    }
    let l = dense::cholesky(&g)?;
    dense::cholesky_solve_in_place(&l, b);
    b.iter().all(|x| x.is_finite()).then_some(())
}

/// Row-wise U step: `U_i = [2VᵀW_iV + (γ+ρ2)I]⁻¹[2VᵀW_iA_i + Ψ_i + ρ2 Z_i]`.
pub fn update_u<T: Real>(
    v: &Mat<T>,
    z: &Mat<T>,
    psi: &Mat<T>,
    data: &PartialMatrix<T>,
    masks: &ObservationMasks,
    gamma: T,
    rho2: T,
) -> Result<Mat<T>> {
    check_masks(data, masks)?;
    let (n, k) = z.shape();
    if !(gamma + rho2 > T::zero()) {
        return Err(Error::param("gamma + rho2 must be positive"));
    }
    let mut out = Mat::zeros(n, k);
    out.as_mut_slice()
        .par_chunks_mut(k)
        .enumerate()
        .try_for_each(|(i, row)| {
            for p in 0..k {
                row[p] = psi[(i, p)] + rho2 * z[(i, p)];
            }
            masked_row_solve(v, masks.row(i), data.row(i).1, gamma + rho2, row).ok_or_else(|| Error::Numerical {
                iteration: 0,
                msg: format!("U system for row {} is not positive definite", i + 1),
            })
        })?;
    Ok(out)
}

/// Row-wise V step: `V_j = [2UᵀW_jU + γI]⁻¹ 2UᵀW_jA_j`.
pub fn update_v<T: Real>(u: &Mat<T>, data: &PartialMatrix<T>, masks: &ObservationMasks, gamma: T) -> Result<Mat<T>> {
    check_masks(data, masks)?;
    if !(gamma > T::zero()) {
        return Err(Error::param("gamma must be positive"));
    }
    let k = u.ncols();
    let mut out = Mat::zeros(data.ncols(), k);
    out.as_mut_slice()
        .par_chunks_mut(k)
        .enumerate()
        .try_for_each(|(j, row)| {
            masked_row_solve(u, masks.col(j), data.col(j).1, gamma, row).ok_or_else(|| Error::Numerical {
                iteration: 0,
                msg: format!("V system for column {} is not positive definite", j + 1),
            })
        })?;
    Ok(out)
}

/// Orthonormal basis of `col(Y)`, computed once per solve and reused by
/// every P step.
#[derive(Clone, Debug)]
pub struct SideBasis<T> {
    q: Mat<T>,
}

impl<T: Real> SideBasis<T> {
    pub fn new(y: &Mat<T>) -> Self {
        let (n, d) = y.shape();
        let q = if d >= n {
            Mat::identity(n)
        } else {
            dense::orthonormalize_with_tol(y, T::lit(1e-12)).0
        };
        SideBasis { q }
    }

    pub fn basis(&self) -> &Mat<T> {
        &self.q
    }
}

/// P step: the `k` leading eigenvectors (algebraic order) of
/// `λYYᵀ + (ρ1/2)ZZᵀ + ½(ΦZᵀ + ZΦᵀ)`, applied matrix-free. Returns the
/// orthonormal factor `M` and the selected eigenvalues.
pub fn update_p<T: Real>(
    y: &Mat<T>,
    z: &Mat<T>,
    phi: &Mat<T>,
    lambda: T,
    rho1: T,
    k: usize,
) -> Result<(Mat<T>, Vec<T>)> {
    leading_eigvecs(None, y, z, phi, lambda, rho1, k)
}

/// As [`update_p`] with a precomputed basis of `col(Y)`.
#[allow(clippy::too_many_arguments)]
pub fn update_p_with_basis<T: Real>(
    side: &SideBasis<T>,
    y: &Mat<T>,
    z: &Mat<T>,
    phi: &Mat<T>,
    lambda: T,
    rho1: T,
    k: usize,
) -> Result<(Mat<T>, Vec<T>)> {
    leading_eigvecs(Some(side), y, z, phi, lambda, rho1, k)
}

/// Orthonormal basis of `span[Y, Z, Φ]`, or `None` when that span may fill
/// the whole space.
fn range_basis<T: Real>(
    side: Option<&SideBasis<T>>,
    y: &Mat<T>,
    z: &Mat<T>,
    phi: &Mat<T>,
    lambda: T,
) -> Option<Mat<T>> {
    let n = z.nrows();
    let zp = z.hcat(phi);
    let use_y = lambda != T::zero();
    let d = if use_y { y.ncols() } else { 0 };
    if d + zp.ncols() >= n {
        return None;
    }
    if !use_y {
        return Some(dense::orthonormalize_with_tol(&zp, T::lit(1e-12)).0);
    }
    let owned;
    let qy = match side {
        Some(s) => s.basis(),
        None => {
            owned = SideBasis::new(y);
            owned.basis()
        }
    };
    let strip = |w: &Mat<T>| {
        let mut out = w.clone();
        for _ in 0..2 {
            out = out.sub(&project_unchecked(qy, &out));
        }
        out
    };
    // deflate against col(Y), orthonormalize, and deflate once more so that
    // any replacement columns are orthogonal to col(Y) as well
    let (qw, _) = dense::orthonormalize_with_tol(&strip(&zp), T::lit(1e-12));
    let qw = dense::orthonormalize(&strip(&qw));
    Some(qy.hcat(&qw))
}

/// Exact top-`k` eigenpairs of the implicit operator. The operator's range
/// lies in `span[Y, Z, Φ]`, so a Rayleigh-Ritz step on an orthonormal basis
/// `Q` of that span recovers every nonzero eigenpair; the orthogonal
/// complement of `Q` contributes zero eigenvalues.
pub(crate) fn leading_eigvecs<T: Real>(
    side: Option<&SideBasis<T>>,
    y: &Mat<T>,
    z: &Mat<T>,
    phi: &Mat<T>,
    lambda: T,
    rho1: T,
    k: usize,
) -> Result<(Mat<T>, Vec<T>)> {
    let op = build_pgram_operator(y, z, phi, lambda, rho1)?;
    let n = op.dim();
    if k == 0 || k > n {
        return Err(Error::param(format!("P step: rank {k} outside 1..={n}")));
    }
    let Some(q) = range_basis(side, y, z, phi, lambda) else {
        let e = dense::symmetric_eig(&op.to_dense());
        return Ok((e.vectors.first_cols(k), e.values[..k].to_vec()));
    };
    let r = q.ncols();
    let h = op.compress(&q);
    let e = dense::symmetric_eig(&h);

    // nonnegative Ritz values, then complement zeros, then negative ones
    let nonneg = e.values.iter().take_while(|&&v| v >= T::zero()).count();
    let from_ritz_first = nonneg.min(k);
    let zeros = (k - from_ritz_first).min(n - r);
    let from_ritz_last = k - from_ritz_first - zeros;

    let mut picked: Vec<usize> = (0..from_ritz_first).collect();
    picked.extend(nonneg..nonneg + from_ritz_last);
    let mut m = q.matmul(&e.vectors.select_cols(&picked));
    let mut values: Vec<T> = picked.iter().map(|&i| e.values[i]).collect();
    if zeros > 0 {
        let full = dense::orthonormal_completion(&q, r + zeros, 0x005e_ed0f_c0de);
        let extra = full.select_cols(&(r..r + zeros).collect::<Vec<_>>());
        let head = m.select_cols(&(0..from_ritz_first).collect::<Vec<_>>());
        let tail = m.select_cols(&(from_ritz_first..m.ncols()).collect::<Vec<_>>());
        m = head.hcat(&extra).hcat(&tail);
        values.splice(from_ritz_first..from_ritz_first, std::iter::repeat_n(T::zero(), zeros));
    }
    dense::normalize_column_signs(&mut m, None);
    Ok((m, values))
}

/// Z step: `Z = [ρ2U − Φ − Ψ + P(Φ + ρ1U − (ρ1/ρ2)Ψ)] / (ρ1 + ρ2)`, the
/// solution of `(ρ1(I − P) + ρ2 I) Z = ρ2U − (I − P)Φ − Ψ`.
pub fn update_z<T: Real>(u: &Mat<T>, m: &Mat<T>, phi: &Mat<T>, psi: &Mat<T>, rho1: T, rho2: T) -> Result<Mat<T>> {
    if !(rho1 > T::zero() && rho2 > T::zero()) {
        return Err(Error::param("rho1 and rho2 must be positive"));
    }
    crate::linalg::check_orthonormal(m)?;
    let mut inner = phi.clone();
    inner.axpy(rho1, u);
    inner.axpy(-rho1 / rho2, psi);
    let mut z = project_unchecked(m, &inner);
    z.axpy(rho2, u);
    z.axpy(-T::one(), phi);
    z.axpy(-T::one(), psi);
    z.scale_mut(T::one() / (rho1 + rho2));
    Ok(z)
}

/// Dual ascent: `Φ += ρ1(I − P)Z`, `Ψ += ρ2(Z − U)`.
pub fn update_duals<T: Real>(state: &IterateState<T>, rho1: T, rho2: T) -> (Mat<T>, Mat<T>) {
    let r1 = state.phi_residual();
    let mut phi = state.phi.clone();
    phi.axpy(rho1, &r1);
    let mut psi = state.psi.clone();
    psi.axpy(rho2, &state.z.sub(&state.u));
    (phi, psi)
}
