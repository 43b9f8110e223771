//! Augmented Lagrangian evaluation, the dual residual, and the stationarity
//! conditions of the mixed-projection formulation.

use super::updates::{leading_eigvecs, SideBasis};
use super::IterateState;
use crate::error::Result;
use crate::linalg::{dot, project_unchecked, Mat};
use crate::model::PartialMatrix;
use crate::objective::compact_svd_factored;
use crate::scalar::Real;

/// The individual terms of the augmented Lagrangian at `P = MMᵀ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LagrangianTerms<T> {
    /// `Σ_Ω ((UVᵀ)_ij − A_ij)²`
    pub fit: T,
    /// `λ‖(I − P)Y‖_F²`
    pub side: T,
    /// `(γ/2)‖U‖_F²`
    pub reg_u: T,
    /// `(γ/2)‖V‖_F²`
    pub reg_v: T,
    /// `Tr(Φᵀ(I − P)Z)`
    pub phi_lin: T,
    /// `Tr(Ψᵀ(Z − U))`
    pub psi_lin: T,
    /// `(ρ1/2)‖(I − P)Z‖_F²`
    pub phi_pen: T,
    /// `(ρ2/2)‖Z − U‖_F²`
    pub psi_pen: T,
}

impl<T: Real> LagrangianTerms<T> {
    pub fn total(&self) -> T {
        self.fit + self.side + self.reg_u + self.reg_v + self.phi_lin + self.psi_lin + self.phi_pen + self.psi_pen
    }

    /// Terms depending on `U` with everything else fixed.
    pub fn u_part(&self) -> T {
        self.fit + self.reg_u + self.psi_lin + self.psi_pen
    }

    pub fn v_part(&self) -> T {
        self.fit + self.reg_v
    }

    pub fn p_part(&self) -> T {
        self.side + self.phi_lin + self.phi_pen
    }

    pub fn z_part(&self) -> T {
        self.phi_lin + self.psi_lin + self.phi_pen + self.psi_pen
    }
}

#[allow(clippy::too_many_arguments)]
pub fn lagrangian_terms<T: Real>(
    s: &IterateState<T>,
    data: &PartialMatrix<T>,
    y: &Mat<T>,
    lambda: T,
    gamma: T,
    rho1: T,
    rho2: T,
) -> LagrangianTerms<T> {
    let half = T::lit(0.5);
    let side_resid = y.sub(&project_unchecked(&s.m, y));
    let r1 = s.phi_residual();
    let r2 = s.z.sub(&s.u);
    LagrangianTerms {
        fit: data.fit_residual_factored(&s.u, &s.v),
        side: lambda * side_resid.norm_sq(),
        reg_u: half * gamma * s.u.norm_sq(),
        reg_v: half * gamma * s.v.norm_sq(),
        phi_lin: s.phi.dot(&r1),
        psi_lin: s.psi.dot(&r2),
        phi_pen: half * rho1 * r1.norm_sq(),
        psi_pen: half * rho2 * r2.norm_sq(),
    }
}

/// Value of the augmented Lagrangian.
#[allow(clippy::too_many_arguments)]
pub fn augmented_lagrangian<T: Real>(
    s: &IterateState<T>,
    data: &PartialMatrix<T>,
    y: &Mat<T>,
    lambda: T,
    gamma: T,
    rho1: T,
    rho2: T,
) -> T {
    lagrangian_terms(s, data, y, lambda, gamma, rho1, rho2).total()
}

/// Dual residual with its ingredients.
#[derive(Clone, Debug)]
pub struct DualResidual<T> {
    /// `‖P₂ − P₁P₂‖_F`
    pub value: T,
    /// Numerical rank of `Z` used for `P₁`.
    pub z_rank: usize,
    /// Leading eigenvectors defining `P₂`.
    pub m2: Mat<T>,
}

/// `‖P₂ − P₁P₂‖_F` where `P₁` projects onto `col(Z)` and `P₂` onto the `k`
/// leading eigenvectors of `λYYᵀ + ½(ΦZᵀ + ZΦᵀ)`. Since `P₂ = M₂M₂ᵀ` with
/// orthonormal `M₂`, this equals `‖(I − P₁)M₂‖_F`.
pub fn dual_residual<T: Real>(s: &IterateState<T>, y: &Mat<T>, lambda: T) -> Result<DualResidual<T>> {
    dual_residual_inner(None, s, y, lambda)
}

pub(crate) fn dual_residual_inner<T: Real>(
    side: Option<&SideBasis<T>>,
    s: &IterateState<T>,
    y: &Mat<T>,
    lambda: T,
) -> Result<DualResidual<T>> {
    let k = s.z.ncols();
    let (m2, _) = leading_eigvecs(side, y, &s.z, &s.phi, lambda, T::zero(), k)?;
    let basis = compact_svd_factored(&s.z, &Mat::identity(k)).u;
    let z_rank = basis.ncols();
    let resid = m2.sub(&project_unchecked(&basis, &m2));
    Ok(DualResidual {
        value: resid.frobenius_norm(),
        z_rank,
        m2,
    })
}

/// Residual norms of the six stationarity conditions and whether each is
/// within the tolerance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FirstOrderReport<T> {
    /// `[2VᵀW_iV + γI]U_i = 2VᵀW_iA_i + Ψ_i` for all rows
    pub u_stationarity: T,
    /// `[2UᵀW_jU + γI]V_j = 2UᵀW_jA_j` for all columns
    pub v_stationarity: T,
    /// `P` equals the projector onto the leading eigenvectors of
    /// `λYYᵀ + ½(ΦZᵀ + ZΦᵀ)`, as `‖P − P₂‖_F`
    pub p_alignment: T,
    /// `Φ + Ψ = PΦ`
    pub dual_balance: T,
    /// `Z = PZ`
    pub z_in_range: T,
    /// `Z = U`
    pub z_equals_u: T,
    pub satisfied: [bool; 6],
}

impl<T: Real> FirstOrderReport<T> {
    pub fn residuals(&self) -> [T; 6] {
        [
            self.u_stationarity,
            self.v_stationarity,
            self.p_alignment,
            self.dual_balance,
            self.z_in_range,
            self.z_equals_u,
        ]
    }

    pub fn all(&self) -> bool {
        self.satisfied.iter().all(|&b| b)
    }
}

fn stationarity_residual<T: Real>(
    x: &Mat<T>,
    f: &Mat<T>,
    lists: impl Fn(usize) -> (Vec<usize>, Vec<T>),
    gamma: T,
    rhs_extra: Option<&Mat<T>>,
) -> T {
    let two = T::lit(2.0);
    let k = x.ncols();
    let mut total = T::zero();
    for i in 0..x.nrows() {
        let (idx, vals) = lists(i);
        let xi = x.row(i);
        // r = [2FᵀWF + γI]x − 2FᵀWa − extra
        let mut r: Vec<T> = xi.iter().map(|&v| gamma * v).collect();
        for (&j, &a) in idx.iter().zip(&vals) {
            let fj = f.row(j);
            let pred = dot(fj, xi);
            for p in 0..k {
                r[p] += two * fj[p] * (pred - a);
            }
        }
        if let Some(e) = rhs_extra {
            for p in 0..k {
                r[p] -= e[(i, p)];
            }
        }
        total += r.iter().map(|&v| v * v).sum::<T>();
    }
    total.sqrt()
}

pub fn first_order_check<T: Real>(
    s: &IterateState<T>,
    data: &PartialMatrix<T>,
    y: &Mat<T>,
    lambda: T,
    gamma: T,
    tol: T,
) -> Result<FirstOrderReport<T>> {
    let u_res = stationarity_residual(
        &s.u,
        &s.v,
        |i| {
            let (c, v) = data.row(i);
            (c.to_vec(), v.to_vec())
        },
        gamma,
        Some(&s.psi),
    );
    let v_res = stationarity_residual(
        &s.v,
        &s.u,
        |j| {
            let (r, v) = data.col(j);
            (r.to_vec(), v.to_vec())
        },
        gamma,
        None,
    );
    let k = s.m.ncols();
    let (m2, _) = leading_eigvecs(None, y, &s.z, &s.phi, lambda, T::zero(), k)?;
    // both projectors have rank k: ‖MMᵀ − M₂M₂ᵀ‖_F = √2‖(I − MMᵀ)M₂‖_F
    let p_res = T::lit(2.0).sqrt() * m2.sub(&project_unchecked(&s.m, &m2)).frobenius_norm();
    let pphi = project_unchecked(&s.m, &s.phi);
    let balance = s.phi.add(&s.psi).sub(&pphi).frobenius_norm();
    let z_range = s.phi_residual().frobenius_norm();
    let z_u = s.z.sub(&s.u).frobenius_norm();

    let res = [u_res, v_res, p_res, balance, z_range, z_u];
    let mut satisfied = [false; 6];
    for (b, r) in satisfied.iter_mut().zip(res) {
        *b = r <= tol;
    }
    Ok(FirstOrderReport {
        u_stationarity: u_res,
        v_stationarity: v_res,
        p_alignment: p_res,
        dual_balance: balance,
        z_in_range: z_range,
        z_equals_u: z_u,
        satisfied,
    })
}
