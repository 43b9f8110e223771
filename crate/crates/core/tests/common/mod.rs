//! Independent references built on nalgebra, shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use sidelrm::linalg::Mat;
use sidelrm::rng::Rng64;
use sidelrm::PartialMatrix;

pub fn to_na(a: &Mat<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

pub fn from_na(a: &DMatrix<f64>) -> Mat<f64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

pub fn gaussian(r: usize, c: usize, rng: &mut Rng64) -> Mat<f64> {
    Mat::from_fn(r, c, |_, _| rng.normal())
}

/// Observes each entry of `a` with probability `p`.
pub fn random_mask(a: &Mat<f64>, p: f64, rng: &mut Rng64) -> PartialMatrix<f64> {
    let mut keep = Vec::with_capacity(a.nrows() * a.ncols());
    for _ in 0..a.nrows() * a.ncols() {
        keep.push(rng.uniform() < p);
    }
    let m = a.ncols();
    PartialMatrix::from_dense(a, |i, j| keep[i * m + j])
}

/// Random `n×k` matrix with orthonormal columns (QR of a Gaussian).
pub fn orthonormal(n: usize, k: usize, rng: &mut Rng64) -> Mat<f64> {
    let g = to_na(&gaussian(n, k, rng));
    from_na(&g.qr().q().columns(0, k).into_owned())
}

/// `Σ_Ω (X_ij − A_ij)²` straight from the triples.
pub fn masked_sq_error(x: &DMatrix<f64>, data: &PartialMatrix<f64>) -> f64 {
    data.iter().map(|(i, j, a)| (x[(i, j)] - a).powi(2)).sum()
}

/// Minimizer of a strictly convex quadratic `f` on `ℝ^dim`, recovered from
/// function values alone: unit-step differences of a quadratic are exact.
pub fn quadratic_minimizer(dim: usize, f: impl Fn(&[f64]) -> f64) -> DVector<f64> {
    let mut x = vec![0.0; dim];
    let f0 = f(&x);
    let mut fp = vec![0.0; dim];
    let mut fm = vec![0.0; dim];
    for a in 0..dim {
        x[a] = 1.0;
        fp[a] = f(&x);
        x[a] = -1.0;
        fm[a] = f(&x);
        x[a] = 0.0;
    }
    let mut h = DMatrix::zeros(dim, dim);
    for a in 0..dim {
        h[(a, a)] = fp[a] + fm[a] - 2.0 * f0;
        for b in 0..a {
            x[a] = 1.0;
            x[b] = 1.0;
            let v = f(&x) - fp[a] - fp[b] + f0;
            x[a] = 0.0;
            x[b] = 0.0;
            h[(a, b)] = v;
            h[(b, a)] = v;
        }
    }
    let g = DVector::from_fn(dim, |a, _| (fp[a] - fm[a]) / 2.0);
    h.lu().solve(&(-g)).expect("quadratic has a unique minimizer")
}

/// Row-major `r×c` matrix from a flat slice.
pub fn reshape(x: &[f64], r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(r, c, x)
}

/// Eigenvectors of the `k` largest eigenvalues of a symmetric matrix, and
/// the gap `λ_k − λ_{k+1}` (infinite when `k = n`).
pub fn top_eigvecs(c: &DMatrix<f64>, k: usize) -> (DMatrix<f64>, f64) {
    let e = SymmetricEigen::new(c.clone());
    let mut idx: Vec<usize> = (0..c.nrows()).collect();
    idx.sort_by(|&a, &b| e.eigenvalues[b].total_cmp(&e.eigenvalues[a]));
    let cols: Vec<DVector<f64>> = idx[..k]
        .iter()
        .map(|&i| e.eigenvectors.column(i).into_owned())
        .collect();
    let gap = if k < c.nrows() {
        e.eigenvalues[idx[k - 1]] - e.eigenvalues[idx[k]]
    } else {
        f64::INFINITY
    };
    (DMatrix::from_columns(&cols), gap)
}

/// `‖AAᵀ − BBᵀ‖_F` for matrices with orthonormal columns.
pub fn projector_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a * a.transpose() - b * b.transpose()).norm()
}

/// `max|a − b| / max(1, max|b|)`
pub fn rel_max_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax() / b.amax().max(1.0)
}

/// Sum of singular values.
pub fn nuclear(x: &DMatrix<f64>) -> f64 {
    x.clone().svd(false, false).singular_values.sum()
}

/// `λ min_α ‖Y − Xα‖² + γ‖X‖_* + Σ_Ω (X − A)²` via a least-squares solve.
pub fn objective_reference(
    x: &DMatrix<f64>,
    data: &PartialMatrix<f64>,
    y: &DMatrix<f64>,
    lambda: f64,
    gamma: f64,
) -> f64 {
    let svd = x.clone().svd(true, true);
    let alpha = svd.solve(y, 1e-12).expect("least-squares solve");
    let side = (y - x * alpha).norm_squared();
    masked_sq_error(x, data) + lambda * side + gamma * nuclear(x)
}

/// Random subproblem inputs with `n ≤ 25, m ≤ 20, k ≤ 4, d ≤ 6`.
pub struct SubInstance {
    pub k: usize,
    pub data: PartialMatrix<f64>,
    pub y: Mat<f64>,
    pub u: Mat<f64>,
    pub v: Mat<f64>,
    pub m: Mat<f64>,
    pub z: Mat<f64>,
    pub phi: Mat<f64>,
    pub psi: Mat<f64>,
    pub lambda: f64,
    pub gamma: f64,
    pub rho1: f64,
    pub rho2: f64,
}

pub fn sub_instance(seed: u64) -> SubInstance {
    let mut rng = Rng64::seed(seed);
    let k = 1 + rng.below(4) as usize;
    let n = k + 1 + rng.below((25 - k) as u64) as usize;
    let m = k + 1 + rng.below((20 - k) as u64) as usize;
    let d = 1 + rng.below(6) as usize;
    let a = gaussian(n, m, &mut rng);
    let data = random_mask(&a, 0.3 + 0.6 * rng.uniform(), &mut rng);
    SubInstance {
        k,
        y: gaussian(n, d, &mut rng),
        u: gaussian(n, k, &mut rng),
        v: gaussian(m, k, &mut rng),
        m: orthonormal(n, k, &mut rng),
        z: gaussian(n, k, &mut rng),
        phi: gaussian(n, k, &mut rng),
        psi: gaussian(n, k, &mut rng),
        data,
        lambda: 0.1 + 2.0 * rng.uniform(),
        gamma: 0.1 + 2.0 * rng.uniform(),
        rho1: 0.5 + 20.0 * rng.uniform(),
        rho2: 0.5 + 20.0 * rng.uniform(),
    }
}

/// Deviations of the four block updates from brute-force minimizers of
/// their objectives: `[U, V, P, Z]`. `P` is compared by projector distance,
/// falling back to the objective gap when the eigengap is tiny.
pub fn subproblem_deviations(s: &SubInstance) -> [f64; 4] {
    use sidelrm::admm::{update_p, update_u, update_v, update_z, ObservationMasks};
    let n = s.data.nrows();
    let m = s.data.ncols();
    let k = s.k;
    let masks = ObservationMasks::new(&s.data);
    let (u0, v0, z0, phi, psi, y) = (
        to_na(&s.u),
        to_na(&s.v),
        to_na(&s.z),
        to_na(&s.phi),
        to_na(&s.psi),
        to_na(&s.y),
    );
    let eye = DMatrix::<f64>::identity(n, n);

    let f_u = |x: &[f64]| {
        let u = reshape(x, n, k);
        masked_sq_error(&(&u * v0.transpose()), &s.data)
            + s.gamma / 2.0 * u.norm_squared()
            + psi.dot(&(&z0 - &u))
            + s.rho2 / 2.0 * (&z0 - &u).norm_squared()
    };
    let u_star = reshape(quadratic_minimizer(n * k, f_u).as_slice(), n, k);
    let u_ours = to_na(&update_u(&s.v, &s.z, &s.psi, &s.data, &masks, s.gamma, s.rho2).unwrap());
    let dev_u = rel_max_diff(&u_ours, &u_star);

    let f_v = |x: &[f64]| {
        let v = reshape(x, m, k);
        masked_sq_error(&(&u0 * v.transpose()), &s.data) + s.gamma / 2.0 * v.norm_squared()
    };
    let v_star = reshape(quadratic_minimizer(m * k, f_v).as_slice(), m, k);
    let v_ours = to_na(&update_v(&s.u, &s.data, &masks, s.gamma).unwrap());
    let dev_v = rel_max_diff(&v_ours, &v_star);

    // P: the objective restricted to rank-k projections
    let g_p = |p: &DMatrix<f64>| {
        let r = &eye - p;
        s.lambda * (y.transpose() * &r * &y).trace() + phi.dot(&(&r * &z0)) + s.rho1 / 2.0 * (&r * &z0).norm_squared()
    };
    let c = s.lambda * &y * y.transpose()
        + s.rho1 / 2.0 * &z0 * z0.transpose()
        + 0.5 * (&phi * z0.transpose() + &z0 * phi.transpose());
    let (m_star, gap) = top_eigvecs(&c, k);
    let m_ours = to_na(&update_p(&s.y, &s.z, &s.phi, s.lambda, s.rho1, k).unwrap().0);
    let value_gap = (g_p(&(&m_ours * m_ours.transpose())) - g_p(&(&m_star * m_star.transpose()))).abs()
        / g_p(&DMatrix::zeros(n, n)).abs().max(1.0);
    let dev_p = if gap > 1e-6 * c.norm() {
        projector_distance(&m_ours, &m_star).max(value_gap)
    } else {
        value_gap
    };

    let mm = to_na(&s.m);
    let pm = &mm * mm.transpose();
    let f_z = |x: &[f64]| {
        let z = reshape(x, n, k);
        let r = &z - &pm * &z;
        phi.dot(&r) + psi.dot(&(&z - &u0)) + s.rho1 / 2.0 * r.norm_squared() + s.rho2 / 2.0 * (&z - &u0).norm_squared()
    };
    let z_star = reshape(quadratic_minimizer(n * k, f_z).as_slice(), n, k);
    let z_ours = to_na(&update_z(&s.u, &s.m, &s.phi, &s.psi, s.rho1, s.rho2).unwrap());
    let dev_z = rel_max_diff(&z_ours, &z_star);

    [dev_u, dev_v, dev_p, dev_z]
}

/// Random `n×m` matrix of rank `r` (`r = 0` gives zero).
pub fn low_rank(n: usize, m: usize, r: usize, rng: &mut Rng64) -> Mat<f64> {
    gaussian(n, r, rng).matmul_t(&gaussian(m, r, rng))
}
