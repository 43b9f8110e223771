//! Full dense factorizations used for small problems, Rayleigh-Ritz
//! projections, and as the fallback path of the truncated solvers.

use super::mat::{dot, norm2, Mat};
use crate::rng::Rng64;
use crate::scalar::Real;

const MAX_SWEEPS: usize = 80;

/// Thin SVD `A = U diag(s) Vᵀ` with `min(rows, cols)` triplets, sorted
/// non-increasing.
#[derive(Clone, Debug)]
pub struct DenseSvd<T> {
    pub u: Mat<T>,
    pub s: Vec<T>,
    pub v: Mat<T>,
}

/// Symmetric eigendecomposition; eigenvalues in non-increasing algebraic
/// order, eigenvectors as columns.
#[derive(Clone, Debug)]
pub struct DenseEig<T> {
    pub values: Vec<T>,
    pub vectors: Mat<T>,
}

/// Symmetric eigensolver: Householder reduction to tridiagonal form
/// followed by the implicit QL iteration. The input is symmetrized first.
pub fn symmetric_eig<T: Real>(a: &Mat<T>) -> DenseEig<T> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "symmetric_eig needs a square matrix");
    if n == 0 {
        return DenseEig {
            values: Vec::new(),
            vectors: Mat::zeros(0, 0),
        };
    }
    let half = T::lit(0.5);
    let mut v = Mat::from_fn(n, n, |i, j| half * (a[(i, j)] + a[(j, i)]));
    let mut d = vec![T::zero(); n];
    let mut e = vec![T::zero(); n];
    tridiagonalize(&mut v, &mut d, &mut e);
    // rotations act on eigenvector columns; keep them as contiguous rows
    let mut vt = v.transpose();
    tridiagonal_ql(&mut vt, &mut d, &mut e);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[j].partial_cmp(&d[i]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| d[i]).collect();
    let mut vectors = Mat::from_fn(n, n, |r, c| vt[(order[c], r)]);
    normalize_column_signs(&mut vectors, None);
    DenseEig { values, vectors }
}

/// Householder tridiagonalization in place. On return `v` holds the
/// accumulated orthogonal transform, `d` the diagonal and `e[1..]` the
/// subdiagonal.
fn tridiagonalize<T: Real>(v: &mut Mat<T>, d: &mut [T], e: &mut [T]) {
    let n = d.len();
    for j in 0..n {
        d[j] = v[(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = T::zero();
        let mut h = T::zero();
        for dk in &d[..i] {
            scale += dk.abs();
        }
        if scale == T::zero() {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[(i - 1, j)];
                v[(i, j)] = T::zero();
                v[(j, i)] = T::zero();
            }
        } else {
            for dk in &mut d[..i] {
                *dk /= scale;
                h += *dk * *dk;
            }
            let f = d[i - 1];
            let mut g = h.sqrt();
            if f > T::zero() {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in &mut e[..i] {
                *ej = T::zero();
            }
            for j in 0..i {
                let f = d[j];
                v[(j, i)] = f;
                let mut g = e[j] + v[(j, j)] * f;
                for k in j + 1..i {
                    g += v[(k, j)] * d[k];
                    e[k] += v[(k, j)] * f;
                }
                e[j] = g;
            }
            let mut f = T::zero();
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                let (f, g) = (d[j], e[j]);
                for k in j..i {
                    let upd = f * e[k] + g * d[k];
                    v[(k, j)] -= upd;
                }
                d[j] = v[(i - 1, j)];
                v[(i, j)] = T::zero();
            }
        }
        d[i] = h;
    }
    for i in 0..n - 1 {
        v[(n - 1, i)] = v[(i, i)];
        v[(i, i)] = T::one();
        let h = d[i + 1];
        if h != T::zero() {
            for k in 0..=i {
                d[k] = v[(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = T::zero();
                for k in 0..=i {
                    g += v[(k, i + 1)] * v[(k, j)];
                }
                for k in 0..=i {
                    let upd = g * d[k];
                    v[(k, j)] -= upd;
                }
            }
        }
        for k in 0..=i {
            v[(k, i + 1)] = T::zero();
        }
    }
    for j in 0..n {
        d[j] = v[(n - 1, j)];
        v[(n - 1, j)] = T::zero();
    }
    v[(n - 1, n - 1)] = T::one();
    e[0] = T::zero();
}

/// Implicit QL on the tridiagonal `(d, e)`; `vt` holds eigenvectors as rows.
fn tridiagonal_ql<T: Real>(vt: &mut Mat<T>, d: &mut [T], e: &mut [T]) {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = T::zero();
    let eps = T::epsilon();
    let mut f = T::zero();
    let mut tst1 = T::zero();
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > eps * tst1 {
            m += 1;
        }
        if m > l {
            for _ in 0..MAX_SWEEPS * n.max(1) {
                let g = d[l];
                let mut p = (d[l + 1] - g) / (T::lit(2.0) * e[l]);
                let mut r = p.hypot(T::one());
                if p < T::zero() {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let h = g - d[l];
                for di in &mut d[l + 2..] {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let (mut c, mut c2, mut c3) = (T::one(), T::one(), T::one());
                let el1 = e[l + 1];
                let (mut s, mut s2) = (T::zero(), T::zero());
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    let h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    let (lo, hi) = vt.as_mut_slice().split_at_mut((i + 1) * n);
                    let vi = &mut lo[i * n..];
                    let vi1 = &mut hi[..n];
                    for (a, b) in vi.iter_mut().zip(vi1.iter_mut()) {
                        let h = *b;
                        *b = s * *a + c * h;
                        *a = c * *a - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = T::zero();
    }
}

/// One-sided (Hestenes) Jacobi SVD.
pub fn svd<T: Real>(a: &Mat<T>) -> DenseSvd<T> {
    if a.nrows() < a.ncols() {
        let t = svd(&a.transpose());
        return DenseSvd { u: t.v, s: t.s, v: t.u };
    }
    let (m, n) = a.shape();
    // column-major working copy
    let mut g: Vec<Vec<T>> = (0..n).map(|j| a.col(j)).collect();
    let mut vcols: Vec<Vec<T>> = (0..n)
        .map(|j| {
            let mut e = vec![T::zero(); n];
            e[j] = T::one();
            e
        })
        .collect();
    let eps = T::epsilon() * T::from_usize_lossy(m.max(1)).sqrt();

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = dot(&g[p], &g[p]);
                let beta = dot(&g[q], &g[q]);
                let gamma = dot(&g[p], &g[q]);
                if gamma == T::zero() || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::lit(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                rotate_pair(&mut g, p, q, c, s);
                rotate_pair(&mut vcols, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<T> = g.iter().map(|c| norm2(c)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap());
    let s: Vec<T> = order.iter().map(|&i| norms[i]).collect();
    let smax = s.first().copied().unwrap_or_else(T::zero);
    let tiny = smax * T::epsilon() * T::from_usize_lossy(m.max(n));

    let mut u = Mat::zeros(m, n);
    let mut v = Mat::zeros(n, n);
    let mut have = 0;
    for (out, &j) in order.iter().enumerate() {
        v.set_col(out, &vcols[j]);
        if s[out] > tiny && s[out] > T::zero() {
            let inv = T::one() / s[out];
            let col: Vec<T> = g[j].iter().map(|&x| x * inv).collect();
            u.set_col(out, &col);
            have += 1;
        }
    }
    if have < n {
        // zero singular values: fill the remaining left vectors with an
        // orthonormal completion of the ones already found
        let q = orthonormal_completion(&u.first_cols(have), n, 0x5eed);
        for j in have..n {
            u.set_col(j, &q.col(j));
        }
    }
    // keep singular vector pairs consistent under the sign convention
    for j in 0..n {
        if leading_sign_negative(&u.col(j)) {
            for i in 0..m {
                u[(i, j)] = -u[(i, j)];
            }
            for i in 0..n {
                v[(i, j)] = -v[(i, j)];
            }
        }
    }
    DenseSvd { u, s, v }
}

fn rotate_pair<T: Real>(cols: &mut [Vec<T>], p: usize, q: usize, c: T, s: T) {
    let (lo, hi) = cols.split_at_mut(q);
    let cp = &mut lo[p];
    let cq = &mut hi[0];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let a = *x;
        let b = *y;
        *x = c * a - s * b;
        *y = s * a + c * b;
    }
}

fn leading_sign_negative<T: Real>(v: &[T]) -> bool {
    let scale = v.iter().fold(T::zero(), |a, &x| a.max(x.abs()));
    let thresh = scale * T::epsilon() * T::lit(64.0);
    v.iter().find(|x| x.abs() > thresh).is_some_and(|&x| x < T::zero())
}

/// Flips columns so that the first nonzero entry of each is nonnegative.
/// When `partner` is given its matching columns are flipped too.
pub fn normalize_column_signs<T: Real>(a: &mut Mat<T>, mut partner: Option<&mut Mat<T>>) {
    for j in 0..a.ncols() {
        if leading_sign_negative(&a.col(j)) {
            for i in 0..a.nrows() {
                a[(i, j)] = -a[(i, j)];
            }
            if let Some(p) = partner.as_deref_mut() {
                for i in 0..p.nrows() {
                    p[(i, j)] = -p[(i, j)];
                }
            }
        }
    }
}

/// Modified Gram-Schmidt with one re-orthogonalization pass. Columns whose
/// residual falls below `rel_tol` times their original norm are replaced by
/// an orthonormal completion. Returns `(Q, rank)` where `rank` counts the
/// columns that survived.
pub fn orthonormalize_with_tol<T: Real>(a: &Mat<T>, rel_tol: T) -> (Mat<T>, usize) {
    let (n, c) = a.shape();
    assert!(c <= n, "cannot orthonormalize {c} columns in dimension {n}");
    let mut q: Vec<Vec<T>> = Vec::with_capacity(c);
    let mut deficient = Vec::new();
    for j in 0..c {
        let mut v = a.col(j);
        let orig = norm2(&v);
        for _ in 0..2 {
            for qi in &q {
                let p = dot(qi, &v);
                for (x, &y) in v.iter_mut().zip(qi) {
                    *x -= p * y;
                }
            }
        }
        let nv = norm2(&v);
        if orig == T::zero() || nv <= rel_tol * orig || !nv.is_finite() {
            deficient.push(j);
            q.push(vec![T::zero(); n]);
        } else {
            let inv = T::one() / nv;
            v.iter_mut().for_each(|x| *x *= inv);
            q.push(v);
        }
    }
    let rank = c - deficient.len();
    if !deficient.is_empty() {
        let mut rng = Rng64::seed(0x0a7e_5eed);
        for &j in &deficient {
            loop {
                let mut v: Vec<T> = (0..n).map(|_| T::lit(rng.normal())).collect();
                let orig = norm2(&v);
                for _ in 0..2 {
                    for (i, qi) in q.iter().enumerate() {
                        if i == j || deficient.contains(&i) && i > j {
                            continue;
                        }
                        let p = dot(qi, &v);
                        for (x, &y) in v.iter_mut().zip(qi) {
                            *x -= p * y;
                        }
                    }
                }
                let nv = norm2(&v);
                if nv > T::lit(1e-3) * orig {
                    let inv = T::one() / nv;
                    v.iter_mut().for_each(|x| *x *= inv);
                    q[j] = v;
                    break;
                }
            }
        }
    }
    let mut out = Mat::zeros(n, c);
    for (j, col) in q.iter().enumerate() {
        out.set_col(j, col);
    }
    (out, rank)
}

/// Orthonormal basis for the column space, padded to the input width.
pub fn orthonormalize<T: Real>(a: &Mat<T>) -> Mat<T> {
    orthonormalize_with_tol(a, T::epsilon() * T::lit(1e4)).0
}

/// Extends orthonormal columns `q` (n×c) to `total` orthonormal columns.
pub fn orthonormal_completion<T: Real>(q: &Mat<T>, total: usize, seed: u64) -> Mat<T> {
    let n = q.nrows();
    assert!(total <= n);
    let mut out = Mat::zeros(n, total);
    let mut cols: Vec<Vec<T>> = (0..q.ncols()).map(|j| q.col(j)).collect();
    let mut rng = Rng64::seed(seed);
    while cols.len() < total {
        let mut v: Vec<T> = (0..n).map(|_| T::lit(rng.normal())).collect();
        let orig = norm2(&v);
        for _ in 0..2 {
            for qi in &cols {
                let p = dot(qi, &v);
                for (x, &y) in v.iter_mut().zip(qi) {
                    *x -= p * y;
                }
            }
        }
        let nv = norm2(&v);
        if nv > T::lit(1e-3) * orig {
            let inv = T::one() / nv;
            v.iter_mut().for_each(|x| *x *= inv);
            cols.push(v);
        }
    }
    for (j, c) in cols.iter().enumerate().take(total) {
        out.set_col(j, c);
    }
    out
}

/// Cholesky factor (lower) of a symmetric positive definite matrix.
pub fn cholesky<T: Real>(a: &Mat<T>) -> Option<Mat<T>> {
    let n = a.nrows();
    let mut l = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[(i, j)];
            for p in 0..j {
                s -= l[(i, p)] * l[(j, p)];
            }
            if i == j {
                if !(s > T::zero()) {
                    return None;
                }
                l[(i, i)] = s.sqrt();
            } else {
                l[(i, j)] = s / l[(j, j)];
            }
        }
    }
    Some(l)
}

/// Solves `L Lᵀ x = b` in place given the lower Cholesky factor.
pub fn cholesky_solve_in_place<T: Real>(l: &Mat<T>, b: &mut [T]) {
    let n = l.nrows();
    for i in 0..n {
        let mut s = b[i];
        for p in 0..i {
            s -= l[(i, p)] * b[p];
        }
        b[i] = s / l[(i, i)];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for p in i + 1..n {
            s -= l[(p, i)] * b[p];
        }
        b[i] = s / l[(i, i)];
    }
}

/// Solves a small symmetric positive definite system.
pub fn spd_solve<T: Real>(a: &Mat<T>, b: &[T]) -> Option<Vec<T>> {
    let l = cholesky(a)?;
    let mut x = b.to_vec();
    cholesky_solve_in_place(&l, &mut x);
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Minimum-norm solution of a symmetric positive semidefinite system with
/// eigenvalues below `rel_cutoff · λ_max` treated as zero.
pub fn psd_pinv_solve<T: Real>(a: &Mat<T>, b: &[T], rel_cutoff: T) -> Vec<T> {
    let eig = symmetric_eig(a);
    let top = eig.values.first().copied().unwrap_or_else(T::zero).max(T::zero());
    let cut = top * rel_cutoff;
    let n = a.nrows();
    let mut x = vec![T::zero(); n];
    for (i, &lam) in eig.values.iter().enumerate() {
        if lam > cut && lam > T::zero() {
            let vi = eig.vectors.col(i);
            let c = dot(&vi, b) / lam;
            for (xr, &vr) in x.iter_mut().zip(&vi) {
                *xr += c * vr;
            }
        }
    }
    x
}
