//! Library routines against nalgebra references.

mod common;

use common::*;
use nalgebra::DMatrix;
use sidelrm::linalg::{build_pgram_operator, dense, truncated_svd, LinearMap, Mat, SubspaceOptions};
use sidelrm::objective::{compact_svd, objective_naive, objective_svd, ols_alpha, r_squared, worst_case_delta};
use sidelrm::rng::Rng64;

#[test]
fn block_updates_match_brute_force_minimizers() {
    for seed in 0..12 {
        let s = sub_instance(1000 + seed);
        let dev = subproblem_deviations(&s);
        for (name, d) in ["U", "V", "P", "Z"].iter().zip(dev) {
            assert!(d <= 1e-8, "seed {seed}: {name} deviates by {d:e}");
        }
    }
}

#[test]
fn symmetric_eig_matches_nalgebra() {
    let mut rng = Rng64::seed(11);
    for n in [1, 2, 5, 17, 40] {
        let g = gaussian(n, n, &mut rng);
        let a = g.add(&g.transpose());
        let ours = dense::symmetric_eig(&a);
        let mut theirs: Vec<f64> = nalgebra::SymmetricEigen::new(to_na(&a))
            .eigenvalues
            .iter()
            .copied()
            .collect();
        theirs.sort_by(|x, y| y.total_cmp(x));
        for (x, y) in ours.values.iter().zip(&theirs) {
            assert!((x - y).abs() < 1e-10 * a.max_abs().max(1.0));
        }
        // A V = V Λ
        let av = a.matmul(&ours.vectors);
        let vl = ours.vectors.scale_cols(&ours.values);
        assert!(av.sub(&vl).max_abs() < 1e-9 * a.max_abs().max(1.0));
    }
}

#[test]
fn dense_svd_matches_nalgebra() {
    let mut rng = Rng64::seed(12);
    for (r, c) in [(7, 3), (3, 7), (12, 12), (30, 9)] {
        let a = gaussian(r, c, &mut rng);
        let ours = dense::svd(&a);
        let theirs = to_na(&a).svd(false, false).singular_values;
        let mut t: Vec<f64> = theirs.iter().copied().collect();
        t.sort_by(|x, y| y.total_cmp(x));
        for (x, y) in ours.s.iter().zip(&t) {
            assert!((x - y).abs() < 1e-10);
        }
    }
}

#[test]
fn truncated_svd_matches_leading_singular_values() {
    let mut rng = Rng64::seed(13);
    let a = low_rank(120, 50, 6, &mut rng).add(&gaussian(120, 50, &mut rng).scale(0.01));
    let svd = truncated_svd(&a, 4, &SubspaceOptions::default()).unwrap();
    let theirs = to_na(&a).svd(false, false).singular_values;
    let mut t: Vec<f64> = theirs.iter().copied().collect();
    t.sort_by(|x, y| y.total_cmp(x));
    for (x, y) in svd.s.iter().zip(&t) {
        assert!((x - y).abs() < 1e-8 * t[0], "{x} vs {y}");
    }
}

#[test]
fn objective_routes_agree_with_reference() {
    let mut rng = Rng64::seed(14);
    for trial in 0..10 {
        let (n, m, d) = (10 + trial, 6 + trial % 4, 3);
        let x = low_rank(n, m, trial % 4, &mut rng);
        let a = gaussian(n, m, &mut rng);
        let data = random_mask(&a, 0.5, &mut rng);
        let y = gaussian(n, d, &mut rng);
        let reference = objective_reference(&to_na(&x), &data, &to_na(&y), 0.7, 1.3);
        let svd = objective_svd(&x, &data, &y, 0.7, 1.3).unwrap().total;
        let naive = objective_naive(&x, &data, &y, 0.7, 1.3).unwrap().total;
        assert!((svd - reference).abs() <= 1e-9 * reference, "{svd} vs {reference}");
        assert!((naive - reference).abs() <= 1e-8 * reference, "{naive} vs {reference}");
    }
}

#[test]
fn ols_and_r_squared_match_least_squares() {
    let mut rng = Rng64::seed(15);
    let x = gaussian(30, 4, &mut rng);
    let y = gaussian(30, 3, &mut rng);
    let alpha = ols_alpha(&x, &y).unwrap();
    let theirs = to_na(&x).svd(true, true).solve(&to_na(&y), 1e-12).unwrap();
    assert!(rel_max_diff(&to_na(&alpha), &theirs) < 1e-10);

    let resid = to_na(&y) - to_na(&x) * &theirs;
    let yn = to_na(&y);
    // column-centered total sum of squares, pooled
    let tot: f64 = yn
        .column_iter()
        .map(|c| {
            let mean = c.mean();
            c.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
        })
        .sum();
    let expect = 1.0 - resid.norm_squared() / tot;
    assert!((r_squared(&x, &y).unwrap() - expect).abs() < 1e-10);
}

#[test]
fn compact_svd_reconstructs() {
    let mut rng = Rng64::seed(16);
    let x = low_rank(15, 9, 3, &mut rng);
    let c = compact_svd(&x);
    assert_eq!(c.s.len(), 3);
    let back = c.u.scale_cols(&c.s).matmul_t(&c.v);
    assert!(back.sub(&x).max_abs() < 1e-10);
}

#[test]
fn certificate_attains_the_nuclear_norm() {
    let mut rng = Rng64::seed(17);
    let x = gaussian(9, 6, &mut rng);
    let (delta, inner) = worst_case_delta(&x, 0.8).unwrap();
    assert!((inner - 0.8 * nuclear(&to_na(&x))).abs() < 1e-10);
    let spectral = to_na(&delta).svd(false, false).singular_values.max();
    assert!((spectral - 0.8).abs() < 1e-10);
}

#[test]
fn pgram_operator_matches_explicit_matrix() {
    let mut rng = Rng64::seed(18);
    let (n, d, k) = (40, 5, 3);
    let (y, z, phi) = (
        gaussian(n, d, &mut rng),
        gaussian(n, k, &mut rng),
        gaussian(n, k, &mut rng),
    );
    let (lambda, rho1) = (0.6, 4.0);
    let op = build_pgram_operator(&y, &z, &phi, lambda, rho1).unwrap();
    let (yn, zn, pn) = (to_na(&y), to_na(&z), to_na(&phi));
    let c: DMatrix<f64> = lambda * &yn * yn.transpose()
        + rho1 / 2.0 * &zn * zn.transpose()
        + 0.5 * (&pn * zn.transpose() + &zn * pn.transpose());
    let x = gaussian(n, 4, &mut rng);
    let ours = to_na(&op.apply_block(&x));
    assert!(rel_max_diff(&ours, &(&c * to_na(&x))) < 1e-12);
    assert!(rel_max_diff(&to_na(&op.to_dense()), &c) < 1e-12);
    let v = x.col(0);
    let single = Mat::col_vector(&op.apply(&v));
    assert!(rel_max_diff(&to_na(&single), &(&c * to_na(&Mat::col_vector(&v)))) < 1e-12);
}
