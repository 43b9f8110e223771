use super::*;
use crate::linalg::soft_threshold_svd;
use crate::model::generate_synthetic;
use crate::objective::err_l2;
use crate::rng::Rng64;

fn gaussian(n: usize, m: usize, rng: &mut Rng64) -> Mat<f64> {
    Mat::from_fn(n, m, |_, _| rng.normal())
}

#[test]
fn row_average_initialization() {
    let data = PartialMatrix::new(2, 4, vec![(0, 0, 1.0), (0, 1, 2.0), (0, 3, 3.0), (1, 0, 4.0)]).unwrap();
    let x = row_average_fill(&data).unwrap();
    assert_eq!(x.row(0), &[1.0, 2.0, 2.0, 3.0]);
    assert_eq!(x.row(1), &[4.0; 4]);

    let sparse = PartialMatrix::new(3, 2, vec![(0, 0, 1.0), (0, 1, 5.0)]).unwrap();
    let x = row_average_fill(&sparse).unwrap();
    assert_eq!(x.row(2), &[3.0, 3.0]);
}

#[test]
fn iterative_svd_nothing_missing() {
    let mut rng = Rng64::seed(1);
    let a = gaussian(6, 5, &mut rng);
    let data = PartialMatrix::from_dense(&a, |_, _| true);
    let r = iterative_svd(&data, 2, 50).unwrap();
    assert_eq!(r.iterations, 0);
    assert_eq!(r.estimate.to_dense(), a);
}

#[test]
fn iterative_svd_rank_one_entry() {
    let u = [1.0f64, 2.0, -1.0, 0.5];
    let v = [2.0, 1.0, 3.0, -1.0];
    let a = Mat::from_fn(4, 4, |i, j| u[i] * v[j]);
    let data = PartialMatrix::from_dense(&a, |i, j| (i, j) != (1, 2));
    let r = iterative_svd_with_tol(&data, 1, 5000, 1e-12).unwrap();
    let x = r.estimate.to_dense();
    assert!((x[(1, 2)] - a[(1, 2)]).abs() < 1e-6, "{}", x[(1, 2)]);
}

#[test]
fn iterative_svd_keeps_observed_entries() {
    let (data, _, _) = generate_synthetic::<f64>(40, 30, 2, 3, 0.5, 0.0, 3).unwrap();
    let r = iterative_svd(&data, 2, 30).unwrap();
    let x = r.estimate.to_dense();
    for (i, j, v) in data.iter() {
        assert_eq!(x[(i, j)], v);
    }
}

#[test]
fn iterative_svd_rejects_empty_data() {
    let data = PartialMatrix::<f64>::new(3, 3, vec![]).unwrap();
    assert!(matches!(iterative_svd(&data, 1, 10), Err(Error::Parameter(_))));
}

#[test]
fn soft_impute_zero_threshold_full_data() {
    let mut rng = Rng64::seed(2);
    let a = gaussian(7, 5, &mut rng);
    let data = PartialMatrix::from_dense(&a, |_, _| true);
    let r = soft_impute(&data, 0.0, 1e-4, 5, 100).unwrap();
    // the second pass sees no change
    assert!(r.iterations <= 2);
    assert!(r.estimate.to_dense().sub(&a).frobenius_norm() < 1e-10);
}

#[test]
fn soft_impute_total_shrinkage() {
    let mut rng = Rng64::seed(3);
    let a = gaussian(6, 5, &mut rng);
    let data = PartialMatrix::from_dense(&a, |i, j| (i + j) % 3 != 0);
    let big = a.frobenius_norm() * 10.0;
    let r = soft_impute(&data, big, 1e-4, 5, 100).unwrap();
    assert_eq!(r.iterations, 1);
    assert_eq!(r.estimate.to_dense().max_abs(), 0.0);
}

#[test]
fn soft_impute_fixed_point() {
    let mut rng = Rng64::seed(4);
    let a = gaussian(6, 5, &mut rng);
    let data = PartialMatrix::from_dense(&a, |i, j| (i * 5 + j) % 4 != 1);
    let r = soft_impute(&data, 0.3, 1e-14, 5, 5000).unwrap();
    assert_eq!(r.termination, Termination::ToleranceMet);
    let z = r.estimate.to_dense();
    let mut filled = z.clone();
    for (i, j, v) in data.iter() {
        filled[(i, j)] = v;
    }
    let again = soft_threshold_svd(&filled, 0.3, Some(5)).unwrap();
    assert!(again.sub(&z).max_abs() < 1e-6);
}

#[test]
fn scaled_gd_gradient_matches_finite_differences() {
    let mut rng = Rng64::seed(5);
    let a = gaussian(5, 4, &mut rng);
    let data = PartialMatrix::from_dense(&a, |i, j| (i + 2 * j) % 3 != 0);
    let y = gaussian(5, 3, &mut rng);
    let (u, v, alpha) = (
        gaussian(5, 2, &mut rng),
        gaussian(4, 2, &mut rng),
        gaussian(4, 3, &mut rng),
    );
    let (lambda, gamma) = (0.8, 0.3);
    let (gu, gv) = scaled_gd_gradient(&data, &y, &u, &v, &alpha, lambda, gamma);
    let h = 1e-5;
    let f = |u: &Mat<f64>, v: &Mat<f64>| scaled_gd_loss(&data, &y, u, v, &alpha, lambda, gamma);
    for i in 0..5 {
        for p in 0..2 {
            let (mut up, mut um) = (u.clone(), u.clone());
            up.as_mut_slice()[i * 2 + p] += h;
            um.as_mut_slice()[i * 2 + p] -= h;
            let fd = (f(&up, &v) - f(&um, &v)) / (2.0 * h);
            assert!((fd - gu[(i, p)]).abs() < 1e-5);
        }
    }
    for j in 0..4 {
        for p in 0..2 {
            let (mut vp, mut vm) = (v.clone(), v.clone());
            vp.as_mut_slice()[j * 2 + p] += h;
            vm.as_mut_slice()[j * 2 + p] -= h;
            let fd = (f(&u, &vp) - f(&u, &vm)) / (2.0 * h);
            assert!((fd - gv[(j, p)]).abs() < 1e-5);
        }
    }
}

#[test]
fn scaled_gd_noiseless_recovery() {
    let (data, y, truth) = generate_synthetic::<f64>(30, 20, 2, 4, 0.0, 0.0, 6).unwrap();
    let r = scaled_gd(&data, y.matrix(), 0.0, 1e-8, 2, 1000).unwrap();
    assert!(!r.flags.iter().any(|f| f == "objective_increase"), "{:?}", r.flags);
    assert!(err_l2(&r.estimate.to_dense(), &truth.a_true).unwrap() <= 1e-3);
    if let Estimate::Factored { u, v } = &r.estimate {
        assert_eq!((u.ncols(), v.ncols()), (2, 2));
    } else {
        panic!("ScaledGD returns factors");
    }
}

#[test]
fn scaled_gd_stationary_point_is_fixed() {
    // exact rank-k data, fully observed, λ = γ = 0: the spectral start is
    // already a zero-gradient point
    let (data, y, _) = generate_synthetic::<f64>(12, 9, 2, 3, 0.0, 0.0, 7).unwrap();
    let r = scaled_gd(&data, y.matrix(), 0.0, 0.0, 2, 10).unwrap();
    assert_eq!(r.iterations, 1);
    let (svd, _) = truncated_svd_with_info(&data, 2, &SubspaceOptions::default(), None).unwrap();
    let x0 = svd.reconstruct();
    assert!(r.estimate.to_dense().sub(&x0).max_abs() < 1e-9);
}
