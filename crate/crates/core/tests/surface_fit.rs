use lskr::{
    add_noise, annihilation_residual, coefficient_correlation, cube_support, eval_potential, extract_levelset_2d,
    feature_matrix, fit_surface, gram_q, sample_surface, sos_potential, wrap_point, FourierCoeffs, Point, PointCloud,
    ShapeSpec,
};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cos_truth() -> FourierCoeffs {
    ShapeSpec::cos_curve(1.0).coeffs().unwrap()
}

fn cos_cloud(n_pts: usize, seed: u64) -> PointCloud {
    sample_surface(&ShapeSpec::cos_curve(1.0), n_pts, seed).unwrap()
}

// Closed-form expansion values checked independently with a symbolic expansion.
#[test]
fn frozen_shape_coefficients() {
    let lem = ShapeSpec::Lemniscate.coeffs().unwrap();
    let at = |c: &FourierCoeffs, k: &[i64]| c.values()[c.support().index_of(k).unwrap()];
    for (k, want) in [
        ([0, 0], 1.25),
        ([4, 0], 1.0 / 16.0),
        ([2, 0], -0.34),
        ([2, 2], 0.125),
        ([0, 2], -0.66),
    ] {
        assert!((at(&lem, &k) - Complex64::new(want, 0.0)).norm() < 1e-14, "{k:?}");
    }
    let two = ShapeSpec::TwoCircleUnion.coeffs().unwrap();
    assert!((at(&two, &[0, 0]).re - 3.091_395_259_764_657).abs() < 1e-13);
}

#[test]
fn samples_are_annihilated() {
    let cloud = cos_cloud(80, 1);
    assert!(annihilation_residual(&cloud, &cos_truth()).unwrap() < 1e-10);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let off = PointCloud::new(DMatrix::from_fn(2, 30, |_, _| rng.random_range(-0.5..0.5))).unwrap();
    let min_abs = off
        .points()
        .map(|p| cos_truth().eval(p).norm())
        .fold(f64::INFINITY, f64::min);
    assert!(annihilation_residual(&off, &cos_truth()).unwrap() >= min_abs);
    assert!(min_abs > 0.0);
}

#[test]
fn curve_samples_have_rank_deficient_maps() {
    let cloud = cos_cloud(40, 3);
    let phi = feature_matrix(&cloud, &cube_support(2, 2).unwrap(), None).unwrap();
    assert!(phi.numerical_rank(1e-8) <= 16);
    let q = gram_q(&cloud, &cube_support(2, 1).unwrap(), None).unwrap();
    let eig = q.symmetric_eigenvalues();
    let (lo, hi) = eig
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
    assert!(lo < 1e-10 * hi);
}

#[test]
fn recovers_cos_curve_coefficients() {
    let cloud = cos_cloud(60, 4);
    let model = fit_surface(&cloud, &cube_support(2, 1).unwrap(), None, 1e-8).unwrap();
    assert_eq!(model.nullspace_dim(), 1);
    assert!(coefficient_correlation(model.coeffs(), &cos_truth()).unwrap() > 0.999);
}

#[test]
fn larger_support_has_many_null_vectors() {
    let cloud = cos_cloud(60, 5);
    let model = fit_surface(&cloud, &cube_support(2, 2).unwrap(), None, 1e-8).unwrap();
    assert!(model.nullspace_dim() >= 9);
}

#[test]
fn generic_cloud_has_no_null_space() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let cloud = PointCloud::new(DMatrix::from_fn(2, 200, |_, _| rng.random_range(-0.5..0.5))).unwrap();
    let model = fit_surface(&cloud, &cube_support(2, 1).unwrap(), None, 1e-8).unwrap();
    assert!(model.eigenvalues()[0] > 1e-3 * model.eigenvalues().last().unwrap());
}

#[test]
fn noisy_fit_stays_correlated() {
    let noisy = add_noise(&cos_cloud(100, 7), 0.01, 8).unwrap();
    let model = fit_surface(&noisy, &cube_support(2, 1).unwrap(), None, 1e-8).unwrap();
    assert!(coefficient_correlation(model.coeffs(), &cos_truth()).unwrap() > 0.99);
}

#[test]
fn weighted_fit_annihilates_training_points() {
    let cloud = cos_cloud(80, 9);
    let model = fit_surface(&cloud, &cube_support(2, 3).unwrap(), Some(0.15), 1e-10).unwrap();
    let grid: Vec<Point> = cloud.points().map(|p| wrap_point(p).unwrap()).collect();
    let v = eval_potential(&model, &grid).unwrap();
    assert!(v.iter().all(|z| z.norm() < 1e-6));
    let single = fit_surface(&cloud, &cube_support(2, 1).unwrap(), Some(0.15), 1e-10).unwrap();
    assert!(coefficient_correlation(&single.effective_coeffs(), &cos_truth()).unwrap() > 0.99);
}

#[test]
fn potential_vanishes_on_unseen_curve_points() {
    let model = fit_surface(&cos_cloud(60, 10), &cube_support(2, 1).unwrap(), None, 1e-8).unwrap();
    let fresh: Vec<Point> = cos_cloud(20, 11).points().map(|p| wrap_point(p).unwrap()).collect();
    assert!(eval_potential(&model, &fresh).unwrap().iter().all(|z| z.norm() < 1e-6));
    let sym = model.symmetrized();
    let grid: Vec<Point> = (0..25)
        .map(|i| wrap_point(&[i as f64 / 25.0, (i * 7) as f64 / 25.0]).unwrap())
        .collect();
    assert!(eval_potential(&sym, &grid).unwrap().iter().all(|z| z.im.abs() < 1e-12));
}

#[test]
fn sos_potential_behaviour() {
    let cloud = cos_cloud(60, 12);
    let model = fit_surface(&cloud, &cube_support(2, 2).unwrap(), None, 1e-8).unwrap();
    let on: Vec<Point> = cos_cloud(10, 13).points().map(|p| wrap_point(p).unwrap()).collect();
    let tol = 1e-8_f64;
    let bound = 60.0 * tol * tol * model.nullspace_dim() as f64;
    assert!(sos_potential(&model, &on)
        .unwrap()
        .iter()
        .all(|&v| v < bound.max(1e-12)));
    let far = vec![wrap_point(&[0.5, 0.5]).unwrap()];
    assert!(sos_potential(&model, &far).unwrap()[0] > 0.01);

    let single = fit_surface(&cloud, &cube_support(2, 1).unwrap(), None, 1e-8).unwrap();
    let s = sos_potential(&single, &far).unwrap()[0];
    let e = eval_potential(&single, &far).unwrap()[0].norm_sqr();
    assert!((s - e).abs() < 1e-12);
}

#[test]
fn fitted_levelset_tracks_curve() {
    let model = fit_surface(&cos_cloud(60, 14), &cube_support(2, 1).unwrap(), None, 1e-8).unwrap();
    let polys = extract_levelset_2d(&model, 256).unwrap();
    assert!(!polys.is_empty());
    for v in polys.iter().flat_map(|p| &p.vertices) {
        assert!(cos_truth().eval(v).norm() < 1e-2);
    }
}
