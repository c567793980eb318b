use mmls::harness::{
    directed_hausdorff, distance_to_manifold, fill_distance, loglog_slope, measure_linear_scaling,
    run_convergence_study, run_denoise_experiment, sample_manifold, ConvergenceStudy, Hausdorff,
    NoiseModel, ScalingSetup, SyntheticManifold,
};
use mmls::{MmlsConfig, WeightFunction};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn helix_experiment_configuration() {
    let manifold = SyntheticManifold::helix();
    let noise = NoiseModel::UniformBox { amplitude: 0.2 };
    let cloud = sample_manifold(&manifold, 400, Some(&noise), 1).unwrap();
    assert_eq!((cloud.dim(), cloud.len()), (3, 400));
    let truth = cloud.truth().unwrap();
    for (k, col) in truth.column_iter().enumerate() {
        let t = -std::f64::consts::PI + std::f64::consts::TAU * k as f64 / 399.0;
        let expected = DVector::from_vec(vec![t.sin(), t.cos(), t]);
        assert!((col - expected).amax() < 1e-12);
    }
    let offsets = cloud.points() - truth;
    assert!(offsets.iter().all(|v| v.abs() <= 0.2));
    let mean = offsets.iter().sum::<f64>() / offsets.len() as f64;
    assert!(mean.abs() < 0.02);
}

#[test]
fn four_point_circle() {
    let cloud = sample_manifold(&SyntheticManifold::unit_circle(), 4, None, 0).unwrap();
    let expected = [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]];
    for (col, e) in cloud.points().column_iter().zip(expected) {
        assert!((col[0] - e[0]).abs() < 1e-15 && (col[1] - e[1]).abs() < 1e-15);
    }
}

#[test]
fn ellipse_images_shape() {
    let cloud = sample_manifold(&SyntheticManifold::ellipse_images(32), 144, None, 0).unwrap();
    assert_eq!((cloud.dim(), cloud.len()), (1024, 144));
    assert!(cloud.points().iter().all(|v| (0.0..=1.0).contains(v)));
}

#[test]
fn noise_leaves_the_twin_alone_and_is_seeded() {
    let manifold = SyntheticManifold::Sphere { radius: 1.0 };
    let clean = sample_manifold(&manifold, 200, None, 3).unwrap();
    let noise = NoiseModel::Gaussian { std_dev: 0.1 };
    let a = sample_manifold(&manifold, 200, Some(&noise), 3).unwrap();
    let b = sample_manifold(&manifold, 200, Some(&noise), 3).unwrap();
    assert_eq!(a.truth().unwrap(), clean.points());
    assert_eq!(a.points(), b.points());
    let c = sample_manifold(&manifold, 200, Some(&noise), 4).unwrap();
    assert_ne!(a.points(), c.points());
    let before = clean.points().clone();
    let _ = noise.apply(clean.points(), 9);
    assert_eq!(&before, clean.points());
}

#[test]
fn clean_samples_lie_on_their_manifold() {
    let manifolds = vec![
        SyntheticManifold::unit_circle(),
        SyntheticManifold::Sphere { radius: 2.0 },
        SyntheticManifold::Torus {
            major: 2.0,
            minor: 0.5,
        },
        SyntheticManifold::random_plane(5, 2, 1).unwrap(),
        SyntheticManifold::helix(),
    ];
    for manifold in manifolds {
        let cloud = sample_manifold(&manifold, 64, None, 0).unwrap();
        for col in cloud.points().column_iter() {
            let d = distance_to_manifold(&col.into_owned(), &manifold).unwrap();
            let bound = d.oracle_gap.map_or(1e-12, |g| g.max(1e-12));
            assert!(d.distance <= bound, "{}: {}", manifold.name(), d.distance);
        }
    }
}

#[test]
fn closed_form_distances() {
    let circle = SyntheticManifold::unit_circle();
    let d = distance_to_manifold(&DVector::from_vec(vec![2.0, 0.0]), &circle).unwrap();
    assert!((d.distance - 1.0).abs() < 1e-15);
    assert!(d.oracle_gap.is_none());
    let sphere = SyntheticManifold::Sphere { radius: 1.0 };
    let d = distance_to_manifold(&DVector::zeros(3), &sphere).unwrap();
    assert!((d.distance - 1.0).abs() < 1e-15);
    let torus = SyntheticManifold::Torus {
        major: 2.0,
        minor: 0.5,
    };
    let d = distance_to_manifold(&DVector::from_vec(vec![3.0, 0.0, 0.0]), &torus).unwrap();
    assert!((d.distance - 0.5).abs() < 1e-15);
}

#[test]
fn helix_distance_agrees_with_a_fine_global_grid() {
    let manifold = SyntheticManifold::helix();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..10 {
        let p = DVector::from_fn(3, |i, _| {
            if i == 2 {
                rng.random_range(-3.0..3.0)
            } else {
                rng.random_range(-1.5..1.5)
            }
        });
        let fast = distance_to_manifold(&p, &manifold).unwrap();
        let steps = 400_000;
        let brute = (0..=steps)
            .map(|k| {
                let t = -std::f64::consts::PI + std::f64::consts::TAU * k as f64 / steps as f64;
                (&p - manifold.point_at(&[t])).norm()
            })
            .fold(f64::INFINITY, f64::min);
        // The fine grid is itself accurate to about (spacing)² · curvature.
        assert!(
            (fast.distance - brute).abs() < 1e-9,
            "{} vs {brute}",
            fast.distance
        );
        assert!(fast.distance <= brute + 1e-12);
        assert!(fast.oracle_gap.is_some());
    }
}

#[test]
fn hausdorff_is_symmetric() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let a = DMatrix::from_fn(3, 20, |_, _| rng.random_range(-1.0..1.0));
    let b = DMatrix::from_fn(3, 30, |_, _| rng.random_range(-1.0..1.0));
    let ab = Hausdorff::between(&a, &b);
    let ba = Hausdorff::between(&b, &a);
    assert_eq!(ab.forward, ba.backward);
    assert_eq!(ab.backward, ba.forward);
    assert_eq!(ab.value(), ab.forward.max(ab.backward));
    assert_eq!(directed_hausdorff(&a, &a), 0.0);
}

#[test]
fn fill_distance_and_slope() {
    let samples = DMatrix::from_row_slice(1, 3, &[0.0, 0.5, 1.0]);
    let probes = DMatrix::from_fn(1, 101, |_, j| j as f64 / 100.0);
    assert!((fill_distance(&samples, &probes) - 0.25).abs() < 1e-15);
    let h = [1.0, 0.5, 0.25, 0.125];
    let e: Vec<f64> = h.iter().map(|x: &f64| 3.0 * x.powi(3)).collect();
    assert!((loglog_slope(&h, &e).unwrap() - 3.0).abs() < 1e-12);
}

#[test]
fn convergence_slopes_are_reproducible() {
    let manifold = SyntheticManifold::helix();
    let study = ConvergenceStudy::new(100, 3);
    let a = run_convergence_study(&manifold, 2, &study, &MmlsConfig::new(1, 2)).unwrap();
    let b = run_convergence_study(&manifold, 2, &study, &MmlsConfig::new(1, 2)).unwrap();
    let (sa, sb) = (a.slope.unwrap(), b.slope.unwrap());
    assert_eq!(format!("{sa:.3}"), format!("{sb:.3}"));
    assert_eq!(a.levels.len(), 3);
    assert!(a.levels.windows(2).all(|w| w[1].h < w[0].h));
    assert!(a.levels.iter().all(|l| l.failures == 0));
}

#[test]
fn helix_denoising_improves_rmse() {
    let report = run_denoise_experiment(
        &SyntheticManifold::helix(),
        400,
        &NoiseModel::UniformBox { amplitude: 0.2 },
        1,
        &MmlsConfig::new(1, 2),
    )
    .unwrap();
    assert!(report.rmse_to_truth < report.rmse_before.unwrap());
    assert!(report.mean_twin_after.unwrap() < report.mean_twin_before.unwrap());
    assert_eq!(report.per_point.len(), 400);
    assert!(report.per_point.iter().all(|d| *d >= 0.0));
    let h = report.hausdorff.unwrap();
    assert!(h.forward >= 0.0 && h.backward >= 0.0);
}

#[test]
fn small_scaling_run_is_equivariant() {
    let setup = ScalingSetup::for_dimension(2, vec![3, 8, 16], 5).unwrap();
    let rows = measure_linear_scaling(&setup, &MmlsConfig::new(2, 2)).unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].ratio.is_none());
    for row in &rows {
        assert_eq!(row.failures, 0);
        assert!(row.equivariance_error < 1e-8, "{row:?}");
        assert!(row.seconds_per_point > 0.0);
    }
}

#[test]
fn scaling_rejects_unsupported_dimension() {
    assert!(ScalingSetup::for_dimension(3, vec![8], 0).is_err());
    let base = mmls::PointCloud::from_points(&[vec![0.0, 0.0]]).unwrap();
    let setup = ScalingSetup {
        base,
        queries: vec![DVector::zeros(2)],
        dims: vec![4],
        reps: 1,
        seed: 0,
    };
    let config = MmlsConfig::new(1, 1).with_weight(WeightFunction::gaussian(1.0).unwrap());
    let err = measure_linear_scaling(&setup, &config).unwrap_err();
    assert_eq!(err.code(), "E_DEGENERATE_NEIGHBORHOOD");
}
