use mmls::harness::{
    run_convergence_study, sample_manifold, ConvergenceStudy, IsometricEmbedding, NoiseModel,
    SyntheticManifold,
};
use mmls::poly::monomial_exponents;
use mmls::weights::MetricForm;
use mmls::{
    mls_function_approx, poly_dim, project_cloud, project_point, weighted_poly_fit, AffineFrame,
    Iterations, MmlsConfig, OrthonormalBasis, PointCloud, Projector, WeightFunction,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn noisy_helix() -> PointCloud {
    sample_manifold(
        &SyntheticManifold::helix(),
        400,
        Some(&NoiseModel::UniformBox { amplitude: 0.2 }),
        1,
    )
    .unwrap()
}

fn monomials_at(x: &[f64], m: usize) -> Vec<f64> {
    monomial_exponents(x.len(), m)
        .iter()
        .map(|e| e.iter().zip(x).map(|(&p, v)| v.powi(p as i32)).product())
        .collect()
}

#[test]
fn exact_polynomial_maps_are_recovered() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for (d, m, n) in [(1, 3, 2), (2, 2, 4), (2, 3, 3), (3, 2, 2)] {
        let rows = poly_dim(d, m);
        let truth = DMatrix::from_fn(rows, n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let count = 5 * rows;
        let coords = DMatrix::from_fn(d, count, |_, _| rng.random_range(-1.0..1.0));
        let values = DMatrix::from_fn(n, count, |i, j| {
            let x: Vec<f64> = coords.column(j).iter().copied().collect();
            monomials_at(&x, m)
                .iter()
                .zip(truth.column(i).iter())
                .map(|(a, b)| a * b)
                .sum()
        });
        let weights: Vec<f64> = (0..count).map(|_| rng.random_range(0.1..1.0)).collect();
        let fit = weighted_poly_fit(&coords, &values, &weights, m).unwrap();
        let err = (fit.coefficients() - &truth).amax();
        assert!(err <= 1e-9 * truth.amax(), "d={d} m={m}: {err}");
    }
}

#[test]
fn constants_fit_as_constants() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let coords = DMatrix::from_fn(2, 40, |_, _| rng.random_range(-1.0..1.0));
    let c = [3.0, -1.5, 0.25];
    let values = DMatrix::from_fn(3, 40, |i, _| c[i]);
    for m in 1..=3 {
        let fit = weighted_poly_fit(&coords, &values, &[1.0; 40], m).unwrap();
        assert!((fit.evaluate(&[0.3, -0.7]) - DVector::from_row_slice(&c)).amax() < 1e-12);
    }
}

#[test]
fn parabola_through_three_points() {
    let coords = DMatrix::from_row_slice(1, 3, &[-1.0, 0.0, 1.0]);
    let values = DMatrix::from_row_slice(1, 3, &[1.0, 0.0, 1.0]);
    let fit = weighted_poly_fit(&coords, &values, &[1.0; 3], 2).unwrap();
    let expected = DMatrix::from_column_slice(3, 1, &[0.0, 0.0, 1.0]);
    assert!((fit.coefficients() - expected).amax() < 1e-14);
}

#[test]
fn plane_projection_is_euclidean_projection() {
    let manifold = SyntheticManifold::random_plane(6, 2, 9).unwrap();
    let (origin, basis) = match &manifold {
        SyntheticManifold::Plane { origin, basis, .. } => (origin.clone(), basis.matrix().clone()),
        _ => unreachable!(),
    };
    let cloud = sample_manifold(&manifold, 300, None, 4).unwrap();
    let r = &origin
        + &basis * DVector::from_vec(vec![0.2, 0.1])
        + DVector::from_vec(vec![0.05, -0.1, 0.2, 0.0, 0.1, -0.05]);
    let expected = &origin + &basis * basis.tr_mul(&(&r - &origin));
    for m in 1..=3 {
        let res = project_point(&cloud, &r, &MmlsConfig::new(2, m)).unwrap();
        assert!((res.projected - &expected).norm() < 1e-8);
        assert_eq!(res.degree_used, m);
    }
}

#[test]
fn spd_plane_projection_is_metric_orthogonal() {
    let manifold = SyntheticManifold::random_plane(3, 2, 13).unwrap();
    let (origin, basis) = match &manifold {
        SyntheticManifold::Plane { origin, basis, .. } => (origin.clone(), basis.matrix().clone()),
        _ => unreachable!(),
    };
    let cloud = sample_manifold(&manifold, 200, None, 5).unwrap();
    let a = DMatrix::from_row_slice(3, 3, &[3.0, 0.5, 0.0, 0.5, 2.0, 0.3, 0.0, 0.3, 1.0]);
    let config = MmlsConfig::new(2, 2).with_metric(MetricForm::spd(a.clone()).unwrap());
    let r = &origin + DVector::from_vec(vec![0.1, 0.2, -0.15]);
    // A-orthogonal projection onto origin + span(B).
    let gram = basis.transpose() * &a * &basis;
    let coef = gram
        .lu()
        .solve(&(basis.transpose() * &a * (&r - &origin)))
        .unwrap();
    let expected = &origin + &basis * coef;
    let res = project_point(&cloud, &r, &config).unwrap();
    assert!((res.projected - expected).norm() < 1e-8);
}

#[test]
fn batch_equals_individual_calls() {
    let cloud = noisy_helix();
    let config = MmlsConfig::new(1, 2);
    assert!(project_cloud(&cloud, &[], &config).unwrap().is_empty());

    let queries: Vec<DVector<f64>> = cloud
        .points()
        .column_iter()
        .map(|c| c.into_owned())
        .collect();
    let single = project_cloud(&cloud, &queries[..1], &config).unwrap();
    let direct = project_point(&cloud, &queries[0], &config).unwrap();
    assert_eq!(single[0].as_ref().unwrap(), &direct);

    let batch = project_cloud(&cloud, &queries, &config).unwrap();
    let projector = Projector::new(&cloud, &config).unwrap();
    for (q, b) in queries.iter().zip(&batch) {
        assert_eq!(b.as_ref().unwrap(), &projector.project(q).unwrap());
    }
}

#[test]
fn output_is_basis_invariant() {
    let cloud = noisy_helix();
    let projector = Projector::new(&cloud, &MmlsConfig::new(1, 2)).unwrap();
    let sphere = sample_manifold(
        &SyntheticManifold::Sphere { radius: 1.0 },
        600,
        Some(&NoiseModel::UniformBox { amplitude: 0.05 }),
        2,
    )
    .unwrap();
    let sphere_proj = Projector::new(&sphere, &MmlsConfig::new(2, 2)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (proj, cl) in [(&projector, &cloud), (&sphere_proj, &sphere)] {
        for i in [7usize, 90, 211] {
            let r = cl.point(i).into_owned();
            let (frame, report) = proj.frame(&r).unwrap();
            let d = frame.dim();
            let q = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal))
                .qr()
                .q();
            let turned = OrthonormalBasis::new(frame.basis.matrix() * q).unwrap();
            let other = AffineFrame::new(frame.origin.clone(), turned, &r);
            let a = proj.project_with_frame(frame, report.clone()).unwrap();
            let b = proj.project_with_frame(other, report).unwrap();
            assert!((a.projected - b.projected).norm() < 1e-10);
        }
    }
}

#[test]
fn rigid_motion_equivariance() {
    let cloud = noisy_helix();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let rot = DMatrix::from_fn(3, 3, |_, _| rng.sample::<f64, _>(StandardNormal))
        .qr()
        .q();
    let shift = DVector::from_vec(vec![-2.0, 0.5, 4.0]);
    let moved = cloud.map_points(|c| &rot * c + &shift).unwrap();
    let config = MmlsConfig::new(1, 2);
    let a = Projector::new(&cloud, &config).unwrap();
    let b = Projector::new(&moved, &config).unwrap();
    assert!((a.weight().scale() - b.weight().scale()).abs() < 1e-12);
    for i in (0..400).step_by(37) {
        let r = cloud.point(i).into_owned();
        let pa = a.project(&r).unwrap().projected;
        let pb = b.project(&(&rot * &r + &shift)).unwrap().projected;
        assert!((&rot * pa + &shift - pb).norm() < 1e-8);
    }
}

#[test]
fn distance_reduction_is_exact_inside_the_data_span() {
    let base = noisy_helix();
    let embedding = IsometricEmbedding::new(3, 12, 4, 7).unwrap();
    let cloud = PointCloud::new(embedding.embed_all(base.points())).unwrap();
    let plain = Projector::new(&cloud, &MmlsConfig::new(1, 2)).unwrap();
    let reduced = Projector::new(&cloud, &MmlsConfig::new(1, 2).with_distance_rank(3)).unwrap();
    assert!((plain.weight().scale() - reduced.weight().scale()).abs() < 1e-10);
    for i in (0..400).step_by(41) {
        let r = cloud.point(i).into_owned();
        let a = plain.project(&r).unwrap().projected;
        let b = reduced.project(&r).unwrap().projected;
        assert!((a - b).norm() < 1e-8);
    }
}

#[test]
fn function_mls_reproduces_polynomials() {
    let sites = DMatrix::from_fn(1, 30, |_, j| j as f64 / 29.0);
    let theta = WeightFunction::gaussian(0.2).unwrap();
    let f = |x: f64| 1.0 - 2.0 * x + 0.5 * x * x;
    let values: Vec<f64> = sites.iter().map(|&x| f(x)).collect();
    for x in [0.0, 0.33, 0.9, 1.0] {
        let v =
            mls_function_approx(&sites, &values, &DVector::from_element(1, x), 2, &theta).unwrap();
        assert!((v - f(x)).abs() < 1e-12);
    }
}

#[test]
fn function_mls_on_a_cluster() {
    let x = DVector::from_vec(vec![0.5, -0.25]);
    let sites = DMatrix::from_fn(2, 6, |i, _| x[i]);
    let theta = WeightFunction::gaussian(1.0).unwrap();
    let v = mls_function_approx(&sites, &[2.5; 6], &x, 0, &theta).unwrap();
    assert!((v - 2.5).abs() < 1e-14);
    // A single location cannot determine a slope.
    let err = mls_function_approx(&sites, &[2.5; 6], &x, 1, &theta).unwrap_err();
    assert_eq!(err.code(), "E_DEGENERATE_NEIGHBORHOOD");
}

#[test]
fn function_mls_sin_order() {
    let err = |k: usize| {
        let h = 1.0 / k as f64;
        let sites = DMatrix::from_fn(1, k + 1, |_, j| j as f64 * h);
        let values: Vec<f64> = sites.iter().map(|x| x.sin()).collect();
        let theta = WeightFunction::gaussian(2.0 * h).unwrap();
        (0..=200)
            .map(|i| {
                let x = i as f64 / 200.0;
                let v =
                    mls_function_approx(&sites, &values, &DVector::from_element(1, x), 2, &theta)
                        .unwrap();
                (v - x.sin()).abs()
            })
            .fold(0.0, f64::max)
    };
    let ratio = err(16) / err(32);
    assert!((6.0..=10.0).contains(&ratio), "{ratio}");
}

/// First and second divided differences of the projection along a segment
/// of queries crossing the helix data.
fn divided_differences(
    projector: &Projector,
    a: &DVector<f64>,
    b: &DVector<f64>,
    steps: usize,
) -> (f64, f64) {
    let pts: Vec<DVector<f64>> = (0..=steps)
        .map(|k| a + (b - a) * (k as f64 / steps as f64))
        .collect();
    let delta = (b - a).norm() / steps as f64;
    let out: Vec<DVector<f64>> = projector
        .project_all(&pts)
        .into_iter()
        .map(|r| r.unwrap().projected)
        .collect();
    let first = out
        .windows(2)
        .map(|w| (&w[1] - &w[0]).norm() / delta)
        .fold(0.0, f64::max);
    let second = out
        .windows(3)
        .map(|w| (&w[2] - &w[1] * 2.0 + &w[0]).norm() / (delta * delta))
        .fold(0.0, f64::max);
    (first, second)
}

#[test]
fn projection_is_regular_along_segments() {
    let cloud = noisy_helix();
    let config = MmlsConfig::new(1, 2).with_iterations(Iterations::UpTo(200));
    let projector = Projector::new(&cloud, &config).unwrap();
    let manifold = SyntheticManifold::helix();
    let a = manifold.point_at(&[-0.5]) + DVector::from_vec(vec![0.1, -0.1, 0.0]);
    let b = manifold.point_at(&[0.5]) + DVector::from_vec(vec![-0.1, 0.1, 0.05]);
    let (f1, s1) = divided_differences(&projector, &a, &b, 100);
    let (f2, s2) = divided_differences(&projector, &a, &b, 200);
    assert!(
        f1.is_finite() && s1.is_finite() && f1 < 10.0 && s1 < 100.0,
        "{f1} {s1}"
    );
    assert!((f1 / f2 - 1.0).abs() < 0.05, "{f1} {f2}");
    assert!((s1 / s2 - 1.0).abs() < 0.25, "{s1} {s2}");
}

#[test]
fn order_is_at_least_m_plus_point_seven() {
    let helix = SyntheticManifold::helix();
    let study = ConvergenceStudy::new(100, 4);
    for m in 1..=2 {
        let report = run_convergence_study(&helix, m, &study, &MmlsConfig::new(1, m)).unwrap();
        let slope = report.slope.unwrap();
        assert!(slope >= m as f64 + 0.7, "m={m} slope {slope}");
    }
    let circle = SyntheticManifold::unit_circle();
    let report = run_convergence_study(
        &circle,
        1,
        &ConvergenceStudy::new(128, 4),
        &MmlsConfig::new(1, 1),
    )
    .unwrap();
    assert!(report.slope.unwrap() >= 1.7);
}
