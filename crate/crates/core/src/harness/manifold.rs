//! Synthetic manifolds with known geometry.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::cloud::PointCloud;
use crate::error::{MmlsError, Result};
use crate::harness::noise::NoiseModel;
use crate::wpca::OrthonormalBasis;

/// Parameter-grid density of the dense distance oracles.
const HELIX_ORACLE_SAMPLES: usize = 4096;
const IMAGE_ORACLE_SIDE: usize = 24;

#[derive(Debug, Clone, PartialEq)]
pub enum SyntheticManifold {
    /// `(sin t, cos t, t)` for `t ∈ [t_min, t_max]`.
    Helix { t_min: f64, t_max: f64 },
    /// Circle of the given radius about the origin of R².
    Circle { radius: f64 },
    /// Sphere of the given radius about the origin of R³.
    Sphere { radius: f64 },
    /// Torus about the z-axis of R³.
    Torus { major: f64, minor: f64 },
    /// `origin + span(basis)` with samples drawn from `[-half_width, half_width]^d`.
    Plane {
        origin: DVector<f64>,
        basis: OrthonormalBasis,
        half_width: f64,
    },
    /// `side × side` images of centered, axis-aligned ellipses with soft
    /// edges; parametrized by the two semi-axes (in pixels).
    EllipseImages {
        side: usize,
        semi_min: f64,
        semi_max: f64,
        edge: f64,
    },
}

impl SyntheticManifold {
    /// The helix on `t ∈ [−π, π]`.
    pub fn helix() -> Self {
        SyntheticManifold::Helix {
            t_min: -PI,
            t_max: PI,
        }
    }

    pub fn unit_circle() -> Self {
        SyntheticManifold::Circle { radius: 1.0 }
    }

    /// A `d`-plane in R^n with a seeded random orientation and offset.
    pub fn random_plane(n: usize, d: usize, seed: u64) -> Result<Self> {
        if d == 0 || d >= n {
            return Err(MmlsError::InvalidInput(format!(
                "plane dimension {d} must satisfy 1 <= d < n = {n}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw = DMatrix::<f64>::from_fn(n, d, |_, _| rng.sample(StandardNormal));
        let basis = OrthonormalBasis::orthonormalize(raw)?;
        let origin = DVector::<f64>::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal) * 0.5);
        Ok(SyntheticManifold::Plane {
            origin,
            basis,
            half_width: 1.0,
        })
    }

    /// Ellipse images at `side × side` pixels, semi-axes spanning 1/4 to
    /// 3/8 of the side, with a two-pixel soft edge. Wider ranges or sharper
    /// edges leave 144 samples too sparse for a local polynomial fit.
    pub fn ellipse_images(side: usize) -> Self {
        let s = side as f64;
        SyntheticManifold::EllipseImages {
            side,
            semi_min: s / 4.0,
            semi_max: 3.0 * s / 8.0,
            edge: 2.0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SyntheticManifold::Helix { .. } => "helix",
            SyntheticManifold::Circle { .. } => "circle",
            SyntheticManifold::Sphere { .. } => "sphere",
            SyntheticManifold::Torus { .. } => "torus",
            SyntheticManifold::Plane { .. } => "plane",
            SyntheticManifold::EllipseImages { .. } => "ellipse-images",
        }
    }

    pub fn intrinsic_dim(&self) -> usize {
        match self {
            SyntheticManifold::Helix { .. } | SyntheticManifold::Circle { .. } => 1,
            SyntheticManifold::Sphere { .. }
            | SyntheticManifold::Torus { .. }
            | SyntheticManifold::EllipseImages { .. } => 2,
            SyntheticManifold::Plane { basis, .. } => basis.dim(),
        }
    }

    pub fn ambient_dim(&self) -> usize {
        match self {
            SyntheticManifold::Helix { .. }
            | SyntheticManifold::Sphere { .. }
            | SyntheticManifold::Torus { .. } => 3,
            SyntheticManifold::Circle { .. } => 2,
            SyntheticManifold::Plane { origin, .. } => origin.len(),
            SyntheticManifold::EllipseImages { side, .. } => side * side,
        }
    }

    /// Point with the given parameters. Parameter boxes: helix `t`; circle
    /// angle; sphere (polar, azimuth); torus two angles; plane local
    /// coordinates; ellipse images the two semi-axes.
    pub fn point_at(&self, params: &[f64]) -> DVector<f64> {
        match self {
            SyntheticManifold::Helix { .. } => {
                let t = params[0];
                DVector::from_vec(vec![t.sin(), t.cos(), t])
            }
            SyntheticManifold::Circle { radius } => {
                let t = params[0];
                DVector::from_vec(vec![radius * t.cos(), radius * t.sin()])
            }
            SyntheticManifold::Sphere { radius } => {
                let (polar, az) = (params[0], params[1]);
                DVector::from_vec(vec![
                    radius * polar.sin() * az.cos(),
                    radius * polar.sin() * az.sin(),
                    radius * polar.cos(),
                ])
            }
            SyntheticManifold::Torus { major, minor } => {
                let (u, v) = (params[0], params[1]);
                let ring = major + minor * v.cos();
                DVector::from_vec(vec![ring * u.cos(), ring * u.sin(), minor * v.sin()])
            }
            SyntheticManifold::Plane { origin, basis, .. } => {
                origin + basis.matrix() * DVector::from_column_slice(params)
            }
            SyntheticManifold::EllipseImages { side, edge, .. } => {
                render_ellipse(*side, params[0], params[1], *edge)
            }
        }
    }

    fn params_from_unit(&self, unit: &[f64]) -> Vec<f64> {
        match self {
            SyntheticManifold::Helix { t_min, t_max } => vec![t_min + (t_max - t_min) * unit[0]],
            SyntheticManifold::Circle { .. } => vec![TAU * unit[0]],
            SyntheticManifold::Sphere { .. } => {
                vec![(1.0 - 2.0 * unit[0]).clamp(-1.0, 1.0).acos(), TAU * unit[1]]
            }
            SyntheticManifold::Torus { .. } => vec![TAU * unit[0], TAU * unit[1]],
            SyntheticManifold::Plane {
                basis, half_width, ..
            } => (0..basis.dim())
                .map(|k| half_width * (2.0 * unit[k] - 1.0))
                .collect(),
            SyntheticManifold::EllipseImages {
                semi_min, semi_max, ..
            } => unit
                .iter()
                .map(|u| semi_min + (semi_max - semi_min) * u)
                .collect(),
        }
    }

    /// Parameters of `count` clean samples.
    ///
    /// Curves are sampled equispaced (closed curves without repeating the
    /// start point); the sphere uses a Fibonacci lattice; ellipse images a
    /// square grid of semi-axes; torus and plane a Halton sequence.
    pub fn sample_params(&self, count: usize) -> Result<Vec<Vec<f64>>> {
        if count == 0 {
            return Err(MmlsError::InvalidInput("sample count must be >= 1".into()));
        }
        let out = match self {
            SyntheticManifold::Helix { .. } => (0..count)
                .map(|k| {
                    let u = if count == 1 {
                        0.5
                    } else {
                        k as f64 / (count - 1) as f64
                    };
                    self.params_from_unit(&[u])
                })
                .collect(),
            SyntheticManifold::Circle { .. } => (0..count)
                .map(|k| self.params_from_unit(&[k as f64 / count as f64]))
                .collect(),
            SyntheticManifold::Sphere { .. } => {
                let golden = (1.0 + 5f64.sqrt()) / 2.0;
                (0..count)
                    .map(|k| {
                        let u = (k as f64 + 0.5) / count as f64;
                        let v = (k as f64 / golden).fract();
                        self.params_from_unit(&[u, v])
                    })
                    .collect()
            }
            SyntheticManifold::Torus { .. } | SyntheticManifold::Plane { .. } => {
                let dim = self.intrinsic_dim();
                (0..count)
                    .map(|k| {
                        let unit: Vec<f64> = (0..dim)
                            .map(|j| halton(k + 1, PRIMES[j % PRIMES.len()]))
                            .collect();
                        self.params_from_unit(&unit)
                    })
                    .collect()
            }
            SyntheticManifold::EllipseImages { .. } => {
                let k = (count as f64).sqrt().round() as usize;
                if k * k != count || k < 2 {
                    return Err(MmlsError::InvalidInput(format!(
                        "ellipse images need a square count >= 4, got {count}"
                    )));
                }
                let mut v = Vec::with_capacity(count);
                for i in 0..k {
                    for j in 0..k {
                        let ui = i as f64 / (k - 1) as f64;
                        let uj = j as f64 / (k - 1) as f64;
                        v.push(self.params_from_unit(&[ui, uj]));
                    }
                }
                v
            }
        };
        Ok(out)
    }

    /// `count` seeded uniformly random parameter points, used as held-out
    /// probes.
    pub fn random_params(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = self.intrinsic_dim();
        (0..count)
            .map(|_| {
                let unit: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
                self.params_from_unit(&unit)
            })
            .collect()
    }

    pub fn points_at(&self, params: &[Vec<f64>]) -> DMatrix<f64> {
        let cols: Vec<DVector<f64>> = params.iter().map(|p| self.point_at(p)).collect();
        DMatrix::from_columns(&cols)
    }

    /// Whether [`distance_to_manifold`] is closed-form for this kind.
    pub fn has_closed_form_distance(&self) -> bool {
        !matches!(
            self,
            SyntheticManifold::Helix { .. } | SyntheticManifold::EllipseImages { .. }
        )
    }
}

const PRIMES: [usize; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

fn halton(mut index: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while index > 0 {
        f /= base as f64;
        r += f * (index % base) as f64;
        index /= base;
    }
    r
}

/// Soft-edged ellipse: pixel value `½(1 − tanh(s / edge))` with
/// `s = (ρ − 1)·√(ab)` and `ρ² = (x/a)² + (y/b)²`, pixel centres at integer
/// offsets from the image centre. Row-major.
pub fn render_ellipse(side: usize, a: f64, b: f64, edge: f64) -> DVector<f64> {
    let c = (side as f64 - 1.0) / 2.0;
    let mean_radius = (a * b).sqrt();
    DVector::from_fn(side * side, |idx, _| {
        let (row, col) = (idx / side, idx % side);
        let x = col as f64 - c;
        let y = row as f64 - c;
        let rho = ((x / a).powi(2) + (y / b).powi(2)).sqrt();
        0.5 * (1.0 - ((rho - 1.0) * mean_radius / edge).tanh())
    })
}

/// Samples `count` points, adds `noise` if given, and keeps the clean points
/// as the cloud's ground truth.
pub fn sample_manifold(
    manifold: &SyntheticManifold,
    count: usize,
    noise: Option<&NoiseModel>,
    seed: u64,
) -> Result<PointCloud> {
    let params = manifold.sample_params(count)?;
    let clean = manifold.points_at(&params);
    let noisy = match noise {
        Some(model) => model.apply(&clean, seed),
        None => clean.clone(),
    };
    PointCloud::new(noisy)?.with_truth(clean)
}

/// Distance estimate to a synthetic manifold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManifoldDistance {
    pub distance: f64,
    /// Half the parameter spacing of the dense oracle grid the estimate was
    /// seeded from; `None` for closed forms.
    pub oracle_gap: Option<f64>,
}

/// Euclidean distance from `point` to the manifold.
///
/// Closed form for circle, sphere, torus and plane. Helix and ellipse images
/// use a dense parameter grid followed by local refinement.
pub fn distance_to_manifold(
    point: &DVector<f64>,
    manifold: &SyntheticManifold,
) -> Result<ManifoldDistance> {
    if point.len() != manifold.ambient_dim() {
        return Err(MmlsError::InvalidInput(format!(
            "point lives in R^{} but the {} in R^{}",
            point.len(),
            manifold.name(),
            manifold.ambient_dim()
        )));
    }
    let closed = |distance: f64| ManifoldDistance {
        distance,
        oracle_gap: None,
    };
    Ok(match manifold {
        SyntheticManifold::Circle { radius } | SyntheticManifold::Sphere { radius } => {
            closed((point.norm() - radius).abs())
        }
        SyntheticManifold::Torus { major, minor } => {
            let rho = point[0].hypot(point[1]);
            closed(((rho - major).hypot(point[2]) - minor).abs())
        }
        SyntheticManifold::Plane { origin, basis, .. } => {
            let v = point - origin;
            let u = basis.matrix();
            closed((&v - u * u.tr_mul(&v)).norm())
        }
        SyntheticManifold::Helix { t_min, t_max } => {
            helix_distance(point, *t_min, *t_max, HELIX_ORACLE_SAMPLES)
        }
        SyntheticManifold::EllipseImages { .. } => image_distance(point, manifold),
    })
}

fn helix_distance(p: &DVector<f64>, t_min: f64, t_max: f64, samples: usize) -> ManifoldDistance {
    let dist2 = |t: f64| (p[0] - t.sin()).powi(2) + (p[1] - t.cos()).powi(2) + (p[2] - t).powi(2);
    let gap = (t_max - t_min) / (samples - 1) as f64;
    let (mut best_t, mut best) = (t_min, f64::INFINITY);
    for k in 0..samples {
        let t = t_min + gap * k as f64;
        let v = dist2(t);
        if v < best {
            best = v;
            best_t = t;
        }
    }
    let lo = (best_t - gap).max(t_min);
    let hi = (best_t + gap).min(t_max);
    let (_, v) = golden_section(dist2, lo, hi, 1e-14);
    let v = v.min(best);
    ManifoldDistance {
        distance: v.max(0.0).sqrt(),
        oracle_gap: Some(gap / 2.0),
    }
}

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol * (1.0 + a.abs().max(b.abs())) {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    let t = (a + b) / 2.0;
    (t, f(t))
}

fn image_distance(p: &DVector<f64>, manifold: &SyntheticManifold) -> ManifoldDistance {
    let SyntheticManifold::EllipseImages {
        side,
        semi_min,
        semi_max,
        edge,
    } = *manifold
    else {
        unreachable!("image oracle called for a non-image manifold")
    };
    let dist2 = |a: f64, b: f64| {
        let a = a.clamp(semi_min, semi_max);
        let b = b.clamp(semi_min, semi_max);
        (p - render_ellipse(side, a, b, edge)).norm_squared()
    };
    let gap = (semi_max - semi_min) / (IMAGE_ORACLE_SIDE - 1) as f64;
    let (mut best, mut ba, mut bb) = (f64::INFINITY, semi_min, semi_min);
    for i in 0..IMAGE_ORACLE_SIDE {
        for j in 0..IMAGE_ORACLE_SIDE {
            let a = semi_min + gap * i as f64;
            let b = semi_min + gap * j as f64;
            let v = dist2(a, b);
            if v < best {
                best = v;
                ba = a;
                bb = b;
            }
        }
    }
    // Compass search on the semi-axes.
    let mut step = gap / 2.0;
    while step > 1e-7 {
        let mut improved = false;
        for (da, db) in [(step, 0.0), (-step, 0.0), (0.0, step), (0.0, -step)] {
            let (a, b) = (
                (ba + da).clamp(semi_min, semi_max),
                (bb + db).clamp(semi_min, semi_max),
            );
            let v = dist2(a, b);
            if v < best {
                best = v;
                ba = a;
                bb = b;
                improved = true;
            }
        }
        if !improved {
            step /= 2.0;
        }
    }
    ManifoldDistance {
        distance: best.sqrt(),
        oracle_gap: Some(gap / 2.0),
    }
}

/// Isometric embedding `R^k → R^n`: zero-pad, then apply a product of
/// seeded Householder reflections.
#[derive(Debug, Clone)]
pub struct IsometricEmbedding {
    base_dim: usize,
    reflectors: Vec<DVector<f64>>,
    target_dim: usize,
}

impl IsometricEmbedding {
    pub fn new(base_dim: usize, target_dim: usize, reflections: usize, seed: u64) -> Result<Self> {
        if target_dim < base_dim {
            return Err(MmlsError::InvalidInput(format!(
                "cannot embed R^{base_dim} into R^{target_dim}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let reflectors = (0..reflections)
            .map(|_| {
                DVector::<f64>::from_fn(target_dim, |_, _| rng.sample(StandardNormal)).normalize()
            })
            .collect();
        Ok(Self {
            base_dim,
            reflectors,
            target_dim,
        })
    }

    pub fn target_dim(&self) -> usize {
        self.target_dim
    }

    pub fn embed(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut y = DVector::zeros(self.target_dim);
        y.rows_mut(0, self.base_dim).copy_from(x);
        for v in &self.reflectors {
            let s = 2.0 * v.dot(&y);
            y.axpy(-s, v, 1.0);
        }
        y
    }

    /// Left inverse: undo the reflections and keep the leading coordinates.
    pub fn restrict(&self, y: &DVector<f64>) -> DVector<f64> {
        let mut x = y.clone();
        for v in self.reflectors.iter().rev() {
            let s = 2.0 * v.dot(&x);
            x.axpy(-s, v, 1.0);
        }
        x.rows(0, self.base_dim).into_owned()
    }

    pub fn embed_all(&self, points: &DMatrix<f64>) -> DMatrix<f64> {
        let cols: Vec<DVector<f64>> = points
            .column_iter()
            .map(|c| self.embed(&c.into_owned()))
            .collect();
        DMatrix::from_columns(&cols)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_point_circle() {
        let c = sample_manifold(&SyntheticManifold::unit_circle(), 4, None, 0).unwrap();
        let expected = [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]];
        for (k, e) in expected.iter().enumerate() {
            assert!((c.point(k)[0] - e[0]).abs() < 1e-15);
            assert!((c.point(k)[1] - e[1]).abs() < 1e-15);
        }
    }

    #[test]
    fn helix_endpoints_and_count() {
        let c = sample_manifold(&SyntheticManifold::helix(), 400, None, 0).unwrap();
        assert_eq!(c.len(), 400);
        assert!((c.point(0)[2] + PI).abs() < 1e-15);
        assert!((c.point(399)[2] - PI).abs() < 1e-15);
    }

    #[test]
    fn clean_samples_are_on_manifold() {
        let manifolds = vec![
            SyntheticManifold::unit_circle(),
            SyntheticManifold::Sphere { radius: 2.0 },
            SyntheticManifold::Torus {
                major: 2.0,
                minor: 0.5,
            },
            SyntheticManifold::random_plane(5, 2, 4).unwrap(),
            SyntheticManifold::helix(),
        ];
        for manifold in manifolds {
            let c = sample_manifold(&manifold, 50, None, 1).unwrap();
            for p in c.points().column_iter() {
                let d = distance_to_manifold(&p.into_owned(), &manifold).unwrap();
                assert!(
                    d.distance < 1e-12,
                    "{} sample off manifold: {}",
                    manifold.name(),
                    d.distance
                );
            }
        }
    }

    #[test]
    fn closed_form_distances() {
        let circle = SyntheticManifold::unit_circle();
        let d = distance_to_manifold(&DVector::from_vec(vec![2.0, 0.0]), &circle).unwrap();
        assert_eq!(d.distance, 1.0);
        assert_eq!(d.oracle_gap, None);
        let sphere = SyntheticManifold::Sphere { radius: 1.0 };
        let d = distance_to_manifold(&DVector::zeros(3), &sphere).unwrap();
        assert_eq!(d.distance, 1.0);
    }

    #[test]
    fn helix_oracle_agrees_with_fine_grid() {
        let manifold = SyntheticManifold::helix();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let t: f64 = rng.random_range(-3.0..3.0);
            let off = DVector::from_vec(vec![
                rng.random_range(-0.3..0.3),
                rng.random_range(-0.3..0.3),
                rng.random_range(-0.3..0.3),
            ]);
            let p = manifold.point_at(&[t]) + off;
            let fast = distance_to_manifold(&p, &manifold).unwrap();
            // Global fine grid, no refinement.
            let fine = (0..2_000_001)
                .map(|k| {
                    let s = -PI + 2.0 * PI * k as f64 / 2_000_000.0;
                    (&p - manifold.point_at(&[s])).norm()
                })
                .fold(f64::INFINITY, f64::min);
            assert!(fast.distance <= fine + 1e-12);
            // The fine grid (step 3.1e-6) is itself only accurate to ~1e-10.
            assert!(fine - fast.distance < 1e-9, "{} vs {}", fast.distance, fine);
            assert!(fast.oracle_gap.unwrap() > 0.0);
        }
    }

    #[test]
    fn ellipse_grid_and_rasterization() {
        let manifold = SyntheticManifold::ellipse_images(32);
        let c = sample_manifold(&manifold, 144, None, 0).unwrap();
        assert_eq!(c.dim(), 1024);
        assert_eq!(c.len(), 144);
        // Pixel oracle: image 13 is (a_1, b_1) on the 12 × 12 grid.
        let (lo, hi) = (8.0, 12.0);
        let a = lo + (hi - lo) / 11.0;
        let b = a;
        let img = c.point(13);
        for &(row, col) in &[(0usize, 0usize), (15, 15), (16, 20), (5, 16)] {
            let x = col as f64 - 15.5;
            let y = row as f64 - 15.5;
            let rho = ((x / a).powi(2) + (y / b).powi(2)).sqrt();
            let expected = 0.5 * (1.0 - ((rho - 1.0) * (a * b).sqrt() / 2.0).tanh());
            assert!((img[row * 32 + col] - expected).abs() < 1e-15);
        }
        assert!(sample_manifold(&manifold, 10, None, 0).is_err());
    }

    #[test]
    fn image_distance_of_clean_sample_is_zero() {
        let manifold = SyntheticManifold::ellipse_images(16);
        let p = manifold.point_at(&[4.3, 5.2]);
        let d = distance_to_manifold(&p, &manifold).unwrap();
        assert!(d.distance < 1e-5, "{}", d.distance);
    }

    #[test]
    fn embedding_is_isometric() {
        let e = IsometricEmbedding::new(3, 40, 4, 2).unwrap();
        let x = DVector::from_vec(vec![0.3, -1.0, 2.0]);
        let y = DVector::from_vec(vec![1.0, 0.5, -0.2]);
        let ex = e.embed(&x);
        assert!(((&ex - e.embed(&y)).norm() - (&x - &y).norm()).abs() < 1e-14);
        assert!((e.restrict(&ex) - x).norm() < 1e-14);
    }
}
