//! Small dense linear-algebra helpers shared by the subspace modules.

use nalgebra::{DMatrix, SVD};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Orthonormal basis of the column space of `a` (thin Householder QR).
pub(crate) fn orthonormalize(a: DMatrix<f64>) -> DMatrix<f64> {
    let cols = a.ncols();
    let q = a.qr().q();
    q.columns(0, cols).into_owned()
}

/// Flips column signs so that each column's entry of largest magnitude is
/// positive. Ties resolve to the lowest index.
pub(crate) fn fix_signs(mut u: DMatrix<f64>) -> DMatrix<f64> {
    for mut col in u.column_iter_mut() {
        let mut best = 0usize;
        let mut best_abs = -1.0;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > best_abs {
                best_abs = v.abs();
                best = i;
            }
        }
        if col[best] < 0.0 {
            col.neg_mut();
        }
    }
    u
}

/// Left singular vectors (as columns) and singular values, sorted by
/// decreasing singular value.
pub(crate) struct LeftSvd {
    pub vectors: DMatrix<f64>,
    pub values: Vec<f64>,
}

/// Thin SVD of `a`, keeping only left vectors, sorted in decreasing order.
pub(crate) fn left_svd(a: &DMatrix<f64>) -> LeftSvd {
    let svd = SVD::new(a.clone(), true, false);
    let u = svd.u.expect("left singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let vectors = DMatrix::from_fn(u.nrows(), order.len(), |r, c| u[(r, order[c])]);
    let values = order.iter().map(|&i| svd.singular_values[i]).collect();
    LeftSvd { vectors, values }
}

/// Randomized range finder followed by an exact SVD of the small projected
/// matrix. Returns `rank` leading left singular vectors and the leading
/// singular values of the sketch.
pub(crate) fn randomized_left_svd(
    a: &DMatrix<f64>,
    rank: usize,
    oversample: usize,
    power_iters: usize,
    seed: u64,
) -> LeftSvd {
    let (rows, cols) = a.shape();
    let k = (rank + oversample).min(rows).min(cols);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let omega = DMatrix::<f64>::from_fn(cols, k, |_, _| StandardNormal.sample(&mut rng));
    let mut basis = orthonormalize(a * omega);
    for _ in 0..power_iters {
        let z = orthonormalize(a.tr_mul(&basis));
        basis = orthonormalize(a * z);
    }
    let small = basis.tr_mul(a);
    let inner = left_svd(&small);
    LeftSvd {
        vectors: basis * inner.vectors,
        values: inner.values,
    }
}

/// Principal angles (ascending) between the column spaces of two matrices
/// with orthonormal columns.
///
/// Small angles come from the sines (the singular values of `(I - A Aᵀ) B`)
/// and large ones from the cosines (singular values of `Aᵀ B`), which keeps
/// both ends accurate.
pub fn principal_angles(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
    assert_eq!(a.nrows(), b.nrows(), "subspaces live in different spaces");
    let (a, b) = if a.ncols() >= b.ncols() {
        (a, b)
    } else {
        (b, a)
    };
    let k = b.ncols();
    if k == 0 {
        return Vec::new();
    }
    let cross = a.tr_mul(b);
    let mut cosines: Vec<f64> = SVD::new(cross.clone(), false, false)
        .singular_values
        .iter()
        .map(|c| c.min(1.0))
        .collect();
    cosines.sort_by(|x, y| y.total_cmp(x));
    let residual = b - a * cross;
    let mut sines: Vec<f64> = SVD::new(residual, false, false)
        .singular_values
        .iter()
        .map(|s| s.min(1.0))
        .collect();
    sines.sort_by(f64::total_cmp);
    sines.resize(k, 0.0);
    cosines.resize(k, 0.0);
    (0..k)
        .map(|i| {
            let (s, c) = (sines[i], cosines[i]);
            if c * c < 0.5 {
                c.acos()
            } else {
                s.asin()
            }
        })
        .collect()
}

/// Largest principal angle between two subspaces.
pub fn max_principal_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    principal_angles(a, b).into_iter().fold(0.0, f64::max)
}
