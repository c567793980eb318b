//! Set distances and convergence-slope estimates.

use nalgebra::DMatrix;
use rayon::prelude::*;

/// `max_i min_j ‖a_i − b_j‖` over the columns of `a` and `b`.
pub fn directed_hausdorff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    assert_eq!(a.nrows(), b.nrows(), "point sets live in different spaces");
    if a.ncols() == 0 {
        return 0.0;
    }
    if b.ncols() == 0 {
        return f64::INFINITY;
    }
    a.column_iter()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|x| {
            b.column_iter()
                .map(|y| (x - y).norm_squared())
                .fold(f64::INFINITY, f64::min)
        })
        .reduce(|| 0.0, f64::max)
        .sqrt()
}

/// Both one-sided Hausdorff distances and their maximum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hausdorff {
    /// `max_{x∈a} d(x, b)`.
    pub forward: f64,
    /// `max_{y∈b} d(y, a)`.
    pub backward: f64,
}

impl Hausdorff {
    pub fn between(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Self {
        Self {
            forward: directed_hausdorff(a, b),
            backward: directed_hausdorff(b, a),
        }
    }

    pub fn value(&self) -> f64 {
        self.forward.max(self.backward)
    }
}

/// Root mean square of column-wise distances between paired point sets.
pub fn paired_rmse(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape(), "paired sets differ in shape");
    if a.ncols() == 0 {
        return 0.0;
    }
    ((a - b).norm_squared() / a.ncols() as f64).sqrt()
}

pub fn paired_mean_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape(), "paired sets differ in shape");
    if a.ncols() == 0 {
        return 0.0;
    }
    (a - b).column_iter().map(|c| c.norm()).sum::<f64>() / a.ncols() as f64
}

pub fn rms(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    (values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64).sqrt()
}

/// Fill distance of `samples` measured over the dense `probes`:
/// `max_probe min_sample ‖probe − sample‖`.
pub fn fill_distance(samples: &DMatrix<f64>, probes: &DMatrix<f64>) -> f64 {
    directed_hausdorff(probes, samples)
}

/// Least-squares slope of `log(err)` against `log(h)`. `None` with fewer
/// than two usable (positive, finite) pairs.
pub fn loglog_slope(h: &[f64], err: &[f64]) -> Option<f64> {
    let pairs: Vec<(f64, f64)> = h
        .iter()
        .zip(err)
        .filter(|(h, e)| **h > 0.0 && **e > 0.0 && h.is_finite() && e.is_finite())
        .map(|(h, e)| (h.ln(), e.ln()))
        .collect();
    if pairs.len() < 2 {
        return None;
    }
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pairs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pairs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hausdorff_swaps() {
        let a = DMatrix::from_row_slice(1, 2, &[0.0, 1.0]);
        let b = DMatrix::from_row_slice(1, 3, &[0.0, 1.0, 5.0]);
        let h = Hausdorff::between(&a, &b);
        assert_eq!(h.forward, 0.0);
        assert_eq!(h.backward, 4.0);
        assert_eq!(h.value(), 4.0);
        let g = Hausdorff::between(&b, &a);
        assert_eq!((g.forward, g.backward), (h.backward, h.forward));
    }

    #[test]
    fn slope_of_power_law() {
        let h = [0.1, 0.05, 0.025, 0.0125];
        let e: Vec<f64> = h.iter().map(|x: &f64| 3.0 * x.powi(3)).collect();
        assert!((loglog_slope(&h, &e).unwrap() - 3.0).abs() < 1e-12);
        assert_eq!(loglog_slope(&[0.1], &[1.0]), None);
        assert_eq!(loglog_slope(&[0.1, 0.05], &[0.0, 0.0]), None);
    }
}
