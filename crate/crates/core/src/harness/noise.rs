use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Zero-mean additive noise, independent per coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseModel {
    /// `U(−amplitude, amplitude)`.
    UniformBox { amplitude: f64 },
    /// `N(0, std_dev²)`.
    Gaussian { std_dev: f64 },
}

impl NoiseModel {
    /// Returns a perturbed copy; `clean` is left untouched.
    pub fn apply(&self, clean: &DMatrix<f64>, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = clean.clone();
        match *self {
            NoiseModel::UniformBox { amplitude } => {
                for v in out.iter_mut() {
                    *v += rng.random_range(-amplitude..=amplitude);
                }
            }
            NoiseModel::Gaussian { std_dev } => {
                let normal = Normal::new(0.0, std_dev).expect("finite standard deviation");
                for v in out.iter_mut() {
                    *v += normal.sample(&mut rng);
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_bounded() {
        let clean = DMatrix::zeros(3, 500);
        let model = NoiseModel::UniformBox { amplitude: 0.2 };
        let a = model.apply(&clean, 5);
        assert_eq!(a, model.apply(&clean, 5));
        assert_ne!(a, model.apply(&clean, 6));
        assert!(a.amax() <= 0.2);
        assert!(a.mean().abs() < 0.02);
        assert_eq!(clean, DMatrix::zeros(3, 500));
    }

    #[test]
    fn gaussian_moments() {
        let clean = DMatrix::zeros(100, 400);
        let a = NoiseModel::Gaussian { std_dev: 0.05 }.apply(&clean, 1);
        let var = a.iter().map(|v| v * v).sum::<f64>() / a.len() as f64;
        assert!((var.sqrt() - 0.05).abs() < 0.001);
        assert!(a.mean().abs() < 0.001);
    }
}
