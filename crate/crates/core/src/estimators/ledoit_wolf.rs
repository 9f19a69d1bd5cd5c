//! Ledoit-Wolf shrinkage toward the scaled identity
//! `F = (tr(S) / p) I`, with the analytic intensity
//! `delta = min(beta, d) / d`, where `d = ||S - F||_F^2` and
//! `beta = n^{-2} sum_t ||x_t x_t^T - S||_F^2`.

use crate::error::{invalid, Result};
use crate::matrix::{sample_covariance, Matrix, SymMatrix};

/// Lower clamp on the estimated intensity so the shrunk matrix stays PD.
pub const MIN_INTENSITY: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct LedoitWolf {
    pub covariance: SymMatrix,
    pub intensity: f64,
    pub target_scale: f64,
}

/// Shrunk covariance. `forced_intensity` bypasses the analytic estimate and
/// is used as is (no clamping).
pub fn ledoit_wolf_covariance(x: &Matrix, forced_intensity: Option<f64>) -> Result<LedoitWolf> {
    let n = x.rows();
    if n <= 2 {
        return Err(invalid("Ledoit-Wolf needs more than two observations"));
    }
    let s = sample_covariance(x)?;
    let p = s.dim();
    let mu = s.trace() / p as f64;
    let target = SymMatrix::scaled_identity(p, mu);

    let intensity = match forced_intensity {
        Some(d) => {
            if !(0.0..=1.0).contains(&d) {
                return Err(invalid("shrinkage intensity must lie in [0, 1]"));
            }
            d
        }
        None => {
            let dist = s.sub(&target)?;
            let d2 = dist.trace_product(&dist)?;
            // sum_t ||x_t x_t^T - S||_F^2 = sum_t ||x_t||^4 - n ||S||_F^2 for centred x_t
            let means = x.column_means();
            let mut fourth = 0.0;
            for i in 0..n {
                let sq: f64 = x.row(i).iter().zip(&means).map(|(v, m)| (v - m) * (v - m)).sum();
                fourth += sq * sq;
            }
            let nf = n as f64;
            let beta = ((fourth - nf * s.trace_product(&s)?) / (nf * nf)).max(0.0);
            if d2 > 0.0 {
                (beta.min(d2) / d2).clamp(MIN_INTENSITY, 1.0)
            } else {
                1.0
            }
        }
    };
    let covariance = target.scale(intensity).add(&s.scale(1.0 - intensity))?;
    Ok(LedoitWolf { covariance, intensity, target_scale: mu })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::invert_pd;
    use crate::rng::{rng_from_seed, standard_normal};

    fn data(n: usize, p: usize, seed: u64) -> Matrix {
        let mut rng = rng_from_seed(seed);
        Matrix::from_fn(n, p, |_, _| standard_normal(&mut rng))
    }

    #[test]
    fn pure_target() {
        let x = data(30, 4, 1);
        let lw = ledoit_wolf_covariance(&x, Some(1.0)).unwrap();
        let s = sample_covariance(&x).unwrap();
        let want = SymMatrix::scaled_identity(4, s.trace() / 4.0);
        assert!(lw.covariance.sub(&want).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn no_shrinkage() {
        let x = data(30, 4, 2);
        let lw = ledoit_wolf_covariance(&x, Some(0.0)).unwrap();
        let s = sample_covariance(&x).unwrap();
        assert_eq!(lw.covariance, s);
        assert!(invert_pd(&lw.covariance).is_ok());
    }

    #[test]
    fn identity_truth_large_n() {
        let x = data(5000, 5, 3);
        let lw = ledoit_wolf_covariance(&x, None).unwrap();
        assert!(lw.intensity > 0.0 && lw.intensity < 1.0);
        assert!(lw.covariance.sub(&SymMatrix::identity(5)).unwrap().max_abs() < 0.1);
    }

    #[test]
    fn singular_sample_gets_regularised() {
        let x = data(10, 30, 4);
        let lw = ledoit_wolf_covariance(&x, None).unwrap();
        assert!(lw.covariance.is_positive_definite());
    }

    #[test]
    fn too_few_rows() {
        assert!(ledoit_wolf_covariance(&data(2, 3, 5), None).is_err());
    }
}
