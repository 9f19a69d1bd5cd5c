//! Closed-form ridge-type precision estimators.

use crate::eigen::sym_eigen;
use crate::error::{invalid, Result};
use crate::math;
use crate::matrix::SymMatrix;

/// Minimiser of `-log det(Omega) + tr(Omega S) + gamma ||Omega||_2^2`.
///
/// Stationarity `-Omega^{-1} + S + 2 gamma Omega = 0` is solved in the
/// eigenbasis of `S`: each eigenvalue `d` maps to the positive root of
/// `2 gamma x^2 + d x - 1 = 0`.
pub fn gridge_closed_form(s: &SymMatrix, gamma: f64) -> Result<SymMatrix> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(invalid("ridge penalty must be positive"));
    }
    let ed = sym_eigen(s)?;
    // 2 / (d + sqrt(d^2 + 8 gamma)) avoids cancellation for large d.
    Ok(ed.reconstruct_with(|d| {
        let root = math::sqrt(d * d + 8.0 * gamma);
        if d >= 0.0 {
            2.0 / (d + root)
        } else {
            (root - d) / (4.0 * gamma)
        }
    }))
}

/// Minimiser of `-log det(Omega) + tr(Omega S) + (gamma / 2) ||Omega - T||_2^2`.
///
/// With `E = S - gamma T`, `Omega = [(gamma I + E^2 / 4)^{1/2} + E / 2]^{-1}`,
/// evaluated eigenvalue-wise on `E`.
pub fn t_gridge_closed_form(s: &SymMatrix, gamma: f64, target: &SymMatrix) -> Result<SymMatrix> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(invalid("ridge penalty must be positive"));
    }
    let e = s.sub(&target.scale(gamma))?;
    let ed = sym_eigen(&e)?;
    Ok(ed.reconstruct_with(|l| {
        let root = math::sqrt(gamma + l * l / 4.0);
        if l >= 0.0 {
            1.0 / (root + l / 2.0)
        } else {
            // 1 / (root - |l|/2) rewritten without cancellation.
            (root - l / 2.0) / gamma
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{invert_pd, sample_covariance};
    use crate::rng::{rng_from_seed, standard_normal};
    use crate::Matrix;

    fn random_cov(p: usize, n: usize, seed: u64) -> SymMatrix {
        let mut rng = rng_from_seed(seed);
        let x = Matrix::from_fn(n, p, |_, _| standard_normal(&mut rng));
        sample_covariance(&x).unwrap()
    }

    #[test]
    fn gridge_identity() {
        let o = gridge_closed_form(&SymMatrix::identity(3), 1.0).unwrap();
        assert!(o.sub(&SymMatrix::scaled_identity(3, 0.5)).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn gridge_zero_covariance() {
        let o = gridge_closed_form(&SymMatrix::zeros(4), 2.0).unwrap();
        assert!(o.sub(&SymMatrix::scaled_identity(4, 0.5)).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn gridge_stationarity() {
        for (p, n) in [(6, 3), (10, 40)] {
            let s = random_cov(p, n, 11);
            let o = gridge_closed_form(&s, 0.4).unwrap();
            let res = s.sub(&invert_pd(&o).unwrap()).unwrap().add(&o.scale(0.8)).unwrap();
            assert!(res.max_abs() <= 1e-8);
        }
    }

    #[test]
    fn t_gridge_collapses_when_s_equals_gamma_t() {
        let t = SymMatrix::scaled_identity(3, 1.5);
        let gamma = 0.7;
        let o = t_gridge_closed_form(&t.scale(gamma), gamma, &t).unwrap();
        let want = SymMatrix::scaled_identity(3, 1.0 / libm::sqrt(gamma));
        assert!(o.sub(&want).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn t_gridge_stationarity() {
        let s = random_cov(7, 5, 3);
        let t = SymMatrix::scaled_identity(7, 7.0 / s.trace());
        for gamma in [0.05, 0.5, 2.0] {
            let o = t_gridge_closed_form(&s, gamma, &t).unwrap();
            let res = s.sub(&invert_pd(&o).unwrap()).unwrap().add(&o.sub(&t).unwrap().scale(gamma)).unwrap();
            assert!(res.max_abs() <= 1e-8);
        }
        // zero target, S = I, gamma = 2: eigenvalue 1 / (sqrt(2 + 1/4) + 1/2) = 1/2
        let o = t_gridge_closed_form(&SymMatrix::identity(2), 2.0, &SymMatrix::zeros(2)).unwrap();
        assert!(o.sub(&SymMatrix::scaled_identity(2, 0.5)).unwrap().max_abs() < 1e-15);
    }
}
