//! Post-hoc thresholding of dense estimates.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::PrecisionEstimate;
use crate::eigen::sym_eigenvalues;
use crate::error::Result;
use crate::math;
use crate::metrics::partial_correlations;

/// Shift added on top of `|lambda_min|` when thresholding breaks PD.
pub const PD_REPAIR_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", content = "value", rename_all = "kebab-case")]
pub enum SparsifyRule {
    /// Zero `omega_ij` when `|omega_ij| <= eps`.
    Absolute(f64),
    /// Zero `omega_ij` when the partial correlation satisfies `|rho_ij| <= eps`.
    PartialCorrAbsolute(f64),
    /// Zero `omega_ij` when `|rho_ij| <= k sd`, `sd` taken over the nonzero
    /// off-diagonal partial correlations.
    PartialCorrSd(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SparsifyOutcome {
    pub rule: SparsifyRule,
    pub zeroed: usize,
    /// Diagonal shift applied to restore positive definiteness.
    pub pd_shift: Option<f64>,
}

pub fn sparsify_threshold(estimate: &PrecisionEstimate, rule: SparsifyRule) -> Result<PrecisionEstimate> {
    let omega = &estimate.omega;
    let p = omega.dim();
    let (score, cutoff) = match rule {
        SparsifyRule::Absolute(eps) => (omega.clone(), eps),
        SparsifyRule::PartialCorrAbsolute(eps) => (partial_correlations(omega)?, eps),
        SparsifyRule::PartialCorrSd(k) => {
            let rho = partial_correlations(omega)?;
            let nz: Vec<f64> =
                (0..p).flat_map(|i| ((i + 1)..p).map(move |j| (i, j))).map(|(i, j)| rho.get(i, j)).filter(|v| *v != 0.0).collect();
            (rho, k * sample_sd(&nz))
        }
    };

    let mut out = omega.clone();
    let mut zeroed = 0;
    for i in 0..p {
        for j in (i + 1)..p {
            if out.get(i, j) != 0.0 && math::abs(score.get(i, j)) <= cutoff {
                out.set(i, j, 0.0);
                zeroed += 1;
            }
        }
    }

    let mut pd_shift = None;
    if zeroed > 0 && !out.is_positive_definite() {
        let lmin = sym_eigenvalues(&out)?[0];
        let shift = math::abs(lmin) + PD_REPAIR_MARGIN;
        out = out.shift_diag(shift);
        pd_shift = Some(shift);
    }

    let mut est = estimate.clone();
    est.omega = out;
    est.sparsified = Some(SparsifyOutcome { rule, zeroed, pd_shift });
    Ok(est)
}

fn sample_sd(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    math::sqrt(v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0))
}
