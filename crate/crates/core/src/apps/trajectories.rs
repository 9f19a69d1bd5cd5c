//! Eigenvalue paths of graphical lasso and EAGL estimates along a penalty
//! grid, on one band-model dataset.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::eigen::sym_eigenvalues;
use crate::error::{invalid, Result};
use crate::estimators::{estimate_eagl, estimate_glasso, Method, PrecisionEstimate, SolverOptions, DEFAULT_ALPHA};
use crate::matrix::sample_covariance;
use crate::models::{generate_model, sample_mvn, ModelId, ModelSpec};
use crate::rng::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryConfig {
    pub p: usize,
    pub n: usize,
    pub gammas: Vec<f64>,
    pub alpha: f64,
    pub seed: u64,
    pub solver: SolverOptions,
}

impl TrajectoryConfig {
    pub fn new(p: usize, n: usize, gammas: Vec<f64>, seed: u64) -> Self {
        Self { p, n, gammas, alpha: DEFAULT_ALPHA, seed, solver: SolverOptions::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub gamma: f64,
    pub estimator: Method,
    /// Position in ascending order.
    pub index: usize,
    pub eigenvalue: f64,
}

/// Per grid point: the graphical lasso and EAGL fits.
#[derive(Debug, Clone)]
pub struct TrajectoryPoint {
    pub gamma: f64,
    pub glasso: PrecisionEstimate,
    pub eagl: PrecisionEstimate,
}

/// Fits both estimators at every grid point, warm-starting each path from
/// the previous point.
pub fn trajectory_fits(cfg: &TrajectoryConfig) -> Result<Vec<TrajectoryPoint>> {
    if cfg.gammas.is_empty() || cfg.gammas.iter().any(|g| !(*g > 0.0)) {
        return Err(invalid("grid must be nonempty and positive"));
    }
    let truth = generate_model(&ModelSpec::new(ModelId::M1, cfg.p, derive_seed(cfg.seed, 0)))?;
    let x = sample_mvn(&truth.omega, cfg.n, derive_seed(cfg.seed, 1))?;
    let s = sample_covariance(&x)?;
    let mut out: Vec<TrajectoryPoint> = Vec::with_capacity(cfg.gammas.len());
    for &g in &cfg.gammas {
        let prev = out.last();
        let glasso = estimate_glasso(&s, g, &cfg.solver, prev.and_then(|p| p.glasso.report.as_ref()))?;
        let eagl = estimate_eagl(&s, g, cfg.alpha, &cfg.solver, prev.and_then(|p| p.eagl.report.as_ref()))?;
        out.push(TrajectoryPoint { gamma: g, glasso, eagl });
    }
    Ok(out)
}

pub fn eigen_trajectories(cfg: &TrajectoryConfig) -> Result<Vec<TrajectoryRow>> {
    let mut rows = Vec::with_capacity(cfg.gammas.len() * 2 * cfg.p);
    for pt in trajectory_fits(cfg)? {
        for est in [&pt.glasso, &pt.eagl] {
            for (index, eigenvalue) in sym_eigenvalues(&est.omega)?.into_iter().enumerate() {
                rows.push(TrajectoryRow { gamma: pt.gamma, estimator: est.method, index, eigenvalue });
            }
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::DEFAULT_ZERO_TOL;
    use alloc::vec;

    #[test]
    fn row_count_and_ordering() {
        let cfg = TrajectoryConfig::new(8, 30, vec![0.1, 0.5, 1.0], 2);
        let rows = eigen_trajectories(&cfg).unwrap();
        assert_eq!(rows.len(), 3 * 2 * 8);
        for chunk in rows.chunks(8) {
            assert!(chunk.windows(2).all(|w| w[0].eigenvalue <= w[1].eigenvalue));
        }
    }

    #[test]
    fn eagl_trace_dominates_and_sparsity_shrinks() {
        let gammas: Vec<f64> = (1..=20).map(|k| k as f64 / 10.0).collect();
        let pts = trajectory_fits(&TrajectoryConfig::new(20, 40, gammas, 5)).unwrap();
        for pt in &pts {
            assert!(pt.eagl.omega.trace() >= pt.glasso.omega.trace());
        }
        let first = pts[0].glasso.omega.count_offdiag_nonzero(DEFAULT_ZERO_TOL);
        let last = pts.last().unwrap().glasso.omega.count_offdiag_nonzero(DEFAULT_ZERO_TOL);
        assert!(last <= first);
    }
}
