//! Applications built on the estimators: LDA classification, minimum
//! variance portfolios, the simulation benchmark and eigenvalue paths.
//!
//! Each multi-replication driver is split into a per-unit function and a
//! deterministic reduction so callers can run units in parallel.

pub mod benchmark;
pub mod lda;
pub mod portfolio;
pub mod trajectories;


use crate::math;

pub(crate) fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample standard deviation with divisor `len - 1`; `None` below two values.
pub(crate) fn sample_sd(v: &[f64]) -> Option<f64> {
    if v.len() < 2 {
        return None;
    }
    if v.iter().all(|x| *x == v[0]) {
        return Some(0.0);
    }
    let m = mean(v);
    Some(math::sqrt(v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64))
}
