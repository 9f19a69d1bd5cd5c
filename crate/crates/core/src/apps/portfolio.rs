//! Global minimum variance portfolio and rolling-window backtest.

use alloc::vec::Vec;
use core::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::estimators::EstimatorConfig;
use crate::matrix::{dot, Matrix, SymMatrix};
use crate::rng::derive_seed;
use crate::tuning::TuningPlan;

/// `w = Omega 1 / (1^T Omega 1)`. Short positions are allowed.
pub fn mvp_weights(omega: &SymMatrix) -> Result<Vec<f64>> {
    let p = omega.dim();
    let row_sums: Vec<f64> = (0..p).map(|i| omega.row(i).iter().sum()).collect();
    let total: f64 = row_sums.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(invalid("1^T Omega 1 must be positive"));
    }
    Ok(row_sums.into_iter().map(|v| v / total).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestConfig {
    pub window: usize,
    pub template: EstimatorConfig,
    pub plan: TuningPlan,
    /// Re-tune the penalty every this many windows; 1 re-tunes every window.
    pub retune_every: usize,
    pub seed: u64,
}

impl BacktestConfig {
    pub fn new(window: usize, template: EstimatorConfig) -> Self {
        Self { window, template, plan: TuningPlan::default(), retune_every: 1, seed: 0 }
    }

    pub fn validate(&self, returns: &Matrix) -> Result<()> {
        if self.window < 2 || self.window >= returns.rows() {
            return Err(invalid("window must satisfy 2 <= m < n"));
        }
        if self.retune_every == 0 {
            return Err(invalid("retune_every must be positive"));
        }
        returns.check_finite()
    }

    /// Ranges of realisation times `t` that share one tuning run.
    pub fn segments(&self, n: usize) -> Vec<Range<usize>> {
        (self.window..n).step_by(self.retune_every).map(|s| s..(s + self.retune_every).min(n)).collect()
    }

    /// Out-of-sample returns for the times in `segment`, each from weights
    /// fitted to rows `[t - m, t)`. The penalty is tuned on the first window
    /// of the segment and reused for the rest.
    pub fn run_segment(&self, returns: &Matrix, segment: Range<usize>) -> Result<Vec<WindowOutcome>> {
        let m = self.window;
        let mut gamma = None;
        let mut out = Vec::with_capacity(segment.len());
        for t in segment.clone() {
            let rows: Vec<usize> = ((t - m)..t).collect();
            let x = returns.select_rows(&rows);
            let est = if !self.template.method.is_penalized() {
                self.template.fit_data(&x, None)?
            } else {
                if gamma.is_none() {
                    let tuned = self.plan.tune(&x, &self.template, derive_seed(self.seed, t as u64))?;
                    gamma = Some(tuned.best_gamma);
                }
                self.template.clone().gamma(gamma.unwrap_or(self.template.gamma)).fit_data(&x, None)?
            };
            let w = mvp_weights(&est.omega)?;
            out.push(WindowOutcome { t, realized: dot(&w, returns.row(t)), gamma });
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowOutcome {
    pub t: usize,
    pub realized: f64,
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    pub out_of_sample_returns: Vec<f64>,
    pub gammas: Vec<Option<f64>>,
    pub mean: f64,
    /// Standard deviation with divisor `n - m - 1`; `None` for a single return.
    pub risk: Option<f64>,
    /// `mean / risk`; `None` when risk is zero or undefined.
    pub sharpe: Option<f64>,
}

pub fn summarize(outcomes: &[WindowOutcome]) -> BacktestReport {
    let r: Vec<f64> = outcomes.iter().map(|o| o.realized).collect();
    let mean = super::mean(&r);
    let risk = super::sample_sd(&r);
    let sharpe = risk.filter(|s| *s > 0.0).map(|s| mean / s);
    BacktestReport { gammas: outcomes.iter().map(|o| o.gamma).collect(), out_of_sample_returns: r, mean, risk, sharpe }
}

pub fn backtest(returns: &Matrix, config: &BacktestConfig) -> Result<BacktestReport> {
    config.validate(returns)?;
    let mut all = Vec::new();
    for seg in config.segments(returns.rows()) {
        all.extend(config.run_segment(returns, seg)?);
    }
    Ok(summarize(&all))
}
