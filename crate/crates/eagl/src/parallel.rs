//! Rayon drivers for the multi-unit computations. Units are collected in
//! their natural order before the core reduction runs, so results do not
//! depend on the thread count.

use eagl_core::apps::benchmark::{aggregate, BenchmarkConfig, BenchmarkResult};
use eagl_core::apps::lda::{self, LdaExperiment, LdaReport};
use eagl_core::apps::portfolio::{self, BacktestConfig, BacktestReport};
use eagl_core::matrix::sample_covariance;
use eagl_core::tuning::{combine_fold_scores, cv_fold_scores, default_grid, make_folds, select_best, TuningPlan};
use eagl_core::{Criterion, EstimatorConfig, Matrix, PrecisionEstimate, Result, TuningResult};
use rayon::prelude::*;

pub fn benchmark(config: &BenchmarkConfig) -> Result<BenchmarkResult> {
    config.validate()?;
    let cells = config.units().into_par_iter().map(|(k, r)| config.run_unit(k, r)).collect::<Result<Vec<_>>>()?;
    Ok(aggregate(config, cells.into_iter().flatten().collect()))
}

pub fn classify(experiment: &LdaExperiment, x1: &Matrix, x2: &Matrix) -> Result<LdaReport> {
    let reps = (0..experiment.replications)
        .into_par_iter()
        .map(|r| experiment.replication(x1, x2, r))
        .collect::<Result<Vec<_>>>()?;
    Ok(lda::summarize(reps))
}

pub fn backtest(returns: &Matrix, config: &BacktestConfig) -> Result<BacktestReport> {
    config.validate(returns)?;
    let segments = config.segments(returns.rows());
    let outcomes =
        segments.into_par_iter().map(|seg| config.run_segment(returns, seg)).collect::<Result<Vec<_>>>()?;
    Ok(portfolio::summarize(&outcomes.concat()))
}

/// [`TuningPlan::tune`] with the cross-validation folds fitted in parallel.
pub fn tune(plan: &TuningPlan, x: &Matrix, template: &EstimatorConfig, seed: u64) -> Result<TuningResult> {
    if plan.criterion == Criterion::Bic || !template.method.is_penalized() {
        return plan.tune(x, template, seed);
    }
    let grid = default_grid(&sample_covariance(x)?, plan.grid_count)?;
    let folds = make_folds(x.rows(), plan.folds, seed)?;
    let per_fold =
        (0..plan.folds).into_par_iter().map(|f| cv_fold_scores(x, template, &grid, &folds, f)).collect::<Result<Vec<_>>>()?;
    let scores = combine_fold_scores(&per_fold);
    let best_index = select_best(&scores)?;
    Ok(TuningResult {
        criterion: Criterion::Cv,
        best_gamma: grid.gammas[best_index],
        grid: grid.gammas,
        scores,
        best_index,
        seed: Some(seed),
        k: Some(plan.folds),
    })
}

/// Parallel counterpart of [`TuningPlan::fit`].
pub fn fit(plan: &TuningPlan, x: &Matrix, template: &EstimatorConfig, seed: u64) -> Result<(PrecisionEstimate, Option<TuningResult>)> {
    if !template.method.is_penalized() {
        return Ok((template.fit_data(x, None)?, None));
    }
    let tuned = tune(plan, x, template, seed)?;
    let est = template.clone().gamma(tuned.best_gamma).fit_data(x, None)?;
    Ok((est, Some(tuned)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use eagl_core::models::sample_mvn;
    use eagl_core::{Method, SymMatrix};

    #[test]
    fn parallel_tuning_matches_sequential() {
        let x = sample_mvn(&SymMatrix::identity(6), 40, 3).unwrap();
        let plan = TuningPlan { grid_count: 8, ..TuningPlan::default() };
        let tmpl = EstimatorConfig::new(Method::Eagl);
        assert_eq!(tune(&plan, &x, &tmpl, 5).unwrap(), plan.tune(&x, &tmpl, 5).unwrap());
    }
}
