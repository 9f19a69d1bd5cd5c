//! Simulation benchmark: per replication, draw a true precision matrix and a
//! sample, tune and fit every estimator, score against the truth.
//!
//! Seeds: replication `r` of model `k` (position in the model list) uses
//! `rep = derive_seed(derive_seed(seed, k), r)`; the truth is generated from
//! `derive_seed(rep, 0)`, the sample from `derive_seed(rep, 1)` and the
//! cross-validation folds (shared by all estimators) from `derive_seed(rep, 2)`.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::estimators::{EstimatorConfig, Method, SparsifyRule};
use crate::metrics::{graph_report, loss_report, GraphReport, LossReport, DEFAULT_ZERO_TOL};
use crate::models::{generate_model, sample_mvn, ModelId, ModelParams, ModelSpec};
use crate::rng::derive_seed;
use crate::tuning::TuningPlan;

/// Threshold on partial correlations applied to the dense ridge estimates
/// before graph scoring.
pub const RIDGE_SPARSIFY: SparsifyRule = SparsifyRule::PartialCorrAbsolute(1e-4);

pub const METRICS: [&str; 10] = ["kll", "rkll", "rte", "l2", "lsp", "l1", "mcc", "umcc", "ba", "gamma"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub models: Vec<ModelId>,
    pub p: usize,
    pub n: usize,
    pub estimators: Vec<EstimatorConfig>,
    pub plan: TuningPlan,
    pub replications: usize,
    pub seed: u64,
    pub zero_tol: f64,
    /// Applied to GRidge / T-GRidge fits that carry no rule of their own.
    pub ridge_sparsify: Option<SparsifyRule>,
    pub model_params: ModelParams,
}

impl BenchmarkConfig {
    pub fn new(models: Vec<ModelId>, p: usize, n: usize, estimators: Vec<EstimatorConfig>, replications: usize, seed: u64) -> Self {
        Self {
            models,
            p,
            n,
            estimators,
            plan: TuningPlan::default(),
            replications,
            seed,
            zero_tol: DEFAULT_ZERO_TOL,
            ridge_sparsify: Some(RIDGE_SPARSIFY),
            model_params: ModelParams::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.models.is_empty() || self.estimators.is_empty() {
            return Err(invalid("need at least one model and one estimator"));
        }
        if self.replications == 0 || self.n < 2 {
            return Err(invalid("need replications >= 1 and n >= 2"));
        }
        for &m in &self.models {
            ModelSpec { model: m, p: self.p, seed: 0, params: self.model_params }.validate()?;
        }
        for e in &self.estimators {
            e.validate()?;
        }
        Ok(())
    }

    /// `(model position, replication)` work units in reduction order.
    pub fn units(&self) -> Vec<(usize, usize)> {
        (0..self.models.len()).flat_map(|k| (0..self.replications).map(move |r| (k, r))).collect()
    }

    fn estimator_for(&self, tmpl: &EstimatorConfig) -> EstimatorConfig {
        let mut e = tmpl.clone();
        if e.sparsify.is_none() && matches!(e.method, Method::GRidge | Method::TGRidge) {
            e.sparsify = self.ridge_sparsify;
        }
        e
    }

    /// Scores every estimator on one replication of one model. Per-estimator
    /// failures are recorded in the returned cells.
    pub fn run_unit(&self, model_pos: usize, rep: usize) -> Result<Vec<CellOutcome>> {
        let model = self.models[model_pos];
        let rep_seed = derive_seed(derive_seed(self.seed, model_pos as u64), rep as u64);
        let truth = generate_model(&ModelSpec { model, p: self.p, seed: derive_seed(rep_seed, 0), params: self.model_params })?;
        let x = sample_mvn(&truth.omega, self.n, derive_seed(rep_seed, 1))?;
        let cv_seed = derive_seed(rep_seed, 2);
        Ok(self
            .estimators
            .iter()
            .map(|tmpl| {
                let est = self.estimator_for(tmpl);
                let result = self.plan.fit(&x, &est, cv_seed).and_then(|(fit, tuned)| {
                    Ok(CellScores {
                        loss: loss_report(&fit.omega, &truth.omega)?,
                        graph: graph_report(&fit.omega, &truth.omega, self.zero_tol)?,
                        gamma: tuned.map(|t| t.best_gamma),
                    })
                });
                CellOutcome {
                    model,
                    estimator: tmpl.method,
                    replication: rep,
                    scores: result.map_err(|e| alloc::format!("{e}")),
                }
            })
            .collect())
    }

    pub fn run(&self) -> Result<BenchmarkResult> {
        self.validate()?;
        let mut cells = Vec::new();
        for (k, r) in self.units() {
            cells.extend(self.run_unit(k, r)?);
        }
        Ok(aggregate(self, cells))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellScores {
    pub loss: LossReport,
    pub graph: GraphReport,
    pub gamma: Option<f64>,
}

impl CellScores {
    pub fn metric(&self, name: &str) -> Option<f64> {
        let l = &self.loss;
        let g = &self.graph;
        Some(match name {
            "kll" => l.kll,
            "rkll" => l.rkll,
            "rte" => l.rte,
            "l2" => l.frobenius,
            "lsp" => l.spectral,
            "l1" => l.matrix_l1,
            "mcc" => g.mcc,
            "umcc" => g.umcc,
            "ba" => g.ba,
            "gamma" => return self.gamma,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellOutcome {
    pub model: ModelId,
    pub estimator: Method,
    pub replication: usize,
    pub scores: core::result::Result<CellScores, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub model: ModelId,
    pub estimator: Method,
    pub metric: String,
    pub mean: f64,
    /// Sample standard deviation, divisor `count - 1`; `None` for one value.
    pub sd: Option<f64>,
    pub count: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkResult {
    pub rows: Vec<TableRow>,
    pub cells: Vec<CellOutcome>,
}

impl BenchmarkResult {
    pub fn row(&self, model: ModelId, estimator: Method, metric: &str) -> Option<&TableRow> {
        self.rows.iter().find(|r| r.model == model && r.estimator == estimator && r.metric == metric)
    }

    /// Per-replication values of one metric, in replication order.
    pub fn values(&self, model: ModelId, estimator: Method, metric: &str) -> Vec<f64> {
        self.cells
            .iter()
            .filter(|c| c.model == model && c.estimator == estimator)
            .filter_map(|c| c.scores.as_ref().ok().and_then(|s| s.metric(metric)))
            .collect()
    }
}

/// Reduces cells (in any order) into the table, ordered by model list,
/// then estimator list, then [`METRICS`].
pub fn aggregate(config: &BenchmarkConfig, mut cells: Vec<CellOutcome>) -> BenchmarkResult {
    let model_pos: BTreeMap<ModelId, usize> = config.models.iter().enumerate().map(|(i, m)| (*m, i)).collect();
    let est_pos = |m: Method| config.estimators.iter().position(|e| e.method == m).unwrap_or(usize::MAX);
    cells.sort_by_key(|c| (model_pos.get(&c.model).copied().unwrap_or(usize::MAX), c.replication, est_pos(c.estimator)));

    let mut rows = Vec::new();
    let mut seen_models = Vec::new();
    for &model in &config.models {
        if seen_models.contains(&model) {
            continue;
        }
        seen_models.push(model);
        let mut seen = Vec::new();
        for tmpl in &config.estimators {
            let est = tmpl.method;
            if seen.contains(&est) {
                continue;
            }
            seen.push(est);
            let group: Vec<&CellOutcome> = cells.iter().filter(|c| c.model == model && c.estimator == est).collect();
            let failures = group.iter().filter(|c| c.scores.is_err()).count();
            for metric in METRICS {
                let vals: Vec<f64> =
                    group.iter().filter_map(|c| c.scores.as_ref().ok().and_then(|s| s.metric(metric))).collect();
                if vals.is_empty() {
                    continue;
                }
                rows.push(TableRow {
                    model,
                    estimator: est,
                    metric: metric.into(),
                    mean: super::mean(&vals),
                    sd: super::sample_sd(&vals),
                    count: vals.len(),
                    failures,
                });
            }
        }
    }
    BenchmarkResult { rows, cells }
}
