//! Penalty selection by K-fold cross-validation or BIC.
//!
//! Grids are swept from the largest penalty down so each fit can warm-start
//! from its sparser neighbour. Ties go to the larger penalty.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::estimators::{EstimatorConfig, Method, PrecisionEstimate};
use crate::math;
use crate::matrix::{cholesky, sample_covariance, Matrix, SymMatrix};
use crate::metrics::DEFAULT_ZERO_TOL;
use crate::rng::{permutation, rng_from_seed};

pub const DEFAULT_GRID_COUNT: usize = 50;
pub const DEFAULT_FOLDS: usize = 5;
/// Ratio `gamma_min / gamma_max` of the default grid.
pub const GRID_RATIO: f64 = 1e-3;
pub const FALLBACK_BOUNDS: (f64, f64) = (1e-3, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Cv,
    Bic,
}

impl core::str::FromStr for Criterion {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cv" => Ok(Criterion::Cv),
            "bic" => Ok(Criterion::Bic),
            _ => Err(invalid(alloc::format!("unknown criterion '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GridRule {
    LogSpaced { min: f64, max: f64, count: usize },
    Fallback { count: usize },
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningGrid {
    pub gammas: Vec<f64>,
    pub rule: GridRule,
}

impl TuningGrid {
    pub fn explicit(gammas: Vec<f64>) -> Result<Self> {
        if gammas.is_empty() {
            return Err(invalid("grid must not be empty"));
        }
        if gammas.iter().any(|g| !(*g > 0.0) || !g.is_finite()) {
            return Err(invalid("grid values must be positive and finite"));
        }
        if gammas.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(invalid("grid must be strictly increasing"));
        }
        Ok(Self { gammas, rule: GridRule::Explicit })
    }

    /// `count` log-spaced points from `min` to `max`, endpoints exact.
    pub fn log_spaced(min: f64, max: f64, count: usize) -> Result<Self> {
        if count < 2 || !(min > 0.0) || !(max > min) || !max.is_finite() {
            return Err(invalid("log grid needs count >= 2 and 0 < min < max"));
        }
        let (a, b) = (math::ln(min), math::ln(max));
        let mut gammas: Vec<f64> =
            (0..count).map(|i| math::exp(a + (b - a) * i as f64 / (count - 1) as f64)).collect();
        gammas[0] = min;
        gammas[count - 1] = max;
        Ok(Self { gammas, rule: GridRule::LogSpaced { min, max, count } })
    }

    pub fn len(&self) -> usize {
        self.gammas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gammas.is_empty()
    }
}

/// Log grid from `1e-3 gamma_max` to `gamma_max = max_{i != j} |S_ij|`, the
/// smallest penalty with a diagonal graphical-lasso solution.
pub fn default_grid(s: &SymMatrix, count: usize) -> Result<TuningGrid> {
    if count < 2 {
        return Err(invalid("grid count must be at least 2"));
    }
    let gmax = s.max_abs_offdiag();
    if gmax > 0.0 && gmax.is_finite() {
        TuningGrid::log_spaced(GRID_RATIO * gmax, gmax, count)
    } else {
        let mut g = TuningGrid::log_spaced(FALLBACK_BOUNDS.0, FALLBACK_BOUNDS.1, count)?;
        g.rule = GridRule::Fallback { count };
        Ok(g)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningResult {
    pub criterion: Criterion,
    pub grid: Vec<f64>,
    /// Per-gamma score, `+inf` where every fit failed.
    pub scores: Vec<f64>,
    pub best_index: usize,
    pub best_gamma: f64,
    pub seed: Option<u64>,
    pub k: Option<usize>,
}

/// Index of the minimum score, preferring the larger gamma on ties.
pub fn select_best(scores: &[f64]) -> Result<usize> {
    let mut best: Option<usize> = None;
    for i in (0..scores.len()).rev() {
        let v = scores[i];
        if v.is_nan() || v == f64::INFINITY {
            continue;
        }
        if best.is_none_or(|b| v < scores[b]) {
            best = Some(i);
        }
    }
    best.ok_or_else(|| invalid("every penalty on the grid failed to produce an estimate"))
}

/// Seeded partition of `0..n` into `k` folds of near-equal size.
pub fn make_folds(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 || n < k {
        return Err(invalid("cross-validation needs n >= k >= 2"));
    }
    let perm = permutation(&mut rng_from_seed(seed), n);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = n / k + usize::from(f < n % k);
        let mut idx = perm[start..start + len].to_vec();
        idx.sort_unstable();
        folds.push(idx);
        start += len;
    }
    Ok(folds)
}

/// Covariance of `x` centred at its own mean, divisor `n`; a single row
/// gives the zero matrix.
pub fn held_out_covariance(x: &Matrix) -> Result<SymMatrix> {
    if x.rows() >= 2 {
        sample_covariance(x)
    } else if x.rows() == 1 {
        Ok(SymMatrix::zeros(x.cols()))
    } else {
        Err(invalid("empty fold"))
    }
}

/// `tr(Omega S) - log det Omega`.
pub fn predictive_nll(omega: &SymMatrix, s: &SymMatrix) -> Result<f64> {
    Ok(omega.trace_product(s)? - cholesky(omega)?.log_det())
}

fn sweep<F>(template: &EstimatorConfig, grid: &TuningGrid, mut fit: F) -> Vec<f64>
where
    F: FnMut(&EstimatorConfig, Option<&PrecisionEstimate>) -> Result<(PrecisionEstimate, f64)>,
{
    let mut scores = vec![f64::INFINITY; grid.len()];
    // Last two successful fits, newest first, with their penalties.
    let mut history: Vec<(f64, PrecisionEstimate)> = Vec::with_capacity(2);
    for i in (0..grid.len()).rev() {
        let gamma = grid.gammas[i];
        let cfg = template.clone().gamma(gamma);
        let predicted = extrapolate(template.method, &history, gamma);
        match fit(&cfg, predicted.as_ref().or(history.first().map(|h| &h.1))) {
            Ok((est, score)) if score.is_finite() => {
                scores[i] = score;
                history.truncate(1);
                history.insert(0, (gamma, est));
            }
            _ => history.clear(),
        }
    }
    scores
}

/// Warm start for the graphical-lasso based fits: the last two solutions
/// extrapolated linearly in `log(gamma)`, if that stays positive definite.
fn extrapolate(method: Method, history: &[(f64, PrecisionEstimate)], gamma: f64) -> Option<PrecisionEstimate> {
    if !matches!(method, Method::Eagl | Method::Glasso) {
        return None;
    }
    let [(g1, last), (g0, before)] = history else {
        return None;
    };
    let (a, b) = (last.report.as_ref()?, before.report.as_ref()?);
    let t = math::ln(gamma / g1) / math::ln(g1 / g0);
    if !t.is_finite() {
        return None;
    }
    let mut report = a.clone();
    report.omega = SymMatrix::from_upper_fn(a.omega.dim(), |i, j| {
        let (x, y) = (a.omega.get(i, j), b.omega.get(i, j));
        x + t * (x - y)
    });
    if !report.omega.is_positive_definite() {
        return None;
    }
    let mut est = last.clone();
    est.report = Some(report);
    Some(est)
}

/// Held-out scores of one fold across the whole grid.
pub fn cv_fold_scores(
    x: &Matrix,
    template: &EstimatorConfig,
    grid: &TuningGrid,
    folds: &[Vec<usize>],
    fold: usize,
) -> Result<Vec<f64>> {
    let test = &folds[fold];
    let train: Vec<usize> = folds.iter().enumerate().filter(|(f, _)| *f != fold).flat_map(|(_, v)| v.iter().copied()).collect();
    let s_train = sample_covariance(&x.select_rows(&train))?;
    let s_test = held_out_covariance(&x.select_rows(test))?;
    Ok(sweep(template, grid, |cfg, warm| {
        let est = cfg.fit_covariance(&s_train, warm)?;
        let score = predictive_nll(&est.omega, &s_test)?;
        Ok((est, score))
    }))
}

/// Averages per-fold score vectors; a cell is `+inf` only if all folds failed.
pub fn combine_fold_scores(per_fold: &[Vec<f64>]) -> Vec<f64> {
    let m = per_fold.first().map_or(0, Vec::len);
    (0..m)
        .map(|i| {
            let ok: Vec<f64> = per_fold.iter().map(|f| f[i]).filter(|v| v.is_finite()).collect();
            if ok.len() == per_fold.len() {
                ok.iter().sum::<f64>() / ok.len() as f64
            } else {
                f64::INFINITY
            }
        })
        .collect()
}

fn require_tunable(template: &EstimatorConfig) -> Result<()> {
    if template.method.is_penalized() {
        Ok(())
    } else {
        Err(invalid(alloc::format!("{} has no penalty to tune", template.method)))
    }
}

pub fn cross_validate(
    x: &Matrix,
    template: &EstimatorConfig,
    grid: &TuningGrid,
    k: usize,
    seed: u64,
) -> Result<TuningResult> {
    require_tunable(template)?;
    let folds = make_folds(x.rows(), k, seed)?;
    let per_fold = (0..k).map(|f| cv_fold_scores(x, template, grid, &folds, f)).collect::<Result<Vec<_>>>()?;
    finish(Criterion::Cv, grid, combine_fold_scores(&per_fold), Some(seed), Some(k))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BicOptions {
    pub zero_tol: f64,
    pub count_diagonal: bool,
}

impl Default for BicOptions {
    fn default() -> Self {
        Self { zero_tol: DEFAULT_ZERO_TOL, count_diagonal: false }
    }
}

/// `n (tr(S Omega) - log det Omega) + log(n) df`.
pub fn bic_score(s: &SymMatrix, omega: &SymMatrix, n: usize, opts: &BicOptions) -> Result<f64> {
    let mut df = omega.count_offdiag_nonzero(opts.zero_tol) as f64;
    if opts.count_diagonal {
        df += omega.dim() as f64;
    }
    Ok(n as f64 * predictive_nll(omega, s)? + math::ln(n as f64) * df)
}

pub fn bic_select(x: &Matrix, template: &EstimatorConfig, grid: &TuningGrid, opts: &BicOptions) -> Result<TuningResult> {
    require_tunable(template)?;
    let n = x.rows();
    let s = sample_covariance(x)?;
    let scores = sweep(template, grid, |cfg, warm| {
        let est = cfg.fit_covariance(&s, warm)?;
        let score = bic_score(&s, &est.omega, n, opts)?;
        Ok((est, score))
    });
    finish(Criterion::Bic, grid, scores, None, None)
}

fn finish(criterion: Criterion, grid: &TuningGrid, scores: Vec<f64>, seed: Option<u64>, k: Option<usize>) -> Result<TuningResult> {
    let best_index = select_best(&scores)?;
    Ok(TuningResult { criterion, grid: grid.gammas.clone(), best_gamma: grid.gammas[best_index], best_index, scores, seed, k })
}

/// Tuning settings used by the applications and the benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuningPlan {
    pub criterion: Criterion,
    pub grid_count: usize,
    pub folds: usize,
    pub bic: BicOptions,
}

impl Default for TuningPlan {
    fn default() -> Self {
        Self { criterion: Criterion::Cv, grid_count: DEFAULT_GRID_COUNT, folds: DEFAULT_FOLDS, bic: BicOptions::default() }
    }
}

impl TuningPlan {
    pub fn with_criterion(criterion: Criterion) -> Self {
        Self { criterion, ..Self::default() }
    }

    pub fn tune(&self, x: &Matrix, template: &EstimatorConfig, seed: u64) -> Result<TuningResult> {
        let grid = default_grid(&sample_covariance(x)?, self.grid_count)?;
        match self.criterion {
            Criterion::Cv => cross_validate(x, template, &grid, self.folds, seed),
            Criterion::Bic => bic_select(x, template, &grid, &self.bic),
        }
    }

    /// Tunes when the method has a penalty, then refits on all of `x`.
    pub fn fit(&self, x: &Matrix, template: &EstimatorConfig, seed: u64) -> Result<(PrecisionEstimate, Option<TuningResult>)> {
        if !template.method.is_penalized() {
            return Ok((template.fit_data(x, None)?, None));
        }
        let tuned = self.tune(x, template, seed)?;
        let est = template.clone().gamma(tuned.best_gamma).fit_data(x, None)?;
        Ok((est, Some(tuned)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::Method;
    use crate::models::sample_mvn;
    use proptest::prelude::*;

    #[test]
    fn identity_gives_fallback() {
        let g = default_grid(&SymMatrix::identity(4), 10).unwrap();
        assert_eq!(g.rule, GridRule::Fallback { count: 10 });
        assert_eq!(g.gammas[0], 1e-3);
        assert_eq!(g.gammas[9], 1.0);
    }

    #[test]
    fn three_point_grid() {
        let mut s = SymMatrix::identity(3);
        s.set(0, 2, -0.6);
        s.set(1, 2, 0.2);
        let g = default_grid(&s, 3).unwrap();
        assert_eq!(g.gammas[0], 0.6 * 1e-3);
        assert_eq!(g.gammas[2], 0.6);
        assert!((g.gammas[1] - 0.6 * 10f64.powf(-1.5)).abs() < 1e-12);
        assert!(default_grid(&s, 1).is_err());
    }

    #[test]
    fn ties_prefer_larger_gamma() {
        assert_eq!(select_best(&[1.0, 1.0, 1.0]).unwrap(), 2);
        assert_eq!(select_best(&[0.5, 1.0, 0.5, 2.0]).unwrap(), 2);
        assert_eq!(select_best(&[f64::INFINITY, 3.0]).unwrap(), 1);
        assert!(select_best(&[f64::INFINITY; 2]).is_err());
    }

    #[test]
    fn folds_partition_rows() {
        let folds = make_folds(23, 5, 7).unwrap();
        let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..23).collect::<Vec<_>>());
        assert!(folds.iter().all(|f| f.len() == 4 || f.len() == 5));
        assert!(make_folds(3, 5, 0).is_err());
    }

    #[test]
    fn cv_recovers_identity() {
        let x = sample_mvn(&SymMatrix::identity(5), 2000, 21).unwrap();
        let tmpl = EstimatorConfig::new(Method::Glasso);
        let grid = default_grid(&sample_covariance(&x).unwrap(), 20).unwrap();
        let r = cross_validate(&x, &tmpl, &grid, 5, 3).unwrap();
        let est = tmpl.clone().gamma(r.best_gamma).fit_data(&x, None).unwrap();
        assert!(est.omega.sub(&SymMatrix::identity(5)).unwrap().max_abs() <= 0.2);
    }

    #[test]
    fn leave_one_out_runs() {
        let x = sample_mvn(&SymMatrix::identity(3), 8, 1).unwrap();
        let grid = TuningGrid::explicit(vec![0.05, 0.2, 0.8]).unwrap();
        let r = cross_validate(&x, &EstimatorConfig::new(Method::Eagl), &grid, 8, 0).unwrap();
        assert!(grid.gammas.contains(&r.best_gamma));
    }

    #[test]
    fn bic_single_point_and_df() {
        let x = sample_mvn(&SymMatrix::identity(4), 50, 2).unwrap();
        let grid = TuningGrid::explicit(vec![0.3]).unwrap();
        let r = bic_select(&x, &EstimatorConfig::new(Method::Glasso), &grid, &BicOptions::default()).unwrap();
        assert_eq!(r.best_gamma, 0.3);
        let s = sample_covariance(&x).unwrap();
        let d = SymMatrix::identity(4);
        let score = bic_score(&s, &d, 50, &BicOptions::default()).unwrap();
        assert!((score - 50.0 * s.trace()).abs() < 1e-12);
    }

    #[test]
    fn bic_prunes_false_edges() {
        let x = sample_mvn(&SymMatrix::identity(10), 400, 5).unwrap();
        let s = sample_covariance(&x).unwrap();
        let grid = default_grid(&s, 15).unwrap();
        let tmpl = EstimatorConfig::new(Method::Glasso);
        let r = bic_select(&x, &tmpl, &grid, &BicOptions::default()).unwrap();
        let chosen = tmpl.clone().gamma(r.best_gamma).fit_covariance(&s, None).unwrap();
        let loose = tmpl.clone().gamma(grid.gammas[0]).fit_covariance(&s, None).unwrap();
        assert!(chosen.omega.count_offdiag_nonzero(DEFAULT_ZERO_TOL) < loose.omega.count_offdiag_nonzero(DEFAULT_ZERO_TOL));
    }

    #[test]
    fn warm_and_cold_sweeps_agree() {
        let x = sample_mvn(&crate::models::generate_model(&crate::models::ModelSpec::new(crate::models::ModelId::M1, 8, 0)).unwrap().omega, 40, 3)
            .unwrap();
        let tmpl = EstimatorConfig::new(Method::Eagl);
        let grid = default_grid(&sample_covariance(&x).unwrap(), 8).unwrap();
        let folds = make_folds(40, 4, 1).unwrap();
        let warm = cv_fold_scores(&x, &tmpl, &grid, &folds, 0).unwrap();
        let train: Vec<usize> = folds[1..].iter().flatten().copied().collect();
        let s_train = sample_covariance(&x.select_rows(&train)).unwrap();
        let s_test = held_out_covariance(&x.select_rows(&folds[0])).unwrap();
        for (i, g) in grid.gammas.iter().enumerate() {
            let cold = tmpl.clone().gamma(*g).fit_covariance(&s_train, None).unwrap();
            let c = predictive_nll(&cold.omega, &s_test).unwrap();
            assert!((c - warm[i]).abs() < 1e-6, "{} vs {}", c, warm[i]);
        }
    }

    #[test]
    fn non_penalized_refused() {
        let x = sample_mvn(&SymMatrix::identity(3), 20, 2).unwrap();
        let grid = TuningGrid::explicit(vec![0.1]).unwrap();
        assert!(cross_validate(&x, &EstimatorConfig::new(Method::Naive), &grid, 2, 0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn default_grid_increasing(vals in proptest::collection::vec(-2.0f64..2.0, 6), count in 2usize..60) {
            let mut s = SymMatrix::identity(4);
            let mut it = vals.into_iter();
            for i in 0..4 { for j in (i + 1)..4 { s.set(i, j, it.next().unwrap()); } }
            let g = default_grid(&s, count).unwrap();
            prop_assert_eq!(g.len(), count);
            prop_assert!(g.gammas.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(g.gammas[0] > 0.0);
        }

        #[test]
        fn fold_relabelling_keeps_choice(seed in 0u64..50, shift in 1usize..4) {
            let x = sample_mvn(&SymMatrix::identity(3), 24, seed).unwrap();
            let tmpl = EstimatorConfig::new(Method::Glasso);
            let grid = TuningGrid::explicit(vec![0.01, 0.1, 0.5]).unwrap();
            let folds = make_folds(24, 4, seed).unwrap();
            let mut rotated = folds.clone();
            rotated.rotate_left(shift);
            let a: Vec<_> = (0..4).map(|f| cv_fold_scores(&x, &tmpl, &grid, &folds, f).unwrap()).collect();
            let b: Vec<_> = (0..4).map(|f| cv_fold_scores(&x, &tmpl, &grid, &rotated, f).unwrap()).collect();
            let ia = select_best(&combine_fold_scores(&a)).unwrap();
            let ib = select_best(&combine_fold_scores(&b)).unwrap();
            prop_assert_eq!(ia, ib);
        }
    }
}
