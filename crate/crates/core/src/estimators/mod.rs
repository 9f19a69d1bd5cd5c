//! Estimator facade: EAGL, graphical lasso, (targeted) graphical elastic net
//! and ridge, Ledoit-Wolf and the naive identity, plus post-hoc
//! sparsification.
//!
//! EAGL adds `gamma (1 - alpha) log det(Omega^{-1})` to the lasso-penalised
//! likelihood with weight `gamma alpha` on `||Omega||_1`. Collecting the
//! log-det terms gives
//!
//! ```text
//! -c log det(Omega) + tr(Omega S) + gamma alpha ||Omega||_1,   c = 1 + (1 - alpha) gamma
//! ```
//!
//! and dividing by `c` leaves the minimiser unchanged, so EAGL is the
//! graphical lasso on `S / c` with penalty `alpha gamma / c`.

pub mod elastic_net;
pub mod ledoit_wolf;
pub mod ridge;
mod sparsify;

use alloc::string::{String, ToString};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::glasso::{solve_glasso, GlassoProblem, SolveReport};
use crate::matrix::{cholesky, invert_pd, sample_covariance, Matrix, SymMatrix};

pub use elastic_net::{solve_elastic_net, ElasticNetProblem};
pub use ledoit_wolf::{ledoit_wolf_covariance, LedoitWolf};
pub use ridge::{gridge_closed_form, t_gridge_closed_form};
pub use sparsify::{sparsify_threshold, SparsifyOutcome, SparsifyRule};

pub const DEFAULT_ALPHA: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Eagl,
    Glasso,
    Gen,
    TGen,
    #[serde(rename = "gridge")]
    GRidge,
    #[serde(rename = "t-gridge")]
    TGRidge,
    LedoitWolf,
    Naive,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::Eagl,
        Method::Glasso,
        Method::Gen,
        Method::TGen,
        Method::GRidge,
        Method::TGRidge,
        Method::LedoitWolf,
        Method::Naive,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Eagl => "eagl",
            Method::Glasso => "glasso",
            Method::Gen => "gen",
            Method::TGen => "t-gen",
            Method::GRidge => "gridge",
            Method::TGRidge => "t-gridge",
            Method::LedoitWolf => "ledoit-wolf",
            Method::Naive => "naive",
        }
    }

    /// Whether the method has a penalty parameter to tune.
    pub fn is_penalized(self) -> bool {
        !matches!(self, Method::LedoitWolf | Method::Naive)
    }

    pub fn uses_alpha(self) -> bool {
        matches!(self, Method::Eagl | Method::Gen | Method::TGen)
    }
}

impl core::fmt::Display for Method {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

impl core::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s.trim().to_ascii_lowercase().replace('_', "-");
        Ok(match key.as_str() {
            "eagl" => Method::Eagl,
            "glasso" => Method::Glasso,
            "gen" => Method::Gen,
            "t-gen" | "tgen" => Method::TGen,
            "gridge" | "rope" => Method::GRidge,
            "t-gridge" | "tgridge" => Method::TGRidge,
            "ledoit-wolf" | "lw" | "ledoitwolf" => Method::LedoitWolf,
            "naive" => Method::Naive,
            _ => return Err(invalid(alloc::format!("unknown estimator '{s}'"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub penalize_diagonal: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: crate::glasso::DEFAULT_TOL, max_iter: crate::glasso::DEFAULT_MAX_ITER, penalize_diagonal: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub method: Method,
    pub gamma: f64,
    pub alpha: f64,
    /// Target for T-GEN / T-GRidge; `None` means `nu I`, `nu = p / tr(S)`.
    pub target: Option<SymMatrix>,
    pub solver: SolverOptions,
    /// Applied to every fit when set.
    pub sparsify: Option<SparsifyRule>,
}

impl EstimatorConfig {
    pub fn new(method: Method) -> Self {
        Self { method, gamma: 0.1, alpha: DEFAULT_ALPHA, target: None, solver: SolverOptions::default(), sparsify: None }
    }

    pub fn gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn target(mut self, target: SymMatrix) -> Self {
        self.target = Some(target);
        self
    }

    pub fn solver(mut self, solver: SolverOptions) -> Self {
        self.solver = solver;
        self
    }

    pub fn sparsify(mut self, rule: SparsifyRule) -> Self {
        self.sparsify = Some(rule);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(invalid("alpha must lie in [0, 1]"));
        }
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(invalid("gamma must be finite and nonnegative"));
        }
        if let Some(t) = &self.target {
            cholesky(t).map_err(|_| invalid("target must be positive definite"))?;
        }
        Ok(())
    }

    /// Fits from a covariance matrix. Ledoit-Wolf needs raw data and is
    /// rejected here.
    pub fn fit_covariance(&self, s: &SymMatrix, warm: Option<&PrecisionEstimate>) -> Result<PrecisionEstimate> {
        self.validate()?;
        let warm = warm.and_then(|w| w.report.as_ref());
        let opts = &self.solver;
        let est = match self.method {
            Method::Eagl => estimate_eagl(s, self.gamma, self.alpha, opts, warm),
            Method::Glasso => estimate_glasso(s, self.gamma, opts, warm),
            Method::Gen => estimate_gen(s, self.gamma, self.alpha, opts, warm),
            Method::TGen => {
                let t = self.resolve_target(s)?;
                estimate_t_gen(s, self.gamma, self.alpha, &t, opts, warm)
            }
            Method::GRidge => estimate_gridge(s, self.gamma),
            Method::TGRidge => {
                let t = self.resolve_target(s)?;
                estimate_t_gridge(s, self.gamma, &t)
            }
            Method::Naive => Ok(estimate_naive(s.dim())),
            Method::LedoitWolf => Err(invalid("Ledoit-Wolf needs the data matrix, not a covariance")),
        }?;
        self.finish(est)
    }

    /// Fits from an `n x p` data matrix.
    pub fn fit_data(&self, x: &Matrix, warm: Option<&PrecisionEstimate>) -> Result<PrecisionEstimate> {
        match self.method {
            Method::LedoitWolf => {
                self.validate()?;
                self.finish(estimate_ledoit_wolf(x)?)
            }
            Method::Naive => self.finish(estimate_naive(x.cols())),
            _ => self.fit_covariance(&sample_covariance(x)?, warm),
        }
    }

    fn resolve_target(&self, s: &SymMatrix) -> Result<SymMatrix> {
        match &self.target {
            Some(t) => {
                s.same_dim(t)?;
                Ok(t.clone())
            }
            None => default_target(s),
        }
    }

    fn finish(&self, mut est: PrecisionEstimate) -> Result<PrecisionEstimate> {
        est.alpha = if self.method.uses_alpha() { Some(self.alpha) } else { None };
        match &self.sparsify {
            Some(rule) => sparsify_threshold(&est, *rule),
            None => Ok(est),
        }
    }
}

/// `(S / c, alpha gamma / c)`, the graphical lasso actually solved for EAGL.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveProblem {
    pub scale: f64,
    pub l1_weight: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PrecisionEstimate {
    pub omega: SymMatrix,
    pub method: Method,
    pub gamma: Option<f64>,
    pub alpha: Option<f64>,
    /// Objective of the method's own problem at `omega`; `None` for the
    /// unpenalised baselines.
    pub objective: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub closed_form: bool,
    pub effective_problem: Option<EffectiveProblem>,
    pub sparsified: Option<SparsifyOutcome>,
    #[serde(skip)]
    pub report: Option<SolveReport>,
}

impl PrecisionEstimate {
    fn closed(method: Method, gamma: Option<f64>, omega: SymMatrix, objective: Option<f64>) -> Self {
        Self {
            omega,
            method,
            gamma,
            alpha: None,
            objective,
            iterations: 0,
            converged: true,
            closed_form: true,
            effective_problem: None,
            sparsified: None,
            report: None,
        }
    }

    fn iterative(method: Method, gamma: f64, report: SolveReport, objective: f64) -> Self {
        Self {
            omega: report.omega.clone(),
            method,
            gamma: Some(gamma),
            alpha: None,
            objective: Some(objective),
            iterations: report.iterations,
            converged: report.converged,
            closed_form: false,
            effective_problem: None,
            sparsified: None,
            report: Some(report),
        }
    }
}

/// Default shrinkage target `nu I` with `nu = p / tr(S)`.
pub fn default_target(s: &SymMatrix) -> Result<SymMatrix> {
    let tr = s.trace();
    if !(tr > 0.0) {
        return Err(invalid("default target needs tr(S) > 0"));
    }
    Ok(SymMatrix::scaled_identity(s.dim(), s.dim() as f64 / tr))
}

/// EAGL objective `-log det + tr(Omega S) + gamma (alpha ||Omega||_1 + (1 - alpha) log det(Omega^{-1}))`.
pub fn eagl_objective(s: &SymMatrix, omega: &SymMatrix, gamma: f64, alpha: f64, penalize_diagonal: bool) -> Result<f64> {
    let logdet = cholesky(omega)?.log_det();
    Ok(-logdet
        + omega.trace_product(s)?
        + gamma * (alpha * omega.l1_elementwise(penalize_diagonal) - (1.0 - alpha) * logdet))
}

pub fn estimate_glasso(
    s: &SymMatrix,
    gamma: f64,
    opts: &SolverOptions,
    warm: Option<&SolveReport>,
) -> Result<PrecisionEstimate> {
    let problem = GlassoProblem::new(s, gamma)
        .penalize_diagonal(opts.penalize_diagonal)
        .tol(opts.tol)
        .max_iter(opts.max_iter);
    let report = solve_glasso(&problem, warm)?;
    let objective = report.objective;
    Ok(PrecisionEstimate::iterative(Method::Glasso, gamma, report, objective))
}

/// EAGL via the rescaled graphical lasso. `alpha == 0` has the closed form
/// `(1 + gamma) S^{-1}` and needs `S` positive definite.
pub fn estimate_eagl(
    s: &SymMatrix,
    gamma: f64,
    alpha: f64,
    opts: &SolverOptions,
    warm: Option<&SolveReport>,
) -> Result<PrecisionEstimate> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(invalid("alpha must lie in [0, 1]"));
    }
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(invalid("gamma must be finite and nonnegative"));
    }
    let c = 1.0 + (1.0 - alpha) * gamma;
    if alpha == 0.0 {
        let omega = invert_pd(s)?.scale(c);
        let objective = eagl_objective(s, &omega, gamma, alpha, opts.penalize_diagonal)?;
        let mut est = PrecisionEstimate::closed(Method::Eagl, Some(gamma), omega, Some(objective));
        est.alpha = Some(alpha);
        return Ok(est);
    }
    let scaled = s.scale(1.0 / c);
    let l1 = alpha * gamma / c;
    let problem = GlassoProblem::new(&scaled, l1)
        .penalize_diagonal(opts.penalize_diagonal)
        .tol(opts.tol)
        .max_iter(opts.max_iter);
    let report = solve_glasso(&problem, warm)?;
    let objective = eagl_objective(s, &report.omega, gamma, alpha, opts.penalize_diagonal)?;
    let mut est = PrecisionEstimate::iterative(Method::Eagl, gamma, report, objective);
    est.alpha = Some(alpha);
    est.effective_problem = Some(EffectiveProblem { scale: c, l1_weight: l1 });
    Ok(est)
}

pub fn estimate_gridge(s: &SymMatrix, gamma: f64) -> Result<PrecisionEstimate> {
    let omega = gridge_closed_form(s, gamma)?;
    let objective = -cholesky(&omega)?.log_det() + omega.trace_product(s)? + gamma * omega.trace_product(&omega)?;
    Ok(PrecisionEstimate::closed(Method::GRidge, Some(gamma), omega, Some(objective)))
}

pub fn estimate_t_gridge(s: &SymMatrix, gamma: f64, target: &SymMatrix) -> Result<PrecisionEstimate> {
    let omega = t_gridge_closed_form(s, gamma, target)?;
    let d = omega.sub(target)?;
    let objective = -cholesky(&omega)?.log_det() + omega.trace_product(s)? + 0.5 * gamma * d.trace_product(&d)?;
    Ok(PrecisionEstimate::closed(Method::TGRidge, Some(gamma), omega, Some(objective)))
}

/// Graphical elastic net: penalty `gamma (alpha ||Omega||_1 + (1 - alpha) ||Omega||_2^2)`.
pub fn estimate_gen(
    s: &SymMatrix,
    gamma: f64,
    alpha: f64,
    opts: &SolverOptions,
    warm: Option<&SolveReport>,
) -> Result<PrecisionEstimate> {
    let problem = ElasticNetProblem {
        s,
        l1_weight: gamma * alpha,
        l2_weight: gamma * (1.0 - alpha),
        target: None,
        penalize_diagonal: opts.penalize_diagonal,
        tol: elastic_net_tol(opts),
        max_iter: elastic_net::DEFAULT_MAX_ITER.max(opts.max_iter),
    };
    let report = solve_elastic_net(&problem, warm)?;
    let objective = report.objective;
    let mut est = PrecisionEstimate::iterative(Method::Gen, gamma, report, objective);
    est.alpha = Some(alpha);
    Ok(est)
}

/// Targeted elastic net: penalty
/// `gamma (alpha ||Omega - T||_1 + (1 - alpha) / 2 ||Omega - T||_2^2)`.
pub fn estimate_t_gen(
    s: &SymMatrix,
    gamma: f64,
    alpha: f64,
    target: &SymMatrix,
    opts: &SolverOptions,
    warm: Option<&SolveReport>,
) -> Result<PrecisionEstimate> {
    let problem = ElasticNetProblem {
        s,
        l1_weight: gamma * alpha,
        l2_weight: gamma * (1.0 - alpha) / 2.0,
        target: Some(target),
        penalize_diagonal: opts.penalize_diagonal,
        tol: elastic_net_tol(opts),
        max_iter: elastic_net::DEFAULT_MAX_ITER.max(opts.max_iter),
    };
    let report = solve_elastic_net(&problem, warm)?;
    let objective = report.objective;
    let mut est = PrecisionEstimate::iterative(Method::TGen, gamma, report, objective);
    est.alpha = Some(alpha);
    Ok(est)
}

// ADMM residuals need a tighter tolerance than the glasso W-change rule to
// reach the same objective accuracy.
fn elastic_net_tol(opts: &SolverOptions) -> f64 {
    (opts.tol * 1e-2).min(elastic_net::DEFAULT_TOL)
}

pub fn estimate_ledoit_wolf(x: &Matrix) -> Result<PrecisionEstimate> {
    let lw = ledoit_wolf_covariance(x, None)?;
    let omega = invert_pd(&lw.covariance)?;
    Ok(PrecisionEstimate::closed(Method::LedoitWolf, None, omega, None))
}

pub fn estimate_naive(p: usize) -> PrecisionEstimate {
    PrecisionEstimate::closed(Method::Naive, None, SymMatrix::identity(p), None)
}

impl From<Method> for EstimatorConfig {
    fn from(m: Method) -> Self {
        EstimatorConfig::new(m)
    }
}

impl Method {
    pub fn label(self) -> String {
        self.name().to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{proximal_oracle, OracleProblem};
    use crate::rng::{rng_from_seed, standard_normal};

    fn random_cov(p: usize, n: usize, seed: u64) -> SymMatrix {
        let mut rng = rng_from_seed(seed);
        let x = Matrix::from_fn(n, p, |_, _| standard_normal(&mut rng));
        sample_covariance(&x).unwrap()
    }

    #[test]
    fn eagl_alpha_one_is_glasso() {
        let s = random_cov(8, 20, 1);
        let opts = SolverOptions::default();
        let a = estimate_eagl(&s, 0.2, 1.0, &opts, None).unwrap();
        let b = estimate_glasso(&s, 0.2, &opts, None).unwrap();
        assert!(a.omega.sub(&b.omega).unwrap().max_abs() <= 1e-8);
    }

    #[test]
    fn eagl_alpha_zero_closed_form() {
        let s = random_cov(5, 50, 2);
        let a = estimate_eagl(&s, 0.5, 0.0, &SolverOptions::default(), None).unwrap();
        let want = invert_pd(&s).unwrap().scale(1.5);
        assert!(a.omega.sub(&want).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn eagl_alpha_zero_singular_refused() {
        let s = random_cov(10, 4, 3);
        assert!(estimate_eagl(&s, 0.5, 0.0, &SolverOptions::default(), None).is_err());
    }

    #[test]
    fn eagl_matches_oracle() {
        let s = random_cov(5, 15, 4);
        let (gamma, alpha) = (0.3, 0.5);
        let est = estimate_eagl(&s, gamma, alpha, &SolverOptions::default(), None).unwrap();
        let c = 1.0 + (1.0 - alpha) * gamma;
        let o = proximal_oracle(&OracleProblem::new(&s).l1(alpha * gamma).logdet_scale(c)).unwrap();
        assert!((est.objective.unwrap() - o.objective).abs() < 1e-5);
    }

    #[test]
    fn gen_degenerates() {
        let s = random_cov(5, 15, 5);
        let opts = SolverOptions::default();
        let g1 = estimate_gen(&s, 0.2, 1.0, &opts, None).unwrap();
        let gl = estimate_glasso(&s, 0.2, &opts, None).unwrap();
        assert!(g1.omega.sub(&gl.omega).unwrap().max_abs() < 1e-6, "{}", g1.omega.sub(&gl.omega).unwrap().max_abs());
        let g0 = estimate_gen(&s, 0.2, 0.0, &opts, None).unwrap();
        let gr = estimate_gridge(&s, 0.2).unwrap();
        assert!(g0.omega.sub(&gr.omega).unwrap().max_abs() < 1e-6);
        let t = default_target(&s).unwrap();
        let tg0 = estimate_t_gen(&s, 0.2, 0.0, &t, &opts, None).unwrap();
        let tgr = estimate_t_gridge(&s, 0.2, &t).unwrap();
        assert!(tg0.omega.sub(&tgr.omega).unwrap().max_abs() < 1e-6);
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("scad".parse::<Method>().is_err());
    }

    #[test]
    fn naive_and_config_validation() {
        assert_eq!(estimate_naive(3).omega, SymMatrix::identity(3));
        assert_eq!(estimate_naive(1).omega, SymMatrix::identity(1));
        let s = SymMatrix::identity(3);
        assert!(EstimatorConfig::new(Method::Eagl).alpha(1.5).fit_covariance(&s, None).is_err());
        assert!(EstimatorConfig::new(Method::LedoitWolf).fit_covariance(&s, None).is_err());
    }
}
