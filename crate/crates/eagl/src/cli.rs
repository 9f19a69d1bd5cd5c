//! Command-line surface. Every subcommand is a thin layer over `eagl-core`
//! and the parallel drivers; all randomness flows from `--seed`.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use eagl_core::apps::benchmark::BenchmarkConfig;
use eagl_core::apps::lda::LdaExperiment;
use eagl_core::apps::portfolio::BacktestConfig;
use eagl_core::apps::trajectories::{eigen_trajectories, TrajectoryConfig};
use eagl_core::estimators::{EffectiveProblem, SparsifyOutcome, SparsifyRule, DEFAULT_ALPHA};
use eagl_core::metrics::{partial_correlations, DEFAULT_ZERO_TOL};
use eagl_core::models::{generate_model, sample_mvn};
use eagl_core::rng::derive_seed;
use eagl_core::tuning::{BicOptions, TuningPlan, DEFAULT_FOLDS, DEFAULT_GRID_COUNT};
use eagl_core::{Criterion, EstimatorConfig, Method, ModelId, ModelSpec, SolverOptions, TuningResult};
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::io::{read_matrix, sym_rows, write_json, write_matrix, write_records, write_sym_matrix};
use crate::parallel;

#[derive(Debug, Parser)]
#[command(name = "eagl", version, about = "Sparse precision-matrix estimation with the entropy adjusted graphical lasso")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate a precision matrix from an n x p data CSV.
    Estimate(EstimateArgs),
    /// Draw a true precision matrix from one of models 1-7 and a Gaussian sample.
    Simulate(SimulateArgs),
    /// Score estimators against simulated truths over many replications.
    Benchmark(BenchmarkArgs),
    /// Eigenvalues of graphical lasso and EAGL fits along a penalty grid.
    EigenTrajectories(TrajectoryArgs),
    /// Two-group LDA classification with feature screening.
    Classify(ClassifyArgs),
    /// Rolling-window minimum-variance portfolio backtest.
    Backtest(BacktestArgs),
}

#[derive(Debug, Clone, Args)]
pub struct TuningArgs {
    /// Number of cross-validation folds.
    #[arg(long, default_value_t = DEFAULT_FOLDS)]
    pub folds: usize,
    /// Points on the log-spaced penalty grid.
    #[arg(long, default_value_t = DEFAULT_GRID_COUNT)]
    pub grid_count: usize,
    /// Count the diagonal in the BIC degrees of freedom.
    #[arg(long)]
    pub bic_count_diagonal: bool,
}

impl TuningArgs {
    fn plan(&self, criterion: Criterion) -> TuningPlan {
        TuningPlan {
            criterion,
            grid_count: self.grid_count,
            folds: self.folds,
            bic: BicOptions { zero_tol: DEFAULT_ZERO_TOL, count_diagonal: self.bic_count_diagonal },
        }
    }
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("penalty").required(true).args(["gamma", "tune"]))]
pub struct EstimateArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Skip one header line in the input.
    #[arg(long)]
    pub header: bool,
    #[arg(long, default_value = "eagl", value_parser = parse_method)]
    pub method: Method,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    /// Fixed penalty.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Select the penalty by `cv` or `bic`.
    #[arg(long, value_parser = parse_criterion)]
    pub tune: Option<Criterion>,
    #[command(flatten)]
    pub tuning: TuningArgs,
    /// Seed for the cross-validation folds.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Leave the diagonal of Omega unpenalised.
    #[arg(long)]
    pub unpenalized_diagonal: bool,
    /// Threshold the estimate: `abs:EPS`, `pcor:EPS` or `pcor-sd:K`.
    #[arg(long, value_parser = parse_sparsify)]
    pub sparsify: Option<SparsifyRule>,
    /// JSON report; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write Omega as CSV.
    #[arg(long)]
    pub omega_csv: Option<PathBuf>,
    /// Also write the partial-correlation matrix of the (sparsified) estimate as CSV.
    #[arg(long)]
    pub partial_corr_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_parser = parse_model)]
    pub model: ModelId,
    #[arg(long)]
    pub p: usize,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    /// Comma-separated model numbers.
    #[arg(long, value_delimiter = ',', required = true, value_parser = parse_model)]
    pub models: Vec<ModelId>,
    #[arg(long)]
    pub p: usize,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 20)]
    pub reps: usize,
    #[arg(long, value_delimiter = ',', default_value = "eagl,glasso", value_parser = parse_method)]
    pub estimators: Vec<Method>,
    #[arg(long, default_value = "cv", value_parser = parse_criterion)]
    pub criterion: Criterion,
    #[command(flatten)]
    pub tuning: TuningArgs,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Summary table: one row per (model, estimator, metric).
    #[arg(long)]
    pub out: PathBuf,
    /// Per-replication values, one row per (model, estimator, replication, metric).
    #[arg(long)]
    pub replications_csv: Option<PathBuf>,
    /// Full result including failures as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrajectoryArgs {
    #[arg(long)]
    pub p: usize,
    #[arg(long)]
    pub n: usize,
    /// `START:STOP:STEP` or a comma-separated list.
    #[arg(long, default_value = "0.1:2:0.1", value_parser = parse_grid)]
    pub gamma_grid: GammaGrid,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    /// Rows are samples of group 1 (the positive class).
    #[arg(long)]
    pub group1: PathBuf,
    #[arg(long)]
    pub group2: PathBuf,
    #[arg(long)]
    pub header: bool,
    /// Features kept after ranking by |Welch t|.
    #[arg(long, default_value_t = 100)]
    pub genes: usize,
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    /// Total training rows, split between the groups in proportion to their sizes.
    #[arg(long, default_value_t = 60)]
    pub train_size: usize,
    #[arg(long, default_value = "eagl", value_parser = parse_method)]
    pub estimator: Method,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    #[arg(long, default_value = "cv", value_parser = parse_criterion)]
    pub criterion: Criterion,
    #[command(flatten)]
    pub tuning: TuningArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// JSON report; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BacktestArgs {
    /// Rows are periods, columns assets.
    #[arg(long)]
    pub returns: PathBuf,
    #[arg(long)]
    pub header: bool,
    #[arg(long, default_value_t = 150)]
    pub window: usize,
    #[arg(long, default_value = "eagl", value_parser = parse_method)]
    pub estimator: Method,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    #[arg(long, default_value = "cv", value_parser = parse_criterion)]
    pub criterion: Criterion,
    /// Re-tune the penalty every this many windows.
    #[arg(long, default_value_t = 1)]
    pub retune_every: usize,
    #[command(flatten)]
    pub tuning: TuningArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// JSON report; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Out-of-sample return series as CSV.
    #[arg(long)]
    pub returns_out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GammaGrid(pub Vec<f64>);

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    s.parse().map_err(|e: eagl_core::Error| e.to_string())
}

fn parse_criterion(s: &str) -> std::result::Result<Criterion, String> {
    s.parse().map_err(|e: eagl_core::Error| e.to_string())
}

fn parse_model(s: &str) -> std::result::Result<ModelId, String> {
    let k: u8 = s.trim().trim_start_matches(['M', 'm']).parse().map_err(|_| format!("'{s}' is not a model number"))?;
    ModelId::from_index(k).map_err(|e| e.to_string())
}

fn parse_sparsify(s: &str) -> std::result::Result<SparsifyRule, String> {
    let (kind, value) = s.split_once(':').ok_or("expected KIND:VALUE")?;
    let v: f64 = value.parse().map_err(|_| format!("'{value}' is not a number"))?;
    if !(v >= 0.0) {
        return Err("threshold must be nonnegative".into());
    }
    match kind {
        "abs" => Ok(SparsifyRule::Absolute(v)),
        "pcor" => Ok(SparsifyRule::PartialCorrAbsolute(v)),
        "pcor-sd" => Ok(SparsifyRule::PartialCorrSd(v)),
        _ => Err(format!("unknown rule '{kind}' (abs, pcor, pcor-sd)")),
    }
}

/// Grid values are rounded to 12 significant digits so `0.1:2:0.1` gives
/// `0.3` rather than `0.30000000000000004`.
fn parse_grid(s: &str) -> std::result::Result<GammaGrid, String> {
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("'{t}' is not a number"));
    let values = if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, step] = parts[..] else {
            return Err("expected START:STOP:STEP".into());
        };
        let (a, b, step) = (num(a)?, num(b)?, num(step)?);
        if !(step > 0.0) || !(b >= a) {
            return Err("need STEP > 0 and STOP >= START".into());
        }
        let count = ((b - a) / step + 1e-9).floor() as usize + 1;
        (0..count).map(|i| round_sig(a + i as f64 * step)).collect()
    } else {
        s.split(',').map(num).collect::<std::result::Result<Vec<_>, _>>()?
    };
    if values.is_empty() || values.iter().any(|g| !(*g > 0.0) || !g.is_finite()) {
        return Err("grid values must be positive".into());
    }
    Ok(GammaGrid(values))
}

fn round_sig(v: f64) -> f64 {
    format!("{v:.11e}").parse().unwrap_or(v)
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Estimate(a) => estimate(a),
        Command::Simulate(a) => simulate(a),
        Command::Benchmark(a) => benchmark(a),
        Command::EigenTrajectories(a) => trajectories(a),
        Command::Classify(a) => classify(a),
        Command::Backtest(a) => backtest(a),
    }
}

#[derive(Serialize)]
struct EstimateOutput {
    method: Method,
    gamma: Option<f64>,
    alpha: Option<f64>,
    objective: Option<f64>,
    iterations: usize,
    converged: bool,
    closed_form: bool,
    edges: usize,
    effective_problem: Option<EffectiveProblem>,
    sparsified: Option<SparsifyOutcome>,
    omega: Vec<Vec<f64>>,
    tuning: Option<TuningResult>,
}

fn estimate(a: EstimateArgs) -> Result<()> {
    let x = read_matrix(&a.input, a.header)?;
    let mut tmpl = EstimatorConfig::new(a.method).alpha(a.alpha).solver(SolverOptions {
        penalize_diagonal: !a.unpenalized_diagonal,
        ..SolverOptions::default()
    });
    if let Some(rule) = a.sparsify {
        tmpl = tmpl.sparsify(rule);
    }
    let (est, tuning) = match (a.gamma, a.tune) {
        (Some(g), _) => (tmpl.gamma(g).fit_data(&x, None)?, None),
        (None, Some(c)) => parallel::fit(&a.tuning.plan(c), &x, &tmpl, a.seed)?,
        (None, None) => return Err(CliError::Usage("pass --gamma or --tune".into())),
    };
    if let Some(path) = &a.omega_csv {
        write_sym_matrix(path, &est.omega)?;
    }
    if let Some(path) = &a.partial_corr_csv {
        write_sym_matrix(path, &partial_correlations(&est.omega)?)?;
    }
    let out = EstimateOutput {
        method: est.method,
        gamma: est.gamma,
        alpha: est.alpha,
        objective: est.objective,
        iterations: est.iterations,
        converged: est.converged,
        closed_form: est.closed_form,
        edges: est.omega.count_offdiag_nonzero(DEFAULT_ZERO_TOL),
        effective_problem: est.effective_problem,
        sparsified: est.sparsified,
        omega: sym_rows(&est.omega),
        tuning,
    };
    write_json(a.out.as_deref(), &out)?;
    if est.converged {
        Ok(())
    } else {
        let residual = est.report.as_ref().map_or(f64::NAN, |r| r.kkt_residual);
        Err(eagl_core::Error::NoConvergence { residual }.into())
    }
}

#[derive(Serialize)]
struct Manifest {
    model_id: u8,
    p: usize,
    n: usize,
    seed: u64,
    edge_count: usize,
    truth_seed: u64,
    sample_seed: u64,
    omega_file: &'static str,
    samples_file: &'static str,
}

/// Truth from `derive_seed(seed, 0)`, sample from `derive_seed(seed, 1)`.
fn simulate(a: SimulateArgs) -> Result<()> {
    let (truth_seed, sample_seed) = (derive_seed(a.seed, 0), derive_seed(a.seed, 1));
    let truth = generate_model(&ModelSpec::new(a.model, a.p, truth_seed))?;
    let x = sample_mvn(&truth.omega, a.n, sample_seed)?;
    std::fs::create_dir_all(&a.out_dir).map_err(|e| CliError::io(&a.out_dir, e))?;
    let manifest = Manifest {
        model_id: a.model.index(),
        p: a.p,
        n: a.n,
        seed: a.seed,
        edge_count: truth.edge_count(),
        truth_seed,
        sample_seed,
        omega_file: "omega.csv",
        samples_file: "samples.csv",
    };
    write_sym_matrix(&a.out_dir.join(manifest.omega_file), &truth.omega)?;
    write_matrix(&a.out_dir.join(manifest.samples_file), &x)?;
    write_json(Some(&a.out_dir.join("manifest.json")), &manifest)
}

fn template(method: Method, alpha: f64) -> EstimatorConfig {
    EstimatorConfig::new(method).alpha(alpha)
}

#[derive(Serialize)]
struct ReplicationValue {
    model: u8,
    estimator: Method,
    replication: usize,
    metric: &'static str,
    value: f64,
}

fn benchmark(a: BenchmarkArgs) -> Result<()> {
    let estimators = a.estimators.iter().map(|m| template(*m, a.alpha)).collect();
    let mut cfg = BenchmarkConfig::new(a.models.clone(), a.p, a.n, estimators, a.reps, a.seed);
    cfg.plan = a.tuning.plan(a.criterion);
    let result = parallel::benchmark(&cfg)?;
    write_table(&a.out, &result.rows)?;
    if let Some(path) = &a.replications_csv {
        let mut values = Vec::new();
        for c in &result.cells {
            let Ok(scores) = &c.scores else { continue };
            for metric in eagl_core::apps::benchmark::METRICS {
                if let Some(value) = scores.metric(metric) {
                    values.push(ReplicationValue {
                        model: c.model.index(),
                        estimator: c.estimator,
                        replication: c.replication,
                        metric,
                        value,
                    });
                }
            }
        }
        write_records(path, &values)?;
    }
    if let Some(path) = &a.json {
        write_json(Some(path), &result)?;
    }
    for c in result.cells.iter().filter(|c| c.scores.is_err()) {
        if let Err(e) = &c.scores {
            eprintln!("warning: model {} {} replication {}: {e}", c.model.index(), c.estimator, c.replication);
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct TableLine<'a> {
    model: u8,
    estimator: Method,
    metric: &'a str,
    mean: f64,
    sd: Option<f64>,
    count: usize,
    failures: usize,
}

fn write_table(path: &Path, rows: &[eagl_core::apps::benchmark::TableRow]) -> Result<()> {
    let lines: Vec<TableLine<'_>> = rows
        .iter()
        .map(|r| TableLine {
            model: r.model.index(),
            estimator: r.estimator,
            metric: &r.metric,
            mean: r.mean,
            sd: r.sd,
            count: r.count,
            failures: r.failures,
        })
        .collect();
    write_records(path, &lines)
}

fn trajectories(a: TrajectoryArgs) -> Result<()> {
    let mut cfg = TrajectoryConfig::new(a.p, a.n, a.gamma_grid.0, a.seed);
    cfg.alpha = a.alpha;
    write_records(&a.out, &eigen_trajectories(&cfg)?)
}

fn classify(a: ClassifyArgs) -> Result<()> {
    let x1 = read_matrix(&a.group1, a.header)?;
    let x2 = read_matrix(&a.group2, a.header)?;
    let (n1, n2) = (x1.rows(), x2.rows());
    let train1 = (a.train_size as f64 * n1 as f64 / (n1 + n2) as f64).round() as usize;
    let experiment = LdaExperiment {
        train1,
        train2: a.train_size.saturating_sub(train1),
        features: a.genes,
        template: template(a.estimator, a.alpha),
        plan: a.tuning.plan(a.criterion),
        replications: a.reps,
        seed: a.seed,
    };
    let report = parallel::classify(&experiment, &x1, &x2)?;
    write_json(a.out.as_deref(), &report)
}

#[derive(Serialize)]
struct ReturnLine {
    t: usize,
    realized: f64,
    gamma: Option<f64>,
}

fn backtest(a: BacktestArgs) -> Result<()> {
    let r = read_matrix(&a.returns, a.header)?;
    let mut cfg = BacktestConfig::new(a.window, template(a.estimator, a.alpha));
    cfg.plan = a.tuning.plan(a.criterion);
    cfg.retune_every = a.retune_every;
    cfg.seed = a.seed;
    let report = parallel::backtest(&r, &cfg)?;
    if let Some(path) = &a.returns_out {
        let lines: Vec<ReturnLine> = report
            .out_of_sample_returns
            .iter()
            .zip(&report.gammas)
            .enumerate()
            .map(|(k, (v, g))| ReturnLine { t: a.window + k, realized: *v, gamma: *g })
            .collect();
        write_records(path, &lines)?;
    }
    write_json(a.out.as_deref(), &report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_from_range() {
        let g = parse_grid("0.1:2:0.1").unwrap().0;
        assert_eq!(g.len(), 20);
        assert_eq!(g[2], 0.3);
        assert_eq!(g[19], 2.0);
        assert_eq!(parse_grid("0.5,1").unwrap().0, vec![0.5, 1.0]);
        assert!(parse_grid("1:0:0.1").is_err());
        assert!(parse_grid("0:1:0.5").is_err());
    }

    #[test]
    fn parses_models_and_rules() {
        assert_eq!(parse_model("3").unwrap(), ModelId::M3);
        assert_eq!(parse_model("M7").unwrap(), ModelId::M7);
        assert!(parse_model("8").is_err());
        assert_eq!(parse_sparsify("pcor:0.05").unwrap(), SparsifyRule::PartialCorrAbsolute(0.05));
        assert!(parse_sparsify("pcor").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
