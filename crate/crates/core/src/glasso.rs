//! Graphical lasso:
//!
//! ```text
//! minimise  -log det(Omega) + tr(Omega S) + gamma * ||Omega||_1
//! ```
//!
//! Two solvers are provided. The default is a proximal Newton method: each
//! outer step builds the second-order model of the smooth part at the
//! current `Omega`, minimises model plus penalty over the free set (entries
//! that are nonzero or whose gradient exceeds the penalty), and takes the
//! largest step in `1, 1/2, 1/4, ...` that keeps `Omega` positive definite
//! and gives sufficient decrease. The model is minimised by coordinate
//! descent; when most entries are free (small penalties) this is
//! interleaved with solves of the model with every sign held fixed, which
//! is a linear system handled directly or by preconditioned conjugate
//! gradients. The model is solved to a fraction of the current KKT residual,
//! so the outer steps converge quickly and only a handful are needed per
//! penalty along a warm-started path.
//!
//! The alternative is primal block coordinate descent. Each outer sweep
//! visits every column `j`, holds the rest of `Omega` fixed and minimises the objective
//! exactly over `(omega_12, omega_22)`. Writing
//! `theta = omega_22 - omega_12^T A omega_12` with `A = Omega_11^{-1}`, the
//! block objective separates into `-log theta + c theta` (so
//! `theta = 1 / c`, `c = s_22 + gamma`) and a lasso in `omega_12` with Gram
//! matrix `c A`, solved by cyclic coordinate descent from the current column.
//! Every block step is a descent step, so the objective is nonincreasing and
//! `Omega` stays positive definite throughout. `W = Omega^{-1}` is kept in
//! sync with rank-one updates and refreshed by Cholesky after each sweep.
//!
//! The solve is certified by the KKT conditions of the objective, computed
//! against the exact inverse of the returned `Omega`.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::math;
use crate::matrix::{cholesky, dot, invert_pd, SymMatrix};

pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_ITER: usize = 1000;
/// Coordinate-descent sweeps allowed per column subproblem.
pub const INNER_MAX_SWEEPS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GlassoAlgorithm {
    #[default]
    Newton,
    BlockCoordinate,
}

#[derive(Debug, Clone)]
pub struct GlassoProblem<'a> {
    pub s: &'a SymMatrix,
    pub gamma: f64,
    pub penalize_diagonal: bool,
    pub tol: f64,
    pub max_iter: usize,
    pub algorithm: GlassoAlgorithm,
}

impl<'a> GlassoProblem<'a> {
    pub fn new(s: &'a SymMatrix, gamma: f64) -> Self {
        Self {
            s,
            gamma,
            penalize_diagonal: true,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            algorithm: GlassoAlgorithm::default(),
        }
    }

    pub fn algorithm(mut self, algorithm: GlassoAlgorithm) -> Self {
        self.algorithm = algorithm;
        self
    }

    pub fn penalize_diagonal(mut self, yes: bool) -> Self {
        self.penalize_diagonal = yes;
        self
    }

    pub fn tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    /// KKT tolerance used for the convergence certificate.
    pub fn kkt_tol(&self) -> f64 {
        1e-4 * f64::max(self.gamma, 1.0)
    }

    fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(invalid("gamma must be finite and nonnegative"));
        }
        if !(self.tol > 0.0) {
            return Err(invalid("tol must be positive"));
        }
        if self.max_iter == 0 {
            return Err(invalid("max_iter must be positive"));
        }
        self.s.check_finite()
    }
}

/// Result of a penalised likelihood solve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub omega: SymMatrix,
    /// `Omega^{-1}` as maintained by the solver.
    pub sigma: SymMatrix,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub kkt_residual: f64,
    /// Objective after each outer iteration.
    pub objective_trace: Vec<f64>,
}

/// Objective value `-log det(Omega) + tr(Omega S) + gamma ||Omega||_1`.
pub fn glasso_objective(s: &SymMatrix, omega: &SymMatrix, gamma: f64, penalize_diagonal: bool) -> Result<f64> {
    let logdet = cholesky(omega)?.log_det();
    Ok(-logdet + omega.trace_product(s)? + gamma * omega.l1_elementwise(penalize_diagonal))
}

/// Largest violation of the stationarity / subgradient conditions, with `w`
/// the inverse of `omega`.
pub fn kkt_residual(s: &SymMatrix, omega: &SymMatrix, w: &SymMatrix, gamma: f64, penalize_diagonal: bool) -> f64 {
    let p = s.dim();
    let mut worst: f64 = 0.0;
    for i in 0..p {
        for j in i..p {
            let g = s.get(i, j) - w.get(i, j);
            let v = if i == j {
                if penalize_diagonal {
                    math::abs(g + gamma * math::signum(omega.get(i, i)))
                } else {
                    math::abs(g)
                }
            } else if omega.get(i, j) == 0.0 {
                f64::max(0.0, math::abs(g) - gamma)
            } else {
                math::abs(g + gamma * math::signum(omega.get(i, j)))
            };
            worst = worst.max(v);
        }
    }
    worst
}

/// Solves the graphical lasso, optionally warm-started from an earlier
/// solution of the same dimension.
///
/// Hitting `max_iter` is not an error: the last iterate is returned with
/// `converged == false`. With `gamma == 0` the unpenalised MLE `S^{-1}` is
/// returned, which requires `S` positive definite.
pub fn solve_glasso(problem: &GlassoProblem<'_>, warm_start: Option<&SolveReport>) -> Result<SolveReport> {
    problem.validate()?;
    let s = problem.s;
    let p = s.dim();
    let gamma = problem.gamma;
    let diag_pen = if problem.penalize_diagonal { gamma } else { 0.0 };

    if gamma == 0.0 {
        let omega = invert_pd(s)?;
        let objective = glasso_objective(s, &omega, 0.0, problem.penalize_diagonal)?;
        return Ok(SolveReport {
            omega,
            sigma: s.clone(),
            objective,
            iterations: 0,
            converged: true,
            kkt_residual: 0.0,
            objective_trace: vec![objective],
        });
    }

    for i in 0..p {
        if !(s.get(i, i) + diag_pen > 0.0) {
            return Err(invalid("diagonal of S plus penalty must be positive"));
        }
    }

    let omega = match warm_start {
        Some(w) if w.omega.dim() == p && w.omega.is_positive_definite() => w.omega.clone(),
        _ => SymMatrix::from_diag(&s.diag().iter().map(|d| 1.0 / (d + diag_pen)).collect::<Vec<_>>()),
    };

    let s_scale = s.mean_abs_offdiag();
    let scale = if s_scale > 0.0 { s_scale } else { 1.0 };
    let stop = Stopping {
        outer_tol: problem.tol * scale,
        inner_tol: problem.tol / 10.0 * scale,
        // The W-change test alone can stop with KKT residuals near 1e-5;
        // also requiring them below `tol / 10` (relative to max(gamma, 1))
        // keeps warm- and cold-started solves within 1e-6 of each other.
        kkt_tol: problem.kkt_tol().min(0.1 * problem.tol * f64::max(gamma, 1.0)),
    };
    match problem.algorithm {
        GlassoAlgorithm::Newton => newton(problem, omega, &stop),
        GlassoAlgorithm::BlockCoordinate => block_coordinate(problem, omega, &stop),
    }
}

struct Stopping {
    outer_tol: f64,
    inner_tol: f64,
    kkt_tol: f64,
}

fn penalty(problem: &GlassoProblem<'_>, omega: &SymMatrix) -> f64 {
    problem.gamma * omega.l1_elementwise(problem.penalize_diagonal)
}

fn block_coordinate(problem: &GlassoProblem<'_>, mut omega: SymMatrix, stop: &Stopping) -> Result<SolveReport> {
    let s = problem.s;
    let p = s.dim();
    let gamma = problem.gamma;
    let diag_pen = if problem.penalize_diagonal { gamma } else { 0.0 };
    let mut solver = Workspace::new(p);
    let chol = cholesky(&omega)?;
    let mut w = chol.inverse();
    let mut objective = -chol.log_det() + omega.trace_product(s)? + penalty(problem, &omega);
    let mut trace = vec![objective];

    let mut converged = false;
    let mut iterations = 0;
    let mut kkt = f64::INFINITY;
    while iterations < problem.max_iter {
        iterations += 1;
        let w_before = w.clone();
        for j in 0..p {
            solver.update_column(s, &mut omega, &mut w, j, gamma, diag_pen, stop.inner_tol);
        }
        let chol = cholesky(&omega)?;
        w = chol.inverse();
        objective = -chol.log_det() + omega.trace_product(s)? + penalty(problem, &omega);
        trace.push(objective);

        let change = mean_abs_offdiag_diff(&w, &w_before);
        if change < stop.outer_tol {
            kkt = kkt_residual(s, &omega, &w, gamma, problem.penalize_diagonal);
            if kkt <= stop.kkt_tol {
                converged = true;
                break;
            }
        }
    }
    if !converged {
        kkt = kkt_residual(s, &omega, &w, gamma, problem.penalize_diagonal);
    }
    Ok(SolveReport { omega, sigma: w, objective, iterations, converged, kkt_residual: kkt, objective_trace: trace })
}

/// Armijo constant and step-halving budget of the Newton line search.
const ARMIJO: f64 = 1e-3;
const MAX_HALVINGS: usize = 40;
/// Decreases below this many ulps of the objective are treated as rounding.
const ROUNDING_SLACK: f64 = 64.0;
/// The model is solved to this fraction of the current KKT residual.
const INNER_FRACTION: f64 = 0.1;
const PCG_MAX_ITER: usize = 200;
/// Fixed-sign solves per model, with coordinate sweeps in between.
const SIGN_ROUNDS: usize = 16;
const SWEEPS_PER_ROUND: usize = 5;
/// Halvings of a fixed-sign step before it is abandoned.
const SIGN_BACKTRACKS: usize = 8;
/// Held-at-zero entries per row up to which the direct solve is used.
const EXACT_HELD_PER_ROW: usize = 6;

fn newton(problem: &GlassoProblem<'_>, mut omega: SymMatrix, stop: &Stopping) -> Result<SolveReport> {
    let s = problem.s;
    let p = s.dim();
    let gamma = problem.gamma;
    let pen = |i: usize, j: usize| if i != j || problem.penalize_diagonal { gamma } else { 0.0 };

    let chol = cholesky(&omega)?;
    let mut w = chol.inverse();
    let mut objective = -chol.log_det() + omega.trace_product(s)? + penalty(problem, &omega);
    let mut trace = vec![objective];

    let mut d = vec![0.0; p * p];
    // U = D W, row-major.
    let mut u = vec![0.0; p * p];
    let mut free: Vec<(usize, usize)> = Vec::new();
    let mut buffers = SignFixedBuffers::new(p);

    let mut converged = false;
    let mut iterations = 0;
    let mut kkt = kkt_residual(s, &omega, &w, gamma, problem.penalize_diagonal);
    while iterations < problem.max_iter {
        iterations += 1;
        free.clear();
        for i in 0..p {
            for j in i..p {
                let g = s.get(i, j) - w.get(i, j);
                if i == j || omega.get(i, j) != 0.0 || math::abs(g) > pen(i, j) {
                    free.push((i, j));
                }
            }
        }
        d.iter_mut().for_each(|v| *v = 0.0);
        u.iter_mut().for_each(|v| *v = 0.0);
        let model_tol = f64::max(stop.inner_tol, INNER_FRACTION * kkt);

        // Minimise the quadratic model
        // tr((S - W) D) + tr(W D W D) / 2 + pen(Omega + D)
        // over the free set.
        let dense = free.len() > p * (p + 1) / 4;
        let mut sweeps = 0;
        let mut rounds = 0;
        'model: loop {
            if dense && rounds == SIGN_ROUNDS {
                // Inexact but descending; the line search and the next
                // outer iteration take it from here.
                break;
            }
            let block = if dense {
                rounds += 1;
                sign_fixed_step(problem, &omega, &w, &free, model_tol, &mut buffers, &mut d);
                mat_mul(&d, w.as_slice(), &mut u, p);
                SWEEPS_PER_ROUND
            } else {
                INNER_MAX_SWEEPS
            };
            for _ in 0..block {
                sweeps += 1;
                if cd_sweep(problem, &omega, &w, &free, &mut d, &mut u) <= model_tol || sweeps >= INNER_MAX_SWEEPS {
                    break 'model;
                }
            }
        }

        // Directional decrease of the composite objective, summed per entry
        // so that tiny steps do not cancel against the full penalty.
        let mut decrease = 0.0;
        for i in 0..p {
            for j in 0..p {
                let dij = d[i * p + j];
                if dij != 0.0 {
                    let o = omega.get(i, j);
                    decrease += (s.get(i, j) - w.get(i, j)) * dij + pen(i, j) * (math::abs(o + dij) - math::abs(o));
                }
            }
        }
        // Below this size the predicted decrease cannot be resolved in the
        // objective value, so any positive definite step within rounding of
        // the current value is accepted.
        let floor = ROUNDING_SLACK * f64::EPSILON * f64::max(math::abs(objective), 1.0);
        let negligible = math::abs(decrease) <= floor;
        if d.iter().all(|v| *v == 0.0) || !(decrease < 0.0 || negligible) {
            // No descent direction left at working precision.
            kkt = kkt_residual(s, &omega, &w, gamma, problem.penalize_diagonal);
            converged = kkt <= stop.kkt_tol;
            break;
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let trial = SymMatrix::from_upper_fn(p, |i, j| omega.get(i, j) + step * d[i * p + j]);
            if let Ok(ch) = cholesky(&trial) {
                let f = -ch.log_det() + trial.trace_product(s)? + penalty(problem, &trial);
                if f <= objective + ARMIJO * step * decrease || (negligible && f <= objective + floor) {
                    accepted = Some((trial, ch, f));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((next, ch, f)) = accepted else {
            kkt = kkt_residual(s, &omega, &w, gamma, problem.penalize_diagonal);
            converged = kkt <= stop.kkt_tol;
            break;
        };
        let w_next = ch.inverse();
        let change = mean_abs_offdiag_diff(&w_next, &w);
        omega = next;
        w = w_next;
        objective = f;
        trace.push(objective);
        kkt = kkt_residual(s, &omega, &w, gamma, problem.penalize_diagonal);

        if change < stop.outer_tol && kkt <= stop.kkt_tol {
            converged = true;
            break;
        }
    }
    if !converged {
        kkt = kkt_residual(s, &omega, &w, gamma, problem.penalize_diagonal);
    }
    Ok(SolveReport { omega, sigma: w, objective, iterations, converged, kkt_residual: kkt, objective_trace: trace })
}

/// One coordinate-descent pass over the free set of the Newton model,
/// keeping `u = D W` in sync; returns the largest move in gradient units.
fn cd_sweep(
    problem: &GlassoProblem<'_>,
    omega: &SymMatrix,
    w: &SymMatrix,
    free: &[(usize, usize)],
    d: &mut [f64],
    u: &mut [f64],
) -> f64 {
    let s = problem.s;
    let p = s.dim();
    let mut max_move: f64 = 0.0;
    for &(i, j) in free {
        let pen = if i != j || problem.penalize_diagonal { problem.gamma } else { 0.0 };
        let wi = w.row(i);
        let wj = w.row(j);
        let wdw = strided_dot(wi, &u[j..], p);
        let wij = wi[j];
        let (a, b) = if i == j {
            (wij * wij, s.get(i, i) - wij + wdw)
        } else {
            (wij * wij + wi[i] * wj[j], s.get(i, j) - wij + wdw)
        };
        let c = omega.get(i, j) + d[i * p + j];
        let mu = -c + math::soft_threshold(c - b / a, pen / a);
        if mu == 0.0 {
            continue;
        }
        max_move = max_move.max(math::abs(mu) * a);
        d[i * p + j] += mu;
        axpy(mu, wj, &mut u[i * p..(i + 1) * p]);
        if i != j {
            d[j * p + i] += mu;
            axpy(mu, wi, &mut u[j * p..(j + 1) * p]);
        }
    }
    max_move
}

struct SignFixedBuffers {
    mask: Vec<bool>,
    sign: Vec<f64>,
    start: Vec<f64>,
    r: Vec<f64>,
    z: Vec<f64>,
    dir: Vec<f64>,
    q: Vec<f64>,
    tmp: Vec<f64>,
}

impl SignFixedBuffers {
    fn new(p: usize) -> Self {
        let z = vec![0.0; p * p];
        Self { mask: vec![false; p * p], sign: z.clone(), start: z.clone(), r: z.clone(), dir: z.clone(), q: z.clone(), tmp: z.clone(), z }
    }
}

/// Refines the Newton direction `d` with the sign of every entry held
/// fixed: the model is then a quadratic on its support,
/// `P(W D W) = -P(G + pen * sign)`, solved by conjugate gradients from the
/// current `d`, preconditioned with `R -> P(Omega R Omega)` (the exact
/// inverse when every entry is in the support). The coordinate descent that
/// follows restores the nonsmooth conditions.
fn sign_fixed_step(
    problem: &GlassoProblem<'_>,
    omega: &SymMatrix,
    w: &SymMatrix,
    free: &[(usize, usize)],
    tol: f64,
    buf: &mut SignFixedBuffers,
    d: &mut [f64],
) {
    let s = problem.s;
    let p = s.dim();
    let SignFixedBuffers { mask, sign: signs, start, r, z, dir, q, tmp } = buf;
    sandwich(w.as_slice(), d, tmp, q, p);
    start.copy_from_slice(d);
    let before = model_value(problem, omega, w, d, q);
    mask.iter_mut().for_each(|m| *m = false);
    r.iter_mut().for_each(|v| *v = 0.0);
    for &(i, j) in free {
        let k = i * p + j;
        let pen = if i != j || problem.penalize_diagonal { problem.gamma } else { 0.0 };
        let g = s.get(i, j) - w.get(i, j) + q[k];
        let x = omega.get(i, j) + d[k];
        let sign = if x != 0.0 {
            math::signum(x)
        } else if math::abs(g) > pen {
            -math::signum(g)
        } else {
            continue;
        };
        let res = -(g + pen * sign);
        mask[k] = true;
        mask[j * p + i] = true;
        signs[k] = sign;
        signs[j * p + i] = sign;
        r[k] = res;
        r[j * p + i] = res;
    }
    if !exact_correction(omega, mask, r, d, tmp, z) {
        pcg(omega, w, mask, tol, r, z, dir, q, tmp, d);
    }
    // Entries that crossed zero are clipped to it; the step towards the
    // clipped point is halved until the model improves.
    let mut t = 1.0;
    for _ in 0..SIGN_BACKTRACKS {
        for k in 0..p * p {
            let x = start[k] + t * (d[k] - start[k]);
            let o = omega.as_slice()[k];
            z[k] = if mask[k] && k % (p + 1) != 0 && (o + x) * signs[k] < 0.0 { -o } else { x };
        }
        sandwich(w.as_slice(), z, tmp, q, p);
        if model_value(problem, omega, w, z, q) < before {
            d.copy_from_slice(z);
            return;
        }
        t *= 0.5;
    }
    d.copy_from_slice(start);
}

/// Preconditioned conjugate gradients for `P(W X W) = r` on the mask,
/// accumulating the solution into `d`.
#[allow(clippy::too_many_arguments)]
fn pcg(
    omega: &SymMatrix,
    w: &SymMatrix,
    mask: &[bool],
    tol: f64,
    r: &mut [f64],
    z: &mut [f64],
    dir: &mut [f64],
    q: &mut [f64],
    tmp: &mut [f64],
    d: &mut [f64],
) {
    let p = omega.dim();
    sandwich(omega.as_slice(), r, tmp, z, p);
    project(z, mask);
    dir.copy_from_slice(z);
    let mut rz = dot(r, z);
    for _ in 0..PCG_MAX_ITER {
        if r.iter().fold(0.0f64, |m, v| m.max(math::abs(*v))) <= tol || !(rz > 0.0) {
            break;
        }
        sandwich(w.as_slice(), dir, tmp, q, p);
        project(q, mask);
        let curv = dot(dir, q);
        if !(curv > 0.0) {
            break;
        }
        let step = rz / curv;
        for k in 0..p * p {
            d[k] += step * dir[k];
            r[k] -= step * q[k];
        }
        sandwich(omega.as_slice(), r, tmp, z, p);
        project(z, mask);
        let rz_next = dot(r, z);
        let beta = rz_next / rz;
        rz = rz_next;
        for k in 0..p * p {
            dir[k] = z[k] + beta * dir[k];
        }
    }
}

/// Solves `P(W X W) = r` on the mask directly when few off-diagonal entries
/// are held at zero. With `L` a multiplier on the held set `E`,
/// `X = Omega (r + L) Omega` and `X_E = 0` is a small positive definite
/// system in `L`. Returns `false` (leaving `d` untouched) when the held set
/// is too large for this to pay off.
fn exact_correction(omega: &SymMatrix, mask: &[bool], r: &[f64], d: &mut [f64], tmp: &mut [f64], z: &mut [f64]) -> bool {
    let p = omega.dim();
    let held: Vec<(usize, usize)> =
        (0..p).flat_map(|i| ((i + 1)..p).map(move |j| (i, j))).filter(|&(i, j)| !mask[i * p + j]).collect();
    if held.len() > EXACT_HELD_PER_ROW * p {
        return false;
    }
    let o = |i: usize, j: usize| omega.get(i, j);
    sandwich(omega.as_slice(), r, tmp, z, p);
    if !held.is_empty() {
        let m = SymMatrix::from_upper_fn(held.len(), |a, b| {
            let ((i, j), (k, l)) = (held[a], held[b]);
            o(i, k) * o(j, l) + o(i, l) * o(j, k)
        });
        let Ok(ch) = cholesky(&m) else {
            return false;
        };
        let rhs: Vec<f64> = held.iter().map(|&(i, j)| -z[i * p + j]).collect();
        let lambda = ch.solve(&rhs);
        let mut shifted = r.to_vec();
        for (&(i, j), l) in held.iter().zip(&lambda) {
            shifted[i * p + j] += l;
            shifted[j * p + i] += l;
        }
        sandwich(omega.as_slice(), &shifted, tmp, z, p);
    }
    project(z, mask);
    for (dv, zv) in d.iter_mut().zip(z.iter()) {
        *dv += zv;
    }
    true
}

fn project(m: &mut [f64], mask: &[bool]) {
    m.iter_mut().zip(mask).for_each(|(v, k)| {
        if !k {
            *v = 0.0
        }
    });
}

/// Value of the Newton model at `d`, given `wdw = W d W`, relative to `d = 0`.
fn model_value(problem: &GlassoProblem<'_>, omega: &SymMatrix, w: &SymMatrix, d: &[f64], wdw: &[f64]) -> f64 {
    let s = problem.s;
    let p = s.dim();
    let mut v = 0.0;
    for i in 0..p {
        for j in 0..p {
            let k = i * p + j;
            if d[k] == 0.0 {
                continue;
            }
            let pen = if i != j || problem.penalize_diagonal { problem.gamma } else { 0.0 };
            let o = omega.get(i, j);
            v += (s.get(i, j) - w.get(i, j) + 0.5 * wdw[k]) * d[k] + pen * (math::abs(o + d[k]) - math::abs(o));
        }
    }
    v
}

/// `out = a b` for row-major `p x p` matrices.
fn mat_mul(a: &[f64], b: &[f64], out: &mut [f64], p: usize) {
    for i in 0..p {
        combine_rows(&a[i * p..(i + 1) * p], b, 0, &mut out[i * p..(i + 1) * p], p);
    }
}

/// `out = m x m` for symmetric `m` and `x`; only the upper triangle of the
/// second product is formed.
fn sandwich(m: &[f64], x: &[f64], tmp: &mut [f64], out: &mut [f64], p: usize) {
    mat_mul(x, m, tmp, p);
    for i in 0..p {
        combine_rows(&m[i * p..(i + 1) * p], tmp, i, &mut out[i * p + i..(i + 1) * p], p);
    }
    for i in 0..p {
        for j in 0..i {
            out[i * p + j] = out[j * p + i];
        }
    }
}

/// `out = sum_k coef[k] * b[k, from..]`, four rows of `b` at a time.
fn combine_rows(coef: &[f64], b: &[f64], from: usize, out: &mut [f64], p: usize) {
    out.iter_mut().for_each(|v| *v = 0.0);
    let row = |k: usize| &b[k * p + from..(k + 1) * p];
    let mut k = 0;
    while k + 4 <= p {
        let (c0, c1, c2, c3) = (coef[k], coef[k + 1], coef[k + 2], coef[k + 3]);
        for ((((o, x0), x1), x2), x3) in out.iter_mut().zip(row(k)).zip(row(k + 1)).zip(row(k + 2)).zip(row(k + 3)) {
            *o += c0 * x0 + c1 * x1 + c2 * x2 + c3 * x3;
        }
        k += 4;
    }
    for k in k..p {
        axpy(coef[k], row(k), out);
    }
}

/// `sum_k x[k] * y[k * stride]`, with four independent partial sums.
fn strided_dot(x: &[f64], y: &[f64], stride: usize) -> f64 {
    let mut acc = [0.0; 4];
    let mut k = 0;
    while k + 4 <= x.len() {
        for t in 0..4 {
            acc[t] += x[k + t] * y[(k + t) * stride];
        }
        k += 4;
    }
    let tail: f64 = (k..x.len()).map(|k| x[k] * y[k * stride]).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yv, xv) in y.iter_mut().zip(x) {
        *yv += a * xv;
    }
}

fn mean_abs_offdiag_diff(a: &SymMatrix, b: &SymMatrix) -> f64 {
    let p = a.dim();
    if p < 2 {
        return 0.0;
    }
    let mut sum = 0.0;
    for i in 0..p {
        for j in (i + 1)..p {
            sum += math::abs(a.get(i, j) - b.get(i, j));
        }
    }
    sum / (p * (p - 1) / 2) as f64
}

/// Scratch buffers reused across column updates.
struct Workspace {
    p: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    r: Vec<f64>,
    wcol: Vec<f64>,
}

impl Workspace {
    fn new(p: usize) -> Self {
        Self { p, a: vec![0.0; p * p], b: vec![0.0; p], r: vec![0.0; p], wcol: vec![0.0; p] }
    }

    #[allow(clippy::too_many_arguments)]
    fn update_column(
        &mut self,
        s: &SymMatrix,
        omega: &mut SymMatrix,
        w: &mut SymMatrix,
        j: usize,
        gamma: f64,
        diag_pen: f64,
        inner_tol: f64,
    ) {
        let p = self.p;
        let wjj = w.get(j, j);
        for k in 0..p {
            self.wcol[k] = w.get(k, j);
        }
        // A = Omega_11^{-1} = W_11 - w_12 w_12^T / w_22, indexed in the full
        // p-space with row/column j unused.
        for k in 0..p {
            if k == j {
                continue;
            }
            let wk = self.wcol[k] / wjj;
            let wrow = w.row(k);
            let arow = &mut self.a[k * p..(k + 1) * p];
            for l in 0..p {
                arow[l] = wrow[l] - wk * self.wcol[l];
            }
        }
        let c = s.get(j, j) + diag_pen;

        for k in 0..p {
            self.b[k] = if k == j { 0.0 } else { omega.get(k, j) };
        }
        for k in 0..p {
            self.r[k] = if k == j {
                0.0
            } else {
                let arow = &self.a[k * p..(k + 1) * p];
                (0..p).filter(|&l| l != j).map(|l| arow[l] * self.b[l]).sum()
            };
        }

        let mut sweeps = 0;
        loop {
            let delta = self.cd_sweep(s, j, c, gamma, false);
            sweeps += 1;
            if delta <= inner_tol || sweeps >= INNER_MAX_SWEEPS {
                break;
            }
            loop {
                let delta = self.cd_sweep(s, j, c, gamma, true);
                sweeps += 1;
                if delta <= inner_tol || sweeps >= INNER_MAX_SWEEPS {
                    break;
                }
            }
        }

        let theta = 1.0 / c;
        let quad: f64 = (0..p).filter(|&k| k != j).map(|k| self.b[k] * self.r[k]).sum();
        omega.set(j, j, theta + quad);
        for k in 0..p {
            if k != j {
                omega.set(k, j, self.b[k]);
            }
        }
        // W_22 = 1/theta, w_12 = -A b / theta, W_11 = A + (A b)(A b)^T / theta.
        w.set(j, j, c);
        for k in 0..p {
            if k == j {
                continue;
            }
            w.set(k, j, -c * self.r[k]);
            let rk = c * self.r[k];
            for l in k..p {
                if l == j {
                    continue;
                }
                w.set(k, l, self.a[k * p + l] + rk * self.r[l]);
            }
        }
    }

    /// One coordinate-descent pass over the column lasso
    /// `min (c/2) b^T A b + s^T b + gamma ||b||_1`; returns the largest
    /// coordinate move in gradient units.
    fn cd_sweep(&mut self, s: &SymMatrix, j: usize, c: f64, gamma: f64, active_only: bool) -> f64 {
        let p = self.p;
        let mut max_delta: f64 = 0.0;
        for k in 0..p {
            if k == j || (active_only && self.b[k] == 0.0) {
                continue;
            }
            let akk = self.a[k * p + k];
            let old = self.b[k];
            let z = s.get(k, j) + c * (self.r[k] - akk * old);
            let new = -math::soft_threshold(z, gamma) / (c * akk);
            let diff = new - old;
            if diff != 0.0 {
                self.b[k] = new;
                let acol = &self.a[k * p..(k + 1) * p];
                for (rl, al) in self.r.iter_mut().zip(acol) {
                    *rl += al * diff;
                }
                max_delta = max_delta.max(math::abs(diff) * c * akk);
            }
        }
        max_delta
    }
}

impl SolveReport {
    pub fn omega_is_pd(&self) -> bool {
        self.omega.is_positive_definite()
    }
}

/// `Error` for callers that want a hard failure on non-convergence.
pub fn require_converged(report: SolveReport) -> Result<SolveReport> {
    if report.converged {
        Ok(report)
    } else {
        Err(Error::NoConvergence { residual: report.kkt_residual })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::sample_covariance;
    use crate::rng::{rng_from_seed, standard_normal};
    use crate::Matrix;

    fn random_cov(p: usize, n: usize, seed: u64) -> SymMatrix {
        let mut rng = rng_from_seed(seed);
        let x = Matrix::from_fn(n, p, |_, _| standard_normal(&mut rng));
        sample_covariance(&x).unwrap()
    }

    #[test]
    fn large_gamma_gives_diagonal() {
        let s = random_cov(6, 40, 1);
        let gamma = s.max_abs_offdiag() * 1.01;
        let rep = solve_glasso(&GlassoProblem::new(&s, gamma), None).unwrap();
        assert!(rep.converged);
        for i in 0..6 {
            for j in 0..6 {
                let want = if i == j { 1.0 / (s.get(i, i) + gamma) } else { 0.0 };
                assert!((rep.omega.get(i, j) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_gamma_is_inverse() {
        let s = SymMatrix::from_diag(&[2.0, 4.0]);
        let rep = solve_glasso(&GlassoProblem::new(&s, 0.0), None).unwrap();
        assert!(rep.omega.sub(&SymMatrix::from_diag(&[0.5, 0.25])).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn zero_gamma_singular_fails() {
        let s = SymMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let err = solve_glasso(&GlassoProblem::new(&s, 0.0), None).unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite { .. }));
    }

    #[test]
    fn two_by_two_soft_threshold() {
        let s = SymMatrix::from_rows(&[vec![1.0, 0.6], vec![0.6, 1.0]]).unwrap();
        let rep = solve_glasso(&GlassoProblem::new(&s, 0.2), None).unwrap();
        let w = SymMatrix::from_rows(&[vec![1.2, 0.4], vec![0.4, 1.2]]).unwrap();
        assert!(rep.sigma.sub(&w).unwrap().max_abs() < 1e-5);
        let want = invert_pd(&w).unwrap();
        assert!(rep.omega.sub(&want).unwrap().max_abs() < 1e-5);
    }

    #[test]
    fn unpenalized_diagonal_kkt() {
        let s = random_cov(8, 30, 5);
        let rep = solve_glasso(&GlassoProblem::new(&s, 0.1).penalize_diagonal(false), None).unwrap();
        assert!(rep.converged);
        for i in 0..8 {
            assert!((rep.sigma.get(i, i) - s.get(i, i)).abs() < 1e-4);
        }
    }

    #[test]
    fn objective_monotone_and_kkt() {
        for seed in 0..5 {
            let s = random_cov(12, 10, seed);
            let rep = solve_glasso(&GlassoProblem::new(&s, 0.05), None).unwrap();
            assert!(rep.converged);
            assert!(rep.objective_trace.windows(2).all(|w| w[1] <= w[0] + 1e-10));
            assert!(rep.kkt_residual <= 1e-4);
        }
    }

    #[test]
    fn warm_start_matches_cold() {
        let s = random_cov(10, 20, 9);
        let a = solve_glasso(&GlassoProblem::new(&s, 0.2), None).unwrap();
        let cold = solve_glasso(&GlassoProblem::new(&s, 0.1), None).unwrap();
        let warm = solve_glasso(&GlassoProblem::new(&s, 0.1), Some(&a)).unwrap();
        assert!((cold.objective - warm.objective).abs() < 1e-8);
    }

    fn assert_algorithms_agree(s: &SymMatrix, gamma: f64) {
        let newton = solve_glasso(&GlassoProblem::new(s, gamma), None).unwrap();
        let bcd = solve_glasso(&GlassoProblem::new(s, gamma).algorithm(GlassoAlgorithm::BlockCoordinate), None).unwrap();
        assert!(newton.converged && bcd.converged);
        assert!(newton.kkt_residual <= 1e-4 && bcd.kkt_residual <= 1e-4);
        assert!(newton.objective_trace.windows(2).all(|w| w[1] <= w[0] + 1e-10));
        assert!(bcd.objective_trace.windows(2).all(|w| w[1] <= w[0] + 1e-10));
        let gap = (newton.objective - bcd.objective).abs();
        assert!(gap < 1e-6 * newton.objective.abs().max(1.0), "gamma {gamma}: gap {gap}");
    }

    #[test]
    fn algorithms_agree_sparse() {
        let s = random_cov(15, 40, 21);
        assert_algorithms_agree(&s, 0.3);
    }

    #[test]
    fn algorithms_agree_nearly_dense() {
        // Few zeros: fixed-sign steps use the direct solve.
        let s = random_cov(20, 200, 22);
        assert_algorithms_agree(&s, 0.005);
    }

    #[test]
    fn algorithms_agree_partly_dense() {
        // More zeros, most entries still free: the second penalty reaches CG.
        let s = random_cov(40, 60, 23);
        for gamma in [0.02, 0.05] {
            assert_algorithms_agree(&s, gamma);
        }
    }

    #[test]
    fn rejects_bad_input() {
        let s = SymMatrix::identity(2);
        assert!(solve_glasso(&GlassoProblem::new(&s, -1.0), None).is_err());
        assert!(solve_glasso(&GlassoProblem::new(&s, 0.1).tol(0.0), None).is_err());
    }
}


