//! Proximal-gradient certifier for the convex penalised likelihood family
//!
//! ```text
//! F(Omega) = -a log det(Omega) + tr(Omega S)
//!            + l1 * ||Omega - T||_1 + l2 * ||Omega - T||_2^2
//! ```
//!
//! It shares nothing with the coordinate-descent and ADMM solvers beyond the
//! Cholesky factorisation, and exists to cross-check them. Steps use a
//! Barzilai-Borwein initial guess followed by backtracking on the usual
//! quadratic upper bound; any trial point outside the positive definite cone
//! is rejected.

use alloc::vec::Vec;

use crate::error::{invalid, Result};
use crate::glasso::SolveReport;
use crate::math;
use crate::matrix::{cholesky, SymMatrix};

#[derive(Debug, Clone)]
pub struct OracleProblem<'a> {
    pub s: &'a SymMatrix,
    pub l1_weight: f64,
    pub l2_weight: f64,
    pub logdet_scale: f64,
    pub shift_target: Option<&'a SymMatrix>,
    /// Whether the `l1` term covers the diagonal.
    pub penalize_diagonal: bool,
    pub tol: f64,
    pub max_iter: usize,
    pub initial: Option<&'a SymMatrix>,
}

impl<'a> OracleProblem<'a> {
    pub fn new(s: &'a SymMatrix) -> Self {
        Self {
            s,
            l1_weight: 0.0,
            l2_weight: 0.0,
            logdet_scale: 1.0,
            shift_target: None,
            penalize_diagonal: true,
            tol: 1e-10,
            max_iter: 200_000,
            initial: None,
        }
    }

    pub fn l1(mut self, w: f64) -> Self {
        self.l1_weight = w;
        self
    }

    pub fn l2(mut self, w: f64) -> Self {
        self.l2_weight = w;
        self
    }

    pub fn logdet_scale(mut self, a: f64) -> Self {
        self.logdet_scale = a;
        self
    }

    pub fn target(mut self, t: &'a SymMatrix) -> Self {
        self.shift_target = Some(t);
        self
    }

    pub fn penalize_diagonal(mut self, yes: bool) -> Self {
        self.penalize_diagonal = yes;
        self
    }

    /// Full objective `F` at `omega`; `None` outside the PD cone.
    pub fn objective(&self, omega: &SymMatrix) -> Option<f64> {
        let chol = cholesky(omega).ok()?;
        let smooth = -self.logdet_scale * chol.log_det() + omega.trace_product(self.s).ok()?;
        Some(smooth + self.penalty(omega))
    }

    fn penalty(&self, omega: &SymMatrix) -> f64 {
        let p = omega.dim();
        let mut l1 = 0.0;
        let mut l2 = 0.0;
        for i in 0..p {
            for j in 0..p {
                let d = omega.get(i, j) - self.target_at(i, j);
                if i != j || self.penalize_diagonal {
                    l1 += math::abs(d);
                }
                l2 += d * d;
            }
        }
        self.l1_weight * l1 + self.l2_weight * l2
    }

    #[inline]
    fn target_at(&self, i: usize, j: usize) -> f64 {
        self.shift_target.map_or(0.0, |t| t.get(i, j))
    }

    /// Proximal map of `step * (l1 ||. - T||_1 + l2 ||. - T||_2^2)`.
    fn prox(&self, y: &SymMatrix, step: f64) -> SymMatrix {
        let shrink = 1.0 + 2.0 * step * self.l2_weight;
        let thr = step * self.l1_weight;
        SymMatrix::from_upper_fn(y.dim(), |i, j| {
            let t = self.target_at(i, j);
            let d = y.get(i, j) - t;
            let d = if i != j || self.penalize_diagonal { math::soft_threshold(d, thr) } else { d };
            d / shrink + t
        })
    }
}

/// Minimises `F` by proximal gradient. Non-convergence is reported through
/// `converged == false`, not as an error.
pub fn proximal_oracle(problem: &OracleProblem<'_>) -> Result<SolveReport> {
    let s = problem.s;
    s.check_finite()?;
    if !(problem.l1_weight >= 0.0 && problem.l2_weight >= 0.0 && problem.logdet_scale > 0.0) {
        return Err(invalid("oracle weights must be nonnegative and logdet_scale positive"));
    }
    if let Some(t) = problem.shift_target {
        s.same_dim(t)?;
    }

    let mut omega = match problem.initial {
        Some(init) => init.clone(),
        None => SymMatrix::from_diag(
            &s.diag().iter().map(|d| 1.0 / (d + problem.l1_weight + 1.0)).collect::<Vec<_>>(),
        ),
    };
    let mut chol = cholesky(&omega)?;
    let mut inv = chol.inverse();
    let mut smooth = -problem.logdet_scale * chol.log_det() + omega.trace_product(s)?;
    let mut grad = s.sub(&inv.scale(problem.logdet_scale))?;
    let mut step = 1.0;
    let mut prev: Option<(SymMatrix, SymMatrix)> = None;
    let mut trace = alloc::vec![smooth + problem.penalty(&omega)];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < problem.max_iter {
        iterations += 1;
        if let Some((old_omega, old_grad)) = &prev {
            let ds = omega.sub(old_omega)?;
            let dg = grad.sub(old_grad)?;
            let num = ds.trace_product(&ds)?;
            let den = ds.trace_product(&dg)?;
            if den > 0.0 && num > 0.0 {
                step = (num / den).clamp(1e-12, 1e6);
            }
        }

        // Backtracking on the quadratic upper bound of the smooth part.
        let accepted = loop {
            let trial = problem.prox(&omega.sub(&grad.scale(step))?, step);
            if let Ok(tc) = cholesky(&trial) {
                let tsmooth = -problem.logdet_scale * tc.log_det() + trial.trace_product(s)?;
                let diff = trial.sub(&omega)?;
                let bound = smooth + grad.trace_product(&diff)? + diff.trace_product(&diff)? / (2.0 * step);
                if tsmooth <= bound + 1e-14 * math::abs(bound).max(1.0) {
                    break Some((trial, tc, tsmooth, diff));
                }
            }
            step *= 0.5;
            if step < 1e-20 {
                break None;
            }
        };
        let Some((trial, tc, tsmooth, diff)) = accepted else {
            break;
        };

        let move_size = diff.max_abs() / step;
        prev = Some((omega, grad));
        omega = trial;
        chol = tc;
        inv = chol.inverse();
        smooth = tsmooth;
        grad = s.sub(&inv.scale(problem.logdet_scale))?;
        trace.push(smooth + problem.penalty(&omega));

        if move_size <= problem.tol {
            converged = true;
            break;
        }
    }

    let objective = smooth + problem.penalty(&omega);
    Ok(SolveReport {
        omega,
        sigma: inv,
        objective,
        iterations,
        converged,
        kkt_residual: f64::NAN,
        objective_trace: trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glasso::{solve_glasso, GlassoProblem};
    use crate::matrix::{invert_pd, sample_covariance};
    use crate::rng::{rng_from_seed, standard_normal};
    use crate::Matrix;

    fn random_cov(p: usize, n: usize, seed: u64) -> SymMatrix {
        let mut rng = rng_from_seed(seed);
        let x = Matrix::from_fn(n, p, |_, _| standard_normal(&mut rng));
        sample_covariance(&x).unwrap()
    }

    #[test]
    fn unpenalized_recovers_inverse() {
        let s = random_cov(5, 30, 2);
        let rep = proximal_oracle(&OracleProblem::new(&s)).unwrap();
        assert!(rep.converged);
        let inv = invert_pd(&s).unwrap();
        assert!(rep.omega.sub(&inv).unwrap().max_abs() < 1e-6);
    }

    #[test]
    fn agrees_with_glasso() {
        for seed in 0..4 {
            let s = random_cov(5, 20, seed);
            let g = solve_glasso(&GlassoProblem::new(&s, 0.15), None).unwrap();
            let o = proximal_oracle(&OracleProblem::new(&s).l1(0.15)).unwrap();
            assert!(o.converged);
            assert!((g.objective - o.objective).abs() < 1e-5, "{} vs {}", g.objective, o.objective);
        }
    }

    #[test]
    fn objective_is_monotone() {
        let s = random_cov(6, 12, 4);
        let rep = proximal_oracle(&OracleProblem::new(&s).l1(0.1).l2(0.2)).unwrap();
        assert!(rep.objective_trace.windows(2).all(|w| w[1] <= w[0] + 1e-10));
    }
}
