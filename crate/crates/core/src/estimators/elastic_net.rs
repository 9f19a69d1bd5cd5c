//! Graphical elastic net, optionally targeted, by ADMM:
//!
//! ```text
//! minimise  -log det(Omega) + tr(Omega S)
//!           + l1 ||Z - T||_1 + l2 ||Z - T||_2^2    subject to Omega = Z
//! ```
//!
//! The `Omega` step is solved in the eigenbasis of `rho (Z - U) - S`; the
//! `Z` step is the elastic-net proximal map around `T`. `rho` is adapted by
//! residual balancing.

use alloc::vec::Vec;

use crate::eigen::sym_eigen;
use crate::error::{invalid, Result};
use crate::glasso::SolveReport;
use crate::math;
use crate::matrix::{cholesky, SymMatrix};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 20_000;

#[derive(Debug, Clone)]
pub struct ElasticNetProblem<'a> {
    pub s: &'a SymMatrix,
    pub l1_weight: f64,
    pub l2_weight: f64,
    pub target: Option<&'a SymMatrix>,
    pub penalize_diagonal: bool,
    pub tol: f64,
    pub max_iter: usize,
}

impl ElasticNetProblem<'_> {
    #[inline]
    fn t(&self, i: usize, j: usize) -> f64 {
        self.target.map_or(0.0, |t| t.get(i, j))
    }

    pub fn objective(&self, omega: &SymMatrix) -> Result<f64> {
        let logdet = cholesky(omega)?.log_det();
        let p = omega.dim();
        let (mut l1, mut l2) = (0.0, 0.0);
        for i in 0..p {
            for j in 0..p {
                let d = omega.get(i, j) - self.t(i, j);
                if i != j || self.penalize_diagonal {
                    l1 += math::abs(d);
                }
                l2 += d * d;
            }
        }
        Ok(-logdet + omega.trace_product(self.s)? + self.l1_weight * l1 + self.l2_weight * l2)
    }
}

pub fn solve_elastic_net(problem: &ElasticNetProblem<'_>, warm_start: Option<&SolveReport>) -> Result<SolveReport> {
    let s = problem.s;
    let p = s.dim();
    s.check_finite()?;
    if !(problem.l1_weight >= 0.0 && problem.l2_weight >= 0.0) {
        return Err(invalid("elastic-net weights must be nonnegative"));
    }
    if let Some(t) = problem.target {
        s.same_dim(t)?;
    }

    let mut z = match warm_start {
        Some(w) if w.omega.dim() == p => w.omega.clone(),
        _ => SymMatrix::from_diag(
            &s.diag().iter().map(|d| 1.0 / (d.max(0.0) + problem.l1_weight + 1e-3)).collect::<Vec<_>>(),
        ),
    };
    let mut u = SymMatrix::zeros(p);
    let mut omega = z.clone();
    let mut rho = 1.0;
    let mut converged = false;
    let mut iterations = 0;
    let mut trace = Vec::new();

    while iterations < problem.max_iter {
        iterations += 1;
        let m = z.sub(&u)?.scale(rho).sub(s)?;
        let ed = sym_eigen(&m)?;
        omega = ed.reconstruct_with(|l| {
            let root = math::sqrt(l * l + 4.0 * rho);
            if l >= 0.0 {
                (l + root) / (2.0 * rho)
            } else {
                2.0 / (root - l)
            }
        });

        let z_old = z;
        let thr = problem.l1_weight / rho;
        let shrink = 1.0 + 2.0 * problem.l2_weight / rho;
        z = SymMatrix::from_upper_fn(p, |i, j| {
            let t = problem.t(i, j);
            let y = omega.get(i, j) + u.get(i, j) - t;
            let y = if i != j || problem.penalize_diagonal { math::soft_threshold(y, thr) } else { y };
            y / shrink + t
        });
        let r = omega.sub(&z)?;
        u = u.add(&r)?;

        let primal = r.frobenius();
        let dual = rho * z.sub(&z_old)?.frobenius();
        let eps_pri = problem.tol * omega.frobenius().max(z.frobenius()).max(1.0);
        let eps_dual = problem.tol * (rho * u.frobenius()).max(1.0);
        if iterations % 10 == 0 {
            trace.push(problem.objective(&omega).unwrap_or(f64::NAN));
        }
        if primal <= eps_pri && dual <= eps_dual {
            converged = true;
            break;
        }
        if iterations % 10 == 0 {
            if primal > 10.0 * dual {
                rho *= 2.0;
                u = u.scale(0.5);
            } else if dual > 10.0 * primal {
                rho *= 0.5;
                u = u.scale(2.0);
            }
        }
    }

    // Z carries the exact zeros; fall back to the Omega iterate if rounding
    // pushed Z out of the PD cone.
    let estimate = if z.is_positive_definite() { z } else { omega };
    let chol = cholesky(&estimate)?;
    let objective = problem.objective(&estimate)?;
    trace.push(objective);
    Ok(SolveReport {
        sigma: chol.inverse(),
        omega: estimate,
        objective,
        iterations,
        converged,
        kkt_residual: f64::NAN,
        objective_trace: trace,
    })
}
