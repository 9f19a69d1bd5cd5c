//! Estimation losses, edge-recovery scores, partial correlations and
//! Gaussian entropy.

use serde::{Deserialize, Serialize};

use crate::eigen::sym_eigenvalues;
use crate::error::{invalid, Result};
use crate::math;
use crate::matrix::{cholesky, SymMatrix};

pub const DEFAULT_ZERO_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub kll: f64,
    pub rkll: f64,
    pub rte: f64,
    #[serde(rename = "l2")]
    pub frobenius: f64,
    #[serde(rename = "lsp")]
    pub spectral: f64,
    #[serde(rename = "l1")]
    pub matrix_l1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Confusion {
    pub fn mcc(&self) -> f64 {
        let (tp, tn, fp, fn_) = (self.tp as f64, self.tn as f64, self.fp as f64, self.fn_ as f64);
        let den = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
        if den == 0.0 {
            0.0
        } else {
            (tp * tn - fp * fn_) / math::sqrt(den)
        }
    }

    /// `(TP/(TP+FN) + TN/(TN+FP)) / 2`; an empty class contributes 0.
    pub fn balanced_accuracy(&self) -> f64 {
        let rate = |hit: u64, miss: u64| if hit + miss == 0 { 0.0 } else { hit as f64 / (hit + miss) as f64 };
        0.5 * (rate(self.tp, self.fn_) + rate(self.tn, self.fp))
    }

    pub fn report(&self) -> GraphReport {
        let mcc = self.mcc();
        GraphReport {
            tp: self.tp,
            tn: self.tn,
            fp: self.fp,
            fn_: self.fn_,
            mcc,
            umcc: (mcc + 1.0) / 2.0,
            ba: self.balanced_accuracy(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphReport {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub mcc: f64,
    pub umcc: f64,
    pub ba: f64,
}

/// KL-type losses plus Frobenius, spectral and max-column-sum norms of
/// `omega_hat - omega`.
pub fn loss_report(omega_hat: &SymMatrix, omega: &SymMatrix) -> Result<LossReport> {
    omega_hat.same_dim(omega)?;
    let p = omega.dim() as f64;
    let ch_hat = cholesky(omega_hat)?;
    let ch = cholesky(omega)?;
    let (ld_hat, ld) = (ch_hat.log_det(), ch.log_det());
    // tr(Omega^{-1} Omega_hat) - log det(Omega^{-1} Omega_hat) - p
    let kll = ch.inverse().trace_product(omega_hat)? - (ld_hat - ld) - p;
    let rkll = ch_hat.inverse().trace_product(omega)? - (ld - ld_hat) - p;
    let diff = omega_hat.sub(omega)?;
    let ev = sym_eigenvalues(&diff)?;
    let spectral = ev.iter().fold(0.0_f64, |m, v| m.max(math::abs(*v)));
    Ok(LossReport {
        kll,
        rkll,
        rte: math::abs(1.0 - omega_hat.trace() / omega.trace()),
        frobenius: diff.frobenius(),
        spectral,
        matrix_l1: diff.matrix_l1(),
    })
}

pub fn confusion(omega_hat: &SymMatrix, omega: &SymMatrix, zero_tol: f64) -> Result<Confusion> {
    omega_hat.same_dim(omega)?;
    if !(zero_tol >= 0.0) {
        return Err(invalid("zero tolerance must be nonnegative"));
    }
    let p = omega.dim();
    let mut c = Confusion { tp: 0, tn: 0, fp: 0, fn_: 0 };
    for i in 0..p {
        for j in (i + 1)..p {
            let predicted = math::abs(omega_hat.get(i, j)) > zero_tol;
            let actual = omega.get(i, j) != 0.0;
            match (predicted, actual) {
                (true, true) => c.tp += 1,
                (false, false) => c.tn += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
            }
        }
    }
    Ok(c)
}

pub fn graph_report(omega_hat: &SymMatrix, omega: &SymMatrix, zero_tol: f64) -> Result<GraphReport> {
    Ok(confusion(omega_hat, omega, zero_tol)?.report())
}

/// `rho_ij = -omega_ij / sqrt(omega_ii omega_jj)`, unit diagonal.
pub fn partial_correlations(omega: &SymMatrix) -> Result<SymMatrix> {
    let d = omega.diag();
    if let Some(i) = d.iter().position(|v| !(*v > 0.0)) {
        return Err(invalid(alloc::format!("diagonal entry {i} is not positive")));
    }
    Ok(SymMatrix::from_upper_fn(omega.dim(), |i, j| {
        if i == j {
            1.0
        } else {
            -omega.get(i, j) / math::sqrt(d[i] * d[j])
        }
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Entropy {
    /// Differential entropy `(p/2)(1 + log 2 pi) + H_C / 2`.
    pub h: f64,
    /// `log det(Omega^{-1})`.
    pub h_c: f64,
}

pub fn gaussian_entropy(omega: &SymMatrix) -> Result<Entropy> {
    let h_c = -cholesky(omega)?.log_det();
    let p = omega.dim() as f64;
    Ok(Entropy { h: 0.5 * p * (1.0 + math::ln(2.0 * core::f64::consts::PI)) + 0.5 * h_c, h_c })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{invert_pd, Matrix};
    use crate::rng::{rng_from_seed, standard_normal};
    use alloc::vec;
    use alloc::vec::Vec;
    use proptest::prelude::*;

    fn random_pd(p: usize, seed: u64) -> SymMatrix {
        let mut rng = rng_from_seed(seed);
        let a = Matrix::from_fn(p, p, |_, _| standard_normal(&mut rng));
        let aat = a.matmul(&a.transpose()).unwrap();
        SymMatrix::symmetric_part(&aat).shift_diag(0.5)
    }

    // Dense Gauss-Jordan inverse and LU determinant, kept apart from the
    // Cholesky path used by the library.
    fn gj_inverse(m: &SymMatrix) -> (Vec<Vec<f64>>, f64) {
        let p = m.dim();
        let mut a = m.to_rows();
        let mut inv: Vec<Vec<f64>> = (0..p).map(|i| (0..p).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        let mut logdet = 0.0;
        for c in 0..p {
            let piv = (c..p).max_by(|x, y| a[*x][c].abs().partial_cmp(&a[*y][c].abs()).unwrap()).unwrap();
            a.swap(c, piv);
            inv.swap(c, piv);
            let d = a[c][c];
            logdet += d.abs().ln();
            for j in 0..p {
                a[c][j] /= d;
                inv[c][j] /= d;
            }
            for r in 0..p {
                if r != c {
                    let f = a[r][c];
                    for j in 0..p {
                        a[r][j] -= f * a[c][j];
                        inv[r][j] -= f * inv[c][j];
                    }
                }
            }
        }
        (inv, logdet)
    }

    fn kll_direct(hat: &SymMatrix, truth: &SymMatrix) -> f64 {
        let p = truth.dim();
        let (tinv, ld_t) = gj_inverse(truth);
        let (_, ld_h) = gj_inverse(hat);
        let mut tr = 0.0;
        for i in 0..p {
            for k in 0..p {
                tr += tinv[i][k] * hat.get(k, i);
            }
        }
        tr - (ld_h - ld_t) - p as f64
    }

    #[test]
    fn zero_loss_at_truth() {
        let o = random_pd(6, 1);
        let r = loss_report(&o, &o).unwrap();
        for v in [r.kll, r.rkll, r.rte, r.frobenius, r.spectral, r.matrix_l1] {
            assert!(v.abs() < 1e-10);
        }
    }

    #[test]
    fn diagonal_case() {
        let p = 10;
        let r = loss_report(&SymMatrix::scaled_identity(p, 2.0), &SymMatrix::identity(p)).unwrap();
        assert!((r.kll - 10.0 * (1.0 - 2f64.ln())).abs() < 1e-12);
        assert!((r.rte - 1.0).abs() < 1e-15);
        assert!((r.frobenius - 10f64.sqrt()).abs() < 1e-12);
        assert!((r.spectral - 1.0).abs() < 1e-12);
        assert!((r.matrix_l1 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn random_pair_matches_direct() {
        let a = random_pd(4, 2);
        let b = random_pd(4, 3);
        let r = loss_report(&a, &b).unwrap();
        assert!((r.kll - kll_direct(&a, &b)).abs() < 1e-9);
        assert!((r.rkll - kll_direct(&b, &a)).abs() < 1e-9);
        let d = a.sub(&b).unwrap();
        let col_max = (0..4).map(|j| (0..4).map(|i| d.get(i, j).abs()).sum::<f64>()).fold(0.0, f64::max);
        assert!((r.matrix_l1 - col_max).abs() < 1e-12);
    }

    #[test]
    fn confusion_fixtures() {
        let perfect = Confusion { tp: 5, tn: 7, fp: 0, fn_: 0 }.report();
        assert_eq!((perfect.mcc, perfect.umcc, perfect.ba), (1.0, 1.0, 1.0));
        let balanced = Confusion { tp: 10, tn: 10, fp: 10, fn_: 10 }.report();
        assert_eq!((balanced.mcc, balanced.umcc, balanced.ba), (0.0, 0.5, 0.5));
        let empty = Confusion { tp: 0, tn: 8, fp: 0, fn_: 3 }.report();
        assert_eq!((empty.mcc, empty.ba), (0.0, 0.5));
        // tp=6 tn=3 fp=1 fn=2: (18-2)/sqrt(7*8*4*5)
        let mixed = Confusion { tp: 6, tn: 3, fp: 1, fn_: 2 }.report();
        assert!((mixed.mcc - 16.0 / 1120f64.sqrt()).abs() < 1e-15);
        assert!((mixed.ba - 0.5 * (0.75 + 0.75)).abs() < 1e-15);
    }

    #[test]
    fn graph_counts_upper_triangle() {
        let truth = SymMatrix::from_rows(&[vec![1.0, 0.3, 0.0], vec![0.3, 1.0, 0.0], vec![0.0, 0.0, 1.0]]).unwrap();
        let hat = SymMatrix::from_rows(&[vec![1.0, 0.0, 1e-9], vec![0.0, 1.0, 0.2], vec![1e-9, 0.2, 1.0]]).unwrap();
        let c = confusion(&hat, &truth, DEFAULT_ZERO_TOL).unwrap();
        assert_eq!(c, Confusion { tp: 0, tn: 1, fp: 1, fn_: 1 });
    }

    #[test]
    fn partial_correlation_examples() {
        assert_eq!(partial_correlations(&SymMatrix::identity(3)).unwrap(), SymMatrix::identity(3));
        let a = SymMatrix::from_rows(&[vec![1.0, -0.5], vec![-0.5, 1.0]]).unwrap();
        assert_eq!(partial_correlations(&a).unwrap().get(0, 1), 0.5);
        let b = SymMatrix::from_rows(&[vec![4.0, -2.0], vec![-2.0, 4.0]]).unwrap();
        assert_eq!(partial_correlations(&b).unwrap().get(0, 1), 0.5);
        assert!(partial_correlations(&SymMatrix::zeros(2)).is_err());
    }

    #[test]
    fn entropy_examples() {
        let e = gaussian_entropy(&SymMatrix::identity(4)).unwrap();
        assert_eq!(e.h_c, 0.0);
        assert!((e.h - 2.0 * (1.0 + (2.0 * core::f64::consts::PI).ln())).abs() < 1e-14);
        let e1 = gaussian_entropy(&SymMatrix::scaled_identity(1, 2.0)).unwrap();
        assert!((e1.h_c + 2f64.ln()).abs() < 1e-15);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn divergences_nonnegative_and_swap(seed in any::<u64>(), p in 1usize..8) {
            let a = random_pd(p, seed);
            let b = random_pd(p, seed ^ 0x5555);
            let r = loss_report(&a, &b).unwrap();
            let swapped = loss_report(&b, &a).unwrap();
            prop_assert!(r.kll >= -1e-10 && r.rkll >= -1e-10);
            prop_assert!((r.rkll - swapped.kll).abs() <= 1e-10 * (1.0 + r.rkll.abs()));
            prop_assert!(r.spectral <= r.frobenius + 1e-10);
            prop_assert!(r.frobenius <= (p as f64).sqrt() * r.spectral + 1e-10);
        }

        #[test]
        fn entropy_matches_eigenvalues(seed in any::<u64>(), p in 1usize..10, c in 1.01f64..5.0) {
            let a = random_pd(p, seed);
            let e = gaussian_entropy(&a).unwrap();
            let direct: f64 = -sym_eigenvalues(&a).unwrap().iter().map(|l| l.ln()).sum::<f64>();
            prop_assert!((e.h_c - direct).abs() <= 1e-10 * (1.0 + direct.abs()));
            prop_assert!(gaussian_entropy(&a.scale(c)).unwrap().h < e.h);
        }

        #[test]
        fn unit_scores_iff_diagonal_confusion(tp in 0u64..20, tn in 0u64..20, fp in 0u64..5, fn_ in 0u64..5) {
            prop_assume!(tp > 0 && tn > 0);
            let r = Confusion { tp, tn, fp, fn_ }.report();
            let diagonal = fp == 0 && fn_ == 0;
            prop_assert_eq!(r.umcc == 1.0, diagonal);
            prop_assert_eq!(r.ba == 1.0, diagonal);
            prop_assert!((0.0..=1.0).contains(&r.ba) && (0.0..=1.0).contains(&r.umcc));
        }

        #[test]
        fn kll_oracle_agreement(seed in any::<u64>()) {
            let a = random_pd(4, seed);
            let b = random_pd(4, seed.wrapping_add(1));
            let r = loss_report(&a, &b).unwrap();
            prop_assert!((r.kll - kll_direct(&a, &b)).abs() <= 1e-8 * (1.0 + r.kll.abs()));
            let _ = invert_pd(&a).unwrap();
        }
    }
}
