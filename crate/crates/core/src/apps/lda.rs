//! Two-class linear discriminant analysis with a plug-in precision matrix.
//!
//! A test row `x` goes to group 1 iff `a^T (x - mu) > 0`, where
//! `a = Omega (mu1 - mu2)` and `mu = (mu1 + mu2) / 2`. A score of exactly
//! zero goes to group 2.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::estimators::EstimatorConfig;
use crate::math;
use crate::matrix::{dot, Matrix, SymMatrix};
use crate::metrics::Confusion;
use crate::rng::{derive_seed, permutation, rng_from_seed};
use crate::tuning::TuningPlan;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Group {
    One,
    Two,
}

impl Group {
    pub fn label(self) -> u8 {
        match self {
            Group::One => 1,
            Group::Two => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaModel {
    pub mu1: Vec<f64>,
    pub mu2: Vec<f64>,
    pub omega: SymMatrix,
    pub a: Vec<f64>,
    pub mu: Vec<f64>,
}

pub fn lda_fit(x1: &Matrix, x2: &Matrix, omega: &SymMatrix) -> Result<LdaModel> {
    let p = omega.dim();
    if x1.rows() == 0 || x2.rows() == 0 {
        return Err(invalid("each group needs at least one row"));
    }
    for x in [x1, x2] {
        if x.cols() != p {
            return Err(Error::DimensionMismatch { expected: p, found: x.cols() });
        }
    }
    let mu1 = x1.column_means();
    let mu2 = x2.column_means();
    let d: Vec<f64> = mu1.iter().zip(&mu2).map(|(a, b)| a - b).collect();
    let a = omega.mul_vec(&d)?;
    let mu = mu1.iter().zip(&mu2).map(|(a, b)| 0.5 * (a + b)).collect();
    Ok(LdaModel { mu1, mu2, omega: omega.clone(), a, mu })
}

impl LdaModel {
    pub fn score(&self, x: &[f64]) -> f64 {
        let centred: Vec<f64> = x.iter().zip(&self.mu).map(|(v, m)| v - m).collect();
        dot(&self.a, &centred)
    }
}

pub fn lda_classify(model: &LdaModel, x: &[f64]) -> Group {
    if model.score(x) > 0.0 {
        Group::One
    } else {
        Group::Two
    }
}

/// Welch two-sample t statistic per column; `None` when both groups have
/// zero variance in that column or a group has fewer than two rows.
pub fn welch_t(x1: &Matrix, x2: &Matrix) -> Vec<Option<f64>> {
    let (n1, n2) = (x1.rows() as f64, x2.rows() as f64);
    let (m1, m2) = (x1.column_means(), x2.column_means());
    (0..x1.cols())
        .map(|j| {
            if n1 < 2.0 || n2 < 2.0 {
                return None;
            }
            let var = |x: &Matrix, m: f64| (0..x.rows()).map(|i| { let d = x.get(i, j) - m; d * d }).sum::<f64>();
            let se2 = var(x1, m1[j]) / (n1 - 1.0) / n1 + var(x2, m2[j]) / (n2 - 1.0) / n2;
            if se2 > 0.0 {
                Some((m1[j] - m2[j]) / math::sqrt(se2))
            } else {
                None
            }
        })
        .collect()
}

/// Indices of the `k` columns with the largest `|t|`, ties by lower index,
/// returned in increasing order. Degenerate columns are never selected.
pub fn top_features(t: &[Option<f64>], k: usize) -> Vec<usize> {
    let mut ranked: Vec<(usize, f64)> = t.iter().enumerate().filter_map(|(j, v)| v.map(|v| (j, math::abs(v)))).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut idx: Vec<usize> = ranked.into_iter().take(k).map(|(j, _)| j).collect();
    idx.sort_unstable();
    idx
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaExperiment {
    pub train1: usize,
    pub train2: usize,
    pub features: usize,
    pub template: EstimatorConfig,
    pub plan: TuningPlan,
    pub replications: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaReplication {
    /// Group 1 is the positive class.
    pub confusion: Confusion,
    pub gamma: Option<f64>,
    pub degenerate_features: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaReport {
    pub misclassification: f64,
    pub umcc: f64,
    pub ba: f64,
    pub replications: Vec<LdaReplication>,
}

impl LdaExperiment {
    fn check(&self, x1: &Matrix, x2: &Matrix) -> Result<()> {
        if x1.cols() != x2.cols() {
            return Err(Error::DimensionMismatch { expected: x1.cols(), found: x2.cols() });
        }
        if self.train1 < 2 || self.train2 < 2 || self.train1 >= x1.rows() || self.train2 >= x2.rows() {
            return Err(invalid("each group needs at least two training rows and one test row"));
        }
        if self.features == 0 || self.replications == 0 {
            return Err(invalid("features and replications must be positive"));
        }
        Ok(())
    }

    /// One seeded split: select features on the training rows, fit the
    /// precision matrix on group-centred pooled training data, score the
    /// held-out rows.
    pub fn replication(&self, x1: &Matrix, x2: &Matrix, rep: usize) -> Result<LdaReplication> {
        self.check(x1, x2)?;
        let rep_seed = derive_seed(self.seed, rep as u64);
        let mut rng = rng_from_seed(derive_seed(rep_seed, 0));
        let p1 = permutation(&mut rng, x1.rows());
        let p2 = permutation(&mut rng, x2.rows());
        let (tr1, te1) = p1.split_at(self.train1);
        let (tr2, te2) = p2.split_at(self.train2);
        let (a1, a2) = (x1.select_rows(tr1), x2.select_rows(tr2));

        let t = welch_t(&a1, &a2);
        let degenerate = t.iter().filter(|v| v.is_none()).count();
        let keep = top_features(&t, self.features);
        if keep.is_empty() {
            return Err(invalid("no feature has positive variance in the training split"));
        }
        let (a1, a2) = (a1.select_cols(&keep), a2.select_cols(&keep));
        let pooled = group_centred(&a1, &a2);
        let (est, tuned) = self.plan.fit(&pooled, &self.template, derive_seed(rep_seed, 1))?;
        let model = lda_fit(&a1, &a2, &est.omega)?;

        let mut c = Confusion { tp: 0, tn: 0, fp: 0, fn_: 0 };
        for (rows, truth) in [(te1, Group::One), (te2, Group::Two)] {
            for &i in rows {
                let x = if truth == Group::One { x1.row(i) } else { x2.row(i) };
                let sub: Vec<f64> = keep.iter().map(|&j| x[j]).collect();
                match (lda_classify(&model, &sub), truth) {
                    (Group::One, Group::One) => c.tp += 1,
                    (Group::Two, Group::Two) => c.tn += 1,
                    (Group::One, Group::Two) => c.fp += 1,
                    (Group::Two, Group::One) => c.fn_ += 1,
                }
            }
        }
        Ok(LdaReplication { confusion: c, gamma: tuned.map(|t| t.best_gamma), degenerate_features: degenerate })
    }

    pub fn run(&self, x1: &Matrix, x2: &Matrix) -> Result<LdaReport> {
        let reps = (0..self.replications).map(|r| self.replication(x1, x2, r)).collect::<Result<Vec<_>>>()?;
        Ok(summarize(reps))
    }
}

/// Averages per-replication error rate, uMCC and balanced accuracy.
pub fn summarize(replications: Vec<LdaReplication>) -> LdaReport {
    let k = replications.len() as f64;
    let (mut err, mut umcc, mut ba) = (0.0, 0.0, 0.0);
    for r in &replications {
        let c = &r.confusion;
        let total = (c.tp + c.tn + c.fp + c.fn_) as f64;
        err += (c.fp + c.fn_) as f64 / total;
        let g = c.report();
        umcc += g.umcc;
        ba += g.ba;
    }
    LdaReport { misclassification: err / k, umcc: umcc / k, ba: ba / k, replications }
}

/// Stacks both groups after subtracting each group's own mean.
pub fn group_centred(x1: &Matrix, x2: &Matrix) -> Matrix {
    let p = x1.cols();
    let (m1, m2) = (x1.column_means(), x2.column_means());
    Matrix::from_fn(x1.rows() + x2.rows(), p, |i, j| {
        if i < x1.rows() {
            x1.get(i, j) - m1[j]
        } else {
            x2.get(i - x1.rows(), j) - m2[j]
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::Method;
    use crate::rng::standard_normal;
    use alloc::vec;
    use proptest::prelude::*;

    fn cloud(n: usize, p: usize, shift: f64, seed: u64) -> Matrix {
        let mut rng = rng_from_seed(seed);
        Matrix::from_fn(n, p, |_, j| standard_normal(&mut rng) + if j == 0 { shift } else { 0.0 })
    }

    #[test]
    fn equal_means_zero_direction() {
        let x = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let m = lda_fit(&x, &x, &SymMatrix::identity(2)).unwrap();
        assert_eq!(m.a, vec![0.0, 0.0]);
    }

    #[test]
    fn identity_precision_gives_mean_difference() {
        let x1 = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 2.0]]).unwrap();
        let x2 = Matrix::from_rows(&[vec![0.0, 1.0]]).unwrap();
        let m = lda_fit(&x1, &x2, &SymMatrix::identity(2)).unwrap();
        assert_eq!(m.a, vec![2.0, 1.0]);
        assert_eq!(m.mu, vec![1.0, 1.5]);
    }

    #[test]
    fn direction_matches_direct_product() {
        let x1 = cloud(10, 3, 1.0, 1);
        let x2 = cloud(12, 3, 0.0, 2);
        let omega = SymMatrix::from_rows(&[vec![2.0, 0.3, 0.0], vec![0.3, 1.0, -0.2], vec![0.0, -0.2, 1.5]]).unwrap();
        let m = lda_fit(&x1, &x2, &omega).unwrap();
        let d: Vec<f64> = (0..3).map(|j| m.mu1[j] - m.mu2[j]).collect();
        for i in 0..3 {
            let want: f64 = (0..3).map(|k| omega.get(i, k) * d[k]).sum();
            assert!((m.a[i] - want).abs() < 1e-14);
        }
    }

    #[test]
    fn classify_means_and_midpoint() {
        let x1 = cloud(10, 3, 2.0, 3);
        let x2 = cloud(10, 3, -2.0, 4);
        let m = lda_fit(&x1, &x2, &SymMatrix::identity(3)).unwrap();
        assert_eq!(lda_classify(&m, &m.mu1), Group::One);
        assert_eq!(lda_classify(&m, &m.mu2), Group::Two);
        assert_eq!(lda_classify(&m, &m.mu.clone()), Group::Two);
    }

    #[test]
    fn welch_ranking() {
        let x1 = Matrix::from_rows(&[vec![1.0, 5.0, 0.0], vec![2.0, 6.0, 0.0], vec![3.0, 7.0, 0.0]]).unwrap();
        let x2 = Matrix::from_rows(&[vec![1.0, 0.0, 0.0], vec![2.0, 1.0, 0.0], vec![3.0, 2.0, 0.0]]).unwrap();
        let t = welch_t(&x1, &x2);
        assert_eq!(t[0], Some(0.0));
        assert!(t[1].unwrap() > 5.0);
        assert_eq!(t[2], None);
        assert_eq!(top_features(&t, 2), vec![0, 1]);
        assert_eq!(top_features(&[Some(1.0), Some(-1.0), Some(1.0)], 2), vec![0, 1]);
    }

    fn experiment(reps: usize) -> LdaExperiment {
        LdaExperiment {
            train1: 100,
            train2: 100,
            features: 4,
            template: EstimatorConfig::new(Method::Naive),
            plan: TuningPlan::default(),
            replications: reps,
            seed: 5,
        }
    }

    #[test]
    fn separated_clouds_classify_cleanly() {
        let r = experiment(2).run(&cloud(300, 4, 8.0, 6), &cloud(300, 4, 0.0, 7)).unwrap();
        assert!(r.misclassification < 0.01);
    }

    #[test]
    fn identical_clouds_are_coin_flips() {
        let r = experiment(1).run(&cloud(300, 4, 0.0, 8), &cloud(300, 4, 0.0, 9)).unwrap();
        assert!((r.misclassification - 0.5).abs() <= 0.1, "{}", r.misclassification);
    }

    #[test]
    fn tuned_replication_is_deterministic() {
        let mut e = experiment(1);
        e.template = EstimatorConfig::new(Method::Eagl);
        e.plan.grid_count = 5;
        e.train1 = 30;
        e.train2 = 30;
        let (x1, x2) = (cloud(40, 6, 1.0, 10), cloud(40, 6, 0.0, 11));
        assert_eq!(e.run(&x1, &x2).unwrap(), e.run(&x1, &x2).unwrap());
    }

    proptest! {
        #[test]
        fn labels_invariant_to_precision_scale(seed in any::<u64>(), c in 0.01f64..100.0) {
            let x1 = cloud(6, 3, 1.0, seed);
            let x2 = cloud(6, 3, 0.0, seed ^ 1);
            let omega = SymMatrix::from_rows(&[vec![2.0, 0.3, 0.0], vec![0.3, 1.0, -0.2], vec![0.0, -0.2, 1.5]]).unwrap();
            let a = lda_fit(&x1, &x2, &omega).unwrap();
            let b = lda_fit(&x1, &x2, &omega.scale(c)).unwrap();
            let probe = cloud(20, 3, 0.5, seed ^ 2);
            for i in 0..20 {
                prop_assert_eq!(lda_classify(&a, probe.row(i)), lda_classify(&b, probe.row(i)));
            }
        }
    }
}
