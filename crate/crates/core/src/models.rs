//! The seven benchmark precision models and Gaussian sampling.
//!
//! | id | structure |
//! |----|-----------|
//! | M1 | tridiagonal band, off-diagonal 0.45 |
//! | M2 | pentadiagonal band, 0.5 and 0.35 |
//! | M3 | four dense blocks with entries `0.6^|i-j|` |
//! | M4 | random symmetric, ~50% nonzero off-diagonals in `U[-1, 1]` |
//! | M5 | Erdos-Renyi, edge probability 0.05, weights `U[0.4, 0.8]` |
//! | M6 | Barabasi-Albert scale-free graph with `p` edges |
//! | M7 | ten hub-led stars, `p - 10` edges |
//!
//! M4/M5 are shifted by `(|lambda_min| + 0.05) I`; M6/M7 use weight
//! `nu = 0.3` with diagonal `|lambda_min(nu A)| + 0.1 + u`, `u = 0.1`. Every
//! model is finally rescaled to unit diagonal.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::eigen::sym_eigenvalues;
use crate::error::{invalid, Result};
use crate::math;
use crate::matrix::{cholesky, Matrix, SymMatrix};
use crate::rng::{rng_from_seed, standard_normal, SimRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelId {
    M1,
    M2,
    M3,
    M4,
    M5,
    M6,
    M7,
}

impl ModelId {
    pub const ALL: [ModelId; 7] =
        [ModelId::M1, ModelId::M2, ModelId::M3, ModelId::M4, ModelId::M5, ModelId::M6, ModelId::M7];

    pub fn from_index(k: u8) -> Result<Self> {
        Self::ALL.get((k as usize).wrapping_sub(1)).copied().ok_or_else(|| invalid("model index must be 1..7"))
    }

    pub fn index(self) -> u8 {
        self as u8 + 1
    }
}

impl core::fmt::Display for ModelId {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "M{}", self.index())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub band1: f64,
    pub band2_first: f64,
    pub band2_second: f64,
    pub block_base: f64,
    pub block_count: usize,
    pub random_density: f64,
    pub er_probability: f64,
    pub er_low: f64,
    pub er_high: f64,
    /// Added to `|lambda_min|` for M4/M5.
    pub pd_margin: f64,
    /// Edge weight `nu` for M6/M7.
    pub graph_weight: f64,
    /// Extra diagonal `u` for M6/M7.
    pub graph_u: f64,
    pub hubs: usize,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            band1: 0.45,
            band2_first: 0.5,
            band2_second: 0.35,
            block_base: 0.6,
            block_count: 4,
            random_density: 0.5,
            er_probability: 0.05,
            er_low: 0.4,
            er_high: 0.8,
            pd_margin: 0.05,
            graph_weight: 0.3,
            graph_u: 0.1,
            hubs: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub model: ModelId,
    pub p: usize,
    pub seed: u64,
    pub params: ModelParams,
}

impl ModelSpec {
    pub fn new(model: ModelId, p: usize, seed: u64) -> Self {
        Self { model, p, seed, params: ModelParams::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.p;
        if p == 0 {
            return Err(invalid("p must be positive"));
        }
        match self.model {
            ModelId::M3 if !p.is_multiple_of(self.params.block_count) => {
                Err(invalid(alloc::format!("M3 needs p divisible by {}", self.params.block_count)))
            }
            ModelId::M6 if p < 3 => Err(invalid("M6 needs p >= 3")),
            ModelId::M7 if !p.is_multiple_of(2 * self.params.hubs) => {
                Err(invalid(alloc::format!("M7 needs p divisible by {}", 2 * self.params.hubs)))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub omega: SymMatrix,
    /// Pairs `(i, j)`, `i < j`, with nonzero `omega_ij`.
    pub edges: Vec<(usize, usize)>,
}

impl GroundTruth {
    pub fn from_omega(omega: SymMatrix) -> Self {
        let p = omega.dim();
        let edges = (0..p).flat_map(|i| ((i + 1)..p).map(move |j| (i, j))).filter(|&(i, j)| omega.get(i, j) != 0.0).collect();
        Self { omega, edges }
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }
}

pub fn generate_model(spec: &ModelSpec) -> Result<GroundTruth> {
    spec.validate()?;
    let p = spec.p;
    let pr = &spec.params;
    let mut rng = rng_from_seed(spec.seed);
    let raw = match spec.model {
        ModelId::M1 => band(p, &[pr.band1]),
        ModelId::M2 => band(p, &[pr.band2_first, pr.band2_second]),
        ModelId::M3 => {
            let b = p / pr.block_count;
            SymMatrix::from_upper_fn(p, |i, j| {
                if i / b == j / b {
                    math::powi(pr.block_base, (j - i) as i32)
                } else {
                    0.0
                }
            })
        }
        ModelId::M4 => {
            let theta = SymMatrix::from_upper_fn(p, |i, j| {
                if i != j && rng.random::<f64>() < pr.random_density {
                    // U[-1, 1]; an exact zero draw is redrawn to keep the pattern.
                    loop {
                        let v = rng.random_range(-1.0..=1.0);
                        if v != 0.0 {
                            break v;
                        }
                    }
                } else {
                    0.0
                }
            });
            eigen_shift(theta, pr.pd_margin)?
        }
        ModelId::M5 => {
            let theta = SymMatrix::from_upper_fn(p, |i, j| {
                if i != j && rng.random::<f64>() < pr.er_probability {
                    rng.random_range(pr.er_low..=pr.er_high)
                } else {
                    0.0
                }
            });
            eigen_shift(theta, pr.pd_margin)?
        }
        ModelId::M6 => weighted_graph(p, &scale_free_edges(p, &mut rng), pr)?,
        ModelId::M7 => weighted_graph(p, &hub_edges(p, pr.hubs), pr)?,
    };
    let omega = standardize(&raw)?;
    cholesky(&omega)?;
    Ok(GroundTruth::from_omega(omega))
}

fn band(p: usize, values: &[f64]) -> SymMatrix {
    SymMatrix::from_upper_fn(p, |i, j| match j - i {
        0 => 1.0,
        d if d <= values.len() => values[d - 1],
        _ => 0.0,
    })
}

fn eigen_shift(theta: SymMatrix, margin: f64) -> Result<SymMatrix> {
    let lmin = sym_eigenvalues(&theta)?[0];
    Ok(theta.shift_diag(math::abs(lmin) + margin))
}

/// Preferential attachment with one edge per new node, plus one extra
/// uniformly chosen non-tree edge so the graph has exactly `p` edges.
fn scale_free_edges(p: usize, rng: &mut SimRng) -> Vec<(usize, usize)> {
    let mut edges = BTreeSet::new();
    let mut degree = vec![0usize; p];
    edges.insert((0, 1));
    degree[0] = 1;
    degree[1] = 1;
    for new in 2..p {
        let total: usize = degree[..new].iter().sum();
        let mut draw = rng.random_range(0..total);
        let mut target = 0;
        while draw >= degree[target] {
            draw -= degree[target];
            target += 1;
        }
        edges.insert((target, new));
        degree[target] += 1;
        degree[new] += 1;
    }
    loop {
        let i = rng.random_range(0..p);
        let j = rng.random_range(0..p);
        let e = (i.min(j), i.max(j));
        if i != j && edges.insert(e) {
            break;
        }
    }
    edges.into_iter().collect()
}

/// `hubs` disjoint stars covering all `p` nodes; each centre is the first
/// node of its group.
fn hub_edges(p: usize, hubs: usize) -> Vec<(usize, usize)> {
    let size = p / hubs;
    (0..hubs).flat_map(|h| ((h * size + 1)..((h + 1) * size)).map(move |k| (h * size, k))).collect()
}

fn weighted_graph(p: usize, edges: &[(usize, usize)], pr: &ModelParams) -> Result<SymMatrix> {
    let mut theta = SymMatrix::zeros(p);
    for &(i, j) in edges {
        theta.set(i, j, pr.graph_weight);
    }
    let lmin = sym_eigenvalues(&theta)?[0];
    Ok(theta.shift_diag(math::abs(lmin) + 0.1 + pr.graph_u))
}

/// `D^{-1/2} Omega D^{-1/2}` with the diagonal set to exactly 1.
pub fn standardize(omega: &SymMatrix) -> Result<SymMatrix> {
    let d = omega.diag();
    if d.iter().any(|v| !(*v > 0.0)) {
        return Err(invalid("cannot standardise a matrix with a nonpositive diagonal"));
    }
    let r: Vec<f64> = d.iter().map(|v| 1.0 / math::sqrt(*v)).collect();
    Ok(SymMatrix::from_upper_fn(omega.dim(), |i, j| if i == j { 1.0 } else { omega.get(i, j) * r[i] * r[j] }))
}

/// `n` rows from `N(0, Omega^{-1})`: with `Omega = L L^T`, each row solves
/// `L^T x = z` for standard normal `z`.
pub fn sample_mvn(omega: &SymMatrix, n: usize, seed: u64) -> Result<Matrix> {
    if n == 0 {
        return Err(invalid("need at least one sample"));
    }
    let chol = cholesky(omega)?;
    let p = omega.dim();
    let mut rng = rng_from_seed(seed);
    let mut data = Vec::with_capacity(n * p);
    let mut z = vec![0.0; p];
    for _ in 0..n {
        for v in z.iter_mut() {
            *v = standard_normal(&mut rng);
        }
        chol.solve_upper(&mut z);
        data.extend_from_slice(&z);
    }
    Matrix::from_vec(n, p, data)
}
