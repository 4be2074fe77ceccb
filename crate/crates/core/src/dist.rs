//! Distributions over actions and over state-action pairs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the total mass of a distribution.
pub const DIST_TOL: f64 = 1e-9;

/// Checks non-negativity and unit mass within [`DIST_TOL`].
pub fn validate_distribution(u: &[f64]) -> Result<()> {
    if u.is_empty() {
        return Err(Error::InvalidDistribution("empty vector".into()));
    }
    let mut total = 0.0;
    for (i, &x) in u.iter().enumerate() {
        if !x.is_finite() || x < 0.0 {
            return Err(Error::InvalidDistribution(format!("entry {i} = {x}")));
        }
        total += x;
    }
    if (total - 1.0).abs() > DIST_TOL {
        return Err(Error::InvalidDistribution(format!("mass {total} != 1")));
    }
    Ok(())
}

/// Shannon entropy with `0 log 0 = 0`. Inputs are assumed valid.
pub fn entropy(u: &[f64]) -> f64 {
    -u.iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.ln())
        .sum::<f64>()
}

pub fn kl_divergence(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::ShapeMismatch(format!(
            "KL arguments of length {} and {}",
            u.len(),
            v.len()
        )));
    }
    let mut acc = 0.0;
    for (i, (&p, &q)) in u.iter().zip(v).enumerate() {
        if p > 0.0 {
            if q <= 0.0 {
                return Err(Error::KlUndefined { index: i });
            }
            acc += p * (p / q).ln();
        }
    }
    Ok(acc.max(0.0))
}

/// Euclidean projection onto the probability simplex (sort-and-threshold).
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    if n == 0 {
        return Vec::new();
    }
    if v.iter().all(|&x| x >= 0.0) && (v.iter().sum::<f64>() - 1.0).abs() <= 1e-15 * n as f64 {
        return v.to_vec();
    }
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, &x) in sorted.iter().enumerate() {
        cum += x;
        let t = (cum - 1.0) / (k + 1) as f64;
        if x - t > 0.0 {
            theta = t;
        } else {
            break;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Normalizes `log_weights` through a max-shifted softmax.
pub fn softmax_from_logits(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = out.iter().sum();
    for x in &mut out {
        *x /= total;
    }
    out
}

/// Log-sum-exp with max shift.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|&v| (v - max).exp()).sum::<f64>().ln()
}

/// A probability vector over state-action pairs, the mean field `mu`.
///
/// Cell `(s, a)` lives at index `s * n_actions + a`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationDistribution {
    n_states: usize,
    n_actions: usize,
    weights: Vec<f64>,
    /// `Some(k)` when every weight times `k` is an integer.
    grid: Option<u64>,
}

impl PopulationDistribution {
    /// Validates and renormalizes `weights`.
    pub fn new(n_states: usize, n_actions: usize, mut weights: Vec<f64>) -> Result<Self> {
        if weights.len() != n_states * n_actions {
            return Err(Error::ShapeMismatch(format!(
                "expected {} weights, got {}",
                n_states * n_actions,
                weights.len()
            )));
        }
        validate_distribution(&weights)?;
        let total: f64 = weights.iter().sum();
        if total != 1.0 {
            for w in &mut weights {
                *w /= total;
            }
        }
        Ok(Self {
            n_states,
            n_actions,
            weights,
            grid: None,
        })
    }

    /// Builds a grid point from a count table.
    pub fn from_counts(n_states: usize, n_actions: usize, counts: &[u32]) -> Result<Self> {
        if counts.len() != n_states * n_actions {
            return Err(Error::ShapeMismatch(format!(
                "expected {} counts, got {}",
                n_states * n_actions,
                counts.len()
            )));
        }
        let total: u64 = counts.iter().map(|&c| u64::from(c)).sum();
        if total == 0 {
            return Err(Error::EmptyProfile);
        }
        let weights = counts
            .iter()
            .map(|&c| f64::from(c) / total as f64)
            .collect();
        Ok(Self {
            n_states,
            n_actions,
            weights,
            grid: Some(total),
        })
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        let n = n_states * n_actions;
        Self {
            n_states,
            n_actions,
            weights: vec![1.0 / n as f64; n],
            grid: None,
        }
    }

    pub fn point_mass(n_states: usize, n_actions: usize, state: usize, action: usize) -> Self {
        let mut weights = vec![0.0; n_states * n_actions];
        weights[state * n_actions + action] = 1.0;
        Self {
            n_states,
            n_actions,
            weights,
            grid: Some(1),
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, state: usize, action: usize) -> f64 {
        self.weights[state * self.n_actions + action]
    }

    pub fn grid_denominator(&self) -> Option<u64> {
        self.grid
    }

    pub fn is_grid(&self) -> bool {
        self.grid.is_some()
    }

    pub fn state_marginal(&self) -> Vec<f64> {
        self.weights
            .chunks(self.n_actions)
            .map(|row| row.iter().sum())
            .collect()
    }

    pub fn action_marginal(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_actions];
        for row in self.weights.chunks(self.n_actions) {
            for (o, w) in out.iter_mut().zip(row) {
                *o += w;
            }
        }
        out
    }

    pub fn l1_distance(&self, other: &Self) -> f64 {
        crate::numeric::l1_distance(&self.weights, &other.weights)
    }
}

/// Empirical distribution of a list of `(state, action)` pairs.
pub fn empirical_distribution(
    n_states: usize,
    n_actions: usize,
    pairs: &[(usize, usize)],
) -> Result<PopulationDistribution> {
    if pairs.is_empty() {
        return Err(Error::EmptyProfile);
    }
    let mut counts = vec![0u32; n_states * n_actions];
    for &(s, a) in pairs {
        if s >= n_states {
            return Err(Error::IndexOutOfRange {
                what: "state",
                index: s,
                size: n_states,
            });
        }
        if a >= n_actions {
            return Err(Error::IndexOutOfRange {
                what: "action",
                index: a,
                size: n_actions,
            });
        }
        counts[s * n_actions + a] += 1;
    }
    PopulationDistribution::from_counts(n_states, n_actions, &counts)
}

/// The sequence `mu_0, ..., mu_{H-1}` induced by a policy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationFlow {
    pub steps: Vec<PopulationDistribution>,
}

impl PopulationFlow {
    pub fn horizon(&self) -> usize {
        self.steps.len()
    }

    pub fn at(&self, h: usize) -> &PopulationDistribution {
        &self.steps[h]
    }
}
