//! Time-indexed policies and Q-tables.

use serde::{Deserialize, Serialize};

use crate::dist::{entropy, validate_distribution};
use crate::error::{Error, Result};

/// A policy `pi_h(a | s)` for `h = 0..H-1`, stored row-major as
/// `[h][s][a]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    horizon: usize,
    n_states: usize,
    n_actions: usize,
    probs: Vec<f64>,
}

impl Policy {
    pub fn uniform(horizon: usize, n_states: usize, n_actions: usize) -> Self {
        Self {
            horizon,
            n_states,
            n_actions,
            probs: vec![1.0 / n_actions as f64; horizon * n_states * n_actions],
        }
    }

    /// Builds a policy from a flat `[h][s][a]` table, validating every row.
    pub fn from_table(
        horizon: usize,
        n_states: usize,
        n_actions: usize,
        probs: Vec<f64>,
    ) -> Result<Self> {
        if probs.len() != horizon * n_states * n_actions {
            return Err(Error::ShapeMismatch(format!(
                "policy table needs {} entries, got {}",
                horizon * n_states * n_actions,
                probs.len()
            )));
        }
        for row in probs.chunks(n_actions) {
            validate_distribution(row)?;
        }
        Ok(Self {
            horizon,
            n_states,
            n_actions,
            probs,
        })
    }

    /// Deterministic policy from a `[h][s]` table of actions.
    pub fn deterministic(horizon: usize, n_states: usize, n_actions: usize, actions: &[usize]) -> Self {
        let mut p = Self::uniform(horizon, n_states, n_actions);
        p.probs.iter_mut().for_each(|x| *x = 0.0);
        for (row, &a) in actions.iter().enumerate() {
            p.probs[row * n_actions + a] = 1.0;
        }
        p
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn table(&self) -> &[f64] {
        &self.probs
    }

    pub fn row(&self, h: usize, s: usize) -> &[f64] {
        let start = (h * self.n_states + s) * self.n_actions;
        &self.probs[start..start + self.n_actions]
    }

    pub(crate) fn row_mut(&mut self, h: usize, s: usize) -> &mut [f64] {
        let start = (h * self.n_states + s) * self.n_actions;
        &mut self.probs[start..start + self.n_actions]
    }

    /// Replaces one row after validating it.
    pub fn set_row(&mut self, h: usize, s: usize, row: &[f64]) -> Result<()> {
        if row.len() != self.n_actions {
            return Err(Error::ShapeMismatch(format!(
                "row of length {} for {} actions",
                row.len(),
                self.n_actions
            )));
        }
        validate_distribution(row)?;
        self.row_mut(h, s).copy_from_slice(row);
        Ok(())
    }

    pub fn entropy_at(&self, h: usize, s: usize) -> f64 {
        entropy(self.row(h, s))
    }

    /// `(1 - w) * self + w * uniform`, row by row.
    pub fn mix_uniform(&mut self, w: f64) {
        let u = 1.0 / self.n_actions as f64;
        for p in &mut self.probs {
            *p = (1.0 - w) * *p + w * u;
        }
    }

    pub fn min_probability(&self) -> f64 {
        self.probs.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn same_shape(&self, other: &Policy) -> bool {
        self.horizon == other.horizon
            && self.n_states == other.n_states
            && self.n_actions == other.n_actions
    }

    /// Sup-norm distance between two policies of the same shape.
    pub fn max_abs_diff(&self, other: &Policy) -> f64 {
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Running average of a sequence of policies.
#[derive(Clone, Debug)]
pub struct PolicyAverage {
    sum: Vec<f64>,
    count: usize,
    shape: (usize, usize, usize),
}

impl PolicyAverage {
    pub fn new(first: &Policy) -> Self {
        Self {
            sum: first.probs.clone(),
            count: 1,
            shape: (first.horizon, first.n_states, first.n_actions),
        }
    }

    pub fn push(&mut self, pi: &Policy) {
        for (s, p) in self.sum.iter_mut().zip(&pi.probs) {
            *s += p;
        }
        self.count += 1;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn average(&self) -> Policy {
        let (horizon, n_states, n_actions) = self.shape;
        let mut probs: Vec<f64> = self.sum.iter().map(|s| s / self.count as f64).collect();
        for row in probs.chunks_mut(n_actions) {
            let t: f64 = row.iter().sum();
            row.iter_mut().for_each(|x| *x /= t);
        }
        Policy {
            horizon,
            n_states,
            n_actions,
            probs,
        }
    }
}

/// `Q_h(s, a)` for every step, stored as `[h][s][a]`, together with the
/// entropy coefficient it was computed under.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    horizon: usize,
    n_states: usize,
    n_actions: usize,
    values: Vec<f64>,
    pub tau: f64,
}

impl QTable {
    pub fn zeros(horizon: usize, n_states: usize, n_actions: usize, tau: f64) -> Self {
        Self {
            horizon,
            n_states,
            n_actions,
            values: vec![0.0; horizon * n_states * n_actions],
            tau,
        }
    }

    pub fn from_table(
        horizon: usize,
        n_states: usize,
        n_actions: usize,
        values: Vec<f64>,
        tau: f64,
    ) -> Result<Self> {
        if values.len() != horizon * n_states * n_actions {
            return Err(Error::ShapeMismatch(format!(
                "Q table needs {} entries, got {}",
                horizon * n_states * n_actions,
                values.len()
            )));
        }
        Ok(Self {
            horizon,
            n_states,
            n_actions,
            values,
            tau,
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    fn idx(&self, h: usize, s: usize, a: usize) -> usize {
        (h * self.n_states + s) * self.n_actions + a
    }

    #[inline]
    pub fn get(&self, h: usize, s: usize, a: usize) -> f64 {
        self.values[self.idx(h, s, a)]
    }

    #[inline]
    pub fn set(&mut self, h: usize, s: usize, a: usize, v: f64) {
        let i = self.idx(h, s, a);
        self.values[i] = v;
    }

    pub fn row(&self, h: usize, s: usize) -> &[f64] {
        let start = self.idx(h, s, 0);
        &self.values[start..start + self.n_actions]
    }

    /// `sum_h ||self_h - other_h||^2_{mu_h}` with weights from `flow`.
    pub fn flow_weighted_sq_error(&self, other: &QTable, flow: &crate::dist::PopulationFlow) -> f64 {
        let mut total = 0.0;
        for h in 0..self.horizon {
            let mu = flow.at(h);
            for s in 0..self.n_states {
                for a in 0..self.n_actions {
                    let d = self.get(h, s, a) - other.get(h, s, a);
                    total += mu.weight(s, a) * d * d;
                }
            }
        }
        total
    }
}
