//! Behavioral interfaces for N-player dynamic games and mean-field games.
//!
//! Opponents enter an N-player game only through a count table: a vector
//! of length `|S||A|` holding how many of the other `N - 1` agents occupy
//! each `(state, action)` cell. Kernels are therefore permutation-invariant
//! in the opponents by construction.

use std::sync::Arc;

use crate::dist::PopulationDistribution;

/// A finite-horizon N-player dynamic game with per-agent kernels.
pub trait DynamicGame: Send + Sync {
    fn n_agents(&self) -> usize;
    fn horizon(&self) -> usize;
    fn n_states(&self) -> usize;
    fn n_actions(&self) -> usize;

    /// Initial state distribution shared by every agent.
    fn initial_distribution(&self) -> &[f64];

    /// Writes `P^i(. | s, a, others)` into `out` (length `|S|`).
    fn transition(&self, agent: usize, state: usize, action: usize, others: &[u32], out: &mut [f64]);

    fn reward(&self, agent: usize, state: usize, action: usize, others: &[u32]) -> f64;

    /// Declared raw reward range `[lo, hi]`.
    fn reward_bounds(&self) -> (f64, f64);

    /// The game's own continuum formula for its mean-field limit, if any.
    fn analytic_mean_field(&self) -> Option<Arc<dyn MeanFieldGame>> {
        None
    }
}

/// A finite-horizon mean-field game.
pub trait MeanFieldGame: Send + Sync {
    fn horizon(&self) -> usize;
    fn n_states(&self) -> usize;
    fn n_actions(&self) -> usize;
    fn initial_distribution(&self) -> &[f64];

    /// Writes `P(. | s, a, mu)` into `out` (length `|S|`).
    fn transition(&self, state: usize, action: usize, mu: &PopulationDistribution, out: &mut [f64]);

    fn reward(&self, state: usize, action: usize, mu: &PopulationDistribution) -> f64;

    fn reward_bounds(&self) -> (f64, f64);
}

/// Affine map of rewards into `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RewardScale {
    pub lo: f64,
    pub hi: f64,
}

impl RewardScale {
    pub fn identity() -> Self {
        Self { lo: 0.0, hi: 1.0 }
    }

    pub fn from_bounds((lo, hi): (f64, f64)) -> Self {
        if hi > lo {
            Self { lo, hi }
        } else {
            Self::identity()
        }
    }

    #[inline]
    pub fn apply(&self, r: f64) -> f64 {
        (r - self.lo) / (self.hi - self.lo)
    }

    pub fn range(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Count table of a full profile, given agent states and actions.
pub fn count_table(n_states: usize, n_actions: usize, states: &[u32], actions: &[u32]) -> Vec<u32> {
    let mut counts = vec![0u32; n_states * n_actions];
    for (&s, &a) in states.iter().zip(actions) {
        counts[s as usize * n_actions + a as usize] += 1;
    }
    counts
}

/// A mean-field game whose rewards are passed through a [`RewardScale`].
pub struct ScaledMfg {
    inner: Arc<dyn MeanFieldGame>,
    scale: RewardScale,
}

impl ScaledMfg {
    pub fn new(inner: Arc<dyn MeanFieldGame>, scale: RewardScale) -> Self {
        Self { inner, scale }
    }

    /// Rescales the game's declared reward bounds onto `[0, 1]`.
    pub fn normalized(inner: Arc<dyn MeanFieldGame>) -> Self {
        let scale = RewardScale::from_bounds(inner.reward_bounds());
        Self { inner, scale }
    }

    pub fn scale(&self) -> RewardScale {
        self.scale
    }
}

impl MeanFieldGame for ScaledMfg {
    fn horizon(&self) -> usize {
        self.inner.horizon()
    }

    fn n_states(&self) -> usize {
        self.inner.n_states()
    }

    fn n_actions(&self) -> usize {
        self.inner.n_actions()
    }

    fn initial_distribution(&self) -> &[f64] {
        self.inner.initial_distribution()
    }

    fn transition(&self, state: usize, action: usize, mu: &PopulationDistribution, out: &mut [f64]) {
        self.inner.transition(state, action, mu, out)
    }

    fn reward(&self, state: usize, action: usize, mu: &PopulationDistribution) -> f64 {
        self.scale.apply(self.inner.reward(state, action, mu))
    }

    fn reward_bounds(&self) -> (f64, f64) {
        let (lo, hi) = self.inner.reward_bounds();
        (self.scale.apply(lo), self.scale.apply(hi))
    }
}
