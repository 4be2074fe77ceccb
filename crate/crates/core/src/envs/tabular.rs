//! A small tabular mean-field game with linear population coupling, and
//! its exactly symmetric N-player counterpart.
//!
//! Rewards: `R(s,a,mu) = base(s,a) - crowd * mu(s,a)`.
//! Transitions: `P(.|s,a,mu) = (1 - herd) K(.|s,a) + herd * mu_S`, where
//! `mu_S` is the state marginal of `mu`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dist::{validate_distribution, PopulationDistribution};
use crate::error::{Error, Result};
use crate::game::{DynamicGame, MeanFieldGame};
use crate::rng::{uniform_simplex, RngStream};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TabularParams {
    pub n_states: usize,
    pub n_actions: usize,
    pub horizon: usize,
    pub rho0: Vec<f64>,
    /// `[s][a]`
    pub base_reward: Vec<f64>,
    /// `[s][a][s']`
    pub base_transition: Vec<f64>,
    pub crowd: f64,
    pub herd: f64,
}

#[derive(Clone, Debug)]
pub struct TabularMfg {
    params: TabularParams,
    bounds: (f64, f64),
}

pub struct TabularBuilder {
    params: TabularParams,
}

impl TabularBuilder {
    pub fn rho0(mut self, rho0: Vec<f64>) -> Self {
        self.params.rho0 = rho0;
        self
    }

    pub fn base_reward(mut self, r: Vec<f64>) -> Self {
        self.params.base_reward = r;
        self
    }

    pub fn base_transition(mut self, k: Vec<f64>) -> Self {
        self.params.base_transition = k;
        self
    }

    pub fn population_reward_coupling(mut self, crowd: f64) -> Self {
        self.params.crowd = crowd;
        self
    }

    pub fn population_transition_coupling(mut self, herd: f64) -> Self {
        self.params.herd = herd;
        self
    }

    pub fn build(self) -> Result<TabularMfg> {
        TabularMfg::from_params(self.params)
    }
}

impl TabularMfg {
    /// Defaults: uniform `rho0`, zero rewards, agents stay in place, no coupling.
    pub fn builder(n_states: usize, n_actions: usize, horizon: usize) -> TabularBuilder {
        let mut stay = vec![0.0; n_states * n_actions * n_states];
        for s in 0..n_states {
            for a in 0..n_actions {
                stay[(s * n_actions + a) * n_states + s] = 1.0;
            }
        }
        TabularBuilder {
            params: TabularParams {
                n_states,
                n_actions,
                horizon,
                rho0: vec![1.0 / n_states as f64; n_states],
                base_reward: vec![0.0; n_states * n_actions],
                base_transition: stay,
                crowd: 0.0,
                herd: 0.0,
            },
        }
    }

    /// Random instance: base rewards in `[crowd, 1]`, random kernel rows,
    /// random `rho0`.
    pub fn random(n_states: usize, n_actions: usize, horizon: usize, crowd: f64, herd: f64, stream: RngStream) -> Self {
        use rand::Rng;
        let mut rng = stream.rng();
        let rho0 = uniform_simplex(&mut rng, n_states);
        let base_reward = (0..n_states * n_actions)
            .map(|_| crowd + (1.0 - crowd) * rng.gen::<f64>())
            .collect();
        let mut base_transition = Vec::with_capacity(n_states * n_actions * n_states);
        for _ in 0..n_states * n_actions {
            base_transition.extend(uniform_simplex(&mut rng, n_states));
        }
        Self::from_params(TabularParams {
            n_states,
            n_actions,
            horizon,
            rho0,
            base_reward,
            base_transition,
            crowd,
            herd,
        })
        .expect("random tabular parameters are valid")
    }

    pub fn from_params(params: TabularParams) -> Result<Self> {
        let (ns, na) = (params.n_states, params.n_actions);
        if ns == 0 || na == 0 || params.horizon == 0 {
            return Err(Error::InvalidConfig("tabular game needs nonzero sizes".into()));
        }
        validate_distribution(&params.rho0)?;
        if params.rho0.len() != ns
            || params.base_reward.len() != ns * na
            || params.base_transition.len() != ns * na * ns
        {
            return Err(Error::ShapeMismatch("tabular parameter lengths".into()));
        }
        for row in params.base_transition.chunks(ns) {
            validate_distribution(row)?;
        }
        if !(0.0..=1.0).contains(&params.herd) {
            return Err(Error::InvalidConfig(format!("herd = {} outside [0, 1]", params.herd)));
        }
        let hi = params.base_reward.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = params.base_reward.iter().copied().fold(f64::INFINITY, f64::min) - params.crowd.max(0.0);
        let hi = hi - params.crowd.min(0.0);
        Ok(Self {
            params,
            bounds: (lo, hi),
        })
    }

    pub fn params(&self) -> &TabularParams {
        &self.params
    }

    pub(crate) fn reward_at(&self, s: usize, a: usize, weights: &[f64]) -> f64 {
        let cell = s * self.params.n_actions + a;
        self.params.base_reward[cell] - self.params.crowd * weights[cell]
    }

    pub(crate) fn transition_at(&self, s: usize, a: usize, weights: &[f64], out: &mut [f64]) {
        let (ns, na) = (self.params.n_states, self.params.n_actions);
        let herd = self.params.herd;
        let k = &self.params.base_transition[(s * na + a) * ns..(s * na + a + 1) * ns];
        for (s2, o) in out.iter_mut().enumerate() {
            let marginal: f64 = if herd > 0.0 {
                weights[s2 * na..(s2 + 1) * na].iter().sum()
            } else {
                0.0
            };
            *o = (1.0 - herd) * k[s2] + herd * marginal;
        }
    }
}

impl MeanFieldGame for TabularMfg {
    fn horizon(&self) -> usize {
        self.params.horizon
    }

    fn n_states(&self) -> usize {
        self.params.n_states
    }

    fn n_actions(&self) -> usize {
        self.params.n_actions
    }

    fn initial_distribution(&self) -> &[f64] {
        &self.params.rho0
    }

    fn transition(&self, state: usize, action: usize, mu: &PopulationDistribution, out: &mut [f64]) {
        self.transition_at(state, action, mu.weights(), out);
    }

    fn reward(&self, state: usize, action: usize, mu: &PopulationDistribution) -> f64 {
        self.reward_at(state, action, mu.weights())
    }

    fn reward_bounds(&self) -> (f64, f64) {
        self.bounds
    }
}

/// Empirical distribution of the other agents as plain weights. An agent
/// with no opponents sees a point mass on its own cell.
pub(crate) fn others_weights(others: &[u32], own_cell: usize) -> Vec<f64> {
    let total: u32 = others.iter().sum();
    if total == 0 {
        let mut w = vec![0.0; others.len()];
        w[own_cell] = 1.0;
        return w;
    }
    others.iter().map(|&c| f64::from(c) / f64::from(total)).collect()
}

/// N identical agents playing the tabular game against the empirical
/// distribution of their opponents.
#[derive(Clone, Debug)]
pub struct SymmetricGame {
    mfg: Arc<TabularMfg>,
    n_agents: usize,
}

impl SymmetricGame {
    pub fn new(mfg: Arc<TabularMfg>, n_agents: usize) -> Result<Self> {
        if n_agents == 0 {
            return Err(Error::InvalidConfig("n_agents must be positive".into()));
        }
        Ok(Self { mfg, n_agents })
    }

    pub fn companion(&self) -> Arc<TabularMfg> {
        self.mfg.clone()
    }
}

impl DynamicGame for SymmetricGame {
    fn n_agents(&self) -> usize {
        self.n_agents
    }

    fn horizon(&self) -> usize {
        self.mfg.params.horizon
    }

    fn n_states(&self) -> usize {
        self.mfg.params.n_states
    }

    fn n_actions(&self) -> usize {
        self.mfg.params.n_actions
    }

    fn initial_distribution(&self) -> &[f64] {
        &self.mfg.params.rho0
    }

    fn transition(&self, _agent: usize, state: usize, action: usize, others: &[u32], out: &mut [f64]) {
        let w = others_weights(others, state * self.mfg.params.n_actions + action);
        self.mfg.transition_at(state, action, &w, out);
    }

    fn reward(&self, _agent: usize, state: usize, action: usize, others: &[u32]) -> f64 {
        let w = others_weights(others, state * self.mfg.params.n_actions + action);
        self.mfg.reward_at(state, action, &w)
    }

    fn reward_bounds(&self) -> (f64, f64) {
        self.mfg.bounds
    }

    fn analytic_mean_field(&self) -> Option<Arc<dyn MeanFieldGame>> {
        Some(self.mfg.clone())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymmetricTestConfig {
    #[serde(default = "default_sym_agents")]
    pub n_agents: usize,
    #[serde(default = "default_sym_horizon")]
    pub horizon: usize,
    #[serde(default = "default_two")]
    pub n_states: usize,
    #[serde(default = "default_two")]
    pub n_actions: usize,
    #[serde(default = "default_crowd")]
    pub crowd: f64,
    #[serde(default = "default_herd")]
    pub herd: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_sym_agents() -> usize {
    200
}
fn default_sym_horizon() -> usize {
    3
}
fn default_two() -> usize {
    2
}
fn default_crowd() -> f64 {
    0.3
}
fn default_herd() -> f64 {
    0.3
}

impl Default for SymmetricTestConfig {
    fn default() -> Self {
        Self {
            n_agents: default_sym_agents(),
            horizon: default_sym_horizon(),
            n_states: 2,
            n_actions: 2,
            crowd: default_crowd(),
            herd: default_herd(),
            seed: 0,
        }
    }
}

impl SymmetricTestConfig {
    pub fn draw(&self) -> Result<TabularParams> {
        if self.n_states > 4 || self.n_actions > 4 || self.horizon > 5 {
            return Err(Error::InvalidConfig(
                "symmetric test fixture is limited to |S|, |A| <= 4 and H <= 5".into(),
            ));
        }
        Ok(TabularMfg::random(
            self.n_states,
            self.n_actions,
            self.horizon,
            self.crowd,
            self.herd,
            RngStream::new(self.seed, 0x5E1F),
        )
        .params)
    }
}

/// The exactly symmetric control fixture: identical agents whose
/// companion MFG is their exact mean-field limit.
pub fn make_symmetric_test(params: TabularParams, n_agents: usize) -> Result<(Arc<SymmetricGame>, Arc<TabularMfg>)> {
    let mfg = Arc::new(TabularMfg::from_params(params)?);
    let game = Arc::new(SymmetricGame::new(mfg.clone(), n_agents)?);
    Ok((game, mfg))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_rows_are_distributions() {
        let mfg = TabularMfg::random(3, 2, 2, 0.3, 0.4, RngStream::new(1, 1));
        let mu = PopulationDistribution::new(3, 2, vec![0.1, 0.2, 0.3, 0.1, 0.2, 0.1]).unwrap();
        let mut p = vec![0.0; 3];
        for s in 0..3 {
            for a in 0..2 {
                mfg.transition(s, a, &mu, &mut p);
                validate_distribution(&p).unwrap();
            }
        }
        let (lo, hi) = mfg.reward_bounds();
        assert!(lo >= 0.0 && hi <= 1.0);
    }

    #[test]
    fn grid_profiles_match_companion() {
        let params = SymmetricTestConfig::default().draw().unwrap();
        let (game, mfg) = make_symmetric_test(params, 5).unwrap();
        let others = [1u32, 0, 2, 1];
        let mu = PopulationDistribution::from_counts(2, 2, &others).unwrap();
        assert_eq!(game.reward(3, 1, 0, &others), mfg.reward(1, 0, &mu));
    }

    #[test]
    fn rejects_oversized_fixture() {
        let cfg = SymmetricTestConfig {
            n_states: 5,
            ..Default::default()
        };
        assert!(cfg.draw().is_err());
    }
}
