//! Asymmetric population rock-paper-scissors.
//!
//! States and actions are `{R, P, S}` (indices 0, 1, 2). Choosing action
//! `a` moves the agent to state `a` deterministically. An agent in state
//! `s` is penalized by the fraction of opponents in the state that beats
//! `s`, rewarded by the fraction in the state `s` beats, and pays a crowd
//! cost proportional to the fraction choosing the same action:
//!
//! `R^i(s, a) = -c^i sigma_A(a) - u^i_s sigma_S(beats(s)) + v^i_s sigma_S(beaten_by(s))`

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dist::{validate_distribution, PopulationDistribution};
use crate::error::{Error, Result};
use crate::game::{DynamicGame, MeanFieldGame};
use crate::rng::RngStream;

use super::{Range, tabular::others_weights};

const BASE_U: [f64; 3] = [2.0, 4.0, 6.0];
const BASE_V: [f64; 3] = [1.0, 2.0, 3.0];

/// The state that beats `s`.
fn predator(s: usize) -> usize {
    (s + 1) % 3
}

/// The state beaten by `s`.
fn prey(s: usize) -> usize {
    (s + 2) % 3
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArpsConfig {
    #[serde(default = "default_agents")]
    pub n_agents: usize,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_noise")]
    pub noise_scale: f64,
    /// Per-agent crowd cost `c^i`, drawn uniformly from this range.
    #[serde(default)]
    pub crowd_cost: Range,
    /// Count the agent itself in the population fractions.
    #[serde(default)]
    pub include_self: bool,
    /// Initial state distribution; uniform when absent.
    #[serde(default)]
    pub rho0: Option<Vec<f64>>,
    #[serde(default)]
    pub seed: u64,
}

fn default_agents() -> usize {
    2000
}
fn default_horizon() -> usize {
    10
}
fn default_noise() -> f64 {
    0.1
}

impl Default for ArpsConfig {
    fn default() -> Self {
        Self {
            n_agents: default_agents(),
            horizon: default_horizon(),
            noise_scale: default_noise(),
            crowd_cost: Range::default(),
            include_self: false,
            rho0: None,
            seed: 0,
        }
    }
}

/// Fully drawn A-RPS instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArpsParams {
    pub n_agents: usize,
    pub horizon: usize,
    pub include_self: bool,
    pub rho0: Vec<f64>,
    pub u: Vec<[f64; 3]>,
    pub v: Vec<[f64; 3]>,
    pub c: Vec<f64>,
}

impl ArpsConfig {
    pub fn draw(&self) -> Result<ArpsParams> {
        if self.n_agents < 2 {
            return Err(Error::InvalidConfig("A-RPS needs at least 2 agents".into()));
        }
        if !(self.noise_scale >= 0.0) {
            return Err(Error::InvalidConfig("noise_scale must be non-negative".into()));
        }
        self.crowd_cost.validate("crowd_cost")?;
        let mut rng = RngStream::new(self.seed, 0xA295).rng();
        let noise = |rng: &mut rand_chacha::ChaCha8Rng| {
            if self.noise_scale > 0.0 {
                rng.gen_range(-self.noise_scale..=self.noise_scale)
            } else {
                0.0
            }
        };
        let mut u = Vec::with_capacity(self.n_agents);
        let mut v = Vec::with_capacity(self.n_agents);
        let mut c = Vec::with_capacity(self.n_agents);
        for _ in 0..self.n_agents {
            u.push([BASE_U[0] + noise(&mut rng), BASE_U[1] + noise(&mut rng), BASE_U[2] + noise(&mut rng)]);
            v.push([BASE_V[0] + noise(&mut rng), BASE_V[1] + noise(&mut rng), BASE_V[2] + noise(&mut rng)]);
            c.push(self.crowd_cost.sample(&mut rng));
        }
        Ok(ArpsParams {
            n_agents: self.n_agents,
            horizon: self.horizon,
            include_self: self.include_self,
            rho0: self.rho0.clone().unwrap_or_else(|| vec![1.0 / 3.0; 3]),
            u,
            v,
            c,
        })
    }
}

#[derive(Clone, Debug)]
pub struct ArpsGame {
    params: ArpsParams,
    bounds: (f64, f64),
    mfg: Arc<ArpsMfg>,
}

#[derive(Clone, Debug)]
pub struct ArpsMfg {
    horizon: usize,
    rho0: Vec<f64>,
    u: [f64; 3],
    v: [f64; 3],
    c: f64,
    bounds: (f64, f64),
}

fn reward_formula(u: &[f64; 3], v: &[f64; 3], c: f64, s: usize, a: usize, w: &[f64]) -> f64 {
    let state_frac = |x: usize| w[x * 3] + w[x * 3 + 1] + w[x * 3 + 2];
    let action_frac = w[a] + w[3 + a] + w[6 + a];
    -c * action_frac - u[s] * state_frac(predator(s)) + v[s] * state_frac(prey(s))
}

fn deterministic_move(action: usize, out: &mut [f64]) {
    out.iter_mut().for_each(|x| *x = 0.0);
    out[action] = 1.0;
}

pub fn make_arps(params: ArpsParams) -> Result<(Arc<ArpsGame>, Arc<ArpsMfg>)> {
    let n = params.n_agents;
    if n < 2 || params.u.len() != n || params.v.len() != n || params.c.len() != n {
        return Err(Error::ShapeMismatch("A-RPS coefficient vectors must have one entry per agent".into()));
    }
    if params.rho0.len() != 3 {
        return Err(Error::ShapeMismatch("A-RPS rho0 must have 3 entries".into()));
    }
    validate_distribution(&params.rho0)?;
    let max_u = params.u.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    let max_v = params.v.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    let max_c = params.c.iter().copied().fold(0.0, f64::max);
    let bounds = (-max_c - max_u.max(0.0), max_v.max(0.0));

    let mut u = [0.0; 3];
    let mut v = [0.0; 3];
    let mut c = 0.0;
    for i in 0..n {
        for k in 0..3 {
            u[k] += params.u[i][k] / n as f64;
            v[k] += params.v[i][k] / n as f64;
        }
        c += params.c[i] / n as f64;
    }
    let mfg = Arc::new(ArpsMfg {
        horizon: params.horizon,
        rho0: params.rho0.clone(),
        u,
        v,
        c,
        bounds,
    });
    let game = Arc::new(ArpsGame {
        params,
        bounds,
        mfg: mfg.clone(),
    });
    Ok((game, mfg))
}

impl ArpsGame {
    pub fn params(&self) -> &ArpsParams {
        &self.params
    }

    fn fractions(&self, state: usize, action: usize, others: &[u32]) -> Vec<f64> {
        let own = state * 3 + action;
        if self.params.include_self {
            let total: u32 = others.iter().sum::<u32>() + 1;
            others
                .iter()
                .enumerate()
                .map(|(cell, &c)| f64::from(c + u32::from(cell == own)) / f64::from(total))
                .collect()
        } else {
            others_weights(others, own)
        }
    }
}

impl DynamicGame for ArpsGame {
    fn n_agents(&self) -> usize {
        self.params.n_agents
    }

    fn horizon(&self) -> usize {
        self.params.horizon
    }

    fn n_states(&self) -> usize {
        3
    }

    fn n_actions(&self) -> usize {
        3
    }

    fn initial_distribution(&self) -> &[f64] {
        &self.params.rho0
    }

    fn transition(&self, _agent: usize, _state: usize, action: usize, _others: &[u32], out: &mut [f64]) {
        deterministic_move(action, out);
    }

    fn reward(&self, agent: usize, state: usize, action: usize, others: &[u32]) -> f64 {
        let w = self.fractions(state, action, others);
        reward_formula(&self.params.u[agent], &self.params.v[agent], self.params.c[agent], state, action, &w)
    }

    fn reward_bounds(&self) -> (f64, f64) {
        self.bounds
    }

    fn analytic_mean_field(&self) -> Option<Arc<dyn MeanFieldGame>> {
        Some(self.mfg.clone())
    }
}

impl MeanFieldGame for ArpsMfg {
    fn horizon(&self) -> usize {
        self.horizon
    }

    fn n_states(&self) -> usize {
        3
    }

    fn n_actions(&self) -> usize {
        3
    }

    fn initial_distribution(&self) -> &[f64] {
        &self.rho0
    }

    fn transition(&self, _state: usize, action: usize, _mu: &PopulationDistribution, out: &mut [f64]) {
        deterministic_move(action, out);
    }

    fn reward(&self, state: usize, action: usize, mu: &PopulationDistribution) -> f64 {
        reward_formula(&self.u, &self.v, self.c, state, action, mu.weights())
    }

    fn reward_bounds(&self) -> (f64, f64) {
        self.bounds
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noiseless(n: usize) -> (Arc<ArpsGame>, Arc<ArpsMfg>) {
        let cfg = ArpsConfig {
            n_agents: n,
            horizon: 3,
            noise_scale: 0.0,
            ..Default::default()
        };
        make_arps(cfg.draw().unwrap()).unwrap()
    }

    #[test]
    fn winner_against_all_scissors() {
        let (game, _) = noiseless(5);
        // Everyone else sits in state S (index 2), any action.
        let others = [0, 0, 0, 0, 0, 0, 2, 1, 1];
        for a in 0..3 {
            assert_eq!(game.reward(0, 0, a, &others), 1.0);
        }
    }

    #[test]
    fn transitions_follow_the_action() {
        let (game, mfg) = noiseless(5);
        let mut out = [0.0; 3];
        for s in 0..3 {
            game.transition(2, s, 1, &[4, 0, 0, 0, 0, 0, 0, 0, 0], &mut out);
            assert_eq!(out, [0.0, 1.0, 0.0]);
            mfg.transition(s, 1, &PopulationDistribution::uniform(3, 3), &mut out);
            assert_eq!(out, [0.0, 1.0, 0.0]);
        }
    }

    #[test]
    fn draws_are_reproducible_and_bounded() {
        let cfg = ArpsConfig {
            n_agents: 50,
            noise_scale: 0.1,
            seed: 9,
            ..Default::default()
        };
        let a = cfg.draw().unwrap();
        assert_eq!(a, cfg.draw().unwrap());
        for (u, v) in a.u.iter().zip(&a.v) {
            for k in 0..3 {
                assert!((u[k] - BASE_U[k]).abs() <= 0.1 && (v[k] - BASE_V[k]).abs() <= 0.1);
            }
        }
    }

    #[test]
    fn companion_is_population_average_on_grid() {
        let cfg = ArpsConfig {
            n_agents: 4,
            noise_scale: 0.1,
            crowd_cost: Range { lo: 0.0, hi: 0.5 },
            seed: 3,
            ..Default::default()
        };
        let (game, mfg) = make_arps(cfg.draw().unwrap()).unwrap();
        let others = [1, 0, 0, 0, 1, 0, 0, 0, 1];
        let mu = PopulationDistribution::from_counts(3, 3, &others).unwrap();
        for s in 0..3 {
            for a in 0..3 {
                let avg: f64 = (0..4).map(|i| game.reward(i, s, a, &others)).sum::<f64>() / 4.0;
                assert!((avg - mfg.reward(s, a, &mu)).abs() < 1e-12);
            }
        }
    }
}
