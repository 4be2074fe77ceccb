//! Infection model with heterogeneous agents.
//!
//! States `{I, H}` = `{0, 1}`, actions `{D, U}` = `{0, 1}` (distance, go out).
//! A healthy agent going out gets infected with probability
//! `alpha_i * frac(I, U)`; an infected agent heals with probability
//! `theta_i`. Reward is `-1{s = I} - xi_i 1{a = D}`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dist::PopulationDistribution;
use crate::error::{Error, Result};
use crate::game::{DynamicGame, MeanFieldGame};
use crate::rng::RngStream;

use super::{tabular::others_weights, Range};

pub const INFECTED: usize = 0;
pub const HEALTHY: usize = 1;
pub const DISTANCE: usize = 0;
pub const GO_OUT: usize = 1;

const INFECTED_OUT_CELL: usize = INFECTED * 2 + GO_OUT;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AsisConfig {
    #[serde(default = "default_agents")]
    pub n_agents: usize,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_susceptibility")]
    pub susceptibility: Range,
    #[serde(default = "default_healing")]
    pub healing: Range,
    #[serde(default = "default_aversion")]
    pub isolation_aversion: Range,
    #[serde(default)]
    pub seed: u64,
}

fn default_agents() -> usize {
    1000
}
fn default_horizon() -> usize {
    20
}
// Half-widths 0.05 / 0.05 / 0.1 put the transition and reward deviations
// from the population-mean companion at about 0.1 each.
fn default_susceptibility() -> Range {
    Range { lo: 0.75, hi: 0.85 }
}
fn default_healing() -> Range {
    Range { lo: 0.25, hi: 0.35 }
}
fn default_aversion() -> Range {
    Range { lo: 0.3, hi: 0.5 }
}

impl Default for AsisConfig {
    fn default() -> Self {
        Self {
            n_agents: default_agents(),
            horizon: default_horizon(),
            susceptibility: default_susceptibility(),
            healing: default_healing(),
            isolation_aversion: default_aversion(),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AsisParams {
    pub n_agents: usize,
    pub horizon: usize,
    pub susceptibility: Vec<f64>,
    pub healing: Vec<f64>,
    pub isolation_aversion: Vec<f64>,
}

impl AsisConfig {
    pub fn draw(&self) -> Result<AsisParams> {
        if self.n_agents == 0 {
            return Err(Error::InvalidConfig("A-SIS needs at least one agent".into()));
        }
        for (name, r) in [
            ("susceptibility", &self.susceptibility),
            ("healing", &self.healing),
            ("isolation_aversion", &self.isolation_aversion),
        ] {
            r.validate(name)?;
            if r.lo < 0.0 || r.hi > 1.0 {
                return Err(Error::InvalidConfig(format!("{name} range must lie in [0, 1]")));
            }
        }
        let mut rng = RngStream::new(self.seed, 0xA515).rng();
        let mut alpha = Vec::with_capacity(self.n_agents);
        let mut theta = Vec::with_capacity(self.n_agents);
        let mut xi = Vec::with_capacity(self.n_agents);
        for _ in 0..self.n_agents {
            alpha.push(self.susceptibility.sample(&mut rng));
            theta.push(self.healing.sample(&mut rng));
            xi.push(self.isolation_aversion.sample(&mut rng));
        }
        Ok(AsisParams {
            n_agents: self.n_agents,
            horizon: self.horizon,
            susceptibility: alpha,
            healing: theta,
            isolation_aversion: xi,
        })
    }
}

const RHO0: [f64; 2] = [0.5, 0.5];
const BOUNDS: (f64, f64) = (-2.0, 0.0);

#[derive(Clone, Debug)]
pub struct AsisGame {
    params: AsisParams,
    mfg: Arc<AsisMfg>,
}

/// Companion MFG with population-mean parameters.
#[derive(Clone, Debug)]
pub struct AsisMfg {
    horizon: usize,
    alpha: f64,
    theta: f64,
    xi: f64,
}

fn infection_prob(alpha: f64, theta: f64, state: usize, action: usize, infected_out: f64) -> f64 {
    match (state, action) {
        (HEALTHY, DISTANCE) => 0.0,
        (HEALTHY, _) => alpha * infected_out,
        _ => 1.0 - theta,
    }
}

fn write_kernel(p_infected: f64, out: &mut [f64]) {
    out[INFECTED] = p_infected;
    out[HEALTHY] = 1.0 - p_infected;
}

fn reward_formula(xi: f64, state: usize, action: usize) -> f64 {
    -f64::from(u8::from(state == INFECTED)) - xi * f64::from(u8::from(action == DISTANCE))
}

pub fn make_asis(params: AsisParams) -> Result<(Arc<AsisGame>, Arc<AsisMfg>)> {
    let n = params.n_agents;
    if n == 0
        || params.susceptibility.len() != n
        || params.healing.len() != n
        || params.isolation_aversion.len() != n
    {
        return Err(Error::ShapeMismatch("A-SIS parameter vectors must have one entry per agent".into()));
    }
    let all = params
        .susceptibility
        .iter()
        .chain(&params.healing)
        .chain(&params.isolation_aversion);
    if all.clone().any(|x| !(0.0..=1.0).contains(x)) {
        return Err(Error::InvalidConfig("A-SIS parameters must lie in [0, 1]".into()));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / n as f64;
    let mfg = Arc::new(AsisMfg {
        horizon: params.horizon,
        alpha: mean(&params.susceptibility),
        theta: mean(&params.healing),
        xi: mean(&params.isolation_aversion),
    });
    let game = Arc::new(AsisGame {
        params,
        mfg: mfg.clone(),
    });
    Ok((game, mfg))
}

impl AsisGame {
    pub fn params(&self) -> &AsisParams {
        &self.params
    }
}

impl DynamicGame for AsisGame {
    fn n_agents(&self) -> usize {
        self.params.n_agents
    }

    fn horizon(&self) -> usize {
        self.params.horizon
    }

    fn n_states(&self) -> usize {
        2
    }

    fn n_actions(&self) -> usize {
        2
    }

    fn initial_distribution(&self) -> &[f64] {
        &RHO0
    }

    fn transition(&self, agent: usize, state: usize, action: usize, others: &[u32], out: &mut [f64]) {
        let infected_out = if state == HEALTHY && action == GO_OUT {
            others_weights(others, state * 2 + action)[INFECTED_OUT_CELL]
        } else {
            0.0
        };
        let p = infection_prob(
            self.params.susceptibility[agent],
            self.params.healing[agent],
            state,
            action,
            infected_out,
        );
        write_kernel(p, out);
    }

    fn reward(&self, agent: usize, state: usize, action: usize, _others: &[u32]) -> f64 {
        reward_formula(self.params.isolation_aversion[agent], state, action)
    }

    fn reward_bounds(&self) -> (f64, f64) {
        BOUNDS
    }

    fn analytic_mean_field(&self) -> Option<Arc<dyn MeanFieldGame>> {
        Some(self.mfg.clone())
    }
}

impl MeanFieldGame for AsisMfg {
    fn horizon(&self) -> usize {
        self.horizon
    }

    fn n_states(&self) -> usize {
        2
    }

    fn n_actions(&self) -> usize {
        2
    }

    fn initial_distribution(&self) -> &[f64] {
        &RHO0
    }

    fn transition(&self, state: usize, action: usize, mu: &PopulationDistribution, out: &mut [f64]) {
        let p = infection_prob(self.alpha, self.theta, state, action, mu.weights()[INFECTED_OUT_CELL]);
        write_kernel(p, out);
    }

    fn reward(&self, state: usize, action: usize, _mu: &PopulationDistribution) -> f64 {
        reward_formula(self.xi, state, action)
    }

    fn reward_bounds(&self) -> (f64, f64) {
        BOUNDS
    }
}
