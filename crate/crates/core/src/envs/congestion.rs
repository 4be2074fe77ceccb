//! Asymmetric dynamic congestion games.
//!
//! Agent `i` at cell `(s, a)` earns `h_i(s, a, k) + r_i(s, a)` where `k` is
//! the number of agents (itself included) at that cell and `h_i(s, a, .)`
//! is non-increasing. Transitions ignore the population. The companion MFG
//! averages the per-agent rewards, with `h_i` extended to the continuum by
//! linear interpolation between `floor(N u)` and `ceil(N u)`.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dist::{validate_distribution, PopulationDistribution};
use crate::error::{Error, Result};
use crate::game::{DynamicGame, MeanFieldGame};
use crate::rng::RngStream;

use super::Range;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CongestionConfig {
    #[serde(default = "default_agents")]
    pub n_agents: usize,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_size")]
    pub n_states: usize,
    #[serde(default = "default_size")]
    pub n_actions: usize,
    /// Range of the per-agent slopes `w` in `h_i(s,a,k) = w (1 - k / N)`.
    #[serde(default = "default_weight")]
    pub congestion_weight: Range,
    /// Range of the shared base reward `r(s, a)`.
    #[serde(default = "default_base")]
    pub base_reward: Range,
    /// Per-agent perturbation of `r(s, a)`, uniform in `[-noise, noise]`.
    #[serde(default = "default_noise")]
    pub reward_noise: f64,
    /// Probability that action `a` moves the agent to state `a mod |S|`.
    #[serde(default = "default_move")]
    pub move_prob: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_agents() -> usize {
    100
}
fn default_horizon() -> usize {
    5
}
fn default_size() -> usize {
    3
}
fn default_weight() -> Range {
    Range { lo: 0.6, hi: 1.0 }
}
fn default_base() -> Range {
    Range { lo: 0.0, hi: 1.0 }
}
fn default_noise() -> f64 {
    0.05
}
fn default_move() -> f64 {
    0.8
}

impl Default for CongestionConfig {
    fn default() -> Self {
        Self {
            n_agents: default_agents(),
            horizon: default_horizon(),
            n_states: default_size(),
            n_actions: default_size(),
            congestion_weight: default_weight(),
            base_reward: default_base(),
            reward_noise: default_noise(),
            move_prob: default_move(),
            seed: 0,
        }
    }
}

/// How the per-agent congestion curves are stored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CurveSpec {
    /// `h_i(s,a,k) = weights[i][s][a] * (1 - k / N)`.
    Linear { weights: Vec<f64> },
    /// Explicit values `values[i][s][a][k]` for `k = 0..=N`.
    Table { values: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CongestionParams {
    pub n_agents: usize,
    pub horizon: usize,
    pub n_states: usize,
    pub n_actions: usize,
    pub rho0: Vec<f64>,
    /// `[s][a][s']`
    pub transition: Vec<f64>,
    /// `r_i(s, a)` as `[i][s][a]`
    pub base: Vec<f64>,
    pub curves: CurveSpec,
}

impl CongestionConfig {
    pub fn draw(&self) -> Result<CongestionParams> {
        let (n, ns, na) = (self.n_agents, self.n_states, self.n_actions);
        if n == 0 || ns == 0 || na == 0 || self.horizon == 0 {
            return Err(Error::InvalidConfig("congestion game needs nonzero sizes".into()));
        }
        self.congestion_weight.validate("congestion_weight")?;
        self.base_reward.validate("base_reward")?;
        if !(0.0..=1.0).contains(&self.move_prob) {
            return Err(Error::InvalidConfig("move_prob must lie in [0, 1]".into()));
        }
        let mut rng = RngStream::new(self.seed, 0xC0C0).rng();
        let shared: Vec<f64> = (0..ns * na).map(|_| self.base_reward.sample(&mut rng)).collect();
        let mut base = Vec::with_capacity(n * ns * na);
        let mut weights = Vec::with_capacity(n * ns * na);
        for _ in 0..n {
            for &r in &shared {
                let eps = if self.reward_noise > 0.0 {
                    rng.gen_range(-self.reward_noise..=self.reward_noise)
                } else {
                    0.0
                };
                base.push((r + eps).clamp(0.0, 1.0));
                weights.push(self.congestion_weight.sample(&mut rng));
            }
        }
        let mut transition = vec![0.0; ns * na * ns];
        for s in 0..ns {
            for a in 0..na {
                let row = &mut transition[(s * na + a) * ns..(s * na + a + 1) * ns];
                row[a % ns] += self.move_prob;
                row[s] += 1.0 - self.move_prob;
            }
        }
        Ok(CongestionParams {
            n_agents: n,
            horizon: self.horizon,
            n_states: ns,
            n_actions: na,
            rho0: vec![1.0 / ns as f64; ns],
            transition,
            base,
            curves: CurveSpec::Linear { weights },
        })
    }
}

#[derive(Clone, Debug)]
pub struct CongestionGame {
    params: CongestionParams,
    /// `h_i(s, a, k)` as `[i][s][a][k]`, `k = 0..=N`.
    curves: Vec<f64>,
    bounds: (f64, f64),
    mfg: Arc<CongestionMfg>,
}

#[derive(Clone, Debug)]
pub struct CongestionMfg {
    n_agents: usize,
    horizon: usize,
    n_states: usize,
    n_actions: usize,
    rho0: Vec<f64>,
    transition: Vec<f64>,
    /// Population-average curve `[s][a][k]`.
    mean_curve: Vec<f64>,
    /// Population-average base reward `[s][a]`.
    mean_base: Vec<f64>,
    bounds: (f64, f64),
}

/// Linear interpolation of `curve` (indexed by `k = 0..=n`) at `n u`.
pub fn interpolate_curve(curve: &[f64], n: usize, u: f64) -> f64 {
    let x = (n as f64 * u).clamp(0.0, n as f64);
    let lo = x.floor() as usize;
    let hi = x.ceil() as usize;
    if lo == hi {
        return curve[lo];
    }
    let frac = x - lo as f64;
    (1.0 - frac) * curve[lo] + frac * curve[hi]
}

pub fn make_congestion(params: CongestionParams) -> Result<(Arc<CongestionGame>, Arc<CongestionMfg>)> {
    let (n, ns, na) = (params.n_agents, params.n_states, params.n_actions);
    let cells = ns * na;
    if params.rho0.len() != ns || params.transition.len() != cells * ns || params.base.len() != n * cells {
        return Err(Error::ShapeMismatch("congestion parameter lengths".into()));
    }
    validate_distribution(&params.rho0)?;
    for row in params.transition.chunks(ns) {
        validate_distribution(row)?;
    }
    let width = n + 1;
    let curves: Vec<f64> = match &params.curves {
        CurveSpec::Linear { weights } => {
            if weights.len() != n * cells {
                return Err(Error::ShapeMismatch("congestion weights need one entry per agent and cell".into()));
            }
            if weights.iter().any(|w| !(0.0..=1.0).contains(w)) {
                return Err(Error::InvalidConfig("congestion weights must lie in [0, 1]".into()));
            }
            weights
                .iter()
                .flat_map(|&w| (0..width).map(move |k| w * (1.0 - k as f64 / n as f64)))
                .collect()
        }
        CurveSpec::Table { values } => {
            if values.len() != n * cells * width {
                return Err(Error::ShapeMismatch("congestion table needs N + 1 values per agent and cell".into()));
            }
            values.clone()
        }
    };
    for (idx, curve) in curves.chunks(width).enumerate() {
        let (agent, cell) = (idx / cells, idx % cells);
        for k in 0..n {
            if curve[k + 1] > curve[k] {
                return Err(Error::NonMonotoneCurve {
                    agent,
                    state: cell / na,
                    action: cell % na,
                    count: k,
                });
            }
        }
    }

    let mut mean_curve = vec![0.0; cells * width];
    let mut mean_base = vec![0.0; cells];
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..n {
        for cell in 0..cells {
            let curve = &curves[(i * cells + cell) * width..(i * cells + cell + 1) * width];
            let r = params.base[i * cells + cell];
            for (m, h) in mean_curve[cell * width..(cell + 1) * width].iter_mut().zip(curve) {
                *m += h / n as f64;
            }
            mean_base[cell] += r / n as f64;
            lo = lo.min(curve[n] + r);
            hi = hi.max(curve[0] + r);
        }
    }
    let bounds = (lo, hi);
    let mfg = Arc::new(CongestionMfg {
        n_agents: n,
        horizon: params.horizon,
        n_states: ns,
        n_actions: na,
        rho0: params.rho0.clone(),
        transition: params.transition.clone(),
        mean_curve,
        mean_base,
        bounds,
    });
    let game = Arc::new(CongestionGame {
        params,
        curves,
        bounds,
        mfg: mfg.clone(),
    });
    Ok((game, mfg))
}

impl CongestionGame {
    pub fn params(&self) -> &CongestionParams {
        &self.params
    }

    /// `h_i(s, a, .)` over `k = 0..=N`.
    pub fn curve(&self, agent: usize, state: usize, action: usize) -> &[f64] {
        let width = self.params.n_agents + 1;
        let cell = state * self.params.n_actions + action;
        let start = (agent * self.params.n_states * self.params.n_actions + cell) * width;
        &self.curves[start..start + width]
    }
}

impl CongestionMfg {
    pub fn mean_curve(&self, state: usize, action: usize) -> &[f64] {
        let width = self.n_agents + 1;
        let cell = state * self.n_actions + action;
        &self.mean_curve[cell * width..(cell + 1) * width]
    }
}

fn copy_row(transition: &[f64], ns: usize, na: usize, s: usize, a: usize, out: &mut [f64]) {
    out.copy_from_slice(&transition[(s * na + a) * ns..(s * na + a + 1) * ns]);
}

impl DynamicGame for CongestionGame {
    fn n_agents(&self) -> usize {
        self.params.n_agents
    }

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

    fn transition(&self, _agent: usize, state: usize, action: usize, _others: &[u32], out: &mut [f64]) {
        copy_row(&self.params.transition, self.params.n_states, self.params.n_actions, state, action, out);
    }

    fn reward(&self, agent: usize, state: usize, action: usize, others: &[u32]) -> f64 {
        let cell = state * self.params.n_actions + action;
        let k = (others[cell] as usize + 1).min(self.params.n_agents);
        let cells = self.params.n_states * self.params.n_actions;
        self.curve(agent, state, action)[k] + self.params.base[agent * cells + cell]
    }

    fn reward_bounds(&self) -> (f64, f64) {
        self.bounds
    }

    fn analytic_mean_field(&self) -> Option<Arc<dyn MeanFieldGame>> {
        Some(self.mfg.clone())
    }
}

impl MeanFieldGame for CongestionMfg {
    fn horizon(&self) -> usize {
        self.horizon
    }

    fn n_states(&self) -> usize {
        self.n_states
    }

    fn n_actions(&self) -> usize {
        self.n_actions
    }

    fn initial_distribution(&self) -> &[f64] {
        &self.rho0
    }

    fn transition(&self, state: usize, action: usize, _mu: &PopulationDistribution, out: &mut [f64]) {
        copy_row(&self.transition, self.n_states, self.n_actions, state, action, out);
    }

    fn reward(&self, state: usize, action: usize, mu: &PopulationDistribution) -> f64 {
        let cell = state * self.n_actions + action;
        interpolate_curve(self.mean_curve(state, action), self.n_agents, mu.weights()[cell]) + self.mean_base[cell]
    }

    fn reward_bounds(&self) -> (f64, f64) {
        self.bounds
    }
}
