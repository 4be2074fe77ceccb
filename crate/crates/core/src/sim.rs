//! N-player trajectory engine: episode sampling, return estimation and
//! sampled N-player exploitability.
//!
//! Every episode draws its randomness from one [`RngStream`] in a fixed
//! order: one uniform per agent for the initial state, then per step one
//! uniform per agent for the action and one per agent for the transition.
//! Because the number of draws does not depend on the policies, two arms
//! of a deviation experiment run on the same stream share every random
//! number except through the deviator's changed choices.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::entropy;
use crate::error::{Error, Result};
use crate::game::{DynamicGame, MeanFieldGame};
use crate::mfg::{best_response, induce_flow, induce_flow_profile};
use crate::numeric::{mean_and_stderr, pairwise_sum};
use crate::policy::Policy;
use crate::rng::{sample_index, uniform, RngStream};

/// The policies played by the N agents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "policies", rename_all = "kebab-case")]
pub enum PolicyProfile {
    /// Every agent plays the same policy.
    Shared(Policy),
    /// Agent `i` plays `policies[i]`.
    PerAgent(Vec<Policy>),
}

impl PolicyProfile {
    pub fn policy(&self, agent: usize) -> &Policy {
        match self {
            PolicyProfile::Shared(pi) => pi,
            PolicyProfile::PerAgent(pis) => &pis[agent],
        }
    }

    pub fn validate(&self, game: &dyn DynamicGame) -> Result<()> {
        let check = |pi: &Policy| -> Result<()> {
            if pi.horizon() != game.horizon() {
                return Err(Error::HorizonMismatch {
                    expected: game.horizon(),
                    got: pi.horizon(),
                });
            }
            if pi.n_states() != game.n_states() || pi.n_actions() != game.n_actions() {
                return Err(Error::ShapeMismatch(format!(
                    "policy over {}x{} for a game over {}x{}",
                    pi.n_states(),
                    pi.n_actions(),
                    game.n_states(),
                    game.n_actions()
                )));
            }
            Ok(())
        };
        match self {
            PolicyProfile::Shared(pi) => check(pi),
            PolicyProfile::PerAgent(pis) => {
                if pis.len() != game.n_agents() {
                    return Err(Error::ShapeMismatch(format!(
                        "{} policies for {} agents",
                        pis.len(),
                        game.n_agents()
                    )));
                }
                pis.iter().try_for_each(check)
            }
        }
    }
}

/// One sampled episode. Per-step arrays are stored as `[h][agent]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub stream: RngStream,
    pub n_agents: usize,
    pub horizon: usize,
    pub n_actions: usize,
    pub states: Vec<u32>,
    pub actions: Vec<u32>,
    /// Raw rewards, recorded before the transition of each step.
    pub rewards: Vec<f64>,
}

impl Trajectory {
    #[inline]
    pub fn state(&self, h: usize, agent: usize) -> usize {
        self.states[h * self.n_agents + agent] as usize
    }

    #[inline]
    pub fn action(&self, h: usize, agent: usize) -> usize {
        self.actions[h * self.n_agents + agent] as usize
    }

    #[inline]
    pub fn reward(&self, h: usize, agent: usize) -> f64 {
        self.rewards[h * self.n_agents + agent]
    }

    /// Total raw reward of `agent`.
    pub fn total_reward(&self, agent: usize) -> f64 {
        (0..self.horizon).map(|h| self.reward(h, agent)).sum()
    }

    /// Count table of the full profile at step `h`.
    pub fn counts(&self, h: usize, n_states: usize) -> Vec<u32> {
        let mut counts = vec![0u32; n_states * self.n_actions];
        for i in 0..self.n_agents {
            counts[self.state(h, i) * self.n_actions + self.action(h, i)] += 1;
        }
        counts
    }
}

/// Samples one episode with agent `i` playing `policy_of(i)`.
fn simulate<'a>(game: &dyn DynamicGame, policy_of: impl Fn(usize) -> &'a Policy, stream: RngStream) -> Trajectory {
    let (n, hz, ns, na) = (game.n_agents(), game.horizon(), game.n_states(), game.n_actions());
    let mut rng = stream.rng();
    let rho0 = game.initial_distribution();
    let mut states = Vec::with_capacity(hz * n);
    let mut actions = Vec::with_capacity(hz * n);
    let mut rewards = Vec::with_capacity(hz * n);
    let mut current: Vec<u32> = (0..n).map(|_| sample_index(rho0, uniform(&mut rng)) as u32).collect();
    let mut next = vec![0u32; n];
    let mut chosen = vec![0u32; n];
    let mut counts = vec![0u32; ns * na];
    let mut p = vec![0.0; ns];
    for h in 0..hz {
        for i in 0..n {
            let row = policy_of(i).row(h, current[i] as usize);
            chosen[i] = sample_index(row, uniform(&mut rng)) as u32;
        }
        counts.iter_mut().for_each(|c| *c = 0);
        for i in 0..n {
            counts[current[i] as usize * na + chosen[i] as usize] += 1;
        }
        let last = h + 1 == hz;
        for i in 0..n {
            let (s, a) = (current[i] as usize, chosen[i] as usize);
            let cell = s * na + a;
            counts[cell] -= 1;
            rewards.push(game.reward(i, s, a, &counts));
            if !last {
                game.transition(i, s, a, &counts, &mut p);
                next[i] = sample_index(&p, uniform(&mut rng)) as u32;
            }
            counts[cell] += 1;
        }
        states.extend_from_slice(&current);
        actions.extend_from_slice(&chosen);
        std::mem::swap(&mut current, &mut next);
    }
    Trajectory {
        stream,
        n_agents: n,
        horizon: hz,
        n_actions: na,
        states,
        actions,
        rewards,
    }
}

/// Samples one episode; all agents advance synchronously.
pub fn sample_episode(game: &dyn DynamicGame, profile: &PolicyProfile, stream: RngStream) -> Result<Trajectory> {
    profile.validate(game)?;
    Ok(simulate(game, |i| profile.policy(i), stream))
}

/// Like [`sample_episode`] but agent `deviator` plays `deviation` instead.
pub fn sample_episode_deviating(
    game: &dyn DynamicGame,
    profile: &PolicyProfile,
    deviator: usize,
    deviation: &Policy,
    stream: RngStream,
) -> Result<Trajectory> {
    profile.validate(game)?;
    PolicyProfile::Shared(deviation.clone()).validate(game)?;
    if deviator >= game.n_agents() {
        return Err(Error::IndexOutOfRange {
            what: "agent",
            index: deviator,
            size: game.n_agents(),
        });
    }
    Ok(simulate(
        game,
        |i| if i == deviator { deviation } else { profile.policy(i) },
        stream,
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReturnEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub episodes: usize,
}

impl ReturnEstimate {
    pub fn from_samples(samples: &[f64]) -> Self {
        let (mean, std_error) = mean_and_stderr(samples);
        Self {
            mean,
            std_error,
            episodes: samples.len(),
        }
    }

    /// The same estimate under a positive reward rescaling.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            mean: self.mean * factor,
            std_error: self.std_error * factor.abs(),
            episodes: self.episodes,
        }
    }
}

/// Monte-Carlo estimate of agent `agent`'s expected total raw reward.
/// Episode `e` runs on `stream.child(e)`.
pub fn estimate_return(
    game: &dyn DynamicGame,
    profile: &PolicyProfile,
    agent: usize,
    episodes: usize,
    stream: RngStream,
) -> Result<ReturnEstimate> {
    profile.validate(game)?;
    if episodes == 0 {
        return Err(Error::InvalidConfig("episodes must be at least 1".into()));
    }
    if agent >= game.n_agents() {
        return Err(Error::IndexOutOfRange {
            what: "agent",
            index: agent,
            size: game.n_agents(),
        });
    }
    let samples: Vec<f64> = (0..episodes as u64)
        .into_par_iter()
        .map(|e| simulate(game, |i| profile.policy(i), stream.child(e)).total_reward(agent))
        .collect();
    Ok(ReturnEstimate::from_samples(&samples))
}

/// Which agent deviates in the exploitability estimator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Deviator {
    /// Always the given agent.
    Agent(usize),
    /// Agent `e mod N` in episode `e`.
    RoundRobin,
}

impl Default for Deviator {
    fn default() -> Self {
        Deviator::Agent(0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NplayerEvalConfig {
    #[serde(default = "default_eval_episodes")]
    pub episodes: usize,
    #[serde(default)]
    pub tau: f64,
    #[serde(default)]
    pub deviator: Deviator,
}

fn default_eval_episodes() -> usize {
    2000
}

impl Default for NplayerEvalConfig {
    fn default() -> Self {
        Self {
            episodes: default_eval_episodes(),
            tau: 0.0,
            deviator: Deviator::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct NplayerExploitability {
    /// Paired estimate of `J(pi', pi^{-i}) - J(pi)` in raw reward units.
    pub estimate: ReturnEstimate,
    /// Deviation policy: the best response against the mean-field flow.
    pub best_response: Policy,
}

fn regularized_return(traj: &Trajectory, agent: usize, pi: &Policy, tau: f64) -> f64 {
    let mut total = traj.total_reward(agent);
    if tau > 0.0 {
        for h in 0..traj.horizon {
            total += tau * entropy(pi.row(h, traj.state(h, agent)));
        }
    }
    total
}

/// Sampled lower bound on N-player exploitability.
///
/// The deviation policy is the best response against the mean-field flow
/// of the profile (computed on `mfg`); both arms of episode `e` run on
/// `stream.child(e)`, so identical policies give exactly zero.
pub fn estimate_nplayer_exploitability(
    game: &dyn DynamicGame,
    mfg: &dyn MeanFieldGame,
    profile: &PolicyProfile,
    cfg: &NplayerEvalConfig,
    stream: RngStream,
) -> Result<NplayerExploitability> {
    profile.validate(game)?;
    if cfg.episodes == 0 {
        return Err(Error::InvalidConfig("episodes must be at least 1".into()));
    }
    let n = game.n_agents();
    if let Deviator::Agent(d) = cfg.deviator {
        if d >= n {
            return Err(Error::IndexOutOfRange {
                what: "agent",
                index: d,
                size: n,
            });
        }
    }
    let flow = match profile {
        PolicyProfile::Shared(pi) => induce_flow(mfg, pi)?,
        PolicyProfile::PerAgent(pis) => induce_flow_profile(mfg, pis)?,
    };
    let (br, _) = best_response(mfg, &flow, cfg.tau);
    let samples: Vec<f64> = (0..cfg.episodes as u64)
        .into_par_iter()
        .map(|e| {
            let d = match cfg.deviator {
                Deviator::Agent(d) => d,
                Deviator::RoundRobin => (e % n as u64) as usize,
            };
            let s = stream.child(e);
            let base = simulate(game, |i| profile.policy(i), s);
            let dev = simulate(game, |i| if i == d { &br } else { profile.policy(i) }, s);
            regularized_return(&dev, d, &br, cfg.tau) - regularized_return(&base, d, profile.policy(d), cfg.tau)
        })
        .collect();
    Ok(NplayerExploitability {
        estimate: ReturnEstimate::from_samples(&samples),
        best_response: br,
    })
}

/// Mean over `episodes` of `||mu_hat_h - Lambda(pi)_h||_1` for every step,
/// where `mu_hat_h` is the empirical distribution of all N agents.
pub fn mean_field_deviation(
    game: &dyn DynamicGame,
    mfg: &dyn MeanFieldGame,
    pi: &Policy,
    episodes: usize,
    stream: RngStream,
) -> Result<Vec<f64>> {
    let profile = PolicyProfile::Shared(pi.clone());
    profile.validate(game)?;
    let flow = induce_flow(mfg, pi)?;
    let (n, hz, ns) = (game.n_agents(), game.horizon(), game.n_states());
    let per_episode: Vec<Vec<f64>> = (0..episodes as u64)
        .into_par_iter()
        .map(|e| {
            let traj = simulate(game, |_| pi, stream.child(e));
            (0..hz)
                .map(|h| {
                    let counts = traj.counts(h, ns);
                    counts
                        .iter()
                        .zip(flow.at(h).weights())
                        .map(|(&c, &w)| (f64::from(c) / n as f64 - w).abs())
                        .sum()
                })
                .collect()
        })
        .collect();
    Ok((0..hz)
        .map(|h| {
            let column: Vec<f64> = per_episode.iter().map(|d| d[h]).collect();
            pairwise_sum(&column) / episodes.max(1) as f64
        })
        .collect())
}
