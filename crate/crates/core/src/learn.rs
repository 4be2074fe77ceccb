//! Learning from N-player trajectories: TD estimation of mean-field
//! Q-values, policy mirror descent on a shared policy (Symm-PMD) and the
//! independent per-agent baseline (IPMD).

use std::time::Instant;

use log::{debug, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::entropy;
use crate::error::{Error, Result};
use crate::game::{DynamicGame, MeanFieldGame, RewardScale};
use crate::mfg::{mfg_exploitability, profile_exploitability, warn_tau_range, Schedule};
use crate::policy::{Policy, PolicyAverage, QTable};
use crate::rng::RngStream;
use crate::sim::{estimate_nplayer_exploitability, NplayerEvalConfig, PolicyProfile, ReturnEstimate, Trajectory};

/// Episodes sampled concurrently before their updates are applied in
/// order. Fixed so that results never depend on the worker count.
const EPISODE_BATCH: usize = 32;

/// Closed-form entropy-regularized mirror step
/// `pi_new(a) ∝ pi(a)^(1 - tau eta) exp(eta q(a))`, computed in the log
/// domain.
pub fn pmd_policy_update(pi_row: &[f64], q_row: &[f64], eta: f64, tau: f64) -> Result<Vec<f64>> {
    if pi_row.len() != q_row.len() {
        return Err(Error::ShapeMismatch(format!(
            "policy row of length {} with q row of length {}",
            pi_row.len(),
            q_row.len()
        )));
    }
    if !(tau * eta < 1.0) || eta <= 0.0 || tau < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "mirror step needs eta > 0, tau >= 0 and tau * eta < 1 (eta = {eta}, tau = {tau})"
        )));
    }
    if let Some(index) = pi_row.iter().position(|&p| !(p > 0.0)) {
        return Err(Error::SupportCollapsed { index });
    }
    let keep = 1.0 - tau * eta;
    let logits: Vec<f64> = pi_row.iter().zip(q_row).map(|(p, q)| keep * p.ln() + eta * q).collect();
    Ok(crate::dist::softmax_from_logits(&logits))
}

/// `beta_k = 2 / delta / (k + 2 / delta)`.
pub fn td_learning_rate(k: u64, delta: f64) -> f64 {
    let c = 2.0 / delta;
    c / (k as f64 + c)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TdConfig {
    /// Number of sampled episodes `M`.
    #[serde(default = "default_td_epochs")]
    pub epochs: usize,
    #[serde(default)]
    pub tau: f64,
    /// Visitation floor of the learning-rate schedule; estimated by a pilot
    /// run when absent.
    #[serde(default)]
    pub delta: Option<f64>,
    /// Update from every agent's transitions rather than agent 0 alone.
    #[serde(default = "yes")]
    pub use_all_agents: bool,
    /// Clip estimates to `[0, H (1 + log |A|)]` (requires normalized rewards).
    #[serde(default = "yes")]
    pub clip_qmax: bool,
    /// Map rewards affinely onto `[0, 1]` using the game's declared bounds.
    #[serde(default = "yes")]
    pub normalize_rewards: bool,
    /// Episodes of the pilot run that estimates `delta`.
    #[serde(default = "default_pilot")]
    pub pilot_episodes: usize,
}

fn default_td_epochs() -> usize {
    500
}
fn default_pilot() -> usize {
    200
}
fn yes() -> bool {
    true
}

impl Default for TdConfig {
    fn default() -> Self {
        Self {
            epochs: default_td_epochs(),
            tau: 0.0,
            delta: None,
            use_all_agents: true,
            clip_qmax: true,
            normalize_rewards: true,
            pilot_episodes: default_pilot(),
        }
    }
}

impl TdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau >= 0.0) {
            return Err(Error::InvalidConfig("td tau must be non-negative".into()));
        }
        if let Some(d) = self.delta {
            if !(d > 0.0 && d <= 1.0) {
                return Err(Error::InvalidConfig(format!("delta = {d} outside (0, 1]")));
            }
        }
        if self.delta.is_none() && self.pilot_episodes == 0 {
            return Err(Error::InvalidConfig("pilot_episodes must be positive when delta is estimated".into()));
        }
        Ok(())
    }
}

/// Result of a TD run.
#[derive(Clone, Debug)]
pub struct TdOutput {
    /// One table for shared learning, one per agent for independent learning.
    pub tables: Vec<QTable>,
    pub delta: f64,
    /// Episodes sampled, pilot included.
    pub episodes: usize,
}

impl TdOutput {
    pub fn q(&self) -> &QTable {
        &self.tables[0]
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Tracking {
    Agent0,
    AllShared,
    PerAgent,
}

fn sample_batch(game: &dyn DynamicGame, profile: &PolicyProfile, stream: RngStream, range: std::ops::Range<u64>) -> Vec<Trajectory> {
    range
        .into_par_iter()
        .map(|e| crate::sim::sample_episode(game, profile, stream.child(e)).expect("profile validated"))
        .collect()
}

/// Smallest positive empirical visitation frequency of the tracked agents
/// over `(h, s, a)`, floored at `1 / (10 |S| |A|)`.
fn pilot_delta(game: &dyn DynamicGame, profile: &PolicyProfile, episodes: usize, stream: RngStream, tracked: &[usize]) -> f64 {
    let (hz, ns, na) = (game.horizon(), game.n_states(), game.n_actions());
    let mut counts = vec![0u64; hz * ns * na];
    let mut start = 0;
    while start < episodes {
        let end = (start + EPISODE_BATCH).min(episodes);
        for traj in sample_batch(game, profile, stream, start as u64..end as u64) {
            for h in 0..hz {
                for &i in tracked {
                    counts[(h * ns + traj.state(h, i)) * na + traj.action(h, i)] += 1;
                }
            }
        }
        start = end;
    }
    let per_step = (episodes * tracked.len()) as f64;
    let min_positive = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| c as f64 / per_step)
        .fold(1.0, f64::min);
    min_positive.max(1.0 / (10 * ns * na) as f64)
}

fn entropy_table(pi: &Policy) -> Vec<f64> {
    let mut out = Vec::with_capacity(pi.horizon() * pi.n_states());
    for h in 0..pi.horizon() {
        for s in 0..pi.n_states() {
            out.push(entropy(pi.row(h, s)));
        }
    }
    out
}

fn run_td(game: &dyn DynamicGame, profile: &PolicyProfile, cfg: &TdConfig, stream: RngStream, tracking: Tracking) -> Result<TdOutput> {
    cfg.validate()?;
    profile.validate(game)?;
    let (n, hz, ns, na) = (game.n_agents(), game.horizon(), game.n_states(), game.n_actions());
    let tracked: Vec<usize> = match tracking {
        Tracking::Agent0 => vec![0],
        Tracking::AllShared | Tracking::PerAgent => (0..n).collect(),
    };
    let scale = if cfg.normalize_rewards {
        RewardScale::from_bounds(game.reward_bounds())
    } else {
        RewardScale::identity()
    };
    let clip = if cfg.clip_qmax && cfg.normalize_rewards {
        Some(hz as f64 * (1.0 + (na as f64).ln()))
    } else {
        if cfg.clip_qmax {
            warn!("Q clipping needs normalized rewards; skipping it");
        }
        None
    };
    let mut episodes_used = 0;
    let delta = match cfg.delta {
        Some(d) => d,
        None if cfg.epochs == 0 => 1.0,
        None => {
            episodes_used += cfg.pilot_episodes;
            pilot_delta(game, profile, cfg.pilot_episodes, stream.child(1), &tracked)
        }
    };
    debug!("td: delta = {delta}, {} episodes", cfg.epochs);

    let n_tables = if tracking == Tracking::PerAgent { n } else { 1 };
    let mut tables = vec![QTable::zeros(hz, ns, na, cfg.tau); n_tables];
    let entropies: Vec<Vec<f64>> = match profile {
        PolicyProfile::Shared(pi) => vec![entropy_table(pi)],
        PolicyProfile::PerAgent(pis) => pis.iter().map(entropy_table).collect(),
    };
    let entropy_of = |i: usize, h: usize, s: usize| {
        let table = if entropies.len() == 1 { &entropies[0] } else { &entropies[i] };
        table[h * ns + s]
    };

    let episode_stream = stream.child(0);
    let mut start = 0;
    while start < cfg.epochs {
        let end = (start + EPISODE_BATCH).min(cfg.epochs);
        let batch = sample_batch(game, profile, episode_stream, start as u64..end as u64);
        for (offset, traj) in batch.iter().enumerate() {
            let m = (start + offset) as u64;
            for h in 0..hz {
                for (slot, &i) in tracked.iter().enumerate() {
                    let k = match tracking {
                        Tracking::AllShared => m * n as u64 + slot as u64,
                        _ => m,
                    };
                    let beta = td_learning_rate(k, delta);
                    let q = &mut tables[if tracking == Tracking::PerAgent { i } else { 0 }];
                    let (s, a) = (traj.state(h, i), traj.action(h, i));
                    let mut target = scale.apply(traj.reward(h, i)) + cfg.tau * entropy_of(i, h, s);
                    if h + 1 < hz {
                        target += q.get(h + 1, traj.state(h + 1, i), traj.action(h + 1, i));
                    }
                    let old = q.get(h, s, a);
                    let mut new = old + beta * (target - old);
                    if let Some(qmax) = clip {
                        new = new.clamp(0.0, qmax);
                    }
                    q.set(h, s, a, new);
                }
            }
        }
        start = end;
    }
    episodes_used += cfg.epochs;
    Ok(TdOutput {
        tables,
        delta,
        episodes: episodes_used,
    })
}

/// TD estimation of the mean-field Q-values of a shared policy from
/// N-player episodes. Episode `m` runs on `stream.child(0).child(m)`; the
/// delta pilot runs on `stream.child(1)`.
pub fn td_learn(game: &dyn DynamicGame, pi: &Policy, cfg: &TdConfig, stream: RngStream) -> Result<TdOutput> {
    let tracking = if cfg.use_all_agents {
        Tracking::AllShared
    } else {
        Tracking::Agent0
    };
    run_td(game, &PolicyProfile::Shared(pi.clone()), cfg, stream, tracking)
}

/// Independent TD: agent `i` learns its own table from its own transitions
/// while the population plays `profile`.
pub fn td_learn_independent(game: &dyn DynamicGame, profile: &PolicyProfile, cfg: &TdConfig, stream: RngStream) -> Result<TdOutput> {
    run_td(game, profile, cfg, stream, Tracking::PerAgent)
}

/// When and how exploitability is measured during a PMD run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    /// Cadence of mean-field exploitability rows; `max(1, T / 50)` when absent.
    #[serde(default)]
    pub mfg_every: Option<usize>,
    /// Cadence of sampled N-player exploitability; final epoch only when absent.
    #[serde(default)]
    pub nplayer_every: Option<usize>,
    /// Skip the N-player evaluation entirely.
    #[serde(default)]
    pub skip_nplayer: bool,
    #[serde(default)]
    pub nplayer: NplayerEvalConfig,
    /// Entropy coefficient of the reported mean-field exploitability, in
    /// the same units as the training `tau` (normalized rewards when
    /// `normalize_rewards` is set).
    #[serde(default)]
    pub exploitability_tau: f64,
    /// Record wall-clock time in the trace (breaks byte-identical traces).
    #[serde(default)]
    pub record_wall_time: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            mfg_every: None,
            nplayer_every: None,
            skip_nplayer: false,
            nplayer: NplayerEvalConfig::default(),
            exploitability_tau: 0.0,
            record_wall_time: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PmdConfig {
    /// Number of mirror steps `T`.
    pub epochs: usize,
    pub tau: f64,
    #[serde(default)]
    pub td: TdConfig,
    #[serde(default = "Schedule::default_learning_rate")]
    pub lr_schedule: Schedule,
    #[serde(default = "Schedule::default_mixing")]
    pub mixing_schedule: Schedule,
    #[serde(default = "yes")]
    pub normalize_rewards: bool,
    /// Filled from the experiment's evaluation block.
    #[serde(skip)]
    pub eval: EvalConfig,
}

impl PmdConfig {
    pub fn new(epochs: usize, tau: f64, td_episodes: usize) -> Self {
        Self {
            epochs,
            tau,
            td: TdConfig {
                epochs: td_episodes,
                ..TdConfig::default()
            },
            lr_schedule: Schedule::default_learning_rate(),
            mixing_schedule: Schedule::default_mixing(),
            normalize_rewards: true,
            eval: EvalConfig::default(),
        }
    }

    fn td_config(&self) -> TdConfig {
        TdConfig {
            tau: self.tau,
            normalize_rewards: self.normalize_rewards,
            ..self.td.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau >= 0.0) {
            return Err(Error::InvalidConfig("tau must be non-negative".into()));
        }
        for t in 0..self.epochs {
            let eta = self.lr_schedule.at(t);
            if !(eta > 0.0 && self.tau * eta < 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "learning rate {eta} at epoch {t} violates eta > 0 and tau * eta < 1"
                )));
            }
            let mix = self.mixing_schedule.at(t);
            if !(0.0..=1.0).contains(&mix) {
                return Err(Error::InvalidConfig(format!("mixing weight {mix} at epoch {t} outside [0, 1]")));
            }
        }
        self.td_config().validate()
    }

    fn mfg_every(&self) -> usize {
        self.eval.mfg_every.unwrap_or((self.epochs / 50).max(1)).max(1)
    }
}

/// One row of the metric trace; `None` is written as `NA`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub epoch: usize,
    pub samples_consumed: usize,
    pub mfg_exploitability: Option<f64>,
    pub mfg_exploitability_normalized: Option<f64>,
    pub nplayer_exploitability: Option<ReturnEstimate>,
    pub nplayer_exploitability_normalized: Option<ReturnEstimate>,
    pub wall_time_s: Option<f64>,
}

/// Output of a PMD run.
#[derive(Clone, Debug)]
pub struct PmdOutcome {
    /// Averaged policies: one for Symm-PMD, one per agent for IPMD.
    pub averaged: Vec<Policy>,
    /// Last iterates.
    pub last: Vec<Policy>,
    pub trace: Vec<MetricRow>,
    pub samples_consumed: usize,
}

impl PmdOutcome {
    pub fn profile(&self) -> PolicyProfile {
        if self.averaged.len() == 1 {
            PolicyProfile::Shared(self.averaged[0].clone())
        } else {
            PolicyProfile::PerAgent(self.averaged.clone())
        }
    }
}

fn mirror_step(pi: &Policy, q: &QTable, eta: f64, tau: f64, mix: f64) -> Result<Policy> {
    let mut next = pi.clone();
    for h in 0..pi.horizon() {
        for s in 0..pi.n_states() {
            let bonus = tau * pi.entropy_at(h, s);
            let q_hat: Vec<f64> = q.row(h, s).iter().map(|x| x - bonus).collect();
            next.set_row(h, s, &pmd_policy_update(pi.row(h, s), &q_hat, eta, tau)?)?;
        }
    }
    next.mix_uniform(mix);
    Ok(next)
}

struct Evaluator<'a> {
    game: &'a dyn DynamicGame,
    mfg: Option<&'a dyn MeanFieldGame>,
    cfg: &'a PmdConfig,
    stream: RngStream,
    range: f64,
    /// Converts `exploitability_tau` to raw reward units.
    tau_scale: f64,
    started: Instant,
}

impl Evaluator<'_> {
    fn row(&self, epoch: usize, samples: usize, averaged: &[Policy]) -> Result<Option<MetricRow>> {
        let last = epoch == self.cfg.epochs;
        let want_mfg = self.mfg.is_some() && (last || epoch % self.cfg.mfg_every() == 0);
        let want_nplayer = self.mfg.is_some()
            && !self.cfg.eval.skip_nplayer
            && (last || self.cfg.eval.nplayer_every.is_some_and(|k| k > 0 && epoch % k == 0));
        if !want_mfg && !want_nplayer {
            return Ok(None);
        }
        let mut row = MetricRow {
            epoch,
            samples_consumed: samples,
            mfg_exploitability: None,
            mfg_exploitability_normalized: None,
            nplayer_exploitability: None,
            nplayer_exploitability_normalized: None,
            wall_time_s: None,
        };
        let mfg = self.mfg.expect("checked above");
        if want_mfg {
            let tau = self.cfg.eval.exploitability_tau * self.tau_scale;
            let value = if averaged.len() == 1 {
                mfg_exploitability(mfg, &averaged[0], tau)?.value
            } else {
                profile_exploitability(mfg, averaged, tau)?.value
            };
            row.mfg_exploitability = Some(value);
            row.mfg_exploitability_normalized = Some(value / self.range);
        }
        if want_nplayer {
            let profile = if averaged.len() == 1 {
                PolicyProfile::Shared(averaged[0].clone())
            } else {
                PolicyProfile::PerAgent(averaged.to_vec())
            };
            let est = estimate_nplayer_exploitability(self.game, mfg, &profile, &self.cfg.eval.nplayer, self.stream.child(epoch as u64))?;
            row.nplayer_exploitability = Some(est.estimate);
            row.nplayer_exploitability_normalized = Some(est.estimate.scaled(1.0 / self.range));
        }
        if self.cfg.eval.record_wall_time {
            row.wall_time_s = Some(self.started.elapsed().as_secs_f64());
        }
        Ok(Some(row))
    }
}

/// Sink receiving each metric row as soon as it is computed.
pub type TraceSink<'a> = &'a mut dyn FnMut(&MetricRow) -> Result<()>;

fn pmd_loop(
    game: &dyn DynamicGame,
    mfg: Option<&dyn MeanFieldGame>,
    cfg: &PmdConfig,
    stream: RngStream,
    independent: bool,
    sink: TraceSink<'_>,
) -> Result<PmdOutcome> {
    cfg.validate()?;
    warn_tau_range(cfg.tau);
    let (n, hz, ns, na) = (game.n_agents(), game.horizon(), game.n_states(), game.n_actions());
    let (lo, hi) = game.reward_bounds();
    let evaluator = Evaluator {
        game,
        mfg,
        cfg,
        stream: stream.child(1),
        range: if hi > lo { hi - lo } else { 1.0 },
        tau_scale: if cfg.normalize_rewards && hi > lo { hi - lo } else { 1.0 },
        started: Instant::now(),
    };
    let train = stream.child(0);
    let td_cfg = cfg.td_config();
    let copies = if independent { n } else { 1 };
    let mut policies = vec![Policy::uniform(hz, ns, na); copies];
    let mut averages: Vec<PolicyAverage> = policies.iter().map(PolicyAverage::new).collect();
    let mut samples = 0;
    let mut trace = Vec::new();
    let mut emit = |row: Option<MetricRow>, trace: &mut Vec<MetricRow>| -> Result<()> {
        if let Some(row) = row {
            sink(&row)?;
            trace.push(row);
        }
        Ok(())
    };
    let averaged_now = |averages: &[PolicyAverage]| averages.iter().map(PolicyAverage::average).collect::<Vec<_>>();
    emit(evaluator.row(0, 0, &averaged_now(&averages))?, &mut trace)?;
    for t in 0..cfg.epochs {
        let out = if independent {
            td_learn_independent(game, &PolicyProfile::PerAgent(policies.clone()), &td_cfg, train.child(t as u64))?
        } else {
            td_learn(game, &policies[0], &td_cfg, train.child(t as u64))?
        };
        samples += out.episodes;
        let eta = cfg.lr_schedule.at(t);
        let mix = cfg.mixing_schedule.at(t);
        for ((pi, q), avg) in policies.iter_mut().zip(&out.tables).zip(averages.iter_mut()) {
            *pi = mirror_step(pi, q, eta, cfg.tau, mix)?;
            avg.push(pi);
        }
        let needs_row = t + 1 == cfg.epochs
            || (t + 1) % cfg.mfg_every() == 0
            || cfg.eval.nplayer_every.is_some_and(|k| k > 0 && (t + 1) % k == 0);
        if needs_row {
            emit(evaluator.row(t + 1, samples, &averaged_now(&averages))?, &mut trace)?;
        }
    }
    Ok(PmdOutcome {
        averaged: averaged_now(&averages),
        last: policies,
        trace,
        samples_consumed: samples,
    })
}

/// Symm-PMD: mirror descent on one shared policy whose Q-values are
/// estimated by TD from N-player episodes. Metrics use `mfg` when given,
/// else the game's analytic companion, else are skipped.
pub fn symm_pmd(game: &dyn DynamicGame, cfg: &PmdConfig, stream: RngStream) -> Result<PmdOutcome> {
    let companion = game.analytic_mean_field();
    symm_pmd_with(game, companion.as_deref(), cfg, stream, &mut |_| Ok(()))
}

pub fn symm_pmd_with(
    game: &dyn DynamicGame,
    mfg: Option<&dyn MeanFieldGame>,
    cfg: &PmdConfig,
    stream: RngStream,
    sink: TraceSink<'_>,
) -> Result<PmdOutcome> {
    pmd_loop(game, mfg, cfg, stream, false, sink)
}

/// Independent PMD: one policy per agent, each updated from its own
/// TD estimate. Same schedules and episode budget as [`symm_pmd`].
pub fn ipmd(game: &dyn DynamicGame, cfg: &PmdConfig, stream: RngStream) -> Result<PmdOutcome> {
    let companion = game.analytic_mean_field();
    ipmd_with(game, companion.as_deref(), cfg, stream, &mut |_| Ok(()))
}

pub fn ipmd_with(
    game: &dyn DynamicGame,
    mfg: Option<&dyn MeanFieldGame>,
    cfg: &PmdConfig,
    stream: RngStream,
    sink: TraceSink<'_>,
) -> Result<PmdOutcome> {
    pmd_loop(game, mfg, cfg, stream, true, sink)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::tabular::{make_symmetric_test, SymmetricTestConfig};

    #[test]
    fn learning_rate_schedule() {
        assert_eq!(td_learning_rate(0, 0.5), 1.0);
        assert_eq!(td_learning_rate(4, 0.5), 0.5);
    }

    #[test]
    fn mirror_step_examples() {
        let u = pmd_policy_update(&[1.0 / 3.0; 3], &[0.7; 3], 0.9, 0.2).unwrap();
        for x in u {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
        let u = pmd_policy_update(&[0.5, 0.5], &[1.0, 0.0], 0.5, 0.0).unwrap();
        let e = 0.5f64.exp();
        assert!((u[0] - e / (e + 1.0)).abs() < 1e-12);
        assert!((u[0] - 0.6225).abs() < 1e-4);
    }

    #[test]
    fn mirror_step_errors() {
        assert!(matches!(
            pmd_policy_update(&[1.0, 0.0], &[0.0, 0.0], 0.5, 0.1),
            Err(Error::SupportCollapsed { index: 1 })
        ));
        assert!(pmd_policy_update(&[0.5, 0.5], &[0.0, 0.0], 2.0, 0.5).is_err());
    }

    #[test]
    fn zero_episodes_give_zero_table() {
        let (game, _) = make_symmetric_test(SymmetricTestConfig::default().draw().unwrap(), 5).unwrap();
        let cfg = TdConfig {
            epochs: 0,
            ..Default::default()
        };
        let out = td_learn(game.as_ref(), &Policy::uniform(3, 2, 2), &cfg, RngStream::new(0, 0)).unwrap();
        assert!(out.q().values().iter().all(|&v| v == 0.0));
        assert_eq!(out.episodes, 0);
    }

    #[test]
    fn zero_epochs_return_uniform() {
        let (game, _) = make_symmetric_test(SymmetricTestConfig::default().draw().unwrap(), 5).unwrap();
        let out = symm_pmd(game.as_ref(), &PmdConfig::new(0, 0.1, 10), RngStream::new(0, 0)).unwrap();
        assert_eq!(out.averaged[0], Policy::uniform(3, 2, 2));
    }

    #[test]
    fn first_step_is_uniform_and_floor_holds() {
        let (game, _) = make_symmetric_test(SymmetricTestConfig::default().draw().unwrap(), 8).unwrap();
        let mut cfg = PmdConfig::new(1, 0.1, 20);
        cfg.eval.skip_nplayer = true;
        let out = symm_pmd(game.as_ref(), &cfg, RngStream::new(0, 0)).unwrap();
        assert_eq!(out.last[0], Policy::uniform(3, 2, 2));
        let mut cfg = PmdConfig::new(6, 0.1, 20);
        cfg.eval.skip_nplayer = true;
        let out = symm_pmd(game.as_ref(), &cfg, RngStream::new(0, 0)).unwrap();
        assert!(out.last[0].min_probability() >= 1.0 / (6.0 * 2.0) - 1e-15);
    }
}
