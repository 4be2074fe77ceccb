//! Exact mean-field machinery: population flows, backward induction,
//! best responses, exploitability, monotonicity checks and exact-gradient
//! policy mirror descent.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::dist::{entropy, log_sum_exp, softmax_from_logits, PopulationDistribution, PopulationFlow};
use crate::error::{Error, Result};
use crate::game::MeanFieldGame;
use crate::learn::pmd_policy_update;
use crate::policy::{Policy, PolicyAverage};
use crate::rng::{uniform_simplex, RngStream};

/// One application of the population update operator:
/// `Gamma(mu, pi)(s', a') = sum_{s,a} mu(s,a) P(s'|s,a,mu) pi_h(a'|s')`.
pub fn gamma_step(
    mfg: &dyn MeanFieldGame,
    mu: &PopulationDistribution,
    pi: &Policy,
    h: usize,
) -> PopulationDistribution {
    let (ns, na) = (mfg.n_states(), mfg.n_actions());
    let mut next_state = vec![0.0; ns];
    let mut p = vec![0.0; ns];
    for s in 0..ns {
        for a in 0..na {
            let w = mu.weight(s, a);
            if w == 0.0 {
                continue;
            }
            mfg.transition(s, a, mu, &mut p);
            for (n, q) in next_state.iter_mut().zip(&p) {
                *n += w * q;
            }
        }
    }
    let mut weights = Vec::with_capacity(ns * na);
    for (s, &m) in next_state.iter().enumerate() {
        weights.extend(pi.row(h, s).iter().map(|&x| m * x));
    }
    renormalized(ns, na, weights)
}

fn renormalized(ns: usize, na: usize, mut weights: Vec<f64>) -> PopulationDistribution {
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w = (*w / total).max(0.0);
    }
    PopulationDistribution::new(ns, na, weights).expect("population update conserves mass")
}

fn check_shape(mfg: &dyn MeanFieldGame, pi: &Policy) -> Result<()> {
    if pi.horizon() != mfg.horizon() {
        return Err(Error::HorizonMismatch {
            expected: mfg.horizon(),
            got: pi.horizon(),
        });
    }
    if pi.n_states() != mfg.n_states() || pi.n_actions() != mfg.n_actions() {
        return Err(Error::ShapeMismatch(format!(
            "policy over {}x{} for a game over {}x{}",
            pi.n_states(),
            pi.n_actions(),
            mfg.n_states(),
            mfg.n_actions()
        )));
    }
    Ok(())
}

/// `Lambda(pi)`: the population flow induced by `pi` from `rho_0`.
pub fn induce_flow(mfg: &dyn MeanFieldGame, pi: &Policy) -> Result<PopulationFlow> {
    check_shape(mfg, pi)?;
    let (ns, na) = (mfg.n_states(), mfg.n_actions());
    let rho0 = mfg.initial_distribution();
    let mut weights = Vec::with_capacity(ns * na);
    for (s, &r) in rho0.iter().enumerate() {
        weights.extend(pi.row(0, s).iter().map(|&x| r * x));
    }
    let mut steps = vec![renormalized(ns, na, weights)];
    for h in 1..mfg.horizon() {
        let next = gamma_step(mfg, &steps[h - 1], pi, h);
        steps.push(next);
    }
    Ok(PopulationFlow { steps })
}

/// Mean-field flow of a heterogeneous population where agent `i` plays
/// `policies[i]` and all agents move under the common population average.
pub fn induce_flow_profile(mfg: &dyn MeanFieldGame, policies: &[Policy]) -> Result<PopulationFlow> {
    if policies.is_empty() {
        return Err(Error::EmptyProfile);
    }
    for pi in policies {
        check_shape(mfg, pi)?;
    }
    let (ns, na) = (mfg.n_states(), mfg.n_actions());
    let n = policies.len() as f64;
    let rho0 = mfg.initial_distribution();
    let mut per_agent: Vec<Vec<f64>> = policies
        .iter()
        .map(|pi| {
            let mut w = Vec::with_capacity(ns * na);
            for (s, &r) in rho0.iter().enumerate() {
                w.extend(pi.row(0, s).iter().map(|&x| r * x));
            }
            w
        })
        .collect();
    let average = |per_agent: &[Vec<f64>]| {
        let mut avg = vec![0.0; ns * na];
        for w in per_agent {
            for (a, x) in avg.iter_mut().zip(w) {
                *a += x / n;
            }
        }
        renormalized(ns, na, avg)
    };
    let mut steps = vec![average(&per_agent)];
    let mut p = vec![0.0; ns];
    for h in 1..mfg.horizon() {
        let mu = &steps[h - 1];
        let kernel: Vec<Vec<f64>> = (0..ns * na)
            .map(|cell| {
                mfg.transition(cell / na, cell % na, mu, &mut p);
                p.clone()
            })
            .collect();
        for (w, pi) in per_agent.iter_mut().zip(policies) {
            let mut next_state = vec![0.0; ns];
            for (cell, &m) in w.iter().enumerate() {
                if m > 0.0 {
                    for (ns_, q) in next_state.iter_mut().zip(&kernel[cell]) {
                        *ns_ += m * q;
                    }
                }
            }
            w.clear();
            for (s, &m) in next_state.iter().enumerate() {
                w.extend(pi.row(h, s).iter().map(|&x| m * x));
            }
        }
        steps.push(average(&per_agent));
    }
    Ok(PopulationFlow { steps })
}

/// Rewards and transitions of the MDP induced by a fixed flow, per step.
struct FlowMdp {
    ns: usize,
    na: usize,
    /// `[h][s][a]`
    rewards: Vec<f64>,
    /// `[h][s][a][s']`
    trans: Vec<f64>,
}

impl FlowMdp {
    fn new(mfg: &dyn MeanFieldGame, flow: &PopulationFlow) -> Self {
        let (ns, na, hz) = (mfg.n_states(), mfg.n_actions(), mfg.horizon());
        let mut rewards = Vec::with_capacity(hz * ns * na);
        let mut trans = vec![0.0; hz * ns * na * ns];
        for h in 0..hz {
            let mu = flow.at(h);
            for s in 0..ns {
                for a in 0..na {
                    rewards.push(mfg.reward(s, a, mu));
                    let off = ((h * ns + s) * na + a) * ns;
                    mfg.transition(s, a, mu, &mut trans[off..off + ns]);
                }
            }
        }
        Self {
            ns,
            na,
            rewards,
            trans,
        }
    }

    #[inline]
    fn reward(&self, h: usize, s: usize, a: usize) -> f64 {
        self.rewards[(h * self.ns + s) * self.na + a]
    }

    #[inline]
    fn next(&self, h: usize, s: usize, a: usize) -> &[f64] {
        let off = ((h * self.ns + s) * self.na + a) * self.ns;
        &self.trans[off..off + self.ns]
    }
}

/// Entropy-regularized Q-values of `pi` against a fixed flow
/// (`Lambda(pi)` when `flow` is `None`).
///
/// `Q_h(s,a) = R(s,a,mu_h) + tau H(pi_h(.|s)) + sum_{s'} P(s'|s,a,mu_h) sum_{a'} pi_{h+1}(a'|s') Q_{h+1}(s',a')`
pub fn q_backward(
    mfg: &dyn MeanFieldGame,
    pi: &Policy,
    tau: f64,
    flow: Option<&PopulationFlow>,
) -> Result<crate::policy::QTable> {
    check_shape(mfg, pi)?;
    let owned;
    let flow = match flow {
        Some(f) => f,
        None => {
            owned = induce_flow(mfg, pi)?;
            &owned
        }
    };
    let mdp = FlowMdp::new(mfg, flow);
    let (ns, na, hz) = (mdp.ns, mdp.na, mfg.horizon());
    let mut q = crate::policy::QTable::zeros(hz, ns, na, tau);
    let mut v_next = vec![0.0; ns];
    for h in (0..hz).rev() {
        for s in 0..ns {
            let bonus = tau * entropy(pi.row(h, s));
            for a in 0..na {
                let cont: f64 = if h + 1 < hz {
                    mdp.next(h, s, a).iter().zip(&v_next).map(|(p, v)| p * v).sum()
                } else {
                    0.0
                };
                q.set(h, s, a, mdp.reward(h, s, a) + bonus + cont);
            }
        }
        for (s, v) in v_next.iter_mut().enumerate() {
            *v = pi.row(h, s).iter().zip(q.row(h, s)).map(|(p, x)| p * x).sum();
        }
    }
    Ok(q)
}

/// `V^tau(flow, pi) = sum_s rho_0(s) sum_a pi_0(a|s) Q_0(s,a)`.
pub fn mf_value(mfg: &dyn MeanFieldGame, flow: &PopulationFlow, pi: &Policy, tau: f64) -> Result<f64> {
    let q = q_backward(mfg, pi, tau, Some(flow))?;
    Ok(mfg
        .initial_distribution()
        .iter()
        .enumerate()
        .map(|(s, r)| r * pi.row(0, s).iter().zip(q.row(0, s)).map(|(p, x)| p * x).sum::<f64>())
        .sum())
}

/// Optimal (soft-optimal when `tau > 0`) policy against a fixed flow and
/// its value. Hard ties go to the lowest action index.
pub fn best_response(mfg: &dyn MeanFieldGame, flow: &PopulationFlow, tau: f64) -> (Policy, f64) {
    let mdp = FlowMdp::new(mfg, flow);
    let (ns, na, hz) = (mdp.ns, mdp.na, mfg.horizon());
    let mut probs = vec![0.0; hz * ns * na];
    let mut v_next = vec![0.0; ns];
    let mut v_cur = vec![0.0; ns];
    let mut q = vec![0.0; na];
    for h in (0..hz).rev() {
        for s in 0..ns {
            for (a, qa) in q.iter_mut().enumerate() {
                let cont: f64 = if h + 1 < hz {
                    mdp.next(h, s, a).iter().zip(&v_next).map(|(p, v)| p * v).sum()
                } else {
                    0.0
                };
                *qa = mdp.reward(h, s, a) + cont;
            }
            let row = &mut probs[(h * ns + s) * na..(h * ns + s + 1) * na];
            if tau > 0.0 {
                let logits: Vec<f64> = q.iter().map(|x| x / tau).collect();
                row.copy_from_slice(&softmax_from_logits(&logits));
                v_cur[s] = tau * log_sum_exp(&logits);
            } else {
                let mut best = 0;
                for a in 1..na {
                    if q[a] > q[best] {
                        best = a;
                    }
                }
                row[best] = 1.0;
                v_cur[s] = q[best];
            }
        }
        std::mem::swap(&mut v_next, &mut v_cur);
    }
    let value = mfg
        .initial_distribution()
        .iter()
        .zip(&v_next)
        .map(|(r, v)| r * v)
        .sum();
    let policy = Policy::from_table(hz, ns, na, probs).expect("best response rows are distributions");
    (policy, value)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExploitabilityReport {
    pub value: f64,
    pub best_response: Policy,
    pub v_br: f64,
    pub v_pi: f64,
    pub tau: f64,
}

/// `max_{pi'} V^tau(Lambda(pi), pi') - V^tau(Lambda(pi), pi)`.
pub fn mfg_exploitability(mfg: &dyn MeanFieldGame, pi: &Policy, tau: f64) -> Result<ExploitabilityReport> {
    let flow = induce_flow(mfg, pi)?;
    let (best_response, v_br) = best_response(mfg, &flow, tau);
    let v_pi = mf_value(mfg, &flow, pi, tau)?;
    Ok(ExploitabilityReport {
        value: v_br - v_pi,
        best_response,
        v_br,
        v_pi,
        tau,
    })
}

/// Mean-field exploitability of a heterogeneous population: the gain of the
/// best response over the average agent value, both against the mixed flow.
pub fn profile_exploitability(mfg: &dyn MeanFieldGame, policies: &[Policy], tau: f64) -> Result<ExploitabilityReport> {
    let flow = induce_flow_profile(mfg, policies)?;
    let (best_response, v_br) = best_response(mfg, &flow, tau);
    let mut v_pi = 0.0;
    for pi in policies {
        v_pi += mf_value(mfg, &flow, pi, tau)? / policies.len() as f64;
    }
    Ok(ExploitabilityReport {
        value: v_br - v_pi,
        best_response,
        v_br,
        v_pi,
        tau,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MonotonicityStatus {
    /// Every tested inner product is strictly negative.
    Strict,
    /// The largest inner product is zero within tolerance.
    Boundary,
    /// Some tested pair has a positive inner product.
    Violated,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub status: MonotonicityStatus,
    pub violated: bool,
    pub min_inner_product: f64,
    /// Largest inner product seen; the pair attaining it is the witness.
    pub max_inner_product: f64,
    pub witness: Option<(Vec<f64>, Vec<f64>)>,
    pub p_independent_of_mu: bool,
    pub max_transition_deviation: f64,
    pub pairs_tested: usize,
}

const MONOTONE_TOL: f64 = 1e-12;
const P_INDEPENDENCE_TOL: f64 = 1e-9;
const P_INDEPENDENCE_TRIPLES: usize = 1000;

/// Samples pairs `mu != mu'` uniformly on the simplex and evaluates
/// `sum_{s,a} (R(s,a,mu) - R(s,a,mu'))(mu(s,a) - mu'(s,a))`; also tests
/// whether `P` ignores `mu`.
pub fn check_monotonicity(mfg: &dyn MeanFieldGame, pair_budget: usize, stream: RngStream) -> MonotonicityReport {
    let (ns, na) = (mfg.n_states(), mfg.n_actions());
    let mut rng = stream.rng();
    let draw = |rng: &mut rand_chacha::ChaCha8Rng| {
        PopulationDistribution::new(ns, na, uniform_simplex(rng, ns * na)).expect("simplex sample")
    };

    let mut min_ip = f64::INFINITY;
    let mut max_ip = f64::NEG_INFINITY;
    let mut witness = None;
    for _ in 0..pair_budget {
        let mu = draw(&mut rng);
        let nu = draw(&mut rng);
        let mut ip = 0.0;
        for s in 0..ns {
            for a in 0..na {
                ip += (mfg.reward(s, a, &mu) - mfg.reward(s, a, &nu)) * (mu.weight(s, a) - nu.weight(s, a));
            }
        }
        min_ip = min_ip.min(ip);
        if ip > max_ip {
            max_ip = ip;
            witness = Some((mu.weights().to_vec(), nu.weights().to_vec()));
        }
    }

    let mut max_dev: f64 = 0.0;
    let (mut p, mut q) = (vec![0.0; ns], vec![0.0; ns]);
    for _ in 0..P_INDEPENDENCE_TRIPLES {
        let mu = draw(&mut rng);
        let nu = draw(&mut rng);
        let s = rand::Rng::gen_range(&mut rng, 0..ns);
        let a = rand::Rng::gen_range(&mut rng, 0..na);
        mfg.transition(s, a, &mu, &mut p);
        mfg.transition(s, a, &nu, &mut q);
        max_dev = max_dev.max(crate::numeric::l1_distance(&p, &q));
    }

    let status = if max_ip > MONOTONE_TOL {
        MonotonicityStatus::Violated
    } else if max_ip >= -MONOTONE_TOL {
        MonotonicityStatus::Boundary
    } else {
        MonotonicityStatus::Strict
    };
    MonotonicityReport {
        status,
        violated: status == MonotonicityStatus::Violated,
        min_inner_product: min_ip,
        max_inner_product: max_ip,
        witness,
        p_independent_of_mu: max_dev <= P_INDEPENDENCE_TOL,
        max_transition_deviation: max_dev,
        pairs_tested: pair_budget,
    }
}

/// Empirical constants of the Gamma Lipschitz bound: `K_s`, `K_a` (sup of
/// L1 kernel gaps across states / actions) and `K_mu` (L1 modulus in mu).
pub fn estimate_kernel_constants(mfg: &dyn MeanFieldGame, samples: usize, stream: RngStream) -> (f64, f64, f64) {
    let (ns, na) = (mfg.n_states(), mfg.n_actions());
    let mut rng = stream.rng();
    let (mut ks, mut ka, mut kmu) = (0.0f64, 0.0f64, 0.0f64);
    let (mut p, mut q) = (vec![0.0; ns], vec![0.0; ns]);
    for _ in 0..samples {
        let mu = PopulationDistribution::new(ns, na, uniform_simplex(&mut rng, ns * na)).unwrap();
        let nu = PopulationDistribution::new(ns, na, uniform_simplex(&mut rng, ns * na)).unwrap();
        for s in 0..ns {
            for a in 0..na {
                mfg.transition(s, a, &mu, &mut p);
                for s2 in 0..ns {
                    mfg.transition(s2, a, &mu, &mut q);
                    ks = ks.max(crate::numeric::l1_distance(&p, &q));
                }
                for a2 in 0..na {
                    mfg.transition(s, a2, &mu, &mut q);
                    ka = ka.max(crate::numeric::l1_distance(&p, &q));
                }
                mfg.transition(s, a, &nu, &mut q);
                let d = mu.l1_distance(&nu);
                if d > 0.0 {
                    kmu = kmu.max(crate::numeric::l1_distance(&p, &q) / d);
                }
            }
        }
    }
    (ks, ka, kmu)
}

/// Step-size and mixing schedules indexed by the epoch `t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Schedule {
    /// `scale / sqrt(t + 1)`
    InverseSqrt { scale: f64 },
    /// `1 / (t + 1 + offset)`
    Harmonic { offset: u32 },
    Constant { value: f64 },
}

impl Schedule {
    pub fn default_learning_rate() -> Self {
        Schedule::InverseSqrt { scale: 1.0 }
    }

    pub fn default_mixing() -> Self {
        Schedule::Harmonic { offset: 0 }
    }

    pub fn at(&self, t: usize) -> f64 {
        match *self {
            Schedule::InverseSqrt { scale } => scale / ((t + 1) as f64).sqrt(),
            Schedule::Harmonic { offset } => 1.0 / (t + 1 + offset as usize) as f64,
            Schedule::Constant { value } => value,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExactPmdConfig {
    pub epochs: usize,
    pub tau: f64,
    #[serde(default = "Schedule::default_learning_rate")]
    pub lr_schedule: Schedule,
    #[serde(default = "Schedule::default_mixing")]
    pub mixing_schedule: Schedule,
}

impl ExactPmdConfig {
    pub fn new(epochs: usize, tau: f64) -> Self {
        Self {
            epochs,
            tau,
            lr_schedule: Schedule::default_learning_rate(),
            mixing_schedule: Schedule::default_mixing(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExactPmdResult {
    /// `pi_0, ..., pi_T`.
    pub iterates: Vec<Policy>,
    /// `(1 / (T + 1)) sum_t pi_t`.
    pub averaged: Policy,
}

impl ExactPmdResult {
    /// Running average of the first `t + 1` iterates.
    pub fn averaged_at(&self, t: usize) -> Policy {
        let mut avg = PolicyAverage::new(&self.iterates[0]);
        for pi in &self.iterates[1..=t] {
            avg.push(pi);
        }
        avg.average()
    }
}

pub(crate) fn warn_tau_range(tau: f64) {
    if !(tau > 0.0 && tau < 0.5) {
        warn!("entropy coefficient tau = {tau} lies outside (0, 1/2); convergence guarantees do not apply");
    }
}

/// Policy mirror descent with exact Q-values from [`q_backward`].
pub fn exact_pmd(mfg: &dyn MeanFieldGame, cfg: &ExactPmdConfig) -> Result<ExactPmdResult> {
    warn_tau_range(cfg.tau);
    let (hz, ns, na) = (mfg.horizon(), mfg.n_states(), mfg.n_actions());
    let mut pi = Policy::uniform(hz, ns, na);
    let mut iterates = vec![pi.clone()];
    for t in 0..cfg.epochs {
        let q = q_backward(mfg, &pi, cfg.tau, None)?;
        let eta = cfg.lr_schedule.at(t);
        let mix = cfg.mixing_schedule.at(t);
        let mut next = pi.clone();
        for h in 0..hz {
            for s in 0..ns {
                let bonus = cfg.tau * pi.entropy_at(h, s);
                let q_row: Vec<f64> = q.row(h, s).iter().map(|x| x - bonus).collect();
                let updated = pmd_policy_update(pi.row(h, s), &q_row, eta, cfg.tau)?;
                next.row_mut(h, s).copy_from_slice(&updated);
            }
        }
        next.mix_uniform(mix);
        pi = next;
        iterates.push(pi.clone());
    }
    let mut avg = PolicyAverage::new(&iterates[0]);
    for p in &iterates[1..] {
        avg.push(p);
    }
    Ok(ExactPmdResult {
        averaged: avg.average(),
        iterates,
    })
}
