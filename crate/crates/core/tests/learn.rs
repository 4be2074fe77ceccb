//! TD estimation and the PMD learners.

mod common;

use std::sync::Arc;

use symmfg::dist::kl_divergence;
use symmfg::envs::{make_congestion, CongestionConfig, SymmetricGame, TabularMfg};
use symmfg::mfg::{induce_flow, q_backward, Schedule};
use symmfg::policy::Policy;
use symmfg::rng::RngStream;
use symmfg::learn::{
    ipmd, ipmd_with, pmd_policy_update, symm_pmd, symm_pmd_with, td_learn, td_learn_independent, td_learning_rate,
    PmdConfig, TdConfig,
};
use symmfg::sim::{sample_episode, PolicyProfile};

use common::*;

#[test]
fn learning_rate_starts_at_one_and_decays() {
    for delta in [0.01, 0.2, 1.0] {
        assert_eq!(td_learning_rate(0, delta), 1.0);
        let mut prev = 1.0;
        for k in 1..1000 {
            let b = td_learning_rate(k, delta);
            assert!(b < prev && b > 0.0);
            prev = b;
        }
        // Harmonic tail: k beta_k -> 2 / delta.
        let k = 1_000_000_000u64;
        assert!((k as f64 * td_learning_rate(k, delta) - 2.0 / delta).abs() < 1e-3 * (2.0 / delta));
    }
}

#[test]
fn mirror_step_is_a_distribution_and_tilts_towards_q() {
    let mut stream = RngStream::new(1, 0).rng();
    for _ in 0..200 {
        let pi = symmfg::rng::uniform_simplex(&mut stream, 4);
        let pi: Vec<f64> = pi.iter().map(|p| 0.9 * p + 0.025).collect();
        let q: Vec<f64> = (0..4).map(|a| a as f64 * 0.3).collect();
        let next = pmd_policy_update(&pi, &q, 0.5, 0.3).unwrap();
        assert!((next.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(next.iter().all(|&p| p > 0.0));
        // The log-ratio of two actions shrinks by (1 - tau eta) and moves
        // by eta times their Q gap.
        let lhs = (next[3] / next[0]).ln();
        let rhs = 0.85 * (pi[3] / pi[0]).ln() + 0.5 * 0.9;
        assert!((lhs - rhs).abs() < 1e-12);
    }
    // Large steps without regularization approach the greedy policy.
    let greedy = pmd_policy_update(&[0.25; 4], &[0.0, 1.0, 0.5, 0.2], 60.0, 0.0).unwrap();
    assert!(greedy[1] > 1.0 - 1e-12);
}

#[test]
fn mirror_step_rejects_bad_parameters() {
    assert!(pmd_policy_update(&[0.5, 0.5], &[0.0, 1.0], 1.0, 1.0).is_err());
    assert!(pmd_policy_update(&[0.5, 0.5], &[0.0, 1.0], 0.0, 0.1).is_err());
    assert!(pmd_policy_update(&[1.0, 0.0], &[0.0, 1.0], 0.5, 0.1).is_err());
    assert!(pmd_policy_update(&[0.5, 0.5], &[0.0], 0.5, 0.1).is_err());
}

#[test]
fn regularized_mirror_step_contracts_to_the_softmax() {
    // With a fixed Q the iteration converges to softmax(q / tau).
    let q = [0.2, 0.9, 0.4];
    let tau = 0.5;
    let mut pi = vec![1.0 / 3.0; 3];
    for _ in 0..300 {
        pi = pmd_policy_update(&pi, &q, 1.0, tau).unwrap();
    }
    let target = symmfg::dist::softmax_from_logits(&q.map(|x| x / tau));
    assert!(kl_divergence(&target, &pi).unwrap() < 1e-12);
}

#[test]
fn regularized_td_matches_the_mean_field_oracle() {
    // Without population coupling the mean-field Q-values are exact for
    // any N, so only the TD error remains.
    let mfg = Arc::new(TabularMfg::random(3, 2, 4, 0.0, 0.0, RngStream::new(2, 0)));
    let game = SymmetricGame::new(mfg.clone(), 20).unwrap();
    let pi = interior_policy(4, 3, 2, RngStream::new(2, 1));
    let flow = induce_flow(mfg.as_ref(), &pi).unwrap();
    for tau in [0.0, 0.3] {
        let oracle = q_backward(mfg.as_ref(), &pi, tau, Some(&flow)).unwrap();
        let cfg = TdConfig {
            epochs: 4000,
            tau,
            normalize_rewards: false,
            clip_qmax: false,
            ..TdConfig::default()
        };
        let out = td_learn(&game, &pi, &cfg, RngStream::new(2, 2)).unwrap();
        let mse = out.q().flow_weighted_sq_error(&oracle, &flow);
        assert!(mse < 1e-3, "tau {tau}: {mse}");
        assert_eq!(out.episodes, 4000 + cfg.pilot_episodes);
        assert!(out.delta > 0.0 && out.delta <= 1.0);
    }
}

#[test]
fn td_error_falls_with_more_episodes() {
    let (game, mfg) = symmetric_fixture(200);
    let pi = interior_policy(3, 2, 2, RngStream::new(3, 0));
    let flow = induce_flow(mfg.as_ref(), &pi).unwrap();
    let oracle = q_backward(mfg.as_ref(), &pi, 0.0, Some(&flow)).unwrap();
    let errors: Vec<f64> = [50, 500, 5000]
        .iter()
        .map(|&m| {
            let cfg = TdConfig {
                epochs: m,
                normalize_rewards: false,
                clip_qmax: false,
                use_all_agents: false,
                ..TdConfig::default()
            };
            td_learn(game.as_ref(), &pi, &cfg, RngStream::new(3, 1)).unwrap().q().flow_weighted_sq_error(&oracle, &flow)
        })
        .collect();
    assert!(errors[0] > errors[1] && errors[1] > errors[2], "{errors:?}");
}

#[test]
fn independent_td_leaves_unvisited_cells_at_zero() {
    let (game, _) = symmetric_fixture(6);
    // Agents in state 1 never play action 0.
    let mut pi = Policy::uniform(3, 2, 2);
    for h in 0..3 {
        pi.set_row(h, 1, &[0.0, 1.0]).unwrap();
    }
    let profile = PolicyProfile::Shared(pi);
    let cfg = TdConfig {
        epochs: 20,
        delta: Some(0.1),
        ..TdConfig::default()
    };
    let stream = RngStream::new(4, 0);
    let out = td_learn_independent(game.as_ref(), &profile, &cfg, stream).unwrap();
    assert_eq!(out.tables.len(), 6);
    assert_eq!(out.episodes, 20);
    for (i, q) in out.tables.iter().enumerate() {
        let mut visited = vec![false; 3 * 2 * 2];
        for m in 0..20 {
            let traj = sample_episode(game.as_ref(), &profile, stream.child(0).child(m)).unwrap();
            for h in 0..3 {
                visited[(h * 2 + traj.state(h, i)) * 2 + traj.action(h, i)] = true;
            }
        }
        for (cell, &v) in visited.iter().enumerate() {
            if !v {
                assert_eq!(q.values()[cell], 0.0, "agent {i} cell {cell}");
            }
        }
        for h in 0..3 {
            assert_eq!(q.get(h, 1, 0), 0.0);
        }
    }
}

#[test]
fn one_agent_ipmd_is_symm_pmd() {
    let (game, _) = make_congestion(
        CongestionConfig {
            n_agents: 1,
            ..Default::default()
        }
        .draw()
        .unwrap(),
    )
    .unwrap();
    let cfg = PmdConfig::new(8, 0.1, 30);
    let stream = RngStream::new(5, 0);
    let a = symm_pmd_with(game.as_ref(), None, &cfg, stream, &mut |_| Ok(())).unwrap();
    let b = ipmd_with(game.as_ref(), None, &cfg, stream, &mut |_| Ok(())).unwrap();
    assert_eq!(a.averaged, b.averaged);
    assert_eq!(a.last, b.last);
    assert_eq!(a.samples_consumed, b.samples_consumed);
    assert!(a.trace.is_empty());
}

#[test]
fn samples_are_counted_per_epoch() {
    let (game, _) = congestion_fixture();
    let mut cfg = PmdConfig::new(6, 0.1, 40);
    cfg.eval.skip_nplayer = true;
    cfg.eval.mfg_every = Some(2);
    let out = symm_pmd(game.as_ref(), &cfg, RngStream::new(6, 0)).unwrap();
    assert_eq!(out.samples_consumed, 6 * (40 + cfg.td.pilot_episodes));
    let epochs: Vec<usize> = out.trace.iter().map(|r| r.epoch).collect();
    assert_eq!(epochs, [0, 2, 4, 6]);
    for row in &out.trace {
        assert_eq!(row.samples_consumed, row.epoch * (40 + cfg.td.pilot_episodes));
        assert!(row.mfg_exploitability.unwrap() >= 0.0);
        assert!(row.nplayer_exploitability.is_none());
    }
    cfg.td.delta = Some(0.2);
    let out = symm_pmd(game.as_ref(), &cfg, RngStream::new(6, 0)).unwrap();
    assert_eq!(out.samples_consumed, 6 * 40);
}

#[test]
fn runs_are_reproducible() {
    let (game, _) = arps_fixture(30, 4, 0.1);
    let mut cfg = PmdConfig::new(5, 0.1, 20);
    cfg.eval.nplayer.episodes = 50;
    let a = ipmd(game.as_ref(), &cfg, RngStream::new(7, 0)).unwrap();
    let b = ipmd(game.as_ref(), &cfg, RngStream::new(7, 0)).unwrap();
    assert_eq!(a.averaged, b.averaged);
    assert_eq!(a.trace, b.trace);
    assert_eq!(a.averaged.len(), 30);
    let c = ipmd(game.as_ref(), &cfg, RngStream::new(7, 1)).unwrap();
    assert_ne!(a.averaged, c.averaged);
}

#[test]
fn invalid_schedules_are_rejected() {
    let (game, _) = congestion_fixture();
    let mut cfg = PmdConfig::new(3, 0.5, 10);
    cfg.lr_schedule = Schedule::Constant { value: 2.0 };
    assert!(symm_pmd(game.as_ref(), &cfg, RngStream::new(0, 0)).is_err());
    let mut cfg = PmdConfig::new(3, 0.1, 10);
    cfg.mixing_schedule = Schedule::Constant { value: 1.5 };
    assert!(symm_pmd(game.as_ref(), &cfg, RngStream::new(0, 0)).is_err());
    let mut cfg = PmdConfig::new(3, 0.1, 10);
    cfg.td.delta = Some(0.0);
    assert!(symm_pmd(game.as_ref(), &cfg, RngStream::new(0, 0)).is_err());
}
