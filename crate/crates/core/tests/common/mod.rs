//! Fixtures and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use std::sync::Arc;

use rand::Rng;
use symmfg::dist::PopulationFlow;
use symmfg::envs::{
    make_arps, make_congestion, make_symmetric_test, ArpsConfig, ArpsGame, ArpsMfg, CongestionConfig, CongestionGame,
    CongestionMfg, SymmetricGame, SymmetricTestConfig, TabularMfg,
};
use symmfg::game::MeanFieldGame;
use symmfg::policy::Policy;
use symmfg::rng::{sample_index, uniform, uniform_simplex, RngStream};

/// The exactly symmetric 2-state/2-action fixture.
pub fn symmetric_fixture(n_agents: usize) -> (Arc<SymmetricGame>, Arc<TabularMfg>) {
    let cfg = SymmetricTestConfig {
        n_agents,
        ..Default::default()
    };
    make_symmetric_test(cfg.draw().unwrap(), n_agents).unwrap()
}

/// The small monotone congestion fixture (N=100, H=5, 3 states, 3 actions).
pub fn congestion_fixture() -> (Arc<CongestionGame>, Arc<CongestionMfg>) {
    make_congestion(CongestionConfig::default().draw().unwrap()).unwrap()
}

/// A-RPS with `n` agents and horizon `h`.
pub fn arps_fixture(n: usize, h: usize, noise: f64) -> (Arc<ArpsGame>, Arc<ArpsMfg>) {
    let cfg = ArpsConfig {
        n_agents: n,
        horizon: h,
        noise_scale: noise,
        ..Default::default()
    };
    make_arps(cfg.draw().unwrap()).unwrap()
}

/// A policy with every row drawn uniformly from the simplex.
pub fn random_policy(h: usize, ns: usize, na: usize, stream: RngStream) -> Policy {
    let mut rng = stream.rng();
    let mut table = Vec::with_capacity(h * ns * na);
    for _ in 0..h * ns {
        table.extend(uniform_simplex(&mut rng, na));
    }
    Policy::from_table(h, ns, na, table).unwrap()
}

/// A policy whose rows stay away from the simplex boundary.
pub fn interior_policy(h: usize, ns: usize, na: usize, stream: RngStream) -> Policy {
    let mut rng = stream.rng();
    let mut table = Vec::with_capacity(h * ns * na);
    for _ in 0..h * ns {
        let w: Vec<f64> = (0..na).map(|_| 0.2 + rng.gen::<f64>()).collect();
        let z: f64 = w.iter().sum();
        table.extend(w.iter().map(|x| x / z));
    }
    Policy::from_table(h, ns, na, table).unwrap()
}

/// Monte-Carlo estimate of the regularized Q-value at `(h, s, a)` against a
/// frozen flow: play `a` in `s` at step `h`, then follow `pi`.
///
/// Returns `(mean, standard error)`.
pub fn rollout_q(
    mfg: &dyn MeanFieldGame,
    pi: &Policy,
    flow: &PopulationFlow,
    tau: f64,
    (h0, s0, a0): (usize, usize, usize),
    episodes: usize,
    stream: RngStream,
) -> (f64, f64) {
    let ns = mfg.n_states();
    let hz = mfg.horizon();
    let mut rng = stream.rng();
    let mut p = vec![0.0; ns];
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..episodes {
        let (mut s, mut a) = (s0, a0);
        let mut ret = 0.0;
        for h in h0..hz {
            if h > h0 {
                a = sample_index(pi.row(h, s), uniform(&mut rng));
            }
            ret += mfg.reward(s, a, flow.at(h)) + tau * symmfg::dist::entropy(pi.row(h, s));
            if h + 1 < hz {
                mfg.transition(s, a, flow.at(h), &mut p);
                s = sample_index(&p, uniform(&mut rng));
            }
        }
        sum += ret;
        sum_sq += ret * ret;
    }
    let n = episodes as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0) * n / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Enumerates every deterministic Markov policy of the given shape.
pub fn deterministic_policies(h: usize, ns: usize, na: usize) -> impl Iterator<Item = Policy> {
    let slots = h * ns;
    let total = (na as u64).pow(slots as u32);
    (0..total).map(move |mut code| {
        let mut actions = Vec::with_capacity(slots);
        for _ in 0..slots {
            actions.push((code % na as u64) as usize);
            code /= na as u64;
        }
        Policy::deterministic(h, ns, na, &actions)
    })
}

/// Maximizes a concave function on the probability simplex of dimension 2
/// or 3 by nested golden-section search.
pub fn maximize_on_simplex(na: usize, f: &dyn Fn(&[f64]) -> f64) -> Vec<f64> {
    const TOL: f64 = 1e-13;
    match na {
        2 => {
            let x = golden_max(0.0, 1.0, TOL, &|x| f(&[x, 1.0 - x]));
            vec![x, 1.0 - x]
        }
        3 => {
            let inner = |x: f64| -> (f64, f64) {
                let y = golden_max(0.0, 1.0 - x, TOL, &|y| f(&[x, y, (1.0 - x - y).max(0.0)]));
                (y, f(&[x, y, (1.0 - x - y).max(0.0)]))
            };
            let x = golden_max(0.0, 1.0, TOL, &|x| inner(x).1);
            let (y, _) = inner(x);
            vec![x, y, (1.0 - x - y).max(0.0)]
        }
        _ => panic!("only |A| in {{2, 3}} is supported"),
    }
}

fn golden_max(mut lo: f64, mut hi: f64, tol: f64, f: &dyn Fn(f64) -> f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - r * (hi - lo);
    let mut d = lo + r * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    while hi - lo > tol {
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - r * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + r * (hi - lo);
            fd = f(d);
        }
    }
    0.5 * (lo + hi)
}

/// Prints one acceptance line and returns whether it passed.
///
/// Written to the stdout handle directly so the line shows even when the
/// test harness captures output.
pub fn report(id: usize, name: &str, pass: bool, detail: &str) -> bool {
    use std::io::Write;
    let line = format!("[{}] criterion {id:>2} {name}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes()).and_then(|()| out.flush());
    pass
}
