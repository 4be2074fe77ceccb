//! Python bindings for `symmfg`.
//!
//! Policies cross the boundary as nested lists indexed `[step][state][action]`;
//! structured reports come back as plain dictionaries.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use ::symmfg::cli::{self, CliError, RunOptions};
use ::symmfg::envs::{BuiltEnv, EnvFile};
use ::symmfg::learn::{self, PmdConfig};
use ::symmfg::mfg::{induce_flow, mfg_exploitability, q_backward};
use ::symmfg::sim::{self, NplayerEvalConfig, PolicyProfile};
use ::symmfg::symmetry::{estimate_alpha_beta, AlphaBetaMode};
use ::symmfg::{Error, Policy, RngStream};

fn value_error(e: Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn cli_error(e: CliError) -> PyErr {
    match e {
        CliError::Config(e) => PyValueError::new_err(e.to_string()),
        CliError::Runtime(e) => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Turns a serializable value into Python objects via the stdlib JSON parser.
fn to_python<T: serde::Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn nested(pi: &Policy) -> Vec<Vec<Vec<f64>>> {
    (0..pi.horizon())
        .map(|h| (0..pi.n_states()).map(|s| pi.row(h, s).to_vec()).collect())
        .collect()
}

/// An N-player game together with its mean-field companion.
#[pyclass(frozen)]
struct Environment {
    env: BuiltEnv,
}

impl Environment {
    fn policy(&self, table: Vec<Vec<Vec<f64>>>) -> PyResult<Policy> {
        let game = self.env.game.as_ref();
        let (hz, ns, na) = (game.horizon(), game.n_states(), game.n_actions());
        if table.len() != hz || table.iter().any(|rows| rows.len() != ns || rows.iter().any(|r| r.len() != na)) {
            return Err(PyValueError::new_err(format!(
                "policy must have shape [{hz}][{ns}][{na}]"
            )));
        }
        Policy::from_table(hz, ns, na, table.into_iter().flatten().flatten().collect()).map_err(value_error)
    }
}

#[pymethods]
impl Environment {
    /// Builds an environment from the TOML text of an environment file
    /// (`version = 1` with a `[spec]` or `[description]` table).
    #[new]
    fn new(toml: &str) -> PyResult<Self> {
        let env = EnvFile::parse(toml).and_then(|f| f.build()).map_err(value_error)?;
        Ok(Self { env })
    }

    /// Loads an environment file or an experiment configuration.
    #[staticmethod]
    #[pyo3(signature = (path, seed=None))]
    fn load(path: PathBuf, seed: Option<u64>) -> PyResult<Self> {
        let env = cli::load_environment(&path, seed).map_err(cli_error)?;
        Ok(Self { env })
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.env.description.kind()
    }

    #[getter]
    fn n_agents(&self) -> usize {
        self.env.game.n_agents()
    }

    #[getter]
    fn horizon(&self) -> usize {
        self.env.game.horizon()
    }

    #[getter]
    fn n_states(&self) -> usize {
        self.env.game.n_states()
    }

    #[getter]
    fn n_actions(&self) -> usize {
        self.env.game.n_actions()
    }

    #[getter]
    fn reward_bounds(&self) -> (f64, f64) {
        self.env.game.reward_bounds()
    }

    /// The fully drawn description as environment-file TOML.
    fn description(&self) -> PyResult<String> {
        EnvFile::from_description(self.env.description.clone()).to_toml().map_err(value_error)
    }

    /// The uniform policy as a nested list.
    fn uniform_policy(&self) -> Vec<Vec<Vec<f64>>> {
        let g = self.env.game.as_ref();
        nested(&Policy::uniform(g.horizon(), g.n_states(), g.n_actions()))
    }

    /// Symmetry constants `(alpha, beta)` of the game against its companion.
    /// With `profiles` the estimate samples that many opponent tables
    /// (lower bounds); otherwise every table is enumerated.
    #[pyo3(signature = (profiles=None, seed=0))]
    fn alpha_beta(&self, py: Python<'_>, profiles: Option<usize>, seed: u64) -> PyResult<Py<PyAny>> {
        let mode = match profiles {
            Some(profiles) => AlphaBetaMode::Sampled {
                profiles,
                policy: None,
                seed,
            },
            None => AlphaBetaMode::Exact,
        };
        let env = &self.env;
        let report = py
            .detach(|| estimate_alpha_beta(env.game.as_ref(), env.mfg.as_ref(), &mode))
            .map_err(value_error)?;
        to_python(py, &report)
    }

    /// Runs `inspect`-style diagnostics and returns the report.
    #[pyo3(signature = (checks, seed=0))]
    fn inspect(&self, py: Python<'_>, checks: Vec<String>, seed: u64) -> PyResult<Py<PyAny>> {
        let env = &self.env;
        let report = py.detach(|| cli::inspect(env, &checks, None, seed)).map_err(cli_error)?;
        to_python(py, &report)
    }

    /// Mean-field exploitability of a shared policy with entropy weight `tau`.
    #[pyo3(signature = (policy, tau=0.0))]
    fn exploitability(&self, policy: Vec<Vec<Vec<f64>>>, tau: f64) -> PyResult<f64> {
        let pi = self.policy(policy)?;
        Ok(mfg_exploitability(self.env.mfg.as_ref(), &pi, tau).map_err(value_error)?.value)
    }

    /// Mean-field Q-values of `policy` against its own flow.
    #[pyo3(signature = (policy, tau=0.0))]
    fn q_values(&self, policy: Vec<Vec<Vec<f64>>>, tau: f64) -> PyResult<Vec<Vec<Vec<f64>>>> {
        let pi = self.policy(policy)?;
        let mfg = self.env.mfg.as_ref();
        let flow = induce_flow(mfg, &pi).map_err(value_error)?;
        let q = q_backward(mfg, &pi, tau, Some(&flow)).map_err(value_error)?;
        Ok((0..q.horizon())
            .map(|h| (0..q.n_states()).map(|s| q.row(h, s).to_vec()).collect())
            .collect())
    }

    /// Sampled N-player exploitability `(mean, standard error)` in raw units.
    #[pyo3(signature = (policy, episodes=2000, tau=0.0, seed=0))]
    fn nplayer_exploitability(
        &self,
        py: Python<'_>,
        policy: Vec<Vec<Vec<f64>>>,
        episodes: usize,
        tau: f64,
        seed: u64,
    ) -> PyResult<(f64, f64)> {
        let profile = PolicyProfile::Shared(self.policy(policy)?);
        let cfg = NplayerEvalConfig {
            episodes,
            tau,
            ..Default::default()
        };
        let env = &self.env;
        let est = py
            .detach(|| {
                sim::estimate_nplayer_exploitability(
                    env.game.as_ref(),
                    env.mfg.as_ref(),
                    &profile,
                    &cfg,
                    RngStream::new(seed, 0),
                )
            })
            .map_err(value_error)?;
        Ok((est.estimate.mean, est.estimate.std_error))
    }

    /// One N-player episode: states, actions and rewards as `[step][agent]`.
    #[pyo3(signature = (policy, seed=0))]
    fn sample_episode(&self, py: Python<'_>, policy: Vec<Vec<Vec<f64>>>, seed: u64) -> PyResult<Py<PyAny>> {
        let profile = PolicyProfile::Shared(self.policy(policy)?);
        let traj = sim::sample_episode(self.env.game.as_ref(), &profile, RngStream::new(seed, 0)).map_err(value_error)?;
        let n = traj.n_agents;
        let report = serde_json::json!({
            "states": traj.states.chunks(n).collect::<Vec<_>>(),
            "actions": traj.actions.chunks(n).collect::<Vec<_>>(),
            "rewards": traj.rewards.chunks(n).collect::<Vec<_>>(),
        });
        to_python(py, &report)
    }

    /// Runs Symm-PMD (or IPMD with `independent=True`) and returns
    /// `(averaged policies, trace rows)`.
    #[pyo3(signature = (epochs, tau=0.1, td_episodes=100, seed=0, independent=false, nplayer_episodes=0))]
    fn pmd(
        &self,
        py: Python<'_>,
        epochs: usize,
        tau: f64,
        td_episodes: usize,
        seed: u64,
        independent: bool,
        nplayer_episodes: usize,
    ) -> PyResult<(Vec<Vec<Vec<Vec<f64>>>>, Py<PyAny>)> {
        let mut cfg = PmdConfig::new(epochs, tau, td_episodes);
        cfg.eval.skip_nplayer = nplayer_episodes == 0;
        cfg.eval.nplayer.episodes = nplayer_episodes.max(1);
        let env = &self.env;
        let out = py
            .detach(|| {
                let run = if independent { learn::ipmd_with } else { learn::symm_pmd_with };
                run(env.game.as_ref(), Some(env.mfg.as_ref()), &cfg, RngStream::new(seed, 0), &mut |_| Ok(()))
            })
            .map_err(value_error)?;
        let policies = out.averaged.iter().map(nested).collect();
        Ok((policies, to_python(py, &out.trace)?))
    }
}

/// Runs an experiment configuration exactly like `symmfg run` and returns
/// the summary.
#[pyfunction]
#[pyo3(signature = (config, seed=None, out=None))]
fn run_experiment(py: Python<'_>, config: PathBuf, seed: Option<u64>, out: Option<PathBuf>) -> PyResult<Py<PyAny>> {
    let summary = py
        .detach(|| cli::run_experiment(&config, &RunOptions { seed, out }))
        .map_err(cli_error)?;
    to_python(py, &summary.summary)
}

/// Closed-form entropy-regularized mirror step on one policy row.
#[pyfunction]
fn pmd_policy_update(pi_row: Vec<f64>, q_row: Vec<f64>, eta: f64, tau: f64) -> PyResult<Vec<f64>> {
    learn::pmd_policy_update(&pi_row, &q_row, eta, tau).map_err(value_error)
}

#[pymodule]
#[pyo3(name = "symmfg")]
fn symmfg_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Environment>()?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(pmd_policy_update, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
