//! Experiment runner behind the `symmfg` binary: `run`, `inspect` and
//! `dump-env`.

pub mod config;

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use log::info;
use serde::Serialize;
use serde_json::json;

use crate::envs::{dump_env as write_env, BuiltEnv, EnvFile, EnvSpec};
use crate::error::Error;
use crate::game::{MeanFieldGame, ScaledMfg};
use crate::io::{save_policy, save_profile, save_qtable, TraceWriter, TrajectoryWriter};
use crate::learn::{ipmd_with, symm_pmd_with, td_learn, MetricRow};
use crate::mfg::{check_monotonicity, exact_pmd, induce_flow, mfg_exploitability, q_backward};
use crate::policy::Policy;
use crate::rng::RngStream;
use crate::sim::{estimate_nplayer_exploitability, sample_episode, PolicyProfile};
use crate::symmetry::{
    check_kappa_sparsity, estimate_alpha_beta, estimate_lipschitz_modulus, AlphaBetaMode, GridFunction, LipschitzNorm,
    PairMode,
};

pub use config::{Algorithm, ExperimentConfig};

/// Failure of a CLI command, split by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or arguments: exit code 2.
    Config(Error),
    /// Failure while running: exit code 1.
    Runtime(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "configuration error: {e}"),
            CliError::Runtime(e) => write!(f, "runtime error: {e}"),
        }
    }
}

fn config_err(e: Error) -> CliError {
    match e {
        Error::Io(_) => CliError::Runtime(e),
        other => CliError::Config(other),
    }
}

fn runtime(e: Error) -> CliError {
    CliError::Runtime(e)
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Overrides applied on top of a configuration file.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

/// What a finished run produced.
#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub output_dir: PathBuf,
    pub summary: serde_json::Value,
}

/// Profiles beyond which the default estimate samples instead of enumerating.
const DEFAULT_EXACT_PROFILES: u128 = 20_000;

fn default_alpha_beta(env: &BuiltEnv, seed: u64) -> AlphaBetaMode {
    let cells = env.game.n_states() * env.game.n_actions();
    let count = crate::numeric::composition_count(env.game.n_agents().saturating_sub(1), cells);
    if count <= DEFAULT_EXACT_PROFILES {
        AlphaBetaMode::Exact
    } else {
        AlphaBetaMode::Sampled {
            profiles: 200,
            policy: None,
            seed,
        }
    }
}

fn normalized_companion(env: &BuiltEnv, normalize: bool) -> Arc<dyn MeanFieldGame> {
    if normalize {
        Arc::new(ScaledMfg::normalized(env.mfg.clone()))
    } else {
        env.mfg.clone()
    }
}

/// Runs the experiment described by the configuration at `config_path`.
pub fn run_experiment(config_path: &Path, opts: &RunOptions) -> CliResult<RunSummary> {
    let mut cfg = ExperimentConfig::load(config_path).map_err(config_err)?;
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    let out_dir = opts
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .ok_or_else(|| CliError::Config(Error::InvalidConfig("no output directory: set output_dir or pass --out".into())))?;
    let env = cfg.env_file_contents().map_err(config_err)?.build().map_err(config_err)?;
    run_with_env(&cfg, env, &out_dir)
}

/// Runs a parsed configuration against an already built environment.
pub fn run_with_env(cfg: &ExperimentConfig, env: BuiltEnv, out_dir: &Path) -> CliResult<RunSummary> {
    let started = Instant::now();
    std::fs::create_dir_all(out_dir).map_err(|e| runtime(e.into()))?;

    // Resolved snapshot: the drawn environment plus the config pointing at it.
    write_env(&env, &out_dir.join("env.toml")).map_err(runtime)?;
    let mut resolved = cfg.clone();
    resolved.env = None;
    resolved.env_file = Some(PathBuf::from("env.toml"));
    resolved.output_dir = None;
    if let Some(p) = &cfg.policy_file {
        let copy = out_dir.join("input_policy.tsv");
        std::fs::copy(p, &copy).map_err(|e| runtime(e.into()))?;
        resolved.policy_file = Some(PathBuf::from("input_policy.tsv"));
    }
    std::fs::write(out_dir.join("resolved_config.toml"), resolved.to_toml().map_err(runtime)?).map_err(|e| runtime(e.into()))?;

    let stream = RngStream::new(cfg.seed, 0);
    let game = env.game.as_ref();
    let mut trace = TraceWriter::create(&out_dir.join("trace.tsv")).map_err(runtime)?;
    let mut sink = |row: &MetricRow| trace.write(row);
    let (lo, hi) = game.reward_bounds();
    let range = if hi > lo { hi - lo } else { 1.0 };

    let mut summary = json!({
        "algorithm": cfg.algorithm,
        "environment": env.description.kind(),
        "n_agents": game.n_agents(),
        "horizon": game.horizon(),
        "n_states": game.n_states(),
        "n_actions": game.n_actions(),
        "seed": cfg.seed,
        "reward_bounds": [lo, hi],
    });

    let ab_mode = cfg.alpha_beta.clone().unwrap_or_else(|| default_alpha_beta(&env, cfg.seed));
    info!("estimating alpha, beta ({ab_mode:?})");
    let ab = estimate_alpha_beta(game, env.mfg.as_ref(), &ab_mode).map_err(runtime)?;
    summary["alpha_beta"] = serde_json::to_value(&ab).expect("serializable");

    let final_profile: PolicyProfile = match cfg.algorithm {
        Algorithm::SymmPmd | Algorithm::Ipmd => {
            let pmd = cfg.pmd_config().expect("validated");
            info!("running {:?} for {} epochs", cfg.algorithm, pmd.epochs);
            let outcome = if cfg.algorithm == Algorithm::SymmPmd {
                symm_pmd_with(game, Some(env.mfg.as_ref()), &pmd, stream, &mut sink)
            } else {
                ipmd_with(game, Some(env.mfg.as_ref()), &pmd, stream, &mut sink)
            }
            .map_err(runtime)?;
            summary["samples_consumed"] = json!(outcome.samples_consumed);
            if let Some(last) = outcome.trace.last() {
                summary["final_metrics"] = serde_json::to_value(last).expect("serializable");
            }
            outcome.profile()
        }
        Algorithm::ExactPmd => {
            let section = cfg.exact_pmd.clone().expect("validated");
            let mfg = normalized_companion(&env, section.normalize_rewards);
            let result = exact_pmd(mfg.as_ref(), &section.to_config()).map_err(runtime)?;
            let eval_tau = cfg.eval.exploitability_tau * if section.normalize_rewards { range } else { 1.0 };
            let every = cfg.eval.mfg_every.unwrap_or((section.epochs / 50).max(1)).max(1);
            for t in 0..=section.epochs {
                if t % every == 0 || t == section.epochs {
                    let value = mfg_exploitability(env.mfg.as_ref(), &result.averaged_at(t), eval_tau)
                        .map_err(runtime)?
                        .value;
                    sink(&MetricRow {
                        epoch: t,
                        samples_consumed: 0,
                        mfg_exploitability: Some(value),
                        mfg_exploitability_normalized: Some(value / range),
                        nplayer_exploitability: None,
                        nplayer_exploitability_normalized: None,
                        wall_time_s: cfg.eval.record_wall_time.then(|| started.elapsed().as_secs_f64()),
                    })
                    .map_err(runtime)?;
                }
            }
            PolicyProfile::Shared(result.averaged)
        }
        Algorithm::TdEval => {
            let td = cfg.td.clone().expect("validated");
            let pi = match &cfg.policy_file {
                Some(p) => crate::io::load_policy(p).map_err(config_err)?,
                None => Policy::uniform(game.horizon(), game.n_states(), game.n_actions()),
            };
            let out = td_learn(game, &pi, &td, stream).map_err(runtime)?;
            let oracle_mfg = normalized_companion(&env, td.normalize_rewards);
            let flow = induce_flow(oracle_mfg.as_ref(), &pi).map_err(runtime)?;
            let oracle = q_backward(oracle_mfg.as_ref(), &pi, td.tau, Some(&flow)).map_err(runtime)?;
            summary["td"] = json!({
                "episodes": out.episodes,
                "delta": out.delta,
                "flow_weighted_mse": out.q().flow_weighted_sq_error(&oracle, &flow),
            });
            summary["samples_consumed"] = json!(out.episodes);
            save_qtable(&out_dir.join("q.tsv"), out.q()).map_err(runtime)?;
            PolicyProfile::Shared(pi)
        }
    };

    match &final_profile {
        PolicyProfile::Shared(pi) => save_policy(&out_dir.join("policy.tsv"), pi),
        PolicyProfile::PerAgent(pis) => save_profile(&out_dir.join("profile.tsv"), pis),
    }
    .map_err(runtime)?;

    if cfg.algorithm != Algorithm::SymmPmd && cfg.algorithm != Algorithm::Ipmd {
        // Final exploitability for algorithms that do not trace it themselves.
        let eval_stream = stream.child(2);
        let normalized = match cfg.algorithm {
            Algorithm::ExactPmd => cfg.exact_pmd.as_ref().is_some_and(|e| e.normalize_rewards),
            _ => cfg.td.as_ref().is_some_and(|t| t.normalize_rewards),
        };
        let final_tau = cfg.eval.exploitability_tau * if normalized { range } else { 1.0 };
        let mfg_value = match &final_profile {
            PolicyProfile::Shared(pi) => mfg_exploitability(env.mfg.as_ref(), pi, final_tau),
            PolicyProfile::PerAgent(pis) => crate::mfg::profile_exploitability(env.mfg.as_ref(), pis, final_tau),
        }
        .map_err(runtime)?
        .value;
        let mut final_metrics = json!({
            "mfg_exploitability": mfg_value,
            "mfg_exploitability_normalized": mfg_value / range,
        });
        if !cfg.eval.skip_nplayer {
            let est = estimate_nplayer_exploitability(game, env.mfg.as_ref(), &final_profile, &cfg.eval.nplayer, eval_stream)
                .map_err(runtime)?;
            final_metrics["nplayer_exploitability"] = serde_json::to_value(est.estimate).expect("serializable");
            final_metrics["nplayer_exploitability_normalized"] =
                serde_json::to_value(est.estimate.scaled(1.0 / range)).expect("serializable");
        }
        summary["final_metrics"] = final_metrics;
    }

    if cfg.dump_trajectories > 0 {
        let mut writer = TrajectoryWriter::create(&out_dir.join("trajectories.tsv")).map_err(runtime)?;
        for e in 0..cfg.dump_trajectories {
            let traj = sample_episode(game, &final_profile, stream.child(3).child(e as u64)).map_err(runtime)?;
            writer.write(e, &traj).map_err(runtime)?;
        }
        writer.finish().map_err(runtime)?;
    }

    summary["wall_time_s"] = json!(started.elapsed().as_secs_f64());
    std::fs::write(
        out_dir.join("summary.json"),
        serde_json::to_string_pretty(&summary).expect("serializable"),
    )
    .map_err(|e| runtime(e.into()))?;
    Ok(RunSummary {
        output_dir: out_dir.to_path_buf(),
        summary,
    })
}

/// Diagnostics available to `inspect`.
pub const CHECKS: [&str; 5] = ["alpha-beta", "monotonicity", "kappa-sparsity", "lipschitz", "exploitability"];

/// Largest grid tabulated by the Lipschitz check.
const LIPSCHITZ_GRID_CAP: u128 = 5_000;

/// Loads an environment from an environment file or an experiment config.
pub fn load_environment(path: &Path, seed: Option<u64>) -> CliResult<BuiltEnv> {
    let text = std::fs::read_to_string(path).map_err(|e| runtime(e.into()))?;
    let mut file = match EnvFile::parse(&text) {
        Ok(f) => f,
        Err(env_err) => match ExperimentConfig::parse(&text, path.parent().unwrap_or(Path::new("."))) {
            Ok(cfg) => cfg.env_file_contents().map_err(config_err)?,
            Err(_) => return Err(config_err(env_err)),
        },
    };
    if let (Some(seed), Some(spec)) = (seed, file.spec.as_mut()) {
        match spec {
            EnvSpec::Arps(c) => c.seed = seed,
            EnvSpec::Asis(c) => c.seed = seed,
            EnvSpec::Congestion(c) => c.seed = seed,
            EnvSpec::SymmetricTest(c) => c.seed = seed,
        }
    }
    file.build().map_err(config_err)
}

/// Runs the requested diagnostics and returns a machine-readable report.
pub fn inspect(env: &BuiltEnv, checks: &[String], policy: Option<&Path>, seed: u64) -> CliResult<serde_json::Value> {
    for c in checks {
        if !CHECKS.contains(&c.as_str()) {
            return Err(CliError::Config(Error::InvalidConfig(format!(
                "unknown check `{c}` (available: {})",
                CHECKS.join(", ")
            ))));
        }
    }
    let game = env.game.as_ref();
    let (n, ns, na) = (game.n_agents(), game.n_states(), game.n_actions());
    let cells = ns * na;
    let stream = RngStream::new(seed, 0x1E5);
    let mut report = json!({ "environment": env.description.kind(), "n_agents": n });
    for check in checks {
        match check.as_str() {
            "alpha-beta" => {
                let mode = default_alpha_beta(env, seed);
                let ab = estimate_alpha_beta(game, env.mfg.as_ref(), &mode).map_err(runtime)?;
                report["alpha_beta"] = serde_json::to_value(ab).expect("serializable");
            }
            "monotonicity" => {
                let m = check_monotonicity(env.mfg.as_ref(), 10_000, stream.child(1));
                report["monotonicity"] = serde_json::to_value(m).expect("serializable");
            }
            "kappa-sparsity" => {
                // Agent 0's reward at each cell against the cell itself.
                let per_cell: Vec<serde_json::Value> = (0..cells)
                    .map(|cell| {
                        let (s, a) = (cell / na, cell % na);
                        let f = move |others: &[u32]| vec![game.reward(0, s, a, others)];
                        let cert = check_kappa_sparsity(cells, (n - 1) as u32, &f, &[cell], 1000, stream.child(2).child(cell as u64));
                        json!({ "state": s, "action": a, "kappa": 1, "certificate": cert })
                    })
                    .collect();
                report["kappa_sparsity"] = json!(per_cell);
            }
            "lipschitz" => {
                let count = crate::numeric::composition_count(n - 1, cells);
                if count > LIPSCHITZ_GRID_CAP {
                    report["lipschitz"] = json!({ "skipped": format!("grid of {count} points exceeds {LIPSCHITZ_GRID_CAP}") });
                } else {
                    let per_cell: Vec<serde_json::Value> = (0..cells)
                        .map(|cell| {
                            let (s, a) = (cell / na, cell % na);
                            let g = GridFunction::from_fn(cells, (n - 1) as u32, 1, |others| vec![game.reward(0, s, a, others)])
                                .expect("grid enumeration");
                            let m = estimate_lipschitz_modulus(&g, LipschitzNorm::L2, PairMode::Exact);
                            json!({ "state": s, "action": a, "modulus_l2": m.modulus, "pairs": m.pairs })
                        })
                        .collect();
                    report["lipschitz"] = json!(per_cell);
                }
            }
            "exploitability" => {
                let path = policy.ok_or_else(|| {
                    CliError::Config(Error::InvalidConfig("the exploitability check needs --policy".into()))
                })?;
                let pi = crate::io::load_policy(path).map_err(config_err)?;
                let mfg_e = mfg_exploitability(env.mfg.as_ref(), &pi, 0.0).map_err(runtime)?;
                let est = estimate_nplayer_exploitability(
                    game,
                    env.mfg.as_ref(),
                    &PolicyProfile::Shared(pi),
                    &Default::default(),
                    stream.child(3),
                )
                .map_err(runtime)?;
                report["exploitability"] = json!({
                    "mfg": mfg_e.value,
                    "nplayer": est.estimate,
                });
            }
            _ => unreachable!("validated above"),
        }
    }
    Ok(report)
}

/// Renders an inspect report for humans.
pub fn render_report(report: &serde_json::Value) -> String {
    let mut out = String::new();
    if let Some(ab) = report.get("alpha_beta") {
        out.push_str(&format!(
            "alpha-beta ({}): alpha = {}, beta = {} (normalized {}){}\n",
            ab["mode"].as_str().unwrap_or("?"),
            ab["alpha"],
            ab["beta"],
            ab["beta_normalized"],
            if ab["lower_bound"].as_bool() == Some(true) { ", lower bounds" } else { "" }
        ));
    }
    if let Some(m) = report.get("monotonicity") {
        let verdict = match m["status"].as_str() {
            Some("strict") => "no violation",
            Some("boundary") => "no violation (boundary: inner products vanish)",
            _ => "VIOLATION",
        };
        out.push_str(&format!(
            "monotonicity: {verdict}, min inner product {}, max inner product {}, P independent of mu: {}\n",
            m["min_inner_product"], m["max_inner_product"], m["p_independent_of_mu"]
        ));
    }
    if let Some(cells) = report.get("kappa_sparsity").and_then(|v| v.as_array()) {
        let sparse = cells.iter().filter(|c| c["certificate"]["sparse"].as_bool() == Some(true)).count();
        out.push_str(&format!(
            "kappa-sparsity: {sparse}/{} cells 1-sparse in their own cell (randomized, 1000 trials each)\n",
            cells.len()
        ));
    }
    if let Some(l) = report.get("lipschitz") {
        match l.as_array() {
            Some(cells) => {
                let max = cells.iter().filter_map(|c| c["modulus_l2"].as_f64()).fold(0.0, f64::max);
                out.push_str(&format!("lipschitz: max reward modulus (L2) over cells = {max}\n"));
            }
            None => out.push_str(&format!("lipschitz: {}\n", l["skipped"])),
        }
    }
    if let Some(e) = report.get("exploitability") {
        out.push_str(&format!(
            "exploitability: mean-field {}, N-player {} +- {}\n",
            e["mfg"], e["nplayer"]["mean"], e["nplayer"]["std_error"]
        ));
    }
    out
}

/// Builds the environment described by `path` and writes its drawn
/// description.
pub fn dump_env(path: &Path, seed: Option<u64>, out: Option<&Path>) -> CliResult<String> {
    let env = load_environment(path, seed)?;
    let text = EnvFile::from_description(env.description.clone()).to_toml().map_err(runtime)?;
    if let Some(out) = out {
        std::fs::write(out, &text).map_err(|e| runtime(e.into()))?;
    }
    Ok(text)
}
