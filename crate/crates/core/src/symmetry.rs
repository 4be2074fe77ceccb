//! Symmetrization, population lifting, Lipschitz extension and
//! heterogeneity certification.
//!
//! Ordered tuples of `(state, action)` pairs are written as slices of cell
//! indices `s * n_actions + a`; count tables are slices of `u32` over the
//! same cells.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use log::warn;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::{project_simplex, PopulationDistribution};
use crate::error::{Error, Result};
use crate::game::{DynamicGame, MeanFieldGame, RewardScale};
use crate::numeric::{composition_count, compositions, l1_distance, l2_distance};
use crate::policy::Policy;
use crate::rng::RngStream;
use crate::sim::{sample_episode, PolicyProfile};

/// Largest arity accepted by [`symmetrize_bruteforce`].
pub const MAX_BRUTEFORCE_ARITY: usize = 8;

/// Largest number of profiles enumerated by exact [`estimate_alpha_beta`].
pub const ALPHA_BETA_EXACT_CAP: u128 = 2_000_000;

type TupleFn = dyn Fn(&[usize]) -> Vec<f64> + Send + Sync;
type CountFn<'a> = dyn Fn(&[u32]) -> Vec<f64> + Send + Sync + 'a;

/// A function of an ordered tuple of `arity` cells with a fixed output
/// dimension.
#[derive(Clone)]
pub struct TupleFunction {
    arity: usize,
    n_cells: usize,
    out_dim: usize,
    f: Arc<TupleFn>,
}

impl fmt::Debug for TupleFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TupleFunction")
            .field("arity", &self.arity)
            .field("n_cells", &self.n_cells)
            .field("out_dim", &self.out_dim)
            .finish()
    }
}

impl TupleFunction {
    pub fn new(
        arity: usize,
        n_cells: usize,
        out_dim: usize,
        f: impl Fn(&[usize]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            arity,
            n_cells,
            out_dim,
            f: Arc::new(f),
        }
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn eval(&self, tuple: &[usize]) -> Result<Vec<f64>> {
        if tuple.len() != self.arity {
            return Err(Error::ShapeMismatch(format!(
                "tuple of length {} for arity {}",
                tuple.len(),
                self.arity
            )));
        }
        if let Some(&bad) = tuple.iter().find(|&&c| c >= self.n_cells) {
            return Err(Error::IndexOutOfRange {
                what: "cell",
                index: bad,
                size: self.n_cells,
            });
        }
        let out = (self.f)(tuple);
        if out.len() != self.out_dim {
            return Err(Error::ShapeMismatch(format!(
                "function returned {} values, declared {}",
                out.len(),
                self.out_dim
            )));
        }
        Ok(out)
    }
}

/// All permutations of `0..k` in lexicographic order.
fn permutations(k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    loop {
        out.push(cur.clone());
        // next lexicographic permutation
        let Some(i) = (1..k).rev().find(|&i| cur[i - 1] < cur[i]) else {
            break;
        };
        let j = (i..k).rev().find(|&j| cur[j] > cur[i - 1]).expect("successor exists");
        cur.swap(i - 1, j);
        cur[i..].reverse();
    }
    out
}

/// `g(x) = (1 / K!) sum_sigma f(sigma(x))`.
///
/// The tuple is sorted before enumeration and the average is a running
/// mean, so `g` is exactly permutation-invariant and equals `f` exactly
/// wherever all permuted values coincide.
pub fn symmetrize_bruteforce(f: &TupleFunction) -> Result<TupleFunction> {
    if f.arity > MAX_BRUTEFORCE_ARITY {
        return Err(Error::ArityTooLarge(f.arity));
    }
    let perms = permutations(f.arity);
    let inner = f.clone();
    let out_dim = f.out_dim;
    Ok(TupleFunction::new(f.arity, f.n_cells, f.out_dim, move |x| {
        let mut sorted = x.to_vec();
        sorted.sort_unstable();
        let mut mean = vec![0.0; out_dim];
        let mut permuted = vec![0; sorted.len()];
        for (k, perm) in perms.iter().enumerate() {
            for (slot, &p) in permuted.iter_mut().zip(perm) {
                *slot = sorted[p];
            }
            let value = (inner.f)(&permuted);
            if k == 0 {
                mean.copy_from_slice(&value);
            } else {
                for (m, v) in mean.iter_mut().zip(&value) {
                    *m += (v - *m) / (k + 1) as f64;
                }
            }
        }
        mean
    }))
}

/// A function on the grid of count tables over `n_cells` cells summing to
/// `denominator`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    n_cells: usize,
    denominator: u32,
    out_dim: usize,
    points: Vec<Vec<u32>>,
    values: Vec<Vec<f64>>,
    index: HashMap<Vec<u32>, usize>,
}

impl GridFunction {
    /// Tabulates `f` on every count table summing to `denominator`.
    pub fn from_fn(n_cells: usize, denominator: u32, out_dim: usize, f: impl Fn(&[u32]) -> Vec<f64> + Sync) -> Result<Self> {
        let points = compositions(denominator as usize, n_cells);
        let values: Vec<Vec<f64>> = points.par_iter().map(|p| f(p)).collect();
        Self::from_table(n_cells, denominator, out_dim, points, values)
    }

    /// Builds a grid function from explicit rows. Every grid point must be
    /// present exactly once.
    pub fn from_table(
        n_cells: usize,
        denominator: u32,
        out_dim: usize,
        points: Vec<Vec<u32>>,
        values: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if points.len() != values.len() {
            return Err(Error::ShapeMismatch("grid points and values differ in length".into()));
        }
        let expected = composition_count(denominator as usize, n_cells);
        if points.len() as u128 != expected {
            return Err(Error::ShapeMismatch(format!(
                "{} grid points given, the grid has {expected}",
                points.len()
            )));
        }
        let mut index = HashMap::with_capacity(points.len());
        for (i, (p, v)) in points.iter().zip(&values).enumerate() {
            if p.len() != n_cells || p.iter().map(|&c| c as u64).sum::<u64>() != denominator as u64 {
                return Err(Error::ShapeMismatch(format!("row {i} is not a grid point")));
            }
            if v.len() != out_dim {
                return Err(Error::ShapeMismatch(format!("row {i} has {} values, expected {out_dim}", v.len())));
            }
            if index.insert(p.clone(), i).is_some() {
                return Err(Error::ShapeMismatch(format!("grid point in row {i} repeated")));
            }
        }
        Ok(Self {
            n_cells,
            denominator,
            out_dim,
            points,
            values,
            index,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn denominator(&self) -> u32 {
        self.denominator
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<u32>] {
        &self.points
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn get(&self, counts: &[u32]) -> Option<&[f64]> {
        self.index.get(counts).map(|&i| self.values[i].as_slice())
    }

    /// The grid point `i` as a probability vector.
    pub fn point_weights(&self, i: usize) -> Vec<f64> {
        let k = f64::from(self.denominator);
        self.points[i].iter().map(|&c| f64::from(c) / k).collect()
    }

    /// Counts of `weights` when it lies on the grid (within 1e-12 per cell).
    fn grid_counts(&self, weights: &[f64]) -> Option<Vec<u32>> {
        let k = f64::from(self.denominator);
        let mut counts = Vec::with_capacity(weights.len());
        for &w in weights {
            let x = w * k;
            let r = x.round();
            if (x - r).abs() > 1e-12 || r < 0.0 {
                return None;
            }
            counts.push(r as u32);
        }
        (counts.iter().map(|&c| c as u64).sum::<u64>() == self.denominator as u64).then_some(counts)
    }
}

/// Checks permutation invariance of `g` on 100 random tuples and
/// permutations, then tabulates it on the grid of denominator `arity`.
pub fn lift_population(g: &TupleFunction, stream: RngStream) -> Result<GridFunction> {
    if g.arity == 0 {
        return Err(Error::EmptyProfile);
    }
    let mut rng = stream.rng();
    for trial in 0..100 {
        let x: Vec<usize> = (0..g.arity).map(|_| rng.gen_range(0..g.n_cells)).collect();
        let mut y = x.clone();
        y.shuffle(&mut rng);
        let (gx, gy) = (g.eval(&x)?, g.eval(&y)?);
        if gx.iter().zip(&gy).any(|(a, b)| (a - b).abs() > 1e-12 * (1.0 + a.abs())) {
            return Err(Error::NotSymmetric { trial });
        }
    }
    GridFunction::from_fn(g.n_cells, g.arity as u32, g.out_dim, |counts| {
        let tuple: Vec<usize> = counts
            .iter()
            .enumerate()
            .flat_map(|(cell, &c)| std::iter::repeat(cell).take(c as usize))
            .collect();
        (g.f)(&tuple)
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LipschitzNorm {
    L1,
    L2,
}

impl LipschitzNorm {
    fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            LipschitzNorm::L1 => l1_distance(a, b),
            LipschitzNorm::L2 => l2_distance(a, b),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PairMode {
    /// Every unordered pair of grid points.
    Exact,
    /// `pairs` random pairs drawn from `stream`.
    Sampled { pairs: usize, stream: RngStream },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModulusEstimate {
    pub modulus: f64,
    /// Grid indices attaining the maximum.
    pub witness: Option<(usize, usize)>,
    pub pairs: usize,
}

fn modulus_with(g: &GridFunction, norm: LipschitzNorm, mode: PairMode, output: impl Fn(&[f64], &[f64]) -> f64 + Sync) -> ModulusEstimate {
    let n = g.len();
    if n < 2 {
        warn!("grid with fewer than two points: Lipschitz modulus reported as 0");
        return ModulusEstimate {
            modulus: 0.0,
            witness: None,
            pairs: 0,
        };
    }
    let weights: Vec<Vec<f64>> = (0..n).map(|i| g.point_weights(i)).collect();
    let quotient = |i: usize, j: usize| {
        let d = norm.distance(&weights[i], &weights[j]);
        output(&g.values[i], &g.values[j]) / d
    };
    let best = |a: (f64, usize, usize), b: (f64, usize, usize)| {
        if b.0 > a.0 || (b.0 == a.0 && (b.1, b.2) < (a.1, a.2)) {
            b
        } else {
            a
        }
    };
    let (value, i, j, pairs) = match mode {
        PairMode::Exact => {
            let (v, i, j) = (0..n)
                .into_par_iter()
                .map(|i| {
                    ((i + 1)..n)
                        .map(|j| (quotient(i, j), i, j))
                        .fold((f64::NEG_INFINITY, usize::MAX, usize::MAX), best)
                })
                .reduce(|| (f64::NEG_INFINITY, usize::MAX, usize::MAX), best);
            (v, i, j, n * (n - 1) / 2)
        }
        PairMode::Sampled { pairs, stream } => {
            let mut rng = stream.rng();
            let mut acc = (f64::NEG_INFINITY, usize::MAX, usize::MAX);
            for _ in 0..pairs {
                let i = rng.gen_range(0..n);
                let mut j = rng.gen_range(0..n - 1);
                if j >= i {
                    j += 1;
                }
                let (i, j) = (i.min(j), i.max(j));
                acc = best(acc, (quotient(i, j), i, j));
            }
            (acc.0, acc.1, acc.2, pairs)
        }
    };
    if pairs == 0 {
        return ModulusEstimate {
            modulus: 0.0,
            witness: None,
            pairs,
        };
    }
    ModulusEstimate {
        modulus: value.max(0.0),
        witness: Some((i, j)),
        pairs,
    }
}

/// Largest difference quotient `||g(nu) - g(nu')|| / ||nu - nu'||` over
/// grid pairs, with the same norm on inputs and outputs.
pub fn estimate_lipschitz_modulus(g: &GridFunction, norm: LipschitzNorm, mode: PairMode) -> ModulusEstimate {
    modulus_with(g, norm, mode, |a, b| norm.distance(a, b))
}

/// Largest per-coordinate difference quotient in the Euclidean input norm,
/// the constant that governs the coordinatewise McShane extension.
pub fn coordinate_modulus(g: &GridFunction, mode: PairMode) -> ModulusEstimate {
    modulus_with(g, LipschitzNorm::L2, mode, |a, b| {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    })
}

/// `ext_j(mu) = min_nu g_j(nu) + L ||mu - nu||_2`, optionally projected
/// onto the simplex.
#[derive(Clone, Debug)]
pub struct LipschitzExtension {
    grid: GridFunction,
    weights: Vec<Vec<f64>>,
    lipschitz: f64,
    project: bool,
}

/// Builds the McShane extension of `g` with constant `lipschitz`, which must
/// dominate the per-coordinate modulus of `g` on its grid.
pub fn mcshane_extend(g: &GridFunction, lipschitz: f64, project: bool) -> Result<LipschitzExtension> {
    let measured = coordinate_modulus(g, PairMode::Exact);
    if measured.modulus > lipschitz * (1.0 + 1e-12) + 1e-15 {
        return Err(Error::ModulusViolation {
            lipschitz,
            modulus: measured.modulus,
            witness: measured.witness.unwrap_or((0, 0)),
        });
    }
    Ok(LipschitzExtension {
        weights: (0..g.len()).map(|i| g.point_weights(i)).collect(),
        grid: g.clone(),
        lipschitz,
        project,
    })
}

impl LipschitzExtension {
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn grid(&self) -> &GridFunction {
        &self.grid
    }

    /// Evaluates the extension at the distribution `mu` (cell weights).
    pub fn eval(&self, mu: &[f64]) -> Vec<f64> {
        let raw = match self.grid.grid_counts(mu).and_then(|c| self.grid.get(&c).map(<[f64]>::to_vec)) {
            Some(v) => v,
            None => {
                let mut out = vec![f64::INFINITY; self.grid.out_dim];
                for (nu, values) in self.weights.iter().zip(&self.grid.values) {
                    let d = self.lipschitz * l2_distance(mu, nu);
                    for (o, v) in out.iter_mut().zip(values) {
                        let candidate = v + d;
                        if candidate < *o {
                            *o = candidate;
                        }
                    }
                }
                out
            }
        };
        if self.project {
            project_simplex(&raw)
        } else {
            raw
        }
    }
}

/// Outcome of a randomized κ-sparsity battery.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparsityCertificate {
    /// No discriminating pair found. Probabilistic: a certificate, not a proof.
    pub sparse: bool,
    pub trials: usize,
    pub stream: RngStream,
    /// A pair of inputs agreeing on the declared cells with different outputs.
    pub witness: Option<(Vec<u32>, Vec<u32>)>,
}

fn outputs_differ(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).any(|(x, y)| (x - y).abs() > 1e-12 * (1.0 + x.abs().max(y.abs())))
}

/// Tests whether `f` (a function of count tables summing to `total`)
/// depends only on the counts of the cells in `cells`: random tables are
/// paired with tables that keep those counts and redistribute the rest.
pub fn check_kappa_sparsity(
    n_cells: usize,
    total: u32,
    f: &CountFn<'_>,
    cells: &[usize],
    trials: usize,
    stream: RngStream,
) -> SparsityCertificate {
    let mut rng = stream.rng();
    let inside: Vec<bool> = (0..n_cells).map(|c| cells.contains(&c)).collect();
    let outside: Vec<usize> = (0..n_cells).filter(|&c| !inside[c]).collect();
    for _ in 0..trials {
        let mut x = vec![0u32; n_cells];
        for _ in 0..total {
            x[rng.gen_range(0..n_cells)] += 1;
        }
        let mut y = vec![0u32; n_cells];
        let mut free = 0;
        for c in 0..n_cells {
            if inside[c] {
                y[c] = x[c];
            } else {
                free += x[c];
            }
        }
        if !outside.is_empty() {
            for _ in 0..free {
                y[outside[rng.gen_range(0..outside.len())]] += 1;
            }
        }
        if outputs_differ(&f(&x), &f(&y)) {
            return SparsityCertificate {
                sparse: false,
                trials,
                stream,
                witness: Some((x, y)),
            };
        }
    }
    SparsityCertificate {
        sparse: true,
        trials,
        stream,
        witness: None,
    }
}

/// Tuple form of [`check_kappa_sparsity`]: entries outside `cells` are
/// replaced by random cells outside `cells`. Witnesses are the two tuples.
pub fn check_kappa_sparsity_tuple(f: &TupleFunction, cells: &[usize], trials: usize, stream: RngStream) -> Result<SparsityCertificate> {
    let mut rng = stream.rng();
    let outside: Vec<usize> = (0..f.n_cells).filter(|c| !cells.contains(c)).collect();
    for _ in 0..trials {
        let x: Vec<usize> = (0..f.arity).map(|_| rng.gen_range(0..f.n_cells)).collect();
        let y: Vec<usize> = x
            .iter()
            .map(|&c| {
                if cells.contains(&c) || outside.is_empty() {
                    c
                } else {
                    outside[rng.gen_range(0..outside.len())]
                }
            })
            .collect();
        if outputs_differ(&f.eval(&x)?, &f.eval(&y)?) {
            let as_u32 = |v: &[usize]| v.iter().map(|&c| c as u32).collect();
            return Ok(SparsityCertificate {
                sparse: false,
                trials,
                stream,
                witness: Some((as_u32(&x), as_u32(&y))),
            });
        }
    }
    Ok(SparsityCertificate {
        sparse: true,
        trials,
        stream,
        witness: None,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum AlphaBetaMode {
    /// Every opponent count table summing to `N - 1`.
    Exact,
    /// `profiles` opponent tables: half uniform over the grid, half taken
    /// from episodes where everyone plays `policy` (uniform when absent).
    Sampled {
        profiles: usize,
        #[serde(default)]
        policy: Option<Policy>,
        #[serde(default)]
        seed: u64,
    },
}

/// Where a worst-case deviation occurs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub agent: usize,
    pub state: usize,
    pub action: usize,
    pub others: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaBetaReport {
    /// `max ||P^i(s,a,rho) - P(s,a,mu_rho)||_1`.
    pub alpha: f64,
    /// `max |R^i(s,a,rho) - R(s,a,mu_rho)|` in raw reward units.
    pub beta: f64,
    /// `beta` divided by the game's declared reward range.
    pub beta_normalized: f64,
    pub mode: String,
    /// True in sampled mode: the values are lower bounds.
    pub lower_bound: bool,
    /// Number of `(agent, state, action, profile)` evaluations.
    pub samples_used: usize,
    pub alpha_witness: Option<Witness>,
    pub beta_witness: Option<Witness>,
}

/// `(value, profile index, agent, cell)`; larger value wins, ties go to the
/// smallest key so the reduction is order-independent.
type Best = (f64, usize, usize, usize);

fn better(a: Best, b: Best) -> Best {
    if b.0 > a.0 || (b.0 == a.0 && (b.1, b.2, b.3) < (a.1, a.2, a.3)) {
        b
    } else {
        a
    }
}

const NONE: Best = (f64::NEG_INFINITY, usize::MAX, usize::MAX, usize::MAX);

fn uniform_grid_point<R: Rng>(rng: &mut R, total: usize, cells: usize) -> Vec<u32> {
    // Stars and bars: choose `cells - 1` bar positions among
    // `total + cells - 1` slots uniformly.
    let slots = total + cells - 1;
    let mut positions: Vec<usize> = rand::seq::index::sample(rng, slots, cells - 1).into_vec();
    positions.sort_unstable();
    let mut counts = Vec::with_capacity(cells);
    let mut prev = 0;
    for (k, &p) in positions.iter().enumerate() {
        counts.push((p - prev - if k == 0 { 0 } else { 1 }) as u32);
        prev = p;
    }
    let used: u32 = counts.iter().sum();
    counts.push(total as u32 - used);
    counts
}

/// Measures how far each agent's kernels are from the mean-field kernels,
/// evaluated at the empirical distribution of the opponents.
pub fn estimate_alpha_beta(game: &dyn DynamicGame, mfg: &dyn MeanFieldGame, mode: &AlphaBetaMode) -> Result<AlphaBetaReport> {
    let (n, ns, na) = (game.n_agents(), game.n_states(), game.n_actions());
    if mfg.n_states() != ns || mfg.n_actions() != na {
        return Err(Error::ShapeMismatch("game and mean-field game disagree on sizes".into()));
    }
    let cells = ns * na;
    let profiles: Vec<Vec<u32>> = match mode {
        AlphaBetaMode::Exact => {
            let count = composition_count(n - 1, cells);
            if count > ALPHA_BETA_EXACT_CAP {
                return Err(Error::EnumerationTooLarge {
                    count,
                    cap: ALPHA_BETA_EXACT_CAP,
                });
            }
            compositions(n - 1, cells)
        }
        AlphaBetaMode::Sampled { profiles, policy, seed } => {
            let stream = RngStream::new(*seed, 0xAB);
            let mut rng = stream.rng();
            let uniform_count = profiles - profiles / 2;
            let mut out: Vec<Vec<u32>> = (0..uniform_count).map(|_| uniform_grid_point(&mut rng, n - 1, cells)).collect();
            let pi = policy.clone().unwrap_or_else(|| Policy::uniform(game.horizon(), ns, na));
            let profile = PolicyProfile::Shared(pi);
            for e in 0..(profiles / 2) as u64 {
                let traj = sample_episode(game, &profile, stream.child(e))?;
                let h = rng.gen_range(0..game.horizon());
                let i = rng.gen_range(0..n);
                let mut counts = traj.counts(h, ns);
                counts[traj.state(h, i) * na + traj.action(h, i)] -= 1;
                out.push(counts);
            }
            out
        }
    };

    let (alpha, beta) = profiles
        .par_iter()
        .enumerate()
        .map(|(pidx, others)| {
            let mut p_game = vec![0.0; ns];
            let mut p_mfg = vec![0.0; ns];
            let mut alpha = NONE;
            let mut beta = NONE;
            for cell in 0..cells {
                let (s, a) = (cell / na, cell % na);
                let mu = if n > 1 {
                    PopulationDistribution::from_counts(ns, na, others).expect("opponents present")
                } else {
                    PopulationDistribution::point_mass(ns, na, s, a)
                };
                mfg.transition(s, a, &mu, &mut p_mfg);
                let r_mfg = mfg.reward(s, a, &mu);
                for i in 0..n {
                    game.transition(i, s, a, others, &mut p_game);
                    alpha = better(alpha, (l1_distance(&p_game, &p_mfg), pidx, i, cell));
                    beta = better(beta, ((game.reward(i, s, a, others) - r_mfg).abs(), pidx, i, cell));
                }
            }
            (alpha, beta)
        })
        .reduce(|| (NONE, NONE), |x, y| (better(x.0, y.0), better(x.1, y.1)));

    let witness = |b: Best| {
        (b.1 != usize::MAX).then(|| Witness {
            agent: b.2,
            state: b.3 / na,
            action: b.3 % na,
            others: profiles[b.1].clone(),
        })
    };
    let range = RewardScale::from_bounds(game.reward_bounds()).range();
    let beta_value = beta.0.max(0.0);
    Ok(AlphaBetaReport {
        alpha: alpha.0.max(0.0),
        beta: beta_value,
        beta_normalized: beta_value / range,
        mode: match mode {
            AlphaBetaMode::Exact => "exact".into(),
            AlphaBetaMode::Sampled { .. } => "sampled".into(),
        },
        lower_bound: matches!(mode, AlphaBetaMode::Sampled { .. }),
        samples_used: profiles.len() * cells * n,
        alpha_witness: witness(alpha),
        beta_witness: witness(beta),
    })
}

/// How [`induce_mfg`] extends the lifted kernels off the grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Extension {
    /// The game's analytic continuum formula, falling back to McShane.
    Auto,
    /// The game's analytic continuum formula only.
    Analytic,
    /// McShane extension of every agent's lifted kernels. `lipschitz`
    /// overrides the measured per-function modulus.
    McShane { lipschitz: Option<f64> },
}

/// The mean-field game induced by averaging McShane extensions of every
/// agent's lifted transition and reward functions.
pub struct InducedMfg {
    horizon: usize,
    n_states: usize,
    n_actions: usize,
    rho0: Vec<f64>,
    bounds: (f64, f64),
    /// `[agent][cell]`
    rewards: Vec<Vec<LipschitzExtension>>,
    transitions: Vec<Vec<LipschitzExtension>>,
}

impl InducedMfg {
    pub fn build(game: &dyn DynamicGame, lipschitz: Option<f64>) -> Result<Self> {
        let (n, ns, na) = (game.n_agents(), game.n_states(), game.n_actions());
        if n < 2 {
            return Err(Error::NoExtension("lifting needs at least two agents".into()));
        }
        let cells = ns * na;
        let count = composition_count(n - 1, cells);
        if count > ALPHA_BETA_EXACT_CAP {
            return Err(Error::EnumerationTooLarge {
                count,
                cap: ALPHA_BETA_EXACT_CAP,
            });
        }
        let extend = |g: GridFunction, project: bool| -> Result<LipschitzExtension> {
            let l = match lipschitz {
                Some(l) => l,
                None => coordinate_modulus(&g, PairMode::Exact).modulus,
            };
            mcshane_extend(&g, l, project)
        };
        let mut rewards = Vec::with_capacity(n);
        let mut transitions = Vec::with_capacity(n);
        for i in 0..n {
            let mut r_row = Vec::with_capacity(cells);
            let mut p_row = Vec::with_capacity(cells);
            for cell in 0..cells {
                let (s, a) = (cell / na, cell % na);
                let r = GridFunction::from_fn(cells, (n - 1) as u32, 1, |others| vec![game.reward(i, s, a, others)])?;
                let p = GridFunction::from_fn(cells, (n - 1) as u32, ns, |others| {
                    let mut out = vec![0.0; ns];
                    game.transition(i, s, a, others, &mut out);
                    out
                })?;
                r_row.push(extend(r, false)?);
                p_row.push(extend(p, true)?);
            }
            rewards.push(r_row);
            transitions.push(p_row);
        }
        Ok(Self {
            horizon: game.horizon(),
            n_states: ns,
            n_actions: na,
            rho0: game.initial_distribution().to_vec(),
            bounds: game.reward_bounds(),
            rewards,
            transitions,
        })
    }
}

/// Running mean over agents: exact when all agents agree.
fn agent_mean(values: impl Iterator<Item = Vec<f64>>) -> Vec<f64> {
    let mut mean: Vec<f64> = Vec::new();
    for (k, v) in values.enumerate() {
        if k == 0 {
            mean = v;
        } else {
            for (m, x) in mean.iter_mut().zip(&v) {
                *m += (x - *m) / (k + 1) as f64;
            }
        }
    }
    mean
}

impl MeanFieldGame for InducedMfg {
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

    fn transition(&self, state: usize, action: usize, mu: &PopulationDistribution, out: &mut [f64]) {
        let cell = state * self.n_actions + action;
        let mean = agent_mean(self.transitions.iter().map(|row| row[cell].eval(mu.weights())));
        out.copy_from_slice(&mean);
    }

    fn reward(&self, state: usize, action: usize, mu: &PopulationDistribution) -> f64 {
        let cell = state * self.n_actions + action;
        agent_mean(self.rewards.iter().map(|row| row[cell].eval(mu.weights())))[0]
    }

    fn reward_bounds(&self) -> (f64, f64) {
        self.bounds
    }
}

/// The mean-field game induced by `game`.
pub fn induce_mfg(game: &dyn DynamicGame, extension: Extension) -> Result<Arc<dyn MeanFieldGame>> {
    match extension {
        Extension::Analytic => game
            .analytic_mean_field()
            .ok_or_else(|| Error::NoExtension("the game declares no analytic mean-field limit".into())),
        Extension::Auto => match game.analytic_mean_field() {
            Some(m) => Ok(m),
            None => InducedMfg::build(game, None)
                .map(|m| Arc::new(m) as Arc<dyn MeanFieldGame>)
                .map_err(|e| Error::NoExtension(format!("no analytic limit and grid extension failed: {e}"))),
        },
        Extension::McShane { lipschitz } => Ok(Arc::new(InducedMfg::build(game, lipschitz)?)),
    }
}
