//! Approximately symmetric N-player dynamic games, their induced
//! mean-field games, and learning of approximate Nash equilibria from
//! N-player trajectories.

pub mod cli;
pub mod dist;
pub mod envs;
pub mod error;
pub mod game;
pub mod io;
pub mod learn;
pub mod mfg;
pub mod numeric;
pub mod policy;
pub mod rng;
pub mod sim;
pub mod symmetry;

pub use dist::{empirical_distribution, PopulationDistribution, PopulationFlow};
pub use error::{Error, Result};
pub use game::{DynamicGame, MeanFieldGame, RewardScale};
pub use policy::{Policy, QTable};
pub use rng::RngStream;
