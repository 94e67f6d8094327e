//! Simulation and analysis of the elephant quantum walk: a discrete-time
//! quantum walk whose shift length at step `t` is drawn uniformly from
//! `{1-t, …, 1+t}`, together with the standard quantum walk and the classical
//! elephant random walk.
//!
//! * [`lattice`]: walker states, probability distributions, coin densities.
//! * [`walk`]: coin and shift operators, step-size rules, trajectories,
//!   ensembles and measured-walk conditional statistics.
//! * [`classical`]: the classical elephant random walk.
//! * [`spectral`]: Bloch-vector step maps, eigenvalues, the exact averaged
//!   channel.
//! * [`analysis`]: moments, power-law fits, Gaussianity, trace distance.

pub mod analysis;
pub mod classical;
pub mod error;
pub mod lattice;
pub mod rng;
pub mod spectral;
pub mod walk;

pub use error::{Error, Result};
pub use lattice::{
    make_gaussian_packet, make_localized, position_distribution, reduced_coin_density,
    CoinBlochState, CoinDensity, GaussianPacketSpec, PositionDistribution, WalkState,
};
pub use num_complex::Complex64 as C64;
pub use rng::SeedInfo;
pub use walk::{CoinParams, EnsembleResult, StepSizeRule, TrajectoryRecord};
