//! Finite-key security analysis for side-channel-secure QKD with
//! correlated source errors and Trojan-horse reflections.
//!
//! The pipeline runs, for one operating point:
//!
//! 1. [`channel::simulate_counts`]: linear-model counts `n_O`, `n_B`, `n_Z`, `E_Z`;
//! 2. [`fidelity::virtual_intensities`]: equivalent perfect-source intensities;
//! 3. [`keyrate::phase_flip_bound`]: Chernoff-certified phase-flip error rate;
//! 4. [`keyrate::r_collective`] / [`keyrate::r_coherent`]: finite-key rates.
//!
//! [`optimizer`] maximises the rate over `(mu, p_w)`, sweeps distance and
//! locates the secure cutoff; [`cli`] wraps it all in a config-driven
//! command-line tool.

pub mod channel;
pub mod chernoff;
pub mod cli;
pub mod error;
pub mod fidelity;
pub mod keyrate;
pub mod model;
pub mod optimizer;

pub use error::{Error, Result};
pub use model::{
    validate, ChannelParams, Configuration, EpsilonBudget, FailureProb, Insecurity, ObservedCounts, Overlap,
    ProtocolParams, RatePoint, SourceBounds,
};
