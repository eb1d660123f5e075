//! Accelerated forward-backward methods (NAG, M-NAG, FISTA, M-FISTA, NAG-SC,
//! M-NAG-SC) for strongly convex objectives, together with a Lyapunov
//! energy engine that certifies linear convergence bounds along recorded
//! trajectories.
//!
//! The modules build on each other bottom-up:
//!
//! - [`problems`]: smooth and composite objective oracles and test problems.
//! - [`proximal`]: s-proximal value and subgradient, ℓ1 soft-thresholding.
//! - [`algorithms`]: single-step transitions and the trace runner.
//! - [`lyapunov`]: canonical sequences, energies and certificates.
//! - [`harness`]: experiment configs, presets and file output.

pub mod algorithms;
pub mod error;
pub mod harness;
pub mod lyapunov;
pub mod problems;
pub mod proximal;

pub use algorithms::{run, AlgoState, Algorithm, Record, RunParams, Trace, Transition};
pub use error::{Error, Result};
pub use lyapunov::{certify, Certificate, EnergyBreakdown, EnergyForm};
pub use problems::{
    CompositeObjective, OptimumInfo, OptimumSource, Regularizer, SmoothOracle, Vector,
};
