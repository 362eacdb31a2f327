//! Preselection bandits with Plackett-Luce selectors.
//!
//! An agent offers a subset of arms, a simulated selector picks one of them
//! according to the Plackett-Luce model, and the agent learns from the pick.
//! The crate provides the choice model ([`pl`]), optimal-subset routines
//! ([`subset`]), learning policies ([`policy`]) and a seeded Monte-Carlo
//! harness ([`sim`]).
//!
//! The choice model and subset routines are generic over [`Scalar`] (`f32` or
//! `f64`); the aliases below fix them to `f64`, which is what the policies and
//! the harness use.

pub mod error;
pub mod pl;
pub mod policy;
pub mod scalar;
pub mod sim;
pub mod subset;

pub use error::{Error, Result};
pub use pl::{ChoiceObservation, Preselection, Ranking};
pub use policy::{CbrState, Policy, SShaped, TrcbState, Variant, WinMatrix};
pub use scalar::Scalar;
pub use sim::{
    run_batch, run_batch_monitored, run_episode, BatchResult, ContractMonitor, InstanceSource,
    PolicySpec, PolicySummary, RegretTrace, SimulationConfig,
};

/// Score vector in double precision.
pub type ScoreVector = pl::Scores<f64>;
/// Optimal subset with its reward in double precision.
pub type OptResult = subset::OptResult<f64>;
