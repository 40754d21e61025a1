//! SIS epidemic spreading on weighted geometric small-world graphs.
//!
//! Disease transmission is modelled as walker motion: every node starts with
//! `t_max * k_i` walkers, an infected node may push one walker along each of
//! its bonds per step (succeeding with the directed transmission weight), and
//! a susceptible node that receives a walker becomes infected.
//!
//! The crate is organised bottom-up:
//!
//! * [`netgen`] builds geometric graphs with short and long bonds and handles
//!   the graph file format.
//! * [`weights`] assigns directed transmission weights, perturbs a single node
//!   and measures its difference/entropy metrics.
//! * [`engine`] runs the stochastic walker dynamics and the deterministic
//!   mean-flow (master equation) dynamics.
//! * [`analysis`] computes outcome metrics and density bounds.
//! * [`sweep`] drives replicated parameter sweeps over the perturbed node.
//! * [`verify`] bundles the invariant checks used by the `verify` command.

pub mod analysis;
pub mod engine;
pub mod error;
pub mod io;
pub mod netgen;
pub mod seeds;
pub mod sweep;
pub mod verify;
pub mod weights;

pub use analysis::{BoundReport, OutcomeMetrics};
pub use engine::{EpidemicState, InfectionTrace, RunRecord, StopPolicy, TransferMatrix};
pub use error::{Error, Result};
pub use netgen::{BondKind, GraphParams, WeightedGraph};
pub use sweep::{Scenario, SweepConfig, SweepResult};
pub use weights::{HeterogeneitySpec, NodeMetrics, WeightPolicy};

/// RNG used for every stochastic component.
pub type SimRng = rand_pcg::Pcg64;
