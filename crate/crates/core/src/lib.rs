//! Agent-based simulation of meme diffusion on a social network infiltrated
//! by deceptive bots.
//!
//! - [`netgen`] builds the follower network (humans, bots, infiltration).
//! - [`engine`] runs the limited-attention diffusion dynamics.
//! - [`metrics`] computes quality, diversity, discriminative power and the
//!   bot amplification statistics.
//! - [`experiment`] runs replicates and parameter sweeps.

pub mod engine;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod netgen;
pub mod par;
pub mod seed;

pub use engine::{
    run_to_steady_state, Feed, Meme, MemeId, Message, SimParams, SimState, SteadyConfig,
};
pub use error::{Result, SimError};
pub use experiment::{ExperimentKind, RunResult, SweepRecord, SweepSpec};
pub use metrics::{MemeLedger, MetricsReport};
pub use netgen::{Generator, NetGenParams, Network, NodeId, NodeKind, Wiring};
pub use par::Execution;
pub use seed::RunSeed;
