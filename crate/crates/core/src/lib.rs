//! Simulation of dephasing and amplitude-damping dynamics on photonic path
//! qudits: weighted Kraus channels, time-multiplexed SLM films, quantum
//! trajectories, the Sagnac no-jump filter, conditional interference patterns
//! and concurrence estimation from coincidence counts.

pub mod channel;
pub mod dynamics;
pub mod error;
pub mod experiment;
pub mod film;
pub mod formats;
pub mod optics;
pub mod rng;
pub mod state;

pub use error::{Error, Result};
