//! Monte Carlo simulator of a temporally multiplexed quantum-repeater half-link.

pub mod channel;
pub mod controller;
pub mod engine;
pub mod error;
pub mod lsq;
pub mod model;
pub mod oracle;
pub mod output;
pub mod scenario;
pub mod schedule;
pub mod stats;
pub mod time;

pub use error::{Error, Result};
pub use model::{DecayShape, LinkConfig, ModeId, ReadoutPolicy};
pub use time::Picos;
