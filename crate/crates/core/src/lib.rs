//! Incremental LMS over a ring of fading links.
//!
//! The crate pairs a Monte Carlo engine for the fading ILMS recursion with
//! closed-form steady-state predictions (MSD, EMSE, MSE, bias and stability
//! conditions) and a harness that checks one against the other.

pub mod channel;
pub mod config;
pub mod error;
pub mod harness;
pub mod network;
pub mod pipeline;
pub mod report;
pub mod sim;
pub mod theory;

mod linalg;

pub use channel::{ChannelKind, ChannelModel, Moments};
pub use error::{Error, Result};
pub use network::{DataKind, EigenFactorization, NetworkProfile, NodeParams, Violation};
pub use sim::{EnsembleResult, NodeMetrics, SimConfig};
pub use theory::{PiConvention, TheoryContext};
