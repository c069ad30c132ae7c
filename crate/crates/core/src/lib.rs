//! Deterministic discrete-event simulator for data dissemination in
//! wireless sensor networks.
//!
//! The [`runtime`] drives per-node [`protocol::NodeProtocol`] state machines
//! over a disc-radio [`network`]; [`protocols`] holds the four dissemination
//! schemes and [`harness`] runs scenario files, sweeps and reports.

pub mod error;
pub mod harness;
pub mod metrics;
pub mod network;
pub mod protocol;
pub mod runtime;
pub mod sim;
pub mod protocols;

pub use error::{Error, Result};
pub use harness::Scenario;
pub use protocols::ProtocolKind;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/introduction.md")]
mod book_introduction {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/simulation.md")]
mod book_simulation {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/radio.md")]
mod book_radio {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/protocols.md")]
mod book_protocols {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/metrics.md")]
mod book_metrics {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/experiments.md")]
mod book_experiments {}
