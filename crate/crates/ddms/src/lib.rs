//! Distributed persistence diagrams of scalar fields on regular grids.
//!
//! The sequential engine and the reference oracles live in `dms_core`. This
//! crate adds a deterministic in-process message transport, the distributed
//! pipeline running one thread per simulated rank, field generators, file
//! formats and the command line front end.

pub mod cli;
pub mod distributed;
pub mod fields;
pub mod io;
pub mod parallel;
pub mod transport;

pub use distributed::{compute_diagram_distributed, DistConfig, DistOutput, Mode};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),
    #[error("bad input: {0}")]
    Format(String),
    #[error(transparent)]
    Core(#[from] dms_core::Error),
    #[error(transparent)]
    Transport(#[from] transport::TransportError),
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("configuration: {0}")]
    Config(String),
}
