//! Persistence diagrams of scalar fields on regular grids.
//!
//! The crate is `no_std` (it needs `alloc`). It contains the sequential
//! pipeline, the per-block building blocks used by the distributed engine,
//! and brute-force reference implementations for testing.
//!
//! ```
//! use dms_core::{compute_diagram, GridShape, PipelineOptions};
//!
//! let shape = GridShape::new(3, 3, 1);
//! let values: Vec<f64> = (0..9).map(|i| ((i * 7) % 9) as f64).collect();
//! let diagram = compute_diagram(shape, &values, &PipelineOptions::default()).unwrap();
//! assert_eq!(diagram.essential.len(), 1);
//! ```
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod boundary;
pub mod diagram;
pub mod error;
pub mod gradient;
pub mod grid;
pub mod order;
pub mod oracle;
pub mod pairing;
pub mod partition;
pub mod pipeline;
pub mod propagation;

pub use diagram::{Essential, Pair, PersistenceDiagram};
pub use error::Error;
pub use gradient::{Gradient, Slot};
pub use grid::{GridShape, SimplexId, TriangulatedGrid};
pub use order::{GlobalOrder, SimplexKey};
pub use partition::{GhostedBlock, Partition};
pub use pipeline::{compute_diagram, PipelineOptions, ProcessingOrder};
