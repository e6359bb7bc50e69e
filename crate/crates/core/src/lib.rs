pub mod accel;
pub mod assignment;
pub mod coarsen;
pub mod error;
pub mod generators;
pub mod graph;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod multi;
pub mod pairwise;
pub mod projection;
pub mod rng;

pub use error::{Error, Result};
pub use graph::{pad_with_dummies, permute_graph, DoublyStochastic, GraphSet, LabeledGraph, Permutation};
pub use rng::RngSeed;
