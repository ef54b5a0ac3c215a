pub mod diagnostics;
pub mod error;
pub mod inference;
pub mod io;
pub mod measures;
pub mod quadrature;
pub mod rng;
pub mod sampling;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
pub use measures::{Family, MixtureTail, ModelSpec, RvConstants};
pub use sampling::{OccupancySpectrum, PartitionCounts, Truncation, WeightSeq};
