//! Shared fixtures for the benchmarks.

use dpcrm::rng::stream;
use dpcrm::sampling::{sample_partition_with_dust, sample_weights, Truncation};
use dpcrm::{ModelSpec, PartitionCounts};

/// GBFRY partition of size `n` used as fitting input.
pub fn gbfry_partition(n: u64, seed: u64) -> PartitionCounts {
    let model = ModelSpec::gbfry(0.2, 2.0, 1.0, 400.0);
    let mut rng = stream(seed, 0);
    let w = sample_weights(&model, &mut rng, &Truncation::default()).expect("weights");
    sample_partition_with_dust(&w, n, &mut rng).expect("partition")
}
