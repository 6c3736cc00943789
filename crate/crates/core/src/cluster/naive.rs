use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Partition, PartitionMethod};
use crate::error::{Error, Result};

/// Random baseline: shuffle the flows with a seeded generator, then deal them
/// round-robin into `k` clusters. Cluster sizes differ by at most one.
pub fn naive_partition(m: usize, k: usize, seed: u64) -> Result<Partition> {
    if k == 0 || k > m {
        return Err(Error::InvalidArgument(format!("k = {k} outside 1..={m}")));
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut labels = vec![0; m];
    for (pos, &flow) in order.iter().enumerate() {
        labels[flow] = pos % k + 1;
    }
    Partition::new(labels, PartitionMethod::Naive, Some(seed))
}
