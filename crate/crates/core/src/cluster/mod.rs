//! Hierarchical agglomerative clustering, dendrogram cuts and the random
//! baseline partition.

mod hac;
mod naive;
mod partition;

pub use hac::{cut, hac, Dendrogram, Linkage, Merge};
pub use naive::naive_partition;
pub use partition::{Partition, PartitionMethod};
