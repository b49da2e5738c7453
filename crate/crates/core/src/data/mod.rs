//! Datasets: IDX loading, synthetic blobs, Dirichlet label-skew partitioning
//! and trigger-based poisoning.

mod idx;
mod partition;
mod shard;
mod synth;
mod trigger;

pub use idx::{encode_images, encode_labels, load_idx, parse_idx, IMAGES_MAGIC, LABELS_MAGIC};
pub use partition::{dirichlet_partition, sample_dirichlet, PartitionSpec};
pub use shard::{ClientId, DatasetShard, Sample};
pub use synth::{synth_blobs, BlobGenerator};
pub use trigger::{backdoor_testset, flip_labels, poison_shard, Fragment, TriggerPattern};
