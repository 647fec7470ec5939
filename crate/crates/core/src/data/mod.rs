//! Benchmark data: raw streams, NaN repair, boundary-respecting
//! segmentation, subject/trial splits and on-disk segment stores.

mod loaders;
mod split;
mod standardize;
mod store;
mod stream;

pub use loaders::{read_table, DatasetId, MAX_GAP_SECONDS, SUPPORTED};
pub use split::{Split, SplitKey, SplitSpec};
pub use standardize::{ChannelGroup, Standardizer};
pub use store::{store_file, Dataset, SegmentStore, SplitEntry, SplitManifest, StoreHeader, MANIFEST_FILE};
pub use stream::{clean_runs, interpolate_nan, interpolate_series, max_gap_samples, segment, segment_count, LabeledStream, Run};
