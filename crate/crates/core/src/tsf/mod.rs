//! Handcrafted time-series features computed per block of a segment.

pub mod catalog;
pub mod extract;
pub mod spectrum;
pub mod stats;

pub use catalog::{full_catalog, selected_features, Feature, MAX_FEATURE_ID};
pub use extract::{extract_block_features, BlockSpec, FeatureTensor};
pub use spectrum::Spectrum;
pub use stats::{
    autocorr_lag_stats, autocorrelation, basic_stats, change_stats, count_above, crossings, l2_norm_series,
    ChangeKind, Level, Moment, StatKind, Threshold,
};
