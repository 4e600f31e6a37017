//! Block-based quality components and the canonical feature vector.

pub mod families;
pub mod orientation;
pub mod signature;
mod vector;

pub use families::{
    fda_blocks, histogram_bins, local_clarity_blocks, ocl_blocks, orientation_flow_blocks, rvu_blocks, scalar_features,
    BlockValues,
};
pub use orientation::{
    coherence_map, coherence_sums, orientation_field, BlockAnalysis, BlockGrid, CoherenceMap, OrientationMap,
};
pub use vector::{
    extended_feature_names, extract_feature_vector, feature_csv_header, feature_index, read_feature_csv,
    read_feature_csv_file, write_feature_csv, write_feature_csv_file, FeatureConfig, FeatureRow, FeatureVector,
    FEATURE_COUNT, FEATURE_NAMES, MINUTIAE_FEATURE_NAMES,
};
