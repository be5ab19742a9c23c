//! End-to-end applications and their single-layer baselines.

pub mod compression;
pub mod edges;
pub mod metrics;
pub mod segmentation;

pub use compression::{compress_rgb, CompressionConfig, CompressionMethod, CompressionPoint, CompressionReport};
pub use edges::{edge_detect_pipeline, EdgeConfig, EdgeMethod, EdgePanel};
pub use metrics::{mse, psnr, Quality};
pub use segmentation::{
    boundary_accuracy, boundary_map, gsp_baseline, kmeans_baseline, segment_hsi, singular_gap_select,
    SegmentationConfig, SegmentationMethod, SegmentationResult,
};
