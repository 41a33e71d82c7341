//! Whole-network compression: manifests, weight files, per-layer TT
//! decomposition, reports and the binary model format.

mod compress;
mod manifest;
mod model_file;
mod report;
mod weights;

pub use compress::{
    compress_network, rank_sweep, reconstruction_error_report, CompressedModel, ErrorReport, LayerError,
    LayerWeights, ModelLayer, RankSetting, SweepPoint,
};
pub use manifest::{
    load_manifest, load_manifest_with, DefaultStrategy, LayerEntry, NetworkManifest, DEFAULT_ORDER, MANIFEST_SCHEMA,
};
pub use model_file::{load_model, model_from_bytes, model_to_bytes, save_model, FORMAT_VERSION, MAGIC};
pub use report::{
    render_sweep_rows, render_sweep_table, sig4, CompressionReport, LayerRow, Totals, REFERENCE_TARGETS,
    REPORT_ROW_SCHEMA,
};
pub use weights::{load_weights, save_weights, WeightSet, WEIGHTS_SCHEMA};

/// Name of the bundled YOLOv5s-like fixture network.
pub const FIXTURE_NAME: &str = "yolov5s-like";

/// Manifest text of the bundled fixture: the conv layers of a YOLOv5s-sized
/// detector at 640×640 input, six of them selected for compression.
pub const FIXTURE_MANIFEST: &str = include_str!("../../fixtures/yolov5s_like.toml");

/// Parsed bundled fixture.
pub fn fixture_manifest() -> NetworkManifest {
    NetworkManifest::parse(FIXTURE_MANIFEST, "fixtures/yolov5s_like.toml", None).expect("bundled fixture is valid")
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |p| p + 1) + 1;
    (line, column)
}
