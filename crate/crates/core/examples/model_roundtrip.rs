//! Compress a small network, save it, load it back and rebuild dense weights.
//!
//! Run with `cargo run --example model_roundtrip`.

use ttconv::net::{
    compress_network, load_model, model_to_bytes, reconstruction_error_report, save_model, NetworkManifest,
    RankSetting, WeightSet,
};
use ttconv::Result;

const MANIFEST: &str = r#"
schema = "ttconv-manifest/1"
name = "tiny"

[defaults]
order = 3

[[layers]]
id = "stem"
kernel = 3
in_channels = 3
out_channels = 16
input_size = [32, 32]
selected = false

[[layers]]
id = "body"
kernel = 3
in_channels = 16
out_channels = 32
input_size = [30, 30]
bias = true
"#;

fn main() -> Result<()> {
    let manifest = NetworkManifest::parse(MANIFEST, "tiny", None)?;
    let weights = WeightSet::synthetic(&manifest, 42);
    let model = compress_network(&manifest, &weights, RankSetting::Tolerance(0.5))?;

    let path = std::env::temp_dir().join("ttconv_example_tiny.ttcv");
    save_model(&model, &path)?;
    let loaded = load_model(&path)?;
    let bytes = std::fs::read(&path).expect("model file");
    println!("{}: {} bytes, rewrite identical: {}", path.display(), bytes.len(), model_to_bytes(&loaded) == bytes);

    let errors = reconstruction_error_report(&loaded, &weights)?;
    for l in &errors.layers {
        println!("{:<5} rel. error {:.3e}", l.id, l.error);
    }
    println!("stem passes through unchanged: {}", loaded.layer("stem").unwrap().to_dense()? == *weights.get("stem").unwrap());
    std::fs::remove_file(&path).ok();
    Ok(())
}
