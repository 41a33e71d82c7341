use std::path::Path;

use ttconv::cli::{run, EXIT_FAILURE, EXIT_OK, EXIT_USAGE};
use ttconv::net::{model_to_bytes, CompressedModel, LayerWeights, FIXTURE_MANIFEST};

fn fixture_path() -> String {
    concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/yolov5s_like.toml").to_string()
}

fn ttconv(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run(std::iter::once("ttconv").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn compress_writes_model_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.ttcv");
    let (code, out, err) = ttconv(&["compress", "--manifest", &fixture_path(), "--rank", "8", "--out", p(&model)]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(model.exists());
    for id in ["model.0.conv", "model.7.conv", "model.24.m.0"] {
        assert!(out.contains(id));
    }
    assert!(out.contains("selected layers: 6  params 2467840"));
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m.ttcv");
    let missing = dir.path().join("nope.toml");
    let (code, _, err) = ttconv(&["compress", "--manifest", p(&missing), "--rank", "2", "--out", p(&out)]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("does not exist") && err.contains("hint:"));
    let (code, _, _) = ttconv(&["compress", "--manifest", &fixture_path(), "--rank", "0", "--out", p(&out)]);
    assert_eq!(code, EXIT_USAGE);
    assert!(!out.exists());
    let (code, _, _) = ttconv(&["compress", "--manifest", &fixture_path(), "--out", p(&out)]);
    assert_eq!(code, EXIT_USAGE);
    let (code, _, _) = ttconv(&["compress", "--manifest", &fixture_path(), "--tolerance", "1.5", "--out", p(&out)]);
    assert_eq!(code, EXIT_USAGE);
    let (code, _, _) = ttconv(&["sweep", "--manifest", &fixture_path(), "--out", p(dir.path())]);
    assert_eq!(code, EXIT_USAGE);
    let (code, _, _) = ttconv(&[]);
    assert_eq!(code, EXIT_USAGE);
    let (code, help, _) = ttconv(&["--help"]);
    assert_eq!(code, EXIT_OK);
    for sub in ["compress", "verify", "sweep", "report", "reconstruct"] {
        assert!(help.contains(sub));
    }

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, FIXTURE_MANIFEST.replace("id = \"model.1.conv\"", "id = \"model.0.conv\"")).unwrap();
    let (code, _, err) = ttconv(&["compress", "--manifest", p(&bad), "--rank", "2", "--out", p(&out)]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("duplicate layer id \"model.0.conv\""), "{err}");
}

#[test]
fn verify_passes_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.ttcv");
    let (code, _, _) = ttconv(&["compress", "--manifest", &fixture_path(), "--rank", "4", "--out", p(&model), "--seed", "3"]);
    assert_eq!(code, EXIT_OK);
    let first = ttconv(&["verify", p(&model), "--trials", "10", "--seed", "5"]);
    assert_eq!(first.0, EXIT_OK, "{}", first.2);
    assert!(first.1.contains("verify passed: 6 TT layers"));
    assert_eq!(ttconv(&["verify", p(&model), "--trials", "10", "--seed", "5"]), first);
}

#[test]
fn verify_rejects_corrupted_models() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ttcv");
    let (code, _, _) = ttconv(&["compress", "--manifest", &fixture_path(), "--rank", "2", "--out", p(&path)]);
    assert_eq!(code, EXIT_OK);

    // a flipped byte fails the checksum on load
    let mut bytes = std::fs::read(&path).unwrap();
    let n = bytes.len();
    bytes[n - 7] ^= 0x10;
    std::fs::write(&path, &bytes).unwrap();
    let (code, _, err) = ttconv(&["verify", p(&path)]);
    assert_eq!(code, EXIT_FAILURE);
    assert!(err.contains("checksum"), "{err}");

    // with checksums recomputed, a wrecked core value is still caught
    bytes[n - 7] ^= 0x10;
    let mut model: CompressedModel = ttconv::net::model_from_bytes(&bytes).unwrap();
    let layer = model.layers.iter_mut().find(|l| matches!(l.weights, LayerWeights::Tt(_))).unwrap();
    let LayerWeights::Tt(ttk) = &layer.weights else { unreachable!() };
    let mut cores = ttk.train().cores().to_vec();
    let c = &cores[1];
    let mut data = c.data().to_vec();
    data[0] = f64::INFINITY;
    cores[1] = ttconv::TtCore::new(c.left_rank(), c.mode_size(), c.right_rank(), data).unwrap();
    let tampered = ttconv::TtConvKernel::from_parts(
        ttk.spec().clone(),
        ttconv::TtTensor::from_cores(cores).unwrap(),
        ttk.bias().map(<[f64]>::to_vec),
    )
    .unwrap();
    layer.weights = LayerWeights::Tt(tampered);
    let bytes = model_to_bytes(&model);
    std::fs::write(&path, &bytes).unwrap();
    let (code, _, err) = ttconv(&["verify", p(&path)]);
    assert_ne!(code, EXIT_OK);
    assert!(err.contains("non-finite"), "{err}");
}

#[test]
fn sweep_writes_everything_or_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep");
    let (code, table, err) = ttconv(&["sweep", "--manifest", &fixture_path(), "--ranks", "16,8,4,2", "--out", p(&out)]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(table.contains("reference target"));
    for f in ["sweep.txt", "rank-16.txt", "rank-2.ttcv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    assert_eq!(std::fs::read_to_string(out.join("sweep.txt")).unwrap(), table);

    let (code, table, _) = ttconv(&["sweep", "--manifest", &fixture_path(), "--ranks", "3", "--out", p(&out)]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(table.lines().filter(|l| l.starts_with("rank:")).count(), 1);

    // a regular file where the directory should be
    let blocker = dir.path().join("blocker");
    std::fs::write(&blocker, b"x").unwrap();
    let (code, _, _) = ttconv(&["sweep", "--manifest", &fixture_path(), "--ranks", "2", "--out", p(&blocker.join("sub"))]);
    assert_eq!(code, EXIT_FAILURE);
    assert_eq!(std::fs::read(&blocker).unwrap(), b"x");
}

#[test]
fn jsonl_rows_are_self_describing() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.ttcv");
    let (code, out, _) = ttconv(&[
        "compress", "--manifest", &fixture_path(), "--rank", "4", "--out", p(&model), "--format", "jsonl",
    ]);
    assert_eq!(code, EXIT_OK);
    let rows: Vec<serde_json::Value> = out.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(rows.len(), 10);
    let layer_fields = [
        "layer_id", "selected", "dense_params", "tt_params", "ratio", "dense_macs", "tt_macs", "ranks", "kernel",
        "in_channels", "out_channels", "model", "setting",
    ];
    for row in &rows[..9] {
        assert_eq!(row["schema"], "ttconv-report-row/1");
        assert_eq!(row["kind"], "layer");
        for f in layer_fields {
            assert!(row.get(f).is_some(), "missing {f}");
        }
        let ratio = row["dense_params"].as_f64().unwrap() / row["tt_params"].as_f64().unwrap();
        assert_eq!(row["ratio"].as_f64().unwrap(), ratio);
    }
    assert_eq!(rows[9]["kind"], "total");

    let (code, out, _) = ttconv(&["report", p(&model), "--seed", "0", "--format", "jsonl"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.lines().all(|l| l.contains("reconstruction_error") || l.contains("\"total\"")));
}

#[test]
fn reconstruct_writes_loadable_weights() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.ttcv");
    assert_eq!(ttconv(&["compress", "--manifest", &fixture_path(), "--rank", "2", "--out", p(&model)]).0, EXIT_OK);
    let weights = dir.path().join("rec.toml");
    let (code, _, err) = ttconv(&["reconstruct", p(&model), "--out", p(&weights)]);
    assert_eq!(code, EXIT_OK, "{err}");
    // the reconstructed weights feed back into compress
    let again = dir.path().join("again.ttcv");
    let (code, _, err) = ttconv(&[
        "compress", "--manifest", &fixture_path(), "--weights", p(&weights), "--rank", "2", "--out", p(&again),
    ]);
    assert_eq!(code, EXIT_OK, "{err}");
    let (code, _, _) = ttconv(&["report", p(&again), "--weights", p(&weights)]);
    assert_eq!(code, EXIT_OK);
}
