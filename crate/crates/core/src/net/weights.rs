//! Dense layer weights: loading, saving and seeded synthesis.
//!
//! On disk a weight set is a TOML index (`ttconv-weights/1`) next to a flat
//! little-endian `f32` blob. Each index entry gives the element offset of the
//! kernel, stored `(m, n, c, ċ)` row-major, and optionally of the bias.
//!
//! ```toml
//! schema = "ttconv-weights/1"
//! data = "weights.bin"
//!
//! [[layers]]
//! id = "conv1"
//! kernel = 3
//! in_channels = 16
//! out_channels = 32
//! offset = 0
//! bias_offset = 4608
//! ```

use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::line_col;
use super::manifest::NetworkManifest;
use crate::conv::DenseConvKernel;
use crate::error::{Error, Result};

pub const WEIGHTS_SCHEMA: &str = "ttconv-weights/1";

/// Dense kernels keyed by layer id, kept in manifest order.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSet {
    ids: Vec<String>,
    kernels: Vec<DenseConvKernel>,
}

impl WeightSet {
    pub fn new(entries: Vec<(String, DenseConvKernel)>) -> Result<Self> {
        let mut seen = HashSet::new();
        for (id, _) in &entries {
            if !seen.insert(id.as_str()) {
                return Err(Error::InvalidArgument(format!("duplicate weight entry {id:?}")));
            }
        }
        let (ids, kernels) = entries.into_iter().unzip();
        Ok(Self { ids, kernels })
    }

    /// Uniform `±1/√(k²·C)` weights (and biases) from a ChaCha8 stream per
    /// layer, so a layer's values depend only on the seed and its position.
    /// Values are drawn as `f32`, which keeps them exact through weight files.
    pub fn synthetic(manifest: &NetworkManifest, seed: u64) -> Self {
        let mut ids = Vec::with_capacity(manifest.layers.len());
        let mut kernels = Vec::with_capacity(manifest.layers.len());
        for (i, layer) in manifest.layers.iter().enumerate() {
            let spec = &layer.spec;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let bound = 1.0 / ((spec.kernel() * spec.kernel() * spec.in_channels()) as f32).sqrt();
            let mut draw = |count: usize| -> Vec<f64> {
                (0..count).map(|_| rng.random_range(-bound..bound) as f64).collect()
            };
            let weights = draw(spec.dense_params());
            let bias = spec.has_bias().then(|| draw(spec.out_channels()));
            ids.push(layer.id.clone());
            kernels.push(DenseConvKernel::new(spec.clone(), weights, bias).expect("synthetic weights are well-formed"));
        }
        Self { ids, kernels }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&DenseConvKernel> {
        self.ids.iter().position(|x| x == id).map(|i| &self.kernels[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &DenseConvKernel)> {
        self.ids.iter().map(String::as_str).zip(&self.kernels)
    }

    /// Checks that the set covers exactly the manifest's layers with matching
    /// shapes, reporting every mismatch at once.
    pub fn check_against(&self, manifest: &NetworkManifest) -> Result<()> {
        let mut problems = Vec::new();
        for layer in &manifest.layers {
            match self.get(&layer.id) {
                None => problems.push(format!("layer {:?}: missing from weights", layer.id)),
                Some(k) if k.spec() != &layer.spec => problems.push(format!(
                    "layer {:?}: weights are {}x{} {}->{} (bias {}), manifest expects {}x{} {}->{} (bias {})",
                    layer.id,
                    k.spec().kernel(),
                    k.spec().kernel(),
                    k.spec().in_channels(),
                    k.spec().out_channels(),
                    k.spec().has_bias(),
                    layer.spec.kernel(),
                    layer.spec.kernel(),
                    layer.spec.in_channels(),
                    layer.spec.out_channels(),
                    layer.spec.has_bias(),
                )),
                Some(_) => {}
            }
        }
        for id in &self.ids {
            if manifest.layer(id).is_none() {
                problems.push(format!("layer {id:?}: present in weights but not in the manifest"));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIndex {
    schema: String,
    data: String,
    #[serde(default)]
    layers: Vec<RawEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntry {
    id: String,
    kernel: usize,
    in_channels: usize,
    out_channels: usize,
    offset: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bias_offset: Option<usize>,
}

/// Loads a weight set and binds it to the manifest's layer specs.
pub fn load_weights(index_path: impl AsRef<Path>, manifest: &NetworkManifest) -> Result<WeightSet> {
    let index_path = index_path.as_ref();
    let text = std::fs::read_to_string(index_path).map_err(|e| Error::io(index_path, e))?;
    let raw: RawIndex = toml::from_str(&text).map_err(|e| {
        let (line, column) = e.span().map(|s| line_col(&text, s.start)).unwrap_or((0, 0));
        Error::Parse {
            path: index_path.display().to_string(),
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    if raw.schema != WEIGHTS_SCHEMA {
        return Err(Error::Validation(vec![format!(
            "weights schema is {:?}, expected {WEIGHTS_SCHEMA:?}",
            raw.schema
        )]));
    }
    let data_path = sibling(index_path, &raw.data);
    let bytes = std::fs::read(&data_path).map_err(|e| Error::io(&data_path, e))?;
    if bytes.len() % 4 != 0 {
        return Err(Error::Data(format!(
            "{}: length {} is not a whole number of f32 values",
            data_path.display(),
            bytes.len()
        )));
    }
    let values: Vec<f32> = bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();

    let by_id: HashMap<&str, &RawEntry> = raw.layers.iter().map(|e| (e.id.as_str(), e)).collect();
    let mut problems = Vec::new();
    if by_id.len() != raw.layers.len() {
        problems.push("weights index lists a layer id more than once".to_string());
    }
    for e in &raw.layers {
        if manifest.layer(&e.id).is_none() {
            problems.push(format!("layer {:?}: present in weights but not in the manifest", e.id));
        }
    }
    let mut entries = Vec::with_capacity(manifest.layers.len());
    for layer in &manifest.layers {
        let spec = &layer.spec;
        let Some(e) = by_id.get(layer.id.as_str()) else {
            problems.push(format!("layer {:?}: missing from weights", layer.id));
            continue;
        };
        if (e.kernel, e.in_channels, e.out_channels) != (spec.kernel(), spec.in_channels(), spec.out_channels()) {
            problems.push(format!(
                "layer {:?}: weights are {k}x{k} {}->{}, manifest expects {m}x{m} {}->{}",
                layer.id,
                e.in_channels,
                e.out_channels,
                spec.in_channels(),
                spec.out_channels(),
                k = e.kernel,
                m = spec.kernel(),
            ));
            continue;
        }
        if e.bias_offset.is_some() != spec.has_bias() {
            problems.push(format!(
                "layer {:?}: manifest bias = {}, weights {} a bias",
                layer.id,
                spec.has_bias(),
                if e.bias_offset.is_some() { "supply" } else { "lack" }
            ));
            continue;
        }
        let slice = |offset: usize, len: usize| -> Option<Vec<f64>> {
            let end = offset.checked_add(len)?;
            values.get(offset..end).map(|s| s.iter().map(|&v| v as f64).collect())
        };
        let Some(weights) = slice(e.offset, spec.dense_params()) else {
            problems.push(format!("layer {:?}: kernel data runs past the end of {}", layer.id, raw.data));
            continue;
        };
        let bias = match e.bias_offset {
            Some(off) => match slice(off, spec.out_channels()) {
                Some(b) => Some(b),
                None => {
                    problems.push(format!("layer {:?}: bias data runs past the end of {}", layer.id, raw.data));
                    continue;
                }
            },
            None => None,
        };
        match DenseConvKernel::new(spec.clone(), weights, bias) {
            Ok(k) => entries.push((layer.id.clone(), k)),
            Err(err) => problems.push(format!("layer {:?}: {err}", layer.id)),
        }
    }
    if !problems.is_empty() {
        return Err(Error::Validation(problems));
    }
    WeightSet::new(entries)
}

/// Writes the index to `index_path` and the blob next to it with a `.bin`
/// extension. Values are narrowed to `f32`.
pub fn save_weights(weights: &WeightSet, index_path: impl AsRef<Path>) -> Result<()> {
    let index_path = index_path.as_ref();
    let data_path = index_path.with_extension("bin");
    let data_name = data_path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .ok_or_else(|| Error::InvalidArgument(format!("{} has no file name", index_path.display())))?;
    let (index, blob) = encode(weights, &data_name);
    std::fs::write(&data_path, blob).map_err(|e| Error::io(&data_path, e))?;
    std::fs::write(index_path, index).map_err(|e| Error::io(index_path, e))?;
    Ok(())
}

pub(crate) fn encode(weights: &WeightSet, data_name: &str) -> (String, Vec<u8>) {
    let mut blob = Vec::new();
    let mut offset = 0;
    let mut layers = Vec::with_capacity(weights.len());
    let mut push = |values: &[f64], blob: &mut Vec<u8>| {
        let at = offset;
        for &v in values {
            blob.extend_from_slice(&(v as f32).to_le_bytes());
        }
        offset += values.len();
        at
    };
    for (id, k) in weights.iter() {
        let spec = k.spec();
        let w = push(k.weights(), &mut blob);
        let b = k.bias().map(|b| push(b, &mut blob));
        layers.push(RawEntry {
            id: id.to_string(),
            kernel: spec.kernel(),
            in_channels: spec.in_channels(),
            out_channels: spec.out_channels(),
            offset: w,
            bias_offset: b,
        });
    }
    let index = RawIndex {
        schema: WEIGHTS_SCHEMA.to_string(),
        data: data_name.to_string(),
        layers,
    };
    (toml::to_string(&index).expect("index serializes"), blob)
}

fn sibling(index_path: &Path, name: &str) -> PathBuf {
    match index_path.parent() {
        Some(dir) => dir.join(name),
        None => PathBuf::from(name),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO: &str = r#"
schema = "ttconv-manifest/1"
name = "two"

[[layers]]
id = "a"
kernel = 3
in_channels = 4
out_channels = 6
input_size = [6, 6]
bias = true

[[layers]]
id = "b"
kernel = 1
in_channels = 6
out_channels = 8
input_size = [4, 4]
selected = false
"#;

    fn manifest() -> NetworkManifest {
        NetworkManifest::parse(TWO, "two", Some(2)).unwrap()
    }

    #[test]
    fn synthetic_is_seeded_and_bounded() {
        let m = manifest();
        let a = WeightSet::synthetic(&m, 7);
        assert_eq!(a, WeightSet::synthetic(&m, 7));
        assert_ne!(a, WeightSet::synthetic(&m, 8));
        let k = a.get("a").unwrap();
        let bound = 1.0 / 6.0;
        assert!(k.weights().iter().all(|v| v.abs() <= bound));
        assert_eq!(k.bias().unwrap().len(), 6);
        assert!(a.get("b").unwrap().bias().is_none());
        a.check_against(&m).unwrap();
    }

    #[test]
    fn save_load_round_trip_is_exact() {
        let m = manifest();
        let w = WeightSet::synthetic(&m, 3);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.toml");
        save_weights(&w, &path).unwrap();
        assert!(dir.path().join("w.bin").exists());
        assert_eq!(load_weights(&path, &m).unwrap(), w);
    }

    #[test]
    fn mismatches_are_listed() {
        let m = manifest();
        let w = WeightSet::synthetic(&m, 3);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.toml");
        save_weights(&w, &path).unwrap();
        let other = NetworkManifest::parse(
            &TWO.replace("id = \"b\"", "id = \"c\"").replace("out_channels = 6", "out_channels = 5"),
            "other",
            Some(2),
        )
        .unwrap();
        let Err(Error::Validation(list)) = load_weights(&path, &other) else { panic!() };
        assert_eq!(list.len(), 3, "{list:?}");
        assert!(w.check_against(&other).is_err());
    }

    #[test]
    fn truncated_blob_is_reported() {
        let m = manifest();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.toml");
        save_weights(&WeightSet::synthetic(&m, 3), &path).unwrap();
        let bin = dir.path().join("w.bin");
        let bytes = std::fs::read(&bin).unwrap();
        std::fs::write(&bin, &bytes[..bytes.len() - 4]).unwrap();
        assert!(matches!(load_weights(&path, &m), Err(Error::Validation(_))));
    }
}
