//! Network manifests (`ttconv-manifest/1`).
//!
//! A manifest is a TOML document:
//!
//! ```toml
//! schema = "ttconv-manifest/1"
//! name = "tiny"
//!
//! [defaults]
//! order = 4              # TT order N for layers without explicit factors
//! strategy = "balanced"  # or "explicit": every layer must list factors
//!
//! [[layers]]
//! id = "conv1"
//! kernel = 3
//! in_channels = 16
//! out_channels = 32
//! input_size = [32, 32]  # H, W
//! selected = true        # default true
//! bias = false           # default false
//! stride = 1             # default 1
//! padding = 0            # default 0
//! in_factors = [2, 2, 2, 2]   # optional
//! out_factors = [2, 2, 2, 4]  # optional
//! ```

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::conv::ConvLayerSpec;
use crate::error::{Error, Result};
use crate::index::{plan_factorization, FactorStrategy};
use super::line_col;

pub const MANIFEST_SCHEMA: &str = "ttconv-manifest/1";
pub const DEFAULT_ORDER: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DefaultStrategy {
    Balanced,
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerEntry {
    pub id: String,
    pub spec: ConvLayerSpec,
    pub selected: bool,
    pub input_height: usize,
    pub input_width: usize,
}

impl LayerEntry {
    pub fn output_extent(&self) -> (usize, usize) {
        self.spec
            .output_extent(self.input_height, self.input_width)
            .expect("validated at load time")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkManifest {
    pub name: String,
    pub order: usize,
    pub strategy: DefaultStrategy,
    pub layers: Vec<LayerEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawManifest {
    schema: String,
    name: String,
    #[serde(default)]
    defaults: RawDefaults,
    #[serde(default)]
    layers: Vec<RawLayer>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDefaults {
    #[serde(default = "default_order")]
    order: usize,
    #[serde(default = "default_strategy")]
    strategy: DefaultStrategy,
}

impl Default for RawDefaults {
    fn default() -> Self {
        Self {
            order: DEFAULT_ORDER,
            strategy: DefaultStrategy::Balanced,
        }
    }
}

fn default_order() -> usize {
    DEFAULT_ORDER
}

fn default_strategy() -> DefaultStrategy {
    DefaultStrategy::Balanced
}

fn yes() -> bool {
    true
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLayer {
    id: String,
    kernel: usize,
    in_channels: usize,
    out_channels: usize,
    input_size: [usize; 2],
    #[serde(default = "yes")]
    selected: bool,
    #[serde(default)]
    bias: bool,
    #[serde(default = "one")]
    stride: usize,
    #[serde(default)]
    padding: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    order: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    in_factors: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    out_factors: Option<Vec<usize>>,
}

impl NetworkManifest {
    /// Parses and validates manifest text. `origin` names the source in
    /// diagnostics; `order_override` replaces the default TT order.
    pub fn parse(text: &str, origin: &str, order_override: Option<usize>) -> Result<Self> {
        let mut raw: RawManifest = toml::from_str(text).map_err(|e| {
            let (line, column) = e
                .span()
                .map(|s| line_col(text, s.start))
                .unwrap_or((0, 0));
            Error::Parse {
                path: origin.to_string(),
                line,
                column,
                message: e.message().to_string(),
            }
        })?;
        if let Some(order) = order_override {
            raw.defaults.order = order;
        }
        resolve(raw)
    }

    pub fn empty(name: &str) -> Self {
        Self {
            name: name.to_string(),
            order: DEFAULT_ORDER,
            strategy: DefaultStrategy::Balanced,
            layers: Vec::new(),
        }
    }

    pub fn layer(&self, id: &str) -> Option<&LayerEntry> {
        self.layers.iter().find(|l| l.id == id)
    }

    /// Canonical text form with every plan written out explicitly.
    pub fn to_toml(&self) -> String {
        let raw = RawManifest {
            schema: MANIFEST_SCHEMA.to_string(),
            name: self.name.clone(),
            defaults: RawDefaults {
                order: self.order,
                strategy: self.strategy,
            },
            layers: self
                .layers
                .iter()
                .map(|l| RawLayer {
                    id: l.id.clone(),
                    kernel: l.spec.kernel(),
                    in_channels: l.spec.in_channels(),
                    out_channels: l.spec.out_channels(),
                    input_size: [l.input_height, l.input_width],
                    selected: l.selected,
                    bias: l.spec.has_bias(),
                    stride: l.spec.stride(),
                    padding: l.spec.padding(),
                    order: None,
                    in_factors: Some(l.spec.in_plan().factors().to_vec()),
                    out_factors: Some(l.spec.out_plan().factors().to_vec()),
                })
                .collect(),
        };
        toml::to_string(&raw).expect("manifest serializes")
    }
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<NetworkManifest> {
    load_manifest_with(path, None)
}

pub fn load_manifest_with(path: impl AsRef<Path>, order_override: Option<usize>) -> Result<NetworkManifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    NetworkManifest::parse(&text, &path.display().to_string(), order_override)
}

fn resolve(raw: RawManifest) -> Result<NetworkManifest> {
    let mut problems = Vec::new();
    if raw.schema != MANIFEST_SCHEMA {
        problems.push(format!("schema is {:?}, expected {MANIFEST_SCHEMA:?}", raw.schema));
    }
    if raw.defaults.order == 0 {
        problems.push("defaults.order must be at least 1".to_string());
    }
    let mut seen = HashSet::new();
    let mut layers = Vec::with_capacity(raw.layers.len());
    for (i, l) in raw.layers.iter().enumerate() {
        let tag = if l.id.is_empty() {
            format!("layers[{i}]")
        } else {
            format!("layer {:?}", l.id)
        };
        if l.id.is_empty() {
            problems.push(format!("{tag}: id is empty"));
        } else if !seen.insert(l.id.as_str()) {
            problems.push(format!("{tag}: duplicate layer id {:?}", l.id));
        }
        let before = problems.len();
        if l.kernel == 0 {
            problems.push(format!("{tag}: kernel must be at least 1"));
        }
        if l.in_channels == 0 || l.out_channels == 0 {
            problems.push(format!("{tag}: channel counts must be at least 1"));
        }
        if l.input_size.contains(&0) {
            problems.push(format!("{tag}: input_size entries must be positive"));
        }
        if l.stride == 0 {
            problems.push(format!("{tag}: stride must be at least 1"));
        }
        if problems.len() > before {
            continue;
        }
        match resolve_layer(l, &raw.defaults) {
            Ok(entry) => layers.push(entry),
            Err(e) => problems.push(format!("{tag}: {e}")),
        }
    }
    if !problems.is_empty() {
        return Err(Error::Validation(problems));
    }
    Ok(NetworkManifest {
        name: raw.name,
        order: raw.defaults.order,
        strategy: raw.defaults.strategy,
        layers,
    })
}

fn resolve_layer(l: &RawLayer, defaults: &RawDefaults) -> Result<LayerEntry> {
    let order = match (&l.in_factors, &l.out_factors, l.order) {
        (Some(a), Some(b), _) if a.len() != b.len() => {
            return Err(Error::Plan(format!(
                "in_factors has {} entries, out_factors has {}",
                a.len(),
                b.len()
            )))
        }
        (Some(f), _, Some(o)) | (_, Some(f), Some(o)) if f.len() != o => {
            return Err(Error::Plan(format!("order {o} disagrees with {} listed factors", f.len())))
        }
        (Some(f), _, _) | (_, Some(f), _) => f.len(),
        (None, None, Some(o)) => o,
        (None, None, None) => defaults.order,
    };
    if order == 0 {
        return Err(Error::Plan("order must be at least 1".into()));
    }
    let strategy_for = |factors: &Option<Vec<usize>>, which: &str| -> Result<FactorStrategy> {
        match (factors, defaults.strategy) {
            (Some(f), _) => Ok(FactorStrategy::Explicit(f.clone())),
            (None, DefaultStrategy::Balanced) => Ok(FactorStrategy::Balanced),
            (None, DefaultStrategy::Explicit) => Err(Error::Plan(format!(
                "{which} missing while defaults.strategy = \"explicit\""
            ))),
        }
    };
    let in_plan = plan_factorization(l.in_channels, order, &strategy_for(&l.in_factors, "in_factors")?)?;
    let out_plan = plan_factorization(l.out_channels, order, &strategy_for(&l.out_factors, "out_factors")?)?;
    let spec = ConvLayerSpec::new(l.kernel, l.in_channels, l.out_channels, in_plan, out_plan)?
        .with_bias(l.bias)
        .with_geometry(l.stride, l.padding)?;
    spec.output_extent(l.input_size[0], l.input_size[1])?;
    Ok(LayerEntry {
        id: l.id.clone(),
        spec,
        selected: l.selected,
        input_height: l.input_size[0],
        input_width: l.input_size[1],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
schema = "ttconv-manifest/1"
name = "minimal"

[[layers]]
id = "conv"
kernel = 3
in_channels = 16
out_channels = 32
input_size = [10, 10]
"#;

    #[test]
    fn minimal_manifest_resolves_balanced_plans() {
        let m = NetworkManifest::parse(MINIMAL, "minimal.toml", None).unwrap();
        assert_eq!(m.layers.len(), 1);
        let spec = &m.layers[0].spec;
        assert_eq!(spec.in_plan().factors(), &[2, 2, 2, 2]);
        assert_eq!(spec.out_plan().factors(), &[2, 2, 3, 3]);
        assert!(m.layers[0].selected);
        assert_eq!(m.layers[0].output_extent(), (8, 8));
    }

    #[test]
    fn empty_layer_list() {
        let m = NetworkManifest::parse("schema = \"ttconv-manifest/1\"\nname = \"e\"\n", "e", None).unwrap();
        assert!(m.layers.is_empty());
    }

    #[test]
    fn duplicate_ids_and_all_violations_listed() {
        let text = format!(
            "{MINIMAL}\n[[layers]]\nid = \"conv\"\nkernel = 0\nin_channels = 4\nout_channels = 4\ninput_size = [4, 4]\n\n[[layers]]\nid = \"x\"\nkernel = 5\nin_channels = 4\nout_channels = 4\ninput_size = [3, 3]\n"
        );
        let err = NetworkManifest::parse(&text, "dup", None).unwrap_err();
        let Error::Validation(list) = &err else { panic!("{err}") };
        assert!(list.iter().any(|p| p.contains("duplicate layer id \"conv\"")), "{list:?}");
        assert!(list.iter().any(|p| p.contains("kernel must be at least 1")));
        assert!(list.iter().any(|p| p.contains("layer \"x\"") && p.contains("smaller than")));
        assert!(err.is_usage());
    }

    #[test]
    fn parse_errors_carry_position() {
        let text = "schema = \"ttconv-manifest/1\"\nname = \"p\"\n\n[[layers]]\nid = \"a\"\nkernel = \"three\"\n";
        match NetworkManifest::parse(text, "bad.toml", None).unwrap_err() {
            Error::Parse { path, line, message, .. } => {
                assert_eq!(path, "bad.toml");
                assert_eq!(line, 6);
                assert!(!message.is_empty());
            }
            other => panic!("{other}"),
        }
        let typo = "schema = \"ttconv-manifest/1\"\nname = \"p\"\nnmae = 1\n";
        assert!(matches!(NetworkManifest::parse(typo, "t", None), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn explicit_strategy_requires_factors() {
        let text = MINIMAL.replace("name = \"minimal\"", "name = \"m\"\n[defaults]\nstrategy = \"explicit\"");
        assert!(matches!(NetworkManifest::parse(&text, "m", None), Err(Error::Validation(_))));
    }

    #[test]
    fn canonical_text_round_trips() {
        let m = NetworkManifest::parse(MINIMAL, "m", Some(2)).unwrap();
        assert_eq!(m.layers[0].spec.order(), 2);
        let again = NetworkManifest::parse(&m.to_toml(), "echo", None).unwrap();
        assert_eq!(again, m);
    }

    #[test]
    fn wrong_schema() {
        let text = MINIMAL.replace("ttconv-manifest/1", "ttconv-manifest/9");
        assert!(matches!(NetworkManifest::parse(&text, "m", None), Err(Error::Validation(_))));
    }
}
