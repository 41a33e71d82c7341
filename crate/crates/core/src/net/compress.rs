use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use super::manifest::NetworkManifest;
use super::report::CompressionReport;
use super::weights::WeightSet;
use crate::conv::{decompose_kernel, reconstruct_kernel, DenseConvKernel, TtConvKernel};
use crate::dense::relative_frobenius_error;
use crate::error::{Error, Result};
use crate::tt::Truncation;

/// How selected layers are truncated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RankSetting {
    /// Cap every internal TT rank at this value.
    Uniform(usize),
    /// Relative Frobenius error bound per layer.
    Tolerance(f64),
}

impl RankSetting {
    pub fn validate(&self) -> Result<()> {
        match *self {
            RankSetting::Uniform(0) => Err(Error::InvalidArgument("rank must be at least 1".into())),
            RankSetting::Tolerance(t) if !(t.is_finite() && t > 0.0 && t < 1.0) => {
                Err(Error::InvalidArgument(format!("tolerance {t} must lie in (0, 1)")))
            }
            _ => Ok(()),
        }
    }

    pub fn truncation(&self) -> Truncation {
        match *self {
            RankSetting::Uniform(r) => Truncation::MaxRank(r),
            RankSetting::Tolerance(t) => Truncation::Tolerance(t),
        }
    }
}

impl fmt::Display for RankSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RankSetting::Uniform(r) => write!(f, "rank:{r}"),
            RankSetting::Tolerance(t) => write!(f, "tolerance:{t}"),
        }
    }
}

impl FromStr for RankSetting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("unrecognized rank setting {s:?}"));
        let (kind, value) = s.split_once(':').ok_or_else(bad)?;
        let setting = match kind {
            "rank" => RankSetting::Uniform(value.parse().map_err(|_| bad())?),
            "tolerance" => RankSetting::Tolerance(value.parse().map_err(|_| bad())?),
            _ => return Err(bad()),
        };
        setting.validate()?;
        Ok(setting)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LayerWeights {
    Tt(TtConvKernel),
    Dense(DenseConvKernel),
}

impl LayerWeights {
    pub fn param_count(&self) -> usize {
        match self {
            LayerWeights::Tt(t) => t.param_count(),
            LayerWeights::Dense(d) => d.spec().dense_params(),
        }
    }

    /// Dense kernel, reconstructed for TT layers.
    pub fn to_dense(&self) -> Result<DenseConvKernel> {
        match self {
            LayerWeights::Tt(t) => reconstruct_kernel(t),
            LayerWeights::Dense(d) => Ok(d.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelLayer {
    pub id: String,
    pub weights: LayerWeights,
}

/// A network with its selected layers in TT format and the rest passed
/// through unchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressedModel {
    pub manifest: NetworkManifest,
    pub setting: RankSetting,
    pub layers: Vec<ModelLayer>,
}

impl CompressedModel {
    pub fn layer(&self, id: &str) -> Option<&LayerWeights> {
        self.layers.iter().find(|l| l.id == id).map(|l| &l.weights)
    }

    /// Dense weights of every layer.
    pub fn reconstruct_weights(&self) -> Result<WeightSet> {
        let entries = self
            .layers
            .par_iter()
            .map(|l| l.weights.to_dense().map(|k| (l.id.clone(), k)).map_err(|e| e.in_layer(&l.id)))
            .collect::<Vec<_>>();
        WeightSet::new(collect_layers(entries)?)
    }
}

/// Decomposes every selected layer; the others are copied verbatim.
/// Failures are gathered across layers and reported together.
pub fn compress_network(manifest: &NetworkManifest, weights: &WeightSet, setting: RankSetting) -> Result<CompressedModel> {
    setting.validate()?;
    weights.check_against(manifest)?;
    let truncation = setting.truncation();
    let results = manifest
        .layers
        .par_iter()
        .map(|layer| {
            let dense = weights.get(&layer.id).expect("checked against manifest");
            let w = if layer.selected {
                LayerWeights::Tt(decompose_kernel(dense, &truncation).map_err(|e| e.in_layer(&layer.id))?)
            } else {
                LayerWeights::Dense(dense.clone())
            };
            Ok(ModelLayer {
                id: layer.id.clone(),
                weights: w,
            })
        })
        .collect::<Vec<_>>();
    Ok(CompressedModel {
        manifest: manifest.clone(),
        setting,
        layers: collect_layers(results)?,
    })
}

fn collect_layers<T>(results: Vec<Result<T>>) -> Result<Vec<T>> {
    let mut ok = Vec::with_capacity(results.len());
    let mut errs = Vec::new();
    for r in results {
        match r {
            Ok(v) => ok.push(v),
            Err(e) => errs.push(e),
        }
    }
    match errs.len() {
        0 => Ok(ok),
        1 => Err(errs.pop().unwrap()),
        _ => Err(Error::Multiple(errs)),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerError {
    pub id: String,
    pub dense_params: usize,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub layers: Vec<LayerError>,
    /// Mean of the per-layer errors weighted by dense parameter count.
    pub aggregate: f64,
}

/// Relative Frobenius error of every model layer against the original
/// weights. Layer sets must match exactly.
pub fn reconstruction_error_report(model: &CompressedModel, originals: &WeightSet) -> Result<ErrorReport> {
    let mut problems = Vec::new();
    for l in &model.layers {
        if originals.get(&l.id).is_none() {
            problems.push(format!("layer {:?}: in the model but not in the weights", l.id));
        }
    }
    for (id, _) in originals.iter() {
        if model.layer(id).is_none() {
            problems.push(format!("layer {id:?}: in the weights but not in the model"));
        }
    }
    if !problems.is_empty() {
        return Err(Error::Validation(problems));
    }
    let results = model
        .layers
        .par_iter()
        .map(|l| {
            let original = originals.get(&l.id).unwrap();
            let approx = l.weights.to_dense().map_err(|e| e.in_layer(&l.id))?;
            if approx.spec() != original.spec() {
                return Err(Error::Shape("model and weights disagree on the layer shape".into()).in_layer(&l.id));
            }
            Ok(LayerError {
                id: l.id.clone(),
                dense_params: original.spec().dense_params(),
                error: relative_frobenius_error(original.weights(), approx.weights()),
            })
        })
        .collect::<Vec<_>>();
    let layers = collect_layers(results)?;
    let total: usize = layers.iter().map(|l| l.dense_params).sum();
    let aggregate = if total == 0 {
        0.0
    } else {
        layers.iter().map(|l| l.dense_params as f64 * l.error).sum::<f64>() / total as f64
    };
    Ok(ErrorReport { layers, aggregate })
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub rank: usize,
    pub model: CompressedModel,
    pub report: CompressionReport,
}

/// Compresses the network once per rank, in the order given.
pub fn rank_sweep(manifest: &NetworkManifest, weights: &WeightSet, ranks: &[usize]) -> Result<Vec<SweepPoint>> {
    if ranks.is_empty() {
        return Err(Error::InvalidArgument("rank sweep needs at least one rank".into()));
    }
    if ranks.contains(&0) {
        return Err(Error::InvalidArgument("ranks must be at least 1".into()));
    }
    ranks
        .iter()
        .map(|&rank| {
            let model = compress_network(manifest, weights, RankSetting::Uniform(rank))?;
            let report = CompressionReport::build(&model, Some(weights))?;
            Ok(SweepPoint { rank, model, report })
        })
        .collect()
}
