//! Parameter, MAC and error reports for compressed models.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::compress::{reconstruction_error_report, CompressedModel, LayerWeights, RankSetting};
use super::weights::WeightSet;
use super::FIXTURE_NAME;
use crate::conv::{conv_flops, FlopMode};
use crate::error::Result;

pub const REPORT_ROW_SCHEMA: &str = "ttconv-report-row/1";

/// Published selected-layer figures for a TT-compressed YOLOv5s at uniform
/// ranks: `(rank, parameters, compression rate)`. Shown next to sweeps of
/// the bundled fixture for orientation only; the layer set and
/// factorizations behind them are not reproduced here.
pub const REFERENCE_TARGETS: [(usize, f64, f64); 4] = [
    (16, 101_400.0, 24.0),
    (8, 25_900.0, 95.0),
    (4, 6_730.0, 367.0),
    (2, 1_810.0, 1363.0),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRow {
    pub layer_id: String,
    pub selected: bool,
    pub kernel: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    /// Internal TT ranks `r_1..r_N`; empty for dense layers.
    pub ranks: Vec<usize>,
    pub dense_params: u64,
    pub tt_params: u64,
    pub ratio: f64,
    pub dense_macs: u64,
    pub tt_macs: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reconstruction_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Totals {
    pub selected_layers: usize,
    pub selected_dense_params: u64,
    pub selected_tt_params: u64,
    /// `selected_dense_params / selected_tt_params`, 1 when nothing is selected.
    pub ratio: f64,
    pub network_dense_params: u64,
    pub network_params: u64,
    pub dense_macs: u64,
    pub tt_macs: u64,
    /// Parameter-weighted mean error over selected layers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weighted_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompressionReport {
    pub name: String,
    pub setting: RankSetting,
    pub rows: Vec<LayerRow>,
    pub totals: Totals,
}

impl CompressionReport {
    /// Builds the report; reconstruction errors are filled in when the
    /// original weights are supplied.
    pub fn build(model: &CompressedModel, originals: Option<&WeightSet>) -> Result<Self> {
        let errors = originals.map(|w| reconstruction_error_report(model, w)).transpose()?;
        let mut rows = Vec::with_capacity(model.layers.len());
        for (entry, layer) in model.manifest.layers.iter().zip(&model.layers) {
            debug_assert_eq!(entry.id, layer.id);
            let spec = &entry.spec;
            let (oh, ow) = entry.output_extent();
            let dense_macs = conv_flops(spec, &FlopMode::Dense, oh, ow)?.macs;
            let (ranks, tt_macs) = match &layer.weights {
                LayerWeights::Tt(t) => {
                    let ranks = t.internal_ranks();
                    let macs = conv_flops(spec, &FlopMode::Tt { ranks: ranks.clone() }, oh, ow)?.macs;
                    (ranks, macs)
                }
                LayerWeights::Dense(_) => (Vec::new(), dense_macs),
            };
            let dense_params = spec.dense_params() as u64;
            let tt_params = layer.weights.param_count() as u64;
            rows.push(LayerRow {
                layer_id: layer.id.clone(),
                selected: entry.selected,
                kernel: spec.kernel(),
                in_channels: spec.in_channels(),
                out_channels: spec.out_channels(),
                ranks,
                dense_params,
                tt_params,
                ratio: dense_params as f64 / tt_params as f64,
                dense_macs,
                tt_macs,
                reconstruction_error: errors
                    .as_ref()
                    .and_then(|e| e.layers.iter().find(|l| l.id == layer.id))
                    .map(|l| l.error),
            });
        }
        let totals = totals(&rows);
        Ok(Self {
            name: model.manifest.name.clone(),
            setting: model.setting,
            rows,
            totals,
        })
    }

    /// Recomputes every derived figure from the row inputs and returns a
    /// description of each mismatch (empty when consistent).
    pub fn check_arithmetic(&self) -> Vec<String> {
        let mut problems = Vec::new();
        for r in &self.rows {
            let dense = (r.kernel * r.kernel * r.in_channels * r.out_channels) as u64;
            if r.dense_params != dense {
                problems.push(format!("{}: dense params {} != {dense}", r.layer_id, r.dense_params));
            }
            let ratio = r.dense_params as f64 / r.tt_params as f64;
            if r.ratio != ratio {
                problems.push(format!("{}: ratio {} != {ratio}", r.layer_id, r.ratio));
            }
            if !r.selected && (r.tt_params != r.dense_params || r.tt_macs != r.dense_macs) {
                problems.push(format!("{}: unselected layer differs from its dense form", r.layer_id));
            }
        }
        let expected = totals(&self.rows);
        if expected != self.totals {
            problems.push(format!("totals {:?} != recomputed {expected:?}", self.totals));
        }
        problems
    }

    pub fn render_table(&self) -> String {
        let with_err = self.rows.iter().any(|r| r.reconstruction_error.is_some());
        let mut s = String::new();
        let _ = writeln!(s, "model {} ({})", self.name, self.setting);
        let _ = write!(
            s,
            "{:<18} {:>3} {:>3} {:>11} {:<14} {:>12} {:>10} {:>9} {:>14} {:>14}",
            "layer", "sel", "k", "channels", "ranks", "dense params", "tt params", "ratio", "dense MACs", "tt MACs"
        );
        if with_err {
            let _ = write!(s, " {:>10}", "rel. error");
        }
        s.push('\n');
        for r in &self.rows {
            let ranks = if r.ranks.is_empty() {
                "-".to_string()
            } else {
                r.ranks.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
            };
            let _ = write!(
                s,
                "{:<18} {:>3} {:>3} {:>11} {:<14} {:>12} {:>10} {:>9} {:>14} {:>14}",
                r.layer_id,
                if r.selected { "yes" } else { "no" },
                r.kernel,
                format!("{}->{}", r.in_channels, r.out_channels),
                ranks,
                r.dense_params,
                r.tt_params,
                sig4(r.ratio),
                r.dense_macs,
                r.tt_macs
            );
            if with_err {
                let _ = write!(s, " {:>10}", r.reconstruction_error.map_or("-".into(), |e| format!("{e:.3e}")));
            }
            s.push('\n');
        }
        let t = &self.totals;
        let _ = writeln!(
            s,
            "selected layers: {}  params {} -> {}  ratio {}x",
            t.selected_layers,
            t.selected_dense_params,
            t.selected_tt_params,
            sig4(t.ratio)
        );
        let _ = writeln!(s, "network params: {} -> {}", t.network_dense_params, t.network_params);
        let _ = writeln!(s, "network MACs: {} -> {}", t.dense_macs, t.tt_macs);
        if let Some(e) = t.weighted_error {
            let _ = writeln!(s, "weighted reconstruction error (selected): {e:.3e}");
        }
        s
    }

    /// One JSON object per layer followed by a totals object.
    pub fn render_rows(&self) -> String {
        let mut s = String::new();
        for r in &self.rows {
            s.push_str(&self.row_line("layer", serde_json::to_value(r).expect("row serializes")));
        }
        s.push_str(&self.row_line("total", serde_json::to_value(&self.totals).expect("totals serialize")));
        s
    }

    fn row_line(&self, kind: &str, mut value: Value) -> String {
        let obj = value.as_object_mut().expect("rows are objects");
        obj.insert("schema".into(), json!(REPORT_ROW_SCHEMA));
        obj.insert("kind".into(), json!(kind));
        obj.insert("model".into(), json!(self.name));
        obj.insert("setting".into(), json!(self.setting.to_string()));
        let mut line = serde_json::to_string(&value).expect("json");
        line.push('\n');
        line
    }
}

fn totals(rows: &[LayerRow]) -> Totals {
    let selected: Vec<&LayerRow> = rows.iter().filter(|r| r.selected).collect();
    let selected_dense_params: u64 = selected.iter().map(|r| r.dense_params).sum();
    let selected_tt_params: u64 = selected.iter().map(|r| r.tt_params).sum();
    let weighted_error = if !selected.is_empty() && selected.iter().all(|r| r.reconstruction_error.is_some()) {
        let num: f64 = selected
            .iter()
            .map(|r| r.dense_params as f64 * r.reconstruction_error.unwrap())
            .sum();
        Some(num / selected_dense_params as f64)
    } else {
        None
    };
    Totals {
        selected_layers: selected.len(),
        selected_dense_params,
        selected_tt_params,
        ratio: if selected.is_empty() {
            1.0
        } else {
            selected_dense_params as f64 / selected_tt_params as f64
        },
        network_dense_params: rows.iter().map(|r| r.dense_params).sum(),
        network_params: rows.iter().map(|r| r.tt_params).sum(),
        dense_macs: rows.iter().map(|r| r.dense_macs).sum(),
        tt_macs: rows.iter().map(|r| r.tt_macs).sum(),
        weighted_error,
    }
}

fn reference_for(report: &CompressionReport) -> Option<(f64, f64)> {
    let RankSetting::Uniform(rank) = report.setting else { return None };
    if report.name != FIXTURE_NAME {
        return None;
    }
    REFERENCE_TARGETS
        .iter()
        .find(|t| t.0 == rank)
        .map(|&(_, p, r)| (p, r))
}

/// One line per sweep point. Fixture sweeps also list the published
/// reference figures, which are targets for comparison and not expected values.
pub fn render_sweep_table(reports: &[CompressionReport]) -> String {
    let mut s = String::new();
    let Some(first) = reports.first() else { return s };
    let _ = writeln!(s, "rank sweep for {}", first.name);
    let _ = writeln!(
        s,
        "{:<16} {:>13} {:>10} {:>16} {:>16} {:>11} {:>18}",
        "setting", "params", "ratio", "dense MACs", "tt MACs", "error", "reference target"
    );
    let _ = writeln!(
        s,
        "{:<16} {:>13} {:>10} {:>16} {:>16} {:>11} {:>18}",
        "original",
        first.totals.selected_dense_params,
        "1",
        first.totals.dense_macs,
        first.totals.dense_macs,
        "-",
        "-"
    );
    for r in reports {
        let t = &r.totals;
        let reference = reference_for(r).map_or("-".to_string(), |(p, x)| format!("{}K / {}x", sig4(p / 1000.0), sig4(x)));
        let _ = writeln!(
            s,
            "{:<16} {:>13} {:>10} {:>16} {:>16} {:>11} {:>18}",
            r.setting.to_string(),
            t.selected_tt_params,
            format!("{}x", sig4(t.ratio)),
            t.dense_macs,
            t.tt_macs,
            t.weighted_error.map_or("-".into(), |e| format!("{e:.3e}")),
            reference
        );
    }
    if reports.iter().any(|r| reference_for(r).is_some()) {
        s.push_str("reference target: published figures for the full-size network; shown for comparison only\n");
    }
    s
}

pub fn render_sweep_rows(reports: &[CompressionReport]) -> String {
    let mut s = String::new();
    for r in reports {
        let mut v = serde_json::to_value(&r.totals).expect("totals serialize");
        let obj = v.as_object_mut().expect("object");
        obj.insert("schema".into(), json!(REPORT_ROW_SCHEMA));
        obj.insert("kind".into(), json!("sweep"));
        obj.insert("model".into(), json!(r.name));
        obj.insert("setting".into(), json!(r.setting.to_string()));
        if let Some((p, x)) = reference_for(r) {
            obj.insert("reference_params".into(), json!(p));
            obj.insert("reference_ratio".into(), json!(x));
        }
        s.push_str(&serde_json::to_string(&v).expect("json"));
        s.push('\n');
    }
    s
}

/// Formats to four significant figures.
pub fn sig4(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = 3 - magnitude;
    if decimals >= 0 {
        format!("{:.*}", decimals as usize, x)
    } else {
        let unit = 10f64.powi(-decimals);
        format!("{:.0}", (x / unit).round() * unit)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_significant_figures() {
        assert_eq!(sig4(24.3712), "24.37");
        assert_eq!(sig4(1363.4), "1363");
        assert_eq!(sig4(12345.6), "12350");
        assert_eq!(sig4(0.0123456), "0.01235");
        assert_eq!(sig4(1.0), "1.000");
        assert_eq!(sig4(0.0), "0");
    }
}
