use serde::{Deserialize, Serialize};

use super::ConvLayerSpec;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FlopMode {
    Dense,
    /// TT forward with internal ranks `(r_1, …, r_N)`.
    Tt { ranks: Vec<usize> },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlopCount {
    pub macs: u64,
    pub bias_adds: u64,
}

/// Exact multiply-accumulate count of [`super::dense_conv_forward`] or
/// [`super::tt_conv_forward`] for an `out_h × out_w` output.
///
/// The TT count follows the forward pass contraction order:
/// `C_pad·k²·r_1` for the spatial core plus
/// `(∏_{j≥i} c_j)(∏_{j≤i} ċ_j)·r_i·r_{i+1}` for channel core `i`, per position.
pub fn conv_flops(spec: &ConvLayerSpec, mode: &FlopMode, out_h: usize, out_w: usize) -> Result<FlopCount> {
    let positions = (out_h * out_w) as u64;
    let k2 = (spec.kernel() * spec.kernel()) as u64;
    let bias_adds = if spec.has_bias() {
        positions * spec.out_channels() as u64
    } else {
        0
    };
    let per_position = match mode {
        FlopMode::Dense => k2 * spec.in_channels() as u64 * spec.out_channels() as u64,
        FlopMode::Tt { ranks } => {
            let n = spec.order();
            if ranks.len() != n {
                return Err(Error::Shape(format!("expected {n} internal ranks, got {}", ranks.len())));
            }
            let cf = spec.in_plan().factors();
            let of = spec.out_plan().factors();
            let rank = |i: usize| if i <= n { ranks[i - 1] as u64 } else { 1 };
            let mut total = spec.in_plan().padded_size() as u64 * k2 * rank(1);
            for i in 1..=n {
                let ins: u64 = cf[i - 1..].iter().map(|&d| d as u64).product();
                let outs: u64 = of[..i].iter().map(|&d| d as u64).product();
                total += ins * outs * rank(i) * rank(i + 1);
            }
            total
        }
    };
    Ok(FlopCount {
        macs: positions * per_position,
        bias_adds,
    })
}
