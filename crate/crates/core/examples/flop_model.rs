//! MAC counts from the closed-form model and from an instrumented forward
//! pass, including a layer where TT costs more than dense.
//!
//! Run with `cargo run --release --example flop_model`.

use ttconv::conv::{dense_conv_forward_metered, tt_conv_forward_metered, DenseConvKernel, FeatureMap, MacCounter};
use ttconv::{conv_flops, decompose_kernel, ConvLayerSpec, FlopMode, Result, Truncation};

fn main() -> Result<()> {
    let spec = ConvLayerSpec::balanced(3, 16, 16, 2)?;
    let kernel = DenseConvKernel::new(spec.clone(), (0..spec.dense_params()).map(|i| (i as f64 * 0.37).sin()).collect(), None)?;
    let input = FeatureMap::new(8, 8, 16, (0..8 * 8 * 16).map(|i| (i as f64 * 0.11).cos()).collect())?;
    let (oh, ow) = spec.output_extent(8, 8)?;

    let (_, counted) = dense_conv_forward_metered::<MacCounter>(&kernel, &input)?;
    println!("dense: model {} MACs, counted {}", conv_flops(&spec, &FlopMode::Dense, oh, ow)?.macs, counted.macs);
    for rank in [2, 8, 16] {
        let ttk = decompose_kernel(&kernel, &Truncation::MaxRank(rank))?;
        let ranks = ttk.internal_ranks();
        let model = conv_flops(&spec, &FlopMode::Tt { ranks: ranks.clone() }, oh, ow)?;
        let (_, counted) = tt_conv_forward_metered::<MacCounter>(&ttk, &input)?;
        println!("tt rank cap {rank:>2} (ranks {ranks:?}): model {} MACs, counted {}", model.macs, counted.macs);
    }

    // 256->256 3x3 at 20x20 output: at rank 16 the chain costs more than dense.
    let big = ConvLayerSpec::balanced(3, 256, 256, 4)?;
    let dense = conv_flops(&big, &FlopMode::Dense, 20, 20)?.macs;
    let tt = conv_flops(&big, &FlopMode::Tt { ranks: vec![9, 16, 16, 16] }, 20, 20)?.macs;
    println!("256->256 at rank 16: dense {dense} MACs, tt {tt} MACs ({:.2}x)", tt as f64 / dense as f64);
    Ok(())
}
