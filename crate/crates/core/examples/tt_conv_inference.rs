//! Decompose a 3x3 convolution kernel and run the TT forward pass next to
//! the dense reference.
//!
//! Run with `cargo run --release --example tt_conv_inference`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ttconv::conv::{dense_conv_forward, tt_conv_forward, DenseConvKernel, FeatureMap};
use ttconv::{decompose_kernel, reconstruct_kernel, ConvLayerSpec, Result, Truncation};

fn main() -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    // 24 input channels pad to 27 = 3·3·3 with order 3.
    let spec = ConvLayerSpec::balanced(3, 24, 32, 3)?.with_bias(true);
    println!("in factors {:?}, out factors {:?}", spec.in_plan().factors(), spec.out_plan().factors());
    let weights = (0..spec.dense_params()).map(|_| rng.random_range(-0.2..0.2)).collect();
    let bias = (0..32).map(|_| rng.random_range(-0.1..0.1)).collect();
    let kernel = DenseConvKernel::new(spec, weights, Some(bias))?;

    let input = FeatureMap::new(12, 12, 24, (0..12 * 12 * 24).map(|_| rng.random_range(-1.0..1.0)).collect())?;
    let exact = dense_conv_forward(&kernel, &input)?;

    for rank in [1, 4, 16, 64] {
        let ttk = decompose_kernel(&kernel, &Truncation::MaxRank(rank))?;
        let y = tt_conv_forward(&ttk, &input)?;
        // The TT pass must match a dense pass on the reconstructed kernel.
        let y_ref = dense_conv_forward(&reconstruct_kernel(&ttk)?, &input)?;
        let oracle_gap = max_diff(y.data(), y_ref.data()) / y_ref.max_abs();
        let approx_err = max_diff(y.data(), exact.data()) / exact.max_abs();
        println!(
            "rank {rank:>2}: ranks {:?}, {:>5} params, oracle gap {oracle_gap:.1e}, output error vs original {approx_err:.3}",
            ttk.internal_ranks(),
            ttk.param_count()
        );
    }
    Ok(())
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}
