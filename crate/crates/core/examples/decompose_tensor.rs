//! TT-SVD of a small tensor at several rank caps and a tolerance.
//!
//! Run with `cargo run --example decompose_tensor`.

use ttconv::{DenseTensor, Result, TtTensor, Truncation};

fn main() -> Result<()> {
    // A smooth 6x6x6x6 tensor: low TT rank, so the error falls fast.
    let shape = vec![6, 6, 6, 6];
    let dense = DenseTensor::from_fn(shape, |i| {
        let x: Vec<f64> = i.iter().map(|&v| v as f64 / 5.0).collect();
        (x[0] + 2.0 * x[1] - x[2] * x[3]).sin() + 0.1 * x.iter().product::<f64>()
    })?;
    println!("dense tensor: {:?}, {} values", dense.shape(), dense.len());

    for cap in [1, 2, 4, 8] {
        let tt = TtTensor::decompose(&dense, &Truncation::MaxRank(cap))?;
        let err = dense.relative_error(&tt.reconstruct()?)?;
        println!("rank cap {cap}: ranks {:?}, {} params, rel. error {err:.3e}", tt.ranks(), tt.param_count());
    }

    let tol = 1e-3;
    let tt = TtTensor::decompose(&dense, &Truncation::Tolerance(tol))?;
    let err = dense.relative_error(&tt.reconstruct()?)?;
    println!("tolerance {tol}: ranks {:?}, rel. error {err:.3e}", tt.ranks());

    // Elements are looked up with 1-based indices through the core chain.
    println!("element (1,2,3,4) = {:.6} (dense {:.6})", tt.element(&[1, 2, 3, 4])?, dense.get(&[1, 2, 3, 4])?);
    Ok(())
}
