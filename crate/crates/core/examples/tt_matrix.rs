//! Matrix TT format: a 64x64 matrix over row factors (4,4,4) and column
//! factors (4,4,4).
//!
//! Run with `cargo run --example tt_matrix`.

use ttconv::{DenseTensor, Result, TtMatrix, Truncation};

fn main() -> Result<()> {
    // The Kronecker product of three 4x4 matrices has matrix-TT rank 1.
    let a = |i: usize, j: usize| (i + 2 * j) as f64 - 3.0;
    let b = |i: usize, j: usize| if i == j { 2.0 } else { 0.5 };
    let c = |i: usize, j: usize| ((i * j) % 3) as f64;
    let matrix = DenseTensor::from_fn(vec![64, 64], |ix| {
        let (r, s) = (ix[0], ix[1]);
        // little-endian digits: the first factor varies fastest
        a(r % 4, s % 4) * b(r / 4 % 4, s / 4 % 4) * c(r / 16, s / 16)
    })?;

    let ttm = TtMatrix::decompose(&matrix, vec![4, 4, 4], vec![4, 4, 4], &Truncation::MaxRank(4))?;
    let err = matrix.relative_error(&ttm.to_dense()?)?;
    println!("ranks {:?}, {} params for a {}-entry matrix, rel. error {err:.2e}", ttm.ranks(), ttm.param_count(), matrix.len());
    println!("K(5, 17) = {:.6} (dense {:.6})", ttm.element(5, 17)?, matrix.get(&[5, 17])?);
    Ok(())
}
