//! Channel factorization plans and the mixed-radix index bijection.
//!
//! Run with `cargo run --example factorization_plans`.

use ttconv::{plan_factorization, FactorStrategy, MultiIndex, Result};

fn main() -> Result<()> {
    for (size, order) in [(16, 4), (32, 4), (48, 2), (64, 4), (255, 4), (256, 4), (512, 4)] {
        let plan = plan_factorization(size, order, &FactorStrategy::Balanced)?;
        println!(
            "{size:>4} channels, order {order}: factors {:?}, padded to {} ({} dummy)",
            plan.factors(),
            plan.padded_size(),
            plan.pad_count()
        );
    }

    let plan = plan_factorization(512, 4, &FactorStrategy::Explicit(vec![4, 4, 4, 8]))?;
    for flat in [1, 2, 5, 17, 512] {
        let multi = plan.flat_to_multi(flat)?;
        assert_eq!(plan.multi_to_flat(&multi)?, flat);
        println!("flat {flat:>3} <-> {:?}", multi.0);
    }
    println!("(1,1,1,2) -> {}", plan.multi_to_flat(&MultiIndex(vec![1, 1, 1, 2]))?);
    Ok(())
}
