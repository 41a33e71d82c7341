use proptest::prelude::*;
use ttconv::{plan_factorization, Error, FactorStrategy, FactorizationPlan, MultiIndex};

/// Little-endian digits by repeated division, 1-based.
fn digits_oracle(factors: &[usize], flat: usize) -> Vec<usize> {
    let mut rest = flat - 1;
    factors
        .iter()
        .map(|&f| {
            let d = rest % f;
            rest /= f;
            d + 1
        })
        .collect()
}

proptest! {
    #[test]
    fn round_trip_and_digit_oracle(factors in prop::collection::vec(1usize..=7, 1..=5), pick in 0usize..1_000_000) {
        let padded: usize = factors.iter().product();
        let plan = FactorizationPlan::explicit(padded, factors.clone()).unwrap();
        let flat = pick % padded + 1;
        let multi = plan.flat_to_multi(flat).unwrap();
        prop_assert_eq!(&multi.0, &digits_oracle(&factors, flat));
        prop_assert_eq!(plan.multi_to_flat(&multi).unwrap(), flat);
    }

    #[test]
    fn balanced_plans_cover_the_size(size in 1usize..5000, order in 1usize..=5) {
        let plan = plan_factorization(size, order, &FactorStrategy::Balanced).unwrap();
        prop_assert_eq!(plan.factors().len(), order);
        prop_assert!(plan.padded_size() >= size);
        prop_assert_eq!(plan.padded_size(), plan.factors().iter().product::<usize>());
        prop_assert!(plan.factors().windows(2).all(|w| w[0] <= w[1]));
    }
}

#[test]
fn balanced_examples() {
    let f = |size, order| plan_factorization(size, order, &FactorStrategy::Balanced).unwrap().factors().to_vec();
    assert_eq!(f(16, 4), vec![2, 2, 2, 2]);
    assert_eq!(f(256, 4), vec![4, 4, 4, 4]);
    assert_eq!(f(255, 4), vec![4, 4, 4, 4]);
    assert_eq!(f(48, 2), vec![7, 7]);
    assert_eq!(f(32, 4), vec![2, 2, 3, 3]);
    assert_eq!(f(1, 3), vec![1, 1, 1]);
}

#[test]
fn worked_index_examples() {
    let plan = FactorizationPlan::explicit(256, vec![4, 4, 4, 4]).unwrap();
    assert_eq!(plan.flat_to_multi(1).unwrap(), MultiIndex(vec![1, 1, 1, 1]));
    assert_eq!(plan.flat_to_multi(256).unwrap(), MultiIndex(vec![4, 4, 4, 4]));
    assert_eq!(plan.flat_to_multi(5).unwrap(), MultiIndex(vec![1, 2, 1, 1]));
    assert!(matches!(plan.flat_to_multi(257), Err(Error::Range { .. })));
    assert!(plan.flat_to_multi(0).is_err());
    assert!(plan.multi_to_flat(&MultiIndex(vec![5, 1, 1, 1])).is_err());
    assert!(plan.multi_to_flat(&MultiIndex(vec![1, 1, 1])).is_err());
}

#[test]
fn explicit_plans_validate() {
    assert!(plan_factorization(10, 2, &FactorStrategy::Explicit(vec![2, 4])).is_err());
    assert!(plan_factorization(10, 3, &FactorStrategy::Explicit(vec![2, 5])).is_err());
    assert!(plan_factorization(10, 2, &FactorStrategy::Explicit(vec![0, 5])).is_err());
    let p = plan_factorization(10, 2, &FactorStrategy::Explicit(vec![3, 4])).unwrap();
    assert_eq!((p.padded_size(), p.pad_count()), (12, 2));
    assert!(plan_factorization(0, 2, &FactorStrategy::Balanced).is_err());
    assert!(plan_factorization(4, 0, &FactorStrategy::Balanced).is_err());
}
