mod common;

use common::*;
use rand::Rng;
use ttconv::{tt_param_count, DenseTensor, Error, TtCore, TtTensor, Truncation};

#[test]
fn element_and_reconstruct_match_chain_oracle() {
    let mut r = rng(11);
    for trial in 0..40 {
        let n = r.random_range(1..=5);
        let modes: Vec<usize> = (0..n).map(|_| r.random_range(1..=4)).collect();
        let internal: Vec<usize> = (1..n).map(|_| r.random_range(1..=3)).collect();
        let tt = random_tt(&mut r, &modes, &internal);
        let want = tt_dense_oracle(&tt);
        let got = tt.reconstruct().unwrap();
        assert_eq!(got.shape(), &modes[..]);
        // same left-to-right order of operations, so bit-identical
        assert_eq!(got.data(), &want[..], "trial {trial}");
        let idx0 = modes.iter().map(|&m| r.random_range(0..m)).collect::<Vec<_>>();
        let idx1: Vec<usize> = idx0.iter().map(|i| i + 1).collect();
        assert_eq!(tt.element(&idx1).unwrap(), tt_element_oracle(&tt, &idx0));
    }
}

#[test]
fn outer_product_recovered_at_rank_one() {
    let mut r = rng(5);
    let vecs: Vec<Vec<f64>> = [3, 4, 2, 5].iter().map(|&m| uniform(&mut r, m)).collect();
    let dense = DenseTensor::from_fn(vec![3, 4, 2, 5], |i| (0..4).map(|k| vecs[k][i[k]]).product()).unwrap();
    let tt = TtTensor::decompose(&dense, &Truncation::MaxRank(3)).unwrap();
    assert_eq!(tt.ranks(), vec![1, 1, 1, 1, 1]);
    assert!(rel_frobenius(dense.data(), tt.reconstruct().unwrap().data()) < 1e-13);
}

#[test]
fn kronecker_structured_tensor_with_zero_slices() {
    // rank-1 tensor whose last factor has many zeros
    let c: Vec<f64> = (0..16).map(|z| ((z / 4) * (z % 4) % 3) as f64).collect();
    let dense = DenseTensor::from_fn(vec![16, 16, 16], |i| {
        ((i[0] / 4) as f64 + 2.0 * (i[0] % 4) as f64 - 3.0) * if i[1] / 4 == i[1] % 4 { 2.0 } else { 0.5 } * c[i[2]]
    })
    .unwrap();
    let tt = TtTensor::decompose(&dense, &Truncation::MaxRank(4)).unwrap();
    assert_eq!(tt.ranks(), vec![1, 1, 1, 1]);
    assert!(rel_frobenius(dense.data(), tt.reconstruct().unwrap().data()) < 1e-13);
}

#[test]
fn full_rank_is_exact_and_ranks_respect_caps() {
    let mut r = rng(8);
    let dense = DenseTensor::new(vec![3, 4, 5, 2], uniform(&mut r, 120)).unwrap();
    let tt = TtTensor::decompose(&dense, &Truncation::MaxRank(100)).unwrap();
    assert_eq!(tt.ranks(), vec![1, 3, 10, 2, 1]);
    assert!(rel_frobenius(dense.data(), tt.reconstruct().unwrap().data()) < 1e-12);
    for cap in 1..5 {
        let tt = TtTensor::decompose(&dense, &Truncation::MaxRank(cap)).unwrap();
        assert!(tt.ranks().iter().all(|&x| x <= cap));
    }
    let tt = TtTensor::decompose(&dense, &Truncation::MaxRanks(vec![2, 5, 1])).unwrap();
    assert_eq!(tt.ranks(), vec![1, 2, 5, 1, 1]);
}

#[test]
fn param_count_is_the_stored_scalar_count() {
    let mut r = rng(3);
    for _ in 0..200 {
        let n = r.random_range(1..=6);
        let modes: Vec<usize> = (0..n).map(|_| r.random_range(1..=5)).collect();
        let internal: Vec<usize> = (1..n).map(|_| r.random_range(1..=4)).collect();
        let tt = random_tt(&mut r, &modes, &internal);
        let stored: usize = tt.cores().iter().map(|c| c.data().len()).sum();
        assert_eq!(tt.param_count(), stored);
        assert_eq!(tt_param_count(&modes, &tt.ranks()).unwrap(), stored);
    }
    assert_eq!(tt_param_count(&[9, 16, 16, 16, 16], &[1, 2, 2, 2, 2, 1]).unwrap(), 242);
    assert!(tt_param_count(&[2, 2], &[2, 2, 1]).is_err());
}

#[test]
fn decompose_rejects_bad_inputs() {
    let nan = DenseTensor::new(vec![2, 2], vec![1.0, f64::NAN, 0.0, 1.0]).unwrap();
    assert!(matches!(TtTensor::decompose(&nan, &Truncation::MaxRank(1)), Err(Error::Data(_))));
    let ok = DenseTensor::zeros(vec![2, 2]).unwrap();
    assert!(TtTensor::decompose(&ok, &Truncation::MaxRank(0)).is_err());
    assert!(TtTensor::decompose(&ok, &Truncation::Tolerance(0.0)).is_err());
    assert!(TtTensor::decompose(&ok, &Truncation::MaxRanks(vec![1, 1])).is_err());
}

#[test]
fn inconsistent_cores_rejected() {
    let a = TtCore::new(1, 2, 2, vec![0.0; 4]).unwrap();
    let b = TtCore::new(3, 2, 1, vec![0.0; 6]).unwrap();
    assert!(matches!(TtTensor::from_cores(vec![a, b]), Err(Error::Shape(_))));
}
