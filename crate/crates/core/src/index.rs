//! Bijections between flat indices and factor tuples, and channel-count
//! factorization with zero padding.
//!
//! The mixed radix is little-endian: the first factor varies fastest, so a
//! 1-based tuple `(x_1, …, x_N)` maps to `x_1 + Σ_{i≥2} (x_i − 1)·∏_{j<i} d_j`.
//! Padding channels occupy the tail of the padded range.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FactorizationPlan {
    logical_size: usize,
    factors: Vec<usize>,
    padded_size: usize,
}

/// 1-based factor tuple.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex(pub Vec<usize>);

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FactorStrategy {
    /// Factors close to the N-th root; may pad.
    Balanced,
    Explicit(Vec<usize>),
}

impl FactorizationPlan {
    /// Plan with the given factors; fails if they cannot hold `logical_size`.
    pub fn explicit(logical_size: usize, factors: Vec<usize>) -> Result<Self> {
        if logical_size == 0 {
            return Err(Error::Plan("size must be at least 1".into()));
        }
        if factors.is_empty() {
            return Err(Error::Plan("factor list is empty".into()));
        }
        if factors.contains(&0) {
            return Err(Error::Plan(format!("factors {factors:?} contain 0")));
        }
        let padded_size = factors
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::Plan(format!("product of {factors:?} overflows")))?;
        if padded_size < logical_size {
            return Err(Error::Plan(format!(
                "factors {factors:?} multiply to {padded_size}, less than size {logical_size}"
            )));
        }
        Ok(Self {
            logical_size,
            factors,
            padded_size,
        })
    }

    pub fn logical_size(&self) -> usize {
        self.logical_size
    }

    pub fn factors(&self) -> &[usize] {
        &self.factors
    }

    pub fn order(&self) -> usize {
        self.factors.len()
    }

    pub fn padded_size(&self) -> usize {
        self.padded_size
    }

    pub fn pad_count(&self) -> usize {
        self.padded_size - self.logical_size
    }

    /// 1-based flat index to 1-based tuple.
    pub fn flat_to_multi(&self, flat: usize) -> Result<MultiIndex> {
        if flat == 0 || flat > self.padded_size {
            return Err(Error::Range {
                mode: 1,
                index: flat,
                size: self.padded_size,
            });
        }
        let mut digits = vec![0; self.factors.len()];
        self.split_into(flat - 1, &mut digits);
        Ok(MultiIndex(digits.into_iter().map(|d| d + 1).collect()))
    }

    /// 1-based tuple to 1-based flat index.
    pub fn multi_to_flat(&self, multi: &MultiIndex) -> Result<usize> {
        if multi.0.len() != self.factors.len() {
            return Err(Error::Shape(format!(
                "tuple has {} entries, plan has {} factors",
                multi.0.len(),
                self.factors.len()
            )));
        }
        for (mode, (&x, &d)) in multi.0.iter().zip(&self.factors).enumerate() {
            if x == 0 || x > d {
                return Err(Error::Range {
                    mode: mode + 1,
                    index: x,
                    size: d,
                });
            }
        }
        let digits: Vec<usize> = multi.0.iter().map(|x| x - 1).collect();
        Ok(self.join(&digits) + 1)
    }

    /// 0-based flat offset into 0-based digits, first factor fastest.
    #[inline]
    pub(crate) fn split_into(&self, mut flat: usize, digits: &mut [usize]) {
        for (slot, &d) in digits.iter_mut().zip(&self.factors) {
            *slot = flat % d;
            flat /= d;
        }
    }

    /// 0-based digits into a 0-based flat offset.
    #[inline]
    pub(crate) fn join(&self, digits: &[usize]) -> usize {
        digits
            .iter()
            .zip(&self.factors)
            .rev()
            .fold(0, |acc, (&x, &d)| acc * d + x)
    }

    /// 0-based digit of the last (slowest) factor beyond which every channel
    /// is padding.
    pub(crate) fn last_logical_top_digit(&self) -> usize {
        let low: usize = self.factors[..self.factors.len() - 1].iter().product();
        (self.logical_size - 1) / low
    }
}

pub fn plan_factorization(size: usize, order: usize, strategy: &FactorStrategy) -> Result<FactorizationPlan> {
    if size == 0 {
        return Err(Error::Plan("size must be at least 1".into()));
    }
    if order == 0 {
        return Err(Error::Plan("order must be at least 1".into()));
    }
    match strategy {
        FactorStrategy::Explicit(factors) => {
            if factors.len() != order {
                return Err(Error::Plan(format!(
                    "expected {order} factors for size {size}, got {factors:?}"
                )));
            }
            FactorizationPlan::explicit(size, factors.clone())
        }
        FactorStrategy::Balanced => FactorizationPlan::explicit(size, balanced_factors(size, order)),
    }
}

/// Smallest `m` with `m^order ≥ size`.
fn root_ceiling(size: usize, order: usize) -> usize {
    let guess = (size as f64).powf(1.0 / order as f64).round().max(1.0) as usize;
    let pow_at_least = |m: usize| {
        let mut acc = 1u128;
        for _ in 0..order {
            acc *= m as u128;
            if acc >= size as u128 {
                return true;
            }
        }
        acc >= size as u128
    };
    let mut m = guess.saturating_sub(1).max(1);
    while !pow_at_least(m) {
        m += 1;
    }
    m
}

/// Non-decreasing factors, each at most `⌈size^{1/order}⌉`, with the smallest
/// product `≥ size`; ties go to the lexicographically smallest tuple.
fn balanced_factors(size: usize, order: usize) -> Vec<usize> {
    let cap = root_ceiling(size, order);
    let mut best: Option<(u128, Vec<usize>)> = None;
    let mut prefix = Vec::with_capacity(order);
    search(size as u128, order, cap, 1, 1, &mut prefix, &mut best);
    best.map(|(_, f)| f).unwrap_or_else(|| vec![cap; order])
}

fn search(
    size: u128,
    order: usize,
    cap: usize,
    min: usize,
    product: u128,
    prefix: &mut Vec<usize>,
    best: &mut Option<(u128, Vec<usize>)>,
) {
    let remaining = order - prefix.len();
    if remaining == 1 {
        let need = size.div_ceil(product).max(min as u128);
        if need > cap as u128 {
            return;
        }
        let total = product * need;
        if best.as_ref().is_none_or(|(b, _)| total < *b) {
            let mut f = prefix.clone();
            f.push(need as usize);
            *best = Some((total, f));
        }
        return;
    }
    for d in min..=cap {
        // Every later factor is ≥ d, so this is a lower bound on the product.
        let floor = product * (d as u128).pow(remaining as u32);
        if let Some((b, _)) = best {
            if floor >= *b {
                break;
            }
        }
        prefix.push(d);
        search(size, order, cap, d, product * d as u128, prefix, best);
        prefix.pop();
    }
}
