//! Truncated SVD of a row-major matrix, the building block of TT-SVD.

use faer::Mat;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum RankRule {
    /// Keep at most this many singular triplets (numerically zero ones are dropped).
    Cap(usize),
    /// Keep the fewest triplets whose discarded tail has Frobenius norm ≤ the bound.
    TailBound(f64),
}

/// Rank-`k` factors `U_k` (rows × k) and `S_k·V_kᵀ` (k × cols), both row-major.
pub(crate) struct Truncated {
    pub rank: usize,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

pub(crate) fn truncated_svd(rows: usize, cols: usize, data: &[f64], rule: RankRule) -> Result<Truncated> {
    debug_assert_eq!(data.len(), rows * cols);
    let m = Mat::from_fn(rows, cols, |i, j| data[i * cols + j]);
    let svd = m
        .thin_svd()
        .map_err(|e| Error::Data(format!("SVD did not converge: {e:?}")))?;
    let (u, v) = (svd.U(), svd.V());
    let s = svd.S().column_vector();
    let sigma: Vec<f64> = (0..s.nrows()).map(|i| s[i]).collect();
    debug_assert!(sigma.windows(2).all(|w| w[0] >= w[1]));
    let rank = select_rank(&sigma, rows.max(cols), rule);

    let mut left = Vec::with_capacity(rows * rank);
    for i in 0..rows {
        for j in 0..rank {
            left.push(u[(i, j)]);
        }
    }
    let mut right = Vec::with_capacity(rank * cols);
    for j in 0..rank {
        for c in 0..cols {
            right.push(sigma[j] * v[(c, j)]);
        }
    }
    Ok(Truncated { rank, left, right })
}

/// `sigma` must be sorted in descending order.
pub(crate) fn select_rank(sigma: &[f64], max_dim: usize, rule: RankRule) -> usize {
    let full = sigma.len();
    if full == 0 {
        return 1;
    }
    match rule {
        RankRule::Cap(cap) => {
            let cutoff = sigma[0] * max_dim as f64 * f64::EPSILON;
            let numerical = sigma.iter().take_while(|&&s| s > cutoff).count().max(1);
            cap.min(numerical).max(1)
        }
        RankRule::TailBound(bound) => {
            let bound_sq = bound * bound;
            let mut tail_sq = 0.0;
            let mut k = full;
            // Grow the discarded tail from the smallest singular value upward.
            while k > 1 {
                let next = tail_sq + sigma[k - 1] * sigma[k - 1];
                if next > bound_sq {
                    break;
                }
                tail_sq = next;
                k -= 1;
            }
            k
        }
    }
}
