//! Tensor-train representation of N-order tensors.
//!
//! A tensor `A ∈ ℝ^{I_1×…×I_N}` is stored as cores `G_k` of shape
//! `(r_{k−1}, I_k, r_k)` with `r_0 = r_N = 1`, so that
//!
//! ```text
//! A(a_1, …, a_N) = G_1[a_1] · G_2[a_2] · … · G_N[a_N]
//! ```
//!
//! where `G_k[a_k]` is an `r_{k−1} × r_k` matrix. Multi-indices on the public
//! surface are 1-based; storage is 0-based row-major.

use crate::dense::{self, DenseTensor, DEFAULT_ELEMENT_BUDGET};
use crate::error::{Error, Result};
use crate::svd::{truncated_svd, RankRule};

/// One 3-way core of shape `(left, mode, right)`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TtCore {
    left: usize,
    mode: usize,
    right: usize,
    data: Vec<f64>,
}

impl TtCore {
    pub fn new(left: usize, mode: usize, right: usize, data: Vec<f64>) -> Result<Self> {
        if left == 0 || mode == 0 || right == 0 {
            return Err(Error::Shape(format!(
                "core shape ({left}, {mode}, {right}) has a zero dimension"
            )));
        }
        if data.len() != left * mode * right {
            return Err(Error::Shape(format!(
                "core shape ({left}, {mode}, {right}) needs {} values, got {}",
                left * mode * right,
                data.len()
            )));
        }
        Ok(Self {
            left,
            mode,
            right,
            data,
        })
    }

    pub fn zeros(left: usize, mode: usize, right: usize) -> Self {
        Self {
            left,
            mode,
            right,
            data: vec![0.0; left * mode * right],
        }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.left, self.mode, self.right)
    }

    pub fn left_rank(&self) -> usize {
        self.left
    }

    pub fn mode_size(&self) -> usize {
        self.mode
    }

    pub fn right_rank(&self) -> usize {
        self.right
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Entry `G[l, i, r]`, 0-based.
    #[inline]
    pub fn at(&self, l: usize, i: usize, r: usize) -> f64 {
        self.data[(l * self.mode + i) * self.right + r]
    }
}

/// Per-bond rank control for [`TtTensor::decompose`].
#[derive(Debug, Clone, PartialEq)]
pub enum Truncation {
    /// Same cap on every internal bond.
    MaxRank(usize),
    /// One cap per internal bond `(r_1, …, r_{N−1})`.
    MaxRanks(Vec<usize>),
    /// Relative Frobenius error bound in `(0, 1)`.
    Tolerance(f64),
}

impl Truncation {
    fn validate(&self, bonds: usize) -> Result<()> {
        match self {
            Truncation::MaxRank(0) => Err(Error::InvalidArgument("rank cap must be at least 1".into())),
            Truncation::MaxRank(_) => Ok(()),
            Truncation::MaxRanks(caps) => {
                if caps.len() != bonds {
                    return Err(Error::InvalidArgument(format!(
                        "expected {bonds} bond rank caps, got {}",
                        caps.len()
                    )));
                }
                if let Some(pos) = caps.iter().position(|&c| c == 0) {
                    return Err(Error::InvalidArgument(format!("rank cap for bond {} is 0", pos + 1)));
                }
                Ok(())
            }
            Truncation::Tolerance(t) => {
                if t.is_finite() && *t > 0.0 && *t < 1.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidArgument(format!("tolerance {t} must lie in (0, 1)")))
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TtTensor {
    cores: Vec<TtCore>,
}

impl TtTensor {
    pub fn from_cores(cores: Vec<TtCore>) -> Result<Self> {
        if cores.is_empty() {
            return Err(Error::Shape("a tensor train needs at least one core".into()));
        }
        if cores[0].left != 1 {
            return Err(Error::Shape(format!("leading boundary rank is {}, expected 1", cores[0].left)));
        }
        let last = cores.last().map(|c| c.right).unwrap_or(1);
        if last != 1 {
            return Err(Error::Shape(format!("trailing boundary rank is {last}, expected 1")));
        }
        for (k, pair) in cores.windows(2).enumerate() {
            if pair[0].right != pair[1].left {
                return Err(Error::Shape(format!(
                    "core {} has trailing rank {} but core {} has leading rank {}",
                    k + 1,
                    pair[0].right,
                    k + 2,
                    pair[1].left
                )));
            }
        }
        Ok(Self { cores })
    }

    pub fn cores(&self) -> &[TtCore] {
        &self.cores
    }

    pub(crate) fn cores_mut(&mut self) -> &mut [TtCore] {
        &mut self.cores
    }

    pub fn order(&self) -> usize {
        self.cores.len()
    }

    pub fn mode_sizes(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.mode).collect()
    }

    /// Full rank chain `(r_0, …, r_N)` including the boundary 1s.
    pub fn ranks(&self) -> Vec<usize> {
        std::iter::once(1).chain(self.cores.iter().map(|c| c.right)).collect()
    }

    /// Number of stored scalars.
    pub fn param_count(&self) -> usize {
        self.cores.iter().map(|c| c.data.len()).sum()
    }

    /// Element at a 1-based multi-index.
    pub fn element(&self, index: &[usize]) -> Result<f64> {
        if index.len() != self.cores.len() {
            return Err(Error::Shape(format!(
                "index has {} entries but the train has {} modes",
                index.len(),
                self.cores.len()
            )));
        }
        let mut row = vec![1.0];
        for (mode, (core, &a)) in self.cores.iter().zip(index).enumerate() {
            if a == 0 || a > core.mode {
                return Err(Error::Range {
                    mode: mode + 1,
                    index: a,
                    size: core.mode,
                });
            }
            row = chain_step(&row, core, a - 1);
        }
        Ok(row[0])
    }

    pub fn reconstruct(&self) -> Result<DenseTensor> {
        self.reconstruct_with_budget(DEFAULT_ELEMENT_BUDGET)
    }

    /// Materializes the full tensor, failing if it would hold more than
    /// `budget` elements.
    pub fn reconstruct_with_budget(&self, budget: usize) -> Result<DenseTensor> {
        let shape = self.mode_sizes();
        let requested: u128 = shape.iter().map(|&d| d as u128).product();
        if requested > budget as u128 {
            return Err(Error::Capacity { requested, budget });
        }
        // partial[(prefix, r)] holds the row vector G_1[a_1]…G_k[a_k].
        let mut partial = vec![1.0];
        let mut width = 1;
        for core in &self.cores {
            let prefixes = partial.len() / width;
            let mut next = Vec::with_capacity(prefixes * core.mode * core.right);
            for p in 0..prefixes {
                let row = &partial[p * width..(p + 1) * width];
                for a in 0..core.mode {
                    next.extend(chain_step(row, core, a));
                }
            }
            partial = next;
            width = core.right;
        }
        DenseTensor::new(shape, partial)
    }

    /// Sequential truncated-SVD decomposition (TT-SVD) over left-to-right
    /// unfoldings.
    ///
    /// In tolerance mode each step discards at most `tol/√(N−1)·‖A‖_F`, which
    /// bounds the total relative error by `tol`.
    pub fn decompose(dense: &DenseTensor, truncation: &Truncation) -> Result<Self> {
        let shape = dense.shape();
        let n = shape.len();
        truncation.validate(n - 1)?;
        if let Some(pos) = dense.data().iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite value at flat offset {pos}")));
        }
        let norm = dense.frobenius_norm();
        if norm == 0.0 {
            let cores = shape.iter().map(|&d| TtCore::zeros(1, d, 1)).collect();
            return Self::from_cores(cores);
        }
        let step_bound = match truncation {
            Truncation::Tolerance(t) if n > 1 => t / ((n - 1) as f64).sqrt() * norm,
            _ => 0.0,
        };

        let mut cores = Vec::with_capacity(n);
        let mut remainder = dense.data().to_vec();
        let mut left_rank = 1;
        for (k, &mode) in shape.iter().enumerate().take(n - 1) {
            let rows = left_rank * mode;
            let cols = remainder.len() / rows;
            let rule = match truncation {
                Truncation::MaxRank(cap) => RankRule::Cap(*cap),
                Truncation::MaxRanks(caps) => RankRule::Cap(caps[k]),
                Truncation::Tolerance(_) => RankRule::TailBound(step_bound),
            };
            let t = truncated_svd(rows, cols, &remainder, rule)?;
            cores.push(TtCore::new(left_rank, mode, t.rank, t.left)?);
            remainder = t.right;
            left_rank = t.rank;
        }
        cores.push(TtCore::new(left_rank, shape[n - 1], 1, remainder)?);
        Self::from_cores(cores)
    }
}

/// `row · G[:, a, :]`, summing over the left rank in ascending order.
#[inline]
fn chain_step(row: &[f64], core: &TtCore, a: usize) -> Vec<f64> {
    debug_assert_eq!(row.len(), core.left);
    let mut out = vec![0.0; core.right];
    for (r, slot) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (l, &x) in row.iter().enumerate() {
            acc += x * core.at(l, a, r);
        }
        *slot = acc;
    }
    out
}

/// `Σ_k r_{k−1}·I_k·r_k` for a full rank chain `(r_0, …, r_N)`.
pub fn tt_param_count(mode_sizes: &[usize], ranks: &[usize]) -> Result<usize> {
    if ranks.len() != mode_sizes.len() + 1 {
        return Err(Error::Shape(format!(
            "{} modes need {} ranks, got {}",
            mode_sizes.len(),
            mode_sizes.len() + 1,
            ranks.len()
        )));
    }
    if ranks.first() != Some(&1) || ranks.last() != Some(&1) {
        return Err(Error::Shape(format!("boundary ranks must be 1, got {ranks:?}")));
    }
    Ok(mode_sizes
        .iter()
        .enumerate()
        .map(|(k, &m)| ranks[k] * m * ranks[k + 1])
        .sum())
}

/// Product of mode sizes, the dense element count.
pub fn dense_count(mode_sizes: &[usize]) -> Result<usize> {
    dense::checked_len(mode_sizes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn core(l: usize, m: usize, r: usize, v: &[f64]) -> TtCore {
        TtCore::new(l, m, r, v.to_vec()).unwrap()
    }

    #[test]
    fn single_core_lookup() {
        let tt = TtTensor::from_cores(vec![core(1, 3, 1, &[5.0, 7.0, 9.0])]).unwrap();
        assert_eq!(tt.element(&[2]).unwrap(), 7.0);
        assert_eq!(tt.reconstruct().unwrap().data(), &[5.0, 7.0, 9.0]);
    }

    #[test]
    fn rank_one_outer_product() {
        let tt = TtTensor::from_cores(vec![core(1, 2, 1, &[1.0, 2.0]), core(1, 2, 1, &[3.0, 4.0])]).unwrap();
        assert_eq!(tt.element(&[2, 1]).unwrap(), 6.0);
        assert_eq!(tt.reconstruct().unwrap().data(), &[3.0, 4.0, 6.0, 8.0]);
    }

    #[test]
    fn out_of_range_names_mode() {
        let tt = TtTensor::from_cores(vec![core(1, 2, 1, &[1.0, 2.0]), core(1, 2, 1, &[3.0, 4.0])]).unwrap();
        let err = tt.element(&[1, 3]).unwrap_err();
        assert!(matches!(err, Error::Range { mode: 2, index: 3, size: 2 }));
        assert!(err.to_string().contains("mode 2"));
    }

    #[test]
    fn rejects_inconsistent_ranks() {
        assert!(TtTensor::from_cores(vec![core(1, 2, 2, &[0.0; 4]), core(3, 2, 1, &[0.0; 6])]).is_err());
        assert!(TtTensor::from_cores(vec![core(2, 2, 1, &[0.0; 4])]).is_err());
        assert!(TtTensor::from_cores(vec![]).is_err());
    }

    #[test]
    fn reconstruction_budget() {
        let tt = TtTensor::from_cores(vec![core(1, 4, 1, &[1.0; 4]), core(1, 4, 1, &[1.0; 4])]).unwrap();
        assert!(matches!(
            tt.reconstruct_with_budget(15),
            Err(Error::Capacity { requested: 16, budget: 15 })
        ));
        assert!(tt.reconstruct_with_budget(16).is_ok());
    }

    #[test]
    fn param_count_examples() {
        assert_eq!(tt_param_count(&[2, 3], &[1, 2, 1]).unwrap(), 10);
        assert_eq!(tt_param_count(&[4, 5, 6], &[1, 1, 1, 1]).unwrap(), 15);
        assert_eq!(tt_param_count(&[9, 16, 16, 16, 16], &[1, 2, 2, 2, 2, 1]).unwrap(), 242);
        assert!(tt_param_count(&[2, 3], &[1, 2]).is_err());
        assert!(tt_param_count(&[2, 3], &[2, 2, 1]).is_err());
    }

    #[test]
    fn identity_rank_one_error() {
        let eye = DenseTensor::new(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let tt = TtTensor::decompose(&eye, &Truncation::MaxRank(1)).unwrap();
        let err = eye.relative_error(&tt.reconstruct().unwrap()).unwrap();
        assert!((err - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn zero_tensor_gives_zero_cores() {
        let z = DenseTensor::zeros(vec![2, 2, 2]).unwrap();
        for trunc in [Truncation::MaxRank(2), Truncation::Tolerance(0.1)] {
            let tt = TtTensor::decompose(&z, &trunc).unwrap();
            assert_eq!(tt.ranks(), vec![1, 1, 1, 1]);
            assert!(tt.cores().iter().all(|c| c.data().iter().all(|&v| v == 0.0)));
            assert!(tt.reconstruct().unwrap().data().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn rejects_bad_input() {
        let bad = DenseTensor::new(vec![2], vec![1.0, f64::NAN]).unwrap();
        assert!(matches!(TtTensor::decompose(&bad, &Truncation::MaxRank(1)), Err(Error::Data(_))));
        let ok = DenseTensor::new(vec![2, 2], vec![1.0; 4]).unwrap();
        for t in [
            Truncation::MaxRank(0),
            Truncation::MaxRanks(vec![1, 1]),
            Truncation::Tolerance(0.0),
            Truncation::Tolerance(1.0),
        ] {
            assert!(matches!(TtTensor::decompose(&ok, &t), Err(Error::InvalidArgument(_))));
        }
    }

    #[test]
    fn degenerate_unit_modes() {
        let t = DenseTensor::from_fn(vec![1, 3, 1, 2], |i| (i[1] * 2 + i[3]) as f64 + 1.0).unwrap();
        let tt = TtTensor::decompose(&t, &Truncation::MaxRank(4)).unwrap();
        assert!(t.relative_error(&tt.reconstruct().unwrap()).unwrap() < 1e-12);
    }
}
