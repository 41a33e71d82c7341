//! Matrix tensor trains: `K(a, b) = G_1[f_1(a), g_1(b)] · … · G_N[f_N(a), g_N(b)]`
//! where `F` and `G` are the little-endian mixed-radix maps of the row and
//! column factorizations.

use crate::dense::DenseTensor;
use crate::error::{Error, Result};
use crate::index::FactorizationPlan;
use crate::tt::{TtCore, TtTensor, Truncation};

#[derive(Debug, Clone, PartialEq)]
pub struct TtMatrix {
    rows: FactorizationPlan,
    cols: FactorizationPlan,
    // Stored as a train over merged modes q_i·p_i (row digit major).
    train: TtTensor,
}

impl TtMatrix {
    /// `cores[i]` holds `(r_{i−1}, q_i, p_i, r_i)` row-major data.
    pub fn from_cores(row_factors: Vec<usize>, col_factors: Vec<usize>, cores: Vec<(usize, Vec<f64>, usize)>) -> Result<Self> {
        if row_factors.len() != col_factors.len() || row_factors.len() != cores.len() {
            return Err(Error::Shape(format!(
                "{} row factors, {} column factors and {} cores must agree",
                row_factors.len(),
                col_factors.len(),
                cores.len()
            )));
        }
        let q: usize = row_factors.iter().product();
        let p: usize = col_factors.iter().product();
        let rows = FactorizationPlan::explicit(q, row_factors)?;
        let cols = FactorizationPlan::explicit(p, col_factors)?;
        let cores = cores
            .into_iter()
            .enumerate()
            .map(|(i, (l, data, r))| TtCore::new(l, rows.factors()[i] * cols.factors()[i], r, data))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            train: TtTensor::from_cores(cores)?,
            rows,
            cols,
        })
    }

    /// TT-SVD of a row-major `Q × P` matrix with `Q = ∏ q_i`, `P = ∏ p_i`.
    pub fn decompose(matrix: &DenseTensor, row_factors: Vec<usize>, col_factors: Vec<usize>, truncation: &Truncation) -> Result<Self> {
        if matrix.order() != 2 {
            return Err(Error::Shape(format!("expected a matrix, got shape {:?}", matrix.shape())));
        }
        let (q, p) = (matrix.shape()[0], matrix.shape()[1]);
        if row_factors.len() != col_factors.len() {
            return Err(Error::Shape("row and column factor lists differ in length".into()));
        }
        let rows = FactorizationPlan::explicit(q, row_factors)?;
        let cols = FactorizationPlan::explicit(p, col_factors)?;
        if rows.pad_count() != 0 || cols.pad_count() != 0 {
            return Err(Error::Plan(format!(
                "factors must multiply exactly to {q}x{p}, got {}x{}",
                rows.padded_size(),
                cols.padded_size()
            )));
        }
        let n = rows.order();
        let shape: Vec<usize> = (0..n).map(|i| rows.factors()[i] * cols.factors()[i]).collect();
        let mut fd = vec![0; n];
        let mut gd = vec![0; n];
        let tensor = DenseTensor::from_fn(shape, |idx| {
            for i in 0..n {
                fd[i] = idx[i] / cols.factors()[i];
                gd[i] = idx[i] % cols.factors()[i];
            }
            matrix.data()[rows.join(&fd) * p + cols.join(&gd)]
        })?;
        Ok(Self {
            train: TtTensor::decompose(&tensor, truncation)?,
            rows,
            cols,
        })
    }

    pub fn row_factors(&self) -> &[usize] {
        self.rows.factors()
    }

    pub fn col_factors(&self) -> &[usize] {
        self.cols.factors()
    }

    pub fn nrows(&self) -> usize {
        self.rows.padded_size()
    }

    pub fn ncols(&self) -> usize {
        self.cols.padded_size()
    }

    pub fn ranks(&self) -> Vec<usize> {
        self.train.ranks()
    }

    pub fn param_count(&self) -> usize {
        self.train.param_count()
    }

    /// Element at 1-based `(a, b)`.
    pub fn element(&self, a: usize, b: usize) -> Result<f64> {
        let f = self.rows.flat_to_multi(a)?;
        let g = self.cols.flat_to_multi(b).map_err(|e| match e {
            Error::Range { index, size, .. } => Error::Range { mode: 2, index, size },
            other => other,
        })?;
        let merged: Vec<usize> = f
            .0
            .iter()
            .zip(&g.0)
            .zip(self.cols.factors())
            .map(|((&fi, &gi), &p)| (fi - 1) * p + gi)
            .collect();
        self.train.element(&merged)
    }

    /// Dense `Q × P` row-major matrix.
    pub fn to_dense(&self) -> Result<DenseTensor> {
        let (q, p) = (self.nrows(), self.ncols());
        let mut data = Vec::with_capacity(q * p);
        for a in 1..=q {
            for b in 1..=p {
                data.push(self.element(a, b)?);
            }
        }
        DenseTensor::new(vec![q, p], data)
    }
}
