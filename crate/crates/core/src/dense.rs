//! Row-major dense tensors, used as the reference representation.

use crate::error::{Error, Result};

/// Default ceiling on the number of elements a dense materialization may hold.
pub const DEFAULT_ELEMENT_BUDGET: usize = 1 << 28;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let len = checked_len(&shape)?;
        if data.len() != len {
            return Err(Error::Shape(format!(
                "data length {} does not match shape {:?} (expected {len})",
                data.len(),
                shape
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Result<Self> {
        let len = checked_len(&shape)?;
        Ok(Self {
            shape,
            data: vec![0.0; len],
        })
    }

    /// Builds a tensor by evaluating `f` at every 0-based multi-index in
    /// row-major order.
    pub fn from_fn(shape: Vec<usize>, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let len = checked_len(&shape)?;
        let mut data = Vec::with_capacity(len);
        let mut idx = vec![0usize; shape.len()];
        for _ in 0..len {
            data.push(f(&idx));
            increment_row_major(&mut idx, &shape);
        }
        Ok(Self { shape, data })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn order(&self) -> usize {
        self.shape.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Element at a 1-based multi-index.
    pub fn get(&self, index: &[usize]) -> Result<f64> {
        let flat = flat_offset_1based(index, &self.shape)?;
        Ok(self.data[flat])
    }

    pub fn frobenius_norm(&self) -> f64 {
        frobenius(&self.data)
    }

    /// `‖self − other‖_F / ‖self‖_F`, defined as 0 when both are zero.
    pub fn relative_error(&self, other: &DenseTensor) -> Result<f64> {
        if self.shape != other.shape {
            return Err(Error::Shape(format!(
                "cannot compare shapes {:?} and {:?}",
                self.shape, other.shape
            )));
        }
        Ok(relative_frobenius_error(&self.data, &other.data))
    }
}

pub(crate) fn checked_len(shape: &[usize]) -> Result<usize> {
    if shape.is_empty() {
        return Err(Error::Shape("shape must have at least one mode".into()));
    }
    if let Some(pos) = shape.iter().position(|&d| d == 0) {
        return Err(Error::Shape(format!("mode {} has size 0", pos + 1)));
    }
    shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::Capacity {
            requested: shape.iter().map(|&d| d as u128).product(),
            budget: usize::MAX,
        })
}

/// Row-major offset of a 1-based multi-index, with per-mode range checks.
pub(crate) fn flat_offset_1based(index: &[usize], shape: &[usize]) -> Result<usize> {
    if index.len() != shape.len() {
        return Err(Error::Shape(format!(
            "index has {} entries but tensor has {} modes",
            index.len(),
            shape.len()
        )));
    }
    let mut flat = 0usize;
    for (mode, (&a, &size)) in index.iter().zip(shape).enumerate() {
        if a == 0 || a > size {
            return Err(Error::Range {
                mode: mode + 1,
                index: a,
                size,
            });
        }
        flat = flat * size + (a - 1);
    }
    Ok(flat)
}

pub(crate) fn increment_row_major(idx: &mut [usize], shape: &[usize]) {
    for d in (0..shape.len()).rev() {
        idx[d] += 1;
        if idx[d] < shape[d] {
            return;
        }
        idx[d] = 0;
    }
}

pub fn frobenius(values: &[f64]) -> f64 {
    values.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `‖reference − approx‖_F / ‖reference‖_F`; a zero reference yields 0 when the
/// approximation is also zero and `inf` otherwise.
pub fn relative_frobenius_error(reference: &[f64], approx: &[f64]) -> f64 {
    debug_assert_eq!(reference.len(), approx.len());
    let diff = reference
        .iter()
        .zip(approx)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let norm = frobenius(reference);
    if norm == 0.0 {
        if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        diff / norm
    }
}
