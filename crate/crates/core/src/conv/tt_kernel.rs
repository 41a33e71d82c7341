//! Tensor-train convolution kernels.
//!
//! The kernel is reshaped to the `(N+1)`-order tensor of shape
//! `(k², c_1·ċ_1, …, c_N·ċ_N)` whose element at
//! `(m + k·n, (c_1,ċ_1), …, (c_N,ċ_N))` is `W[m, n, c*, ċ*]`, with `c*`
//! and `ċ*` composed from their digits by the plans. Channels beyond the
//! logical counts are zero. The chain is
//!
//! ```text
//! W[m,n,c*,ċ*] = G_0[m + k·n] · G_1[c_1,ċ_1] · … · G_N[c_N,ċ_N]
//! ```
//!
//! with `G_0` of shape `(1, k², r_1)` and `G_i` of shape
//! `(r_i, c_i, ċ_i, r_{i+1})`, `r_{N+1} = 1`.

use super::{ConvLayerSpec, DenseConvKernel};
use crate::error::{Error, Result};
use crate::index::FactorizationPlan;
use crate::tt::{TtCore, TtTensor, Truncation};

/// Absolute bound on reconstructed dummy-channel weights.
pub const DUMMY_WEIGHT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct TtConvKernel {
    spec: ConvLayerSpec,
    train: TtTensor,
    bias: Option<Vec<f64>>,
}

/// Read-only view of a 4-way channel core `(r_i, c_i, ċ_i, r_{i+1})`.
#[derive(Debug, Clone, Copy)]
pub struct ChannelCore<'a> {
    core: &'a TtCore,
    in_factor: usize,
    out_factor: usize,
}

impl ChannelCore<'_> {
    pub fn shape(&self) -> (usize, usize, usize, usize) {
        (self.core.left_rank(), self.in_factor, self.out_factor, self.core.right_rank())
    }

    pub fn data(&self) -> &[f64] {
        self.core.data()
    }

    /// Entry at 0-based `(l, c, ċ, r)`.
    #[inline]
    pub fn at(&self, l: usize, c: usize, oc: usize, r: usize) -> f64 {
        self.core.at(l, c * self.out_factor + oc, r)
    }
}

impl TtConvKernel {
    /// Assembles a kernel from its spatial core and channel cores.
    pub fn from_parts(spec: ConvLayerSpec, train: TtTensor, bias: Option<Vec<f64>>) -> Result<Self> {
        let n = spec.order();
        let expected: Vec<usize> = std::iter::once(spec.kernel() * spec.kernel())
            .chain(
                spec.in_plan()
                    .factors()
                    .iter()
                    .zip(spec.out_plan().factors())
                    .map(|(c, oc)| c * oc),
            )
            .collect();
        if train.order() != n + 1 || train.mode_sizes() != expected {
            return Err(Error::Shape(format!(
                "train modes {:?} do not match layer modes {expected:?}",
                train.mode_sizes()
            )));
        }
        match (&bias, spec.has_bias()) {
            (Some(b), true) if b.len() == spec.out_channels() => {}
            (None, false) => {}
            _ => {
                return Err(Error::Shape(format!(
                    "bias of length {:?} does not match layer (has_bias = {}, {} outputs)",
                    bias.as_ref().map(Vec::len),
                    spec.has_bias(),
                    spec.out_channels()
                )))
            }
        }
        Ok(Self { spec, train, bias })
    }

    pub fn spec(&self) -> &ConvLayerSpec {
        &self.spec
    }

    pub fn bias(&self) -> Option<&[f64]> {
        self.bias.as_deref()
    }

    /// The whole chain as a plain tensor train over merged modes.
    pub fn train(&self) -> &TtTensor {
        &self.train
    }

    pub fn spatial_core(&self) -> &TtCore {
        &self.train.cores()[0]
    }

    /// Channel core `i` in `1..=N`.
    pub fn channel_core(&self, i: usize) -> ChannelCore<'_> {
        assert!(i >= 1 && i <= self.spec.order(), "channel core index {i} out of 1..={}", self.spec.order());
        ChannelCore {
            core: &self.train.cores()[i],
            in_factor: self.spec.in_plan().factors()[i - 1],
            out_factor: self.spec.out_plan().factors()[i - 1],
        }
    }

    /// Internal ranks `(r_1, …, r_N)`.
    pub fn internal_ranks(&self) -> Vec<usize> {
        let ranks = self.train.ranks();
        ranks[1..ranks.len() - 1].to_vec()
    }

    /// Stored core scalars (bias excluded).
    pub fn param_count(&self) -> usize {
        self.train.param_count()
    }
}

/// Offsets of each padded channel within the merged-mode tensor: the flat
/// position of `(s, merged_1, …, merged_N)` is
/// `s·stride0 + in_offset[c*] + out_offset[ċ*]`.
struct MergedLayout {
    stride0: usize,
    in_offset: Vec<usize>,
    out_offset: Vec<usize>,
}

impl MergedLayout {
    fn new(spec: &ConvLayerSpec) -> Self {
        let (inp, outp) = (spec.in_plan(), spec.out_plan());
        let n = spec.order();
        let merged: Vec<usize> = (0..n).map(|i| inp.factors()[i] * outp.factors()[i]).collect();
        let mut strides = vec![1usize; n];
        for i in (0..n.saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * merged[i + 1];
        }
        let stride0 = strides[0] * merged[0];
        let offsets = |plan: &FactorizationPlan, scale: &dyn Fn(usize) -> usize| {
            let mut digits = vec![0; n];
            (0..plan.padded_size())
                .map(|flat| {
                    plan.split_into(flat, &mut digits);
                    digits.iter().enumerate().map(|(i, &d)| d * scale(i) * strides[i]).sum()
                })
                .collect::<Vec<usize>>()
        };
        let in_offset = offsets(inp, &|i| outp.factors()[i]);
        let out_offset = offsets(outp, &|_| 1);
        Self {
            stride0,
            in_offset,
            out_offset,
        }
    }
}

fn merged_shape(spec: &ConvLayerSpec) -> Vec<usize> {
    std::iter::once(spec.kernel() * spec.kernel())
        .chain(
            spec.in_plan()
                .factors()
                .iter()
                .zip(spec.out_plan().factors())
                .map(|(c, oc)| c * oc),
        )
        .collect()
}

/// Padded, merged-mode tensor of a dense kernel.
pub(crate) fn merged_tensor(kernel: &DenseConvKernel) -> crate::dense::DenseTensor {
    let spec = kernel.spec();
    let layout = MergedLayout::new(spec);
    let shape = merged_shape(spec);
    let total: usize = shape.iter().product();
    let mut data = vec![0.0; total];
    let k = spec.kernel();
    for m in 0..k {
        for n in 0..k {
            let base = (m + k * n) * layout.stride0;
            for c in 0..spec.in_channels() {
                let row = base + layout.in_offset[c];
                for oc in 0..spec.out_channels() {
                    data[row + layout.out_offset[oc]] = kernel.at(m, n, c, oc);
                }
            }
        }
    }
    crate::dense::DenseTensor::new(shape, data).expect("merged shape matches data")
}

/// Compresses a dense kernel into TT format.
///
/// `truncation` acts on the `N` internal bonds: `MaxRank(r)` is the uniform
/// rank-`r` setting, `MaxRanks` gives one cap per bond.
pub fn decompose_kernel(kernel: &DenseConvKernel, truncation: &Truncation) -> Result<TtConvKernel> {
    let spec = kernel.spec();
    let tensor = merged_tensor(kernel);
    let mut train = TtTensor::decompose(&tensor, truncation)?;
    zero_padding_slab(spec, &mut train);
    TtConvKernel::from_parts(spec.clone(), train, kernel.bias().map(<[f64]>::to_vec))
}

/// Channel digits of the last core beyond the last logical channel index only
/// ever address padding; clear them so dummy weights reconstruct to zero.
fn zero_padding_slab(spec: &ConvLayerSpec, train: &mut TtTensor) {
    let (inp, outp) = (spec.in_plan(), spec.out_plan());
    if inp.pad_count() == 0 && outp.pad_count() == 0 {
        return;
    }
    let n = spec.order();
    let (cn, ocn) = (inp.factors()[n - 1], outp.factors()[n - 1]);
    let (top_in, top_out) = (inp.last_logical_top_digit(), outp.last_logical_top_digit());
    let core = &mut train.cores_mut()[n];
    let (left, _, right) = core.shape();
    let data = core.data_mut();
    for l in 0..left {
        for c in 0..cn {
            for oc in 0..ocn {
                if c > top_in || oc > top_out {
                    let at = (l * cn * ocn + c * ocn + oc) * right;
                    data[at..at + right].fill(0.0);
                }
            }
        }
    }
}

/// Expands a TT kernel back to dense weights over the logical channels.
///
/// Dummy channels addressed only through the padding digits of the last
/// channel core must reconstruct to at most [`DUMMY_WEIGHT_TOLERANCE`];
/// anything larger means the cores were altered after compression.
pub fn reconstruct_kernel(ttk: &TtConvKernel) -> Result<DenseConvKernel> {
    let spec = ttk.spec();
    let full = ttk.train.reconstruct()?;
    let layout = MergedLayout::new(spec);
    let data = full.data();
    let k = spec.kernel();
    let (inp, outp) = (spec.in_plan(), spec.out_plan());
    let (cin, cout) = (spec.in_channels(), spec.out_channels());

    let n = spec.order();
    let low_in: usize = inp.factors()[..n - 1].iter().product();
    let low_out: usize = outp.factors()[..n - 1].iter().product();
    let (top_in, top_out) = (inp.last_logical_top_digit(), outp.last_logical_top_digit());
    for s in 0..k * k {
        let base = s * layout.stride0;
        for c in 0..inp.padded_size() {
            for oc in 0..outp.padded_size() {
                if c / low_in <= top_in && oc / low_out <= top_out {
                    continue;
                }
                let v = data[base + layout.in_offset[c] + layout.out_offset[oc]];
                if !(v.abs() <= DUMMY_WEIGHT_TOLERANCE) {
                    return Err(Error::Integrity {
                        location: format!("spatial {}, channel {} -> {}", s + 1, c + 1, oc + 1),
                        value: v,
                        threshold: DUMMY_WEIGHT_TOLERANCE,
                    });
                }
            }
        }
    }

    let mut weights = vec![0.0; spec.dense_params()];
    for m in 0..k {
        for n in 0..k {
            let base = (m + k * n) * layout.stride0;
            for c in 0..cin {
                let row = base + layout.in_offset[c];
                let dst = ((m * k + n) * cin + c) * cout;
                for oc in 0..cout {
                    weights[dst + oc] = data[row + layout.out_offset[oc]];
                }
            }
        }
    }
    DenseConvKernel::new(spec.clone(), weights, ttk.bias.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::FactorizationPlan;

    #[test]
    fn scalar_chain_is_exact() {
        let spec = ConvLayerSpec::balanced(1, 1, 1, 1).unwrap();
        let kernel = DenseConvKernel::new(spec, vec![-2.5], None).unwrap();
        let ttk = decompose_kernel(&kernel, &Truncation::MaxRank(1)).unwrap();
        assert_eq!(ttk.param_count(), 2);
        let back = reconstruct_kernel(&ttk).unwrap();
        assert!((back.weights()[0] + 2.5).abs() < 1e-15);
    }

    #[test]
    fn zero_kernel() {
        let spec = ConvLayerSpec::balanced(3, 4, 6, 2).unwrap();
        let ttk = decompose_kernel(&DenseConvKernel::zeros(spec), &Truncation::MaxRank(2)).unwrap();
        assert!(reconstruct_kernel(&ttk).unwrap().weights().iter().all(|&w| w == 0.0));
    }

    #[test]
    fn merged_layout_matches_digits() {
        let inp = FactorizationPlan::explicit(6, vec![2, 3]).unwrap();
        let outp = FactorizationPlan::explicit(4, vec![2, 2]).unwrap();
        let spec = ConvLayerSpec::new(2, 6, 4, inp.clone(), outp.clone()).unwrap();
        let w: Vec<f64> = (0..spec.dense_params()).map(|i| i as f64 + 1.0).collect();
        let kernel = DenseConvKernel::new(spec, w, None).unwrap();
        let t = merged_tensor(&kernel);
        assert_eq!(t.shape(), &[4, 4, 6]);
        for m in 1..=2 {
            for n in 1..=2 {
                for c in 1..=6 {
                    for oc in 1..=4 {
                        let ci = inp.flat_to_multi(c).unwrap().0;
                        let oi = outp.flat_to_multi(oc).unwrap().0;
                        let idx = [
                            m + 2 * (n - 1),
                            (ci[0] - 1) * 2 + oi[0],
                            (ci[1] - 1) * 2 + oi[1],
                        ];
                        assert_eq!(t.get(&idx).unwrap(), kernel.at(m - 1, n - 1, c - 1, oc - 1));
                    }
                }
            }
        }
    }

    #[test]
    fn tampered_padding_is_rejected() {
        // 2 -> (2,2): channels 3 and 4 are padding in the top-digit slab.
        let plan = FactorizationPlan::explicit(2, vec![2, 2]).unwrap();
        let spec = ConvLayerSpec::new(1, 2, 2, plan.clone(), plan).unwrap();
        let w: Vec<f64> = (0..4).map(|i| (i as f64 * 0.7).sin()).collect();
        let kernel = DenseConvKernel::new(spec, w, None).unwrap();
        let mut ttk = decompose_kernel(&kernel, &Truncation::MaxRank(1)).unwrap();
        assert!(reconstruct_kernel(&ttk).is_ok());
        let last = ttk.train.cores_mut().last_mut().unwrap();
        last.data_mut().iter_mut().for_each(|v| *v += 0.5);
        assert!(matches!(reconstruct_kernel(&ttk), Err(Error::Integrity { .. })));
    }

    #[test]
    fn from_parts_validates_modes() {
        let spec = ConvLayerSpec::balanced(3, 4, 4, 2).unwrap();
        let train = TtTensor::from_cores(vec![TtCore::zeros(1, 9, 1), TtCore::zeros(1, 4, 1)]).unwrap();
        assert!(TtConvKernel::from_parts(spec, train, None).is_err());
    }
}
