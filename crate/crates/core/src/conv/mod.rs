//! Convolution layers: the dense reference operator, kernel reshaping, the
//! tensor-train kernel format and its forward pass, and MAC accounting.
//!
//! Kernels are stored as `(m, n, c, ċ)` row-major arrays of shape
//! `(k, k, C, Ċ)`; feature maps as `(h, w, c)` row-major. Convolution is
//! "valid" by default (stride 1, no spatial padding, output extent
//! `H − k + 1`); stride and zero padding are available through
//! [`ConvLayerSpec::with_geometry`].

mod dense_op;
mod flops;
mod forward;
mod tt_kernel;

pub use dense_op::{dense_conv_forward, dense_conv_forward_metered, kernel_to_matrix, matrix_to_kernel};
pub use flops::{conv_flops, FlopCount, FlopMode};
pub use forward::{tt_conv_forward, tt_conv_forward_metered};
pub use tt_kernel::{decompose_kernel, reconstruct_kernel, ChannelCore, TtConvKernel, DUMMY_WEIGHT_TOLERANCE};

use crate::error::{Error, Result};
use crate::index::{plan_factorization, FactorStrategy, FactorizationPlan};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConvLayerSpec {
    kernel: usize,
    in_channels: usize,
    out_channels: usize,
    has_bias: bool,
    stride: usize,
    padding: usize,
    in_plan: FactorizationPlan,
    out_plan: FactorizationPlan,
}

impl ConvLayerSpec {
    pub fn new(
        kernel: usize,
        in_channels: usize,
        out_channels: usize,
        in_plan: FactorizationPlan,
        out_plan: FactorizationPlan,
    ) -> Result<Self> {
        if kernel == 0 || in_channels == 0 || out_channels == 0 {
            return Err(Error::Shape(format!(
                "kernel {kernel}, channels {in_channels}->{out_channels}: all must be at least 1"
            )));
        }
        if in_plan.logical_size() != in_channels || out_plan.logical_size() != out_channels {
            return Err(Error::Plan(format!(
                "plans cover {}->{} channels, layer has {in_channels}->{out_channels}",
                in_plan.logical_size(),
                out_plan.logical_size()
            )));
        }
        if in_plan.order() != out_plan.order() {
            return Err(Error::Plan(format!(
                "input plan has order {}, output plan has order {}",
                in_plan.order(),
                out_plan.order()
            )));
        }
        Ok(Self {
            kernel,
            in_channels,
            out_channels,
            has_bias: false,
            stride: 1,
            padding: 0,
            in_plan,
            out_plan,
        })
    }

    /// Layer with balanced factorizations of both channel counts.
    pub fn balanced(kernel: usize, in_channels: usize, out_channels: usize, order: usize) -> Result<Self> {
        let in_plan = plan_factorization(in_channels, order, &FactorStrategy::Balanced)?;
        let out_plan = plan_factorization(out_channels, order, &FactorStrategy::Balanced)?;
        Self::new(kernel, in_channels, out_channels, in_plan, out_plan)
    }

    pub fn with_bias(mut self, has_bias: bool) -> Self {
        self.has_bias = has_bias;
        self
    }

    pub fn with_geometry(mut self, stride: usize, padding: usize) -> Result<Self> {
        if stride == 0 {
            return Err(Error::Shape("stride must be at least 1".into()));
        }
        self.stride = stride;
        self.padding = padding;
        Ok(self)
    }

    pub fn kernel(&self) -> usize {
        self.kernel
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn has_bias(&self) -> bool {
        self.has_bias
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn padding(&self) -> usize {
        self.padding
    }

    pub fn in_plan(&self) -> &FactorizationPlan {
        &self.in_plan
    }

    pub fn out_plan(&self) -> &FactorizationPlan {
        &self.out_plan
    }

    /// TT order N of the channel chain.
    pub fn order(&self) -> usize {
        self.in_plan.order()
    }

    /// Dense weight count `k²·C·Ċ` (bias excluded).
    pub fn dense_params(&self) -> usize {
        self.kernel * self.kernel * self.in_channels * self.out_channels
    }

    /// Output spatial extent for an `h × w` input.
    pub fn output_extent(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let k = self.kernel;
        let (hp, wp) = (h + 2 * self.padding, w + 2 * self.padding);
        if hp < k || wp < k {
            return Err(Error::Shape(format!(
                "input {h}x{w} (padding {}) is smaller than the {k}x{k} kernel",
                self.padding
            )));
        }
        Ok(((hp - k) / self.stride + 1, (wp - k) / self.stride + 1))
    }
}

/// Dense kernel `W[m, n, c, ċ]` with an optional per-output-channel bias.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseConvKernel {
    spec: ConvLayerSpec,
    weights: Vec<f64>,
    bias: Option<Vec<f64>>,
}

impl DenseConvKernel {
    pub fn new(spec: ConvLayerSpec, weights: Vec<f64>, bias: Option<Vec<f64>>) -> Result<Self> {
        if weights.len() != spec.dense_params() {
            return Err(Error::Shape(format!(
                "kernel {k}x{k}x{}x{} needs {} weights, got {}",
                spec.in_channels,
                spec.out_channels,
                spec.dense_params(),
                weights.len(),
                k = spec.kernel
            )));
        }
        match (&bias, spec.has_bias) {
            (Some(b), true) if b.len() != spec.out_channels => {
                return Err(Error::Shape(format!(
                    "bias has {} entries, layer has {} output channels",
                    b.len(),
                    spec.out_channels
                )))
            }
            (None, true) => return Err(Error::Shape("layer declares a bias but none was given".into())),
            (Some(_), false) => return Err(Error::Shape("bias given for a layer without bias".into())),
            _ => {}
        }
        if weights.iter().chain(bias.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::Data("kernel contains non-finite values".into()));
        }
        Ok(Self { spec, weights, bias })
    }

    pub fn zeros(spec: ConvLayerSpec) -> Self {
        let bias = spec.has_bias.then(|| vec![0.0; spec.out_channels]);
        Self {
            weights: vec![0.0; spec.dense_params()],
            spec,
            bias,
        }
    }

    pub fn spec(&self) -> &ConvLayerSpec {
        &self.spec
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> Option<&[f64]> {
        self.bias.as_deref()
    }

    /// Weight at 0-based `(m, n, c, ċ)`.
    #[inline]
    pub fn at(&self, m: usize, n: usize, c: usize, oc: usize) -> f64 {
        let s = &self.spec;
        self.weights[((m * s.kernel + n) * s.in_channels + c) * s.out_channels + oc]
    }
}

/// `(h, w, c)` row-major activation tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl FeatureMap {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::Shape(format!("feature map {height}x{width}x{channels} is empty")));
        }
        if data.len() != height * width * channels {
            return Err(Error::Shape(format!(
                "feature map {height}x{width}x{channels} needs {} values, got {}",
                height * width * channels,
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Result<Self> {
        Self::new(height, width, channels, vec![0.0; height * width * channels])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn at(&self, h: usize, w: usize, c: usize) -> f64 {
        self.data[(h * self.width + w) * self.channels + c]
    }

    /// Copy with `channels` widened to `to`, extra channels zero-filled.
    pub fn pad_channels(&self, to: usize) -> Result<Self> {
        if to < self.channels {
            return Err(Error::Shape(format!("cannot pad {} channels down to {to}", self.channels)));
        }
        let mut data = Vec::with_capacity(self.height * self.width * to);
        for pixel in self.data.chunks(self.channels) {
            data.extend_from_slice(pixel);
            data.resize(data.len() + to - self.channels, 0.0);
        }
        Self::new(self.height, self.width, to, data)
    }

    /// Largest absolute value, 0 for an all-zero map.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Multiply-accumulate instrumentation threaded through the forward passes.
pub trait MacMeter: Default + Send {
    fn mac(&mut self);
    fn bias_add(&mut self);
    fn merge(&mut self, other: Self);
}

/// Meter that records nothing.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoMeter;

impl MacMeter for NoMeter {
    #[inline(always)]
    fn mac(&mut self) {}
    #[inline(always)]
    fn bias_add(&mut self) {}
    #[inline(always)]
    fn merge(&mut self, _: Self) {}
}

/// Meter that counts every executed multiply-accumulate and bias addition.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct MacCounter {
    pub macs: u64,
    pub bias_adds: u64,
}

impl MacMeter for MacCounter {
    #[inline(always)]
    fn mac(&mut self) {
        self.macs += 1;
    }
    #[inline(always)]
    fn bias_add(&mut self) {
        self.bias_adds += 1;
    }
    fn merge(&mut self, other: Self) {
        self.macs += other.macs;
        self.bias_adds += other.bias_adds;
    }
}
