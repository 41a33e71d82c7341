use rayon::prelude::*;

use super::{DenseConvKernel, FeatureMap, MacMeter, NoMeter};
use crate::dense::DenseTensor;
use crate::error::{Error, Result};

/// Direct convolution `Y[ḣ,ẇ,ċ] = Σ_{m,n,c} W[m,n,c,ċ]·X[ḣ+m, ẇ+n, c] (+ B[ċ])`.
pub fn dense_conv_forward(kernel: &DenseConvKernel, input: &FeatureMap) -> Result<FeatureMap> {
    dense_conv_forward_metered::<NoMeter>(kernel, input).map(|(y, _)| y)
}

/// Same as [`dense_conv_forward`], also returning the meter. Taps that fall in
/// the zero padding are executed and counted like any other.
pub fn dense_conv_forward_metered<M: MacMeter>(
    kernel: &DenseConvKernel,
    input: &FeatureMap,
) -> Result<(FeatureMap, M)> {
    let spec = kernel.spec();
    if input.channels() != spec.in_channels() {
        return Err(Error::Shape(format!(
            "input has {} channels, kernel expects {}",
            input.channels(),
            spec.in_channels()
        )));
    }
    let (oh, ow) = spec.output_extent(input.height(), input.width())?;
    let (k, cin, cout) = (spec.kernel(), spec.in_channels(), spec.out_channels());
    let (stride, pad) = (spec.stride() as isize, spec.padding() as isize);
    let (h, w) = (input.height() as isize, input.width() as isize);

    let mut out = vec![0.0; oh * ow * cout];
    let meter = out
        .par_chunks_mut(cout)
        .enumerate()
        .map(|(p, acc)| {
            let mut meter = M::default();
            let (y, x) = ((p / ow) as isize, (p % ow) as isize);
            for m in 0..k {
                let ih = y * stride + m as isize - pad;
                for n in 0..k {
                    let iw = x * stride + n as isize - pad;
                    let inside = (0..h).contains(&ih) && (0..w).contains(&iw);
                    for c in 0..cin {
                        let xv = if inside {
                            input.at(ih as usize, iw as usize, c)
                        } else {
                            0.0
                        };
                        let row = &kernel.weights()[((m * k + n) * cin + c) * cout..][..cout];
                        for (a, &wv) in acc.iter_mut().zip(row) {
                            *a += wv * xv;
                            meter.mac();
                        }
                    }
                }
            }
            if let Some(b) = kernel.bias() {
                for (a, &bv) in acc.iter_mut().zip(b) {
                    *a += bv;
                    meter.bias_add();
                }
            }
            meter
        })
        .reduce(M::default, |mut a, b| {
            a.merge(b);
            a
        });
    Ok((FeatureMap::new(oh, ow, cout, out)?, meter))
}

/// Reshapes `W[m,n,c,ċ]` into the `(k²·C) × Ċ` matrix with row
/// `m + k·n + k²·c` (0-based), `m` fastest.
pub fn kernel_to_matrix(kernel: &DenseConvKernel) -> DenseTensor {
    let spec = kernel.spec();
    let (k, cin, cout) = (spec.kernel(), spec.in_channels(), spec.out_channels());
    let rows = k * k * cin;
    let mut data = vec![0.0; rows * cout];
    for m in 0..k {
        for n in 0..k {
            for c in 0..cin {
                let row = m + k * n + k * k * c;
                for oc in 0..cout {
                    data[row * cout + oc] = kernel.at(m, n, c, oc);
                }
            }
        }
    }
    DenseTensor::new(vec![rows, cout], data).expect("shape is consistent by construction")
}

/// Inverse of [`kernel_to_matrix`].
pub fn matrix_to_kernel(
    spec: &super::ConvLayerSpec,
    matrix: &DenseTensor,
    bias: Option<Vec<f64>>,
) -> Result<DenseConvKernel> {
    let (k, cin, cout) = (spec.kernel(), spec.in_channels(), spec.out_channels());
    if matrix.shape() != [k * k * cin, cout] {
        return Err(Error::Shape(format!(
            "matrix shape {:?} does not match a {k}x{k}x{cin}x{cout} kernel",
            matrix.shape()
        )));
    }
    let mut weights = vec![0.0; spec.dense_params()];
    let data = matrix.data();
    for m in 0..k {
        for n in 0..k {
            for c in 0..cin {
                let row = m + k * n + k * k * c;
                for oc in 0..cout {
                    weights[((m * k + n) * cin + c) * cout + oc] = data[row * cout + oc];
                }
            }
        }
    }
    DenseConvKernel::new(spec.clone(), weights, bias)
}
