//! TT-format forward pass.
//!
//! Per output position: gather the `k² × C_pad` patch (padding channels zero),
//! contract it with the spatial core over `k²`, then sweep the channel cores
//! left to right. Before step `i` the running state has modes
//! `(c_N…c_{i+1}, c_i, ċ_{i−1}…ċ_1, r_i)`; step `i` sums over `c_i` and `r_i`
//! and emits `(c_N…c_{i+1}, ċ_i, ċ_{i−1}…ċ_1, r_{i+1})`. After the last step
//! the state is indexed by the padded output channel directly.

use rayon::prelude::*;

use super::{FeatureMap, MacMeter, NoMeter, TtConvKernel};
use crate::error::{Error, Result};

pub fn tt_conv_forward(ttk: &TtConvKernel, input: &FeatureMap) -> Result<FeatureMap> {
    tt_conv_forward_metered::<NoMeter>(ttk, input).map(|(y, _)| y)
}

pub fn tt_conv_forward_metered<M: MacMeter>(ttk: &TtConvKernel, input: &FeatureMap) -> Result<(FeatureMap, M)> {
    let spec = ttk.spec();
    if input.channels() != spec.in_channels() {
        return Err(Error::Shape(format!(
            "input has {} channels, kernel expects {}",
            input.channels(),
            spec.in_channels()
        )));
    }
    let (oh, ow) = spec.output_extent(input.height(), input.width())?;
    let cout = spec.out_channels();
    let plan = Plan::new(ttk);

    let mut out = vec![0.0; oh * ow * cout];
    let meter = out
        .par_chunks_mut(cout)
        .enumerate()
        .map_init(
            || Scratch::new(&plan),
            |scratch, (p, y)| {
                let mut meter = M::default();
                plan.position(ttk, input, p / ow, p % ow, y, scratch, &mut meter);
                meter
            },
        )
        .reduce(M::default, |mut a, b| {
            a.merge(b);
            a
        });
    Ok((FeatureMap::new(oh, ow, cout, out)?, meter))
}

struct Plan {
    taps: usize,
    in_padded: usize,
    in_factors: Vec<usize>,
    out_factors: Vec<usize>,
    ranks: Vec<usize>,
    state_len: usize,
}

struct Scratch {
    patch: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
}

impl Scratch {
    fn new(plan: &Plan) -> Self {
        Self {
            patch: vec![0.0; plan.taps * plan.in_padded],
            a: vec![0.0; plan.state_len],
            b: vec![0.0; plan.state_len],
        }
    }
}

impl Plan {
    fn new(ttk: &TtConvKernel) -> Self {
        let spec = ttk.spec();
        let in_factors = spec.in_plan().factors().to_vec();
        let out_factors = spec.out_plan().factors().to_vec();
        // (1, r_1, …, r_N, 1)
        let ranks = ttk.train().ranks();
        let n = in_factors.len();
        let mut state_len = spec.in_plan().padded_size() * ranks[1];
        for i in 1..=n {
            let a: usize = in_factors[i..].iter().product();
            let b: usize = out_factors[..i].iter().product();
            state_len = state_len.max(a * b * ranks[i + 1]);
        }
        Self {
            taps: spec.kernel() * spec.kernel(),
            in_padded: spec.in_plan().padded_size(),
            in_factors,
            out_factors,
            ranks,
            state_len,
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn position<M: MacMeter>(
        &self,
        ttk: &TtConvKernel,
        input: &FeatureMap,
        y: usize,
        x: usize,
        out: &mut [f64],
        scratch: &mut Scratch,
        meter: &mut M,
    ) {
        let spec = ttk.spec();
        let k = spec.kernel();
        let cin = spec.in_channels();
        let (stride, pad) = (spec.stride() as isize, spec.padding() as isize);
        let (h, w) = (input.height() as isize, input.width() as isize);

        // patch[s, c*], s = m + k·n
        scratch.patch.fill(0.0);
        for n in 0..k {
            let iw = x as isize * stride + n as isize - pad;
            for m in 0..k {
                let ih = y as isize * stride + m as isize - pad;
                if (0..h).contains(&ih) && (0..w).contains(&iw) {
                    let s = m + k * n;
                    let row = &mut scratch.patch[s * self.in_padded..][..cin];
                    for (c, slot) in row.iter_mut().enumerate() {
                        *slot = input.at(ih as usize, iw as usize, c);
                    }
                }
            }
        }

        // state[c*, r_1] = Σ_s patch[s, c*] · G_0[s, r_1]
        let core0 = ttk.spatial_core();
        let r1 = self.ranks[1];
        let state = &mut scratch.a;
        for c in 0..self.in_padded {
            for r in 0..r1 {
                let mut acc = 0.0;
                for s in 0..self.taps {
                    acc += scratch.patch[s * self.in_padded + c] * core0.at(0, s, r);
                    meter.mac();
                }
                state[c * r1 + r] = acc;
            }
        }

        let n = self.in_factors.len();
        let (mut cur, mut next) = (&mut scratch.a, &mut scratch.b);
        for i in 1..=n {
            let core = ttk.channel_core(i);
            let (ci, oci) = (self.in_factors[i - 1], self.out_factors[i - 1]);
            let (rl, rr) = (self.ranks[i], self.ranks[i + 1]);
            let outer: usize = self.in_factors[i..].iter().product();
            let inner: usize = self.out_factors[..i - 1].iter().product();
            for a in 0..outer {
                for oc in 0..oci {
                    for b in 0..inner {
                        for r in 0..rr {
                            let mut acc = 0.0;
                            for c in 0..ci {
                                let src = ((a * ci + c) * inner + b) * rl;
                                for l in 0..rl {
                                    acc += cur[src + l] * core.at(l, c, oc, r);
                                    meter.mac();
                                }
                            }
                            next[((a * oci + oc) * inner + b) * rr + r] = acc;
                        }
                    }
                }
            }
            std::mem::swap(&mut cur, &mut next);
        }

        out.copy_from_slice(&cur[..out.len()]);
        if let Some(bias) = ttk.bias() {
            for (o, &b) in out.iter_mut().zip(bias) {
                *o += b;
                meter.bias_add();
            }
        }
    }
}
