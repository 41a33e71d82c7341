//! Independent reference implementations shared by the integration tests.
//! None of these call into the library's numerical code.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ttconv::{TtCore, TtTensor};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Random TT tensor with the given modes and internal ranks.
pub fn random_tt(rng: &mut ChaCha8Rng, modes: &[usize], internal: &[usize]) -> TtTensor {
    let mut ranks = vec![1];
    ranks.extend_from_slice(internal);
    ranks.push(1);
    let cores = modes
        .iter()
        .enumerate()
        .map(|(k, &m)| TtCore::new(ranks[k], m, ranks[k + 1], uniform(rng, ranks[k] * m * ranks[k + 1])).unwrap())
        .collect();
    TtTensor::from_cores(cores).unwrap()
}

/// Element of a TT tensor by explicit matrix products over 0-based indices,
/// reading cores through their raw `(left, mode, right)` row-major data.
pub fn tt_element_oracle(tt: &TtTensor, index0: &[usize]) -> f64 {
    let mut row = vec![1.0];
    for (core, &i) in tt.cores().iter().zip(index0) {
        let (l, m, r) = core.shape();
        let d = core.data();
        let mut next = vec![0.0; r];
        for (b, slot) in next.iter_mut().enumerate() {
            for (a, &x) in row.iter().enumerate() {
                *slot += x * d[(a * m + i) * r + b];
            }
        }
        assert_eq!(row.len(), l);
        row = next;
    }
    row[0]
}

/// Full row-major tensor from the element oracle.
pub fn tt_dense_oracle(tt: &TtTensor) -> Vec<f64> {
    let modes = tt.mode_sizes();
    let total: usize = modes.iter().product();
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0; modes.len()];
    for _ in 0..total {
        out.push(tt_element_oracle(tt, &idx));
        for k in (0..modes.len()).rev() {
            idx[k] += 1;
            if idx[k] < modes[k] {
                break;
            }
            idx[k] = 0;
        }
    }
    out
}

pub fn rel_frobenius(reference: &[f64], approx: &[f64]) -> f64 {
    let num: f64 = reference.iter().zip(approx).map(|(a, b)| (a - b) * (a - b)).sum();
    let den: f64 = reference.iter().map(|a| a * a).sum();
    (num / den).sqrt()
}

/// Six-loop valid convolution with stride 1:
/// `Y[h', w', ċ] = Σ_{m,n,c} K[m,n,c,ċ] · X[h'+m, w'+n, c] (+ B[ċ])`,
/// kernel `(m, n, c, ċ)` row-major, maps `(h, w, c)` row-major.
pub fn naive_conv(
    k: usize,
    cin: usize,
    cout: usize,
    weights: &[f64],
    bias: Option<&[f64]>,
    h: usize,
    w: usize,
    x: &[f64],
) -> Vec<f64> {
    let (oh, ow) = (h - k + 1, w - k + 1);
    let mut y = vec![0.0; oh * ow * cout];
    for yh in 0..oh {
        for yw in 0..ow {
            for oc in 0..cout {
                let mut acc = bias.map_or(0.0, |b| b[oc]);
                for m in 0..k {
                    for n in 0..k {
                        for c in 0..cin {
                            acc += weights[((m * k + n) * cin + c) * cout + oc] * x[((yh + m) * w + yw + n) * cin + c];
                        }
                    }
                }
                y[(yh * ow + yw) * cout + oc] = acc;
            }
        }
    }
    y
}

/// Zero-pads an `(h, w, c)` map by `p` on every spatial side.
pub fn zero_pad(h: usize, w: usize, c: usize, p: usize, x: &[f64]) -> Vec<f64> {
    let (ph, pw) = (h + 2 * p, w + 2 * p);
    let mut out = vec![0.0; ph * pw * c];
    for i in 0..h {
        for j in 0..w {
            let src = (i * w + j) * c;
            let dst = ((i + p) * pw + j + p) * c;
            out[dst..dst + c].copy_from_slice(&x[src..src + c]);
        }
    }
    out
}

/// Largest singular value of a row-major matrix by power iteration on `AᵀA`.
pub fn top_singular_value(rows: usize, cols: usize, a: &[f64]) -> f64 {
    let mut v: Vec<f64> = (0..cols).map(|j| 1.0 + (j as f64 * 0.37).sin()).collect();
    let mut sigma = 0.0;
    for _ in 0..2000 {
        let av: Vec<f64> = (0..rows).map(|i| (0..cols).map(|j| a[i * cols + j] * v[j]).sum()).collect();
        let mut atav: Vec<f64> = (0..cols).map(|j| (0..rows).map(|i| a[i * cols + j] * av[i]).sum()).collect();
        let norm = atav.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        atav.iter_mut().for_each(|x| *x /= norm);
        let next = norm.sqrt();
        v = atav;
        if (next - sigma).abs() <= 1e-15 * next {
            sigma = next;
            break;
        }
        sigma = next;
    }
    sigma
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}
