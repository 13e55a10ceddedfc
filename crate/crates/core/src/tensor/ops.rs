//! Raw numeric kernels shared by the graph's forward and backward passes.

use super::Tensor;
use crate::{Error, Result};

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Geometry of a "same" convolution, validated once per call.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvDims {
    pub c_in: usize,
    pub c_out: usize,
    pub h: usize,
    pub w: usize,
    pub k: usize,
}

impl ConvDims {
    pub fn check(input: &[usize], kernel: &[usize], bias: Option<&[usize]>) -> Result<Self> {
        let [c_in, h, w] = *input else {
            return Err(Error::shape(format!(
                "conv input must be [C, H, W], got {input:?}"
            )));
        };
        let [c_out, kc, k, k2] = *kernel else {
            return Err(Error::shape(format!(
                "conv kernel must be [C_out, C_in, k, k], got {kernel:?}"
            )));
        };
        if k != k2 {
            return Err(Error::shape(format!("kernel must be square, got {k}x{k2}")));
        }
        if k % 2 == 0 {
            return Err(Error::invalid(format!("kernel size must be odd, got {k}")));
        }
        if kc != c_in {
            return Err(Error::shape(format!(
                "kernel expects {kc} input channels, input has {c_in}"
            )));
        }
        if let Some(b) = bias {
            if b != [c_out] {
                return Err(Error::shape(format!(
                    "bias must be [{c_out}], got {b:?}"
                )));
            }
        }
        Ok(Self { c_in, c_out, h, w, k })
    }

    /// For kernel offset `d` (0..k), the output range whose source index
    /// `o + d - pad` stays in bounds, over an axis of length `len`.
    #[inline]
    fn valid(&self, d: usize, len: usize) -> (usize, usize) {
        let pad = self.k / 2;
        let lo = pad.saturating_sub(d);
        let hi = (len + pad).saturating_sub(d).min(len);
        (lo, hi.max(lo))
    }
}

pub(crate) fn conv_forward(dims: ConvDims, input: &[f64], kernel: &[f64], bias: Option<&[f64]>) -> Vec<f64> {
    let ConvDims { c_in, c_out, h, w, k } = dims;
    let pad = k / 2;
    let plane = h * w;
    let mut out = vec![0.0; c_out * plane];
    for o in 0..c_out {
        let out_plane = &mut out[o * plane..(o + 1) * plane];
        if let Some(b) = bias {
            out_plane.fill(b[o]);
        }
        for c in 0..c_in {
            let in_plane = &input[c * plane..(c + 1) * plane];
            for dy in 0..k {
                let (y_lo, y_hi) = dims.valid(dy, h);
                for dx in 0..k {
                    let wgt = kernel[((o * c_in + c) * k + dy) * k + dx];
                    if wgt == 0.0 {
                        continue;
                    }
                    let (x_lo, x_hi) = dims.valid(dx, w);
                    for y in y_lo..y_hi {
                        let sy = y + dy - pad;
                        let src = &in_plane[sy * w + x_lo + dx - pad..sy * w + x_hi + dx - pad];
                        let dst = &mut out_plane[y * w + x_lo..y * w + x_hi];
                        for (d, s) in dst.iter_mut().zip(src) {
                            *d += wgt * s;
                        }
                    }
                }
            }
        }
    }
    out
}

/// Accumulates input, kernel and bias gradients of a "same" convolution.
pub(crate) fn conv_backward(
    dims: ConvDims,
    input: &[f64],
    kernel: &[f64],
    grad_out: &[f64],
    grad_input: Option<&mut [f64]>,
    grad_kernel: Option<&mut [f64]>,
    grad_bias: Option<&mut [f64]>,
) {
    let ConvDims { c_in, c_out, h, w, k } = dims;
    let pad = k / 2;
    let plane = h * w;
    if let Some(gb) = grad_bias {
        for o in 0..c_out {
            gb[o] += grad_out[o * plane..(o + 1) * plane].iter().sum::<f64>();
        }
    }
    if let Some(gk) = grad_kernel {
        for o in 0..c_out {
            let g_plane = &grad_out[o * plane..(o + 1) * plane];
            for c in 0..c_in {
                let in_plane = &input[c * plane..(c + 1) * plane];
                for dy in 0..k {
                    let (y_lo, y_hi) = dims.valid(dy, h);
                    for dx in 0..k {
                        let (x_lo, x_hi) = dims.valid(dx, w);
                        let mut acc = 0.0;
                        for y in y_lo..y_hi {
                            let sy = y + dy - pad;
                            let src = &in_plane[sy * w + x_lo + dx - pad..sy * w + x_hi + dx - pad];
                            let g = &g_plane[y * w + x_lo..y * w + x_hi];
                            acc += g.iter().zip(src).map(|(a, b)| a * b).sum::<f64>();
                        }
                        gk[((o * c_in + c) * k + dy) * k + dx] += acc;
                    }
                }
            }
        }
    }
    if let Some(gi) = grad_input {
        for o in 0..c_out {
            let g_plane = &grad_out[o * plane..(o + 1) * plane];
            for c in 0..c_in {
                let gi_plane = &mut gi[c * plane..(c + 1) * plane];
                for dy in 0..k {
                    let (y_lo, y_hi) = dims.valid(dy, h);
                    for dx in 0..k {
                        let wgt = kernel[((o * c_in + c) * k + dy) * k + dx];
                        if wgt == 0.0 {
                            continue;
                        }
                        let (x_lo, x_hi) = dims.valid(dx, w);
                        for y in y_lo..y_hi {
                            let sy = y + dy - pad;
                            let dst = &mut gi_plane[sy * w + x_lo + dx - pad..sy * w + x_hi + dx - pad];
                            let g = &g_plane[y * w + x_lo..y * w + x_hi];
                            for (d, s) in dst.iter_mut().zip(g) {
                                *d += wgt * s;
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Stand-alone "same" convolution with zero padding:
/// `out[o,y,x] = bias[o] + Σ kernel[o,c,dy,dx] · padded[c, y+dy, x+dx]`.
pub fn conv2d_same(input: &Tensor, kernel: &Tensor, bias: Option<&Tensor>) -> Result<Tensor> {
    let dims = ConvDims::check(input.shape(), kernel.shape(), bias.map(|b| b.shape()))?;
    let out = conv_forward(dims, input.data(), kernel.data(), bias.map(|b| b.data()));
    Tensor::new(&[dims.c_out, dims.h, dims.w], out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Direct summation over an explicitly zero-padded copy of the input.
    fn conv_oracle(input: &Tensor, kernel: &Tensor, bias: &[f64]) -> Vec<f64> {
        let [c_in, h, w] = input.shape().try_into().unwrap();
        let [c_out, _, k, _] = kernel.shape().try_into().unwrap();
        let p = k / 2;
        let (ph, pw) = (h + 2 * p, w + 2 * p);
        let mut padded = vec![0.0; c_in * ph * pw];
        for c in 0..c_in {
            for y in 0..h {
                for x in 0..w {
                    padded[(c * ph + y + p) * pw + x + p] = input.data()[(c * h + y) * w + x];
                }
            }
        }
        let mut out = vec![0.0; c_out * h * w];
        for o in 0..c_out {
            for y in 0..h {
                for x in 0..w {
                    let mut s = bias[o];
                    for c in 0..c_in {
                        for dy in 0..k {
                            for dx in 0..k {
                                s += kernel.data()[((o * c_in + c) * k + dy) * k + dx]
                                    * padded[(c * ph + y + dy) * pw + x + dx];
                            }
                        }
                    }
                    out[(o * h + y) * w + x] = s;
                }
            }
        }
        out
    }

    #[test]
    fn identity_kernel_preserves_input() {
        let x = Tensor::new(&[1, 2, 3], vec![1., 2., 3., 4., 5., 6.]).unwrap();
        let k = Tensor::new(&[1, 1, 1, 1], vec![1.0]).unwrap();
        assert_eq!(conv2d_same(&x, &k, None).unwrap(), x);
    }

    #[test]
    fn ones_kernel_on_two_by_two() {
        let x = Tensor::new(&[1, 2, 2], vec![1., 2., 3., 4.]).unwrap();
        let k = Tensor::full(&[1, 1, 3, 3], 1.0);
        let b = Tensor::zeros(&[1]);
        let out = conv2d_same(&x, &k, Some(&b)).unwrap();
        assert_eq!(out.data(), conv_oracle(&x, &k, &[0.0]).as_slice());
        assert_eq!(out.data(), &[10., 10., 10., 10.]);
    }

    #[test]
    fn zero_kernel_yields_bias() {
        let x = Tensor::new(&[2, 3, 3], (0..18).map(|v| v as f64).collect()).unwrap();
        let k = Tensor::zeros(&[2, 2, 3, 3]);
        let b = Tensor::from_vec(vec![0.7, -1.5]);
        let out = conv2d_same(&x, &k, Some(&b)).unwrap();
        assert!(out.data()[..9].iter().all(|v| *v == 0.7));
        assert!(out.data()[9..].iter().all(|v| *v == -1.5));
    }

    #[test]
    fn even_kernel_and_channel_mismatch_fail() {
        let x = Tensor::zeros(&[1, 3, 3]);
        assert!(conv2d_same(&x, &Tensor::zeros(&[1, 1, 2, 2]), None).is_err());
        assert!(conv2d_same(&x, &Tensor::zeros(&[1, 2, 3, 3]), None).is_err());
        assert!(conv2d_same(&x, &Tensor::zeros(&[2, 1, 3, 3]), Some(&Tensor::zeros(&[1]))).is_err());
    }

    #[test]
    fn softplus_and_sigmoid_are_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((softplus(0.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(softplus(1000.0), 1000.0);
        assert!(softplus(-1000.0) >= 0.0);
        assert!(sigmoid(-800.0).is_finite() && sigmoid(800.0) == 1.0);
    }

    fn tensor_strategy(shape: Vec<usize>) -> impl Strategy<Value = Tensor> {
        let len: usize = shape.iter().product();
        proptest::collection::vec(-2.0f64..2.0, len)
            .prop_map(move |d| Tensor::new(&shape, d).unwrap())
    }

    proptest! {
        #[test]
        fn matches_direct_summation(
            x in tensor_strategy(vec![2, 4, 5]),
            k in tensor_strategy(vec![3, 2, 3, 3]),
            b in proptest::collection::vec(-1.0f64..1.0, 3),
        ) {
            let out = conv2d_same(&x, &k, Some(&Tensor::from_vec(b.clone()))).unwrap();
            let oracle = conv_oracle(&x, &k, &b);
            for (a, e) in out.data().iter().zip(&oracle) {
                prop_assert!((a - e).abs() < 1e-12);
            }
        }

        #[test]
        fn linear_in_input_and_kernel(
            x in tensor_strategy(vec![2, 4, 4]),
            y in tensor_strategy(vec![2, 4, 4]),
            k in tensor_strategy(vec![2, 2, 3, 3]),
            k2 in tensor_strategy(vec![2, 2, 3, 3]),
            alpha in -3.0f64..3.0,
            beta in -3.0f64..3.0,
        ) {
            let combo = |a: &Tensor, b: &Tensor| {
                Tensor::new(a.shape(), a.data().iter().zip(b.data()).map(|(p, q)| alpha * p + beta * q).collect()).unwrap()
            };
            let lhs = conv2d_same(&combo(&x, &y), &k, None).unwrap();
            let cx = conv2d_same(&x, &k, None).unwrap();
            let cy = conv2d_same(&y, &k, None).unwrap();
            let rhs = combo(&cx, &cy);
            for (a, e) in lhs.data().iter().zip(rhs.data()) {
                prop_assert!((a - e).abs() < 1e-10);
            }
            let lhs = conv2d_same(&x, &combo(&k, &k2), None).unwrap();
            let rhs = combo(&conv2d_same(&x, &k, None).unwrap(), &conv2d_same(&x, &k2, None).unwrap());
            for (a, e) in lhs.data().iter().zip(rhs.data()) {
                prop_assert!((a - e).abs() < 1e-10);
            }
        }
    }
}
