//! Direct 1-D convolution kernels.
//!
//! The three kernels form a closed family: the forward convolution
//! `y = x * w`, its adjoint with respect to the input (which is also the
//! transposed convolution), and its adjoint with respect to the weights.
//! Each is bilinear, and the adjoints of each are again members of the
//! family, which is what lets the autodiff layer differentiate through
//! gradients.

use serde::{Deserialize, Serialize};

use crate::tensor::Tensor;

/// Stride, zero padding and kernel width of a 1-D convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvGeometry {
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

impl ConvGeometry {
    pub fn new(kernel: usize, stride: usize, padding: usize) -> Self {
        assert!(kernel > 0 && stride > 0, "kernel and stride must be positive");
        ConvGeometry {
            kernel,
            stride,
            padding,
        }
    }

    /// Output length of the forward convolution for an input of `len`.
    pub fn output_len(&self, len: usize) -> usize {
        let padded = len + 2 * self.padding;
        assert!(
            padded >= self.kernel,
            "input of length {len} too short for kernel {}",
            self.kernel
        );
        (padded - self.kernel) / self.stride + 1
    }

    /// Range of output positions `t` for which `t * stride + k - padding`
    /// lands inside an input of length `in_len`.
    #[inline]
    fn valid_range(&self, k: usize, in_len: usize, out_len: usize) -> (usize, usize) {
        let s = self.stride;
        let lo = if k >= self.padding {
            0
        } else {
            (self.padding - k).div_ceil(s)
        };
        // largest t with t*s + k - p <= in_len - 1
        let top = in_len + self.padding;
        let hi = if top <= k { 0 } else { ((top - 1 - k) / s + 1).min(out_len) };
        (lo, hi.max(lo))
    }
}

/// `y[co, t] = sum_{ci, k} w[co, ci, k] * x[ci, t*s + k - p]`.
pub fn forward(x: &Tensor, w: &Tensor, geom: ConvGeometry) -> Tensor {
    let (ci_n, in_len) = dims2(x);
    let (co_n, wci, kw) = dims3(w);
    assert_eq!(ci_n, wci, "conv input has {ci_n} channels, weight expects {wci}");
    assert_eq!(kw, geom.kernel);
    let out_len = geom.output_len(in_len);
    let mut y = vec![0.0; co_n * out_len];
    let xd = x.data();
    let wd = w.data();
    let s = geom.stride;
    for co in 0..co_n {
        let yrow = &mut y[co * out_len..(co + 1) * out_len];
        for ci in 0..ci_n {
            let xrow = &xd[ci * in_len..(ci + 1) * in_len];
            let wrow = &wd[(co * ci_n + ci) * kw..(co * ci_n + ci + 1) * kw];
            for (k, &wk) in wrow.iter().enumerate() {
                let (lo, hi) = geom.valid_range(k, in_len, out_len);
                if lo >= hi {
                    continue;
                }
                let start = lo * s + k - geom.padding;
                if s == 1 {
                    let xs = &xrow[start..start + (hi - lo)];
                    for (yv, &xv) in yrow[lo..hi].iter_mut().zip(xs) {
                        *yv += wk * xv;
                    }
                } else {
                    for (j, yv) in yrow[lo..hi].iter_mut().enumerate() {
                        *yv += wk * xrow[start + j * s];
                    }
                }
            }
        }
    }
    Tensor::new(vec![co_n, out_len], y)
}

/// Adjoint of [`forward`] with respect to `x`: scatters `g` (shape
/// `[co, out_len]`) back onto an input of length `in_len`. With a weight laid
/// out as `[in, out, kernel]` this is the transposed convolution.
pub fn input_grad(g: &Tensor, w: &Tensor, geom: ConvGeometry, in_len: usize) -> Tensor {
    let (co_n, out_len) = dims2(g);
    let (wco, ci_n, kw) = dims3(w);
    assert_eq!(co_n, wco, "gradient has {co_n} channels, weight expects {wco}");
    assert_eq!(kw, geom.kernel);
    let mut dx = vec![0.0; ci_n * in_len];
    let gd = g.data();
    let wd = w.data();
    let s = geom.stride;
    for co in 0..co_n {
        let grow = &gd[co * out_len..(co + 1) * out_len];
        for ci in 0..ci_n {
            let xrow = &mut dx[ci * in_len..(ci + 1) * in_len];
            let wrow = &wd[(co * ci_n + ci) * kw..(co * ci_n + ci + 1) * kw];
            for (k, &wk) in wrow.iter().enumerate() {
                let (lo, hi) = geom.valid_range(k, in_len, out_len);
                if lo >= hi {
                    continue;
                }
                let start = lo * s + k - geom.padding;
                if s == 1 {
                    let xs = &mut xrow[start..start + (hi - lo)];
                    for (xv, &gv) in xs.iter_mut().zip(&grow[lo..hi]) {
                        *xv += wk * gv;
                    }
                } else {
                    for (j, &gv) in grow[lo..hi].iter().enumerate() {
                        xrow[start + j * s] += wk * gv;
                    }
                }
            }
        }
    }
    Tensor::new(vec![ci_n, in_len], dx)
}

/// Adjoint of [`forward`] with respect to `w`:
/// `dw[co, ci, k] = sum_t g[co, t] * x[ci, t*s + k - p]`.
pub fn weight_grad(x: &Tensor, g: &Tensor, geom: ConvGeometry) -> Tensor {
    let (ci_n, in_len) = dims2(x);
    let (co_n, out_len) = dims2(g);
    assert_eq!(out_len, geom.output_len(in_len), "gradient length mismatch");
    let kw = geom.kernel;
    let mut dw = vec![0.0; co_n * ci_n * kw];
    let xd = x.data();
    let gd = g.data();
    let s = geom.stride;
    for co in 0..co_n {
        let grow = &gd[co * out_len..(co + 1) * out_len];
        for ci in 0..ci_n {
            let xrow = &xd[ci * in_len..(ci + 1) * in_len];
            for k in 0..kw {
                let (lo, hi) = geom.valid_range(k, in_len, out_len);
                if lo >= hi {
                    continue;
                }
                let start = lo * s + k - geom.padding;
                let acc: f64 = if s == 1 {
                    grow[lo..hi]
                        .iter()
                        .zip(&xrow[start..start + (hi - lo)])
                        .map(|(a, b)| a * b)
                        .sum()
                } else {
                    grow[lo..hi]
                        .iter()
                        .enumerate()
                        .map(|(j, gv)| gv * xrow[start + j * s])
                        .sum()
                };
                dw[(co * ci_n + ci) * kw + k] = acc;
            }
        }
    }
    Tensor::new(vec![co_n, ci_n, kw], dw)
}

fn dims2(t: &Tensor) -> (usize, usize) {
    match t.shape() {
        [a, b] => (*a, *b),
        s => panic!("expected a [channels, length] tensor, got {s:?}"),
    }
}

fn dims3(t: &Tensor) -> (usize, usize, usize) {
    match t.shape() {
        [a, b, c] => (*a, *b, *c),
        s => panic!("expected a [out, in, kernel] tensor, got {s:?}"),
    }
}
