//! Layer kernels. Every convolution is lowered to a matrix product.

use crate::grid::Tensor;
use crate::scalar::{gemm, MatRef, Scalar};

/// Unfolds a 3x3 zero-padded neighbourhood: row `ci * 9 + ky * 3 + kx`,
/// column `y * w + x` holds `input[ci, y + ky - 1, x + kx - 1]`.
fn im2col<T: Scalar>(input: &Tensor<T>, col: &mut Vec<T>) {
    let (c, h, w) = input.shape();
    let plane = h * w;
    col.clear();
    col.resize(c * 9 * plane, T::zero());
    for ci in 0..c {
        let src = input.channel(ci);
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &mut col[(ci * 9 + ky * 3 + kx) * plane..][..plane];
                let (y0, y1) = (1usize.saturating_sub(ky), (h + 1 - ky).min(h));
                let (x0, x1) = (1usize.saturating_sub(kx), (w + 1 - kx).min(w));
                for y in y0..y1 {
                    let sy = y + ky - 1;
                    let dst = &mut row[y * w + x0..y * w + x1];
                    let s = &src[sy * w + x0 + kx - 1..sy * w + x1 + kx - 1];
                    dst.copy_from_slice(s);
                }
            }
        }
    }
}

/// Inverse of [`im2col`], accumulating overlapping contributions.
fn col2im<T: Scalar>(col: &[T], out: &mut Tensor<T>) {
    let (c, h, w) = out.shape();
    let plane = h * w;
    for ci in 0..c {
        let dst = out.channel_mut(ci);
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &col[(ci * 9 + ky * 3 + kx) * plane..][..plane];
                let (y0, y1) = (1usize.saturating_sub(ky), (h + 1 - ky).min(h));
                let (x0, x1) = (1usize.saturating_sub(kx), (w + 1 - kx).min(w));
                for y in y0..y1 {
                    let sy = y + ky - 1;
                    let src = &row[y * w + x0..y * w + x1];
                    let d = &mut dst[sy * w + x0 + kx - 1..sy * w + x1 + kx - 1];
                    for (a, b) in d.iter_mut().zip(src) {
                        *a += *b;
                    }
                }
            }
        }
    }
}

fn add_bias<T: Scalar>(out: &mut Tensor<T>, bias: &[T]) {
    for (c, &b) in bias.iter().enumerate() {
        for v in out.channel_mut(c) {
            *v += b;
        }
    }
}

fn accumulate_bias_grad<T: Scalar>(dy: &Tensor<T>, db: &mut [T]) {
    for (c, g) in db.iter_mut().enumerate() {
        *g += dy.channel(c).iter().copied().sum::<T>();
    }
}

/// Same-size 3x3 convolution. `weight` is `[cout, cin, 3, 3]`.
pub fn conv3x3<T: Scalar>(input: &Tensor<T>, weight: &[T], bias: &[T], scratch: &mut Vec<T>) -> Tensor<T> {
    let cout = bias.len();
    let k = input.channels * 9;
    im2col(input, scratch);
    let mut out = Tensor::zeros(cout, input.height, input.width);
    let plane = input.plane();
    gemm(MatRef::row_major(weight, cout, k), MatRef::row_major(scratch, k, plane), T::zero(), &mut out.data);
    add_bias(&mut out, bias);
    out
}

/// Backward pass of [`conv3x3`]. Accumulates into `dw`/`db` and returns the
/// input gradient when `need_input_grad`.
pub fn conv3x3_backward<T: Scalar>(
    input: &Tensor<T>,
    weight: &[T],
    dy: &Tensor<T>,
    dw: &mut [T],
    db: &mut [T],
    need_input_grad: bool,
    scratch: &mut Vec<T>,
) -> Option<Tensor<T>> {
    let cout = dy.channels;
    let k = input.channels * 9;
    let plane = input.plane();
    im2col(input, scratch);
    let dy_m = MatRef::row_major(&dy.data, cout, plane);
    gemm(dy_m, MatRef::row_major(scratch, k, plane).t(), T::one(), dw);
    accumulate_bias_grad(dy, db);
    if !need_input_grad {
        return None;
    }
    gemm(MatRef::row_major(weight, cout, k).t(), dy_m, T::zero(), scratch);
    let mut dx = Tensor::zeros(input.channels, input.height, input.width);
    col2im(scratch, &mut dx);
    Some(dx)
}

pub fn relu_in_place<T: Scalar>(t: &mut Tensor<T>) {
    for v in &mut t.data {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
}

/// Zeroes gradient entries where the activation was clipped.
pub fn relu_backward<T: Scalar>(activation: &Tensor<T>, grad: &mut Tensor<T>) {
    for (g, &a) in grad.data.iter_mut().zip(&activation.data) {
        if a <= T::zero() {
            *g = T::zero();
        }
    }
}

/// 2x2 stride-2 max pooling. Also returns which of the four inputs won
/// (first maximum on ties).
pub fn maxpool2<T: Scalar>(input: &Tensor<T>) -> (Tensor<T>, Vec<u8>) {
    let (c, h, w) = input.shape();
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Tensor::zeros(c, oh, ow);
    let mut arg = vec![0u8; c * oh * ow];
    for ch in 0..c {
        let src = input.channel(ch);
        for y in 0..oh {
            for x in 0..ow {
                let cand = [
                    src[2 * y * w + 2 * x],
                    src[2 * y * w + 2 * x + 1],
                    src[(2 * y + 1) * w + 2 * x],
                    src[(2 * y + 1) * w + 2 * x + 1],
                ];
                let mut best = 0;
                for i in 1..4 {
                    if cand[i] > cand[best] {
                        best = i;
                    }
                }
                let o = (ch * oh + y) * ow + x;
                out.data[o] = cand[best];
                arg[o] = best as u8;
            }
        }
    }
    (out, arg)
}

/// Routes pooled gradients back to the winning inputs, adding into `dx`.
pub fn maxpool2_backward<T: Scalar>(dy: &Tensor<T>, arg: &[u8], dx: &mut Tensor<T>) {
    let (c, oh, ow) = dy.shape();
    let w = dx.width;
    for ch in 0..c {
        for y in 0..oh {
            for x in 0..ow {
                let o = (ch * oh + y) * ow + x;
                let a = arg[o] as usize;
                let (iy, ix) = (2 * y + a / 2, 2 * x + a % 2);
                dx.data[(ch * dx.height + iy) * w + ix] += dy.data[o];
            }
        }
    }
}

/// 2x2 stride-2 transposed convolution doubling the resolution.
/// `weight` is `[cin, cout, 2, 2]`.
pub fn upconv2<T: Scalar>(input: &Tensor<T>, weight: &[T], bias: &[T], scratch: &mut Vec<T>) -> Tensor<T> {
    let (cin, h, w) = input.shape();
    let cout = bias.len();
    let plane = h * w;
    scratch.clear();
    scratch.resize(cout * 4 * plane, T::zero());
    gemm(
        MatRef::row_major(weight, cin, cout * 4).t(),
        MatRef::row_major(&input.data, cin, plane),
        T::zero(),
        scratch,
    );
    let mut out = Tensor::zeros(cout, 2 * h, 2 * w);
    let ow = 2 * w;
    for co in 0..cout {
        let dst = out.channel_mut(co);
        for k in 0..4 {
            let (dy, dx) = (k / 2, k % 2);
            let src = &scratch[(co * 4 + k) * plane..][..plane];
            for y in 0..h {
                for x in 0..w {
                    dst[(2 * y + dy) * ow + 2 * x + dx] = src[y * w + x];
                }
            }
        }
    }
    add_bias(&mut out, bias);
    out
}

pub fn upconv2_backward<T: Scalar>(
    input: &Tensor<T>,
    weight: &[T],
    dy: &Tensor<T>,
    dw: &mut [T],
    db: &mut [T],
    scratch: &mut Vec<T>,
) -> Tensor<T> {
    let (cin, h, w) = input.shape();
    let cout = dy.channels;
    let plane = h * w;
    let ow = 2 * w;
    scratch.clear();
    scratch.resize(cout * 4 * plane, T::zero());
    for co in 0..cout {
        let src = dy.channel(co);
        for k in 0..4 {
            let (ky, kx) = (k / 2, k % 2);
            let dst = &mut scratch[(co * 4 + k) * plane..][..plane];
            for y in 0..h {
                for x in 0..w {
                    dst[y * w + x] = src[(2 * y + ky) * ow + 2 * x + kx];
                }
            }
        }
    }
    accumulate_bias_grad(dy, db);
    let gathered = MatRef::row_major(&scratch[..], cout * 4, plane);
    gemm(MatRef::row_major(&input.data, cin, plane), gathered.t(), T::one(), dw);
    let mut dx = Tensor::zeros(cin, h, w);
    gemm(MatRef::row_major(weight, cin, cout * 4), gathered, T::zero(), &mut dx.data);
    dx
}

/// Pointwise convolution. `weight` is `[cout, cin]`.
pub fn conv1x1<T: Scalar>(input: &Tensor<T>, weight: &[T], bias: &[T]) -> Tensor<T> {
    let cout = bias.len();
    let mut out = Tensor::zeros(cout, input.height, input.width);
    gemm(
        MatRef::row_major(weight, cout, input.channels),
        MatRef::row_major(&input.data, input.channels, input.plane()),
        T::zero(),
        &mut out.data,
    );
    add_bias(&mut out, bias);
    out
}

pub fn conv1x1_backward<T: Scalar>(
    input: &Tensor<T>,
    weight: &[T],
    dy: &Tensor<T>,
    dw: &mut [T],
    db: &mut [T],
) -> Tensor<T> {
    let (cin, plane) = (input.channels, input.plane());
    let dy_m = MatRef::row_major(&dy.data, dy.channels, plane);
    gemm(dy_m, MatRef::row_major(&input.data, cin, plane).t(), T::one(), dw);
    accumulate_bias_grad(dy, db);
    let mut dx = Tensor::zeros(cin, input.height, input.width);
    gemm(MatRef::row_major(weight, dy.channels, cin).t(), dy_m, T::zero(), &mut dx.data);
    dx
}
