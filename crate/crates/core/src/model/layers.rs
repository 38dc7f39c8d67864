//! Forward and backward kernels for the three layer kinds. Forward passes
//! return the intermediates their backward pass needs.

use super::config::KERNEL_SIZE;
use super::params::{ConvParams, DenseParams, LstmParams};
use super::tensor::Real;

pub(crate) fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

pub(crate) fn relu_in_place<T: Real>(v: &mut [T]) {
    for x in v {
        if *x < T::zero() {
            *x = T::zero();
        }
    }
}

/// Zeroes `grad` wherever the pre-activation was not positive.
pub(crate) fn relu_backward_in_place<T: Real>(grad: &mut [T], pre: &[T]) {
    for (g, &p) in grad.iter_mut().zip(pre) {
        if p <= T::zero() {
            *g = T::zero();
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct LstmStep<T> {
    h_prev: Vec<T>,
    c_prev: Vec<T>,
    /// Activated gates: input, forget, candidate, output.
    gates: Vec<T>,
    tanh_c: Vec<T>,
}

/// Runs one direction over `xs` in the given order from zero state.
pub(crate) fn lstm_forward<T: Real>(p: &LstmParams<T>, xs: &[&[T]]) -> (Vec<T>, Vec<LstmStep<T>>) {
    let units = p.w_hidden.shape()[1];
    let embed = p.w_input.shape()[1];
    let (w_in, w_h, bias) = (p.w_input.data(), p.w_hidden.data(), p.bias.data());
    let mut h = vec![T::zero(); units];
    let mut c = vec![T::zero(); units];
    let mut steps = Vec::with_capacity(xs.len());
    for x in xs {
        let mut z = bias.to_vec();
        for (r, zr) in z.iter_mut().enumerate() {
            let wr = &w_in[r * embed..(r + 1) * embed];
            let ur = &w_h[r * units..(r + 1) * units];
            let mut s = *zr;
            for (w, v) in wr.iter().zip(x.iter()) {
                s += *w * *v;
            }
            for (u, v) in ur.iter().zip(&h) {
                s += *u * *v;
            }
            *zr = s;
        }
        let mut gates = z;
        let mut c_new = vec![T::zero(); units];
        let mut tanh_c = vec![T::zero(); units];
        let mut h_new = vec![T::zero(); units];
        for j in 0..units {
            let i = sigmoid(gates[j]);
            let f = sigmoid(gates[units + j]);
            let g = gates[2 * units + j].tanh();
            let o = sigmoid(gates[3 * units + j]);
            gates[j] = i;
            gates[units + j] = f;
            gates[2 * units + j] = g;
            gates[3 * units + j] = o;
            c_new[j] = f * c[j] + i * g;
            tanh_c[j] = c_new[j].tanh();
            h_new[j] = o * tanh_c[j];
        }
        steps.push(LstmStep {
            h_prev: std::mem::replace(&mut h, h_new),
            c_prev: std::mem::replace(&mut c, c_new),
            gates,
            tanh_c,
        });
    }
    (h, steps)
}

/// Backpropagates `dh_final` through time. Returns the gradient for each
/// input in `xs` order.
pub(crate) fn lstm_backward<T: Real>(
    p: &LstmParams<T>,
    grad: &mut LstmParams<T>,
    xs: &[&[T]],
    steps: &[LstmStep<T>],
    dh_final: &[T],
) -> Vec<Vec<T>> {
    let units = p.w_hidden.shape()[1];
    let embed = p.w_input.shape()[1];
    let (w_in, w_h) = (p.w_input.data(), p.w_hidden.data());
    let mut dh = dh_final.to_vec();
    let mut dc = vec![T::zero(); units];
    let mut dxs = vec![Vec::new(); xs.len()];
    let mut dz = vec![T::zero(); 4 * units];
    let one = T::one();
    for t in (0..steps.len()).rev() {
        let s = &steps[t];
        for j in 0..units {
            let i = s.gates[j];
            let f = s.gates[units + j];
            let g = s.gates[2 * units + j];
            let o = s.gates[3 * units + j];
            let tc = s.tanh_c[j];
            let d_o = dh[j] * tc;
            let dcj = dc[j] + dh[j] * o * (one - tc * tc);
            dz[j] = dcj * g * i * (one - i);
            dz[units + j] = dcj * s.c_prev[j] * f * (one - f);
            dz[2 * units + j] = dcj * i * (one - g * g);
            dz[3 * units + j] = d_o * o * (one - o);
            dc[j] = dcj * f;
        }
        let x = xs[t];
        let mut dx = vec![T::zero(); embed];
        let mut dh_prev = vec![T::zero(); units];
        {
            let gw_in = grad.w_input.data_mut();
            for (r, &d) in dz.iter().enumerate() {
                let row = &mut gw_in[r * embed..(r + 1) * embed];
                for (gw, &v) in row.iter_mut().zip(x.iter()) {
                    *gw += d * v;
                }
                let wr = &w_in[r * embed..(r + 1) * embed];
                for (acc, &w) in dx.iter_mut().zip(wr) {
                    *acc += w * d;
                }
            }
        }
        {
            let gw_h = grad.w_hidden.data_mut();
            for (r, &d) in dz.iter().enumerate() {
                let row = &mut gw_h[r * units..(r + 1) * units];
                for (gu, &v) in row.iter_mut().zip(&s.h_prev) {
                    *gu += d * v;
                }
                let ur = &w_h[r * units..(r + 1) * units];
                for (acc, &u) in dh_prev.iter_mut().zip(ur) {
                    *acc += u * d;
                }
            }
        }
        for (gb, &d) in grad.bias.data_mut().iter_mut().zip(&dz) {
            *gb += d;
        }
        dxs[t] = dx;
        dh = dh_prev;
    }
    dxs
}

/// Intermediates of one conv + ReLU + max-pool stage.
#[derive(Debug, Clone)]
pub(crate) struct ConvTrace<T> {
    input: Vec<T>,
    side: usize,
    pre: Vec<T>,
    /// For each pooled cell, the index into `pre` it was taken from.
    argmax: Vec<usize>,
}

/// 3x3 same-padded convolution, ReLU, then 2x2 max-pool (odd edges dropped).
/// Layout is height x width x channel.
pub(crate) fn conv_forward<T: Real>(p: &ConvParams<T>, input: Vec<T>, side: usize) -> (Vec<T>, ConvTrace<T>) {
    let (c_in, c_out) = (p.kernel.shape()[2], p.kernel.shape()[3]);
    let kernel = p.kernel.data();
    let bias = p.bias.data();
    let mut pre = vec![T::zero(); side * side * c_out];
    for y in 0..side {
        for x in 0..side {
            let out = &mut pre[(y * side + x) * c_out..(y * side + x + 1) * c_out];
            out.copy_from_slice(bias);
            for ky in 0..KERNEL_SIZE {
                let Some(iy) = (y + ky).checked_sub(1).filter(|&v| v < side) else { continue };
                for kx in 0..KERNEL_SIZE {
                    let Some(ix) = (x + kx).checked_sub(1).filter(|&v| v < side) else { continue };
                    let pix = &input[(iy * side + ix) * c_in..(iy * side + ix + 1) * c_in];
                    let base = (ky * KERNEL_SIZE + kx) * c_in;
                    for (ci, &v) in pix.iter().enumerate() {
                        if v == T::zero() {
                            continue;
                        }
                        let w = &kernel[(base + ci) * c_out..(base + ci + 1) * c_out];
                        for (o, &wv) in out.iter_mut().zip(w) {
                            *o += v * wv;
                        }
                    }
                }
            }
        }
    }
    let pooled_side = side / 2;
    let mut pooled = vec![T::zero(); pooled_side * pooled_side * c_out];
    let mut argmax = vec![0usize; pooled.len()];
    for py in 0..pooled_side {
        for px in 0..pooled_side {
            for co in 0..c_out {
                let mut best_idx = ((2 * py) * side + 2 * px) * c_out + co;
                let mut best = pre[best_idx].max(T::zero());
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let idx = ((2 * py + dy) * side + 2 * px + dx) * c_out + co;
                    let v = pre[idx].max(T::zero());
                    if v > best {
                        best = v;
                        best_idx = idx;
                    }
                }
                let o = (py * pooled_side + px) * c_out + co;
                pooled[o] = best;
                argmax[o] = best_idx;
            }
        }
    }
    (
        pooled,
        ConvTrace {
            input,
            side,
            pre,
            argmax,
        },
    )
}

/// Returns the input gradient when `want_input_grad` is set.
pub(crate) fn conv_backward<T: Real>(
    p: &ConvParams<T>,
    grad: &mut ConvParams<T>,
    trace: &ConvTrace<T>,
    d_pooled: &[T],
    want_input_grad: bool,
) -> Option<Vec<T>> {
    let (c_in, c_out) = (p.kernel.shape()[2], p.kernel.shape()[3]);
    let side = trace.side;
    let mut d_pre = vec![T::zero(); trace.pre.len()];
    for (&idx, &d) in trace.argmax.iter().zip(d_pooled) {
        if trace.pre[idx] > T::zero() {
            d_pre[idx] += d;
        }
    }
    let kernel = p.kernel.data();
    let mut d_input = want_input_grad.then(|| vec![T::zero(); trace.input.len()]);
    let g_bias = grad.bias.data_mut();
    for cell in d_pre.chunks(c_out) {
        for (gb, &d) in g_bias.iter_mut().zip(cell) {
            *gb += d;
        }
    }
    let g_kernel = grad.kernel.data_mut();
    for y in 0..side {
        for x in 0..side {
            let d = &d_pre[(y * side + x) * c_out..(y * side + x + 1) * c_out];
            if d.iter().all(|v| *v == T::zero()) {
                continue;
            }
            for ky in 0..KERNEL_SIZE {
                let Some(iy) = (y + ky).checked_sub(1).filter(|&v| v < side) else { continue };
                for kx in 0..KERNEL_SIZE {
                    let Some(ix) = (x + kx).checked_sub(1).filter(|&v| v < side) else { continue };
                    let pix_at = (iy * side + ix) * c_in;
                    let base = (ky * KERNEL_SIZE + kx) * c_in;
                    for ci in 0..c_in {
                        let v = trace.input[pix_at + ci];
                        let row = (base + ci) * c_out..(base + ci + 1) * c_out;
                        if v != T::zero() {
                            for (gk, &dv) in g_kernel[row.clone()].iter_mut().zip(d) {
                                *gk += v * dv;
                            }
                        }
                        if let Some(di) = d_input.as_mut() {
                            let mut acc = T::zero();
                            for (&w, &dv) in kernel[row].iter().zip(d) {
                                acc += w * dv;
                            }
                            di[pix_at + ci] += acc;
                        }
                    }
                }
            }
        }
    }
    d_input
}

/// `bias + x W`, without activation.
pub(crate) fn dense_forward<T: Real>(p: &DenseParams<T>, x: &[T]) -> Vec<T> {
    let out_dim = p.weight.shape()[1];
    let w = p.weight.data();
    let mut y = p.bias.data().to_vec();
    for (i, &xi) in x.iter().enumerate() {
        if xi == T::zero() {
            continue;
        }
        for (o, &wv) in y.iter_mut().zip(&w[i * out_dim..(i + 1) * out_dim]) {
            *o += xi * wv;
        }
    }
    y
}

pub(crate) fn dense_backward<T: Real>(p: &DenseParams<T>, grad: &mut DenseParams<T>, x: &[T], dy: &[T]) -> Vec<T> {
    let out_dim = p.weight.shape()[1];
    let w = p.weight.data();
    for (gb, &d) in grad.bias.data_mut().iter_mut().zip(dy) {
        *gb += d;
    }
    let gw = grad.weight.data_mut();
    let mut dx = vec![T::zero(); x.len()];
    for (i, &xi) in x.iter().enumerate() {
        let row = i * out_dim..(i + 1) * out_dim;
        if xi != T::zero() {
            for (g, &d) in gw[row.clone()].iter_mut().zip(dy) {
                *g += xi * d;
            }
        }
        let mut acc = T::zero();
        for (&wv, &d) in w[row].iter().zip(dy) {
            acc += wv * d;
        }
        dx[i] = acc;
    }
    dx
}
