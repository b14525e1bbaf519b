//! Forward and backward kernels on raw tensors.
//!
//! Parallel paths split work so that every output element is still computed
//! by one sequential sum in a fixed order; results do not depend on the
//! number of threads.

use rayon::prelude::*;

use crate::error::{Error, Result};

use super::{Scalar, Tensor};

// Below this many multiply-adds the kernels stay on the calling thread.
const PAR_THRESHOLD: usize = 1 << 18;

#[inline]
pub(crate) fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    let mut acc = S::zero();
    for (&x, &y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

#[inline]
pub(crate) fn axpy<S: Scalar>(alpha: S, x: &[S], y: &mut [S]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn chunks_apply<S, F>(buf: &mut [S], chunk: usize, parallel: bool, f: F)
where
    S: Send,
    F: Fn(usize, &mut [S]) + Sync + Send,
{
    if chunk == 0 {
        return;
    }
    if parallel {
        buf.par_chunks_mut(chunk)
            .enumerate()
            .for_each(|(i, c)| f(i, c));
    } else {
        buf.chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
    }
}

fn dims3<S: Scalar>(t: &Tensor<S>, what: &str) -> Result<(usize, usize, usize)> {
    match *t.shape() {
        [a, b, c] => Ok((a, b, c)),
        ref s => Err(Error::Shape(format!("{what} must be rank 3, got {s:?}"))),
    }
}

fn dims2<S: Scalar>(t: &Tensor<S>, what: &str) -> Result<(usize, usize)> {
    match *t.shape() {
        [a, b] => Ok((a, b)),
        ref s => Err(Error::Shape(format!("{what} must be rank 2, got {s:?}"))),
    }
}

/// `y = x·W + b` for `x: B×I`, `W: I×O`, `b: O`.
pub fn dense_forward<S: Scalar>(x: &Tensor<S>, w: &Tensor<S>, b: &Tensor<S>) -> Result<Tensor<S>> {
    let (batch, inputs) = dims2(x, "dense input")?;
    let (w_in, outputs) = dims2(w, "dense weight")?;
    if w_in != inputs || b.len() != outputs {
        return Err(Error::Shape(format!(
            "dense: x {:?}, W {:?}, b {:?}",
            x.shape(),
            w.shape(),
            b.shape()
        )));
    }
    let (xd, wd) = (x.data(), w.data());
    let mut out = vec![S::zero(); batch * outputs];
    let parallel = batch * inputs * outputs > PAR_THRESHOLD;
    chunks_apply(&mut out, outputs, parallel, |r, row| {
        row.copy_from_slice(b.data());
        for (i, &xv) in xd[r * inputs..(r + 1) * inputs].iter().enumerate() {
            if xv != S::zero() {
                axpy(xv, &wd[i * outputs..(i + 1) * outputs], row);
            }
        }
    });
    Tensor::new([batch, outputs], out)
}

/// Gradients of [`dense_forward`]: `(dx, dW, db)`.
pub(crate) fn dense_backward<S: Scalar>(
    x: &Tensor<S>,
    w: &Tensor<S>,
    dy: &Tensor<S>,
) -> (Tensor<S>, Tensor<S>, Tensor<S>) {
    let (batch, inputs) = (x.shape()[0], x.shape()[1]);
    let outputs = w.shape()[1];
    let (xd, wd, dyd) = (x.data(), w.data(), dy.data());
    let parallel = batch * inputs * outputs > PAR_THRESHOLD;

    let mut dx = vec![S::zero(); batch * inputs];
    chunks_apply(&mut dx, inputs, parallel, |r, row| {
        let g = &dyd[r * outputs..(r + 1) * outputs];
        for (i, slot) in row.iter_mut().enumerate() {
            *slot = dot(&wd[i * outputs..(i + 1) * outputs], g);
        }
    });

    let mut dw = vec![S::zero(); inputs * outputs];
    chunks_apply(&mut dw, outputs, parallel, |i, row| {
        for r in 0..batch {
            let xv = xd[r * inputs + i];
            if xv != S::zero() {
                axpy(xv, &dyd[r * outputs..(r + 1) * outputs], row);
            }
        }
    });

    let mut db = vec![S::zero(); outputs];
    for r in 0..batch {
        axpy(S::one(), &dyd[r * outputs..(r + 1) * outputs], &mut db);
    }
    (
        Tensor::new([batch, inputs], dx).expect("shape"),
        Tensor::new([inputs, outputs], dw).expect("shape"),
        Tensor::new([outputs], db).expect("shape"),
    )
}

/// Valid 1-D convolution: `x: B×L×D`, `filters: F×w×D`, `bias: F` →
/// `B×(L−w+1)×F`.
pub fn conv1d_forward<S: Scalar>(
    x: &Tensor<S>,
    filters: &Tensor<S>,
    bias: &Tensor<S>,
) -> Result<Tensor<S>> {
    let (batch, len, dim) = dims3(x, "conv input")?;
    let (nf, width, fdim) = dims3(filters, "conv filters")?;
    if fdim != dim || bias.len() != nf || width == 0 {
        return Err(Error::Shape(format!(
            "conv1d: x {:?}, filters {:?}, bias {:?}",
            x.shape(),
            filters.shape(),
            bias.shape()
        )));
    }
    if len < width {
        return Err(Error::Shape(format!(
            "conv1d: sequence length {len} shorter than filter width {width}"
        )));
    }
    let steps = len - width + 1;
    let span = width * dim;
    let (xd, fd, bd) = (x.data(), filters.data(), bias.data());
    let mut out = vec![S::zero(); batch * steps * nf];
    let parallel = batch * steps * nf * span > PAR_THRESHOLD;
    chunks_apply(&mut out, steps * nf, parallel, |b, ob| {
        let xb = &xd[b * len * dim..(b + 1) * len * dim];
        for t in 0..steps {
            let window = &xb[t * dim..t * dim + span];
            for f in 0..nf {
                ob[t * nf + f] = bd[f] + dot(window, &fd[f * span..(f + 1) * span]);
            }
        }
    });
    Tensor::new([batch, steps, nf], out)
}

/// Gradients of [`conv1d_forward`]: `(dx, dfilters, dbias)`; `dx` only when asked.
pub(crate) fn conv1d_backward<S: Scalar>(
    x: &Tensor<S>,
    filters: &Tensor<S>,
    dy: &Tensor<S>,
    need_dx: bool,
) -> (Option<Tensor<S>>, Tensor<S>, Tensor<S>) {
    let (batch, len, dim) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (nf, width) = (filters.shape()[0], filters.shape()[1]);
    let steps = len - width + 1;
    let span = width * dim;
    let (xd, fd, dyd) = (x.data(), filters.data(), dy.data());
    let parallel = batch * steps * nf * span > PAR_THRESHOLD;

    let mut dfilt = vec![S::zero(); nf * span];
    chunks_apply(&mut dfilt, span, parallel, |f, grad| {
        for b in 0..batch {
            let xb = &xd[b * len * dim..(b + 1) * len * dim];
            for t in 0..steps {
                let g = dyd[(b * steps + t) * nf + f];
                if g != S::zero() {
                    axpy(g, &xb[t * dim..t * dim + span], grad);
                }
            }
        }
    });

    let mut dbias = vec![S::zero(); nf];
    for row in dyd.chunks_exact(nf) {
        axpy(S::one(), row, &mut dbias);
    }

    let dx = need_dx.then(|| {
        let mut dx = vec![S::zero(); batch * len * dim];
        chunks_apply(&mut dx, len * dim, parallel, |b, gx| {
            for t in 0..steps {
                let window = &mut gx[t * dim..t * dim + span];
                for f in 0..nf {
                    let g = dyd[(b * steps + t) * nf + f];
                    if g != S::zero() {
                        axpy(g, &fd[f * span..(f + 1) * span], window);
                    }
                }
            }
        });
        Tensor::new([batch, len, dim], dx).expect("shape")
    });
    (
        dx,
        Tensor::new([nf, width, dim], dfilt).expect("shape"),
        Tensor::new([nf], dbias).expect("shape"),
    )
}

/// `out[b,f] = max_t x[b,t,f]`.
pub fn max_pool_over_time<S: Scalar>(x: &Tensor<S>) -> Result<Tensor<S>> {
    max_pool_with_argmax(x).map(|(t, _)| t)
}

/// Max over time plus the first maximal time index of every `(b, f)`.
pub(crate) fn max_pool_with_argmax<S: Scalar>(x: &Tensor<S>) -> Result<(Tensor<S>, Vec<usize>)> {
    let (batch, steps, nf) = dims3(x, "max-pool input")?;
    if steps == 0 {
        return Err(Error::Shape("max-pool over zero time steps".into()));
    }
    let xd = x.data();
    let mut out = Vec::with_capacity(batch * nf);
    let mut arg = Vec::with_capacity(batch * nf);
    for b in 0..batch {
        for f in 0..nf {
            let mut best = xd[b * steps * nf + f];
            let mut best_t = 0;
            for t in 1..steps {
                let v = xd[(b * steps + t) * nf + f];
                if v > best {
                    best = v;
                    best_t = t;
                }
            }
            out.push(best);
            arg.push(best_t);
        }
    }
    Ok((Tensor::new([batch, nf], out)?, arg))
}

#[inline]
fn sigmoid<S: Scalar>(v: S) -> S {
    S::one() / (S::one() + (-v).exp())
}

/// Weights of one LSTM direction. Gate blocks are ordered input, forget,
/// candidate, output along the `4H` axis.
#[derive(Debug, Clone, Copy)]
pub struct LstmWeights<'a, S> {
    /// `D×4H`
    pub wx: &'a Tensor<S>,
    /// `H×4H`
    pub wh: &'a Tensor<S>,
    /// `4H`
    pub b: &'a Tensor<S>,
}

impl<S: Scalar> LstmWeights<'_, S> {
    fn hidden(&self, input_dim: usize) -> Result<usize> {
        let (d, four_h) = dims2(self.wx, "LSTM input kernel")?;
        let (h, four_h2) = dims2(self.wh, "LSTM recurrent kernel")?;
        if d != input_dim || four_h != 4 * h || four_h2 != 4 * h || self.b.len() != 4 * h {
            return Err(Error::Shape(format!(
                "LSTM: input dim {input_dim}, Wx {:?}, Wh {:?}, b {:?}",
                self.wx.shape(),
                self.wh.shape(),
                self.b.shape()
            )));
        }
        Ok(h)
    }
}

/// Recorded activations of one example through one LSTM direction.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct LstmTrace<S> {
    times: Vec<usize>,
    /// steps × 4H activated gates (i, f, g, o)
    gates: Vec<S>,
    /// (steps+1) × H, starting from the zero state
    c: Vec<S>,
    h: Vec<S>,
    /// steps × H
    tanh_c: Vec<S>,
}

fn lstm_example<S: Scalar>(
    xb: &[S],
    dim: usize,
    hidden: usize,
    w: LstmWeights<'_, S>,
    length: usize,
    reverse: bool,
) -> LstmTrace<S> {
    let times: Vec<usize> = if reverse {
        (0..length).rev().collect()
    } else {
        (0..length).collect()
    };
    let g4 = 4 * hidden;
    let (wx, wh, bias) = (w.wx.data(), w.wh.data(), w.b.data());
    let mut trace = LstmTrace {
        gates: vec![S::zero(); length * g4],
        c: vec![S::zero(); (length + 1) * hidden],
        h: vec![S::zero(); (length + 1) * hidden],
        tanh_c: vec![S::zero(); length * hidden],
        times,
    };
    let mut z = vec![S::zero(); g4];
    for k in 0..length {
        let t = trace.times[k];
        z.copy_from_slice(bias);
        for (d, &xv) in xb[t * dim..(t + 1) * dim].iter().enumerate() {
            if xv != S::zero() {
                axpy(xv, &wx[d * g4..(d + 1) * g4], &mut z);
            }
        }
        let (h_prev, h_next) = trace.h.split_at_mut((k + 1) * hidden);
        let h_prev = &h_prev[k * hidden..];
        for (j, &hv) in h_prev.iter().enumerate() {
            if hv != S::zero() {
                axpy(hv, &wh[j * g4..(j + 1) * g4], &mut z);
            }
        }
        let gates = &mut trace.gates[k * g4..(k + 1) * g4];
        for j in 0..hidden {
            gates[j] = sigmoid(z[j]);
            gates[hidden + j] = sigmoid(z[hidden + j]);
            gates[2 * hidden + j] = z[2 * hidden + j].tanh();
            gates[3 * hidden + j] = sigmoid(z[3 * hidden + j]);
        }
        let (c_prev, c_next) = trace.c.split_at_mut((k + 1) * hidden);
        let c_prev = &c_prev[k * hidden..];
        for j in 0..hidden {
            let c = gates[hidden + j] * c_prev[j] + gates[j] * gates[2 * hidden + j];
            c_next[j] = c;
            let tc = c.tanh();
            trace.tanh_c[k * hidden + j] = tc;
            h_next[j] = gates[3 * hidden + j] * tc;
        }
    }
    trace
}

/// Runs one direction over the batch. Returns the final hidden state of each
/// example (`B×H`) and the traces needed for the backward pass. Example `b`
/// only sees its first `lengths[b]` steps; a zero length yields a zero state.
pub(crate) fn lstm_run<S: Scalar>(
    x: &Tensor<S>,
    w: LstmWeights<'_, S>,
    lengths: &[usize],
    reverse: bool,
) -> Result<(Tensor<S>, Vec<LstmTrace<S>>)> {
    let (batch, len, dim) = dims3(x, "LSTM input")?;
    let hidden = w.hidden(dim)?;
    if lengths.len() != batch || lengths.iter().any(|&l| l > len) {
        return Err(Error::Shape(format!(
            "LSTM lengths {lengths:?} do not fit batch {batch} × length {len}"
        )));
    }
    let xd = x.data();
    let run = |b: usize| {
        lstm_example(
            &xd[b * len * dim..(b + 1) * len * dim],
            dim,
            hidden,
            w,
            lengths[b],
            reverse,
        )
    };
    let parallel = batch * len * dim * 4 * hidden > PAR_THRESHOLD;
    let traces: Vec<LstmTrace<S>> = if parallel {
        (0..batch).into_par_iter().map(run).collect()
    } else {
        (0..batch).map(run).collect()
    };
    let mut out = Vec::with_capacity(batch * hidden);
    for tr in &traces {
        let steps = tr.times.len();
        out.extend_from_slice(&tr.h[steps * hidden..(steps + 1) * hidden]);
    }
    Ok((Tensor::new([batch, hidden], out)?, traces))
}

pub(crate) struct LstmGrads<S> {
    pub dx: Option<Tensor<S>>,
    pub dwx: Tensor<S>,
    pub dwh: Tensor<S>,
    pub db: Tensor<S>,
}

/// Backpropagation through time from the gradient of the final hidden states.
pub(crate) fn lstm_backward<S: Scalar>(
    x: &Tensor<S>,
    w: LstmWeights<'_, S>,
    traces: &[LstmTrace<S>],
    dh_final: &Tensor<S>,
    need_dx: bool,
) -> LstmGrads<S> {
    let (batch, len, dim) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let hidden = w.wh.shape()[0];
    let g4 = 4 * hidden;
    let (xd, wx, wh) = (x.data(), w.wx.data(), w.wh.data());

    struct Partial<S> {
        dx: Vec<S>,
        dwx: Vec<S>,
        dwh: Vec<S>,
        db: Vec<S>,
    }

    let one = |b: usize| -> Partial<S> {
        let tr = &traces[b];
        let xb = &xd[b * len * dim..(b + 1) * len * dim];
        let mut p = Partial {
            dx: if need_dx { vec![S::zero(); len * dim] } else { Vec::new() },
            dwx: vec![S::zero(); dim * g4],
            dwh: vec![S::zero(); hidden * g4],
            db: vec![S::zero(); g4],
        };
        let mut dh = dh_final.data()[b * hidden..(b + 1) * hidden].to_vec();
        let mut dc = vec![S::zero(); hidden];
        let mut dz = vec![S::zero(); g4];
        let one = S::one();
        for k in (0..tr.times.len()).rev() {
            let t = tr.times[k];
            let gates = &tr.gates[k * g4..(k + 1) * g4];
            let c_prev = &tr.c[k * hidden..(k + 1) * hidden];
            let h_prev = &tr.h[k * hidden..(k + 1) * hidden];
            for j in 0..hidden {
                let (i, f, g, o) = (
                    gates[j],
                    gates[hidden + j],
                    gates[2 * hidden + j],
                    gates[3 * hidden + j],
                );
                let tc = tr.tanh_c[k * hidden + j];
                let d_o = dh[j] * tc;
                let dcj = dc[j] + dh[j] * o * (one - tc * tc);
                dz[j] = dcj * g * i * (one - i);
                dz[hidden + j] = dcj * c_prev[j] * f * (one - f);
                dz[2 * hidden + j] = dcj * i * (one - g * g);
                dz[3 * hidden + j] = d_o * o * (one - o);
                dc[j] = dcj * f;
            }
            let xt = &xb[t * dim..(t + 1) * dim];
            for (d, &xv) in xt.iter().enumerate() {
                if xv != S::zero() {
                    axpy(xv, &dz, &mut p.dwx[d * g4..(d + 1) * g4]);
                }
            }
            for (j, &hv) in h_prev.iter().enumerate() {
                if hv != S::zero() {
                    axpy(hv, &dz, &mut p.dwh[j * g4..(j + 1) * g4]);
                }
            }
            axpy(one, &dz, &mut p.db);
            if need_dx {
                for d in 0..dim {
                    p.dx[t * dim + d] += dot(&wx[d * g4..(d + 1) * g4], &dz);
                }
            }
            for (j, slot) in dh.iter_mut().enumerate() {
                *slot = dot(&wh[j * g4..(j + 1) * g4], &dz);
            }
        }
        p
    };

    let parallel = batch * len * dim * g4 > PAR_THRESHOLD;
    let partials: Vec<Partial<S>> = if parallel {
        (0..batch).into_par_iter().map(one).collect()
    } else {
        (0..batch).map(one).collect()
    };

    let mut dwx = vec![S::zero(); dim * g4];
    let mut dwh = vec![S::zero(); hidden * g4];
    let mut db = vec![S::zero(); g4];
    let mut dx = if need_dx {
        Vec::with_capacity(batch * len * dim)
    } else {
        Vec::new()
    };
    for p in partials {
        axpy(S::one(), &p.dwx, &mut dwx);
        axpy(S::one(), &p.dwh, &mut dwh);
        axpy(S::one(), &p.db, &mut db);
        if need_dx {
            dx.extend_from_slice(&p.dx);
        }
    }
    LstmGrads {
        dx: need_dx.then(|| Tensor::new([batch, len, dim], dx).expect("shape")),
        dwx: Tensor::new([dim, g4], dwx).expect("shape"),
        dwh: Tensor::new([hidden, g4], dwh).expect("shape"),
        db: Tensor::new([g4], db).expect("shape"),
    }
}

/// Final hidden state of an LSTM over `x: B×L×D`. With `backward` weights the
/// layer is bidirectional and returns `[forward-final, backward-final]`
/// concatenated (`B×2H`). `lengths` defaults to the full sequence length.
pub fn lstm_forward<S: Scalar>(
    x: &Tensor<S>,
    forward: LstmWeights<'_, S>,
    backward: Option<LstmWeights<'_, S>>,
    lengths: Option<&[usize]>,
) -> Result<Tensor<S>> {
    let (batch, len, _) = dims3(x, "LSTM input")?;
    let full = vec![len; batch];
    let lengths = lengths.unwrap_or(&full);
    let (fwd, _) = lstm_run(x, forward, lengths, false)?;
    let Some(bw) = backward else {
        return Ok(fwd);
    };
    let (bwd, _) = lstm_run(x, bw, lengths, true)?;
    let (h1, h2) = (fwd.shape()[1], bwd.shape()[1]);
    let mut out = Vec::with_capacity(batch * (h1 + h2));
    for b in 0..batch {
        out.extend_from_slice(&fwd.data()[b * h1..(b + 1) * h1]);
        out.extend_from_slice(&bwd.data()[b * h2..(b + 1) * h2]);
    }
    Tensor::new([batch, h1 + h2], out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], v: &[f64]) -> Tensor<f64> {
        Tensor::from_f64(shape, v).unwrap()
    }

    #[test]
    fn dense_examples() {
        let x = t(&[1, 2], &[1.0, 2.0]);
        let id = t(&[2, 2], &[1.0, 0.0, 0.0, 1.0]);
        assert_eq!(dense_forward(&x, &id, &t(&[2], &[0.0, 0.0])).unwrap().data(), &[1.0, 2.0]);
        let zeros = Tensor::zeros([2, 2]);
        assert_eq!(dense_forward(&x, &zeros, &t(&[2], &[3.0, 4.0])).unwrap().data(), &[3.0, 4.0]);
        let ones = t(&[2, 1], &[1.0, 1.0]);
        assert_eq!(dense_forward(&x, &ones, &t(&[1], &[0.5])).unwrap().data(), &[3.5]);
        assert!(matches!(
            dense_forward(&x, &t(&[3, 1], &[1.0; 3]), &t(&[1], &[0.0])),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn conv_examples() {
        let x = t(&[1, 3, 1], &[1.0, 2.0, 3.0]);
        let f = t(&[1, 2, 1], &[1.0, 1.0]);
        let out = conv1d_forward(&x, &f, &t(&[1], &[0.0])).unwrap();
        assert_eq!(out.shape(), &[1, 2, 1]);
        assert_eq!(out.data(), &[3.0, 5.0]);

        let zero = conv1d_forward(&x, &Tensor::zeros([2, 2, 1]), &Tensor::zeros([2])).unwrap();
        assert!(zero.data().iter().all(|&v| v == 0.0));

        let full = conv1d_forward(&x, &t(&[1, 3, 1], &[1.0; 3]), &t(&[1], &[0.0])).unwrap();
        assert_eq!(full.data(), &[6.0]);

        let short = conv1d_forward(&x, &Tensor::zeros([1, 4, 1]), &Tensor::zeros([1]));
        assert!(matches!(short, Err(Error::Shape(_))));
    }

    #[test]
    fn max_pool_examples() {
        let x = t(&[1, 2, 2], &[1.0, 4.0, 3.0, 2.0]);
        assert_eq!(max_pool_over_time(&x).unwrap().data(), &[3.0, 4.0]);
        let one = t(&[1, 1, 2], &[-1.0, 7.0]);
        assert_eq!(max_pool_over_time(&one).unwrap().data(), &[-1.0, 7.0]);
        let neg = t(&[1, 3, 1], &[-5.0, -2.0, -3.0]);
        assert_eq!(max_pool_over_time(&neg).unwrap().data(), &[-2.0]);
        assert!(max_pool_over_time(&Tensor::<f64>::zeros([1, 0, 2])).is_err());
        let (_, arg) = max_pool_with_argmax(&t(&[1, 3, 1], &[2.0, 2.0, 1.0])).unwrap();
        assert_eq!(arg, vec![0]);
    }

    #[test]
    fn lstm_zero_weights_give_zero_state() {
        let x = t(&[2, 4, 3], &[0.7; 24]);
        let wx = Tensor::zeros([3, 8]);
        let wh = Tensor::zeros([2, 8]);
        let b = Tensor::zeros([8]);
        let w = LstmWeights { wx: &wx, wh: &wh, b: &b };
        let out = lstm_forward(&x, w, None, None).unwrap();
        assert_eq!(out.shape(), &[2, 2]);
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn bilstm_width() {
        let x = Tensor::<f64>::zeros([1, 5, 2]);
        let wx = Tensor::zeros([2, 12]);
        let wh = Tensor::zeros([3, 12]);
        let b = Tensor::zeros([12]);
        let w = LstmWeights { wx: &wx, wh: &wh, b: &b };
        let out = lstm_forward(&x, w, Some(w), None).unwrap();
        assert_eq!(out.shape(), &[1, 6]);
    }

    /// Step-by-step scalar cell, written independently of the batched kernel.
    fn scalar_cell(x: f64, h: f64, c: f64, wx: [f64; 4], wh: [f64; 4], b: [f64; 4]) -> (f64, f64) {
        let s = |v: f64| 1.0 / (1.0 + (-v).exp());
        let pre = |k: usize| wx[k] * x + wh[k] * h + b[k];
        let (i, f, g, o) = (s(pre(0)), s(pre(1)), pre(2).tanh(), s(pre(3)));
        let c = f * c + i * g;
        (o * c.tanh(), c)
    }

    #[test]
    fn lstm_saturated_single_step() {
        let bg = 0.8;
        let bias = [30.0, -30.0, bg, 30.0];
        let wx = Tensor::zeros([1, 4]);
        let wh = Tensor::zeros([1, 4]);
        let b = t(&[4], &bias);
        let x = t(&[1, 1, 1], &[123.0]);
        let out = lstm_forward(&x, LstmWeights { wx: &wx, wh: &wh, b: &b }, None, None).unwrap();
        let (oracle, _) = scalar_cell(123.0, 0.0, 0.0, [0.0; 4], [0.0; 4], bias);
        assert!((out.data()[0] - oracle).abs() < 1e-12);
        assert!((out.data()[0] - bg.tanh().tanh()).abs() < 1e-9);
    }

    #[test]
    fn lstm_matches_scalar_oracle_over_sequence() {
        let wxv = [0.3, -0.2, 0.5, 0.1];
        let whv = [-0.4, 0.6, 0.2, -0.3];
        let bv = [0.1, 0.2, -0.1, 0.05];
        let xs = [0.5, -1.0, 2.0, 0.25];
        let wx = t(&[1, 4], &wxv);
        let wh = t(&[1, 4], &whv);
        let b = t(&[4], &bv);
        let x = t(&[1, 4, 1], &xs);
        let w = LstmWeights { wx: &wx, wh: &wh, b: &b };
        let out = lstm_forward(&x, w, Some(w), Some(&[3])).unwrap();

        let (mut h, mut c) = (0.0, 0.0);
        for &xv in &xs[..3] {
            (h, c) = scalar_cell(xv, h, c, wxv, whv, bv);
        }
        let (mut hb, mut cb) = (0.0, 0.0);
        for &xv in xs[..3].iter().rev() {
            (hb, cb) = scalar_cell(xv, hb, cb, wxv, whv, bv);
        }
        assert!((out.data()[0] - h).abs() < 1e-12);
        assert!((out.data()[1] - hb).abs() < 1e-12);
    }
}
