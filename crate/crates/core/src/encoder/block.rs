//! Forward and reverse passes of one encoder block over the real rows of a
//! single sequence.
//!
//! Block layout (post-normalization residual form):
//!
//! ```text
//! y = norm1(x + attention(x))        // skipped when attention is disabled
//! z = norm2(y + W2 · gelu(W1 · y + b1) + b2)
//! ```

use alloc::vec::Vec;

use super::params::{AttentionParams, BlockParams};
use crate::tensor::{Matrix, Real};

pub(crate) const NORM_EPS: f64 = 1e-5;

fn linear<T: Real>(x: &Matrix<T>, w: &Matrix<T>, b: &Matrix<T>) -> Matrix<T> {
    let mut y = x.matmul(w);
    y.add_row_vector(b);
    y
}

/// Accumulates weight/bias gradients of `y = x·W + b` and returns `dx`.
fn linear_backward<T: Real>(
    x: &Matrix<T>,
    w: &Matrix<T>,
    dy: &Matrix<T>,
    dw: &mut Matrix<T>,
    db: &mut Matrix<T>,
) -> Matrix<T> {
    x.transpose_matmul_into(dy, dw);
    dy.accumulate_column_sums(db);
    dy.matmul_transpose(w)
}

#[derive(Debug, Clone)]
pub(crate) struct NormTrace<T> {
    normalized: Matrix<T>,
    inv_std: Vec<T>,
}

fn layer_norm<T: Real>(x: &Matrix<T>, gain: &Matrix<T>, bias: &Matrix<T>) -> (Matrix<T>, NormTrace<T>) {
    let (n, h) = x.shape();
    let hn = T::of(h as f64);
    let eps = T::of(NORM_EPS);
    let mut normalized = Matrix::zeros(n, h);
    let mut out = Matrix::zeros(n, h);
    let mut inv_std = Vec::with_capacity(n);
    for r in 0..n {
        let row = x.row(r);
        let mean = row.iter().copied().sum::<T>() / hn;
        let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / hn;
        let inv = T::one() / (var + eps).sqrt();
        inv_std.push(inv);
        for (c, &v) in row.iter().enumerate() {
            let xhat = (v - mean) * inv;
            normalized.set(r, c, xhat);
            out.set(r, c, gain.as_slice()[c] * xhat + bias.as_slice()[c]);
        }
    }
    (out, NormTrace { normalized, inv_std })
}

fn layer_norm_backward<T: Real>(
    trace: &NormTrace<T>,
    gain: &Matrix<T>,
    dout: &Matrix<T>,
    dgain: &mut Matrix<T>,
    dbias: &mut Matrix<T>,
) -> Matrix<T> {
    let (n, h) = dout.shape();
    let hn = T::of(h as f64);
    let mut dx = Matrix::zeros(n, h);
    for r in 0..n {
        let xhat = trace.normalized.row(r);
        let dy = dout.row(r);
        let mut sum_d = T::zero();
        let mut sum_dx = T::zero();
        for c in 0..h {
            let d = dy[c] * gain.as_slice()[c];
            sum_d += d;
            sum_dx += d * xhat[c];
            dgain.as_mut_slice()[c] += dy[c] * xhat[c];
            dbias.as_mut_slice()[c] += dy[c];
        }
        let scale = trace.inv_std[r] / hn;
        let out = dx.row_mut(r);
        for c in 0..h {
            let d = dy[c] * gain.as_slice()[c];
            out[c] = scale * (hn * d - sum_d - xhat[c] * sum_dx);
        }
    }
    dx
}

const GELU_CUBIC: f64 = 0.044715;

fn gelu<T: Real>(z: T) -> T {
    let c = T::of(0.797_884_560_802_865_4); // sqrt(2/pi)
    let half = T::of(0.5);
    half * z * (T::one() + (c * (z + T::of(GELU_CUBIC) * z * z * z)).tanh())
}

fn gelu_grad<T: Real>(z: T) -> T {
    let c = T::of(0.797_884_560_802_865_4);
    let half = T::of(0.5);
    let t = (c * (z + T::of(GELU_CUBIC) * z * z * z)).tanh();
    half * (T::one() + t) + half * z * (T::one() - t * t) * c * (T::one() + T::of(3.0 * GELU_CUBIC) * z * z)
}

#[derive(Debug, Clone)]
pub(crate) struct AttentionTrace<T> {
    query: Matrix<T>,
    key: Matrix<T>,
    value: Matrix<T>,
    probs: Matrix<T>,
    context: Matrix<T>,
    norm: NormTrace<T>,
}

fn attention_forward<T: Real>(p: &AttentionParams<T>, x: &Matrix<T>) -> (Matrix<T>, AttentionTrace<T>) {
    let query = linear(x, &p.query_w, &p.query_b);
    let key = linear(x, &p.key_w, &p.key_b);
    let value = linear(x, &p.value_w, &p.value_b);
    let scale = T::one() / T::of(x.cols() as f64).sqrt();
    let mut probs = query.matmul_transpose(&key);
    probs.scale(scale);
    for r in 0..probs.rows() {
        softmax_in_place(probs.row_mut(r));
    }
    let context = probs.matmul(&value);
    let mut residual = linear(&context, &p.out_w, &p.out_b);
    residual.add_assign(x);
    let (y, norm) = layer_norm(&residual, &p.norm_gain, &p.norm_bias);
    (y, AttentionTrace { query, key, value, probs, context, norm })
}

fn attention_backward<T: Real>(
    p: &AttentionParams<T>,
    x: &Matrix<T>,
    t: &AttentionTrace<T>,
    dy: &Matrix<T>,
    g: &mut AttentionParams<T>,
) -> Matrix<T> {
    let dres = layer_norm_backward(&t.norm, &p.norm_gain, dy, &mut g.norm_gain, &mut g.norm_bias);
    let dcontext = linear_backward(&t.context, &p.out_w, &dres, &mut g.out_w, &mut g.out_b);
    // context = probs · value
    let dprobs = dcontext.matmul_transpose(&t.value);
    let mut dvalue = Matrix::zeros(t.value.rows(), t.value.cols());
    t.probs.transpose_matmul_into(&dcontext, &mut dvalue);
    // row-wise softmax backward, then the 1/sqrt(H) scale
    let scale = T::one() / T::of(x.cols() as f64).sqrt();
    let n = t.probs.rows();
    let mut dscores = Matrix::zeros(n, n);
    for r in 0..n {
        let pr = t.probs.row(r);
        let dr = dprobs.row(r);
        let dot: T = pr.iter().zip(dr).map(|(&a, &b)| a * b).sum();
        for c in 0..n {
            dscores.set(r, c, pr[c] * (dr[c] - dot) * scale);
        }
    }
    // scores = query · keyᵀ
    let dquery = dscores.matmul(&t.key);
    let mut dkey = Matrix::zeros(n, t.key.cols());
    dscores.transpose_matmul_into(&t.query, &mut dkey);

    let mut dx = dres;
    dx.add_assign(&linear_backward(x, &p.query_w, &dquery, &mut g.query_w, &mut g.query_b));
    dx.add_assign(&linear_backward(x, &p.key_w, &dkey, &mut g.key_w, &mut g.key_b));
    dx.add_assign(&linear_backward(x, &p.value_w, &dvalue, &mut g.value_w, &mut g.value_b));
    dx
}

pub(crate) fn softmax_in_place<T: Real>(row: &mut [T]) {
    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Intermediates of one block needed by the reverse pass.
#[derive(Debug, Clone)]
pub(crate) struct BlockTrace<T> {
    input: Matrix<T>,
    attention: Option<AttentionTrace<T>>,
    ff_input: Matrix<T>,
    pre_activation: Matrix<T>,
    activation: Matrix<T>,
    norm: NormTrace<T>,
}

pub(crate) fn block_forward<T: Real>(p: &BlockParams<T>, x: &Matrix<T>) -> (Matrix<T>, BlockTrace<T>) {
    let (ff_input, attention) = match &p.attention {
        Some(a) => {
            let (y, t) = attention_forward(a, x);
            (y, Some(t))
        }
        None => (x.clone(), None),
    };
    let pre_activation = linear(&ff_input, &p.ff_in_w, &p.ff_in_b);
    let activation = pre_activation.map(gelu);
    let mut residual = linear(&activation, &p.ff_out_w, &p.ff_out_b);
    residual.add_assign(&ff_input);
    let (out, norm) = layer_norm(&residual, &p.norm_gain, &p.norm_bias);
    let trace = BlockTrace { input: x.clone(), attention, ff_input, pre_activation, activation, norm };
    (out, trace)
}

/// Same as [`block_forward`] without keeping intermediates.
pub(crate) fn block_apply<T: Real>(p: &BlockParams<T>, x: &Matrix<T>) -> Matrix<T> {
    block_forward(p, x).0
}

/// Accumulates parameter gradients into `g` and returns the input gradient.
pub(crate) fn block_backward<T: Real>(
    p: &BlockParams<T>,
    t: &BlockTrace<T>,
    dout: &Matrix<T>,
    g: &mut BlockParams<T>,
) -> Matrix<T> {
    let dres = layer_norm_backward(&t.norm, &p.norm_gain, dout, &mut g.norm_gain, &mut g.norm_bias);
    let dact = linear_backward(&t.activation, &p.ff_out_w, &dres, &mut g.ff_out_w, &mut g.ff_out_b);
    let mut dpre = dact;
    for (d, &z) in dpre.as_mut_slice().iter_mut().zip(t.pre_activation.as_slice()) {
        *d *= gelu_grad(z);
    }
    let mut dff_input = linear_backward(&t.ff_input, &p.ff_in_w, &dpre, &mut g.ff_in_w, &mut g.ff_in_b);
    dff_input.add_assign(&dres);
    match (&p.attention, &t.attention, &mut g.attention) {
        (Some(a), Some(at), Some(ga)) => attention_backward(a, &t.input, at, &dff_input, ga),
        _ => dff_input,
    }
}
