//! Compact transformer-style encoder with a layer-resumable forward pass,
//! mean pooling, the dense ReLU intent layer and the (M+1)-way head.
//!
//! Forward passes can stop after any block (`forward_to_layer`), hand the
//! hidden state to the caller for modification, and resume
//! (`forward_from_layer`). The traced variants keep the intermediates needed
//! for exact reverse-mode gradients.

mod block;
mod params;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

pub use params::{
    init_bound, init_params, tensor_layout, AttentionParams, BlockParams, EncoderConfig, EncoderParams,
    TensorKind,
};

use crate::corpus::Batch;
use crate::error::{invalid, Error, Result};
use crate::tensor::{Matrix, Real};
use block::BlockTrace;

pub(crate) use block::softmax_in_place;

/// Token-level hidden states after `layer` blocks (0 = embeddings only).
///
/// Every sequence is stored as `max_len × hidden`; rows at or beyond its
/// length are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenState<T> {
    pub states: Vec<Matrix<T>>,
    pub lengths: Vec<usize>,
    pub layer: usize,
}

impl<T: Real> HiddenState<T> {
    pub fn batch_size(&self) -> usize {
        self.states.len()
    }

    pub fn max_len(&self) -> usize {
        self.states.first().map_or(0, Matrix::rows)
    }

    /// Row-major `B × max_len` 0/1 mask.
    pub fn mask(&self) -> Vec<u8> {
        let w = self.max_len();
        let mut m = vec![0u8; self.states.len() * w];
        for (i, &len) in self.lengths.iter().enumerate() {
            m[i * w..i * w + len].fill(1);
        }
        m
    }

    pub(crate) fn real_rows(&self, i: usize) -> Matrix<T> {
        self.states[i].top_rows(self.lengths[i])
    }

    fn check_nonempty_rows(&self) -> Result<()> {
        if let Some(i) = self.lengths.iter().position(|&l| l == 0) {
            return Err(invalid(format!("sequence {i} has no real tokens")));
        }
        Ok(())
    }
}

/// Output of a full forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Forward<T> {
    /// `B × dim` intent representations.
    pub representations: Matrix<T>,
    /// `B × (M+1)` logits.
    pub logits: Matrix<T>,
}

fn check_batch<T: Real>(p: &EncoderParams<T>, b: &Batch) -> Result<()> {
    if b.max_len != p.config.max_len {
        return Err(Error::Shape(format!(
            "batch width {} differs from encoder max_len {}",
            b.max_len, p.config.max_len
        )));
    }
    if let Some(&id) = b.ids.iter().find(|&&id| id as usize >= p.config.vocab_size) {
        return Err(Error::VocabMismatch(format!(
            "token id {id} outside vocabulary of size {}",
            p.config.vocab_size
        )));
    }
    Ok(())
}

fn embed<T: Real>(p: &EncoderParams<T>, b: &Batch) -> Result<HiddenState<T>> {
    check_batch(p, b)?;
    let h = p.config.hidden;
    let states = (0..b.len())
        .map(|i| {
            let mut m = Matrix::zeros(b.max_len, h);
            for (t, &id) in b.row(i).iter().take(b.lengths[i]).enumerate() {
                let out = m.row_mut(t);
                for ((o, &e), &pos) in
                    out.iter_mut().zip(p.token_embedding.row(id as usize)).zip(p.position_embedding.row(t))
                {
                    *o = e + pos;
                }
            }
            m
        })
        .collect();
    Ok(HiddenState { states, lengths: b.lengths.clone(), layer: 0 })
}

fn run_blocks<T: Real>(p: &EncoderParams<T>, h: &HiddenState<T>, to: usize) -> HiddenState<T> {
    let states = (0..h.batch_size())
        .map(|i| {
            let mut x = h.real_rows(i);
            for block in &p.blocks[h.layer..to] {
                x = block::block_apply(block, &x);
            }
            x.resized_rows(h.max_len())
        })
        .collect();
    HiddenState { states, lengths: h.lengths.clone(), layer: to }
}

/// Embeddings plus positions, then blocks `1..=layer`.
pub fn forward_to_layer<T: Real>(p: &EncoderParams<T>, b: &Batch, layer: usize) -> Result<HiddenState<T>> {
    if layer > p.config.layers {
        return Err(invalid(format!("layer {layer} outside 0..={}", p.config.layers)));
    }
    Ok(run_blocks(p, &embed(p, b)?, layer))
}

fn pool_and_project<T: Real>(p: &EncoderParams<T>, top: &Matrix<T>, len: usize) -> (Vec<T>, Vec<T>, Vec<T>) {
    let h = p.config.hidden;
    let mut pooled = vec![T::zero(); h];
    for r in 0..len {
        for (a, &v) in pooled.iter_mut().zip(top.row(r)) {
            *a += v;
        }
    }
    let inv = T::one() / T::of(len as f64);
    pooled.iter_mut().for_each(|v| *v *= inv);
    let mut pre = p.dense_b.as_slice().to_vec();
    for (k, &x) in pooled.iter().enumerate() {
        for (o, &w) in pre.iter_mut().zip(p.dense_w.row(k)) {
            *o += x * w;
        }
    }
    let rep = pre.iter().map(|&v| v.max(T::zero())).collect();
    (pooled, pre, rep)
}

/// Resumes after `h.layer`, mean-pools the real positions (CLS included) and
/// applies `ReLU(x·W_d + b_d)`. Returns `B × dim`.
pub fn forward_from_layer<T: Real>(p: &EncoderParams<T>, h: &HiddenState<T>) -> Result<Matrix<T>> {
    if h.layer > p.config.layers {
        return Err(invalid(format!("layer {} outside 0..={}", h.layer, p.config.layers)));
    }
    h.check_nonempty_rows()?;
    let top = run_blocks(p, h, p.config.layers);
    let dim = p.config.dim;
    let mut reps = Matrix::zeros(h.batch_size(), dim);
    for i in 0..h.batch_size() {
        let (_, _, rep) = pool_and_project(p, &top.states[i], h.lengths[i]);
        reps.row_mut(i).copy_from_slice(&rep);
    }
    Ok(reps)
}

/// `e · W_cᵀ + b_c`
pub fn classify<T: Real>(p: &EncoderParams<T>, reps: &Matrix<T>) -> Matrix<T> {
    let mut logits = reps.matmul_transpose(&p.head_w);
    logits.add_row_vector(&p.head_b);
    logits
}

pub fn forward<T: Real>(p: &EncoderParams<T>, b: &Batch) -> Result<Forward<T>> {
    let h = forward_to_layer(p, b, 0)?;
    let representations = forward_from_layer(p, &h)?;
    let logits = classify(p, &representations);
    Ok(Forward { representations, logits })
}

/// Recorded lower half of a pass: embeddings through the stop layer.
#[derive(Debug, Clone)]
pub struct LowerTrace<T> {
    token_ids: Vec<Vec<u32>>,
    blocks: Vec<Vec<BlockTrace<T>>>,
    layer: usize,
}

/// Recorded upper half of a pass: resume layer through the head.
#[derive(Debug, Clone)]
pub struct UpperTrace<T> {
    start_layer: usize,
    lengths: Vec<usize>,
    max_len: usize,
    blocks: Vec<Vec<BlockTrace<T>>>,
    pooled: Matrix<T>,
    pre_activation: Matrix<T>,
    representations: Matrix<T>,
}

impl<T: Real> UpperTrace<T> {
    pub fn representations(&self) -> &Matrix<T> {
        &self.representations
    }
}

/// [`forward_to_layer`] keeping intermediates for [`LowerTrace::backward`].
pub fn trace_to_layer<T: Real>(
    p: &EncoderParams<T>,
    b: &Batch,
    layer: usize,
) -> Result<(HiddenState<T>, LowerTrace<T>)> {
    if layer > p.config.layers {
        return Err(invalid(format!("layer {layer} outside 0..={}", p.config.layers)));
    }
    let emb = embed(p, b)?;
    let mut states = Vec::with_capacity(b.len());
    let mut traces = Vec::with_capacity(b.len());
    let mut token_ids = Vec::with_capacity(b.len());
    for i in 0..b.len() {
        let mut x = emb.real_rows(i);
        let mut per = Vec::with_capacity(layer);
        for block in &p.blocks[..layer] {
            let (y, t) = block::block_forward(block, &x);
            per.push(t);
            x = y;
        }
        states.push(x.resized_rows(b.max_len));
        traces.push(per);
        token_ids.push(b.row(i)[..b.lengths[i]].to_vec());
    }
    let h = HiddenState { states, lengths: b.lengths.clone(), layer };
    Ok((h, LowerTrace { token_ids, blocks: traces, layer }))
}

/// [`forward_from_layer`] plus the head, keeping intermediates. Returns logits.
pub fn trace_from_layer<T: Real>(
    p: &EncoderParams<T>,
    h: &HiddenState<T>,
) -> Result<(Matrix<T>, UpperTrace<T>)> {
    if h.layer > p.config.layers {
        return Err(invalid(format!("layer {} outside 0..={}", h.layer, p.config.layers)));
    }
    h.check_nonempty_rows()?;
    let (bsz, hid, dim) = (h.batch_size(), p.config.hidden, p.config.dim);
    let mut pooled = Matrix::zeros(bsz, hid);
    let mut pre_activation = Matrix::zeros(bsz, dim);
    let mut representations = Matrix::zeros(bsz, dim);
    let mut traces = Vec::with_capacity(bsz);
    for i in 0..bsz {
        let mut x = h.real_rows(i);
        let mut per = Vec::new();
        for block in &p.blocks[h.layer..] {
            let (y, t) = block::block_forward(block, &x);
            per.push(t);
            x = y;
        }
        let (pool, pre, rep) = pool_and_project(p, &x, h.lengths[i]);
        pooled.row_mut(i).copy_from_slice(&pool);
        pre_activation.row_mut(i).copy_from_slice(&pre);
        representations.row_mut(i).copy_from_slice(&rep);
        traces.push(per);
    }
    let logits = classify(p, &representations);
    let trace = UpperTrace {
        start_layer: h.layer,
        lengths: h.lengths.clone(),
        max_len: h.max_len(),
        blocks: traces,
        pooled,
        pre_activation,
        representations,
    };
    Ok((logits, trace))
}

impl<T: Real> UpperTrace<T> {
    /// Accumulates parameter gradients for `dlogits` (`B × (M+1)`) into
    /// `grads` and returns the gradient of the resumed hidden state
    /// (`max_len × hidden` per sequence, zero at padding).
    pub fn backward(&self, p: &EncoderParams<T>, dlogits: &Matrix<T>, grads: &mut EncoderParams<T>) -> Vec<Matrix<T>> {
        assert_eq!(dlogits.shape(), (self.representations.rows(), p.num_known + 1));
        dlogits.transpose_matmul_into(&self.representations, &mut grads.head_w);
        dlogits.accumulate_column_sums(&mut grads.head_b);
        let mut dpre = dlogits.matmul(&p.head_w);
        for (d, &z) in dpre.as_mut_slice().iter_mut().zip(self.pre_activation.as_slice()) {
            if z <= T::zero() {
                *d = T::zero();
            }
        }
        self.pooled.transpose_matmul_into(&dpre, &mut grads.dense_w);
        dpre.accumulate_column_sums(&mut grads.dense_b);
        let dpooled = dpre.matmul_transpose(&p.dense_w);

        let hid = p.config.hidden;
        (0..self.lengths.len())
            .map(|i| {
                let len = self.lengths[i];
                let inv = T::one() / T::of(len as f64);
                let mut dx = Matrix::zeros(len, hid);
                for r in 0..len {
                    for (d, &g) in dx.row_mut(r).iter_mut().zip(dpooled.row(i)) {
                        *d = g * inv;
                    }
                }
                for (l, t) in self.blocks[i].iter().enumerate().rev() {
                    let layer = self.start_layer + l;
                    dx = block::block_backward(&p.blocks[layer], t, &dx, &mut grads.blocks[layer]);
                }
                dx.resized_rows(self.max_len)
            })
            .collect()
    }
}

impl<T: Real> LowerTrace<T> {
    pub fn layer(&self) -> usize {
        self.layer
    }

    /// Accumulates parameter gradients given the gradient of the stop-layer
    /// hidden state. Rows beyond each sequence's length are ignored.
    pub fn backward(&self, p: &EncoderParams<T>, dhidden: &[Matrix<T>], grads: &mut EncoderParams<T>) {
        assert_eq!(dhidden.len(), self.token_ids.len());
        for (i, ids) in self.token_ids.iter().enumerate() {
            let mut dx = dhidden[i].top_rows(ids.len());
            for (layer, t) in self.blocks[i].iter().enumerate().rev() {
                dx = block::block_backward(&p.blocks[layer], t, &dx, &mut grads.blocks[layer]);
            }
            for (pos, &id) in ids.iter().enumerate() {
                let d = dx.row(pos);
                for (g, &v) in grads.token_embedding.row_mut(id as usize).iter_mut().zip(d) {
                    *g += v;
                }
                for (g, &v) in grads.position_embedding.row_mut(pos).iter_mut().zip(d) {
                    *g += v;
                }
            }
        }
    }
}

/// Logits and full trace of a plain (unmixed) pass.
pub fn trace_forward<T: Real>(p: &EncoderParams<T>, b: &Batch) -> Result<(Matrix<T>, LowerTrace<T>, UpperTrace<T>)> {
    let (h, lower) = trace_to_layer(p, b, 0)?;
    let (logits, upper) = trace_from_layer(p, &h)?;
    Ok((logits, lower, upper))
}

/// Accumulates the parameter gradients of a plain pass given `dlogits`.
pub fn backward_full<T: Real>(
    p: &EncoderParams<T>,
    lower: &LowerTrace<T>,
    upper: &UpperTrace<T>,
    dlogits: &Matrix<T>,
    grads: &mut EncoderParams<T>,
) {
    let dh = upper.backward(p, dlogits, grads);
    lower.backward(p, &dh, grads);
}
