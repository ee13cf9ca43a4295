use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::seeded_rng;
use crate::tensor::{Matrix, Real};

/// Shape of the compact encoder.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderConfig {
    pub vocab_size: usize,
    pub hidden: usize,
    pub layers: usize,
    pub ffn: usize,
    /// Width of the intent representation.
    pub dim: usize,
    pub max_len: usize,
    pub attention: bool,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self { vocab_size: 0, hidden: 64, layers: 4, ffn: 128, dim: 64, max_len: 32, attention: true }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers < 1 {
            return Err(invalid("encoder needs at least one layer"));
        }
        if self.hidden < 1 || self.ffn < 1 || self.dim < 1 {
            return Err(invalid("encoder widths must be positive"));
        }
        if self.vocab_size < 3 {
            return Err(invalid("vocab_size must cover the three reserved ids"));
        }
        if self.max_len < 2 {
            return Err(invalid("max_len must be at least 2"));
        }
        Ok(())
    }
}

/// Single-head self-attention sublayer with its post-residual normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams<T> {
    pub query_w: Matrix<T>,
    pub query_b: Matrix<T>,
    pub key_w: Matrix<T>,
    pub key_b: Matrix<T>,
    pub value_w: Matrix<T>,
    pub value_b: Matrix<T>,
    pub out_w: Matrix<T>,
    pub out_b: Matrix<T>,
    pub norm_gain: Matrix<T>,
    pub norm_bias: Matrix<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockParams<T> {
    pub attention: Option<AttentionParams<T>>,
    pub ff_in_w: Matrix<T>,
    pub ff_in_b: Matrix<T>,
    pub ff_out_w: Matrix<T>,
    pub ff_out_b: Matrix<T>,
    pub norm_gain: Matrix<T>,
    pub norm_bias: Matrix<T>,
}

/// Every trainable tensor of the encoder, the dense intent layer and the
/// (M+1)-way classifier head. Gradients use the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams<T> {
    pub config: EncoderConfig,
    /// M, the number of known classes; the head has M+1 rows.
    pub num_known: usize,
    pub token_embedding: Matrix<T>,
    pub position_embedding: Matrix<T>,
    pub blocks: Vec<BlockParams<T>>,
    /// `hidden × dim`
    pub dense_w: Matrix<T>,
    pub dense_b: Matrix<T>,
    /// `(M+1) × dim`
    pub head_w: Matrix<T>,
    pub head_b: Matrix<T>,
}

/// Kind of a tensor with respect to initialization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TensorKind {
    Weight,
    Bias,
    Gain,
}

/// Name, shape and kind of every tensor, in checkpoint order.
pub fn tensor_layout(cfg: &EncoderConfig, num_known: usize) -> Vec<(String, (usize, usize), TensorKind)> {
    use TensorKind::*;
    let (h, f) = (cfg.hidden, cfg.ffn);
    let mut out = Vec::new();
    let mut push = |name: String, shape, kind| out.push((name, shape, kind));
    push("token_embedding".into(), (cfg.vocab_size, h), Weight);
    push("position_embedding".into(), (cfg.max_len, h), Weight);
    for l in 0..cfg.layers {
        if cfg.attention {
            for proj in ["query", "key", "value", "out"] {
                push(format!("blocks.{l}.attention.{proj}.weight"), (h, h), Weight);
                push(format!("blocks.{l}.attention.{proj}.bias"), (1, h), Bias);
            }
            push(format!("blocks.{l}.attention.norm.gain"), (1, h), Gain);
            push(format!("blocks.{l}.attention.norm.bias"), (1, h), Bias);
        }
        push(format!("blocks.{l}.ff.in.weight"), (h, f), Weight);
        push(format!("blocks.{l}.ff.in.bias"), (1, f), Bias);
        push(format!("blocks.{l}.ff.out.weight"), (f, h), Weight);
        push(format!("blocks.{l}.ff.out.bias"), (1, h), Bias);
        push(format!("blocks.{l}.ff.norm.gain"), (1, h), Gain);
        push(format!("blocks.{l}.ff.norm.bias"), (1, h), Bias);
    }
    push("dense.weight".into(), (h, cfg.dim), Weight);
    push("dense.bias".into(), (1, cfg.dim), Bias);
    push("head.weight".into(), (num_known + 1, cfg.dim), Weight);
    push("head.bias".into(), (1, num_known + 1), Bias);
    out
}

/// Glorot bound `sqrt(6 / (fan_in + fan_out))` for a `rows × cols` weight.
pub fn init_bound(rows: usize, cols: usize) -> f64 {
    num_traits::Float::sqrt(6.0 / (rows + cols) as f64)
}

impl<T: Real> EncoderParams<T> {
    /// Assembles parameters from tensors listed in [`tensor_layout`] order.
    pub fn from_tensors(cfg: EncoderConfig, num_known: usize, tensors: Vec<Matrix<T>>) -> Result<Self> {
        let layout = tensor_layout(&cfg, num_known);
        if layout.len() != tensors.len() {
            return Err(invalid(format!("expected {} tensors, got {}", layout.len(), tensors.len())));
        }
        for ((name, shape, _), t) in layout.iter().zip(&tensors) {
            if t.shape() != *shape {
                return Err(invalid(format!("tensor `{name}` has shape {:?}, expected {shape:?}", t.shape())));
            }
        }
        let mut it = tensors.into_iter();
        let mut next = || it.next().expect("length checked above");
        let token_embedding = next();
        let position_embedding = next();
        let mut blocks = Vec::with_capacity(cfg.layers);
        for _ in 0..cfg.layers {
            let attention = if cfg.attention {
                Some(AttentionParams {
                    query_w: next(),
                    query_b: next(),
                    key_w: next(),
                    key_b: next(),
                    value_w: next(),
                    value_b: next(),
                    out_w: next(),
                    out_b: next(),
                    norm_gain: next(),
                    norm_bias: next(),
                })
            } else {
                None
            };
            blocks.push(BlockParams {
                attention,
                ff_in_w: next(),
                ff_in_b: next(),
                ff_out_w: next(),
                ff_out_b: next(),
                norm_gain: next(),
                norm_bias: next(),
            });
        }
        Ok(Self {
            token_embedding,
            position_embedding,
            blocks,
            dense_w: next(),
            dense_b: next(),
            head_w: next(),
            head_b: next(),
            config: cfg,
            num_known,
        })
    }

    /// All-zero tensors with the shapes of `like` (gradient accumulator).
    pub fn zeros_like(like: &Self) -> Self {
        let tensors = like.tensors().into_iter().map(|(_, t)| Matrix::zeros(t.rows(), t.cols())).collect();
        Self::from_tensors(like.config.clone(), like.num_known, tensors).expect("layout of an existing model")
    }

    pub fn cast<U: Real>(&self) -> EncoderParams<U> {
        let tensors = self.tensors().into_iter().map(|(_, t)| t.cast()).collect();
        EncoderParams::from_tensors(self.config.clone(), self.num_known, tensors).expect("same layout")
    }

    /// Tensors in checkpoint order.
    pub fn tensors(&self) -> Vec<(String, &Matrix<T>)> {
        let names = tensor_layout(&self.config, self.num_known).into_iter().map(|(n, _, _)| n);
        names.zip(self.tensor_refs()).collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut Matrix<T>)> {
        let names: Vec<String> =
            tensor_layout(&self.config, self.num_known).into_iter().map(|(n, _, _)| n).collect();
        names.into_iter().zip(self.tensor_muts()).collect()
    }

    fn tensor_refs(&self) -> Vec<&Matrix<T>> {
        let mut v = alloc::vec![&self.token_embedding, &self.position_embedding];
        for b in &self.blocks {
            if let Some(a) = &b.attention {
                v.extend([
                    &a.query_w, &a.query_b, &a.key_w, &a.key_b, &a.value_w, &a.value_b, &a.out_w, &a.out_b,
                    &a.norm_gain, &a.norm_bias,
                ]);
            }
            v.extend([&b.ff_in_w, &b.ff_in_b, &b.ff_out_w, &b.ff_out_b, &b.norm_gain, &b.norm_bias]);
        }
        v.extend([&self.dense_w, &self.dense_b, &self.head_w, &self.head_b]);
        v
    }

    fn tensor_muts(&mut self) -> Vec<&mut Matrix<T>> {
        let mut v = alloc::vec![&mut self.token_embedding, &mut self.position_embedding];
        for b in &mut self.blocks {
            if let Some(a) = &mut b.attention {
                v.extend([
                    &mut a.query_w, &mut a.query_b, &mut a.key_w, &mut a.key_b, &mut a.value_w,
                    &mut a.value_b, &mut a.out_w, &mut a.out_b, &mut a.norm_gain, &mut a.norm_bias,
                ]);
            }
            v.extend([
                &mut b.ff_in_w, &mut b.ff_in_b, &mut b.ff_out_w, &mut b.ff_out_b, &mut b.norm_gain,
                &mut b.norm_bias,
            ]);
        }
        v.extend([&mut self.dense_w, &mut self.dense_b, &mut self.head_w, &mut self.head_b]);
        v
    }

    pub fn is_finite(&self) -> bool {
        self.tensor_refs().iter().all(|t| t.is_finite())
    }

    pub fn parameter_count(&self) -> usize {
        self.tensor_refs().iter().map(|t| t.as_slice().len()).sum()
    }
}

/// Seeded initialization: weights uniform in `[-a, a]` with the Glorot bound
/// of their own shape, biases zero, normalization gains one.
pub fn init_params<T: Real>(cfg: &EncoderConfig, num_known: usize, seed: u64) -> Result<EncoderParams<T>> {
    cfg.validate()?;
    if num_known < 1 {
        return Err(invalid("need at least one known class"));
    }
    let mut rng = seeded_rng(seed);
    let tensors = tensor_layout(cfg, num_known)
        .into_iter()
        .map(|(_, (rows, cols), kind)| match kind {
            TensorKind::Weight => {
                let a = init_bound(rows, cols);
                let data = (0..rows * cols).map(|_| T::of(rng.random_range(-a..=a))).collect();
                Matrix::from_vec(rows, cols, data)
            }
            TensorKind::Bias => Matrix::zeros(rows, cols),
            TensorKind::Gain => Matrix::filled(rows, cols, T::one()),
        })
        .collect();
    EncoderParams::from_tensors(cfg.clone(), num_known, tensors)
}
