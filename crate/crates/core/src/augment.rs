//! Noisy mixup: pseudo open-intent samples made by mixing the hidden states
//! of two different-intent batches at a random layer and perturbing the mix.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::corpus::PairedBatch;
use crate::encoder::{self, EncoderParams, HiddenState, LowerTrace, UpperTrace};
use crate::error::{invalid, Error, Result};
use crate::tensor::{Matrix, Real};

/// Inclusive range of block outputs eligible as mix points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerRange {
    pub first: usize,
    pub last: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MixupConfig {
    /// Shape of the symmetric Beta(α, α) the mixing weight is drawn from.
    pub alpha: f64,
    pub delta_add: f64,
    pub delta_mul: f64,
    /// `None` means every block output, `1..=L`.
    pub layers: Option<LayerRange>,
}

impl Default for MixupConfig {
    fn default() -> Self {
        Self { alpha: 2.0, delta_add: 0.4, delta_mul: 0.2, layers: None }
    }
}

impl MixupConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.alpha.is_finite() || self.alpha <= 0.0 {
            return Err(invalid(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.delta_add >= 0.0 && self.delta_mul >= 0.0) {
            return Err(invalid("noise levels must be non-negative"));
        }
        Ok(())
    }

    /// Eligible mix layers for an encoder of `num_layers` blocks.
    pub fn layer_range(&self, num_layers: usize) -> Result<LayerRange> {
        let range = self.layers.unwrap_or(LayerRange { first: 1, last: num_layers });
        if range.first < 1 || range.first > range.last || range.last > num_layers {
            return Err(invalid(format!(
                "mix layers {}..={} not within 1..={num_layers}",
                range.first, range.last
            )));
        }
        Ok(range)
    }
}

/// One Beta(α, α) draw as `g1 / (g1 + g2)` with `g1, g2 ~ Gamma(α, 1)`.
pub fn sample_lambda<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> Result<f64> {
    if !alpha.is_finite() || alpha <= 0.0 {
        return Err(invalid(format!("alpha must be positive, got {alpha}")));
    }
    let gamma = Gamma::new(alpha, 1.0).map_err(|e| invalid(format!("{e}")))?;
    let g1: f64 = gamma.sample(rng);
    let g2: f64 = gamma.sample(rng);
    let sum = g1 + g2;
    // both draws can underflow to zero for very small alpha
    Ok(if sum > 0.0 { g1 / sum } else { 0.5 })
}

/// Uniform choice of a mix layer within `range`.
pub fn select_mix_layer<R: Rng + ?Sized>(range: LayerRange, rng: &mut R) -> Result<usize> {
    if range.first > range.last {
        return Err(invalid("empty mix-layer range"));
    }
    Ok(rng.random_range(range.first..=range.last))
}

/// Elementwise `λ·h1 + (1−λ)·h2`; the mixed mask is the union of both masks.
pub fn mixup<T: Real>(h1: &HiddenState<T>, h2: &HiddenState<T>, lambda: f64) -> Result<HiddenState<T>> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(invalid(format!("mixing weight {lambda} outside [0, 1]")));
    }
    if h1.layer != h2.layer {
        return Err(Error::Shape(format!("mixing layer {} with layer {}", h1.layer, h2.layer)));
    }
    if h1.batch_size() != h2.batch_size()
        || h1.states.iter().zip(&h2.states).any(|(a, b)| a.shape() != b.shape())
    {
        return Err(Error::Shape("hidden states of different shapes".into()));
    }
    let (l1, l2) = (T::of(lambda), T::of(1.0 - lambda));
    let states = h1
        .states
        .iter()
        .zip(&h2.states)
        .map(|(a, b)| {
            let mut m = a.clone();
            m.scale(l1);
            m.add_scaled(b, l2);
            m
        })
        .collect();
    // masks are leading runs of ones, so their union is the longer run
    let lengths = h1.lengths.iter().zip(&h2.lengths).map(|(&a, &b)| a.max(b)).collect();
    Ok(HiddenState { states, lengths, layer: h1.layer })
}

/// Applies `(1 + δ_mul·ξ_mul)·h + δ_add·ξ_add` elementwise with `(ξ_mul, ξ_add)`
/// supplied by `draw`, then re-zeroes padded positions. Returns the noisy
/// state and the multiplicative factors.
pub fn inject_noise_with<T: Real>(
    h: &HiddenState<T>,
    delta_add: f64,
    delta_mul: f64,
    mut draw: impl FnMut() -> (f64, f64),
) -> Result<(HiddenState<T>, Vec<Matrix<T>>)> {
    if !(delta_add >= 0.0 && delta_mul >= 0.0) {
        return Err(invalid("noise levels must be non-negative"));
    }
    let mut states = Vec::with_capacity(h.batch_size());
    let mut factors = Vec::with_capacity(h.batch_size());
    for (m, &len) in h.states.iter().zip(&h.lengths) {
        let (rows, cols) = m.shape();
        let mut out = Matrix::zeros(rows, cols);
        let mut scale = Matrix::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                let (xi_mul, xi_add) = draw();
                if r < len {
                    let s = T::of(1.0 + delta_mul * xi_mul);
                    scale.set(r, c, s);
                    out.set(r, c, s * m.get(r, c) + T::of(delta_add * xi_add));
                }
            }
        }
        states.push(out);
        factors.push(scale);
    }
    Ok((HiddenState { states, lengths: h.lengths.clone(), layer: h.layer }, factors))
}

/// [`inject_noise_with`] using i.i.d. standard normal `ξ_mul`, `ξ_add`.
pub fn inject_noise<T: Real, R: Rng + ?Sized>(
    h: &HiddenState<T>,
    delta_add: f64,
    delta_mul: f64,
    rng: &mut R,
) -> Result<HiddenState<T>> {
    let (noisy, _) = inject_noise_with(h, delta_add, delta_mul, || {
        let m: f64 = StandardNormal.sample(rng);
        let a: f64 = StandardNormal.sample(rng);
        (m, a)
    })?;
    Ok(noisy)
}

/// Pseudo representations of one noisy-mixup step.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyMix<T> {
    /// `B × dim`, every row destined for the open class.
    pub representations: Matrix<T>,
    pub layer: usize,
    pub lambda: f64,
}

/// Recorded noisy-mixup pass, able to propagate a loss gradient back into
/// both source branches.
#[derive(Debug, Clone)]
pub struct MixupTrace<T> {
    pub logits: Matrix<T>,
    pub layer: usize,
    pub lambda: f64,
    first: LowerTrace<T>,
    second: LowerTrace<T>,
    factors: Vec<Matrix<T>>,
    upper: UpperTrace<T>,
}

impl<T: Real> MixupTrace<T> {
    pub fn representations(&self) -> &Matrix<T> {
        self.upper.representations()
    }

    /// Accumulates parameter gradients of `dlogits`; noise draws are constants.
    pub fn backward(&self, p: &EncoderParams<T>, dlogits: &Matrix<T>, grads: &mut EncoderParams<T>) {
        let dmixed = self.upper.backward(p, dlogits, grads);
        let branch = |weight: f64| -> Vec<Matrix<T>> {
            dmixed
                .iter()
                .zip(&self.factors)
                .map(|(d, s)| {
                    let mut g = d.clone();
                    for (v, &f) in g.as_mut_slice().iter_mut().zip(s.as_slice()) {
                        *v *= f * T::of(weight);
                    }
                    g
                })
                .collect()
        };
        self.first.backward(p, &branch(self.lambda), grads);
        self.second.backward(p, &branch(1.0 - self.lambda), grads);
    }
}

/// Noisy mixup at a fixed layer and weight; noise drawn from `rng`.
pub fn trace_noisy_mixup_at<T: Real, R: Rng + ?Sized>(
    p: &EncoderParams<T>,
    pair: &PairedBatch,
    layer: usize,
    lambda: f64,
    delta_add: f64,
    delta_mul: f64,
    rng: &mut R,
) -> Result<MixupTrace<T>> {
    if !pair.labels_differ() {
        return Err(Error::Pairing("paired batch has same-class positions".into()));
    }
    let (h1, first) = encoder::trace_to_layer(p, &pair.first, layer)?;
    let (h2, second) = encoder::trace_to_layer(p, &pair.second, layer)?;
    let mixed = mixup(&h1, &h2, lambda)?;
    let (noisy, factors) = inject_noise_with(&mixed, delta_add, delta_mul, || {
        let m: f64 = StandardNormal.sample(rng);
        let a: f64 = StandardNormal.sample(rng);
        (m, a)
    })?;
    let (logits, upper) = encoder::trace_from_layer(p, &noisy)?;
    Ok(MixupTrace { logits, layer, lambda, first, second, factors, upper })
}

/// Full noisy-mixup step: pick the layer, draw λ, mix, perturb, resume.
pub fn trace_noisy_mixup<T: Real, R: Rng + ?Sized>(
    p: &EncoderParams<T>,
    pair: &PairedBatch,
    cfg: &MixupConfig,
    rng: &mut R,
) -> Result<MixupTrace<T>> {
    cfg.validate()?;
    let layer = select_mix_layer(cfg.layer_range(p.config.layers)?, rng)?;
    let lambda = sample_lambda(cfg.alpha, rng)?;
    trace_noisy_mixup_at(p, pair, layer, lambda, cfg.delta_add, cfg.delta_mul, rng)
}

pub fn noisy_mixup_batch<T: Real, R: Rng + ?Sized>(
    p: &EncoderParams<T>,
    pair: &PairedBatch,
    cfg: &MixupConfig,
    rng: &mut R,
) -> Result<NoisyMix<T>> {
    let t = trace_noisy_mixup(p, pair, cfg, rng)?;
    Ok(NoisyMix { representations: t.representations().clone(), layer: t.layer, lambda: t.lambda })
}
