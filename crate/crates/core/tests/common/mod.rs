#![allow(dead_code)]

use rand::Rng;
use snoic_core::corpus::{Batch, PairedBatch};
use snoic_core::encoder::{init_params, EncoderConfig, EncoderParams};
use snoic_core::seeded_rng;

pub fn small_config(attention: bool) -> EncoderConfig {
    EncoderConfig { vocab_size: 12, hidden: 6, layers: 2, ffn: 10, dim: 5, max_len: 6, attention }
}

/// Parameters with every tensor (biases and gains included) randomized so
/// that no gradient path is trivially zero.
pub fn random_params(cfg: &EncoderConfig, num_known: usize, seed: u64) -> EncoderParams<f64> {
    let mut p = init_params::<f64>(cfg, num_known, seed).unwrap();
    let mut rng = seeded_rng(seed ^ 0xabc);
    for (name, t) in p.tensors_mut() {
        for v in t.as_mut_slice() {
            if name.ends_with(".gain") {
                *v = rng.random_range(0.5..1.5);
            } else if name.ends_with("bias") {
                *v = rng.random_range(-0.3..0.3);
            } else {
                *v += rng.random_range(-0.2..0.2);
            }
        }
    }
    p
}

pub fn random_batch(cfg: &EncoderConfig, size: usize, num_classes: usize, seed: u64) -> Batch {
    let mut rng = seeded_rng(seed);
    let mut ids = Vec::new();
    let mut lengths = Vec::new();
    let mut labels = Vec::new();
    for i in 0..size {
        let len = rng.random_range(1..=cfg.max_len);
        ids.push(2);
        for t in 1..cfg.max_len {
            ids.push(if t < len { rng.random_range(1..cfg.vocab_size as u32) } else { 0 });
        }
        lengths.push(len);
        labels.push(i % num_classes + 1);
    }
    Batch { ids, lengths, labels, max_len: cfg.max_len }
}

pub fn random_pair(cfg: &EncoderConfig, size: usize, num_classes: usize, seed: u64) -> PairedBatch {
    let first = random_batch(cfg, size, num_classes, seed);
    let mut second = random_batch(cfg, size, num_classes, seed + 1000);
    second.labels = first.labels.iter().map(|&y| y % num_classes + 1).collect();
    PairedBatch { first, second }
}
