mod common;

use common::{random_pair, random_params, small_config};
use snoic_core::augment::{
    inject_noise, mixup, noisy_mixup_batch, sample_lambda, select_mix_layer, trace_noisy_mixup_at, LayerRange,
    MixupConfig,
};
use snoic_core::encoder::{forward, forward_to_layer, EncoderParams};
use snoic_core::losses;
use snoic_core::seeded_rng;

#[test]
fn beta_draws_are_symmetric_and_uniform_at_one() {
    let n = 100_000;
    for alpha in [0.5f64, 1.0, 2.0, 5.0] {
        let mut rng = seeded_rng(alpha.to_bits());
        let draws: Vec<f64> = (0..n).map(|_| sample_lambda(alpha, &mut rng).unwrap()).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() <= 0.01, "alpha={alpha} mean={mean}");
        if alpha == 1.0 {
            let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
            assert!((var - 1.0 / 12.0).abs() <= 0.005, "var={var}");
        }
        // Beta(a, a) variance is 1 / (4 (2a + 1))
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!((var - 1.0 / (4.0 * (2.0 * alpha + 1.0))).abs() < 0.005, "alpha={alpha} var={var}");
    }
}

#[test]
fn layer_frequencies_are_uniform() {
    let mut rng = seeded_rng(3);
    let mut counts = [0usize; 4];
    let n = 10_000;
    for _ in 0..n {
        counts[select_mix_layer(LayerRange { first: 1, last: 4 }, &mut rng).unwrap() - 1] += 1;
    }
    for c in counts {
        assert!((c as f64 / n as f64 - 0.25).abs() <= 0.02, "{counts:?}");
    }
}

#[test]
fn endpoint_identities_reproduce_plain_forward() {
    let cfg = small_config(true);
    let m = 3;
    let p = random_params(&cfg, m, 1);
    let pair = random_pair(&cfg, 4, m, 2);
    for layer in 1..=cfg.layers {
        for (lambda, branch) in [(1.0, &pair.first), (0.0, &pair.second)] {
            let t = trace_noisy_mixup_at(&p, &pair, layer, lambda, 0.0, 0.0, &mut seeded_rng(0)).unwrap();
            let plain = forward(&p, branch).unwrap();
            // union mask keeps the longer sequence, so compare rows of equal length only
            for i in 0..pair.len() {
                if pair.first.lengths[i] == pair.second.lengths[i] {
                    let d = t.representations().row(i).iter().zip(plain.representations.row(i));
                    assert!(d.map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) < 1e-6);
                }
            }
        }
    }
}

#[test]
fn endpoint_identity_on_equal_lengths() {
    let cfg = small_config(true);
    let p = random_params(&cfg, 2, 4);
    let mut pair = random_pair(&cfg, 3, 2, 5);
    pair.second.lengths = pair.first.lengths.clone();
    for i in 0..3 {
        for t in pair.second.lengths[i]..cfg.max_len {
            pair.second.ids[i * cfg.max_len + t] = 0;
        }
        for t in 1..pair.second.lengths[i] {
            if pair.second.ids[i * cfg.max_len + t] == 0 {
                pair.second.ids[i * cfg.max_len + t] = 4;
            }
        }
    }
    for (lambda, branch) in [(1.0, &pair.first), (0.0, &pair.second)] {
        let t = trace_noisy_mixup_at(&p, &pair, 2, lambda, 0.0, 0.0, &mut seeded_rng(1)).unwrap();
        let plain = forward(&p, branch).unwrap();
        assert!(t.representations().max_abs_diff(&plain.representations) < 1e-6);
    }
}

#[test]
fn zero_noise_mix_is_deterministic_and_convex() {
    let cfg = small_config(true);
    let p = random_params(&cfg, 3, 6);
    let pair = random_pair(&cfg, 4, 3, 7);
    let a = trace_noisy_mixup_at(&p, &pair, 1, 0.4, 0.0, 0.0, &mut seeded_rng(1)).unwrap();
    let b = trace_noisy_mixup_at(&p, &pair, 1, 0.4, 0.0, 0.0, &mut seeded_rng(99)).unwrap();
    assert_eq!(a.logits, b.logits);

    let h1 = forward_to_layer(&p, &pair.first, 1).unwrap();
    let h2 = forward_to_layer(&p, &pair.second, 1).unwrap();
    let mixed = mixup(&h1, &h2, 0.4).unwrap();
    for i in 0..4 {
        for ((&m, &x), &y) in mixed.states[i].as_slice().iter().zip(h1.states[i].as_slice()).zip(h2.states[i].as_slice()) {
            assert!(m >= x.min(y) - 1e-15 && m <= x.max(y) + 1e-15);
        }
    }
}

#[test]
fn noise_is_unbiased() {
    let cfg = small_config(false);
    let p = random_params(&cfg, 2, 8);
    let pair = random_pair(&cfg, 2, 2, 9);
    let h1 = forward_to_layer(&p, &pair.first, 1).unwrap();
    let h2 = forward_to_layer(&p, &pair.second, 1).unwrap();
    let mixed = mixup(&h1, &h2, 0.3).unwrap();
    let n = 10_000;
    let (da, dm) = (0.4, 0.2);
    let mut rng = seeded_rng(10);
    let mut sum = mixed.clone();
    sum.states.iter_mut().for_each(|s| s.fill_zero());
    for _ in 0..n {
        let noisy = inject_noise(&mixed, da, dm, &mut rng).unwrap();
        for (s, x) in sum.states.iter_mut().zip(&noisy.states) {
            s.add_assign(x);
        }
    }
    for (s, x) in sum.states.iter().zip(&mixed.states) {
        for (&total, &mu) in s.as_slice().iter().zip(x.as_slice()) {
            let mean = total / n as f64;
            let sigma = ((dm * mu).powi(2) + da * da).sqrt();
            assert!((mean - mu).abs() <= 4.0 * sigma / (n as f64).sqrt() + 1e-12, "{mean} vs {mu}");
        }
    }
}

#[test]
fn noisy_mixup_batch_shape_and_finiteness() {
    let cfg = small_config(true);
    let p = random_params(&cfg, 3, 11);
    let pair = random_pair(&cfg, 5, 3, 12);
    let out = noisy_mixup_batch(&p, &pair, &MixupConfig::default(), &mut seeded_rng(13)).unwrap();
    assert_eq!(out.representations.shape(), (5, cfg.dim));
    assert!(out.representations.is_finite());
    assert!((1..=cfg.layers).contains(&out.layer));
    assert!((0.0..=1.0).contains(&out.lambda));
    let mut bad = pair.clone();
    bad.second.labels = bad.first.labels.clone();
    assert!(noisy_mixup_batch(&p, &bad, &MixupConfig::default(), &mut seeded_rng(13)).is_err());
}

#[test]
fn interior_lambda_sends_gradient_to_both_branches() {
    let cfg = small_config(true);
    let p = random_params(&cfg, 3, 14);
    let pair = random_pair(&cfg, 3, 3, 15);
    let t = trace_noisy_mixup_at(&p, &pair, 1, 0.5, 0.4, 0.2, &mut seeded_rng(16)).unwrap();
    let loss = losses::mixup_loss(&t.logits);
    let mut g = EncoderParams::zeros_like(&p);
    t.backward(&p, &loss.grad, &mut g);
    let row_norm = |id: u32| g.token_embedding.row(id as usize).iter().map(|v| v.abs()).sum::<f64>();
    let only = |mine: &snoic_core::corpus::Batch, other: &snoic_core::corpus::Batch| -> Option<u32> {
        let theirs: Vec<u32> = (0..other.len()).flat_map(|i| other.row(i)[..other.lengths[i]].to_vec()).collect();
        (0..mine.len()).flat_map(|i| mine.row(i)[..mine.lengths[i]].to_vec()).find(|id| !theirs.contains(id))
    };
    if let Some(id) = only(&pair.first, &pair.second) {
        assert!(row_norm(id) > 0.0);
    }
    if let Some(id) = only(&pair.second, &pair.first) {
        assert!(row_norm(id) > 0.0);
    }
    // the CLS embedding is read by both branches
    assert!(row_norm(2) > 0.0);
}
