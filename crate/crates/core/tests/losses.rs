use proptest::prelude::*;
use snoic_core::losses::*;
use snoic_core::Matrix;

fn logits_strategy(rows: usize, cols: usize, mag: f64) -> impl Strategy<Value = Matrix<f64>> {
    prop::collection::vec(-mag..mag, rows * cols).prop_map(move |v| Matrix::from_vec(rows, cols, v))
}

proptest! {
    #[test]
    fn softmax_normalizes_large_logits(z in prop::collection::vec(-1e4f64..1e4, 1..12)) {
        let p = softmax(&z);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        prop_assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn losses_are_shift_invariant(z in logits_strategy(3, 4, 10.0), shift in -50.0f64..50.0) {
        let shifted = z.map(|v| v + shift);
        let t: Vec<SoftTarget<f64>> = [1, 3, 2].iter().map(|&y| soft_target(y, 3, 0.3).unwrap()).collect();
        let pairs = [
            (kl_loss(&t, &z).unwrap().value, kl_loss(&t, &shifted).unwrap().value),
            (mixup_loss(&z).value, mixup_loss(&shifted).value),
            (pretrain_loss(&z, &[1, 3, 2], 3).unwrap().value, pretrain_loss(&shifted, &[1, 3, 2], 3).unwrap().value),
        ];
        for (a, b) in pairs {
            prop_assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn kl_is_non_negative(z in logits_strategy(4, 5, 20.0), y in prop::collection::vec(1usize..5, 4), rho in 0.0f64..0.999) {
        let t: Vec<SoftTarget<f64>> = y.iter().map(|&c| soft_target(c, 4, rho).unwrap()).collect();
        prop_assert!(kl_loss(&t, &z).unwrap().value >= -1e-12);
    }

    #[test]
    fn soft_target_sums_to_one(rho in 0.0f64..0.999, m in 1usize..20, y_frac in 0.0f64..1.0) {
        let y = 1 + ((m - 1) as f64 * y_frac) as usize;
        let t: SoftTarget<f64> = soft_target(y, m, rho).unwrap();
        prop_assert!((t.probs.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        prop_assert!(t.probs.iter().all(|&p| p >= 0.0));
    }

    #[test]
    fn total_loss_is_between_its_parts(a in 0.0f64..5.0, b in 0.0f64..5.0, gamma in 0.0f64..=1.0) {
        let kl = LossValue { value: a, grad: Matrix::zeros(1, 1) };
        let nm = LossValue { value: b, grad: Matrix::zeros(1, 1) };
        let t = total_loss(kl, nm, gamma).unwrap().value;
        prop_assert!(t >= a.min(b) - 1e-12 && t <= a.max(b) + 1e-12);
    }
}

#[test]
fn kl_floor_keeps_underflow_finite() {
    let z = Matrix::from_rows(&[&[0.0f64, -2000.0]]);
    let t = SoftTarget { probs: vec![0.5, 0.5] };
    let l = kl_loss(&[t], &z).unwrap();
    assert!(l.value.is_finite());
    // 0.5 ln 0.5 - 0.5 ln 1 + 0.5 ln 0.5 - 0.5 ln 1e-12
    let expected = 0.5f64.ln() - 0.5 * LOG_FLOOR.ln();
    assert!((l.value - expected).abs() < 1e-9);
}
