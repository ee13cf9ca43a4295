use proptest::prelude::*;
use snoic_core::corpus::*;
use snoic_core::synthetic::{numbered_corpus, templated_corpus};

fn encode_all(ds: &ClassDataset, max_len: usize) -> EncodedDataset {
    let vocab = build_vocab(ds.examples.iter().map(|e| e.text.as_str()), 1, 1000).unwrap();
    EncodedDataset::new(ds, &vocab, max_len).unwrap()
}

#[test]
fn known_counts_for_a_77_class_manifest() {
    let ds = numbered_corpus(77, 1).unwrap();
    assert_eq!(ds.label_set().len(), 77);
    for (r, m) in [(0.25, 19), (0.5, 38), (0.75, 57)] {
        let s = make_split(&ds, r, 3).unwrap();
        assert_eq!(s.num_known(), m);
        assert_eq!(s.open.len(), 77 - m);
    }
}

#[test]
fn pairing_invariant_on_large_five_class_set() {
    let ds = templated_corpus(5, 200, 1).unwrap();
    let spec = SplitSpec { seed: 0, r: 0.5, known: ds.label_set().to_vec(), open: vec![] };
    let enc = encode_all(&apply_split(&ds, &spec, Role::Train).unwrap(), 12);
    assert_eq!(enc.len(), 1000);
    for seed in 0..100 {
        let pairs = pair_batches(&enc, 32, seed).unwrap();
        assert!(pairs.iter().all(PairedBatch::labels_differ), "seed {seed}");
        // balanced classes never need dropping
        assert_eq!(pairs.iter().map(PairedBatch::len).sum::<usize>(), 1000);
    }
}

#[test]
fn epoch_seeds_give_fresh_orderings() {
    let ds = templated_corpus(3, 20, 1).unwrap();
    let spec = SplitSpec { seed: 0, r: 0.5, known: ds.label_set().to_vec(), open: vec![] };
    let enc = encode_all(&apply_split(&ds, &spec, Role::Train).unwrap(), 12);
    let a = make_batches(&enc, 8, epoch_seed(5, 1)).unwrap();
    let b = make_batches(&enc, 8, epoch_seed(5, 2)).unwrap();
    assert_ne!(a, b);
    assert_eq!(a, make_batches(&enc, 8, epoch_seed(5, 1)).unwrap());
}

fn arb_labels() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1usize..6, 2..60)
}

proptest! {
    #[test]
    fn split_is_a_deterministic_partition(k in 2usize..120, r in 0.01f64..0.99, seed in any::<u64>()) {
        let ds = numbered_corpus(k, 1).unwrap();
        let s = make_split(&ds, r, seed).unwrap();
        prop_assert_eq!(&s, &make_split(&ds, r, seed).unwrap());
        let mut all: Vec<String> = s.known.iter().chain(&s.open).cloned().collect();
        all.sort();
        prop_assert_eq!(all.as_slice(), ds.label_set());
        prop_assert_eq!(s.num_known(), ((r * k as f64).floor() as usize).max(1));
        let train = apply_split(&ds, &s, Role::Train).unwrap();
        prop_assert!(train.examples.iter().all(|e| e.class_id <= s.num_known()));
    }

    #[test]
    fn subsample_is_monotone(sizes in prop::collection::vec(1usize..30, 1..6), r1 in 0.01f64..1.0, r2 in 0.01f64..1.0, seed in any::<u64>()) {
        let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
        let mut examples = Vec::new();
        for (c, &n) in sizes.iter().enumerate() {
            for i in 0..n {
                examples.push(ClassExample { text: format!("c{c} {i}"), class_id: c + 1 });
            }
        }
        let ds = ClassDataset { examples, num_known: sizes.len() };
        let small = subsample_labeled(&ds, lo, seed).unwrap();
        let large = subsample_labeled(&ds, hi, seed).unwrap();
        prop_assert!(small.examples.iter().all(|e| large.examples.contains(e)));
        for (c, &n) in sizes.iter().enumerate() {
            prop_assert_eq!(small.class_counts()[c + 1], ((lo * n as f64).ceil() as usize).clamp(1, n));
        }
    }

    #[test]
    fn pairs_always_differ(labels in arb_labels(), seed in any::<u64>(), bs in 1usize..16) {
        prop_assume!(labels.iter().any(|&l| l != labels[0]));
        let examples = labels.iter().map(|&l| ClassExample { text: "x".into(), class_id: l }).collect();
        let enc = encode_all(&ClassDataset { examples, num_known: 5 }, 4);
        let pairs = pair_batches(&enc, bs, seed).unwrap();
        prop_assert!(pairs.iter().all(PairedBatch::labels_differ));
        prop_assert!(pairs.iter().all(|p| p.len() <= bs && p.first.len() == p.second.len()));
    }

    #[test]
    fn token_rows_have_fixed_width(text in "[a-z ,.!]{0,80}", max_len in 2usize..20) {
        let vocab = build_vocab(["a b c"].iter().copied(), 1, 10).unwrap();
        let seq = tokenize(&text, &vocab, max_len).unwrap();
        prop_assert_eq!(seq.ids.len(), max_len);
        prop_assert!(seq.length >= 1 && seq.length <= max_len);
        prop_assert!(seq.ids[seq.length..].iter().all(|&i| i == PAD_ID));
    }
}
