//! Corpora, tokenization, the known/open split protocol and batch assembly.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::seeded_rng;

pub const PAD_ID: u32 = 0;
pub const UNK_ID: u32 = 1;
pub const CLS_ID: u32 = 2;
pub const PAD_TOKEN: &str = "[PAD]";
pub const UNK_TOKEN: &str = "[UNK]";
pub const CLS_TOKEN: &str = "[CLS]";

/// One utterance and its intent name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub text: String,
    pub label: String,
}

impl LabeledExample {
    pub fn new(text: impl Into<String>, label: impl Into<String>) -> Result<Self> {
        let ex = Self { text: text.into(), label: label.into() };
        ex.validate()?;
        Ok(ex)
    }

    pub fn validate(&self) -> Result<()> {
        if self.text.trim().is_empty() {
            return Err(invalid("example text is empty"));
        }
        if self.label.is_empty() {
            return Err(invalid("example label is empty"));
        }
        Ok(())
    }
}

/// Examples in source order plus the sorted set of distinct intent names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    examples: Vec<LabeledExample>,
    label_set: Vec<String>,
}

impl Dataset {
    pub fn new(examples: Vec<LabeledExample>) -> Result<Self> {
        for ex in &examples {
            ex.validate()?;
        }
        let label_set: BTreeSet<&str> = examples.iter().map(|e| e.label.as_str()).collect();
        let label_set = label_set.into_iter().map(String::from).collect();
        Ok(Self { examples, label_set })
    }

    pub fn examples(&self) -> &[LabeledExample] {
        &self.examples
    }

    pub fn label_set(&self) -> &[String] {
        &self.label_set
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }
}

/// Lowercased word tokens; whitespace and punctuation both separate tokens.
pub fn split_words(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(|w| w.to_lowercase())
}

/// Token to id mapping with ids 0/1/2 reserved for padding, unknown and CLS.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: BTreeMap<String, u32>,
}

impl Vocab {
    /// Rebuilds a vocabulary from tokens listed in id order.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < 3
            || tokens[PAD_ID as usize] != PAD_TOKEN
            || tokens[UNK_ID as usize] != UNK_TOKEN
            || tokens[CLS_ID as usize] != CLS_TOKEN
        {
            return Err(Error::VocabMismatch("reserved tokens missing from vocabulary".into()));
        }
        let mut index = BTreeMap::new();
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i as u32).is_some() {
                return Err(Error::VocabMismatch(format!("duplicate token `{t}`")));
            }
        }
        Ok(Self { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn id_or_unk(&self, token: &str) -> u32 {
        self.id(token).unwrap_or(UNK_ID)
    }
}

/// Counts tokens of `texts` and keeps those seen at least `min_freq` times,
/// most frequent first (ties lexicographic), up to `max_size` ids in total.
pub fn build_vocab<'a>(
    texts: impl IntoIterator<Item = &'a str>,
    min_freq: usize,
    max_size: usize,
) -> Result<Vocab> {
    if min_freq < 1 {
        return Err(invalid("min_freq must be at least 1"));
    }
    if max_size < 3 {
        return Err(invalid("max_size must be at least 3"));
    }
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for text in texts {
        for w in split_words(text) {
            *counts.entry(w).or_default() += 1;
        }
    }
    let mut ranked: Vec<(String, usize)> =
        counts.into_iter().filter(|(_, c)| *c >= min_freq).collect();
    // BTreeMap order is lexicographic, so a stable sort keeps the tie-break.
    ranked.sort_by_key(|&(_, c)| core::cmp::Reverse(c));
    let mut tokens: Vec<String> =
        [PAD_TOKEN, UNK_TOKEN, CLS_TOKEN].iter().map(|s| s.to_string()).collect();
    tokens.extend(ranked.into_iter().take(max_size - 3).map(|(t, _)| t));
    Vocab::from_tokens(tokens)
}

pub fn build_vocab_from_dataset(ds: &Dataset, min_freq: usize, max_size: usize) -> Result<Vocab> {
    build_vocab(ds.examples().iter().map(|e| e.text.as_str()), min_freq, max_size)
}

/// CLS-prefixed token ids padded to a fixed width.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSeq {
    pub ids: Vec<u32>,
    /// Real tokens including CLS.
    pub length: usize,
}

pub fn tokenize(text: &str, vocab: &Vocab, max_len: usize) -> Result<TokenSeq> {
    if max_len < 2 {
        return Err(invalid("max_len must be at least 2"));
    }
    let mut ids = Vec::with_capacity(max_len);
    ids.push(CLS_ID);
    ids.extend(split_words(text).take(max_len - 1).map(|w| vocab.id_or_unk(&w)));
    let length = ids.len();
    ids.resize(max_len, PAD_ID);
    Ok(TokenSeq { ids, length })
}

/// Seeded known/open class assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    pub seed: u64,
    pub r: f64,
    /// Known intents; position `i` holds class id `i + 1`.
    pub known: Vec<String>,
    pub open: Vec<String>,
}

impl SplitSpec {
    /// M, the number of known classes.
    pub fn num_known(&self) -> usize {
        self.known.len()
    }

    /// Class id of the open intent, M+1.
    pub fn open_id(&self) -> usize {
        self.known.len() + 1
    }

    pub fn known_index(&self) -> BTreeMap<&str, usize> {
        self.known.iter().enumerate().map(|(i, n)| (n.as_str(), i + 1)).collect()
    }

    /// Class id of an intent name: 1..=M for known, M+1 for open.
    pub fn class_id(&self, label: &str) -> Result<usize> {
        if let Some(i) = self.known.iter().position(|k| k == label) {
            Ok(i + 1)
        } else if self.open.iter().any(|o| o == label) {
            Ok(self.open_id())
        } else {
            Err(Error::UnknownLabel(label.to_string()))
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r > 0.0 && self.r < 1.0) {
            return Err(invalid(format!("known-class ratio {} outside (0, 1)", self.r)));
        }
        if self.known.is_empty() {
            return Err(invalid("split has no known classes"));
        }
        let mut seen = BTreeSet::new();
        for name in self.known.iter().chain(&self.open) {
            if !seen.insert(name.as_str()) {
                return Err(invalid(format!("intent `{name}` listed twice in split")));
            }
        }
        Ok(())
    }
}

/// Number of known classes for `num_classes` intents at ratio `r`: ⌊r·K⌋, at least 1.
pub fn known_class_count(num_classes: usize, r: f64) -> usize {
    Float::floor(r * num_classes as f64).max(1.0) as usize
}

pub fn make_split(ds: &Dataset, r: f64, seed: u64) -> Result<SplitSpec> {
    if !(r > 0.0 && r < 1.0) {
        return Err(invalid(format!("known-class ratio {r} outside (0, 1)")));
    }
    let k = ds.label_set().len();
    if k < 2 {
        return Err(invalid(format!("need at least 2 intent classes, found {k}")));
    }
    let mut labels = ds.label_set().to_vec();
    labels.shuffle(&mut seeded_rng(seed));
    let m = known_class_count(k, r);
    let open = labels.split_off(m);
    Ok(SplitSpec { seed, r, known: labels, open })
}

/// Data partition a split is applied for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Train,
    Val,
    Test,
}

/// An utterance with its class id in 1..=M+1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassExample {
    pub text: String,
    pub class_id: usize,
}

/// Examples relabeled to class ids under a split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassDataset {
    pub examples: Vec<ClassExample>,
    pub num_known: usize,
}

impl ClassDataset {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn open_id(&self) -> usize {
        self.num_known + 1
    }

    /// Example count per class id, indexed `0..=M+1` (slot 0 unused).
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_known + 2];
        for ex in &self.examples {
            counts[ex.class_id] += 1;
        }
        counts
    }
}

/// Train and val keep only known-class examples (ids 1..=M); test keeps
/// everything and maps open intents to M+1.
pub fn apply_split(ds: &Dataset, spec: &SplitSpec, role: Role) -> Result<ClassDataset> {
    let index = spec.known_index();
    let open: BTreeSet<&str> = spec.open.iter().map(String::as_str).collect();
    let mut examples = Vec::new();
    for ex in ds.examples() {
        let class_id = match index.get(ex.label.as_str()) {
            Some(&id) => id,
            None if open.contains(ex.label.as_str()) => {
                if role != Role::Test {
                    continue;
                }
                spec.open_id()
            }
            None => return Err(Error::UnknownLabel(ex.label.clone())),
        };
        examples.push(ClassExample { text: ex.text.clone(), class_id });
    }
    Ok(ClassDataset { examples, num_known: spec.num_known() })
}

/// Keeps ⌈ratio·n_c⌉ examples of every class (never zero for a nonempty class).
///
/// Each class is permuted once per seed and the kept examples are a prefix of
/// that permutation, so smaller ratios select subsets of larger ones.
pub fn subsample_labeled(ds: &ClassDataset, ratio: f64, seed: u64) -> Result<ClassDataset> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(invalid(format!("labeled-data ratio {ratio} outside (0, 1]")));
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, ex) in ds.examples.iter().enumerate() {
        by_class.entry(ex.class_id).or_default().push(i);
    }
    let mut rng = seeded_rng(seed);
    let mut keep = vec![false; ds.len()];
    for idx in by_class.values_mut() {
        idx.shuffle(&mut rng);
        let n = (Float::ceil(ratio * idx.len() as f64) as usize).clamp(1, idx.len());
        for &i in &idx[..n] {
            keep[i] = true;
        }
    }
    let examples = ds
        .examples
        .iter()
        .zip(&keep)
        .filter(|(_, &k)| k)
        .map(|(e, _)| e.clone())
        .collect();
    Ok(ClassDataset { examples, num_known: ds.num_known })
}

/// Tokenized examples ready for batching.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedDataset {
    pub seqs: Vec<TokenSeq>,
    pub labels: Vec<usize>,
    pub num_known: usize,
    pub max_len: usize,
}

impl EncodedDataset {
    pub fn new(ds: &ClassDataset, vocab: &Vocab, max_len: usize) -> Result<Self> {
        let seqs = ds
            .examples
            .iter()
            .map(|e| tokenize(&e.text, vocab, max_len))
            .collect::<Result<Vec<_>>>()?;
        let labels = ds.examples.iter().map(|e| e.class_id).collect();
        Ok(Self { seqs, labels, num_known: ds.num_known, max_len })
    }

    pub fn len(&self) -> usize {
        self.seqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seqs.is_empty()
    }

    /// Batch of the examples at `indices`, in that order.
    pub fn gather(&self, indices: &[usize]) -> Batch {
        let mut ids = Vec::with_capacity(indices.len() * self.max_len);
        let mut lengths = Vec::with_capacity(indices.len());
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            ids.extend_from_slice(&self.seqs[i].ids);
            lengths.push(self.seqs[i].length);
            labels.push(self.labels[i]);
        }
        Batch { ids, lengths, labels, max_len: self.max_len }
    }

    /// Contiguous batches in dataset order (no shuffling), for inference.
    pub fn sequential_batches(&self, batch_size: usize) -> Vec<Batch> {
        let order: Vec<usize> = (0..self.len()).collect();
        order.chunks(batch_size.max(1)).map(|c| self.gather(c)).collect()
    }
}

/// B sequences of width `max_len`; row `i` has `lengths[i]` leading real tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    /// Row-major `B × max_len` token ids.
    pub ids: Vec<u32>,
    pub lengths: Vec<usize>,
    /// Class ids in 1..=M+1.
    pub labels: Vec<usize>,
    pub max_len: usize,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.lengths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lengths.is_empty()
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.ids[i * self.max_len..(i + 1) * self.max_len]
    }

    /// Row-major `B × max_len` 0/1 mask.
    pub fn mask(&self) -> Vec<u8> {
        let mut m = vec![0u8; self.ids.len()];
        for (i, &len) in self.lengths.iter().enumerate() {
            m[i * self.max_len..i * self.max_len + len].fill(1);
        }
        m
    }
}

/// Shuffle seed for a given epoch.
pub fn epoch_seed(seed: u64, epoch: usize) -> u64 {
    seed ^ epoch as u64
}

/// Seeded shuffle sliced into contiguous batches; the last may be short.
pub fn make_batches(ds: &EncodedDataset, batch_size: usize, seed: u64) -> Result<Vec<Batch>> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset("cannot batch an empty dataset".into()));
    }
    if batch_size == 0 {
        return Err(invalid("batch_size must be at least 1"));
    }
    let mut order: Vec<usize> = (0..ds.len()).collect();
    order.shuffle(&mut seeded_rng(seed));
    Ok(order.chunks(batch_size).map(|c| ds.gather(c)).collect())
}

/// Two aligned batches whose same-position examples carry different classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairedBatch {
    pub first: Batch,
    pub second: Batch,
}

impl PairedBatch {
    pub fn len(&self) -> usize {
        self.first.len()
    }

    pub fn is_empty(&self) -> bool {
        self.first.is_empty()
    }

    pub fn labels_differ(&self) -> bool {
        self.first.len() == self.second.len()
            && self.first.labels.iter().zip(&self.second.labels).all(|(a, b)| a != b)
    }
}

/// Aligns two independent shuffles of `ds` so that every position pairs
/// different classes, then slices the pairing into batches.
///
/// A colliding position swaps its second element with the nearest later
/// position (wrapping) whose element has a different class and whose own
/// pairing stays valid after the swap. Positions with no such partner (only
/// possible when one class holds more than half the data) are dropped.
pub fn pair_batches(
    ds: &EncodedDataset,
    batch_size: usize,
    seed: u64,
) -> Result<Vec<PairedBatch>> {
    if batch_size == 0 {
        return Err(invalid("batch_size must be at least 1"));
    }
    let distinct: BTreeSet<usize> = ds.labels.iter().copied().collect();
    if distinct.len() < 2 {
        return Err(Error::Pairing(format!(
            "need at least 2 distinct classes, found {}",
            distinct.len()
        )));
    }
    let mut rng = seeded_rng(seed);
    let mut first: Vec<usize> = (0..ds.len()).collect();
    first.shuffle(&mut rng);
    let mut second: Vec<usize> = (0..ds.len()).collect();
    second.shuffle(&mut rng);

    let n = first.len();
    let label = |i: usize| ds.labels[i];
    let mut valid = vec![true; n];
    for i in 0..n {
        if label(first[i]) != label(second[i]) {
            continue;
        }
        let partner = (1..n).map(|k| (i + k) % n).find(|&j| {
            label(second[j]) != label(first[i]) && label(second[i]) != label(first[j])
        });
        match partner {
            Some(j) => second.swap(i, j),
            None => valid[i] = false,
        }
    }
    let pairs: Vec<(usize, usize)> = (0..n)
        .filter(|&i| valid[i] && label(first[i]) != label(second[i]))
        .map(|i| (first[i], second[i]))
        .collect();
    if pairs.is_empty() {
        return Err(Error::Pairing("no different-class pairs could be formed".into()));
    }
    Ok(pairs
        .chunks(batch_size)
        .map(|chunk| {
            let a: Vec<usize> = chunk.iter().map(|p| p.0).collect();
            let b: Vec<usize> = chunk.iter().map(|p| p.1).collect();
            PairedBatch { first: ds.gather(&a), second: ds.gather(&b) }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds(rows: &[(&str, &str)]) -> Dataset {
        Dataset::new(rows.iter().map(|(t, l)| LabeledExample::new(*t, *l).unwrap()).collect())
            .unwrap()
    }

    fn n_class_dataset(k: usize) -> Dataset {
        let rows: Vec<LabeledExample> = (0..k)
            .map(|i| LabeledExample::new("some text", format!("intent_{i:03}")).unwrap())
            .collect();
        Dataset::new(rows).unwrap()
    }

    #[test]
    fn label_set_is_sorted_and_distinct() {
        let d = ds(&[("play jazz", "music"), ("book a flight", "flight"), ("more", "music")]);
        assert_eq!(d.label_set(), &["flight".to_string(), "music".to_string()]);
        assert_eq!(d.len(), 3);
    }

    #[test]
    fn rejects_blank_text() {
        assert!(LabeledExample::new("   ", "x").is_err());
        assert!(LabeledExample::new("hi", "").is_err());
    }

    #[test]
    fn vocab_counts_and_filters() {
        let corpus = ["a b", "a c"];
        let v = build_vocab(corpus.iter().copied(), 1, 100).unwrap();
        assert_eq!(v.len(), 6);
        assert_eq!(v.id("a"), Some(3));
        let v = build_vocab(corpus.iter().copied(), 2, 100).unwrap();
        assert_eq!(v.len(), 4);
        assert_eq!(v.id("a"), Some(3));
        let v = build_vocab(corpus.iter().copied(), 1, 4).unwrap();
        assert_eq!(v.tokens()[3], "a");
        assert_eq!(v.len(), 4);
    }

    #[test]
    fn empty_corpus_vocab_has_reserved_ids_only() {
        let v = build_vocab(core::iter::empty(), 1, 10).unwrap();
        assert_eq!(v.len(), 3);
        assert_eq!(v.id(CLS_TOKEN), Some(CLS_ID));
    }

    #[test]
    fn vocab_lowercases_and_splits_punctuation() {
        let v = build_vocab(["Hello, WORLD!hello"].iter().copied(), 1, 10).unwrap();
        assert_eq!(v.tokens(), &["[PAD]", "[UNK]", "[CLS]", "hello", "world"]);
    }

    #[test]
    fn tokenize_pads_and_maps_unknown() {
        let v = build_vocab(["a b"].iter().copied(), 1, 10).unwrap();
        let (a, b) = (v.id("a").unwrap(), v.id("b").unwrap());
        let s = tokenize("a b", &v, 4).unwrap();
        assert_eq!(s.ids, vec![CLS_ID, a, b, PAD_ID]);
        assert_eq!(s.length, 3);
        let s = tokenize("a z", &v, 4).unwrap();
        assert_eq!(s.ids, vec![CLS_ID, a, UNK_ID, PAD_ID]);
        let s = tokenize("a b a b a b a b a b", &v, 4).unwrap();
        assert_eq!(s.ids, vec![CLS_ID, a, b, a]);
        assert_eq!(s.length, 4);
        assert!(tokenize("a", &v, 1).is_err());
    }

    #[test]
    fn split_counts_follow_floor_rule() {
        assert_eq!(make_split(&n_class_dataset(77), 0.25, 0).unwrap().num_known(), 19);
        assert_eq!(make_split(&n_class_dataset(150), 0.75, 0).unwrap().num_known(), 112);
        let s = make_split(&n_class_dataset(2), 0.25, 0).unwrap();
        assert_eq!((s.num_known(), s.open.len()), (1, 1));
    }

    #[test]
    fn split_rejects_bad_inputs() {
        assert!(make_split(&n_class_dataset(5), 1.5, 0).is_err());
        assert!(make_split(&n_class_dataset(5), 0.0, 0).is_err());
        assert!(make_split(&n_class_dataset(1), 0.5, 0).is_err());
    }

    #[test]
    fn apply_split_filters_and_relabels() {
        let mut rows = Vec::new();
        for i in 0..10 {
            rows.push(LabeledExample::new(format!("k {i}"), "known").unwrap());
        }
        for i in 0..5 {
            rows.push(LabeledExample::new(format!("o {i}"), "open").unwrap());
        }
        let d = Dataset::new(rows).unwrap();
        let spec = SplitSpec { seed: 0, r: 0.5, known: vec!["known".into()], open: vec!["open".into()] };
        let train = apply_split(&d, &spec, Role::Train).unwrap();
        assert_eq!(train.len(), 10);
        assert!(train.examples.iter().all(|e| e.class_id == 1));
        let test = apply_split(&d, &spec, Role::Test).unwrap();
        assert_eq!(test.len(), 15);
        assert_eq!(test.examples.iter().filter(|e| e.class_id == 2).count(), 5);

        let open_only = ds(&[("o", "open")]);
        assert!(apply_split(&open_only, &spec, Role::Val).unwrap().is_empty());
        let stranger = ds(&[("x", "mystery")]);
        assert_eq!(
            apply_split(&stranger, &spec, Role::Test),
            Err(Error::UnknownLabel("mystery".into()))
        );
    }

    fn class_ds(sizes: &[usize]) -> ClassDataset {
        let mut examples = Vec::new();
        for (c, &n) in sizes.iter().enumerate() {
            for i in 0..n {
                examples.push(ClassExample { text: format!("c{c} e{i}"), class_id: c + 1 });
            }
        }
        ClassDataset { examples, num_known: sizes.len() }
    }

    #[test]
    fn subsample_ceiling_and_clamp() {
        let d = class_ds(&[10, 1]);
        assert_eq!(subsample_labeled(&d, 1.0, 3).unwrap(), d);
        let s = subsample_labeled(&d, 0.2, 3).unwrap();
        assert_eq!(s.class_counts(), vec![0, 2, 1, 0]);
        let s = subsample_labeled(&d, 0.1, 3).unwrap();
        assert_eq!(s.class_counts()[2], 1);
        assert!(subsample_labeled(&d, 0.0, 3).is_err());
    }

    fn encoded(labels: &[usize]) -> EncodedDataset {
        let v = build_vocab(["a b c d"].iter().copied(), 1, 10).unwrap();
        let texts = ["a", "b", "c", "d"];
        let examples = labels
            .iter()
            .enumerate()
            .map(|(i, &l)| ClassExample { text: texts[i % 4].into(), class_id: l })
            .collect();
        let m = labels.iter().copied().max().unwrap_or(1);
        EncodedDataset::new(&ClassDataset { examples, num_known: m }, &v, 4).unwrap()
    }

    #[test]
    fn batches_sizes_and_determinism() {
        let d = encoded(&[1; 10]);
        let b = make_batches(&d, 4, 7).unwrap();
        assert_eq!(b.iter().map(Batch::len).collect::<Vec<_>>(), vec![4, 4, 2]);
        assert_eq!(b, make_batches(&d, 4, 7).unwrap());
        assert_eq!(make_batches(&d, 128, 7).unwrap().len(), 1);
        assert!(make_batches(&encoded(&[]), 4, 0).is_err());
    }

    #[test]
    fn batch_mask_has_leading_ones() {
        let d = encoded(&[1, 2]);
        let b = d.gather(&[0, 1]);
        assert_eq!(b.mask(), vec![1, 1, 0, 0, 1, 1, 0, 0]);
    }

    #[test]
    fn pairing_small_and_single_class() {
        let d = encoded(&[1, 2, 1, 2]);
        for seed in 0..20 {
            let pairs = pair_batches(&d, 4, seed).unwrap();
            assert!(pairs.iter().all(PairedBatch::labels_differ));
            assert_eq!(pairs.iter().map(PairedBatch::len).sum::<usize>(), 4);
        }
        assert!(matches!(pair_batches(&encoded(&[1, 1, 1]), 2, 0), Err(Error::Pairing(_))));
    }

    #[test]
    fn pairing_drops_unrepairable_positions() {
        let d = encoded(&[1, 1, 1, 2]);
        for seed in 0..20 {
            let pairs = pair_batches(&d, 8, seed).unwrap();
            assert!(pairs.iter().all(PairedBatch::labels_differ));
        }
    }
}
