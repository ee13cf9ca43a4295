//! Seeded templated intent corpus for desk-scale open-set experiments.
//!
//! Each intent owns a few verbs and a pool of object words; some verbs are
//! shared between intents and a fraction of utterances carries a distractor
//! object from another intent, so classes are separable but not trivially.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use alloc::vec;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use crate::corpus::{Dataset, LabeledExample};
use crate::error::{invalid, Result};
use crate::seeded_rng;

struct Intent {
    name: &'static str,
    verbs: &'static [&'static str],
    objects: &'static [&'static str],
}

const INTENTS: &[Intent] = &[
    Intent {
        name: "flight",
        verbs: &["book", "reserve", "find"],
        objects: &["flight", "ticket", "plane", "airline", "departure", "boarding", "airport", "layover"],
    },
    Intent {
        name: "music",
        verbs: &["play", "queue", "shuffle"],
        objects: &["song", "album", "playlist", "artist", "jazz", "track", "radio", "chorus"],
    },
    Intent {
        name: "weather",
        verbs: &["check", "forecast", "tell"],
        objects: &["weather", "rain", "temperature", "snow", "humidity", "sunshine", "storm", "wind"],
    },
    Intent {
        name: "banking",
        verbs: &["transfer", "send", "check"],
        objects: &["balance", "account", "deposit", "savings", "money", "card", "withdrawal", "statement"],
    },
    Intent {
        name: "alarm",
        verbs: &["set", "cancel", "snooze"],
        objects: &["alarm", "wakeup", "timer", "reminder", "clock", "morning", "minutes", "ring"],
    },
    Intent {
        name: "restaurant",
        verbs: &["reserve", "book", "find"],
        objects: &["table", "restaurant", "dinner", "sushi", "pizza", "menu", "reservation", "brunch"],
    },
    Intent {
        name: "movie",
        verbs: &["watch", "stream", "rent"],
        objects: &["movie", "film", "trailer", "cinema", "showtime", "comedy", "thriller", "documentary"],
    },
    Intent {
        name: "shopping",
        verbs: &["buy", "order", "add"],
        objects: &["cart", "shoes", "groceries", "laptop", "delivery", "jacket", "purchase", "coupon"],
    },
    Intent {
        name: "recipe",
        verbs: &["cook", "bake", "prepare"],
        objects: &["recipe", "pasta", "cake", "soup", "ingredients", "oven", "salad", "dessert"],
    },
    Intent {
        name: "translate",
        verbs: &["translate", "say", "spell"],
        objects: &["french", "spanish", "phrase", "word", "german", "sentence", "language", "meaning"],
    },
    Intent {
        name: "traffic",
        verbs: &["avoid", "check", "show"],
        objects: &["traffic", "route", "highway", "commute", "accident", "detour", "congestion", "toll"],
    },
    Intent {
        name: "fitness",
        verbs: &["track", "start", "log"],
        objects: &["workout", "steps", "run", "calories", "yoga", "pushups", "heartrate", "gym"],
    },
];

const OPENERS: &[&str] = &["please", "can you", "i want to", "i need to", "could you", "help me", "let me", ""];
const CONNECTORS: &[&str] = &["the", "my", "a", "some", "this", "that"];
const CLOSERS: &[&str] = &["now", "today", "for me", "right away", "please", "tonight", "", ""];

/// Number of distinct built-in templated intents.
pub const MAX_TEMPLATED_INTENTS: usize = 12;

/// Probability that an utterance carries an object word of another intent.
pub const DISTRACTOR_RATE: f64 = 0.1;

/// `per_class` templated utterances for each of the first `num_classes`
/// built-in intents, in class-major order.
pub fn templated_corpus(num_classes: usize, per_class: usize, seed: u64) -> Result<Dataset> {
    if !(1..=MAX_TEMPLATED_INTENTS).contains(&num_classes) {
        return Err(invalid(format!("templated corpus supports 1..={MAX_TEMPLATED_INTENTS} intents")));
    }
    let mut rng = seeded_rng(seed);
    let mut rows = Vec::with_capacity(num_classes * per_class);
    for (c, intent) in INTENTS[..num_classes].iter().enumerate() {
        for _ in 0..per_class {
            let mut words: Vec<&str> = Vec::new();
            let pick = |rng: &mut _, pool: &'static [&'static str]| *pool.choose(rng).expect("nonempty pool");
            words.push(pick(&mut rng, OPENERS));
            words.push(pick(&mut rng, intent.verbs));
            words.push(pick(&mut rng, CONNECTORS));
            words.push(pick(&mut rng, intent.objects));
            if rng.random_bool(0.5) {
                words.push("and");
                words.push(pick(&mut rng, intent.objects));
            }
            if num_classes > 1 && rng.random_bool(DISTRACTOR_RATE) {
                let mut other = rng.random_range(0..num_classes - 1);
                if other >= c {
                    other += 1;
                }
                words.push("with");
                words.push(pick(&mut rng, INTENTS[other].objects));
            }
            words.push(pick(&mut rng, CLOSERS));
            let text = words.iter().filter(|w| !w.is_empty()).copied().collect::<Vec<_>>().join(" ");
            rows.push(LabeledExample { text, label: String::from(intent.name) });
        }
    }
    Dataset::new(rows)
}

/// A manifest with `num_classes` intents named `intent_000`, `intent_001`, ...
/// and `per_class` short placeholder utterances each.
pub fn numbered_corpus(num_classes: usize, per_class: usize) -> Result<Dataset> {
    let mut rows = Vec::with_capacity(num_classes * per_class);
    for c in 0..num_classes {
        for i in 0..per_class {
            rows.push(LabeledExample { text: format!("utterance {i} of intent {c}"), label: format!("intent_{c:03}") });
        }
    }
    Dataset::new(rows)
}

/// Splits every intent's examples into train, validation and test portions.
/// Each class contributes `round(n·val_fraction)` validation and
/// `round(n·test_fraction)` test examples chosen by a seeded shuffle; the
/// rest stay in train. Example order within each portion follows the input.
pub fn split_roles(ds: &Dataset, val_fraction: f64, test_fraction: f64, seed: u64) -> Result<[Dataset; 3]> {
    if !(val_fraction >= 0.0 && test_fraction >= 0.0 && val_fraction + test_fraction < 1.0) {
        return Err(invalid("role fractions must be non-negative and sum to less than 1"));
    }
    let mut rng = seeded_rng(seed);
    let mut role = vec![0usize; ds.len()];
    for label in ds.label_set() {
        let mut members: Vec<usize> = (0..ds.len()).filter(|&i| &ds.examples()[i].label == label).collect();
        members.shuffle(&mut rng);
        let n = members.len() as f64;
        let n_val = (n * val_fraction).round() as usize;
        let n_test = ((n * test_fraction).round() as usize).min(members.len() - n_val);
        for &i in &members[..n_val] {
            role[i] = 1;
        }
        for &i in &members[n_val..n_val + n_test] {
            role[i] = 2;
        }
    }
    let pick = |r: usize| {
        Dataset::new(ds.examples().iter().zip(&role).filter(|(_, &k)| k == r).map(|(e, _)| e.clone()).collect())
    };
    Ok([pick(0)?, pick(1)?, pick(2)?])
}
