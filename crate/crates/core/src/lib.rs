//! Open intent classification with soft labeling and noisy manifold mixup.
//!
//! An (M+1)-way classifier over a compact text encoder is pre-trained on M
//! known intents, then trained to recognise the extra open class from
//! softened targets and from pseudo samples produced by mixing and perturbing
//! hidden states of different-intent utterances.
//!
//! The crate is `no_std` (it needs `alloc`); file formats and the command
//! line live in the companion `snoic` crate.
#![no_std]
extern crate alloc;

pub mod augment;
pub mod corpus;
pub mod encoder;
pub mod error;
pub mod losses;
pub mod metrics;
pub mod optim;
pub mod synthetic;
pub mod tensor;
pub mod trainer;

pub use error::{Error, Result};
pub use tensor::{Matrix, Real};

/// Deterministic generator used for every seeded draw in the crate.
pub type SeededRng = rand_chacha::ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    use rand::SeedableRng;
    SeededRng::seed_from_u64(seed)
}
