//! Deterministic token embeddings for runs without a pretrained encoder.

use sha2::{Digest, Sha256};

use crate::rng::Rng;
use crate::tensor::Tensor;

pub const CLS: &str = "[CLS]";
pub const SEP: &str = "[SEP]";

/// `[CLS] sentence [SEP] aspect [SEP]`, whitespace tokenized.
pub fn assemble_tokens(sentence: &str, aspect: &str) -> Vec<String> {
    std::iter::once(CLS)
        .chain(sentence.split_whitespace())
        .chain(std::iter::once(SEP))
        .chain(aspect.split_whitespace())
        .chain(std::iter::once(SEP))
        .map(str::to_owned)
        .collect()
}

/// Vector for one token, entries in `[-1, 1]`; depends only on `(token, seed)`.
///
/// Entries are rounded to `f32` so hash-embedded datasets survive the
/// interchange format unchanged.
pub fn token_vector(token: &str, h: usize, seed: u64) -> Vec<f64> {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(token.as_bytes());
    let key: [u8; 32] = hasher.finalize().into();
    let mut rng = Rng::from_key(key);
    (0..h).map(|_| f64::from(rng.uniform_in(-1.0, 1.0) as f32)).collect()
}

/// `[s, h]` embedding matrix for an assembled sentence/aspect sequence.
pub fn hash_embed(sentence: &str, aspect: &str, h: usize, seed: u64) -> Tensor {
    assert!(h >= 1, "embedding width must be positive");
    let tokens = assemble_tokens(sentence, aspect);
    let data: Vec<f64> = tokens.iter().flat_map(|t| token_vector(t, h, seed)).collect();
    Tensor::new(vec![tokens.len(), h], data).expect("consistent shape")
}
