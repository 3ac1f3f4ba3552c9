//! Labeled synthetic datasets built from hash embeddings.

use super::example::{Dataset, EmbeddedExample, Label, Split};
use super::hash_embed::hash_embed;
use crate::error::{Error, Result};
use crate::rng::Rng;

const FILLERS: [&str; 8] = ["the", "really", "honestly", "this", "overall", "so", "quite", "my"];
const ASPECTS: [&str; 6] = ["screen", "battery", "keyboard", "price", "service", "food"];
const POLARITY_WORDS: [[&str; 4]; 3] = [
    ["good", "great", "excellent", "superb"],
    ["okay", "average", "standard", "ordinary"],
    ["bad", "awful", "poor", "terrible"],
];

/// Random streams; the flip stream is public so label noise can be replayed.
pub const TEXT_STREAM: u64 = 1;
pub const FLIP_STREAM: u64 = 2;
pub const SPLIT_STREAM: u64 = 3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SynthMode {
    /// Label is fixed by the polarity word in the sentence.
    Separable,
    /// Separable labels, each replaced with probability `flip` by one of the
    /// other two classes.
    Noisy { flip: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthSpec {
    pub n: usize,
    pub hidden_dim: usize,
    pub mode: SynthMode,
    pub seed: u64,
    /// Share of examples assigned to the test split.
    pub test_fraction: f64,
}

/// The polarity class whose vocabulary contains `word`.
pub fn polarity_of(word: &str) -> Option<Label> {
    POLARITY_WORDS
        .iter()
        .position(|ws| ws.contains(&word))
        .and_then(Label::from_index)
}

pub fn synthesize(spec: &SynthSpec) -> Result<Dataset> {
    if spec.hidden_dim == 0 {
        return Err(Error::Config("hidden_dim must be positive".into()));
    }
    if let SynthMode::Noisy { flip } = spec.mode {
        if !(0.0..=1.0).contains(&flip) {
            return Err(Error::Config(format!("flip probability {flip} outside [0, 1]")));
        }
    }
    let root = Rng::new(spec.seed);
    let mut text = root.fork(TEXT_STREAM);
    let mut flips = root.fork(FLIP_STREAM);
    let mut split_rng = root.fork(SPLIT_STREAM);

    let n_test = ((spec.n as f64) * spec.test_fraction).round() as usize;
    let mut order: Vec<usize> = (0..spec.n).collect();
    split_rng.shuffle(&mut order);
    let mut is_test = vec![false; spec.n];
    order[..n_test.min(spec.n)].iter().for_each(|&i| is_test[i] = true);

    let mut examples = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        let clean = text.below(3);
        let word = POLARITY_WORDS[clean][text.below(4)];
        let lead = FILLERS[text.below(FILLERS.len())];
        let tail = FILLERS[text.below(FILLERS.len())];
        let aspect = ASPECTS[text.below(ASPECTS.len())];
        let sentence = format!("{lead} {aspect} {word} {tail}");
        let mut label = clean;
        if let SynthMode::Noisy { flip } = spec.mode {
            if flips.uniform() < flip {
                label = (clean + 1 + flips.below(2)) % 3;
            }
        }
        let seq = hash_embed(&sentence, aspect, spec.hidden_dim, spec.seed);
        let split = if is_test[i] { Split::Test } else { Split::Train };
        let label = Label::from_index(label).expect("three classes");
        examples.push(EmbeddedExample::new(format!("syn-{i:05}"), sentence, aspect, label, split, seq)?);
    }
    Ok(Dataset {
        name: "synthetic".into(),
        hidden_dim: spec.hidden_dim,
        examples,
    })
}

/// Published per-class counts (positive, neutral, negative) for train and test.
pub const TABLE1: [(&str, [usize; 3], [usize; 3]); 4] = [
    ("laptop", [994, 464, 870], [341, 169, 128]),
    ("restaurants", [2164, 637, 807], [728, 196, 196]),
    ("tshirt", [1122, 50, 699], [270, 16, 186]),
    ("television", [2540, 287, 919], [618, 67, 257]),
];

pub fn table1_counts(name: &str) -> Option<([usize; 3], [usize; 3])> {
    TABLE1.iter().find(|(n, _, _)| *n == name).map(|&(_, tr, te)| (tr, te))
}

/// Placeholder dataset with a benchmark's class counts, for exercising the
/// data path at full size without the real embeddings.
pub fn count_fixture(name: &str, hidden_dim: usize, seed: u64) -> Result<Dataset> {
    let (train, test) = table1_counts(name).ok_or_else(|| Error::Config(format!("unknown profile {name:?}")))?;
    let mut examples = Vec::new();
    for (split, counts) in [(Split::Train, train), (Split::Test, test)] {
        for (label, &count) in Label::ALL.iter().zip(&counts) {
            for i in 0..count {
                let prefix = if split == Split::Train { "train" } else { "test" };
                let id = format!("{name}-{prefix}-{label}-{i:05}");
                let sentence = format!("{prefix} review {} number {i}", label.as_str());
                let seq = hash_embed(&sentence, "aspect", hidden_dim, seed);
                examples.push(EmbeddedExample::new(id, sentence, "aspect", *label, split, seq)?);
            }
        }
    }
    Ok(Dataset {
        name: name.to_owned(),
        hidden_dim,
        examples,
    })
}
