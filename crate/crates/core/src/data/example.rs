use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Positive,
    Neutral,
    Negative,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::Positive, Label::Neutral, Label::Negative];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Label> {
        Label::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Positive => "positive",
            Label::Neutral => "neutral",
            Label::Negative => "negative",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Label::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown label {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// One review/aspect pair as an `[s, h]` embedding matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddedExample {
    pub id: String,
    /// Raw sentence text; examples sharing it came from the same sentence.
    pub sentence_key: String,
    pub aspect: String,
    pub label: Label,
    pub split: Split,
    pub seq: Tensor,
}

/// Minimum sequence: classification slot, one token, one separator.
pub const MIN_SEQ_LEN: usize = 3;

impl EmbeddedExample {
    pub fn new(
        id: impl Into<String>,
        sentence_key: impl Into<String>,
        aspect: impl Into<String>,
        label: Label,
        split: Split,
        seq: Tensor,
    ) -> Result<Self> {
        let id = id.into();
        if seq.rank() != 2 || seq.shape()[0] < MIN_SEQ_LEN {
            return Err(Error::contract(
                "example",
                format!("{id}: sequence shape {:?} needs [s >= {MIN_SEQ_LEN}, h]", seq.shape()),
            ));
        }
        Ok(EmbeddedExample {
            id,
            sentence_key: sentence_key.into(),
            aspect: aspect.into(),
            label,
            split,
            seq,
        })
    }

    pub fn seq_len(&self) -> usize {
        self.seq.shape()[0]
    }

    pub fn hidden_dim(&self) -> usize {
        self.seq.shape()[1]
    }
}

/// Per-label tallies in positive/neutral/negative order.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelCounts {
    pub positive: usize,
    pub neutral: usize,
    pub negative: usize,
}

impl LabelCounts {
    pub fn from_array(c: [usize; 3]) -> Self {
        LabelCounts {
            positive: c[0],
            neutral: c[1],
            negative: c[2],
        }
    }

    pub fn as_array(&self) -> [usize; 3] {
        [self.positive, self.neutral, self.negative]
    }

    pub fn total(&self) -> usize {
        self.positive + self.neutral + self.negative
    }

    pub fn bump(&mut self, label: Label) {
        match label {
            Label::Positive => self.positive += 1,
            Label::Neutral => self.neutral += 1,
            Label::Negative => self.negative += 1,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitCounts {
    pub train: LabelCounts,
    pub test: LabelCounts,
}

impl SplitCounts {
    pub fn tally(examples: impl IntoIterator<Item = (Split, Label)>) -> Self {
        let mut c = SplitCounts::default();
        for (split, label) in examples {
            match split {
                Split::Train => c.train.bump(label),
                Split::Test => c.test.bump(label),
            }
        }
        c
    }
}

/// In-memory dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub hidden_dim: usize,
    pub examples: Vec<EmbeddedExample>,
}

impl Dataset {
    pub fn split(&self, split: Split) -> Vec<&EmbeddedExample> {
        self.examples.iter().filter(|e| e.split == split).collect()
    }

    pub fn counts(&self) -> SplitCounts {
        SplitCounts::tally(self.examples.iter().map(|e| (e.split, e.label)))
    }

    pub fn max_seq_len(&self) -> usize {
        self.examples.iter().map(EmbeddedExample::seq_len).max().unwrap_or(0)
    }
}
