//! Dataset loading, synthetic data, batching, and the hard slice.

mod batch;
mod example;
pub mod hash_embed;
pub mod interchange;
mod slice;
pub mod synth;

pub use batch::{heldout_split, make_batches, Batch};
pub use example::{Dataset, EmbeddedExample, Label, LabelCounts, Split, SplitCounts, MIN_SEQ_LEN};
pub use hash_embed::hash_embed;
pub use interchange::{load_dataset, load_dir, write_dataset, DatasetManifest, ManifestEntry};
pub use slice::{distinct_labels, hard_slice};
pub use synth::{synthesize, SynthMode, SynthSpec};
