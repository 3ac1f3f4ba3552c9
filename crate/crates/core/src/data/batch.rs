use super::example::EmbeddedExample;
use crate::rng::Rng;
use crate::tensor::Tensor;

/// Zero-padded `[b, s_max, h]` inputs with their true lengths.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub inputs: Tensor,
    pub lengths: Vec<usize>,
    pub labels: Vec<usize>,
    pub ids: Vec<String>,
}

impl Batch {
    pub fn from_examples(examples: &[&EmbeddedExample]) -> Batch {
        assert!(!examples.is_empty(), "batch needs at least one example");
        let h = examples[0].hidden_dim();
        let s = examples.iter().map(|e| e.seq_len()).max().expect("nonempty");
        let mut inputs = Tensor::zeros(&[examples.len(), s, h]);
        for (i, e) in examples.iter().enumerate() {
            let dst = i * s * h;
            inputs.data_mut()[dst..dst + e.seq.numel()].copy_from_slice(e.seq.data());
        }
        Batch {
            inputs,
            lengths: examples.iter().map(|e| e.seq_len()).collect(),
            labels: examples.iter().map(|e| e.label.index()).collect(),
            ids: examples.iter().map(|e| e.id.clone()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.lengths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lengths.is_empty()
    }
}

/// Splits `examples` into padded batches of `batch_size` (the last may be
/// shorter). With `rng` the order is shuffled first.
pub fn make_batches(examples: &[&EmbeddedExample], batch_size: usize, rng: Option<&mut Rng>) -> Vec<Batch> {
    assert!(batch_size >= 1, "batch_size must be positive");
    let mut order: Vec<usize> = (0..examples.len()).collect();
    if let Some(rng) = rng {
        rng.shuffle(&mut order);
    }
    order
        .chunks(batch_size)
        .map(|chunk| {
            let members: Vec<&EmbeddedExample> = chunk.iter().map(|&i| examples[i]).collect();
            Batch::from_examples(&members)
        })
        .collect()
}

/// Seeded shuffle of `0..n`, with the last `fraction` held out.
/// Returns `(kept, held_out)`.
pub fn heldout_split(n: usize, fraction: f64, rng: &mut Rng) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    let held = ((n as f64) * fraction).round() as usize;
    let held_out = order.split_off(n - held.min(n));
    (order, held_out)
}
