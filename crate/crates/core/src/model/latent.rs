//! Latent correlation layer: recurrent encoder over the channel-major view
//! followed by self-attention that yields the channel adjacency.

use super::config::EncoderKind;
use super::params::{Bound, ParamId, ParamStore};
use super::recurrent::{CellKind, RecurrentCell};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::{Tape, Tensor, Var};

#[derive(Clone, Debug)]
pub struct LatentEncoder {
    kind: EncoderKind,
    hidden: usize,
    max_seq_len: usize,
    forward: RecurrentCell,
    backward: Option<RecurrentCell>,
    projection: Option<(ParamId, ParamId)>,
}

impl LatentEncoder {
    pub fn new(kind: EncoderKind, hidden: usize, max_seq_len: usize, store: &mut ParamStore, rng: &mut Rng) -> Self {
        let cell_kind = match kind {
            EncoderKind::Gru => CellKind::Gru,
            EncoderKind::Lstm | EncoderKind::Bilstm => CellKind::Lstm,
        };
        let forward = RecurrentCell::new(cell_kind, max_seq_len, hidden, "encoder.fwd", store, rng);
        let (backward, projection) = if kind == EncoderKind::Bilstm {
            let back = RecurrentCell::new(cell_kind, max_seq_len, hidden, "encoder.bwd", store, rng);
            let w = store.xavier("encoder.proj.w", 2 * hidden, hidden, rng);
            let b = store.zeros("encoder.proj.b", &[hidden]);
            (Some(back), Some((w, b)))
        } else {
            (None, None)
        };
        LatentEncoder {
            kind,
            hidden,
            max_seq_len,
            forward,
            backward,
            projection,
        }
    }

    pub fn kind(&self) -> EncoderKind {
        self.kind
    }

    /// `[b, s, h]` → `[b, h, h]`: `h` recurrent steps over `s`-wide channel rows.
    pub fn encode(&self, tape: &mut Tape, bound: &Bound, x: Var) -> Result<Var> {
        let shape = tape.shape(x).to_vec();
        let (b, s, h) = (shape[0], shape[1], shape[2]);
        if h != self.hidden {
            return Err(Error::dim("encode_latent", &shape, &[self.hidden]));
        }
        if s > self.max_seq_len {
            return Err(Error::Config(format!(
                "sequence length {s} exceeds the model's max_seq_len {}",
                self.max_seq_len
            )));
        }
        let mut channels = tape.transpose(x)?;
        if s < self.max_seq_len {
            let pad = tape.constant(Tensor::zeros(&[b, h, self.max_seq_len - s]));
            channels = tape.concat(&[channels, pad], 2)?;
        }
        let steps = (0..h)
            .map(|t| tape.select(channels, 1, t))
            .collect::<Result<Vec<_>>>()?;
        let fwd = self.forward.scan(tape, bound, &steps, false)?;
        let fwd = tape.stack(&fwd, 1)?;
        match (&self.backward, self.projection) {
            (Some(cell), Some((w, bias))) => {
                let bwd = cell.scan(tape, bound, &steps, true)?;
                let bwd = tape.stack(&bwd, 1)?;
                let both = tape.concat(&[fwd, bwd], 2)?;
                let proj = tape.matmul(both, bound[w])?;
                tape.add_bias(proj, bound[bias])
            }
            _ => Ok(fwd),
        }
    }
}

/// Scaled dot-product attention producing one shared `[h, h]` adjacency.
#[derive(Clone, Debug)]
pub struct LatentAttention {
    hidden: usize,
    w_query: ParamId,
    w_key: ParamId,
}

impl LatentAttention {
    pub fn new(hidden: usize, store: &mut ParamStore, rng: &mut Rng) -> Self {
        LatentAttention {
            hidden,
            w_query: store.xavier("attention.w_q", hidden, hidden, rng),
            w_key: store.xavier("attention.w_k", hidden, hidden, rng),
        }
    }

    /// Attention logits `QKᵀ/√h` are averaged over the batch before the row
    /// softmax, giving a single graph per forward pass.
    pub fn adjacency(&self, tape: &mut Tape, bound: &Bound, encoded: Var) -> Result<Var> {
        let q = tape.matmul(encoded, bound[self.w_query])?;
        let k = tape.matmul(encoded, bound[self.w_key])?;
        let kt = tape.transpose(k)?;
        let logits = tape.matmul(q, kt)?;
        let logits = tape.scale(logits, 1.0 / (self.hidden as f64).sqrt());
        let shared = tape.mean_axis(logits, 0)?;
        tape.softmax(shared, 1)
    }
}
