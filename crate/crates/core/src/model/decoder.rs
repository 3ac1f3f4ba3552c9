use super::config::{DecoderKind, Pooling};
use super::params::{Bound, ParamId, ParamStore};
use super::recurrent::{CellKind, RecurrentCell};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::{Tape, Tensor, Var};

#[derive(Clone, Debug)]
struct Linear {
    w: ParamId,
    b: ParamId,
}

impl Linear {
    fn new(name: &str, fan_in: usize, fan_out: usize, store: &mut ParamStore, rng: &mut Rng) -> Self {
        Linear {
            w: store.xavier(format!("{name}.w"), fan_in, fan_out, rng),
            b: store.zeros(format!("{name}.b"), &[fan_out]),
        }
    }

    fn apply(&self, tape: &mut Tape, bound: &Bound, x: Var) -> Result<Var> {
        let y = tape.matmul(x, bound[self.w])?;
        tape.add_bias(y, bound[self.b])
    }
}

/// Decoder head: FC or recurrent front end, then a two-sub-layer FC with a
/// leaky ReLU in between emitting one raw score per class.
#[derive(Clone, Debug)]
pub struct Decoder {
    kind: DecoderKind,
    pooling: Pooling,
    slope: f64,
    dropout: f64,
    fc1: Option<Linear>,
    rnn: Option<RecurrentCell>,
    fc2_hidden: Linear,
    fc2_out: Linear,
}

impl Decoder {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        kind: DecoderKind,
        pooling: Pooling,
        hidden: usize,
        classes: usize,
        slope: f64,
        dropout: f64,
        store: &mut ParamStore,
        rng: &mut Rng,
    ) -> Self {
        let (fc1, rnn) = match kind {
            DecoderKind::Fc => (Some(Linear::new("decoder.fc1", hidden, hidden, store, rng)), None),
            DecoderKind::GruFc => (None, Some(RecurrentCell::new(CellKind::Gru, hidden, hidden, "decoder.rnn", store, rng))),
            DecoderKind::LstmFc => (None, Some(RecurrentCell::new(CellKind::Lstm, hidden, hidden, "decoder.rnn", store, rng))),
        };
        Decoder {
            kind,
            pooling,
            slope,
            dropout,
            fc1,
            rnn,
            fc2_hidden: Linear::new("decoder.fc2.hidden", hidden, hidden, store, rng),
            fc2_out: Linear::new("decoder.fc2.out", hidden, classes, store, rng),
        }
    }

    /// Weight and bias of the final sub-layer.
    pub fn output_params(&self) -> (ParamId, ParamId) {
        (self.fc2_out.w, self.fc2_out.b)
    }

    /// `[b, s, h]` → `[b, classes]`.
    pub fn forward(
        &self,
        tape: &mut Tape,
        bound: &Bound,
        x: Var,
        lengths: &[usize],
        dropout_rng: Option<&mut Rng>,
    ) -> Result<Var> {
        let shape = tape.shape(x).to_vec();
        let (b, s) = (shape[0], shape[1]);
        if lengths.len() != b || lengths.iter().any(|&l| l == 0 || l > s) {
            return Err(Error::contract("decode", format!("lengths {lengths:?} invalid for shape {shape:?}")));
        }
        let features = match (&self.fc1, &self.rnn) {
            (Some(fc1), _) => {
                let pooled = match self.pooling {
                    Pooling::First => tape.select(x, 1, 0)?,
                    Pooling::Mean => weighted_positions(tape, x, s, lengths, |len, t| {
                        if t < len {
                            1.0 / len as f64
                        } else {
                            0.0
                        }
                    })?,
                };
                let pooled = self.apply_dropout(tape, pooled, dropout_rng)?;
                fc1.apply(tape, bound, pooled)?
            }
            (None, Some(rnn)) => {
                let steps = (0..s).map(|t| tape.select(x, 1, t)).collect::<Result<Vec<_>>>()?;
                let states = rnn.scan(tape, bound, &steps, false)?;
                let states = tape.stack(&states, 1)?;
                // Hidden state at each example's own last unpadded position.
                let last = weighted_positions(tape, states, s, lengths, |len, t| f64::from(u8::from(t + 1 == len)))?;
                self.apply_dropout(tape, last, dropout_rng)?
            }
            (None, None) => unreachable!("decoder has a front end"),
        };
        let hidden = self.fc2_hidden.apply(tape, bound, features)?;
        let hidden = tape.leaky_relu(hidden, self.slope);
        self.fc2_out.apply(tape, bound, hidden)
    }

    fn apply_dropout(&self, tape: &mut Tape, x: Var, rng: Option<&mut Rng>) -> Result<Var> {
        match rng {
            Some(rng) if self.dropout > 0.0 => {
                let keep = 1.0 - self.dropout;
                let shape = tape.shape(x).to_vec();
                let mask = Tensor::from_fn(&shape, |_| if rng.uniform() < keep { 1.0 / keep } else { 0.0 });
                let mask = tape.constant(mask);
                tape.mul(x, mask)
            }
            _ => Ok(x),
        }
    }

    pub fn kind(&self) -> DecoderKind {
        self.kind
    }
}

/// `Σ_t weight(len_b, t) · x[b, t, :]` as a `[b, h]` tensor.
fn weighted_positions(
    tape: &mut Tape,
    x: Var,
    s: usize,
    lengths: &[usize],
    weight: impl Fn(usize, usize) -> f64,
) -> Result<Var> {
    let b = lengths.len();
    let h = tape.shape(x)[2];
    let w = Tensor::from_fn(&[b, 1, s], |i| weight(lengths[i / s], i % s));
    let w = tape.constant(w);
    let pooled = tape.matmul(w, x)?;
    tape.reshape(pooled, &[b, h])
}
