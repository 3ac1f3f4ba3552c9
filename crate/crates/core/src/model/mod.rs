//! The spectral-temporal graph classifier.

pub mod checkpoint;
mod block;
mod config;
mod decoder;
mod latent;
mod params;
pub mod recurrent;

pub use block::SpectralBlock;
pub use config::{DecoderKind, EncoderKind, ModelConfig, Pooling};
pub use decoder::Decoder;
pub use latent::{LatentAttention, LatentEncoder};
pub use params::{Bound, ParamId, ParamStore};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::spectral::{build_laplacian, chebyshev_terms, LatentGraph};
use crate::tensor::{Tape, Tensor, Var};

/// Random stream used for parameter initialization.
const INIT_STREAM: u64 = 0x1417;

/// Handles recorded by one forward pass.
#[derive(Clone, Copy, Debug)]
pub struct ForwardOutput {
    pub logits: Var,
    pub encoded: Var,
    pub adjacency: Var,
    pub laplacian: Var,
    pub features: Var,
}

#[derive(Clone, Debug)]
pub struct Stgnn {
    config: ModelConfig,
    params: ParamStore,
    encoder: LatentEncoder,
    attention: LatentAttention,
    blocks: Vec<SpectralBlock>,
    decoder: Decoder,
}

impl Stgnn {
    /// Freshly initialized model; the same `(config, seed)` always yields
    /// the same parameters.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = Rng::new(seed).fork(INIT_STREAM);
        let mut params = ParamStore::new();
        let h = config.hidden_dim;
        let encoder = LatentEncoder::new(config.encoder, h, config.max_seq_len, &mut params, &mut rng);
        let attention = LatentAttention::new(h, &mut params, &mut rng);
        let blocks = (0..config.num_blocks)
            .map(|i| SpectralBlock::new(i, h, config.cheb_order, config.conv_kernel, config.residual, &mut params, &mut rng))
            .collect();
        let decoder = Decoder::new(
            config.decoder,
            config.pooling,
            h,
            config.num_classes,
            config.leaky_slope,
            config.dropout,
            &mut params,
            &mut rng,
        );
        Ok(Stgnn {
            config,
            params,
            encoder,
            attention,
            blocks,
            decoder,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn blocks(&self) -> &[SpectralBlock] {
        &self.blocks
    }

    pub fn decoder(&self) -> &Decoder {
        &self.decoder
    }

    /// `[b, s, h]` → `[b, h, h]` encoder states.
    pub fn encode_latent(&self, tape: &mut Tape, bound: &Bound, x: Var) -> Result<Var> {
        self.encoder.encode(tape, bound, x)
    }

    /// Encoder states → shared row-stochastic `[h, h]` adjacency.
    pub fn attention_adjacency(&self, tape: &mut Tape, bound: &Bound, encoded: Var) -> Result<Var> {
        self.attention.adjacency(tape, bound, encoded)
    }

    /// Runs every spectral block against the Laplacian node `laplacian`.
    pub fn spectral_blocks(&self, tape: &mut Tape, bound: &Bound, x: Var, laplacian: Var) -> Result<Var> {
        let terms = chebyshev_terms(tape, laplacian, self.config.cheb_order)?;
        self.blocks
            .iter()
            .try_fold(x, |acc, block| block.forward(tape, bound, acc, &terms))
    }

    pub fn decode(
        &self,
        tape: &mut Tape,
        bound: &Bound,
        x: Var,
        lengths: &[usize],
        dropout_rng: Option<&mut Rng>,
    ) -> Result<Var> {
        self.decoder.forward(tape, bound, x, lengths, dropout_rng)
    }

    /// Full pipeline on a padded `[b, s, h]` input node.
    ///
    /// `dropout_rng` switches on training-mode dropout.
    pub fn forward(
        &self,
        tape: &mut Tape,
        bound: &Bound,
        x: Var,
        lengths: &[usize],
        dropout_rng: Option<&mut Rng>,
    ) -> Result<ForwardOutput> {
        let shape = tape.shape(x).to_vec();
        if lengths.is_empty() {
            return Err(Error::contract("forward", "empty batch"));
        }
        if shape.len() != 3 || shape[0] != lengths.len() || shape[2] != self.config.hidden_dim {
            return Err(Error::dim("forward", &shape, &[lengths.len(), 0, self.config.hidden_dim]));
        }
        let encoded = self.encode_latent(tape, bound, x)?;
        let adjacency = self.attention_adjacency(tape, bound, encoded)?;
        let laplacian = tape.normalized_laplacian(adjacency)?;
        let features = self.spectral_blocks(tape, bound, x, laplacian)?;
        let logits = self.decode(tape, bound, features, lengths, dropout_rng)?;
        Ok(ForwardOutput {
            logits,
            encoded,
            adjacency,
            laplacian,
            features,
        })
    }

    /// Inference-mode logits `[b, classes]`.
    pub fn logits(&self, x: &Tensor, lengths: &[usize]) -> Result<Tensor> {
        let mut tape = Tape::new();
        let bound = self.bind_frozen(&mut tape);
        let xv = tape.constant(x.clone());
        let out = self.forward(&mut tape, &bound, xv, lengths, None)?;
        Ok(tape.value(out.logits).clone())
    }

    /// Arg-max class per example (lowest index on ties).
    pub fn predict(&self, x: &Tensor, lengths: &[usize]) -> Result<Vec<usize>> {
        let logits = self.logits(x, lengths)?;
        let c = self.config.num_classes;
        Ok(logits.data().chunks(c).map(argmax).collect())
    }

    /// The latent graph the model builds for a batch.
    pub fn latent_graph(&self, x: &Tensor) -> Result<LatentGraph> {
        let mut tape = Tape::new();
        let bound = self.bind_frozen(&mut tape);
        let xv = tape.constant(x.clone());
        let enc = self.encode_latent(&mut tape, &bound, xv)?;
        let adj = self.attention_adjacency(&mut tape, &bound, enc)?;
        build_laplacian(tape.value(adj))
    }

    fn bind_frozen(&self, tape: &mut Tape) -> Bound {
        Bound::from_vars(self.params.values().iter().map(|v| tape.constant(v.clone())).collect())
    }
}

pub(crate) fn argmax(row: &[f64]) -> usize {
    row.iter()
        .enumerate()
        .fold(0, |best, (i, &v)| if v > row[best] { i } else { best })
}
