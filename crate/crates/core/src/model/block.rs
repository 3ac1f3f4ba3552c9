use super::params::{Bound, ParamId, ParamStore};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::spectral::chebyshev_gft_var;
use crate::tensor::{Tape, Var};

/// Graph-Fourier → DFT → conv+GLU → inverse DFT → learned inverse-GFT map.
///
/// The frequency-axis convolutions mix channels: kernels are `[h, h, K]`,
/// and the Chebyshev axis is treated as extra batch.
#[derive(Clone, Debug)]
pub struct SpectralBlock {
    hidden: usize,
    order: usize,
    residual: bool,
    kernel_re: ParamId,
    kernel_im: ParamId,
    igft_w: ParamId,
    igft_b: ParamId,
}

impl SpectralBlock {
    pub fn new(
        index: usize,
        hidden: usize,
        order: usize,
        kernel: usize,
        residual: bool,
        store: &mut ParamStore,
        rng: &mut Rng,
    ) -> Self {
        let p = format!("block{index}");
        // fan-in is h·K, as for a standard 1-D convolution layer
        let limit = 1.0 / ((hidden * kernel) as f64).sqrt();
        SpectralBlock {
            hidden,
            order,
            residual,
            kernel_re: store.uniform(format!("{p}.conv_re"), &[hidden, hidden, kernel], limit, rng),
            kernel_im: store.uniform(format!("{p}.conv_im"), &[hidden, hidden, kernel], limit, rng),
            igft_w: store.xavier(format!("{p}.igft.w"), order * hidden, hidden, rng),
            igft_b: store.zeros(format!("{p}.igft.b"), &[hidden]),
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Convolution kernels of the real and imaginary paths.
    pub fn conv_kernels(&self) -> (ParamId, ParamId) {
        (self.kernel_re, self.kernel_im)
    }

    pub fn igft_weight(&self) -> ParamId {
        self.igft_w
    }

    pub fn forward(&self, tape: &mut Tape, bound: &Bound, x: Var, cheb_terms: &[Var]) -> Result<Var> {
        let shape = tape.shape(x).to_vec();
        if cheb_terms.len() != self.order {
            return Err(Error::contract(
                "spectral_block",
                format!("expected {} Chebyshev terms, got {}", self.order, cheb_terms.len()),
            ));
        }
        let (b, s, h) = (shape[0], shape[1], shape[2]);
        // [b, k, s, h] → [b, k, h, s] so the sequence axis is last.
        let graph_spec = chebyshev_gft_var(tape, cheb_terms, x)?;
        let seq_last = tape.permute(graph_spec, &[0, 1, 3, 2])?;
        let re = tape.dft_re(seq_last);
        let im = tape.dft_im(seq_last);
        let re = tape.conv1d(re, bound[self.kernel_re])?;
        let re = tape.glu(re);
        let im = tape.conv1d(im, bound[self.kernel_im])?;
        let im = tape.glu(im);
        let back = tape.idft_real(re, im)?;
        // [b, k, h, s] → [b, s, k·h] → [b, s, h]
        let back = tape.permute(back, &[0, 3, 1, 2])?;
        let flat = tape.reshape(back, &[b, s, self.order * h])?;
        let mapped = tape.matmul(flat, bound[self.igft_w])?;
        let out = tape.add_bias(mapped, bound[self.igft_b])?;
        debug_assert_eq!(self.hidden, h);
        if self.residual {
            tape.add(out, x)
        } else {
            Ok(out)
        }
    }
}
