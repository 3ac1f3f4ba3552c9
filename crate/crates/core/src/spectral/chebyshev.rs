//! Chebyshev polynomial approximation of the graph Fourier transform.
//!
//! The Laplacian is rescaled to `L̃ = 2L/λ_max - I` with `λ_max = 2`, the
//! upper bound of a normalized Laplacian's spectrum, so `L̃` has its
//! spectrum in `[-1, 1]` and no eigenvalue estimate enters the gradient.

use super::LatentGraph;
use crate::error::{Error, Result};
use crate::tensor::{Tape, Tensor, Var};

pub const LAMBDA_MAX: f64 = 2.0;

/// `T₀(L̃) … T_{k-1}(L̃)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChebyshevBasis {
    pub order: usize,
    pub lambda_max: f64,
    pub terms: Vec<Tensor>,
}

impl ChebyshevBasis {
    pub fn new(graph: &LatentGraph, order: usize) -> Result<Self> {
        let mut tape = Tape::new();
        let lap = tape.constant(graph.laplacian.clone());
        let terms = chebyshev_terms(&mut tape, lap, order)?;
        Ok(ChebyshevBasis {
            order,
            lambda_max: LAMBDA_MAX,
            terms: terms.into_iter().map(|t| tape.value(t).clone()).collect(),
        })
    }

    pub fn nodes(&self) -> usize {
        self.terms[0].shape()[0]
    }
}

/// Records the Chebyshev recurrence for a Laplacian node on the tape.
pub fn chebyshev_terms(tape: &mut Tape, laplacian: Var, order: usize) -> Result<Vec<Var>> {
    if order == 0 {
        return Err(Error::Config("Chebyshev order must be at least 1".into()));
    }
    let h = tape.shape(laplacian)[0];
    let eye = tape.constant(Tensor::eye(h));
    let mut terms = vec![eye];
    if order == 1 {
        return Ok(terms);
    }
    let scaled = tape.scale(laplacian, 2.0 / LAMBDA_MAX);
    let rescaled = tape.sub(scaled, eye)?;
    terms.push(rescaled);
    for n in 2..order {
        let prod = tape.matmul(rescaled, terms[n - 1])?;
        let twice = tape.scale(prod, 2.0);
        terms.push(tape.sub(twice, terms[n - 2])?);
    }
    Ok(terms)
}

/// `[b, s, h]` signal through each term on the channel axis, stacked as `[b, k, s, h]`.
pub fn chebyshev_gft_var(tape: &mut Tape, terms: &[Var], x: Var) -> Result<Var> {
    let xs = tape.shape(x).to_vec();
    let h = tape.shape(terms[0])[0];
    if xs.len() != 3 || xs[2] != h {
        return Err(Error::dim("chebyshev_gft", &xs, &[h, h]));
    }
    let mut slices = Vec::with_capacity(terms.len());
    for &t in terms {
        let tt = tape.transpose(t)?;
        slices.push(tape.matmul(x, tt)?);
    }
    tape.stack(&slices, 1)
}

pub fn chebyshev_gft(basis: &ChebyshevBasis, x: &Tensor) -> Result<Tensor> {
    let mut tape = Tape::new();
    let terms: Vec<Var> = basis.terms.iter().map(|t| tape.constant(t.clone())).collect();
    let xv = tape.constant(x.clone());
    let out = chebyshev_gft_var(&mut tape, &terms, xv)?;
    Ok(tape.value(out).clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use crate::spectral::build_laplacian;

    fn graph(h: usize, seed: u64) -> LatentGraph {
        let mut rng = Rng::new(seed);
        let mut w = Tensor::from_fn(&[h, h], |_| rng.uniform_in(0.0, 1.0));
        for row in w.data_mut().chunks_mut(h) {
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|x| *x /= s);
        }
        build_laplacian(&w).unwrap()
    }

    #[test]
    fn first_terms_are_identity_and_rescaled_laplacian() {
        let g = graph(4, 1);
        let b = ChebyshevBasis::new(&g, 3).unwrap();
        assert_eq!(b.terms[0], Tensor::eye(4));
        let expect = Tensor::from_fn(&[4, 4], |i| g.laplacian.data()[i] - Tensor::eye(4).data()[i]);
        assert!(b.terms[1].max_abs_diff(&expect) < 1e-15);
        assert_eq!(b.lambda_max, 2.0);
    }

    #[test]
    fn order_one_is_identity_transform() {
        let g = graph(5, 2);
        let b = ChebyshevBasis::new(&g, 1).unwrap();
        let mut rng = Rng::new(3);
        let x = Tensor::from_fn(&[2, 3, 5], |_| rng.uniform());
        let out = chebyshev_gft(&b, &x).unwrap();
        assert_eq!(out.shape(), &[2, 1, 3, 5]);
        assert_eq!(out.data(), x.data());
    }

    #[test]
    fn rejects_channel_mismatch_and_zero_order() {
        let g = graph(4, 1);
        assert!(ChebyshevBasis::new(&g, 0).is_err());
        let b = ChebyshevBasis::new(&g, 2).unwrap();
        assert!(matches!(
            chebyshev_gft(&b, &Tensor::zeros(&[1, 2, 5])),
            Err(Error::Dimension { .. })
        ));
    }
}
