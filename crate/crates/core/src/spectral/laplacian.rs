use crate::error::{Error, Result};
use crate::tensor::{Tape, Tensor};

const ROW_SUM_TOL: f64 = 1e-9;

/// Graph over embedding channels learned from attention.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentGraph {
    /// Symmetrized adjacency `(W + Wᵀ)/2`.
    pub adjacency: Tensor,
    /// Diagonal of the degree matrix.
    pub degree: Vec<f64>,
    /// `I - D^{-1/2} W D^{-1/2}`.
    pub laplacian: Tensor,
}

impl LatentGraph {
    pub fn nodes(&self) -> usize {
        self.degree.len()
    }
}

/// Builds the normalized Laplacian of a row-stochastic attention matrix.
pub fn build_laplacian(attention: &Tensor) -> Result<LatentGraph> {
    let shape = attention.shape();
    if shape.len() != 2 || shape[0] != shape[1] {
        return Err(Error::dim("build_laplacian", shape, shape));
    }
    let h = shape[0];
    for (i, row) in attention.data().chunks(h).enumerate() {
        let total: f64 = row.iter().sum();
        if (total - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::contract("build_laplacian", format!("row {i} sums to {total}, expected 1")));
        }
    }
    graph_from_adjacency(attention)
}

/// Normalized Laplacian of any nonnegative square weight matrix.
///
/// Unlike [`build_laplacian`] the rows need not sum to one, so hand-built
/// graphs with unit edge weights are accepted. Isolated nodes get zero rows
/// in the normalized product.
pub fn graph_from_adjacency(w: &Tensor) -> Result<LatentGraph> {
    let h = w.shape()[0];
    let mut tape = Tape::new();
    let wv = tape.constant(w.clone());
    let lap = tape.normalized_laplacian(wv)?;
    let wt = w.permute(&[1, 0])?;
    let adjacency = Tensor::from_fn(&[h, h], |i| 0.5 * (w.data()[i] + wt.data()[i]));
    let degree = adjacency.data().chunks(h).map(|r| r.iter().sum()).collect();
    Ok(LatentGraph {
        adjacency,
        degree,
        laplacian: tape.value(lap).clone(),
    })
}
