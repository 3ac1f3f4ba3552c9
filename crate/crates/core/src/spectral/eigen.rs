//! Exact graph Fourier transform through eigendecomposition.
//!
//! Reference path only: nothing here is recorded on a tape.

use nalgebra::{DMatrix, SymmetricEigen};

use super::LatentGraph;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Eigenvalues (ascending) and column eigenvectors `U` of a symmetric matrix.
pub fn symmetric_eigen(sym: &Tensor) -> Result<(Vec<f64>, Tensor)> {
    let shape = sym.shape();
    if shape.len() != 2 || shape[0] != shape[1] {
        return Err(Error::dim("symmetric_eigen", shape, shape));
    }
    let h = shape[0];
    if sym.data().iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite entry in Laplacian".into()));
    }
    let m = DMatrix::from_row_slice(h, h, sym.data());
    let eig = SymmetricEigen::try_new(m, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numeric("eigendecomposition did not converge".into()))?;
    let mut order: Vec<usize> = (0..h).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let u = Tensor::from_fn(&[h, h], |idx| {
        let (r, c) = (idx / h, idx % h);
        eig.eigenvectors[(r, order[c])]
    });
    Ok((values, u))
}

/// Graph Fourier basis of a latent graph.
#[derive(Clone, Debug)]
pub struct EigenBasis {
    pub eigenvalues: Vec<f64>,
    /// Columns are eigenvectors.
    pub vectors: Tensor,
}

impl EigenBasis {
    pub fn new(graph: &LatentGraph) -> Result<Self> {
        let (eigenvalues, vectors) = symmetric_eigen(&graph.laplacian)?;
        Ok(EigenBasis { eigenvalues, vectors })
    }

    fn apply(&self, x: &Tensor, transpose_u: bool) -> Result<Tensor> {
        let h = self.eigenvalues.len();
        let shape = x.shape();
        if *shape.last().expect("nonempty") != h {
            return Err(Error::dim("eigen_gft", shape, self.vectors.shape()));
        }
        let u = self.vectors.data();
        let mut out = vec![0.0; x.numel()];
        for (row, dst) in x.data().chunks(h).zip(out.chunks_mut(h)) {
            for (c, d) in dst.iter_mut().enumerate() {
                *d = (0..h)
                    .map(|r| row[r] * if transpose_u { u[r * h + c] } else { u[c * h + r] })
                    .sum();
            }
        }
        Tensor::new(shape.to_vec(), out)
    }

    /// `Uᵀx` for every channel vector `x` along the last axis.
    pub fn gft(&self, x: &Tensor) -> Result<Tensor> {
        self.apply(x, true)
    }

    /// `Ux̄` for every spectral vector along the last axis.
    pub fn igft(&self, x: &Tensor) -> Result<Tensor> {
        self.apply(x, false)
    }
}

pub fn eigen_gft(graph: &LatentGraph, x: &Tensor) -> Result<Tensor> {
    EigenBasis::new(graph)?.gft(x)
}

pub fn eigen_igft(graph: &LatentGraph, x: &Tensor) -> Result<Tensor> {
    EigenBasis::new(graph)?.igft(x)
}
