//! Graph Laplacians, graph Fourier transforms, and the sequence-axis DFT.

pub mod chebyshev;
pub mod eigen;
pub mod fourier;
mod laplacian;

pub use chebyshev::{chebyshev_gft, chebyshev_gft_var, chebyshev_terms, ChebyshevBasis, LAMBDA_MAX};
pub use eigen::{eigen_gft, eigen_igft, symmetric_eigen, EigenBasis};
pub use fourier::{dft, idft, idft_complex, SpectrumPair};
pub use laplacian::{build_laplacian, graph_from_adjacency, LatentGraph};
