//! Elementary symmetric functions and small dense symmetric linear algebra.

mod eigen;
mod matrix;
mod spectrum;

pub use eigen::{eigen_sym, EigenDecomposition};
pub use matrix::{Matrix, SymmetricMatrix};
pub use spectrum::{elementary_symmetric, esp, quotient, sigma_k, sigma_k_partial, Spectrum};
pub(crate) use spectrum::esp_without;
