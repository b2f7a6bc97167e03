//! The Legendre-Lewy transform `w = (u + K̄|x|²/2)^*`, the conformal equation
//! `H(D²w) = 0` and the Hessian quotient `q = σ_{n-1}/σ_{n-2}`.

mod discrete;
mod spectral;

pub use discrete::{involution_gap, llt_max, transform_grid, LegendreImage};

pub use spectral::{
    eigenvalue_bounds_check, q_ellipticity, quotient_q, state_from_mu, transform_spectrum, KbarChoice,
    TransformConfig, TransformedState,
};
