//! Finite-difference Newton solver for `σ₂(D²u) = 1` on boxes, the discrete
//! superharmonicity check for the transformed potential and the scaling
//! experiments.

mod experiments;
mod linear;
mod solver;
mod superharmonic;

pub use experiments::{
    box_mode_boundary, concentration_diagnostic, default_options, hessian_oscillation, perturbed_boundary,
    quadratic_boundary, scaling_experiment, solve_and_transform, ConcentrationRow, ConcentrationTable, ScalingRow,
    ScalingTable,
};
pub use linear::{cgnr, choose_backend, solve as solve_linear, BandedLu, LinearBackend, SparseMatrix};
pub use solver::{isotropic_t, solve_dirichlet, solve_dirichlet_rhs, Field, SolveOptions, SolveReport};
pub use superharmonic::{in_sub_box, superharmonicity_residual, SuperharmonicField};
