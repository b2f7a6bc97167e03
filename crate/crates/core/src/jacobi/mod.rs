//! The shifted trace Jacobi inequality as a pointwise certificate on jets
//! over the constraint manifold.

mod certificate;
mod sampler;
mod tensor;

pub use certificate::{
    det_lower_bound, excess_decomposition, jacobi_excess, minimal_shift, minimal_shift_sample,
    project_jet, projected_form, q_form_direct, q_reduction_eigen, remark_3d, shift_necessity_probe,
    superharmonic_form, tangency_residual, ExcessDecomposition, Jet, ProjectedForm, QReduction, Remark3d,
    ShiftProbe,
};
pub use sampler::{
    chunk_rng, default_shift, sample_constraint, sample_ray_family, sample_rays, sample_with, ConstraintSample, ConstraintSampler,
    SamplerConfig, CHUNK_SIZE, DEFAULT_EPSILON,
};
pub use tensor::SymTensor3;
