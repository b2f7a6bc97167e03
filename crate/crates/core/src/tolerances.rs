//! Every tolerance and threshold used by the library, the suites and the
//! acceptance gate. Tests read from here rather than restating numbers.

/// Orthogonality of a computed eigenbasis, `max |QᵀQ - I|`.
pub const EIGEN_ORTHOGONALITY: f64 = 1e-12;
/// Reconstruction `max |QDQᵀ - M|`, relative to `1 + max |M|`.
pub const EIGEN_RECONSTRUCTION: f64 = 1e-10;
/// Cyclic Jacobi sweep budget. Dimension never exceeds [`EIGEN_MAX_DIM`].
pub const EIGEN_MAX_SWEEPS: usize = 64;
pub const EIGEN_MAX_DIM: usize = 64;

/// Relative tolerance of algebraic identities among symmetric functions
/// (Euler, `Σ f_i² = (n-1)σ₁² - 2`, trace-formula cross checks).
pub const SYMMETRIC_IDENTITY: f64 = 1e-10;
/// Identities that hold up to a handful of roundings.
pub const EXACT_IDENTITY: f64 = 1e-12;

/// Constraint check `σ₂ = 1` when building an operator point from a matrix.
pub const OPERATOR_POINT: f64 = 1e-9;
/// Constraint check `σ₂ = 1` for sampled spectra.
pub const CONSTRAINT: f64 = 1e-10;
/// Slack on the semiconvexity floor `λ_i >= -K`.
pub const FLOOR_SLACK: f64 = 1e-12;

/// Sampler: reject partial traces at or below this value.
pub const SAMPLER_MIN_REST_TRACE: f64 = 1e-6;
/// Sampler: probability that one eigenvalue is pinned at exactly `-K`.
pub const SAMPLER_PIN_PROBABILITY: f64 = 0.25;
/// Sampler: window length and minimum acceptance fraction before giving up.
pub const SAMPLER_WINDOW: u64 = 100_000;
pub const SAMPLER_MIN_ACCEPTANCE: f64 = 1e-3;
/// Half-width of the draw interval when no semiconvexity floor is imposed.
pub const UNBOUNDED_DRAW_RANGE: f64 = 20.0;

/// Tangency `Σ_i f_i c_iik = 0`, relative to `|Df| |slice|`.
pub const TANGENCY: f64 = 1e-10;
/// Precondition of the direct quadratic form: `|<Df, t>| <= tol |Df| |t|`.
pub const Q_TANGENCY_PRECONDITION: f64 = 1e-9;
/// Allowed negative discriminant `tr² - 4 det` (relative) before it is an error.
pub const DISCRIMINANT_SLACK: f64 = 1e-10;
/// `|Df|²` below this is a degenerate level set.
pub const DF_DEGENERATE: f64 = 1e-12;
/// Closed-form (tr, det) against the projected-form oracle.
pub const REDUCTION_ORACLE: f64 = 1e-8;
/// Smallest eigenvalue of the projected form must stay above `-tol`.
pub const PROJECTED_FORM_FLOOR: f64 = 1e-9;
/// Determinant chain `lhs >= rhs - tol (1 + |lhs|)`.
pub const DET_BOUND: f64 = 1e-8;
/// Certificate floor: `excess >= -tol`.
pub const EXCESS_FLOOR: f64 = 1e-9;
/// Regrouping identity `(σ₁+J) excess = 6Σc² + Σ Q_i`.
pub const DECOMPOSITION_IDENTITY: f64 = 1e-10;
/// `Δ_F e^{-b/3} = -(1/3)(σ₁+J)^{-1/3} excess`.
pub const SUPERHARMONIC_IDENTITY: f64 = 1e-12;

/// Residual of the transformed equation on manifold spectra.
pub const TRANSFORM_RESIDUAL: f64 = 1e-9;
/// `σ_n(μ)(1 - σ₂(λ)) = H(μ)` for arbitrary spectra.
pub const TRANSFORM_IDENTITY: f64 = 1e-10;
/// `Δu + n K̄ = Σ 1/μ_i`.
pub const TRACE_IDENTITY: f64 = 1e-10;
/// `q = [A₁ - A₂ a³]^{-1}`.
pub const QUOTIENT_IDENTITY: f64 = 1e-9;
/// `a³ Σ 1/μ_i = 1`.
pub const HARMONIC_MEAN_IDENTITY: f64 = 1e-12;
/// Gradient against central finite differences.
pub const FINITE_DIFFERENCE_REL: f64 = 1e-6;
/// Midpoint concavity slack.
pub const CONCAVITY_SLACK: f64 = 1e-10;
/// Gap enforced between `K̄` and `K + 1`.
pub const KBAR_GAP: f64 = 1e-6;

/// Centered stencils reproduce quadratics to this absolute accuracy.
pub const STENCIL_EXACT: f64 = 1e-12;
/// Measured convergence order window for second-order stencils and solves.
pub const ORDER_MIN: f64 = 1.9;
pub const ORDER_MAX: f64 = 2.1;
/// Quadratic boundary data must be reproduced to this accuracy.
pub const QUADRATIC_REPRODUCTION: f64 = 1e-10;
/// Default Newton stopping tolerance on `max |σ₂(D²_h u) - rhs|`.
pub const NEWTON_TOLERANCE: f64 = 1e-11;
pub const NEWTON_MAX_ITER: usize = 30;
/// Backtracking floor for the damped Newton step.
pub const NEWTON_DAMPING_FLOOR: f64 = 1.0 / 1_048_576.0;
/// Linearization against a forward difference at step `s`.
pub const LINEARIZATION_REL: f64 = 1e-5;
pub const LINEARIZATION_STEP: f64 = 1e-6;
/// Relative residual target of the iterative linear solver.
pub const LINEAR_SOLVE_REL: f64 = 1e-12;
/// The iterate is pushed back onto the positive branch below this trace.
pub const BRANCH_TRACE_FLOOR: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Pointwise `Δ_H a = σ_n(μ) Δ_G a` between the two assemblies.
pub const PROPORTIONALITY: f64 = 1e-10;
/// Required shrink factor of the positive part of `Δ_H a` under `h -> h/2`.
pub const REFINEMENT_SHRINK: f64 = 1.8;
/// Transformed Hessian eigenvalues may leave (0, 1) by this much before it is an error.
pub const MU_RANGE_SLACK: f64 = 1e-8;
/// Constant-`a` pipelines must give residuals below this.
pub const QUADRATIC_PIPELINE: f64 = 1e-9;
/// Hessian oscillation of a quadratic problem.
pub const OSC_QUADRATIC: f64 = 1e-9;
/// Relative change of the oscillation when the grid is refined.
pub const OSC_REFINEMENT: f64 = 0.10;
