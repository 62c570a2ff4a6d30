//! Certification of exponentially stable periodic orbits for polynomial
//! dynamical systems.
//!
//! Given a polynomial vector field f and a compact semialgebraic region
//! K = {x | qᵢ(x) ≥ 0}, this crate searches for a polynomial Riemannian
//! metric G(x) under which the flow contracts transversally to itself on K:
//!
//! ```text
//! λ'_G(x) = max { wᵀ(J(x)G(x) − ½Ġ(x))w : |w| = 1, wᵀf(x) = 0 } < 0
//! ```
//!
//! The search is expressed as a sum-of-squares feasibility problem over the
//! joint ring ℝ[X,W] using quadratic-module (Putinar-style) multipliers,
//! lowered to a semidefinite program, and solved with an embedded
//! primal-dual interior-point method. A successful search produces a
//! [`Certificate`] that can be re-verified independently: by recomposing
//! the polynomial identity from stored Gram matrices and by sampling the
//! contraction quantity over K.
//!
//! Region invariance (the Nagumo boundary condition) is checked separately,
//! both by SOS certification and by boundary sampling; a periodic orbit is
//! only claimed when contraction and invariance both hold.
//!
//! Core math is generic over the scalar type ([`scalar::Scalar`], i.e.
//! `f32` or `f64`); the aliases below fix `f64`, which is what the CLI and
//! the certificate tolerances are tuned for.

pub mod analysis;
pub mod linalg;
pub mod parse;
pub mod pipeline;
pub mod poly;
pub mod problem;
pub mod scalar;
pub mod sdp;
pub mod sos;

pub use scalar::Scalar;

/// `f64` polynomial.
pub type Poly = poly::Polynomial<f64>;
/// `f64` polynomial matrix.
pub type PolyMat = poly::PolyMatrix<f64>;
/// `f64` vector field.
pub type Field = poly::VectorField<f64>;
/// `f64` problem specification.
pub type Problem = problem::ProblemSpec<f64>;
/// `f64` SOS program.
pub type Program = sos::SosProgram<f64>;
/// `f64` semidefinite program.
pub type Sdp = sdp::SdpProblem<f64>;
/// `f64` certificate.
pub type Certificate = sdp::Certificate<f64>;
