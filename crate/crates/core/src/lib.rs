//! Heat kernels of the nonlocal kinetic operator `Δ_v^{α/2} + v·∇_x` and its
//! stable-like generalisations: Fourier inversion, exact-in-law simulation,
//! closed-form comparison functions and the numerical checks tying them together.
//!
//! The geometric, bound and quadrature layers are generic over [`Scalar`]
//! (`f32`/`f64`); the spectral and Monte Carlo layers run in `f64`.

pub mod bounds;
pub mod error;
pub mod geometry;
pub mod kernel;
pub mod levy;
pub mod quadrature;
pub mod scalar;
pub mod simulate;
pub mod verify;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type PhasePoint = geometry::PhasePoint<f64>;
pub type PhasePointF32 = geometry::PhasePoint<f32>;
pub type BoundParams = bounds::BoundParams<f64>;
pub type BoundParamsF32 = bounds::BoundParams<f32>;
pub type EnvelopeParams = bounds::EnvelopeParams<f64>;
pub type QuadOptions = quadrature::QuadOptions<f64>;
