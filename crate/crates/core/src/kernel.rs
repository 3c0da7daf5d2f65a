//! Transition densities `p_t(z)` of the kinetic pair `(∫₀ᵗ L_s ds, L_t)` by Fourier
//! inversion of `E e^{i(ξ,η)·Z_t} = e^{-φ(ξ,η)}`, spectral derivatives, FFT grids
//! and the closed-form Gaussian kernel of the `Δ_v + v·∇_x` operator.

mod grid;
mod invert;

pub use grid::{Axis, DensityGrid, GridSpec};
pub use invert::{radial_transform, InversionMethod, InversionOptions};

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::{shear, PhasePoint};
use crate::levy::CharacteristicExponent;

/// `p_t(0, z)` with default options.
pub fn density_point<E: CharacteristicExponent + ?Sized>(e: &E, t: f64, z: &PhasePoint<f64>) -> Result<f64> {
    density_derivative(e, t, z, 0, 0, &InversionOptions::default())
}

/// `∂_{x₁}^{jx} ∂_{v₁}^{jv} p_t(0, z)`, `jx + jv <= 2`.
pub fn density_gradient<E: CharacteristicExponent + ?Sized>(
    e: &E,
    t: f64,
    z: &PhasePoint<f64>,
    jx: u32,
    jv: u32,
) -> Result<f64> {
    density_derivative(e, t, z, jx, jv, &InversionOptions::default())
}

pub fn density_derivative<E: CharacteristicExponent + ?Sized>(
    e: &E,
    t: f64,
    z: &PhasePoint<f64>,
    jx: u32,
    jv: u32,
    opts: &InversionOptions,
) -> Result<f64> {
    if jx + jv > 2 {
        return Err(Error::domain("derivative order jx + jv must be at most 2"));
    }
    invert::check_inputs(e, t, z)?;
    invert::invert(e, t, z, &[(jx, jv)], opts).map(|v| v[0])
}

/// `[p, ∂_{x₁} p, ∂_{v₁} p]` at `z` from one shared angular integration.
pub fn density_and_gradient<E: CharacteristicExponent + ?Sized>(
    e: &E,
    t: f64,
    z: &PhasePoint<f64>,
    opts: &InversionOptions,
) -> Result<[f64; 3]> {
    invert::check_inputs(e, t, z)?;
    let v = invert::invert(e, t, z, &[(0, 0), (1, 0), (0, 1)], opts)?;
    Ok([v[0], v[1], v[2]])
}

/// `p_t(z₀, z) = p_t(0, z - θ_t z₀)`.
pub fn density_from<E: CharacteristicExponent + ?Sized>(
    e: &E,
    t: f64,
    z0: &PhasePoint<f64>,
    z: &PhasePoint<f64>,
) -> Result<f64> {
    if z0.dim() != z.dim() {
        return Err(Error::domain("dimension mismatch between z0 and z"));
    }
    density_point(e, t, &z.sub(&shear(z0, t)))
}

/// Gaussian kernel of `Δ_v + v·∇_x`: mean `θ_t z₀`, per coordinate
/// `Var X = 2t³/3`, `Cov(X, V) = t²`, `Var V = 2t`.
pub fn kolmogorov_density(z0: &PhasePoint<f64>, z: &PhasePoint<f64>, t: f64) -> Result<f64> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::domain("time must be positive"));
    }
    if z0.dim() != z.dim() {
        return Err(Error::domain("dimension mismatch between z0 and z"));
    }
    let w = z.sub(&shear(z0, t));
    let q: f64 = w
        .x()
        .iter()
        .zip(w.v())
        .map(|(&x, &v)| 3.0 * x * x / t.powi(3) - 3.0 * x * v / (t * t) + v * v / t)
        .sum();
    let norm = (3f64.sqrt() / (2.0 * PI * t * t)).powi(z.dim() as i32);
    Ok(norm * (-q).exp())
}

/// `∂_{x₁}^{jx} ∂_{v₁}^{jv}` of [`kolmogorov_density`] in `z`, for `jx + jv <= 1`.
pub fn kolmogorov_gradient(z0: &PhasePoint<f64>, z: &PhasePoint<f64>, t: f64, jx: u32, jv: u32) -> Result<f64> {
    let p = kolmogorov_density(z0, z, t)?;
    let w = z.sub(&shear(z0, t));
    let (x, v) = (w.x()[0], w.v()[0]);
    match (jx, jv) {
        (0, 0) => Ok(p),
        (1, 0) => Ok(-p * (6.0 * x / t.powi(3) - 3.0 * v / (t * t))),
        (0, 1) => Ok(-p * (-3.0 * x / (t * t) + 2.0 * v / t)),
        _ => Err(Error::domain("closed-form gradient supports first derivatives only")),
    }
}
