//! Closed-form comparison functions for the kinetic heat kernel and the
//! quadratures that compare them against chord and moment integrals.
//!
//! `N_β(z) = (1+|z|)^{-1-β} (1 + inf_{s∈[0,1]} |x - s v|)^{1-β}` is the
//! two-sided envelope shape at `β = d + α`.

use crate::error::{Error, Result};
use crate::geometry::{dilate, dot, gamma, min_gamma, norm, norm_sq, shear, PhasePoint};
use crate::quadrature::{integrate_points, integrate_to_infinity, QuadOptions};
use crate::scalar::Scalar;

/// Exponent `β > 1` and ambient dimension `d` of a comparison function.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundParams<T> {
    pub beta: T,
    pub d: usize,
}

impl<T: Scalar> BoundParams<T> {
    pub fn new(beta: T, d: usize) -> Result<Self> {
        if !(beta > T::one()) {
            return Err(Error::domain("beta must exceed 1"));
        }
        if d == 0 {
            return Err(Error::domain("dimension must be positive"));
        }
        Ok(Self { beta, d })
    }

    /// `β = d + α`, the exponent of the kernel envelope.
    pub fn for_kernel(d: usize, alpha: T) -> Result<Self> {
        check_alpha(alpha)?;
        Self::new(T::from_usize(d).expect("dimension") + alpha, d)
    }
}

fn check_alpha<T: Scalar>(alpha: T) -> Result<()> {
    if alpha > T::zero() && alpha < T::lit(2.0) {
        Ok(())
    } else {
        Err(Error::domain("alpha must lie in (0,2)"))
    }
}

/// `N_β(z)`.
pub fn n_beta<T: Scalar>(z: &PhasePoint<T>, p: &BoundParams<T>) -> T {
    (T::one() + z.norm()).powf(-T::one() - p.beta) * m_beta(z, p)
}

/// `N_β(z)` through its three explicit regions in `<x, v>`.
pub fn n_beta_piecewise<T: Scalar>(z: &PhasePoint<T>, p: &BoundParams<T>) -> T {
    let one = T::one();
    let xv = dot(z.x(), z.v());
    let vv = norm_sq(z.v());
    let inner = if xv <= T::zero() || vv == T::zero() {
        norm(z.x())
    } else if xv <= vv {
        // |x|^2 - <x, v̄>^2 through the Lagrange identity, free of cancellation
        let (x, v) = (z.x(), z.v());
        let mut wedge = T::zero();
        for i in 0..x.len() {
            for j in i + 1..x.len() {
                let c = x[i] * v[j] - x[j] * v[i];
                wedge = wedge + c * c;
            }
        }
        (wedge / vv).sqrt()
    } else {
        norm(&gamma(z, one))
    };
    (one + z.norm()).powf(-one - p.beta) * (one + inner).powf(one - p.beta)
}

/// `M_β(z) = (1 + inf_{s∈[0,1]} |Γ_s z|)^{1-β}`.
pub fn m_beta<T: Scalar>(z: &PhasePoint<T>, p: &BoundParams<T>) -> T {
    (T::one() + min_gamma(z).value).powf(T::one() - p.beta)
}

/// `∫_0^1 (|Γ_s z| + 1)^{-β} ds` to relative tolerance `1e-8`, split at the chord minimiser.
pub fn chord_integral<T: Scalar>(z: &PhasePoint<T>, p: &BoundParams<T>) -> Result<T> {
    let s_star = min_gamma(z).s_star;
    let mut points = vec![T::zero()];
    if s_star > T::zero() && s_star < T::one() {
        points.push(s_star);
    }
    points.push(T::one());
    let beta = p.beta;
    let est = integrate_points(
        |s| (norm(&gamma(z, s)) + T::one()).powf(-beta),
        &points,
        QuadOptions::new(T::zero(), T::lit(1e-8).max(T::epsilon() * T::lit(100.0))),
    )?;
    Ok(est.value[0])
}

/// Value of `∫ |x|^q N_β(x, v) dx`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MomentValue<T> {
    Finite(T),
    Divergent,
}

impl<T: Copy> MomentValue<T> {
    pub fn finite(self) -> Option<T> {
        match self {
            MomentValue::Finite(v) => Some(v),
            MomentValue::Divergent => None,
        }
    }
}

/// Surface area of the unit sphere `S^{k}` in `R^{k+1}`.
pub(crate) fn sphere_area(k: usize) -> f64 {
    let n = (k + 1) as f64;
    2.0 * std::f64::consts::PI.powf(n / 2.0) / statrs::function::gamma::gamma(n / 2.0)
}

/// `N_β` evaluated from the rotated coordinates `(x_1, |x_⊥|)` with `v = |v| e_1`.
fn n_beta_rotated<T: Scalar>(x1: T, rho: T, speed: T, beta: T) -> T {
    let one = T::one();
    let r2 = x1 * x1 + rho * rho;
    let inner = if x1 <= T::zero() || speed == T::zero() {
        r2.sqrt()
    } else if x1 <= speed {
        rho
    } else {
        ((x1 - speed) * (x1 - speed) + rho * rho).sqrt()
    };
    (one + (r2 + speed * speed).sqrt()).powf(-one - beta) * (one + inner).powf(one - beta)
}

/// `∫_{R^d} |x|^q N_β(x, v) dx`.
///
/// Divergence (`q >= 2β - d`) is decided analytically. Finite values rotate `v`
/// onto `e_1` and integrate in polar coordinates `(|x|, angle to e_1)`, which
/// reduces every dimension to a two-dimensional integral.
pub fn moment_integral<T: Scalar>(v: &[T], q: T, p: &BoundParams<T>) -> Result<MomentValue<T>> {
    let d = v.len();
    if d != p.d {
        return Err(Error::domain("velocity dimension does not match bound parameters"));
    }
    let df = T::from_usize(d).expect("dimension");
    if !(p.beta > df) {
        return Err(Error::domain("moment integrals need beta > d"));
    }
    if !(q >= T::zero()) {
        return Err(Error::domain("moment order must be nonnegative"));
    }
    if q >= T::lit(2.0) * p.beta - df {
        return Ok(MomentValue::Divergent);
    }
    let speed = norm(v);
    let beta = p.beta;
    let outer = QuadOptions::new(T::zero(), T::lit(1e-8).max(T::epsilon() * T::lit(100.0)))
        .with_max_segments(4000);
    let inner = QuadOptions::new(T::zero(), T::lit(1e-11).max(T::epsilon() * T::lit(50.0)));
    let radius = T::lit(100.0) * (T::one() + speed) - T::one();
    // radial integrand decays like r^{-1-decay}
    let decay = T::lit(2.0) * beta - q - df;

    if d == 1 {
        let f = |x: T| x.abs().powf(q) * n_beta_rotated(x, T::zero(), speed, beta);
        let mut pts = vec![-radius, T::zero()];
        if speed > T::zero() {
            pts.push(speed);
        }
        pts.push(radius);
        let core = integrate_points(f, &pts, outer)?.value[0];
        let right = power_tail(f, radius, decay, outer)?;
        let left = power_tail(|x| f(-x), radius, decay, outer)?;
        return Ok(MomentValue::Finite(core + right + left));
    }

    let area = T::lit(sphere_area(d - 2));
    let dm2 = (d - 2) as i32;
    let mut failure: Option<Error> = None;
    let mut radial = |r: T| -> T {
        if r == T::zero() {
            return T::zero();
        }
        let mut pts = vec![T::zero(), T::FRAC_PI_2()];
        if r > speed && speed > T::zero() {
            pts.insert(1, (speed / r).acos());
        }
        pts.push(T::PI());
        let g = |th: T| {
            let (s, c) = th.sin_cos();
            s.powi(dm2) * n_beta_rotated(r * c, r * s, speed, beta)
        };
        match integrate_points(g, &pts, inner) {
            Ok(e) => r.powf(q + df - T::one()) * e.value[0],
            Err(e) => {
                failure.get_or_insert(e);
                T::zero()
            }
        }
    };
    let mut pts = vec![T::zero()];
    if speed > T::zero() {
        pts.push(speed);
    }
    pts.push(radius);
    let core = integrate_points(&mut radial, &pts, outer)?.value[0];
    let tail = power_tail(&mut radial, radius, decay, outer)?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(MomentValue::Finite(area * (core + tail)))
}

/// `∫_R^∞ f(r) dr` for `f(r) ~ C r^{-1-decay}`, through `r = R u^{-1/decay}`, which
/// maps the power law onto a bounded integrand on `(0, 1]`.
fn power_tail<T: Scalar, F: FnMut(T) -> T>(
    mut f: F,
    radius: T,
    decay: T,
    opts: QuadOptions<T>,
) -> Result<T> {
    let g = |u: T| {
        if u <= T::zero() {
            return T::zero();
        }
        // beyond r = 1e30 R the rescaled integrand is constant to working precision
        let stretch = (-u.ln() / decay).min(T::lit(69.0)).exp();
        let r = radius * stretch;
        let v = f(r) * r.powf(T::one() + decay);
        if v.is_finite() {
            v
        } else {
            T::zero()
        }
    };
    let est = integrate_points(g, &[T::zero(), T::one()], opts)?;
    Ok(est.value[0] * radius.powf(-decay) / decay)
}

/// The one-dimensional comparison function of Grube,
/// `(1+|x|+|v|)^{-2-α} (1+(|2x-v|-|v|)_+)^{-α}`.
pub fn grube_d1<T: Scalar>(z: &PhasePoint<T>, alpha: T) -> Result<T> {
    if z.dim() != 1 {
        return Err(Error::domain("the one-dimensional comparator needs d = 1"));
    }
    check_alpha(alpha)?;
    let (x, v) = (z.x()[0], z.v()[0]);
    let one = T::one();
    let excess = ((T::lit(2.0) * x - v).abs() - v.abs()).max(T::zero());
    Ok((one + x.abs() + v.abs()).powf(-T::lit(2.0) - alpha) * (one + excess).powf(-alpha))
}

/// Any-dimension form with `ω_z = <x̄, v̄>` (and `0̄ = 0`):
/// `(1+|z|)^{-1-β} (1 + |x|√(1-ω²) + (|2|x|ω - |v|| - |v|)_+)^{1-β}`, `β = d + α`.
pub fn grube_general<T: Scalar>(z: &PhasePoint<T>, alpha: T) -> Result<T> {
    let p = BoundParams::for_kernel(z.dim(), alpha)?;
    let one = T::one();
    let nx = norm(z.x());
    let nv = norm(z.v());
    let omega = if nx == T::zero() || nv == T::zero() {
        T::zero()
    } else {
        (dot(z.x(), z.v()) / (nx * nv)).max(-one).min(one)
    };
    let perp = nx * (one - omega * omega).max(T::zero()).sqrt();
    let excess = ((T::lit(2.0) * nx * omega - nv).abs() - nv).max(T::zero());
    Ok((one + z.norm()).powf(-one - p.beta) * (one + perp + excess).powf(one - p.beta))
}

/// `grube_d1` in one dimension, `grube_general` otherwise.
pub fn grube_comparator<T: Scalar>(z: &PhasePoint<T>, alpha: T) -> Result<T> {
    if z.dim() == 1 {
        grube_d1(z, alpha)
    } else {
        grube_general(z, alpha)
    }
}

/// Inputs of the kernel envelope: kernel bounds, time, index and dimension.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnvelopeParams<T> {
    pub kappa0: T,
    pub kappa1: T,
    pub t: T,
    pub alpha: T,
    pub d: usize,
}

impl<T: Scalar> EnvelopeParams<T> {
    pub fn new(kappa0: T, kappa1: T, t: T, alpha: T, d: usize) -> Result<Self> {
        check_alpha(alpha)?;
        if !(kappa0 > T::zero() && kappa0 <= kappa1) {
            return Err(Error::domain("need 0 < kappa0 <= kappa1"));
        }
        if !(t > T::zero()) {
            return Err(Error::domain("time must be positive"));
        }
        if d == 0 {
            return Err(Error::domain("dimension must be positive"));
        }
        Ok(Self {
            kappa0,
            kappa1,
            t,
            alpha,
            d,
        })
    }
}

/// `c0* = ∫_{|y|>1/3} |y|^{-d-α} dy`, by radial quadrature.
pub fn c0_star<T: Scalar>(d: usize, alpha: T) -> Result<T> {
    radial_tail_mass(d, alpha, T::one() / T::lit(3.0))
}

/// `∫_{|y|>r0} |y|^{-d-α} dy = |S^{d-1}| ∫_{r0}^∞ r^{-1-α} dr` by quadrature.
pub(crate) fn radial_tail_mass<T: Scalar>(d: usize, alpha: T, r0: T) -> Result<T> {
    check_alpha(alpha)?;
    let radial = integrate_to_infinity(
        |r| r.powf(-T::one() - alpha),
        r0,
        QuadOptions::new(T::zero(), T::lit(1e-12).max(T::epsilon() * T::lit(100.0))),
    )?;
    Ok(T::lit(sphere_area(d - 1)) * radial)
}

/// Envelope shapes `(lower, upper_shape)` without the unknown comparability constant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Envelope<T> {
    pub lower: Option<T>,
    pub upper_shape: T,
}

/// Lower and upper envelope shapes at `z` for a process started at `z0`.
///
/// The lower shape is only defined for `jx = jv = 0`.
pub fn envelope<T: Scalar>(
    z0: &PhasePoint<T>,
    z: &PhasePoint<T>,
    e: &EnvelopeParams<T>,
    jx: u32,
    jv: u32,
) -> Result<Envelope<T>> {
    if z.dim() != e.d || z0.dim() != e.d {
        return Err(Error::domain("point dimension does not match envelope parameters"));
    }
    let one = T::one();
    let df = T::from_usize(e.d).expect("dimension");
    let p = BoundParams::for_kernel(e.d, e.alpha)?;
    let rel = z.sub(&shear(z0, e.t));
    let scaled = dilate(&rel, e.t, e.alpha)?;
    let k0 = e.kappa0.powf(-one / e.alpha);
    let arg = scaled.map(|c| c * k0);
    let shape = n_beta(&arg, &p);
    let ratio = e.kappa1 / e.kappa0;
    let two_d = T::lit(2.0) * df;

    let lower = if jx == 0 && jv == 0 {
        let c0s = c0_star(e.d, e.alpha)?;
        Some(
            e.kappa0.powf(-two_d / e.alpha)
                * (-c0s * ratio).exp()
                * e.t.powf(-two_d / e.alpha - df)
                * shape,
        )
    } else {
        None
    };
    let order = two_d + T::from_u32(jx + jv).expect("derivative order");
    let upper_shape = e.kappa0.powf(-order / e.alpha)
        * ratio.powf(T::lit(3.0) + T::lit(4.0) * df + T::lit(3.0) * e.alpha)
        * e.t.powf(-order / e.alpha - T::from_u32(jx).expect("order") - df)
        * shape;
    Ok(Envelope { lower, upper_shape })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn pt(x: &[f64], v: &[f64]) -> PhasePoint<f64> {
        PhasePoint::new(x.to_vec(), v.to_vec()).unwrap()
    }

    #[test]
    fn n_beta_examples() {
        let p = BoundParams::new(2.0, 1).unwrap();
        assert_eq!(n_beta(&PhasePoint::origin(1), &p), 1.0);
        let z = pt(&[0.0, 0.0], &[3.0, 4.0]);
        let p2 = BoundParams::new(2.5, 2).unwrap();
        assert_relative_eq!(n_beta(&z, &p2), 6f64.powf(-3.5), max_relative = 1e-15);
        // (1+√10)^{-3}/3 evaluated independently
        assert_relative_eq!(
            n_beta(&pt(&[3.0], &[1.0]), &p),
            4.622_592_401_549_578e-3,
            max_relative = 1e-12
        );
    }

    #[test]
    fn piecewise_examples() {
        let beta = 1.7;
        let p = BoundParams::new(beta, 1).unwrap();
        let z = pt(&[-1.0], &[1.0]);
        let expect = (1.0 + 2f64.sqrt()).powf(-1.0 - beta) * 2f64.powf(1.0 - beta);
        assert_relative_eq!(n_beta_piecewise(&z, &p), expect, max_relative = 1e-15);
        let p2 = BoundParams::new(2.0, 2).unwrap();
        let z2 = pt(&[1.0, 1.0], &[2.0, 0.0]);
        let expect2 = (1.0 + 6f64.sqrt()).powi(-3) * 0.5;
        assert_relative_eq!(n_beta_piecewise(&z2, &p2), expect2, max_relative = 1e-15);
    }

    #[test]
    fn m_beta_examples() {
        let p = BoundParams::new(2.0, 1).unwrap();
        assert_eq!(m_beta(&PhasePoint::origin(1), &p), 1.0);
        assert_relative_eq!(m_beta(&pt(&[3.0], &[1.0]), &p), 1.0 / 3.0, max_relative = 1e-15);
        let p3 = BoundParams::new(3.5, 2).unwrap();
        assert_relative_eq!(
            m_beta(&pt(&[3.0, 4.0], &[0.0, 0.0]), &p3),
            6f64.powf(-2.5),
            max_relative = 1e-15
        );
    }

    #[test]
    fn chord_integral_examples() {
        let p = BoundParams::new(2.5, 2).unwrap();
        assert_relative_eq!(
            chord_integral(&PhasePoint::origin(2), &p).unwrap(),
            1.0,
            max_relative = 1e-14
        );
        let z = pt(&[3.0, -4.0], &[0.0, 0.0]);
        assert_relative_eq!(
            chord_integral(&z, &p).unwrap(),
            6f64.powf(-2.5),
            max_relative = 1e-12
        );
        // d = 1, x = 0, v = 1: ∫_0^1 (1+s)^{-2} ds = 1/2
        let p1 = BoundParams::new(2.0, 1).unwrap();
        assert_relative_eq!(
            chord_integral(&pt(&[0.0], &[1.0]), &p1).unwrap(),
            0.5,
            max_relative = 1e-9
        );
    }

    #[test]
    fn moment_divergence_threshold() {
        let p = BoundParams::new(2.5, 1).unwrap();
        assert_eq!(moment_integral(&[3.0], 4.0, &p).unwrap(), MomentValue::Divergent);
        assert_eq!(moment_integral(&[0.0], 7.0, &p).unwrap(), MomentValue::Divergent);
        assert!(moment_integral(&[3.0], 3.99, &p).unwrap().finite().is_some());
        let bad = BoundParams::new(1.5, 2).unwrap();
        assert!(moment_integral(&[0.0, 0.0], 0.0, &bad).is_err());
    }

    #[test]
    fn moment_closed_form_at_rest() {
        // ∫ (1+|x|)^{-4} dx = 2/3
        let p = BoundParams::new(2.0, 1).unwrap();
        let m = moment_integral(&[0.0], 0.0, &p).unwrap().finite().unwrap();
        assert_relative_eq!(m, 2.0 / 3.0, max_relative = 1e-7);
        // ∫ |x| (1+|x|)^{-4} dx = 1/3
        let m1 = moment_integral(&[0.0], 1.0, &p).unwrap().finite().unwrap();
        assert_relative_eq!(m1, 1.0 / 3.0, max_relative = 1e-7);
    }

    #[test]
    fn moment_two_dimensional_at_rest() {
        // d = 2, v = 0: 2π ∫_0^∞ r (1+r)^{-2β} dr = 2π / ((2β-1)(2β-2))
        let beta = 2.5;
        let p = BoundParams::new(beta, 2).unwrap();
        let m = moment_integral(&[0.0, 0.0], 0.0, &p).unwrap().finite().unwrap();
        let expect = 2.0 * std::f64::consts::PI / ((2.0 * beta - 1.0) * (2.0 * beta - 2.0));
        assert_relative_eq!(m, expect, max_relative = 1e-7);
    }

    #[test]
    fn moment_is_rotation_invariant() {
        let p = BoundParams::new(3.5, 2).unwrap();
        let a = moment_integral(&[5.0, 0.0], 1.0, &p).unwrap().finite().unwrap();
        let b = moment_integral(&[3.0, 4.0], 1.0, &p).unwrap().finite().unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-12);
    }

    #[test]
    fn moment_brute_force_two_dimensional() {
        // Cartesian tensor quadrature of the unrotated integrand as an independent route.
        let p = BoundParams::new(3.5, 2).unwrap();
        let v = [2.0, 1.0];
        let fast = moment_integral(&v, 0.0, &p).unwrap().finite().unwrap();
        let (nodes, weights) = crate::quadrature::gauss_legendre::<f64>(16);
        let edges: Vec<f64> = (-60..=60).map(|k| k as f64 * 0.5).collect();
        let mut sum = 0.0;
        for wx in edges.windows(2) {
            for wy in edges.windows(2) {
                for (a, wa) in nodes.iter().zip(&weights) {
                    for (b, wb) in nodes.iter().zip(&weights) {
                        let x1 = 0.5 * (wx[0] + wx[1]) + 0.25 * a;
                        let x2 = 0.5 * (wy[0] + wy[1]) + 0.25 * b;
                        let z = pt(&[x1, x2], &v);
                        sum += wa * wb * 0.0625 * n_beta(&z, &p);
                    }
                }
            }
        }
        // box |x_i| <= 30 misses a tail of order 30^{d-2β} ≈ 1e-7
        assert_relative_eq!(fast, sum, max_relative = 1e-5);
    }

    #[test]
    fn grube_examples() {
        assert_relative_eq!(grube_d1(&PhasePoint::origin(1), 1.0).unwrap(), 1.0);
        assert_relative_eq!(
            grube_d1(&pt(&[1.0], &[2.0]), 1.0).unwrap(),
            1.0 / 64.0,
            max_relative = 1e-15
        );
        assert!(grube_d1(&PhasePoint::origin(2), 1.0).is_err());
        assert!(grube_d1(&PhasePoint::origin(1), 2.5).is_err());
    }

    #[test]
    fn c0_star_closed_form() {
        assert_relative_eq!(c0_star::<f64>(1, 1.0).unwrap(), 6.0, max_relative = 1e-10);
        // d = 2: 2π · 3^α / α
        let a = 1.5;
        assert_relative_eq!(
            c0_star::<f64>(2, a).unwrap(),
            2.0 * std::f64::consts::PI * 3f64.powf(a) / a,
            max_relative = 1e-10
        );
    }

    #[test]
    fn envelope_reduces_at_unit_scale() {
        let e = EnvelopeParams::new(1.0, 1.0, 1.0, 1.0, 1).unwrap();
        let z = pt(&[2.0], &[-1.5]);
        let env = envelope(&PhasePoint::origin(1), &z, &e, 0, 0).unwrap();
        let p = BoundParams::for_kernel(1, 1.0).unwrap();
        let n = n_beta(&z, &p);
        assert_relative_eq!(env.lower.unwrap(), (-6.0f64).exp() * n, max_relative = 1e-10);
        assert_relative_eq!(env.upper_shape, n, max_relative = 1e-14);
        let grad = envelope(&PhasePoint::origin(1), &z, &e, 1, 0).unwrap();
        assert!(grad.lower.is_none());
    }

    #[test]
    fn envelope_time_scaling_matches_dilation() {
        let (t, alpha) = (0.3, 1.5);
        let e = EnvelopeParams::new(1.0, 2.0, t, alpha, 1).unwrap();
        let z = pt(&[0.7], &[-2.0]);
        let env = envelope(&PhasePoint::origin(1), &z, &e, 0, 0).unwrap();
        let p = BoundParams::for_kernel(1, alpha).unwrap();
        let c0s = c0_star::<f64>(1, alpha).unwrap();
        let expect = (-c0s * 2.0).exp()
            * t.powf(-2.0 / alpha - 1.0)
            * n_beta(&dilate(&z, t, alpha).unwrap(), &p);
        assert_relative_eq!(env.lower.unwrap(), expect, max_relative = 1e-12);
    }

    #[test]
    fn envelope_parameter_validation() {
        assert!(EnvelopeParams::new(2.0, 1.0, 1.0, 1.0, 1).is_err());
        assert!(EnvelopeParams::new(1.0, 1.0, 0.0, 1.0, 1).is_err());
        assert!(EnvelopeParams::new(1.0, 1.0, 1.0, 2.0, 1).is_err());
    }

    fn region_point(d: usize) -> impl Strategy<Value = PhasePoint<f64>> {
        (
            proptest::collection::vec(-30.0f64..30.0, d),
            proptest::collection::vec(-30.0f64..30.0, d),
        )
            .prop_map(|(x, v)| PhasePoint::new(x, v).unwrap())
    }

    proptest! {
        #[test]
        fn piecewise_equals_infimum_form(z in (1usize..4).prop_flat_map(region_point), beta in 1.01f64..5.0) {
            let p = BoundParams::new(beta, z.dim()).unwrap();
            let a = n_beta(&z, &p);
            let b = n_beta_piecewise(&z, &p);
            prop_assert!((a - b).abs() <= 1e-12 * a);
        }

        #[test]
        fn envelope_depends_on_sheared_difference(
            x0 in -5.0f64..5.0, v0 in -5.0f64..5.0, x in -20.0f64..20.0, v in -20.0f64..20.0, t in 0.1f64..3.0
        ) {
            let e = EnvelopeParams::new(1.0, 1.5, t, 1.2, 1).unwrap();
            let z0 = PhasePoint::scalar(x0, v0);
            let z = PhasePoint::scalar(x, v);
            let a = envelope(&z0, &z, &e, 0, 0).unwrap();
            let moved = z.sub(&shear(&z0, t));
            let b = envelope(&PhasePoint::origin(1), &moved, &e, 0, 0).unwrap();
            prop_assert!((a.lower.unwrap() - b.lower.unwrap()).abs() <= 1e-12 * b.lower.unwrap());
            prop_assert!((a.upper_shape - b.upper_shape).abs() <= 1e-12 * b.upper_shape);
        }
    }

    #[test]
    fn single_precision_bounds() {
        let p = BoundParams::<f32>::new(2.0, 1).unwrap();
        let z = PhasePoint::<f32>::scalar(3.0, 1.0);
        assert!((n_beta(&z, &p) - 4.6226e-3).abs() < 1e-6);
        let c = chord_integral(&z, &p).unwrap();
        assert!(c > 0.0 && c.is_finite());
    }
}
