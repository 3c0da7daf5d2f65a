//! Phase-space points and the affine maps the kernel estimates are written in:
//! the chord `Γ_s z = x - s v`, the shear `θ_t z = (x + t v, v)` and the
//! anisotropic dilation `(t^{-1/α-1} x, t^{-1/α} v)`.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A point `z = (x, v)` of `R^{2d}`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhasePoint<T> {
    x: Vec<T>,
    v: Vec<T>,
}

impl<T: Scalar> PhasePoint<T> {
    pub fn new(x: Vec<T>, v: Vec<T>) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::domain("phase point needs dimension d >= 1"));
        }
        if x.len() != v.len() {
            return Err(Error::domain(format!(
                "position has length {} but velocity has length {}",
                x.len(),
                v.len()
            )));
        }
        if x.iter().chain(&v).any(|c| !c.is_finite()) {
            return Err(Error::domain("phase point coordinates must be finite"));
        }
        Ok(Self { x, v })
    }

    pub fn origin(d: usize) -> Self {
        assert!(d >= 1, "dimension must be positive");
        Self {
            x: vec![T::zero(); d],
            v: vec![T::zero(); d],
        }
    }

    /// One-dimensional point `(x, v)`.
    pub fn scalar(x: T, v: T) -> Self {
        Self::new(vec![x], vec![v]).expect("finite one-dimensional point")
    }

    /// Splits a flat `[x..., v...]` slice of even length.
    pub fn from_flat(z: &[T]) -> Result<Self> {
        if z.len() % 2 != 0 {
            return Err(Error::domain("flat phase point must have even length"));
        }
        let d = z.len() / 2;
        Self::new(z[..d].to_vec(), z[d..].to_vec())
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn x(&self) -> &[T] {
        &self.x
    }

    pub fn v(&self) -> &[T] {
        &self.v
    }

    pub fn to_flat(&self) -> Vec<T> {
        self.x.iter().chain(&self.v).copied().collect()
    }

    /// Euclidean norm of `z` in `R^{2d}`.
    pub fn norm(&self) -> T {
        (norm_sq(&self.x) + norm_sq(&self.v)).sqrt()
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch");
        Self {
            x: zip_with(&self.x, &other.x, |a, b| a - b),
            v: zip_with(&self.v, &other.v, |a, b| a - b),
        }
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> PhasePoint<U> {
        PhasePoint {
            x: self.x.iter().map(|&c| f(c)).collect(),
            v: self.v.iter().map(|&c| f(c)).collect(),
        }
    }
}

pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&p, &q)| acc + p * q)
}

pub(crate) fn norm_sq<T: Scalar>(a: &[T]) -> T {
    dot(a, a)
}

pub(crate) fn norm<T: Scalar>(a: &[T]) -> T {
    norm_sq(a).sqrt()
}

fn zip_with<T: Scalar>(a: &[T], b: &[T], f: impl Fn(T, T) -> T) -> Vec<T> {
    a.iter().zip(b).map(|(&p, &q)| f(p, q)).collect()
}

/// `Γ_s z = x - s v`.
pub fn gamma<T: Scalar>(z: &PhasePoint<T>, s: T) -> Vec<T> {
    zip_with(&z.x, &z.v, |x, v| x - s * v)
}

/// Anisotropic dilation `(t^{-1/α-1} x, t^{-1/α} v)`.
pub fn dilate<T: Scalar>(z: &PhasePoint<T>, t: T, alpha: T) -> Result<PhasePoint<T>> {
    if !(t > T::zero()) || !t.is_finite() {
        return Err(Error::domain("dilation time must be positive"));
    }
    if !(alpha > T::zero() && alpha <= T::lit(2.0)) {
        return Err(Error::domain("alpha must lie in (0,2]"));
    }
    let sv = t.powf(-T::one() / alpha);
    let sx = sv / t;
    Ok(PhasePoint {
        x: z.x.iter().map(|&c| c * sx).collect(),
        v: z.v.iter().map(|&c| c * sv).collect(),
    })
}

/// Free transport shear `θ_t z = (x + t v, v)`.
pub fn shear<T: Scalar>(z: &PhasePoint<T>, t: T) -> PhasePoint<T> {
    PhasePoint {
        x: zip_with(&z.x, &z.v, |x, v| x + t * v),
        v: z.v.clone(),
    }
}

/// Minimiser of `|Γ_s z|` over `s ∈ [0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChordMin<T> {
    pub s_star: T,
    pub value: T,
}

/// Closed-form `inf_{s∈[0,1]} |x - s v|` by the clamped projection `s0 = <x,v>/|v|^2`.
///
/// Cases split on the exact sign of `<x, v>` and its comparison with `|v|^2`;
/// `v = 0` gives `s* = 0`.
pub fn min_gamma<T: Scalar>(z: &PhasePoint<T>) -> ChordMin<T> {
    let xv = dot(&z.x, &z.v);
    let vv = norm_sq(&z.v);
    if xv <= T::zero() || vv == T::zero() {
        ChordMin {
            s_star: T::zero(),
            value: norm(&z.x),
        }
    } else if xv <= vv {
        let s0 = xv / vv;
        ChordMin {
            s_star: s0,
            value: norm(&gamma(z, s0)),
        }
    } else {
        ChordMin {
            s_star: T::one(),
            value: norm(&gamma(z, T::one())),
        }
    }
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
    fn gamma_examples() {
        assert_eq!(gamma(&pt(&[1.0], &[2.0]), 0.5), vec![0.0]);
        assert_eq!(gamma(&pt(&[3.0, -1.0], &[2.0, 7.0]), 0.0), vec![3.0, -1.0]);
        assert_eq!(gamma(&pt(&[1.0, 0.0], &[0.0, 1.0]), 1.0), vec![1.0, -1.0]);
    }

    #[test]
    fn dilate_examples() {
        let z = pt(&[3.0, 4.0], &[-1.0, 2.0]);
        assert_eq!(dilate(&z, 1.0, 1.3).unwrap(), z);
        assert_eq!(dilate(&pt(&[8.0], &[2.0]), 4.0, 1.0).unwrap(), pt(&[0.5], &[0.5]));
        let w = dilate(&pt(&[1.0], &[1.0]), 0.25, 2.0).unwrap();
        assert_relative_eq!(w.x()[0], 8.0, max_relative = 1e-15);
        assert_relative_eq!(w.v()[0], 2.0, max_relative = 1e-15);
        assert!(dilate(&z, 0.0, 1.0).is_err());
        assert!(dilate(&z, -1.0, 1.0).is_err());
    }

    #[test]
    fn shear_examples() {
        let z = pt(&[0.0], &[1.0]);
        assert_eq!(shear(&z, 0.0), z);
        assert_eq!(shear(&z, 2.0), pt(&[2.0], &[1.0]));
    }

    #[test]
    fn min_gamma_three_cases() {
        assert_eq!(
            min_gamma(&pt(&[1.0, 0.0], &[-1.0, 0.0])),
            ChordMin { s_star: 0.0, value: 1.0 }
        );
        assert_eq!(
            min_gamma(&pt(&[1.0, 1.0], &[2.0, 0.0])),
            ChordMin { s_star: 0.5, value: 1.0 }
        );
        assert_eq!(
            min_gamma(&pt(&[3.0], &[1.0])),
            ChordMin { s_star: 1.0, value: 2.0 }
        );
        // v = 0 convention
        assert_eq!(
            min_gamma(&pt(&[3.0, 4.0], &[0.0, 0.0])),
            ChordMin { s_star: 0.0, value: 5.0 }
        );
    }

    #[test]
    fn constructor_rejects_bad_points() {
        assert!(PhasePoint::<f64>::new(vec![], vec![]).is_err());
        assert!(PhasePoint::new(vec![1.0], vec![1.0, 2.0]).is_err());
        assert!(PhasePoint::new(vec![f64::NAN], vec![1.0]).is_err());
    }

    #[test]
    fn single_precision_min_gamma() {
        let z = PhasePoint::<f32>::new(vec![1.0, 1.0], vec![2.0, 0.0]).unwrap();
        let m = min_gamma(&z);
        assert!((m.s_star - 0.5).abs() < 1e-6 && (m.value - 1.0).abs() < 1e-6);
    }

    fn point(d: usize) -> impl Strategy<Value = PhasePoint<f64>> {
        (
            proptest::collection::vec(-20.0f64..20.0, d),
            proptest::collection::vec(-20.0f64..20.0, d),
        )
            .prop_map(|(x, v)| PhasePoint::new(x, v).unwrap())
    }

    proptest! {
        #[test]
        fn min_gamma_matches_grid_search(z in (1usize..4).prop_flat_map(point)) {
            let m = min_gamma(&z);
            let n = 20_000;
            let grid_min = (0..=n)
                .map(|i| norm(&gamma(&z, i as f64 / n as f64)))
                .fold(f64::INFINITY, f64::min);
            // convex in s: the grid minimum lies within one step of slope of the true one
            let step = norm(z.v()) / n as f64;
            prop_assert!(m.value <= grid_min + 1e-12);
            prop_assert!(grid_min <= m.value + step + 1e-9);
            prop_assert!((norm(&gamma(&z, m.s_star)) - m.value).abs() <= 1e-9 * (1.0 + m.value));
        }

        #[test]
        fn shear_is_a_group(x in -50.0f64..50.0, v in -50.0f64..50.0, t in -5.0f64..5.0, s in -5.0f64..5.0) {
            let z = PhasePoint::scalar(x, v);
            let back = shear(&shear(&z, t), -t);
            prop_assert!((back.x()[0] - x).abs() <= 1e-12 * (1.0 + x.abs() + (t * v).abs()));
            let two = shear(&shear(&z, t), s);
            let one = shear(&z, t + s);
            prop_assert!((two.x()[0] - one.x()[0]).abs() <= 1e-12 * (1.0 + x.abs() + ((t.abs() + s.abs()) * v).abs()));
        }

        #[test]
        fn unit_dilation_is_identity(x in -50.0f64..50.0, v in -50.0f64..50.0, alpha in 0.1f64..2.0) {
            let z = PhasePoint::scalar(x, v);
            prop_assert_eq!(dilate(&z, 1.0, alpha).unwrap(), z);
        }
    }
}
