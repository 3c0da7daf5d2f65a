use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::PhasePoint;
use crate::levy::{abs_power_integral, sphere_rule, CharacteristicExponent};
use crate::quadrature::{gauss_legendre, integrate_vec};
use crate::QuadOptions;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InversionMethod {
    /// Polar for even homogeneous exponents, panels otherwise.
    Auto,
    /// Radial integral in closed form along rays; needs an even homogeneous `φ`.
    Polar,
    /// Gauss–Legendre panels in polar frequency coordinates; any exponent.
    Panels,
}

#[derive(Clone, Debug)]
pub struct InversionOptions {
    pub method: InversionMethod,
    /// Relative tolerance of the adaptive angular integral.
    pub rel_tol: f64,
    /// Absolute tolerance in units of the density scale `t^{-2d/α-d}`.
    pub abs_tol: f64,
    /// Neglected frequency tail relative to the integral of `e^{-Re φ}`.
    pub tail_tol: f64,
    /// Panel multiplier for the panel route.
    pub refine: usize,
    /// Node budget of the panel route.
    pub max_nodes: usize,
    /// Gauss–Legendre nodes per layer of the sphere rule when `d >= 2`.
    pub sphere_nodes: usize,
}

impl Default for InversionOptions {
    fn default() -> Self {
        Self {
            method: InversionMethod::Auto,
            rel_tol: 1e-10,
            abs_tol: 1e-15,
            tail_tol: 1e-8,
            refine: 1,
            max_nodes: 40_000_000,
            sphere_nodes: 32,
        }
    }
}

impl InversionOptions {
    pub fn panels() -> Self {
        Self {
            method: InversionMethod::Panels,
            ..Self::default()
        }
    }

    pub fn polar() -> Self {
        Self {
            method: InversionMethod::Polar,
            ..Self::default()
        }
    }

    /// Same options with `factor` times as many panels.
    pub fn refined(mut self, factor: usize) -> Self {
        self.refine *= factor.max(1);
        self
    }
}

pub(crate) fn check_inputs<E: CharacteristicExponent + ?Sized>(e: &E, t: f64, z: &PhasePoint<f64>) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::domain("time must be positive"));
    }
    if z.dim() != e.dim() {
        return Err(Error::domain(format!(
            "point has dimension {} but the kernel has dimension {}",
            z.dim(),
            e.dim()
        )));
    }
    Ok(())
}

/// `∫₀^∞ ρ^m e^{-iρu} e^{-ρ^k} dρ`.
///
/// The ray is rotated to `ρ = r e^{-iγ}` (mirrored for `u < 0`), where both
/// factors decay; `k = 1` has the closed form `m!/(1+iu)^{m+1}`.
pub fn radial_transform(m: u32, k: f64, u: f64) -> Result<Complex64> {
    if !(k > 0.0 && k <= 2.0) {
        return Err(Error::domain("radial exponent must lie in (0,2]"));
    }
    if u < 0.0 {
        return radial_transform(m, k, -u).map(|c| c.conj());
    }
    let mf = m as f64;
    if u == 0.0 {
        return Ok(Complex64::new(statrs::function::gamma::gamma((mf + 1.0) / k) / k, 0.0));
    }
    if k == 1.0 {
        let fact: f64 = (1..=m).map(|i| i as f64).product();
        return Ok(fact / Complex64::new(1.0, u).powu(m + 1));
    }
    radial_contour(m, k, u)
}

fn radial_contour(m: u32, k: f64, u: f64) -> Result<Complex64> {
    let mf = m as f64;
    let gamma = (0.4 * PI / k).min(0.5 * PI);
    let (sg, cg) = gamma.sin_cos();
    let (skg, ckg) = (k * gamma).sin_cos();
    // the integrand is below e^{-60} of its scale beyond r_max
    let mut r_max = (60.0 / ckg.max(1e-300)).powf(1.0 / k);
    if u * sg > 0.0 {
        r_max = r_max.min((60.0 + mf * (1.0 + 60.0 / (u * sg)).ln()) / (u * sg));
    }
    let rot = Complex64::from_polar(1.0, -gamma * (mf + 1.0));
    let f = |r: f64| {
        if r <= 0.0 {
            return [0.0, 0.0];
        }
        let rk = r.powf(k);
        let ex = Complex64::new(-u * r * sg - rk * ckg, -u * r * cg + rk * skg);
        let v = ex.exp() * r.powi(m as i32);
        [v.re, v.im]
    };
    let est = integrate_vec(f, &[0.0, r_max], QuadOptions::new(1e-300, 2e-13).with_max_segments(400))
        .or_else(|_| integrate_vec(f, &[0.0, r_max], QuadOptions::new(1e-300, 1e-11).with_max_segments(4000)))?;
    Ok(rot * Complex64::new(est.value[0], est.value[1]))
}

fn neg_i_pow(j: u32) -> Complex64 {
    match j % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, -1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, 1.0),
    }
}

pub(crate) fn invert<E: CharacteristicExponent + ?Sized>(
    e: &E,
    t: f64,
    z: &PhasePoint<f64>,
    orders: &[(u32, u32)],
    opts: &InversionOptions,
) -> Result<Vec<f64>> {
    assert!(!orders.is_empty() && orders.len() <= 3, "one to three derivative orders");
    let polar_ok = e.homogeneity().is_some() && e.is_even();
    match opts.method {
        InversionMethod::Polar if !polar_ok => Err(Error::Unsupported(
            "polar inversion needs an even homogeneous exponent".into(),
        )),
        InversionMethod::Polar | InversionMethod::Auto if polar_ok => {
            if e.dim() == 1 {
                polar_line(e, t, z, orders, opts)
            } else {
                polar_sphere(e, t, z, orders, opts)
            }
        }
        _ => panels(e, t, z, orders, opts),
    }
}

/// Density scale `t^{-2d/k - d}` times the derivative scalings.
fn scale(d: usize, k: f64, t: f64, (jx, jv): (u32, u32)) -> f64 {
    let df = d as f64;
    t.powf(-2.0 * df / k - df - jx as f64 * (1.0 / k + 1.0) - jv as f64 / k)
}

/// `d = 1`: `p = 2(2π)^{-2} ∫₀^π Re[(-i)^j ω^j b^{-(2+j)/k} H_{1+j}(a b^{-1/k})] dθ`
/// with `a = ω·z`, `b = φ(ω)`.
fn polar_line<E: CharacteristicExponent + ?Sized>(
    e: &E,
    t: f64,
    z: &PhasePoint<f64>,
    orders: &[(u32, u32)],
    opts: &InversionOptions,
) -> Result<Vec<f64>> {
    let k = e.homogeneity().expect("homogeneous");
    let (x, v) = (z.x()[0], z.v()[0]);
    let mut points = vec![0.0, PI - t.atan(), PI];
    if x != 0.0 || v != 0.0 {
        let th = (-x).atan2(v).rem_euclid(PI);
        if th > 0.0 && th < PI {
            points.push(th);
        }
    }
    points.sort_by(f64::total_cmp);
    points.dedup();
    let mut failure: Option<Error> = None;
    let n = orders.len();
    let f = |th: f64| -> [f64; 3] {
        let (s, c) = th.sin_cos();
        let b = match e.kinetic(&[c], &[s], t) {
            Ok(p) => p.re,
            Err(err) => {
                failure.get_or_insert(err);
                return [0.0; 3];
            }
        };
        let a = x * c + v * s;
        let u = a * b.powf(-1.0 / k);
        let mut cache: [Option<Complex64>; 3] = [None; 3];
        let mut out = [0.0; 3];
        for (slot, &(jx, jv)) in out.iter_mut().zip(orders) {
            let j = jx + jv;
            let h = match cache[j as usize] {
                Some(h) => h,
                None => match radial_transform(1 + j, k, u) {
                    Ok(h) => {
                        cache[j as usize] = Some(h);
                        h
                    }
                    Err(err) => {
                        failure.get_or_insert(err);
                        return [0.0; 3];
                    }
                },
            };
            let w = c.powi(jx as i32) * s.powi(jv as i32) * b.powf(-(2.0 + j as f64) / k);
            *slot = (neg_i_pow(j) * h).re * w;
        }
        out
    };
    let abs_tol = orders
        .iter()
        .map(|&o| scale(1, k, t, o))
        .fold(f64::INFINITY, f64::min)
        * opts.abs_tol;
    let est = integrate_vec(
        f,
        &points,
        QuadOptions::new(abs_tol, opts.rel_tol).with_max_segments(4000),
    )?;
    if let Some(err) = failure {
        return Err(err);
    }
    let c = 2.0 / (4.0 * PI * PI);
    Ok(est.value[..n].iter().map(|v| c * v).collect())
}

/// `d >= 2`: the same ray formula over a fixed product rule on `S^{2d-1}`.
fn polar_sphere<E: CharacteristicExponent + ?Sized>(
    e: &E,
    t: f64,
    z: &PhasePoint<f64>,
    orders: &[(u32, u32)],
    opts: &InversionOptions,
) -> Result<Vec<f64>> {
    let k = e.homogeneity().expect("homogeneous");
    let d = e.dim();
    let dd = 2 * d;
    let zf = z.to_flat();
    let mut out = vec![0.0; orders.len()];
    for (w, wt) in sphere_rule(dd - 1, opts.sphere_nodes) {
        let (xi, eta) = w.split_at(d);
        let b = e.kinetic(xi, eta, t)?.re;
        let a: f64 = w.iter().zip(&zf).map(|(p, q)| p * q).sum();
        let u = a * b.powf(-1.0 / k);
        for (slot, &(jx, jv)) in out.iter_mut().zip(orders) {
            let j = jx + jv;
            let h = radial_transform(dd as u32 - 1 + j, k, u)?;
            let pw = xi[0].powi(jx as i32) * eta[0].powi(jv as i32) * b.powf(-((dd as u32 + j) as f64) / k);
            *slot += wt * (neg_i_pow(j) * h).re * pw;
        }
    }
    let c = (2.0 * PI).powi(-(dd as i32));
    Ok(out.into_iter().map(|v| c * v).collect())
}

/// Radius beyond which `e^{-Re φ}` and its moments are below `tail_tol`.
pub(crate) fn truncation_radius<E: CharacteristicExponent + ?Sized>(e: &E, t: f64, extra_power: u32, tail_tol: f64) -> Result<f64> {
    let d = e.dim();
    let k = e.homogeneity().unwrap_or_else(|| e.index());
    let b = sampled_decay(e, t)?;
    let p = (2 * d) as f64 + extra_power as f64;
    let mut l = (1.0 / tail_tol).ln();
    for _ in 0..20 {
        l = (1.0 / tail_tol).ln() + 2.0 + (p / k - 1.0).max(0.0) * l.max(1.0).ln();
    }
    Ok((l / b).powf(1.0 / k))
}

/// Half the smallest sampled value of a homogeneous lower bound for `Re φ` on the unit sphere.
pub(crate) fn sampled_decay<E: CharacteristicExponent + ?Sized>(e: &E, t: f64) -> Result<f64> {
    let d = e.dim();
    let dirs: Vec<Vec<f64>> = if d == 1 {
        (0..256)
            .map(|i| {
                let th = PI * (i as f64 + 0.5) / 256.0;
                vec![th.cos(), th.sin()]
            })
            .collect()
    } else {
        sphere_rule(2 * d - 1, 8).into_iter().map(|(w, _)| w).collect()
    };
    let homogeneous = e.homogeneity().is_some();
    let idx = e.index();
    let (gn, gw) = gauss_legendre::<f64>(32);
    let mut best = f64::INFINITY;
    for w in dirs {
        let (xi, eta) = w.split_at(d);
        let b = if homogeneous {
            e.kinetic(xi, eta, t)?.re
        } else if d == 1 {
            e.decay_constant() * abs_power_integral(xi[0], eta[0], t, idx)
        } else {
            let half = 0.5 * t;
            let s: f64 = gn
                .iter()
                .zip(&gw)
                .map(|(q, wq)| {
                    let s = half * (q + 1.0);
                    let n2: f64 = xi.iter().zip(eta).map(|(a, b)| (s * a + b).powi(2)).sum();
                    wq * n2.powf(0.5 * idx)
                })
                .sum();
            e.decay_constant() * half * s
        };
        best = best.min(b);
    }
    if !(best > 0.0 && best.is_finite()) {
        return Err(Error::Accuracy {
            what: "frequency decay estimate".into(),
            estimate: best,
            error: f64::NAN,
        });
    }
    Ok(0.5 * best)
}

/// Fixed Gauss–Legendre panels in polar frequency coordinates `w = ρω`.
fn panels<E: CharacteristicExponent + ?Sized>(
    e: &E,
    t: f64,
    z: &PhasePoint<f64>,
    orders: &[(u32, u32)],
    opts: &InversionOptions,
) -> Result<Vec<f64>> {
    let d = e.dim();
    let dd = 2 * d;
    let jmax = orders.iter().map(|(a, b)| a + b).max().unwrap_or(0);
    let r_max = truncation_radius(e, t, jmax, opts.tail_tol)?;
    let zf = z.to_flat();
    let zn = z.norm();
    let (gn, gw) = gauss_legendre::<f64>(16);

    // radial nodes: dyadic grading towards 0, uniform splitting against oscillation
    let mut rho_nodes: Vec<(f64, f64)> = Vec::new();
    let levels = 24;
    for l in (0..levels).rev() {
        let (lo, hi) = if l == levels - 1 {
            (0.0, r_max * 0.5f64.powi(l))
        } else {
            (r_max * 0.5f64.powi(l + 1), r_max * 0.5f64.powi(l))
        };
        let n = opts.refine * (1 + ((hi - lo) * zn / PI).ceil() as usize);
        push_panels(&mut rho_nodes, lo, hi, n, &gn, &gw);
    }

    let dirs: Vec<(Vec<f64>, f64)> = if d == 1 {
        let mut br = vec![0.0, 0.5 * PI, PI - t.atan(), PI, 1.5 * PI, 2.0 * PI - t.atan(), 2.0 * PI];
        br.sort_by(f64::total_cmp);
        let mut nodes = Vec::new();
        for win in br.windows(2) {
            let n = opts.refine * (2 + (r_max * zn * (win[1] - win[0]) / (2.0 * PI)).ceil() as usize);
            push_panels(&mut nodes, win[0], win[1], n, &gn, &gw);
        }
        nodes
            .into_iter()
            .map(|(th, w)| (vec![th.cos(), th.sin()], w))
            .collect()
    } else {
        sphere_rule(dd - 1, opts.sphere_nodes * opts.refine)
    };
    let total = dirs.len() * rho_nodes.len();
    if total > opts.max_nodes {
        return Err(Error::Accuracy {
            what: format!("panel inversion needs {total} nodes (budget {})", opts.max_nodes),
            estimate: f64::NAN,
            error: f64::INFINITY,
        });
    }
    let mut out = vec![0.0; orders.len()];
    let mut xi = vec![0.0; d];
    let mut eta = vec![0.0; d];
    for (w, wt) in &dirs {
        let a: f64 = w.iter().zip(&zf).map(|(p, q)| p * q).sum();
        let mut acc = vec![0.0; orders.len()];
        for &(rho, rw) in &rho_nodes {
            for i in 0..d {
                xi[i] = rho * w[i];
                eta[i] = rho * w[d + i];
            }
            let phi = e.kinetic(&xi, &eta, t)?;
            let base = (Complex64::new(-phi.re, -phi.im - rho * a)).exp() * rw * rho.powi(dd as i32 - 1);
            for (slot, &(jx, jv)) in acc.iter_mut().zip(orders) {
                let mut c = base;
                for _ in 0..jx {
                    c *= Complex64::new(0.0, -xi[0]);
                }
                for _ in 0..jv {
                    c *= Complex64::new(0.0, -eta[0]);
                }
                *slot += c.re;
            }
        }
        for (o, a) in out.iter_mut().zip(acc) {
            *o += wt * a;
        }
    }
    let c = (2.0 * PI).powi(-(dd as i32));
    Ok(out.into_iter().map(|v| c * v).collect())
}

fn push_panels(out: &mut Vec<(f64, f64)>, lo: f64, hi: f64, n: usize, gn: &[f64], gw: &[f64]) {
    let h = (hi - lo) / n as f64;
    for p in 0..n {
        let c = lo + (p as f64 + 0.5) * h;
        for (x, w) in gn.iter().zip(gw) {
            out.push((c + 0.5 * h * x, 0.5 * h * w));
        }
    }
}
