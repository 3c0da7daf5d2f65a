//! Stable-like Lévy measures `ν(dx) = κ(x)|x|^{-d-α} dx`, their characteristic
//! exponents, the kinetic exponent `φ(ξ, η) = ∫₀ᵗ ψ(sξ + η) ds`, the split of `ν`
//! at radius one and the unit-scale vector decomposition used in the lower bound.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use statrs::function::gamma::gamma;

use crate::bounds::sphere_area;
use crate::error::{Error, Result};
use crate::geometry::{dot, norm};
use crate::quadrature::{gauss_legendre, integrate};
use crate::QuadOptions;

/// Jump intensity `κ`, a bounded measurable function on `R^d`.
pub type KappaFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum KernelKind {
    Isotropic {
        kappa: f64,
    },
    General {
        kappa_fn: KappaFn,
        kappa0: f64,
        kappa1: f64,
        even_symmetric: bool,
        name: String,
    },
}

impl fmt::Debug for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelKind::Isotropic { kappa } => f.debug_struct("Isotropic").field("kappa", kappa).finish(),
            KernelKind::General {
                kappa0,
                kappa1,
                even_symmetric,
                name,
                ..
            } => f
                .debug_struct("General")
                .field("name", name)
                .field("kappa0", kappa0)
                .field("kappa1", kappa1)
                .field("even_symmetric", even_symmetric)
                .finish(),
        }
    }
}

/// A Lévy measure `κ(x)|x|^{-d-α} dx` with `κ₀ ≤ κ ≤ κ₁`.
#[derive(Clone, Debug)]
pub struct LevyKernel {
    d: usize,
    alpha: f64,
    kind: KernelKind,
    // c(d, α) = ∫(1 - cos(e·y))|y|^{-d-α} dy, cached at construction
    iso_const: f64,
}

/// Radii at which a general `κ` is checked at construction.
const CHECK_RADII: [f64; 9] = [1e-3, 0.05, 0.3, 0.9, 1.0, 1.7, 4.0, 25.0, 300.0];

impl LevyKernel {
    pub fn isotropic(d: usize, alpha: f64, kappa: f64) -> Result<Self> {
        check_shape(d, alpha)?;
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::domain("kappa must be positive and finite"));
        }
        Ok(Self {
            d,
            alpha,
            kind: KernelKind::Isotropic { kappa },
            iso_const: iso_constant(d, alpha),
        })
    }

    /// Kernel with a user supplied `κ`; bounds, the evenness claim and the
    /// spherical odd-moment condition are checked on a fixed deterministic sample.
    pub fn general(
        d: usize,
        alpha: f64,
        kappa_fn: KappaFn,
        kappa0: f64,
        kappa1: f64,
        even_symmetric: bool,
        name: impl Into<String>,
    ) -> Result<Self> {
        check_shape(d, alpha)?;
        if !(kappa0 > 0.0 && kappa0 <= kappa1 && kappa1.is_finite()) {
            return Err(Error::domain("need 0 < kappa0 <= kappa1 < inf"));
        }
        let k = Self {
            d,
            alpha,
            kind: KernelKind::General {
                kappa_fn,
                kappa0,
                kappa1,
                even_symmetric,
                name: name.into(),
            },
            iso_const: iso_constant(d, alpha),
        };
        k.validate()?;
        Ok(k)
    }

    /// Named built-ins: `constant`, `anisotropic-even`, `nonsymmetric` (needs `d >= 2`).
    pub fn builtin(name: &str, d: usize, alpha: f64) -> Result<Self> {
        match name {
            "constant" => Self::isotropic(d, alpha, 1.0),
            "anisotropic-even" => Self::general(
                d,
                alpha,
                Arc::new(|x: &[f64]| {
                    let r = norm(x);
                    let c = if r > 0.0 { x[0] / r } else { 0.0 };
                    1.0 + 0.5 * c * c + 0.25 / (1.0 + r * r)
                }),
                1.0,
                1.75,
                true,
                "anisotropic-even",
            ),
            "nonsymmetric" => {
                if d < 2 {
                    return Err(Error::domain(
                        "a non-even kappa with vanishing spherical first moments needs d >= 2",
                    ));
                }
                Self::general(
                    d,
                    alpha,
                    Arc::new(|x: &[f64]| {
                        let phi = x[1].atan2(x[0]);
                        1.0 + 0.5 * (3.0 * phi).cos()
                    }),
                    0.5,
                    1.5,
                    false,
                    "nonsymmetric",
                )
            }
            other => Err(Error::domain(format!("unknown kernel '{other}'"))),
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn kind(&self) -> &KernelKind {
        &self.kind
    }

    pub fn name(&self) -> &str {
        match &self.kind {
            KernelKind::Isotropic { .. } => "isotropic",
            KernelKind::General { name, .. } => name,
        }
    }

    /// `(κ₀, κ₁)`.
    pub fn kappa_bounds(&self) -> (f64, f64) {
        match &self.kind {
            KernelKind::Isotropic { kappa } => (*kappa, *kappa),
            KernelKind::General { kappa0, kappa1, .. } => (*kappa0, *kappa1),
        }
    }

    /// The constant `κ` of an isotropic kernel.
    pub fn isotropic_kappa(&self) -> Option<f64> {
        match &self.kind {
            KernelKind::Isotropic { kappa } => Some(*kappa),
            KernelKind::General { .. } => None,
        }
    }

    pub fn kappa(&self, x: &[f64]) -> f64 {
        match &self.kind {
            KernelKind::Isotropic { kappa } => *kappa,
            KernelKind::General { kappa_fn, .. } => kappa_fn(x),
        }
    }

    pub fn is_even(&self) -> bool {
        match &self.kind {
            KernelKind::Isotropic { .. } => true,
            KernelKind::General { even_symmetric, .. } => *even_symmetric,
        }
    }

    /// Same kernel with `κ` multiplied by `lambda`.
    pub fn scaled(&self, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::domain("scale factor must be positive"));
        }
        match &self.kind {
            KernelKind::Isotropic { kappa } => Self::isotropic(self.d, self.alpha, kappa * lambda),
            KernelKind::General {
                kappa_fn,
                kappa0,
                kappa1,
                even_symmetric,
                name,
            } => {
                let inner = kappa_fn.clone();
                Self::general(
                    self.d,
                    self.alpha,
                    Arc::new(move |x: &[f64]| lambda * inner(x)),
                    kappa0 * lambda,
                    kappa1 * lambda,
                    *even_symmetric,
                    format!("{lambda}*{name}"),
                )
            }
        }
    }

    /// `c(d, α)`, the exponent of the isotropic kernel with `κ ≡ 1` at `|ξ| = 1`.
    pub fn isotropic_constant(&self) -> f64 {
        self.iso_const
    }

    fn validate(&self) -> Result<()> {
        let (k0, k1) = self.kappa_bounds();
        let rule = sphere_rule(self.d - 1, 24);
        for &r in &CHECK_RADII {
            let mut moment = vec![0.0; self.d];
            let mut mass = 0.0;
            for (w, wt) in &rule {
                let x: Vec<f64> = w.iter().map(|c| r * c).collect();
                let k = self.kappa(&x);
                if !(k.is_finite() && k >= k0 * (1.0 - 1e-12) && k <= k1 * (1.0 + 1e-12)) {
                    return Err(Error::domain(format!(
                        "kappa({x:?}) = {k} violates the bounds [{k0}, {k1}]"
                    )));
                }
                if self.is_even() {
                    let neg: Vec<f64> = x.iter().map(|c| -c).collect();
                    let kn = self.kappa(&neg);
                    if (kn - k).abs() > 1e-12 * k {
                        return Err(Error::domain(format!(
                            "kappa declared even but kappa(-x) != kappa(x) at {x:?}"
                        )));
                    }
                }
                for (m, c) in moment.iter_mut().zip(w) {
                    *m += wt * c * k;
                }
                mass += wt * k;
            }
            if norm(&moment) > 1e-8 * mass {
                return Err(Error::domain(format!(
                    "spherical first moment of kappa does not vanish at radius {r}"
                )));
            }
        }
        Ok(())
    }

    /// Mass `ν({r0 < |x| <= r1})`; `r1` may be infinite.
    pub fn annulus_mass(&self, r0: f64, r1: f64) -> Result<f64> {
        if !(r0 > 0.0 && r1 >= r0) {
            return Err(Error::domain("annulus needs 0 < r0 <= r1"));
        }
        let a = self.alpha;
        let radial = |r: f64| if r.is_infinite() { 0.0 } else { r.powf(-a) };
        if let Some(kappa) = self.isotropic_kappa() {
            return Ok(kappa * sphere_area(self.d - 1) * (radial(r0) - radial(r1)) / a);
        }
        // r = r0 u^{-1/α} turns ∫ κ r^{-1-α} dr into r0^{-α}/α ∫ κ du
        let u1 = if r1.is_infinite() { 0.0 } else { (r0 / r1).powf(a) };
        let mut total = 0.0;
        for (w, wt) in sphere_rule(self.d - 1, 24) {
            let f = |u: f64| {
                let r = r0 * u.powf(-1.0 / a);
                let x: Vec<f64> = w.iter().map(|c| r * c).collect();
                self.kappa(&x)
            };
            let lo = if u1 > 0.0 { u1 } else { f64::MIN_POSITIVE };
            total += wt * integrate(f, lo, 1.0, QuadOptions::new(1e-15, 1e-12))?;
        }
        Ok(total * radial(r0) / a)
    }

    /// Draws a jump from `ν` restricted to `|x| > r0`, normalised.
    ///
    /// Radius by inverse CDF of `r^{-1-α}`, direction uniform, accepted with
    /// probability `κ(x)/κ₁`.
    pub fn sample_tail_jump<R: Rng + ?Sized>(&self, r0: f64, rng: &mut R) -> Vec<f64> {
        let (_, k1) = self.kappa_bounds();
        loop {
            let u: f64 = 1.0 - rng.random::<f64>();
            let r = r0 * u.powf(-1.0 / self.alpha);
            let dir = uniform_direction(self.d, rng);
            let x: Vec<f64> = dir.iter().map(|c| r * c).collect();
            if self.isotropic_kappa().is_some() || rng.random::<f64>() * k1 <= self.kappa(&x) {
                return x;
            }
        }
    }
}

fn check_shape(d: usize, alpha: f64) -> Result<()> {
    if d == 0 {
        return Err(Error::domain("dimension must be at least 1"));
    }
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(Error::domain("alpha must lie in (0,2)"));
    }
    Ok(())
}

/// `c(d, α) = ∫(1 - cos(e·y))|y|^{-d-α} dy = π^{d/2} Γ(1-α/2) / (2^{α-1} α Γ((d+α)/2))`.
pub fn iso_constant(d: usize, alpha: f64) -> f64 {
    let df = d as f64;
    PI.powf(df / 2.0) * gamma(1.0 - alpha / 2.0)
        / (2f64.powf(alpha - 1.0) * alpha * gamma((df + alpha) / 2.0))
}

/// `c₀ = ∫_{|y|≥1}|y|^{-d-α} dy`.
pub fn unit_tail_constant(d: usize, alpha: f64) -> f64 {
    sphere_area(d - 1) / alpha
}

/// Uniformly distributed unit vector in `R^d`.
pub fn uniform_direction<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    if d == 1 {
        return vec![if rng.random::<bool>() { 1.0 } else { -1.0 }];
    }
    loop {
        let g: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let n = norm(&g);
        if n > 1e-300 {
            return g.into_iter().map(|c| c / n).collect();
        }
    }
}

/// Product quadrature on the unit sphere `S^k ⊂ R^{k+1}` with weights summing
/// to its area: `{±1}` for `k = 0`, `n` equispaced angles for `k = 1`, and
/// polar Gauss–Legendre layers over `S^{k-1}` above that.
pub fn sphere_rule(k: usize, n: usize) -> Vec<(Vec<f64>, f64)> {
    match k {
        0 => vec![(vec![1.0], 1.0), (vec![-1.0], 1.0)],
        1 => (0..n)
            .map(|i| {
                let th = 2.0 * PI * i as f64 / n as f64;
                (vec![th.cos(), th.sin()], 2.0 * PI / n as f64)
            })
            .collect(),
        _ => {
            let (nodes, weights) = gauss_legendre::<f64>(n);
            let inner = sphere_rule(k - 1, n);
            let mut out = Vec::with_capacity(n * inner.len());
            for (x, w) in nodes.iter().zip(&weights) {
                let th = 0.5 * PI * (x + 1.0);
                let (s, c) = th.sin_cos();
                let wt = 0.5 * PI * w * s.powi(k as i32 - 1);
                for (p, pw) in &inner {
                    let mut pt = Vec::with_capacity(k + 1);
                    pt.push(c);
                    pt.extend(p.iter().map(|q| s * q));
                    out.push((pt, wt * pw));
                }
            }
            out
        }
    }
}

/// Anything with a characteristic exponent `ψ`, `E e^{iξ·L_t} = e^{-tψ(ξ)}`.
pub trait CharacteristicExponent: Send + Sync {
    fn dim(&self) -> usize;

    fn psi(&self, xi: &[f64]) -> Result<Complex64>;

    /// `k` with `ψ(λξ) = λ^k ψ(ξ)` exactly, if any.
    fn homogeneity(&self) -> Option<f64>;

    /// Scaling index: `α` for stable-like kernels, 2 for the Gaussian surrogate.
    fn index(&self) -> f64;

    fn is_even(&self) -> bool;

    /// Lower bound `c` in `Re ψ(ξ) >= c |ξ|^{index}` for `|ξ| >= 1`.
    fn decay_constant(&self) -> f64;

    /// `φ = ∫₀ᵗ ψ(sξ + η) ds`.
    fn kinetic(&self, xi: &[f64], eta: &[f64], t: f64) -> Result<Complex64> {
        kinetic_by_quadrature(self, xi, eta, t)
    }
}

/// Adaptive Gauss–Kronrod in `s` with a breakpoint where `|sξ + η|` is smallest.
pub(crate) fn kinetic_by_quadrature<E: CharacteristicExponent + ?Sized>(
    e: &E,
    xi: &[f64],
    eta: &[f64],
    t: f64,
) -> Result<Complex64> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::domain("time must be positive"));
    }
    if xi.len() != e.dim() || eta.len() != e.dim() {
        return Err(Error::domain("frequency dimension mismatch"));
    }
    let xx = dot(xi, xi);
    let mut points = vec![0.0, t];
    if xx > 0.0 {
        let s = -dot(xi, eta) / xx;
        if s > 0.0 && s < t {
            points.insert(1, s);
        }
    }
    let mut failure = None;
    let mut buf = vec![0.0; xi.len()];
    let est = crate::quadrature::integrate_vec(
        |s: f64| {
            for ((b, x), y) in buf.iter_mut().zip(xi).zip(eta) {
                *b = s * x + y;
            }
            match e.psi(&buf) {
                Ok(p) => [p.re, p.im],
                Err(err) => {
                    failure.get_or_insert(err);
                    [0.0, 0.0]
                }
            }
        },
        &points,
        QuadOptions::new(1e-300, 1e-11),
    )?;
    if let Some(err) = failure {
        return Err(err);
    }
    Ok(Complex64::new(est.value[0], est.value[1]))
}

impl CharacteristicExponent for LevyKernel {
    fn dim(&self) -> usize {
        self.d
    }

    fn psi(&self, xi: &[f64]) -> Result<Complex64> {
        char_exponent(self, xi)
    }

    fn homogeneity(&self) -> Option<f64> {
        self.isotropic_kappa().map(|_| self.alpha)
    }

    fn index(&self) -> f64 {
        self.alpha
    }

    fn is_even(&self) -> bool {
        LevyKernel::is_even(self)
    }

    fn decay_constant(&self) -> f64 {
        // κ ≥ κ₀ gives Re ψ ≥ κ₀ c(d, α)|ξ|^α
        self.kappa_bounds().0 * self.iso_const
    }

    fn kinetic(&self, xi: &[f64], eta: &[f64], t: f64) -> Result<Complex64> {
        kinetic_exponent(self, xi, eta, t)
    }
}

/// The exponent `ψ(ξ) = |ξ|²` of `√2` times Brownian motion.
#[derive(Clone, Copy, Debug)]
pub struct GaussianSurrogate {
    pub d: usize,
}

impl CharacteristicExponent for GaussianSurrogate {
    fn dim(&self) -> usize {
        self.d
    }

    fn psi(&self, xi: &[f64]) -> Result<Complex64> {
        Ok(Complex64::new(dot(xi, xi), 0.0))
    }

    fn homogeneity(&self) -> Option<f64> {
        Some(2.0)
    }

    fn index(&self) -> f64 {
        2.0
    }

    fn is_even(&self) -> bool {
        true
    }

    fn decay_constant(&self) -> f64 {
        1.0
    }

    fn kinetic(&self, xi: &[f64], eta: &[f64], t: f64) -> Result<Complex64> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::domain("time must be positive"));
        }
        let v = dot(xi, xi) * t.powi(3) / 3.0 + dot(xi, eta) * t * t + dot(eta, eta) * t;
        Ok(Complex64::new(v, 0.0))
    }
}

/// `ψ(ξ) = ∫(1 - e^{iξ·x} + iξ·x 1_{|x|≤1}) κ(x)|x|^{-d-α} dx`.
pub fn char_exponent(k: &LevyKernel, xi: &[f64]) -> Result<Complex64> {
    if xi.len() != k.d {
        return Err(Error::domain("frequency dimension mismatch"));
    }
    if xi.iter().any(|c| !c.is_finite()) {
        return Err(Error::domain("frequency must be finite"));
    }
    let r = norm(xi);
    if r == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    if let Some(kappa) = k.isotropic_kappa() {
        return Ok(Complex64::new(kappa * k.iso_const * r.powf(k.alpha), 0.0));
    }
    general_exponent(k, xi, r)
}

/// Spherical coordinates with pole `ξ/|ξ|`: `ω = cos θ ξ̂ + sin θ η`, `η` on the
/// unit sphere of `ξ^⊥`. The θ integral is adaptive with a breakpoint at `π/2`,
/// where `ξ·ω` changes sign.
fn general_exponent(k: &LevyKernel, xi: &[f64], r: f64) -> Result<Complex64> {
    let d = k.d;
    let pole: Vec<f64> = xi.iter().map(|c| c / r).collect();
    let even = k.is_even();
    let radial = |w: &[f64]| -> Result<(f64, f64)> {
        let a = r * dot(w, &pole);
        let g = |s: f64| {
            let x: Vec<f64> = w.iter().map(|c| s * c).collect();
            k.kappa(&x)
        };
        let re = radial_real(&g, a, k.alpha)?;
        let im = if even { 0.0 } else { radial_imag(&g, a, k.alpha)? };
        Ok((re, im))
    };
    if d == 1 {
        let (re_p, im_p) = radial(&pole)?;
        let neg = [-pole[0]];
        let (re_n, im_n) = radial(&neg)?;
        return Ok(Complex64::new(re_p + re_n, im_p + im_n));
    }
    let perp = orthonormal_complement(&pole);
    let inner = sphere_rule(d - 2, 12);
    let mut failure = None;
    let est = crate::quadrature::integrate_vec(
        |th: f64| {
            let (s, c) = th.sin_cos();
            let jac = s.powi(d as i32 - 2);
            let mut acc = [0.0, 0.0];
            for (eta, wt) in &inner {
                let mut w: Vec<f64> = pole.iter().map(|p| c * p).collect();
                for (b, e) in perp.iter().zip(eta) {
                    for (wi, bi) in w.iter_mut().zip(b) {
                        *wi += s * e * bi;
                    }
                }
                match radial(&w) {
                    Ok((re, im)) => {
                        acc[0] += wt * jac * re;
                        acc[1] += wt * jac * im;
                    }
                    Err(e) => {
                        failure.get_or_insert(e);
                    }
                }
            }
            acc
        },
        &[0.0, PI / 2.0, PI],
        // the imaginary part may vanish; measure it against the size of the real part
        QuadOptions::new(1e-10 * k.kappa_bounds().1 * k.iso_const * r.powf(k.alpha), 1e-8),
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(Complex64::new(est.value[0], est.value[1]))
}

fn orthonormal_complement(u: &[f64]) -> Vec<Vec<f64>> {
    let d = u.len();
    let mut basis: Vec<Vec<f64>> = vec![u.to_vec()];
    for i in 0..d {
        let mut e = vec![0.0; d];
        e[i] = 1.0;
        for b in &basis {
            let p = dot(&e, b);
            for (ei, bi) in e.iter_mut().zip(b) {
                *ei -= p * bi;
            }
        }
        let n = norm(&e);
        if n > 1e-8 {
            basis.push(e.into_iter().map(|c| c / n).collect());
        }
        if basis.len() == d {
            break;
        }
    }
    basis.remove(0);
    basis
}

const RADIAL_TOL: f64 = 1e-11;

/// `∫₀^∞ (1 - cos(a r)) g(r) r^{-1-α} dr`.
fn radial_real(g: &dyn Fn(f64) -> f64, a: f64, alpha: f64) -> Result<f64> {
    if a == 0.0 {
        return Ok(0.0);
    }
    let h = PI / a.abs();
    let opts = radial_opts(g, h, alpha);
    // 1 - cos computed as 2 sin² to avoid cancellation near r = 0
    let near = integrate(
        |r: f64| {
            let s = (0.5 * a * r).sin() / r;
            2.0 * s * s * g(r) * r.powf(1.0 - alpha)
        },
        0.0,
        h,
        opts,
    )?;
    let flat = power_tail(g, h, alpha)?;
    let osc = oscillatory_tail(&|r: f64| (a * r).cos() * g(r) * r.powf(-1.0 - alpha), h, h, opts.abs_tol)?;
    Ok(near + flat - osc)
}

/// `∫₀^∞ (a r 1_{r≤1} - sin(a r)) g(r) r^{-1-α} dr`.
fn radial_imag(g: &dyn Fn(f64) -> f64, a: f64, alpha: f64) -> Result<f64> {
    if a == 0.0 {
        return Ok(0.0);
    }
    let h = PI / a.abs();
    let opts = radial_opts(g, h, alpha);
    let split = h.min(1.0);
    let near = integrate(
        |r: f64| {
            let u = a * r;
            // (u - sin u)/r³, Taylor form for small u
            let c = if u.abs() < 1e-2 {
                a * a * a / 6.0 * (1.0 - u * u / 20.0 * (1.0 - u * u / 42.0))
            } else {
                (u - u.sin()) / (r * r * r)
            };
            c * g(r) * r.powf(2.0 - alpha)
        },
        0.0,
        split,
        opts,
    )?;
    let linear = if split < 1.0 {
        a * integrate(|r: f64| g(r) * r.powf(-alpha), split, 1.0, opts)?
    } else {
        0.0
    };
    let osc = oscillatory_tail(&|r: f64| (a * r).sin() * g(r) * r.powf(-1.0 - alpha), split, h, opts.abs_tol)?;
    Ok(near + linear - osc)
}

/// Absolute floor tied to the size `g(h) h^{-α}` of the whole radial integral.
fn radial_opts(g: &dyn Fn(f64) -> f64, h: f64, alpha: f64) -> QuadOptions {
    QuadOptions::new(1e-14 * g(h).abs() * h.powf(-alpha), RADIAL_TOL)
}

/// `∫_h^∞ g(r) r^{-1-α} dr` through `r = h u^{-1/α}`.
fn power_tail(g: &dyn Fn(f64) -> f64, h: f64, alpha: f64) -> Result<f64> {
    let v = integrate(
        |u: f64| g(h * u.powf(-1.0 / alpha)),
        f64::MIN_POSITIVE,
        1.0,
        QuadOptions::new(1e-300, RADIAL_TOL),
    )?;
    Ok(v * h.powf(-alpha) / alpha)
}

/// `∫_{r0}^∞ f` for an oscillating, slowly decaying `f`: partial sums over
/// half periods of length `h`, extrapolated by Wynn's ε algorithm.
fn oscillatory_tail(f: &dyn Fn(f64) -> f64, r0: f64, h: f64, abs_tol: f64) -> Result<f64> {
    let opts = QuadOptions::new(abs_tol, 1e-12);
    let mut partial = Vec::with_capacity(64);
    let mut sum = 0.0;
    let mut prev: Option<f64> = None;
    let start = (r0 / h).ceil() * h;
    if start > r0 {
        sum += integrate(f, r0, start, opts)?;
    }
    for k in 0..400 {
        let a = start + k as f64 * h;
        sum += integrate(f, a, a + h, opts)?;
        partial.push(sum);
        if partial.len() >= 8 && partial.len() % 4 == 0 {
            let lim = wynn_epsilon(&partial);
            if let Some(p) = prev {
                if (lim - p).abs() <= (1e-12 * lim.abs().max(partial[0].abs())).max(abs_tol) {
                    return Ok(lim);
                }
            }
            prev = Some(lim);
        }
    }
    Err(Error::Accuracy {
        what: "oscillatory radial tail".into(),
        estimate: sum,
        error: prev.map_or(f64::INFINITY, |p| (p - sum).abs()),
    })
}

/// Highest even column of the ε table built from the partial sums.
fn wynn_epsilon(s: &[f64]) -> f64 {
    let n = s.len();
    let mut prev = vec![0.0; n + 1];
    let mut cur: Vec<f64> = s.to_vec();
    let mut best = *s.last().expect("non-empty");
    let mut col = 0;
    while cur.len() > 1 {
        let mut next = Vec::with_capacity(cur.len() - 1);
        for i in 0..cur.len() - 1 {
            let diff = cur[i + 1] - cur[i];
            if diff == 0.0 {
                return cur[i + 1];
            }
            next.push(prev[i + 1] + 1.0 / diff);
        }
        prev = cur;
        cur = next;
        col += 1;
        if col % 2 == 0 {
            best = *cur.last().expect("non-empty");
        }
    }
    best
}

/// `φ(ξ, η) = ∫₀ᵗ ψ(sξ + η) ds`; closed form for isotropic kernels in `d = 1`.
pub fn kinetic_exponent(k: &LevyKernel, xi: &[f64], eta: &[f64], t: f64) -> Result<Complex64> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::domain("time must be positive"));
    }
    if k.d == 1 && xi.len() == 1 && eta.len() == 1 {
        if let Some(kappa) = k.isotropic_kappa() {
            let v = kappa * k.iso_const * abs_power_integral(xi[0], eta[0], t, k.alpha);
            return Ok(Complex64::new(v, 0.0));
        }
    }
    kinetic_by_quadrature(k, xi, eta, t)
}

/// `∫₀ᵗ |sξ + η|^α ds` in one dimension.
pub fn abs_power_integral(xi: f64, eta: f64, t: f64, alpha: f64) -> f64 {
    let end = t * xi + eta;
    if xi == 0.0 {
        return t * eta.abs().powf(alpha);
    }
    // no sign change and small relative slope: the antiderivative difference cancels
    if eta != 0.0 && (t * xi).abs() < 0.05 * eta.abs() {
        let (nodes, weights) = gl8();
        let half = 0.5 * t;
        return half
            * nodes
                .iter()
                .zip(weights.iter())
                .map(|(x, w)| w * ((half * (x + 1.0)) * xi + eta).abs().powf(alpha))
                .sum::<f64>();
    }
    let prim = |u: f64| u.signum() * u.abs().powf(alpha + 1.0);
    (prim(end) - prim(eta)) / (xi * (alpha + 1.0))
}

fn gl8() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: std::sync::OnceLock<(Vec<f64>, Vec<f64>)> = std::sync::OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(12))
}

/// `ν` split at radius one: `ν⁽⁰⁾ = 1_{|x|≤1}ν` and `ν⁽¹⁾ = 1_{|x|>1}ν` with
/// total mass `λ = ν⁽¹⁾(R^d)`.
#[derive(Clone, Debug)]
pub struct JumpSplit {
    pub kernel: LevyKernel,
    pub lambda: f64,
}

pub fn split_measure(k: &LevyKernel) -> Result<JumpSplit> {
    let lambda = k.annulus_mass(1.0, f64::INFINITY)?;
    Ok(JumpSplit {
        kernel: k.clone(),
        lambda,
    })
}

impl JumpSplit {
    /// `ν⁽⁰⁾({r0 < |x| <= r1})`.
    pub fn small_mass(&self, r0: f64, r1: f64) -> Result<f64> {
        if r0 >= 1.0 {
            return Ok(0.0);
        }
        self.kernel.annulus_mass(r0, r1.min(1.0))
    }

    /// `ν⁽¹⁾({r0 < |x| <= r1})`.
    pub fn large_mass(&self, r0: f64, r1: f64) -> Result<f64> {
        if r1 <= 1.0 {
            return Ok(0.0);
        }
        self.kernel.annulus_mass(r0.max(1.0), r1)
    }

    /// One draw from `μ = ν⁽¹⁾/λ`.
    pub fn sample_mu<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.kernel.sample_tail_jump(1.0, rng)
    }

    /// CDF of `μ` on the line for an isotropic kernel in `d = 1`.
    pub fn mu_cdf_1d(&self, y: f64) -> Option<f64> {
        if self.kernel.d != 1 || self.kernel.isotropic_kappa().is_none() {
            return None;
        }
        let a = self.kernel.alpha;
        Some(if y <= -1.0 {
            0.5 * (-y).powf(-a)
        } else if y < 1.0 {
            0.5
        } else {
            1.0 - 0.5 * y.powf(-a)
        })
    }
}

/// Writes `u` as a sum of `n` vectors of length in `[1/3, 1]`.
///
/// Every piece is a multiple of one unit direction (`u/|u|`, or `e₁` for `u = 0`),
/// so the recursion runs on signed lengths.
pub fn decompose_vector(u: &[f64], n: usize) -> Result<Vec<Vec<f64>>> {
    if n < 2 {
        return Err(Error::domain("decomposition needs n >= 2"));
    }
    if u.is_empty() || u.iter().any(|c| !c.is_finite()) {
        return Err(Error::domain("vector must be non-empty and finite"));
    }
    let len = norm(u);
    // a few ulps over n is rounding in |u|, not a domain violation
    if len > n as f64 * (1.0 + 8.0 * f64::EPSILON) {
        return Err(Error::domain(format!("|u| = {len} exceeds n = {n}")));
    }
    let dir: Vec<f64> = if len > 0.0 {
        u.iter().map(|c| c / len).collect()
    } else {
        let mut e = vec![0.0; u.len()];
        e[0] = 1.0;
        e
    };
    let mut lengths = Vec::with_capacity(n);
    let mut m = len.min(n as f64);
    for _ in 2..n {
        // peel off the unit vector along the current remainder
        let step = if m >= 0.0 { 1.0 } else { -1.0 };
        lengths.push(step);
        m -= step;
    }
    if m.abs() <= 2.0 / 3.0 {
        let sign = if m >= 0.0 { 1.0 } else { -1.0 };
        lengths.push(m + sign / 3.0);
        lengths.push(-sign / 3.0);
    } else {
        lengths.push(0.5 * m);
        lengths.push(0.5 * m);
    }
    lengths.reverse();
    Ok(lengths
        .into_iter()
        .map(|c| dir.iter().map(|e| c * e).collect())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use crate::quadrature::integrate_points;
    use rand_chacha::ChaCha8Rng;

    fn iso(d: usize, alpha: f64) -> LevyKernel {
        LevyKernel::isotropic(d, alpha, 1.0).unwrap()
    }

    /// `2∫₀^∞ (1 - cos u) u^{-1-α} du · ∫_{S^{d-1}} |ω₁|^α dσ`, both by quadrature.
    fn iso_constant_by_quadrature(d: usize, alpha: f64) -> f64 {
        let g = |_: f64| 1.0;
        let one_sided = radial_real(&g, 1.0, alpha).unwrap();
        let angular = if d == 1 {
            2.0
        } else {
            // ∫_{S^{d-1}} |ω₁|^α = σ_{d-2} ∫₀^π |cos θ|^α sin^{d-2} θ dθ
            let f = |th: f64| th.cos().abs().powf(alpha) * th.sin().powi(d as i32 - 2);
            sphere_area(d - 2)
                * integrate_points(f, &[0.0, PI / 2.0, PI], QuadOptions::new(1e-15, 1e-13))
                    .unwrap()
                    .value[0]
        };
        one_sided * angular
    }

    #[test]
    fn psi_at_zero_vanishes() {
        assert_eq!(char_exponent(&iso(2, 1.2), &[0.0, 0.0]).unwrap(), Complex64::new(0.0, 0.0));
        let g = LevyKernel::builtin("anisotropic-even", 1, 0.7).unwrap();
        assert_eq!(char_exponent(&g, &[0.0]).unwrap().norm(), 0.0);
    }

    #[test]
    fn cauchy_constant_is_pi() {
        let k = iso(1, 1.0);
        assert_relative_eq!(k.isotropic_constant(), PI, max_relative = 1e-14);
        assert_relative_eq!(char_exponent(&k, &[-2.5]).unwrap().re, 2.5 * PI, max_relative = 1e-14);
        assert_relative_eq!(iso_constant_by_quadrature(1, 1.0), PI, max_relative = 1e-9);
    }

    #[test]
    fn isotropic_constant_matches_quadrature() {
        for d in 1..=3 {
            for alpha in [0.3, 0.5, 1.0, 1.5, 1.9] {
                let q = iso_constant_by_quadrature(d, alpha);
                assert_relative_eq!(iso_constant(d, alpha), q, max_relative = 1e-8);
            }
        }
    }

    #[test]
    fn general_route_reproduces_isotropic_exponent() {
        // a constant κ supplied as a general function exercises the oscillatory quadrature
        for (d, alpha) in [(1, 0.5), (1, 1.0), (1, 1.7), (2, 1.3), (3, 0.8)] {
            let g = LevyKernel::general(d, alpha, Arc::new(|_: &[f64]| 1.0), 1.0, 1.0, false, "flat")
                .unwrap();
            let xi: Vec<f64> = (0..d).map(|i| 0.7 - 0.9 * i as f64).collect();
            let got = char_exponent(&g, &xi).unwrap();
            let want = iso_constant(d, alpha) * norm(&xi).powf(alpha);
            assert_relative_eq!(got.re, want, max_relative = 1e-7);
            assert!(got.im.abs() <= 1e-7 * want, "im = {}", got.im);
        }
    }

    #[test]
    fn even_kernels_have_real_exponent() {
        let g = LevyKernel::builtin("anisotropic-even", 2, 1.2).unwrap();
        let p = char_exponent(&g, &[0.4, -1.1]).unwrap();
        assert_eq!(p.im, 0.0);
        assert!(p.re > 0.0);
    }

    #[test]
    fn nonsymmetric_kernel_passes_validation() {
        let g = LevyKernel::builtin("nonsymmetric", 2, 1.4).unwrap();
        assert!(!g.is_even());
        let p = char_exponent(&g, &[1.0, 0.3]).unwrap();
        assert!(p.re > 0.0);
        assert!(LevyKernel::builtin("nonsymmetric", 1, 1.4).is_err());
    }

    #[test]
    fn validation_rejects_bad_kernels() {
        let odd = LevyKernel::general(2, 1.0, Arc::new(|x: &[f64]| 1.5 + 0.5 * x[0] / norm(x)), 1.0, 2.0, false, "drift");
        assert!(odd.is_err());
        let out_of_bounds = LevyKernel::general(1, 1.0, Arc::new(|_: &[f64]| 3.0), 1.0, 2.0, true, "big");
        assert!(out_of_bounds.is_err());
        assert!(LevyKernel::isotropic(1, 2.0, 1.0).is_err());
        assert!(LevyKernel::isotropic(1, 0.0, 1.0).is_err());
        assert!(LevyKernel::isotropic(1, 1.0, -1.0).is_err());
    }

    #[test]
    fn surrogate_kinetic_exponent_is_polynomial() {
        let g = GaussianSurrogate { d: 2 };
        let (xi, eta, t) = ([0.3, -1.2], [2.0, 0.5], 1.7);
        let want = dot(&xi, &xi) * t * t * t / 3.0 + dot(&xi, &eta) * t * t + dot(&eta, &eta) * t;
        assert_relative_eq!(g.kinetic(&xi, &eta, t).unwrap().re, want, max_relative = 1e-15);
        assert_relative_eq!(
            kinetic_by_quadrature(&g, &xi, &eta, t).unwrap().re,
            want,
            max_relative = 1e-11
        );
    }

    #[test]
    fn kinetic_exponent_homogeneity_at_zero_eta() {
        for (d, alpha) in [(1, 0.5), (1, 1.5), (2, 1.1)] {
            let k = iso(d, alpha);
            let xi: Vec<f64> = (0..d).map(|i| 1.3 - i as f64).collect();
            let eta = vec![0.0; d];
            let t: f64 = 2.3;
            let want = char_exponent(&k, &xi).unwrap().re * t.powf(alpha + 1.0) / (alpha + 1.0);
            assert_relative_eq!(kinetic_exponent(&k, &xi, &eta, t).unwrap().re, want, max_relative = 1e-10);
        }
    }

    #[test]
    fn kinetic_closed_form_matches_refined_quadrature() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for alpha in [0.5, 1.0, 1.5] {
            let k = iso(1, alpha);
            for _ in 0..50 {
                let xi = [rng.random_range(-20.0..20.0)];
                let eta = [rng.random_range(-20.0..20.0)];
                let t = rng.random_range(0.1..3.0);
                let closed = kinetic_exponent(&k, &xi, &eta, t).unwrap().re;
                // 10x finer composite Gauss–Legendre on each side of the kink
                let (n, w) = gauss_legendre::<f64>(40);
                let f = |s: f64| k.iso_const * (s * xi[0] + eta[0]).abs().powf(alpha);
                let s0 = (-eta[0] / xi[0]).clamp(0.0, t);
                let oracle = crate::quadrature::composite_gauss(f, 0.0, s0, &n, &w, 100)
                    + crate::quadrature::composite_gauss(f, s0, t, &n, &w, 100);
                assert_relative_eq!(closed, oracle, max_relative = 1e-8);
            }
        }
    }

    #[test]
    fn kinetic_small_slope_branch_is_continuous() {
        let alpha = 1.3;
        for eps in [1e-9, 1e-5, 0.049, 0.051, 0.2] {
            let (xi, eta, t) = (eps, 1.0, 1.0);
            let (n, w) = gauss_legendre::<f64>(30);
            let oracle = crate::quadrature::composite_gauss(|s| (s * xi + eta).abs().powf(alpha), 0.0, t, &n, &w, 4);
            assert_relative_eq!(abs_power_integral(xi, eta, t, alpha), oracle, max_relative = 1e-13);
        }
    }

    #[test]
    fn process_scaling_identity() {
        // λ ∫₀ᵗ ψ(sξ+η) ds = ∫₀^{λt} ψ(sξ/λ+η) ds, both sides by quadrature
        let k = LevyKernel::builtin("anisotropic-even", 1, 1.3).unwrap();
        let (xi, eta, t, lambda) = ([1.7], [-0.6], 0.8, 2.0);
        let lhs = lambda * kinetic_exponent(&k, &xi, &eta, t).unwrap();
        let rhs = kinetic_exponent(&k, &[xi[0] / lambda], &eta, lambda * t).unwrap();
        assert_relative_eq!(lhs.re, rhs.re, max_relative = 1e-8);
        let iso = iso(1, 0.7);
        let lhs = lambda * kinetic_by_quadrature(&iso, &xi, &eta, t).unwrap();
        let rhs = kinetic_by_quadrature(&iso, &[xi[0] / lambda], &eta, lambda * t).unwrap();
        assert_relative_eq!(lhs.re, rhs.re, max_relative = 1e-9);
    }

    #[test]
    fn split_mass_examples() {
        let k = iso(1, 1.0);
        let s = split_measure(&k).unwrap();
        assert_relative_eq!(s.lambda, 2.0, max_relative = 1e-15);
        for (d, alpha) in [(1, 0.5), (2, 1.5), (3, 1.0)] {
            let g = LevyKernel::builtin("anisotropic-even", d, alpha).unwrap();
            let s = split_measure(&g).unwrap();
            let c0 = unit_tail_constant(d, alpha);
            let (_, k1) = g.kappa_bounds();
            assert!(s.lambda >= c0 && s.lambda <= c0 * k1, "lambda {} c0 {}", s.lambda, c0);
            for (r0, r1) in [(0.1, 0.5), (0.5, 3.0), (0.9, 1.1), (2.0, 8.0)] {
                let total = g.annulus_mass(r0, r1).unwrap();
                let parts = s.small_mass(r0, r1).unwrap() + s.large_mass(r0, r1).unwrap();
                assert!((total - parts).abs() <= 1e-10 * total.max(1.0), "{total} vs {parts}");
            }
        }
    }

    #[test]
    fn annulus_mass_general_matches_isotropic() {
        let g = LevyKernel::general(2, 1.2, Arc::new(|_: &[f64]| 1.0), 1.0, 1.0, true, "flat").unwrap();
        let k = iso(2, 1.2);
        assert_relative_eq!(
            g.annulus_mass(0.3, 7.0).unwrap(),
            k.annulus_mass(0.3, 7.0).unwrap(),
            max_relative = 1e-11
        );
    }

    #[test]
    fn mu_sampler_matches_cdf() {
        let s = split_measure(&iso(1, 1.0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 200_000;
        let draws: Vec<f64> = (0..n).map(|_| s.sample_mu(&mut rng)[0]).collect();
        for y in [-5.0, -1.5, 0.0, 2.0, 10.0] {
            let emp = draws.iter().filter(|&&v| v <= y).count() as f64 / n as f64;
            let p = s.mu_cdf_1d(y).unwrap();
            let sd = (p * (1.0 - p) / n as f64).sqrt();
            assert!((emp - p).abs() <= 5.0 * sd + 1e-12, "y={y}: {emp} vs {p}");
        }
        assert!(draws.iter().all(|y| y.abs() > 1.0));
    }

    #[test]
    fn sphere_rule_weights_sum_to_area() {
        for k in 0..4 {
            let total: f64 = sphere_rule(k, 10).iter().map(|(_, w)| w).sum();
            assert_relative_eq!(total, sphere_area(k), max_relative = 1e-12);
        }
    }

    #[test]
    fn real_part_lower_bound_on_random_frequencies() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for (d, name) in [(1, "constant"), (1, "anisotropic-even"), (2, "anisotropic-even")] {
            let alpha = 1.1;
            let k = LevyKernel::builtin(name, d, alpha).unwrap();
            for _ in 0..4 {
                let xi: Vec<f64> = (0..d).map(|_| rng.random_range(-6.0..6.0)).collect();
                let r = norm(&xi);
                // ∫_{|x|≤1} (1 - cos(ξ·x))|x|^{-d-α} dx, polar with pole ξ/|ξ|
                let radial = |c: f64| {
                    integrate(
                        |s: f64| {
                            let q = (0.5 * r * c * s).sin();
                            2.0 * q * q * s.powf(-1.0 - alpha)
                        },
                        0.0,
                        1.0,
                        QuadOptions::new(1e-300, 1e-12),
                    )
                    .unwrap()
                };
                let lower = if d == 1 {
                    2.0 * radial(1.0)
                } else {
                    integrate(|th: f64| 2.0 * radial(th.cos()), 0.0, PI, QuadOptions::new(1e-300, 1e-10))
                        .unwrap()
                };
                let re = char_exponent(&k, &xi).unwrap().re;
                assert!(re >= lower * (1.0 - 1e-9), "{name} d={d}: {re} < {lower}");
            }
        }
    }

    #[test]
    fn decompose_examples() {
        let parts = decompose_vector(&[0.0, 0.0], 2).unwrap();
        assert_eq!(parts, vec![vec![-1.0 / 3.0, 0.0], vec![1.0 / 3.0, 0.0]]);
        let u = [0.6, 0.8];
        let parts = decompose_vector(&u, 2).unwrap();
        for p in &parts {
            assert_relative_eq!(p[0], 0.3, max_relative = 1e-15);
            assert_relative_eq!(p[1], 0.4, max_relative = 1e-15);
        }
        assert!(decompose_vector(&[3.5], 3).is_err());
        assert!(decompose_vector(&[0.5], 1).is_err());
    }

    fn decomposition_holds(u: &[f64], n: usize) -> bool {
        let parts = decompose_vector(u, n).unwrap();
        let mut sum = vec![0.0; u.len()];
        for p in &parts {
            let l = norm(p);
            // floating-point slack of a few ulps around the closed interval
            if !(l >= (1.0 / 3.0) * (1.0 - 1e-15) && l <= 1.0 + 1e-15) {
                return false;
            }
            for (s, c) in sum.iter_mut().zip(p) {
                *s += c;
            }
        }
        parts.len() == n && sum.iter().zip(u).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() <= 1e-12
    }

    proptest! {
        #[test]
        fn isotropic_homogeneity(scale in 0.01f64..100.0, x in -10.0f64..10.0, y in -10.0f64..10.0, alpha in 0.1f64..1.99) {
            let k = iso(2, alpha);
            let a = char_exponent(&k, &[scale * x, scale * y]).unwrap().re;
            let b = scale.powf(alpha) * char_exponent(&k, &[x, y]).unwrap().re;
            prop_assert!((a - b).abs() <= 1e-10 * b.abs().max(1e-300));
        }

        #[test]
        fn decomposition_property(
            n in 2usize..=20,
            dir in proptest::collection::vec(-1.0f64..1.0, 1..4),
            frac in 0.0f64..=1.0,
        ) {
            let l = norm(&dir);
            let u: Vec<f64> = if l > 1e-9 {
                dir.iter().map(|c| c / l * frac * n as f64).collect()
            } else {
                vec![0.0; dir.len()]
            };
            prop_assert!(decomposition_holds(&u, n));
        }
    }
}
