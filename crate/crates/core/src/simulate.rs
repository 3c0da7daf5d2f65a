//! Samplers for the kinetic pair `(X_t, V_t) = (∫₀ᵗ L_s ds, L_t)`, the
//! large-jump cube series and empirical density estimation.

use std::f64::consts::PI;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson, StandardNormal};
use rayon::prelude::*;
use statrs::distribution::{Beta, ContinuousCDF};
use statrs::function::gamma::ln_gamma;

use crate::bounds::sphere_area;
use crate::error::{Error, Result};
use crate::geometry::{norm, PhasePoint};
use crate::levy::{split_measure, uniform_direction, JumpSplit, LevyKernel};
use crate::quadrature::{gauss_legendre, integrate_points, QuadOptions};

/// Treatment of jumps with `|y| <= ε`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum SmallJumpScheme {
    /// Drop them.
    Truncate,
    /// Replace them by a Brownian pair with the same covariance.
    GaussianCompensate,
    /// Simulate jumps in `(ε/m, ε]` and integrate them on an `m`-cell time mesh.
    EulerMesh(usize),
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SimConfig {
    pub seed: u64,
    pub n_paths: usize,
    pub t: f64,
    pub epsilon: f64,
    pub scheme: SmallJumpScheme,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_paths: 1,
            t: 1.0,
            epsilon: 0.01,
            scheme: SmallJumpScheme::GaussianCompensate,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t > 0.0 && self.t.is_finite()) {
            return Err(Error::config("t must be positive"));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::config("small-jump cutoff must lie in (0,1]"));
        }
        if let SmallJumpScheme::EulerMesh(m) = self.scheme {
            if m == 0 {
                return Err(Error::config("euler mesh needs m >= 1"));
            }
        }
        Ok(())
    }
}

/// One simulated path on `[0, t]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PathSample {
    pub t: f64,
    /// Times of the simulated jumps, increasing.
    pub jump_times: Vec<f64>,
    pub jump_sizes: Vec<Vec<f64>>,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    /// Approximate contribution of the sub-cutoff jumps to `(X, V)`.
    pub small_x: Vec<f64>,
    pub small_v: Vec<f64>,
}

impl PathSample {
    pub fn endpoint(&self) -> PhasePoint<f64> {
        PhasePoint::new(self.x.clone(), self.v.clone()).expect("matching dimensions")
    }

    /// `L_s` of the simulated jump part (right-continuous).
    pub fn jump_part_at(&self, s: f64) -> Vec<f64> {
        let mut l = vec![0.0; self.v.len()];
        for (tau, y) in self.jump_times.iter().zip(&self.jump_sizes) {
            if *tau > s {
                break;
            }
            for (a, b) in l.iter_mut().zip(y) {
                *a += b;
            }
        }
        l
    }
}

/// Cube `Q_r(z) = {|x' - x| <= r, |v' - v| <= r}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Cube {
    pub center: PhasePoint<f64>,
    pub r: f64,
}

impl Cube {
    pub fn new(center: PhasePoint<f64>, r: f64) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::domain("cube radius must be positive"));
        }
        Ok(Self { center, r })
    }

    pub fn contains(&self, x: &[f64], v: &[f64]) -> bool {
        dist(x, self.center.x()) <= self.r && dist(v, self.center.v()) <= self.r
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
}

/// Generator for path `index` of the stream `seed`.
pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// One increment of an isotropic kernel's process over time `dt`.
///
/// Exact for isotropic `κ`: Chambers–Mallows–Stuck in `d = 1`, a Gaussian
/// vector scaled by a positive `α/2`-stable variable (Kanter) above that.
/// Other even kernels fall back to a compound Poisson sum with Gaussian
/// compensation below `|y| = 0.01`.
pub fn sample_stable_increment<R: Rng + ?Sized>(k: &LevyKernel, dt: f64, rng: &mut R) -> Result<Vec<f64>> {
    if !k.is_even() {
        return Err(Error::Unsupported("increment sampling needs an even kernel".into()));
    }
    if !(dt > 0.0) {
        return Err(Error::domain("dt must be positive"));
    }
    let Some(kappa) = k.isotropic_kappa() else {
        let cfg = SimConfig {
            t: dt,
            ..SimConfig::default()
        };
        let s = KineticSampler::new(k, &cfg)?;
        return Ok(s.sample_path(rng).v);
    };
    let a = k.alpha();
    let scale = (k.isotropic_constant() * kappa * dt).powf(1.0 / a);
    if k.d() == 1 {
        return Ok(vec![scale * symmetric_stable(a, rng)]);
    }
    let beta = a / 2.0;
    let u: f64 = rng.random::<f64>() * PI;
    let w: f64 = rng.sample(Exp1);
    let sub = (beta * u).sin() / u.sin().powf(1.0 / beta) * (((1.0 - beta) * u).sin() / w).powf((1.0 - beta) / beta);
    let g = (2.0 * sub).sqrt() * scale;
    Ok((0..k.d()).map(|_| g * rng.sample::<f64, _>(StandardNormal)).collect())
}

/// Standard symmetric stable variable with `E e^{iξS} = e^{-|ξ|^α}`.
fn symmetric_stable<R: Rng + ?Sized>(a: f64, rng: &mut R) -> f64 {
    let u = (rng.random::<f64>() - 0.5) * PI;
    let w: f64 = rng.sample(Exp1);
    if (a - 1.0).abs() < 1e-12 {
        return u.tan();
    }
    (a * u).sin() / u.cos().powf(1.0 / a) * (((1.0 - a) * u).cos() / w).powf((1.0 - a) / a)
}

/// Prepared sampler for `(X_t, V_t)` under one kernel and configuration.
///
/// Jumps with `lo < |y| <= hi` are drawn as a compound Poisson process with
/// the dominating rate `κ₁·|S^{d-1}|(lo^{-α} - hi^{-α})/α` and thinned by `κ(y)/κ₁`.
#[derive(Clone, Debug)]
pub struct KineticSampler {
    kernel: LevyKernel,
    cfg: SimConfig,
    // (lo^{-α}, hi^{-α}) for the jump radius range
    radial_pow: (f64, f64),
    rate: f64,
    kappa1: f64,
    // Cholesky factor of the sub-cutoff covariance per unit time
    chol: Vec<f64>,
    mesh: Option<(usize, f64)>,
}

impl KineticSampler {
    pub fn new(k: &LevyKernel, cfg: &SimConfig) -> Result<Self> {
        Self::with_range(k, cfg, f64::INFINITY)
    }

    /// Sampler for the part with jumps `|y| <= 1` only.
    pub fn small_part(k: &LevyKernel, cfg: &SimConfig) -> Result<Self> {
        Self::with_range(k, cfg, 1.0)
    }

    fn with_range(k: &LevyKernel, cfg: &SimConfig, hi: f64) -> Result<Self> {
        cfg.validate()?;
        let eps = cfg.epsilon;
        let (lo, mesh) = match cfg.scheme {
            SmallJumpScheme::EulerMesh(m) => (eps / m as f64, Some((m, eps))),
            _ => (eps, None),
        };
        let a = k.alpha();
        let d = k.d();
        let (_, kappa1) = k.kappa_bounds();
        let hi_pow = if hi.is_infinite() { 0.0 } else { hi.powf(-a) };
        let rate = (kappa1 * sphere_area(d - 1) * (lo.powf(-a) - hi_pow) / a).max(0.0);
        let chol = match cfg.scheme {
            SmallJumpScheme::GaussianCompensate => cholesky(&small_covariance(k, eps), d)?,
            _ => vec![0.0; d * d],
        };
        Ok(Self {
            kernel: k.clone(),
            cfg: cfg.clone(),
            radial_pow: (lo.powf(-a), hi_pow),
            rate,
            kappa1,
            chol,
            mesh,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    /// Expected number of proposed jumps per path.
    pub fn proposal_rate(&self) -> f64 {
        self.rate * self.cfg.t
    }

    /// Writes a jump into `y`; `false` when the proposal is thinned away.
    fn draw_jump<R: Rng + ?Sized>(&self, rng: &mut R, y: &mut [f64]) -> bool {
        let (lo, hi) = self.radial_pow;
        let u: f64 = rng.random();
        let r = (lo - u * (lo - hi)).powf(-1.0 / self.kernel.alpha());
        if y.len() == 1 {
            y[0] = if rng.random::<bool>() { r } else { -r };
        } else {
            let dir = uniform_direction(y.len(), rng);
            for (c, w) in y.iter_mut().zip(dir) {
                *c = r * w;
            }
        }
        self.kernel.isotropic_kappa().is_some() || rng.random::<f64>() * self.kappa1 <= self.kernel.kappa(y)
    }

    // weight of a jump at time tau in X_t
    fn weight(&self, tau: f64, y: &[f64]) -> (f64, bool) {
        let t = self.cfg.t;
        match self.mesh {
            Some((m, eps)) if norm(y) <= eps => {
                let h = t / m as f64;
                (t - ((tau / h).ceil() * h).min(t), true)
            }
            _ => (t - tau, false),
        }
    }

    /// Full path with the given generator.
    pub fn sample_path<R: Rng + ?Sized>(&self, rng: &mut R) -> PathSample {
        let d = self.kernel.d();
        let t = self.cfg.t;
        let n = self.jump_count(rng);
        let mut times: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * t).collect();
        times.sort_by(f64::total_cmp);
        let (mut x, mut v) = (vec![0.0; d], vec![0.0; d]);
        let (mut sx, mut sv) = (vec![0.0; d], vec![0.0; d]);
        let mut jump_times = Vec::new();
        let mut jump_sizes = Vec::new();
        let mut y = vec![0.0; d];
        for tau in times {
            if !self.draw_jump(rng, &mut y) {
                continue;
            }
            let (weight, small) = self.weight(tau, &y);
            let (tx, tv) = if small { (&mut sx, &mut sv) } else { (&mut x, &mut v) };
            for i in 0..d {
                tx[i] += y[i] * weight;
                tv[i] += y[i];
            }
            if !small {
                jump_times.push(tau);
                jump_sizes.push(y.clone());
            }
        }
        self.gaussian_part(rng, &mut sx, &mut sv);
        for i in 0..d {
            x[i] += sx[i];
            v[i] += sv[i];
        }
        PathSample {
            t,
            jump_times,
            jump_sizes,
            x,
            v,
            small_x: sx,
            small_v: sv,
        }
    }

    /// Endpoint `[x..., v...]` of one path, without storing the jumps.
    pub fn sample_endpoint<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let d = self.kernel.d();
        let t = self.cfg.t;
        out.iter_mut().for_each(|c| *c = 0.0);
        let n = self.jump_count(rng);
        let mut y = vec![0.0; d];
        for _ in 0..n {
            let tau = rng.random::<f64>() * t;
            if !self.draw_jump(rng, &mut y) {
                continue;
            }
            let (weight, _) = self.weight(tau, &y);
            for i in 0..d {
                out[i] += y[i] * weight;
                out[d + i] += y[i];
            }
        }
        let (mut sx, mut sv) = (vec![0.0; d], vec![0.0; d]);
        self.gaussian_part(rng, &mut sx, &mut sv);
        for i in 0..d {
            out[i] += sx[i];
            out[d + i] += sv[i];
        }
    }

    /// Endpoints of paths `0..n` of the configured seed, flattened row-wise.
    /// Path `i` always uses stream `i`, so the output does not depend on the
    /// number of worker threads.
    pub fn endpoints(&self, n: usize) -> Vec<f64> {
        self.endpoints_range(0, n)
    }

    /// Endpoints of paths `start..start + n`.
    pub fn endpoints_range(&self, start: usize, n: usize) -> Vec<f64> {
        let w = 2 * self.kernel.d();
        let mut out = vec![0.0; n * w];
        out.par_chunks_mut(w).enumerate().for_each(|(i, row)| {
            let mut rng = path_rng(self.cfg.seed, (start + i) as u64);
            self.sample_endpoint(&mut rng, row);
        });
        out
    }

    fn jump_count<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let mean = self.rate * self.cfg.t;
        if mean <= 0.0 {
            return 0;
        }
        Poisson::new(mean).expect("positive mean").sample(rng) as usize
    }

    // Brownian pair (∫₀ᵗ W ds, W_t) with covariance A·[[t³/3, t²/2], [t²/2, t]]
    fn gaussian_part<R: Rng + ?Sized>(&self, rng: &mut R, sx: &mut [f64], sv: &mut [f64]) {
        if self.cfg.scheme != SmallJumpScheme::GaussianCompensate {
            return;
        }
        let d = self.kernel.d();
        let t = self.cfg.t;
        let g1: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let g2: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        for i in 0..d {
            let (mut w, mut iw) = (0.0, 0.0);
            for j in 0..=i {
                let l = self.chol[i * d + j];
                w += l * g1[j];
                iw += l * (0.5 * g1[j] + g2[j] / (2.0 * 3f64.sqrt()));
            }
            sv[i] += t.sqrt() * w;
            sx[i] += t.powf(1.5) * iw;
        }
    }
}

/// `∫_{|y| <= ε} y yᵀ ν(dy)`, row-major.
pub fn small_covariance(k: &LevyKernel, eps: f64) -> Vec<f64> {
    let d = k.d();
    let a = k.alpha();
    let radial = eps.powf(2.0 - a) / (2.0 - a);
    let mut cov = vec![0.0; d * d];
    if let Some(kappa) = k.isotropic_kappa() {
        let s = kappa * sphere_area(d - 1) / d as f64 * radial;
        for i in 0..d {
            cov[i * d + i] = s;
        }
        return cov;
    }
    // r = ε u^{1/(2-α)} flattens r^{1-α} dr
    let (nodes, weights) = gauss_legendre::<f64>(32);
    for (w, wt) in crate::levy::sphere_rule(d - 1, 24) {
        let mut shell = 0.0;
        for (u, uw) in nodes.iter().zip(&weights) {
            let r = eps * (0.5 * (u + 1.0)).powf(1.0 / (2.0 - a));
            let y: Vec<f64> = w.iter().map(|c| r * c).collect();
            shell += 0.5 * uw * k.kappa(&y);
        }
        for i in 0..d {
            for j in 0..d {
                cov[i * d + j] += wt * w[i] * w[j] * shell * radial;
            }
        }
    }
    cov
}

fn cholesky(a: &[f64], d: usize) -> Result<Vec<f64>> {
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i * d + k] * l[j * d + k]).sum();
            if i == j {
                let diag = a[i * d + i] - s;
                if diag < 0.0 {
                    return Err(Error::domain("small-jump covariance is not positive definite"));
                }
                l[i * d + i] = diag.sqrt();
            } else {
                l[i * d + j] = (a[i * d + j] - s) / l[j * d + j];
            }
        }
    }
    Ok(l)
}

/// One path of the kinetic pair.
pub fn sample_kinetic_path<R: Rng + ?Sized>(k: &LevyKernel, cfg: &SimConfig, rng: &mut R) -> Result<PathSample> {
    Ok(KineticSampler::new(k, cfg)?.sample_path(rng))
}

/// Writes `path_id, x..., v...` rows under a header carrying the seed.
pub fn write_samples_csv<W: Write>(mut w: W, cfg: &SimConfig, d: usize, endpoints: &[f64]) -> Result<()> {
    writeln!(
        w,
        "# seed={} n_paths={} t={} epsilon={} scheme={:?}",
        cfg.seed,
        endpoints.len() / (2 * d),
        cfg.t,
        cfg.epsilon,
        cfg.scheme
    )?;
    let names: Vec<String> = (1..=d)
        .map(|i| format!("x{i}"))
        .chain((1..=d).map(|i| format!("v{i}")))
        .collect();
    writeln!(w, "path_id,{}", names.join(","))?;
    for (i, row) in endpoints.chunks(2 * d).enumerate() {
        let cols: Vec<String> = row.iter().map(|c| format!("{c:e}")).collect();
        writeln!(w, "{i},{}", cols.join(","))?;
    }
    Ok(())
}

/// Series estimate of `P(Z⁽¹⁾_1 ∈ Q_r(z))` for the compound Poisson part
/// with jumps `|y| > 1`.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CubeEstimate {
    pub estimate: f64,
    pub stderr: f64,
    /// `P(N > n_max)` for `N ~ Poisson(λ)`.
    pub truncation_bound: f64,
    /// Per-term `(I_n, stderr)` for `n = 1..=n_max`.
    pub terms: Vec<(f64, f64)>,
}

/// Estimates `Σ_{n<=n_max} I_n(z)` term by term, with independent streams per
/// term.
///
/// `I_n = λⁿe^{-λ}/n! · E[1{Σ y_j s_j ∈ x + B_r} 1{Σ y_j ∈ v + B_r}]` with
/// `s_j` uniform and `y_j ~ μ`. For isotropic kernels in `d = 1` part of the
/// expectation is taken exactly, conditional on the remaining draws: over
/// `(s₁, y₁)` for `n = 1`, over `(y₁, y₂)` for `n >= 2`.
pub fn large_jump_cube_probability(
    k: &LevyKernel,
    cube: &Cube,
    n_max: usize,
    m_per_term: usize,
    seed: u64,
) -> Result<CubeEstimate> {
    if cube.center.dim() != k.d() {
        return Err(Error::domain("cube dimension does not match the kernel"));
    }
    if n_max == 0 || m_per_term == 0 {
        return Err(Error::domain("need n_max >= 1 and m_per_term >= 1"));
    }
    let split = split_measure(k)?;
    let lambda = split.lambda;
    let poisson = |n: usize| (n as f64 * lambda.ln() - lambda - ln_gamma(n as f64 + 1.0)).exp();
    let conditional = split.mu_cdf_1d(0.0).is_some();
    let terms: Vec<Result<(f64, f64)>> = (1..=n_max)
        .into_par_iter()
        .map(|n| {
            let mut rng = path_rng(seed, n as u64);
            let m = if conditional && n == 1 { 1 } else { m_per_term };
            let mut stats = Welford::default();
            for _ in 0..m {
                let g = if conditional && n >= 2 {
                    conditional_pair_draw(&split, cube, n, &mut rng)?
                } else if conditional {
                    conditional_draw(&split, cube, n, &mut rng)?
                } else {
                    indicator_draw(&split, cube, n, &mut rng)
                };
                stats.push(g);
            }
            let w = poisson(n);
            Ok((w * stats.mean, w * stats.stderr()))
        })
        .collect();
    let terms = terms.into_iter().collect::<Result<Vec<_>>>()?;
    let estimate = terms.iter().map(|t| t.0).sum();
    let stderr = terms.iter().map(|t| t.1 * t.1).sum::<f64>().sqrt();
    let mut truncation_bound = 0.0;
    for n in n_max + 1..n_max + 400 {
        let p = poisson(n);
        truncation_bound += p;
        if p < 1e-18 * truncation_bound.max(1e-300) {
            break;
        }
    }
    Ok(CubeEstimate {
        estimate,
        stderr,
        truncation_bound,
        terms,
    })
}

fn indicator_draw<R: Rng + ?Sized>(split: &JumpSplit, cube: &Cube, n: usize, rng: &mut R) -> f64 {
    let d = cube.center.dim();
    let (mut xs, mut vs) = (vec![0.0; d], vec![0.0; d]);
    for _ in 0..n {
        let s: f64 = rng.random();
        let y = split.sample_mu(rng);
        for i in 0..d {
            xs[i] += y[i] * s;
            vs[i] += y[i];
        }
    }
    if cube.contains(&xs, &vs) {
        1.0
    } else {
        0.0
    }
}

// E over (s₁, y₁) given the rest: ∫₀¹ μ({y: |ys + R - x| <= r, |y + S - v| <= r}) ds
fn conditional_draw<R: Rng + ?Sized>(split: &JumpSplit, cube: &Cube, n: usize, rng: &mut R) -> Result<f64> {
    let (mut rs, mut ss) = (0.0, 0.0);
    for _ in 1..n {
        let s: f64 = rng.random();
        let y = split.sample_mu(rng)[0];
        rs += y * s;
        ss += y;
    }
    let x = cube.center.x()[0] - rs;
    let v = cube.center.v()[0] - ss;
    let r = cube.r;
    let cdf = |y: f64| split.mu_cdf_1d(y).expect("isotropic d = 1");
    let (c, e) = (v - r, v + r);
    let mass = |s: f64| {
        let (a, b) = if s > 0.0 {
            ((x - r) / s, (x + r) / s)
        } else if x.abs() <= r {
            (f64::NEG_INFINITY, f64::INFINITY)
        } else {
            return 0.0;
        };
        let (lo, hi) = (a.max(c), b.min(e));
        if hi > lo {
            cdf(hi) - cdf(lo)
        } else {
            0.0
        }
    };
    // kinks where an interval end crosses the other interval or the gap (-1, 1)
    let mut pts = vec![0.0, 1.0];
    for num in [x - r, x + r] {
        for den in [c, e, 1.0, -1.0] {
            let s = num / den;
            if s > 0.0 && s < 1.0 {
                pts.push(s);
            }
        }
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    Ok(integrate_points(mass, &pts, QuadOptions::new(1e-15, 1e-9))?.value[0])
}

// E over (y₁, y₂) given the times and the other jumps: the μ⊗μ mass of the
// parallelogram {|y₁s₁ + y₂s₂ - x| <= r, |y₁ + y₂ - v| <= r}
fn conditional_pair_draw<R: Rng + ?Sized>(split: &JumpSplit, cube: &Cube, n: usize, rng: &mut R) -> Result<f64> {
    // the two integrated jumps take the largest and smallest times: the mass
    // scales like 1/|s₁ - s₂|, and the choice depends on the times alone
    let mut times: Vec<f64> = (0..n).map(|_| rng.random()).collect();
    times.sort_by(f64::total_cmp);
    let (s1, s2) = (times[n - 1], times[0]);
    let (mut rs, mut ss) = (0.0, 0.0);
    for &s in &times[1..n - 1] {
        let y = split.sample_mu(rng)[0];
        rs += y * s;
        ss += y;
    }
    let x = cube.center.x()[0] - rs;
    let v = cube.center.v()[0] - ss;
    let r = cube.r;
    let alpha = split.kernel.alpha();
    let cdf = |y: f64| split.mu_cdf_1d(y).expect("isotropic d = 1");
    // y₁ ∈ [max(a, c), min(b, e)], each end affine in y₂
    let ends = |y2: f64| {
        let a = (x - r - y2 * s2) / s1;
        let b = (x + r - y2 * s2) / s1;
        (a.max(v - r - y2), b.min(v + r - y2))
    };
    let inner = |y2: f64| {
        let (lo, hi) = ends(y2);
        if hi > lo {
            cdf(hi) - cdf(lo)
        } else {
            0.0
        }
    };
    // y₂ values where an end crosses ±1 or the max/min switches branch
    let mut kinks = Vec::new();
    for off in [-r, r] {
        for target in [-1.0, 1.0] {
            kinks.push((x + off - target * s1) / s2);
            kinks.push(v + off - target);
        }
        if s1 != s2 {
            // (x + off - y s₂)/s₁ = v ± r - y
            for off_v in [-r, r] {
                kinks.push((x + off - s1 * (v + off_v)) / (s2 - s1));
            }
        }
    }
    let mut total = 0.0;
    for sign in [1.0, -1.0] {
        // y₂ = sign·w^{-1/α}, μ(dy₂) = dw/2 on each side
        let mut pts = vec![0.0, 1.0];
        for &k in &kinks {
            if k * sign > 1.0 {
                pts.push((k * sign).powf(-alpha));
            }
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        let f = |w: f64| if w > 0.0 { inner(sign * w.powf(-1.0 / alpha)) } else { 0.0 };
        total += 0.5 * integrate_points(f, &pts, QuadOptions::new(1e-15, 1e-8))?.value[0];
    }
    Ok(total)
}

#[derive(Default)]
struct Welford {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn stderr(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        (self.m2 / (self.n - 1) as f64 / self.n as f64).sqrt()
    }
}

/// Empirical tail of the small-jump part `Z⁽⁰⁾_t`.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TailReport {
    pub radii: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub counts: Vec<u64>,
    pub n_paths: usize,
    /// Radii with fewer than ten exceedances.
    pub censored: Vec<bool>,
    /// Fitted slope of `log P` against `(R+2)log(R+2)` over uncensored `R >= 2`.
    pub slope: Option<f64>,
}

pub fn small_jump_tail_check(k: &LevyKernel, cfg: &SimConfig, radii: &[f64]) -> Result<TailReport> {
    if k.isotropic_kappa().is_none() {
        return Err(Error::Unsupported("tail check is defined for constant kappa".into()));
    }
    if cfg.n_paths == 0 {
        return Err(Error::domain("need at least one path"));
    }
    let sampler = KineticSampler::small_part(k, cfg)?;
    let pts = sampler.endpoints(cfg.n_paths);
    let w = 2 * k.d();
    let norms: Vec<f64> = pts.chunks(w).map(norm).collect();
    let counts: Vec<u64> = radii
        .iter()
        .map(|&r| norms.iter().filter(|&&n| r <= 0.0 || n > r).count() as u64)
        .collect();
    let probabilities: Vec<f64> = counts.iter().map(|&c| c as f64 / cfg.n_paths as f64).collect();
    let censored: Vec<bool> = counts.iter().map(|&c| c < 10).collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = radii
        .iter()
        .zip(&probabilities)
        .zip(&censored)
        .filter(|((r, _), c)| **r >= 2.0 && !**c)
        .map(|((r, p), _)| ((r + 2.0) * (r + 2.0).ln(), p.ln()))
        .unzip();
    let slope = (xs.len() >= 2).then(|| linear_fit(&xs, &ys).0);
    Ok(TailReport {
        radii: radii.to_vec(),
        probabilities,
        counts,
        n_paths: cfg.n_paths,
        censored,
        slope,
    })
}

/// Least-squares `(slope, intercept)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Product partition of a box in phase space, `cells[i]` equal cells along
/// coordinate `i` of `[x..., v...]`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxGrid {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub cells: Vec<usize>,
}

impl BoxGrid {
    pub fn len(&self) -> usize {
        self.cells.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .zip(&self.cells)
            .map(|((l, h), &n)| (h - l) / n as f64)
            .product()
    }

    /// Corners of cell `flat` (last coordinate fastest).
    pub fn cell(&self, mut flat: usize) -> (Vec<f64>, Vec<f64>) {
        let k = self.cells.len();
        let (mut lo, mut hi) = (vec![0.0; k], vec![0.0; k]);
        for ax in (0..k).rev() {
            let j = flat % self.cells[ax];
            flat /= self.cells[ax];
            let w = (self.hi[ax] - self.lo[ax]) / self.cells[ax] as f64;
            lo[ax] = self.lo[ax] + j as f64 * w;
            hi[ax] = lo[ax] + w;
        }
        (lo, hi)
    }

    fn locate(&self, p: &[f64]) -> Option<usize> {
        let mut flat = 0;
        for (ax, &c) in p.iter().enumerate() {
            let (l, h, n) = (self.lo[ax], self.hi[ax], self.cells[ax]);
            if !(c >= l && c < h) {
                return None;
            }
            let j = (((c - l) / (h - l)) * n as f64).floor() as usize;
            flat = flat * n + j.min(n - 1);
        }
        Some(flat)
    }
}

/// Box counts with exact binomial intervals.
#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    pub grid: BoxGrid,
    pub n_samples: u64,
    pub counts: Vec<u64>,
    /// Samples outside the partitioned region.
    pub outside: u64,
}

impl Histogram {
    pub fn probability(&self, i: usize) -> f64 {
        self.counts[i] as f64 / self.n_samples as f64
    }

    pub fn density(&self, i: usize) -> f64 {
        self.probability(i) / self.grid.cell_volume()
    }

    /// Clopper–Pearson interval for the box probability at confidence `level`.
    pub fn interval(&self, i: usize, level: f64) -> (f64, f64) {
        clopper_pearson(self.counts[i], self.n_samples, level)
    }

    pub fn remainder(&self) -> f64 {
        self.outside as f64 / self.n_samples as f64
    }
}

pub fn clopper_pearson(k: u64, n: u64, level: f64) -> (f64, f64) {
    let a = 1.0 - level;
    let (kf, nf) = (k as f64, n as f64);
    let lo = if k == 0 {
        0.0
    } else {
        Beta::new(kf, nf - kf + 1.0).expect("valid shape").inverse_cdf(a / 2.0)
    };
    let hi = if k == n {
        1.0
    } else {
        Beta::new(kf + 1.0, nf - kf).expect("valid shape").inverse_cdf(1.0 - a / 2.0)
    };
    (lo, hi)
}

/// Histogram of flattened samples `[x..., v...]` per row.
pub fn empirical_density(samples: &[f64], width: usize, grid: &BoxGrid) -> Result<Histogram> {
    if grid.cells.len() != width || grid.lo.len() != width || grid.hi.len() != width {
        return Err(Error::config("box grid dimension does not match the samples"));
    }
    if grid.is_empty() || grid.lo.iter().zip(&grid.hi).any(|(l, h)| !(h > l)) {
        return Err(Error::config("box grid is empty"));
    }
    if samples.is_empty() || samples.len() % width != 0 {
        return Err(Error::domain("need at least one complete sample"));
    }
    let mut counts = vec![0u64; grid.len()];
    let mut outside = 0;
    for row in samples.chunks(width) {
        match grid.locate(row) {
            Some(i) => counts[i] += 1,
            None => outside += 1,
        }
    }
    Ok(Histogram {
        grid: grid.clone(),
        n_samples: (samples.len() / width) as u64,
        counts,
        outside,
    })
}

/// Mean of `cos(ξ·s)` over scalar samples, with its standard error.
pub fn empirical_cf(samples: &[f64], xi: f64) -> (f64, f64) {
    let mut w = Welford::default();
    for s in samples {
        w.push((xi * s).cos());
    }
    (w.mean, w.stderr())
}
