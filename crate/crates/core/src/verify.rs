//! Numerical certification of the two-sided estimates: every check evaluates a
//! ratio or error field over a fixed domain and reports its spread.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{chord_integral, grube_d1, m_beta, moment_integral, n_beta, BoundParams, MomentValue};
use crate::error::{Error, Result};
use crate::geometry::{dilate, PhasePoint};
use crate::kernel::{
    density_and_gradient, density_point, kolmogorov_density, DensityGrid, GridSpec, InversionOptions,
};
use crate::levy::{char_exponent, decompose_vector, uniform_direction, GaussianSurrogate, LevyKernel};
use crate::simulate::{
    empirical_cf, empirical_density, large_jump_cube_probability, linear_fit, path_rng, small_jump_tail_check,
    BoxGrid, Cube, KineticSampler, SimConfig, SmallJumpScheme,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckName {
    KolmogorovOracle,
    ScalingExact,
    TheoremEnvelope,
    GradientLog,
    ChordLemma,
    MomentLemma,
    LargeJumpLemma,
    DecomposeLemma,
    SimulationConsistency,
    ConditionalMoment,
    GrubeD1,
    SmallJumpTail,
}

impl CheckName {
    pub const ALL: [CheckName; 12] = [
        CheckName::KolmogorovOracle,
        CheckName::ScalingExact,
        CheckName::TheoremEnvelope,
        CheckName::GradientLog,
        CheckName::ChordLemma,
        CheckName::MomentLemma,
        CheckName::LargeJumpLemma,
        CheckName::DecomposeLemma,
        CheckName::SimulationConsistency,
        CheckName::ConditionalMoment,
        CheckName::GrubeD1,
        CheckName::SmallJumpTail,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CheckName::KolmogorovOracle => "kolmogorov_oracle",
            CheckName::ScalingExact => "scaling_exact",
            CheckName::TheoremEnvelope => "theorem_envelope",
            CheckName::GradientLog => "gradient_log",
            CheckName::ChordLemma => "chord_lemma",
            CheckName::MomentLemma => "moment_lemma",
            CheckName::LargeJumpLemma => "large_jump_lemma",
            CheckName::DecomposeLemma => "decompose_lemma",
            CheckName::SimulationConsistency => "simulation_consistency",
            CheckName::ConditionalMoment => "conditional_moment",
            CheckName::GrubeD1 => "grube_d1",
            CheckName::SmallJumpTail => "small_jump_tail",
        }
    }
}

impl fmt::Display for CheckName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CheckName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CheckName::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::config(format!("unknown check '{s}'")))
    }
}

/// Parameters of one check. Fields a check does not use are ignored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckSpec {
    pub name: CheckName,
    pub d: Vec<usize>,
    pub alpha: Vec<f64>,
    pub t: Vec<f64>,
    /// Built-in kernel name, see [`LevyKernel::builtin`].
    pub kappa: String,
    /// Half extents of the evaluation domain.
    pub extent: Vec<f64>,
    /// Evaluation nodes per axis.
    pub nodes: Vec<usize>,
    /// Random points, paths or draws per term.
    pub samples: usize,
    /// Largest admissible max/min ratio, or spread factor.
    pub budget: f64,
    /// Error tolerance (relative error, slope half-width or σ multiple).
    pub tolerance: f64,
    pub seed: u64,
}

impl CheckSpec {
    /// Acceptance-scale defaults.
    pub fn default_for(name: CheckName) -> Self {
        let base = CheckSpec {
            name,
            d: vec![1],
            alpha: vec![0.5, 1.0, 1.5],
            t: vec![1.0],
            kappa: "constant".into(),
            extent: vec![],
            nodes: vec![],
            samples: 0,
            budget: f64::MAX,
            tolerance: 0.0,
            seed: 7,
        };
        match name {
            CheckName::KolmogorovOracle => CheckSpec {
                t: vec![0.5, 1.0, 2.0],
                extent: vec![3.0, 3.0],
                nodes: vec![25, 25],
                tolerance: 1e-6,
                ..base
            },
            CheckName::ScalingExact => CheckSpec {
                t: vec![0.5],
                extent: vec![4.0, 4.0],
                samples: 200,
                budget: 2.0,
                tolerance: 1e-4,
                ..base
            },
            CheckName::TheoremEnvelope => CheckSpec {
                extent: vec![40.0, 10.0],
                nodes: vec![41, 21],
                budget: 1e3,
                tolerance: 0.15,
                ..base
            },
            CheckName::GradientLog => CheckSpec {
                t: vec![0.5, 1.0, 2.0],
                extent: vec![40.0, 10.0],
                nodes: vec![21, 11],
                budget: 3.0,
                ..base
            },
            CheckName::ChordLemma => CheckSpec {
                d: vec![1, 2, 3],
                alpha: vec![0.5, 1.0, 1.5],
                extent: vec![1e3],
                samples: 10_000,
                budget: 50.0,
                tolerance: 1e-10,
                ..base
            },
            CheckName::MomentLemma => CheckSpec {
                d: vec![1, 2],
                alpha: vec![1.5],
                extent: vec![10.0, 160.0],
                nodes: vec![9],
                tolerance: 0.1,
                ..base
            },
            CheckName::LargeJumpLemma => CheckSpec {
                alpha: vec![1.0],
                extent: vec![5.0, 30.0],
                nodes: vec![50, 12],
                samples: 20_000,
                budget: 100.0,
                tolerance: 0.1,
                ..base
            },
            CheckName::DecomposeLemma => CheckSpec {
                d: vec![1, 2, 3],
                extent: vec![2.0, 20.0],
                samples: 100_000,
                tolerance: 1e-12,
                ..base
            },
            CheckName::SimulationConsistency => CheckSpec {
                alpha: vec![1.5],
                extent: vec![10.0, 6.0],
                nodes: vec![20, 20],
                samples: 1_000_000,
                budget: 0.95,
                tolerance: 4.0,
                ..base
            },
            CheckName::ConditionalMoment => CheckSpec {
                alpha: vec![1.5],
                extent: vec![2.0, 30.0],
                nodes: vec![10],
                samples: 10_000_000,
                tolerance: 0.15,
                ..base
            },
            CheckName::GrubeD1 => CheckSpec {
                extent: vec![100.0, 100.0],
                nodes: vec![201, 201],
                budget: 50.0,
                ..base
            },
            CheckName::SmallJumpTail => CheckSpec {
                alpha: vec![1.5],
                extent: vec![2.0, 8.0],
                nodes: vec![7],
                samples: 1_000_000,
                ..base
            },
        }
    }

    /// Reduced sizes with the same thresholds, for smoke runs.
    pub fn quick(name: CheckName) -> Self {
        let mut s = Self::default_for(name);
        match name {
            CheckName::KolmogorovOracle => s.nodes = vec![7, 7],
            CheckName::ScalingExact => {
                s.samples = 6;
                s.alpha = vec![1.0, 1.5];
            }
            CheckName::TheoremEnvelope | CheckName::GradientLog => {
                s.nodes = vec![5, 3];
                s.alpha = vec![1.0];
            }
            CheckName::ChordLemma => s.samples = 300,
            CheckName::MomentLemma => s.nodes = vec![5],
            CheckName::LargeJumpLemma => s.nodes = vec![4, 12],
            CheckName::DecomposeLemma => s.samples = 5_000,
            CheckName::SimulationConsistency => s.samples = 20_000,
            CheckName::ConditionalMoment => s.samples = 200_000,
            CheckName::GrubeD1 => s.nodes = vec![41, 41],
            CheckName::SmallJumpTail => s.samples = 20_000,
        }
        s
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RatioStats {
    pub min: f64,
    pub p1: f64,
    pub p50: f64,
    pub p99: f64,
    pub max: f64,
}

impl RatioStats {
    pub fn from_values(values: &[f64]) -> Self {
        let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
        if v.is_empty() {
            return Self::default();
        }
        v.sort_by(f64::total_cmp);
        let q = |p: f64| v[((v.len() - 1) as f64 * p).round() as usize];
        Self {
            min: v[0],
            p1: q(0.01),
            p50: q(0.5),
            p99: q(0.99),
            max: v[v.len() - 1],
        }
    }

    pub fn span(&self) -> f64 {
        self.max / self.min
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FittedConstants {
    pub c_lower: f64,
    pub c_upper: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparabilityReport {
    pub check: CheckName,
    pub domain: String,
    pub params: CheckSpec,
    pub n_points: usize,
    pub ratio_stats: RatioStats,
    pub fitted_constants: FittedConstants,
    /// Check-specific figures (slopes, error maxima, exclusion fractions).
    pub metrics: BTreeMap<String, f64>,
    pub pass: bool,
    pub failure: Option<String>,
    pub seed: u64,
    pub runtime_s: f64,
}

impl ComparabilityReport {
    /// One-line summary.
    pub fn summary(&self) -> String {
        let mut s = format!(
            "{} {}: n={} ratio[min={:.3e}, max={:.3e}]",
            if self.pass { "PASS" } else { "FAIL" },
            self.check,
            self.n_points,
            self.ratio_stats.min,
            self.ratio_stats.max
        );
        for (k, v) in &self.metrics {
            s.push_str(&format!(" {k}={v:.4e}"));
        }
        if let Some(f) = &self.failure {
            s.push_str(&format!(" failure: {f}"));
        }
        s.push_str(&format!(" ({:.1}s)", self.runtime_s));
        s
    }
}

struct Outcome {
    domain: String,
    values: Vec<f64>,
    metrics: BTreeMap<String, f64>,
    pass: bool,
    failure: Option<String>,
}

impl Outcome {
    fn new(domain: impl Into<String>) -> Self {
        Self {
            domain: domain.into(),
            values: Vec::new(),
            metrics: BTreeMap::new(),
            pass: true,
            failure: None,
        }
    }

    fn metric(&mut self, key: impl Into<String>, v: f64) {
        self.metrics.insert(key.into(), v);
    }

    fn require(&mut self, ok: bool, why: impl FnOnce() -> String) {
        if !ok {
            self.pass = false;
            if self.failure.is_none() {
                self.failure = Some(why());
            }
        }
    }
}

pub fn run_check(spec: &CheckSpec) -> ComparabilityReport {
    let start = Instant::now();
    let result = match spec.name {
        CheckName::KolmogorovOracle => kolmogorov_oracle(spec),
        CheckName::ScalingExact => scaling_exact(spec),
        CheckName::TheoremEnvelope => theorem_envelope(spec),
        CheckName::GradientLog => gradient_log(spec),
        CheckName::ChordLemma => chord_lemma(spec),
        CheckName::MomentLemma => moment_lemma(spec),
        CheckName::LargeJumpLemma => large_jump_lemma(spec),
        CheckName::DecomposeLemma => decompose_lemma(spec),
        CheckName::SimulationConsistency => simulation_consistency(spec),
        CheckName::ConditionalMoment => conditional_moment(spec),
        CheckName::GrubeD1 => grube_check(spec),
        CheckName::SmallJumpTail => small_jump_tail(spec),
    };
    let out = result.unwrap_or_else(|e| {
        let mut o = Outcome::new("evaluation aborted");
        o.require(false, || e.to_string());
        o
    });
    let stats = RatioStats::from_values(&out.values);
    ComparabilityReport {
        check: spec.name,
        domain: out.domain,
        params: spec.clone(),
        n_points: out.values.len(),
        ratio_stats: stats,
        fitted_constants: FittedConstants {
            c_lower: stats.min,
            c_upper: stats.max,
        },
        metrics: out.metrics,
        pass: out.pass,
        failure: out.failure,
        seed: spec.seed,
        runtime_s: start.elapsed().as_secs_f64(),
    }
}

/// Writes one JSON file per report and a CSV summary; returns the paths.
pub fn emit_report(reports: &[ComparabilityReport], dir: &Path) -> Result<Vec<PathBuf>> {
    if reports.is_empty() {
        return Err(Error::config("no reports to write"));
    }
    std::fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    for r in reports {
        let p = dir.join(format!("{}_seed{}.json", r.check, r.seed));
        std::fs::write(&p, serde_json::to_string_pretty(r)?)?;
        paths.push(p);
    }
    let p = dir.join(format!("summary_seed{}.csv", reports[0].seed));
    let mut f = std::fs::File::create(&p)?;
    write_summary_csv(&mut f, reports)?;
    paths.push(p);
    Ok(paths)
}

pub fn write_summary_csv<W: Write>(mut w: W, reports: &[ComparabilityReport]) -> Result<()> {
    writeln!(w, "check,n_points,min,p1,p50,p99,max,c_lower,c_upper,pass,seed,runtime_s")?;
    for r in reports {
        let s = &r.ratio_stats;
        writeln!(
            w,
            "{},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{},{},{:.3}",
            r.check,
            r.n_points,
            s.min,
            s.p1,
            s.p50,
            s.p99,
            s.max,
            r.fitted_constants.c_lower,
            r.fitted_constants.c_upper,
            r.pass,
            r.seed,
            r.runtime_s
        )?;
    }
    Ok(())
}

/// Uniform tensor grid over `[-e, e]` in `x` and `v` (d = 1).
fn plane_grid(extent: &[f64], nodes: &[usize]) -> Vec<PhasePoint<f64>> {
    let axis = |e: f64, n: usize| -> Vec<f64> {
        if n == 1 {
            return vec![0.0];
        }
        (0..n).map(|i| -e + 2.0 * e * i as f64 / (n - 1) as f64).collect()
    };
    let xs = axis(extent[0], nodes[0]);
    let vs = axis(extent[1], nodes[1]);
    xs.iter()
        .flat_map(|&x| vs.iter().map(move |&v| PhasePoint::scalar(x, v)))
        .collect()
}

fn kernel_for(spec: &CheckSpec, d: usize, alpha: f64) -> Result<LevyKernel> {
    LevyKernel::builtin(&spec.kappa, d, alpha)
}

// Points with p below this fraction of the peak are treated as quadrature noise.
const NOISE_FLOOR: f64 = 1e-9;

fn kolmogorov_oracle(spec: &CheckSpec) -> Result<Outcome> {
    let mut out = Outcome::new(format!(
        "d=1, |x|<={}, |v|<={}, {}x{} nodes, t in {:?}",
        spec.extent[0], spec.extent[1], spec.nodes[0], spec.nodes[1], spec.t
    ));
    let g = GaussianSurrogate { d: 1 };
    let o = PhasePoint::origin(1);
    let pts = plane_grid(&spec.extent, &spec.nodes);
    let (mut worst_rel, mut worst_sup, mut excluded) = (0.0f64, 0.0f64, 0usize);
    for &t in &spec.t {
        let peak = kolmogorov_density(&o, &o, t)?;
        let vals: Vec<Result<(f64, f64)>> = pts
            .par_iter()
            .map(|z| Ok((density_point(&g, t, z)?, kolmogorov_density(&o, z, t)?)))
            .collect();
        for r in vals {
            let (p, q) = r?;
            worst_sup = worst_sup.max((p - q).abs() / peak);
            if q >= NOISE_FLOOR * peak {
                let e = (p - q).abs() / q;
                worst_rel = worst_rel.max(e);
                out.values.push(e);
            } else {
                excluded += 1;
            }
        }
    }
    out.metric("max_rel_error", worst_rel);
    out.metric("max_sup_normalized_error", worst_sup);
    out.metric("excluded_fraction", excluded as f64 / (pts.len() * spec.t.len()) as f64);
    let tol = spec.tolerance;
    out.require(worst_rel <= tol, || format!("relative error {worst_rel:.3e} > {tol:e}"));
    out.require(worst_sup <= tol, || format!("sup-normalized error {worst_sup:.3e} > {tol:e}"));
    Ok(out)
}

fn scaling_exact(spec: &CheckSpec) -> Result<Outcome> {
    let t = spec.t[0];
    let lambda = spec.budget;
    let mut out = Outcome::new(format!(
        "d=1, {} random z in |x|,|v|<={}, t={t}, lambda={lambda}",
        spec.samples, spec.extent[0]
    ));
    let mut rng = path_rng(spec.seed, 0);
    let pts: Vec<PhasePoint<f64>> = (0..spec.samples)
        .map(|_| {
            PhasePoint::scalar(
                spec.extent[0] * (2.0 * rng.random::<f64>() - 1.0),
                spec.extent[1] * (2.0 * rng.random::<f64>() - 1.0),
            )
        })
        .collect();
    for &alpha in &spec.alpha {
        let k = kernel_for(spec, 1, alpha)?;
        let scaled = k.scaled(lambda)?;
        let errs: Vec<Result<(f64, f64)>> = pts
            .par_iter()
            .map(|z| {
                let lhs = density_point(&k, t, z)?;
                let rhs = t.powf(-2.0 / alpha - 1.0) * density_point(&k, 1.0, &dilate(z, t, alpha)?)?;
                let a = density_point(&scaled, t, z)?;
                let b = lambda * density_point(&k, lambda * t, &PhasePoint::scalar(lambda * z.x()[0], z.v()[0]))?;
                Ok(((lhs - rhs).abs() / lhs, (a - b).abs() / a))
            })
            .collect();
        let (mut self_sim, mut lam) = (0.0f64, 0.0f64);
        for e in errs {
            let (a, b) = e?;
            self_sim = self_sim.max(a);
            lam = lam.max(b);
            out.values.push(a.max(b));
        }
        out.metric(format!("alpha={alpha}/self_similarity_max_rel"), self_sim);
        out.metric(format!("alpha={alpha}/lambda_scaling_max_rel"), lam);
        let tol = spec.tolerance;
        out.require(self_sim.max(lam) <= tol, || {
            format!("alpha={alpha}: identity error {:.3e} > {tol:e}", self_sim.max(lam))
        });
    }
    Ok(out)
}

/// Kernel values on the plane grid with the points below the noise floor dropped.
fn resolved_density(k: &LevyKernel, t: f64, pts: &[PhasePoint<f64>]) -> Result<(Vec<(PhasePoint<f64>, f64)>, usize)> {
    let vals: Vec<Result<f64>> = pts.par_iter().map(|z| density_point(k, t, z)).collect();
    let vals = vals.into_iter().collect::<Result<Vec<_>>>()?;
    let peak = density_point(k, t, &PhasePoint::origin(1))?.max(vals.iter().copied().fold(0.0, f64::max));
    let kept: Vec<(PhasePoint<f64>, f64)> = pts
        .iter()
        .cloned()
        .zip(vals)
        .filter(|(_, p)| *p >= NOISE_FLOOR * peak)
        .collect();
    let excluded = pts.len() - kept.len();
    Ok((kept, excluded))
}

fn theorem_envelope(spec: &CheckSpec) -> Result<Outcome> {
    let t = spec.t[0];
    let mut out = Outcome::new(format!(
        "d=1, |x|<={}, |v|<={}, {}x{} nodes, t={t}",
        spec.extent[0], spec.extent[1], spec.nodes[0], spec.nodes[1]
    ));
    let pts = plane_grid(&spec.extent, &spec.nodes);
    for &alpha in &spec.alpha {
        let k = kernel_for(spec, 1, alpha)?;
        let bp = BoundParams::for_kernel(1, alpha)?;
        let (kept, excluded) = resolved_density(&k, t, &pts)?;
        let ratios: Vec<f64> = kept.iter().map(|(z, p)| p / n_beta(z, &bp)).collect();
        let (xs, ys): (Vec<f64>, Vec<f64>) = kept
            .iter()
            .zip(&ratios)
            .map(|((z, _), r)| ((1.0 + z.norm()).ln(), r.ln()))
            .unzip();
        let slope = linear_fit(&xs, &ys).0;
        let stats = RatioStats::from_values(&ratios);
        out.metric(format!("alpha={alpha}/ratio_span"), stats.span());
        out.metric(format!("alpha={alpha}/log_ratio_slope"), slope);
        out.metric(format!("alpha={alpha}/excluded_fraction"), excluded as f64 / pts.len() as f64);
        let (budget, tol) = (spec.budget, spec.tolerance);
        out.require(stats.span().is_finite() && stats.span() <= budget, || {
            format!("alpha={alpha}: max/min ratio {:.3e} > {budget:e}", stats.span())
        });
        out.require(slope.abs() <= tol, || format!("alpha={alpha}: log-ratio slope {slope:.3} outside ±{tol}"));
        out.values.extend(ratios);
    }
    Ok(out)
}

fn gradient_log(spec: &CheckSpec) -> Result<Outcome> {
    let mut out = Outcome::new(format!(
        "d=1, |x|<={}, |v|<={}, {}x{} nodes, t in {:?}",
        spec.extent[0], spec.extent[1], spec.nodes[0], spec.nodes[1], spec.t
    ));
    let pts = plane_grid(&spec.extent, &spec.nodes);
    let opts = InversionOptions::default();
    for &alpha in &spec.alpha {
        let k = kernel_for(spec, 1, alpha)?;
        let mut constants = Vec::new();
        for &t in &spec.t {
            let vals: Vec<Result<[f64; 3]>> = pts.par_iter().map(|z| density_and_gradient(&k, t, z, &opts)).collect();
            let vals = vals.into_iter().collect::<Result<Vec<_>>>()?;
            let peak = vals.iter().map(|v| v[0]).fold(0.0, f64::max);
            let mut c = 0.0f64;
            for [p, px, pv] in vals {
                if p < NOISE_FLOOR * peak {
                    continue;
                }
                let gx = t.powf(1.0 / alpha + 1.0) * px.abs() / p;
                let gv = t.powf(1.0 / alpha) * pv.abs() / p;
                c = c.max(gx.max(gv));
                out.values.push(gx.max(gv));
            }
            out.metric(format!("alpha={alpha}/t={t}/constant"), c);
            constants.push(c);
        }
        let lo = constants.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = constants.iter().copied().fold(0.0, f64::max);
        out.metric(format!("alpha={alpha}/spread"), hi / lo);
        let budget = spec.budget;
        out.require(hi.is_finite() && hi / lo <= budget, || {
            format!("alpha={alpha}: constants spread by {:.3} > {budget}", hi / lo)
        });
    }
    Ok(out)
}

fn random_point<R: Rng>(d: usize, scale: f64, rng: &mut R) -> PhasePoint<f64> {
    // radii log-uniform over [1e-2, scale]
    let part = |rng: &mut R| -> Vec<f64> {
        let r = 10f64.powf(-2.0 + (scale.log10() + 2.0) * rng.random::<f64>());
        uniform_direction(d, rng).into_iter().map(|c| r * c).collect()
    };
    let x = part(rng);
    let v = part(rng);
    PhasePoint::new(x, v).expect("same dimension")
}

fn chord_lemma(spec: &CheckSpec) -> Result<Outcome> {
    let mut out = Outcome::new(format!(
        "{} random z per (d, beta), d in {:?}, beta = d + {:?}, |x|,|v| <= {}",
        spec.samples, spec.d, spec.alpha, spec.extent[0]
    ));
    let mut rng = path_rng(spec.seed, 0);
    let (budget, tol) = (spec.budget, spec.tolerance);
    let mut slice_err = 0.0f64;
    for &d in &spec.d {
        for &off in &spec.alpha {
            let bp = BoundParams::new(d as f64 + off, d)?;
            let pts: Vec<PhasePoint<f64>> = (0..spec.samples).map(|_| random_point(d, spec.extent[0], &mut rng)).collect();
            let ratios: Vec<Result<f64>> = pts
                .par_iter()
                .map(|z| Ok(chord_integral(z, &bp)? * (1.0 + z.norm()) / m_beta(z, &bp)))
                .collect();
            let ratios = ratios.into_iter().collect::<Result<Vec<_>>>()?;
            let stats = RatioStats::from_values(&ratios);
            out.metric(format!("d={d}/beta={}/min", d as f64 + off), stats.min);
            out.metric(format!("d={d}/beta={}/max", d as f64 + off), stats.max);
            out.require(stats.min >= 1.0 / budget && stats.max <= budget, || {
                format!("d={d}, beta={}: ratios in [{:.3e}, {:.3e}]", d as f64 + off, stats.min, stats.max)
            });
            out.values.extend(ratios);
            // v = 0: both sides equal (1 + |x|)^{-β}
            for _ in 0..100 {
                let z = random_point(d, spec.extent[0], &mut rng);
                let z0 = PhasePoint::new(z.x().to_vec(), vec![0.0; d])?;
                let r = chord_integral(&z0, &bp)? * (1.0 + z0.norm()) / m_beta(&z0, &bp);
                slice_err = slice_err.max((r - 1.0).abs());
            }
        }
    }
    out.metric("v0_slice_max_error", slice_err);
    out.require(slice_err <= tol, || format!("v = 0 slice error {slice_err:.3e} > {tol:e}"));
    Ok(out)
}

fn moment_lemma(spec: &CheckSpec) -> Result<Outcome> {
    let (lo, hi) = (spec.extent[0], spec.extent[1]);
    let n = spec.nodes[0];
    let mut out = Outcome::new(format!(
        "d in {:?}, beta = d + {:?}, |v| in [{lo}, {hi}] ({n} points)",
        spec.d, spec.alpha
    ));
    let speeds: Vec<f64> = (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect();
    for &d in &spec.d {
        for &off in &spec.alpha {
            let beta = d as f64 + off;
            let bp = BoundParams::new(beta, d)?;
            let edge = 2.0 * beta - d as f64;
            // divergence flag against the analytic threshold, on both sides of it
            for q in [0.0, 1.0, edge - 0.25, edge - 1e-9, edge, edge + 1e-9, edge + 0.5] {
                let mut v = vec![0.0; d];
                v[0] = 3.0;
                let flagged = matches!(moment_integral(&v, q, &bp)?, MomentValue::Divergent);
                out.require(flagged == (q >= edge), || format!("d={d}, q={q}: divergence flag {flagged}"));
            }
            for q in [0.0, 1.0] {
                let mut xs = Vec::new();
                let mut ys = Vec::new();
                for &s in &speeds {
                    let mut v = vec![0.0; d];
                    v[0] = s;
                    let m = moment_integral(&v, q, &bp)?
                        .finite()
                        .ok_or_else(|| Error::domain("finite moment flagged divergent"))?;
                    xs.push((1.0 + s).ln());
                    ys.push(m.ln());
                }
                let slope = linear_fit(&xs, &ys).0;
                let target = q - beta;
                out.metric(format!("d={d}/q={q}/slope"), slope);
                out.values.push(slope - target);
                let tol = spec.tolerance;
                out.require((slope - target).abs() <= tol, || {
                    format!("d={d}, q={q}: slope {slope:.4} vs {target} ± {tol}")
                });
            }
        }
    }
    Ok(out)
}

fn large_jump_lemma(spec: &CheckSpec) -> Result<Outcome> {
    let alpha = spec.alpha[0];
    let (rmin, rmax) = (spec.extent[0], spec.extent[1]);
    let (npts, n_max) = (spec.nodes[0], spec.nodes[1]);
    let mut out = Outcome::new(format!(
        "d=1, alpha={alpha}, {npts} z with |z| in [{rmin}, {rmax}], n_max={n_max}, {} draws per term",
        spec.samples
    ));
    let k = kernel_for(spec, 1, alpha)?;
    let bp = BoundParams::for_kernel(1, alpha)?;
    let mut rng = path_rng(spec.seed, 0);
    let pts: Vec<PhasePoint<f64>> = (0..npts)
        .map(|_| {
            let r = rmin + (rmax - rmin) * rng.random::<f64>();
            let a = 2.0 * std::f64::consts::PI * rng.random::<f64>();
            PhasePoint::scalar(r * a.cos(), r * a.sin())
        })
        .collect();
    let (mut worst_se, mut trunc) = (0.0f64, 0.0f64);
    for (i, z) in pts.iter().enumerate() {
        let cube = Cube::new(z.clone(), 1.0)?;
        let est = large_jump_cube_probability(&k, &cube, n_max, spec.samples, spec.seed.wrapping_add(i as u64 + 1))?;
        let rel = est.stderr / est.estimate;
        worst_se = worst_se.max(rel);
        trunc = trunc.max(est.truncation_bound);
        out.values.push(est.estimate * (1.0 + z.norm()).powf(1.0 + alpha) / chord_integral(z, &bp)?);
    }
    let stats = RatioStats::from_values(&out.values);
    let c = stats.max.max(1.0 / stats.min);
    out.metric("band_constant", c);
    out.metric("max_relative_stderr", worst_se);
    out.metric("truncation_bound", trunc);
    let (budget, tol) = (spec.budget, spec.tolerance);
    out.require(c <= budget, || format!("ratios need [1/C, C] with C = {c:.3} > {budget}"));
    out.require(worst_se < tol, || format!("relative stderr {worst_se:.3} >= {tol}"));
    out.require(trunc < 1e-6, || format!("Poisson truncation bound {trunc:.3e} >= 1e-6"));
    Ok(out)
}

const LENGTH_SLACK: f64 = 1e-12;

fn decompose_lemma(spec: &CheckSpec) -> Result<Outcome> {
    let (nmin, nmax) = (spec.extent[0] as usize, spec.extent[1] as usize);
    let mut out = Outcome::new(format!(
        "{} random (n, u), n in [{nmin}, {nmax}], |u| <= n, d in {:?}",
        spec.samples, spec.d
    ));
    let mut rng = path_rng(spec.seed, 0);
    let (mut worst_sum, mut bad_len) = (0.0f64, 0usize);
    let (mut shortest, mut longest) = (f64::INFINITY, 0.0f64);
    for i in 0..spec.samples {
        let d = spec.d[i % spec.d.len()];
        let n = rng.random_range(nmin..=nmax);
        let len = match i % 50 {
            0 => 0.0,
            1 => n as f64,
            _ => n as f64 * rng.random::<f64>(),
        };
        let u: Vec<f64> = uniform_direction(d, &mut rng).into_iter().map(|c| len * c).collect();
        let parts = decompose_vector(&u, n)?;
        let mut sum = vec![0.0; d];
        for p in &parts {
            let l = crate::geometry::norm(p);
            shortest = shortest.min(l);
            longest = longest.max(l);
            // pieces are built at exactly 1/3 and 1, so the endpoints carry rounding
            if !(l >= (1.0 - LENGTH_SLACK) / 3.0 && l <= 1.0 + LENGTH_SLACK) {
                bad_len += 1;
            }
            for (s, c) in sum.iter_mut().zip(p) {
                *s += c;
            }
        }
        let err = sum.iter().zip(&u).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        worst_sum = worst_sum.max(err);
        out.values.push(err);
    }
    out.metric("max_sum_error", worst_sum);
    out.metric("shortest_piece", shortest);
    out.metric("longest_piece", longest);
    out.metric("pieces_out_of_range", bad_len as f64);
    let tol = spec.tolerance;
    out.require(worst_sum <= tol, || format!("sum error {worst_sum:.3e} > {tol:e}"));
    out.require(bad_len == 0, || format!("{bad_len} pieces with length outside [1/3, 1]"));
    Ok(out)
}

fn simulation_consistency(spec: &CheckSpec) -> Result<Outcome> {
    let alpha = spec.alpha[0];
    let (ex, ev) = (spec.extent[0], spec.extent[1]);
    let (bx, bv) = (spec.nodes[0], spec.nodes[1]);
    let mut out = Outcome::new(format!(
        "d=1, alpha={alpha}, {} paths, {bx}x{bv} boxes over |x|<={ex}, |v|<={ev}",
        spec.samples
    ));
    let k = kernel_for(spec, 1, alpha)?;
    let cfg = SimConfig {
        seed: spec.seed,
        n_paths: spec.samples,
        t: 1.0,
        epsilon: 0.01,
        scheme: SmallJumpScheme::GaussianCompensate,
    };
    let pts = KineticSampler::new(&k, &cfg)?.endpoints(spec.samples);
    let boxes = BoxGrid {
        lo: vec![-ex, -ev],
        hi: vec![ex, ev],
        cells: vec![bx, bv],
    };
    let hist = empirical_density(&pts, 2, &boxes)?;
    // grid steps dividing the box widths: 1/16 in x, 0.075 in v
    let grid = DensityGrid::compute(&k, k.name(), 1.0, &GridSpec::plane(60.0, 1920, 30.0, 800), 1e-8)?;
    let n = spec.samples as f64;
    let mut inside = 0usize;
    for i in 0..boxes.len() {
        let (lo, hi) = boxes.cell(i);
        let p = grid.box_integral(&lo, &hi)?.max(0.0);
        let sigma = (p * (1.0 - p) / n).sqrt();
        let z = (hist.probability(i) - p).abs() / sigma.max(1e-300);
        out.values.push(z);
        if z <= spec.tolerance {
            inside += 1;
        }
    }
    let frac = inside as f64 / boxes.len() as f64;
    out.metric("fraction_within_band", frac);
    let budget = spec.budget;
    out.require(frac >= budget, || format!("only {frac:.3} of boxes within {}σ", spec.tolerance));
    let vs: Vec<f64> = pts.chunks(2).map(|r| r[1]).collect();
    let mut worst = 0.0f64;
    for j in 1..=20 {
        let xi = 0.1 * j as f64;
        let want = (-char_exponent(&k, &[xi])?.re).exp();
        let (m, se) = empirical_cf(&vs, xi);
        worst = worst.max((m - want).abs() / se);
    }
    out.metric("cf_max_sigma", worst);
    out.require(worst <= spec.tolerance, || format!("characteristic function off by {worst:.2}σ"));
    Ok(out)
}

fn conditional_moment(spec: &CheckSpec) -> Result<Outcome> {
    let alpha = spec.alpha[0];
    let (lo, hi) = (spec.extent[0], spec.extent[1]);
    let nv = spec.nodes[0];
    let mut out = Outcome::new(format!(
        "d=1, alpha={alpha}, {} paths, |v| in [{lo}, {hi}] ({nv} values), window 0.5",
        spec.samples
    ));
    let k = kernel_for(spec, 1, alpha)?;
    let cfg = SimConfig {
        seed: spec.seed,
        n_paths: spec.samples,
        t: 1.0,
        epsilon: 0.1,
        scheme: SmallJumpScheme::GaussianCompensate,
    };
    let sampler = KineticSampler::new(&k, &cfg)?;
    let vs: Vec<f64> = (0..nv).map(|i| lo * (hi / lo).powf(i as f64 / (nv - 1) as f64)).collect();
    // per v: count, Σ|X|^{1/2}, Σ|X|
    let mut acc = vec![[0.0f64; 3]; nv];
    let chunk = 1_000_000;
    let mut start = 0;
    while start < spec.samples {
        let n = chunk.min(spec.samples - start);
        let pts = sampler.endpoints_range(start, n);
        for r in pts.chunks(2) {
            let (x, v) = (r[0], r[1]);
            for (a, &c) in acc.iter_mut().zip(&vs) {
                // V ≈ ±c, folded by the symmetry (X, V) -> (-X, -V)
                if (v.abs() - c).abs() <= 0.5 {
                    a[0] += 1.0;
                    a[1] += x.abs().sqrt();
                    a[2] += x.abs();
                }
            }
        }
        start += n;
    }
    for (qi, q) in [(1usize, 0.5), (2, 1.0)] {
        let (xs, ys): (Vec<f64>, Vec<f64>) = acc
            .iter()
            .zip(&vs)
            .filter(|(a, _)| a[0] > 0.0)
            .map(|(a, &c)| ((1.0 + c).ln(), (a[qi] / a[0]).ln()))
            .unzip();
        let slope = linear_fit(&xs, &ys).0;
        out.metric(format!("q={q}/slope"), slope);
        out.values.push(slope / q);
        let tol = spec.tolerance;
        out.require((slope - q).abs() <= tol, || format!("q={q}: slope {slope:.3} vs {q} ± {tol}"));
    }
    out.metric("min_window_count", acc.iter().map(|a| a[0]).fold(f64::INFINITY, f64::min));
    Ok(out)
}

fn grube_check(spec: &CheckSpec) -> Result<Outcome> {
    let mut out = Outcome::new(format!(
        "d=1, |x|,|v|<={}, {}x{} nodes",
        spec.extent[0], spec.nodes[0], spec.nodes[1]
    ));
    let pts = plane_grid(&spec.extent, &spec.nodes);
    for &alpha in &spec.alpha {
        let bp = BoundParams::for_kernel(1, alpha)?;
        let ratios = pts
            .iter()
            .map(|z| Ok(n_beta(z, &bp) / grube_d1(z, alpha)?))
            .collect::<Result<Vec<f64>>>()?;
        let span = RatioStats::from_values(&ratios).span();
        out.metric(format!("alpha={alpha}/ratio_span"), span);
        let budget = spec.budget;
        out.require(span <= budget, || format!("alpha={alpha}: max/min {span:.3} > {budget}"));
        out.values.extend(ratios);
    }
    Ok(out)
}

fn small_jump_tail(spec: &CheckSpec) -> Result<Outcome> {
    let alpha = spec.alpha[0];
    let (lo, hi) = (spec.extent[0], spec.extent[1]);
    let n = spec.nodes[0];
    let mut out = Outcome::new(format!(
        "d=1, alpha={alpha}, {} paths, R in [{lo}, {hi}] ({n} radii)",
        spec.samples
    ));
    let k = kernel_for(spec, 1, alpha)?;
    let cfg = SimConfig {
        seed: spec.seed,
        n_paths: spec.samples,
        t: 1.0,
        epsilon: 0.1,
        scheme: SmallJumpScheme::GaussianCompensate,
    };
    let radii: Vec<f64> = std::iter::once(0.0)
        .chain((0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64))
        .collect();
    let rep = small_jump_tail_check(&k, &cfg, &radii)?;
    out.require(rep.probabilities[0] == 1.0, || "P(|Z| > 0) != 1".into());
    out.require(rep.probabilities.windows(2).all(|w| w[1] <= w[0]), || "tail not monotone".into());
    let slope = rep.slope.unwrap_or(f64::NAN);
    out.metric("slope", slope);
    out.metric("censored_radii", rep.censored.iter().filter(|c| **c).count() as f64);
    out.require(slope < 0.0, || format!("log-tail slope {slope} not negative"));
    out.values = rep.probabilities.iter().copied().filter(|p| *p > 0.0).collect();
    Ok(out)
}
