//! One-dimensional quadrature: adaptive Gauss–Kronrod (21 point) with global
//! bisection, optionally vector valued, and Gauss–Legendre rules.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_814_984_480,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// Gauss weights for the odd-indexed Kronrod abscissae.
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Tolerances and budget for adaptive integration.
#[derive(Clone, Copy, Debug)]
pub struct QuadOptions<T> {
    pub abs_tol: T,
    pub rel_tol: T,
    pub max_segments: usize,
}

impl<T: Scalar> QuadOptions<T> {
    pub fn new(abs_tol: T, rel_tol: T) -> Self {
        Self {
            abs_tol,
            rel_tol,
            max_segments: 2000,
        }
    }

    pub fn relative(rel_tol: T) -> Self {
        Self::new(T::zero(), rel_tol)
    }

    pub fn with_max_segments(mut self, n: usize) -> Self {
        self.max_segments = n;
        self
    }
}

impl<T: Scalar> Default for QuadOptions<T> {
    fn default() -> Self {
        Self::new(T::lit(1e-13), T::lit(1e-10))
    }
}

/// Integral estimate with its error bound and the number of integrand calls.
#[derive(Clone, Copy, Debug)]
pub struct Estimate<T, const N: usize> {
    pub value: [T; N],
    pub error: [T; N],
    pub evaluations: usize,
}

fn rescale_error<T: Scalar>(err: T, res_abs: T, res_asc: T) -> T {
    let mut scaled = err.abs();
    if res_asc != T::zero() && scaled != T::zero() {
        let scale = (T::lit(200.0) * scaled / res_asc).powf(T::lit(1.5));
        scaled = if scale < T::one() { res_asc * scale } else { res_asc };
    }
    if res_abs > T::min_positive_value() / (T::lit(50.0) * T::epsilon()) {
        let min_err = T::lit(50.0) * T::epsilon() * res_abs;
        if min_err > scaled {
            scaled = min_err;
        }
    }
    scaled
}

struct Segment<T, const N: usize> {
    a: T,
    b: T,
    value: [T; N],
    error: [T; N],
    // roundoff floor 50 ε ∫|f| of the rule on this segment
    floor: [T; N],
    priority: f64,
}

impl<T, const N: usize> PartialEq for Segment<T, N> {
    fn eq(&self, other: &Self) -> bool {
        self.priority == other.priority
    }
}
impl<T, const N: usize> Eq for Segment<T, N> {}
impl<T, const N: usize> PartialOrd for Segment<T, N> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T, const N: usize> Ord for Segment<T, N> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.priority.total_cmp(&other.priority)
    }
}

fn gk21<T: Scalar, const N: usize, F>(f: &mut F, a: T, b: T) -> ([T; N], [T; N], [T; N])
where
    F: FnMut(T) -> [T; N],
{
    let center = T::lit(0.5) * (a + b);
    let half = T::lit(0.5) * (b - a);
    let fc = f(center);
    let mut kronrod = [T::zero(); N];
    let mut gauss = [T::zero(); N];
    let mut res_abs = [T::zero(); N];
    let mut fv1 = [[T::zero(); N]; 10];
    let mut fv2 = [[T::zero(); N]; 10];
    let wc = T::lit(WGK[10]);
    for k in 0..N {
        kronrod[k] = fc[k] * wc;
        res_abs[k] = kronrod[k].abs();
    }
    for j in 0..10 {
        let dx = half * T::lit(XGK[j]);
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        let wk = T::lit(WGK[j]);
        for k in 0..N {
            let s = f1[k] + f2[k];
            kronrod[k] = kronrod[k] + wk * s;
            res_abs[k] = res_abs[k] + wk * (f1[k].abs() + f2[k].abs());
            if j % 2 == 1 {
                gauss[k] = gauss[k] + T::lit(WG[j / 2]) * s;
            }
        }
        fv1[j] = f1;
        fv2[j] = f2;
    }
    let mut value = [T::zero(); N];
    let mut error = [T::zero(); N];
    let mut floor = [T::zero(); N];
    for k in 0..N {
        let mean = kronrod[k] * T::lit(0.5);
        let mut res_asc = wc * (fc[k] - mean).abs();
        for j in 0..10 {
            res_asc = res_asc
                + T::lit(WGK[j]) * ((fv1[j][k] - mean).abs() + (fv2[j][k] - mean).abs());
        }
        let habs = half.abs();
        value[k] = kronrod[k] * half;
        floor[k] = T::lit(50.0) * T::epsilon() * res_abs[k] * habs;
        error[k] = rescale_error(
            (kronrod[k] - gauss[k]) * half,
            res_abs[k] * habs,
            res_asc * habs,
        );
    }
    (value, error, floor)
}

/// Adaptive vector-valued integration over `[a, b]` with interior breakpoints.
///
/// Convergence is declared when every component satisfies
/// `error <= max(abs_tol, rel_tol * |value|)`.
pub fn integrate_vec<T, const N: usize, F>(
    mut f: F,
    points: &[T],
    opts: QuadOptions<T>,
) -> Result<Estimate<T, N>>
where
    T: Scalar,
    F: FnMut(T) -> [T; N],
{
    if points.len() < 2 {
        return Err(Error::domain("integration needs at least two endpoints"));
    }
    let mut heap: BinaryHeap<Segment<T, N>> = BinaryHeap::new();
    let mut evaluations = 0usize;
    let mut initial = Vec::with_capacity(points.len() - 1);
    for w in points.windows(2) {
        if w[1] == w[0] {
            continue;
        }
        let (v, e, r) = gk21(&mut f, w[0], w[1]);
        evaluations += 21;
        initial.push((w[0], w[1], v, e, r));
    }
    // Component scales for ordering segments; fixed from the first pass.
    let mut scale = [0.0f64; N];
    for (_, _, v, _, _) in &initial {
        for k in 0..N {
            scale[k] += v[k].as_f64();
        }
    }
    let tiny = opts.abs_tol.as_f64().max(f64::MIN_POSITIVE);
    let scale: [f64; N] = std::array::from_fn(|k| scale[k].abs().max(tiny));
    // Segments whose error is pure roundoff carry priority zero.
    let priority = |e: &[T; N], r: &[T; N]| -> f64 {
        (0..N)
            .filter(|&k| e[k] > r[k])
            .map(|k| e[k].as_f64() / scale[k])
            .fold(0.0, f64::max)
    };
    for (a, b, value, error, floor) in initial {
        heap.push(Segment {
            a,
            b,
            value,
            error,
            floor,
            priority: priority(&error, &floor),
        });
    }
    loop {
        let (total, total_err, total_floor) = sum_segments(&heap);
        let converged = (0..N).all(|k| {
            total_err[k] <= opts.abs_tol.max(opts.rel_tol * total[k].abs()).max(total_floor[k])
        });
        let exhausted = heap.peek().is_none_or(|s| s.priority == 0.0);
        if converged || exhausted {
            return Ok(Estimate {
                value: total,
                error: total_err,
                evaluations,
            });
        }
        if heap.len() >= opts.max_segments {
            let worst = (0..N)
                .max_by(|&i, &j| {
                    let ri = total_err[i].as_f64() / total[i].abs().as_f64().max(tiny);
                    let rj = total_err[j].as_f64() / total[j].abs().as_f64().max(tiny);
                    ri.total_cmp(&rj)
                })
                .unwrap_or(0);
            return Err(Error::Accuracy {
                what: "adaptive quadrature".into(),
                estimate: total[worst].as_f64(),
                error: total_err[worst].as_f64(),
            });
        }
        // Split several of the worst segments per pass to amortise the bookkeeping.
        let batch = (heap.len() / 8).max(1);
        for _ in 0..batch {
            let seg = match heap.peek() {
                Some(s) if s.priority > 0.0 => heap.pop().expect("non-empty heap"),
                _ => break,
            };
            let mid = T::lit(0.5) * (seg.a + seg.b);
            if mid <= seg.a.min(seg.b) || mid >= seg.a.max(seg.b) {
                heap.push(Segment {
                    priority: 0.0,
                    ..seg
                });
                continue;
            }
            for (a, b) in [(seg.a, mid), (mid, seg.b)] {
                let (value, error, floor) = gk21(&mut f, a, b);
                evaluations += 21;
                heap.push(Segment {
                    a,
                    b,
                    value,
                    error,
                    floor,
                    priority: priority(&error, &floor),
                });
            }
        }
    }
}

fn sum_segments<T: Scalar, const N: usize>(heap: &BinaryHeap<Segment<T, N>>) -> ([T; N], [T; N], [T; N]) {
    let mut total = [T::zero(); N];
    let mut total_err = [T::zero(); N];
    let mut total_floor = [T::zero(); N];
    for s in heap.iter() {
        for k in 0..N {
            total[k] = total[k] + s.value[k];
            total_err[k] = total_err[k] + s.error[k];
            total_floor[k] = total_floor[k] + s.floor[k];
        }
    }
    // a little headroom over the summed roundoff floors
    for f in total_floor.iter_mut() {
        *f = *f * T::lit(2.0);
    }
    (total, total_err, total_floor)
}

/// Adaptive scalar integration over the polyline `points` (sorted endpoints plus breakpoints).
pub fn integrate_points<T, F>(mut f: F, points: &[T], opts: QuadOptions<T>) -> Result<Estimate<T, 1>>
where
    T: Scalar,
    F: FnMut(T) -> T,
{
    integrate_vec(|x| [f(x)], points, opts)
}

/// Adaptive scalar integration over `[a, b]`.
pub fn integrate<T, F>(f: F, a: T, b: T, opts: QuadOptions<T>) -> Result<T>
where
    T: Scalar,
    F: FnMut(T) -> T,
{
    integrate_points(f, &[a, b], opts).map(|e| e.value[0])
}

/// Adaptive integration over `[a, ∞)` through the map `x = a + u/(1-u)`.
pub fn integrate_to_infinity<T, F>(mut f: F, a: T, opts: QuadOptions<T>) -> Result<T>
where
    T: Scalar,
    F: FnMut(T) -> T,
{
    let g = |u: T| {
        let w = T::one() - u;
        if w <= T::zero() {
            return T::zero();
        }
        let x = a + u / w;
        let v = f(x) / (w * w);
        if v.is_finite() {
            v
        } else {
            T::zero()
        }
    };
    integrate_points(g, &[T::zero(), T::one()], opts).map(|e| e.value[0])
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` by Newton iteration on `P_n`.
pub fn gauss_legendre<T: Scalar>(n: usize) -> (Vec<T>, Vec<T>) {
    assert!(n >= 1, "Gauss–Legendre rule needs at least one node");
    let mut nodes = vec![T::zero(); n];
    let mut weights = vec![T::zero(); n];
    let nf = n as f64;
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0f64, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = nf * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = T::lit(-x);
        nodes[n - 1 - i] = T::lit(x);
        weights[i] = T::lit(w);
        weights[n - 1 - i] = T::lit(w);
    }
    if n % 2 == 1 {
        nodes[n / 2] = T::zero();
    }
    (nodes, weights)
}

/// Fixed composite Gauss–Legendre rule on `[a, b]` split into `panels` panels.
pub fn composite_gauss<T, F>(mut f: F, a: T, b: T, nodes: &[T], weights: &[T], panels: usize) -> T
where
    T: Scalar,
    F: FnMut(T) -> T,
{
    let h = (b - a) / T::from_usize(panels).expect("panel count");
    let half = T::lit(0.5) * h;
    let mut sum = T::zero();
    for p in 0..panels {
        let c = a + (T::from_usize(p).expect("panel index") + T::lit(0.5)) * h;
        for (x, w) in nodes.iter().zip(weights) {
            sum = sum + *w * f(c + half * *x);
        }
    }
    sum * half
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn polynomial_is_exact() {
        let v = integrate(|x: f64| x.powi(5) - 2.0 * x, 0.0, 2.0, QuadOptions::default()).unwrap();
        assert_relative_eq!(v, 64.0 / 6.0 - 4.0, max_relative = 1e-14);
    }

    #[test]
    fn endpoint_singularity() {
        let v = integrate(|x: f64| x.powf(-0.5), 0.0, 1.0, QuadOptions::relative(1e-10)).unwrap();
        assert_relative_eq!(v, 2.0, max_relative = 1e-9);
    }

    #[test]
    fn semi_infinite_power() {
        let v = integrate_to_infinity(|x: f64| (1.0 + x).powi(-4), 0.0, QuadOptions::relative(1e-12))
            .unwrap();
        assert_relative_eq!(v, 1.0 / 3.0, max_relative = 1e-11);
    }

    #[test]
    fn vector_components_converge_together() {
        let est = integrate_vec(
            |x: f64| [x.sin(), x.cos(), (-x).exp()],
            &[0.0, 1.0, 3.0],
            QuadOptions::relative(1e-12),
        )
        .unwrap();
        assert_relative_eq!(est.value[0], 1.0 - 3f64.cos(), max_relative = 1e-12);
        assert_relative_eq!(est.value[1], 3f64.sin(), max_relative = 1e-12);
        assert_relative_eq!(est.value[2], 1.0 - (-3f64).exp(), max_relative = 1e-12);
    }

    #[test]
    fn budget_exhaustion_reports_estimate() {
        let opts = QuadOptions::relative(1e-15).with_max_segments(3);
        let err = integrate(|x: f64| (50.0 * x).sin().abs(), 0.0, 10.0, opts).unwrap_err();
        assert!(matches!(err, Error::Accuracy { .. }));
    }

    #[test]
    fn gauss_legendre_weights_and_moments() {
        for n in [1usize, 2, 5, 16, 33] {
            let (x, w) = gauss_legendre::<f64>(n);
            let s: f64 = w.iter().sum();
            assert_relative_eq!(s, 2.0, max_relative = 1e-13);
            // exact for degree 2n-1
            let deg = 2 * n - 2;
            let m: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
            assert_relative_eq!(m, 2.0 / (deg as f64 + 1.0), max_relative = 1e-12);
        }
    }

    #[test]
    fn single_precision_rule() {
        let v = integrate(|x: f32| x * x, 0.0, 3.0, QuadOptions::new(1e-5, 1e-5)).unwrap();
        assert!((v - 9.0).abs() < 1e-4);
    }
}
