use std::f64::consts::PI;
use std::io::{Read, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::levy::CharacteristicExponent;

use super::invert::truncation_radius;

/// Uniform origin-centred axis: nodes `min + j·step`, `j = 0..n`, `min = -n·step/2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Axis {
    pub n: usize,
    pub min: f64,
    pub step: f64,
}

impl Axis {
    pub fn node(&self, j: usize) -> f64 {
        self.min + j as f64 * self.step
    }
}

/// Half extents and (even) node counts for the `2d` coordinates `x₁..x_d, v₁..v_d`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    pub half_extent: Vec<f64>,
    pub nodes: Vec<usize>,
}

impl GridSpec {
    /// `d = 1` grid over `|x| <= lx`, `|v| <= lv`.
    pub fn plane(lx: f64, nx: usize, lv: f64, nv: usize) -> Self {
        Self {
            half_extent: vec![lx, lv],
            nodes: vec![nx, nv],
        }
    }

    fn axes(&self) -> Result<Vec<Axis>> {
        if self.half_extent.len() != self.nodes.len() || self.nodes.is_empty() {
            return Err(Error::config("grid needs one extent and node count per axis"));
        }
        self.half_extent
            .iter()
            .zip(&self.nodes)
            .map(|(&l, &n)| {
                if n < 2 || n % 2 != 0 {
                    return Err(Error::config(format!("node counts must be even and >= 2, got {n}")));
                }
                if !(l > 0.0 && l.is_finite()) {
                    return Err(Error::config("grid extents must be positive"));
                }
                let step = 2.0 * l / n as f64;
                Ok(Axis { n, min: -l, step })
            })
            .collect()
    }
}

/// Kernel values on a uniform grid from one FFT of `e^{-φ}` on the dual grid.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityGrid {
    pub d: usize,
    pub t: f64,
    pub alpha: f64,
    pub kernel: String,
    pub axes: Vec<Axis>,
    /// Raw values, row-major with the last axis fastest.
    pub values: Vec<f64>,
    pub mass: f64,
    pub truncation_radius: f64,
    /// Largest `e^{-Re φ}` found on the boundary of the frequency box.
    pub boundary_decay: f64,
}

const MAGIC: &[u8; 4] = b"KSKG";
const VERSION: u32 = 1;

impl DensityGrid {
    pub fn compute<E: CharacteristicExponent + ?Sized>(
        e: &E,
        name: &str,
        t: f64,
        spec: &GridSpec,
        tail_tol: f64,
    ) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::domain("time must be positive"));
        }
        let d = e.dim();
        let axes = spec.axes()?;
        if axes.len() != 2 * d {
            return Err(Error::config(format!("a d = {d} grid needs {} axes", 2 * d)));
        }
        let shape: Vec<usize> = axes.iter().map(|a| a.n).collect();
        let total: usize = shape.iter().product();
        let dw: Vec<f64> = axes.iter().map(|a| 2.0 * PI / (a.n as f64 * a.step)).collect();
        let freq = |idx: &[usize]| -> Vec<f64> {
            idx.iter()
                .zip(&axes)
                .zip(&dw)
                .map(|((&m, a), w)| (m as f64 - (a.n / 2) as f64) * w)
                .collect()
        };

        // the frequency box must hold the mass of e^{-Re φ}
        let mut boundary = 0.0f64;
        for idx in boundary_indices(&shape) {
            let w = freq(&idx);
            let phi = e.kinetic(&w[..d], &w[d..], t)?;
            boundary = boundary.max((-phi.re).exp());
        }
        if boundary > tail_tol {
            return Err(Error::config(format!(
                "grid step too coarse: e^(-Re phi) = {boundary:.3e} on the frequency boundary exceeds {tail_tol:.1e}; reduce the step"
            )));
        }

        let inner: usize = shape[1..].iter().product();
        let mut data = vec![Complex64::new(0.0, 0.0); total];
        let failure = std::sync::Mutex::new(None);
        data.par_chunks_mut(inner).enumerate().for_each(|(i0, chunk)| {
            let mut idx = vec![0usize; shape.len()];
            idx[0] = i0;
            for (off, slot) in chunk.iter_mut().enumerate() {
                let mut rem = off;
                for ax in (1..shape.len()).rev() {
                    idx[ax] = rem % shape[ax];
                    rem /= shape[ax];
                }
                let w = freq(&idx);
                match e.kinetic(&w[..d], &w[d..], t) {
                    Ok(phi) => {
                        let sign = if idx.iter().sum::<usize>() % 2 == 0 { 1.0 } else { -1.0 };
                        *slot = (-phi).exp() * sign;
                    }
                    Err(err) => {
                        failure.lock().expect("lock").get_or_insert(err);
                    }
                }
            }
        });
        if let Some(err) = failure.into_inner().expect("lock") {
            return Err(err);
        }
        fft_nd(&mut data, &shape);

        let half_sign = if shape.iter().map(|n| n / 2).sum::<usize>() % 2 == 0 { 1.0 } else { -1.0 };
        let norm: f64 = dw.iter().map(|w| w / (2.0 * PI)).product::<f64>() * half_sign;
        let mut values = vec![0.0; total];
        for (flat, (v, c)) in values.iter_mut().zip(&data).enumerate() {
            let mut rem = flat;
            let mut parity = 0usize;
            for &n in shape.iter().rev() {
                parity += rem % n;
                rem /= n;
            }
            let sign = if parity % 2 == 0 { 1.0 } else { -1.0 };
            *v = c.re * sign * norm;
        }
        let cell: f64 = axes.iter().map(|a| a.step).product();
        let mass = values.iter().sum::<f64>() * cell;
        Ok(Self {
            d,
            t,
            alpha: e.index(),
            kernel: name.to_string(),
            axes,
            values,
            mass,
            truncation_radius: truncation_radius(e, t, 0, tail_tol)?,
            boundary_decay: boundary,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.n).collect()
    }

    /// Multi-index of a flat position.
    pub fn index_of(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.axes.len()];
        for (ax, a) in self.axes.iter().enumerate().rev() {
            idx[ax] = flat % a.n;
            flat /= a.n;
        }
        idx
    }

    pub fn flat_of(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.axes).fold(0, |acc, (&i, a)| acc * a.n + i)
    }

    /// Coordinates `[x..., v...]` of a flat position.
    pub fn coords(&self, flat: usize) -> Vec<f64> {
        self.index_of(flat)
            .iter()
            .zip(&self.axes)
            .map(|(&j, a)| a.node(j))
            .collect()
    }

    /// Values clamped at zero, for reporting.
    pub fn clamped(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.max(0.0)).collect()
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Most negative value relative to the maximum (ringing diagnostic).
    pub fn ringing(&self) -> f64 {
        let min = self.values.iter().copied().fold(f64::INFINITY, f64::min);
        (min / self.max_value()).min(0.0)
    }

    /// Integral over the box `[lo, hi]` by the trapezoid rule on the grid; box
    /// faces must fall on grid nodes.
    pub fn box_integral(&self, lo: &[f64], hi: &[f64]) -> Result<f64> {
        if lo.len() != self.axes.len() || hi.len() != self.axes.len() {
            return Err(Error::config("box dimension does not match the grid"));
        }
        let mut ranges = Vec::with_capacity(self.axes.len());
        for ((a, &l), &h) in self.axes.iter().zip(lo).zip(hi) {
            let jl = (l - a.min) / a.step;
            let jh = (h - a.min) / a.step;
            let (rl, rh) = (jl.round(), jh.round());
            if (jl - rl).abs() > 1e-9 || (jh - rh).abs() > 1e-9 || rl < 0.0 || rh > (a.n - 1) as f64 || rh < rl {
                return Err(Error::config(format!("box face {l}..{h} is not aligned with the grid")));
            }
            ranges.push((rl as usize, rh as usize));
        }
        let mut sum = 0.0;
        let mut idx: Vec<usize> = ranges.iter().map(|r| r.0).collect();
        loop {
            let w: f64 = idx
                .iter()
                .zip(&ranges)
                .map(|(&i, &(l, h))| if l == h { 0.0 } else if i == l || i == h { 0.5 } else { 1.0 })
                .product();
            sum += w * self.values[self.flat_of(&idx)];
            let mut ax = idx.len();
            loop {
                if ax == 0 {
                    let cell: f64 = self.axes.iter().map(|a| a.step).product();
                    return Ok(sum * cell);
                }
                ax -= 1;
                if idx[ax] < ranges[ax].1 {
                    idx[ax] += 1;
                    break;
                }
                idx[ax] = ranges[ax].0;
            }
        }
    }

    /// CSV with columns `x1..xd, v1..vd, value` (raw values).
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let names: Vec<String> = (1..=self.d)
            .map(|i| format!("x{i}"))
            .chain((1..=self.d).map(|i| format!("v{i}")))
            .collect();
        writeln!(w, "{},value", names.join(","))?;
        for (flat, v) in self.values.iter().enumerate() {
            let c: Vec<String> = self.coords(flat).iter().map(|c| format!("{c}")).collect();
            writeln!(w, "{},{v:e}", c.join(","))?;
        }
        Ok(())
    }

    /// Binary layout, little endian: magic `KSKG`, `u32` version, `u32 d`,
    /// `f64 t`, `f64 α`, per axis `u64 n, f64 min, f64 step`, then the values.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.d as u32).to_le_bytes())?;
        w.write_all(&self.t.to_le_bytes())?;
        w.write_all(&self.alpha.to_le_bytes())?;
        for a in &self.axes {
            w.write_all(&(a.n as u64).to_le_bytes())?;
            w.write_all(&a.min.to_le_bytes())?;
            w.write_all(&a.step.to_le_bytes())?;
        }
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads [`write_binary`](Self::write_binary) output; kernel name, mass
    /// and truncation metadata are not stored and come back empty or recomputed.
    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::config("not a density grid file"));
        }
        let version = read_u32(&mut r)?;
        if version != VERSION {
            return Err(Error::config(format!("unsupported grid file version {version}")));
        }
        let d = read_u32(&mut r)? as usize;
        let t = read_f64(&mut r)?;
        let alpha = read_f64(&mut r)?;
        let mut axes = Vec::with_capacity(2 * d);
        for _ in 0..2 * d {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            let n = u64::from_le_bytes(b) as usize;
            axes.push(Axis {
                n,
                min: read_f64(&mut r)?,
                step: read_f64(&mut r)?,
            });
        }
        let total: usize = axes.iter().map(|a| a.n).product();
        let mut values = Vec::with_capacity(total);
        for _ in 0..total {
            values.push(read_f64(&mut r)?);
        }
        let cell: f64 = axes.iter().map(|a| a.step).product();
        let mass = values.iter().sum::<f64>() * cell;
        Ok(Self {
            d,
            t,
            alpha,
            kernel: String::new(),
            axes,
            values,
            mass,
            truncation_radius: f64::NAN,
            boundary_decay: f64::NAN,
        })
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

/// Indices on the faces of the box of the given shape.
fn boundary_indices(shape: &[usize]) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for ax in 0..shape.len() {
        for &edge in &[0usize] {
            // lines through the face centre along every other axis
            for other in 0..shape.len() {
                for j in 0..shape[other] {
                    let mut idx: Vec<usize> = shape.iter().map(|n| n / 2).collect();
                    idx[ax] = edge;
                    idx[other] = if other == ax { edge } else { j };
                    out.push(idx);
                }
            }
        }
    }
    out
}

/// In-place forward FFT along every axis of a row-major array.
fn fft_nd(data: &mut [Complex64], shape: &[usize]) {
    let mut planner = FftPlanner::<f64>::new();
    let total = data.len();
    for (ax, &n) in shape.iter().enumerate() {
        let stride: usize = shape[ax + 1..].iter().product();
        let fft = planner.plan_fft_forward(n);
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        let block = n * stride;
        for start in (0..total).step_by(block) {
            for off in 0..stride {
                let base = start + off;
                for (j, c) in line.iter_mut().enumerate() {
                    *c = data[base + j * stride];
                }
                fft.process(&mut line);
                for (j, c) in line.iter().enumerate() {
                    data[base + j * stride] = *c;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::PhasePoint;
    use crate::kernel::{density_point, kolmogorov_density};
    use crate::levy::{GaussianSurrogate, LevyKernel};
    use approx::assert_relative_eq;

    #[test]
    fn gaussian_grid_matches_closed_form() {
        let g = GaussianSurrogate { d: 1 };
        let grid = DensityGrid::compute(&g, "gauss", 1.0, &GridSpec::plane(12.0, 128, 12.0, 128), 1e-9).unwrap();
        let o = PhasePoint::origin(1);
        for flat in (0..grid.len()).step_by(97) {
            let c = grid.coords(flat);
            let want = kolmogorov_density(&o, &PhasePoint::scalar(c[0], c[1]), 1.0).unwrap();
            assert!((grid.values[flat] - want).abs() < 1e-11, "{c:?} {} {want}", grid.values[flat]);
        }
        assert_relative_eq!(grid.mass, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn stable_grid_mass_and_nodes() {
        for (alpha, nx, nv) in [(0.5, 3072, 768), (1.0, 1024, 512), (1.5, 1024, 512)] {
            let k = LevyKernel::isotropic(1, alpha, 1.0).unwrap();
            let grid = DensityGrid::compute(&k, "constant", 1.0, &GridSpec::plane(60.0, nx, 30.0, nv), 1e-8).unwrap();
            assert!((grid.mass - 1.0).abs() < 1e-3, "alpha={alpha}: mass {}", grid.mass);
            assert!(grid.ringing() > -1e-9, "alpha={alpha}: ringing {}", grid.ringing());
        }
    }

    #[test]
    fn coarse_step_is_a_configuration_error() {
        let k = LevyKernel::isotropic(1, 0.5, 1.0).unwrap();
        let err = DensityGrid::compute(&k, "constant", 1.0, &GridSpec::plane(60.0, 1024, 30.0, 512), 1e-8);
        assert!(matches!(err, Err(Error::Config(_))));
        assert!(matches!(
            DensityGrid::compute(&k, "constant", 1.0, &GridSpec::plane(60.0, 15, 30.0, 16), 1e-8),
            Err(Error::Config(_))
        ));
    }

    // Periodic images of the heavy tails leave a smooth offset of order 1e-6 on
    // top of the relative error.
    #[test]
    fn grid_agrees_with_point_inversion() {
        let k = LevyKernel::isotropic(1, 1.5, 1.0).unwrap();
        let grid = DensityGrid::compute(&k, "constant", 1.0, &GridSpec::plane(60.0, 1024, 30.0, 512), 1e-10).unwrap();
        let mut worst = 0.0f64;
        let probes = (0..grid.len()).step_by(4099).take(96);
        let centre = (0..11).flat_map(|i| (0..7).map(move |j| (512 - 40 + 8 * i) * 512 + 256 - 24 + 8 * j));
        for flat in probes.chain(centre) {
            let c = grid.coords(flat);
            let p = density_point(&k, 1.0, &PhasePoint::scalar(c[0], c[1])).unwrap();
            worst = worst.max((grid.values[flat] - p).abs() / (1e-5 * p + 2e-6));
        }
        assert!(worst < 1.0, "deviation {worst} of the allowed 1e-5 p + 2e-6");
    }

    #[test]
    fn binary_round_trip_and_csv() {
        let g = GaussianSurrogate { d: 1 };
        let grid = DensityGrid::compute(&g, "gauss", 0.5, &GridSpec::plane(4.0, 8, 4.0, 8), 1.0).unwrap();
        let mut buf = Vec::new();
        grid.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 4 + 4 + 4 + 8 + 8 + 2 * 24 + 64 * 8);
        let back = DensityGrid::read_binary(&buf[..]).unwrap();
        assert_eq!(back.values, grid.values);
        assert_eq!(back.axes, grid.axes);
        let mut csv = Vec::new();
        grid.write_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 65);
    }

    #[test]
    fn box_integral_trapezoid() {
        let g = GaussianSurrogate { d: 1 };
        let grid = DensityGrid::compute(&g, "gauss", 1.0, &GridSpec::plane(16.0, 256, 16.0, 256), 1e-9).unwrap();
        let all = grid.box_integral(&[-16.0, -16.0], &[15.875, 15.875]).unwrap();
        assert_relative_eq!(all, 1.0, max_relative = 1e-10);
        assert!(grid.box_integral(&[-1.01, 0.0], &[1.0, 1.0]).is_err());
    }
}
