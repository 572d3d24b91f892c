//! Uniform grids on [-L, L]^n, sampled signals, L^p quadrature and the
//! Fourier transform f̂(ξ) = ∫ e^{-iξ·x} f(x) dx (inverse carries (2π)^{-n}).
//!
//! Two-dimensional data is row-major: flat index `i0 * N + i1`, with `i0`
//! the first coordinate.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fft::{self, Direction, C64};
use crate::indices::Exponent;

/// Relative boundary amplitude above which `fourier` warns.
pub const BOUNDARY_DECAY: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoxGrid {
    dim: usize,
    half_width: f64,
    n: usize,
}

impl BoxGrid {
    pub fn new(dim: usize, half_width: f64, n: usize) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::Unsupported(format!("dimension {dim} (only 1 and 2)")));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::Domain(format!("half width {half_width} must be positive")));
        }
        if n < 16 || !n.is_multiple_of(2) {
            return Err(Error::Domain(format!("points per axis {n} must be even and ≥ 16")));
        }
        Ok(BoxGrid { dim, half_width, n })
    }

    /// N=1024, L=12 in one dimension; N=256, L=8 in two.
    pub fn default_for(dim: usize) -> Result<Self> {
        match dim {
            1 => Self::new(1, 12.0, 1024),
            _ => Self::new(dim, 8.0, 256),
        }
    }

    /// Smallest smooth grid with half width `l` and spacing at most `dt`.
    pub fn with_spacing(dim: usize, l: f64, dt: f64) -> Result<Self> {
        let n = fft::fast_len(((2.0 * l / dt).ceil() as usize).max(16));
        Self::new(dim, l, n)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn points_per_axis(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    pub fn cell(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn node(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.spacing()
    }

    /// Coordinates of a flat index (unused axes are zero).
    pub fn coords(&self, flat: usize) -> [f64; 2] {
        match self.dim {
            1 => [self.node(flat), 0.0],
            _ => [self.node(flat / self.n), self.node(flat % self.n)],
        }
    }

    pub fn freq_spacing(&self) -> f64 {
        2.0 * PI / (self.n as f64 * self.spacing())
    }

    /// ξ for bin index `m ∈ [0, N)`, i.e. (m − N/2)·Δξ.
    pub fn freq(&self, m: usize) -> f64 {
        (m as f64 - (self.n / 2) as f64) * self.freq_spacing()
    }

    pub fn freq_coords(&self, flat: usize) -> [f64; 2] {
        match self.dim {
            1 => [self.freq(flat), 0.0],
            _ => [self.freq(flat / self.n), self.freq(flat % self.n)],
        }
    }

    pub fn nyquist(&self) -> f64 {
        PI / self.spacing()
    }

    /// Same box, `factor` times as many points per axis.
    pub fn refined(&self, factor: usize) -> Self {
        BoxGrid { n: self.n * factor, ..*self }
    }
}

impl fmt::Display for BoxGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[-{}, {}]^{} with N = {}", self.half_width, self.half_width, self.dim, self.n)
    }
}

type Eval = dyn Fn(&[f64]) -> C64 + Send + Sync;

/// An analytic function on ℝⁿ.
#[derive(Clone)]
pub struct Func {
    label: String,
    dim: usize,
    f: Arc<Eval>,
}

impl Func {
    pub fn new(label: impl Into<String>, dim: usize, f: impl Fn(&[f64]) -> C64 + Send + Sync + 'static) -> Self {
        Func { label: label.into(), dim, f: Arc::new(f) }
    }

    pub fn real(label: impl Into<String>, dim: usize, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self::new(label, dim, move |t| C64::new(f(t), 0.0))
    }

    pub fn zero(dim: usize) -> Self {
        Self::new("zero", dim, |_| C64::default())
    }

    pub fn constant(dim: usize, c: C64) -> Self {
        Self::new(format!("const({c})"), dim, move |_| c)
    }

    #[inline]
    pub fn eval(&self, t: &[f64]) -> C64 {
        (self.f)(t)
    }

    pub fn eval1(&self, t: f64) -> C64 {
        (self.f)(&[t])
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn relabel(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn scaled(&self, c: C64) -> Func {
        let g = self.f.clone();
        Func::new(format!("{}*{c}", self.label), self.dim, move |t| c * g(t))
    }
}

impl fmt::Debug for Func {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Func({}, n={})", self.label, self.dim)
    }
}

/// t ↦ f(λt). Dilation always happens before sampling.
pub fn dilate_constructor(f: &Func, lambda: f64) -> Result<Func> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Domain(format!("dilation λ = {lambda} must be positive")));
    }
    if lambda == 1.0 {
        return Ok(f.clone());
    }
    let g = f.f.clone();
    Ok(Func::new(format!("{}_{{λ={lambda}}}", f.label), f.dim, move |t| match t.len() {
        1 => g(&[lambda * t[0]]),
        _ => g(&[lambda * t[0], lambda * t[1]]),
    }))
}

#[derive(Clone, Debug)]
pub struct SampledSignal {
    grid: BoxGrid,
    values: Vec<C64>,
    tag: Option<String>,
}

impl SampledSignal {
    pub fn from_values(grid: BoxGrid, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Domain(format!("{} values for a grid of {} points", values.len(), grid.len())));
        }
        if let Some(i) = values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::NonFinite { index: i, coord: grid.coords(i)[..grid.dim()].to_vec() });
        }
        Ok(SampledSignal { grid, values, tag: None })
    }

    pub fn grid(&self) -> &BoxGrid {
        &self.grid
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn tag(&self) -> Option<&str> {
        self.tag.as_deref()
    }

    pub fn with_tag(mut self, tag: impl Into<String>) -> Self {
        self.tag = Some(tag.into());
        self
    }

    pub fn scaled(&self, c: C64) -> Self {
        SampledSignal { values: self.values.iter().map(|v| v * c).collect(), ..self.clone() }
    }

    pub fn lp_norm(&self, p: Exponent) -> f64 {
        lp_norm_values(&self.values, self.grid.cell(), p.value())
    }

    /// max |f| on the outermost ring of nodes, relative to max |f|.
    pub fn boundary_decay(&self) -> f64 {
        let n = self.grid.points_per_axis();
        let peak = self.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if peak == 0.0 {
            return 0.0;
        }
        let edge = |i: usize| i < 2 || i + 2 >= n;
        let mut b: f64 = 0.0;
        for (k, v) in self.values.iter().enumerate() {
            let on_edge = match self.grid.dim() {
                1 => edge(k),
                _ => edge(k / n) || edge(k % n),
            };
            if on_edge {
                b = b.max(v.norm());
            }
        }
        b / peak
    }

    /// CSV with columns `t` (or `t1,t2`), `re`, `im`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        match self.grid.dim() {
            1 => out.write_record(["t", "re", "im"])?,
            _ => out.write_record(["t1", "t2", "re", "im"])?,
        }
        for (k, v) in self.values.iter().enumerate() {
            let c = self.grid.coords(k);
            let mut rec: Vec<String> = c[..self.grid.dim()].iter().map(|x| format!("{x:.12e}")).collect();
            rec.push(format!("{:.12e}", v.re));
            rec.push(format!("{:.12e}", v.im));
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// (Σ|v|^p · cell)^{1/p}, or max |v| for p = ∞.
pub fn lp_norm_values(values: &[C64], cell: f64, p: f64) -> f64 {
    if p.is_infinite() {
        values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    } else if p == 2.0 {
        (values.iter().map(|v| v.norm_sqr()).sum::<f64>() * cell).sqrt()
    } else {
        (values.iter().map(|v| v.norm().powf(p)).sum::<f64>() * cell).powf(1.0 / p)
    }
}

pub fn lp_norm(signal: &SampledSignal, p: Exponent) -> f64 {
    signal.lp_norm(p)
}

pub fn sample(f: &Func, grid: &BoxGrid) -> Result<SampledSignal> {
    if f.dim() != grid.dim() {
        return Err(Error::Domain(format!("function of dimension {} on a {}-d grid", f.dim(), grid.dim())));
    }
    let g = *grid;
    let values = crate::par::map_range(grid.len(), |k| {
        let c = g.coords(k);
        f.eval(&c[..g.dim()])
    });
    SampledSignal::from_values(*grid, values).map(|s| s.with_tag(f.label()))
}

/// Error if the spectrum beyond 0.9 of the Nyquist radius carries more
/// than `fail` of the energy, warning above `warn`.
pub fn check_resolution(signal: &SampledSignal, warn: f64, fail: f64) -> Result<()> {
    let r = 0.9 * signal.grid().nyquist();
    let tail = fourier(signal).tail_mass(r);
    let msg = format!("`{}` has {tail:.2e} of its energy above |ξ| = {r:.3}", signal.tag().unwrap_or("signal"));
    if tail > fail {
        return Err(Error::Resolution(format!("{msg}; use more points or a smaller box")));
    }
    if tail > warn {
        log::warn!("{msg}");
    }
    Ok(())
}

/// Spectrum on bins ξ_m = (m − N/2)·2π/(NΔ), row-major like the signal.
#[derive(Clone, Debug)]
pub struct SampledSpectrum {
    grid: BoxGrid,
    values: Vec<C64>,
}

impl SampledSpectrum {
    pub fn from_values(grid: BoxGrid, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Domain("spectrum length does not match grid".into()));
        }
        Ok(SampledSpectrum { grid, values })
    }

    /// Evaluate an analytic transform on the bins.
    pub fn from_fn(grid: BoxGrid, f: impl Fn(&[f64]) -> C64 + Sync + Send) -> Self {
        let values = crate::par::map_range(grid.len(), |k| {
            let c = grid.freq_coords(k);
            f(&c[..grid.dim()])
        });
        SampledSpectrum { grid, values }
    }

    pub fn grid(&self) -> &BoxGrid {
        &self.grid
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [C64] {
        &mut self.values
    }

    pub fn freq_spacing(&self) -> f64 {
        self.grid.freq_spacing()
    }

    pub fn cell(&self) -> f64 {
        self.grid.freq_spacing().powi(self.grid.dim() as i32)
    }

    pub fn freq_coords(&self, flat: usize) -> [f64; 2] {
        self.grid.freq_coords(flat)
    }

    /// Multiply pointwise by a real multiplier m(ξ).
    pub fn multiplied(&self, m: impl Fn(&[f64]) -> f64 + Sync + Send) -> Self {
        let g = self.grid;
        let values = crate::par::map_range(self.values.len(), |k| {
            let c = g.freq_coords(k);
            self.values[k] * m(&c[..g.dim()])
        });
        SampledSpectrum { grid: self.grid, values }
    }

    pub fn l2_norm(&self) -> f64 {
        lp_norm_values(&self.values, self.cell(), 2.0)
    }

    /// Fraction of Σ|f̂|² carried by bins with |ξ| > r.
    pub fn tail_mass(&self, r: f64) -> f64 {
        let mut total = 0.0;
        let mut tail = 0.0;
        for (k, v) in self.values.iter().enumerate() {
            let c = self.grid.freq_coords(k);
            let rad = (c[0] * c[0] + c[1] * c[1]).sqrt();
            let e = v.norm_sqr();
            total += e;
            if rad > r {
                tail += e;
            }
        }
        if total == 0.0 {
            0.0
        } else {
            tail / total
        }
    }
}

fn sign(k: usize) -> f64 {
    if k.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

fn checkerboard(grid: &BoxGrid, flat: usize) -> f64 {
    let n = grid.points_per_axis();
    match grid.dim() {
        1 => sign(flat),
        _ => sign(flat / n + flat % n),
    }
}

/// FFT of the samples with the box-offset phase and the Δⁿ weight. Both
/// phase factors reduce to (−1)^k because ξ_m·L = (m − N/2)·π.
pub fn fourier(signal: &SampledSignal) -> SampledSpectrum {
    let grid = *signal.grid();
    let decay = signal.boundary_decay();
    if decay > BOUNDARY_DECAY {
        log::warn!("signal `{}` is {decay:.2e} of its peak at the box boundary", signal.tag().unwrap_or("?"));
    }
    let n = grid.points_per_axis();
    let half_sign = match grid.dim() {
        1 => sign(n / 2),
        _ => 1.0,
    };
    let mut data: Vec<C64> = signal.values().iter().enumerate().map(|(k, v)| v * checkerboard(&grid, k)).collect();
    let plan = fft::plan(n, Direction::Forward);
    let mut scratch = Vec::new();
    fft::fft_nd(&mut data, n, grid.dim(), &plan, &mut scratch);
    let w = grid.cell() * half_sign;
    for (k, v) in data.iter_mut().enumerate() {
        *v *= w * checkerboard(&grid, k);
    }
    SampledSpectrum { grid, values: data }
}

/// Inverse of [`fourier`] on the same grid.
pub fn inverse_fourier(spec: &SampledSpectrum) -> SampledSignal {
    let grid = *spec.grid();
    let n = grid.points_per_axis();
    let half_sign = match grid.dim() {
        1 => sign(n / 2),
        _ => 1.0,
    };
    let mut data: Vec<C64> = spec.values().iter().enumerate().map(|(k, v)| v * checkerboard(&grid, k)).collect();
    let plan = fft::plan(n, Direction::Inverse);
    let mut scratch = Vec::new();
    fft::fft_nd(&mut data, n, grid.dim(), &plan, &mut scratch);
    let w = half_sign / (n as f64 * grid.spacing()).powi(grid.dim() as i32);
    for (k, v) in data.iter_mut().enumerate() {
        *v *= w * checkerboard(&grid, k);
    }
    SampledSignal { grid, values: data, tag: None }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gauss(dim: usize) -> Func {
        Func::real("gauss", dim, |t| (-t.iter().map(|x| x * x).sum::<f64>()).exp())
    }

    #[test]
    fn grid_validation() {
        assert!(BoxGrid::new(1, 1.0, 15).is_err());
        assert!(BoxGrid::new(1, 1.0, 8).is_err());
        assert!(BoxGrid::new(3, 1.0, 16).is_err());
        assert!(BoxGrid::new(1, 0.0, 16).is_err());
        let g = BoxGrid::default_for(1).unwrap();
        assert_eq!(g.node(512), 0.0);
        assert_eq!(g.freq(512), 0.0);
    }

    #[test]
    fn sampling_examples() {
        let g = BoxGrid::new(1, 12.0, 1024).unwrap();
        let s = sample(&Func::constant(1, C64::new(1.0, 0.0)), &g).unwrap();
        assert!(s.values().iter().all(|v| *v == C64::new(1.0, 0.0)));
        let s = sample(&gauss(1), &g).unwrap();
        assert_eq!(s.values()[512].re, 1.0);
        let at_one = gauss(1).eval1(1.0).re;
        assert!((at_one - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn non_finite_reports_node() {
        let g = BoxGrid::new(1, 1.0, 16).unwrap();
        let f = Func::real("bad", 1, |t| if t[0] == 0.0 { f64::NAN } else { 1.0 });
        match sample(&f, &g) {
            Err(Error::NonFinite { index, coord }) => {
                assert_eq!(index, 8);
                assert_eq!(coord, vec![0.0]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dilation_examples() {
        let g = gauss(1);
        assert!(dilate_constructor(&g, 0.0).is_err());
        let g2 = dilate_constructor(&g, 2.0).unwrap();
        assert!((g2.eval1(1.0).re - (-4.0f64).exp()).abs() < 1e-15);
        let back = dilate_constructor(&g2, 0.5).unwrap();
        assert!((back.eval1(0.7) - g.eval1(0.7)).norm() < 1e-15);
    }

    #[test]
    fn gaussian_transform_matches_closed_form() {
        let g = BoxGrid::new(1, 12.0, 1024).unwrap();
        let s = fourier(&sample(&gauss(1), &g).unwrap());
        let mut err: f64 = 0.0;
        for (k, v) in s.values().iter().enumerate() {
            let xi = g.freq(k);
            if xi.abs() <= 10.0 {
                err = err.max((v - C64::new(PI.sqrt() * (-xi * xi / 4.0).exp(), 0.0)).norm());
            }
        }
        assert!(err <= 1e-8, "max error {err}");
    }

    #[test]
    fn real_even_gives_real_even() {
        let g = BoxGrid::new(1, 12.0, 512).unwrap();
        let s = fourier(&sample(&gauss(1), &g).unwrap());
        let n = g.points_per_axis();
        for m in 1..n {
            assert!(s.values()[m].im.abs() < 1e-10);
            assert!((s.values()[m] - s.values()[n - m]).norm() < 1e-10);
        }
    }

    #[test]
    fn narrow_gaussian_is_flat() {
        let g = BoxGrid::new(1, 4.0, 4096).unwrap();
        let f = dilate_constructor(&gauss(1), 40.0).unwrap();
        let s = fourier(&sample(&f, &g).unwrap());
        let at0 = s.values()[2048].re;
        let at5 = s.values()[2048 + (5.0 / g.freq_spacing()) as usize].re;
        assert!((at5 / at0) > 0.99);
    }

    #[test]
    fn roundtrip_and_plancherel_2d() {
        let g = BoxGrid::new(2, 8.0, 64).unwrap();
        let s = sample(&gauss(2), &g).unwrap();
        let spec = fourier(&s);
        let ratio = spec.l2_norm().powi(2) / s.lp_norm(Exponent::int(2).unwrap()).powi(2);
        assert!((ratio / (2.0 * PI).powi(2) - 1.0).abs() < 1e-8);
        let back = inverse_fourier(&spec);
        let err = back.values().iter().zip(s.values()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-12);
        let peak = spec.values()[32 * 64 + 32].re;
        assert!((peak - PI).abs() < 1e-8);
    }

    #[test]
    fn lp_examples() {
        let g = BoxGrid::new(1, 12.0, 1024).unwrap();
        let s = sample(&gauss(1), &g).unwrap();
        let two = s.lp_norm(Exponent::int(2).unwrap());
        assert!((two - (PI / 2.0).powf(0.25)).abs() < 1e-10);
        assert_eq!(s.lp_norm(Exponent::infinity()), 1.0);
        let box_grid = BoxGrid::new(1, 0.5, 1000).unwrap();
        let one = sample(&Func::constant(1, C64::new(1.0, 0.0)), &box_grid).unwrap();
        assert!((one.lp_norm(Exponent::int(2).unwrap()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn csv_has_header() {
        let g = BoxGrid::new(1, 1.0, 16).unwrap();
        let s = sample(&gauss(1), &g).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,re,im\n"));
        assert_eq!(text.lines().count(), 17);
    }

    #[test]
    fn resolution_check() {
        let g = BoxGrid::default_for(1).unwrap();
        assert!(check_resolution(&sample(&gauss(1), &g).unwrap(), 1e-10, 1e-10).is_ok());
        let sharp = Func::real("gauss_200", 1, |t| (-(200.0 * t[0]).powi(2)).exp());
        assert!(matches!(check_resolution(&sample(&sharp, &g).unwrap(), 0.0, 1e-6), Err(Error::Resolution(_))));
    }
}
