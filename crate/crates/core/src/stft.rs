//! Short-time Fourier transform V_w f(x, ξ) = ∫ f(t) conj(w(t − x)) e^{-iξ·t} dt.
//!
//! Two engines produce the same quantity:
//!
//! * `Lattice::Time` windows the samples around lattice points x_j (grid
//!   nodes) and FFTs each frame. The phase e^{-iξ·t} is attached per frame
//!   through the frame's start node, so V carries the integral's phase.
//! * `Lattice::Frequency` uses V(x, ξ) = (2π)^{-1} ∫ f̂(ξ + u) conj(ŵ(u)) e^{iu·x} du,
//!   one short FFT per ξ row. It needs a window with compact Fourier
//!   support and is the only practical route for windows such as F⁻¹φ
//!   whose time-domain tails are very long. One dimension only.
//!
//! Windows here are real, even and separable (tensor products of a 1-d
//! profile), which is all the experiments need.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use serde::Serialize;

use crate::bandlimited::{self, lattice_psi_inverse, partition_phi_inverse};
use crate::bump::cutoff;
use crate::error::{Error, Result};
use crate::fft::{self, Direction, C64};
use crate::grid::{fourier, BoxGrid, Func, SampledSignal, SampledSpectrum};
use crate::indices::ExponentPair;
use crate::par;

/// e^{-t²} < 1e-16 beyond this radius.
pub const GAUSS_CUT: f64 = 36.9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowLabel {
    Gauss,
    BumpPsi,
    BumpPhiCompact,
    Bspline,
    PartitionPhi,
    NarrowPhi,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WindowNorms {
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
}

type Profile = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct Window {
    label: WindowLabel,
    dim: usize,
    time: Profile,
    time_radius: f64,
    freq: Option<Profile>,
    freq_radius: f64,
    norms: WindowNorms,
}

impl std::fmt::Debug for Window {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Window({:?}, n={}, radius={})", self.label, self.dim, self.time_radius)
    }
}

/// 1-d L¹, L², L^∞ norms of a profile on [-r, r] by the trapezoid rule.
fn profile_norms(p: &dyn Fn(f64) -> f64, r: f64) -> WindowNorms {
    let n = 200_000;
    let h = 2.0 * r / n as f64;
    let (mut l1, mut l2, mut linf) = (0.0, 0.0, 0.0f64);
    for i in 0..=n {
        let v = p(-r + i as f64 * h).abs();
        let w = if i == 0 || i == n { 0.5 } else { 1.0 };
        l1 += w * v;
        l2 += w * v * v;
        linf = linf.max(v);
    }
    WindowNorms { l1: l1 * h, l2: (l2 * h).sqrt(), linf }
}

impl Window {
    /// General separable window from a 1-d time profile (support or
    /// truncation radius `time_radius`) and an optional Fourier profile with
    /// support radius `freq_radius`. Norms are those of the 1-d profile.
    pub fn from_profiles(
        label: WindowLabel,
        dim: usize,
        time: impl Fn(f64) -> f64 + Send + Sync + 'static,
        time_radius: f64,
        freq: Option<(Profile, f64)>,
        norms_1d: WindowNorms,
    ) -> Result<Self> {
        if !(norms_1d.l2 > 0.0 && norms_1d.l2.is_finite()) {
            return Err(Error::Window(format!("{label:?} has L² norm {}", norms_1d.l2)));
        }
        let d = dim as i32;
        let norms = WindowNorms { l1: norms_1d.l1.powi(d), l2: norms_1d.l2.powi(d), linf: norms_1d.linf.powi(d) };
        let (freq, freq_radius) = match freq {
            Some((f, r)) => (Some(f), r),
            None => (None, f64::INFINITY),
        };
        Ok(Window { label, dim, time: Arc::new(time), time_radius, freq, freq_radius, norms })
    }

    pub fn gauss(dim: usize) -> Self {
        Self::gauss_scaled(dim, 1.0)
    }

    /// e^{-a|t|²}.
    pub fn gauss_scaled(dim: usize, a: f64) -> Self {
        let norms = WindowNorms { l1: (PI / a).sqrt(), l2: (PI / (2.0 * a)).powf(0.25), linf: 1.0 };
        let amp = (PI / a).sqrt();
        let freq: Profile = Arc::new(move |xi: f64| amp * (-xi * xi / (4.0 * a)).exp());
        Self::from_profiles(
            WindowLabel::Gauss,
            dim,
            move |t| (-a * t * t).exp(),
            (GAUSS_CUT / a).sqrt(),
            Some((freq, (4.0 * a * GAUSS_CUT).sqrt())),
            norms,
        )
        .expect("gaussian window is valid")
    }

    /// Compact bump: 1 on [-1/4, 1/4], supported in [-1/2, 1/2].
    pub fn bump_psi(dim: usize) -> Self {
        let p = |t: f64| cutoff(t, 0.25, 0.5);
        let norms = profile_norms(&p, 0.5);
        Self::from_profiles(WindowLabel::BumpPsi, dim, p, 0.5, None, norms).expect("bump window is valid")
    }

    /// Hat function 1 − |t| on [-1, 1].
    pub fn bspline(dim: usize) -> Self {
        let p = |t: f64| (1.0 - t.abs()).max(0.0);
        let norms = WindowNorms { l1: 1.0, l2: (2.0f64 / 3.0).sqrt(), linf: 1.0 };
        Self::from_profiles(WindowLabel::Bspline, dim, p, 1.0, None, norms).expect("hat window is valid")
    }

    /// Φ = F⁻¹φ with φ the partition window of the discrete M^{2,∞} seminorm.
    pub fn partition_phi(dim: usize) -> Self {
        let tab = partition_phi_inverse();
        let norms = WindowNorms { l1: tab.lp_norm(1.0), l2: tab.lp_norm(2.0), linf: tab.lp_norm(f64::INFINITY) };
        let freq: Profile = Arc::new(bandlimited::partition_phi);
        Self::from_profiles(WindowLabel::PartitionPhi, dim, move |t| tab.eval(t), tab.t_max(), Some((freq, 0.75)), norms)
            .expect("tabulated window is valid")
    }

    /// Φ = F⁻¹φ with φ = 1 on [-1/16, 1/16], supported in [-1/8, 1/8].
    /// Since φ = ψ(4·) for the lattice ψ, Φ(t) = Ψ(t/4)/4.
    pub fn narrow_phi(dim: usize) -> Self {
        let tab = lattice_psi_inverse();
        let sc = |p: f64| if p.is_infinite() { 0.25 } else { 4f64.powf(1.0 / p - 1.0) };
        let norms = WindowNorms {
            l1: sc(1.0) * tab.lp_norm(1.0),
            l2: sc(2.0) * tab.lp_norm(2.0),
            linf: sc(f64::INFINITY) * tab.lp_norm(f64::INFINITY),
        };
        let freq: Profile = Arc::new(bandlimited::narrow_phi);
        Self::from_profiles(WindowLabel::NarrowPhi, dim, move |t| 0.25 * tab.eval(t / 4.0), 4.0 * tab.t_max(), Some((freq, 0.125)), norms)
            .expect("tabulated window is valid")
    }

    pub fn label(&self) -> WindowLabel {
        self.label
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn norms(&self) -> WindowNorms {
        self.norms
    }

    pub fn time_radius(&self) -> f64 {
        self.time_radius
    }

    pub fn freq_radius(&self) -> f64 {
        self.freq_radius
    }

    pub fn has_compact_spectrum(&self) -> bool {
        self.freq.is_some() && self.freq_radius.is_finite()
    }

    pub fn eval1(&self, t: f64) -> f64 {
        (self.time)(t)
    }

    pub fn eval(&self, t: &[f64]) -> f64 {
        t.iter().map(|&x| (self.time)(x)).product()
    }

    /// ŵ along one axis, if known.
    pub fn spectrum1(&self, xi: f64) -> Option<f64> {
        self.freq.as_ref().map(|f| f(xi))
    }

    pub fn constructor(&self) -> Func {
        let w = self.clone();
        Func::real(format!("{:?}", self.label).to_lowercase(), self.dim, move |t| w.eval(t))
    }
}

/// t ↦ e^{iξ·t} w(t − x).
pub fn modulate_translate(w: &Window, x: &[f64], xi: &[f64]) -> Func {
    let w = w.clone();
    let x = x.to_vec();
    let xi = xi.to_vec();
    Func::new(format!("M_{xi:?}T_{x:?}w"), w.dim(), move |t| {
        let mut shifted = [0.0; 2];
        let mut phase = 0.0;
        for i in 0..t.len() {
            shifted[i] = t[i] - x[i];
            phase += xi[i] * t[i];
        }
        C64::from_polar(w.eval(&shifted[..t.len()]), phase)
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "engine", rename_all = "snake_case")]
pub enum Lattice {
    /// Frames centred on every `x_stride`-th grid node. `frame_half_width`
    /// `None` uses the whole box for every frame (the dense STFT).
    Time { x_stride: usize, frame_half_width: Option<f64>, x_extent: Option<f64>, xi_extent: Option<f64> },
    /// Rows on every `row_stride`-th bin of f̂, each resolved on
    /// `x_points` equally spaced x values over the box.
    Frequency { row_stride: usize, x_points: usize, x_extent: Option<f64>, xi_extent: Option<f64> },
}

impl Lattice {
    /// Δx = Δ, frame = whole box, all FFT bins.
    pub fn dense() -> Self {
        Lattice::Time { x_stride: 1, frame_half_width: None, x_extent: None, xi_extent: None }
    }

    pub fn framed(x_stride: usize, frame_half_width: f64) -> Self {
        Lattice::Time { x_stride, frame_half_width: Some(frame_half_width), x_extent: None, xi_extent: None }
    }

    pub fn frequency(row_stride: usize, x_points: usize) -> Self {
        Lattice::Frequency { row_stride, x_points, x_extent: None, xi_extent: None }
    }

    pub fn with_xi_extent(self, e: f64) -> Self {
        match self {
            Lattice::Time { x_stride, frame_half_width, x_extent, .. } => Lattice::Time { x_stride, frame_half_width, x_extent, xi_extent: Some(e) },
            Lattice::Frequency { row_stride, x_points, x_extent, .. } => Lattice::Frequency { row_stride, x_points, x_extent, xi_extent: Some(e) },
        }
    }

    pub fn with_x_extent(self, e: f64) -> Self {
        match self {
            Lattice::Time { x_stride, frame_half_width, xi_extent, .. } => Lattice::Time { x_stride, frame_half_width, x_extent: Some(e), xi_extent },
            Lattice::Frequency { row_stride, x_points, xi_extent, .. } => Lattice::Frequency { row_stride, x_points, x_extent: Some(e), xi_extent },
        }
    }
}

/// V on a product lattice; `values[jx * n_xi + m]` with both flat indices
/// row-major over axes in two dimensions.
#[derive(Clone, Debug)]
pub struct TimeFreqMatrix {
    pub dim: usize,
    pub x_axis: Vec<f64>,
    pub xi_axis: Vec<f64>,
    pub dx: f64,
    pub dxi: f64,
    pub values: Vec<C64>,
}

impl TimeFreqMatrix {
    pub fn n_x(&self) -> usize {
        self.x_axis.len().pow(self.dim as u32)
    }

    pub fn n_xi(&self) -> usize {
        self.xi_axis.len().pow(self.dim as u32)
    }

    pub fn value(&self, jx: usize, m: usize) -> C64 {
        self.values[jx * self.n_xi() + m]
    }

    pub fn x_cell(&self) -> f64 {
        self.dx.powi(self.dim as i32)
    }

    pub fn xi_cell(&self) -> f64 {
        self.dxi.powi(self.dim as i32)
    }

    pub fn cell_measure(&self) -> f64 {
        self.x_cell() * self.xi_cell()
    }

    fn axis_point(axis: &[f64], dim: usize, flat: usize) -> [f64; 2] {
        match dim {
            1 => [axis[flat], 0.0],
            _ => [axis[flat / axis.len()], axis[flat % axis.len()]],
        }
    }

    pub fn x_point(&self, jx: usize) -> [f64; 2] {
        Self::axis_point(&self.x_axis, self.dim, jx)
    }

    pub fn xi_point(&self, m: usize) -> [f64; 2] {
        Self::axis_point(&self.xi_axis, self.dim, m)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn scaled(&self, c: f64) -> Self {
        TimeFreqMatrix { values: self.values.iter().map(|v| v * c).collect(), ..self.clone() }
    }

    /// Build from explicit data (used by tests and tools).
    pub fn from_parts(dim: usize, x_axis: Vec<f64>, xi_axis: Vec<f64>, dx: f64, dxi: f64, values: Vec<C64>) -> Result<Self> {
        let m = TimeFreqMatrix { dim, x_axis, xi_axis, dx, dxi, values };
        if m.values.len() != m.n_x() * m.n_xi() {
            return Err(Error::Domain("value array does not match lattice shape".into()));
        }
        if m.values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::Resolution("non-finite STFT value".into()));
        }
        Ok(m)
    }

    /// CSV columns `x, xi, re, im` (or `x1, x2, xi1, xi2, re, im`).
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        match self.dim {
            1 => out.write_record(["x", "xi", "re", "im"])?,
            _ => out.write_record(["x1", "x2", "xi1", "xi2", "re", "im"])?,
        }
        let d = self.dim;
        for jx in 0..self.n_x() {
            let x = self.x_point(jx);
            for m in 0..self.n_xi() {
                let xi = self.xi_point(m);
                let v = self.value(jx, m);
                let mut rec: Vec<String> = x[..d].iter().chain(xi[..d].iter()).map(|c| format!("{c:.9e}")).collect();
                rec.push(format!("{:.12e}", v.re));
                rec.push(format!("{:.12e}", v.im));
                out.write_record(&rec)?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// Inner L^p norms over x, one vector per requested p, indexed by ξ row.
#[derive(Clone, Debug)]
pub struct InnerNorms {
    pub xi_cell: f64,
    pub rows: Vec<Vec<f64>>,
}

// ---------------------------------------------------------------------------
// time engine

struct TimePlan<'a> {
    f: &'a [C64],
    dim: usize,
    n: usize,
    m: usize,
    dense: bool,
    dt: f64,
    l: f64,
    x_idx: Vec<usize>,
    xi_bins: Vec<usize>,
    wtab: Vec<f64>,
    woff: isize,
    plan: Arc<dyn rustfft::Fft<f64>>,
}

impl<'a> TimePlan<'a> {
    fn new(sig: &'a SampledSignal, w: &Window, x_stride: usize, hw: Option<f64>, x_ext: Option<f64>, xi_ext: Option<f64>) -> Result<Self> {
        let grid = sig.grid();
        let (n, dt, l, dim) = (grid.points_per_axis(), grid.spacing(), grid.half_width(), grid.dim());
        if w.dim() != dim {
            return Err(Error::Domain(format!("window of dimension {} for a {dim}-d signal", w.dim())));
        }
        if x_stride == 0 {
            return Err(Error::Domain("x stride must be positive".into()));
        }
        let x_ext = x_ext.unwrap_or(l);
        if x_ext > l * (1.0 + 1e-12) {
            return Err(Error::Resolution(format!("x extent {x_ext} exceeds the box half width {l}")));
        }
        let (m, dense) = match hw {
            None => (n, true),
            Some(h) => {
                let m = (2 * (h / dt).ceil() as usize + 1).next_power_of_two().max(16);
                if m >= n {
                    (n, true)
                } else {
                    (m, false)
                }
            }
        };
        let frame_nyq = PI / dt;
        if let Some(e) = xi_ext {
            if e > frame_nyq * (1.0 + 1e-12) {
                return Err(Error::Resolution(format!("ξ extent {e} exceeds the Nyquist frequency {frame_nyq:.4}")));
            }
        }
        let centre = n / 2;
        let mut x_idx = Vec::new();
        let kmax = centre / x_stride;
        for k in -(kmax as isize)..=(kmax as isize) {
            let i = centre as isize + k * x_stride as isize;
            if i >= 0 && (i as usize) < n && grid.node(i as usize).abs() <= x_ext * (1.0 + 1e-12) {
                x_idx.push(i as usize);
            }
        }
        let dxi = 2.0 * PI / (m as f64 * dt);
        let xi_ext = xi_ext.unwrap_or(f64::INFINITY);
        let xi_bins: Vec<usize> = (0..m).filter(|&b| ((b as f64 - (m / 2) as f64) * dxi).abs() <= xi_ext * (1.0 + 1e-12)).collect();
        let t = if dense { n as isize } else { (m / 2) as isize + 1 };
        let wtab = (-t..=t).map(|o| w.eval1(o as f64 * dt)).collect();
        Ok(TimePlan { f: sig.values(), dim, n, m, dense, dt, l, x_idx, xi_bins, wtab, woff: t, plan: fft::plan(m, Direction::Forward) })
    }

    fn n_frames(&self) -> usize {
        self.x_idx.len().pow(self.dim as u32)
    }

    fn n_xi(&self) -> usize {
        self.xi_bins.len().pow(self.dim as u32)
    }

    fn dxi(&self) -> f64 {
        2.0 * PI / (self.m as f64 * self.dt)
    }

    fn start(&self, ix: usize) -> isize {
        if self.dense {
            0
        } else {
            ix as isize - (self.m / 2) as isize
        }
    }

    #[inline]
    fn w(&self, offset: isize) -> f64 {
        self.wtab[(offset + self.woff) as usize]
    }

    /// e^{-iξ_b t_start} for each kept bin, times Δ.
    fn phases(&self, st: isize) -> Vec<C64> {
        let t0 = -self.l + st as f64 * self.dt;
        let dxi = self.dxi();
        self.xi_bins
            .iter()
            .map(|&b| {
                let xi = (b as f64 - (self.m / 2) as f64) * dxi;
                C64::from_polar(self.dt, -xi * t0)
            })
            .collect()
    }

    fn fft_bin(&self, b: usize) -> usize {
        (b + self.m - self.m / 2) % self.m
    }

    /// V(x_frame, ·) on the kept bins.
    fn frame(&self, frame: usize, buf: &mut Vec<C64>, scratch: &mut Vec<C64>, out: &mut Vec<C64>) {
        let (n, m) = (self.n as isize, self.m);
        out.clear();
        match self.dim {
            1 => {
                let ix = self.x_idx[frame];
                let st = self.start(ix);
                buf.clear();
                buf.resize(m, C64::default());
                for (k, slot) in buf.iter_mut().enumerate() {
                    let i = st + k as isize;
                    if i >= 0 && i < n {
                        *slot = self.f[i as usize] * self.w(i - ix as isize);
                    }
                }
                fft::fft_nd(buf, m, 1, &self.plan, scratch);
                let ph = self.phases(st);
                for (r, &b) in self.xi_bins.iter().enumerate() {
                    out.push(ph[r] * buf[self.fft_bin(b)]);
                }
            }
            _ => {
                let nx = self.x_idx.len();
                let (ix0, ix1) = (self.x_idx[frame / nx], self.x_idx[frame % nx]);
                let (s0, s1) = (self.start(ix0), self.start(ix1));
                buf.clear();
                buf.resize(m * m, C64::default());
                for a in 0..m {
                    let i0 = s0 + a as isize;
                    if i0 < 0 || i0 >= n {
                        continue;
                    }
                    let wa = self.w(i0 - ix0 as isize);
                    if wa == 0.0 {
                        continue;
                    }
                    for b in 0..m {
                        let i1 = s1 + b as isize;
                        if i1 >= 0 && i1 < n {
                            buf[a * m + b] = self.f[i0 as usize * self.n + i1 as usize] * (wa * self.w(i1 - ix1 as isize));
                        }
                    }
                }
                fft::fft_nd(buf, m, 2, &self.plan, scratch);
                let (p0, p1) = (self.phases(s0), self.phases(s1));
                for (r0, &b0) in self.xi_bins.iter().enumerate() {
                    for (r1, &b1) in self.xi_bins.iter().enumerate() {
                        out.push(p0[r0] * p1[r1] * buf[self.fft_bin(b0) * m + self.fft_bin(b1)]);
                    }
                }
            }
        }
    }

    fn x_axis(&self) -> Vec<f64> {
        self.x_idx.iter().map(|&i| -self.l + i as f64 * self.dt).collect()
    }

    fn xi_axis(&self) -> Vec<f64> {
        let dxi = self.dxi();
        self.xi_bins.iter().map(|&b| (b as f64 - (self.m / 2) as f64) * dxi).collect()
    }
}

// ---------------------------------------------------------------------------
// frequency engine

struct FreqPlan {
    fhat: Vec<C64>,
    n: usize,
    p: usize,
    mmax: usize,
    dxi: f64,
    l: f64,
    rows: Vec<usize>,
    x_keep: Vec<usize>,
    wvals: Vec<f64>,
    plan: Arc<dyn rustfft::Fft<f64>>,
}

impl FreqPlan {
    fn new(sig: &SampledSignal, w: &Window, row_stride: usize, x_points: usize, x_ext: Option<f64>, xi_ext: Option<f64>) -> Result<Self> {
        Self::from_spectrum(fourier(sig), w, row_stride, x_points, x_ext, xi_ext)
    }

    fn from_spectrum(spec: SampledSpectrum, w: &Window, row_stride: usize, x_points: usize, x_ext: Option<f64>, xi_ext: Option<f64>) -> Result<Self> {
        let grid = spec.grid();
        if grid.dim() != 1 || w.dim() != 1 {
            return Err(Error::Unsupported("the frequency-side STFT engine is one-dimensional".into()));
        }
        if !w.has_compact_spectrum() {
            return Err(Error::Window(format!("{:?} has no compactly supported spectrum", w.label())));
        }
        if row_stride == 0 {
            return Err(Error::Domain("row stride must be positive".into()));
        }
        let (n, l) = (grid.points_per_axis(), grid.half_width());
        let x_ext = x_ext.unwrap_or(l);
        if x_ext > l * (1.0 + 1e-12) {
            return Err(Error::Resolution(format!("x extent {x_ext} exceeds the box half width {l}")));
        }
        let dxi = grid.freq_spacing();
        let mmax = (w.freq_radius() / dxi).floor() as usize;
        let p = fft::fast_len(x_points.max(2 * mmax + 2));
        let xi_ext = xi_ext.unwrap_or(f64::INFINITY);
        let centre = n / 2;
        let mut rows = Vec::new();
        let kmax = centre / row_stride;
        for k in -(kmax as isize)..=(kmax as isize) {
            let i = centre as isize + k * row_stride as isize;
            if i >= 0 && (i as usize) < n && grid.freq(i as usize).abs() <= xi_ext * (1.0 + 1e-12) {
                rows.push(i as usize);
            }
        }
        let dx = 2.0 * l / p as f64;
        let x_keep = (0..p).filter(|&k| (-l + k as f64 * dx).abs() <= x_ext * (1.0 + 1e-12)).collect();
        let wvals = (0..=mmax).map(|m| w.spectrum1(m as f64 * dxi).unwrap_or(0.0)).collect();
        let fhat = spec.values().to_vec();
        Ok(FreqPlan { fhat, n, p, mmax, dxi, l, rows, x_keep, wvals, plan: fft::plan(p, Direction::Inverse) })
    }

    fn row(&self, r: usize, buf: &mut Vec<C64>, scratch: &mut Vec<C64>, out: &mut Vec<C64>) {
        let centre = self.rows[r] as isize;
        buf.clear();
        buf.resize(self.p, C64::default());
        let mm = self.mmax as isize;
        for m in -mm..=mm {
            let idx = centre + m;
            if idx < 0 || idx >= self.n as isize {
                continue;
            }
            let sgn = if m.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            let v = self.fhat[idx as usize] * (self.wvals[m.unsigned_abs()] * sgn);
            buf[m.rem_euclid(self.p as isize) as usize] = v;
        }
        fft::fft_nd(buf, self.p, 1, &self.plan, scratch);
        let wgt = self.dxi / (2.0 * PI);
        out.clear();
        out.extend(self.x_keep.iter().map(|&k| buf[k] * wgt));
    }

    fn x_axis(&self) -> Vec<f64> {
        let dx = 2.0 * self.l / self.p as f64;
        self.x_keep.iter().map(|&k| -self.l + k as f64 * dx).collect()
    }

    fn dx(&self) -> f64 {
        2.0 * self.l / self.p as f64
    }
}

// ---------------------------------------------------------------------------
// public entry points

/// Frames (or rows) per parallel work item; fixed so reductions do not
/// depend on the number of threads.
const CHUNK: usize = 32;

pub fn stft(f: &SampledSignal, w: &Window, lattice: &Lattice) -> Result<TimeFreqMatrix> {
    match *lattice {
        Lattice::Time { x_stride, frame_half_width, x_extent, xi_extent } => {
            let plan = TimePlan::new(f, w, x_stride, frame_half_width, x_extent, xi_extent)?;
            let frames = par::map_range(plan.n_frames(), |j| {
                let (mut buf, mut scratch, mut out) = (Vec::new(), Vec::new(), Vec::new());
                plan.frame(j, &mut buf, &mut scratch, &mut out);
                out
            });
            TimeFreqMatrix::from_parts(plan.dim, plan.x_axis(), plan.xi_axis(), plan.dt * x_stride as f64, plan.dxi(), frames.concat())
        }
        Lattice::Frequency { row_stride, x_points, x_extent, xi_extent } => {
            let plan = FreqPlan::new(f, w, row_stride, x_points, x_extent, xi_extent)?;
            let rows = par::map_range(plan.rows.len(), |r| {
                let (mut buf, mut scratch, mut out) = (Vec::new(), Vec::new(), Vec::new());
                plan.row(r, &mut buf, &mut scratch, &mut out);
                out
            });
            let nx = plan.x_keep.len();
            let nr = rows.len();
            let mut values = vec![C64::default(); nx * nr];
            for (r, row) in rows.iter().enumerate() {
                for (j, v) in row.iter().enumerate() {
                    values[j * nr + r] = *v;
                }
            }
            let xi_axis = plan.rows.iter().map(|&i| f.grid().freq(i)).collect();
            TimeFreqMatrix::from_parts(1, plan.x_axis(), xi_axis, plan.dx(), plan.dxi * row_stride as f64, values)
        }
    }
}

#[inline]
fn accumulate(acc: &mut [f64], vals: &[C64], p: f64) {
    if p.is_infinite() {
        for (a, v) in acc.iter_mut().zip(vals) {
            *a = a.max(v.norm());
        }
    } else if p == 2.0 {
        for (a, v) in acc.iter_mut().zip(vals) {
            *a += v.norm_sqr();
        }
    } else if p == 1.0 {
        for (a, v) in acc.iter_mut().zip(vals) {
            *a += v.norm();
        }
    } else {
        for (a, v) in acc.iter_mut().zip(vals) {
            *a += v.norm().powf(p);
        }
    }
}

fn finish(acc: f64, p: f64, cell: f64) -> f64 {
    if p.is_infinite() {
        acc
    } else {
        (acc * cell).powf(1.0 / p)
    }
}

fn combine(a: &mut [f64], b: &[f64], p: f64) {
    for (x, y) in a.iter_mut().zip(b) {
        if p.is_infinite() {
            *x = x.max(*y);
        } else {
            *x += *y;
        }
    }
}

/// Inner L^p norms over x for every ξ row, without storing V.
pub fn stft_inner_norms(f: &SampledSignal, w: &Window, lattice: &Lattice, ps: &[f64]) -> Result<InnerNorms> {
    match *lattice {
        Lattice::Time { x_stride, frame_half_width, x_extent, xi_extent } => {
            let plan = TimePlan::new(f, w, x_stride, frame_half_width, x_extent, xi_extent)?;
            let nf = plan.n_frames();
            let nxi = plan.n_xi();
            let chunks = nf.div_ceil(CHUNK);
            let partials = par::map_range(chunks, |c| {
                let mut acc = vec![vec![0.0; nxi]; ps.len()];
                let (mut buf, mut scratch, mut out) = (Vec::new(), Vec::new(), Vec::new());
                for j in c * CHUNK..((c + 1) * CHUNK).min(nf) {
                    plan.frame(j, &mut buf, &mut scratch, &mut out);
                    for (k, &p) in ps.iter().enumerate() {
                        accumulate(&mut acc[k], &out, p);
                    }
                }
                acc
            });
            let mut total = vec![vec![0.0; nxi]; ps.len()];
            for part in &partials {
                for (k, &p) in ps.iter().enumerate() {
                    combine(&mut total[k], &part[k], p);
                }
            }
            let x_cell = (plan.dt * x_stride as f64).powi(plan.dim as i32);
            let rows = total.into_iter().zip(ps).map(|(acc, &p)| acc.into_iter().map(|a| finish(a, p, x_cell)).collect()).collect();
            Ok(InnerNorms { xi_cell: plan.dxi().powi(plan.dim as i32), rows })
        }
        Lattice::Frequency { row_stride, x_points, x_extent, xi_extent } => {
            let plan = FreqPlan::new(f, w, row_stride, x_points, x_extent, xi_extent)?;
            Ok(freq_inner_norms(&plan, row_stride, ps))
        }
    }
}

/// As [`stft_inner_norms`] for a frequency lattice, starting from f̂ on the
/// frequency grid (for instance an analytic spectrum).
pub fn stft_inner_norms_from_spectrum(spec: SampledSpectrum, w: &Window, lattice: &Lattice, ps: &[f64]) -> Result<InnerNorms> {
    match *lattice {
        Lattice::Frequency { row_stride, x_points, x_extent, xi_extent } => {
            let plan = FreqPlan::from_spectrum(spec, w, row_stride, x_points, x_extent, xi_extent)?;
            Ok(freq_inner_norms(&plan, row_stride, ps))
        }
        Lattice::Time { .. } => Err(Error::Unsupported("spectrum input needs a frequency lattice".into())),
    }
}

fn freq_inner_norms(plan: &FreqPlan, row_stride: usize, ps: &[f64]) -> InnerNorms {
    let x_cell = plan.dx();
    let per_row = par::map_range(plan.rows.len(), |r| {
        let (mut buf, mut scratch, mut out) = (Vec::new(), Vec::new(), Vec::new());
        plan.row(r, &mut buf, &mut scratch, &mut out);
        ps.iter()
            .map(|&p| {
                let mut acc = vec![0.0; out.len()];
                accumulate(&mut acc, &out, p);
                let total = if p.is_infinite() { acc.iter().fold(0.0, |m: f64, &a| m.max(a)) } else { acc.iter().sum() };
                finish(total, p, x_cell)
            })
            .collect::<Vec<f64>>()
    });
    let rows = (0..ps.len()).map(|k| per_row.iter().map(|r| r[k]).collect()).collect();
    InnerNorms { xi_cell: plan.dxi * row_stride as f64, rows }
}

/// ‖V_φ(φ_λ)‖_{L^{p,q}} for the Gauss function in closed form.
pub fn gauss_stft_closed_form(pq: &ExponentPair, lambda: f64, n: usize) -> f64 {
    let (u, v) = (pq.p.inv(), pq.q.inv());
    let n = n as f64;
    // p^{-n/2p} = u^{nu/2}, with the u → 0 limit equal to 1.
    let pow_half = |x: f64| if x == 0.0 { 1.0 } else { x.powf(n * x / 2.0) };
    PI.powf(n * (u + v + 1.0) / 2.0)
        * pow_half(u)
        * pow_half(v)
        * 2f64.powf(n * v)
        * lambda.powf(-n * u)
        * (1.0 + lambda * lambda).powf(n * (u + v - 1.0) / 2.0)
}

/// Default grid for a signal of dimension `dim`.
pub fn default_grid(dim: usize) -> BoxGrid {
    BoxGrid::default_for(dim).expect("defaults are valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{dilate_constructor, sample};

    fn gauss() -> Func {
        Func::real("gauss", 1, |t| (-t[0] * t[0]).exp())
    }

    #[test]
    fn closed_form_examples() {
        let pq = |p, q| ExponentPair::parse(p, q).unwrap();
        assert!((gauss_stft_closed_form(&pq("2", "2"), 1.0, 1) - PI).abs() < 1e-12);
        let v = gauss_stft_closed_form(&pq("1", "1"), 1.0, 1);
        assert!((v - 2.0 * 2f64.sqrt() * PI.powf(1.5)).abs() < 1e-10);
        assert!((v - 15.749).abs() < 1e-3);
        assert!((gauss_stft_closed_form(&pq("2", "2"), 4.0, 1) - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn origin_value() {
        let g = default_grid(1);
        let v = stft(&sample(&gauss(), &g).unwrap(), &Window::gauss(1), &Lattice::dense()).unwrap();
        let jx = v.x_axis.iter().position(|&x| x == 0.0).unwrap();
        let m = v.xi_axis.iter().position(|&x| x == 0.0).unwrap();
        let val = v.value(jx, m);
        assert!((val.re - (PI / 2.0).sqrt()).abs() < 1e-12 && val.im.abs() < 1e-12);
    }

    #[test]
    fn phase_matches_integral_definition() {
        // V(x, ξ) for f = w = Gauss: √(π/2) e^{-x²/2} e^{-ξ²/8} e^{-ixξ/2}.
        let g = default_grid(1);
        let v = stft(&sample(&gauss(), &g).unwrap(), &Window::gauss(1), &Lattice::framed(8, 6.1)).unwrap();
        for jx in (0..v.n_x()).step_by(7) {
            for m in (0..v.n_xi()).step_by(5) {
                let (x, xi) = (v.x_point(jx)[0], v.xi_point(m)[0]);
                let exact = C64::from_polar((PI / 2.0).sqrt() * (-x * x / 2.0 - xi * xi / 8.0).exp(), -x * xi / 2.0);
                assert!((v.value(jx, m) - exact).norm() < 1e-12, "({x}, {xi})");
            }
        }
    }

    #[test]
    fn engines_agree_for_gaussian_window() {
        let g = BoxGrid::new(1, 16.0, 1024).unwrap();
        let f = Func::new("chirp", 1, |t| C64::from_polar((-(t[0] - 1.0).powi(2)).exp(), 3.0 * t[0]));
        let s = sample(&f, &g).unwrap();
        let a = stft(&s, &Window::gauss(1), &Lattice::Time { x_stride: 4, frame_half_width: None, x_extent: Some(8.0), xi_extent: Some(12.0) }).unwrap();
        let b = stft(&s, &Window::gauss(1), &Lattice::Frequency { row_stride: 1, x_points: 256, x_extent: Some(8.0), xi_extent: Some(12.0) }).unwrap();
        assert_eq!(a.x_axis.len(), b.x_axis.len());
        assert_eq!(a.xi_axis.len(), b.xi_axis.len());
        let err = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(err < 1e-10, "engine mismatch {err}");
    }

    #[test]
    fn streaming_matches_matrix() {
        let g = default_grid(1);
        let s = sample(&dilate_constructor(&gauss(), 0.7).unwrap(), &g).unwrap();
        let lat = Lattice::framed(3, 6.1);
        let v = stft(&s, &Window::gauss(1), &lat).unwrap();
        let inner = stft_inner_norms(&s, &Window::gauss(1), &lat, &[1.0, 3.0, f64::INFINITY]).unwrap();
        for m in 0..v.n_xi() {
            let col: Vec<C64> = (0..v.n_x()).map(|j| v.value(j, m)).collect();
            let l1: f64 = col.iter().map(|c| c.norm()).sum::<f64>() * v.dx;
            let l3 = (col.iter().map(|c| c.norm().powi(3)).sum::<f64>() * v.dx).cbrt();
            let li = col.iter().map(|c| c.norm()).fold(0.0, f64::max);
            assert!((inner.rows[0][m] - l1).abs() <= 1e-12 * (1.0 + l1));
            assert!((inner.rows[1][m] - l3).abs() <= 1e-12 * (1.0 + l3));
            assert_eq!(inner.rows[2][m], li);
        }
    }

    #[test]
    fn modulate_translate_examples() {
        let w = Window::gauss(1);
        let f = modulate_translate(&w, &[0.0], &[0.0]);
        assert_eq!(f.eval1(0.3).re, w.eval1(0.3));
        let f = modulate_translate(&w, &[1.0], &[0.0]);
        assert!((f.eval1(1.0) - C64::new(1.0, 0.0)).norm() < 1e-15);
        let f = modulate_translate(&w, &[0.0], &[PI]);
        assert!((f.eval1(1.0) - C64::new(-(-1.0f64).exp(), 0.0)).norm() < 1e-15);
    }

    #[test]
    fn extent_errors() {
        let g = default_grid(1);
        let s = sample(&gauss(), &g).unwrap();
        assert!(matches!(stft(&s, &Window::gauss(1), &Lattice::dense().with_x_extent(13.0)), Err(Error::Resolution(_))));
        assert!(matches!(stft(&s, &Window::gauss(1), &Lattice::dense().with_xi_extent(1000.0)), Err(Error::Resolution(_))));
        assert!(matches!(stft(&s, &Window::bump_psi(1), &Lattice::frequency(1, 64)), Err(Error::Window(_))));
    }

    #[test]
    fn window_norms() {
        let n = Window::gauss(1).norms();
        assert!((n.l1 - PI.sqrt()).abs() < 1e-15);
        let b = Window::bump_psi(1).norms();
        assert!(b.l1 > 0.5 && b.l1 < 1.0);
        let h = Window::bspline(2).norms();
        assert!((h.l2 - 2.0 / 3.0).abs() < 1e-15);
        let p = Window::partition_phi(1).norms();
        assert!(p.l1 > 0.0 && p.l1.is_finite());
    }
}
