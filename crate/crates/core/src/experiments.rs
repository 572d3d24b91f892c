//! Dilation scans with log-log slope fits, the Gaussian closed-form table,
//! envelope constants for the dilation upper bounds and the sharpness
//! cases that pit extremal families against the predicted exponents.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::Serialize;

use crate::besov::{besov_norm, BesovParams, DyadicDecomposition};
use crate::error::{Error, Result};
use crate::extremals::{self, LatticeMode, LatticeSumSpec, EPS};
use crate::fft::fast_len;
use crate::grid::{dilate_constructor, sample, BoxGrid, Func, SampledSpectrum};
use crate::indices::{index_values, Exponent, ExponentPair, Regime};
use crate::norms::{mixed_norms_of_signal, modulation_norms, outer_norm, Discretization};
use crate::stft::{gauss_stft_closed_form, stft_inner_norms_from_spectrum, Lattice, Window};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Fit {
    pub slope: f64,
    pub stderr: f64,
    pub intercept: f64,
}

/// Least squares on (ln λ, ln v).
pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Result<Fit> {
    if points.len() < 3 {
        return Err(Error::Domain(format!("{} points are too few for a slope fit", points.len())));
    }
    if let Some(&(l, v)) = points.iter().find(|&&(l, v)| !(l > 0.0 && v > 0.0 && v.is_finite())) {
        return Err(Error::Domain(format!("cannot fit log-log through ({l}, {v})")));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("all λ values coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let stderr = (ssr / (n - 2.0) / sxx).sqrt();
    Ok(Fit { slope, stderr, intercept })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormKind {
    Modulation,
    Besov,
    MixedOfStft,
    Pairing,
    Ratio,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScanRow {
    pub lambda: f64,
    pub norm: f64,
    pub n: usize,
    pub l: f64,
    pub k: Option<usize>,
    pub tail_bound: Option<f64>,
}

impl ScanRow {
    pub fn new(lambda: f64, norm: f64, grid: &BoxGrid) -> Self {
        ScanRow { lambda, norm, n: grid.points_per_axis(), l: grid.half_width(), k: None, tail_bound: None }
    }

    pub fn with_truncation(mut self, k: usize, tail: f64) -> Self {
        self.k = Some(k);
        self.tail_bound = Some(tail);
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Info,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScalingReport {
    pub family: String,
    pub pq: ExponentPair,
    pub kind: NormKind,
    pub rows: Vec<ScanRow>,
    pub slope: f64,
    pub stderr: f64,
    pub theory: Option<f64>,
    /// Accepted slope interval; either end may be infinite.
    pub window: Option<[f64; 2]>,
    pub verdict: Verdict,
}

impl ScalingReport {
    pub fn new(family: &str, pq: ExponentPair, kind: NormKind, rows: Vec<ScanRow>, theory: Option<f64>, window: Option<[f64; 2]>) -> Result<Self> {
        if rows.len() < 4 {
            return Err(Error::Domain(format!("{family}: a report needs at least 4 λ points, got {}", rows.len())));
        }
        if let Some(r) = rows.iter().find(|r| !(r.norm > 0.0 && r.norm.is_finite())) {
            return Err(Error::Resolution(format!("{family}: norm {} at λ = {}", r.norm, r.lambda)));
        }
        let fit = fit_loglog_slope(&rows.iter().map(|r| (r.lambda, r.norm)).collect::<Vec<_>>())?;
        let verdict = match window {
            Some([lo, hi]) if fit.slope >= lo && fit.slope <= hi => Verdict::Pass,
            Some(_) => Verdict::Fail,
            None => Verdict::Info,
        };
        Ok(ScalingReport { family: family.to_string(), pq, kind, rows, slope: fit.slope, stderr: fit.stderr, theory, window, verdict })
    }

    pub fn passed(&self) -> bool {
        self.verdict != Verdict::Fail
    }

    /// Columns lambda, norm, N, L, K, tail_bound.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["lambda", "norm", "N", "L", "K", "tail_bound"])?;
        for r in &self.rows {
            out.write_record([
                format!("{}", r.lambda),
                format!("{:.15e}", r.norm),
                r.n.to_string(),
                format!("{}", r.l),
                r.k.map(|k| k.to_string()).unwrap_or_default(),
                r.tail_bound.map(|t| format!("{t:.6e}")).unwrap_or_default(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn summary(&self) -> serde_json::Value {
        serde_json::json!({
            "family": self.family,
            "pq": self.pq.to_string(),
            "kind": self.kind,
            "slope": self.slope,
            "stderr": self.stderr,
            "theory": self.theory,
            "window": self.window.map(|[a, b]| [finite_or_null(a), finite_or_null(b)]),
            "verdict": self.verdict,
        })
    }
}

fn finite_or_null(x: f64) -> serde_json::Value {
    if x.is_finite() {
        serde_json::json!(x)
    } else {
        serde_json::Value::Null
    }
}

impl fmt::Display for ScalingReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} slope {:.4} ± {:.4}", self.family, self.pq, self.slope, self.stderr)?;
        if let Some([lo, hi]) = self.window {
            write!(f, " in [{lo:.3}, {hi:.3}]")?;
        }
        write!(f, " {:?}", self.verdict)
    }
}

// ---------------------------------------------------------------------------
// families and their discretizations

/// One-dimensional families with a fixed grid policy for each λ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Family {
    Gauss,
    /// Σ |k|^{-1/q-ε} e^{ikt} e^{-t²}, truncated at frequency λK ≤ omega.
    ModulatedGaussSum { q: Exponent, eps: f64, omega: f64 },
    GaborLattice,
}

/// Everything needed to evaluate one λ.
#[derive(Clone, Debug)]
pub struct Setup {
    pub func: Func,
    pub disc: Discretization,
    pub window: Window,
    pub truncation: Option<LatticeSumSpec>,
}

/// Gaussian scans: time radius and bandwidth of f_λ and the window.
const GAUSS_RADIUS: f64 = 6.1;

impl Family {
    pub fn modulated_default(q: Exponent) -> Self {
        Family::ModulatedGaussSum { q, eps: EPS, omega: 32.0 }
    }

    pub fn label(&self) -> String {
        match self {
            Family::Gauss => "gauss".into(),
            Family::ModulatedGaussSum { q, eps, .. } => format!("modulated_gauss_sum(q={q},eps={eps})"),
            Family::GaborLattice => "gabor_lattice_sum".into(),
        }
    }

    /// Grid, lattice and window for f_λ. `refine` multiplies the number of
    /// grid points at fixed box and fixed frame widths.
    pub fn setup(&self, lambda: f64, refine: usize) -> Result<Setup> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::Domain(format!("λ = {lambda} must be positive")));
        }
        let refine = refine.max(1);
        let fine = |g: BoxGrid| BoxGrid::new(1, g.half_width(), g.points_per_axis() * refine);
        match *self {
            Family::Gauss => {
                let l = (GAUSS_RADIUS / lambda + GAUSS_RADIUS).max(12.0);
                let omega = 2.0 * GAUSS_RADIUS * (lambda + 1.0);
                let dt = (PI / (1.25 * omega)).min(0.125);
                let grid = fine(BoxGrid::with_spacing(1, l, dt)?)?;
                let stride = ((0.125 / dt).floor() as usize).max(1);
                let lattice = Lattice::framed(stride, GAUSS_RADIUS);
                Ok(Setup {
                    func: dilate_constructor(&extremals::gauss(1), lambda)?,
                    disc: Discretization::new(grid, lattice),
                    window: Window::gauss(1),
                    truncation: None,
                })
            }
            Family::ModulatedGaussSum { q, eps, omega } => {
                let k = (omega / lambda).ceil() as usize;
                let (f, spec) = extremals::modulated_gauss_sum(1, q, eps, k)?;
                let l = 6.2 / lambda + 7.0;
                let grid = fine(BoxGrid::with_spacing(1, l, PI / (omega + 14.0))?)?;
                Ok(Setup {
                    func: dilate_constructor(&f, lambda)?,
                    disc: Discretization::new(grid, Lattice::framed(1, 7.0)),
                    window: Window::gauss(1),
                    truncation: Some(spec),
                })
            }
            Family::GaborLattice => {
                let xi_max = 24.0;
                let l = (xi_max + 2.0) / (lambda * lambda) + 8.0;
                let grid = fine(BoxGrid::with_spacing(1, l, (0.125f64).min(PI / (xi_max + 4.0)))?)?;
                let k = (lambda * l).ceil() as usize + 1;
                extremals::check_lattice_covers(k, lambda, &grid)?;
                let spec = LatticeSumSpec::new(0.0, EPS, k, LatticeMode::GaborLattice, f64::INFINITY)?;
                Ok(Setup {
                    func: dilate_constructor(&extremals::gabor_lattice_sum(1, k), lambda)?,
                    disc: Discretization::new(grid, Lattice::framed(1, 1.75).with_xi_extent(xi_max)),
                    window: Window::gauss_scaled(1, 16.0),
                    truncation: Some(LatticeSumSpec { tail_bound: 0.0, ..spec }),
                })
            }
        }
    }

    /// Asymptotic slope of ‖f_λ‖_{M^{p,q}} and the accepted window.
    pub fn expectation(&self, pq: &ExponentPair, regime: Regime) -> Option<(f64, [f64; 2])> {
        let (u, v) = (pq.p.inv(), pq.q.inv());
        match (self, regime) {
            (Family::Gauss, Regime::Expand) => Some((v - 1.0, [v - 1.0 - 0.05, v - 1.0 + 0.05])),
            (Family::Gauss, Regime::Shrink) => Some((-u, [-u - 0.05, -u + 0.05])),
            (Family::GaborLattice, Regime::Shrink) if u >= 0.5 => Some((-2.0 * u, [-2.0 * u - 0.15, -2.0 * u + 0.15])),
            (Family::ModulatedGaussSum { q, eps, .. }, Regime::Shrink) if pq.p.is_infinite() && pq.q == *q => {
                let r = v - 1.0;
                Some((r, [r - 0.1, r + eps + 0.1]))
            }
            _ => None,
        }
    }
}

pub fn regime_of(lambdas: &[f64]) -> Result<Regime> {
    if lambdas.iter().all(|&l| l >= 1.0) {
        Ok(Regime::Expand)
    } else if lambdas.iter().all(|&l| l > 0.0 && l <= 1.0) {
        Ok(Regime::Shrink)
    } else {
        Err(Error::Domain("λ grid must lie entirely in (0, 1] or in [1, ∞)".into()))
    }
}

/// ‖f_λ‖_{M^{p,q}} for several pairs from one STFT pass.
pub fn family_norms(family: &Family, pqs: &[ExponentPair], lambda: f64, refine: usize) -> Result<(Vec<f64>, Setup)> {
    let setup = family.setup(lambda, refine)?;
    let s = sample(&setup.func, &setup.disc.grid).map_err(|e| at_lambda(e, lambda))?;
    let norms = mixed_norms_of_signal(&s, pqs, &setup.window, &setup.disc.lattice).map_err(|e| at_lambda(e, lambda))?;
    Ok((norms, setup))
}

fn at_lambda(e: Error, lambda: f64) -> Error {
    match e {
        Error::Resolution(m) => Error::Resolution(format!("λ = {lambda}: {m}")),
        Error::NonFinite { index, coord } => Error::Resolution(format!("λ = {lambda}: non-finite sample {index} at {coord:?}")),
        other => other,
    }
}

/// One report per pair; every λ is computed once and shared across pairs.
pub fn dilation_scan(family: &Family, pqs: &[ExponentPair], lambdas: &[f64], refine: usize) -> Result<Vec<ScalingReport>> {
    let regime = regime_of(lambdas)?;
    let mut rows: Vec<Vec<ScanRow>> = vec![Vec::new(); pqs.len()];
    for &lambda in lambdas {
        let (norms, setup) = family_norms(family, pqs, lambda, refine)?;
        for (k, v) in norms.into_iter().enumerate() {
            let mut row = ScanRow::new(lambda, v, &setup.disc.grid);
            if let Some(t) = setup.truncation {
                row = row.with_truncation(t.k, t.tail_bound);
            }
            rows[k].push(row);
        }
    }
    pqs.iter()
        .zip(rows)
        .map(|(pq, r)| {
            let exp = family.expectation(pq, regime);
            ScalingReport::new(&family.label(), *pq, NormKind::Modulation, r, exp.map(|e| e.0), exp.map(|e| e.1))
        })
        .collect()
}

pub fn log_grid(from: f64, to: f64, per_octave: usize) -> Vec<f64> {
    let steps = ((to / from).log2().abs() * per_octave as f64).round() as usize;
    (0..=steps).map(|i| from * (to / from).powf(i as f64 / steps as f64)).collect()
}

// ---------------------------------------------------------------------------
// closed form

#[derive(Clone, Debug, Serialize)]
pub struct ClosedFormRow {
    pub pq: ExponentPair,
    pub lambda: f64,
    pub numeric: f64,
    pub exact: f64,
    pub rel_err: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Numeric ‖V_φ φ_λ‖_{L^{p,q}} against the closed form; tolerance 0.5 %
/// (1 % when q = ∞).
pub fn verify_gauss_closed_form(pqs: &[ExponentPair], lambdas: &[f64], disc: &Discretization) -> Result<Vec<ClosedFormRow>> {
    let mut out = Vec::new();
    let dim = disc.grid.dim();
    let w = Window::gauss(dim);
    for &lambda in lambdas {
        let f = dilate_constructor(&extremals::gauss(dim), lambda)?;
        let norms = modulation_norms(&f, pqs, &w, disc)?;
        for (pq, numeric) in pqs.iter().zip(norms) {
            let exact = gauss_stft_closed_form(pq, lambda, dim);
            let rel_err = (numeric - exact).abs() / exact;
            let tolerance = if pq.q.is_infinite() { 0.01 } else { 0.005 };
            out.push(ClosedFormRow { pq: *pq, lambda, numeric, exact, rel_err, tolerance, pass: rel_err <= tolerance });
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// envelopes

/// g(λ) = λ^{exponent} (1+λ²)^{one_plus}.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnvelopeBound {
    pub name: String,
    pub exponent: f64,
    pub one_plus: f64,
}

impl EnvelopeBound {
    pub fn eval(&self, lambda: f64) -> f64 {
        lambda.powf(self.exponent) * (1.0 + lambda * lambda).powf(self.one_plus)
    }

    /// λ^{-n(1/p-1/q+1)} (1+λ²)^{n/2}.
    pub fn gauss_general(pq: &ExponentPair) -> Self {
        EnvelopeBound { name: "gauss-general".into(), exponent: -(pq.p.inv() - pq.q.inv() + 1.0), one_plus: 0.5 }
    }

    /// λ^{-n(2/p-1/q)} (1+λ²)^{n(1/p-1/2)}.
    pub fn gauss_dual(pq: &ExponentPair) -> Self {
        EnvelopeBound { name: "gauss-dual".into(), exponent: -(2.0 * pq.p.inv() - pq.q.inv()), one_plus: pq.p.inv() - 0.5 }
    }

    /// λ^{-n}, shrink regime at (2, ∞).
    pub fn m2inf_shrink() -> Self {
        EnvelopeBound { name: "m2inf-shrink".into(), exponent: -1.0, one_plus: 0.0 }
    }

    /// λ^{-n(2/p-1)}, expand regime for M^{p,1}.
    pub fn p1_expand(pq: &ExponentPair) -> Self {
        EnvelopeBound { name: "p1-expand".into(), exponent: -(2.0 * pq.p.inv() - 1.0), one_plus: 0.0 }
    }

    /// λ^{-2n/p}, shrink regime for M^{p,∞}.
    pub fn pinf_shrink(pq: &ExponentPair) -> Self {
        EnvelopeBound { name: "pinf-shrink".into(), exponent: -2.0 * pq.p.inv(), one_plus: 0.0 }
    }

    /// λ^{s-n/p} for Besov norms with λ ≥ 1.
    pub fn besov(params: &BesovParams) -> Self {
        EnvelopeBound { name: "besov-dilation".into(), exponent: params.s - params.pq.p.inv(), one_plus: 0.0 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EnvelopeCheck {
    pub bound: EnvelopeBound,
    pub family: String,
    pub pq: ExponentPair,
    pub lambdas: Vec<f64>,
    /// max_λ ‖f_λ‖ / (g(λ) ‖f‖) at the base and the doubled grid.
    pub c_hat: f64,
    pub c_hat_refined: f64,
    pub drift: f64,
    pub pass: bool,
}

/// Allowed relative change of Ĉ when the grid is doubled.
pub const ENVELOPE_DRIFT: f64 = 0.2;

/// Ĉ from a norm oracle `norm(λ, refine)`.
pub fn envelope_check_with(
    family: &str,
    pq: ExponentPair,
    bound: EnvelopeBound,
    lambdas: &[f64],
    norm: impl Fn(f64, usize) -> Result<f64>,
) -> Result<EnvelopeCheck> {
    let c = |refine: usize| -> Result<f64> {
        let base = norm(1.0, refine)?;
        let mut best = 0.0f64;
        for &l in lambdas {
            best = best.max(norm(l, refine)? / (bound.eval(l) * base));
        }
        Ok(best)
    };
    let c_hat = c(1)?;
    let c_hat_refined = c(2)?;
    let drift = (c_hat_refined / c_hat - 1.0).abs();
    let pass = c_hat.is_finite() && c_hat_refined.is_finite() && c_hat > 0.0 && drift <= ENVELOPE_DRIFT;
    Ok(EnvelopeCheck { bound, family: family.to_string(), pq, lambdas: lambdas.to_vec(), c_hat, c_hat_refined, drift, pass })
}

pub fn envelope_check(family: &Family, pq: &ExponentPair, bound: EnvelopeBound, lambdas: &[f64]) -> Result<EnvelopeCheck> {
    envelope_check_with(&family.label(), *pq, bound, lambdas, |l, r| Ok(family_norms(family, std::slice::from_ref(pq), l, r)?.0[0]))
}

/// Besov grid for Gauss_λ, λ ≥ 1: half width 32, blocks up to 2^J with
/// 2^{J-1} ≥ 6λ so the spectral tail beyond the covered radius is < 1e-10.
pub fn besov_gauss_grid(lambda: f64, refine: usize) -> Result<BoxGrid> {
    let j = ((12.0 * lambda.max(1.0)).log2().ceil() as i32).max(3);
    let dt = PI / 2f64.powi(j + 1) / 1.05;
    let l = 32.0;
    BoxGrid::new(1, l, fast_len((2.0 * l / dt).ceil() as usize) * refine.max(1))
}

pub fn besov_gauss_norm(params: &BesovParams, lambda: f64, refine: usize) -> Result<(f64, BoxGrid)> {
    let grid = besov_gauss_grid(lambda, refine)?;
    let s = sample(&dilate_constructor(&extremals::gauss(1), lambda)?, &grid)?;
    Ok((besov_norm(&s, params, &DyadicDecomposition::for_grid(&grid)?)?, grid))
}

// ---------------------------------------------------------------------------
// sharpness

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SharpnessCase {
    GaussExpand,
    GaussShrink,
    LatticeShrinkI3,
    PacketI3Star,
    TranslateI1Star,
    BesovEmbedI2Star,
}

impl SharpnessCase {
    pub const ALL: [SharpnessCase; 6] = [
        SharpnessCase::GaussExpand,
        SharpnessCase::GaussShrink,
        SharpnessCase::LatticeShrinkI3,
        SharpnessCase::PacketI3Star,
        SharpnessCase::TranslateI1Star,
        SharpnessCase::BesovEmbedI2Star,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SharpnessCase::GaussExpand => "gauss-expand",
            SharpnessCase::GaussShrink => "gauss-shrink",
            SharpnessCase::LatticeShrinkI3 => "lattice-shrink-I3",
            SharpnessCase::PacketI3Star => "packet-I3star",
            SharpnessCase::TranslateI1Star => "translate-I1star",
            SharpnessCase::BesovEmbedI2Star => "besov-embed-I2star",
        }
    }

    pub fn default_pq(&self) -> ExponentPair {
        match self {
            SharpnessCase::GaussExpand | SharpnessCase::GaussShrink | SharpnessCase::TranslateI1Star => ExponentPair::ints(2, 2),
            SharpnessCase::LatticeShrinkI3 => ExponentPair::ints(1, 0),
            SharpnessCase::PacketI3Star => ExponentPair::ints(4, 1),
            SharpnessCase::BesovEmbedI2Star => ExponentPair::ints(1, 1),
        }
    }
}

impl FromStr for SharpnessCase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SharpnessCase::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Parse(format!("unknown sharpness case '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SuiteOptions {
    pub pq: Option<ExponentPair>,
    /// Besov smoothness of the embedding probe.
    pub s0: f64,
    pub refine: usize,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions { pq: None, s0: 0.5, refine: 1 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteOutcome {
    pub case: SharpnessCase,
    pub report: ScalingReport,
    pub pass: bool,
}

pub fn sharpness_suite(case: SharpnessCase, opts: &SuiteOptions) -> Result<SuiteOutcome> {
    let pq = opts.pq.unwrap_or_else(|| case.default_pq());
    let iv = index_values(&pq);
    let (mu1, mu2) = (f64::from(iv.mu1), f64::from(iv.mu2));
    let (u, v) = (pq.p.inv(), pq.q.inv());
    let report = match case {
        SharpnessCase::GaussExpand => {
            let lambdas = log_grid(4.0, 64.0, 1);
            let mut r = dilation_scan(&Family::Gauss, &[pq], &lambdas, opts.refine)?.remove(0);
            let rate = v - 1.0;
            rewindow(&mut r, Some(rate), [rate - 0.05, mu1 + 0.05]);
            r
        }
        SharpnessCase::GaussShrink => {
            let lambdas = log_grid(1.0 / 64.0, 0.25, 1);
            let mut r = dilation_scan(&Family::Gauss, &[pq], &lambdas, opts.refine)?.remove(0);
            rewindow(&mut r, Some(-u), [mu2 - 0.05, -u + 0.05]);
            r
        }
        SharpnessCase::LatticeShrinkI3 => {
            let lambdas = log_grid(0.5, 1.0 / 16.0, 1);
            let mut r = dilation_scan(&Family::GaborLattice, &[pq], &lambdas, opts.refine)?.remove(0);
            rewindow(&mut r, Some(mu2), [mu2 - 0.15, mu2 + 0.15]);
            r
        }
        SharpnessCase::PacketI3Star => {
            let rate = -(2.0 * u - v);
            let rows = (1..=4).map(|j| packet_row(j, &pq, EPS, opts.refine)).collect::<Result<Vec<_>>>()?;
            ScalingReport::new("fj_packet", pq, NormKind::MixedOfStft, rows, Some(rate), Some([rate - EPS - 0.15, rate + 0.15]))?
        }
        SharpnessCase::TranslateI1Star => {
            let rate = -u;
            let rows = [4.0, 8.0, 16.0, 32.0].iter().map(|&l| translate_row(l, pq.p, EPS, opts.refine)).collect::<Result<Vec<_>>>()?;
            ScalingReport::new("translate_sum", pq, NormKind::Pairing, rows, Some(rate), Some([rate - EPS - 0.15, rate + 0.15]))?
        }
        SharpnessCase::BesovEmbedI2Star => {
            let params = BesovParams { pq, s: opts.s0 };
            let lambdas = [4.0, 8.0, 16.0, 32.0];
            let mut rows = Vec::new();
            for &l in &lambdas {
                let (m, setup) = family_norms(&Family::Gauss, &[pq], l, opts.refine)?;
                let (b, _) = besov_gauss_norm(&params, l, opts.refine)?;
                rows.push(ScanRow::new(l, m[0] / b, &setup.disc.grid));
            }
            let need = (v - 1.0) - (opts.s0 - u) - 0.1;
            ScalingReport::new(&format!("gauss M/B ratio (s0={})", opts.s0), pq, NormKind::Ratio, rows, Some(need + 0.1), Some([need, f64::INFINITY]))?
        }
    };
    let pass = report.passed();
    Ok(SuiteOutcome { case, report, pass })
}

fn rewindow(r: &mut ScalingReport, theory: Option<f64>, window: [f64; 2]) {
    r.theory = theory;
    r.window = Some(window);
    r.verdict = if r.slope >= window[0] && r.slope <= window[1] { Verdict::Pass } else { Verdict::Fail };
}

/// ‖V_Φ[(f^j)_{2^j}]‖_{L^{p,q}} with Φ the narrow window, from the analytic
/// spectrum of the dilated packet. λ column = 2^j.
pub fn packet_row(j: u32, pq: &ExponentPair, eps: f64, refine: usize) -> Result<ScanRow> {
    let hat = extremals::fj_packet_dilated_spectrum(j, pq.p, eps)?;
    let spec = extremals::fj_spec(j, pq.p, eps)?;
    let l = 4096.0;
    let xi_max = spec.k as f64 + 1.0;
    let dxi = PI / l;
    let n = fast_len((2.0 * (xi_max + 1.0) / dxi).ceil() as usize);
    let grid = BoxGrid::new(1, l, n)?;
    let spectrum = SampledSpectrum::from_fn(grid, |c| hat(c[0]));
    let row_stride = ((1.0 / 64.0 / dxi).round() as usize / refine.max(1)).max(1);
    let lattice = Lattice::Frequency { row_stride, x_points: 8192 * refine.max(1), x_extent: None, xi_extent: Some(xi_max) };
    let w = Window::narrow_phi(1);
    let inner = stft_inner_norms_from_spectrum(spectrum, &w, &lattice, &[pq.p.value()])?;
    let norm = outer_norm(&inner.rows[0], inner.xi_cell, pq.q);
    Ok(ScanRow::new(2f64.powi(j as i32), norm, &grid).with_truncation(spec.k, 0.0))
}

/// |⟨f_λ, F⁻¹B⟩| for the translate sum from sampled f_λ, K = 200λ.
pub fn translate_row(lambda: f64, p: Exponent, eps: f64, refine: usize) -> Result<ScanRow> {
    let k = (200.0 * lambda).ceil() as usize;
    let (f, spec) = extremals::translate_sum(p, eps, k, false)?;
    let reach = crate::bandlimited::translate_psi_inverse().t_max();
    let l = (k as f64 + reach + 50.0) / lambda;
    let grid = BoxGrid::with_spacing(1, l, PI / (2.0 * lambda) / refine.max(1) as f64)?;
    let s = sample(&dilate_constructor(&f, lambda)?, &grid)?;
    let pairing = extremals::bspline_pairing(&s);
    // Σ_{ℓ>K} ℓ^{-a} sinc²(ℓ/2λ) ≤ 4λ² Σ_{ℓ>K} ℓ^{-a-2}, both signs, over 2πλ
    let tail = 8.0 * lambda * lambda * (k as f64).powf(-spec.a - 1.0) / (spec.a + 1.0) / (2.0 * PI * lambda);
    Ok(ScanRow::new(lambda, pairing, &grid).with_truncation(k, tail))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pq(p: &str, q: &str) -> ExponentPair {
        ExponentPair::parse(p, q).unwrap()
    }

    #[test]
    fn fit_examples() {
        let pts: Vec<(f64, f64)> = [1.0, 2.0, 3.0, 5.0].iter().map(|&l: &f64| (l, l.powi(3))).collect();
        let f = fit_loglog_slope(&pts).unwrap();
        assert!((f.slope - 3.0).abs() < 1e-12 && f.stderr < 1e-12);
        let pts: Vec<(f64, f64)> = [0.1, 0.7, 4.0].iter().map(|&l: &f64| (l, 2.0 * l.powf(-1.5))).collect();
        assert!((fit_loglog_slope(&pts).unwrap().slope + 1.5).abs() < 1e-12);
        let pts: Vec<(f64, f64)> = [4.0, 8.0, 16.0, 32.0].iter().map(|&l: &f64| (l, (1.0 + l * l).sqrt() / l)).collect();
        assert!(fit_loglog_slope(&pts).unwrap().slope.abs() < 0.05);
        assert!(fit_loglog_slope(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0)]).is_err());
        assert!(fit_loglog_slope(&[(1.0, 1.0), (2.0, 1.0)]).is_err());
    }

    #[test]
    fn closed_form_examples() {
        let disc = Discretization::dense(1).unwrap();
        let rows = verify_gauss_closed_form(&[pq("2", "2"), pq("2", "inf")], &[1.0], &disc).unwrap();
        assert!((rows[0].exact - PI).abs() < 1e-12);
        assert!(rows.iter().all(|r| r.pass), "{rows:?}");
        let rows = verify_gauss_closed_form(&[pq("1", "1")], &[2.0], &disc).unwrap();
        assert!(rows[0].pass, "{rows:?}");
    }

    #[test]
    fn gauss_scan_both_regimes() {
        let up = dilation_scan(&Family::Gauss, &[pq("2", "2")], &[1.0, 2.0, 4.0, 8.0, 16.0], 1).unwrap();
        assert!((up[0].slope + 0.5).abs() < 0.05, "{}", up[0]);
        let down = dilation_scan(&Family::Gauss, &[pq("2", "2")], &[1.0, 0.5, 0.25, 0.125, 0.0625], 1).unwrap();
        assert!((down[0].slope + 0.5).abs() < 0.05, "{}", down[0]);
        assert!(dilation_scan(&Family::Gauss, &[pq("2", "2")], &[0.5, 1.0, 2.0, 4.0], 1).is_err());
    }

    #[test]
    fn unit_lambda_is_the_undilated_norm() {
        let pqs = [pq("2", "2"), pq("1", "inf")];
        let (a, setup) = family_norms(&Family::Gauss, &pqs, 1.0, 1).unwrap();
        let s = sample(&extremals::gauss(1), &setup.disc.grid).unwrap();
        let b = mixed_norms_of_signal(&s, &pqs, &setup.window, &setup.disc.lattice).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn trivial_envelope() {
        let bound = EnvelopeBound { name: "self".into(), exponent: 1.5, one_plus: 0.0 };
        let c = envelope_check_with("power", pq("2", "2"), bound, &[0.5, 1.0, 2.0], |l, _| Ok(3.0 * l.powf(1.5))).unwrap();
        assert!((c.c_hat - 1.0).abs() < 1e-12 && c.pass);
    }

    #[test]
    fn case_names_round_trip() {
        for c in SharpnessCase::ALL {
            assert_eq!(c.name().parse::<SharpnessCase>().unwrap(), c);
        }
        assert!("nope".parse::<SharpnessCase>().is_err());
    }

    #[test]
    fn report_rejects_short_or_bad_rows() {
        let g = BoxGrid::default_for(1).unwrap();
        let rows: Vec<ScanRow> = [1.0, 2.0, 4.0].iter().map(|&l| ScanRow::new(l, l, &g)).collect();
        assert!(ScalingReport::new("x", pq("2", "2"), NormKind::Modulation, rows, None, None).is_err());
        let rows: Vec<ScanRow> = [1.0, 2.0, 4.0, 8.0].iter().map(|&l| ScanRow::new(l, if l == 4.0 { f64::NAN } else { l }, &g)).collect();
        assert!(ScalingReport::new("x", pq("2", "2"), NormKind::Modulation, rows, None, None).is_err());
    }
}
