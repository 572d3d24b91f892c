//! Test functions whose dilations attain the sharp exponents: the Gauss
//! function, lattice sums with |k|^{-a} coefficients, Gabor-lattice bumps,
//! f^j packets, the B-spline and a compact window with φ̂ ≥ 1 on [-2, 2]ⁿ.

use std::f64::consts::PI;

use serde::Serialize;

use crate::bandlimited::{lattice_psi, lattice_psi_inverse, translate_psi, translate_psi_inverse};
use crate::bump::standard_bump;
use crate::error::{Error, Result};
use crate::fft::C64;
use crate::grid::{fourier, BoxGrid, Func, SampledSignal};
use crate::indices::Exponent;
use crate::stft::{Window, WindowLabel, WindowNorms};

/// Default ε of the sharpness experiments.
pub const EPS: f64 = 0.25;

/// Relative coefficient tail targeted by [`LatticeSumSpec::truncate`].
pub const COEFF_TAIL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LatticeMode {
    ModulatedGauss,
    GaborLattice,
    Translate,
    TranslateModulated,
    Packet,
}

/// Coefficients |k|^{-a} on 0 < |k| ≤ K, with the size of what was cut.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LatticeSumSpec {
    pub a: f64,
    pub eps: f64,
    pub k: usize,
    pub mode: LatticeMode,
    /// ℓ^r norm of the dropped coefficients, r = `tail_exponent` (n = 1).
    pub tail_bound: f64,
    pub tail_exponent: f64,
}

/// Σ_{|k|>K} |k|^{-s} over ℤ∖{0}, by the integral bound 2K^{1-s}/(s-1).
fn power_tail(k: usize, s: f64) -> f64 {
    if s <= 1.0 {
        f64::INFINITY
    } else {
        2.0 * (k as f64).powf(1.0 - s) / (s - 1.0)
    }
}

impl LatticeSumSpec {
    pub fn new(a: f64, eps: f64, k: usize, mode: LatticeMode, tail_exponent: f64) -> Result<Self> {
        if k < 1 {
            return Err(Error::Domain("truncation radius K must be at least 1".into()));
        }
        if !(eps > 0.0) {
            return Err(Error::Domain(format!("ε = {eps} must be positive")));
        }
        let tail_bound = if tail_exponent.is_infinite() {
            (k as f64 + 1.0).powf(-a)
        } else {
            power_tail(k, a * tail_exponent).powf(1.0 / tail_exponent)
        };
        Ok(LatticeSumSpec { a, eps, k, mode, tail_bound, tail_exponent })
    }

    /// Smallest K with Σ_{|k|>K}|k|^{-a} < 1e-6·head, capped at `cap`.
    /// When the coefficients are not summable the cap is the truncation.
    pub fn truncate(a: f64, eps: f64, cap: usize, mode: LatticeMode, tail_exponent: f64) -> Result<Self> {
        let mut k = cap.max(1);
        if a > 1.0 {
            // the head is at least 2 (the k = ±1 terms)
            let need = (COEFF_TAIL * (a - 1.0)).powf(1.0 / (1.0 - a)).ceil();
            if need < cap as f64 {
                k = need.max(1.0) as usize;
            }
        }
        let spec = Self::new(a, eps, k, mode, tail_exponent)?;
        if a > 1.0 && power_tail(k, a) > COEFF_TAIL * spec.head() {
            log::warn!("K = {k} leaves a coefficient tail {:.2e} above the {COEFF_TAIL:.0e} target", power_tail(k, a));
        }
        Ok(spec)
    }

    pub fn coefficient(&self, k: f64) -> f64 {
        k.abs().powf(-self.a)
    }

    /// Σ_{0<|k|≤K} |k|^{-a}.
    pub fn head(&self) -> f64 {
        2.0 * (1..=self.k).map(|k| (k as f64).powf(-self.a)).sum::<f64>()
    }
}

pub fn gauss(dim: usize) -> Func {
    Func::real("gauss", dim, |t| (-t.iter().map(|x| x * x).sum::<f64>()).exp())
}

/// Σ_{0<|k|≤K} |k|^{-n/q-ε} e^{ik·t} e^{-|t|²}.
pub fn modulated_gauss_sum(dim: usize, q: Exponent, eps: f64, k: usize) -> Result<(Func, LatticeSumSpec)> {
    let a = dim as f64 * q.inv() + eps;
    let spec = LatticeSumSpec::new(a, eps, k, LatticeMode::ModulatedGauss, q.value())?;
    let coeffs: Vec<f64> = (1..=k).map(|m| (m as f64).powf(-a)).collect();
    let kk = k as i64;
    let f = move |t: &[f64]| -> C64 {
        let g = (-t.iter().map(|x| x * x).sum::<f64>()).exp();
        if g == 0.0 {
            return C64::default();
        }
        match t.len() {
            1 => {
                let s: f64 = coeffs.iter().enumerate().map(|(i, c)| 2.0 * c * ((i + 1) as f64 * t[0]).cos()).sum();
                C64::new(g * s, 0.0)
            }
            _ => {
                let mut s = C64::default();
                for k0 in -kk..=kk {
                    for k1 in -kk..=kk {
                        if k0 == 0 && k1 == 0 {
                            continue;
                        }
                        let r = ((k0 * k0 + k1 * k1) as f64).sqrt();
                        s += C64::from_polar(r.powf(-a), k0 as f64 * t[0] + k1 as f64 * t[1]);
                    }
                }
                s * g
            }
        }
    };
    Ok((Func::new(format!("modulated_gauss_sum(q={q},eps={eps},K={k})"), dim, f), spec))
}

/// ⟨f_λ, φ⟩ = Σ c_k √(π/(1+λ²)) e^{-λ²k²/(4(1+λ²))} for the one-dimensional
/// modulated Gauss sum.
pub fn modulated_gauss_pairing(spec: &LatticeSumSpec, lambda: f64) -> f64 {
    let l2 = lambda * lambda;
    let amp = (PI / (1.0 + l2)).sqrt();
    2.0 * (1..=spec.k).map(|k| spec.coefficient(k as f64) * amp * (-l2 * (k * k) as f64 / (4.0 * (1.0 + l2))).exp()).sum::<f64>()
}

/// Σ_{|k|≤K} e^{ik·t} ψ(t − k) with the compact bump ψ (1 on [-1/4, 1/4],
/// 0 off [-1/2, 1/2]); at most one term is nonzero at any t.
pub fn gabor_lattice_sum(dim: usize, k: usize) -> Func {
    let kk = k as f64;
    Func::new(format!("gabor_lattice_sum(K={k})"), dim, move |t| {
        let mut amp = 1.0;
        let mut phase = 0.0;
        for &x in t {
            let c = x.round();
            if c.abs() > kk {
                return C64::default();
            }
            amp *= lattice_psi(x - c);
            phase += c * x;
        }
        if amp == 0.0 {
            C64::default()
        } else {
            C64::from_polar(amp, phase)
        }
    })
}

/// Errors unless the lattice |k| ≤ K covers the dilated box, i.e. λL ≤ K.
pub fn check_lattice_covers(k: usize, lambda: f64, grid: &BoxGrid) -> Result<()> {
    let need = lambda * grid.half_width();
    if need > k as f64 + 0.5 {
        return Err(Error::Domain(format!("lattice |k| ≤ {k} does not cover the dilated box (needs {need:.1})")));
    }
    Ok(())
}

/// [e^{8it}] Σ_{0<|ℓ|≤K} |ℓ|^{-1/p-ε} Ψ(t − ℓ), Ψ = F⁻¹ψ with ψ = 1 on
/// |ξ| ≤ 1/2 and supp ψ ⊂ [-1, 1]. One dimension.
pub fn translate_sum(p: Exponent, eps: f64, k: usize, modulated: bool) -> Result<(Func, LatticeSumSpec)> {
    let a = p.inv() + eps;
    let mode = if modulated { LatticeMode::TranslateModulated } else { LatticeMode::Translate };
    let spec = LatticeSumSpec::new(a, eps, k, mode, p.value())?;
    let tab = translate_psi_inverse();
    let reach = tab.t_max();
    let kk = k as f64;
    let coeffs: Vec<f64> = (0..=k).map(|l| if l == 0 { 0.0 } else { (l as f64).powf(-a) }).collect();
    let f = move |t: &[f64]| -> C64 {
        let x = t[0];
        let lo = (x - reach).ceil().max(-kk) as i64;
        let hi = (x + reach).floor().min(kk) as i64;
        let mut s = 0.0;
        for l in lo..=hi {
            s += coeffs[l.unsigned_abs() as usize] * tab.eval(x - l as f64);
        }
        if modulated {
            C64::from_polar(s, 8.0 * x)
        } else {
            C64::new(s, 0.0)
        }
    };
    Ok((Func::new(format!("translate_sum(p={p},eps={eps},K={k},modulated={modulated})"), 1, f), spec))
}

/// f̂ of [`translate_sum`]: ψ(ξ − m) Σ c_ℓ e^{-iℓ(ξ − m)} with m = 8 when modulated.
pub fn translate_sum_spectrum(spec: &LatticeSumSpec) -> impl Fn(f64) -> C64 + Send + Sync + 'static {
    let s = *spec;
    let shift = if s.mode == LatticeMode::TranslateModulated { 8.0 } else { 0.0 };
    move |xi: f64| {
        let u = xi - shift;
        let w = translate_psi(u);
        if w == 0.0 {
            return C64::default();
        }
        C64::new(w * 2.0 * (1..=s.k).map(|l| s.coefficient(l as f64) * (l as f64 * u).cos()).sum::<f64>(), 0.0)
    }
}

/// Hat function Π(1 − |t_i|)₊.
pub fn bspline2(dim: usize) -> Func {
    Func::real("bspline2", dim, |t| t.iter().map(|x| (1.0 - x.abs()).max(0.0)).product())
}

/// F⁻¹B(t) = Π (2π)^{-1} (sin(t_i/2)/(t_i/2))².
pub fn bspline2_inverse(dim: usize) -> Func {
    Func::real("bspline2_inverse", dim, |t| {
        t.iter()
            .map(|x| {
                let h = x / 2.0;
                let s = if h == 0.0 { 1.0 } else { h.sin() / h };
                s * s / (2.0 * PI)
            })
            .product()
    })
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        x.sin() / x
    }
}

/// ⟨f_λ, F⁻¹B⟩ for the plain translate sum with λ ≥ 2 (ψ(·/λ) = 1 on supp B):
/// (2π)^{-1} λ^{-1} Σ c_ℓ sinc²(ℓ/(2λ)).
pub fn translate_pairing_exact(spec: &LatticeSumSpec, lambda: f64) -> f64 {
    2.0 * (1..=spec.k).map(|l| spec.coefficient(l as f64) * sinc(l as f64 / (2.0 * lambda)).powi(2)).sum::<f64>() / (2.0 * PI * lambda)
}

/// ⟨f, F⁻¹B⟩ = (2π)^{-1} ∫ f̂(ξ) B(ξ) dξ from sampled f (one dimension).
pub fn bspline_pairing(f: &SampledSignal) -> f64 {
    let spec = fourier(f);
    let g = *spec.grid();
    let s: C64 = spec.values().iter().enumerate().map(|(i, v)| v * (1.0 - g.freq(i).abs()).max(0.0)).sum();
    (s * spec.cell() / (2.0 * PI)).norm()
}

/// Coefficients of f^j: 2^{-j/p} |k|^{-1/p-ε} on 0 < |k| ≤ 2^j.
pub fn fj_spec(j: u32, p: Exponent, eps: f64) -> Result<LatticeSumSpec> {
    if !(1..=6).contains(&j) {
        return Err(Error::Domain(format!("packet index j = {j} outside 1..=6")));
    }
    LatticeSumSpec::new(p.inv() + eps, eps, 1 << j, LatticeMode::Packet, p.value())
}

fn packet_weight(j: u32, p: Exponent) -> f64 {
    2f64.powf(-(j as f64) * p.inv())
}

/// f^j(t) = 2^{-j/p} Σ_{0<|k|≤2^j} |k|^{-1/p-ε} e^{ikt/2^j} Ψ(t/2^j − k), with Ψ
/// the inverse transform of the compact bump. One dimension.
pub fn fj_packet(j: u32, p: Exponent, eps: f64) -> Result<Func> {
    let spec = fj_spec(j, p, eps)?;
    let w = packet_weight(j, p);
    let scale = 2f64.powi(j as i32);
    let tab = lattice_psi_inverse();
    let kk = spec.k as i64;
    Ok(Func::new(format!("fj_packet(j={j},p={p},eps={eps})"), 1, move |t| {
        let s = t[0] / scale;
        let mut acc = C64::default();
        for k in -kk..=kk {
            if k != 0 {
                acc += C64::from_polar(spec.coefficient(k as f64) * tab.eval(s - k as f64), k as f64 * s);
            }
        }
        acc * w
    }))
}

/// (f^j)_{2^j}(t) = f^j(2^j t) = 2^{-j/p} Σ |k|^{-a} e^{ikt} Ψ(t − k).
pub fn fj_packet_dilated(j: u32, p: Exponent, eps: f64) -> Result<Func> {
    let f = fj_packet(j, p, eps)?;
    crate::grid::dilate_constructor(&f, 2f64.powi(j as i32))
}

/// Spectrum of the dilated packet: 2^{-j/p} Σ |k|^{-a} e^{-ik(ξ−k)} ψ(ξ − k).
pub fn fj_packet_dilated_spectrum(j: u32, p: Exponent, eps: f64) -> Result<impl Fn(f64) -> C64 + Send + Sync + 'static> {
    let spec = fj_spec(j, p, eps)?;
    let w = packet_weight(j, p);
    Ok(move |xi: f64| {
        let c = xi.round();
        let mut acc = C64::default();
        for k in [c - 1.0, c, c + 1.0] {
            if k == 0.0 || k.abs() > spec.k as f64 {
                continue;
            }
            let d = xi - k;
            let b = lattice_psi(d);
            if b != 0.0 {
                acc += C64::from_polar(spec.coefficient(k) * b, -d * k);
            }
        }
        acc * w
    })
}

/// φ = c·b(8t) with b the standard bump, supported in [-1/8, 1/8]ⁿ and
/// c = (cos(1/4) ∫b(8t)dt)^{-1}; the minimum of φ̂ on [-2, 2] is checked.
pub fn compact_phi(dim: usize) -> Result<Window> {
    let n = 4000;
    let h = 0.25 / n as f64;
    let nodes: Vec<(f64, f64)> = (0..=n)
        .map(|i| {
            let t = -0.125 + i as f64 * h;
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            (t, w * standard_bump(8.0 * t))
        })
        .collect();
    let integral: f64 = nodes.iter().map(|(_, v)| v).sum::<f64>() * h;
    let c = 1.0 / ((0.25f64).cos() * integral);
    let hat = |xi: f64| c * nodes.iter().map(|(t, v)| v * (xi * t).cos()).sum::<f64>() * h;
    let min = (0..=400).map(|i| hat(-2.0 + i as f64 * 0.01)).fold(f64::INFINITY, f64::min);
    if !(min >= 1.0) {
        return Err(Error::Window(format!("compact window has min φ̂ = {min} on [-2, 2]")));
    }
    let profile = move |t: f64| c * standard_bump(8.0 * t);
    let l1 = integral * c;
    let l2 = (nodes.iter().map(|(_, v)| v * v).sum::<f64>() * h).sqrt() * c;
    let norms = WindowNorms { l1, l2, linf: c * standard_bump(0.0) };
    Window::from_profiles(WindowLabel::BumpPhiCompact, dim, profile, 0.125, None, norms)
}

/// φ̂(ξ) of [`compact_phi`] along one axis, by quadrature.
pub fn compact_phi_hat(w: &Window, xi: f64) -> f64 {
    let n = 4000;
    let h = 0.25 / n as f64;
    (0..=n)
        .map(|i| {
            let t = -0.125 + i as f64 * h;
            let e = if i == 0 || i == n { 0.5 } else { 1.0 };
            e * w.eval1(t) * (xi * t).cos()
        })
        .sum::<f64>()
        * h
}
