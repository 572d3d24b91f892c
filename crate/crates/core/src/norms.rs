//! Mixed L^{p,q} norms of V (inner p over x, outer q over ξ), the
//! modulation norm pipeline and the discrete M^{2,∞} seminorm
//! sup_k ‖(M_kΦ) ∗ f‖₂.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{fourier, sample, BoxGrid, Func, SampledSignal};
use crate::indices::{Exponent, ExponentPair};
use crate::par;
use crate::stft::{stft_inner_norms, Lattice, TimeFreqMatrix, Window, WindowLabel};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MixedNormSpec {
    pub pq: ExponentPair,
}

impl From<ExponentPair> for MixedNormSpec {
    fn from(pq: ExponentPair) -> Self {
        MixedNormSpec { pq }
    }
}

fn lp_sum(values: impl Iterator<Item = f64>, cell: f64, p: Exponent) -> f64 {
    if p.is_infinite() {
        return values.fold(0.0, f64::max);
    }
    let p = p.value();
    let s: f64 = if p == 1.0 { values.sum() } else { values.map(|v| v.powf(p)).sum() };
    (s * cell).powf(1.0 / p)
}

/// Outer ℓ^q over rows that already carry their inner norms.
pub fn outer_norm(inner: &[f64], xi_cell: f64, q: Exponent) -> f64 {
    lp_sum(inner.iter().copied(), xi_cell, q)
}

pub fn mixed_norm(v: &TimeFreqMatrix, spec: &MixedNormSpec) -> f64 {
    let (nx, nxi) = (v.n_x(), v.n_xi());
    let inner: Vec<f64> = par::map_range(nxi, |m| lp_sum((0..nx).map(|j| v.value(j, m).norm()), v.x_cell(), spec.pq.p));
    outer_norm(&inner, v.xi_cell(), spec.pq.q)
}

/// Sampling grid and STFT lattice.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Discretization {
    pub grid: BoxGrid,
    pub lattice: Lattice,
}

impl Discretization {
    pub fn new(grid: BoxGrid, lattice: Lattice) -> Self {
        Discretization { grid, lattice }
    }

    /// Default grid for the dimension with the dense STFT.
    pub fn dense(dim: usize) -> Result<Self> {
        Ok(Discretization { grid: BoxGrid::default_for(dim)?, lattice: Lattice::dense() })
    }
}

/// Norms ‖V_w s‖_{L^{p,q}} for several pairs from a single pass over V.
pub fn mixed_norms_of_signal(s: &SampledSignal, pqs: &[ExponentPair], w: &Window, lattice: &Lattice) -> Result<Vec<f64>> {
    let mut ps: Vec<f64> = Vec::new();
    for pq in pqs {
        let p = pq.p.value();
        if !ps.contains(&p) {
            ps.push(p);
        }
    }
    let inner = stft_inner_norms(s, w, lattice, &ps)?;
    let out = pqs
        .iter()
        .map(|pq| {
            let k = ps.iter().position(|&p| p == pq.p.value()).expect("p collected above");
            outer_norm(&inner.rows[k], inner.xi_cell, pq.q)
        })
        .collect::<Vec<_>>();
    if let Some(bad) = out.iter().position(|v| !v.is_finite()) {
        return Err(Error::Resolution(format!("non-finite mixed norm for {}", pqs[bad])));
    }
    Ok(out)
}

pub fn modulation_norms(f: &Func, pqs: &[ExponentPair], w: &Window, disc: &Discretization) -> Result<Vec<f64>> {
    let s = sample(f, &disc.grid)?;
    mixed_norms_of_signal(&s, pqs, w, &disc.lattice)
}

pub fn modulation_norm(f: &Func, pq: &ExponentPair, w: &Window, disc: &Discretization) -> Result<f64> {
    Ok(modulation_norms(f, std::slice::from_ref(pq), w, disc)?[0])
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeminormReport {
    pub value: f64,
    pub k_max: i64,
    pub argmax: Vec<i64>,
}

/// Relative |f̂|² mass outside the cube [-K-1, K+1]ⁿ.
const K_MASS: f64 = 1e-10;

/// sup_k ‖(M_kΦ) ∗ f‖₂ over |k|_∞ ≤ K_max, computed as (2π)^{-n/2}‖φ(·−k) f̂‖₂.
pub fn m2inf_seminorm_detail(f: &SampledSignal, phi: &Window) -> Result<SeminormReport> {
    if phi.label() != WindowLabel::PartitionPhi || phi.dim() != f.grid().dim() {
        return Err(Error::Window(format!(
            "the discrete M^{{2,∞}} seminorm needs the {}-d partition window, got {:?} in dimension {}",
            f.grid().dim(),
            phi.label(),
            phi.dim()
        )));
    }
    let spec = fourier(f);
    let grid = *spec.grid();
    let dim = grid.dim();
    let vals = spec.values();
    let total: f64 = vals.iter().map(|v| v.norm_sqr()).sum();
    if total == 0.0 {
        return Ok(SeminormReport { value: 0.0, k_max: 0, argmax: vec![0; dim] });
    }
    // energy by max-coordinate radius, then the smallest admissible K
    let mut radial: Vec<(f64, f64)> = (0..vals.len())
        .map(|i| {
            let c = grid.freq_coords(i);
            (c[..dim].iter().fold(0.0f64, |m, x| m.max(x.abs())), vals[i].norm_sqr())
        })
        .collect();
    radial.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut outside = 0.0;
    let mut k_max = 0i64;
    for &(r, e) in &radial {
        if outside + e > K_MASS * total {
            k_max = (r - 1.0).ceil().max(0.0) as i64;
            break;
        }
        outside += e;
    }
    let nyq = grid.nyquist();
    if k_max as f64 + 0.75 > nyq {
        return Err(Error::Resolution(format!("lattice sup needs |k| ≤ {k_max} but the grid resolves |ξ| ≤ {nyq:.3}")));
    }
    let side = (2 * k_max + 1) as usize;
    let ks: Vec<Vec<i64>> = (0..side.pow(dim as u32))
        .map(|i| match dim {
            1 => vec![i as i64 - k_max],
            _ => vec![(i / side) as i64 - k_max, (i % side) as i64 - k_max],
        })
        .collect();
    let cell = spec.cell();
    let norms = par::map(&ks, |k| {
        let mut s = 0.0;
        for (i, v) in vals.iter().enumerate() {
            let c = grid.freq_coords(i);
            let mut w = 1.0;
            for a in 0..dim {
                w *= crate::bandlimited::partition_phi(c[a] - k[a] as f64);
            }
            if w != 0.0 {
                s += (w * v.norm()).powi(2);
            }
        }
        (s * cell).sqrt() * (2.0 * PI).powf(-(dim as f64) / 2.0)
    });
    let (best, value) = norms.iter().enumerate().fold((0, 0.0), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) });
    Ok(SeminormReport { value, k_max, argmax: ks[best].clone() })
}

pub fn m2inf_discrete_seminorm(f: &SampledSignal, phi: &Window) -> Result<f64> {
    Ok(m2inf_seminorm_detail(f, phi)?.value)
}

/// seminorm ≤ ‖V_Φ f‖_{L^{2,∞}} ≤ 5ⁿ‖Φ‖₁·seminorm.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Sandwich {
    pub seminorm: f64,
    pub stft_norm: f64,
    pub upper: f64,
    pub holds: bool,
}

/// Checks the chain with Φ the partition window. The middle term uses the
/// frequency engine with rows at every FFT bin.
pub fn seminorm_sandwich(f: &SampledSignal) -> Result<Sandwich> {
    let phi = Window::partition_phi(f.grid().dim());
    let seminorm = m2inf_discrete_seminorm(f, &phi)?;
    let lattice = Lattice::frequency(1, 256);
    let pq = ExponentPair::ints(2, 0);
    let stft_norm = mixed_norms_of_signal(f, &[pq], &phi, &lattice)?[0];
    let upper = 5f64.powi(f.grid().dim() as i32) * phi.norms().l1 * seminorm;
    let tol = 1e-9 * upper.max(1e-300);
    Ok(Sandwich { seminorm, stft_norm, upper, holds: seminorm <= stft_norm + tol && stft_norm <= upper + tol })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::dilate_constructor;
    use crate::stft::{gauss_stft_closed_form, stft};
    use crate::C64;

    fn pq(p: &str, q: &str) -> ExponentPair {
        ExponentPair::parse(p, q).unwrap()
    }

    fn gauss() -> Func {
        Func::real("gauss", 1, |t| (-t[0] * t[0]).exp())
    }

    #[test]
    fn ones_on_unit_cells() {
        let v = TimeFreqMatrix::from_parts(1, vec![0.0, 1.0, 2.0], vec![0.0], 1.0 / 3.0, 1.0, vec![C64::new(1.0, 0.0); 3]).unwrap();
        for (p, q) in [("1", "1"), ("2", "inf"), ("inf", "3"), ("3/2", "4")] {
            assert!((mixed_norm(&v, &pq(p, q).into()) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn gaussian_examples() {
        let disc = Discretization::dense(1).unwrap();
        let w = Window::gauss(1);
        let v = modulation_norm(&gauss(), &pq("2", "2"), &w, &disc).unwrap();
        assert!((v / PI - 1.0).abs() < 5e-3);
        let f2 = dilate_constructor(&gauss(), 2.0).unwrap();
        let v = modulation_norm(&f2, &pq("1", "1"), &w, &disc).unwrap();
        // π^{3/2}·2·λ^{-1}(1+λ²)^{1/2} at λ=2
        let exact = PI.powf(1.5) * 5f64.sqrt();
        assert!((exact - gauss_stft_closed_form(&pq("1", "1"), 2.0, 1)).abs() < 1e-12);
        assert!((v / exact - 1.0).abs() < 5e-3, "{v} vs {exact}");
        assert_eq!(modulation_norm(&Func::zero(1), &pq("2", "2"), &w, &disc).unwrap(), 0.0);
    }

    #[test]
    fn matrix_and_streaming_agree() {
        let g = BoxGrid::default_for(1).unwrap();
        let s = sample(&gauss(), &g).unwrap();
        let w = Window::gauss(1);
        let v = stft(&s, &w, &Lattice::dense()).unwrap();
        let pqs = [pq("2", "2"), pq("1", "inf"), pq("inf", "1"), pq("4", "3/2")];
        let streamed = mixed_norms_of_signal(&s, &pqs, &w, &Lattice::dense()).unwrap();
        for (k, x) in pqs.iter().enumerate() {
            let direct = mixed_norm(&v, &(*x).into());
            assert!((direct - streamed[k]).abs() <= 1e-12 * direct, "{x}");
        }
        let c = 2.5;
        assert!((mixed_norm(&v.scaled(c), &pqs[3].into()) - c * mixed_norm(&v, &pqs[3].into())).abs() < 1e-12 * c);
    }

    #[test]
    fn plancherel_for_stft() {
        let g = BoxGrid::default_for(1).unwrap();
        let f = Func::new("packet", 1, |t| C64::from_polar((-(t[0] - 0.5).powi(2) * 0.8).exp(), 2.0 * t[0]));
        let s = sample(&f, &g).unwrap();
        let w = Window::gauss(1);
        let v = mixed_norms_of_signal(&s, &[pq("2", "2")], &w, &Lattice::dense()).unwrap()[0];
        let want = (2.0 * PI).sqrt() * s.lp_norm(Exponent::int(2).unwrap()) * w.norms().l2;
        assert!((v / want - 1.0).abs() < 1e-6);
    }

    #[test]
    fn seminorm_for_narrow_spectrum() {
        // f̂ = e^{-ξ²/(4a)}-like but cut inside |ξ| ≤ 1/4, where φ = 1.
        let g = BoxGrid::new(1, 400.0, 8192).unwrap();
        let f = Func::real("sinc", 1, |t| {
            let x = t[0] / 8.0;
            if x == 0.0 {
                1.0
            } else {
                (x.sin() / x).powi(2)
            }
        });
        let s = sample(&f, &g).unwrap();
        let r = m2inf_seminorm_detail(&s, &Window::partition_phi(1)).unwrap();
        let spec = fourier(&s);
        let full = spec.l2_norm() / (2.0 * PI).sqrt();
        assert_eq!(r.argmax, vec![0]);
        assert!((r.value / full - 1.0).abs() < 1e-3, "{} vs {full}", r.value);
    }

    #[test]
    fn seminorm_rejects_other_windows() {
        let s = sample(&gauss(), &BoxGrid::default_for(1).unwrap()).unwrap();
        assert!(matches!(m2inf_discrete_seminorm(&s, &Window::gauss(1)), Err(Error::Window(_))));
        let z = sample(&Func::zero(1), &BoxGrid::default_for(1).unwrap()).unwrap();
        assert_eq!(m2inf_discrete_seminorm(&z, &Window::partition_phi(1)).unwrap(), 0.0);
    }

    #[test]
    fn sandwich_holds() {
        let g = BoxGrid::new(1, 256.0, 8192).unwrap();
        let gauss = sample(&gauss(), &g).unwrap();
        let two = sample(&Func::new("two bumps", 1, |t| C64::new((-(t[0] - 3.0).powi(2)).exp(), 0.0) + C64::from_polar((-(t[0] + 2.0).powi(2) / 2.0).exp(), 5.0 * t[0])), &g).unwrap();
        for s in [gauss, two] {
            let r = seminorm_sandwich(&s).unwrap();
            assert!(r.holds, "{r:?}");
        }
    }
}
