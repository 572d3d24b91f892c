//! Littlewood–Paley blocks φ₀ = η, φ_j = ψ(·/2^j) and the Besov norm
//! (Σ_j 2^{jsq} ‖F⁻¹[φ_j f̂]‖_p^q)^{1/q}.
//!
//! η = h(|ξ|; 1, 2) and ψ(ξ) = h(ξ) − h(2ξ), so the partial sums telescope
//! to h(ξ/2^J) and the partition identity holds up to rounding.

use serde::Serialize;

use crate::bump::cutoff;
use crate::error::{Error, Result};
use crate::experiments::{NormKind, ScalingReport, ScanRow};
use crate::grid::{dilate_constructor, fourier, inverse_fourier, lp_norm_values, sample, BoxGrid, Func, SampledSignal, SampledSpectrum};
use crate::indices::ExponentPair;
use crate::par;

/// Relative |f̂|² mass allowed beyond the last fully covered block.
pub const BAND_TAIL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DyadicDecomposition {
    j_max: usize,
}

pub fn build_dyadic_partition(j_max: usize) -> Result<DyadicDecomposition> {
    if j_max < 3 {
        return Err(Error::Domain(format!("J_max = {j_max} is below 3")));
    }
    Ok(DyadicDecomposition { j_max })
}

impl DyadicDecomposition {
    /// Largest J with 2^{J+1} below the grid's Nyquist frequency.
    pub fn for_grid(grid: &BoxGrid) -> Result<Self> {
        let nyq = grid.nyquist();
        let mut j = 0usize;
        while 2f64.powi(j as i32 + 2) <= nyq {
            j += 1;
        }
        if j < 3 {
            return Err(Error::Resolution(format!("grid resolves |ξ| ≤ {nyq:.3}, too coarse for three dyadic blocks")));
        }
        build_dyadic_partition(j)
    }

    pub fn j_max(&self) -> usize {
        self.j_max
    }

    pub fn eta(r: f64) -> f64 {
        cutoff(r, 1.0, 2.0)
    }

    pub fn psi(r: f64) -> f64 {
        cutoff(r, 1.0, 2.0) - cutoff(2.0 * r, 1.0, 2.0)
    }

    /// φ_j at radius r = |ξ|.
    pub fn block(&self, j: usize, r: f64) -> f64 {
        if j == 0 {
            Self::eta(r)
        } else {
            Self::psi(r / 2f64.powi(j as i32))
        }
    }

    /// Radius below which η + Σ_{j≤J} ψ(·/2^j) = 1.
    pub fn covered_radius(&self) -> f64 {
        2f64.powi(self.j_max as i32 - 1)
    }

    /// max |1 − Σ_j φ_j| over the grid frequencies with |ξ| ≤ 2^{J−1}.
    pub fn defect(&self, grid: &BoxGrid) -> f64 {
        let r0 = self.covered_radius();
        let defects = par::map_range(grid.len(), |i| {
            let r = radius(grid.freq_coords(i), grid.dim());
            if r > r0 {
                return 0.0;
            }
            let s: f64 = (0..=self.j_max).map(|j| self.block(j, r)).sum();
            (1.0 - s).abs()
        });
        defects.into_iter().fold(0.0, f64::max)
    }
}

fn radius(c: [f64; 2], dim: usize) -> f64 {
    c[..dim].iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BesovParams {
    pub pq: ExponentPair,
    pub s: f64,
}

fn check_block(grid: &BoxGrid, dec: &DyadicDecomposition, j: usize) -> Result<()> {
    if j > dec.j_max {
        return Err(Error::Domain(format!("block {j} beyond J_max = {}", dec.j_max)));
    }
    if 2f64.powi(j as i32 + 1) > grid.nyquist() {
        return Err(Error::Resolution(format!("block {j} reaches |ξ| = {} beyond Nyquist {:.3}", 2f64.powi(j as i32 + 1), grid.nyquist())));
    }
    Ok(())
}

fn block_from_spectrum(spec: &SampledSpectrum, dec: &DyadicDecomposition, j: usize) -> SampledSignal {
    let dim = spec.grid().dim();
    inverse_fourier(&spec.multiplied(|c| dec.block(j, radius([c[0], if dim == 2 { c[1] } else { 0.0 }], dim))))
}

/// Φ_j ∗ f = F⁻¹[φ_j f̂].
pub fn lp_block(f: &SampledSignal, dec: &DyadicDecomposition, j: usize) -> Result<SampledSignal> {
    check_block(f.grid(), dec, j)?;
    Ok(block_from_spectrum(&fourier(f), dec, j))
}

/// ‖Φ_j ∗ f‖_p for j = 0..=J_max.
pub fn block_norms(f: &SampledSignal, pq: &ExponentPair, dec: &DyadicDecomposition) -> Result<Vec<f64>> {
    let grid = *f.grid();
    check_block(&grid, dec, dec.j_max)?;
    let spec = fourier(f);
    let tail = spec.tail_mass(dec.covered_radius());
    if tail > BAND_TAIL {
        return Err(Error::Resolution(format!(
            "spectral mass {tail:.2e} beyond |ξ| = {} exceeds {BAND_TAIL:.0e}; refine the grid",
            dec.covered_radius()
        )));
    }
    let p = pq.p.value();
    Ok(par::map_range(dec.j_max + 1, |j| {
        let b = block_from_spectrum(&spec, dec, j);
        lp_norm_values(b.values(), grid.cell(), p)
    }))
}

pub fn besov_from_blocks(blocks: &[f64], params: &BesovParams) -> f64 {
    let weighted = blocks.iter().enumerate().map(|(j, b)| 2f64.powf(j as f64 * params.s) * b);
    if params.pq.q.is_infinite() {
        weighted.fold(0.0, f64::max)
    } else {
        let q = params.pq.q.value();
        weighted.map(|v| v.powf(q)).sum::<f64>().powf(1.0 / q)
    }
}

pub fn besov_norm(f: &SampledSignal, params: &BesovParams, dec: &DyadicDecomposition) -> Result<f64> {
    Ok(besov_from_blocks(&block_norms(f, &params.pq, dec)?, params))
}

/// Same half width, spacing divided by max(λ, 1).
pub fn scaled_grid(base: &BoxGrid, lambda: f64) -> Result<BoxGrid> {
    BoxGrid::with_spacing(base.dim(), base.half_width(), base.spacing() / lambda.max(1.0))
}

/// ‖f_λ‖_{B_s^{p,q}} for λ ≥ 1 on the grids `grid_for(λ)`; the report's
/// window is the dilation bound's exponent s − n/p (upper side only).
pub fn besov_dilation_check(f: &Func, params: &BesovParams, lambdas: &[f64], grid_for: impl Fn(f64) -> Result<BoxGrid>) -> Result<ScalingReport> {
    if params.s <= 0.0 {
        return Err(Error::Domain(format!("smoothness s = {} must be positive", params.s)));
    }
    if let Some(l) = lambdas.iter().find(|&&l| l < 1.0) {
        return Err(Error::Domain(format!("λ = {l} is below 1")));
    }
    let rows = lambdas
        .iter()
        .map(|&lambda| {
            let grid = grid_for(lambda)?;
            let s = sample(&dilate_constructor(f, lambda)?, &grid)?;
            let dec = DyadicDecomposition::for_grid(&grid)?;
            Ok(ScanRow::new(lambda, besov_norm(&s, params, &dec)?, &grid))
        })
        .collect::<Result<Vec<_>>>()?;
    let theory = params.s - f.dim() as f64 / params.pq.p.value();
    ScalingReport::new(f.label(), params.pq, NormKind::Besov, rows, Some(theory), Some([f64::NEG_INFINITY, theory + 0.1]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fft::C64;
    use crate::indices::Exponent;

    fn pq(p: &str, q: &str) -> ExponentPair {
        ExponentPair::parse(p, q).unwrap()
    }

    fn band_limited(grid: &BoxGrid) -> SampledSignal {
        let spec = SampledSpectrum::from_fn(*grid, |c| C64::from_polar(cutoff(c[0], 0.2, 0.5), 0.7 * c[0]));
        inverse_fourier(&spec)
    }

    #[test]
    fn partition_identity() {
        let dec = build_dyadic_partition(6).unwrap();
        assert_eq!((0..=6).map(|j| dec.block(j, 0.0)).sum::<f64>(), 1.0);
        for i in 0..=2000 {
            let r = i as f64 * 0.002;
            if r <= 0.5 || r >= 2.0 {
                assert_eq!(DyadicDecomposition::psi(r), 0.0, "ψ({r})");
            }
        }
        let g = BoxGrid::default_for(1).unwrap();
        let dec = DyadicDecomposition::for_grid(&g).unwrap();
        assert!(dec.defect(&g) <= 1e-10);
        assert!(build_dyadic_partition(2).is_err());
    }

    #[test]
    fn disjoint_distant_blocks() {
        let dec = build_dyadic_partition(8).unwrap();
        for i in 0..20000 {
            let r = i as f64 * 0.03;
            for j in 0..=8 {
                for k in j + 2..=8 {
                    assert_eq!(dec.block(j, r) * dec.block(k, r), 0.0);
                }
            }
        }
    }

    #[test]
    fn band_limited_blocks() {
        let g = BoxGrid::new(1, 64.0, 2048).unwrap();
        let f = band_limited(&g);
        let dec = DyadicDecomposition::for_grid(&g).unwrap();
        let b0 = lp_block(&f, &dec, 0).unwrap();
        let err = b0.values().iter().zip(f.values()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-12);
        for j in 1..=dec.j_max() {
            let b = lp_block(&f, &dec, j).unwrap();
            assert!(b.values().iter().all(|v| v.norm() < 1e-14));
        }
        for (p, q) in [("1", "1"), ("2", "inf"), ("3", "2")] {
            let params = BesovParams { pq: pq(p, q), s: 1.3 };
            let want = f.lp_norm(params.pq.p);
            assert!((besov_norm(&f, &params, &dec).unwrap() - want).abs() < 1e-8 * want);
        }
    }

    #[test]
    fn blocks_sum_back() {
        let g = BoxGrid::default_for(1).unwrap();
        let f = sample(&Func::real("gauss", 1, |t| (-t[0] * t[0] * 3.0).exp()), &g).unwrap();
        let dec = DyadicDecomposition::for_grid(&g).unwrap();
        let mut acc = vec![C64::default(); g.len()];
        for j in 0..=dec.j_max() {
            for (a, v) in acc.iter_mut().zip(lp_block(&f, &dec, j).unwrap().values()) {
                *a += v;
            }
        }
        let err = acc.iter().zip(f.values()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-8);
        let z = sample(&Func::zero(1), &g).unwrap();
        assert!(lp_block(&z, &dec, 2).unwrap().values().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn block_limits() {
        let g = BoxGrid::new(1, 12.0, 64).unwrap();
        let f = sample(&Func::real("gauss", 1, |t| (-t[0] * t[0]).exp()), &g).unwrap();
        let dec = build_dyadic_partition(5).unwrap();
        assert!(matches!(lp_block(&f, &dec, 5), Err(Error::Resolution(_))));
        assert!(matches!(lp_block(&f, &dec, 6), Err(Error::Domain(_))));
    }

    #[test]
    fn q_infinity_is_block_max_and_s_is_monotone() {
        let g = BoxGrid::default_for(1).unwrap();
        let f = sample(&Func::real("gauss", 1, |t| (-4.0 * t[0] * t[0]).exp()), &g).unwrap();
        let dec = DyadicDecomposition::for_grid(&g).unwrap();
        let blocks = block_norms(&f, &pq("1", "inf"), &dec).unwrap();
        let b = besov_norm(&f, &BesovParams { pq: pq("1", "inf"), s: 0.0 }, &dec).unwrap();
        assert_eq!(b, blocks.iter().cloned().fold(0.0, f64::max));
        let mut last = 0.0;
        for s in [-0.5, 0.0, 0.5, 1.0, 2.0] {
            let v = besov_norm(&f, &BesovParams { pq: pq("2", "2"), s }, &dec).unwrap();
            assert!(v >= last);
            last = v;
        }
    }

    #[test]
    fn unresolved_input_is_rejected() {
        let g = BoxGrid::new(1, 12.0, 128).unwrap();
        let f = sample(&Func::real("narrow", 1, |t| (-9.0 * t[0] * t[0]).exp()), &g).unwrap();
        let dec = DyadicDecomposition::for_grid(&g).unwrap();
        let params = BesovParams { pq: ExponentPair::new(Exponent::int(2).unwrap(), Exponent::int(2).unwrap()), s: 1.0 };
        assert!(matches!(besov_norm(&f, &params, &dec), Err(Error::Resolution(_))));
    }

    #[test]
    fn dilation_check_for_gauss() {
        let f = Func::real("gauss", 1, |t| (-t[0] * t[0]).exp());
        let params = BesovParams { pq: pq("2", "2"), s: 1.0 };
        let base = BoxGrid::default_for(1).unwrap();
        let r = besov_dilation_check(&f, &params, &[1.0, 2.0, 4.0, 8.0], |l| scaled_grid(&base, l)).unwrap();
        assert!(r.slope <= 0.5 + 0.1, "{}", r.slope);
        let s = sample(&f, &base).unwrap();
        let direct = besov_norm(&s, &params, &DyadicDecomposition::for_grid(&base).unwrap()).unwrap();
        assert!((r.rows[0].norm - direct).abs() < 1e-12 * direct);
        let twice = besov_dilation_check(&f.scaled(C64::new(2.0, 0.0)), &params, &[1.0, 2.0, 4.0, 8.0], |l| scaled_grid(&base, l)).unwrap();
        for (a, b) in r.rows.iter().zip(&twice.rows) {
            assert!((b.norm - 2.0 * a.norm).abs() < 1e-12 * b.norm);
        }
        assert!(besov_dilation_check(&f, &BesovParams { s: 0.0, ..params }, &[1.0, 2.0, 4.0, 8.0], |l| scaled_grid(&base, l)).is_err());
    }
}
