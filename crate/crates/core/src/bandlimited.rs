//! Inverse Fourier transforms of compactly supported even profiles,
//! tabulated once by a long FFT of the sampled profile and evaluated by
//! cubic Hermite interpolation.
//!
//! These kernels (Ψ = F⁻¹ψ, Φ = F⁻¹φ) decay faster than any power but only
//! like exp(-c√t), so tables extend to a few thousand units and report
//! their truncation level.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::bump::cutoff;
use crate::fft::{self, Direction, C64};

#[derive(Debug)]
pub struct InverseTable {
    h: f64,
    values: Vec<f64>,
    derivs: Vec<f64>,
    support: f64,
}

impl InverseTable {
    /// Tabulate t ↦ (2π)^{-1} ∫ φ(ξ) e^{itξ} dξ on [0, t_max] with step `h`.
    /// `profile` must be even with support in [-support, support].
    pub fn build(profile: impl Fn(f64) -> f64, support: f64, h: f64, t_max: f64) -> Self {
        let count = (t_max / h).ceil() as usize + 1;
        let p = (4 * count).next_power_of_two();
        let dxi = 2.0 * PI / (p as f64 * h);
        let m_max = ((support / dxi).ceil() as usize).min(p / 2 - 1);
        let mut vals = vec![C64::default(); p];
        let mut ders = vec![C64::default(); p];
        for m in 0..=m_max {
            let xi = m as f64 * dxi;
            let v = profile(xi);
            vals[m] = C64::new(v, 0.0);
            ders[m] = C64::new(0.0, xi * v);
            if m > 0 {
                vals[p - m] = C64::new(v, 0.0);
                ders[p - m] = C64::new(0.0, -xi * v);
            }
        }
        let plan = fft::plan(p, Direction::Inverse);
        plan.process(&mut vals);
        plan.process(&mut ders);
        let w = dxi / (2.0 * PI);
        InverseTable {
            h,
            values: vals[..count].iter().map(|v| v.re * w).collect(),
            derivs: ders[..count].iter().map(|v| v.re * w).collect(),
            support,
        }
    }

    pub fn t_max(&self) -> f64 {
        (self.values.len() - 1) as f64 * self.h
    }

    /// Frequency support radius of the underlying profile.
    pub fn support(&self) -> f64 {
        self.support
    }

    /// Value at t (even extension); zero beyond the table.
    pub fn eval(&self, t: f64) -> f64 {
        let a = t.abs() / self.h;
        let i = a.floor() as usize;
        if i + 1 >= self.values.len() {
            return 0.0;
        }
        let s = a - i as f64;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (d0, d1) = (self.derivs[i] * self.h, self.derivs[i + 1] * self.h);
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * y0 + (s3 - 2.0 * s2 + s) * d0 + (-2.0 * s3 + 3.0 * s2) * y1 + (s3 - s2) * d1
    }

    /// Largest |value| over the last tenth of the table.
    pub fn tail(&self) -> f64 {
        let start = self.values.len() * 9 / 10;
        self.values[start..].iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// ‖·‖_p over ℝ by trapezoid on the table nodes (p = ∞ gives the peak).
    pub fn lp_norm(&self, p: f64) -> f64 {
        if p.is_infinite() {
            return self.values.iter().fold(0.0, |m, v| m.max(v.abs()));
        }
        let body: f64 = self.values.iter().skip(1).map(|v| v.abs().powf(p)).sum();
        ((2.0 * body + self.values[0].abs().powf(p)) * self.h).powf(1.0 / p)
    }
}

/// ψ of the Gabor lattice and packets: 1 on [-1/4, 1/4], 0 off [-1/2, 1/2].
pub fn lattice_psi(xi: f64) -> f64 {
    cutoff(xi, 0.25, 0.5)
}

/// ψ of the translate sums: 1 on |ξ| ≤ 1/2, 0 for |ξ| ≥ 1.
pub fn translate_psi(xi: f64) -> f64 {
    cutoff(xi, 0.5, 1.0)
}

/// φ of the packet window: 1 on [-1/16, 1/16], 0 off [-1/8, 1/8].
pub fn narrow_phi(xi: f64) -> f64 {
    cutoff(xi, 1.0 / 16.0, 0.125)
}

fn partition_g(xi: f64) -> f64 {
    cutoff(xi, 0.25, 0.75)
}

/// Partition window φ = g / Σ_k g(· − k): equal to 1 on [-1/4, 1/4],
/// supported in [-3/4, 3/4], and Σ_k φ(ξ − k) = 1.
pub fn partition_phi(xi: f64) -> f64 {
    let g = partition_g(xi);
    if g == 0.0 {
        return 0.0;
    }
    let k0 = xi.round();
    let total: f64 = (-2..=2).map(|d| partition_g(xi - (k0 + d as f64))).sum();
    g / total
}

static LATTICE_PSI: OnceLock<InverseTable> = OnceLock::new();
static TRANSLATE_PSI: OnceLock<InverseTable> = OnceLock::new();
static PARTITION_PHI: OnceLock<InverseTable> = OnceLock::new();

/// Ψ = F⁻¹ψ for [`lattice_psi`].
pub fn lattice_psi_inverse() -> &'static InverseTable {
    LATTICE_PSI.get_or_init(|| InverseTable::build(lattice_psi, 0.5, 1.0 / 64.0, 4096.0))
}

/// Ψ = F⁻¹ψ for [`translate_psi`].
pub fn translate_psi_inverse() -> &'static InverseTable {
    TRANSLATE_PSI.get_or_init(|| InverseTable::build(translate_psi, 1.0, 1.0 / 64.0, 2048.0))
}

/// Φ = F⁻¹φ for [`partition_phi`].
pub fn partition_phi_inverse() -> &'static InverseTable {
    PARTITION_PHI.get_or_init(|| InverseTable::build(partition_phi, 0.75, 1.0 / 64.0, 2048.0))
}
