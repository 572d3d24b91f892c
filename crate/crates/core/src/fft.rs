//! Thin helpers over rustfft: shared plans, n-d transforms on row-major
//! data, and smooth transform lengths.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub type C64 = Complex64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

pub fn plan(n: usize, dir: Direction) -> Arc<dyn Fft<f64>> {
    let mut planner = FftPlanner::new();
    match dir {
        Direction::Forward => planner.plan_fft_forward(n),
        Direction::Inverse => planner.plan_fft_inverse(n),
    }
}

/// Smallest even 2^a·3^b·5^c that is ≥ n.
pub fn fast_len(n: usize) -> usize {
    let mut m = n.max(2);
    loop {
        if m.is_multiple_of(2) {
            let mut r = m;
            for f in [2, 3, 5] {
                while r.is_multiple_of(f) {
                    r /= f;
                }
            }
            if r == 1 {
                return m;
            }
        }
        m += 1;
    }
}

/// Unnormalized transform of a row-major `dim`-cube with side `n`.
pub fn fft_nd(data: &mut [C64], n: usize, dim: usize, fft: &Arc<dyn Fft<f64>>, scratch: &mut Vec<C64>) {
    debug_assert_eq!(data.len(), n.pow(dim as u32));
    scratch.resize(fft.get_inplace_scratch_len().max(n), C64::default());
    match dim {
        1 => fft.process_with_scratch(data, scratch),
        2 => {
            for row in data.chunks_exact_mut(n) {
                fft.process_with_scratch(row, scratch);
            }
            let mut col = vec![C64::default(); n];
            for c in 0..n {
                for r in 0..n {
                    col[r] = data[r * n + c];
                }
                fft.process_with_scratch(&mut col, scratch);
                for r in 0..n {
                    data[r * n + c] = col[r];
                }
            }
        }
        _ => unreachable!("dimension checked by BoxGrid"),
    }
}
