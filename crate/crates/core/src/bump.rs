//! Smooth cutoffs built from the exp(-1/x) mollifier.

/// C^∞ step: 0 for x ≤ 0, 1 for x ≥ 1, and `s(x) + s(1-x) = 1` exactly.
pub fn smooth_step(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / x).exp();
        let b = (-1.0 / (1.0 - x)).exp();
        a / (a + b)
    }
}

/// Radial cutoff: 1 on |r| ≤ a, 0 on |r| ≥ b, smooth in between.
pub fn cutoff(r: f64, a: f64, b: f64) -> f64 {
    smooth_step((b - r.abs()) / (b - a))
}

/// The standard bump e^{-1/(1-t²)} on (-1, 1).
pub fn standard_bump(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - t * t)).exp()
    }
}
