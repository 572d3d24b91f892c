//! Invariants of the index calculus and the norm machinery under random
//! inputs.

use modspace::besov::{besov_from_blocks, BesovParams};
use modspace::experiments::fit_loglog_slope;
use modspace::grid::{sample, BoxGrid, Func};
use modspace::indices::{classify_region, index_values, mu_table, nu_table, Exponent, ExponentPair, Real, Region};
use modspace::norms::{mixed_norm, mixed_norms_of_signal, outer_norm};
use modspace::stft::{Lattice, TimeFreqMatrix, Window};
use modspace::C64;
use proptest::prelude::*;

fn exact_pair() -> impl Strategy<Value = ExponentPair> {
    (1i64..=24).prop_flat_map(|d| (0..=d, 0..=d, Just(d))).prop_map(|(a, b, d)| ExponentPair::from_recips(Real::ratio(a, d), Real::ratio(b, d)).unwrap())
}

fn approx_pair() -> impl Strategy<Value = (f64, f64)> {
    (0.0..=1.0f64, 0.0..=1.0f64)
}

fn pair_from(u: f64, v: f64) -> ExponentPair {
    ExponentPair::from_recips(Real::Approx(u), Real::Approx(v)).unwrap()
}

fn exponent() -> impl Strategy<Value = Exponent> {
    prop_oneof![Just(Exponent::infinity()), (1i64..=8, 1i64..=8).prop_filter_map("p >= 1", |(n, d)| Exponent::ratio(n.max(d), d).ok())]
}

proptest! {
    #[test]
    fn duality(pq in exact_pair()) {
        let iv = index_values(&pq);
        let cj = index_values(&pq.conjugate());
        prop_assert_eq!(iv.nu2, -cj.nu1);
        prop_assert_eq!(iv.mu1 + cj.mu2, -Real::one());
    }

    #[test]
    fn tables_agree_with_closed_forms(pq in exact_pair()) {
        let iv = index_values(&pq);
        let regions = classify_region(&pq);
        prop_assert!(Region::ALL.iter().any(|r| !r.starred() && regions.contains(*r)));
        prop_assert!(Region::ALL.iter().any(|r| r.starred() && regions.contains(*r)));
        for r in regions.members() {
            let (nu, mu) = if r.starred() { (iv.nu1, iv.mu1) } else { (iv.nu2, iv.mu2) };
            prop_assert_eq!(nu_table(r, &pq), Some(nu));
            prop_assert_eq!(mu_table(r, &pq), Some(mu));
        }
    }

    /// |value(x) − value(y)| ≤ 2|x − y|₁ for all four indices.
    #[test]
    fn indices_are_lipschitz((u1, v1) in approx_pair(), (u2, v2) in approx_pair()) {
        let a = index_values(&pair_from(u1, v1));
        let b = index_values(&pair_from(u2, v2));
        let d = (u1 - u2).abs() + (v1 - v2).abs();
        for (x, y) in [(a.nu1, b.nu1), (a.nu2, b.nu2), (a.mu1, b.mu1), (a.mu2, b.mu2)] {
            prop_assert!((x.value() - y.value()).abs() <= 2.0 * d + 1e-12);
        }
    }

    #[test]
    fn exponents_round_trip(n in 1i64..200, d in 1i64..200) {
        let e = Exponent::ratio(n.max(d), d).unwrap();
        let back: Exponent = e.to_string().parse().unwrap();
        prop_assert_eq!(back, e);
        prop_assert_eq!(e.conjugate().conjugate(), e);
    }

    #[test]
    fn slope_of_power_law(a in -3.0..3.0f64, c in 0.01..100.0f64) {
        let pts: Vec<(f64, f64)> = [0.5, 1.0, 3.0, 7.0, 20.0].iter().map(|&l: &f64| (l, c * l.powf(a))).collect();
        let fit = fit_loglog_slope(&pts).unwrap();
        prop_assert!((fit.slope - a).abs() < 1e-10);
    }

    /// On unit cells the mixed norm is an ℓ^{p,q} norm, so it cannot grow
    /// with p or with q.
    #[test]
    fn mixed_norm_nesting(vals in prop::collection::vec(-3.0..3.0f64, 24), p1 in exponent(), p2 in exponent(), q in exponent()) {
        let values = vals.chunks(2).map(|c| C64::new(c[0], c[1])).collect();
        let v = TimeFreqMatrix::from_parts(1, (0..4).map(f64::from).collect(), (0..3).map(f64::from).collect(), 1.0, 1.0, values).unwrap();
        let (small, large) = if p1.inv() >= p2.inv() { (p1, p2) } else { (p2, p1) };
        let a = mixed_norm(&v, &ExponentPair::new(small, q).into());
        let b = mixed_norm(&v, &ExponentPair::new(large, q).into());
        prop_assert!(b <= a * (1.0 + 1e-12) + 1e-300);
        let a = mixed_norm(&v, &ExponentPair::new(q, small).into());
        let b = mixed_norm(&v, &ExponentPair::new(q, large).into());
        prop_assert!(b <= a * (1.0 + 1e-12) + 1e-300);
    }

    #[test]
    fn outer_norm_is_homogeneous(vals in prop::collection::vec(0.0..5.0f64, 1..40), c in 0.0..10.0f64, q in exponent()) {
        let scaled: Vec<f64> = vals.iter().map(|v| c * v).collect();
        let a = outer_norm(&scaled, 0.3, q);
        let b = c * outer_norm(&vals, 0.3, q);
        prop_assert!((a - b).abs() <= 1e-12 * b.max(1e-300));
    }

    #[test]
    fn besov_monotone_in_s_and_q(blocks in prop::collection::vec(0.0..2.0f64, 3..10), s in 0.0..2.0f64, ds in 0.0..1.0f64, q1 in exponent(), q2 in exponent()) {
        let pq = |q| ExponentPair::new(Exponent::int(2).unwrap(), q);
        let lo = besov_from_blocks(&blocks, &BesovParams { pq: pq(q1), s });
        let hi = besov_from_blocks(&blocks, &BesovParams { pq: pq(q1), s: s + ds });
        prop_assert!(hi >= lo * (1.0 - 1e-12));
        let (small, large) = if q1.inv() >= q2.inv() { (q1, q2) } else { (q2, q1) };
        let a = besov_from_blocks(&blocks, &BesovParams { pq: pq(small), s });
        let b = besov_from_blocks(&blocks, &BesovParams { pq: pq(large), s });
        prop_assert!(b <= a * (1.0 + 1e-12) + 1e-300);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// ‖c f‖ = |c|‖f‖ through the whole STFT pipeline.
    #[test]
    fn modulation_norm_is_homogeneous(re in -3.0..3.0f64, im in -3.0..3.0f64, shift in -1.0..1.0f64, freq in -2.0..2.0f64, p in exponent(), q in exponent()) {
        let g = BoxGrid::new(1, 10.0, 512).unwrap();
        let f = Func::new("packet", 1, move |t| C64::from_polar((-(t[0] - shift).powi(2)).exp(), freq * t[0]));
        let c = C64::new(re, im);
        let w = Window::gauss(1);
        let pq = ExponentPair::new(p, q);
        let a = mixed_norms_of_signal(&sample(&f.scaled(c), &g).unwrap(), &[pq], &w, &Lattice::framed(2, 6.0)).unwrap()[0];
        let b = mixed_norms_of_signal(&sample(&f, &g).unwrap(), &[pq], &w, &Lattice::framed(2, 6.0)).unwrap()[0];
        prop_assert!((a - c.norm() * b).abs() <= 1e-10 * b);
    }
}
