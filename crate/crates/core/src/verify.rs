//! The acceptance run: ten numbered criteria, each producing a pass flag,
//! a one-line detail and machine-readable metrics. `Mode::Quick` uses
//! coarser λ grids and fewer probes; `Mode::Full` is the complete run.

use std::f64::consts::PI;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use serde_json::json;

use crate::besov::{besov_norm, BesovParams, DyadicDecomposition};
use crate::error::Result;
use crate::experiments::{
    besov_gauss_norm, dilation_scan, envelope_check, envelope_check_with, log_grid, sharpness_suite, verify_gauss_closed_form, EnvelopeBound,
    EnvelopeCheck, Family, ScalingReport, SharpnessCase, SuiteOptions,
};
use crate::grid::{inverse_fourier, sample, BoxGrid, Func, SampledSpectrum};
use crate::indices::{
    classify_region, default_test_matrix, index_values, mu_table, nu_table, rational_grid, Exponent, ExponentPair, Real, Region,
};
use crate::norms::{mixed_norms_of_signal, seminorm_sandwich, Discretization};
use crate::report::{self, Formats};
use crate::stft::{stft, Lattice, Window};
use crate::{bump, par, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Quick,
    Full,
}

impl Mode {
    /// Wall-clock budget for the whole run in seconds.
    pub fn budget(self) -> f64 {
        match self {
            Mode::Quick => 120.0,
            Mode::Full => 1200.0,
        }
    }

    fn per_octave(self) -> usize {
        match self {
            Mode::Quick => 1,
            Mode::Full => 2,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CriterionResult {
    pub id: u32,
    pub title: String,
    pub pass: bool,
    pub detail: String,
    pub metrics: serde_json::Value,
    pub seconds: f64,
    #[serde(skip)]
    pub reports: Vec<ScalingReport>,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub mode: Mode,
    pub workers: usize,
    pub seconds: f64,
    pub results: Vec<CriterionResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.results.iter().all(|r| r.pass)
    }

    pub fn get(&self, id: u32) -> Option<&CriterionResult> {
        self.results.iter().find(|r| r.id == id)
    }

    /// `summary.json` plus CSV/JSON/SVG for every slope report.
    pub fn write(&self, dir: &Path, formats: Formats) -> Result<()> {
        for r in &self.results {
            for (i, rep) in r.reports.iter().enumerate() {
                let stem = format!("c{:02}_{:02}_{}", r.id, i, report::file_stem(&format!("{} {}", rep.family, rep.pq)));
                report::write_report(dir, &stem, rep, formats)?;
            }
        }
        report::write_json(&dir.join("summary.json"), &serde_json::to_value(self)?)?;
        Ok(())
    }
}

struct Outcome {
    pass: bool,
    detail: String,
    metrics: serde_json::Value,
    reports: Vec<ScalingReport>,
}

fn timed(id: u32, title: &str, f: impl FnOnce() -> Result<Outcome>) -> CriterionResult {
    let t = Instant::now();
    let (pass, detail, metrics, reports) = match f() {
        Ok(o) => (o.pass, o.detail, o.metrics, o.reports),
        Err(e) => (false, format!("error: {e}"), json!({ "error": e.to_string() }), Vec::new()),
    };
    log::info!("criterion {id} {}: {detail}", if pass { "pass" } else { "FAIL" });
    CriterionResult { id, title: title.to_string(), pass, detail, metrics, seconds: t.elapsed().as_secs_f64(), reports }
}

fn pairs(list: &[(&str, &str)]) -> Vec<ExponentPair> {
    list.iter().map(|(p, q)| ExponentPair::parse(p, q).expect("literal exponents")).collect()
}

fn report_metrics(rs: &[ScalingReport]) -> serde_json::Value {
    serde_json::Value::Array(rs.iter().map(ScalingReport::summary).collect())
}

fn worst_report(rs: &[ScalingReport]) -> String {
    let failed: Vec<String> = rs.iter().filter(|r| !r.passed()).map(|r| r.to_string()).collect();
    if failed.is_empty() {
        format!("{} slope fits inside their windows", rs.len())
    } else {
        format!("{} of {} outside: {}", failed.len(), rs.len(), failed.join("; "))
    }
}

fn closed_form() -> Result<Outcome> {
    let pqs = pairs(&[("1", "1"), ("2", "2"), ("3", "2"), ("2", "inf"), ("inf", "inf")]);
    let rows = verify_gauss_closed_form(&pqs, &[0.5, 1.0, 2.0, 4.0], &Discretization::dense(1)?)?;
    let worst = rows.iter().max_by(|a, b| (a.rel_err / a.tolerance).total_cmp(&(b.rel_err / b.tolerance))).expect("rows");
    Ok(Outcome {
        pass: rows.iter().all(|r| r.pass),
        detail: format!("{} cells, worst rel. err {:.2e} at {} λ={} (tol {})", rows.len(), worst.rel_err, worst.pq, worst.lambda, worst.tolerance),
        metrics: serde_json::to_value(&rows)?,
        reports: Vec::new(),
    })
}

/// Largest relative change of any norm when N is doubled.
fn refinement_drift(family: &Family, pqs: &[ExponentPair], lambdas: &[f64], base: &[ScalingReport]) -> Result<f64> {
    let fine = dilation_scan(family, pqs, lambdas, 2)?;
    let mut drift = 0.0f64;
    for (a, b) in base.iter().zip(&fine) {
        for (x, y) in a.rows.iter().zip(&b.rows) {
            drift = drift.max((y.norm / x.norm - 1.0).abs());
        }
    }
    Ok(drift)
}

/// Slope reports, plus the refinement check with tolerance `tol` in full mode.
fn scan_outcome(mode: Mode, family: &Family, pqs: &[ExponentPair], grids: &[Vec<f64>], tol: f64) -> Result<Outcome> {
    let mut reports = Vec::new();
    let mut drift = None;
    for lambdas in grids {
        let r = dilation_scan(family, pqs, lambdas, 1)?;
        if mode == Mode::Full {
            let d = refinement_drift(family, pqs, lambdas, &r)?;
            drift = Some(drift.unwrap_or(0.0f64).max(d));
        }
        reports.extend(r);
    }
    let dev = reports.iter().map(|r| (r.slope - r.theory.unwrap_or(f64::NAN)).abs()).fold(0.0, f64::max);
    let mut detail = format!("{}; max |slope − theory| = {dev:.4}", worst_report(&reports));
    if let Some(d) = drift {
        detail.push_str(&format!("; refinement drift {d:.1e} (tol {tol})"));
    }
    Ok(Outcome {
        pass: reports.iter().all(ScalingReport::passed) && drift.is_none_or(|d| d < tol),
        detail,
        metrics: json!({ "reports": report_metrics(&reports), "refinement_drift": drift, "refinement_tol": tol }),
        reports,
    })
}

fn gauss_slopes(mode: Mode) -> Result<Outcome> {
    let per = mode.per_octave();
    let grids = [log_grid(4.0, 64.0, per), log_grid(1.0 / 64.0, 0.25, per)];
    scan_outcome(mode, &Family::Gauss, &default_test_matrix(), &grids, 0.005)
}

fn lattice_slopes(mode: Mode) -> Result<Outcome> {
    let pqs = pairs(&[("1", "inf"), ("2", "inf")]);
    scan_outcome(mode, &Family::GaborLattice, &pqs, &[log_grid(0.5, 1.0 / 16.0, mode.per_octave())], 0.02)
}

fn modulated_sum(mode: Mode) -> Result<Outcome> {
    let q = Exponent::int(2)?;
    let pq = ExponentPair::new(Exponent::infinity(), q);
    scan_outcome(mode, &Family::modulated_default(q), &[pq], &[log_grid(0.5, 1.0 / 16.0, mode.per_octave())], 0.02)
}

fn index_calculus() -> Result<Outcome> {
    let mut mismatches = Vec::new();
    let mut checks = 0usize;
    let grid = rational_grid(8);
    for pq in &grid {
        let iv = index_values(pq);
        let conj = index_values(&pq.conjugate());
        checks += 1;
        if !(iv.nu2 == -conj.nu1 && iv.nu1.is_exact() && iv.nu2.is_exact()) {
            mismatches.push(format!("duality at {pq}"));
        }
        let regions = classify_region(pq);
        let unstarred = Region::ALL.iter().any(|r| !r.starred() && regions.contains(*r));
        let starred = Region::ALL.iter().any(|r| r.starred() && regions.contains(*r));
        checks += 1;
        if !(unstarred && starred) {
            mismatches.push(format!("cover at {pq}"));
        }
        for r in regions.members() {
            let (nu, mu): (Real, Real) = if r.starred() { (iv.nu1, iv.mu1) } else { (iv.nu2, iv.mu2) };
            checks += 2;
            if nu_table(r, pq) != Some(nu) {
                mismatches.push(format!("ν table {r} at {pq}"));
            }
            if mu_table(r, pq) != Some(mu) {
                mismatches.push(format!("μ table {r} at {pq}"));
            }
        }
    }
    Ok(Outcome {
        pass: mismatches.is_empty() && grid.len() == 81,
        detail: if mismatches.is_empty() {
            format!("{} points, {checks} exact identities", grid.len())
        } else {
            format!("{} mismatches: {}", mismatches.len(), mismatches.join(", "))
        },
        metrics: json!({ "points": grid.len(), "checks": checks, "mismatches": mismatches }),
        reports: Vec::new(),
    })
}

/// Plancherel, shift covariance of |V|, partition defect and the Besov
/// norm of a band-limited signal.
fn integrity() -> Result<Outcome> {
    let g = BoxGrid::default_for(1)?;
    let w = Window::gauss(1);
    let packet = Func::new("packet", 1, |t| C64::from_polar((-(t[0] - 0.5).powi(2) * 0.8).exp(), 2.0 * t[0]));
    let s = sample(&packet, &g)?;
    let l22 = mixed_norms_of_signal(&s, &[ExponentPair::ints(2, 2)], &w, &Lattice::dense())?[0];
    let want = (2.0 * PI).sqrt() * s.lp_norm(Exponent::int(2)?) * w.norms().l2;
    let plancherel = (l22 / want - 1.0).abs();

    // T_a M_b with a and b on the grid and frequency lattices.
    let (shift_x, shift_xi) = (16usize, 8usize);
    let a = shift_x as f64 * g.spacing();
    let b = shift_xi as f64 * PI / g.half_width();
    let moved = Func::new("moved packet", 1, move |t| C64::from_polar(1.0, b * t[0]) * packet.eval1(t[0] - a));
    let v0 = stft(&s, &w, &Lattice::dense())?;
    let v1 = stft(&sample(&moved, &g)?, &w, &Lattice::dense())?;
    let mut cov = 0.0f64;
    for jx in 0..v0.n_x() - shift_x {
        for m in 0..v0.n_xi() - shift_xi {
            cov = cov.max((v1.value(jx + shift_x, m + shift_xi).norm() - v0.value(jx, m).norm()).abs());
        }
    }
    let covariance = cov / v0.max_abs();

    let mut defect = 0.0f64;
    for grid in [g, BoxGrid::new(1, 64.0, 4096)?, BoxGrid::new(2, 8.0, 256)?] {
        defect = defect.max(DyadicDecomposition::for_grid(&grid)?.defect(&grid));
    }

    let bg = BoxGrid::new(1, 64.0, 2048)?;
    let band = inverse_fourier(&SampledSpectrum::from_fn(bg, |c| C64::from_polar(bump::cutoff(c[0], 0.2, 0.5), 0.7 * c[0])));
    let dec = DyadicDecomposition::for_grid(&bg)?;
    let mut besov = 0.0f64;
    for pq in pairs(&[("1", "1"), ("2", "inf"), ("3", "2")]) {
        let params = BesovParams { pq, s: 1.3 };
        let lp = band.lp_norm(pq.p);
        besov = besov.max((besov_norm(&band, &params, &dec)? - lp).abs() / lp);
    }

    let pass = plancherel <= 1e-6 && covariance <= 1e-8 && defect <= 1e-10 && besov <= 1e-8;
    Ok(Outcome {
        pass,
        detail: format!("plancherel {plancherel:.1e}, covariance {covariance:.1e}, partition defect {defect:.1e}, band-limited Besov {besov:.1e}"),
        metrics: json!({ "plancherel": plancherel, "covariance": covariance, "partition_defect": defect, "band_limited_besov": besov }),
        reports: Vec::new(),
    })
}

fn sandwich() -> Result<Outcome> {
    let g = BoxGrid::new(1, 256.0, 8192)?;
    let gauss = Func::real("gauss", 1, |t| (-t[0] * t[0]).exp());
    let two = Func::new("two bumps", 1, |t| {
        C64::new((-(t[0] - 3.0).powi(2)).exp(), 0.0) + C64::from_polar((-(t[0] + 2.0).powi(2) / 2.0).exp(), 5.0 * t[0])
    });
    let mut parts = Vec::new();
    let mut metrics = Vec::new();
    let mut pass = true;
    for f in [gauss, two] {
        let r = seminorm_sandwich(&sample(&f, &g)?)?;
        pass &= r.holds;
        let (lo, hi) = (r.stft_norm / r.seminorm, r.upper / r.stft_norm);
        parts.push(format!("{}: {:.4} ≤ {:.4} ≤ {:.4} (margins ×{lo:.3}, ×{hi:.3})", f.label(), r.seminorm, r.stft_norm, r.upper));
        metrics.push(json!({ "signal": f.label(), "seminorm": r.seminorm, "stft_norm": r.stft_norm, "upper": r.upper, "lower_margin": lo, "upper_margin": hi, "holds": r.holds }));
    }
    Ok(Outcome { pass, detail: parts.join("; "), metrics: json!(metrics), reports: Vec::new() })
}

fn embedding_probe(mode: Mode) -> Result<Outcome> {
    let mut reports = Vec::new();
    for s0 in [0.5, 0.8] {
        reports.push(sharpness_suite(SharpnessCase::BesovEmbedI2Star, &SuiteOptions { s0, ..SuiteOptions::default() })?.report);
    }
    if mode == Mode::Full {
        for case in [SharpnessCase::PacketI3Star, SharpnessCase::TranslateI1Star] {
            reports.push(sharpness_suite(case, &SuiteOptions::default())?.report);
        }
    }
    Ok(Outcome {
        pass: reports.iter().all(ScalingReport::passed),
        detail: worst_report(&reports),
        metrics: report_metrics(&reports),
        reports,
    })
}

fn envelopes(mode: Mode) -> Result<Outcome> {
    let p = |a: &str, b: &str| ExponentPair::parse(a, b).expect("literal exponents");
    let per = mode.per_octave();
    let mut checks: Vec<EnvelopeCheck> = Vec::new();
    let g21 = p("2", "1");
    checks.push(envelope_check(&Family::Gauss, &g21, EnvelopeBound::gauss_general(&g21), &log_grid(0.125, 8.0, per))?);
    let g11 = p("1", "1");
    checks.push(envelope_check(&Family::Gauss, &g11, EnvelopeBound::gauss_dual(&g11), &log_grid(0.125, 8.0, per))?);
    let l2 = p("2", "inf");
    checks.push(envelope_check(&Family::GaborLattice, &l2, EnvelopeBound::m2inf_shrink(), &log_grid(1.0 / 16.0, 1.0, 1))?);
    let g41 = p("4", "1");
    checks.push(envelope_check(&Family::Gauss, &g41, EnvelopeBound::p1_expand(&g41), &log_grid(1.0, 16.0, per))?);
    if mode == Mode::Full {
        let l1 = p("1", "inf");
        checks.push(envelope_check(&Family::GaborLattice, &l1, EnvelopeBound::pinf_shrink(&l1), &log_grid(1.0 / 16.0, 1.0, 1))?);
    }
    let params = BesovParams { pq: p("2", "2"), s: 1.0 };
    checks.push(envelope_check_with("gauss (besov)", params.pq, EnvelopeBound::besov(&params), &[1.0, 2.0, 4.0, 8.0], |l, r| {
        Ok(besov_gauss_norm(&params, l, r)?.0)
    })?);
    let parts: Vec<String> = checks
        .iter()
        .map(|c| format!("{} on {} {}: Ĉ {:.3} → {:.3} (drift {:.3})", c.bound.name, c.family, c.pq, c.c_hat, c.c_hat_refined, c.drift))
        .collect();
    Ok(Outcome {
        pass: checks.iter().all(|c| c.pass),
        detail: parts.join("; "),
        metrics: serde_json::to_value(&checks)?,
        reports: Vec::new(),
    })
}

/// A small scan computed on the current pool and on a single worker must
/// give byte-identical CSV.
fn determinism() -> Result<(bool, String)> {
    let run = || -> Result<Vec<u8>> {
        let r = dilation_scan(&Family::Gauss, &[ExponentPair::ints(2, 2), ExponentPair::ints(1, 0)], &[4.0, 8.0, 16.0, 32.0], 1)?;
        let mut out = report::report_csv(&r[0])?;
        out.extend(report::report_csv(&r[1])?);
        Ok(out)
    };
    let a = run()?;
    let b = run()?;
    let c = par::with_workers(1, run)?;
    Ok((a == b && a == c, format!("{} bytes, repeat equal {}, single-worker equal {}", a.len(), a == b, a == c)))
}

fn workers() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

/// Runs every criterion on the current thread pool. Wrap the call in
/// [`par::with_workers`] to fix the pool size.
pub fn run_verify(mode: Mode) -> VerifyReport {
    let start = Instant::now();
    let mut results = vec![
        timed(1, "Gaussian closed form", closed_form),
        timed(2, "Gaussian dilation slopes", || gauss_slopes(mode)),
        timed(3, "lattice sum shrink exponent", || lattice_slopes(mode)),
        timed(4, "modulated Gauss sum window", || modulated_sum(mode)),
        timed(5, "index calculus", index_calculus),
        timed(6, "analyzer integrity", integrity),
        timed(7, "seminorm sandwich", sandwich),
        timed(8, "embedding sharpness probes", || embedding_probe(mode)),
        timed(9, "envelope constants", || envelopes(mode)),
    ];
    let n = workers();
    results.push(timed(10, "determinism and runtime", || {
        let (same, how) = determinism()?;
        let elapsed = start.elapsed().as_secs_f64();
        let budget = mode.budget();
        Ok(Outcome {
            pass: same && elapsed <= budget,
            detail: format!("{elapsed:.1}s of {budget:.0}s with {n} worker(s); {how}"),
            metrics: json!({ "seconds": elapsed, "budget": budget, "workers": n, "deterministic": same }),
            reports: Vec::new(),
        })
    }));
    VerifyReport { mode, workers: n, seconds: start.elapsed().as_secs_f64(), results }
}
