use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use modspace::besov::{besov_norm, BesovParams, DyadicDecomposition};
use modspace::config::{Batch, Outcome};
use modspace::experiments::ScalingReport;
use modspace::extremals::{self, EPS};
use modspace::grid::{check_resolution, dilate_constructor, inverse_fourier, sample, BoxGrid, Func, SampledSignal, SampledSpectrum};
use modspace::indices::{classify_region, index_values, Exponent, ExponentPair};
use modspace::norms::mixed_norms_of_signal;
use modspace::report::{self, Formats};
use modspace::stft::{stft, Lattice, Window};
use modspace::verify::{run_verify, Mode};
use modspace::{bump, par, C64};

const EXIT_USAGE: u8 = 2;
const EXIT_NUMERIC: u8 = 3;
const EXIT_VERDICT: u8 = 4;

/// Relative spectral energy above 0.9·Nyquist that draws a warning, and
/// that is an error.
const RESOLUTION_WARN: f64 = 1e-8;
const RESOLUTION_FAIL: f64 = 1e-4;

#[derive(Parser)]
#[command(name = "modspace", version, about = "Modulation-space and Besov norms, dilation-exponent experiments")]
struct Cli {
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print ν₁, ν₂, μ₁, μ₂ and the regions containing (p, q) as JSON.
    Indices {
        #[arg(long)]
        p: String,
        /// Defaults to p.
        #[arg(long)]
        q: Option<String>,
    },
    /// Compute one norm of a named function.
    Norm(NormArgs),
    /// Write the STFT of a named function as CSV and/or an SVG heatmap.
    StftDump(DumpArgs),
    /// Run the experiment batch described by an INI file.
    Scan {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated subset of csv, json, svg.
        #[arg(long)]
        formats: Option<String>,
    },
    /// Run the acceptance criteria.
    Verify {
        #[arg(long)]
        quick: bool,
        /// Directory for summary.json and per-report files.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "csv,json,svg")]
        formats: String,
        /// Print the summary as JSON instead of one line per criterion.
        #[arg(long)]
        json: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FuncName {
    Gauss,
    Zero,
    Bspline2,
    ModulatedGaussSum,
    GaborLattice,
    BandLimited,
}

#[derive(Clone, Copy, ValueEnum)]
enum NormKind {
    Modulation,
    Besov,
    Lp,
}

#[derive(Clone, Copy, ValueEnum)]
enum WindowName {
    Gauss,
    BumpPsi,
    Bspline,
    PartitionPhi,
}

#[derive(clap::Args)]
struct SignalArgs {
    #[arg(long, value_enum, default_value = "gauss")]
    func: FuncName,
    /// Dilation f(λ·).
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Number of terms K for the lattice families.
    #[arg(long, default_value_t = 16)]
    terms: usize,
    /// Exponent of the coefficients of the modulated Gauss sum.
    #[arg(long, default_value = "2")]
    sum_q: String,
    #[arg(long, default_value_t = 12.0)]
    half_width: f64,
    #[arg(long, default_value_t = 1024)]
    points: usize,
}

#[derive(clap::Args)]
struct NormArgs {
    #[command(flatten)]
    signal: SignalArgs,
    #[arg(long, value_enum, default_value = "modulation")]
    kind: NormKind,
    #[arg(long, default_value = "2")]
    p: String,
    #[arg(long, default_value = "2")]
    q: String,
    /// Besov smoothness.
    #[arg(long, default_value_t = 0.0)]
    s: f64,
    #[arg(long, value_enum, default_value = "gauss")]
    window: WindowName,
    /// x stride of the STFT frames in grid points; 0 is the dense transform.
    #[arg(long, default_value_t = 0)]
    stride: usize,
}

#[derive(clap::Args)]
struct DumpArgs {
    #[command(flatten)]
    signal: SignalArgs,
    #[arg(long, value_enum, default_value = "gauss")]
    window: WindowName,
    #[arg(long, default_value_t = 8)]
    stride: usize,
    /// Keep |ξ| ≤ this.
    #[arg(long)]
    xi_extent: Option<f64>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, default_value = "stft")]
    stem: String,
    #[arg(long, default_value = "csv,svg")]
    formats: String,
}

fn exponent(s: &str) -> anyhow::Result<Exponent> {
    Ok(s.parse::<Exponent>()?)
}

fn window(name: WindowName) -> Window {
    match name {
        WindowName::Gauss => Window::gauss(1),
        WindowName::BumpPsi => Window::bump_psi(1),
        WindowName::Bspline => Window::bspline(1),
        WindowName::PartitionPhi => Window::partition_phi(1),
    }
}

struct Signal {
    label: String,
    sampled: SampledSignal,
    truncation: Option<(usize, f64)>,
}

fn signal(a: &SignalArgs) -> anyhow::Result<Signal> {
    let grid = BoxGrid::new(1, a.half_width, a.points)?;
    let mut truncation = None;
    let base: Func = match a.func {
        FuncName::Gauss => extremals::gauss(1),
        FuncName::Zero => Func::zero(1),
        FuncName::Bspline2 => extremals::bspline2(1),
        FuncName::ModulatedGaussSum => {
            let (f, spec) = extremals::modulated_gauss_sum(1, exponent(&a.sum_q)?, EPS, a.terms)?;
            truncation = Some((spec.k, spec.tail_bound));
            f
        }
        FuncName::GaborLattice => extremals::gabor_lattice_sum(1, a.terms),
        FuncName::BandLimited => {
            // f̂ = e^{0.7iξ} on |ξ| ≤ 0.2, smooth cutoff to 0 at 0.5
            let lambda = a.lambda;
            let spec = SampledSpectrum::from_fn(grid, move |c| {
                let xi = c[0] / lambda;
                C64::from_polar(bump::cutoff(xi, 0.2, 0.5) / lambda, 0.7 * xi)
            });
            let label = format!("band_limited(λ={lambda})");
            let sampled = inverse_fourier(&spec).with_tag(label.clone());
            return Ok(Signal { label, sampled, truncation });
        }
    };
    let f = dilate_constructor(&base, a.lambda)?;
    let sampled = sample(&f, &grid)?;
    check_resolution(&sampled, RESOLUTION_WARN, RESOLUTION_FAIL)?;
    Ok(Signal { label: f.label().to_string(), sampled, truncation })
}

fn cmd_indices(p: &str, q: Option<&str>) -> anyhow::Result<u8> {
    let pq = ExponentPair::parse(p, q.unwrap_or(p))?;
    let iv = index_values(&pq);
    let out = json!({
        "p": pq.p.to_string(),
        "q": pq.q.to_string(),
        "mu1": iv.mu1,
        "mu2": iv.mu2,
        "nu1": iv.nu1,
        "nu2": iv.nu2,
        "regions": classify_region(&pq),
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(0)
}

fn cmd_norm(a: &NormArgs) -> anyhow::Result<u8> {
    println!("{}", serde_json::to_string_pretty(&norm_report(a)?)?);
    Ok(0)
}

fn norm_report(a: &NormArgs) -> anyhow::Result<serde_json::Value> {
    let pq = ExponentPair::new(exponent(&a.p)?, exponent(&a.q)?);
    let sig = signal(&a.signal)?;
    let grid = *sig.sampled.grid();
    let (value, extra) = match a.kind {
        NormKind::Lp => (sig.sampled.lp_norm(pq.p), json!({})),
        NormKind::Modulation => {
            let w = window(a.window);
            let lattice = if a.stride == 0 { Lattice::dense() } else { Lattice::framed(a.stride, w.time_radius()) };
            let v = mixed_norms_of_signal(&sig.sampled, &[pq], &w, &lattice)?[0];
            (v, json!({ "window": format!("{:?}", w.label()), "stride": a.stride }))
        }
        NormKind::Besov => {
            let dec = DyadicDecomposition::for_grid(&grid)?;
            let v = besov_norm(&sig.sampled, &BesovParams { pq, s: a.s }, &dec)?;
            (v, json!({ "s": a.s, "j_max": dec.j_max() }))
        }
    };
    let out = json!({
        "function": sig.label,
        "kind": a.kind.to_possible_value().map(|v| v.get_name().to_string()),
        "p": pq.p.to_string(),
        "q": pq.q.to_string(),
        "value": value,
        "grid": { "N": grid.points_per_axis(), "L": grid.half_width(), "spacing": grid.spacing() },
        "truncation": sig.truncation.map(|(k, t)| json!({ "K": k, "tail_bound": t })),
        "details": extra,
    });
    Ok(out)
}

fn cmd_dump(a: &DumpArgs) -> anyhow::Result<u8> {
    let formats: Formats = a.formats.parse()?;
    let sig = signal(&a.signal)?;
    let w = window(a.window);
    let mut lattice = if a.stride == 0 { Lattice::dense() } else { Lattice::framed(a.stride, w.time_radius()) };
    if let Some(e) = a.xi_extent {
        lattice = lattice.with_xi_extent(e);
    }
    let v = stft(&sig.sampled, &w, &lattice)?;
    for path in report::write_matrix(&a.out, &a.stem, &v, formats)? {
        println!("{}", path.display());
    }
    Ok(0)
}

fn print_report(name: &str, r: &ScalingReport) {
    println!("[{name}] {r}");
}

fn cmd_scan(config: &Path, out: Option<&Path>, formats: Option<&str>) -> anyhow::Result<u8> {
    let batch = Batch::load(config)?;
    let formats = match formats {
        Some(f) => f.parse()?,
        None => batch.output.formats,
    };
    let dir = out.map(Path::to_path_buf).or_else(|| batch.output.dir.as_ref().map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("out"));
    let mut failures = Vec::new();
    let mut summary = Vec::new();
    for exp in &batch.experiments {
        let outcome = exp.run().with_context(|| format!("experiment [{}]", exp.name))?;
        match &outcome {
            Outcome::Reports(reports) => {
                for (i, r) in reports.iter().enumerate() {
                    print_report(&exp.name, r);
                    let stem = format!("{}_{:02}_{}", report::file_stem(&exp.name), i, report::file_stem(&r.pq.to_string()));
                    report::write_report(&dir, &stem, r, formats)?;
                }
            }
            Outcome::ClosedForm(rows) => {
                for r in rows {
                    println!("[{}] {} λ={} numeric {:.6} exact {:.6} rel.err {:.2e} {}", exp.name, r.pq, r.lambda, r.numeric, r.exact, r.rel_err, if r.pass { "Pass" } else { "Fail" });
                }
                report::write_closed_form(&dir, &report::file_stem(&exp.name), rows, formats)?;
            }
        }
        if !outcome.passed() {
            failures.push(exp.name.clone());
        }
        summary.push(json!({ "name": exp.name, "pass": outcome.passed(), "outcome": outcome }));
    }
    if !batch.experiments.is_empty() && formats.json {
        report::write_json(&dir.join("summary.json"), &json!({ "experiments": summary, "failures": failures }))?;
    }
    if failures.is_empty() {
        Ok(0)
    } else {
        eprintln!("failed: {}", failures.join(", "));
        Ok(EXIT_VERDICT)
    }
}

fn cmd_verify(quick: bool, out: Option<&PathBuf>, formats: &str, as_json: bool) -> anyhow::Result<u8> {
    let formats: Formats = formats.parse()?;
    let report = run_verify(if quick { Mode::Quick } else { Mode::Full });
    if as_json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        for r in &report.results {
            println!("criterion {} {} ({:.1}s) {}: {}", r.id, if r.pass { "pass" } else { "FAIL" }, r.seconds, r.title, r.detail);
        }
        println!("{} of {} criteria pass in {:.1}s", report.results.iter().filter(|r| r.pass).count(), report.results.len(), report.seconds);
    }
    if let Some(dir) = out {
        report.write(dir, formats)?;
    }
    Ok(if report.passed() { 0 } else { EXIT_VERDICT })
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    match &cli.command {
        Command::Indices { p, q } => cmd_indices(p, q.as_deref()),
        Command::Norm(a) => cmd_norm(a),
        Command::StftDump(a) => cmd_dump(a),
        Command::Scan { config, out, formats } => cmd_scan(config, out.as_deref(), formats.as_deref()),
        Command::Verify { quick, out, formats, json } => cmd_verify(*quick, out.as_ref(), formats, *json),
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.chain().find_map(|c| c.downcast_ref::<modspace::Error>()) {
        Some(m) if m.is_usage() => EXIT_USAGE,
        Some(_) => EXIT_NUMERIC,
        None if e.chain().any(|c| c.is::<std::io::Error>()) => EXIT_USAGE,
        None => EXIT_NUMERIC,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let workers = cli.workers;
    match par::with_workers(workers, move || run(cli)) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;
    use std::fs;

    fn cli(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("modspace").chain(args.iter().copied())).unwrap()
    }

    fn code(args: &[&str]) -> u8 {
        match run(cli(args)) {
            Ok(c) => c,
            Err(e) => exit_code(&e),
        }
    }

    fn norm(args: &[&str]) -> serde_json::Value {
        let Command::Norm(a) = cli(&[&["norm"], args].concat()).command else { unreachable!() };
        norm_report(&a).unwrap()
    }

    #[test]
    fn indices_exit_codes() {
        assert_eq!(code(&["indices", "--p", "2", "--q", "2"]), 0);
        assert_eq!(code(&["indices", "--p", "inf", "--q", "1"]), 0);
        assert_eq!(code(&["indices", "--p", "4/3", "--q", "inf"]), 0);
        assert_eq!(code(&["indices", "--p", "0.5"]), EXIT_USAGE);
        assert_eq!(code(&["indices", "--p", "abc"]), EXIT_USAGE);
        let e = Cli::try_parse_from(["modspace", "indices"]).err().unwrap();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn norms_of_named_functions() {
        let v = norm(&["--p", "2", "--q", "2"])["value"].as_f64().unwrap();
        assert!((v / PI - 1.0).abs() < 5e-3);
        assert_eq!(norm(&["--func", "zero"])["value"].as_f64().unwrap(), 0.0);
        let grid = ["--half-width", "64", "--points", "2048", "--p", "3", "--q", "2"];
        let b = norm(&[&["--func", "band-limited", "--kind", "besov", "--s", "1.3"], &grid[..]].concat())["value"].as_f64().unwrap();
        let l = norm(&[&["--func", "band-limited", "--kind", "lp"], &grid[..]].concat())["value"].as_f64().unwrap();
        assert!((b - l).abs() < 1e-8 * l);
        let framed = norm(&["--stride", "4"])["value"].as_f64().unwrap();
        assert!((framed / PI - 1.0).abs() < 5e-3);
        assert!(norm(&["--func", "bspline2"])["value"].as_f64().unwrap() > 0.0);
    }

    #[test]
    fn unresolved_norm_is_numerical_error() {
        assert_eq!(code(&["norm", "--lambda", "200"]), EXIT_NUMERIC);
        assert_eq!(code(&["norm", "--p", "1/2"]), EXIT_USAGE);
    }

    #[test]
    fn scan_exit_codes() {
        let dir = tempfile::tempdir().unwrap();
        let conf = |name: &str, text: &str| {
            let p = dir.path().join(name);
            fs::write(&p, text).unwrap();
            p.to_string_lossy().into_owned()
        };
        let out = dir.path().join("out");
        let out = out.to_str().unwrap();

        let empty = conf("empty.conf", "");
        assert_eq!(code(&["scan", &empty, "--out", out]), 0);
        assert!(!dir.path().join("out").exists());

        let table = conf("table.conf", "[t]\nkind = closed-form\npairs = 2:2, 1:1\nlambdas = 1, 2\n");
        assert_eq!(code(&["scan", &table, "--out", out, "--formats", "csv,json"]), 0);
        let csv = fs::read_to_string(dir.path().join("out/t.csv")).unwrap();
        assert!(csv.starts_with("p,q,lambda,numeric,exact,rel_err,tolerance,pass\n"));
        assert!(dir.path().join("out/summary.json").exists());

        let failing = conf("fail.conf", "[probe]\nkind = sharpness\ncase = besov-embed-I2star\ns0 = 0.5\n");
        assert_eq!(code(&["scan", &failing, "--out", out]), EXIT_VERDICT);

        let bad = conf("bad.conf", "[t]\nkind = closed-form\npairs = 2:2\nlambdas = 1\nfoo = 1\n");
        assert_eq!(code(&["scan", &bad, "--out", out]), EXIT_USAGE);
        let missing = dir.path().join("nope.conf");
        assert_eq!(code(&["scan", missing.to_str().unwrap()]), EXIT_USAGE);
    }

    #[test]
    fn bundled_closed_form_config_passes() {
        let dir = tempfile::tempdir().unwrap();
        let conf = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/gauss_closed_form.conf");
        assert_eq!(code(&["scan", conf, "--out", dir.path().to_str().unwrap()]), 0);
    }

    #[test]
    fn stft_dump_writes_csv_and_svg() {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path().to_str().unwrap();
        assert_eq!(code(&["stft-dump", "--out", d, "--stride", "16", "--xi-extent", "8", "--stem", "g"]), 0);
        let csv = fs::read_to_string(dir.path().join("g.csv")).unwrap();
        assert!(csv.starts_with("x,xi,re,im\n"));
        let svg = fs::read_to_string(dir.path().join("g.svg")).unwrap();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(code(&["stft-dump", "--out", d, "--formats", "png"]), EXIT_USAGE);
    }
}
