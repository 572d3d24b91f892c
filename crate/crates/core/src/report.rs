//! Report files: CSV tables, JSON summaries and static SVG figures
//! (log-log scan plots with the predicted slope overlaid, STFT magnitude
//! heatmaps). Output is a pure function of the data, so reruns are
//! byte-identical.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::experiments::{ClosedFormRow, ScalingReport};
use crate::stft::TimeFreqMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Formats {
    pub csv: bool,
    pub json: bool,
    pub svg: bool,
}

impl Default for Formats {
    fn default() -> Self {
        Formats { csv: true, json: true, svg: false }
    }
}

impl FromStr for Formats {
    type Err = Error;

    /// Comma-separated subset of `csv`, `json`, `svg`.
    fn from_str(s: &str) -> Result<Self> {
        let mut f = Formats { csv: false, json: false, svg: false };
        for item in s.split(',').map(str::trim).filter(|x| !x.is_empty()) {
            match item.to_ascii_lowercase().as_str() {
                "csv" => f.csv = true,
                "json" => f.json = true,
                "svg" => f.svg = true,
                other => return Err(Error::Config(format!("unknown output format `{other}`"))),
            }
        }
        Ok(f)
    }
}

/// Turn a label into a safe file stem.
pub fn file_stem(label: &str) -> String {
    let mut out = String::with_capacity(label.len());
    for c in label.chars() {
        if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
            out.push(c);
        } else if !out.ends_with('_') {
            out.push('_');
        }
    }
    out.trim_matches('_').to_string()
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<PathBuf> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::File::create(path)?.write_all(bytes)?;
    Ok(path.to_path_buf())
}

pub fn report_csv(r: &ScalingReport) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    r.write_csv(&mut buf)?;
    Ok(buf)
}

/// `<stem>.csv`, `<stem>.json`, `<stem>.svg` as selected; returns the paths.
pub fn write_report(dir: &Path, stem: &str, r: &ScalingReport, formats: Formats) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    if formats.csv {
        out.push(write_file(&dir.join(format!("{stem}.csv")), &report_csv(r)?)?);
    }
    if formats.json {
        let text = serde_json::to_string_pretty(&r.summary())?;
        out.push(write_file(&dir.join(format!("{stem}.json")), text.as_bytes())?);
    }
    if formats.svg {
        out.push(write_file(&dir.join(format!("{stem}.svg")), loglog_svg(r).as_bytes())?);
    }
    Ok(out)
}

pub fn closed_form_csv(rows: &[ClosedFormRow]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(["p", "q", "lambda", "numeric", "exact", "rel_err", "tolerance", "pass"])?;
        for r in rows {
            w.write_record([
                r.pq.p.to_string(),
                r.pq.q.to_string(),
                format!("{}", r.lambda),
                format!("{:.15e}", r.numeric),
                format!("{:.15e}", r.exact),
                format!("{:.6e}", r.rel_err),
                format!("{}", r.tolerance),
                r.pass.to_string(),
            ])?;
        }
        w.flush()?;
    }
    Ok(buf)
}

pub fn write_closed_form(dir: &Path, stem: &str, rows: &[ClosedFormRow], formats: Formats) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    if formats.csv {
        out.push(write_file(&dir.join(format!("{stem}.csv")), &closed_form_csv(rows)?)?);
    }
    if formats.json {
        let worst = rows.iter().map(|r| r.rel_err).fold(0.0, f64::max);
        let text = serde_json::to_string_pretty(&serde_json::json!({
            "rows": rows.len(),
            "max_rel_err": worst,
            "verdict": if rows.iter().all(|r| r.pass) { "pass" } else { "fail" },
        }))?;
        out.push(write_file(&dir.join(format!("{stem}.json")), text.as_bytes())?);
    }
    Ok(out)
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<PathBuf> {
    write_file(path, serde_json::to_string_pretty(value)?.as_bytes())
}

pub fn write_matrix(dir: &Path, stem: &str, v: &TimeFreqMatrix, formats: Formats) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    if formats.csv {
        let mut buf = Vec::new();
        v.write_csv(&mut buf)?;
        out.push(write_file(&dir.join(format!("{stem}.csv")), &buf)?);
    }
    if formats.svg {
        out.push(write_file(&dir.join(format!("{stem}.svg")), heatmap_svg(v)?.as_bytes())?);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// svg

const W: f64 = 640.0;
const H: f64 = 440.0;
const MARGIN: f64 = 60.0;

struct Axis {
    lo: f64,
    hi: f64,
    from: f64,
    to: f64,
}

impl Axis {
    fn new(lo: f64, hi: f64, from: f64, to: f64) -> Self {
        let (lo, hi) = if hi - lo < 1e-9 { (lo - 0.5, hi + 0.5) } else { (lo, hi) };
        Axis { lo, hi, from, to }
    }

    fn map(&self, v: f64) -> f64 {
        self.from + (v - self.lo) / (self.hi - self.lo) * (self.to - self.from)
    }
}

fn polyline(out: &mut String, pts: &[(f64, f64)], style: &str) {
    let path: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
    let _ = writeln!(out, r#"<polyline fill="none" {style} points="{}"/>"#, path.join(" "));
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// log₂ λ against log₂ norm, measured points, fitted line and the theory
/// slope drawn through the centroid.
pub fn loglog_svg(r: &ScalingReport) -> String {
    let xs: Vec<f64> = r.rows.iter().map(|p| p.lambda.log2()).collect();
    let ys: Vec<f64> = r.rows.iter().map(|p| p.norm.log2()).collect();
    let (cx, cy) = (xs.iter().sum::<f64>() / xs.len() as f64, ys.iter().sum::<f64>() / ys.len() as f64);
    let fold = |v: &[f64]| v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let (x0, x1) = fold(&xs);
    let line = |slope: f64| [(x0, cy + slope * (x0 - cx)), (x1, cy + slope * (x1 - cx))];
    let mut all_y = ys.clone();
    all_y.extend(line(r.slope).iter().map(|p| p.1));
    if let Some(t) = r.theory {
        all_y.extend(line(t).iter().map(|p| p.1));
    }
    let (y0, y1) = fold(&all_y);
    let ax = Axis::new(x0, x1, MARGIN, W - 20.0);
    let ay = Axis::new(y0, y1, H - MARGIN, 30.0);
    let px = |p: &[(f64, f64)]| p.iter().map(|&(x, y)| (ax.map(x), ay.map(y))).collect::<Vec<_>>();

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{MARGIN}" y="18">{} {} slope {:.4}{}</text>"#,
        escape(&r.family),
        r.pq,
        r.slope,
        r.theory.map(|t| format!(", theory {t:.4}")).unwrap_or_default()
    );
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN}" y="30" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 20.0 - MARGIN,
        H - MARGIN - 30.0
    );
    for &x in &xs {
        let _ = writeln!(s, r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#, ax.map(x), H - MARGIN + 16.0, tick(x));
    }
    for y in [ay.lo, (ay.lo + ay.hi) / 2.0, ay.hi] {
        let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, MARGIN - 4.0, ay.map(y) + 4.0, tick(y));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">λ</text>"#, (MARGIN + W - 20.0) / 2.0, H - 20.0);
    let _ = writeln!(s, r#"<text x="14" y="{}" transform="rotate(-90 14 {})" text-anchor="middle">norm</text>"#, H / 2.0, H / 2.0);
    if let Some(t) = r.theory {
        polyline(&mut s, &px(&line(t)), r#"stroke="gray" stroke-dasharray="6 4""#);
    }
    polyline(&mut s, &px(&line(r.slope)), r#"stroke="steelblue""#);
    for (x, y) in px(&xs.iter().copied().zip(ys.iter().copied()).collect::<Vec<_>>()) {
        let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="black"/>"#);
    }
    s.push_str("</svg>\n");
    s
}

/// Label for a log₂ coordinate.
fn tick(v: f64) -> String {
    let p = 2f64.powf(v);
    if (v - v.round()).abs() < 1e-9 && v.abs() < 20.0 {
        if v >= 0.0 {
            format!("{}", p.round())
        } else {
            format!("1/{}", (1.0 / p).round())
        }
    } else {
        format!("{p:.3e}")
    }
}

/// |V| on the (x, ξ) lattice of a one-dimensional matrix, at most 128
/// cells per axis (block maxima), gray scale.
pub fn heatmap_svg(v: &TimeFreqMatrix) -> Result<String> {
    if v.dim != 1 {
        return Err(Error::Unsupported("heatmaps are drawn for one-dimensional signals only".into()));
    }
    const CELLS: usize = 128;
    let (nx, nxi) = (v.n_x(), v.n_xi());
    let bx = nx.div_ceil(CELLS).max(1);
    let bxi = nxi.div_ceil(CELLS).max(1);
    let (cx, cxi) = (nx.div_ceil(bx), nxi.div_ceil(bxi));
    let top = v.max_abs().max(f64::MIN_POSITIVE);
    let (pw, ph) = (W - MARGIN - 20.0, H - MARGIN - 30.0);
    let (cw, ch) = (pw / cx as f64, ph / cxi as f64);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{MARGIN}" y="18">|V| max {top:.4e}</text>"#);
    for i in 0..cx {
        for k in 0..cxi {
            let mut m = 0.0f64;
            for jx in i * bx..((i + 1) * bx).min(nx) {
                for jm in k * bxi..((k + 1) * bxi).min(nxi) {
                    m = m.max(v.value(jx, jm).norm());
                }
            }
            let shade = 255 - (255.0 * (m / top).sqrt()).round() as u8;
            let y = 30.0 + (cxi - 1 - k) as f64 * ch;
            let _ = writeln!(
                s,
                r#"<rect x="{:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="rgb({shade},{shade},{shade})"/>"#,
                MARGIN + i as f64 * cw,
                cw + 0.05,
                ch + 0.05
            );
        }
    }
    let (x0, x1) = (v.x_axis[0], v.x_axis[v.x_axis.len() - 1]);
    let (k0, k1) = (v.xi_axis[0], v.xi_axis[v.xi_axis.len() - 1]);
    let _ = writeln!(s, r#"<text x="{MARGIN}" y="{}">x {x0:.3} .. {x1:.3}</text>"#, H - MARGIN + 16.0);
    let _ = writeln!(s, r#"<text x="{MARGIN}" y="{}">ξ {k0:.3} .. {k1:.3}</text>"#, H - MARGIN + 32.0);
    s.push_str("</svg>\n");
    Ok(s)
}
