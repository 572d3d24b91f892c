//! Experiment batches from INI-style files.
//!
//! ```ini
//! [output]
//! formats = csv, json, svg
//!
//! [gauss-expand]
//! kind = scan
//! family = gauss
//! pairs = 2:2, 1:inf, 4/3:4
//! lambdas = 4, 8, 16, 32, 64
//! ```
//!
//! Every section except `[output]` is one experiment, run in file order.
//! Keys are checked against the experiment kind and unknown keys are an
//! error. Numbers accept `a/b`; exponents accept `inf`.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use ini::{Ini, ParseOption};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::experiments::{dilation_scan, log_grid, sharpness_suite, verify_gauss_closed_form, ClosedFormRow, Family, ScalingReport, SharpnessCase, SuiteOptions};
use crate::extremals::EPS;
use crate::grid::BoxGrid;
use crate::indices::{Exponent, ExponentPair};
use crate::norms::Discretization;
use crate::report::Formats;
use crate::stft::Lattice;

#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub output: OutputSpec,
    pub experiments: Vec<Experiment>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputSpec {
    pub dir: Option<String>,
    pub formats: Formats,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Experiment {
    pub name: String,
    pub spec: ExperimentSpec,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ExperimentSpec {
    Scan { family: Family, pairs: Vec<ExponentPair>, lambdas: Vec<f64>, refine: usize },
    ClosedForm { pairs: Vec<ExponentPair>, lambdas: Vec<f64>, half_width: f64, points: usize },
    Sharpness { case: SharpnessCase, opts: SuiteOptions },
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "kebab-case", tag = "type", content = "data")]
pub enum Outcome {
    Reports(Vec<ScalingReport>),
    ClosedForm(Vec<ClosedFormRow>),
}

impl Outcome {
    pub fn passed(&self) -> bool {
        match self {
            Outcome::Reports(r) => r.iter().all(ScalingReport::passed),
            Outcome::ClosedForm(rows) => rows.iter().all(|r| r.pass),
        }
    }
}

impl Experiment {
    pub fn run(&self) -> Result<Outcome> {
        match &self.spec {
            ExperimentSpec::Scan { family, pairs, lambdas, refine } => Ok(Outcome::Reports(dilation_scan(family, pairs, lambdas, *refine)?)),
            ExperimentSpec::ClosedForm { pairs, lambdas, half_width, points } => {
                let disc = Discretization::new(BoxGrid::new(1, *half_width, *points)?, Lattice::dense());
                Ok(Outcome::ClosedForm(verify_gauss_closed_form(pairs, lambdas, &disc)?))
            }
            ExperimentSpec::Sharpness { case, opts } => Ok(Outcome::Reports(vec![sharpness_suite(*case, opts)?.report])),
        }
    }
}

/// Reads the section's keys, remembering which were used.
struct Section<'a> {
    name: &'a str,
    keys: BTreeMap<&'a str, &'a str>,
    used: HashSet<&'a str>,
}

impl<'a> Section<'a> {
    fn new(name: &'a str, props: &'a ini::Properties) -> Result<Self> {
        let mut keys = BTreeMap::new();
        for (k, v) in props.iter() {
            if keys.insert(k, v.trim()).is_some() {
                return Err(Error::Config(format!("[{name}]: key `{k}` given twice")));
            }
        }
        Ok(Section { name, keys, used: HashSet::new() })
    }

    fn get(&mut self, key: &'a str) -> Option<&'a str> {
        self.used.insert(key);
        self.keys.get(key).copied()
    }

    fn require(&mut self, key: &'a str) -> Result<&'a str> {
        self.get(key).ok_or_else(|| Error::Config(format!("[{}]: missing key `{key}`", self.name)))
    }

    fn parse_or<T>(&mut self, key: &'a str, default: T, parse: impl Fn(&str) -> Result<T>) -> Result<T> {
        match self.get(key) {
            Some(v) => parse(v).map_err(|e| Error::Config(format!("[{}] {key}: {e}", self.name))),
            None => Ok(default),
        }
    }

    /// Fails on any key nobody asked for.
    fn finish(self) -> Result<()> {
        match self.keys.keys().find(|k| !self.used.contains(*k)) {
            Some(k) => Err(Error::Config(format!("[{}]: unknown key `{k}`", self.name))),
            None => Ok(()),
        }
    }
}

/// `a`, `a/b` or a decimal.
pub fn parse_number(s: &str) -> Result<f64> {
    let s = s.trim();
    let v = match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|_| Error::Config(format!("bad number `{s}`")))?;
            let b: f64 = b.trim().parse().map_err(|_| Error::Config(format!("bad number `{s}`")))?;
            a / b
        }
        None => s.parse().map_err(|_| Error::Config(format!("bad number `{s}`")))?,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Config(format!("bad number `{s}`")))
    }
}

pub fn parse_list<T>(s: &str, item: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    s.split(',').map(str::trim).filter(|x| !x.is_empty()).map(item).collect()
}

/// `p:q`.
pub fn parse_pair(s: &str) -> Result<ExponentPair> {
    let (p, q) = s.split_once(':').ok_or_else(|| Error::Config(format!("exponent pair `{s}` must look like p:q")))?;
    ExponentPair::parse(p.trim(), q.trim())
}

fn positive_usize(s: &str) -> Result<usize> {
    match s.trim().parse::<usize>() {
        Ok(n) if n > 0 => Ok(n),
        _ => Err(Error::Config(format!("expected a positive integer, got `{s}`"))),
    }
}

fn lambdas(sec: &mut Section<'_>) -> Result<Vec<f64>> {
    if let Some(list) = sec.get("lambdas") {
        for key in ["lambda_from", "lambda_to", "per_octave"] {
            if sec.keys.contains_key(key) {
                return Err(Error::Config(format!("[{}]: `lambdas` and `{key}` are exclusive", sec.name)));
            }
        }
        return parse_list(list, parse_number);
    }
    let from = parse_number(sec.require("lambda_from")?)?;
    let to = parse_number(sec.require("lambda_to")?)?;
    let per = sec.parse_or("per_octave", 1, positive_usize)?;
    if !(from > 0.0 && to > 0.0) {
        return Err(Error::Config(format!("[{}]: λ range must be positive", sec.name)));
    }
    Ok(log_grid(from, to, per))
}

fn family(sec: &mut Section<'_>) -> Result<Family> {
    let name = sec.require("family")?;
    match name {
        "gauss" => Ok(Family::Gauss),
        "gabor_lattice" | "gabor_lattice_sum" => Ok(Family::GaborLattice),
        "modulated_gauss_sum" => {
            let q = sec.parse_or("q", Exponent::int(2)?, |s| s.parse())?;
            let eps = sec.parse_or("eps", EPS, parse_number)?;
            let omega = sec.parse_or("omega", 32.0, parse_number)?;
            Ok(Family::ModulatedGaussSum { q, eps, omega })
        }
        other => Err(Error::Config(format!("[{}]: unknown family `{other}`", sec.name))),
    }
}

impl Batch {
    pub fn parse(text: &str) -> Result<Batch> {
        let opt = ParseOption { enabled_escape: false, ..ParseOption::default() };
        let ini = Ini::load_from_str_opt(text, opt).map_err(|e| Error::Config(e.to_string()))?;
        let mut output = OutputSpec { dir: None, formats: Formats::default() };
        let mut experiments = Vec::new();
        let mut seen = HashSet::new();
        for (name, props) in ini.iter() {
            let Some(name) = name else {
                if let Some((k, _)) = props.iter().next() {
                    return Err(Error::Config(format!("key `{k}` outside of any section")));
                }
                continue;
            };
            if !seen.insert(name) {
                return Err(Error::Config(format!("section [{name}] given twice")));
            }
            let mut sec = Section::new(name, props)?;
            if name == "output" {
                output.dir = sec.get("dir").map(str::to_string);
                output.formats = sec.parse_or("formats", Formats::default(), |s| s.parse())?;
                sec.finish()?;
                continue;
            }
            let spec = match sec.require("kind")? {
                "scan" => ExperimentSpec::Scan {
                    family: family(&mut sec)?,
                    pairs: parse_list(sec.require("pairs")?, parse_pair)?,
                    lambdas: lambdas(&mut sec)?,
                    refine: sec.parse_or("refine", 1, positive_usize)?,
                },
                "closed-form" => ExperimentSpec::ClosedForm {
                    pairs: parse_list(sec.require("pairs")?, parse_pair)?,
                    lambdas: lambdas(&mut sec)?,
                    half_width: sec.parse_or("half_width", 12.0, parse_number)?,
                    points: sec.parse_or("points", 1024, positive_usize)?,
                },
                "sharpness" => {
                    let case: SharpnessCase = sec.require("case")?.parse()?;
                    let d = SuiteOptions::default();
                    let opts = SuiteOptions {
                        pq: sec.parse_or("pair", None, |s| parse_pair(s).map(Some))?,
                        s0: sec.parse_or("s0", d.s0, parse_number)?,
                        refine: sec.parse_or("refine", d.refine, positive_usize)?,
                    };
                    ExperimentSpec::Sharpness { case, opts }
                }
                other => return Err(Error::Config(format!("[{name}]: unknown kind `{other}`"))),
            };
            sec.finish()?;
            experiments.push(Experiment { name: name.to_string(), spec });
        }
        Ok(Batch { output, experiments })
    }

    pub fn load(path: &Path) -> Result<Batch> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Batch::parse(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_every_kind() {
        let b = Batch::parse(
            "[output]\nformats = csv,svg\n\n[a]\nkind = scan\nfamily = modulated_gauss_sum\nq = 2\npairs = inf:2\nlambda_from = 1/2\nlambda_to = 1/16\n\n\
             [b]\nkind = closed-form\npairs = 2:2, 1:1\nlambdas = 1/2, 1, 2\n\n[c]\nkind = sharpness\ncase = gauss-shrink\npair = 4/3:4\n",
        )
        .unwrap();
        assert!(b.output.formats.svg && !b.output.formats.json);
        assert_eq!(b.experiments.len(), 3);
        match &b.experiments[0].spec {
            ExperimentSpec::Scan { lambdas, family, .. } => {
                assert_eq!(lambdas.len(), 4);
                assert!(matches!(family, Family::ModulatedGaussSum { .. }));
            }
            other => panic!("{other:?}"),
        }
        match &b.experiments[1].spec {
            ExperimentSpec::ClosedForm { pairs, lambdas, points, .. } => {
                assert_eq!((pairs.len(), lambdas[0], *points), (2, 0.5, 1024));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn strictness() {
        assert!(Batch::parse("[a]\nkind = scan\nfamily = gauss\npairs = 2:2\nlambdas = 1,2,4,8\ncolour = red\n").is_err());
        assert!(Batch::parse("stray = 1\n").is_err());
        assert!(Batch::parse("[a]\nkind = magic\n").is_err());
        assert!(Batch::parse("[a]\nkind = closed-form\npairs = 2:2\nlambdas = 1\n[a]\nkind = closed-form\npairs = 2:2\nlambdas = 1\n").is_err());
        assert!(Batch::parse("[a]\nkind = closed-form\npairs = 1/2:2\nlambdas = 1\n").unwrap_err().is_usage());
        assert!(Batch::parse("[output]\nformats = pdf\n").is_err());
    }

    #[test]
    fn empty_config_is_empty() {
        let b = Batch::parse("").unwrap();
        assert!(b.experiments.is_empty());
        let b = Batch::parse("# nothing\n[output]\n").unwrap();
        assert!(b.experiments.is_empty());
    }

    #[test]
    fn numbers() {
        assert_eq!(parse_number("1/4").unwrap(), 0.25);
        assert_eq!(parse_number(" 3 ").unwrap(), 3.0);
        assert!(parse_number("1/0").is_err());
        assert!(parse_pair("2,2").is_err());
        assert_eq!(parse_pair("inf:4/3").unwrap().to_string(), ExponentPair::parse("inf", "4/3").unwrap().to_string());
    }

    #[test]
    fn closed_form_batch_runs() {
        let b = Batch::parse("[t]\nkind = closed-form\npairs = 2:2\nlambdas = 1\n").unwrap();
        let out = b.experiments[0].run().unwrap();
        assert!(out.passed());
    }
}
