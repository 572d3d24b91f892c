use std::fs;

use modspace::config::Batch;
use modspace::experiments::{family_norms, Family};
use modspace::extremals::EPS;
use modspace::grid::sample;
use modspace::indices::{Exponent, ExponentPair};
use modspace::norms::mixed_norms_of_signal;
use modspace::report::{self, Formats};

#[test]
fn unit_dilation_is_identity_for_every_family() {
    let q = Exponent::int(2).unwrap();
    let families = [Family::Gauss, Family::GaborLattice, Family::ModulatedGaussSum { q, eps: EPS, omega: 32.0 }];
    let pqs = [ExponentPair::ints(2, 2), ExponentPair::new(Exponent::infinity(), q)];
    for fam in families {
        let (dilated, setup) = family_norms(&fam, &pqs, 1.0, 1).unwrap();
        let undilated = sample(&setup.func, &setup.disc.grid).unwrap();
        let direct = mixed_norms_of_signal(&undilated, &pqs, &setup.window, &setup.disc.lattice).unwrap();
        assert_eq!(dilated, direct, "{}", fam.label());
    }
}

const BATCH: &str = "
[output]
formats = csv, json, svg

[gauss]
kind = scan
family = gauss
pairs = 2:2, 1:inf
lambdas = 4, 8, 16, 32

[table]
kind = closed-form
pairs = 2:2, 2:inf
lambdas = 1/2, 2
";

fn run_into(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let batch = Batch::parse(BATCH).unwrap();
    for exp in &batch.experiments {
        match exp.run().unwrap() {
            modspace::config::Outcome::Reports(rs) => {
                for (i, r) in rs.iter().enumerate() {
                    report::write_report(dir, &format!("{}_{i}", exp.name), r, batch.output.formats).unwrap();
                }
            }
            modspace::config::Outcome::ClosedForm(rows) => {
                assert!(rows.iter().all(|r| r.pass));
                report::write_closed_form(dir, &exp.name, &rows, batch.output.formats).unwrap();
            }
        }
    }
    let mut files: Vec<(String, Vec<u8>)> =
        fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())).collect();
    files.sort();
    files
}

#[test]
fn batch_outputs_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = run_into(a.path());
    let second = modspace::par::with_workers(1, || run_into(b.path()));
    assert_eq!(first.len(), 3 * 2 + 2);
    assert_eq!(first, second);
    let csv = String::from_utf8(first.iter().find(|(n, _)| n == "gauss_0.csv").unwrap().1.clone()).unwrap();
    assert!(csv.starts_with("lambda,norm,N,L,K,tail_bound\n"));
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn default_formats_skip_svg() {
    let f = Formats::default();
    assert!(f.csv && f.json && !f.svg);
}
