//! Fixture corpus: `.surf` files with `expect.*` keys, run and compared.
//!
//! Recognised expectation keys:
//!
//! | key                     | compared against                                  |
//! |-------------------------|---------------------------------------------------|
//! | `verdict`               | `PlaneVerdict::label()`                           |
//! | `rays`                  | comma list of exceptional rays, order ignored     |
//! | `fiber.<ray>`           | `FiberClass` of `nash_fiber` over `<ray>`         |
//! | `fiber_interval.<ray>`  | `lo, hi` hull of the fiber, 1% relative           |
//! | `regularity`            | `Regularity` of the declared pair family          |
//! | `case_iv`               | `Ok` or the error kind of the map assembly        |

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;

use crate::bilip::{assemble_case_iv, partition_triples};
use crate::cone::nash_fiber;
use crate::metric::l_regularity_probe;
use crate::pieces::{analyze_plane, PlaneAnalysis};
use crate::surface::{parse_surf, Ray, SurfFile};
use crate::{Config, Error, Result};

/// Relative tolerance on fiber interval endpoints.
pub const INTERVAL_TOL: f64 = 0.01;

#[derive(Debug, Clone)]
pub struct FixtureCase {
    pub name: String,
    pub path: PathBuf,
    pub file: SurfFile,
}

impl FixtureCase {
    pub fn load(path: &Path) -> Result<Self> {
        let file = parse_surf(&fs::read_to_string(path)?)?;
        let name = path.file_stem().map_or_else(|| file.spec.name.clone(), |s| s.to_string_lossy().into_owned());
        Ok(FixtureCase { name, path: path.to_path_buf(), file })
    }
}

/// All `*.surf` files directly inside `dir`, sorted by name.
pub fn load_corpus(dir: &Path) -> Result<Vec<FixtureCase>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "surf"))
        .collect();
    paths.sort();
    paths.iter().map(|p| FixtureCase::load(p)).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Check {
    pub key: String,
    pub expected: String,
    pub actual: String,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseResult {
    pub name: String,
    pub checks: Vec<Check>,
    #[serde(skip)]
    pub elapsed: Duration,
}

impl CaseResult {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusReport {
    pub cases: Vec<CaseResult>,
}

impl CorpusReport {
    pub fn passed(&self) -> bool {
        self.cases.iter().all(CaseResult::passed)
    }

    pub fn failed_cases(&self) -> Vec<&str> {
        self.cases.iter().filter(|c| !c.passed()).map(|c| c.name.as_str()).collect()
    }

    /// Plain-text pass/fail table, one row per expectation.
    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<14} {:<20} {:<40} {:<40} result", "case", "key", "expected", "actual");
        for c in &self.cases {
            for k in &c.checks {
                let _ = writeln!(
                    out,
                    "{:<14} {:<20} {:<40} {:<40} {}",
                    c.name,
                    k.key,
                    k.expected,
                    k.actual,
                    if k.pass { "PASS" } else { "FAIL" }
                );
            }
        }
        let failed = self.failed_cases();
        let _ = writeln!(out, "{} cases, {} failed{}", self.cases.len(), failed.len(), if failed.is_empty() { String::new() } else { format!(": {}", failed.join(", ")) });
        out
    }
}

fn err_label(e: &Error) -> String {
    format!("{}: {e}", e.kind())
}

fn parse_pair(text: &str) -> Option<(f64, f64)> {
    let (a, b) = text.split_once(',')?;
    Some((a.trim().parse().ok()?, b.trim().parse().ok()?))
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= INTERVAL_TOL * b.abs().max(1e-3)
}

struct Runner<'a> {
    case: &'a FixtureCase,
    cfg: &'a Config,
    plane: Option<std::result::Result<PlaneAnalysis, Error>>,
}

impl Runner<'_> {
    fn plane(&mut self) -> &std::result::Result<PlaneAnalysis, Error> {
        let (s, cfg) = (&self.case.file.spec, self.cfg);
        self.plane.get_or_insert_with(|| analyze_plane(s, cfg))
    }

    fn check(&mut self, key: &str, expected: &str) -> Check {
        let (actual, pass) = self.evaluate(key, expected);
        Check { key: key.into(), expected: expected.into(), actual, pass }
    }

    fn evaluate(&mut self, key: &str, expected: &str) -> (String, bool) {
        let s = &self.case.file.spec;
        let cfg = self.cfg;
        if key == "verdict" {
            return match self.plane() {
                Ok(a) => {
                    let l = a.verdict.label();
                    let pass = l == expected;
                    (l, pass)
                }
                Err(e) => (err_label(e), false),
            };
        }
        if key == "rays" {
            return match self.plane() {
                Ok(a) => {
                    let mut got: Vec<String> = a.fibers.iter().map(|f| f.ray.to_string()).collect();
                    let mut want: Vec<String> = expected.split(',').map(|r| r.trim().to_string()).filter(|r| !r.is_empty()).collect();
                    got.sort();
                    want.sort();
                    (got.join(", "), got == want)
                }
                Err(e) => (err_label(e), false),
            };
        }
        if key == "regularity" {
            let probe = self
                .case
                .file
                .pair_arcs()
                .and_then(|p| p.ok_or_else(|| Error::InvalidArc("no pair family declared".into())))
                .and_then(|(a, b)| l_regularity_probe(s, (&a, &b), &cfg.schedule, cfg));
            return match probe {
                Ok(r) => {
                    let l = format!("{:?}", r.verdict);
                    let pass = l == expected;
                    (l, pass)
                }
                Err(e) => (err_label(&e), false),
            };
        }
        if key == "case_iv" {
            let outcome = self.case_iv();
            let pass = outcome == expected;
            return (outcome, pass);
        }
        if let Some(ray) = key.strip_prefix("fiber.") {
            return match ray.parse::<Ray>().and_then(|r| nash_fiber(s, r, cfg)) {
                Ok(f) => {
                    let l = format!("{:?}", f.classification);
                    let pass = l == expected;
                    (l, pass)
                }
                Err(e) => (err_label(&e), false),
            };
        }
        if let Some(ray) = key.strip_prefix("fiber_interval.") {
            let Some((lo, hi)) = parse_pair(expected) else {
                return ("unreadable expectation".into(), false);
            };
            return match ray.parse::<Ray>().and_then(|r| nash_fiber(s, r, cfg)) {
                Ok(f) => {
                    let glo = f.fiber.intervals.iter().map(|i| i.0).fold(f64::INFINITY, f64::min);
                    let ghi = f.fiber.intervals.iter().map(|i| i.1).fold(f64::NEG_INFINITY, f64::max);
                    (format!("{glo:.6}, {ghi:.6}"), close(glo, lo) && close(ghi, hi))
                }
                Err(e) => (err_label(&e), false),
            };
        }
        (format!("unknown expectation key '{key}'"), false)
    }

    /// `Ok` when every flat/fast/flat triple assembles, else the first error kind.
    fn case_iv(&mut self) -> String {
        let (s, cfg) = (&self.case.file.spec, self.cfg);
        let quads = if let Some(names) = &self.case.file.map_arcs {
            match names.iter().map(|n| self.case.file.arc(n).cloned()).collect::<Result<Vec<_>>>() {
                Ok(v) if v.len() == 4 => vec![[v[0].clone(), v[1].clone(), v[2].clone(), v[3].clone()]],
                Ok(v) => return format!("InvalidArc: map.arcs has {} arcs", v.len()),
                Err(e) => return e.kind().into(),
            }
        } else {
            match self.plane() {
                Ok(a) => a.partitions.iter().filter(|(p, _)| p.ray == Ray::PosY).flat_map(|(p, _)| partition_triples(p)).collect(),
                Err(e) => return e.kind().into(),
            }
        };
        if quads.is_empty() {
            return "NoTriple".into();
        }
        for q in &quads {
            if let Err(e) = assemble_case_iv(s, [&q[0], &q[1], &q[2], &q[3]], cfg) {
                return e.kind().into();
            }
        }
        "Ok".into()
    }
}

pub fn run_case(case: &FixtureCase, cfg: &Config) -> CaseResult {
    let start = Instant::now();
    let mut runner = Runner { case, cfg, plane: None };
    let checks = case.file.expect.iter().map(|(k, v)| runner.check(k, v)).collect();
    CaseResult { name: case.name.clone(), checks, elapsed: start.elapsed() }
}

/// Runs every case whose name contains `filter`.
pub fn run_corpus(cases: &[FixtureCase], cfg: &Config, filter: Option<&str>) -> CorpusReport {
    let selected: Vec<&FixtureCase> = cases.iter().filter(|c| filter.is_none_or(|f| c.name.contains(f))).collect();
    CorpusReport { cases: selected.par_iter().map(|c| run_case(c, cfg)).collect() }
}

/// Fixture directory shipped with this crate.
pub fn default_fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}
