//! Scenario runner behind the `gqlab` binary.
//!
//! A suite is a fixed list of named checks. Each check records the measured
//! value, the value it is compared with, where that value comes from and a
//! tolerance. Diagnostic checks are reported but do not enter the overall
//! status. Reports are written in a canonical form (sorted keys, 17
//! significant digits) so that equal runs give equal bytes.

mod suites;

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;
use serde_json::Value;

use crate::fermion_quant::{MAX_FERMION_N, MIN_ODE_STEPS};
use crate::phase_space::Family;
use crate::symmetry::MAX_TORUS_N;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
/// Only environment input the runner reads.
pub const OUT_DIR_ENV: &str = "GQLAB_OUT_DIR";
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_OUT_DIR: &str = "reports";
pub const PLUMBING: &str = "plumbing";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Geometry,
    Grassmann,
    FermionTransport,
    FermionFlatness,
    BosonTransport,
    BosonFlatness,
    Symmetry,
    CutLocus,
    PaperDiscrepancies,
}

impl Suite {
    pub const ALL: [Suite; 9] = [
        Suite::Geometry,
        Suite::Grassmann,
        Suite::FermionTransport,
        Suite::FermionFlatness,
        Suite::BosonTransport,
        Suite::BosonFlatness,
        Suite::Symmetry,
        Suite::CutLocus,
        Suite::PaperDiscrepancies,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Suite::Geometry => "geometry",
            Suite::Grassmann => "grassmann",
            Suite::FermionTransport => "fermion-transport",
            Suite::FermionFlatness => "fermion-flatness",
            Suite::BosonTransport => "boson-transport",
            Suite::BosonFlatness => "boson-flatness",
            Suite::Symmetry => "symmetry",
            Suite::CutLocus => "cut-locus",
            Suite::PaperDiscrepancies => "paper-discrepancies",
        }
    }

    /// Inclusive range of `n` the suite accepts.
    fn n_range(&self) -> (usize, usize) {
        match self {
            Suite::Geometry => (1, 3),
            Suite::Grassmann => (1, MAX_FERMION_N),
            Suite::FermionTransport => (2, MAX_FERMION_N),
            Suite::FermionFlatness => (2, 3),
            Suite::BosonTransport | Suite::BosonFlatness => (1, 2),
            Suite::Symmetry => (2, MAX_TORUS_N.min(3)),
            Suite::CutLocus => (2, MAX_FERMION_N),
            Suite::PaperDiscrepancies => (1, 2),
        }
    }

    fn family(&self) -> Option<Family> {
        match self {
            Suite::FermionTransport | Suite::FermionFlatness | Suite::CutLocus => Some(Family::Euclidean),
            Suite::BosonTransport | Suite::BosonFlatness => Some(Family::Symplectic),
            _ => None,
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        Suite::ALL.into_iter().find(|x| x.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Suite::ALL.iter().map(|x| x.name()).collect();
            ConfigError::field("suite", format!("unknown suite `{s}` (expected one of {})", names.join(", ")))
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{field}: {message}")]
    Field { field: String, message: String },
    #[error("config is not valid JSON: {0}")]
    Parse(String),
    #[error("cannot read config: {0}")]
    Io(String),
}

impl ConfigError {
    fn field(field: &str, message: impl Into<String>) -> Self {
        ConfigError::Field { field: field.to_string(), message: message.into() }
    }
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_tol_scale() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub suite: Suite,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Overrides the suite's own list of dimensions.
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub family: Option<Family>,
    /// Geodesic parameters; replaces the suite's default list when non-empty.
    #[serde(default)]
    pub b: Vec<f64>,
    /// Seed of the unitary `k` in normal-form paths (defaults to `seed`).
    #[serde(default)]
    pub k_seed: Option<u64>,
    #[serde(default = "default_tol_scale")]
    pub tol_scale: f64,
    /// Per-check tolerance overrides, keyed by check id.
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    /// RK4 steps for the fermionic transport ODE.
    #[serde(default)]
    pub steps: Option<usize>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Record wall-clock timings (makes reports run-dependent).
    #[serde(default)]
    pub timings: bool,
}

impl ScenarioConfig {
    pub fn new(suite: Suite) -> Self {
        ScenarioConfig {
            suite,
            seed: DEFAULT_SEED,
            n: None,
            family: None,
            b: Vec::new(),
            k_seed: None,
            tol_scale: 1.0,
            tolerances: BTreeMap::new(),
            steps: None,
            out: None,
            timings: false,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig = serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.tol_scale.is_finite() && self.tol_scale > 0.0) {
            return Err(ConfigError::field("tol_scale", format!("must be positive and finite, got {}", self.tol_scale)));
        }
        for (id, &t) in &self.tolerances {
            if !(t.is_finite() && t > 0.0) {
                return Err(ConfigError::field(&format!("tolerances.{id}"), format!("must be positive and finite, got {t}")));
            }
        }
        if let Some(n) = self.n {
            let (lo, hi) = self.suite.n_range();
            if n < lo || n > hi {
                return Err(ConfigError::field("n", format!("{n} outside {lo}..={hi} for suite {}", self.suite)));
            }
        }
        if let (Some(f), Some(want)) = (self.family, self.suite.family()) {
            if f != want {
                return Err(ConfigError::field("family", format!("suite {} runs on the {want:?} family", self.suite)));
            }
        }
        for (i, &b) in self.b.iter().enumerate() {
            if !(b.is_finite() && b > 0.0) {
                return Err(ConfigError::field(&format!("b[{i}]"), format!("must be positive and finite, got {b}")));
            }
            let limit = match self.suite {
                Suite::FermionTransport => Some(std::f64::consts::FRAC_PI_2),
                Suite::BosonTransport => Some(3.0),
                _ => None,
            };
            if let Some(l) = limit {
                if b >= l {
                    return Err(ConfigError::field(&format!("b[{i}]"), format!("{b} is not below {l} for suite {}", self.suite)));
                }
            }
        }
        if let Some(s) = self.steps {
            if s < MIN_ODE_STEPS {
                return Err(ConfigError::field("steps", format!("at least {MIN_ODE_STEPS} steps are needed, got {s}")));
            }
        }
        Ok(())
    }

    pub fn k_seed(&self) -> u64 {
        self.k_seed.unwrap_or(self.seed)
    }
}

/// One verification record.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub id: String,
    /// Topic of the check, or [`PLUMBING`].
    pub anchor: String,
    pub measured: f64,
    pub expected: f64,
    /// Where `expected` comes from: closed-form, oracle, exact, regression, informational.
    pub provenance: String,
    pub tol: f64,
    pub pass: bool,
    /// Reported only; excluded from the overall status.
    pub diagnostic: bool,
}

impl Check {
    pub fn new(id: &str, anchor: &str, measured: f64, expected: f64, tol: f64, provenance: &str) -> Self {
        let pass = (measured - expected).abs() <= tol || (measured == expected);
        Check {
            id: id.to_string(),
            anchor: anchor.to_string(),
            measured,
            expected,
            provenance: provenance.to_string(),
            tol,
            pass,
            diagnostic: false,
        }
    }

    pub fn diagnostic(mut self) -> Self {
        self.diagnostic = true;
        self
    }

    pub fn deviation(&self) -> f64 {
        (self.measured - self.expected).abs()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerificationReport {
    pub suite: Suite,
    pub seed: u64,
    pub checks: Vec<Check>,
    /// Seconds per suite part; empty unless timings were requested.
    pub timings: BTreeMap<String, f64>,
    pub version: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

impl Format {
    pub fn extension(&self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

impl FromStr for Format {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            _ => Err(ConfigError::field("format", format!("unknown format `{s}` (json or csv)"))),
        }
    }
}

fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "\"NaN\"".into()
    } else if x.is_infinite() {
        if x > 0.0 { "\"inf\"".into() } else { "\"-inf\"".into() }
    } else {
        format!("{x:.16e}")
    }
}

fn fmt_str(s: &str) -> String {
    serde_json::to_string(s).expect("strings serialize")
}

fn csv_field(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

fn csv_f64(x: f64) -> String {
    if x.is_finite() { format!("{x:.16e}") } else if x.is_nan() { "NaN".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() }
}

fn parse_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => match s.as_str() {
            "NaN" => Some(f64::NAN),
            "inf" => Some(f64::INFINITY),
            "-inf" => Some(f64::NEG_INFINITY),
            _ => None,
        },
        _ => None,
    }
}

impl VerificationReport {
    /// Conjunction over the non-diagnostic checks.
    pub fn passed(&self) -> bool {
        self.checks.iter().filter(|c| !c.diagnostic).all(|c| c.pass)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.diagnostic && !c.pass).collect()
    }

    pub fn find(&self, id: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.id == id)
    }

    pub fn to_json(&self) -> String {
        let mut s = String::from("{\n  \"checks\": [");
        for (k, c) in self.checks.iter().enumerate() {
            s.push_str(if k == 0 { "\n" } else { ",\n" });
            let _ = write!(
                s,
                "    {{\"anchor\": {}, \"diagnostic\": {}, \"expected\": {}, \"id\": {}, \"measured\": {}, \"pass\": {}, \"provenance\": {}, \"tol\": {}}}",
                fmt_str(&c.anchor),
                c.diagnostic,
                fmt_f64(c.expected),
                fmt_str(&c.id),
                fmt_f64(c.measured),
                c.pass,
                fmt_str(&c.provenance),
                fmt_f64(c.tol)
            );
        }
        if !self.checks.is_empty() {
            s.push_str("\n  ");
        }
        let _ = write!(s, "],\n  \"pass\": {},\n  \"seed\": {},\n  \"suite\": {},\n  \"timings\": {{", self.passed(), self.seed, fmt_str(self.suite.name()));
        for (k, (name, t)) in self.timings.iter().enumerate() {
            let _ = write!(s, "{}{}: {}", if k == 0 { "" } else { ", " }, fmt_str(name), fmt_f64(*t));
        }
        let _ = write!(s, "}},\n  \"version\": {}\n}}\n", fmt_str(&self.version));
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("id,anchor,measured,expected,provenance,tol,pass,diagnostic\n");
        for c in &self.checks {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                csv_field(&c.id),
                csv_field(&c.anchor),
                csv_f64(c.measured),
                csv_f64(c.expected),
                csv_field(&c.provenance),
                csv_f64(c.tol),
                c.pass,
                c.diagnostic
            );
        }
        s
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => self.to_json(),
            Format::Csv => self.to_csv(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let v: Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
        let obj = v.as_object().ok_or("report is not a JSON object")?;
        let suite: Suite = obj
            .get("suite")
            .and_then(Value::as_str)
            .ok_or("missing suite")?
            .parse()
            .map_err(|e: ConfigError| e.to_string())?;
        let seed = obj.get("seed").and_then(Value::as_u64).ok_or("missing seed")?;
        let version = obj.get("version").and_then(Value::as_str).unwrap_or("").to_string();
        let mut timings = BTreeMap::new();
        if let Some(t) = obj.get("timings").and_then(Value::as_object) {
            for (k, x) in t {
                timings.insert(k.clone(), parse_f64(x).ok_or_else(|| format!("bad timing {k}"))?);
            }
        }
        let mut checks = Vec::new();
        for (i, c) in obj.get("checks").and_then(Value::as_array).ok_or("missing checks")?.iter().enumerate() {
            let text = |k: &str| c.get(k).and_then(Value::as_str).map(str::to_string).ok_or_else(|| format!("check {i}: missing {k}"));
            let num = |k: &str| c.get(k).and_then(parse_f64).ok_or_else(|| format!("check {i}: missing {k}"));
            let flag = |k: &str| c.get(k).and_then(Value::as_bool).ok_or_else(|| format!("check {i}: missing {k}"));
            checks.push(Check {
                id: text("id")?,
                anchor: text("anchor")?,
                measured: num("measured")?,
                expected: num("expected")?,
                provenance: text("provenance")?,
                tol: num("tol")?,
                pass: flag("pass")?,
                diagnostic: c.get("diagnostic").and_then(Value::as_bool).unwrap_or(false),
            });
        }
        Ok(VerificationReport { suite, seed, checks, timings, version })
    }

    pub fn file_name(&self, format: Format) -> String {
        format!("{}-seed{}.{}", self.suite.name(), self.seed, format.extension())
    }
}

/// Writes the report into `dir` in each requested format.
pub fn emit_tables(report: &VerificationReport, dir: &Path, formats: &[Format]) -> std::io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut out = Vec::new();
    for &f in formats {
        let path = dir.join(report.file_name(f));
        std::fs::write(&path, report.render(f))?;
        out.push(path);
    }
    Ok(out)
}

/// Output directory: command line, then the environment override, then the
/// config, then [`DEFAULT_OUT_DIR`].
pub fn resolve_out_dir(cli: Option<&Path>, cfg: &ScenarioConfig) -> PathBuf {
    if let Some(p) = cli {
        return p.to_path_buf();
    }
    if let Some(p) = std::env::var_os(OUT_DIR_ENV).filter(|p| !p.is_empty()) {
        return PathBuf::from(p);
    }
    cfg.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

/// Runs a validated configuration.
pub fn run_suite(cfg: &ScenarioConfig) -> Result<VerificationReport, ConfigError> {
    cfg.validate()?;
    let mut run = suites::Run::new(cfg);
    suites::run(cfg.suite, &mut run);
    Ok(VerificationReport {
        suite: cfg.suite,
        seed: cfg.seed,
        checks: run.checks,
        timings: if cfg.timings { run.timings } else { BTreeMap::new() },
        version: VERSION.to_string(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Drift {
    pub id: String,
    pub golden: f64,
    pub current: f64,
    pub tol: f64,
    pub ok: bool,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct Comparison {
    pub drifts: Vec<Drift>,
    /// Checks in the golden report that the current one lacks.
    pub missing: Vec<String>,
    pub added: Vec<String>,
}

impl Comparison {
    pub fn ok(&self) -> bool {
        self.missing.is_empty() && self.drifts.iter().all(|d| d.ok)
    }
}

/// Golden-file comparison: a check drifts when its measured value moves by
/// more than the golden tolerance or its pass flag flips.
pub fn compare(golden: &VerificationReport, current: &VerificationReport) -> Comparison {
    let mut out = Comparison::default();
    let cur: BTreeMap<&str, &Check> = current.checks.iter().map(|c| (c.id.as_str(), c)).collect();
    let gold: BTreeMap<&str, &Check> = golden.checks.iter().map(|c| (c.id.as_str(), c)).collect();
    for g in &golden.checks {
        match cur.get(g.id.as_str()) {
            None => out.missing.push(g.id.clone()),
            Some(c) => {
                let same = g.measured.to_bits() == c.measured.to_bits() || (g.measured.is_nan() && c.measured.is_nan());
                let ok = (same || (g.measured - c.measured).abs() <= g.tol) && g.pass == c.pass;
                out.drifts.push(Drift { id: g.id.clone(), golden: g.measured, current: c.measured, tol: g.tol, ok });
            }
        }
    }
    out.added = current.checks.iter().filter(|c| !gold.contains_key(c.id.as_str())).map(|c| c.id.clone()).collect();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> VerificationReport {
        VerificationReport {
            suite: Suite::Grassmann,
            seed: 7,
            checks: vec![
                Check::new("a", PLUMBING, 1e-13, 0.0, 1e-12, "exact"),
                Check::new("b, with comma", "topic \"quoted\"", f64::NAN, 1.0, 1e-9, "oracle").diagnostic(),
                Check::new("c", PLUMBING, 0.1 + 0.2, 0.3, 1e-15, "closed-form"),
            ],
            timings: BTreeMap::new(),
            version: VERSION.into(),
        }
    }

    #[test]
    fn json_round_trip_is_byte_stable() {
        let r = sample();
        let text = r.to_json();
        assert_eq!(text, r.to_json());
        let back = VerificationReport::from_json(&text).unwrap();
        assert_eq!(back.to_json(), text);
        assert_eq!(back.checks[2].measured.to_bits(), (0.1f64 + 0.2).to_bits());
        assert!(back.checks[1].measured.is_nan());
        assert!(r.passed());
    }

    #[test]
    fn csv_has_one_row_per_check() {
        let r = sample();
        let csv = r.to_csv();
        assert_eq!(csv.lines().count(), r.checks.len() + 1);
        assert!(csv.contains("\"b, with comma\""));
        assert!(csv.contains("\"topic \"\"quoted\"\"\""));
    }

    #[test]
    fn config_validation_names_the_field() {
        let e = ScenarioConfig::from_json(r#"{"suite": "grassmann", "tolerances": {"x": -1e-9}}"#).unwrap_err();
        assert!(e.to_string().starts_with("tolerances.x:"), "{e}");
        let e = ScenarioConfig::from_json(r#"{"suite": "boson-transport", "n": 3}"#).unwrap_err();
        assert!(e.to_string().starts_with("n:"), "{e}");
        let e = ScenarioConfig::from_json(r#"{"suite": "cut-locus", "family": "symplectic"}"#).unwrap_err();
        assert!(e.to_string().starts_with("family:"), "{e}");
        assert!(matches!(ScenarioConfig::from_json(r#"{"suite": "grassmann", "bogus": 1}"#), Err(ConfigError::Parse(_))));
        assert!(matches!(ScenarioConfig::from_json(r#"{"suite": "nope"}"#), Err(ConfigError::Parse(_))));
        let ok = ScenarioConfig::from_json(r#"{"suite": "fermion-transport", "n": 2, "b": [0.8], "seed": 42}"#).unwrap();
        assert_eq!((ok.n, ok.seed, ok.tol_scale), (Some(2), 42, 1.0));
    }

    #[test]
    fn compare_flags_drift_beyond_tolerance() {
        let g = sample();
        let mut c = g.clone();
        assert!(compare(&g, &c).ok());
        c.checks[0].measured = 5e-13;
        assert!(compare(&g, &c).ok());
        c.checks[0].measured = 5e-12;
        assert!(!compare(&g, &c).ok());
        let mut d = g.clone();
        d.checks.pop();
        assert_eq!(compare(&g, &d).missing, vec!["c".to_string()]);
    }
}
