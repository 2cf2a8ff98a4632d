//! Configuration-driven verification suites with machine-readable reports.
//!
//! Each suite runs a fixed list of checks. A check compares one measured
//! number against an expectation or a bound and carries an anchor naming the
//! result it exercises; [`ANCHORS`] ties every anchor to the one library
//! operation that implements it.

mod atoms_suite;
mod basic;
mod frame;
mod maximal_suite;
mod norms;
mod potential;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{invalid, Error, Result};
use crate::exponent::{ExponentFn, ExponentSpec};
use crate::grid::GridSpec;

pub const SUITES: [&str; 8] = ["algebra", "measure", "luxemburg", "ballnorms", "maximal", "atoms", "riesz", "hardy"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub path: String,
    #[serde(default)]
    pub format: ReportFormat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Json,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            other => invalid(format!("unknown report format `{other}`")),
        }
    }
}

fn one_or_many<'de, D, T>(d: D) -> std::result::Result<Vec<T>, D::Error>
where
    D: Deserializer<'de>,
    T: Deserialize<'de>,
{
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany<T> {
        One(T),
        Many(Vec<T>),
    }
    Ok(match OneOrMany::deserialize(d)? {
        OneOrMany::One(v) => vec![v],
        OneOrMany::Many(v) => v,
    })
}

fn default_exponents() -> Vec<ExponentSpec> {
    let spec = |kind: &str, params: serde_json::Value| ExponentSpec {
        kind: kind.into(),
        params,
    };
    vec![
        spec("constant", serde_json::json!({"p0": 2.0})),
        spec("log_decay", serde_json::json!({"p_inf": 2.0, "A": 0.5})),
        spec("gaussian_bump", serde_json::json!({"a": 1.5, "b": 0.5, "s": 1.0})),
        spec("gaussian_bump", serde_json::json!({"a": 0.9, "b": 0.3, "s": 1.0})),
        spec("gaussian_bump", serde_json::json!({"a": 1.2, "b": 0.4, "s": 1.0})),
    ]
}

fn default_alphas() -> Vec<f64> {
    vec![1.0, 2.0]
}

fn default_orders() -> Vec<u32> {
    vec![1, 2]
}

fn default_beta() -> f64 {
    2.0
}

fn default_seeds() -> Vec<u64> {
    (1..=5).collect()
}

fn default_deltas() -> Vec<f64> {
    vec![0.25, 0.5, 1.0]
}

fn default_centers() -> Vec<[f64; 3]> {
    vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]
}

/// Suite configuration; every field except `suite` has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    #[serde(default)]
    pub suite: String,
    /// Grid override for the suites built on one fixed grid (`measure`,
    /// `luxemburg`); other suites derive their grids from the ball sizes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default = "default_exponents")]
    pub exponents: Vec<ExponentSpec>,
    #[serde(default = "default_alphas", alias = "alpha", deserialize_with = "one_or_many")]
    pub alphas: Vec<f64>,
    #[serde(default = "default_orders", alias = "N", deserialize_with = "one_or_many")]
    pub orders: Vec<u32>,
    #[serde(default = "default_beta")]
    pub beta_margin: f64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_deltas")]
    pub deltas: Vec<f64>,
    #[serde(default = "default_centers")]
    pub centers: Vec<[f64; 3]>,
    /// Random samples for the `algebra` suite.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    /// Per-check tolerance overrides, keyed by check name.
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputConfig>,
}

impl SuiteConfig {
    pub fn new(suite: &str) -> Self {
        Self {
            suite: suite.into(),
            grid: None,
            exponents: default_exponents(),
            alphas: default_alphas(),
            orders: default_orders(),
            beta_margin: default_beta(),
            seeds: default_seeds(),
            deltas: default_deltas(),
            centers: default_centers(),
            samples: None,
            tolerances: BTreeMap::new(),
            output: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn validate(&self) -> Result<()> {
        if !SUITES.contains(&self.suite.as_str()) {
            return Err(Error::UnknownSuite(self.suite.clone()));
        }
        if !(self.beta_margin >= 1.0) || !self.beta_margin.is_finite() {
            return invalid(format!("beta_margin must be ≥ 1, got {}", self.beta_margin));
        }
        if self.seeds.is_empty() {
            return invalid("seed list must not be empty");
        }
        if self.exponents.is_empty() {
            return invalid("exponent list must not be empty");
        }
        if let Some(a) = self.alphas.iter().find(|a| !(**a > 0.0 && **a < 4.0)) {
            return invalid(format!("alpha must lie in (0, Q), got {a}"));
        }
        if self.orders.contains(&0) {
            return invalid("kernel orders N must be ≥ 1");
        }
        if let Some(d) = self.deltas.iter().find(|d| !(**d > 0.0) || !d.is_finite()) {
            return invalid(format!("ball radii must be positive, got {d}"));
        }
        if self.centers.iter().flatten().any(|c| !c.is_finite()) {
            return invalid("ball centers must be finite");
        }
        if let Some(g) = &self.grid {
            g.validate()?;
        }
        if let Some((k, v)) = self.tolerances.iter().find(|(_, v)| !(**v >= 0.0)) {
            return invalid(format!("tolerance `{k}` must be nonnegative, got {v}"));
        }
        self.exponent_fns()?;
        Ok(())
    }

    pub fn exponent_fns(&self) -> Result<Vec<ExponentFn>> {
        self.exponents.iter().cloned().map(ExponentFn::try_from).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// `|measured − expected| ≤ tolerance`
    Absolute,
    /// `|measured − expected| ≤ tolerance·|expected|`
    Relative,
    /// `measured ≤ expected + tolerance`
    AtMost,
    /// `measured ≥ expected − tolerance`
    AtLeast,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub anchor: String,
    pub measured: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub comparison: Comparison,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub note: String,
}

impl CheckResult {
    fn evaluate(measured: f64, expected: f64, tolerance: f64, comparison: Comparison) -> bool {
        match comparison {
            Comparison::Absolute => (measured - expected).abs() <= tolerance,
            Comparison::Relative => (measured - expected).abs() <= tolerance * expected.abs(),
            Comparison::AtMost => measured <= expected + tolerance,
            Comparison::AtLeast => measured >= expected - tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub library_version: String,
    pub config: SuiteConfig,
    pub checks: Vec<CheckResult>,
    #[serde(default)]
    pub notes: Vec<String>,
    pub pass: bool,
}

impl SuiteReport {
    pub fn failed(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

/// Accumulates checks for one suite.
pub(crate) struct Checks<'a> {
    pub(crate) config: &'a SuiteConfig,
    checks: Vec<CheckResult>,
    notes: Vec<String>,
}

impl<'a> Checks<'a> {
    fn new(config: &'a SuiteConfig) -> Self {
        Self {
            config,
            checks: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub(crate) fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    fn push(
        &mut self,
        name: &str,
        anchor: &str,
        measured: f64,
        expected: f64,
        tolerance: f64,
        comparison: Comparison,
        note: String,
    ) -> Result<()> {
        debug_assert!(anchor_entry(anchor).is_some(), "unregistered anchor {anchor}");
        if !measured.is_finite() || !expected.is_finite() {
            return Err(Error::CheckAborted {
                check: name.into(),
                reason: format!("non-finite value (measured {measured}, expected {expected})"),
            });
        }
        let tolerance = self.config.tolerances.get(name).copied().unwrap_or(tolerance);
        let pass = CheckResult::evaluate(measured, expected, tolerance, comparison);
        self.checks.push(CheckResult {
            name: name.into(),
            anchor: anchor.into(),
            measured,
            expected,
            tolerance,
            comparison,
            pass,
            note,
        });
        Ok(())
    }

    pub(crate) fn abs(&mut self, name: &str, anchor: &str, measured: f64, expected: f64, tol: f64) -> Result<()> {
        self.push(name, anchor, measured, expected, tol, Comparison::Absolute, String::new())
    }

    pub(crate) fn rel(&mut self, name: &str, anchor: &str, measured: f64, expected: f64, tol: f64) -> Result<()> {
        self.push(name, anchor, measured, expected, tol, Comparison::Relative, String::new())
    }

    pub(crate) fn at_most(&mut self, name: &str, anchor: &str, measured: f64, bound: f64) -> Result<()> {
        self.push(name, anchor, measured, bound, 0.0, Comparison::AtMost, String::new())
    }

    pub(crate) fn at_least(&mut self, name: &str, anchor: &str, measured: f64, bound: f64) -> Result<()> {
        self.push(name, anchor, measured, bound, 0.0, Comparison::AtLeast, String::new())
    }

    /// Boolean outcome recorded as `measured = 1` against `expected = 1`.
    pub(crate) fn holds(&mut self, name: &str, anchor: &str, ok: bool, note: impl Into<String>) -> Result<()> {
        let m = if ok { 1.0 } else { 0.0 };
        self.push(name, anchor, m, 1.0, 0.0, Comparison::Absolute, note.into())
    }

    pub(crate) fn with_note(&mut self, note: impl Into<String>) {
        if let Some(last) = self.checks.last_mut() {
            last.note = note.into();
        }
    }

    /// Max/min spread of positive values, checked against `limit`.
    pub(crate) fn spread(&mut self, name: &str, anchor: &str, values: &[f64], limit: f64) -> Result<()> {
        let s = spread(values);
        self.at_most(name, anchor, s, limit)?;
        self.with_note(format!("{} values, min {:.6e}, max {:.6e}", values.len(), min(values), max(values)));
        Ok(())
    }
}

pub(crate) fn max(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

pub(crate) fn min(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::INFINITY, f64::min)
}

/// `max/min` of positive values; infinite if any value is not positive.
pub(crate) fn spread(values: &[f64]) -> f64 {
    let lo = min(values);
    if !(lo > 0.0) {
        return f64::INFINITY;
    }
    max(values) / lo
}

/// Least-squares slope of `y` against `x`.
pub(crate) fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Slope of `ln y` against `ln x`.
pub(crate) fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    slope(&lx, &ly)
}

/// Result exercised by a check, and the one operation implementing it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Anchor {
    pub key: &'static str,
    pub statement: &'static str,
    pub operation: &'static str,
}

pub const ANCHORS: &[Anchor] = &[
    Anchor { key: "group-law", statement: "group law, inverse and identity of the Heisenberg group", operation: "group::group_mul" },
    Anchor { key: "dilation-automorphism", statement: "dilations r·(x,t) = (rx, r²t) are group automorphisms", operation: "group::dilate" },
    Anchor { key: "koranyi-norm", statement: "symmetry and triangle inequalities of the Koranyi norm", operation: "group::koranyi_norm" },
    Anchor { key: "ball-translation", statement: "z₀·B(z,δ) = B(z₀z,δ)", operation: "group::ball_contains" },
    Anchor { key: "invariant-fields", statement: "closed forms of the left and right invariant vector fields", operation: "group::invariant_derivative" },
    Anchor { key: "haar-measure", statement: "Haar measure is Lebesgue measure and is translation invariant", operation: "grid::integrate" },
    Anchor { key: "ball-volume", statement: "|B(z,δ)| = δ^Q·|B(e,1)|", operation: "grid::Grid::ball_measure" },
    Anchor { key: "exponent-bounds", statement: "declared bounds p₋, p₊ of a variable exponent", operation: "exponent::make_exponent" },
    Anchor { key: "conjugate-exponent", statement: "(p')₊ = (p₋)' for the conjugate exponent", operation: "exponent::conjugate" },
    Anchor { key: "log-holder", statement: "local and at-infinity log-Hölder continuity", operation: "exponent::log_holder_estimate" },
    Anchor { key: "log-holder-reciprocal", statement: "p ∈ 𝒫^log if and only if 1/p ∈ 𝒫^log", operation: "exponent::log_holder_estimate_fn" },
    Anchor { key: "luxemburg-norm", statement: "Luxemburg norm as the infimum of admissible λ", operation: "luxemburg::luxemburg_norm" },
    Anchor { key: "luxemburg-homogeneity", statement: "‖cf‖ = |c|·‖f‖", operation: "luxemburg::PreparedModular::norm" },
    Anchor { key: "luxemburg-quasi-triangle", statement: "‖f+g‖ ≤ 2^{1/p̲−1}(‖f‖+‖g‖)", operation: "luxemburg::luxemburg_norm_with" },
    Anchor { key: "luxemburg-power", statement: "‖f‖^s_{p(·)} = ‖|f|^s‖_{p(·)/s}", operation: "luxemburg::modular" },
    Anchor { key: "holder", statement: "Hölder inequality with constant 2 in variable Lebesgue spaces", operation: "luxemburg::holder_pairing" },
    Anchor { key: "dual-norm", statement: "norm equivalent to the supremum of pairings with the unit ball of L^{p'(·)}", operation: "luxemburg::dual_norm_estimate" },
    Anchor { key: "ball-norm-product", statement: "‖χ_B‖_{p(·)}‖χ_B‖_{p'(·)} ≈ |B| uniformly over balls", operation: "luxemburg::ball_indicator_norm" },
    Anchor { key: "ball-norm-dilate", statement: "‖χ_{λB}‖_{p(·)} ≈ ‖χ_B‖_{p(·)} for fixed λ > 1", operation: "grid::Grid::ball_cells" },
    Anchor { key: "bump-sum", statement: "‖Σλₖbₖ‖_{q(·)/q⋆} ≲ ‖ΣAₖλₖχ_{Bₖ}‖_{q(·)/q⋆} for bumps with ‖bₖ‖_s ≤ Aₖ|Bₖ|^{1/s}", operation: "luxemburg::script_a_with_power" },
    Anchor { key: "maximal-definition", statement: "fractional maximal operator M_α with M₀ = M", operation: "operators::frac_maximal" },
    Anchor { key: "fefferman-stein", statement: "off-diagonal vector-valued inequality for M_α from L^{p(·)} to L^{q(·)}", operation: "operators::fs_ratio" },
    Anchor { key: "kernel-type", statement: "kernels of type (α,N): |X̃^I K| ≲ ρ^{α−Q−d(I)}", operation: "operators::validate_kernel_type" },
    Anchor { key: "riesz-potential", statement: "Riesz potential as convolution with ρ^{α−Q}", operation: "operators::convolve" },
    Anchor { key: "riesz-homogeneity", statement: "ρ^{α−Q} is homogeneous of degree α−Q under dilations", operation: "operators::riesz_kernel" },
    Anchor { key: "convolution-translation", statement: "left translations commute with right convolution", operation: "operators::convolve_onto" },
    Anchor { key: "atom-axioms", statement: "support, size and moment conditions of a (p(·),p₀,D)-atom", operation: "atoms::make_atom" },
    Anchor { key: "atom-validation", statement: "moment conditions against the monomials z^I with d(I) ≤ D", operation: "atoms::validate_atom" },
    Anchor { key: "atom-projection", statement: "moment-vanishing projection of a bump", operation: "atoms::project_moments" },
    Anchor { key: "atom-translation", statement: "a(z₀·) is an atom centered at B(e,δ)", operation: "atoms::translate_atom" },
    Anchor { key: "atomic-sum", statement: "finite atomic sums converge in L^{p₀}", operation: "atoms::synthesize" },
    Anchor { key: "script-a", statement: "the 𝒜-quantity of an atomic decomposition", operation: "luxemburg::script_a" },
    Anchor { key: "script-a-power", statement: "𝒜 with any power 0 < p⋆ < p̲ is equivalent to 𝒜", operation: "luxemburg::script_a_with_power" },
    Anchor { key: "script-a-sobolev", statement: "𝒜(λ,B,q(·)) ≲ 𝒜(λ,B,p(·)) for 1/q = 1/p − α/Q", operation: "exponent::sobolev_exponent" },
    Anchor { key: "atom-decay", statement: "|T_α a(z)| ≲ δ^{N}ρ(z)^{α−Q−N}·‖a‖-size outside 2β^N B", operation: "operators::convolve_at" },
    Anchor { key: "hardy-to-lebesgue", statement: "T_α extends to a bounded operator from H^{p(·)} to L^{q(·)}", operation: "operators::convolve" },
    Anchor { key: "riesz-bounded", statement: "R_α is bounded from H^{p(·)} to L^{q(·)} and to H^{q(·)}", operation: "operators::riesz_kernel" },
    Anchor { key: "grand-maximal", statement: "grand maximal function over normalized Schwartz profiles", operation: "operators::grand_maximal" },
    Anchor { key: "atom-hardy-norm", statement: "atoms lie in H^{p(·)} with uniformly bounded norm", operation: "operators::grand_maximal_onto" },
    Anchor { key: "hardy-to-hardy", statement: "T_α extends to a bounded operator from H^{p(·)} to H^{q(·)}", operation: "operators::profile_response" },
];

pub fn anchor_entry(key: &str) -> Option<&'static Anchor> {
    ANCHORS.iter().find(|a| a.key == key)
}

/// Runs the suite named in `config`.
pub fn run_suite(config: &SuiteConfig) -> Result<SuiteReport> {
    config.validate()?;
    let mut checks = Checks::new(config);
    match config.suite.as_str() {
        "algebra" => basic::algebra(&mut checks)?,
        "measure" => basic::measure(&mut checks)?,
        "luxemburg" => norms::luxemburg(&mut checks)?,
        "ballnorms" => norms::ballnorms(&mut checks)?,
        "maximal" => maximal_suite::maximal(&mut checks)?,
        "atoms" => atoms_suite::atoms(&mut checks)?,
        "riesz" => potential::riesz(&mut checks)?,
        "hardy" => potential::hardy(&mut checks)?,
        other => return Err(Error::UnknownSuite(other.into())),
    }
    let pass = checks.checks.iter().all(|c| c.pass);
    Ok(SuiteReport {
        suite: config.suite.clone(),
        library_version: env!("CARGO_PKG_VERSION").into(),
        config: config.clone(),
        checks: checks.checks,
        notes: checks.notes,
        pass,
    })
}

#[derive(Serialize)]
struct CsvRow<'a> {
    suite: &'a str,
    check: &'a str,
    anchor: &'a str,
    measured: f64,
    expected: f64,
    tolerance: f64,
    pass: bool,
}

/// Writes the report as nested JSON or as one CSV row per check.
pub fn emit_report(report: &SuiteReport, path: &Path, format: ReportFormat) -> Result<()> {
    let file = File::create(path)?;
    write_report(report, BufWriter::new(file), format)
}

pub fn write_report<W: Write>(report: &SuiteReport, mut out: W, format: ReportFormat) -> Result<()> {
    match format {
        ReportFormat::Json => {
            serde_json::to_writer_pretty(&mut out, report)?;
            out.write_all(b"\n")?;
        }
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(&mut out);
            if report.checks.is_empty() {
                w.write_record(["suite", "check", "anchor", "measured", "expected", "tolerance", "pass"])?;
            }
            for c in &report.checks {
                w.serialize(CsvRow {
                    suite: &report.suite,
                    check: &c.name,
                    anchor: &c.anchor,
                    measured: c.measured,
                    expected: c.expected,
                    tolerance: c.tolerance,
                    pass: c.pass,
                })?;
            }
            w.flush()?;
        }
    }
    out.flush()?;
    Ok(())
}
