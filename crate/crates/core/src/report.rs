//! Commands behind the command-line front end, and the report they produce.
//!
//! Every command returns a [`Report`]: verdicts with the residual behind each
//! of them, pass/fail assertions that compare closed forms with the dense
//! oracles, and free-form data sections. The structured form is JSON and
//! leaves out wall-clock timings so that equal inputs give equal bytes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use serde::Serialize;
use serde_json::{json, Value};

use crate::classify::{
    centered_closed_form, centered_eu_special, centered_oracle, equivalence_suite, has_unit_weight, hysteresis,
    joint_spectrum_check, normal_closed_form, normal_oracle, CriterionVerdict, Status,
};
use crate::condop::{CondOpSpec, Side};
use crate::gen::{
    counterexample_search, gen_equality_case, gen_orthogonal_case, gen_random, gen_random_kernel, gen_symmetric_pair,
    mix_seed, InstanceRecipe,
};
use crate::instance::{InstanceBody, InstanceFile};
use crate::kernel::KernelSpec;
use crate::measure::{CFun, MeasureSpace, Partition};
use crate::oracle::{self, DenseOperator};
use crate::{Error, Result, DEFAULT_DEPTH, DEFAULT_SUPP_TOL, DEFAULT_TOL};

/// Largest operator handed to the dense oracles.
pub const ORACLE_MAX_DIM: usize = 256;

/// Largest base space whose kernel lift is checked densely (`n² ≤ 256`).
pub const KERNEL_ORACLE_MAX_POINTS: usize = 16;

/// Tolerance for polar reconstruction and the partial-isometry identity.
pub const POLAR_TOL: f64 = 1e-9;

/// Tolerance for the kernel lift round trip.
pub const LIFT_TOL: f64 = 1e-12;

/// Powers checked against the spectral oracle.
pub const POWERS: [f64; 4] = [0.5, 1.0, 2.0, 3.0];

/// Exit codes of the front end.
pub mod exit {
    pub const OK: i32 = 0;
    pub const VIOLATION: i32 = 1;
    pub const INPUT: i32 = 2;
    pub const NUMERICAL: i32 = 3;
}

/// Exit code for a failed command.
pub fn exit_code_for(err: &Error) -> i32 {
    if err.is_numerical() {
        exit::NUMERICAL
    } else {
        exit::INPUT
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Check,
    Polar,
    Aluthge,
    Spectrum,
    Kernel,
    Gen,
    Verify,
    Search,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::Check => "check",
            Self::Polar => "polar",
            Self::Aluthge => "aluthge",
            Self::Spectrum => "spectrum",
            Self::Kernel => "kernel",
            Self::Gen => "gen",
            Self::Verify => "verify",
            Self::Search => "search",
        }
    }
}

/// Tolerances and seeds shared by all commands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Settings {
    /// Closed form versus oracle tolerance.
    pub tol: f64,
    /// Support tolerance; `None` keeps the instance's own value.
    pub supp_tol: Option<f64>,
    pub depth: usize,
    pub seed: u64,
    pub trials: usize,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            supp_tol: None,
            depth: DEFAULT_DEPTH,
            seed: 0,
            trials: 1000,
        }
    }
}

impl Settings {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::Argument(format!("--tol must be positive, got {}", self.tol)));
        }
        if let Some(t) = self.supp_tol {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::Argument(format!("--supp-tol must be non-negative, got {t}")));
            }
        }
        if self.depth == 0 {
            return Err(Error::Argument("--depth must be at least 1".into()));
        }
        if self.trials == 0 {
            return Err(Error::Argument("--trials must be at least 1".into()));
        }
        Ok(())
    }
}

/// A closed-form verdict, optionally next to what the oracle measured.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerdictEntry {
    pub name: String,
    pub status: Status,
    pub criterion_id: String,
    pub residual: f64,
    pub witness: Vec<String>,
    pub matching_supports: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_status: Option<Status>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_residual: Option<f64>,
}

/// A checked property, aggregated over every instance it was evaluated on.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    /// Worst observed value of the checked quantity.
    pub worst: f64,
    pub threshold: f64,
    pub count: usize,
    /// Labels of the instances that failed (at most a handful).
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub failed_on: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub command: Command,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub instance_digest: Option<String>,
    pub settings: Settings,
    /// Support tolerance actually applied.
    pub supp_tol: f64,
    pub verdicts: Vec<VerdictEntry>,
    pub assertions: Vec<Assertion>,
    pub data: BTreeMap<String, Value>,
    pub exit_code: i32,
    #[serde(skip)]
    pub timings: Vec<(String, Duration)>,
}

const MAX_FAILED_LABELS: usize = 5;

impl Report {
    fn new(command: Command, settings: Settings) -> Self {
        Self {
            command,
            instance_digest: None,
            settings,
            supp_tol: settings.supp_tol.unwrap_or(DEFAULT_SUPP_TOL),
            verdicts: Vec::new(),
            assertions: Vec::new(),
            data: BTreeMap::new(),
            exit_code: exit::OK,
            timings: Vec::new(),
        }
    }

    /// Records one evaluation of a property; `value ≤ threshold` passes.
    pub fn assert_le(&mut self, name: &str, value: f64, threshold: f64, label: &str) {
        self.assert_that(name, value <= threshold, value, threshold, label);
    }

    /// Records one evaluation of a property with an explicit outcome.
    pub fn assert_that(&mut self, name: &str, passed: bool, value: f64, threshold: f64, label: &str) {
        let entry = match self.assertions.iter_mut().find(|a| a.name == name) {
            Some(e) => e,
            None => {
                self.assertions.push(Assertion {
                    name: name.to_string(),
                    passed: true,
                    worst: 0.0,
                    threshold,
                    count: 0,
                    failed_on: Vec::new(),
                });
                self.assertions.last_mut().expect("just pushed")
            }
        };
        entry.count += 1;
        if value.is_nan() || value > entry.worst {
            entry.worst = value;
        }
        if !passed {
            entry.passed = false;
            if entry.failed_on.len() < MAX_FAILED_LABELS {
                entry.failed_on.push(label.to_string());
            }
        }
    }

    fn time<T>(&mut self, label: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f();
        self.timings.push((label.to_string(), start.elapsed()));
        out
    }

    fn put(&mut self, key: &str, value: impl Serialize) {
        self.data.insert(
            key.to_string(),
            serde_json::to_value(value).expect("report data is serializable"),
        );
    }

    fn finish(mut self) -> Self {
        self.exit_code = if self.all_passed() { exit::OK } else { exit::VIOLATION };
        self
    }

    pub fn all_passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }

    pub fn assertion(&self, name: &str) -> Option<&Assertion> {
        self.assertions.iter().find(|a| a.name == name)
    }

    pub fn verdict(&self, name: &str) -> Option<&VerdictEntry> {
        self.verdicts.iter().find(|v| v.name == name)
    }

    /// Deterministic structured form.
    pub fn to_structured_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report is serializable");
        s.push('\n');
        s
    }

    /// Human-readable summary, including timings.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = write!(out, "condop {}", self.command.name());
        if let Some(d) = &self.instance_digest {
            let _ = write!(out, "  instance {}", &d[..16.min(d.len())]);
        }
        let _ = writeln!(
            out,
            "  tol {:e}  supp-tol {:e}  depth {}",
            self.settings.tol, self.supp_tol, self.settings.depth
        );
        if !self.verdicts.is_empty() {
            let _ = writeln!(out, "verdicts:");
            for v in &self.verdicts {
                let _ = write!(
                    out,
                    "  {:<18} {:<13} {} (residual {:.3e}",
                    v.name,
                    format!("{:?}", v.status),
                    v.criterion_id,
                    v.residual
                );
                if let (Some(s), Some(r)) = (v.oracle_status, v.oracle_residual) {
                    let _ = write!(out, "; oracle {s:?}, residual {r:.3e}");
                }
                let _ = writeln!(out, ")");
                if !v.witness.is_empty() {
                    let shown: Vec<&str> = v.witness.iter().take(8).map(String::as_str).collect();
                    let more = if v.witness.len() > 8 { ", ..." } else { "" };
                    let _ = writeln!(out, "  {:<18} witness: {}{more}", "", shown.join(", "));
                }
            }
        }
        if !self.data.is_empty() {
            let _ = writeln!(out, "data:");
            for (k, v) in &self.data {
                let text = v.to_string();
                if text.len() <= 96 {
                    let _ = writeln!(out, "  {k}: {text}");
                } else {
                    let _ = writeln!(out, "  {k}: ({} bytes, see structured report)", text.len());
                }
            }
        }
        if !self.assertions.is_empty() {
            let _ = writeln!(out, "assertions:");
            for a in &self.assertions {
                let _ = write!(
                    out,
                    "  {} {:<30} worst {:.3e} (limit {:.1e}, {} checked)",
                    if a.passed { "PASS" } else { "FAIL" },
                    a.name,
                    a.worst,
                    a.threshold,
                    a.count
                );
                if !a.failed_on.is_empty() {
                    let _ = write!(out, " failed on {}", a.failed_on.join(", "));
                }
                let _ = writeln!(out);
            }
        }
        if !self.timings.is_empty() {
            let _ = writeln!(out, "timings:");
            for (label, d) in &self.timings {
                let _ = writeln!(out, "  {label:<30} {:.3} ms", d.as_secs_f64() * 1e3);
            }
        }
        let _ = writeln!(
            out,
            "result: {} (exit {})",
            if self.exit_code == exit::OK {
                "ok"
            } else {
                "property violated"
            },
            self.exit_code
        );
        out
    }
}

fn ids_of(space: &MeasureSpace, idx: &[usize]) -> Vec<String> {
    idx.iter().map(|&i| space.ids()[i].clone()).collect()
}

fn verdict_entry(name: &str, v: &CriterionVerdict, space: &MeasureSpace) -> VerdictEntry {
    VerdictEntry {
        name: name.to_string(),
        status: v.status,
        criterion_id: v.criterion_id.clone(),
        residual: v.residual,
        witness: ids_of(space, &v.witness),
        matching_supports: v.matching_supports,
        oracle_status: None,
        oracle_residual: None,
    }
}

fn status_name(s: Status) -> &'static str {
    match s {
        Status::Yes => "yes",
        Status::No => "no",
        Status::Indeterminate => "indeterminate",
    }
}

/// Verdict and oracle disagree in a decided way.
fn contradicts(formula: Status, oracle: Status) -> bool {
    matches!((formula, oracle), (Status::Yes, Status::No) | (Status::No, Status::Yes))
}

/// What an instance resolves to once recipes are built.
#[allow(clippy::large_enum_variant)]
enum Subject {
    Operator(CondOpSpec),
    Kernel(KernelSpec),
}

fn resolve(inst: &InstanceFile, settings: &Settings, report: &mut Report) -> Result<Subject> {
    report.instance_digest = Some(inst.digest());
    let supp = settings.supp_tol.or(inst.supp_tol).unwrap_or(DEFAULT_SUPP_TOL);
    report.supp_tol = supp;
    Ok(match &inst.body {
        InstanceBody::Operator(spec) => Subject::Operator(spec.retuned(supp)?),
        InstanceBody::Kernel(k) => Subject::Kernel(k.clone()),
        InstanceBody::Recipe(r) => {
            let (spec, audit) = r.build()?;
            report.put("recipe", r);
            if let Some(a) = audit {
                report.put("strip_audit", audit_summary(&a));
            }
            Subject::Operator(spec.retuned(supp)?)
        }
    })
}

fn audit_summary(a: &crate::gen::StripAudit) -> Value {
    json!({
        "resolution": a.resolution,
        "max_product_error": a.max_product_error,
        "max_cross_error": a.max_cross_error,
        "max_e_abs_u_sq_error": a.max_e_abs_u_sq_error,
        "gap_near_zero": a.gap_near_zero,
        "equality_reproduced": a.equality_reproduced,
    })
}

fn require_operator(subject: Subject, command: Command) -> Result<CondOpSpec> {
    match subject {
        Subject::Operator(s) => Ok(s),
        Subject::Kernel(_) => Err(Error::Argument(format!(
            "`{}` needs an operator instance; use `kernel` for kernel instances",
            command.name()
        ))),
    }
}

fn require_oracle_size(n: usize, what: &str) -> Result<()> {
    if n > ORACLE_MAX_DIM {
        return Err(Error::Argument(format!(
            "{what} has {n} points; dense oracles are limited to {ORACLE_MAX_DIM}"
        )));
    }
    Ok(())
}

/// Runs a command on an instance. `verify` and `search` accept `None` and
/// fall back to seeded generation; `gen` is served by [`generate`].
pub fn run(command: Command, instance: Option<&InstanceFile>, settings: Settings) -> Result<Report> {
    settings.validate()?;
    let mut report = Report::new(command, settings);
    match command {
        Command::Search => {
            let s = report.time("counterexample search", || {
                counterexample_search(settings.trials, settings.depth, settings.tol, settings.seed)
            })?;
            report.assert_that(
                "no_necessity_violations",
                s.violations.is_empty(),
                s.violations.len() as f64,
                0.0,
                "search",
            );
            report.assert_that(
                "no_sufficiency_violations",
                s.sufficiency_violations.is_empty(),
                s.sufficiency_violations.len() as f64,
                0.0,
                "search",
            );
            report.put("indeterminate_centered", s.indeterminate_centered());
            report.put("in_band", s.in_band());
            report.put("oracle_failures", s.oracle_failures);
            report.put("search", &s);
            return Ok(report.finish());
        }
        Command::Verify if instance.is_none() => {
            verify_seeded(&mut report)?;
            return Ok(report.finish());
        }
        Command::Gen => {
            return Err(Error::Argument(
                "`gen` builds instances from recipes; see report::generate".into(),
            ));
        }
        _ => {}
    }
    let inst = instance.ok_or_else(|| Error::Argument(format!("`{}` needs an instance file", command.name())))?;
    let subject = resolve(inst, &settings, &mut report)?;
    match command {
        Command::Kernel => match subject {
            Subject::Kernel(k) => kernel_checks(&mut report, &k, "instance", true)?,
            Subject::Operator(_) => {
                return Err(Error::Argument(
                    "`kernel` needs an instance with a kernel matrix".into(),
                ));
            }
        },
        Command::Check => match subject {
            Subject::Kernel(k) => kernel_checks(&mut report, &k, "instance", true)?,
            Subject::Operator(spec) => check_command(&mut report, &spec, "instance")?,
        },
        Command::Polar => {
            let spec = require_operator(subject, command)?;
            polar_checks(&mut report, &spec, "instance", true)?;
        }
        Command::Aluthge => {
            let spec = require_operator(subject, command)?;
            aluthge_checks(&mut report, &spec, "instance")?;
        }
        Command::Spectrum => {
            let spec = require_operator(subject, command)?;
            spectrum_checks(&mut report, &spec, "instance", true)?;
        }
        Command::Verify => match subject {
            Subject::Operator(spec) => verify_operator(&mut report, &spec, "instance")?,
            Subject::Kernel(k) => kernel_checks(&mut report, &k, "instance", true)?,
        },
        Command::Gen | Command::Search => unreachable!("handled above"),
    }
    Ok(report.finish())
}

/// Builds the explicit instance described by a recipe, with a report that
/// carries its digest and, for strip grids, the quadrature audit.
pub fn generate(recipe: &InstanceRecipe, settings: Settings) -> Result<(InstanceFile, Report)> {
    settings.validate()?;
    let mut report = Report::new(Command::Gen, settings);
    let (spec, audit) = report.time("build", || recipe.build())?;
    let spec = match settings.supp_tol {
        Some(t) => spec.retuned(t)?,
        None => spec,
    };
    let inst = InstanceFile::from_spec(&spec)?;
    report.instance_digest = Some(inst.digest());
    report.put("recipe", recipe);
    report.put("points", spec.len());
    report.put("atoms", spec.partition().block_count());
    if let Some(a) = audit {
        report.assert_le("strip_product_error", a.max_product_error, 2e-2, "strip");
        report.assert_le("strip_cross_error", a.max_cross_error, 2e-2, "strip");
        report.put("strip_audit", audit_summary(&a));
        report.put("strip_equality_claim_reproduced", a.equality_reproduced);
    }
    Ok((inst, report.finish()))
}

fn check_command(report: &mut Report, spec: &CondOpSpec, label: &str) -> Result<()> {
    require_oracle_size(spec.len(), "operator")?;
    let tol = report.settings.tol;
    let depth = report.settings.depth;
    let space = spec.space();

    let centered = centered_closed_form(spec, tol)?;
    let family = report.time("commuting family oracle", || centered_oracle(spec, depth, tol))?;
    let centered_oracle_status = hysteresis(family.max_residual, tol, 10.0 * tol);
    let mut entry = verdict_entry("centered", &centered, space);
    entry.oracle_status = Some(centered_oracle_status);
    entry.oracle_residual = Some(family.max_residual);
    report.verdicts.push(entry);
    report.assert_that(
        "centered_soundness",
        !contradicts(centered.status, centered_oracle_status),
        family.max_residual,
        tol,
        label,
    );

    if has_unit_weight(spec, tol) {
        let special = centered_eu_special(spec, tol)?;
        let mut e = verdict_entry("centered_mean", &special, space);
        e.oracle_status = Some(centered_oracle_status);
        e.oracle_residual = Some(family.max_residual);
        report.verdicts.push(e);
        report.assert_that(
            "centered_mean_soundness",
            !contradicts(special.status, centered_oracle_status),
            family.max_residual,
            tol,
            label,
        );
    }

    let normal = normal_closed_form(spec, tol)?;
    let residual = report.time("normality oracle", || normal_oracle(spec))?;
    let normal_status = hysteresis(residual, tol, 100.0 * tol);
    let mut entry = verdict_entry("normal", &normal, space);
    entry.oracle_status = Some(normal_status);
    entry.oracle_residual = Some(residual);
    report.verdicts.push(entry);
    report.assert_that(
        "normal_agreement",
        !contradicts(normal.status, normal_status),
        residual,
        tol,
        label,
    );
    Ok(())
}

/// Largest entry of `closed − oracle` in standard form, relative to the
/// largest oracle entry or to `floor`, whichever is bigger.
///
/// The floor keeps operators that vanish identically (the Aluthge transform
/// when `E(uw) ≡ 0`) from being compared against rounding noise alone.
fn compare(closed: &DenseOperator, oracle: &DenseOperator, floor: f64) -> f64 {
    let (a, b) = (closed.standard(), oracle.standard());
    let diff = a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    let scale = b.iter().map(|z| z.norm()).fold(floor, f64::max);
    if diff == 0.0 {
        0.0
    } else {
        diff / scale.max(f64::MIN_POSITIVE)
    }
}

fn norm_checks(report: &mut Report, spec: &CondOpSpec, t: &DenseOperator, label: &str) -> Result<f64> {
    let formula = spec.norm_formula();
    let measured = report.time("operator norm", || oracle::op_norm_default(t))?;
    let rel = if measured > 0.0 {
        (formula - measured).abs() / measured
    } else {
        formula
    };
    report.assert_le("norm_identity", rel, report.settings.tol, label);
    Ok(measured)
}

fn power_checks(report: &mut Report, spec: &CondOpSpec, t: &DenseOperator, label: &str) -> Result<()> {
    let ts = t.adjoint();
    let tst = ts.compose(t)?;
    let tts = t.compose(&ts)?;
    for p in POWERS {
        for (side, base, name) in [(Side::StarT, &tst, "power_star_t"), (Side::TStar, &tts, "power_t_star")] {
            let closed = DenseOperator::from_action(spec.space(), |f| spec.positive_power(p, side, f))?;
            let want = oracle::herm_power(base, p)?;
            report.assert_le(
                name,
                compare(&closed, &want, 0.0),
                report.settings.tol,
                &format!("{label} p={p}"),
            );
        }
    }
    Ok(())
}

fn polar_checks(report: &mut Report, spec: &CondOpSpec, label: &str, with_data: bool) -> Result<()> {
    require_oracle_size(spec.len(), "operator")?;
    let t = oracle::materialize(spec);
    let norm = norm_checks(report, spec, &t, label)?;
    let parts = spec.polar_parts();
    let modulus = DenseOperator::from_action(spec.space(), |f| parts.modulus_apply(f))?;
    let isometry = DenseOperator::from_action(spec.space(), |f| parts.isometry_apply(f))?;
    let recon = isometry.compose(&modulus)?.sub(&t)?.hs_norm();
    let scale = norm.max(f64::MIN_POSITIVE);
    report.assert_le(
        "polar_reconstruction",
        if recon == 0.0 { 0.0 } else { recon / scale },
        POLAR_TOL,
        label,
    );
    report.assert_le(
        "partial_isometry",
        isometry.partial_isometry_residual()?,
        POLAR_TOL,
        label,
    );
    let factors = report.time("polar oracle", || oracle::polar_factors(&t))?;
    report.assert_le(
        "polar_modulus_match",
        compare(&modulus, &factors.modulus, norm),
        report.settings.tol,
        label,
    );
    report.assert_le(
        "polar_isometry_match",
        compare(&isometry, &factors.isometry, 1.0),
        report.settings.tol,
        label,
    );
    if with_data {
        report.put("norm", norm);
        report.put("norm_formula", spec.norm_formula());
        report.put("rank", factors.rank);
        report.put("modulus_coefficients", parts.modulus_coefficients());
        report.put("isometry_coefficients", parts.isometry_coefficients());
    }
    Ok(())
}

fn aluthge_checks(report: &mut Report, spec: &CondOpSpec, label: &str) -> Result<()> {
    require_oracle_size(spec.len(), "operator")?;
    let t = oracle::materialize(spec);
    let closed = DenseOperator::from_action(spec.space(), |f| spec.aluthge_apply(f))?;
    let factors = report.time("polar oracle", || oracle::polar_factors(&t))?;
    let half = oracle::herm_power(&t.adjoint().compose(&t)?, 0.25)?;
    let want = half.compose(&factors.isometry)?.compose(&half)?;
    let norm_t = spec.norm_formula();
    report.assert_le(
        "aluthge_match",
        compare(&closed, &want, norm_t),
        report.settings.tol,
        label,
    );
    let norm_a = oracle::op_norm_default(&closed)?;
    report.assert_that(
        "aluthge_norm_bound",
        norm_a <= norm_t * (1.0 + report.settings.tol),
        norm_a - norm_t,
        norm_t * report.settings.tol,
        label,
    );
    if label == "instance" {
        report.put("norm", norm_t);
        report.put("aluthge_norm", norm_a);
    }
    Ok(())
}

fn spectrum_checks(report: &mut Report, spec: &CondOpSpec, label: &str, with_data: bool) -> Result<()> {
    require_oracle_size(spec.len(), "operator")?;
    let tol = report.settings.tol;
    let s = report.time("eigensolve", || joint_spectrum_check(spec, tol))?;
    report.assert_that("spectrum_identity", s.sets_match, s.set_distance, tol, label);
    if s.equality_hypothesis {
        let worst = s.joint_residuals.iter().copied().fold(0.0, f64::max);
        report.assert_that("joint_under_equality", s.all_joint(), worst, tol, label);
    }
    if with_data {
        report.put(
            "nonzero_spectrum",
            s.nonzero_eigenvalues().iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
        );
        report.put("joint", s.all_joint());
        report.put("spectrum", &s);
    }
    Ok(())
}

fn verify_operator(report: &mut Report, spec: &CondOpSpec, label: &str) -> Result<()> {
    require_oracle_size(spec.len(), "operator")?;
    let t = oracle::materialize(spec);
    power_checks(report, spec, &t, label)?;
    polar_checks(report, spec, label, false)?;
    aluthge_checks(report, spec, label)?;
    let tol = report.settings.tol;
    let depth = report.settings.depth;

    let centered = centered_closed_form(spec, tol)?;
    let family = centered_oracle(spec, depth, tol)?;
    let oracle_status = hysteresis(family.max_residual, tol, 10.0 * tol);
    report.assert_that(
        "centered_soundness",
        !contradicts(centered.status, oracle_status),
        family.max_residual,
        tol,
        label,
    );
    let normal = normal_closed_form(spec, tol)?;
    let residual = normal_oracle(spec)?;
    report.assert_that(
        "normal_agreement",
        !contradicts(normal.status, hysteresis(residual, tol, 100.0 * tol)),
        residual,
        tol,
        label,
    );
    let lv = spec.levels();
    if has_unit_weight(spec, tol) && lv.in_eu == lv.in_s {
        let eq = equivalence_suite(spec, tol, depth)?;
        report.assert_that("mean_equivalence", eq.agree, eq.normal_oracle_residual, tol, label);
    }
    spectrum_checks(report, spec, label, false)
}

fn lift_round_trip(k: &KernelSpec) -> Result<f64> {
    let lift = k.lift_to_condop()?;
    let n = k.len();
    let mut worst: f64 = 0.0;
    for j in 0..n {
        let f = CFun::basis(n, j);
        let want = k.kernel_apply(&f)?;
        let scale = want.max_modulus().max(f64::MIN_POSITIVE);
        let got = lift.apply(&lift.embed(&f)?)?;
        for y in 0..n {
            let d = lift.restrict(&got, y)?.max_diff(&want);
            worst = worst.max(if d == 0.0 { 0.0 } else { d / scale });
        }
    }
    Ok(worst)
}

fn kernel_checks(report: &mut Report, k: &KernelSpec, label: &str, with_data: bool) -> Result<()> {
    let tol = report.settings.tol;
    let k = if k.is_probability() {
        k.clone()
    } else {
        if with_data {
            report.put("normalized_mass", k.base_space().total_mass());
        }
        k.normalized()?
    };
    let bounded = k.kernel_bounded_report();
    report.assert_le("lift_round_trip", lift_round_trip(&k)?, LIFT_TOL, label);
    let centered = k.kernel_centered(tol)?;
    let normal = k.kernel_normal(tol)?;
    let variation = k.max_row_variation();
    if variation <= 10.0 * tol {
        report.assert_that(
            "row_constant_normal_centered",
            normal.status == Status::Yes && centered.status == Status::Yes,
            variation,
            10.0 * tol,
            label,
        );
    }
    let mut centered_entry = verdict_entry("kernel_centered", &centered, k.base_space());
    let mut normal_entry = verdict_entry("kernel_normal", &normal, k.base_space());
    if k.len() <= KERNEL_ORACLE_MAX_POINTS {
        let lift = k.lift_to_condop()?;
        let spec = lift.spec().expect("small lifts are materialized");
        let lifted = oracle::materialize(spec);
        let norm = oracle::op_norm_default(&lifted)?;
        let rel = if norm > 0.0 {
            (bounded.lifted_norm - norm).abs() / norm
        } else {
            bounded.lifted_norm
        };
        report.assert_le("kernel_lifted_norm", rel, tol, label);
        let residual = oracle::normality_residual(&lifted)?;
        let status = hysteresis(residual, tol, 100.0 * tol);
        report.assert_that(
            "kernel_normal_agreement",
            !contradicts(normal.status, status),
            residual,
            tol,
            label,
        );
        normal_entry.oracle_status = Some(status);
        normal_entry.oracle_residual = Some(residual);
        let family = oracle::commuting_family_check(&lifted, report.settings.depth, tol)?;
        let status = hysteresis(family.max_residual, tol, 10.0 * tol);
        report.assert_that(
            "kernel_centered_soundness",
            !contradicts(centered.status, status),
            family.max_residual,
            tol,
            label,
        );
        centered_entry.oracle_status = Some(status);
        centered_entry.oracle_residual = Some(family.max_residual);
    }
    if with_data {
        report.verdicts.push(centered_entry);
        report.verdicts.push(normal_entry);
        report.put("bounded", &bounded);
        report.put("max_row_variation", variation);
        if k.len() <= ORACLE_MAX_DIM {
            // the integral operator on L²(X) itself, for comparison with the lift
            let base = k.base_operator();
            report.put("base_operator_norm", oracle::op_norm_default(&base)?);
            report.put("base_operator_normality_residual", oracle::normality_residual(&base)?);
        }
    }
    Ok(())
}

/// The seeded regression suite used when `verify` has no instance.
fn verify_seeded(report: &mut Report) -> Result<()> {
    let seed = report.settings.seed;
    let mut instances: Vec<(String, CondOpSpec)> = Vec::new();
    for i in 0..12u64 {
        let s = mix_seed(seed, i);
        let n = 2 + (s % 11) as usize;
        let b = 1 + (s >> 8) as usize % n;
        instances.push((format!("random#{i}"), gen_random(s, n, b, 1.0)?));
    }
    for i in 0..6u64 {
        let s = mix_seed(seed, 100 + i);
        let n = 2 + (s % 9) as usize;
        let b = 1 + (s >> 8) as usize % n;
        instances.push((format!("equality#{i}"), gen_equality_case(s, n, b)?));
    }
    for i in 0..4u64 {
        let s = mix_seed(seed, 200 + i);
        let n = 2 + (s % 7) as usize;
        let b = 1 + (s >> 8) as usize % (n / 2);
        instances.push((format!("orthogonal#{i}"), gen_orthogonal_case(s, n, b)?));
    }
    instances.push(("symmetric_pair".into(), gen_symmetric_pair(&[0.25, 0.5, 0.75, 1.0])?));
    instances.push((
        "column".into(),
        CondOpSpec::new(
            MeasureSpace::uniform(2, 1.0)?,
            Partition::trivial(2),
            CFun::from_real(&[1.0, 0.0]),
            CFun::ones(2),
        )?,
    ));
    let supp = report.supp_tol;
    let mut digests = BTreeMap::new();
    for (label, spec) in &instances {
        let spec = spec.retuned(supp)?;
        digests.insert(label.clone(), InstanceFile::from_spec(&spec)?.digest());
        verify_operator(report, &spec, label)?;
    }
    for i in 0..6u64 {
        let s = mix_seed(seed, 300 + i);
        let n = 2 + (s % 5) as usize;
        let k = gen_random_kernel(s, n, 0.5)?;
        let label = format!("kernel#{i}");
        digests.insert(label.clone(), InstanceFile::from_kernel(&k).digest());
        kernel_checks(report, &k, &label, false)?;
    }
    report.put("instances", digests);
    report.put("seed", seed);
    report.put(
        "verdict_counts",
        instances
            .iter()
            .map(|(label, spec)| {
                let c = centered_closed_form(spec, report.settings.tol).map(|v| status_name(v.status));
                (label.clone(), c.unwrap_or("error"))
            })
            .collect::<BTreeMap<_, _>>(),
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn instance(text: &str) -> InstanceFile {
        InstanceFile::parse(text).unwrap()
    }

    fn column() -> InstanceFile {
        instance(
            r#"{"points": [{"id": "a", "weight": 0.5}, {"id": "b", "weight": 0.5}],
                "partition": [["a", "b"]], "u": [[1, 0], [0, 0]], "w": [[1, 0], [1, 0]]}"#,
        )
    }

    #[test]
    fn spectrum_of_column_operator() {
        let r = run(Command::Spectrum, Some(&column()), Settings::default()).unwrap();
        assert_eq!(r.exit_code, exit::OK);
        let z = r.data["nonzero_spectrum"].as_array().unwrap();
        assert_eq!(z.len(), 1);
        assert!((z[0][0].as_f64().unwrap() - 0.5).abs() < 1e-12);
        assert!(z[0][1].as_f64().unwrap().abs() < 1e-12);
        assert_eq!(r.data["joint"], json!(false));
    }

    #[test]
    fn check_symmetric_pair_recipe() {
        let inst = instance(r#"{"recipe": {"kind": "symmetric_pair", "grid": [0.25, 0.5, 1.0]}}"#);
        let r = run(Command::Check, Some(&inst), Settings::default()).unwrap();
        assert_eq!(r.exit_code, exit::OK);
        assert_eq!(r.verdict("centered_mean").unwrap().status, Status::No);
        assert_eq!(r.verdict("normal").unwrap().status, Status::No);
        assert!(r.verdict("centered").unwrap().oracle_residual.unwrap() > 1e-3);
    }

    #[test]
    fn verify_instance_and_seeded() {
        let inst = InstanceFile::from_spec(&gen_equality_case(7, 8, 3).unwrap()).unwrap();
        let r = run(Command::Verify, Some(&inst), Settings::default()).unwrap();
        assert!(r.all_passed(), "{}", r.to_text());
        let s = Settings {
            seed: 42,
            ..Settings::default()
        };
        let a = run(Command::Verify, None, s).unwrap();
        assert!(a.all_passed(), "{}", a.to_text());
        let b = run(Command::Verify, None, s).unwrap();
        assert_eq!(a.to_structured_json(), b.to_structured_json());
    }

    #[test]
    fn kernel_command_on_column_kernel() {
        let inst = instance(
            r#"{"points": [{"id": "s", "weight": 0.5}, {"id": "t", "weight": 0.5}],
                "kernel": [[[1, 0], [0, 0]], [[1, 0], [0, 0]]]}"#,
        );
        let r = run(Command::Kernel, Some(&inst), Settings::default()).unwrap();
        assert!(r.all_passed(), "{}", r.to_text());
        assert_eq!(r.verdict("kernel_normal").unwrap().status, Status::No);
        assert!(run(Command::Kernel, Some(&column()), Settings::default()).is_err());
    }

    #[test]
    fn gen_reports_strip_audit() {
        let (inst, r) = generate(&InstanceRecipe::VerticalStrip { resolution: 64 }, Settings::default()).unwrap();
        assert!(r.all_passed());
        assert_eq!(r.data["strip_equality_claim_reproduced"], json!(false));
        assert_eq!(r.instance_digest.as_deref(), Some(inst.digest().as_str()));
    }

    #[test]
    fn settings_validated() {
        let bad = Settings {
            tol: -1.0,
            ..Settings::default()
        };
        let err = run(Command::Check, Some(&column()), bad).unwrap_err();
        assert_eq!(exit_code_for(&err), exit::INPUT);
    }
}
