//! Run configuration, the end-to-end driver, and text/JSON reports.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::{Checks, HypothesisCertificate};
use crate::dd::DoubleDouble;
use crate::error::{Error, Result};
use crate::ifs::GaussIfs;
use crate::real::Real;
use crate::solver::{certify_bracket, rho_root, DimensionBracket, Discretization, Phase, Problem, SolverOptions, Trial};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Text,
    Json,
}

fn default_precision() -> usize {
    34
}
fn default_true() -> bool {
    true
}
fn default_mu_cap() -> f64 {
    4.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub digits: Vec<f64>,
    pub r: usize,
    pub h_target: f64,
    pub nu: usize,
    #[serde(default)]
    pub nu_prime: usize,
    #[serde(default = "default_precision")]
    pub precision: usize,
    #[serde(default = "default_true")]
    pub verify: bool,
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default = "default_mu_cap")]
    pub mu_cap: f64,
    #[serde(default)]
    pub output_format: OutputFormat,
}

impl RunConfig {
    pub fn new(digits: Vec<f64>, r: usize, h_target: f64, nu: usize) -> Self {
        Self {
            digits,
            r,
            h_target,
            nu,
            nu_prime: 0,
            precision: default_precision(),
            verify: true,
            tol: None,
            mu_cap: default_mu_cap(),
            output_format: OutputFormat::Text,
        }
    }

    /// Checks the invariants that do not need any computation.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.digits.len() < 2 {
            return bad("the digit set needs at least two elements");
        }
        if self.digits.iter().any(|d| !(d.is_finite() && *d >= 1.0)) {
            return bad("digits must be finite reals >= 1");
        }
        if self.r < 2 {
            return bad("degree r must be at least 2");
        }
        if self.nu < 1 {
            return bad("nu must be at least 1");
        }
        if self.nu_prime > self.nu {
            return bad("nu_prime must not exceed nu");
        }
        if !(self.h_target.is_finite() && self.h_target > 0.0) {
            return bad("h must be positive");
        }
        if !(self.mu_cap.is_finite() && self.mu_cap >= 1.0) {
            return bad("mu_cap must be at least 1");
        }
        if let Some(t) = self.tol {
            if !(t.is_finite() && t > 0.0) {
                return bad("tol must be positive");
            }
        }
        if self.precision < 17 {
            return bad("precision must be at least 17 decimal digits");
        }
        if self.precision > DoubleDouble::DIGITS + 2 {
            return Err(Error::Config(format!(
                "precision {} is not supported; the widest available arithmetic carries about {} digits",
                self.precision,
                DoubleDouble::DIGITS
            )));
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        GaussIfs::new(self.digits.clone()).map(|i| i.label()).unwrap_or_else(|_| format!("{:?}", self.digits))
    }
}

/// Process exit status for a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Verified = 0,
    Error = 1,
    Unverified = 2,
    Usage = 64,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }

    pub fn for_error(e: &Error) -> Self {
        match e {
            Error::Config(_) | Error::InvalidArgument(_) => ExitStatus::Usage,
            _ => ExitStatus::Error,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSection {
    pub set: String,
    pub gamma: String,
    pub big_gamma: String,
    pub a_inf: String,
    pub b_inf: String,
    pub subintervals: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshSection {
    pub intervals: usize,
    pub cells: usize,
    pub q: usize,
    pub h: String,
    pub h_min: String,
    pub mu: String,
    pub gap_ok: bool,
    pub words: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateSection {
    pub s: String,
    pub chi: String,
    pub psi_r: String,
    pub eta_r: String,
    pub c_nu: String,
    pub m0_nu: String,
    pub kappa1: String,
    pub kappa2: String,
    pub m: String,
    pub m_prime: String,
    pub u: String,
    pub cond_8_3_value: String,
    pub cond_8_4_lhs: String,
    pub cond_8_4_rhs: String,
    pub e: String,
    pub g: String,
    pub d: String,
    pub h_const: String,
    pub m1: String,
    pub m2: String,
    pub checks: Checks,
    pub verified: bool,
    pub reasons: Vec<String>,
}

impl CertificateSection {
    fn from_cert<T: Real>(c: &HypothesisCertificate<T>) -> Self {
        let f = |x: T| x.to_sci_string();
        Self {
            s: f(c.s),
            chi: f(c.chi),
            psi_r: f(c.psi_r),
            eta_r: f(c.eta_r),
            c_nu: f(c.c_nu),
            m0_nu: f(c.m0_nu),
            kappa1: f(c.kappa1),
            kappa2: f(c.kappa2),
            m: f(c.m),
            m_prime: f(c.m_prime),
            u: f(c.u),
            cond_8_3_value: f(c.cond_8_3_value),
            cond_8_4_lhs: f(c.cond_8_4_lhs),
            cond_8_4_rhs: f(c.cond_8_4_rhs),
            e: f(c.e),
            g: f(c.g),
            d: f(c.d),
            h_const: f(c.h_const),
            m1: f(c.m1),
            m2: f(c.m2),
            checks: c.checks,
            verified: c.verified,
            reasons: c.reasons.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub phase: Phase,
    pub s: String,
    pub rho_lo: String,
    pub rho_hi: String,
    pub lambda: String,
    pub iterations: usize,
    pub margin: String,
    pub cone: bool,
    pub verified: bool,
}

impl TrialRecord {
    fn from_trial<T: Real>(t: &Trial<T>) -> Self {
        Self {
            phase: t.phase,
            s: t.s.to_sci_string(),
            rho_lo: t.lo.to_sci_string(),
            rho_hi: t.hi.to_sci_string(),
            lambda: t.lambda.to_sci_string(),
            iterations: t.iterations,
            margin: t.margin.to_sci_string(),
            cone: t.cone,
            verified: t.verified,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BracketSection {
    pub s_l: String,
    pub s_u: String,
    pub s_mid: String,
    pub width: String,
    /// `s` truncated to the digits that are guaranteed (verified) or
    /// expected from the solver tolerance (heuristic).
    pub s_reported: String,
    pub digits_guaranteed: i32,
    pub h_const: String,
    pub h: String,
    pub r: usize,
    pub nu: usize,
    pub rho_at_sl: (String, String),
    pub rho_at_su: (String, String),
    pub margin_at_sl: String,
    pub margin_at_su: String,
    pub verified: bool,
}

/// Machine-readable report. Wall-clock timings are kept out of the
/// serialized form so that identical runs produce identical documents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub arithmetic: String,
    pub config: RunConfig,
    pub domain: DomainSection,
    pub mesh: MeshSection,
    pub certificate: CertificateSection,
    pub solver_trace: Vec<TrialRecord>,
    pub bracket: BracketSection,
    #[serde(skip)]
    pub timings: Timings,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Timings {
    pub setup: Duration,
    pub root: Duration,
    pub bracket: Duration,
}

impl Report {
    pub fn exit_status(&self) -> ExitStatus {
        if self.bracket.verified {
            ExitStatus::Verified
        } else {
            ExitStatus::Unverified
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("malformed report: {e}")))
    }

    pub fn to_text(&self) -> String {
        let mut o = String::new();
        let b = &self.bracket;
        let c = &self.certificate;
        let _ = writeln!(o, "set            {}", self.domain.set);
        let _ = writeln!(o, "arithmetic     {}", self.arithmetic);
        let _ = writeln!(o, "parameters     r = {}, h = {}, nu = {}, nu' = {}", self.config.r, self.config.h_target, self.config.nu, self.config.nu_prime);
        let _ = writeln!(o, "interval       [{}, {}]", self.domain.a_inf, self.domain.b_inf);
        let _ = writeln!(
            o,
            "mesh           {} subintervals, {} cells, Q = {}, mu = {}, words = {}",
            self.mesh.intervals, self.mesh.cells, self.mesh.q, short(&self.mesh.mu), self.mesh.words
        );
        let _ = writeln!(o, "certificate    at s = {}", short(&c.s));
        let _ = writeln!(
            o,
            "  kappa1 = {}, kappa2 = {}, M = {}, M0 = {}, c(nu) = {}",
            short(&c.kappa1),
            short(&c.kappa2),
            short(&c.m),
            short(&c.m0_nu),
            short(&c.c_nu)
        );
        let _ = writeln!(
            o,
            "  psi u e^u = {}, kappa1 e^u/(1 - psi u e^u) = {} vs {}",
            short(&c.cond_8_3_value),
            short(&c.cond_8_4_lhs),
            short(&c.cond_8_4_rhs)
        );
        let _ = writeln!(o, "  H = {}, M1 = {}, M2 = {}", short(&c.h_const), short(&c.m1), short(&c.m2));
        let _ = writeln!(o, "  hypotheses {}", if c.verified { "verified" } else { "NOT verified" });
        for r in &c.reasons {
            let _ = writeln!(o, "    - {r}");
        }
        let _ = writeln!(o, "trials         {}", self.solver_trace.len());
        let _ = writeln!(o, "s_l            {}", b.s_l);
        let _ = writeln!(o, "s_u            {}", b.s_u);
        let _ = writeln!(o, "width          {}", short(&b.width));
        if b.verified {
            let _ = writeln!(o, "s              {}  ({} digits guaranteed)", b.s_reported, b.digits_guaranteed);
        } else {
            let _ = writeln!(o, "s              {}  UNVERIFIED (heuristic)", b.s_reported);
        }
        let t = &self.timings;
        let _ = writeln!(
            o,
            "time           setup {:.3}s, root {:.3}s, bracket {:.3}s",
            t.setup.as_secs_f64(),
            t.root.as_secs_f64(),
            t.bracket.as_secs_f64()
        );
        o
    }
}

fn short(sci: &str) -> String {
    sci.parse::<f64>().map(|v| format!("{v:.6e}")).unwrap_or_else(|_| sci.to_string())
}

/// In-memory results of a run, alongside the report built from them.
#[derive(Debug, Clone)]
pub struct RunOutput<T> {
    pub problem: Problem<T>,
    pub certificate: HypothesisCertificate<T>,
    pub bracket: DimensionBracket<T>,
    pub report: Report,
}

pub fn solver_options<T: Real>(config: &RunConfig) -> SolverOptions<T> {
    let mut opts = SolverOptions::<T> { verify: config.verify, ..SolverOptions::default() };
    if let Some(t) = config.tol {
        opts.power_tol = T::from_f64(t);
        opts.root_tol = T::from_f64(t);
    }
    opts
}

/// Runs domain, mesh, certificate and solver in arithmetic `T`.
pub fn run_with<T: Real>(config: &RunConfig) -> Result<RunOutput<T>> {
    config.validate()?;
    let t0 = Instant::now();
    let ifs = GaussIfs::new(config.digits.clone())?;
    let disc = Discretization {
        r: config.r,
        h_target: T::from_f64(config.h_target),
        nu: config.nu,
        nu_prime: config.nu_prime,
        mu_cap: T::from_f64(config.mu_cap),
    };
    let problem = Problem::new(ifs, disc)?;
    let opts = solver_options::<T>(config);
    let setup = t0.elapsed();

    let t1 = Instant::now();
    let root = rho_root(&problem, &opts)?;
    let root_time = t1.elapsed();

    let t2 = Instant::now();
    let bracket = certify_bracket(&problem, &root, &opts)?;
    let bracket_time = t2.elapsed();
    let certificate = problem.certificate(bracket.s_mid, &opts)?;

    let mut trace: Vec<TrialRecord> = root.trace.iter().map(TrialRecord::from_trial).collect();
    trace.extend(bracket.trace.iter().map(TrialRecord::from_trial));

    let report = Report {
        arithmetic: T::NAME.to_string(),
        config: config.clone(),
        domain: domain_section(&problem),
        mesh: mesh_section(&problem),
        certificate: CertificateSection::from_cert(&certificate),
        solver_trace: trace,
        bracket: bracket_section(&bracket, &opts),
        timings: Timings { setup, root: root_time, bracket: bracket_time },
    };
    Ok(RunOutput { problem, certificate, bracket, report })
}

/// Runs in the arithmetic selected by `config.precision` and returns the report.
pub fn run(config: &RunConfig) -> Result<Report> {
    config.validate()?;
    if config.precision <= 17 {
        run_with::<f64>(config).map(|o| o.report)
    } else {
        run_with::<DoubleDouble>(config).map(|o| o.report)
    }
}

fn domain_section<T: Real>(p: &Problem<T>) -> DomainSection {
    DomainSection {
        set: p.ifs.label(),
        gamma: T::from_f64(p.ifs.gamma()).to_sci_string(),
        big_gamma: T::from_f64(p.ifs.big_gamma()).to_sci_string(),
        a_inf: p.inv.a_inf.to_sci_string(),
        b_inf: p.inv.b_inf.to_sci_string(),
        subintervals: p.subintervals.iter().map(|(a, b)| (a.to_sci_string(), b.to_sci_string())).collect(),
    }
}

fn mesh_section<T: Real>(p: &Problem<T>) -> MeshSection {
    let m = &p.mesh;
    MeshSection {
        intervals: m.intervals.len(),
        cells: m.cell_count(),
        q: m.q,
        h: m.h.to_sci_string(),
        h_min: m.h_min.to_sci_string(),
        mu: m.mu.to_sci_string(),
        gap_ok: m.gap_ok,
        words: p.kernel.words,
    }
}

fn bracket_section<T: Real>(b: &DimensionBracket<T>, opts: &SolverOptions<T>) -> BracketSection {
    let places = if b.verified {
        b.digits_guaranteed
    } else {
        let tol_digits = (-opts.root_tol.log10().to_f64()).floor() as i32;
        tol_digits.min(T::DIGITS as i32 - 2)
    };
    BracketSection {
        s_l: b.s_l.to_sci_string(),
        s_u: b.s_u.to_sci_string(),
        s_mid: b.s_mid.to_sci_string(),
        width: b.width().to_sci_string(),
        s_reported: fixed_digits(if b.verified { b.s_l } else { b.s_mid }, places.max(0) as usize),
        digits_guaranteed: b.digits_guaranteed,
        h_const: b.h_const.to_sci_string(),
        h: b.h.to_sci_string(),
        r: b.r,
        nu: b.nu,
        rho_at_sl: (b.rho_at_sl.0.to_sci_string(), b.rho_at_sl.1.to_sci_string()),
        rho_at_su: (b.rho_at_su.0.to_sci_string(), b.rho_at_su.1.to_sci_string()),
        margin_at_sl: b.margin_at_sl.to_sci_string(),
        margin_at_su: b.margin_at_su.to_sci_string(),
        verified: b.verified,
    }
}

/// Digits of `x >= 0` after the decimal point, truncated.
pub fn fixed_digits<T: Real>(x: T, places: usize) -> String {
    let mut int = x.floor();
    let mut frac = x - int;
    let mut out = format!("{}.", int.to_f64() as u64);
    let ten = T::from_f64(10.0);
    for _ in 0..places {
        frac *= ten;
        int = frac.floor();
        let d = int.to_f64().clamp(0.0, 9.0) as u8;
        out.push((b'0' + d) as char);
        frac -= int;
    }
    if places == 0 {
        out.pop();
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub set: String,
    pub r: usize,
    pub h: f64,
    pub nu: usize,
    pub s: Option<String>,
    pub s_mid: Option<String>,
    pub width: Option<String>,
    pub digits: Option<i32>,
    pub verified: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableReport {
    pub rows: Vec<TableRow>,
}

impl TableReport {
    pub fn all_verified(&self) -> bool {
        self.rows.iter().all(|r| r.verified)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serialization cannot fail")
    }

    pub fn to_text(&self) -> String {
        let mut o = String::new();
        let _ = writeln!(o, "{:<22} {:>3} {:>8} {:>3}  s", "set", "r", "h", "nu");
        for row in &self.rows {
            let s = match (&row.s, &row.error) {
                (_, Some(e)) => format!("error: {e}"),
                (Some(s), None) if row.verified => s.clone(),
                (Some(s), None) => format!("{s}  (unverified)"),
                (None, None) => String::new(),
            };
            let _ = writeln!(o, "{:<22} {:>3} {:>8} {:>3}  {}", row.set, row.r, row.h, row.nu, s);
        }
        o
    }
}

fn table_row(config: &RunConfig) -> TableRow {
    let mut row = TableRow {
        set: config.label(),
        r: config.r,
        h: config.h_target,
        nu: config.nu,
        s: None,
        s_mid: None,
        width: None,
        digits: None,
        verified: false,
        error: None,
    };
    match run(config) {
        Ok(rep) => {
            row.s = Some(rep.bracket.s_reported.clone());
            row.s_mid = Some(rep.bracket.s_mid.clone());
            row.width = Some(rep.bracket.width.clone());
            row.digits = Some(rep.bracket.digits_guaranteed);
            row.verified = rep.bracket.verified;
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

/// Runs every row; a failing row is recorded with its error and the table
/// still completes.
pub fn batch_table(rows: &[RunConfig], parallel: bool) -> Result<TableReport> {
    if rows.is_empty() {
        return Err(Error::Config("batch needs at least one row".into()));
    }
    let rows = if parallel {
        rows.par_iter().map(table_row).collect()
    } else {
        rows.iter().map(table_row).collect()
    };
    Ok(TableReport { rows })
}

pub fn parse_batch(text: &str) -> Result<Vec<RunConfig>> {
    serde_json::from_str(text).map_err(|e| Error::Config(format!("malformed batch file: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation_rejects_bad_configs() {
        let ok = RunConfig::new(vec![1.0, 2.0], 4, 0.05, 1);
        assert!(ok.validate().is_ok());
        let mut c = ok.clone();
        c.r = 1;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let mut c = ok.clone();
        c.nu_prime = 2;
        assert!(c.validate().is_err());
        let mut c = ok.clone();
        c.precision = 16;
        assert!(c.validate().is_err());
        let mut c = ok.clone();
        c.precision = 64;
        assert!(c.validate().is_err());
        let mut c = ok;
        c.digits = vec![1.0];
        assert!(c.validate().is_err());
    }

    #[test]
    fn fixed_digits_truncates() {
        assert_eq!(fixed_digits(0.53128_f64, 3), "0.531");
        assert_eq!(fixed_digits(0.9999_f64, 2), "0.99");
        assert_eq!(fixed_digits(1.5_f64, 0), "1");
    }

    #[test]
    fn empty_batch_is_a_usage_error() {
        let e = batch_table(&[], false).unwrap_err();
        assert_eq!(ExitStatus::for_error(&e), ExitStatus::Usage);
    }

    #[test]
    fn config_json_defaults() {
        let c: RunConfig = serde_json::from_str(r#"{"digits":[1,2],"r":8,"h_target":0.01,"nu":3}"#).unwrap();
        assert_eq!(c.precision, 34);
        assert!(c.verify);
        assert_eq!(c.mu_cap, 4.0);
        assert_eq!(c.output_format, OutputFormat::Text);
    }
}
