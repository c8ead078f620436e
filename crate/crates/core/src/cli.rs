//! The `mahler` command line: configuration layering, dispatch and report files.
//!
//! Settings come from flags, then `MAHLER_MAX_*` environment variables, then a
//! JSON or TOML config file, then defaults.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::audit::{choose_parameters, gamma_over_ln2, measure_audit, tau_floor, Audit, AuditParams, Budget};
use crate::cf::badly_approximable_report_with_budget;
use crate::enclosure::evaluate_g_with_budget;
use crate::error::Error;
use crate::hankel::{det_table_csv, hankel_dets_upto, height_report, integer_convergent};
use crate::interval::{ln2, DEFAULT_PREC};
use crate::report::{config_hash, interval_value, rational_string, to_canonical_json, to_csv, write_atomic};
use crate::series::{prefix_with_budget, MahlerSpec, DEFAULT_MAX_COEFFS};
use crate::tower::{
    constant_c, diophantine_bounds, residual_series_check, tower_polynomials, tower_values, Outcome, DEFAULT_MAX_DEGREE,
};

/// Process exit status.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Pass = 0,
    Fail = 1,
    Undecidable = 2,
    Usage = 3,
}

impl Status {
    fn label(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Undecidable => "undecidable",
            Status::Usage => "usage",
        }
    }

    /// A certified failure outranks an undecided check.
    fn worst(self, other: Status) -> Status {
        let rank = |s: Status| match s {
            Status::Pass => 0,
            Status::Undecidable => 1,
            Status::Fail => 2,
            Status::Usage => 3,
        };
        if rank(other) > rank(self) {
            other
        } else {
            self
        }
    }

    fn of_error(e: &Error) -> Status {
        match e {
            Error::InvalidSpec(_) | Error::Precondition(_) | Error::TauTooSmall(_) | Error::QTooSmall(_) => {
                Status::Usage
            }
            Error::Undecidable(_)
            | Error::BudgetExceeded { .. }
            | Error::BudgetExhausted { .. }
            | Error::InsufficientPrecision { .. }
            | Error::PrecisionTooShort { .. } => Status::Undecidable,
            Error::DegenerateRational { .. }
            | Error::SingularHankel { .. }
            | Error::NoFeasiblePair(_)
            | Error::CertificateFailed(_) => Status::Fail,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Parser, Debug)]
#[command(name = "mahler", version, about = "Certified continued-fraction and irrationality-measure checks for Mahler series")]
#[command(allow_negative_numbers = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CommandKind {
    Cf,
    Hankel,
    Tower,
    Bounds,
    Audit,
    ChooseParams,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Laurent continued fraction of g and the linear-quotient test.
    Cf(Flags),
    /// Hankel determinants, integer convergents and height bounds.
    Hankel(Flags),
    /// Tower element q_{k,m}, p_{k,m} and its formal identity.
    Tower(Flags),
    /// Smallness, sandwich and proposition inequalities for a (k, m) grid.
    Bounds(Flags),
    /// Irrationality-measure audit of g(b) along its convergents.
    Audit(Flags),
    /// (x, t, k, m) for a denominator q.
    ChooseParams(Flags),
}

impl Command {
    fn split(self) -> (CommandKind, Flags) {
        match self {
            Command::Cf(f) => (CommandKind::Cf, f),
            Command::Hankel(f) => (CommandKind::Hankel, f),
            Command::Tower(f) => (CommandKind::Tower, f),
            Command::Bounds(f) => (CommandKind::Bounds, f),
            Command::Audit(f) => (CommandKind::Audit, f),
            Command::ChooseParams(f) => (CommandKind::ChooseParams, f),
        }
    }
}

#[derive(Args, Debug, Default)]
struct Flags {
    /// JSON or TOML file with any of the fields below.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    d: Option<u32>,
    /// Comma-separated u_1..u_{d-1}.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    u: Option<Vec<i64>>,
    /// `thue-morse` as a shorthand for d = 2, u = -1.
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    b: Option<String>,
    /// Depth: number of partial quotients, largest Hankel index, or tower k.
    #[arg(long = "K")]
    k: Option<usize>,
    /// Upper index for alpha_{k,i}, or largest m for `bounds`.
    #[arg(long = "M")]
    m_upper: Option<usize>,
    /// Tower level.
    #[arg(long)]
    m: Option<u32>,
    #[arg(long = "Qmax")]
    q_max: Option<String>,
    #[arg(long)]
    q: Option<String>,
    /// Rational, e.g. `4` or `9/2`.
    #[arg(long)]
    tau: Option<String>,
    #[arg(long)]
    max_degree: Option<usize>,
    #[arg(long)]
    max_coeffs: Option<usize>,
    #[arg(long)]
    max_seconds: Option<u64>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// File layer. Integers may be given as numbers or strings such as `"1e12"`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    d: Option<u32>,
    u: Option<Vec<i64>>,
    name: Option<String>,
    b: Option<NumOrStr>,
    #[serde(alias = "K")]
    k: Option<usize>,
    #[serde(alias = "M")]
    m_upper: Option<usize>,
    m: Option<u32>,
    #[serde(alias = "Qmax")]
    q_max: Option<NumOrStr>,
    q: Option<NumOrStr>,
    tau: Option<NumOrStr>,
    #[serde(default)]
    budgets: FileBudgets,
    #[serde(default)]
    output: FileOutput,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileBudgets {
    max_degree: Option<usize>,
    max_coeffs: Option<usize>,
    max_seconds: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileOutput {
    format: Option<Format>,
    path: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum NumOrStr {
    Int(i64),
    Str(String),
}

impl NumOrStr {
    fn into_string(self) -> String {
        match self {
            NumOrStr::Int(i) => i.to_string(),
            NumOrStr::Str(s) => s,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Budgets {
    pub max_degree: usize,
    pub max_coeffs: usize,
    pub max_seconds: Option<u64>,
}

/// Fully resolved settings for one run.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub spec: MahlerSpec,
    pub b: BigInt,
    pub k: usize,
    pub m_upper: Option<usize>,
    pub m: u32,
    pub q_max: BigInt,
    pub q: Option<BigInt>,
    pub tau: Option<BigRational>,
    pub budgets: Budgets,
    pub format: Format,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    /// The part of the config that determines the report, as hashed into it.
    /// The output path is left out so that moving a report keeps its hash.
    pub fn to_value(&self) -> Value {
        json!({
            "d": self.spec.d(),
            "u": self.spec.u(),
            "b": self.b.to_string(),
            "K": self.k,
            "M": self.m_upper,
            "m": self.m,
            "Qmax": self.q_max.to_string(),
            "q": self.q.as_ref().map(|q| q.to_string()),
            "tau": self.tau.as_ref().map(rational_string),
            "budgets": {
                "max_degree": self.budgets.max_degree,
                "max_coeffs": self.budgets.max_coeffs,
                "max_seconds": self.budgets.max_seconds,
            },
            "format": match self.format { Format::Json => "json", Format::Csv => "csv" },
        })
    }
}

/// Usage problems, reported with exit status 3.
#[derive(Debug)]
pub struct UsageError(pub String);

fn usage(msg: impl Into<String>) -> UsageError {
    UsageError(msg.into())
}

/// Parses `123`, `-7`, or `<integer>e<exponent>` such as `1e12`.
pub fn parse_integer(s: &str) -> Result<BigInt, UsageError> {
    let s = s.trim();
    let bad = || usage(format!("not an integer: {s:?}"));
    match s.split_once(['e', 'E']) {
        Some((mant, exp)) => {
            let mant: BigInt = mant.parse().map_err(|_| bad())?;
            let exp: u32 = exp.parse().map_err(|_| bad())?;
            if exp > 100_000 {
                return Err(bad());
            }
            Ok(mant * num_traits::pow(BigInt::from(10), exp as usize))
        }
        None => s.parse().map_err(|_| bad()),
    }
}

/// Parses `p` or `p/q`.
pub fn parse_rational(s: &str) -> Result<BigRational, UsageError> {
    let s = s.trim();
    let bad = || usage(format!("not a rational: {s:?}"));
    match s.split_once('/') {
        Some((p, q)) => {
            let p: BigInt = p.trim().parse().map_err(|_| bad())?;
            let q: BigInt = q.trim().parse().map_err(|_| bad())?;
            if q.is_zero() {
                return Err(bad());
            }
            Ok(BigRational::new(p, q))
        }
        None => Ok(BigRational::from_integer(parse_integer(s)?)),
    }
}

fn read_config_file(path: &Path) -> Result<FileConfig, UsageError> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let is_toml = path.extension().is_some_and(|e| e == "toml");
    if is_toml {
        toml::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
    } else {
        serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
    }
}

fn env_number<T: std::str::FromStr>(name: &str) -> Result<Option<T>, UsageError> {
    match std::env::var(name) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| usage(format!("{name}={v:?} is not a positive integer"))),
        Err(_) => Ok(None),
    }
}

fn resolve(flags: Flags) -> Result<RunConfig, UsageError> {
    let file = match &flags.config {
        Some(p) => read_config_file(p)?,
        None => FileConfig::default(),
    };
    let name = flags.name.or(file.name);
    let d = flags.d.or(file.d);
    let u = flags.u.or(file.u);
    let spec = match (name.as_deref(), d, u) {
        (Some("thue-morse" | "tm"), None, None) => MahlerSpec::thue_morse(),
        (Some(n), None, None) => return Err(usage(format!("unknown instance name {n:?}; known: thue-morse"))),
        (Some(_), _, _) => return Err(usage("give either --name or --d/--u, not both")),
        (None, Some(d), Some(u)) => MahlerSpec::new(d, u).map_err(|e| usage(e.to_string()))?,
        (None, None, Some(u)) if u.len() == 1 => MahlerSpec::new(2, u).map_err(|e| usage(e.to_string()))?,
        (None, Some(_), None) => return Err(usage("--u is required with --d")),
        (None, _, _) => MahlerSpec::thue_morse(),
    };
    let b = match flags.b.or(file.b.map(NumOrStr::into_string)) {
        Some(s) => parse_integer(&s)?,
        None => BigInt::from(2),
    };
    let q_max = match flags.q_max.or(file.q_max.map(NumOrStr::into_string)) {
        Some(s) => parse_integer(&s)?,
        None => num_traits::pow(BigInt::from(10), 12),
    };
    let q = flags.q.or(file.q.map(NumOrStr::into_string)).map(|s| parse_integer(&s)).transpose()?;
    let tau = flags.tau.or(file.tau.map(NumOrStr::into_string)).map(|s| parse_rational(&s)).transpose()?;
    let positive = |v: Option<usize>, what: &str| -> Result<Option<usize>, UsageError> {
        match v {
            Some(0) => Err(usage(format!("{what} must be positive"))),
            v => Ok(v),
        }
    };
    let max_degree = positive(
        flags.max_degree.or(env_number("MAHLER_MAX_DEGREE")?).or(file.budgets.max_degree),
        "max_degree",
    )?
    .unwrap_or(DEFAULT_MAX_DEGREE);
    let max_coeffs = positive(
        flags.max_coeffs.or(env_number("MAHLER_MAX_COEFFS")?).or(file.budgets.max_coeffs),
        "max_coeffs",
    )?
    .unwrap_or(DEFAULT_MAX_COEFFS);
    let max_seconds = flags
        .max_seconds
        .or(env_number("MAHLER_MAX_SECONDS")?)
        .or(file.budgets.max_seconds);
    if max_seconds == Some(0) {
        return Err(usage("max_seconds must be positive"));
    }
    Ok(RunConfig {
        spec,
        b,
        k: flags.k.or(file.k).unwrap_or(10),
        m_upper: flags.m_upper.or(file.m_upper),
        m: flags.m.or(file.m).unwrap_or(1),
        q_max,
        q,
        tau,
        budgets: Budgets {
            max_degree,
            max_coeffs,
            max_seconds,
        },
        format: flags.format.or(file.output.format).unwrap_or(Format::Json),
        out: flags.out.or(file.output.path),
    })
}

/// Files produced by one command. The first entry goes to `--out` or stdout.
struct Rendered {
    status: Status,
    main: String,
    extra: Vec<(String, String)>,
}

fn check_b(cfg: &RunConfig) -> Result<(), UsageError> {
    if cfg.b < BigInt::from(2) {
        return Err(usage(format!("this command needs b >= 2, got {}", cfg.b)));
    }
    Ok(())
}

fn csv_unsupported(cfg: &RunConfig, what: &str) -> Result<(), UsageError> {
    if cfg.format == Format::Csv {
        return Err(usage(format!("{what} has no CSV form; use --format json")));
    }
    Ok(())
}

/// `C`, `tau` and `gamma`, as far as they are defined for this instance.
fn constants(cfg: &RunConfig) -> Value {
    if cfg.spec.is_degenerate() {
        return json!({ "C": null, "gamma": null, "gamma_over_ln2": null, "tau": null });
    }
    let c = constant_c(&cfg.spec, DEFAULT_PREC).ok();
    let tau = cfg.tau.clone().or_else(|| tau_floor(&cfg.spec, 64).ok());
    let g2 = tau
        .as_ref()
        .filter(|_| cfg.b >= BigInt::from(2))
        .and_then(|t| gamma_over_ln2(&cfg.spec, &cfg.b, t, DEFAULT_PREC).ok());
    json!({
        "C": c.as_ref().map(interval_value),
        "tau": tau.as_ref().map(rational_string),
        "gamma_over_ln2": g2.as_ref().map(interval_value),
        "gamma": g2.as_ref().map(|g| interval_value(&(g * &ln2(DEFAULT_PREC)).round_out(DEFAULT_PREC))),
    })
}

fn envelope(command: CommandKind, cfg: &RunConfig, status: Status, report: Value) -> Value {
    let config = cfg.to_value();
    json!({
        "command": command_name(command),
        "config": config,
        "config_hash": config_hash(&config),
        "constants": constants(cfg),
        "status": status.label(),
        "report": report,
    })
}

fn command_name(c: CommandKind) -> &'static str {
    match c {
        CommandKind::Cf => "cf",
        CommandKind::Hankel => "hankel",
        CommandKind::Tower => "tower",
        CommandKind::Bounds => "bounds",
        CommandKind::Audit => "audit",
        CommandKind::ChooseParams => "choose-params",
    }
}

fn to_value<T: serde::Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("reports serialize")
}

fn run_cf(cfg: &RunConfig) -> Result<Rendered, Error> {
    let (report, _) = badly_approximable_report_with_budget(&cfg.spec, cfg.k, cfg.budgets.max_coeffs)?;
    let status = if report.is_bad_up_to_k { Status::Pass } else { Status::Fail };
    let main = match cfg.format {
        Format::Json => to_canonical_json(&envelope(CommandKind::Cf, cfg, status, to_value(&report))),
        Format::Csv => to_csv(
            &["j", "deg_a_j"],
            &report
                .quotient_degrees
                .iter()
                .enumerate()
                .map(|(j, d)| vec![(j + 1).to_string(), d.to_string()])
                .collect::<Vec<_>>(),
        ),
    };
    Ok(Rendered {
        status,
        main,
        extra: vec![],
    })
}

fn run_hankel(cfg: &RunConfig) -> Result<Rendered, Error> {
    let k_max = cfg.k;
    let m = cfg.m_upper.unwrap_or(2 * k_max + 2).max(k_max + 1);
    let prefix = prefix_with_budget(&cfg.spec, (2 * k_max + 2).max(k_max + 1 + m), cfg.budgets.max_coeffs)?;
    let dets = hankel_dets_upto(&prefix, k_max + 1)?;
    if cfg.format == Format::Csv {
        return Ok(Rendered {
            status: Status::Pass,
            main: det_table_csv(&dets),
            extra: vec![],
        });
    }
    let mut status = Status::Pass;
    let mut rows = Vec::new();
    for k in 1..=k_max {
        match integer_convergent(&prefix, k) {
            Ok(conv) => {
                let h = height_report(&cfg.spec, &prefix, &conv, m, DEFAULT_PREC)?;
                if !h.passed() {
                    status = status.worst(if h.exact.all() && h.alpha_exact {
                        Status::Undecidable
                    } else {
                        Status::Fail
                    });
                }
                rows.push(json!({ "k": k, "convergent": to_value(&conv), "heights": to_value(&h), "passed": h.passed() }));
            }
            Err(Error::SingularHankel { size }) => rows.push(json!({ "k": k, "singular": size })),
            Err(e) => return Err(e),
        }
    }
    let report = json!({
        "dets": dets.iter().map(|d| d.to_string()).collect::<Vec<_>>(),
        "alpha_upper_index": m,
        "convergents": rows,
    });
    Ok(Rendered {
        status,
        main: to_canonical_json(&envelope(CommandKind::Hankel, cfg, status, report)),
        extra: vec![],
    })
}

fn run_tower(cfg: &RunConfig) -> Result<Rendered, Error> {
    let (k, m) = (cfg.k, cfg.m);
    let dm = (cfg.spec.d() as usize).pow(m);
    let order = 2 * dm * (k + 2);
    let prefix = prefix_with_budget(&cfg.spec, order + k * dm + 1, cfg.budgets.max_coeffs)?;
    let conv = integer_convergent(&prefix, k)?;
    let element = tower_polynomials(&cfg.spec, &conv, m, cfg.budgets.max_degree)?;
    let check = residual_series_check(&cfg.spec, &prefix, &element, order)?;
    let values = if cfg.b >= BigInt::from(2) {
        let e = tower_values(&cfg.spec, &element, &cfg.b)?;
        json!({ "b": cfg.b.to_string(), "p": e.p().to_string(), "q": e.q().to_string() })
    } else {
        Value::Null
    };
    let status = if check.passed() { Status::Pass } else { Status::Fail };
    let report = json!({
        "k": k,
        "m": m,
        "deg_q": element.q_poly.degree(),
        "deg_p": element.p_poly.degree(),
        "base": to_value(&conv),
        "residual": to_value(&check),
        "values": values,
    });
    Ok(Rendered {
        status,
        main: to_canonical_json(&envelope(CommandKind::Tower, cfg, status, report)),
        extra: vec![],
    })
}

fn run_bounds(cfg: &RunConfig) -> Result<Rendered, Error> {
    let k_max = cfg.k.max(2);
    let m_max = cfg.m_upper.unwrap_or(cfg.m as usize).max(1) as u32;
    let prefix = prefix_with_budget(&cfg.spec, 4 * (k_max + 1), cfg.budgets.max_coeffs)?;
    let mut reports = Vec::new();
    let mut status = Status::Pass;
    for k in 2..=k_max {
        let conv = match integer_convergent(&prefix, k) {
            Ok(c) => c,
            Err(Error::SingularHankel { .. }) => continue,
            Err(e) => return Err(e),
        };
        for m in 1..=m_max {
            let element = tower_polynomials(&cfg.spec, &conv, m, cfg.budgets.max_degree)?;
            let element = tower_values(&cfg.spec, &element, &cfg.b)?;
            let dm = (cfg.spec.d() as usize).pow(m);
            let digits = 2 * k * dm;
            let eps = BigRational::new(BigInt::one(), num_traits::pow(BigInt::from(10), digits));
            let g = evaluate_g_with_budget(&cfg.spec, &cfg.b, &eps, cfg.budgets.max_coeffs)?;
            let r = diophantine_bounds(&cfg.spec, &prefix, &element, &g, DEFAULT_PREC)?;
            if r.any_failed() {
                status = status.worst(Status::Fail);
            } else if r.undecidable() > 0 {
                status = status.worst(Status::Undecidable);
            }
            reports.push(r);
        }
    }
    let main = match cfg.format {
        Format::Json => to_canonical_json(&envelope(CommandKind::Bounds, cfg, status, to_value(&reports))),
        Format::Csv => {
            let label = |o: Outcome| to_value(&o).as_str().unwrap_or_default().to_string();
            let rows: Vec<Vec<String>> = reports
                .iter()
                .map(|r| {
                    let mut row = vec![r.k.to_string(), r.m.to_string()];
                    row.extend(r.checks().iter().map(|(_, c)| label(c.outcome)));
                    row
                })
                .collect();
            to_csv(
                &["k", "m", "smallness_ub", "smallness_lb", "sandwich", "prop_l1", "prop_u1", "prop_envelope"],
                &rows,
            )
        }
    };
    Ok(Rendered {
        status,
        main,
        extra: vec![],
    })
}

fn audit_status(a: &Audit) -> Status {
    let s = &a.summary;
    if s.theorem_failures > 0 || s.bracket_failures > 0 || s.exponent_violations > 0 {
        Status::Fail
    } else if s.theorem_undecided > 0 {
        Status::Undecidable
    } else {
        Status::Pass
    }
}

/// Audit rows as CSV with the fixed column set.
pub fn audit_csv(a: &Audit) -> String {
    let opt = |x: Option<&BigRational>| x.map(rational_string).unwrap_or_default();
    let rows: Vec<Vec<String>> = a
        .rows
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                r.q_n.to_string(),
                r.p_n.to_string(),
                rational_string(r.err.lo()),
                rational_string(r.err.hi()),
                opt(r.delta.as_ref().map(|d| d.lo())),
                opt(r.delta.as_ref().map(|d| d.hi())),
            ]
        })
        .collect();
    to_csv(&["n", "q_n", "p_n", "err_lo", "err_hi", "delta_lo", "delta_hi"], &rows)
}

fn run_audit(cfg: &RunConfig, started: Instant) -> Result<Rendered, Error> {
    let mut params = AuditParams::new(cfg.q_max.clone());
    params.tau = cfg.tau.clone();
    let budget = Budget {
        max_coeffs: cfg.budgets.max_coeffs,
        deadline: cfg.budgets.max_seconds.map(|s| started + Duration::from_secs(s)),
    };
    let audit = measure_audit(&cfg.spec, &cfg.b, &params, budget)?;
    let status = audit_status(&audit);
    match cfg.format {
        Format::Json => Ok(Rendered {
            status,
            main: to_canonical_json(&envelope(CommandKind::Audit, cfg, status, to_value(&audit))),
            extra: vec![],
        }),
        Format::Csv => Ok(Rendered {
            status,
            main: audit_csv(&audit),
            extra: vec![(
                "summary.json".into(),
                to_canonical_json(&envelope(CommandKind::Audit, cfg, status, to_value(&audit.summary))),
            )],
        }),
    }
}

fn run_choose(cfg: &RunConfig) -> Result<Rendered, Error> {
    let q = cfg
        .q
        .as_ref()
        .ok_or_else(|| Error::Precondition("choose-params needs --q".into()))?;
    let choice = choose_parameters(&cfg.spec, &cfg.b, q, cfg.tau.as_ref())?;
    let status = if choice.flags.all() && choice.stable {
        Status::Pass
    } else {
        Status::Fail
    };
    Ok(Rendered {
        status,
        main: to_canonical_json(&envelope(CommandKind::ChooseParams, cfg, status, to_value(&choice))),
        extra: vec![],
    })
}

fn emit(cfg: &RunConfig, rendered: &Rendered) -> Result<(), UsageError> {
    match &cfg.out {
        Some(path) => {
            write_atomic(path, &rendered.main).map_err(|e| usage(format!("writing {}: {e}", path.display())))?;
            for (suffix, body) in &rendered.extra {
                let mut name = path.as_os_str().to_owned();
                name.push(".");
                name.push(suffix);
                let p = PathBuf::from(name);
                write_atomic(&p, body).map_err(|e| usage(format!("writing {}: {e}", p.display())))?;
            }
        }
        None => print!("{}", rendered.main),
    }
    Ok(())
}

fn dispatch(command: CommandKind, cfg: &RunConfig, started: Instant) -> Result<Status, UsageError> {
    if cfg.spec.p_at_one() != 1 && !cfg.spec.is_degenerate() {
        eprintln!(
            "warning: P(1) = {} for u = {:?}; the instance is normalized by P(0) = 1",
            cfg.spec.p_at_one(),
            cfg.spec.u()
        );
    }
    if matches!(command, CommandKind::Tower | CommandKind::ChooseParams) {
        csv_unsupported(cfg, command_name(command))?;
    }
    if matches!(command, CommandKind::Bounds | CommandKind::Audit | CommandKind::ChooseParams) {
        check_b(cfg)?;
    }
    if cfg.format == Format::Csv && cfg.out.is_none() && command == CommandKind::Audit {
        eprintln!("note: the audit summary is only written alongside --out");
    }
    let result = match command {
        CommandKind::Cf => run_cf(cfg),
        CommandKind::Hankel => run_hankel(cfg),
        CommandKind::Tower => run_tower(cfg),
        CommandKind::Bounds => run_bounds(cfg),
        CommandKind::Audit => run_audit(cfg, started),
        CommandKind::ChooseParams => run_choose(cfg),
    };
    match result {
        Ok(rendered) => {
            emit(cfg, &rendered)?;
            Ok(rendered.status)
        }
        Err(e) => {
            let status = Status::of_error(&e);
            if status == Status::Usage {
                return Err(usage(e.to_string()));
            }
            // Certified failures and budget stops still leave a report behind.
            let mut report = json!({ "error": e.to_string() });
            if let Error::BudgetExhausted { certified } = &e {
                report["certified_quotients"] = json!(certified.iter().map(|a| a.to_string()).collect::<Vec<_>>());
            }
            eprintln!("{}: {e}", status.label());
            if cfg.format == Format::Json {
                let main = to_canonical_json(&envelope(command, cfg, status, report));
                emit(
                    cfg,
                    &Rendered {
                        status,
                        main,
                        extra: vec![],
                    },
                )?;
            }
            Ok(status)
        }
    }
}

/// Runs one command on a resolved config and returns its exit status.
pub fn run(config: &RunConfig, command: &str) -> Result<Status, UsageError> {
    let kind = match command {
        "cf" => CommandKind::Cf,
        "hankel" => CommandKind::Hankel,
        "tower" => CommandKind::Tower,
        "bounds" => CommandKind::Bounds,
        "audit" => CommandKind::Audit,
        "choose-params" => CommandKind::ChooseParams,
        other => return Err(usage(format!("unknown command {other:?}"))),
    };
    dispatch(kind, config, Instant::now())
}

/// Entry point used by the binary. Returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let started = Instant::now();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { Status::Usage as i32 } else { 0 };
        }
    };
    let (kind, flags) = cli.command.split();
    let outcome = resolve(flags).and_then(|cfg| dispatch(kind, &cfg, started));
    match outcome {
        Ok(s) => s as i32,
        Err(UsageError(msg)) => {
            eprintln!("error: {msg}");
            Status::Usage as i32
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integers_with_exponent() {
        assert_eq!(parse_integer("1e12").unwrap(), BigInt::from(1_000_000_000_000u64));
        assert_eq!(parse_integer("-7").unwrap(), BigInt::from(-7));
        assert!(parse_integer("1.5").is_err());
        assert_eq!(parse_rational("9/2").unwrap(), BigRational::new(9.into(), 2.into()));
        assert!(parse_rational("1/0").is_err());
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, "d = 3\nu = [2, 5]\nK = 7\nQmax = \"1e6\"\n[budgets]\nmax_coeffs = 5000\n").unwrap();
        let flags = Flags {
            config: Some(p),
            k: Some(4),
            ..Default::default()
        };
        let cfg = resolve(flags).unwrap();
        assert_eq!(cfg.spec.d(), 3);
        assert_eq!(cfg.k, 4);
        assert_eq!(cfg.q_max, BigInt::from(1_000_000));
        assert_eq!(cfg.budgets.max_coeffs, 5000);
    }

    #[test]
    fn bad_u_length_is_usage() {
        let flags = Flags {
            d: Some(3),
            u: Some(vec![1]),
            ..Default::default()
        };
        assert!(resolve(flags).is_err());
        assert_eq!(main_with_args(["mahler", "cf", "--d", "3", "--u", "1"]), 3);
        assert_eq!(main_with_args(["mahler", "cf", "--bogus"]), 3);
    }

    #[test]
    fn status_order() {
        assert_eq!(Status::Pass.worst(Status::Undecidable), Status::Undecidable);
        assert_eq!(Status::Fail.worst(Status::Pass), Status::Fail);
        assert_eq!(Status::Undecidable.worst(Status::Fail), Status::Fail);
    }
}
