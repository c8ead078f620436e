//! Real continued fraction of `g(b)` from certified enclosures, the
//! irrationality-measure audit, the constant `gamma`, and the `(k, m)`
//! parameter recipe that turns a denominator `q` into a tower level.
//!
//! All logarithms are base 2. `exp(gamma s)` is evaluated as `2^{(gamma/ln 2) s}`.

use std::time::Instant;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::enclosure::{evaluate_g_with_budget, Enclosure};
use crate::error::{Error, Result};
use crate::hankel::{log_base, Verdict};
use crate::interval::{pow2, round_down, Interval, DEFAULT_PREC};
use crate::report::{ser_int, ser_interval, ser_opt_interval, ser_opt_rat};
use crate::series::{MahlerSpec, DEFAULT_MAX_COEFFS};
use crate::tower::constant_c;

/// Resource limits for enclosure refinement.
#[derive(Clone, Copy, Debug)]
pub struct Budget {
    pub max_coeffs: usize,
    pub deadline: Option<Instant>,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            max_coeffs: DEFAULT_MAX_COEFFS,
            deadline: None,
        }
    }
}

impl Budget {
    fn expired(&self) -> bool {
        self.deadline.is_some_and(|d| Instant::now() >= d)
    }
}

fn int_iv(n: impl Into<BigInt>) -> Interval {
    Interval::from_int(n)
}

fn rat_iv(x: BigRational) -> Interval {
    Interval::exact(x)
}

/// Partial quotients that every point of `[lo, hi]` shares, and whether the
/// expansion ended exactly (the interval was a single rational).
pub fn certified_quotients(x: &Interval) -> (Vec<BigInt>, bool) {
    let mut lo = x.lo().clone();
    let mut hi = x.hi().clone();
    let mut out = Vec::new();
    loop {
        let a = lo.floor();
        if a != hi.floor() {
            return (out, false);
        }
        out.push(a.to_integer());
        let (rl, rh) = (&lo - &a, &hi - &a);
        if rl.is_zero() {
            // Only an exact rational can continue past this point.
            return (out, rh.is_zero());
        }
        lo = rh.recip();
        hi = rl.recip();
    }
}

/// Convergents `p_n / q_n` of `[a_0; a_1, ...]`.
pub fn convergents(quotients: &[BigInt]) -> Vec<(BigInt, BigInt)> {
    let (mut p2, mut q2) = (BigInt::zero(), BigInt::one());
    let (mut p1, mut q1) = (BigInt::one(), BigInt::zero());
    quotients
        .iter()
        .map(|a| {
            let p = a * &p1 + &p2;
            let q = a * &q1 + &q2;
            (p2, q2, p1, q1) = (p1.clone(), q1.clone(), p.clone(), q.clone());
            (p, q)
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct RealCf {
    #[serde(serialize_with = "ser_int_vec")]
    pub quotients: Vec<BigInt>,
    #[serde(skip)]
    pub convergents: Vec<(BigInt, BigInt)>,
    /// `g(b)` is rational and the expansion is complete.
    pub terminated: bool,
    pub enclosure: Enclosure,
}

fn ser_int_vec<S: serde::Serializer>(v: &[BigInt], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|x| x.to_string()))
}

/// Expands `g(b)` until a convergent denominator exceeds `q_max`, squaring the
/// enclosure width on each round. Only quotients shared by the whole enclosure
/// are emitted.
pub fn real_continued_fraction(spec: &MahlerSpec, b: &BigInt, q_max: &BigInt, budget: Budget) -> Result<RealCf> {
    let mut eps = pow2(-64);
    let mut certified: Vec<BigInt> = Vec::new();
    let mut enc: Option<Enclosure> = None;
    loop {
        let fresh = match evaluate_g_with_budget(spec, b, &eps, budget.max_coeffs) {
            Ok(e) => e,
            Err(Error::BudgetExceeded { .. }) => return Err(Error::BudgetExhausted { certified }),
            Err(e) => return Err(e),
        };
        let e = match &enc {
            Some(prev) => Enclosure {
                value: prev.value.intersect(&fresh.value).ok_or_else(|| {
                    Error::CertificateFailed("nested enclosures are disjoint".into())
                })?,
                ..fresh
            },
            None => fresh,
        };
        let (qs, terminated) = certified_quotients(&e.value);
        debug_assert!(qs.starts_with(&certified));
        certified = qs;
        let conv = convergents(&certified);
        let past = conv.last().is_some_and(|(_, q)| q > q_max);
        if terminated || past {
            return Ok(RealCf {
                quotients: certified,
                convergents: conv,
                terminated,
                enclosure: e,
            });
        }
        if budget.expired() {
            return Err(Error::BudgetExhausted { certified });
        }
        enc = Some(e);
        eps = &eps * &eps;
    }
}

/// `gamma = ln 2 (2 d tau log2 b + 2 tau + 2 C)`.
pub fn gamma_constant(spec: &MahlerSpec, b: &BigInt, tau: &BigRational, prec: u32) -> Result<Interval> {
    Ok(&gamma_over_ln2(spec, b, tau, prec)? * &crate::interval::ln2(prec))
}

/// `gamma / ln 2`, the exponent used with base 2.
pub fn gamma_over_ln2(spec: &MahlerSpec, b: &BigInt, tau: &BigRational, prec: u32) -> Result<Interval> {
    if tau <= &BigRational::one() {
        return Err(Error::TauTooSmall(crate::report::rational_string(tau)));
    }
    if b < &BigInt::from(2) {
        return Err(Error::Precondition(format!("b must be at least 2, got {b}")));
    }
    let c = constant_c(spec, prec)?;
    let t = rat_iv(tau.clone());
    let two = int_iv(2);
    let first = &(&(&two * &int_iv(spec.d())) * &t) * &int_iv(b.clone()).log2(prec);
    Ok(&(&first + &(&two * &t)) + &(&two * &c))
}

/// `sqrt(log2 q log2 log2 q)` for `q >= 2`.
fn root_loglog(q: &BigInt, prec: u32) -> Interval {
    let lq = int_iv(q.clone()).log2(prec);
    let llq = lq.log2(prec);
    (&lq * &llq).max(&int_iv(0)).sqrt(prec)
}

/// `|g(b)| / (4 b q^2 exp(gamma sqrt(log2 q log2 log2 q)))`.
pub fn theorem_lower_bound(g: &Enclosure, b: &BigInt, q: &BigInt, gamma2: &Interval, prec: u32) -> Interval {
    let q_iv = int_iv(q.abs());
    let den = &(&(&int_iv(4) * &int_iv(b.clone())) * &(&q_iv * &q_iv)) * &(gamma2 * &root_loglog(&q.abs(), prec)).exp2(prec);
    &g.value.abs() / &den
}

/// Decides `|g(b) - p/q| >= lower bound` for one pair.
pub fn theorem_lower_bound_check(
    spec: &MahlerSpec,
    b: &BigInt,
    p: &BigInt,
    q: &BigInt,
    tau: &BigRational,
    g: &Enclosure,
    prec: u32,
) -> Result<Verdict> {
    if q.abs() < BigInt::from(2) {
        return Err(Error::Precondition("q must be at least 2".into()));
    }
    let gamma2 = gamma_over_ln2(spec, b, tau, prec)?;
    let lower = theorem_lower_bound(g, b, q, &gamma2, prec);
    let err = (&g.value - &rat_iv(BigRational::new(p.clone(), q.clone()))).abs();
    Ok(Verdict::from_certificate(lower.certify_le(&err)))
}

/// Grid of `tau` values tried by default.
pub fn tau_grid() -> impl Iterator<Item = BigRational> {
    (2..24).map(|e| BigRational::from_integer(BigInt::one() << e))
}

/// Left side of the `tau` condition:
/// `2 + log2(k+1) + (k/2) log2 k + (k+1)(log_d(2k+1)+1) log2 ||u||`.
fn cond_tau_lhs(spec: &MahlerSpec, k: &BigInt, prec: u32) -> Interval {
    let k_iv = int_iv(k.clone());
    let k1 = int_iv(k + 1);
    let log_k = if k <= &BigInt::one() { int_iv(0) } else { k_iv.log2(prec) };
    let half_k = rat_iv(BigRational::new(k.clone(), 2.into()));
    let mut lhs = &(&int_iv(2) + &k1.log2(prec)) + &(&half_k * &log_k);
    if spec.u_norm() > 1 {
        let ld = &log_base(spec.d(), &int_iv(k * 2 + 1), prec) + &int_iv(1);
        lhs = &lhs + &(&(&k1 * &ld) * &int_iv(spec.u_norm()).log2(prec));
    }
    lhs
}

/// Largest `k` checked by [`tau_floor`].
pub const TAU_FLOOR_K_CAP: u64 = 128;

/// Smallest grid `tau` for which the `tau` condition holds for every
/// `k <= TAU_FLOOR_K_CAP` at every `t` allowed by `k <= (2/tau) sqrt(t / log2 t)`.
/// The right side grows with `t`, so it suffices to test a lower bound for the
/// least such `t`. With `r = tau k / 2 >= 2`, any admissible `t` has
/// `t >= r^2 log2 t >= r^2 log2 r^2`, hence `t >= r^2 log2(r^2 log2 r^2)`.
pub fn tau_floor(spec: &MahlerSpec, prec: u32) -> Result<BigRational> {
    'grid: for tau in tau_grid() {
        let tau_iv = rat_iv(tau.clone());
        for k in 1..=TAU_FLOOR_K_CAP {
            let r = &(&tau_iv * &int_iv(k)) / &int_iv(2);
            let r2 = &r * &r;
            let first = &r2 * &r2.log2(prec);
            let t = Interval::exact(round_down((&r2 * &first.log2(prec)).lo(), prec));
            let rhs = &tau_iv * &(&t * &t.log2(prec)).sqrt(prec);
            if cond_tau_lhs(spec, &BigInt::from(k), prec).certify_lt(&rhs) != Some(true) {
                continue 'grid;
            }
        }
        return Ok(tau);
    }
    Err(Error::TauTooSmall("no grid value satisfies the tau condition".into()))
}

/// `-log2(q^2 err) / sqrt(log2 q log2 log2 q)` for `q >= 4` and `err > 0`.
/// Inclusion-monotone in `err` at fixed `prec`.
pub fn delta(q: &BigInt, err: &Interval, prec: u32) -> Option<Interval> {
    if q < &BigInt::from(4) || err.contains_zero() || err.lo() < &BigRational::zero() {
        return None;
    }
    let q_iv = int_iv(q.clone());
    let num = -&(&(&q_iv * &q_iv) * err).log2(prec);
    Some((&num / &root_loglog(q, prec)).round_out(prec))
}

/// One row of the audit table.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AuditRow {
    pub n: usize,
    #[serde(serialize_with = "ser_int")]
    pub q_n: BigInt,
    #[serde(serialize_with = "ser_int")]
    pub p_n: BigInt,
    /// `|g(b) - p_n/q_n|`
    #[serde(serialize_with = "ser_interval")]
    pub err: Interval,
    /// `-log2(q_n^2 err) / sqrt(log2 q_n log2 log2 q_n)`, for `q_n >= 4`.
    #[serde(serialize_with = "ser_opt_interval")]
    pub delta: Option<Interval>,
    /// `1/(q_n(q_n+q_{n+1})) <= err <= 1/(q_n q_{n+1})`
    pub bracket: Verdict,
    /// The lower bound with `gamma`; absent below the threshold.
    pub theorem: Option<Verdict>,
    /// `log2 q_{n+1} / log2 q_n`, for `q_n >= 2`.
    #[serde(serialize_with = "ser_opt_interval")]
    pub log_ratio: Option<Interval>,
}

#[derive(Clone, Debug, Serialize)]
pub struct AuditSummary {
    #[serde(serialize_with = "ser_opt_rat")]
    pub k_empirical: Option<BigRational>,
    #[serde(serialize_with = "ser_interval")]
    pub gamma: Interval,
    #[serde(serialize_with = "ser_interval")]
    pub gamma_over_ln2: Interval,
    #[serde(serialize_with = "crate::report::ser_rat")]
    pub tau: BigRational,
    #[serde(serialize_with = "ser_interval")]
    pub constant_c: Interval,
    #[serde(serialize_with = "ser_int")]
    pub q_max: BigInt,
    #[serde(serialize_with = "ser_int")]
    pub theorem_threshold: BigInt,
    #[serde(serialize_with = "ser_int")]
    pub exponent_threshold: BigInt,
    pub rows: usize,
    pub theorem_failures: usize,
    pub theorem_undecided: usize,
    pub bracket_failures: usize,
    /// Rows with `q_n >= exponent_threshold` whose `log2 q_{n+1} / log2 q_n`
    /// is not certified `<= 3/2`.
    pub exponent_violations: usize,
    #[serde(serialize_with = "ser_opt_rat")]
    pub max_log_ratio: Option<BigRational>,
    #[serde(serialize_with = "ser_interval")]
    pub enclosure: Interval,
}

#[derive(Clone, Debug, Serialize)]
pub struct Audit {
    pub rows: Vec<AuditRow>,
    pub summary: AuditSummary,
}

impl Audit {
    pub fn passed(&self) -> bool {
        let s = &self.summary;
        s.theorem_failures == 0 && s.theorem_undecided == 0 && s.bracket_failures == 0 && s.exponent_violations == 0
    }
}

#[derive(Clone, Debug)]
pub struct AuditParams {
    pub q_max: BigInt,
    pub tau: Option<BigRational>,
    pub theorem_threshold: BigInt,
    pub exponent_threshold: BigInt,
    pub prec: u32,
}

impl AuditParams {
    pub fn new(q_max: BigInt) -> Self {
        AuditParams {
            q_max,
            tau: None,
            theorem_threshold: BigInt::from(1000),
            exponent_threshold: BigInt::from(1000),
            prec: DEFAULT_PREC,
        }
    }
}

/// Rows for every convergent `2 <= q_n <= Q_max` of the real continued
/// fraction of `g(b)`, with `K_empirical = max delta_n`.
pub fn measure_audit(spec: &MahlerSpec, b: &BigInt, params: &AuditParams, budget: Budget) -> Result<Audit> {
    let prec = params.prec;
    let tau = match &params.tau {
        Some(t) => t.clone(),
        None => tau_floor(spec, 64)?,
    };
    let gamma2 = gamma_over_ln2(spec, b, &tau, prec)?;
    let gamma = &gamma2 * &crate::interval::ln2(prec);
    let cf = real_continued_fraction(spec, b, &params.q_max, budget)?;
    if cf.terminated {
        return Err(Error::Precondition(format!(
            "g({b}) is rational ({}); there is nothing to audit",
            crate::report::rational_string(cf.enclosure.lo())
        )));
    }
    // Tighten far below the smallest error so delta intervals are narrow.
    let q_last = cf.convergents.last().map(|(_, q)| q.clone()).unwrap_or_else(BigInt::one);
    let eps = pow2(-64) / BigRational::from_integer(BigInt::from(2) * &q_last * &q_last);
    let g = if cf.enclosure.width() > eps {
        cf.enclosure.refine(spec, b, &eps)?
    } else {
        cf.enclosure.clone()
    };

    let two = BigInt::from(2);
    let three_halves = rat_iv(BigRational::new(3.into(), 2.into()));
    let mut rows = Vec::new();
    for (n, (p, q)) in cf.convergents.iter().enumerate() {
        if q < &two || q > &params.q_max {
            continue;
        }
        let Some((_, q_next)) = cf.convergents.get(n + 1) else {
            break;
        };
        let q_iv = int_iv(q.clone());
        let err = (&g.value - &rat_iv(BigRational::new(p.clone(), q.clone()))).abs();
        let delta = delta(q, &err, prec);
        let lo_b = BigRational::new(BigInt::one(), q * (q + q_next));
        let hi_b = BigRational::new(BigInt::one(), q * q_next);
        let bracket = match (rat_iv(lo_b).certify_le(&err), err.certify_le(&rat_iv(hi_b))) {
            (Some(true), Some(true)) => Verdict::Pass,
            (Some(false), _) | (_, Some(false)) => Verdict::Fail,
            _ => Verdict::Undecidable,
        };
        let theorem = (q >= &params.theorem_threshold).then(|| {
            let lower = theorem_lower_bound(&g, b, q, &gamma2, prec);
            Verdict::from_certificate(lower.certify_le(&err))
        });
        let log_ratio = Some((&int_iv(q_next.clone()).log2(prec) / &q_iv.log2(prec)).round_out(prec));
        rows.push(AuditRow {
            n,
            q_n: q.clone(),
            p_n: p.clone(),
            err: err.round_out(prec.max(64) * 4),
            delta,
            bracket,
            theorem,
            log_ratio,
        });
    }

    let k_empirical = rows.iter().filter_map(|r| r.delta.as_ref().map(|d| d.hi().clone())).max();
    let count = |f: &dyn Fn(&AuditRow) -> bool| rows.iter().filter(|r| f(r)).count();
    let exponent_violations = count(&|r| {
        r.q_n >= params.exponent_threshold
            && r.log_ratio.as_ref().map(|x| x.certify_le(&three_halves)) != Some(Some(true))
    });
    let max_log_ratio = rows
        .iter()
        .filter(|r| r.q_n >= params.exponent_threshold)
        .filter_map(|r| r.log_ratio.as_ref().map(|x| x.hi().clone()))
        .max();
    let summary = AuditSummary {
        k_empirical,
        gamma: gamma.round_out(prec),
        gamma_over_ln2: gamma2,
        tau,
        constant_c: constant_c(spec, prec)?,
        q_max: params.q_max.clone(),
        theorem_threshold: params.theorem_threshold.clone(),
        exponent_threshold: params.exponent_threshold.clone(),
        rows: rows.len(),
        theorem_failures: count(&|r| r.theorem == Some(Verdict::Fail)),
        theorem_undecided: count(&|r| r.theorem == Some(Verdict::Undecidable)),
        bracket_failures: count(&|r| r.bracket != Verdict::Pass),
        exponent_violations,
        max_log_ratio,
        enclosure: g.value.clone(),
    };
    Ok(Audit { rows, summary })
}

/// Feasibility of each step of the parameter recipe.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ParameterFlags {
    /// `(d tau)^2 log2 t <= t`
    pub t_log_t: bool,
    /// `t <= n <= t + d tau sqrt(t log2 t)`
    pub n_window: bool,
    /// `tau sqrt(t log2 t) <= d^m <= d tau sqrt(t log2 t)`
    pub dm_window: bool,
    /// `k <= (2/tau) sqrt(t / log2 t)`
    pub k_upper: bool,
    /// The `tau` condition at `k_max = floor((2/tau) sqrt(t / log2 t))`.
    pub cond_tau: bool,
    pub k_at_least_2: bool,
    pub m_at_least_1: bool,
    /// `b^{d^m} >= 4 (k+1) k^{k/2} ||u||^{(k+1)(log_d(2k+1)+1)}`
    pub smallness_assump: bool,
    /// `k d^m log2 b - 1 >= m^2 (log2 ||u||)^2 / 3`
    pub prop_assump: bool,
}

impl ParameterFlags {
    pub fn all(&self) -> bool {
        self.t_log_t
            && self.n_window
            && self.dm_window
            && self.k_upper
            && self.cond_tau
            && self.k_at_least_2
            && self.m_at_least_1
            && self.smallness_assump
            && self.prop_assump
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ParameterChoice {
    #[serde(serialize_with = "ser_int")]
    pub q: BigInt,
    #[serde(serialize_with = "crate::report::ser_rat")]
    pub tau: BigRational,
    /// `log2 x`, where `q = x 2^{-(3/2) C sqrt(log2 x log2 log2 x)} / 12`.
    #[serde(serialize_with = "ser_interval")]
    pub log2_x: Interval,
    /// `t = log_b x`
    #[serde(serialize_with = "ser_interval")]
    pub t: Interval,
    pub k: u64,
    pub m: u32,
    #[serde(serialize_with = "ser_int")]
    pub n: BigInt,
    /// `(k, m)` reproduced with the bisection tolerance squared.
    pub stable: bool,
    pub flags: ParameterFlags,
    /// `x < 12 q 2^{2 C sqrt(log2 q log2 log2 q)}`. Only asymptotic; it is
    /// reported but does not gate feasibility.
    pub x_upper: bool,
    #[serde(serialize_with = "ser_interval")]
    pub constant_c: Interval,
    /// Lower end of the bisection bracket, where `psi` is certified increasing.
    #[serde(serialize_with = "ser_interval")]
    pub monotone_from: Interval,
}

/// `psi(L) = L - (3/2) C sqrt(L log2 L) - log2 12`, so that `log2 q = psi(log2 x)`.
fn psi(l: &Interval, c: &Interval, prec: u32) -> Interval {
    let three_halves = rat_iv(BigRational::new(3.into(), 2.into()));
    let root = (l * &l.log2(prec)).sqrt(prec);
    (&(l - &(&(&three_halves * c) * &root)) - &int_iv(12).log2(prec)).round_out(prec + 32)
}

/// `psi'(L) = 1 - (3/4) C (log2 L + 1/ln 2) / sqrt(L log2 L)`.
fn psi_prime(l: &Interval, c: &Interval, prec: u32) -> Interval {
    let lg = l.log2(prec);
    let num = &(&rat_iv(BigRational::new(3.into(), 4.into())) * c) * &(&lg + &crate::interval::ln2(prec).recip());
    &int_iv(1) - &(&num / &(l * &lg).sqrt(prec))
}

/// Smallest power of two `L >= 4` from which `psi` is certified increasing.
/// `psi'` itself increases for `L >= 4`, so positivity at one point suffices.
fn monotone_threshold(c: &Interval, prec: u32) -> Interval {
    let mut l = BigInt::from(4);
    while psi_prime(&int_iv(l.clone()), c, prec).certify_lt(&int_iv(0)) != Some(false)
        || psi_prime(&int_iv(l.clone()), c, prec).lo() <= &BigRational::zero()
    {
        l *= 2;
    }
    int_iv(l)
}

/// Bisection for `log2 x` to relative width `2^-rel_bits`.
fn solve_log2_x(log2_q: &Interval, c: &Interval, rel_bits: i64, prec: u32) -> Result<(Interval, Interval)> {
    let start = monotone_threshold(c, prec);
    let mut lo = start.lo().clone();
    if psi(&rat_iv(lo.clone()), c, prec).certify_lt(log2_q) != Some(true) {
        return Err(Error::QTooSmall(format!(
            "log2 q must exceed psi({}) where the recipe becomes monotone",
            lo
        )));
    }
    let mut hi = &lo * BigRational::from_integer(2.into());
    while psi(&rat_iv(hi.clone()), c, prec).certify_lt(log2_q) != Some(false) {
        hi = &hi * BigRational::from_integer(2.into());
    }
    let tol = pow2(-rel_bits);
    let mut p = prec;
    while (&hi - &lo) > &lo * &tol {
        let mid = (&lo + &hi) / BigRational::from_integer(2.into());
        match psi(&rat_iv(mid.clone()), c, p).certify_lt(log2_q) {
            Some(true) => lo = mid,
            Some(false) => hi = mid,
            None if p < 4096 => p *= 2,
            None => break,
        }
    }
    Ok((Interval::new(lo, hi), start))
}

fn ceil_div(a: &BigRational, b: &BigInt) -> BigInt {
    let x = a / BigRational::from_integer(b.clone());
    x.ceil().to_integer()
}

fn pick_km(
    spec: &MahlerSpec,
    b: &BigInt,
    q: &BigInt,
    tau: &BigRational,
    c: &Interval,
    rel_bits: i64,
    prec: u32,
) -> Result<ParameterChoice> {
    let log2_q = int_iv(q.clone()).log2(prec);
    let (log2_x, start) = solve_log2_x(&log2_q, c, rel_bits, prec)?;
    let t = (&log2_x / &int_iv(b.clone()).log2(prec)).round_out(prec);
    if t.lo() <= &BigRational::from_integer(2.into()) {
        return Err(Error::QTooSmall("t = log_b x must exceed 2".into()));
    }
    let d = spec.d();
    let tau_iv = rat_iv(tau.clone());
    let dtau = &int_iv(d) * &tau_iv;
    let log_t = t.log2(prec);
    let t_log_t = (&(&dtau * &dtau) * &log_t).certify_le(&t) == Some(true);
    let w = (&tau_iv * &(&t * &log_t).sqrt(prec)).round_out(prec);

    // least m with d^m >= tau sqrt(t log2 t)
    let mut m = 0u32;
    let mut dm = BigInt::one();
    while BigRational::from_integer(dm.clone()) < *w.hi() {
        dm *= d;
        m += 1;
    }
    let dm_window = BigRational::from_integer(&dm / BigInt::from(d)) < *w.lo()
        && int_iv(dm.clone()).certify_le(&(&int_iv(d) * &w)) == Some(true);
    let k = ceil_div(t.hi(), &dm);
    let n = &k * &dm;
    let n_iv = int_iv(n.clone());
    let n_window = t.certify_le(&n_iv) == Some(true)
        && n_iv.certify_le(&(&t + &(&int_iv(d) * &w))) == Some(true);
    let k_bound = (&(&rat_iv(BigRational::new(2.into(), 1.into())) / &tau_iv) * &(&t / &log_t).sqrt(prec)).round_out(prec);
    let k_upper = int_iv(k.clone()).certify_le(&k_bound) == Some(true);
    let k_max = k_bound.hi().floor().to_integer().max(BigInt::one());
    let cond_tau = cond_tau_lhs(spec, &k_max, prec).certify_lt(&w) == Some(true);
    let k_u64: u64 = k.clone().try_into().map_err(|_| Error::NoFeasiblePair(format!("k = {k} too large")))?;
    let dm_usize: usize = dm
        .clone()
        .try_into()
        .map_err(|_| Error::NoFeasiblePair(format!("d^m = {dm} too large")))?;
    let smallness_assump = smallness_flag(spec, b, k_u64, dm_usize, prec);
    let prop_assump = prop_flag(spec, b, k_u64, m, dm_usize, prec);
    let x_upper = {
        let rhs = &(&int_iv(12).log2(prec) + &log2_q) + &(&(&int_iv(2) * c) * &root_loglog(q, prec));
        log2_x.certify_lt(&rhs) == Some(true)
    };
    Ok(ParameterChoice {
        q: q.clone(),
        tau: tau.clone(),
        log2_x,
        t,
        k: k_u64,
        m,
        n,
        stable: false,
        flags: ParameterFlags {
            t_log_t,
            n_window,
            dm_window,
            k_upper,
            cond_tau,
            k_at_least_2: k_u64 >= 2,
            m_at_least_1: m >= 1,
            smallness_assump,
            prop_assump,
        },
        x_upper,
        constant_c: c.clone(),
        monotone_from: start,
    })
}

fn smallness_flag(spec: &MahlerSpec, b: &BigInt, k: u64, dm: usize, prec: u32) -> bool {
    // d^m log2 b >= 2 + log2(k+1) + (k/2) log2 k + (k+1)(log_d(2k+1)+1) log2 ||u||
    if spec.u_norm() <= 1 {
        let k1 = BigInt::from(k + 1);
        let lhs = num_traits::pow(b.clone(), 2 * dm);
        return lhs >= BigInt::from(16) * &k1 * &k1 * num_traits::pow(BigInt::from(k), k as usize);
    }
    let lhs = &int_iv(dm as u64) * &int_iv(b.clone()).log2(prec);
    cond_tau_lhs(spec, &BigInt::from(k), prec).certify_le(&lhs) == Some(true)
}

fn prop_flag(spec: &MahlerSpec, b: &BigInt, k: u64, m: u32, dm: usize, prec: u32) -> bool {
    let lhs = &(&int_iv(k * dm as u64) * &int_iv(b.clone()).log2(prec)) - &int_iv(1);
    let lu = if spec.u_norm() <= 1 { int_iv(0) } else { int_iv(spec.u_norm()).log2(prec) };
    let rhs = &(&rat_iv(BigRational::new((m as u64 * m as u64).into(), 3.into())) * &lu) * &lu;
    rhs.certify_le(&lhs) == Some(true)
}

/// Bisection tolerance, as a power of two, for `log2 x`.
pub const BISECTION_BITS: i64 = 32;

/// Turns a denominator `q` into `(x, t, k, m)` following the recipe, with every
/// feasibility condition recorded. `tau = None` walks the default grid and
/// keeps the first value for which all flags hold.
pub fn choose_parameters(spec: &MahlerSpec, b: &BigInt, q: &BigInt, tau: Option<&BigRational>) -> Result<ParameterChoice> {
    let prec = DEFAULT_PREC;
    if b < &BigInt::from(2) {
        return Err(Error::Precondition(format!("b must be at least 2, got {b}")));
    }
    if q < &BigInt::from(4) {
        return Err(Error::QTooSmall(format!("q = {q}")));
    }
    let c = constant_c(spec, prec)?;
    let run = |tau: &BigRational| -> Result<ParameterChoice> {
        if tau <= &BigRational::one() {
            return Err(Error::TauTooSmall(crate::report::rational_string(tau)));
        }
        let mut choice = pick_km(spec, b, q, tau, &c, BISECTION_BITS, prec)?;
        let fine = pick_km(spec, b, q, tau, &c, 2 * BISECTION_BITS, prec)?;
        choice.stable = (fine.k, fine.m) == (choice.k, choice.m) && fine.log2_x.is_subset_of(&choice.log2_x);
        Ok(choice)
    };
    if let Some(t) = tau {
        let choice = run(t)?;
        if !choice.flags.t_log_t {
            return Err(Error::QTooSmall(format!("(d tau)^2 log2 t <= t fails for tau = {t}")));
        }
        if !(choice.flags.n_window && choice.flags.dm_window) {
            return Err(Error::NoFeasiblePair(format!(
                "windows empty at t in [{}, {}], d^m = {}",
                choice.t.lo(),
                choice.t.hi(),
                BigInt::from(spec.d()).pow(choice.m)
            )));
        }
        return Ok(choice);
    }
    let mut last = None;
    for t in tau_grid() {
        let choice = run(&t)?;
        if !choice.flags.t_log_t {
            // Larger tau only makes this harder.
            break;
        }
        if choice.flags.all() {
            return Ok(choice);
        }
        last = Some(choice);
    }
    match last {
        Some(c) => Err(Error::NoFeasiblePair(format!(
            "no grid tau satisfies every flag; last tried tau = {} with k = {}, m = {}: {:?}",
            crate::report::rational_string(&c.tau),
            c.k,
            c.m,
            c.flags
        ))),
        None => Err(Error::QTooSmall(format!("(d tau)^2 log2 t <= t fails already at tau = 4 for q = {q}"))),
    }
}

/// `q_n^2 |g - p_n/q_n| <= 1`.
pub fn classical_sanity(row: &AuditRow) -> bool {
    let q2 = int_iv(&row.q_n * &row.q_n);
    (&q2 * &row.err).certify_le(&int_iv(1)) == Some(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enclosure::evaluate_g;
    use crate::interval::rat;

    fn tm() -> MahlerSpec {
        MahlerSpec::thue_morse()
    }

    #[test]
    fn rational_target_terminates() {
        let s = MahlerSpec::new(2, vec![0]).unwrap();
        let cf = real_continued_fraction(&s, &BigInt::from(5), &BigInt::from(100), Budget::default()).unwrap();
        assert!(cf.terminated);
        assert_eq!(cf.quotients, vec![BigInt::from(0), BigInt::from(5)]);
        let audit = measure_audit(&s, &BigInt::from(5), &AuditParams::new(BigInt::from(100)), Budget::default());
        assert!(audit.is_err());
    }

    #[test]
    fn widened_enclosure_gives_prefix() {
        let g = evaluate_g(&tm(), &BigInt::from(2), &pow2(-200)).unwrap();
        let (fine, _) = certified_quotients(&g.value);
        let wide = Interval::new(g.lo() - pow2(-40), g.hi() + pow2(-40));
        let (coarse, _) = certified_quotients(&wide);
        assert!(coarse.len() < fine.len());
        assert!(fine.starts_with(&coarse));
    }

    #[test]
    fn thue_morse_real_cf_prefix() {
        let cf = real_continued_fraction(&tm(), &BigInt::from(2), &BigInt::from(1_000_000), Budget::default()).unwrap();
        // 0.17509193272... = [0; 5, 1, 2, ...]
        assert_eq!(&cf.quotients[..3], &[BigInt::from(0), BigInt::from(5), BigInt::from(1)]);
        assert!(cf.convergents.last().unwrap().1 > BigInt::from(1_000_000));
    }

    #[test]
    fn gamma_thue_morse() {
        let g2 = gamma_over_ln2(&tm(), &BigInt::from(2), &rat(8, 1), DEFAULT_PREC).unwrap();
        // 32 + 16 + 2 (2 + 2 sqrt 2)
        let c = 4.0 + 4.0 * 2f64.sqrt();
        assert!(g2.lo() < &rat(((48.0 + c) * 1e6) as i64 + 1, 1_000_000));
        assert!(g2.hi() > &rat(((48.0 + c) * 1e6) as i64 - 1, 1_000_000));
        assert!(matches!(gamma_constant(&tm(), &BigInt::from(2), &rat(1, 1), 64), Err(Error::TauTooSmall(_))));
        let g3 = gamma_over_ln2(&tm(), &BigInt::from(3), &rat(8, 1), DEFAULT_PREC).unwrap();
        assert!(g3.lo() > g2.hi());
        let g16 = gamma_over_ln2(&tm(), &BigInt::from(2), &rat(16, 1), DEFAULT_PREC).unwrap();
        assert!(g16.lo() > g2.hi());
    }

    #[test]
    fn far_pair_passes() {
        let g = evaluate_g(&tm(), &BigInt::from(2), &pow2(-100)).unwrap();
        let v = theorem_lower_bound_check(&tm(), &BigInt::from(2), &BigInt::zero(), &BigInt::from(7), &rat(4, 1), &g, DEFAULT_PREC).unwrap();
        assert_eq!(v, Verdict::Pass);
    }

    #[test]
    fn small_audit() {
        let a = measure_audit(&tm(), &BigInt::from(2), &AuditParams::new(BigInt::from(1_000_000)), Budget::default()).unwrap();
        assert!(a.summary.rows > 3);
        assert!(a.rows.iter().all(classical_sanity));
        assert!(a.rows.windows(2).all(|w| w[0].q_n < w[1].q_n));
        assert!(a.summary.k_empirical.is_some());
        assert_eq!(a.summary.bracket_failures, 0);
        let empty = measure_audit(&tm(), &BigInt::from(2), &AuditParams::new(BigInt::one()), Budget::default()).unwrap();
        assert_eq!(empty.rows.len(), 0);
    }

    #[test]
    fn tau_floor_thue_morse() {
        assert_eq!(tau_floor(&tm(), 64).unwrap(), rat(4, 1));
    }

    #[test]
    fn choose_parameters_thue_morse() {
        for e in [30usize, 50, 80] {
            let q = num_traits::pow(BigInt::from(10), e);
            let c = choose_parameters(&tm(), &BigInt::from(2), &q, None).unwrap();
            assert!(c.flags.all(), "{c:?}");
            assert!(c.stable);
            assert_eq!(c.n, BigInt::from(c.k) * BigInt::from(2).pow(c.m));
        }
        let small = choose_parameters(&tm(), &BigInt::from(2), &BigInt::from(1000), None);
        assert!(matches!(small, Err(Error::QTooSmall(_))));
    }
}
