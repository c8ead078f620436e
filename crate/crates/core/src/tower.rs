//! The convergent tower `p_{k,m} / q_{k,m}` obtained from one integer
//! convergent through `g(z) = g(z^d) / P*(z)`:
//!
//! ```text
//! q_{k,m}(z) = q~_k(z^{d^m})
//! p_{k,m}(z) = prod_{t<m} P*(z^{d^t}) * p~_k(z^{d^m})
//! q_{k,m} g - p_{k,m} = prod_{t<m} P*(z^{d^t}) * sum_{i>k} alpha_{k,i} z^{-d^m i}
//! ```
//!
//! Values at an integer `b >= 2` feed the smallness, sandwich and envelope
//! inequalities. Each inequality is decided only under its hypotheses, from a
//! certified enclosure of `g(b)`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::enclosure::Enclosure;
use crate::error::{Error, Result};
use crate::hankel::{log_base, residual_coefficient, IntegerConvergent};
use crate::interval::Interval;
use crate::poly::IntPoly;
use crate::report::{ser_int, ser_interval, ser_opt_interval};
use crate::series::{ceil_log, star_polynomial, MahlerSpec, SeriesPrefix};

pub const DEFAULT_MAX_DEGREE: usize = 1 << 20;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TowerElement {
    pub k: usize,
    pub m: u32,
    pub base: IntegerConvergent,
    pub q_poly: IntPoly,
    pub p_poly: IntPoly,
    pub b: Option<BigInt>,
    pub p_val: Option<BigInt>,
    pub q_val: Option<BigInt>,
}

impl TowerElement {
    pub fn q(&self) -> &BigInt {
        self.q_val.as_ref().expect("tower_values not applied")
    }

    pub fn p(&self) -> &BigInt {
        self.p_val.as_ref().expect("tower_values not applied")
    }
}

fn d_pow(spec: &MahlerSpec, m: u32) -> Result<usize> {
    (spec.d() as usize).checked_pow(m).ok_or(Error::BudgetExceeded {
        what: "d^m",
        requested: u128::MAX,
        limit: usize::MAX as u128,
    })
}

/// `prod_{t<m} P*(z^{d^t})`, of degree `d^m - 1`.
pub fn star_product(spec: &MahlerSpec, m: u32) -> IntPoly {
    let star = star_polynomial(spec);
    let mut acc = IntPoly::constant(BigInt::one());
    let mut e = 1usize;
    for _ in 0..m {
        acc = &acc * &star.substitute_power(e);
        e *= spec.d() as usize;
    }
    acc
}

/// Substituted polynomials for level `m`. Fails when `k d^m` exceeds `max_degree`.
pub fn tower_polynomials(
    spec: &MahlerSpec,
    conv: &IntegerConvergent,
    m: u32,
    max_degree: usize,
) -> Result<TowerElement> {
    let dm = d_pow(spec, m)?;
    let degree = (conv.k as u128) * dm as u128;
    if degree > max_degree as u128 {
        return Err(Error::BudgetExceeded {
            what: "tower degree k*d^m",
            requested: degree,
            limit: max_degree as u128,
        });
    }
    let q_poly = conv.q_tilde.substitute_power(dm);
    let p_poly = if conv.p_tilde.is_zero() {
        IntPoly::zero()
    } else {
        &star_product(spec, m) * &conv.p_tilde.substitute_power(dm)
    };
    Ok(TowerElement {
        k: conv.k,
        m,
        base: conv.clone(),
        q_poly,
        p_poly,
        b: None,
        p_val: None,
        q_val: None,
    })
}

/// `(p_{k,m}(b), q_{k,m}(b))` by Horner in `B = b^{d^m}` without expanding
/// the substituted polynomials.
pub fn tower_integers(spec: &MahlerSpec, conv: &IntegerConvergent, m: u32, b: &BigInt) -> (BigInt, BigInt) {
    let star = star_polynomial(spec);
    let mut x = b.clone();
    let mut prod = BigInt::one();
    for _ in 0..m {
        prod *= star.eval(&x);
        x = num_traits::pow(x, spec.d() as usize);
    }
    let q = conv.q_tilde.eval(&x);
    let p = prod * conv.p_tilde.eval(&x);
    (p, q)
}

pub fn tower_values(spec: &MahlerSpec, element: &TowerElement, b: &BigInt) -> Result<TowerElement> {
    if b < &BigInt::from(2) {
        return Err(Error::Precondition(format!("b must be at least 2, got {b}")));
    }
    let (p, q) = tower_integers(spec, &element.base, element.m, b);
    Ok(TowerElement {
        b: Some(b.clone()),
        p_val: Some(p),
        q_val: Some(q),
        ..element.clone()
    })
}

/// Formal check of the tower identity to order `z^-N`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ResidualCheck {
    pub k: usize,
    pub m: u32,
    pub order: usize,
    pub identity_holds: bool,
    /// Exponent of the first coefficient (from the top) where the two sides differ.
    pub first_mismatch: Option<i64>,
    /// Highest exponent with a nonzero coefficient in `q_{k,m} g - p_{k,m}`.
    pub valuation: Option<i64>,
    pub expected_valuation: i64,
    /// `||g - p_{k,m}/q_{k,m}|| < -2 deg q_{k,m}`.
    pub legendre: bool,
}

impl ResidualCheck {
    pub fn passed(&self) -> bool {
        self.identity_holds && self.legendre && self.valuation == Some(self.expected_valuation)
    }
}

/// Compares `q_{k,m} g - p_{k,m}` with `prod P*(z^{d^t}) * sum alpha_{k,i} z^{-d^m i}`
/// coefficient by coefficient, from the top power down to `z^-N`.
pub fn residual_series_check(
    spec: &MahlerSpec,
    prefix: &SeriesPrefix,
    element: &TowerElement,
    order: usize,
) -> Result<ResidualCheck> {
    let k = element.k;
    let dm = d_pow(spec, element.m)?;
    if order <= dm * (k + 1) {
        return Err(Error::Precondition(format!(
            "order {order} must exceed d^m (k+1) = {}",
            dm * (k + 1)
        )));
    }
    let deg_q = element.q_poly.degree().unwrap_or(0);
    prefix.require(order + deg_q)?;
    let top = element.p_poly.degree().unwrap_or(0).max(deg_q);
    let width = top + order + 1;
    let idx = |e: i64| (top as i64 - e) as usize;

    // Left side, sparse in q.
    let q_terms: Vec<(usize, &BigInt)> = element
        .q_poly
        .coeffs()
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.is_zero())
        .collect();
    let mut lhs = vec![BigInt::zero(); width];
    for e in -(order as i64)..=top as i64 {
        let mut acc = BigInt::zero();
        for &(j, a) in &q_terms {
            let n = j as i64 - e;
            if n >= 1 {
                acc += a * prefix.get(n as usize);
            }
        }
        if e >= 0 {
            acc -= element.p_poly.coeff(e as usize);
        }
        lhs[idx(e)] = acc;
    }

    // Right side: dense star product times the sparse alpha series.
    let star = star_product(spec, element.m);
    let i_max = (order + dm) / dm + 1;
    prefix.require(k + i_max)?;
    let mut rhs = vec![BigInt::zero(); width];
    for i in k + 1..=i_max {
        let alpha = residual_coefficient(prefix, &element.base.q_tilde, i);
        if alpha.is_zero() {
            continue;
        }
        for (j, s) in star.coeffs().iter().enumerate() {
            let e = j as i64 - (dm * i) as i64;
            if e < -(order as i64) || e > top as i64 || s.is_zero() {
                continue;
            }
            rhs[idx(e)] += s * &alpha;
        }
    }

    let first_mismatch = (0..width).find(|&i| lhs[i] != rhs[i]).map(|i| top as i64 - i as i64);
    let valuation = (0..width).find(|&i| !lhs[i].is_zero()).map(|i| top as i64 - i as i64);
    let expected = -((k * dm) as i64) - 1;
    let legendre = match valuation {
        Some(v) => v - (deg_q as i64) < -2 * deg_q as i64,
        None => (order as i64) + 1 > deg_q as i64,
    };
    Ok(ResidualCheck {
        k,
        m: element.m,
        order,
        identity_holds: first_mismatch.is_none(),
        first_mismatch,
        valuation,
        expected_valuation: expected,
        legendre,
    })
}

/// Outcome of one inequality.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Pass,
    Fail,
    Undecidable,
    /// A hypothesis of the inequality is false.
    NotApplicable,
}

impl Outcome {
    fn from_certificate(c: Option<bool>) -> Self {
        match c {
            Some(true) => Outcome::Pass,
            Some(false) => Outcome::Fail,
            None => Outcome::Undecidable,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct InequalityCheck {
    pub outcome: Outcome,
    /// The bound compared against `|g(b) - p/q|`, when it was evaluated.
    #[serde(serialize_with = "ser_opt_interval")]
    pub bound: Option<Interval>,
}

impl InequalityCheck {
    fn skipped(outcome: Outcome) -> Self {
        InequalityCheck { outcome, bound: None }
    }
}

/// Hypotheses, decided exactly or with certified intervals. `None` means the
/// comparison could not be separated at the working precision.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AssumptionFlags {
    /// `b^{d^m} > 2^{1 + log_d ||u||}`
    pub a1_bdm_geq_2: Option<bool>,
    /// `b^{d^m} >= 4 (k+1) k^{k/2} ||u||^{(k+1)(log_d(2k+1)+1)}`
    pub a2_smallness: Option<bool>,
    /// `b^{d^m} > 3 (||c_{2k+1}||^2 k)^{k/2}`
    pub a3_sandwich: bool,
    /// `k d^m log2 b - 1 >= m^2 (log2 ||u||)^2 / 3`
    pub a4_prop: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BoundReport {
    pub k: usize,
    pub m: u32,
    #[serde(serialize_with = "ser_int")]
    pub b: BigInt,
    #[serde(serialize_with = "ser_int")]
    pub p: BigInt,
    #[serde(serialize_with = "ser_int")]
    pub q: BigInt,
    pub flags: AssumptionFlags,
    /// Enclosure of `|g(b) - p/q|`.
    #[serde(serialize_with = "ser_interval")]
    pub error: Interval,
    #[serde(serialize_with = "ser_interval")]
    pub constant_c: Interval,
    pub smallness_ub: InequalityCheck,
    pub smallness_lb: InequalityCheck,
    pub sandwich: InequalityCheck,
    pub prop_l1: InequalityCheck,
    pub prop_u1: InequalityCheck,
    pub prop_envelope: InequalityCheck,
}

impl BoundReport {
    pub fn checks(&self) -> [(&'static str, &InequalityCheck); 6] {
        [
            ("smallness_ub", &self.smallness_ub),
            ("smallness_lb", &self.smallness_lb),
            ("sandwich", &self.sandwich),
            ("prop_l1", &self.prop_l1),
            ("prop_u1", &self.prop_u1),
            ("prop_envelope", &self.prop_envelope),
        ]
    }

    pub fn any_failed(&self) -> bool {
        self.checks().iter().any(|(_, c)| c.outcome == Outcome::Fail)
    }

    pub fn undecidable(&self) -> usize {
        self.checks().iter().filter(|(_, c)| c.outcome == Outcome::Undecidable).count()
    }
}

/// Retries a certified comparison at increasing precision.
fn decide(prec: u32, f: impl Fn(u32) -> Option<bool>) -> Option<bool> {
    let mut p = prec;
    for _ in 0..4 {
        if let Some(v) = f(p) {
            return Some(v);
        }
        p *= 4;
    }
    None
}

fn int_iv(n: impl Into<BigInt>) -> Interval {
    Interval::from_int(n)
}

fn log2_u(spec: &MahlerSpec, prec: u32) -> Interval {
    Interval::from_int(spec.u_norm()).log2(prec)
}

/// `||u||^x` for `||u|| >= 1`.
fn u_pow(spec: &MahlerSpec, x: &Interval, prec: u32) -> Interval {
    match spec.u_norm() {
        1 => Interval::from_int(1),
        _ => (x * &log2_u(spec, prec)).exp2(prec),
    }
}

/// `C = 2 sqrt 2 + 2 sqrt(5 log2 ||u||) + 2`.
pub fn constant_c(spec: &MahlerSpec, prec: u32) -> Result<Interval> {
    if spec.u_norm() == 0 {
        return Err(Error::Precondition("C needs ||u|| >= 1".into()));
    }
    let two = Interval::from_int(2);
    let s2 = two.sqrt(prec);
    let mid = (&Interval::from_int(5) * &log2_u(spec, prec)).sqrt(prec);
    Ok(&(&(&two * &s2) + &(&two * &mid)) + &two)
}

fn flag_a1(spec: &MahlerSpec, b: &BigInt, dm: usize, prec: u32) -> Option<bool> {
    match spec.u_norm() {
        0 => Some(true),
        1 => Some(num_traits::pow(b.clone(), dm) > BigInt::from(2)),
        u => decide(prec, |p| {
            let lhs = &int_iv(dm as u64) * &int_iv(b.clone()).log2(p);
            let rhs = &int_iv(1) + &log_base(spec.d(), &int_iv(u), p);
            rhs.certify_lt(&lhs)
        }),
    }
}

fn flag_a2(spec: &MahlerSpec, b: &BigInt, k: usize, dm: usize, prec: u32) -> Option<bool> {
    let kk = BigInt::from(k);
    let k1 = BigInt::from(k + 1);
    match spec.u_norm() {
        0 => None,
        1 => {
            // b^{2 d^m} >= 16 (k+1)^2 k^k
            let lhs = num_traits::pow(b.clone(), 2 * dm);
            Some(lhs >= BigInt::from(16) * &k1 * &k1 * num_traits::pow(kk, k))
        }
        _ => decide(prec, |p| {
            let lhs = &int_iv(dm as u64) * &int_iv(b.clone()).log2(p);
            let ld = &log_base(spec.d(), &int_iv(2 * k as u64 + 1), p) + &int_iv(1);
            let half_k = Interval::exact(BigRational::new(kk.clone(), 2.into()));
            let log_k = if k <= 1 { int_iv(0) } else { int_iv(kk.clone()).log2(p) };
            let rhs = &(&(&int_iv(2) + &int_iv(k1.clone()).log2(p)) + &(&half_k * &log_k))
                + &(&(&int_iv(k1.clone()) * &ld) * &log2_u(spec, p));
            rhs.certify_le(&lhs)
        }),
    }
}

fn flag_a3(prefix: &SeriesPrefix, b: &BigInt, k: usize, dm: usize) -> bool {
    // b^{2 d^m} > 9 (||c_{2k+1}||^2 k)^k
    let c = prefix.sup_norm(2 * k + 1);
    num_traits::pow(b.clone(), 2 * dm) > BigInt::from(9) * num_traits::pow(&c * &c * BigInt::from(k), k)
}

fn flag_a4(spec: &MahlerSpec, b: &BigInt, k: usize, m: u32, dm: usize, prec: u32) -> Option<bool> {
    decide(prec, |p| {
        let lhs = &(&int_iv((k * dm) as u64) * &int_iv(b.clone()).log2(p)) - &int_iv(1);
        let lu = if spec.u_norm() <= 1 { int_iv(0) } else { log2_u(spec, p) };
        let rhs = &(&Interval::exact(BigRational::new((m as u64 * m as u64).into(), 3.into())) * &lu) * &lu;
        rhs.certify_le(&lhs)
    })
}

/// `1/2 |a_kk| b^{k d^m} <= |q_{k,m}| <= 3/2 |a_kk| b^{k d^m}`, exactly.
/// Not applicable unless `b^{d^m} > 3 (||c_{2k+1}||^2 k)^{k/2}`.
pub fn sandwich_check(
    spec: &MahlerSpec,
    prefix: &SeriesPrefix,
    element: &TowerElement,
) -> Result<InequalityCheck> {
    let b = element.b.as_ref().ok_or_else(|| Error::Precondition("tower values missing".into()))?;
    let dm = d_pow(spec, element.m)?;
    if !flag_a3(prefix, b, element.k, dm) {
        return Ok(InequalityCheck::skipped(Outcome::NotApplicable));
    }
    Ok(sandwich_unchecked(element, b, dm))
}

fn sandwich_unchecked(element: &TowerElement, b: &BigInt, dm: usize) -> InequalityCheck {
    let lead = element.base.leading_q().abs() * num_traits::pow(b.clone(), element.k * dm);
    let q2 = element.q().abs() * BigInt::from(2);
    let ok = lead <= q2 && q2 <= BigInt::from(3) * &lead;
    let half = BigRational::new(lead.clone(), 2.into());
    let three_half = BigRational::new(lead * BigInt::from(3), 2.into());
    InequalityCheck {
        outcome: if ok { Outcome::Pass } else { Outcome::Fail },
        bound: Some(Interval::new(half, three_half)),
    }
}

/// `|g(b) - p/q|` from an enclosure of `g(b)`.
pub fn error_enclosure(g: &Enclosure, p: &BigInt, q: &BigInt) -> Interval {
    let r = Interval::exact(BigRational::new(p.clone(), q.clone()));
    (&g.value - &r).abs()
}

/// Evaluates every inequality whose hypotheses hold.
pub fn diophantine_bounds(
    spec: &MahlerSpec,
    prefix: &SeriesPrefix,
    element: &TowerElement,
    g: &Enclosure,
    prec: u32,
) -> Result<BoundReport> {
    let b = element
        .b
        .clone()
        .ok_or_else(|| Error::Precondition("tower values missing".into()))?;
    if spec.u_norm() == 0 {
        return Err(Error::Precondition("bounds need ||u|| >= 1".into()));
    }
    let (k, m) = (element.k, element.m);
    let dm = d_pow(spec, m)?;
    let q = element.q().clone();
    let p = element.p().clone();
    if q.is_zero() {
        return Err(Error::Precondition("q_{k,m} = 0".into()));
    }
    let q_abs = q.abs();
    let err = error_enclosure(g, &p, &q);
    let c = constant_c(spec, prec)?;

    let flags = AssumptionFlags {
        a1_bdm_geq_2: flag_a1(spec, &b, dm, prec),
        a2_smallness: flag_a2(spec, &b, k, dm, prec),
        a3_sandwich: flag_a3(prefix, &b, k, dm),
        a4_prop: flag_a4(spec, &b, k, m, dm, prec),
    };
    let gate = |fs: &[Option<bool>]| -> Option<Outcome> {
        if fs.contains(&Some(false)) {
            Some(Outcome::NotApplicable)
        } else if fs.iter().any(|f| f.is_none()) {
            Some(Outcome::Undecidable)
        } else {
            None
        }
    };
    let prop_shape = if k >= 2 && m >= 1 { Some(true) } else { Some(false) };

    let kk = BigInt::from(k);
    let k1_iv = int_iv(k + 1);
    let dm_iv = int_iv(dm as u64);
    let b_iv = int_iv(b.clone());
    let q_iv = int_iv(q_abs.clone());
    let bk = int_iv(num_traits::pow(b.clone(), dm * k + 1));
    let g_abs = g.value.abs();
    let ld = |p: u32| &log_base(spec.d(), &int_iv(2 * k as u64 + 1), p) + &int_iv(1);

    // Upper bound: err <= RHS certified.
    let upper = |rhs: Interval| InequalityCheck {
        outcome: Outcome::from_certificate(err.certify_le(&rhs)),
        bound: Some(rhs),
    };
    let lower = |lhs: Interval| InequalityCheck {
        outcome: Outcome::from_certificate(lhs.certify_le(&err)),
        bound: Some(lhs),
    };

    let smallness_ub = match gate(&[flags.a1_bdm_geq_2]) {
        Some(o) => InequalityCheck::skipped(o),
        None => {
            let sqrt_kk = int_iv(num_traits::pow(kk.clone(), k)).sqrt(prec);
            let ue = &int_iv(m) + &(&k1_iv * &ld(prec));
            let num = &(&(&(&int_iv(2) * &k1_iv) * &sqrt_kk) * &dm_iv) * &u_pow(spec, &ue, prec);
            upper(&num / &(&q_iv * &bk))
        }
    };
    let smallness_lb = match gate(&[flags.a1_bdm_geq_2, flags.a2_smallness]) {
        Some(o) => InequalityCheck::skipped(o),
        None => lower(&g_abs / &(&(&int_iv(4) * &q_iv) * &bk)),
    };
    let sandwich = if flags.a3_sandwich {
        sandwich_unchecked(element, &b, dm)
    } else {
        InequalityCheck::skipped(Outcome::NotApplicable)
    };
    let q2 = &q_iv * &q_iv;
    let prop_l1 = match gate(&[flags.a2_smallness, prop_shape]) {
        Some(o) => InequalityCheck::skipped(o),
        None => {
            let kpow = int_iv(num_traits::pow(kk.clone(), k));
            let ue = &int_iv(m) + &(&int_iv(2 * k as u64 + 1) * &ld(prec));
            let num = &(&(&(&int_iv(3) * &k1_iv) * &kpow) * &dm_iv) * &u_pow(spec, &ue, prec);
            upper(&num / &(&b_iv * &q2))
        }
    };
    let prop_u1 = match gate(&[flags.a2_smallness, prop_shape]) {
        Some(o) => InequalityCheck::skipped(o),
        None => lower(&g_abs / &(&(&int_iv(8) * &b_iv) * &q2)),
    };
    let prop_envelope = match gate(&[flags.a2_smallness, flags.a4_prop, prop_shape]) {
        Some(o) => InequalityCheck::skipped(o),
        None => upper(envelope(&c, &q_abs, prec)),
    };

    Ok(BoundReport {
        k,
        m,
        b,
        p,
        q,
        flags,
        error: err,
        constant_c: c,
        smallness_ub,
        smallness_lb,
        sandwich,
        prop_l1,
        prop_u1,
        prop_envelope,
    })
}

/// `3 * 2^{C sqrt(log2 q log2 log2 q)} / q^2` for `q >= 2`.
pub fn envelope(c: &Interval, q: &BigInt, prec: u32) -> Interval {
    let lq = int_iv(q.clone()).log2(prec);
    let llq = lq.log2(prec);
    let root = (&lq * &llq).max(&int_iv(0)).sqrt(prec);
    let q_iv = int_iv(q.clone());
    &(&int_iv(3) * &(c * &root).exp2(prec)) / &(&q_iv * &q_iv)
}

/// `q g(b) - p` against `prod P*(b^{d^t}) * sum alpha_{k,i} b^{-d^m i}`, the
/// latter summed to `i = terms` with a certified tail.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IdentityCheck {
    #[serde(serialize_with = "ser_interval")]
    pub lhs: Interval,
    #[serde(serialize_with = "ser_interval")]
    pub rhs: Interval,
    pub consistent: bool,
}

fn ceil_sqrt(x: &BigInt) -> BigInt {
    let r = x.sqrt();
    if &(&r * &r) == x {
        r
    } else {
        r + 1
    }
}

pub fn identity_enclosure_check(
    spec: &MahlerSpec,
    prefix: &SeriesPrefix,
    element: &TowerElement,
    g: &Enclosure,
    terms: usize,
) -> Result<IdentityCheck> {
    let b = element
        .b
        .clone()
        .ok_or_else(|| Error::Precondition("tower values missing".into()))?;
    let k = element.k;
    let dm = d_pow(spec, element.m)?;
    if terms <= k {
        return Err(Error::Precondition("terms must exceed k".into()));
    }
    prefix.require(k + terms)?;
    let big_b = num_traits::pow(b.clone(), dm);
    let bb = BigRational::from_integer(big_b.clone());
    let star = star_polynomial(spec);
    let mut x = b.clone();
    let mut prod = BigInt::one();
    for _ in 0..element.m {
        prod *= star.eval(&x);
        x = num_traits::pow(x, spec.d() as usize);
    }
    // Exact partial sum by Horner in 1/B.
    let mut num = BigInt::zero();
    for i in k + 1..=terms {
        num = num * &big_b + residual_coefficient(prefix, &element.base.q_tilde, i);
    }
    let partial = BigRational::new(num, num_traits::pow(big_b.clone(), terms));

    // |alpha_{k,i}| <= (k+1) ||u|| (k+i)^s * H with H >= (||c_{2k+1}||^2 k)^{k/2}.
    let u = spec.u_norm().max(1);
    let s = if u <= 1 { 0 } else { ceil_log(spec.d() as u64, u) as usize };
    let cm = prefix.sup_norm(2 * k + 1);
    let h = ceil_sqrt(&num_traits::pow(&cm * &cm * BigInt::from(k), k));
    let a = BigRational::from_integer(BigInt::from(k + 1) * BigInt::from(u) * h);
    let n1 = BigRational::from_integer(BigInt::from(k + terms + 1));
    let n2 = BigRational::from_integer(BigInt::from(k + terms + 2));
    let rho = num_traits::pow(&n2 / &n1, s) / &bb;
    if rho >= BigRational::one() {
        return Err(Error::Precondition("alpha tail majorant does not converge; raise terms".into()));
    }
    let tail = &a * num_traits::pow(n1, s) / num_traits::pow(bb, terms + 1) / (BigRational::one() - rho);
    let sum = Interval::new(&partial - &tail, &partial + &tail);
    let rhs = &Interval::from_int(prod) * &sum;
    let lhs = &(&Interval::from_int(element.q().clone()) * &g.value) - &Interval::from_int(element.p().clone());
    Ok(IdentityCheck {
        consistent: lhs.intersect(&rhs).is_some(),
        lhs,
        rhs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enclosure::evaluate_g;
    use crate::hankel::integer_convergent;
    use crate::interval::DEFAULT_PREC;
    use crate::series::prefix;

    fn ip(c: &[i64]) -> IntPoly {
        IntPoly::new(c.iter().map(|&x| BigInt::from(x)).collect())
    }

    fn tm_conv(k: usize, n: usize) -> (MahlerSpec, SeriesPrefix, IntegerConvergent) {
        let s = MahlerSpec::thue_morse();
        let p = prefix(&s, n).unwrap();
        let c = integer_convergent(&p, k).unwrap();
        (s, p, c)
    }

    fn pow10(e: usize) -> BigRational {
        BigRational::new(BigInt::one(), num_traits::pow(BigInt::from(10), e))
    }

    #[test]
    fn small_tower_polynomials() {
        let (s, _, c) = tm_conv(1, 20);
        let e0 = tower_polynomials(&s, &c, 0, 100).unwrap();
        assert_eq!((e0.q_poly.clone(), e0.p_poly.clone()), (c.q_tilde.clone(), c.p_tilde.clone()));
        let e1 = tower_polynomials(&s, &c, 1, 100).unwrap();
        assert_eq!(e1.q_poly, ip(&[1, 0, 1]));
        assert_eq!(e1.p_poly, ip(&[-1, 1]));
        let e2 = tower_polynomials(&s, &c, 2, 100).unwrap();
        assert_eq!(e2.q_poly, ip(&[1, 0, 0, 0, 1]));
        assert_eq!(e2.p_poly, &ip(&[-1, 1]) * &ip(&[-1, 0, 1]));
        assert!(matches!(tower_polynomials(&s, &c, 8, 100), Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn small_tower_values() {
        let (s, _, c) = tm_conv(1, 20);
        let two = BigInt::from(2);
        let e1 = tower_values(&s, &tower_polynomials(&s, &c, 1, 100).unwrap(), &two).unwrap();
        assert_eq!((e1.p().clone(), e1.q().clone()), (BigInt::from(1), BigInt::from(5)));
        let e0 = tower_values(&s, &tower_polynomials(&s, &c, 0, 100).unwrap(), &two).unwrap();
        assert_eq!((e0.p().clone(), e0.q().clone()), (BigInt::from(1), BigInt::from(3)));
        for m in 0..4 {
            let e = tower_values(&s, &tower_polynomials(&s, &c, m, 100).unwrap(), &two).unwrap();
            assert_eq!(e.q(), &e.q_poly.eval(&two));
            assert_eq!(e.p(), &e.p_poly.eval(&two));
        }
    }

    #[test]
    fn residual_identity_and_negative_control() {
        let (s, p, c) = tm_conv(1, 64);
        let e = tower_polynomials(&s, &c, 1, 100).unwrap();
        let r = residual_series_check(&s, &p, &e, 16).unwrap();
        assert!(r.passed(), "{r:?}");
        assert_eq!(r.valuation, Some(-3));
        let e0 = tower_polynomials(&s, &c, 0, 100).unwrap();
        assert!(residual_series_check(&s, &p, &e0, 16).unwrap().passed());
        let mut bad = e.clone();
        bad.p_poly = &bad.p_poly + &IntPoly::constant(BigInt::one());
        assert!(!residual_series_check(&s, &p, &bad, 16).unwrap().identity_holds);
    }

    #[test]
    fn thue_morse_constant_c() {
        let c = constant_c(&MahlerSpec::thue_morse(), DEFAULT_PREC).unwrap();
        assert!(c.lo() > &crate::interval::rat(48284, 10000));
        assert!(c.hi() < &crate::interval::rat(48285, 10000));
    }

    #[test]
    fn sandwich_examples() {
        let (s, p, c) = tm_conv(1, 20);
        let e = tower_values(&s, &tower_polynomials(&s, &c, 1, 100).unwrap(), &BigInt::from(2)).unwrap();
        let r = sandwich_check(&s, &p, &e).unwrap();
        assert_eq!(r.outcome, Outcome::Pass);
        assert_eq!(r.bound.unwrap().lo(), &crate::interval::rat(2, 1));
        let big = tower_values(&s, &e, &BigInt::from(1_000_000)).unwrap();
        assert_eq!(sandwich_check(&s, &p, &big).unwrap().outcome, Outcome::Pass);
        let (s2, p2, c2) = tm_conv(2, 20);
        let e2 = tower_values(&s2, &tower_polynomials(&s2, &c2, 1, 100).unwrap(), &BigInt::from(2)).unwrap();
        let r2 = sandwich_check(&s2, &p2, &e2).unwrap();
        assert_ne!(r2.outcome, Outcome::Fail);
    }

    #[test]
    fn bounds_for_a_feasible_pair() {
        let (s, p, c) = tm_conv(2, 40);
        let b = BigInt::from(2);
        let e = tower_values(&s, &tower_polynomials(&s, &c, 3, 1000).unwrap(), &b).unwrap();
        let g = evaluate_g(&s, &b, &pow10(40)).unwrap();
        let r = diophantine_bounds(&s, &p, &e, &g, DEFAULT_PREC).unwrap();
        assert_eq!(r.flags.a2_smallness, Some(true));
        assert!(!r.any_failed(), "{r:?}");
        assert_eq!(r.undecidable(), 0);
        assert_eq!(r.smallness_lb.outcome, Outcome::Pass);
        assert_eq!(r.prop_envelope.outcome, Outcome::Pass);
        let id = identity_enclosure_check(&s, &p, &e, &g, 12).unwrap();
        assert!(id.consistent);
    }

    #[test]
    fn perturbed_numerator_fails_envelope() {
        // 1/q only beats the envelope once log2 q is a few hundred.
        let (s, p, c) = tm_conv(10, 40);
        let b = BigInt::from(2);
        let mut e = tower_values(&s, &tower_polynomials(&s, &c, 5, 1000).unwrap(), &b).unwrap();
        e.p_val = Some(e.p() + 1);
        let g = evaluate_g(&s, &b, &pow10(200)).unwrap();
        let r = diophantine_bounds(&s, &p, &e, &g, DEFAULT_PREC).unwrap();
        assert_eq!(r.prop_envelope.outcome, Outcome::Fail);
    }
}
