//! Continued fractions over `Q((z^-1))`.
//!
//! The expansion runs on the remainders `R_k = q_k g - p_k`, which satisfy
//! `R_{k+1} = a_{k+1} R_k + R_{k-1}` and `a_{k+1} = polypart(-R_{k-1} / R_k)`.
//! Only the leading `deg a_{k+1} + 1` terms of that quotient are needed, so a
//! step costs `O(N deg a)` rational operations and the known length of each
//! remainder shrinks by exactly `deg a`. A quotient is emitted only when all
//! coefficients it depends on are known.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::poly::{IntPoly, RatPoly};
use crate::report::ser_rat;
use crate::series::{prefix_with_budget, MahlerSpec, SeriesPrefix, DEFAULT_MAX_COEFFS};

/// A partial quotient `a_i(z)` with rational coefficients.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartialQuotient {
    pub poly: RatPoly,
}

impl PartialQuotient {
    pub fn degree(&self) -> usize {
        self.poly.degree().unwrap_or(0)
    }
}

/// Convergent `p_k / q_k` normalized to coprime integer coefficients with
/// positive leading coefficient of `q_k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConvergentPair {
    pub k: usize,
    pub p: IntPoly,
    pub q: IntPoly,
}

impl ConvergentPair {
    pub fn deg_q(&self) -> usize {
        self.q.degree().unwrap_or(0)
    }

    /// True when `(p, q)` and `(p2, q2)` are proportional, i.e. define the same
    /// rational function with the same scaling up to a constant.
    pub fn is_proportional(&self, p2: &IntPoly, q2: &IntPoly) -> bool {
        let (Some(l1), Some(l2)) = (self.q.leading(), q2.leading()) else {
            return false;
        };
        self.q.scale(l2) == q2.scale(l1) && self.p.scale(l2) == p2.scale(l1)
    }
}

/// Result of [`continued_fraction`].
#[derive(Clone, Debug)]
pub struct LaurentCf {
    /// `a_0, a_1, ...`
    pub quotients: Vec<PartialQuotient>,
    /// The remainder vanished on every known coefficient: the series is
    /// rational as far as the prefix can tell and no further quotient exists.
    pub rational_so_far: bool,
}

/// Negative-power remainder: `coef[s]` is the coefficient of `z^-s`; indices
/// `>= known` are unknown (or zero when `exact`).
struct Remainder {
    coef: Vec<BigRational>,
    known: usize,
    exact: bool,
}

impl Remainder {
    fn at(&self, s: usize) -> BigRational {
        debug_assert!(self.exact || s < self.known);
        self.coef.get(s).cloned().unwrap_or_else(BigRational::zero)
    }
}

/// Partial quotients `a_0..a_K` of `g(z) = sum c_n z^-n`.
pub fn continued_fraction(prefix: &SeriesPrefix, k_max: usize) -> Result<LaurentCf> {
    let n = prefix.len();
    let mut quotients = vec![PartialQuotient {
        poly: RatPoly::zero(),
    }];
    // R_{-1} = -1 exactly.
    let mut prev = Remainder {
        coef: vec![-BigRational::one()],
        known: usize::MAX,
        exact: true,
    };
    let mut cur = Remainder {
        coef: std::iter::once(BigRational::zero())
            .chain(prefix.coeffs().iter().map(|c| BigRational::from_integer(c.clone())))
            .collect(),
        known: n + 1,
        exact: false,
    };
    // deg q_k; the leading index of R_{k-1}.
    let mut w = 0usize;

    for k in 0..k_max {
        let Some(v) = (w + 1..cur.known).find(|&s| !cur.coef[s].is_zero()) else {
            return Ok(LaurentCf {
                quotients,
                rational_so_far: true,
            });
        };
        let e = v - w;
        if v + e >= cur.known {
            return Err(Error::InsufficientPrecision { reached: k });
        }
        let lead = cur.coef[v].clone();
        let mut h: Vec<BigRational> = Vec::with_capacity(e + 1);
        for i in 0..=e {
            let mut acc = -prev.at(w + i);
            for (j, hj) in h.iter().enumerate() {
                acc -= hj * &cur.coef[v + i - j];
            }
            h.push(acc / &lead);
        }
        let known = cur.known - e;
        let mut next = Vec::with_capacity(known);
        for s in 0..known {
            let mut acc = prev.at(s);
            for (j, hj) in h.iter().enumerate() {
                let t = s + e - j;
                if !cur.coef[t].is_zero() {
                    acc += hj * &cur.coef[t];
                }
            }
            next.push(acc);
        }
        debug_assert!(next[..=v].iter().all(Zero::is_zero));
        let poly = RatPoly::new(h.into_iter().rev().collect());
        quotients.push(PartialQuotient { poly });
        prev = std::mem::replace(
            &mut cur,
            Remainder {
                coef: next,
                known,
                exact: false,
            },
        );
        w = v;
    }
    Ok(LaurentCf {
        quotients,
        rational_so_far: false,
    })
}

/// Convergents with the raw continuant recurrences
/// `p_k = a_k p_{k-1} + p_{k-2}`, `q_k = a_k q_{k-1} + q_{k-2}`.
pub fn rational_convergents(quotients: &[PartialQuotient]) -> Vec<(RatPoly, RatPoly)> {
    let one = RatPoly::constant(BigRational::one());
    let (mut p2, mut q2) = (RatPoly::zero(), one.clone());
    let (mut p1, mut q1) = (one, RatPoly::zero());
    let mut out = Vec::with_capacity(quotients.len());
    for a in quotients {
        let p = &(&a.poly * &p1) + &p2;
        let q = &(&a.poly * &q1) + &q2;
        out.push((p.clone(), q.clone()));
        (p2, q2, p1, q1) = (p1, q1, p, q);
    }
    out
}

/// Clears denominators jointly and removes the common content.
pub fn normalize_pair(p: &RatPoly, q: &RatPoly) -> (IntPoly, IntPoly) {
    let l = {
        use num_integer::Integer;
        p.denominator_lcm().lcm(&q.denominator_lcm())
    };
    let mut pi = p.scale_to_integer(&l);
    let mut qi = q.scale_to_integer(&l);
    let g = {
        use num_integer::Integer;
        pi.content().gcd(&qi.content())
    };
    if !g.is_zero() && !g.is_one() {
        pi = pi.div_exact(&g);
        qi = qi.div_exact(&g);
    }
    if qi.leading().is_some_and(|c| c.is_negative()) {
        pi = -&pi;
        qi = -&qi;
    }
    (pi, qi)
}

pub fn convergents_from_cf(quotients: &[PartialQuotient]) -> Vec<ConvergentPair> {
    rational_convergents(quotients)
        .iter()
        .enumerate()
        .map(|(k, (p, q))| {
            let (p, q) = normalize_pair(p, q);
            ConvergentPair { k, p, q }
        })
        .collect()
}

/// Valuation of `q g - p` as far as the prefix determines it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ResidualValuation {
    /// Highest exponent with a nonzero coefficient.
    Exact(i64),
    /// Every coefficient down to `z^-known` vanishes.
    VanishesThrough(usize),
}

/// Inspects `q(z) g(z) - p(z)` using the coefficients of the prefix.
pub fn residual_valuation(prefix: &SeriesPrefix, p: &IntPoly, q: &IntPoly) -> Result<ResidualValuation> {
    let dq = q.degree().unwrap_or(0);
    prefix.require(dq)?;
    let n = prefix.len();
    let top = p.degree().unwrap_or(0).max(dq);
    // z^j, j >= 0: sum_i q_i c_{i-j} - p_j
    for j in (0..=top).rev() {
        let mut acc = -p.coeff(j);
        for i in (j + 1)..=dq {
            acc += &q.coeffs()[i] * prefix.get(i - j);
        }
        if !acc.is_zero() {
            return Ok(ResidualValuation::Exact(j as i64));
        }
    }
    let known = n - dq;
    for s in 1..=known {
        let acc: BigInt = q
            .coeffs()
            .iter()
            .enumerate()
            .filter(|(_, a)| !a.is_zero())
            .map(|(i, a)| a * prefix.get(s + i))
            .sum();
        if !acc.is_zero() {
            return Ok(ResidualValuation::Exact(-(s as i64)));
        }
    }
    Ok(ResidualValuation::VanishesThrough(known))
}

/// Outcome of [`verify_convergent`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConvergentCheck {
    pub k: usize,
    /// Degree of the next partial quotient, `deg q_{k+1} - deg q_k`.
    pub deg_a: i64,
    pub deg_q: usize,
    /// `||g - p/q||`, absent when the residual vanishes on the whole prefix.
    pub valuation_observed: Option<i64>,
    /// `-deg q_k - deg q_{k+1}`.
    pub valuation_expected: i64,
    /// `||g - p/q|| < -2 deg q`.
    pub legendre: bool,
    pub matches_expected: bool,
    pub rational_within_prefix: bool,
}

impl ConvergentCheck {
    pub fn passed(&self) -> bool {
        self.legendre && (self.matches_expected || self.rational_within_prefix)
    }
}

/// Legendre test plus the exact valuation `||g - p_k/q_k|| = -deg q_k - deg q_{k+1}`.
pub fn verify_convergent(prefix: &SeriesPrefix, pair: &ConvergentPair, next_q_deg: usize) -> Result<ConvergentCheck> {
    let dq = pair.deg_q();
    prefix.require(dq + next_q_deg)?;
    let expected = -(dq as i64) - next_q_deg as i64;
    let (observed, legendre, rational) = match residual_valuation(prefix, &pair.p, &pair.q)? {
        ResidualValuation::Exact(v) => {
            let val = v - dq as i64;
            (Some(val), val < -2 * dq as i64, false)
        }
        ResidualValuation::VanishesThrough(known) => (None, known + 1 > dq, true),
    };
    Ok(ConvergentCheck {
        k: pair.k,
        deg_a: next_q_deg as i64 - dq as i64,
        deg_q: dq,
        valuation_observed: observed,
        valuation_expected: expected,
        legendre,
        matches_expected: observed == Some(expected),
        rational_within_prefix: rational,
    })
}

/// Summary of the linear-quotient test.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BadlyApproximableReport {
    pub k: usize,
    pub is_bad_up_to_k: bool,
    pub first_violation: Option<usize>,
    /// `max_{1 <= j < K} deg q_{j+1} / deg q_j`.
    #[serde(serialize_with = "ser_rat")]
    pub rho_estimate: BigRational,
    /// `deg a_1 .. deg a_K`.
    pub quotient_degrees: Vec<usize>,
    pub prefix_len: usize,
}

/// Expands `g` until `K` partial quotients are certified, doubling the prefix
/// as needed, and checks that all of them are linear.
pub fn badly_approximable_report(spec: &MahlerSpec, k_max: usize) -> Result<BadlyApproximableReport> {
    badly_approximable_report_with_budget(spec, k_max, DEFAULT_MAX_COEFFS).map(|(r, _)| r)
}

pub fn badly_approximable_report_with_budget(
    spec: &MahlerSpec,
    k_max: usize,
    max_coeffs: usize,
) -> Result<(BadlyApproximableReport, LaurentCf)> {
    if k_max < 2 {
        return Err(Error::Precondition("K must be at least 2".into()));
    }
    let mut n = 2 * k_max + 2;
    // A remainder that vanishes on a short window may just be a long gap
    // before the next quotient, so degeneracy is confirmed on a doubled prefix.
    let mut vanished_at: Option<usize> = None;
    loop {
        let prefix = prefix_with_budget(spec, n, max_coeffs)?;
        match continued_fraction(&prefix, k_max) {
            Ok(cf) if cf.rational_so_far => {
                let index = cf.quotients.len() - 1;
                if vanished_at == Some(index) || n >= max_coeffs {
                    return Err(Error::DegenerateRational { index });
                }
                vanished_at = Some(index);
                n = (2 * n).min(max_coeffs);
            }
            Ok(cf) => {
                let degrees: Vec<usize> = cf.quotients[1..].iter().map(|a| a.degree()).collect();
                let first_violation = degrees.iter().position(|&d| d != 1).map(|i| i + 1);
                let mut deg_q = Vec::with_capacity(degrees.len());
                let mut acc = 0usize;
                for d in &degrees {
                    acc += d;
                    deg_q.push(acc);
                }
                let rho = deg_q
                    .windows(2)
                    .map(|w| BigRational::new(BigInt::from(w[1]), BigInt::from(w[0])))
                    .max()
                    .unwrap_or_else(BigRational::one);
                let report = BadlyApproximableReport {
                    k: k_max,
                    is_bad_up_to_k: first_violation.is_none(),
                    first_violation,
                    rho_estimate: rho,
                    quotient_degrees: degrees,
                    prefix_len: n,
                };
                return Ok((report, cf));
            }
            Err(Error::InsufficientPrecision { reached }) => {
                if n >= max_coeffs {
                    return Err(Error::InsufficientPrecision { reached });
                }
                n = (2 * n).min(max_coeffs);
            }
            Err(e) => return Err(e),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::prefix;

    fn ri(n: i64) -> BigRational {
        BigRational::from_integer(BigInt::from(n))
    }

    fn ip(c: &[i64]) -> IntPoly {
        IntPoly::new(c.iter().map(|&x| BigInt::from(x)).collect())
    }

    #[test]
    fn thue_morse_first_quotient() {
        let p = prefix(&MahlerSpec::thue_morse(), 8).unwrap();
        let cf = continued_fraction(&p, 1).unwrap();
        assert!(cf.quotients[0].poly.is_zero());
        assert_eq!(cf.quotients[1].poly, RatPoly::new(vec![ri(1), ri(1)]));
        let conv = convergents_from_cf(&cf.quotients);
        assert_eq!(conv[1].p, ip(&[1]));
        assert_eq!(conv[1].q, ip(&[1, 1]));
    }

    #[test]
    fn degenerate_series() {
        let s = MahlerSpec::new(2, vec![0]).unwrap();
        let p = prefix(&s, 6).unwrap();
        let cf = continued_fraction(&p, 1).unwrap();
        assert_eq!(cf.quotients[1].poly, RatPoly::new(vec![ri(0), ri(1)]));
        let more = continued_fraction(&p, 3).unwrap();
        assert!(more.rational_so_far);
        assert_eq!(more.quotients.len(), 2);
        assert!(matches!(
            badly_approximable_report(&s, 10),
            Err(Error::DegenerateRational { index: 1 })
        ));
    }

    #[test]
    fn single_quotient_convergent() {
        let q = vec![PartialQuotient {
            poly: RatPoly::new(vec![ri(0), ri(0), ri(1)]),
        }];
        let c = convergents_from_cf(&q);
        assert_eq!(c[0].p, ip(&[0, 0, 1]));
        assert_eq!(c[0].q, ip(&[1]));
    }

    #[test]
    fn insufficient_precision_reports_index() {
        let p = prefix(&MahlerSpec::thue_morse(), 3).unwrap();
        assert_eq!(
            continued_fraction(&p, 5).unwrap_err(),
            Error::InsufficientPrecision { reached: 1 }
        );
    }

    #[test]
    fn verify_first_convergent() {
        let p = prefix(&MahlerSpec::thue_morse(), 16).unwrap();
        let pair = ConvergentPair {
            k: 1,
            p: ip(&[1]),
            q: ip(&[1, 1]),
        };
        let r = verify_convergent(&p, &pair, 2).unwrap();
        assert_eq!(r.valuation_observed, Some(-3));
        assert!(r.passed());
        let bad = ConvergentPair {
            k: 1,
            p: ip(&[2]),
            q: ip(&[1, 1]),
        };
        assert!(!verify_convergent(&p, &bad, 2).unwrap().legendre);
        assert!(matches!(
            verify_convergent(&prefix(&MahlerSpec::thue_morse(), 2).unwrap(), &pair, 2),
            Err(Error::PrecisionTooShort { .. })
        ));
    }

    #[test]
    fn verify_exact_rational() {
        let s = MahlerSpec::new(2, vec![0]).unwrap();
        let p = prefix(&s, 8).unwrap();
        let pair = ConvergentPair {
            k: 1,
            p: ip(&[1]),
            q: ip(&[0, 1]),
        };
        let r = verify_convergent(&p, &pair, 2).unwrap();
        assert!(r.rational_within_prefix);
        assert_eq!(r.valuation_observed, None);
        assert!(r.legendre);
    }

    #[test]
    fn thue_morse_is_badly_approximable_to_100() {
        let r = badly_approximable_report(&MahlerSpec::thue_morse(), 100).unwrap();
        assert!(r.is_bad_up_to_k);
        assert_eq!(r.rho_estimate, ri(2));
    }

    #[test]
    fn continuant_determinant_is_constant() {
        let p = prefix(&MahlerSpec::thue_morse(), 104).unwrap();
        let cf = continued_fraction(&p, 50).unwrap();
        let raw = rational_convergents(&cf.quotients);
        for k in 1..raw.len() {
            let (pk, qk) = &raw[k];
            let (pj, qj) = &raw[k - 1];
            let det = &(pk * qj) - &(pj * qk);
            let sign = if k % 2 == 0 { -1 } else { 1 };
            assert_eq!(det, RatPoly::constant(ri(sign)), "k = {k}");
        }
        let norm = convergents_from_cf(&cf.quotients);
        for k in 1..norm.len() {
            let det = &(&norm[k].p * &norm[k - 1].q) - &(&norm[k - 1].p * &norm[k].q);
            assert_eq!(det.degree(), Some(0), "k = {k}");
        }
    }
}
