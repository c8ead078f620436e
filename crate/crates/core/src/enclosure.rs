//! Certified rational enclosures of `g(b) = sum_n c_n b^-n` for `|b| >= 2`.
//!
//! The partial sum is exact. The tail uses `|c_n| <= U^{ceil(log_d n)} <= U n^s`
//! with `s = ceil(log_d U)`, which is dominated by a geometric series once the
//! term ratio drops below one.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::report::ser_interval;
use crate::series::{ceil_log, prefix_with_budget, MahlerSpec, DEFAULT_MAX_COEFFS};

/// A rational interval certified to contain `target`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Enclosure {
    #[serde(serialize_with = "ser_interval")]
    pub value: Interval,
    pub target: String,
    /// Number of series terms summed exactly.
    pub terms: usize,
}

impl Enclosure {
    pub fn lo(&self) -> &BigRational {
        self.value.lo()
    }

    pub fn hi(&self) -> &BigRational {
        self.value.hi()
    }

    pub fn width(&self) -> BigRational {
        self.value.width()
    }

    /// Tightens to width `<= eps`. The result is contained in `self`.
    pub fn refine(&self, spec: &MahlerSpec, b: &BigInt, eps: &BigRational) -> Result<Enclosure> {
        let fresh = evaluate_g(spec, b, eps)?;
        let value = self.value.intersect(&fresh.value).ok_or_else(|| {
            Error::CertificateFailed("refined enclosure is disjoint from the previous one".into())
        })?;
        Ok(Enclosure {
            value,
            target: fresh.target,
            terms: fresh.terms,
        })
    }
}

/// Upper bound for `sum_{n > N} |c_n| |b|^-n`, or `None` if the geometric
/// majorant does not converge yet at this `N`.
pub fn tail_bound(spec: &MahlerSpec, b_abs: &BigInt, n: usize) -> Option<BigRational> {
    let u = spec.u_norm();
    let bb = BigRational::from_integer(b_abs.clone());
    let bpow = |e: usize| num_traits::pow(bb.clone(), e);
    match u {
        0 => Some(if n >= 1 { BigRational::zero() } else { bpow(1).recip() }),
        1 => Some(bpow(n).recip() / (&bb - BigRational::one())),
        _ => {
            let s = ceil_log(spec.d() as u64, u) as usize;
            let n1 = BigRational::from_integer(BigInt::from(n + 1));
            let n2 = BigRational::from_integer(BigInt::from(n + 2));
            let rho = num_traits::pow(&n2 / &n1, s) / &bb;
            if rho >= BigRational::one() {
                return None;
            }
            let first = BigRational::from_integer(BigInt::from(u)) * num_traits::pow(n1, s) / bpow(n + 1);
            Some(first / (BigRational::one() - rho))
        }
    }
}

/// Exact `sum_{n=1}^N c_n b^-n` by integer Horner.
fn partial_sum(c: &[BigInt], b: &BigInt) -> BigRational {
    let num = c.iter().fold(BigInt::zero(), |acc, cn| acc * b + cn);
    BigRational::new(num, num_traits::pow(b.clone(), c.len()))
}

/// Smallest term count (on a coarse grid) whose tail bound is `<= eps / 2`.
fn terms_needed(spec: &MahlerSpec, b_abs: &BigInt, eps: &BigRational) -> usize {
    let half = eps / BigRational::from_integer(2.into());
    let target_bits = crate::interval::floor_log2(&half.recip()).max(0) as usize + 2;
    let per_term = (b_abs.bits() as usize).saturating_sub(1).max(1);
    let mut n = (target_bits / per_term).max(2);
    loop {
        if let Some(t) = tail_bound(spec, b_abs, n) {
            if t <= half {
                return n;
            }
        }
        n += (n / 8).max(1);
    }
}

/// `g(b)` to width `<= eps`.
pub fn evaluate_g(spec: &MahlerSpec, b: &BigInt, eps: &BigRational) -> Result<Enclosure> {
    evaluate_g_with_budget(spec, b, eps, DEFAULT_MAX_COEFFS)
}

pub fn evaluate_g_with_budget(
    spec: &MahlerSpec,
    b: &BigInt,
    eps: &BigRational,
    max_coeffs: usize,
) -> Result<Enclosure> {
    let b_abs = b.abs();
    if b_abs < BigInt::from(2) {
        return Err(Error::Precondition(format!("|b| must be at least 2, got {b}")));
    }
    if !eps.is_positive() {
        return Err(Error::Precondition("eps must be positive".into()));
    }
    let target = format!("g({b}) for d = {}, u = {:?}", spec.d(), spec.u());
    let n = if spec.u_norm() == 0 { 1 } else { terms_needed(spec, &b_abs, eps) };
    let c = prefix_with_budget(spec, n, max_coeffs)?;
    let s = partial_sum(c.coeffs(), b);
    let t = tail_bound(spec, &b_abs, n).expect("terms_needed returns a convergent N");
    Ok(Enclosure {
        value: Interval::new(&s - &t, &s + &t),
        target,
        terms: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interval::rat;
    use proptest::prelude::*;

    fn pow10(e: u32) -> BigRational {
        BigRational::new(BigInt::one(), num_traits::pow(BigInt::from(10), e as usize))
    }

    /// `sum_{k<60} t_k / 2^(k+1)` with the Thue-Morse word from its
    /// doubling recurrence, plus a crude tail.
    fn thue_morse_constant() -> Interval {
        let mut t = vec![0u8];
        while t.len() < 64 {
            let c: Vec<u8> = t.iter().map(|x| 1 - x).collect();
            t.extend(c);
        }
        let s: BigRational = (0..60)
            .filter(|&k| t[k] == 1)
            .map(|k| BigRational::new(BigInt::one(), num_traits::pow(BigInt::from(2), k + 1)))
            .sum();
        let tail = BigRational::new(BigInt::one(), num_traits::pow(BigInt::from(2), 60));
        Interval::new(s.clone(), s + tail)
    }

    #[test]
    fn thue_morse_at_two() {
        let e = evaluate_g(&MahlerSpec::thue_morse(), &BigInt::from(2), &pow10(12)).unwrap();
        assert!(e.width() <= pow10(12));
        // f(2) = 2 - 4 c_TM and g(2) = f(2) / 2 = 1 - 2 c_TM.
        let c = thue_morse_constant();
        let expect = &Interval::from_int(1) - &(&Interval::from_int(2) * &c);
        assert!(e.value.intersect(&expect).is_some());
        assert!(e.lo() > &rat(17509193271, 100_000_000_000));
        assert!(e.hi() < &rat(17509193273, 100_000_000_000));
    }

    #[test]
    fn degenerate_is_exact() {
        let s = MahlerSpec::new(2, vec![0]).unwrap();
        let e = evaluate_g(&s, &BigInt::from(5), &pow10(3)).unwrap();
        assert!(e.value.is_exact());
        assert_eq!(e.lo(), &rat(1, 5));
    }

    #[test]
    fn negative_base() {
        let s = MahlerSpec::thue_morse();
        let e = evaluate_g(&s, &BigInt::from(-2), &pow10(20)).unwrap();
        // Oracle: b^-1 prod_{t<7} (1 - b^{-2^t}); omitted factors are 1 + O(2^-128).
        let b = rat(-2, 1);
        let prod = (0..7).fold(b.recip(), |acc, t| {
            acc * (BigRational::one() - num_traits::pow(b.clone(), 1usize << t).recip())
        });
        let slack = pow10(15);
        assert!(&(e.lo() - &slack) <= &prod && &prod <= &(e.hi() + &slack));
        assert!(e.hi() < &rat(-52, 100) && e.lo() > &rat(-53, 100));
        assert!(evaluate_g(&s, &BigInt::from(1), &pow10(3)).is_err());
    }

    #[test]
    fn large_u_tail() {
        let s = MahlerSpec::new(3, vec![2, 5]).unwrap();
        let e = evaluate_g(&s, &BigInt::from(7), &pow10(30)).unwrap();
        assert!(e.width() <= pow10(30));
        let direct: BigRational = (1..=400u64)
            .map(|n| BigRational::new(crate::series::coefficient(&s, n), num_traits::pow(BigInt::from(7), n as usize)))
            .sum();
        let slack = pow10(40);
        assert!(&(e.lo() - &slack) <= &direct && &direct <= &(e.hi() + &slack));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn refinement_nests(u in -3i64..4, b in 2i64..9, e1 in 2u32..20, e2 in 20u32..40) {
            let s = MahlerSpec::new(2, vec![u]).unwrap();
            let b = BigInt::from(b);
            let coarse = evaluate_g(&s, &b, &pow10(e1)).unwrap();
            let fine = evaluate_g(&s, &b, &pow10(e2)).unwrap();
            prop_assert!(fine.value.is_subset_of(&coarse.value));
            prop_assert!(fine.width() <= pow10(e2));
        }
    }
}
