//! Closed rational intervals with outward rounding.
//!
//! Every operation is inclusion-monotone: if `a ⊆ a'` then `f(a) ⊆ f(a')`.
//! Exact arithmetic is used for `+ - * /`; the elementary functions
//! (`sqrt`, `log2`, `exp2`) return dyadic endpoints computed from lower and
//! upper bound functions that are themselves monotone in their argument, so
//! refining an input never widens an output. A comparison decided from these
//! intervals is a certificate, not a floating-point coincidence.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Euclid, One, Signed, Zero};

/// Working precision (bits) for transcendental bounds.
pub const DEFAULT_PREC: u32 = 128;

#[derive(Clone, PartialEq, Eq)]
pub struct Interval {
    lo: BigRational,
    hi: BigRational,
}

pub fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: impl Into<BigInt>) -> BigRational {
    BigRational::from_integer(n.into())
}

/// `2^e` as an exact rational.
pub fn pow2(e: i64) -> BigRational {
    if e >= 0 {
        BigRational::from_integer(BigInt::one() << e as usize)
    } else {
        BigRational::new(BigInt::one(), BigInt::one() << (-e) as usize)
    }
}

/// `floor(log2 x)` for `x > 0`.
pub fn floor_log2(x: &BigRational) -> i64 {
    assert!(x.is_positive(), "floor_log2 of non-positive value");
    let mut e = x.numer().bits() as i64 - x.denom().bits() as i64;
    while &pow2(e) > x {
        e -= 1;
    }
    while &pow2(e + 1) <= x {
        e += 1;
    }
    e
}

fn shift(x: &BigRational, s: i64) -> BigRational {
    x * pow2(s)
}

/// Round down onto the absolute grid `2^-bits`.
fn floor_grid(x: &BigRational, bits: i64) -> BigRational {
    shift(&shift(x, bits).floor(), -bits)
}

fn ceil_grid(x: &BigRational, bits: i64) -> BigRational {
    shift(&shift(x, bits).ceil(), -bits)
}

/// Round down keeping `prec` significant bits.
pub fn round_down(x: &BigRational, prec: u32) -> BigRational {
    if x.is_zero() {
        return x.clone();
    }
    let e = floor_log2(&x.abs());
    floor_grid(x, prec as i64 - 1 - e)
}

/// Round up keeping `prec` significant bits.
pub fn round_up(x: &BigRational, prec: u32) -> BigRational {
    if x.is_zero() {
        return x.clone();
    }
    let e = floor_log2(&x.abs());
    ceil_grid(x, prec as i64 - 1 - e)
}

fn guard(prec: u32) -> i64 {
    prec as i64 + 12
}

/// `x 2^f` rounded down or up to an integer.
fn to_fixed(x: &BigRational, f: i64, up: bool) -> BigInt {
    let y = shift(x, f);
    if up { y.ceil() } else { y.floor() }.to_integer()
}

fn from_fixed(n: BigInt, f: i64) -> BigRational {
    shift(&BigRational::from_integer(n), -f)
}

/// `ceil(a / b)` for `b > 0`.
fn div_ceil(a: &BigInt, b: &BigInt) -> BigInt {
    -((-a).div_euclid(b))
}

/// Bounds on `atanh(z) = sum z^(2j+1)/(2j+1)` for `0 <= z < 1/2`, both
/// monotone in `z`. Evaluated in fixed point with `bits + 8` fraction bits,
/// rounding every step in one direction.
fn atanh_lower(z: &BigRational, terms: usize, bits: i64) -> BigRational {
    let f = bits + 8;
    let one = BigInt::one() << f as usize;
    let zf = to_fixed(z, f, false);
    let z2 = (&zf * &zf).div_euclid(&one);
    let mut pw = zf;
    let mut sum = BigInt::zero();
    for j in 0..terms {
        sum += pw.div_euclid(&BigInt::from(2 * j + 1));
        pw = (&pw * &z2).div_euclid(&one);
    }
    from_fixed(sum, f)
}

fn atanh_upper(z: &BigRational, terms: usize, bits: i64) -> BigRational {
    let f = bits + 8;
    let one = BigInt::one() << f as usize;
    let zf = to_fixed(z, f, true);
    let z2 = div_ceil(&(&zf * &zf), &one);
    let mut pw = zf;
    let mut sum = BigInt::zero();
    for j in 0..terms {
        sum += div_ceil(&pw, &BigInt::from(2 * j + 1));
        pw = div_ceil(&(&pw * &z2), &one);
    }
    // sum_{j >= terms} z^(2j+1)/(2j+1) <= pw / ((2 terms + 1)(1 - z^2))
    let den = BigInt::from(2 * terms + 1) * (&one - &z2);
    sum += div_ceil(&(&pw * &one), &den);
    from_fixed(sum, f)
}

fn atanh_terms(prec: u32) -> usize {
    // z <= 1/3 gains log2(9) > 3 bits per term.
    (guard(prec) as usize) / 3 + 2
}

/// Enclosure of `ln 2 = 2 atanh(1/3)`, cached per precision.
pub fn ln2(prec: u32) -> Interval {
    thread_local! {
        static CACHE: std::cell::RefCell<std::collections::HashMap<u32, Interval>> = Default::default();
    }
    if let Some(v) = CACHE.with(|c| c.borrow().get(&prec).cloned()) {
        return v;
    }
    let v = ln2_uncached(prec);
    CACHE.with(|c| c.borrow_mut().insert(prec, v.clone()));
    v
}

fn ln2_uncached(prec: u32) -> Interval {
    let bits = guard(prec);
    let third = rat(1, 3);
    let terms = atanh_terms(prec);
    let lo = atanh_lower(&third, terms, bits) * int(2);
    let hi = atanh_upper(&third, terms, bits) * int(2);
    Interval::new(round_down(&lo, prec + 8), round_up(&hi, prec + 8))
}

/// Monotone lower bound on `log2 x`, `x > 0`.
fn log2_lower(x: &BigRational, prec: u32, ln2: &Interval) -> BigRational {
    let e = floor_log2(x);
    let y = shift(x, -e);
    if y.is_one() {
        return int(e);
    }
    let bits = guard(prec);
    let z = (&y - BigRational::one()) / (&y + BigRational::one());
    let zd = floor_grid(&z, bits);
    let ln_lo = atanh_lower(&zd, atanh_terms(prec), bits) * int(2);
    let frac = floor_grid(&(ln_lo / &ln2.hi), bits);
    int(e) + frac.max(BigRational::zero())
}

/// Monotone upper bound on `log2 x`, `x > 0`.
fn log2_upper(x: &BigRational, prec: u32, ln2: &Interval) -> BigRational {
    let e = floor_log2(x);
    let y = shift(x, -e);
    if y.is_one() {
        return int(e);
    }
    let bits = guard(prec);
    let z = (&y - BigRational::one()) / (&y + BigRational::one());
    let zu = ceil_grid(&z, bits);
    let ln_hi = atanh_upper(&zu, atanh_terms(prec), bits) * int(2);
    let frac = ceil_grid(&(ln_hi / &ln2.lo), bits);
    int(e) + frac.min(BigRational::one())
}

fn exp_terms(prec: u32) -> usize {
    // smallest J with 0.7^J / J! < 2^-(prec + 16)
    let target = pow2(-(prec as i64 + 16));
    let w = rat(7, 10);
    let mut term = BigRational::one();
    let mut j = 0usize;
    while term >= target {
        j += 1;
        term = term * &w / int(j as i64);
    }
    j
}

/// Lower bound on `exp(w)` for `0 <= w < 1`, monotone in `w`.
fn exp_lower(w: &BigRational, terms: usize, bits: i64) -> BigRational {
    let f = bits + 8;
    let one = BigInt::one() << f as usize;
    let wf = to_fixed(w, f, false);
    let mut term = one.clone();
    let mut sum = BigInt::zero();
    for j in 0..terms {
        sum += &term;
        term = (&term * &wf).div_euclid(&(&one * BigInt::from(j + 1)));
    }
    from_fixed(sum, f)
}

fn exp_upper(w: &BigRational, terms: usize, bits: i64) -> BigRational {
    let f = bits + 8;
    let one = BigInt::one() << f as usize;
    let wf = to_fixed(w, f, true);
    let mut term = one.clone();
    let mut sum = BigInt::zero();
    for j in 0..terms {
        sum += &term;
        term = div_ceil(&(&term * &wf), &(&one * BigInt::from(j + 1)));
    }
    // remaining terms are dominated by a geometric series with ratio <= 1/2
    from_fixed(sum + term * 2, f)
}

fn exp2_lower(y: &BigRational, prec: u32, ln2: &Interval) -> BigRational {
    let n = y.floor();
    let f = y - &n;
    let n = n.to_integer();
    let n: i64 = (&n).try_into().expect("exp2 exponent out of range");
    if f.is_zero() {
        return pow2(n);
    }
    let bits = guard(prec);
    let w = floor_grid(&(&f * &ln2.lo), bits);
    let m = exp_lower(&w, exp_terms(prec), bits);
    round_down(&shift(&m, n), prec)
}

fn exp2_upper(y: &BigRational, prec: u32, ln2: &Interval) -> BigRational {
    let n = y.floor();
    let f = y - &n;
    let n = n.to_integer();
    let n: i64 = (&n).try_into().expect("exp2 exponent out of range");
    if f.is_zero() {
        return pow2(n);
    }
    let bits = guard(prec);
    let w = ceil_grid(&(&f * &ln2.hi), bits);
    let m = exp_upper(&w, exp_terms(prec), bits).min(int(2));
    round_up(&shift(&m, n), prec)
}

/// Square-root bounds on the grid `2^-(prec - floor(e/2))`, where
/// `e = floor(log2 x)`; the grid only changes at even `e`, which keeps both
/// bounds monotone.
fn sqrt_bounds(x: &BigRational, prec: u32) -> (BigRational, BigRational) {
    if x.is_zero() {
        return (x.clone(), x.clone());
    }
    let e = floor_log2(x);
    let s = prec as i64 - e.div_euclid(2);
    let scaled = shift(x, 2 * s);
    let r = scaled.floor().to_integer();
    let root = r.sqrt();
    let lo = shift(&BigRational::from_integer(root.clone()), -s);
    if BigRational::from_integer(&root * &root) == scaled {
        return (lo.clone(), lo);
    }
    let hi = shift(&BigRational::from_integer(root + 1), -s);
    (lo, hi)
}

impl Interval {
    pub fn new(lo: BigRational, hi: BigRational) -> Self {
        assert!(lo <= hi, "interval endpoints out of order: {lo} > {hi}");
        Interval { lo, hi }
    }

    pub fn exact(x: BigRational) -> Self {
        Interval {
            lo: x.clone(),
            hi: x,
        }
    }

    pub fn from_int(n: impl Into<BigInt>) -> Self {
        Self::exact(int(n))
    }

    pub fn lo(&self) -> &BigRational {
        &self.lo
    }

    pub fn hi(&self) -> &BigRational {
        &self.hi
    }

    pub fn into_bounds(self) -> (BigRational, BigRational) {
        (self.lo, self.hi)
    }

    pub fn width(&self) -> BigRational {
        &self.hi - &self.lo
    }

    pub fn is_exact(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(&self, x: &BigRational) -> bool {
        &self.lo <= x && x <= &self.hi
    }

    pub fn contains_zero(&self) -> bool {
        self.contains(&BigRational::zero())
    }

    pub fn is_subset_of(&self, other: &Interval) -> bool {
        other.lo <= self.lo && self.hi <= other.hi
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = (&self.lo).max(&other.lo).clone();
        let hi = (&self.hi).min(&other.hi).clone();
        (lo <= hi).then_some(Interval { lo, hi })
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval {
            lo: (&self.lo).min(&other.lo).clone(),
            hi: (&self.hi).max(&other.hi).clone(),
        }
    }

    pub fn abs(&self) -> Interval {
        if self.lo.is_negative() && self.hi.is_positive() {
            Interval {
                lo: BigRational::zero(),
                hi: (-&self.lo).max(self.hi.clone()),
            }
        } else if self.hi.is_positive() || self.hi.is_zero() && !self.lo.is_negative() {
            self.clone()
        } else {
            -self
        }
    }

    pub fn recip(&self) -> Interval {
        assert!(!self.contains_zero(), "reciprocal of an interval containing 0");
        Interval {
            lo: self.hi.recip(),
            hi: self.lo.recip(),
        }
    }

    pub fn round_out(&self, prec: u32) -> Interval {
        Interval {
            lo: round_down(&self.lo, prec),
            hi: round_up(&self.hi, prec),
        }
    }

    pub fn max(&self, other: &Interval) -> Interval {
        Interval {
            lo: (&self.lo).max(&other.lo).clone(),
            hi: (&self.hi).max(&other.hi).clone(),
        }
    }

    pub fn sqrt(&self, prec: u32) -> Interval {
        assert!(!self.lo.is_negative(), "sqrt of negative interval");
        let (lo, _) = sqrt_bounds(&self.lo, prec);
        let (_, hi) = sqrt_bounds(&self.hi, prec);
        Interval { lo, hi }
    }

    /// Base-2 logarithm of a positive interval.
    pub fn log2(&self, prec: u32) -> Interval {
        assert!(self.lo.is_positive(), "log2 of non-positive interval");
        let l2 = ln2(prec);
        Interval {
            lo: log2_lower(&self.lo, prec, &l2),
            hi: log2_upper(&self.hi, prec, &l2),
        }
    }

    pub fn ln(&self, prec: u32) -> Interval {
        (&self.log2(prec) * &ln2(prec)).round_out(prec)
    }

    pub fn exp2(&self, prec: u32) -> Interval {
        let l2 = ln2(prec);
        Interval {
            lo: exp2_lower(&self.lo, prec, &l2),
            hi: exp2_upper(&self.hi, prec, &l2),
        }
    }

    /// Certified `self <= other`: `Some(true)` when every point satisfies it,
    /// `Some(false)` when no point does, `None` when the intervals overlap.
    pub fn certify_le(&self, other: &Interval) -> Option<bool> {
        if self.hi <= other.lo {
            Some(true)
        } else if self.lo > other.hi {
            Some(false)
        } else {
            None
        }
    }

    /// Certified `self < other`.
    pub fn certify_lt(&self, other: &Interval) -> Option<bool> {
        if self.hi < other.lo {
            Some(true)
        } else if self.lo >= other.hi {
            Some(false)
        } else {
            None
        }
    }
}

/// `log2` of a positive integer.
pub fn log2_int(n: &BigInt, prec: u32) -> Interval {
    Interval::exact(BigRational::from_integer(n.clone())).log2(prec)
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

impl fmt::Debug for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl Add for &Interval {
    type Output = Interval;
    fn add(self, rhs: &Interval) -> Interval {
        Interval {
            lo: &self.lo + &rhs.lo,
            hi: &self.hi + &rhs.hi,
        }
    }
}

impl Sub for &Interval {
    type Output = Interval;
    fn sub(self, rhs: &Interval) -> Interval {
        Interval {
            lo: &self.lo - &rhs.hi,
            hi: &self.hi - &rhs.lo,
        }
    }
}

impl Neg for &Interval {
    type Output = Interval;
    fn neg(self) -> Interval {
        Interval {
            lo: -&self.hi,
            hi: -&self.lo,
        }
    }
}

impl Mul for &Interval {
    type Output = Interval;
    fn mul(self, rhs: &Interval) -> Interval {
        let cands = [
            &self.lo * &rhs.lo,
            &self.lo * &rhs.hi,
            &self.hi * &rhs.lo,
            &self.hi * &rhs.hi,
        ];
        let lo = cands.iter().min().unwrap().clone();
        let hi = cands.iter().max().unwrap().clone();
        Interval { lo, hi }
    }
}

impl Div for &Interval {
    type Output = Interval;
    fn div(self, rhs: &Interval) -> Interval {
        self * &rhs.recip()
    }
}

impl Mul<&BigRational> for &Interval {
    type Output = Interval;
    fn mul(self, rhs: &BigRational) -> Interval {
        match rhs.cmp(&BigRational::zero()) {
            Ordering::Less => Interval {
                lo: &self.hi * rhs,
                hi: &self.lo * rhs,
            },
            _ => Interval {
                lo: &self.lo * rhs,
                hi: &self.hi * rhs,
            },
        }
    }
}
