//! The Mahler instance and exact coefficients of
//! `g(z) = z^-1 * prod_{t>=0} P(z^(-d^t))`.
//!
//! Coefficients follow from the base-`d` digits of `n - 1`:
//! `c_n = prod_j u[digit_j]` with `u[0] = 1`.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::poly::IntPoly;

/// Default cap on the number of series coefficients held in memory.
pub const DEFAULT_MAX_COEFFS: usize = 1_000_000;

/// `P(z) = 1 + u_1 z + ... + u_{d-1} z^{d-1}` together with the base `d`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MahlerSpec {
    d: u32,
    u: Vec<i64>,
    u_inf_norm: u64,
}

impl MahlerSpec {
    pub fn new(d: u32, u: Vec<i64>) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidSpec(format!("d must be at least 2, got {d}")));
        }
        if u.len() != d as usize - 1 {
            return Err(Error::InvalidSpec(format!(
                "u must have d - 1 = {} entries, got {}",
                d - 1,
                u.len()
            )));
        }
        let u_inf_norm = u.iter().map(|x| x.unsigned_abs()).max().unwrap_or(0);
        Ok(MahlerSpec { d, u, u_inf_norm })
    }

    /// The Thue–Morse instance `d = 2`, `P(z) = 1 - z`.
    pub fn thue_morse() -> Self {
        Self::new(2, vec![-1]).expect("valid instance")
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn u(&self) -> &[i64] {
        &self.u
    }

    /// `max |u_i|`.
    pub fn u_norm(&self) -> u64 {
        self.u_inf_norm
    }

    /// `u_i` with the convention `u_0 = 1`.
    pub fn digit_weight(&self, digit: usize) -> i64 {
        if digit == 0 {
            1
        } else {
            self.u[digit - 1]
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.u_inf_norm == 0
    }

    /// `P(1) = 1 + sum u_i`. Instances are built with `P(0) = 1`; callers may
    /// warn when `P(1) != 1`.
    pub fn p_at_one(&self) -> i64 {
        1 + self.u.iter().sum::<i64>()
    }

    /// `P(z)` as an integer polynomial.
    pub fn p_polynomial(&self) -> IntPoly {
        let mut c = vec![BigInt::one()];
        c.extend(self.u.iter().map(|&x| BigInt::from(x)));
        IntPoly::new(c)
    }
}

/// Exact coefficients `c_1..c_N` of `g`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SeriesPrefix {
    c: Vec<BigInt>,
}

impl SeriesPrefix {
    pub fn from_coeffs(c: Vec<BigInt>) -> Self {
        SeriesPrefix { c }
    }

    /// Number of known coefficients.
    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    /// `c_n`, 1-based. Panics if `n` is 0 or beyond the prefix.
    pub fn get(&self, n: usize) -> &BigInt {
        assert!(n >= 1 && n <= self.c.len(), "coefficient index {n} out of range");
        &self.c[n - 1]
    }

    pub fn coeffs(&self) -> &[BigInt] {
        &self.c
    }

    /// `||c_n||_inf = max_{i <= n} |c_i|`.
    pub fn sup_norm(&self, n: usize) -> BigInt {
        self.c[..n.min(self.c.len())]
            .iter()
            .map(|x| x.abs())
            .max()
            .unwrap_or_else(BigInt::zero)
    }

    pub fn require(&self, n: usize) -> Result<()> {
        if n > self.c.len() {
            Err(Error::PrecisionTooShort {
                needed: n,
                available: self.c.len(),
            })
        } else {
            Ok(())
        }
    }
}

/// Smallest `e >= 0` with `d^e >= n`, i.e. `ceil(log_d n)` for `n >= 1`.
pub fn ceil_log(d: u64, n: u64) -> u32 {
    assert!(n >= 1);
    let mut e = 0;
    let mut p: u128 = 1;
    while p < n as u128 {
        p *= d as u128;
        e += 1;
    }
    e
}

/// `c_n` from the base-`d` digits of `n - 1`.
pub fn coefficient(spec: &MahlerSpec, n: u64) -> BigInt {
    assert!(n >= 1, "coefficients are indexed from 1");
    let d = spec.d as u64;
    let mut m = n - 1;
    let mut acc = BigInt::one();
    while m > 0 {
        let w = spec.digit_weight((m % d) as usize);
        if w == 0 {
            return BigInt::zero();
        }
        acc *= w;
        m /= d;
    }
    acc
}

/// `c_1..c_N` with at most `max_coeffs` entries.
pub fn prefix_with_budget(spec: &MahlerSpec, n: usize, max_coeffs: usize) -> Result<SeriesPrefix> {
    if n == 0 {
        return Err(Error::Precondition("prefix length must be at least 1".into()));
    }
    if n > max_coeffs {
        return Err(Error::BudgetExceeded {
            what: "series coefficients",
            requested: n as u128,
            limit: max_coeffs as u128,
        });
    }
    let d = spec.d as usize;
    // c[m] for m = n - 1: c[m] = c[m / d] * u[m % d]
    let mut c: Vec<BigInt> = Vec::with_capacity(n);
    c.push(BigInt::one());
    for m in 1..n {
        let w = spec.digit_weight(m % d);
        c.push(&c[m / d] * w);
    }
    let prefix = SeriesPrefix { c };
    debug_assert!(coefficient_bound_holds(spec, &prefix));
    Ok(prefix)
}

pub fn prefix(spec: &MahlerSpec, n: usize) -> Result<SeriesPrefix> {
    prefix_with_budget(spec, n, DEFAULT_MAX_COEFFS)
}

/// Checks `|c_n| <= ||u||^ceil(log_d n)` for every coefficient of the prefix.
pub fn coefficient_bound_holds(spec: &MahlerSpec, prefix: &SeriesPrefix) -> bool {
    let norm = BigInt::from(spec.u_norm());
    let d = spec.d as u64;
    let mut e_prev = 0u32;
    let mut bound = BigInt::one();
    for (i, c) in prefix.c.iter().enumerate() {
        let e = ceil_log(d, i as u64 + 1);
        while e_prev < e {
            bound *= &norm;
            e_prev += 1;
        }
        if c.abs() > bound {
            return false;
        }
    }
    true
}

/// Independent route: multiply out `z^-1 * prod_{t=0}^{T} P(z^(-d^t))` and
/// keep the first `N` coefficients. Factor `t` first touches `c_{d^t + 1}`,
/// so the omitted factors are harmless once `d^(T+1) >= N`.
pub fn expand_product(spec: &MahlerSpec, n: usize, t_max: u32) -> Result<SeriesPrefix> {
    if n == 0 {
        return Err(Error::Precondition("prefix length must be at least 1".into()));
    }
    let reach = (spec.d as u128).checked_pow(t_max + 1).unwrap_or(u128::MAX);
    if reach < n as u128 {
        return Err(Error::Precondition(format!(
            "d^(T+1) = {reach} is below N = {n}; c_N would miss a factor"
        )));
    }
    // f_j is the coefficient of z^-j in the truncated product; c_n = f_{n-1}.
    let mut f = vec![BigInt::zero(); n];
    f[0] = BigInt::one();
    let mut stride = 1usize;
    for _ in 0..=t_max {
        if stride >= n {
            break;
        }
        let mut next = f.clone();
        for (digit, &w) in spec.u.iter().enumerate() {
            if w == 0 {
                continue;
            }
            let off = (digit + 1) * stride;
            for j in off..n {
                if !f[j - off].is_zero() {
                    next[j] += &f[j - off] * w;
                }
            }
        }
        f = next;
        stride = stride.saturating_mul(spec.d as usize);
    }
    Ok(SeriesPrefix { c: f })
}

/// `P*(z) = z^{d-1} P(1/z) = z^{d-1} + u_1 z^{d-2} + ... + u_{d-1}`.
pub fn star_polynomial(spec: &MahlerSpec) -> IntPoly {
    let mut c: Vec<BigInt> = spec.u.iter().rev().map(|&x| BigInt::from(x)).collect();
    c.push(BigInt::one());
    IntPoly::new(c)
}
