//! Hankel determinants, the integer convergents they define, and the residual
//! coefficients `alpha_{k,i}`.
//!
//! `q~_k` is the adjugate column `adj(H_{k+1}) e_{k+1}`, i.e. the solution of
//! `H_{k+1} a = det(H_{k+1}) e_{k+1}`. It is obtained from one fraction-free
//! elimination followed by exact back-substitution.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::poly::IntPoly;
use crate::report::ser_int;
use crate::series::{MahlerSpec, SeriesPrefix};

/// `H[i][j] = c_{i+j+1}`, 0-based.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HankelMatrix {
    entries: Vec<Vec<BigInt>>,
}

impl HankelMatrix {
    pub fn new(prefix: &SeriesPrefix, k: usize) -> Result<Self> {
        if k == 0 {
            return Ok(HankelMatrix { entries: Vec::new() });
        }
        prefix.require(2 * k - 1)?;
        let entries = (0..k)
            .map(|i| (0..k).map(|j| prefix.get(i + j + 1).clone()).collect())
            .collect();
        Ok(HankelMatrix { entries })
    }

    pub fn size(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[Vec<BigInt>] {
        &self.entries
    }

    pub fn into_rows(self) -> Vec<Vec<BigInt>> {
        self.entries
    }
}

/// Fraction-free Gaussian elimination with row pivoting, applied in place to
/// `a` and the right-hand side columns `rhs`. Returns the signed determinant.
fn bareiss(a: &mut [Vec<BigInt>], rhs: &mut [Vec<BigInt>]) -> BigInt {
    let n = a.len();
    let mut prev = BigInt::one();
    let mut negate = false;
    for k in 0..n {
        let Some(p) = (k..n).find(|&i| !a[i][k].is_zero()) else {
            return BigInt::zero();
        };
        if p != k {
            a.swap(p, k);
            rhs.swap(p, k);
            negate = !negate;
        }
        let (head, tail) = a.split_at_mut(k + 1);
        let (rhead, rtail) = rhs.split_at_mut(k + 1);
        let pivot_row = &head[k];
        let pivot = &pivot_row[k];
        for (row, rrow) in tail.iter_mut().zip(rtail.iter_mut()) {
            let f = std::mem::take(&mut row[k]);
            for j in k + 1..n {
                let mut v = &row[j] * pivot;
                if !f.is_zero() {
                    v -= &f * &pivot_row[j];
                }
                row[j] = v / &prev;
            }
            for (j, x) in rrow.iter_mut().enumerate() {
                let mut v = &*x * pivot;
                if !f.is_zero() {
                    v -= &f * &rhead[k][j];
                }
                *x = v / &prev;
            }
        }
        prev = pivot.clone();
    }
    if negate {
        -prev
    } else {
        prev
    }
}

/// Exact determinant by fraction-free elimination.
pub fn determinant(m: &[Vec<BigInt>]) -> BigInt {
    if m.is_empty() {
        return BigInt::one();
    }
    let mut a = m.to_vec();
    bareiss(&mut a, &mut vec![Vec::new(); m.len()])
}

/// Leading principal minors `det(m[..k][..k])` for `k = 1..=n`.
///
/// One unpivoted pass yields all of them as successive pivots. If a minor
/// vanishes the pass cannot continue and the remaining minors are computed
/// individually with pivoting.
pub fn leading_minors(m: &[Vec<BigInt>]) -> Vec<BigInt> {
    let n = m.len();
    let mut a = m.to_vec();
    let mut out = Vec::with_capacity(n);
    let mut prev = BigInt::one();
    for k in 0..n {
        if a[k][k].is_zero() {
            for size in k + 1..=n {
                let sub: Vec<Vec<BigInt>> = m[..size].iter().map(|r| r[..size].to_vec()).collect();
                out.push(determinant(&sub));
            }
            return out;
        }
        out.push(a[k][k].clone());
        let (head, tail) = a.split_at_mut(k + 1);
        let pivot_row = &head[k];
        for row in tail.iter_mut() {
            let f = std::mem::take(&mut row[k]);
            for j in k + 1..n {
                let mut v = &row[j] * &pivot_row[k];
                if !f.is_zero() {
                    v -= &f * &pivot_row[j];
                }
                row[j] = v / &prev;
            }
        }
        prev = a[k][k].clone();
    }
    out
}

/// `adj(m) * b`, i.e. `det(m) * m^{-1} b`, with exact integer arithmetic.
/// Returns `(det, x)`; `x` is meaningless when `det = 0`.
pub fn adjugate_solve(m: &[Vec<BigInt>], b: &[BigInt]) -> (BigInt, Vec<BigInt>) {
    let n = m.len();
    let mut a = m.to_vec();
    let mut rhs: Vec<Vec<BigInt>> = b.iter().map(|x| vec![x.clone()]).collect();
    let det = bareiss(&mut a, &mut rhs);
    if det.is_zero() {
        return (det, Vec::new());
    }
    // After elimination a[n-1][n-1] = +-det; back-substitute for u_nn * x.
    let unn = a[n - 1][n - 1].clone();
    let mut x = vec![BigInt::zero(); n];
    for i in (0..n).rev() {
        let mut acc = &unn * &rhs[i][0];
        for j in i + 1..n {
            acc -= &a[i][j] * &x[j];
        }
        let (q, r) = acc.div_rem(&a[i][i]);
        assert!(r.is_zero(), "fraction-free back-substitution must divide exactly");
        x[i] = q;
    }
    if unn != det {
        for v in &mut x {
            *v = -&*v;
        }
    }
    (det, x)
}

/// `det H_k`.
pub fn hankel_det(prefix: &SeriesPrefix, k: usize) -> Result<BigInt> {
    Ok(determinant(HankelMatrix::new(prefix, k)?.entries()))
}

/// `det H_1, ..., det H_K` from a single elimination of `H_K`.
pub fn hankel_dets_upto(prefix: &SeriesPrefix, k_max: usize) -> Result<Vec<BigInt>> {
    Ok(leading_minors(HankelMatrix::new(prefix, k_max)?.entries()))
}

/// CSV table `k,det_H_k` for `k = 1..`.
pub fn det_table_csv(dets: &[BigInt]) -> String {
    let rows: Vec<Vec<String>> = dets
        .iter()
        .enumerate()
        .map(|(i, d)| vec![(i + 1).to_string(), d.to_string()])
        .collect();
    crate::report::to_csv(&["k", "det_H_k"], &rows)
}

/// `max_{n <= N} |c_n|`, written `||c_N||` below.
fn sup(prefix: &SeriesPrefix, n: usize) -> BigInt {
    prefix.sup_norm(n)
}

/// Integer convergent `p~_k / q~_k` with `q~_k = sum_i Delta_{k+1,i+1} z^i`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IntegerConvergent {
    pub k: usize,
    #[serde(serialize_with = "ser_int_poly")]
    pub p_tilde: IntPoly,
    #[serde(serialize_with = "ser_int_poly")]
    pub q_tilde: IntPoly,
    #[serde(serialize_with = "ser_int")]
    pub det_h: BigInt,
    #[serde(serialize_with = "ser_int")]
    pub h_p: BigInt,
    #[serde(serialize_with = "ser_int")]
    pub h_q: BigInt,
}

fn ser_int_poly<S: serde::Serializer>(p: &IntPoly, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(p.coeffs().len()))?;
    for c in p.coeffs() {
        seq.serialize_element(&c.to_string())?;
    }
    seq.end()
}

impl IntegerConvergent {
    /// `a_{k,k}`, the leading coefficient of `q~_k`.
    pub fn leading_q(&self) -> &BigInt {
        self.q_tilde.leading().expect("q~ is nonzero")
    }
}

/// Nonnegative-power part of `q(z) g(z)`: `b_i = sum_{j>i} a_j c_{j-i}`.
pub fn polynomial_part(prefix: &SeriesPrefix, q: &IntPoly) -> Result<IntPoly> {
    let dq = q.degree().unwrap_or(0);
    prefix.require(dq)?;
    let a = q.coeffs();
    Ok(IntPoly::new(
        (0..dq)
            .map(|i| (i + 1..=dq).map(|j| &a[j] * prefix.get(j - i)).sum())
            .collect(),
    ))
}

/// Coefficient of `z^-i` in `q(z) g(z)`: `sum_j a_j c_{i+j}`.
pub fn residual_coefficient(prefix: &SeriesPrefix, q: &IntPoly, i: usize) -> BigInt {
    q.coeffs()
        .iter()
        .enumerate()
        .filter(|(_, a)| !a.is_zero())
        .map(|(j, a)| a * prefix.get(i + j))
        .sum()
}

/// Builds `(p~_k, q~_k)` and asserts `||q~ g - p~|| = -(k+1)`, the Hadamard
/// bound on `det H_{k+1}` and both exact height bounds.
pub fn integer_convergent(prefix: &SeriesPrefix, k: usize) -> Result<IntegerConvergent> {
    prefix.require(2 * k + 1)?;
    let h = HankelMatrix::new(prefix, k + 1)?;
    let mut e = vec![BigInt::zero(); k + 1];
    e[k] = BigInt::one();
    let (det_h, a) = adjugate_solve(h.entries(), &e);
    if det_h.is_zero() {
        return Err(Error::SingularHankel { size: k + 1 });
    }
    let q_tilde = IntPoly::new(a);
    if q_tilde.degree() != Some(k) {
        return Err(Error::CertificateFailed(format!("deg q~_{k} != {k}")));
    }
    let p_tilde = polynomial_part(prefix, &q_tilde)?;
    for i in 1..=k {
        if !residual_coefficient(prefix, &q_tilde, i).is_zero() {
            return Err(Error::CertificateFailed(format!(
                "coefficient of z^-{i} in q~_{k} g - p~_{k} is nonzero"
            )));
        }
    }
    if residual_coefficient(prefix, &q_tilde, k + 1) != det_h {
        return Err(Error::CertificateFailed(format!(
            "alpha_({k},{}) != det H_{}",
            k + 1,
            k + 1
        )));
    }
    let conv = IntegerConvergent {
        k,
        h_p: p_tilde.height(),
        h_q: q_tilde.height(),
        p_tilde,
        q_tilde,
        det_h,
    };
    let exact = exact_height_checks(prefix, &conv);
    if !exact.all() {
        return Err(Error::CertificateFailed(format!(
            "height bound failed for k = {k}: {exact:?}"
        )));
    }
    Ok(conv)
}

/// Exact integer comparisons, squared to avoid the half-integer powers.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ExactHeightChecks {
    /// `|det H_{k+1}| <= (||c_{2k+1}||^2 (k+1))^{(k+1)/2}`
    pub hadamard: bool,
    /// `h(q~) <= (||c_{2k+1}||^2 k)^{k/2}`
    pub h_q: bool,
    /// `h(p~) <= ||c_{2k+1}||^{k+1} k^{(k+2)/2}`
    pub h_p: bool,
}

impl ExactHeightChecks {
    pub fn all(&self) -> bool {
        self.hadamard && self.h_q && self.h_p
    }
}

pub fn exact_height_checks(prefix: &SeriesPrefix, conv: &IntegerConvergent) -> ExactHeightChecks {
    let k = conv.k;
    let m2 = {
        let m = sup(prefix, 2 * k + 1);
        &m * &m
    };
    let kk = BigInt::from(k);
    let k1 = BigInt::from(k + 1);
    let sq = |x: &BigInt| x * x;
    ExactHeightChecks {
        hadamard: sq(&conv.det_h) <= num_traits::pow(&m2 * &k1, k + 1),
        h_q: sq(&conv.h_q) <= num_traits::pow(&m2 * &kk, k),
        h_p: sq(&conv.h_p) <= num_traits::pow(m2, k + 1) * num_traits::pow(kk, k + 2),
    }
}

/// Result of an inequality that may need transcendental bounds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Undecidable,
}

impl Verdict {
    pub fn from_certificate(c: Option<bool>) -> Self {
        match c {
            Some(true) => Verdict::Pass,
            Some(false) => Verdict::Fail,
            None => Verdict::Undecidable,
        }
    }

    pub fn passed(self) -> bool {
        self == Verdict::Pass
    }
}

/// `log_d x` as an interval.
pub(crate) fn log_base(d: u32, x: &Interval, prec: u32) -> Interval {
    if d == 2 {
        return x.log2(prec);
    }
    &x.log2(prec) / &Interval::from_int(d).log2(prec)
}

/// `log2 |x|` for a nonzero integer.
fn log2_abs(x: &BigInt, prec: u32) -> Interval {
    Interval::exact(BigRational::from_integer(x.abs())).log2(prec)
}

fn nat(n: usize) -> Interval {
    Interval::from_int(n as u64)
}

/// `log2` of the right-hand sides of the `||u||`-forms of the height bounds.
/// `None` when `||u|| = 0`, where both sides are compared exactly instead.
fn u_exponent(spec: &MahlerSpec, count: &Interval, prec: u32) -> Option<Interval> {
    match spec.u_norm() {
        0 => None,
        1 => Some(Interval::from_int(0)),
        u => Some(count * &Interval::from_int(u).log2(prec)),
    }
}

/// Checks of the bounds written with `||u||` instead of `||c_N||`, decided in
/// the `log2` domain with outward rounding.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct UHeightChecks {
    /// `h(q~) <= ||u||^{k(log_d(2k+1)+1)} k^{k/2}`
    pub h_q: Verdict,
    /// `h(p~) <= ||u||^{(k+1)(log_d(2k+1)+1)} k^{(k+2)/2}`
    pub h_p: Verdict,
}

pub fn u_height_checks(spec: &MahlerSpec, conv: &IntegerConvergent, prec: u32) -> UHeightChecks {
    let k = conv.k;
    let ld = &log_base(spec.d(), &nat(2 * k + 1), prec) + &Interval::from_int(1);
    let log_k = if k == 0 { Interval::from_int(0) } else { nat(k).log2(prec) };
    let half = Interval::exact(BigRational::new(1.into(), 2.into()));
    let check = |h: &BigInt, u_count: Interval, k_pow: Interval| -> Verdict {
        if h.is_zero() {
            return Verdict::Pass;
        }
        let Some(ue) = u_exponent(spec, &u_count, prec) else {
            // ||u|| = 0 makes the right side 0 (or 1 when the exponent is 0).
            return Verdict::from_certificate(Some(u_count.hi().is_zero() && h.is_one()));
        };
        let rhs = &ue + &(&k_pow * &log_k);
        Verdict::from_certificate(log2_abs(h, prec).certify_le(&rhs))
    };
    UHeightChecks {
        h_q: check(&conv.h_q, &nat(k) * &ld, &nat(k) * &half),
        h_p: check(&conv.h_p, &nat(k + 1) * &ld, &nat(k + 2) * &half),
    }
}

/// `alpha_{k,k+1}, ..., alpha_{k,M}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AlphaTail {
    pub k: usize,
    pub m: usize,
    #[serde(serialize_with = "ser_int_vec")]
    pub alphas: Vec<BigInt>,
}

fn ser_int_vec<S: serde::Serializer>(v: &[BigInt], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|x| x.to_string()))
}

impl AlphaTail {
    /// `alpha_{k,i}` for `k < i <= M`.
    pub fn get(&self, i: usize) -> &BigInt {
        &self.alphas[i - self.k - 1]
    }
}

/// Coefficient bound on a single `alpha_{k,i}`:
/// `|alpha| <= (k+1) ||c_{k+i}|| (||c_{2k+1}||^2 k)^{k/2}`, squared.
pub fn alpha_bound_holds(prefix: &SeriesPrefix, k: usize, i: usize, alpha: &BigInt) -> bool {
    let m = sup(prefix, 2 * k + 1);
    let ci = sup(prefix, k + i);
    let k1 = BigInt::from(k + 1);
    let rhs = &k1 * &k1 * &ci * &ci * num_traits::pow(&m * &m * BigInt::from(k), k);
    alpha * alpha <= rhs
}

/// The same bound with `||u||` powers, in the `log2` domain.
pub fn alpha_u_bound(spec: &MahlerSpec, k: usize, i: usize, alpha: &BigInt, prec: u32) -> Verdict {
    if alpha.is_zero() {
        return Verdict::Pass;
    }
    let ld_ki = &log_base(spec.d(), &nat(k + i), prec) + &Interval::from_int(1);
    let ld_2k = &log_base(spec.d(), &nat(2 * k + 1), prec) + &Interval::from_int(1);
    let count = &ld_ki + &(&nat(k) * &ld_2k);
    let Some(ue) = u_exponent(spec, &count, prec) else {
        return Verdict::Fail;
    };
    let log_k = if k == 0 { Interval::from_int(0) } else { nat(k).log2(prec) };
    let half_k = Interval::exact(BigRational::new(BigInt::from(k), 2.into()));
    let rhs = &(&nat(k + 1).log2(prec) + &ue) + &(&half_k * &log_k);
    Verdict::from_certificate(log2_abs(alpha, prec).certify_le(&rhs))
}

/// Exact convolution of `q~_k` with the series tail, asserting
/// `alpha_{k,k+1} = det H_{k+1}` and the coefficient bound for every `i`.
pub fn alpha_coefficients(prefix: &SeriesPrefix, conv: &IntegerConvergent, m: usize) -> Result<AlphaTail> {
    let k = conv.k;
    if m <= k {
        return Err(Error::Precondition(format!("M = {m} must exceed k = {k}")));
    }
    prefix.require(k + m)?;
    let alphas: Vec<BigInt> = (k + 1..=m)
        .map(|i| residual_coefficient(prefix, &conv.q_tilde, i))
        .collect();
    if alphas[0] != conv.det_h {
        return Err(Error::CertificateFailed(format!(
            "alpha_({k},{}) = {} but det H_{} = {}",
            k + 1,
            alphas[0],
            k + 1,
            conv.det_h
        )));
    }
    for (off, a) in alphas.iter().enumerate() {
        let i = k + 1 + off;
        if !alpha_bound_holds(prefix, k, i, a) {
            return Err(Error::CertificateFailed(format!(
                "|alpha_({k},{i})| exceeds its bound"
            )));
        }
    }
    Ok(AlphaTail { k, m, alphas })
}

/// All height and coefficient checks for one `k`, as reported by the CLI.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct HeightReport {
    pub k: usize,
    #[serde(serialize_with = "ser_int")]
    pub det_h: BigInt,
    pub exact: ExactHeightChecks,
    pub u_forms: UHeightChecks,
    pub alpha_exact: bool,
    pub alpha_u_form: Verdict,
}

impl HeightReport {
    pub fn passed(&self) -> bool {
        self.exact.all()
            && self.u_forms.h_q.passed()
            && self.u_forms.h_p.passed()
            && self.alpha_exact
            && self.alpha_u_form.passed()
    }
}

/// Runs every bound for `conv`, using `alpha_{k,i}` for `k < i <= m`.
pub fn height_report(
    spec: &MahlerSpec,
    prefix: &SeriesPrefix,
    conv: &IntegerConvergent,
    m: usize,
    prec: u32,
) -> Result<HeightReport> {
    let k = conv.k;
    prefix.require(k + m)?;
    let mut alpha_exact = true;
    let mut alpha_u = Verdict::Pass;
    for i in k + 1..=m {
        let a = residual_coefficient(prefix, &conv.q_tilde, i);
        alpha_exact &= alpha_bound_holds(prefix, k, i, &a);
        match alpha_u_bound(spec, k, i, &a, prec) {
            Verdict::Pass => {}
            Verdict::Fail => alpha_u = Verdict::Fail,
            Verdict::Undecidable if alpha_u == Verdict::Pass => alpha_u = Verdict::Undecidable,
            Verdict::Undecidable => {}
        }
    }
    Ok(HeightReport {
        k,
        det_h: conv.det_h.clone(),
        exact: exact_height_checks(prefix, conv),
        u_forms: u_height_checks(spec, conv, prec),
        alpha_exact,
        alpha_u_form: alpha_u,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cf::{continued_fraction, convergents_from_cf};
    use crate::interval::DEFAULT_PREC;
    use crate::series::prefix;
    use proptest::prelude::*;

    fn ip(c: &[i64]) -> IntPoly {
        IntPoly::new(c.iter().map(|&x| BigInt::from(x)).collect())
    }

    /// Independent determinant: Gaussian elimination over the rationals.
    fn rational_det(m: &[Vec<BigInt>]) -> BigInt {
        let n = m.len();
        let mut a: Vec<Vec<BigRational>> = m
            .iter()
            .map(|r| r.iter().map(|x| BigRational::from_integer(x.clone())).collect())
            .collect();
        let mut det = BigRational::one();
        for k in 0..n {
            let Some(p) = (k..n).find(|&i| !a[i][k].is_zero()) else {
                return BigInt::zero();
            };
            if p != k {
                a.swap(p, k);
                det = -det;
            }
            det *= &a[k][k];
            for i in k + 1..n {
                let f = &a[i][k] / &a[k][k];
                for j in k..n {
                    let t = &f * &a[k][j];
                    a[i][j] -= t;
                }
            }
        }
        assert!(det.is_integer());
        det.to_integer()
    }

    /// Cofactors of the last row, each from its own minor.
    fn cofactor_oracle(m: &[Vec<BigInt>]) -> Vec<BigInt> {
        let n = m.len();
        (0..n)
            .map(|col| {
                let minor: Vec<Vec<BigInt>> = m[..n - 1]
                    .iter()
                    .map(|r| r.iter().enumerate().filter(|(j, _)| *j != col).map(|(_, x)| x.clone()).collect())
                    .collect();
                let d = rational_det(&minor);
                if (n - 1 + col) % 2 == 0 {
                    d
                } else {
                    -d
                }
            })
            .collect()
    }

    #[test]
    fn small_determinants() {
        let p = prefix(&MahlerSpec::thue_morse(), 100).unwrap();
        assert_eq!(hankel_det(&p, 1).unwrap(), BigInt::from(1));
        assert_eq!(hankel_det(&p, 2).unwrap(), BigInt::from(-2));
        let dets = hankel_dets_upto(&p, 40).unwrap();
        assert!(dets.iter().all(|d| !d.is_zero()));
        for (k, d) in dets.iter().enumerate().take(12) {
            assert_eq!(d, &rational_det(HankelMatrix::new(&p, k + 1).unwrap().entries()));
        }
        assert!(matches!(hankel_det(&p, 51), Err(Error::PrecisionTooShort { .. })));
    }

    #[test]
    fn leading_minors_past_a_zero() {
        let m: Vec<Vec<BigInt>> = [[0, 1, 2], [1, 0, 3], [2, 3, 1]]
            .iter()
            .map(|r| r.iter().map(|&x| BigInt::from(x)).collect())
            .collect();
        let lm = leading_minors(&m);
        assert_eq!(lm, vec![BigInt::from(0), BigInt::from(-1), rational_det(&m)]);
    }

    #[test]
    fn thue_morse_first_integer_convergent() {
        let p = prefix(&MahlerSpec::thue_morse(), 20).unwrap();
        let c = integer_convergent(&p, 1).unwrap();
        assert_eq!(c.q_tilde, ip(&[1, 1]));
        assert_eq!(c.p_tilde, ip(&[1]));
        assert_eq!(c.det_h, BigInt::from(-2));
        let t = alpha_coefficients(&p, &c, 2).unwrap();
        assert_eq!(t.alphas, vec![BigInt::from(-2)]);
    }

    #[test]
    fn degenerate_is_singular() {
        let p = prefix(&MahlerSpec::new(2, vec![0]).unwrap(), 20).unwrap();
        assert_eq!(
            integer_convergent(&p, 1).unwrap_err(),
            Error::SingularHankel { size: 2 }
        );
    }

    #[test]
    fn alpha_tail_within_bounds() {
        let s = MahlerSpec::thue_morse();
        let p = prefix(&s, 40).unwrap();
        let c = integer_convergent(&p, 5).unwrap();
        let t = alpha_coefficients(&p, &c, 30).unwrap();
        assert_eq!(t.alphas.len(), 25);
        assert_eq!(t.get(6), &c.det_h);
        let r = height_report(&s, &p, &c, 30, DEFAULT_PREC).unwrap();
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn proportional_to_euclidean_convergents() {
        let p = prefix(&MahlerSpec::thue_morse(), 130).unwrap();
        let cf = continued_fraction(&p, 60).unwrap();
        let conv = convergents_from_cf(&cf.quotients);
        for k in 1..=60 {
            let ic = integer_convergent(&p, k).unwrap();
            assert!(conv[k].is_proportional(&ic.p_tilde, &ic.q_tilde), "k = {k}");
        }
    }

    #[test]
    fn det_csv() {
        let s = det_table_csv(&[BigInt::from(1), BigInt::from(-2)]);
        assert_eq!(s, "k,det_H_k\n1,1\n2,-2\n");
    }

    fn small_matrix() -> impl Strategy<Value = Vec<Vec<BigInt>>> {
        (1usize..6).prop_flat_map(|n| {
            prop::collection::vec(prop::collection::vec(-9i64..10, n), n)
                .prop_map(|m| m.into_iter().map(|r| r.into_iter().map(BigInt::from).collect()).collect())
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn bareiss_matches_rational_elimination(m in small_matrix()) {
            prop_assert_eq!(determinant(&m), rational_det(&m));
            let lm = leading_minors(&m);
            for (k, d) in lm.iter().enumerate() {
                let sub: Vec<Vec<BigInt>> = m[..=k].iter().map(|r| r[..=k].to_vec()).collect();
                prop_assert_eq!(d, &rational_det(&sub));
            }
        }

        #[test]
        fn adjugate_column_matches_cofactors(m in small_matrix()) {
            let n = m.len();
            let mut e = vec![BigInt::zero(); n];
            e[n - 1] = BigInt::one();
            let (det, x) = adjugate_solve(&m, &e);
            prop_assume!(!det.is_zero());
            prop_assert_eq!(x, cofactor_oracle(&m));
        }

        #[test]
        fn generated_hankel_convergents(u in -4i64..5, k in 1usize..12) {
            let s = MahlerSpec::new(2, vec![u]).unwrap();
            let p = prefix(&s, 2 * k + 2).unwrap();
            match integer_convergent(&p, k) {
                Ok(c) => {
                    let h = HankelMatrix::new(&p, k + 1).unwrap();
                    let oracle = cofactor_oracle(h.entries());
                    prop_assert_eq!(&c.q_tilde, &IntPoly::new(oracle));
                    prop_assert_eq!(residual_coefficient(&p, &c.q_tilde, k + 1), c.det_h);
                }
                Err(Error::SingularHankel { .. }) => {
                    prop_assert!(hankel_det(&p, k + 1).unwrap().is_zero());
                }
                Err(e) => prop_assert!(false, "{e}"),
            }
        }
    }
}
