//! Dense univariate polynomials with exact coefficients, lowest power first.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Polynomial<T> {
    coeffs: Vec<T>,
}

pub type IntPoly = Polynomial<BigInt>;
pub type RatPoly = Polynomial<BigRational>;

impl<T: Clone + Zero> Polynomial<T> {
    /// Builds a polynomial from coefficients `c[i]` of `z^i`, trimming zero leading terms.
    pub fn new(mut coeffs: Vec<T>) -> Self {
        while coeffs.last().is_some_and(Zero::is_zero) {
            coeffs.pop();
        }
        Polynomial { coeffs }
    }

    pub fn zero() -> Self {
        Polynomial { coeffs: Vec::new() }
    }

    pub fn constant(c: T) -> Self {
        Self::new(vec![c])
    }

    pub fn monomial(c: T, degree: usize) -> Self {
        let mut coeffs = vec![T::zero(); degree + 1];
        coeffs[degree] = c;
        Self::new(coeffs)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<T> {
        self.coeffs
    }

    pub fn coeff(&self, i: usize) -> T {
        self.coeffs.get(i).cloned().unwrap_or_else(T::zero)
    }

    pub fn leading(&self) -> Option<&T> {
        self.coeffs.last()
    }

    /// `p(z^e)`.
    pub fn substitute_power(&self, e: usize) -> Self {
        assert!(e >= 1, "substitution exponent must be positive");
        if self.is_zero() {
            return Self::zero();
        }
        let mut out = vec![T::zero(); (self.coeffs.len() - 1) * e + 1];
        for (i, c) in self.coeffs.iter().enumerate() {
            out[i * e] = c.clone();
        }
        Polynomial { coeffs: out }
    }

    pub fn map<U: Clone + Zero>(&self, f: impl Fn(&T) -> U) -> Polynomial<U> {
        Polynomial::new(self.coeffs.iter().map(f).collect())
    }
}

impl<T> Polynomial<T>
where
    T: Clone + Zero + for<'a> Mul<&'a T, Output = T> + for<'a> Add<&'a T, Output = T>,
{
    /// Horner evaluation.
    pub fn eval(&self, x: &T) -> T {
        self.coeffs
            .iter()
            .rev()
            .fold(T::zero(), |acc, c| acc * x + c)
    }

    pub fn scale(&self, s: &T) -> Self {
        Self::new(self.coeffs.iter().map(|c| c.clone() * s).collect())
    }
}

impl IntPoly {
    /// Height: maximum absolute value of the coefficients.
    pub fn height(&self) -> BigInt {
        self.coeffs
            .iter()
            .map(|c| c.abs())
            .max()
            .unwrap_or_else(BigInt::zero)
    }

    pub fn content(&self) -> BigInt {
        self.coeffs
            .iter()
            .fold(BigInt::zero(), |g, c| g.gcd(c))
    }

    pub fn to_rational(&self) -> RatPoly {
        self.map(|c| BigRational::from_integer(c.clone()))
    }

    /// Exact division of every coefficient by `s`.
    pub fn div_exact(&self, s: &BigInt) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .map(|c| {
                    debug_assert!((c % s).is_zero());
                    c / s
                })
                .collect(),
        )
    }
}

impl RatPoly {
    /// Least common multiple of all coefficient denominators.
    pub fn denominator_lcm(&self) -> BigInt {
        self.coeffs
            .iter()
            .fold(BigInt::one(), |l, c| l.lcm(c.denom()))
    }

    /// Multiplies through by `s` and returns the integer polynomial; panics if
    /// some coefficient is not integral afterwards.
    pub fn scale_to_integer(&self, s: &BigInt) -> IntPoly {
        IntPoly::new(
            self.coeffs
                .iter()
                .map(|c| {
                    let v = c * BigRational::from_integer(s.clone());
                    assert!(v.is_integer(), "scale does not clear denominators");
                    v.to_integer()
                })
                .collect(),
        )
    }
}

fn zip_with<T: Clone + Zero>(
    a: &[T],
    b: &[T],
    f: impl Fn(&T, &T) -> T,
) -> Vec<T> {
    let n = a.len().max(b.len());
    let zero = T::zero();
    (0..n)
        .map(|i| f(a.get(i).unwrap_or(&zero), b.get(i).unwrap_or(&zero)))
        .collect()
}

impl<T> Add for &Polynomial<T>
where
    T: Clone + Zero,
    for<'b> &'b T: Add<&'b T, Output = T>,
{
    type Output = Polynomial<T>;
    fn add(self, rhs: Self) -> Polynomial<T> {
        Polynomial::new(zip_with(&self.coeffs, &rhs.coeffs, |x, y| x + y))
    }
}

impl<T> Sub for &Polynomial<T>
where
    T: Clone + Zero,
    for<'b> &'b T: Sub<&'b T, Output = T>,
{
    type Output = Polynomial<T>;
    fn sub(self, rhs: Self) -> Polynomial<T> {
        Polynomial::new(zip_with(&self.coeffs, &rhs.coeffs, |x, y| x - y))
    }
}

impl<T> Neg for &Polynomial<T>
where
    T: Clone + Zero,
    for<'b> &'b T: Neg<Output = T>,
{
    type Output = Polynomial<T>;
    fn neg(self) -> Polynomial<T> {
        Polynomial::new(self.coeffs.iter().map(|c| -c).collect())
    }
}

impl<T> Mul for &Polynomial<T>
where
    T: Clone + Zero,
    for<'b> &'b T: Mul<&'b T, Output = T>,
{
    type Output = Polynomial<T>;
    fn mul(self, rhs: Self) -> Polynomial<T> {
        if self.is_zero() || rhs.is_zero() {
            return Polynomial::zero();
        }
        let mut out = vec![T::zero(); self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in rhs.coeffs.iter().enumerate() {
                out[i + j] = out[i + j].clone() + a * b;
            }
        }
        Polynomial::new(out)
    }
}

impl<T: fmt::Display + Zero> fmt::Display for Polynomial<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coeffs.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (i, c) in self.coeffs.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match i {
                0 => write!(f, "{c}")?,
                1 => write!(f, "({c})*z")?,
                _ => write!(f, "({c})*z^{i}")?,
            }
        }
        Ok(())
    }
}

impl<T: fmt::Display + Zero> fmt::Debug for Polynomial<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}
