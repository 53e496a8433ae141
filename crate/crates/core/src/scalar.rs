//! Scalar kinds used by the series layer.
//!
//! The symbolic pipeline runs over exact rationals; the numeric side
//! (holonomy generators, periods) instantiates the same one-variable code
//! with double-precision complex numbers.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Pow, Signed, ToPrimitive, Zero};

/// Exact rational scalar.
pub type Q = BigRational;

/// Field operations shared by every scalar kind.
pub trait Scalar:
    Clone
    + fmt::Debug
    + PartialEq
    + Send
    + Sync
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_i64(n: i64) -> Self;
    fn from_q(q: &Q) -> Self;
    fn to_c64(&self) -> Complex64;
    /// `exp(self)` when the result is representable in this scalar kind.
    fn try_exp(&self) -> Option<Self>;
    /// Magnitude used for tolerance decisions.
    fn magnitude(&self) -> f64;
    /// Zero test used by rank and normal-form decisions. Exact for
    /// rationals, absolute tolerance for floats.
    fn is_negligible(&self, tol: f64) -> bool;
    /// Human-readable rendering for reports.
    fn render(&self) -> String;
    /// The `k`-th root with smallest nonnegative argument, when it exists
    /// in this scalar kind.
    fn principal_root(&self, k: u32) -> Option<Self>;
    /// A rational equal (or numerically close, denominator at most
    /// `max_den`) to this value.
    fn rational_hint(&self, max_den: i64, tol: f64) -> Option<Q>;
}

impl Scalar for Q {
    fn from_i64(n: i64) -> Self {
        Q::from_integer(BigInt::from(n))
    }
    fn from_q(q: &Q) -> Self {
        q.clone()
    }
    fn to_c64(&self) -> Complex64 {
        Complex64::new(q_to_f64(self), 0.0)
    }
    fn try_exp(&self) -> Option<Self> {
        if self.is_zero() {
            Some(Q::one())
        } else {
            None
        }
    }
    fn magnitude(&self) -> f64 {
        q_to_f64(&self.abs())
    }
    fn is_negligible(&self, _tol: f64) -> bool {
        self.is_zero()
    }
    fn render(&self) -> String {
        q_string(self)
    }
    fn principal_root(&self, k: u32) -> Option<Self> {
        if k == 1 || self.is_zero() {
            return Some(self.clone());
        }
        if self.is_negative() {
            return None;
        }
        let n = self.numer().nth_root(k);
        let d = self.denom().nth_root(k);
        let r = Q::new(n, d);
        (Pow::pow(&r, k) == *self).then_some(r)
    }
    fn rational_hint(&self, _max_den: i64, _tol: f64) -> Option<Q> {
        Some(self.clone())
    }
}

impl Scalar for Complex64 {
    fn from_i64(n: i64) -> Self {
        Complex64::new(n as f64, 0.0)
    }
    fn from_q(q: &Q) -> Self {
        Complex64::new(q_to_f64(q), 0.0)
    }
    fn to_c64(&self) -> Complex64 {
        *self
    }
    fn try_exp(&self) -> Option<Self> {
        Some(self.exp())
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
    fn is_negligible(&self, tol: f64) -> bool {
        self.norm() <= tol
    }
    fn render(&self) -> String {
        match (self.re == 0.0, self.im == 0.0) {
            (_, true) => format!("{}", self.re),
            (true, false) => format!("{}i", self.im),
            _ if self.im < 0.0 => format!("({} - {}i)", self.re, -self.im),
            _ => format!("({} + {}i)", self.re, self.im),
        }
    }
    fn principal_root(&self, k: u32) -> Option<Self> {
        if k == 0 {
            return None;
        }
        let mut arg = self.arg();
        if arg < 0.0 {
            arg += std::f64::consts::TAU;
        }
        Some(Complex64::from_polar(self.norm().powf(1.0 / k as f64), arg / k as f64))
    }
    fn rational_hint(&self, max_den: i64, tol: f64) -> Option<Q> {
        if self.im.abs() > tol {
            return None;
        }
        let (p, d) = rational_approx(self.re, max_den, tol)?;
        Some(q(p, d))
    }
}

/// Best continued-fraction convergent `p/d` of `x` with `d <= max_den`
/// and `|x - p/d| <= tol`.
pub fn rational_approx(x: f64, max_den: i64, tol: f64) -> Option<(i64, i64)> {
    if !x.is_finite() {
        return None;
    }
    let (mut p0, mut q0, mut p1, mut q1) = (0i64, 1i64, 1i64, 0i64);
    let mut r = x;
    for _ in 0..64 {
        let a = r.floor();
        if a.abs() > 1e15 {
            break;
        }
        let a = a as i64;
        let (p2, q2) = (a.checked_mul(p1)?.checked_add(p0)?, a.checked_mul(q1)?.checked_add(q0)?);
        if q2 > max_den {
            break;
        }
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
        if (x - p1 as f64 / q1 as f64).abs() <= tol {
            return Some((p1, q1));
        }
        let frac = r - a as f64;
        if frac.abs() < 1e-300 {
            break;
        }
        r = 1.0 / frac;
    }
    None
}

/// Rational from an integer pair. Panics on a zero denominator.
pub fn q(num: i64, den: i64) -> Q {
    Q::new(BigInt::from(num), BigInt::from(den))
}

pub fn qi(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn q_to_f64(x: &Q) -> f64 {
    match (x.numer().to_f64(), x.denom().to_f64()) {
        (Some(n), Some(d)) if n.is_finite() && d.is_finite() => n / d,
        _ => {
            // Very large numerator/denominator: scale down by bit length first.
            let shift = x.numer().bits().max(x.denom().bits()).saturating_sub(900) as usize;
            let n = (x.numer() >> shift).to_f64().unwrap_or(f64::NAN);
            let d = (x.denom() >> shift).to_f64().unwrap_or(f64::NAN);
            n / d
        }
    }
}

/// `p/q` rendering used by the structured reports.
pub fn q_string(x: &Q) -> String {
    if x.denom().is_one() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}
