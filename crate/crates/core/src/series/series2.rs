use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use num_traits::{One, Zero};
use serde::Serialize;

use super::{tadd, tsub, Series1, SeriesError, EXACT};
use crate::scalar::{q_string, Scalar, Q};

/// Quasi-homogeneous weights `(p1, p2)` of the variables `x`, `y`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Weights {
    pub p1: u32,
    pub p2: u32,
}

impl Weights {
    /// Panics on a zero weight; use [`Weights::try_new`] for user input.
    pub fn new(p1: u32, p2: u32) -> Self {
        Self::try_new(p1, p2).expect("weights must be positive")
    }

    pub fn try_new(p1: u32, p2: u32) -> Option<Self> {
        (p1 > 0 && p2 > 0).then_some(Weights { p1, p2 })
    }

    pub fn degree(&self, i: u32, j: u32) -> i64 {
        self.p1 as i64 * i as i64 + self.p2 as i64 * j as i64
    }

    /// Monomials of weighted degree exactly `m`, ascending x-exponent.
    pub fn monomials_of_degree(&self, m: i64) -> Vec<Monomial> {
        let mut out = Vec::new();
        if m < 0 {
            return out;
        }
        let (p1, p2) = (self.p1 as i64, self.p2 as i64);
        let mut i = 0i64;
        while p1 * i <= m {
            let rest = m - p1 * i;
            if rest % p2 == 0 {
                out.push(Monomial {
                    i: i as u32,
                    j: (rest / p2) as u32,
                });
            }
            i += 1;
        }
        out
    }
}

impl fmt::Display for Weights {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.p1, self.p2)
    }
}

/// Exponent pair `x^i y^j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Monomial {
    pub i: u32,
    pub j: u32,
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.i, self.j) {
            (0, 0) => write!(f, "1"),
            (i, 0) => write!(f, "{}", pw("x", i)),
            (0, j) => write!(f, "{}", pw("y", j)),
            (i, j) => write!(f, "{}*{}", pw("x", i), pw("y", j)),
        }
    }
}

fn pw(v: &str, e: u32) -> String {
    if e == 1 {
        v.to_string()
    } else {
        format!("{v}^{e}")
    }
}

// Field order gives the canonical ordering: weighted degree, then x-exponent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct Key {
    deg: i64,
    i: u32,
    j: u32,
}

/// Truncated power series in `x, y` over the rationals, truncated by
/// weighted degree.
#[derive(Clone, Debug, PartialEq)]
pub struct Series2 {
    w: Weights,
    coeffs: BTreeMap<Key, Q>,
    trunc: i64,
}

impl Series2 {
    pub fn zero(w: Weights, trunc: i64) -> Self {
        Series2 {
            w,
            coeffs: BTreeMap::new(),
            trunc,
        }
    }

    pub fn constant(w: Weights, c: Q, trunc: i64) -> Self {
        Self::monomial(w, c, 0, 0, trunc)
    }

    pub fn one(w: Weights) -> Self {
        Self::constant(w, Q::one(), EXACT)
    }

    pub fn monomial(w: Weights, c: Q, i: u32, j: u32, trunc: i64) -> Self {
        let mut s = Self::zero(w, trunc);
        s.accumulate(i, j, c);
        s
    }

    pub fn x(w: Weights) -> Self {
        Self::monomial(w, Q::one(), 1, 0, EXACT)
    }

    pub fn y(w: Weights) -> Self {
        Self::monomial(w, Q::one(), 0, 1, EXACT)
    }

    pub fn from_terms<I: IntoIterator<Item = (u32, u32, Q)>>(w: Weights, terms: I, trunc: i64) -> Self {
        let mut s = Self::zero(w, trunc);
        for (i, j, c) in terms {
            s.accumulate(i, j, c);
        }
        s
    }

    fn key(&self, i: u32, j: u32) -> Key {
        Key {
            deg: self.w.degree(i, j),
            i,
            j,
        }
    }

    fn accumulate(&mut self, i: u32, j: u32, c: Q) {
        let k = self.key(i, j);
        if k.deg > self.trunc || c.is_zero() {
            return;
        }
        let v = match self.coeffs.remove(&k) {
            Some(old) => old + c,
            None => c,
        };
        if !v.is_zero() {
            self.coeffs.insert(k, v);
        }
    }

    pub fn weights(&self) -> Weights {
        self.w
    }

    pub fn trunc(&self) -> i64 {
        self.trunc
    }

    pub fn is_exact(&self) -> bool {
        self.trunc == EXACT
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeff(&self, i: u32, j: u32) -> Q {
        self.coeffs.get(&self.key(i, j)).cloned().unwrap_or_else(Q::zero)
    }

    /// `(monomial, weighted degree, coefficient)` in canonical order.
    pub fn terms(&self) -> impl Iterator<Item = (Monomial, i64, &Q)> + '_ {
        self.coeffs.iter().map(|(k, c)| (Monomial { i: k.i, j: k.j }, k.deg, c))
    }

    /// Lowest weighted degree present.
    pub fn order(&self) -> Option<i64> {
        self.coeffs.keys().next().map(|k| k.deg)
    }

    /// Highest weighted degree present.
    pub fn max_degree(&self) -> Option<i64> {
        self.coeffs.keys().next_back().map(|k| k.deg)
    }

    pub(crate) fn val(&self) -> i64 {
        self.order().unwrap_or_else(|| tadd(self.trunc, 1))
    }

    pub fn truncated(&self, n: i64) -> Self {
        let t = n.min(self.trunc);
        Series2 {
            w: self.w,
            coeffs: self
                .coeffs
                .iter()
                .filter(|(k, _)| k.deg <= t)
                .map(|(k, c)| (*k, c.clone()))
                .collect(),
            trunc: t,
        }
    }

    /// Same coefficients (cut at `n`), truncation relabelled to `n`.
    pub fn with_trunc(&self, n: i64) -> Self {
        let mut s = self.truncated(n);
        s.trunc = n;
        s
    }

    fn check(&self, other: &Self) -> Result<(), SeriesError> {
        if self.w != other.w {
            Err(SeriesError::WeightMismatch(self.w, other.w))
        } else {
            Ok(())
        }
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self, SeriesError> {
        self.check(other)?;
        let mut out = self.truncated(self.trunc.min(other.trunc));
        for (m, _, c) in other.terms() {
            out.accumulate(m.i, m.j, c.clone());
        }
        Ok(out)
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self, SeriesError> {
        self.checked_add(&other.neg())
    }

    pub fn checked_mul(&self, other: &Self) -> Result<Self, SeriesError> {
        self.check(other)?;
        Ok(self.mul_capped(other, EXACT))
    }

    /// Panics on weight mismatch; internal code always shares weights.
    pub fn add(&self, other: &Self) -> Self {
        self.checked_add(other).expect("series weights agree")
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.checked_sub(other).expect("series weights agree")
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.checked_mul(other).expect("series weights agree")
    }

    pub fn neg(&self) -> Self {
        Series2 {
            w: self.w,
            coeffs: self.coeffs.iter().map(|(k, c)| (*k, -c.clone())).collect(),
            trunc: self.trunc,
        }
    }

    pub fn scale(&self, k: &Q) -> Self {
        if k.is_zero() {
            return Self::zero(self.w, self.trunc);
        }
        Series2 {
            w: self.w,
            coeffs: self.coeffs.iter().map(|(key, c)| (*key, c * k)).collect(),
            trunc: self.trunc,
        }
    }

    pub fn product_trunc(&self, other: &Self) -> i64 {
        self.trunc.min(other.trunc)
    }

    /// Product whose truncation follows the valuations of the factors,
    /// `min(trunc(a) + val(b), trunc(b) + val(a))`. Never smaller than the
    /// plain rule of [`Series2::mul`].
    pub fn mul_tracked(&self, other: &Self) -> Self {
        self.check(other).expect("series weights agree");
        let t = tadd(self.trunc, other.val()).min(tadd(other.trunc, self.val()));
        let mut out = Self::zero(self.w, t);
        for (ka, a) in &self.coeffs {
            if ka.deg > t {
                break;
            }
            for (kb, b) in &other.coeffs {
                if ka.deg + kb.deg > t {
                    break;
                }
                out.accumulate(ka.i + kb.i, ka.j + kb.j, a * b);
            }
        }
        out
    }

    /// Product truncated at `min(cap, rule)`.
    pub fn mul_capped(&self, other: &Self, cap: i64) -> Self {
        let t = self.product_trunc(other).min(cap);
        let mut out = Self::zero(self.w, t);
        for (ka, a) in &self.coeffs {
            if ka.deg > t {
                break;
            }
            for (kb, b) in &other.coeffs {
                if ka.deg + kb.deg > t {
                    break;
                }
                out.accumulate(ka.i + kb.i, ka.j + kb.j, a * b);
            }
        }
        out
    }

    /// Product with an exact weighted-homogeneous polynomial `p` of degree
    /// `e`; every coefficient of degree `<= trunc + e` is known.
    pub fn mul_homogeneous(&self, p: &Self) -> Self {
        debug_assert!(p.is_exact() && (p.is_zero() || p.is_homogeneous()));
        let e = p.order().unwrap_or(0);
        let mut out = Self::zero(self.w, tadd(self.trunc, e));
        for (ka, a) in &self.coeffs {
            for (kb, b) in &p.coeffs {
                out.accumulate(ka.i + kb.i, ka.j + kb.j, a * b);
            }
        }
        out
    }

    pub fn partial_x(&self) -> Self {
        let mut out = Self::zero(self.w, tsub(self.trunc, self.w.p1 as i64));
        for (k, c) in &self.coeffs {
            if k.i > 0 {
                out.accumulate(k.i - 1, k.j, c * Q::from_i64(k.i as i64));
            }
        }
        out
    }

    pub fn partial_y(&self) -> Self {
        let mut out = Self::zero(self.w, tsub(self.trunc, self.w.p2 as i64));
        for (k, c) in &self.coeffs {
            if k.j > 0 {
                out.accumulate(k.i, k.j - 1, c * Q::from_i64(k.j as i64));
            }
        }
        out
    }

    /// `R(f)` for the radial field `R = p1 x d/dx + p2 y d/dy`.
    pub fn euler(&self) -> Self {
        Series2 {
            w: self.w,
            coeffs: self
                .coeffs
                .iter()
                .filter(|(k, _)| k.deg != 0)
                .map(|(k, c)| (*k, c * Q::from_i64(k.deg)))
                .collect(),
            trunc: self.trunc,
        }
    }

    /// Weighted-homogeneous component of degree `m`, as an exact polynomial.
    pub fn homogeneous_part(&self, m: i64) -> Self {
        Series2 {
            w: self.w,
            coeffs: self
                .coeffs
                .iter()
                .filter(|(k, _)| k.deg == m)
                .map(|(k, c)| (*k, c.clone()))
                .collect(),
            trunc: EXACT,
        }
    }

    pub fn is_homogeneous(&self) -> bool {
        self.order() == self.max_degree()
    }

    /// Decomposition into weighted-homogeneous parts, ascending degree.
    /// Each part carries the truncation of `self`.
    pub fn graded_parts(&self) -> Vec<(i64, Series2)> {
        let mut out: Vec<(i64, Series2)> = Vec::new();
        for (k, c) in &self.coeffs {
            match out.last_mut() {
                Some((d, part)) if *d == k.deg => {
                    part.coeffs.insert(*k, c.clone());
                }
                _ => {
                    let mut part = Self::zero(self.w, self.trunc);
                    part.coeffs.insert(*k, c.clone());
                    out.push((k.deg, part));
                }
            }
        }
        out
    }

    pub fn eval(&self, x: Complex64, y: Complex64) -> Complex64 {
        self.coeffs.iter().fold(Complex64::zero(), |acc, (k, c)| {
            acc + c.to_c64() * x.powu(k.i) * y.powu(k.j)
        })
    }

    /// `f(G1, G2)`; requires `val(G1) >= p1` and `val(G2) >= p2` so that the
    /// weighted order never drops.
    pub fn substitute(&self, g1: &Self, g2: &Self) -> Result<Self, SeriesError> {
        self.check(g1)?;
        self.check(g2)?;
        if g1.val() < self.w.p1 as i64 || g2.val() < self.w.p2 as i64 {
            return Err(SeriesError::NonzeroConstant);
        }
        let cap = self.trunc;
        let max_i = self.coeffs.keys().map(|k| k.i).max().unwrap_or(0);
        let max_j = self.coeffs.keys().map(|k| k.j).max().unwrap_or(0);
        let powers = |g: &Self, n: u32| {
            let mut v = vec![Self::one(self.w)];
            for e in 1..=n {
                let next = v[e as usize - 1].mul_capped(g, cap);
                v.push(next);
            }
            v
        };
        let pi = powers(g1, max_i);
        let pj = powers(g2, max_j);
        let mut acc = Self::zero(self.w, cap);
        for (k, c) in &self.coeffs {
            let term = pi[k.i as usize].mul_capped(&pj[k.j as usize], cap).scale(c);
            acc = acc.add(&term);
        }
        let t = acc.trunc.min(g1.trunc).min(g2.trunc).min(cap);
        Ok(acc.truncated(t).with_trunc(t))
    }

    /// `f ∘ g` for a one-variable `f` and `g(0) = 0`.
    pub fn compose_from(f: &Series1<Q>, g: &Self) -> Result<Self, SeriesError> {
        if !g.coeff(0, 0).is_zero() {
            return Err(SeriesError::NonzeroConstant);
        }
        let vg = g.val();
        let cap = if f.is_exact() {
            EXACT
        } else {
            tadd(f.trunc(), 1).saturating_mul(vg.max(1)) - 1
        };
        let top = match f.degree() {
            Some(d) => d,
            None => return Ok(Self::zero(g.w, cap)),
        };
        let mut acc = Self::constant(g.w, f.coeff(top), EXACT);
        for e in (0..top).rev() {
            acc = acc.mul_capped(g, cap);
            acc = acc.add(&Self::constant(g.w, f.coeff(e), EXACT));
        }
        let t = acc.trunc.min(cap);
        Ok(acc.truncated(t).with_trunc(t))
    }

    /// All coefficients of weighted degree `<= n` agree, and both sides are
    /// known to `n`.
    pub fn agrees_with(&self, other: &Self, n: i64) -> bool {
        if self.trunc < n || other.trunc < n || self.w != other.w {
            return false;
        }
        self.truncated(n).coeffs == other.truncated(n).coeffs
    }

    pub fn render(&self) -> String {
        if self.is_zero() {
            return "0".to_string();
        }
        let mut s = String::new();
        for (n, (m, _, c)) in self.terms().enumerate() {
            let neg = *c < Q::zero();
            let mag = if neg { -c.clone() } else { c.clone() };
            let body = match (mag.is_one(), m.i == 0 && m.j == 0) {
                (_, true) => q_string(&mag),
                (true, false) => m.to_string(),
                (false, false) => format!("{}*{}", q_string(&mag), m),
            };
            match (n, neg) {
                (0, false) => s.push_str(&body),
                (0, true) => {
                    s.push('-');
                    s.push_str(&body);
                }
                (_, false) => {
                    s.push_str(" + ");
                    s.push_str(&body);
                }
                (_, true) => {
                    s.push_str(" - ");
                    s.push_str(&body);
                }
            }
        }
        s
    }
}

impl fmt::Display for Series2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())?;
        if !self.is_exact() {
            write!(f, " + O(deg {})", self.trunc + 1)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::qi;

    fn w23() -> Weights {
        Weights::new(2, 3)
    }

    fn cusp() -> Series2 {
        Series2::from_terms(w23(), [(0, 2, qi(1)), (3, 0, qi(-1))], EXACT)
    }

    #[test]
    fn monomial_product_and_truncation() {
        let w = w23();
        let x = Series2::x(w).with_trunc(10);
        let y = Series2::y(w).with_trunc(10);
        let xy = x.mul(&y);
        assert_eq!(xy.coeff(1, 1), qi(1));
        assert_eq!(xy.order(), Some(5));
        let x3 = Series2::monomial(w, qi(1), 3, 0, 10);
        let y3 = Series2::monomial(w, qi(1), 0, 3, 10);
        assert!(x3.mul(&y3).is_zero());
        let tracked = x3.mul_tracked(&y3);
        assert_eq!(tracked.trunc(), 16);
        assert_eq!(tracked.coeff(3, 3), qi(1));
    }

    #[test]
    fn derivative_of_cusp() {
        let h = cusp();
        assert_eq!(h.partial_x(), Series2::monomial(w23(), qi(-3), 2, 0, EXACT));
        assert_eq!(h.partial_y(), Series2::monomial(w23(), qi(2), 0, 1, EXACT));
        assert_eq!(h.euler(), h.scale(&qi(6)));
        let t = h.with_trunc(10);
        assert_eq!(t.partial_x().trunc(), 8);
        assert_eq!(t.partial_y().trunc(), 7);
    }

    #[test]
    fn graded_parts_examples() {
        let parts = cusp().graded_parts();
        assert_eq!(parts.len(), 1);
        assert_eq!(parts[0].0, 6);
        let f = Series2::from_terms(w23(), [(0, 0, qi(1)), (1, 0, qi(1))], EXACT);
        let degs: Vec<i64> = f.graded_parts().iter().map(|p| p.0).collect();
        assert_eq!(degs, vec![0, 2]);
        assert!(Series2::zero(w23(), 5).graded_parts().is_empty());
    }

    #[test]
    fn weight_mismatch_is_an_error() {
        let a = Series2::x(Weights::new(1, 1));
        let b = Series2::x(w23());
        assert!(matches!(a.checked_add(&b), Err(SeriesError::WeightMismatch(..))));
        assert!(matches!(a.checked_mul(&b), Err(SeriesError::WeightMismatch(..))));
    }

    #[test]
    fn substitution_and_composition() {
        let w = w23();
        let h = cusp();
        // h(x, y) with x -> x, y -> y is h.
        assert_eq!(h.substitute(&Series2::x(w), &Series2::y(w)).unwrap(), h);
        // 1/(1 - z) composed with h, compared with the geometric sum.
        let geo = Series1::from_dense(&[qi(1), qi(1), qi(1), qi(1)], 3);
        let comp = Series2::compose_from(&geo, &h).unwrap();
        assert_eq!(comp.trunc(), 23);
        let h2 = h.mul(&h);
        let expect = Series2::one(w).add(&h).add(&h2).add(&h2.mul(&h));
        assert!(comp.agrees_with(&expect.with_trunc(23), 23));
    }

    #[test]
    fn monomials_by_degree() {
        let w = w23();
        let m: Vec<(u32, u32)> = w.monomials_of_degree(6).iter().map(|m| (m.i, m.j)).collect();
        assert_eq!(m, vec![(0, 2), (3, 0)]);
        assert!(w.monomials_of_degree(1).is_empty());
    }

    #[test]
    fn render_is_canonical() {
        assert_eq!(cusp().render(), "y^2 - x^3");
        let f = Series2::from_terms(w23(), [(1, 0, qi(2)), (0, 0, qi(-1))], EXACT);
        assert_eq!(f.render(), "-1 + 2*x");
    }
}
