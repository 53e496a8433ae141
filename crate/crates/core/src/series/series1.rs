use std::collections::BTreeMap;

use super::{tadd, tsub, SeriesError, EXACT};
use crate::scalar::Scalar;

/// Truncated power series in one variable, sparse in the exponent.
#[derive(Clone, Debug, PartialEq)]
pub struct Series1<S> {
    coeffs: BTreeMap<u32, S>,
    trunc: i64,
}

impl<S: Scalar> Series1<S> {
    pub fn zero(trunc: i64) -> Self {
        Series1 {
            coeffs: BTreeMap::new(),
            trunc,
        }
    }

    pub fn constant(c: S, trunc: i64) -> Self {
        Self::monomial(c, 0, trunc)
    }

    pub fn monomial(c: S, exp: u32, trunc: i64) -> Self {
        let mut s = Self::zero(trunc);
        s.insert(exp, c);
        s
    }

    /// The series `z`.
    pub fn identity(trunc: i64) -> Self {
        Self::monomial(S::one(), 1, trunc)
    }

    pub fn from_coeffs<I: IntoIterator<Item = (u32, S)>>(terms: I, trunc: i64) -> Self {
        let mut s = Self::zero(trunc);
        for (e, c) in terms {
            s.accumulate(e, c);
        }
        s
    }

    /// Dense constructor, `coeffs[e]` is the coefficient of `z^e`.
    pub fn from_dense(coeffs: &[S], trunc: i64) -> Self {
        Self::from_coeffs(coeffs.iter().cloned().enumerate().map(|(e, c)| (e as u32, c)), trunc)
    }

    fn insert(&mut self, e: u32, c: S) {
        if (e as i64) <= self.trunc && !c.is_zero() {
            self.coeffs.insert(e, c);
        }
    }

    fn accumulate(&mut self, e: u32, c: S) {
        if (e as i64) > self.trunc || c.is_zero() {
            return;
        }
        let v = match self.coeffs.remove(&e) {
            Some(old) => old + c,
            None => c,
        };
        if !v.is_zero() {
            self.coeffs.insert(e, v);
        }
    }

    pub fn trunc(&self) -> i64 {
        self.trunc
    }

    pub fn is_exact(&self) -> bool {
        self.trunc == EXACT
    }

    pub fn coeff(&self, e: u32) -> S {
        self.coeffs.get(&e).cloned().unwrap_or_else(S::zero)
    }

    pub fn terms(&self) -> impl Iterator<Item = (u32, &S)> + '_ {
        self.coeffs.iter().map(|(e, c)| (*e, c))
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Lowest exponent with a nonzero coefficient.
    pub fn order(&self) -> Option<u32> {
        self.coeffs.keys().next().copied()
    }

    /// Highest stored exponent.
    pub fn degree(&self) -> Option<u32> {
        self.coeffs.keys().next_back().copied()
    }

    /// Valuation used by the truncation rule: the order, or one past the
    /// truncation for a series that vanishes within it.
    pub(crate) fn val(&self) -> i64 {
        match self.order() {
            Some(o) => o as i64,
            None => tadd(self.trunc, 1),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn truncated(&self, n: i64) -> Self {
        let t = n.min(self.trunc);
        Series1 {
            coeffs: self
                .coeffs
                .iter()
                .filter(|(e, _)| (**e as i64) <= t)
                .map(|(e, c)| (*e, c.clone()))
                .collect(),
            trunc: t,
        }
    }

    /// Same coefficients, truncation relabelled. Used to promote exact
    /// polynomials to a working order.
    pub fn with_trunc(&self, n: i64) -> Self {
        let mut s = self.truncated(n);
        s.trunc = n;
        s
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.truncated(self.trunc.min(other.trunc));
        for (e, c) in other.terms() {
            out.accumulate(e, c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        Series1 {
            coeffs: self.coeffs.iter().map(|(e, c)| (*e, -c.clone())).collect(),
            trunc: self.trunc,
        }
    }

    pub fn scale(&self, k: &S) -> Self {
        if k.is_zero() {
            return Self::zero(self.trunc);
        }
        Series1 {
            coeffs: self
                .coeffs
                .iter()
                .map(|(e, c)| (*e, c.clone() * k.clone()))
                .filter(|(_, c)| !c.is_zero())
                .collect(),
            trunc: self.trunc,
        }
    }

    pub fn product_trunc(&self, other: &Self) -> i64 {
        self.trunc.min(other.trunc)
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.mul_capped(other, EXACT)
    }

    /// Product truncated at `min(cap, rule)`.
    pub fn mul_capped(&self, other: &Self, cap: i64) -> Self {
        let t = self.product_trunc(other).min(cap);
        let mut out = Self::zero(t);
        for (i, a) in self.terms() {
            if i as i64 > t {
                break;
            }
            for (j, b) in other.terms() {
                if (i + j) as i64 > t {
                    break;
                }
                out.accumulate(i + j, a.clone() * b.clone());
            }
        }
        out
    }

    /// Product whose truncation tracks valuations,
    /// `min(trunc a + val b, trunc b + val a)`, capped at `cap`.
    pub fn mul_tracked(&self, other: &Self, cap: i64) -> Self {
        let t = tadd(self.trunc, other.val()).min(tadd(other.trunc, self.val()));
        let mut out = self.with_trunc(EXACT).mul_capped(&other.with_trunc(EXACT), t.min(cap));
        out.trunc = t.min(cap);
        out
    }

    pub fn derivative(&self) -> Self {
        let mut out = Self::zero(tsub(self.trunc, 1));
        for (e, c) in self.terms() {
            if e > 0 {
                out.insert(e - 1, c.clone() * S::from_i64(e as i64));
            }
        }
        out
    }

    /// Multiply by `z^k`.
    pub fn shift_up(&self, k: u32) -> Self {
        Series1 {
            coeffs: self.coeffs.iter().map(|(e, c)| (e + k, c.clone())).collect(),
            trunc: tadd(self.trunc, k as i64),
        }
    }

    /// Divide by `z^k`; the series must vanish to order `k`.
    pub fn shift_down(&self, k: u32) -> Result<Self, SeriesError> {
        if self.order().is_some_and(|o| o < k) {
            return Err(SeriesError::NotDivisible);
        }
        Ok(Series1 {
            coeffs: self.coeffs.iter().map(|(e, c)| (e - k, c.clone())).collect(),
            trunc: tsub(self.trunc, k as i64),
        })
    }

    /// Evaluate a polynomial-like truncation at a point (numeric kinds).
    pub fn eval(&self, z: &S) -> S {
        let mut acc = S::zero();
        let mut last = 0u32;
        let mut pw = S::one();
        for (e, c) in self.terms() {
            for _ in last..e {
                pw = pw * z.clone();
            }
            last = e;
            acc = acc + c.clone() * pw.clone();
        }
        acc
    }

    /// Composition `self ∘ g`. `g` must have zero constant term.
    pub fn compose(&self, g: &Self) -> Result<Self, SeriesError> {
        if !g.coeff(0).is_zero() {
            return Err(SeriesError::NonzeroConstant);
        }
        let vg = g.val();
        // Terms of self above its truncation start contributing at
        // (trunc+1)*val(g).
        let cap = if self.trunc == EXACT {
            EXACT
        } else {
            tadd(self.trunc, 1).saturating_mul(vg.max(1)) - 1
        };
        let top = match self.degree() {
            Some(d) => d,
            None => return Ok(Self::zero(cap)),
        };
        // Horner on the dense coefficient list.
        let mut acc = Self::constant(self.coeff(top), EXACT);
        for e in (0..top).rev() {
            acc = acc.mul_capped(g, cap);
            acc = acc.add(&Self::constant(self.coeff(e), EXACT));
        }
        let t = acc.trunc.min(cap);
        Ok(acc.truncated(t).with_trunc(t))
    }

    /// Multiplicative inverse of a unit.
    pub fn recip(&self) -> Result<Self, SeriesError> {
        let c0 = self.coeff(0);
        if c0.is_zero() {
            return Err(SeriesError::NotUnit);
        }
        if self.trunc == EXACT {
            if self.len() == 1 {
                return Ok(Self::constant(S::one() / c0, EXACT));
            }
            return Err(SeriesError::Unbounded);
        }
        let n = self.trunc.max(0) as u32;
        let inv0 = S::one() / c0;
        let mut w: Vec<S> = Vec::with_capacity(n as usize + 1);
        w.push(inv0.clone());
        for k in 1..=n {
            let mut acc = S::zero();
            for (j, c) in self.terms() {
                if j == 0 {
                    continue;
                }
                if j > k {
                    break;
                }
                acc = acc + c.clone() * w[(k - j) as usize].clone();
            }
            w.push(-(acc * inv0.clone()));
        }
        Ok(Self::from_dense(&w, self.trunc))
    }

    /// `self / other` for a unit `other`.
    pub fn div(&self, other: &Self) -> Result<Self, SeriesError> {
        let inv = if other.trunc == EXACT && other.len() > 1 {
            if self.trunc == EXACT {
                return Err(SeriesError::Unbounded);
            }
            other.with_trunc(self.trunc).recip()?
        } else {
            other.recip()?
        };
        Ok(self.mul(&inv))
    }

    /// `self^r` for a series with constant term 1.
    pub fn powr(&self, r: &S) -> Result<Self, SeriesError> {
        if self.coeff(0) != S::one() {
            return Err(SeriesError::NotUnit);
        }
        if self.trunc == EXACT && self.len() > 1 {
            return Err(SeriesError::Unbounded);
        }
        let n = if self.trunc == EXACT {
            0
        } else {
            self.trunc.max(0) as u32
        };
        // w = u^r satisfies u w' = r u' w.
        let mut w: Vec<S> = vec![S::one()];
        for k in 1..=n {
            let mut acc = S::zero();
            for (j, c) in self.terms() {
                if j == 0 {
                    continue;
                }
                if j > k {
                    break;
                }
                let factor = (r.clone() + S::one()) * S::from_i64(j as i64) - S::from_i64(k as i64);
                acc = acc + factor * c.clone() * w[(k - j) as usize].clone();
            }
            w.push(acc / S::from_i64(k as i64));
        }
        Ok(Self::from_dense(&w, self.trunc))
    }

    /// Compositional inverse of a series `a z + ...` with `a != 0`.
    pub fn reversion(&self) -> Result<Self, SeriesError> {
        if !self.coeff(0).is_zero() {
            return Err(SeriesError::NonzeroConstant);
        }
        let a = self.coeff(1);
        if a.is_zero() {
            return Err(SeriesError::NotUnit);
        }
        if self.trunc == EXACT && self.len() > 1 {
            return Err(SeriesError::Unbounded);
        }
        let n = self.trunc;
        let mut inv = Self::monomial(S::one() / a.clone(), 1, n);
        if n == EXACT {
            return Ok(inv);
        }
        let mut apow = a.clone();
        for e in 2..=n.max(1) as u32 {
            apow = apow * a.clone();
            let err = inv.truncated(e as i64).compose(&self.truncated(e as i64))?.coeff(e);
            if !err.is_zero() {
                inv = inv.sub(&Self::monomial(err / apow.clone(), e, n));
            }
        }
        Ok(inv)
    }

    /// Coefficient of `z^{-1}` in the Laurent expansion of `1/self`.
    pub fn residue(&self) -> Result<S, SeriesError> {
        let v = self.order().ok_or(SeriesError::ZeroSeries)?;
        let needed = 2 * v as i64 - 1;
        if self.trunc < needed {
            return Err(SeriesError::InsufficientOrder {
                needed,
                available: self.trunc,
            });
        }
        if v == 0 {
            return Ok(S::zero());
        }
        let unit = self.shift_down(v)?.truncated(v as i64 - 1);
        Ok(unit.recip()?.coeff(v - 1))
    }

    /// Coefficient of the bracket `[f d/dz, g d/dz] = (f g' - g f') d/dz`.
    /// Known up to `min(trunc(f) + val(g), trunc(g) + val(f)) - 1`.
    pub fn field_bracket(&self, other: &Self) -> Self {
        let t = tsub(tadd(self.trunc, other.val()).min(tadd(other.trunc, self.val())), 1);
        let mut out = Self::zero(t);
        for (a, fa) in self.terms() {
            for (b, gb) in other.terms() {
                if a + b == 0 || (a + b - 1) as i64 > t {
                    continue;
                }
                let k = S::from_i64(b as i64 - a as i64);
                out.accumulate(a + b - 1, fa.clone() * gb.clone() * k);
            }
        }
        out
    }

    /// All coefficients up to `n` agree and both sides are known to `n`.
    pub fn agrees_with(&self, other: &Self, n: i64) -> bool {
        if self.trunc < n || other.trunc < n {
            return false;
        }
        self.truncated(n).coeffs == other.truncated(n).coeffs
    }

    /// Largest coefficient discrepancy up to exponent `n`.
    pub fn max_abs_diff(&self, other: &Self, n: i64) -> f64 {
        let d = self.truncated(n).sub(&other.truncated(n));
        d.terms().map(|(_, c)| c.magnitude()).fold(0.0, f64::max)
    }

    pub fn map<T: Scalar, F: Fn(&S) -> T>(&self, f: F) -> Series1<T> {
        Series1::from_coeffs(self.terms().map(|(e, c)| (e, f(c))), self.trunc)
    }

    /// Coefficients whose magnitude is at most `tol` are dropped.
    pub fn chop(&self, tol: f64) -> Self {
        Series1 {
            coeffs: self
                .coeffs
                .iter()
                .filter(|(_, c)| !c.is_negligible(tol))
                .map(|(e, c)| (*e, c.clone()))
                .collect(),
            trunc: self.trunc,
        }
    }

    pub fn render(&self, var: &str) -> String {
        if self.is_zero() {
            return "0".to_string();
        }
        let parts: Vec<String> = self
            .terms()
            .map(|(e, c)| {
                let v = match e {
                    0 => return c.render(),
                    1 => var.to_string(),
                    _ => format!("{var}^{e}"),
                };
                match c.render().as_str() {
                    "1" => v,
                    "-1" => format!("-{v}"),
                    r => format!("{r}*{v}"),
                }
            })
            .collect();
        let mut out = String::new();
        for (n, t) in parts.iter().enumerate() {
            match (n, t.strip_prefix('-')) {
                (0, _) => out.push_str(t),
                (_, Some(rest)) => {
                    out.push_str(" - ");
                    out.push_str(rest);
                }
                (_, None) => {
                    out.push_str(" + ");
                    out.push_str(t);
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{q, qi, Q};
    use num_complex::Complex64;

    fn s(c: &[i64], t: i64) -> Series1<Q> {
        Series1::from_dense(&c.iter().map(|&x| qi(x)).collect::<Vec<_>>(), t)
    }

    #[test]
    fn substitute_binomial() {
        // (z + z^2)^2 = z^2 + 2z^3 + z^4
        let f = s(&[0, 0, 1], 10);
        let g = s(&[0, 1, 1], 10);
        assert_eq!(f.compose(&g).unwrap().truncated(10), s(&[0, 0, 1, 2, 1], 10));
    }

    #[test]
    fn substitute_identities() {
        let f = s(&[0, 3, -1, 5], 8);
        let g = s(&[0, 2, 7, 0, 1], 8);
        let z = Series1::identity(8);
        assert_eq!(z.compose(&g).unwrap(), g);
        assert_eq!(f.compose(&z).unwrap(), f);
    }

    #[test]
    fn substitute_rejects_constant() {
        let f = s(&[0, 1], 5);
        let g = s(&[1, 1], 5);
        assert_eq!(f.compose(&g), Err(SeriesError::NonzeroConstant));
    }

    #[test]
    fn residue_examples() {
        // 1/(z^2(1+z)) = z^-2 - z^-1 + ...
        assert_eq!(s(&[0, 0, 1, 1], 10).residue().unwrap(), qi(-1));
        assert_eq!(s(&[0, 0, 0, 1], 10).residue().unwrap(), qi(0));
        // z^2/(1+5z) expanded
        let model = s(&[0, 0, 1], 12).div(&s(&[1, 5], EXACT)).unwrap();
        assert_eq!(model.residue().unwrap(), qi(5));
        assert_eq!(Series1::<Q>::zero(4).residue(), Err(SeriesError::ZeroSeries));
    }

    #[test]
    fn residue_needs_enough_terms() {
        let f = s(&[0, 0, 1], 2);
        assert!(matches!(f.residue(), Err(SeriesError::InsufficientOrder { .. })));
    }

    #[test]
    fn truncation_rule_for_products() {
        let a = s(&[0, 0, 1], 10);
        let b = s(&[1, 1], 6);
        assert_eq!(a.mul(&b).trunc(), 6);
        let x = Series1::<Q>::monomial(qi(1), 3, 5);
        assert!(x.mul(&x).is_zero());
        assert_eq!(x.mul(&Series1::constant(qi(2), EXACT)).trunc(), 5);
    }

    #[test]
    fn recip_powr_reversion() {
        let u = s(&[1, 2, -1, 3], 9);
        let one = u.mul(&u.recip().unwrap());
        assert!(one.agrees_with(&Series1::constant(qi(1), EXACT), 9));
        let half = u.powr(&q(1, 2)).unwrap();
        assert!(half.mul(&half).agrees_with(&u, 9));
        let g = s(&[0, 2, 1, -3], 9);
        let gi = g.reversion().unwrap();
        assert!(g.compose(&gi).unwrap().agrees_with(&Series1::identity(EXACT), 9));
        assert!(gi.compose(&g).unwrap().agrees_with(&Series1::identity(EXACT), 9));
    }

    #[test]
    fn bracket_of_monomial_fields() {
        let f = Series1::<Q>::monomial(qi(1), 12, 20);
        let g = Series1::<Q>::monomial(qi(1), 8, 20);
        let br = f.field_bracket(&g);
        assert_eq!(br.coeff(19), qi(-4));
        assert_eq!(br.trunc(), 27);
        assert!(f.field_bracket(&f).is_zero());
    }

    #[test]
    fn complex_kind_works() {
        let f: Series1<Complex64> = s(&[0, 1, 1], 6).map(Complex64::from_q);
        let g = f.mul(&f);
        assert!((g.coeff(3) - Complex64::new(2.0, 0.0)).norm() < 1e-15);
        assert!((f.eval(&Complex64::new(0.5, 0.0)) - Complex64::new(0.75, 0.0)).norm() < 1e-15);
    }
}
