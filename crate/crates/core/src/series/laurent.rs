use super::{Series1, SeriesError, EXACT};
use crate::scalar::Scalar;

/// Truncated Laurent series `z^val * unit(z)` with `unit(0) != 0`
/// (or `unit == 0`).
#[derive(Clone, Debug, PartialEq)]
pub struct Laurent1<S> {
    val: i64,
    unit: Series1<S>,
}

impl<S: Scalar> Laurent1<S> {
    pub fn from_series(s: &Series1<S>) -> Self {
        Self::normalized(0, s.clone())
    }

    fn normalized(val: i64, s: Series1<S>) -> Self {
        match s.order() {
            Some(o) if o > 0 => Laurent1 {
                val: val + o as i64,
                unit: s.shift_down(o).expect("order checked"),
            },
            _ => Laurent1 { val, unit: s },
        }
    }

    pub fn zero(abs_trunc: i64) -> Self {
        Laurent1 {
            val: 0,
            unit: Series1::zero(abs_trunc),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.unit.is_zero()
    }

    /// Exponent of the leading term (meaningless for zero).
    pub fn valuation(&self) -> i64 {
        self.val
    }

    pub fn pole_order(&self) -> u32 {
        if self.is_zero() || self.val >= 0 {
            0
        } else {
            (-self.val) as u32
        }
    }

    pub fn leading(&self) -> S {
        self.unit.coeff(0)
    }

    /// Highest absolute exponent that is known.
    pub fn abs_trunc(&self) -> i64 {
        if self.unit.trunc() == EXACT {
            EXACT
        } else {
            self.val + self.unit.trunc()
        }
    }

    /// Coefficient of `z^e`.
    pub fn coeff(&self, e: i64) -> S {
        let k = e - self.val;
        if k < 0 {
            S::zero()
        } else {
            self.unit.coeff(k as u32)
        }
    }

    /// `(exponent, coefficient)` pairs in ascending order.
    pub fn terms(&self) -> Vec<(i64, S)> {
        self.unit
            .terms()
            .map(|(e, c)| (e as i64 + self.val, c.clone()))
            .collect()
    }

    pub fn mul(&self, other: &Self) -> Self {
        Self::normalized(self.val + other.val, self.unit.mul(&other.unit))
    }

    pub fn scale(&self, k: &S) -> Self {
        Self::normalized(self.val, self.unit.scale(k))
    }

    pub fn add(&self, other: &Self) -> Self {
        let m = self.val.min(other.val);
        let a = self.unit.shift_up((self.val - m) as u32);
        let b = other.unit.shift_up((other.val - m) as u32);
        Self::normalized(m, a.add(&b))
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(&(-S::one())))
    }

    pub fn recip(&self) -> Result<Self, SeriesError> {
        if self.is_zero() {
            return Err(SeriesError::ZeroSeries);
        }
        Ok(Laurent1 {
            val: -self.val,
            unit: self.unit.recip()?,
        })
    }

    pub fn div(&self, other: &Self) -> Result<Self, SeriesError> {
        Ok(self.mul(&other.recip()?))
    }

    /// Every coefficient up to absolute exponent `n` is below `tol`
    /// (exactly zero for rationals) and the series is known to `n`.
    pub fn vanishes_to(&self, n: i64, tol: f64) -> bool {
        if self.abs_trunc() < n {
            return false;
        }
        self.terms()
            .iter()
            .filter(|(e, _)| *e <= n)
            .all(|(_, c)| c.is_negligible(tol))
    }

    pub fn truncated(&self, n: i64) -> Self {
        let rel = n - self.val;
        if rel < 0 {
            return Laurent1 {
                val: self.val,
                unit: Series1::zero(-1),
            };
        }
        Laurent1 {
            val: self.val,
            unit: self.unit.truncated(rel),
        }
    }

    pub fn render(&self, var: &str) -> String {
        if self.is_zero() {
            return "0".into();
        }
        self.terms()
            .iter()
            .map(|(e, c)| format!("{}*{}^{}", c.render(), var, e))
            .collect::<Vec<_>>()
            .join(" + ")
    }
}

impl<S: Scalar> Laurent1<S> {
    /// Build from an explicit valuation shift and regular part.
    pub fn from_parts(val: i64, s: Series1<S>) -> Self {
        Self::normalized(val, s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{qi, Q};

    #[test]
    fn inverse_of_pole() {
        // 1/(z + z^2) = z^-1 - 1 + z - ...
        let f = Laurent1::from_series(&Series1::<Q>::from_dense(&[qi(0), qi(1), qi(1)], 8));
        let g = f.recip().unwrap();
        assert_eq!(g.valuation(), -1);
        assert_eq!(g.pole_order(), 1);
        assert_eq!(g.coeff(-1), qi(1));
        assert_eq!(g.coeff(0), qi(-1));
        assert_eq!(g.coeff(1), qi(1));
        assert!(f
            .mul(&g)
            .sub(&Laurent1::from_series(&Series1::constant(qi(1), EXACT)))
            .vanishes_to(6, 0.0));
    }
}
