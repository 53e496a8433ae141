//! Quasi-homogeneous data of `h`: degree, Milnor cobasis, the fields
//! `X_h = h_y d/dx - h_x d/dy` and `R = p1 x d/dx + p2 y d/dy`, and
//! logarithmic vector fields `a X_h + b R`.

use num_traits::{One, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::linalg;
use crate::scalar::{q_string, Scalar, Q};
use crate::series::{Monomial, Series2, SeriesError, Weights, EXACT};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuasiError {
    #[error("h must be a nonzero polynomial")]
    NotPolynomial,
    #[error("h has a nonzero constant term")]
    ConstantTerm,
    #[error("h is not weighted-homogeneous for weights {0}")]
    NotHomogeneous(Weights),
    #[error("weighted degree of h must be positive, got {0}")]
    NonPositiveDegree(i64),
    #[error("h is smooth at the origin (no singular point)")]
    Smooth,
    #[error("singularity is not isolated: local algebra has a class in degree {degree}")]
    NonIsolated { degree: i64 },
    #[error("Milnor number mismatch: cobasis has {found} elements, formula gives {expected}")]
    MilnorMismatch { found: usize, expected: String },
    #[error("field is not logarithmic for h = 0 (no solution in field degree {degree})")]
    NotLogarithmic { degree: i64 },
    #[error(transparent)]
    Series(#[from] SeriesError),
}

/// One element `a_k` of the monomial basis of `O_2 / J(h)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CobasisElement {
    pub monomial: Monomial,
    pub degree: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuasiData {
    pub weights: Weights,
    pub h: Series2,
    pub hx: Series2,
    pub hy: Series2,
    pub delta: i64,
    pub delta0: i64,
    pub cobasis: Vec<CobasisElement>,
}

/// Weighted degree `δ` of `h` and `δ0 = δ - p1 - p2`.
pub fn check_quasi_homogeneous(h: &Series2, w: Weights) -> Result<(i64, i64), QuasiError> {
    if h.weights() != w {
        return Err(SeriesError::WeightMismatch(h.weights(), w).into());
    }
    if !h.is_exact() || h.is_zero() {
        return Err(QuasiError::NotPolynomial);
    }
    if !h.coeff(0, 0).is_zero() {
        return Err(QuasiError::ConstantTerm);
    }
    if !h.is_homogeneous() {
        return Err(QuasiError::NotHomogeneous(w));
    }
    let delta = h.order().unwrap_or(0);
    if delta <= 0 {
        return Err(QuasiError::NonPositiveDegree(delta));
    }
    Ok((delta, delta - w.p1 as i64 - w.p2 as i64))
}

/// Monomial basis of the local algebra, one weighted degree at a time.
///
/// Columns are ordered by descending x-exponent so that the pivots of the
/// Jacobian span take the large x-powers and the complement keeps the
/// smallest ones.
pub fn jacobian_cobasis(h: &Series2, delta: i64) -> Result<Vec<CobasisElement>, QuasiError> {
    let w = h.weights();
    let (p1, p2) = (w.p1 as i64, w.p2 as i64);
    let delta0 = delta - p1 - p2;
    let hx = h.partial_x();
    let hy = h.partial_y();
    let bound = (delta - p1) + (delta - p2);
    let socle = 2 * delta0;
    let mut out = Vec::new();
    for m in 0..=bound {
        let mut cols = w.monomials_of_degree(m);
        if cols.is_empty() {
            continue;
        }
        cols.reverse();
        let mut rows: Vec<Vec<Q>> = Vec::new();
        for (g, e) in [(&hx, delta - p1), (&hy, delta - p2)] {
            for mono in w.monomials_of_degree(m - e) {
                let prod = g.mul(&Series2::monomial(w, Q::one(), mono.i, mono.j, EXACT));
                rows.push(cols.iter().map(|c| prod.coeff(c.i, c.j)).collect());
            }
        }
        for c in linalg::complement_columns(&rows, cols.len()) {
            if m > socle {
                return Err(QuasiError::NonIsolated { degree: m });
            }
            out.push(CobasisElement {
                monomial: cols[c],
                degree: m,
            });
        }
    }
    out.sort_by_key(|e| (e.degree, e.monomial.i));
    let num = (delta - p1) * (delta - p2);
    let den = p1 * p2;
    if num % den != 0 || (num / den) as usize != out.len() {
        return Err(QuasiError::MilnorMismatch {
            found: out.len(),
            expected: q_string(&crate::scalar::q(num, den)),
        });
    }
    Ok(out)
}

impl QuasiData {
    pub fn new(h: &Series2, w: Weights) -> Result<Self, QuasiError> {
        let (delta, delta0) = check_quasi_homogeneous(h, w)?;
        if delta0 < 0 {
            return Err(QuasiError::Smooth);
        }
        let cobasis = jacobian_cobasis(h, delta)?;
        Ok(QuasiData {
            weights: w,
            h: h.clone(),
            hx: h.partial_x(),
            hy: h.partial_y(),
            delta,
            delta0,
            cobasis,
        })
    }

    pub fn mu(&self) -> usize {
        self.cobasis.len()
    }

    pub fn p1(&self) -> i64 {
        self.weights.p1 as i64
    }

    pub fn p2(&self) -> i64 {
        self.weights.p2 as i64
    }

    /// The cobasis monomial `a_k` as an exact polynomial.
    pub fn cobasis_poly(&self, k: usize) -> Series2 {
        let m = self.cobasis[k].monomial;
        Series2::monomial(self.weights, Q::one(), m.i, m.j, EXACT)
    }

    /// `X_h(f) = h_y f_x - h_x f_y`, known to `trunc(f) + δ0`.
    pub fn xh(&self, f: &Series2) -> Series2 {
        f.partial_x()
            .mul_homogeneous(&self.hy)
            .sub(&f.partial_y().mul_homogeneous(&self.hx))
    }

    /// `R(f)`.
    pub fn r(&self, f: &Series2) -> Series2 {
        f.euler()
    }

    pub fn zero_fn(&self, trunc: i64) -> Series2 {
        Series2::zero(self.weights, trunc)
    }

    pub fn const_fn(&self, c: Q) -> Series2 {
        Series2::constant(self.weights, c, EXACT)
    }

    pub fn x(&self) -> Series2 {
        Series2::x(self.weights)
    }

    pub fn y(&self) -> Series2 {
        Series2::y(self.weights)
    }
}

/// The field `a X_h + b R`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogVectorField {
    pub a: Series2,
    pub b: Series2,
}

impl LogVectorField {
    pub fn new(a: Series2, b: Series2) -> Self {
        LogVectorField { a, b }
    }

    pub fn xh(qd: &QuasiData) -> Self {
        LogVectorField::new(Series2::one(qd.weights), qd.zero_fn(EXACT))
    }

    pub fn radial(qd: &QuasiData) -> Self {
        LogVectorField::new(qd.zero_fn(EXACT), Series2::one(qd.weights))
    }

    /// Weighted degree up to which the field is known: terms of `a` of
    /// degree `s` sit in field degree `s + δ0`.
    pub fn validity(&self, qd: &QuasiData) -> i64 {
        self.b.trunc().min(crate::series::tadd(self.a.trunc(), qd.delta0))
    }

    /// Cut the field at field degree `n`.
    pub fn truncated(&self, qd: &QuasiData, n: i64) -> Self {
        LogVectorField::new(self.a.truncated(n - qd.delta0), self.b.truncated(n))
    }

    /// Promote to working field order `n` (truncations relabelled).
    pub fn with_order(&self, qd: &QuasiData, n: i64) -> Self {
        LogVectorField::new(self.a.with_trunc(n - qd.delta0), self.b.with_trunc(n))
    }

    pub fn add(&self, other: &Self) -> Self {
        LogVectorField::new(self.a.add(&other.a), self.b.add(&other.b))
    }

    pub fn sub(&self, other: &Self) -> Self {
        LogVectorField::new(self.a.sub(&other.a), self.b.sub(&other.b))
    }

    pub fn scale(&self, k: &Q) -> Self {
        LogVectorField::new(self.a.scale(k), self.b.scale(k))
    }

    /// `f · X`.
    pub fn times(&self, f: &Series2) -> Self {
        LogVectorField::new(self.a.mul_tracked(f), self.b.mul_tracked(f))
    }

    /// Derivative of `f` along the field.
    pub fn apply(&self, qd: &QuasiData, f: &Series2) -> Series2 {
        self.a.mul_tracked(&qd.xh(f)).add(&self.b.mul_tracked(&qd.r(f)))
    }

    /// Cartesian components `(P, Q)` of `P d/dx + Q d/dy`.
    pub fn components(&self, qd: &QuasiData) -> (Series2, Series2) {
        let p1 = Series2::monomial(qd.weights, Q::from_i64(qd.p1()), 1, 0, EXACT);
        let p2 = Series2::monomial(qd.weights, Q::from_i64(qd.p2()), 0, 1, EXACT);
        let p = self.a.mul_homogeneous(&qd.hy).add(&self.b.mul_homogeneous(&p1));
        let q = self.a.mul_homogeneous(&qd.hx).neg().add(&self.b.mul_homogeneous(&p2));
        (p, q)
    }

    pub fn is_equal_to_order(&self, other: &Self, qd: &QuasiData, n: i64) -> bool {
        self.a.agrees_with(&other.a, n - qd.delta0) && self.b.agrees_with(&other.b, n)
    }
}

/// Write `P d/dx + Q d/dy` as `a X_h + b R`, solving degree by degree.
pub fn saito_decompose(p: &Series2, q: &Series2, qd: &QuasiData) -> Result<LogVectorField, QuasiError> {
    let w = qd.weights;
    if p.weights() != w || q.weights() != w {
        return Err(SeriesError::WeightMismatch(p.weights(), w).into());
    }
    let (p1, p2, d0) = (qd.p1(), qd.p2(), qd.delta0);
    let top = crate::series::tsub(p.trunc(), p1).min(crate::series::tsub(q.trunc(), p2));
    let mut degs: Vec<i64> = p
        .terms()
        .map(|(_, d, _)| d - p1)
        .chain(q.terms().map(|(_, d, _)| d - p2))
        .filter(|&e| e <= top)
        .collect();
    degs.sort_unstable();
    degs.dedup();
    let a_trunc = if top == EXACT { EXACT } else { top - d0 };
    let mut a = Series2::zero(w, a_trunc);
    let mut b = Series2::zero(w, top);
    for e in degs {
        let am = w.monomials_of_degree(e - d0);
        let bm = w.monomials_of_degree(e);
        let pm = w.monomials_of_degree(e + p1);
        let qm = w.monomials_of_degree(e + p2);
        let n = am.len() + bm.len();
        let mut rows: Vec<Vec<Q>> = Vec::new();
        let mut rhs: Vec<Q> = Vec::new();
        // Column layout: a-monomials, then b-monomials.
        let column = |f: &Series2, target: &Monomial| -> Q { f.coeff(target.i, target.j) };
        let basis_a: Vec<(Series2, Series2)> = am
            .iter()
            .map(|m| {
                let mono = Series2::monomial(w, Q::one(), m.i, m.j, EXACT);
                (mono.mul(&qd.hy), mono.mul(&qd.hx).neg())
            })
            .collect();
        let basis_b: Vec<(Series2, Series2)> = bm
            .iter()
            .map(|m| {
                (
                    Series2::monomial(w, Q::from_i64(p1), m.i + 1, m.j, EXACT),
                    Series2::monomial(w, Q::from_i64(p2), m.i, m.j + 1, EXACT),
                )
            })
            .collect();
        let all: Vec<&(Series2, Series2)> = basis_a.iter().chain(basis_b.iter()).collect();
        for t in &pm {
            rows.push(all.iter().map(|(fp, _)| column(fp, t)).collect());
            rhs.push(p.coeff(t.i, t.j));
        }
        for t in &qm {
            rows.push(all.iter().map(|(_, fq)| column(fq, t)).collect());
            rhs.push(q.coeff(t.i, t.j));
        }
        let sol = linalg::solve(&rows, &rhs, n).ok_or(QuasiError::NotLogarithmic { degree: e })?;
        for (k, m) in am.iter().enumerate() {
            a = a.add(&Series2::monomial(w, sol[k].clone(), m.i, m.j, EXACT));
        }
        for (k, m) in bm.iter().enumerate() {
            b = b.add(&Series2::monomial(w, sol[am.len() + k].clone(), m.i, m.j, EXACT));
        }
    }
    Ok(LogVectorField::new(a, b))
}

/// Bracket in the `(X_h, R)` basis, using `[X_h, R] = -δ0 X_h`.
pub fn lie_bracket_log(v: &LogVectorField, u: &LogVectorField, qd: &QuasiData) -> LogVectorField {
    let (a, b, c, e) = (&v.a, &v.b, &u.a, &u.b);
    let d0 = Q::from_i64(qd.delta0);
    let xa = a
        .mul_tracked(&qd.xh(c))
        .sub(&c.mul_tracked(&qd.xh(a)))
        .sub(&e.mul_tracked(&qd.r(a)))
        .add(&b.mul_tracked(&qd.r(c)))
        .add(&b.mul_tracked(c).sub(&a.mul_tracked(e)).scale(&d0));
    let rb = a
        .mul_tracked(&qd.xh(e))
        .sub(&c.mul_tracked(&qd.xh(b)))
        .add(&b.mul_tracked(&qd.r(e)))
        .sub(&e.mul_tracked(&qd.r(b)));
    LogVectorField::new(xa, rb)
}

/// Bracket of two fields given by Cartesian components.
pub fn raw_bracket(v: (&Series2, &Series2), u: (&Series2, &Series2)) -> (Series2, Series2) {
    let along = |f: (&Series2, &Series2), g: &Series2| f.0.mul(&g.partial_x()).add(&f.1.mul(&g.partial_y()));
    (along(v, u.0).sub(&along(u, v.0)), along(v, u.1).sub(&along(u, v.1)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::qi;

    fn poly(w: Weights, t: &[(u32, u32, i64)]) -> Series2 {
        Series2::from_terms(w, t.iter().map(|&(i, j, c)| (i, j, qi(c))), EXACT)
    }

    fn cusp() -> QuasiData {
        let w = Weights::new(2, 3);
        QuasiData::new(&poly(w, &[(0, 2, 1), (3, 0, -1)]), w).unwrap()
    }

    #[test]
    fn degrees() {
        let qd = cusp();
        assert_eq!((qd.delta, qd.delta0), (6, 1));
        let w = Weights::new(1, 1);
        assert_eq!(check_quasi_homogeneous(&poly(w, &[(1, 1, 1)]), w).unwrap(), (2, 0));
        assert_eq!(
            check_quasi_homogeneous(&poly(w, &[(0, 2, 1), (3, 0, -1)]), w),
            Err(QuasiError::NotHomogeneous(w))
        );
    }

    #[test]
    fn cobases() {
        let qd = cusp();
        let monos: Vec<Monomial> = qd.cobasis.iter().map(|e| e.monomial).collect();
        assert_eq!(monos, vec![Monomial { i: 0, j: 0 }, Monomial { i: 1, j: 0 }]);
        let w = Weights::new(2, 5);
        let q5 = QuasiData::new(&poly(w, &[(0, 2, 1), (5, 0, -1)]), w).unwrap();
        let xs: Vec<u32> = q5.cobasis.iter().map(|e| e.monomial.i).collect();
        assert_eq!(xs, vec![0, 1, 2, 3]);
        let w = Weights::new(1, 1);
        assert_eq!(QuasiData::new(&poly(w, &[(1, 1, 1)]), w).unwrap().mu(), 1);
    }

    #[test]
    fn non_isolated_is_rejected() {
        let w = Weights::new(1, 1);
        assert!(matches!(
            QuasiData::new(&poly(w, &[(2, 1, 1)]), w),
            Err(QuasiError::NonIsolated { .. })
        ));
        let w = Weights::new(2, 3);
        let h = poly(w, &[(0, 2, 1), (3, 0, -1)]);
        assert!(matches!(
            QuasiData::new(&h.mul(&h), w),
            Err(QuasiError::NonIsolated { .. })
        ));
    }

    #[test]
    fn saito_examples() {
        let qd = cusp();
        let w = qd.weights;
        let xh = saito_decompose(&qd.hy, &qd.hx.neg(), &qd).unwrap();
        assert_eq!(xh, LogVectorField::xh(&qd));
        let r = saito_decompose(&poly(w, &[(1, 0, 2)]), &poly(w, &[(0, 1, 3)]), &qd).unwrap();
        assert_eq!(r, LogVectorField::radial(&qd));
        assert!(matches!(
            saito_decompose(&poly(w, &[(0, 0, 1)]), &qd.zero_fn(EXACT), &qd),
            Err(QuasiError::NotLogarithmic { .. })
        ));
    }

    #[test]
    fn bracket_relations() {
        let qd = cusp();
        let xh = LogVectorField::xh(&qd);
        let r = LogVectorField::radial(&qd);
        let br = lie_bracket_log(&xh, &r, &qd);
        assert_eq!(br.a, qd.const_fn(qi(-1)));
        assert!(br.b.is_zero());
        assert!(lie_bracket_log(&r, &r, &qd).a.is_zero());
        let z = poly(qd.weights, &[(1, 1, 3), (0, 1, 1)]);
        let zr = LogVectorField::new(qd.zero_fn(EXACT), z.clone());
        let br = lie_bracket_log(&xh, &zr, &qd);
        assert_eq!(br.a, z.scale(&qi(-1)));
        assert_eq!(br.b, qd.xh(&z));
    }

    #[test]
    fn xh_kills_h_and_r_scales_it() {
        let qd = cusp();
        assert!(qd.xh(&qd.h).is_zero());
        assert_eq!(qd.r(&qd.h), qd.h.scale(&qi(6)));
    }
}
