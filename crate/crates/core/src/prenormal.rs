//! Degree-by-degree reduction of `a X_h + b R` to
//! `u (X_h + Σ d_k(h) a_k R)` by transforms `exp(z R)`.

use num_traits::{One, Zero};
use thiserror::Error;

use crate::linalg;
use crate::quasihomog::{lie_bracket_log, LogVectorField, QuasiData};
use crate::scalar::{Scalar, Q};
use crate::series::{Series1, Series2, EXACT};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PrenormalError {
    #[error("coefficient of X_h must start with 1, found {0}")]
    LeadingNotOne(String),
    #[error("R-coefficient has a term of degree {degree} <= δ0 = {delta0}")]
    DegreeCondition { degree: i64, delta0: i64 },
    #[error("order {order} is below the first reduction degree {min}")]
    OrderTooSmall { order: i64, min: i64 },
    #[error("field is only known to degree {available}, requested {requested}")]
    InsufficientInput { available: i64, requested: i64 },
    #[error("cokernel system inconsistent in degree {degree}")]
    CokernelInconsistent { degree: i64 },
}

/// `Y = X_h + Σ d_k(h) a_k R`, valid to field degree `order`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrenormalForm {
    pub d: Vec<Series1<Q>>,
    pub order: i64,
}

impl PrenormalForm {
    /// Truncation of `d_k` in powers of `h` implied by the field order.
    pub fn d_trunc(qd: &QuasiData, k: usize, order: i64) -> i64 {
        (order - qd.cobasis[k].degree).div_euclid(qd.delta)
    }

    /// Promote exact or longer `d_k` to the truncations of field order `n`.
    pub fn new(qd: &QuasiData, d: Vec<Series1<Q>>, n: i64) -> Self {
        let d = d
            .iter()
            .enumerate()
            .map(|(k, s)| s.with_trunc(Self::d_trunc(qd, k, n).min(s.trunc())))
            .collect();
        PrenormalForm { d, order: n }
    }

    pub fn zero(qd: &QuasiData, n: i64) -> Self {
        Self::new(qd, vec![Series1::zero(EXACT); qd.mu()], n)
    }

    /// `Σ d_k(h) a_k`.
    pub fn coefficient(&self, qd: &QuasiData) -> Series2 {
        let mut acc = qd.zero_fn(self.order);
        for (k, dk) in self.d.iter().enumerate() {
            let dh = Series2::compose_from(dk, &qd.h).expect("h has no constant term");
            acc = acc.add(&dh.mul_homogeneous(&qd.cobasis_poly(k)));
        }
        acc.truncated(self.order)
    }

    pub fn field(&self, qd: &QuasiData) -> LogVectorField {
        LogVectorField::new(
            Series2::one(qd.weights).with_trunc(self.order - qd.delta0),
            self.coefficient(qd),
        )
    }
}

/// Product of factors `exp(z R)`, applied in list order, and the unit `u`
/// left in front of `X_h`.
#[derive(Debug, Clone, PartialEq)]
pub struct FiberedTransform {
    pub factors: Vec<(i64, Series2)>,
    pub u: Series2,
}

impl FiberedTransform {
    pub fn identity(qd: &QuasiData) -> Self {
        FiberedTransform {
            factors: Vec::new(),
            u: Series2::one(qd.weights),
        }
    }

    pub fn from_generators(qd: &QuasiData, zs: Vec<Series2>) -> Self {
        FiberedTransform {
            factors: zs
                .into_iter()
                .filter(|z| !z.is_zero())
                .map(|z| (z.order().unwrap_or(0), z))
                .collect(),
            u: Series2::one(qd.weights),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.factors.is_empty()
    }

    /// Factors reversed and negated. The unit is reset.
    pub fn inverse(&self, qd: &QuasiData) -> Self {
        FiberedTransform {
            factors: self.factors.iter().rev().map(|(d, z)| (*d, z.neg())).collect(),
            u: Series2::one(qd.weights),
        }
    }
}

/// `c = X_h(g) + Σ λ_{k,j} a_k h^j`.
#[derive(Debug, Clone, PartialEq)]
pub struct CokernelPart {
    pub g: Series2,
    /// `(k, j, λ_{k,j})` with nonzero `λ`.
    pub lambda: Vec<(usize, u32, Q)>,
}

/// Cokernel part absorbed at one degree: `(entry, power of h, coefficient)`.
type CokernelTerms = Vec<(usize, u32, Q)>;

fn cokernel_degree(c: &Series2, qd: &QuasiData, m: i64) -> Result<(Series2, CokernelTerms), PrenormalError> {
    let w = qd.weights;
    let gm = w.monomials_of_degree(m - qd.delta0);
    let lam: Vec<(usize, u32)> = qd
        .cobasis
        .iter()
        .enumerate()
        .filter_map(|(k, e)| {
            let r = m - e.degree;
            (r >= 0 && r % qd.delta == 0).then_some((k, (r / qd.delta) as u32))
        })
        .collect();
    let targets = w.monomials_of_degree(m);
    let mut columns: Vec<Series2> = gm
        .iter()
        .map(|mo| qd.xh(&Series2::monomial(w, Q::one(), mo.i, mo.j, EXACT)))
        .collect();
    let mut hpow = vec![Series2::one(w)];
    for &(k, j) in &lam {
        while hpow.len() <= j as usize {
            let next = hpow.last().unwrap().mul(&qd.h);
            hpow.push(next);
        }
        columns.push(hpow[j as usize].mul(&qd.cobasis_poly(k)));
    }
    let rows: Vec<Vec<Q>> = targets
        .iter()
        .map(|t| columns.iter().map(|col| col.coeff(t.i, t.j)).collect())
        .collect();
    let rhs: Vec<Q> = targets.iter().map(|t| c.coeff(t.i, t.j)).collect();
    let sol = linalg::solve(&rows, &rhs, columns.len()).ok_or(PrenormalError::CokernelInconsistent { degree: m })?;
    let g = Series2::from_terms(w, gm.iter().zip(&sol).map(|(mo, v)| (mo.i, mo.j, v.clone())), EXACT);
    let lambda = lam
        .iter()
        .zip(&sol[gm.len()..])
        .filter(|(_, v)| !v.is_zero())
        .map(|(&(k, j), v)| (k, j, v.clone()))
        .collect();
    Ok((g, lambda))
}

/// Split `c` into the image of `X_h` plus the free part on the cobasis.
/// Free unknowns of `g` (multiples of powers of `h`) are set to zero.
pub fn cokernel_decompose(c: &Series2, qd: &QuasiData) -> Result<CokernelPart, PrenormalError> {
    let g_trunc = crate::series::tsub(c.trunc(), qd.delta0);
    let mut g = qd.zero_fn(g_trunc);
    let mut lambda = Vec::new();
    let mut degs: Vec<i64> = c.terms().map(|(_, d, _)| d).collect();
    degs.dedup();
    for m in degs {
        let (gm, lm) = cokernel_degree(c, qd, m)?;
        g = g.add(&gm);
        lambda.extend(lm);
    }
    lambda.sort_by_key(|(k, j, _)| (*k, *j));
    Ok(CokernelPart { g, lambda })
}

/// `exp(ad_{zR}) X = Σ ad_{zR}^n X / n!`, cut at field degree `n`.
pub fn exp_ad(z: &Series2, x: &LogVectorField, qd: &QuasiData, n: i64) -> LogVectorField {
    let v = LogVectorField::new(qd.zero_fn(EXACT), z.clone());
    let mut out = x.truncated(qd, n);
    let mut term = out.clone();
    let mut k = 1i64;
    loop {
        term = lie_bracket_log(&v, &term, qd)
            .truncated(qd, n)
            .scale(&Q::from_i64(k).recip());
        if term.a.is_zero() && term.b.is_zero() {
            break;
        }
        out = out.add(&term);
        k += 1;
    }
    out
}

/// Transform `X` by every factor of `phi`, at field order `n`.
pub fn apply_fibered(phi: &FiberedTransform, x: &LogVectorField, qd: &QuasiData, n: i64) -> LogVectorField {
    let mut cur = x.truncated(qd, n);
    for (_, z) in &phi.factors {
        cur = exp_ad(z, &cur, qd, n);
    }
    cur
}

/// Reduce `X = a X_h + b R` with `a(0) = 1` and `b` of order `> δ0`.
pub fn prenormalize(
    x: &LogVectorField,
    qd: &QuasiData,
    n: i64,
) -> Result<(PrenormalForm, FiberedTransform), PrenormalError> {
    let d0 = qd.delta0;
    if n < d0 + 1 {
        return Err(PrenormalError::OrderTooSmall { order: n, min: d0 + 1 });
    }
    let lead = x.a.coeff(0, 0);
    if !lead.is_one() {
        return Err(PrenormalError::LeadingNotOne(lead.render()));
    }
    if let Some(o) = x.b.order().filter(|&o| o <= d0) {
        return Err(PrenormalError::DegreeCondition { degree: o, delta0: d0 });
    }
    if x.validity(qd) < n {
        return Err(PrenormalError::InsufficientInput {
            available: x.validity(qd),
            requested: n,
        });
    }
    let mut cur = x.truncated(qd, n).with_order(qd, n);
    let mut factors = Vec::new();
    let mut dpoly = qd.zero_fn(EXACT);
    let mut d: Vec<Vec<(u32, Q)>> = vec![Vec::new(); qd.mu()];
    for m in d0 + 1..=n {
        // R-part of X/a in degree m, from the parts already normalized.
        let bm = cur
            .b
            .homogeneous_part(m)
            .sub(&cur.a.mul_tracked(&dpoly).homogeneous_part(m));
        if bm.is_zero() {
            continue;
        }
        let (g, lambda) = cokernel_degree(&bm, qd, m)?;
        for (k, j, v) in lambda {
            let piece = qd.h.clone();
            let mut hj = Series2::one(qd.weights);
            for _ in 0..j {
                hj = hj.mul(&piece);
            }
            dpoly = dpoly.add(&hj.mul(&qd.cobasis_poly(k)).scale(&v));
            d[k].push((j, v));
        }
        if !g.is_zero() {
            cur = exp_ad(&g, &cur, qd, n);
            factors.push((m - d0, g));
        }
    }
    let pf = PrenormalForm::new(
        qd,
        d.into_iter().map(|terms| Series1::from_coeffs(terms, EXACT)).collect(),
        n,
    );
    Ok((pf, FiberedTransform { factors, u: cur.a }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{q, qi};
    use crate::series::Weights;

    fn cusp() -> QuasiData {
        let w = Weights::new(2, 3);
        let h = Series2::from_terms(w, [(0, 2, qi(1)), (3, 0, qi(-1))], EXACT);
        QuasiData::new(&h, w).unwrap()
    }

    fn poly(qd: &QuasiData, t: &[(u32, u32, Q)]) -> Series2 {
        Series2::from_terms(qd.weights, t.iter().cloned(), EXACT)
    }

    #[test]
    fn cokernel_examples() {
        let qd = cusp();
        let one = cokernel_decompose(&Series2::one(qd.weights), &qd).unwrap();
        assert!(one.g.is_zero());
        assert_eq!(one.lambda, vec![(0, 0, qi(1))]);
        let y = cokernel_decompose(&qd.y(), &qd).unwrap();
        assert_eq!(y.g, poly(&qd, &[(1, 0, q(1, 2))]));
        assert!(y.lambda.is_empty());
        let h = cokernel_decompose(&qd.h, &qd).unwrap();
        assert!(h.g.is_zero());
        assert_eq!(h.lambda, vec![(0, 1, qi(1))]);
    }

    #[test]
    fn trivial_inputs() {
        let qd = cusp();
        let (pf, phi) = prenormalize(&LogVectorField::xh(&qd), &qd, 20).unwrap();
        assert!(pf.d.iter().all(|s| s.is_zero()));
        assert!(phi.is_identity());
        let x = LogVectorField::new(Series2::one(qd.weights), qd.x().mul(&qd.h));
        let (pf, phi) = prenormalize(&x, &qd, 20).unwrap();
        assert!(pf.d[0].is_zero());
        assert_eq!(
            pf.d[1].terms().map(|(e, c)| (e, c.clone())).collect::<Vec<_>>(),
            vec![(1, qi(1))]
        );
        assert!(phi.is_identity());
    }

    #[test]
    fn coboundary_is_removed() {
        let qd = cusp();
        let b = poly(&qd, &[(0, 2, qi(2)), (3, 0, qi(3))]);
        let x = LogVectorField::new(Series2::one(qd.weights), b);
        let n = 24;
        let (pf, phi) = prenormalize(&x, &qd, n).unwrap();
        assert_eq!(phi.factors[0], (5, poly(&qd, &[(1, 1, qi(1))])));
        assert_eq!(pf.d[0].coeff(0), qi(0));
        assert_eq!(pf.d[0].coeff(1), qi(0));
        assert_eq!(pf.d[1].coeff(0), qi(0));
        let y = apply_fibered(&phi, &x, &qd, n);
        let target = pf.field(&qd);
        assert_eq!(y.a, phi.u);
        assert!(y.b.agrees_with(&phi.u.mul_tracked(&target.b), n));
    }

    #[test]
    fn inverse_round_trip() {
        let qd = cusp();
        let z = poly(&qd, &[(1, 1, qi(2)), (0, 0, qi(0))]);
        let phi = FiberedTransform::from_generators(&qd, vec![z, poly(&qd, &[(2, 0, q(1, 3))])]);
        let n = 18;
        let xh = LogVectorField::xh(&qd);
        let back = apply_fibered(&phi.inverse(&qd), &apply_fibered(&phi, &xh, &qd, n), &qd, n);
        assert!(back.is_equal_to_order(&xh.with_order(&qd, n), &qd, n));
    }

    #[test]
    fn prenormal_forms_are_fixed_points() {
        let qd = cusp();
        let d = vec![
            Series1::from_dense(&[qi(0), qi(0), qi(1), qi(-2)], EXACT),
            Series1::from_dense(&[qi(0), qi(3), q(1, 2)], EXACT),
        ];
        let pf = PrenormalForm::new(&qd, d, 26);
        let (again, phi) = prenormalize(&pf.field(&qd), &qd, 26).unwrap();
        assert!(phi.is_identity());
        assert_eq!(again, pf);
    }
}
