//! One-forms `A ω_h + B ω_R` in the logarithmic basis.
//!
//! `ω_h = δ⁻¹ dh/h` and, internally, `ω_R = (p2 y dx - p1 x dy)/(δ h)`.
//! The extra `δ⁻¹` on `ω_R` makes `{ω_h, ω_R}` dual to `{R, X_h}`, so that
//! `df = R(f) ω_h + X_h(f) ω_R` and `ω_h ∧ ω_R = -dx∧dy/(δ h)`.
//! With this scaling `d(A ω_h + B ω_R) = (R(B) - X_h(A) - δ0 B) ω_h ∧ ω_R`.

use num_complex::Complex64;
use num_traits::Zero;
use serde::Serialize;
use thiserror::Error;

use crate::linalg;
use crate::quasihomog::{LogVectorField, QuasiData};
use crate::scalar::{Scalar, Q};
use crate::series::{Monomial, Series2, EXACT};

/// Scale applied to the textbook `ω_R` so that the basis is dual to `(R, X_h)`.
pub const OMEGA_R_RESCALING: &str = "omega_R is divided by delta";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LogFormError {
    #[error("evaluation point lies on h = 0")]
    OnCurve,
    #[error("degenerate field: coefficient of X_h is not a unit")]
    Degenerate,
}

/// `A ω_h + B ω_R`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogOneForm {
    pub a: Series2,
    pub b: Series2,
}

impl LogOneForm {
    pub fn new(a: Series2, b: Series2) -> Self {
        LogOneForm { a, b }
    }

    pub fn omega_h(qd: &QuasiData) -> Self {
        LogOneForm::new(Series2::one(qd.weights), qd.zero_fn(EXACT))
    }

    pub fn omega_r(qd: &QuasiData) -> Self {
        LogOneForm::new(qd.zero_fn(EXACT), Series2::one(qd.weights))
    }

    pub fn zero(qd: &QuasiData) -> Self {
        LogOneForm::new(qd.zero_fn(EXACT), qd.zero_fn(EXACT))
    }

    /// `df`.
    pub fn differential(f: &Series2, qd: &QuasiData) -> Self {
        LogOneForm::new(qd.r(f), qd.xh(f))
    }

    /// The form `a ω_h - b ω_R` whose kernel is the field `a X_h + b R`.
    pub fn dual_of(x: &LogVectorField) -> Self {
        LogOneForm::new(x.a.clone(), x.b.neg())
    }

    pub fn scale(&self, k: &Q) -> Self {
        LogOneForm::new(self.a.scale(k), self.b.scale(k))
    }

    pub fn add(&self, other: &Self) -> Self {
        LogOneForm::new(self.a.add(&other.a), self.b.add(&other.b))
    }

    /// Weighted degree up to which both coefficients are known.
    pub fn order(&self) -> i64 {
        self.a.trunc().min(self.b.trunc())
    }

    /// Cartesian coefficients `(F, G)` of `F dx + G dy` at a point.
    pub fn explicit_at(
        &self,
        qd: &QuasiData,
        x: Complex64,
        y: Complex64,
    ) -> Result<(Complex64, Complex64), LogFormError> {
        let h = qd.h.eval(x, y);
        if h.norm() < 1e-300 {
            return Err(LogFormError::OnCurve);
        }
        let dh = Complex64::from_i64(qd.delta) * h;
        let a = self.a.eval(x, y);
        let b = self.b.eval(x, y);
        let (p1, p2) = (qd.p1() as f64, qd.p2() as f64);
        let f = (a * qd.hx.eval(x, y) + b * p2 * y) / dh;
        let g = (a * qd.hy.eval(x, y) - b * p1 * x) / dh;
        Ok((f, g))
    }
}

/// `ω(V)` as a series: `(A ω_h + B ω_R)(a X_h + b R) = A b + B a`.
pub fn eval_pairing(w: &LogOneForm, v: &LogVectorField) -> Series2 {
    w.a.mul_tracked(&v.b).add(&w.b.mul_tracked(&v.a))
}

/// Numeric spot check of the pairing through the explicit `dx, dy`
/// expressions of both objects.
pub fn eval_pairing_numeric(
    w: &LogOneForm,
    v: &LogVectorField,
    qd: &QuasiData,
    x: Complex64,
    y: Complex64,
) -> Result<Complex64, LogFormError> {
    let (f, g) = w.explicit_at(qd, x, y)?;
    let (p, q) = v.components(qd);
    Ok(f * p.eval(x, y) + g * q.eval(x, y))
}

/// Coefficient of `ω_h ∧ ω_R` in `dω`.
pub fn exterior_d(w: &LogOneForm, qd: &QuasiData) -> Series2 {
    let d0 = Q::from_i64(qd.delta0);
    qd.r(&w.b).sub(&qd.xh(&w.a)).sub(&w.b.scale(&d0))
}

/// Coefficient of `ω_h ∧ ω_R` in `ω1 ∧ ω2`.
pub fn wedge(w1: &LogOneForm, w2: &LogOneForm) -> Series2 {
    w1.a.mul_tracked(&w2.b).sub(&w2.a.mul_tracked(&w1.b))
}

/// `dω = K ω_h ∧ ω_R` becomes `-K/(δh) dx∧dy`; returns that Cartesian
/// coefficient at a point.
pub fn exterior_d_cartesian(
    w: &LogOneForm,
    qd: &QuasiData,
    x: Complex64,
    y: Complex64,
) -> Result<Complex64, LogFormError> {
    let h = qd.h.eval(x, y);
    if h.norm() < 1e-300 {
        return Err(LogFormError::OnCurve);
    }
    let k = exterior_d(w, qd).eval(x, y);
    Ok(-k / (Complex64::from_i64(qd.delta) * h))
}

/// `G_x - F_y` for `ω = F dx + G dy`, by Cauchy-integral differentiation of
/// the explicit rational coefficients on a small circle.
pub fn exterior_d_numeric(
    w: &LogOneForm,
    qd: &QuasiData,
    x: Complex64,
    y: Complex64,
) -> Result<Complex64, LogFormError> {
    let h = qd.h.eval(x, y);
    let grad = qd.hx.eval(x, y).norm() + qd.hy.eval(x, y).norm();
    let r = (0.05 * h.norm() / (1.0 + grad)).min(0.05);
    let n = 64;
    let mut gx = Complex64::zero();
    let mut fy = Complex64::zero();
    for k in 0..n {
        let e = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / n as f64);
        let (_, g) = w.explicit_at(qd, x + e * r, y)?;
        let (f, _) = w.explicit_at(qd, x, y + e * r)?;
        gx += g / e;
        fy += f / e;
    }
    let scale = Complex64::new(n as f64 * r, 0.0);
    Ok(gx / scale - fy / scale)
}

/// Outcome of checking a Godbillon–Vey sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum GvOutcome {
    Pass { order: i64 },
    Fail { relation: usize, residual_order: i64 },
    InsufficientPrecision { relation: usize, available: i64 },
}

impl GvOutcome {
    pub fn passed(&self) -> bool {
        matches!(self, GvOutcome::Pass { .. })
    }
}

fn binomial(n: usize, k: usize) -> i64 {
    (0..k).fold(1i64, |acc, t| acc * (n - t) as i64 / (t + 1) as i64)
}

/// Check `dω_i = ω_0 ∧ ω_{i+1} + Σ_{j=1..i} C(i,j) ω_j ∧ ω_{i-j+1}` for every
/// relation that can be nonzero, with `ω_k = 0` past the sequence.
pub fn gv_verify(seq: &[LogOneForm], qd: &QuasiData, n: i64) -> GvOutcome {
    let l = seq.len();
    let zero = LogOneForm::zero(qd);
    let get = |k: usize| seq.get(k).unwrap_or(&zero);
    for i in 0..(2 * l).max(1) {
        let mut rhs = wedge(get(0), get(i + 1));
        for j in 1..=i {
            let c = Q::from_i64(binomial(i, j));
            rhs = rhs.add(&wedge(get(j), get(i - j + 1)).scale(&c));
        }
        let residual = exterior_d(get(i), qd).sub(&rhs);
        if let Some(o) = residual.order().filter(|&o| o <= n) {
            return GvOutcome::Fail {
                relation: i,
                residual_order: o,
            };
        }
        if residual.trunc() < n {
            return GvOutcome::InsufficientPrecision {
                relation: i,
                available: residual.trunc(),
            };
        }
    }
    GvOutcome::Pass { order: n }
}

/// Result of the finite length-two search.
#[derive(Debug, Clone, PartialEq)]
pub enum GvSearch {
    Feasible(LogOneForm),
    Infeasible { degree_bound: i64, order: i64 },
}

impl GvSearch {
    pub fn is_feasible(&self) -> bool {
        matches!(self, GvSearch::Feasible(_))
    }
}

/// Look for `ω_1 = A ω_h + B ω_R` with polynomial `A, B` of weighted degree
/// `<= dmax` such that `dω_0 = ω_0 ∧ ω_1` and `dω_1 = 0` hold up to degree
/// `n`, where `ω_0` is the dual form of `x`.
pub fn gv_search_length2(x: &LogVectorField, qd: &QuasiData, dmax: i64, n: i64) -> Result<GvSearch, LogFormError> {
    if x.a.coeff(0, 0).is_zero() {
        return Err(LogFormError::Degenerate);
    }
    let w = qd.weights;
    let monos: Vec<Monomial> = (0..=dmax).flat_map(|d| w.monomials_of_degree(d)).collect();
    let nm = monos.len();
    let omega0 = LogOneForm::dual_of(x);
    let a = x.a.truncated(n);
    let b = x.b.truncated(n);
    // Each unknown contributes an exact polynomial to each equation.
    let targets: Vec<Monomial> = (0..=n).flat_map(|d| w.monomials_of_degree(d)).collect();
    let row_of = |s: &Series2| -> Vec<Q> { targets.iter().map(|t| s.coeff(t.i, t.j)).collect() };
    let d0 = Q::from_i64(qd.delta0);
    let mut cols1: Vec<Vec<Q>> = Vec::with_capacity(2 * nm);
    let mut cols2: Vec<Vec<Q>> = Vec::with_capacity(2 * nm);
    for m in &monos {
        let mono = Series2::monomial(w, Q::from_i64(1), m.i, m.j, EXACT);
        // Unknown in A: eq1 gets b*A, eq2 gets -X_h(A).
        cols1.push(row_of(&b.mul(&mono)));
        cols2.push(row_of(&qd.xh(&mono).neg()));
    }
    for m in &monos {
        let mono = Series2::monomial(w, Q::from_i64(1), m.i, m.j, EXACT);
        // Unknown in B: eq1 gets a*B, eq2 gets R(B) - δ0 B.
        cols1.push(row_of(&a.mul(&mono)));
        cols2.push(row_of(&qd.r(&mono).sub(&mono.scale(&d0))));
    }
    let rhs1 = row_of(&exterior_d(&omega0, qd).truncated(n));
    let nt = targets.len();
    let mut rows: Vec<Vec<Q>> = Vec::with_capacity(2 * nt);
    let mut rhs: Vec<Q> = Vec::with_capacity(2 * nt);
    for t in 0..nt {
        rows.push(cols1.iter().map(|c| c[t].clone()).collect());
        rhs.push(rhs1[t].clone());
    }
    for t in 0..nt {
        rows.push(cols2.iter().map(|c| c[t].clone()).collect());
        rhs.push(Q::zero());
    }
    match linalg::solve(&rows, &rhs, 2 * nm) {
        None => Ok(GvSearch::Infeasible {
            degree_bound: dmax,
            order: n,
        }),
        Some(u) => {
            let pa = Series2::from_terms(w, monos.iter().zip(&u[..nm]).map(|(m, c)| (m.i, m.j, c.clone())), EXACT);
            let pb = Series2::from_terms(w, monos.iter().zip(&u[nm..]).map(|(m, c)| (m.i, m.j, c.clone())), EXACT);
            Ok(GvSearch::Feasible(LogOneForm::new(pa, pb)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::qi;
    use crate::series::Weights;

    fn cusp() -> QuasiData {
        let w = Weights::new(2, 3);
        let h = Series2::from_terms(w, [(0, 2, qi(1)), (3, 0, qi(-1))], EXACT);
        QuasiData::new(&h, w).unwrap()
    }

    #[test]
    fn pairing_is_dual() {
        let qd = cusp();
        let wh = LogOneForm::omega_h(&qd);
        let wr = LogOneForm::omega_r(&qd);
        let xh = LogVectorField::xh(&qd);
        let r = LogVectorField::radial(&qd);
        assert_eq!(eval_pairing(&wh, &r), Series2::one(qd.weights));
        assert!(eval_pairing(&wh, &xh).is_zero());
        assert_eq!(eval_pairing(&wr, &xh), Series2::one(qd.weights));
        let (x, y) = (Complex64::new(0.3, 0.7), Complex64::new(-0.4, 0.2));
        assert!((eval_pairing_numeric(&wr, &xh, &qd, x, y).unwrap() - 1.0).norm() < 1e-13);
        assert!(eval_pairing_numeric(&wh, &xh, &qd, x, y).unwrap().norm() < 1e-13);
    }

    #[test]
    fn differential_matches_cartesian() {
        let qd = cusp();
        let f = Series2::from_terms(qd.weights, [(1, 1, qi(3)), (2, 0, qi(-1))], EXACT);
        let df = LogOneForm::differential(&f, &qd);
        let (x, y) = (Complex64::new(0.6, -0.1), Complex64::new(0.2, 0.5));
        let (fx, fy) = df.explicit_at(&qd, x, y).unwrap();
        assert!((fx - f.partial_x().eval(x, y)).norm() < 1e-12);
        assert!((fy - f.partial_y().eval(x, y)).norm() < 1e-12);
    }

    #[test]
    fn exterior_examples() {
        let qd = cusp();
        assert!(exterior_d(&LogOneForm::omega_h(&qd), &qd).is_zero());
        assert_eq!(exterior_d(&LogOneForm::omega_r(&qd), &qd), qd.const_fn(qi(-1)));
        let hw = LogOneForm::new(qd.h.clone(), qd.zero_fn(EXACT));
        assert!(exterior_d(&hw, &qd).is_zero());
        let one = Series2::one(qd.weights);
        assert!(wedge(&LogOneForm::omega_h(&qd), &LogOneForm::omega_h(&qd)).is_zero());
        assert_eq!(wedge(&LogOneForm::omega_h(&qd), &LogOneForm::omega_r(&qd)), one);
        let w2 = LogOneForm::omega_h(&qd).scale(&qi(2));
        let w3 = LogOneForm::omega_r(&qd).scale(&qi(3));
        assert_eq!(wedge(&w2, &w3), one.scale(&qi(6)));
    }

    #[test]
    fn gv_examples() {
        let qd = cusp();
        let zero = LogOneForm::zero(&qd);
        assert!(gv_verify(&[LogOneForm::omega_h(&qd), zero.clone()], &qd, 20).passed());
        assert_eq!(
            gv_verify(&[LogOneForm::omega_r(&qd), zero], &qd, 20),
            GvOutcome::Fail {
                relation: 0,
                residual_order: 0
            }
        );
    }

    #[test]
    fn gv_search_small_cases() {
        let qd = cusp();
        assert!(gv_search_length2(&LogVectorField::xh(&qd), &qd, 8, 8)
            .unwrap()
            .is_feasible());
        let b = qd.x().mul(&qd.h);
        let x = LogVectorField::new(Series2::one(qd.weights), b);
        match gv_search_length2(&x, &qd, 12, 12).unwrap() {
            GvSearch::Feasible(w1) => {
                let seq = [LogOneForm::dual_of(&x), w1];
                assert!(gv_verify(&seq, &qd, 12).passed());
            }
            other => panic!("expected feasible, got {other:?}"),
        }
        let b2 = qd.h.mul(&qd.h).add(&qd.x().mul(&qd.h));
        let x2 = LogVectorField::new(Series2::one(qd.weights), b2);
        assert!(!gv_search_length2(&x2, &qd, 12, 12).unwrap().is_feasible());
    }
}
