//! The formal invariant: one-variable fields
//! `θ_i(t) = δ⁻¹ d_i(t^δ) t^{p_i+1} d/dt`, the reducibility rank test, the
//! final reduction of one `d_i`, and the Godbillon–Vey witness.

use num_complex::Complex64;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::linalg;
use crate::logforms::LogOneForm;
use crate::prenormal::PrenormalForm;
use crate::quasihomog::QuasiData;
use crate::scalar::{q, Scalar, Q};
use crate::series::{Series1, Series2, SeriesError, EXACT};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InvariantError {
    #[error("entry {0} is zero")]
    ZeroEntry(usize),
    #[error("no entry with index {0}")]
    NoSuchEntry(usize),
    #[error("verdict is not ReducibleDim1")]
    NotReducible,
    #[error(transparent)]
    Series(#[from] SeriesError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvariantEntry {
    pub index: usize,
    pub d: Series1<Q>,
    /// `deg a_i - δ0`.
    pub p: i64,
    /// `p / δ`.
    pub r: Q,
    /// `ord d_i`, `None` for a zero entry.
    pub k: Option<u32>,
    /// `δ k + p`.
    pub q: Option<i64>,
    pub theta: Series1<Q>,
}

impl InvariantEntry {
    pub fn is_zero(&self) -> bool {
        self.d.is_zero()
    }

    /// Residue of the field `θ_i`, when enough terms are known.
    pub fn residue(&self) -> Option<Q> {
        if self.theta.is_zero() {
            return None;
        }
        self.theta.residue().ok()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvariantFamily {
    pub delta: i64,
    pub delta0: i64,
    pub entries: Vec<InvariantEntry>,
    pub order: i64,
}

/// `δ⁻¹ d(t^δ) t^{p+1}` as a series in `t`.
pub fn uniformize(d: &Series1<Q>, delta: i64, p: i64) -> Series1<Q> {
    let inv = q(1, delta);
    let trunc = if d.is_exact() {
        EXACT
    } else {
        delta * (d.trunc() + 1) + p
    };
    Series1::from_coeffs(
        d.terms().map(|(j, c)| ((delta * j as i64 + p + 1) as u32, c * &inv)),
        trunc,
    )
}

pub fn extract_invariant(pf: &PrenormalForm, qd: &QuasiData) -> InvariantFamily {
    let entries =
        pf.d.iter()
            .enumerate()
            .map(|(i, d)| {
                let p = qd.cobasis[i].degree - qd.delta0;
                let k = d.order();
                InvariantEntry {
                    index: i,
                    d: d.clone(),
                    p,
                    r: q(p, qd.delta),
                    k,
                    q: k.map(|k| qd.delta * k as i64 + p),
                    theta: uniformize(d, qd.delta, p),
                }
            })
            .collect();
    InvariantFamily {
        delta: qd.delta,
        delta0: qd.delta0,
        entries,
        order: pf.order,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReducibilityVerdict {
    ReducibleDim1 {
        theta: Series1<Q>,
        /// Index of the entry used as `θ`, `None` in the first-integral case.
        base: Option<usize>,
        c: Vec<Q>,
        first_integral: bool,
        order: i64,
    },
    NotReducible {
        pair: (usize, usize),
        /// Exponent and value of the first nonzero coefficient of the
        /// bracket, if it is visible at the known truncation.
        bracket: Option<(u32, Q)>,
        order: i64,
    },
    InconclusiveAtOrder {
        needed: i64,
        available: i64,
    },
}

impl ReducibilityVerdict {
    pub fn kind(&self) -> &'static str {
        match self {
            ReducibilityVerdict::ReducibleDim1 { .. } => "ReducibleDim1",
            ReducibilityVerdict::NotReducible { .. } => "NotReducible",
            ReducibilityVerdict::InconclusiveAtOrder { .. } => "InconclusiveAtOrder",
        }
    }

    pub fn is_reducible(&self) -> bool {
        matches!(self, ReducibilityVerdict::ReducibleDim1 { .. })
    }
}

fn row(s: &Series1<Q>, m: i64) -> Vec<Q> {
    (0..=m.max(0) as u32).map(|e| s.coeff(e)).collect()
}

/// Rank of the span of the `θ_i` up to order `n`.
pub fn reducibility_test(inv: &InvariantFamily, n: i64) -> ReducibilityVerdict {
    let nonzero: Vec<&InvariantEntry> = inv.entries.iter().filter(|e| !e.theta.is_zero()).collect();
    if nonzero.is_empty() {
        return ReducibilityVerdict::ReducibleDim1 {
            theta: Series1::zero(n),
            base: None,
            c: vec![Q::zero(); inv.entries.len()],
            first_integral: true,
            order: n,
        };
    }
    let m = nonzero.iter().map(|e| e.theta.trunc()).fold(n, i64::min);
    let needed = nonzero.iter().filter_map(|e| e.q).max().unwrap_or(0) + 2;
    if m < needed {
        return ReducibilityVerdict::InconclusiveAtOrder { needed, available: m };
    }
    let rows: Vec<Vec<Q>> = nonzero.iter().map(|e| row(&e.theta, m)).collect();
    if linalg::rank(&rows) <= 1 {
        let base = nonzero[0];
        let lead = base.theta.order().expect("nonzero");
        let l = base.theta.coeff(lead);
        let c = inv.entries.iter().map(|e| e.theta.coeff(lead) / l.clone()).collect();
        return ReducibilityVerdict::ReducibleDim1 {
            theta: base.theta.truncated(m),
            base: Some(base.index),
            c,
            first_integral: false,
            order: m,
        };
    }
    for (x, ex) in nonzero.iter().enumerate() {
        for ey in &nonzero[x + 1..] {
            if linalg::rank(&[row(&ex.theta, m), row(&ey.theta, m)]) == 2 {
                let br = ex.theta.truncated(m).field_bracket(&ey.theta.truncated(m));
                let bracket = br.order().map(|o| (o, br.coeff(o)));
                return ReducibilityVerdict::NotReducible {
                    pair: (ex.index, ey.index),
                    bracket,
                    order: m,
                };
            }
        }
    }
    unreachable!("rank two implies an independent pair")
}

/// `d ↦ d(φ) (φ/z)^{r+1} / φ'` for tangent-to-identity `φ`.
pub fn lifted_action(d: &Series1<Q>, r: &Q, phi: &Series1<Q>) -> Result<Series1<Q>, SeriesError> {
    if d.is_zero() {
        return Ok(d.clone());
    }
    let n = d.trunc();
    let phi = phi.truncated(n + 1);
    let ratio = phi.shift_down(1)?.with_trunc(n);
    let dphi = phi.derivative().with_trunc(n);
    let composed = d.compose(&phi)?;
    let factor = ratio.powr(&(r + Q::one()))?;
    let out = composed.mul(&factor).div(&dphi)?;
    Ok(out.truncated(n))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FinalNormalForm {
    pub index: usize,
    pub m: u32,
    /// `None` when no obstruction is visible at the working order.
    pub n: Option<u32>,
    /// Provisional `0` when `n` is undetermined.
    pub lambda: Q,
    /// Leading coefficient of `d_i`, which a tangent-to-identity change
    /// cannot alter.
    pub lead: Q,
    /// Principal `t ↦ α t` scaling that makes the leading coefficient of
    /// `θ_i` equal to one.
    pub t_scaling: Complex64,
    pub phi: Series1<Q>,
    pub d: Vec<Series1<Q>>,
    pub order: i64,
    pub residue_before: Option<Q>,
    pub residue_after: Option<Q>,
}

impl FinalNormalForm {
    /// `lead · h^m / (1 + λ h^{m+n})` to the truncation of `d_i`.
    pub fn model(&self) -> Series1<Q> {
        let t = self.d[self.index].trunc();
        let den = match self.n {
            Some(n) => Series1::from_coeffs([(0, Q::one()), (self.m + n, self.lambda.clone())], t),
            None => Series1::constant(Q::one(), t),
        };
        Series1::monomial(self.lead.clone(), self.m, t)
            .div(&den)
            .expect("unit denominator")
    }
}

/// Normalize `d_i` by a one-variable change `h ↦ φ(h)`, term by term.
pub fn final_reduce(inv: &InvariantFamily, i: usize, n: i64) -> Result<FinalNormalForm, InvariantError> {
    let entry = inv.entries.get(i).ok_or(InvariantError::NoSuchEntry(i))?;
    let m = entry.k.ok_or(InvariantError::ZeroEntry(i))?;
    let delta = inv.delta;
    let mut d: Vec<Series1<Q>> = inv
        .entries
        .iter()
        .map(|e| e.d.truncated((n - e.p - inv.delta0).div_euclid(delta)))
        .collect();
    let lead = d[i].coeff(m);
    let r = entry.r.clone();
    let top = d[i].trunc();
    let mut phi = Series1::identity(top + 1);
    let mut obstruction: Option<(u32, Q)> = None;
    for e in m + 1..=top.max(m as i64) as u32 {
        let j = e - m;
        let target = match &obstruction {
            None => Q::zero(),
            Some((nn, lam)) => model_coeff(&lead, m, *nn, lam, e),
        };
        let cur = d[i].coeff(e);
        let factor = Q::from_i64(m as i64 - j as i64) + r.clone();
        if factor.is_zero() {
            if obstruction.is_none() {
                obstruction = Some((e - 2 * m, -(cur.clone() / lead.clone())));
            }
            continue;
        }
        let diff = cur - target;
        if diff.is_zero() {
            continue;
        }
        let s = -(diff / (lead.clone() * factor));
        let step = Series1::from_coeffs([(1, Q::one()), (j + 1, s)], top + 1);
        for (k, dk) in d.iter_mut().enumerate() {
            *dk = lifted_action(dk, &inv.entries[k].r, &step)?;
        }
        phi = phi.compose(&step)?;
    }
    let (n_out, lambda) = match obstruction {
        Some((nn, lam)) => (Some(nn), lam),
        None => (None, Q::zero()),
    };
    let q_i = entry.q.expect("nonzero entry");
    let c_theta = (lead.clone() / Q::from_i64(delta)).to_c64();
    let t_scaling = c_theta.powf(-1.0 / q_i as f64);
    let residue_after = uniformize(&d[i], delta, entry.p).residue().ok();
    Ok(FinalNormalForm {
        index: i,
        m,
        n: n_out,
        lambda,
        lead,
        t_scaling,
        phi,
        d,
        order: n,
        residue_before: entry.residue(),
        residue_after,
    })
}

fn model_coeff(lead: &Q, m: u32, n: u32, lam: &Q, e: u32) -> Q {
    // lead z^m Σ (-λ)^t z^{t(m+n)}
    if e < m || !(e - m).is_multiple_of((m + n).max(1)) {
        return Q::zero();
    }
    if m + n == 0 {
        return Q::zero();
    }
    let t = (e - m) / (m + n);
    let mut c = lead.clone();
    for _ in 0..t {
        c *= -lam.clone();
    }
    c
}

/// `(ω_N, ω_1)` with `ω_N = ω_h - D ω_R`, `D = Σ a_k d_k(h)`, and
/// `ω_1 = E(h) ω_h`, `E = -q_i - δ h u'(h)/u(h)`, `d_i = h^{k_i} u`.
pub fn gv_construct(
    verdict: &ReducibilityVerdict,
    pf: &PrenormalForm,
    inv: &InvariantFamily,
    qd: &QuasiData,
) -> Result<(LogOneForm, LogOneForm), InvariantError> {
    let ReducibilityVerdict::ReducibleDim1 { base, .. } = verdict else {
        return Err(InvariantError::NotReducible);
    };
    let dpoly = pf.coefficient(qd);
    let omega_n = LogOneForm::new(Series2::one(qd.weights).with_trunc(dpoly.trunc()), dpoly.neg());
    let Some(i) = *base else {
        return Ok((omega_n, LogOneForm::zero(qd)));
    };
    let entry = &inv.entries[i];
    let k = entry.k.expect("base entry is nonzero");
    let u = entry.d.shift_down(k)?;
    let log_der = u.derivative().div(&u)?.shift_up(1);
    let e =
        Series1::constant(Q::from_i64(-entry.q.expect("nonzero")), EXACT).sub(&log_der.scale(&Q::from_i64(qd.delta)));
    // Any extension of E past its known terms changes ω_N ∧ ω_1 only above
    // the order of D, and dω_1 = 0 for every function of h; the truncated
    // representative is therefore taken as exact.
    let e_of_h = Series2::compose_from(&e.with_trunc(EXACT), &qd.h)?;
    Ok((omega_n, LogOneForm::new(e_of_h, qd.zero_fn(EXACT))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logforms::gv_verify;
    use crate::scalar::qi;
    use crate::series::Weights;

    fn cusp() -> QuasiData {
        let w = Weights::new(2, 3);
        let h = Series2::from_terms(w, [(0, 2, qi(1)), (3, 0, qi(-1))], EXACT);
        QuasiData::new(&h, w).unwrap()
    }

    fn s(c: &[i64]) -> Series1<Q> {
        Series1::from_dense(&c.iter().map(|&x| qi(x)).collect::<Vec<_>>(), EXACT)
    }

    #[test]
    fn extraction_examples() {
        let qd = cusp();
        let pf = PrenormalForm::new(&qd, vec![s(&[]), s(&[0, 1])], 30);
        let inv = extract_invariant(&pf, &qd);
        assert!(inv.entries[0].theta.is_zero());
        let e = &inv.entries[1];
        assert_eq!((e.p, e.k, e.q), (1, Some(1), Some(7)));
        assert_eq!(e.theta.coeff(8), q(1, 6));
        assert_eq!(e.theta.len(), 1);
        let pf = PrenormalForm::new(&qd, vec![s(&[0, 0, 1]), s(&[0, 1])], 30);
        let inv = extract_invariant(&pf, &qd);
        assert_eq!(inv.entries[0].p, -1);
        assert_eq!(inv.entries[0].theta.coeff(12), q(1, 6));
    }

    #[test]
    fn verdict_examples() {
        let qd = cusp();
        let pf = PrenormalForm::new(&qd, vec![s(&[]), s(&[0, 1])], 30);
        let v = reducibility_test(&extract_invariant(&pf, &qd), 30);
        match v {
            ReducibilityVerdict::ReducibleDim1 { c, first_integral, .. } => {
                assert_eq!(c, vec![qi(0), qi(1)]);
                assert!(!first_integral);
            }
            other => panic!("{other:?}"),
        }
        let pf = PrenormalForm::new(&qd, vec![s(&[0, 0, 1]), s(&[0, 1])], 30);
        match reducibility_test(&extract_invariant(&pf, &qd), 30) {
            ReducibilityVerdict::NotReducible { pair, bracket, .. } => {
                assert_eq!(pair, (0, 1));
                assert_eq!(bracket, Some((19, q(-4, 36))));
            }
            other => panic!("{other:?}"),
        }
        let pf = PrenormalForm::new(&qd, vec![s(&[0, 3]), s(&[0, 1])], 30);
        assert!(!reducibility_test(&extract_invariant(&pf, &qd), 30).is_reducible());
        let zero = PrenormalForm::zero(&qd, 30);
        match reducibility_test(&extract_invariant(&zero, &qd), 30) {
            ReducibilityVerdict::ReducibleDim1 { first_integral, .. } => assert!(first_integral),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn final_reduction_keeps_residue() {
        let qd = cusp();
        let pf = PrenormalForm::new(&qd, vec![s(&[]), s(&[0, 1, 1])], 30);
        let inv = extract_invariant(&pf, &qd);
        let fnf = final_reduce(&inv, 1, 30).unwrap();
        assert_eq!(fnf.m, 1);
        assert_eq!(fnf.residue_before, fnf.residue_after);
        assert!(fnf.residue_before.is_some());
        assert!(fnf.d[1].agrees_with(&fnf.model(), fnf.d[1].trunc()));
        // The conjugator reproduces the normalized entry from the input.
        let direct = lifted_action(&inv.entries[1].d, &inv.entries[1].r, &fnf.phi).unwrap();
        assert!(direct.agrees_with(&fnf.d[1], fnf.d[1].trunc()));
    }

    #[test]
    fn final_reduction_fixed_point() {
        let qd = cusp();
        let pf = PrenormalForm::new(&qd, vec![s(&[]), s(&[0, 1])], 30);
        let fnf = final_reduce(&extract_invariant(&pf, &qd), 1, 30).unwrap();
        assert_eq!(fnf.n, None);
        assert_eq!(fnf.lambda, qi(0));
        assert!(fnf.phi.agrees_with(&Series1::identity(EXACT), fnf.phi.trunc()));
    }

    #[test]
    fn gv_witness_for_cusp() {
        let qd = cusp();
        let pf = PrenormalForm::new(&qd, vec![s(&[]), s(&[0, 1])], 30);
        let inv = extract_invariant(&pf, &qd);
        let v = reducibility_test(&inv, 30);
        let (wn, w1) = gv_construct(&v, &pf, &inv, &qd).unwrap();
        assert_eq!(w1.a.coeff(0, 0), qi(-7));
        assert_eq!(w1.a.len(), 1);
        assert!(gv_verify(&[wn.clone(), w1.clone()], &qd, 30).passed());
        assert!(!gv_verify(&[wn, w1.scale(&qi(-1))], &qd, 30).passed());
    }
}
