//! Germs of diffeomorphisms of (C,0) and one-variable vector fields.
//!
//! A vector field `f(z) d/dz` is stored as its coefficient series `f`.
//! Everything is generic over the scalar kind: the symbolic path uses
//! rationals, holonomy generators use complex floats.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::scalar::Scalar;
use crate::series::{Laurent1, Series1, SeriesError, EXACT};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OnevarError {
    #[error("germ is not invertible (zero linear part or nonzero constant)")]
    NonInvertible,
    #[error("germ is not tangent to the identity")]
    NotTangentToIdentity,
    #[error("vector field has order {order}, at least {needed} required")]
    FieldOrder { order: u32, needed: u32 },
    #[error("order {order} is below the field order {needed}")]
    OrderTooLow { order: i64, needed: i64 },
    #[error("exp of the linear part is not representable in this scalar kind")]
    LinearFlowNotRepresentable,
    #[error("leading coefficient has no principal {k}-th root in this scalar kind")]
    NoPrincipalRoot { k: u32 },
    #[error("term-by-term conjugation obstructed at z^{exponent}")]
    Obstructed { exponent: u32 },
    #[error("rational function with zero denominator")]
    ZeroDenominator,
    #[error("no generators given")]
    NoGenerators,
    #[error(transparent)]
    Series(#[from] SeriesError),
}

const FLOAT_TOL: f64 = 1e-10;

/// Germ `g(z) = alpha z + ...` of a local diffeomorphism.
#[derive(Clone, Debug, PartialEq)]
pub struct Germ1<S> {
    g: Series1<S>,
}

impl<S: Scalar> Germ1<S> {
    pub fn new(g: Series1<S>) -> Result<Self, OnevarError> {
        if !g.coeff(0).is_zero() || g.coeff(1).is_negligible(FLOAT_TOL) {
            return Err(OnevarError::NonInvertible);
        }
        Ok(Germ1 { g })
    }

    pub fn identity(order: i64) -> Self {
        Germ1 {
            g: Series1::identity(order),
        }
    }

    pub fn linear(alpha: S, order: i64) -> Result<Self, OnevarError> {
        Self::new(Series1::monomial(alpha, 1, order))
    }

    pub fn series(&self) -> &Series1<S> {
        &self.g
    }

    pub fn alpha(&self) -> S {
        self.g.coeff(1)
    }

    pub fn order(&self) -> i64 {
        self.g.trunc()
    }

    /// Same germ known to `min(order, n)`; exact germs get trunc `n`.
    pub fn with_order(&self, n: i64) -> Self {
        let t = self.order().min(n);
        Germ1 {
            g: self.g.truncated(t).with_trunc(t),
        }
    }

    fn is_tangent(&self) -> bool {
        (self.alpha() - S::one()).is_negligible(FLOAT_TOL)
    }

    /// Tangency level `k` with `g - z` of order `k + 1`, when tangent to the
    /// identity and not the identity to the known order.
    pub fn tangency(&self) -> Option<u32> {
        if !self.is_tangent() {
            return None;
        }
        let d = self.g.sub(&Series1::identity(EXACT)).chop(FLOAT_TOL);
        d.order().filter(|&o| o >= 2).map(|o| o - 1)
    }

    /// Identity to the known order (numerically, for floats).
    pub fn is_identity(&self) -> bool {
        self.is_tangent() && self.tangency().is_none()
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Self) -> Result<Self, OnevarError> {
        Self::new(self.g.compose(&other.g)?)
    }

    pub fn inverse(&self) -> Result<Self, OnevarError> {
        Self::new(self.g.reversion()?)
    }

    /// Iterate `n` times (negative `n` iterates the inverse).
    pub fn power(&self, n: i64) -> Result<Self, OnevarError> {
        let base = if n < 0 { self.inverse()? } else { self.clone() };
        let mut acc = Self::identity(self.order());
        for _ in 0..n.unsigned_abs() {
            acc = acc.compose(&base)?;
        }
        Ok(acc)
    }

    /// `self ∘ other ∘ self⁻¹ ∘ other⁻¹`.
    pub fn commutator(&self, other: &Self) -> Result<Self, OnevarError> {
        self.compose(other)?
            .compose(&self.inverse()?)?
            .compose(&other.inverse()?)
    }

    pub fn map<T: Scalar, F: Fn(&S) -> T>(&self, f: F) -> Result<Germ1<T>, OnevarError> {
        Germ1::new(self.g.map(f))
    }
}

impl<S: Scalar> fmt::Display for Germ1<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.g.render("z"))
    }
}

/// `θ · d/dz` applied to `f`, knowing `f` to `trunc(f)`.
fn derivation<S: Scalar>(theta: &Series1<S>, f: &Series1<S>, cap: i64) -> Series1<S> {
    theta.mul_tracked(&f.derivative(), cap)
}

/// Time-`t` flow of `θ d/dz`, known to order `n`.
///
/// For `ord θ >= 2` this is the Lie series `Σ t^k/k! θ^k(z)`, where each
/// application of the field raises the order. For `ord θ = 1` the linear
/// part is exponentiated (when the scalar kind allows it) and the rest is
/// solved term by term from `θ(φ) = θ φ'`.
pub fn flow_exp<S: Scalar>(theta: &Series1<S>, t: &S, n: i64) -> Result<Germ1<S>, OnevarError> {
    if !theta.coeff(0).is_zero() {
        return Err(OnevarError::NonInvertible);
    }
    let n = n.min(theta.trunc());
    let theta = theta.truncated(n);
    let Some(v) = theta.order() else {
        return Ok(Germ1::identity(n));
    };
    if n < v as i64 {
        return Err(OnevarError::OrderTooLow {
            order: n,
            needed: v as i64,
        });
    }
    if t.is_zero() {
        return Ok(Germ1::identity(n));
    }
    if v == 1 {
        return linear_flow(&theta, t, n);
    }
    let mut term = Series1::identity(n);
    let mut acc = term.clone();
    let mut k: i64 = 0;
    loop {
        k += 1;
        term = derivation(&theta, &term, n).scale(&(t.clone() / S::from_i64(k)));
        if term.is_zero() {
            break;
        }
        acc = acc.add(&term);
    }
    Germ1::new(acc.with_trunc(n))
}

fn linear_flow<S: Scalar>(theta: &Series1<S>, t: &S, n: i64) -> Result<Germ1<S>, OnevarError> {
    let c = theta.coeff(1);
    let alpha = (c.clone() * t.clone())
        .try_exp()
        .ok_or(OnevarError::LinearFlowNotRepresentable)?;
    let mut phi = Series1::monomial(alpha, 1, n);
    for m in 2..=n.max(1) as u32 {
        let lhs = theta.compose(&phi)?.coeff(m);
        let rhs = theta.mul_tracked(&phi.derivative(), n).coeff(m);
        let delta = (lhs - rhs) / (c.clone() * S::from_i64(m as i64 - 1));
        phi = phi.add(&Series1::monomial(delta, m, n));
    }
    Germ1::new(phi)
}

/// Formal logarithm of a tangent-to-identity germ.
#[derive(Clone, Debug, PartialEq)]
pub struct FormalLog<S> {
    pub theta: Series1<S>,
    /// The germ was the identity to its order; `theta` is zero.
    pub identity: bool,
}

/// The unique `θ` of order `>= 2` with `exp(θ d/dz) = g`, solved term by
/// term: the coefficient of `z^m` in the flow is `θ_m` plus a polynomial in
/// lower coefficients.
pub fn formal_log<S: Scalar>(g: &Germ1<S>) -> Result<FormalLog<S>, OnevarError> {
    if !g.is_tangent() {
        return Err(OnevarError::NotTangentToIdentity);
    }
    let n = g.order();
    let Some(k) = g.tangency() else {
        return Ok(FormalLog {
            theta: Series1::zero(n),
            identity: true,
        });
    };
    let mut theta = Series1::zero(n);
    for m in (k + 1)..=(n as u32) {
        let flow = if theta.is_zero() {
            Series1::identity(n)
        } else {
            flow_exp(&theta, &S::one(), m as i64)?.series().clone()
        };
        let err = g.series().coeff(m) - flow.coeff(m);
        if !err.is_zero() {
            theta = theta.add(&Series1::monomial(err, m, n));
        }
    }
    Ok(FormalLog { theta, identity: false })
}

/// Coefficient of `φ_* (θ d/dz) = ((θ φ') ∘ φ⁻¹) d/dz`.
pub fn pushforward<S: Scalar>(theta: &Series1<S>, phi: &Germ1<S>) -> Result<Series1<S>, OnevarError> {
    let n = theta.trunc().min(phi.order());
    let tp = theta.mul_tracked(&phi.series().derivative(), n);
    Ok(tp.compose(&phi.with_order(n).inverse()?.g)?)
}

/// `z^{k+1}/(1 + λ z^k)` expanded to order `n`.
pub fn model_field<S: Scalar>(k: u32, lambda: &S, n: i64) -> Series1<S> {
    let mut out = Series1::zero(n);
    let mut c = S::one();
    let mut e = k + 1;
    while e as i64 <= n {
        out = out.add(&Series1::monomial(c.clone(), e, n));
        c = -(c * lambda.clone());
        if k == 0 {
            break;
        }
        e += k;
    }
    out
}

/// Formal normal form of a vector field of order `k + 1 >= 2`.
#[derive(Clone, Debug, PartialEq)]
pub struct VfNormalForm<S> {
    pub k: u32,
    pub lambda: S,
    /// Leading coefficient of the input field.
    pub lead: S,
    /// Conjugator `Φ` with `Φ_* θ = z^{k+1}/(1+λz^k)`.
    pub phi: Germ1<S>,
    pub order: i64,
}

/// Normal form `z^{k+1}/(1+λz^k) d/dz` of `θ`. The leading coefficient is
/// first scaled to 1 by `z ↦ βz` with `β` the principal `k`-th root of the
/// leading coefficient, then a tangent-to-identity conjugator is solved
/// term by term; its coefficient at `z^{k+1}` is free and set to zero.
pub fn vf_normal_form<S: Scalar>(theta: &Series1<S>) -> Result<VfNormalForm<S>, OnevarError> {
    let v = theta.order().unwrap_or(0);
    if v < 2 {
        return Err(OnevarError::FieldOrder { order: v, needed: 2 });
    }
    let k = v - 1;
    let n = theta.trunc();
    let lambda = theta.residue()?;
    let lead = theta.coeff(v);
    let beta = lead.principal_root(k).ok_or(OnevarError::NoPrincipalRoot { k })?;
    let scaling = Germ1::linear(beta, n)?;
    let th1 = pushforward(theta, &scaling)?;
    let target = model_field(k, &lambda, n);

    // Solve target(φ) = θ1 φ' with φ = z + Σ φ_j z^j; φ_j enters the
    // coefficient of z^{k+j} with factor (k + 1 - j).
    let top = (n - k as i64).max(1);
    // φ is carried at trunc n: its unset coefficients are zero and only
    // enter above the exponent being solved.
    let mut phi = Series1::identity(n);
    for j in 2..=top as u32 {
        let e = k + j;
        let lhs = target.compose(&phi)?.coeff(e);
        let rhs = th1.mul_tracked(&phi.derivative(), n).coeff(e);
        let err = lhs - rhs;
        if j == k + 1 {
            if !err.is_negligible(FLOAT_TOL) {
                return Err(OnevarError::Obstructed { exponent: e });
            }
            continue;
        }
        let step = err / S::from_i64(j as i64 - k as i64 - 1);
        phi = phi.add(&Series1::monomial(step, j, n));
    }
    let phi = Germ1::new(phi.truncated(top))?.compose(&scaling.with_order(top))?;
    Ok(VfNormalForm {
        k,
        lambda,
        lead,
        phi,
        order: top,
    })
}

/// Polynomial quotient `num(x)/den(x)` with exact polynomial parts.
#[derive(Clone, Debug, PartialEq)]
pub struct RationalFunction<S> {
    num: Series1<S>,
    den: Series1<S>,
}

impl<S: Scalar> RationalFunction<S> {
    pub fn new(num: Series1<S>, den: Series1<S>) -> Result<Self, OnevarError> {
        if den.is_zero() {
            return Err(OnevarError::ZeroDenominator);
        }
        Ok(RationalFunction {
            num: num.with_trunc(EXACT),
            den: den.with_trunc(EXACT),
        })
    }

    pub fn polynomial(p: Series1<S>) -> Self {
        RationalFunction {
            num: p.with_trunc(EXACT),
            den: Series1::constant(S::one(), EXACT),
        }
    }

    /// `c / x`.
    pub fn c_over_x(c: S) -> Self {
        RationalFunction {
            num: Series1::constant(c, EXACT),
            den: Series1::identity(EXACT),
        }
    }

    pub fn numerator(&self) -> &Series1<S> {
        &self.num
    }

    pub fn denominator(&self) -> &Series1<S> {
        &self.den
    }

    /// Laurent expansion of `self ∘ y` for a series `y` without constant term.
    pub fn laurent_at(&self, y: &Series1<S>) -> Result<Laurent1<S>, OnevarError> {
        let n = Laurent1::from_series(&self.num.compose(y)?);
        let d = Laurent1::from_series(&self.den.compose(y)?);
        if d.is_zero() {
            return Err(OnevarError::ZeroDenominator);
        }
        Ok(n.div(&d)?)
    }

    pub fn render(&self) -> String {
        if self.den.len() == 1 && self.den.coeff(0) == S::one() {
            return self.num.render("x");
        }
        let wrap = |s: &Series1<S>| {
            if s.len() > 1 {
                format!("({})", s.render("x"))
            } else {
                s.render("x")
            }
        };
        format!("{}/{}", wrap(&self.num), wrap(&self.den))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum GroupoidKind {
    G0,
    G1n,
    G2,
    G3,
    Ginf,
}

/// One of the five transverse D-groupoid equations, with `y = g(x)` and
/// `y_k` the derivatives of `g`:
///
/// - `G0`: `h(y) - h(x)`
/// - `G1n`: `η(y) y_1^n - η(x)`
/// - `G2`: `μ(y) y_1 + y_2/y_1 - μ(x)`
/// - `G3`: `ν(y) y_1^2 + 2 y_3/y_1 - 3 (y_2/y_1)^2 - ν(x)`
/// - `Ginf`: no equation.
///
/// The order-three equation uses the third derivative (Schwarzian
/// structure); a transcription with `y_2` in the middle term would be of
/// order two.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupoidEq<S> {
    pub kind: GroupoidKind,
    pub coefficient: Option<RationalFunction<S>>,
    pub n: u32,
}

impl<S: Scalar> GroupoidEq<S> {
    pub fn g0(h: RationalFunction<S>) -> Self {
        GroupoidEq {
            kind: GroupoidKind::G0,
            coefficient: Some(h),
            n: 0,
        }
    }

    pub fn g1n(eta: RationalFunction<S>, n: u32) -> Self {
        GroupoidEq {
            kind: GroupoidKind::G1n,
            coefficient: Some(eta),
            n,
        }
    }

    pub fn g2(mu: RationalFunction<S>) -> Self {
        GroupoidEq {
            kind: GroupoidKind::G2,
            coefficient: Some(mu),
            n: 0,
        }
    }

    pub fn g3(nu: RationalFunction<S>) -> Self {
        GroupoidEq {
            kind: GroupoidKind::G3,
            coefficient: Some(nu),
            n: 0,
        }
    }

    pub fn ginf() -> Self {
        GroupoidEq {
            kind: GroupoidKind::Ginf,
            coefficient: None,
            n: 0,
        }
    }

    pub fn render(&self) -> String {
        let c = self.coefficient.as_ref().map(|c| c.render()).unwrap_or_default();
        match self.kind {
            GroupoidKind::G0 => format!("G0({c})"),
            GroupoidKind::G1n => format!("G1n({c}, {})", self.n),
            GroupoidKind::G2 => format!("G2({c})"),
            GroupoidKind::G3 => format!("G3({c})"),
            GroupoidKind::Ginf => "Ginf".into(),
        }
    }
}

/// Residual of `eq` on `g`, as a Laurent series in `x` known to order
/// about `n - 2` (each derivative of `g` costs one order).
pub fn groupoid_residual<S: Scalar>(eq: &GroupoidEq<S>, g: &Germ1<S>, n: i64) -> Result<Laurent1<S>, OnevarError> {
    let y = g.with_order(n).g;
    let x = Series1::identity(n);
    let coef = match (&eq.kind, &eq.coefficient) {
        (GroupoidKind::Ginf, _) => return Ok(Laurent1::zero(n)),
        (_, Some(c)) => c,
        (_, None) => return Err(OnevarError::ZeroDenominator),
    };
    let cy = coef.laurent_at(&y)?;
    let cx = coef.laurent_at(&x)?;
    let y1 = Laurent1::from_series(&y.derivative());
    let y2 = Laurent1::from_series(&y.derivative().derivative());
    let lhs = match eq.kind {
        GroupoidKind::G0 => cy,
        GroupoidKind::G1n => {
            let mut acc = cy;
            for _ in 0..eq.n {
                acc = acc.mul(&y1);
            }
            acc
        }
        GroupoidKind::G2 => cy.mul(&y1).add(&y2.div(&y1)?),
        GroupoidKind::G3 => {
            let y3 = Laurent1::from_series(&y.derivative().derivative().derivative());
            let r = y2.div(&y1)?;
            cy.mul(&y1)
                .mul(&y1)
                .add(&y3.div(&y1)?.scale(&S::from_i64(2)))
                .sub(&r.mul(&r).scale(&S::from_i64(3)))
        }
        GroupoidKind::Ginf => unreachable!(),
    };
    Ok(lhs.sub(&cx))
}

/// `a'/a` for `a = (1 + λx^k)/x^{k+1}`, i.e.
/// `-((k+1) + λx^k) / (x (1 + λx^k))`.
pub fn model_g2_coefficient<S: Scalar>(k: u32, lambda: &S) -> RationalFunction<S> {
    let num = Series1::from_coeffs([(0, -S::from_i64(k as i64 + 1)), (k, -lambda.clone())], EXACT);
    let den = Series1::from_coeffs([(1, S::one()), (k + 1, lambda.clone())], EXACT);
    RationalFunction { num, den }
}

/// `a = (1 + λx^k)/x^{k+1}`.
pub fn model_form<S: Scalar>(k: u32, lambda: &S) -> RationalFunction<S> {
    RationalFunction {
        num: Series1::from_coeffs([(0, S::one()), (k, lambda.clone())], EXACT),
        den: Series1::monomial(S::one(), k + 1, EXACT),
    }
}

pub const WORD_LENGTH: u32 = 4;
const MAX_RESONANCE: u32 = 24;

/// A tangent-to-identity element found while exploring the group.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentElement<S> {
    /// Word in the generators, e.g. `g0^2` or `[g0,g1]`.
    pub word: String,
    pub theta: Series1<S>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum GroupVerdict<S> {
    /// No nontrivial tangent-to-identity element; abelian to the order.
    FormallyLinearizableCandidate,
    /// Rank-one θ-span, realized by the model group of `z^{k+1}/(1+λz^k)`.
    SolvableModel { k: u32, lambda: S },
    /// Rank one, abelian, all times commensurable: the tangent subgroup is
    /// (formally) generated by one element.
    ExceptionalCandidate {
        k: u32,
        lambda: S,
        /// Only one generator contributes tangent elements.
        single_generator: bool,
    },
    /// Two tangent elements with independent logarithms.
    NotSolvableCertificate {
        pair: (usize, usize),
        /// First nonzero coefficient of the bracket of the two logs.
        bracket_order: Option<u32>,
    },
}

impl<S> GroupVerdict<S> {
    pub fn kind(&self) -> &'static str {
        match self {
            GroupVerdict::FormallyLinearizableCandidate => "FormallyLinearizableCandidate",
            GroupVerdict::SolvableModel { .. } => "SolvableModel",
            GroupVerdict::ExceptionalCandidate { .. } => "ExceptionalCandidate",
            GroupVerdict::NotSolvableCertificate { .. } => "NotSolvableCertificate",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroupClassification<S> {
    pub verdict: GroupVerdict<S>,
    /// Upper bound for the Galois closure, in the normalizing coordinate.
    pub upper_bound: Option<GroupoidEq<S>>,
    /// Conjugator to the normalizing coordinate (model verdicts only).
    pub conjugator: Option<Germ1<S>>,
    pub linear_parts: Vec<S>,
    pub abelian: bool,
    pub tangent: Vec<TangentElement<S>>,
    pub order: i64,
    pub word_length: u32,
}

impl<S: Scalar> GroupClassification<S> {
    pub fn label(&self) -> String {
        format!("at order {}, word length {}", self.order, self.word_length)
    }
}

/// Smallest `q` with `α^q = 1`.
fn resonance<S: Scalar>(alpha: &S) -> Option<u32> {
    let mut p = alpha.clone();
    for q in 1..=MAX_RESONANCE {
        if (p.clone() - S::one()).is_negligible(FLOAT_TOL) {
            return Some(q);
        }
        p = p * alpha.clone();
    }
    None
}

/// Rank of coefficient rows by Gaussian elimination with partial pivoting;
/// exact for rationals.
fn span_rank<S: Scalar>(rows: &[Series1<S>], n: i64) -> (usize, Vec<usize>) {
    let cols = n.max(0) as u32 + 1;
    let mut m: Vec<Vec<S>> = rows.iter().map(|r| (0..cols).map(|e| r.coeff(e)).collect()).collect();
    let scale = m.iter().flatten().map(|c| c.magnitude()).fold(0.0, f64::max).max(1.0);
    let tol = FLOAT_TOL * scale;
    let mut index: Vec<usize> = (0..m.len()).collect();
    let mut r = 0;
    for c in 0..cols as usize {
        if r == m.len() {
            break;
        }
        let best = (r..m.len())
            .filter(|&i| !m[i][c].is_negligible(tol))
            .max_by(|&a, &b| m[a][c].magnitude().total_cmp(&m[b][c].magnitude()));
        let Some(p) = best else {
            continue;
        };
        m.swap(r, p);
        index.swap(r, p);
        for i in r + 1..m.len() {
            let f = m[i][c].clone() / m[r][c].clone();
            let (top, bottom) = m.split_at_mut(i);
            for (v, pv) in bottom[0][c..cols as usize].iter_mut().zip(&top[r][c..cols as usize]) {
                *v = v.clone() - f.clone() * pv.clone();
            }
        }
        r += 1;
    }
    let mut pivots = index[..r].to_vec();
    pivots.sort_unstable();
    (r, pivots)
}

/// Formal classification of the group generated by `generators`, exploring
/// powers of resonant generators and pairwise commutators.
pub fn classify_group<S: Scalar>(generators: &[Germ1<S>], n: i64) -> Result<GroupClassification<S>, OnevarError> {
    if generators.is_empty() {
        return Err(OnevarError::NoGenerators);
    }
    let gens: Vec<Germ1<S>> = generators.iter().map(|g| g.with_order(n)).collect();
    let linear_parts: Vec<S> = gens.iter().map(|g| g.alpha()).collect();

    let mut tangent = Vec::new();
    let mut sources = Vec::new();
    for (i, g) in gens.iter().enumerate() {
        if let Some(q) = resonance(&g.alpha()) {
            let gq = g.power(q as i64)?;
            if !gq.is_identity() {
                let word = if q == 1 { format!("g{i}") } else { format!("g{i}^{q}") };
                tangent.push(TangentElement {
                    word,
                    theta: formal_log(&gq)?.theta,
                });
                sources.push(i);
            }
        }
    }
    let mut abelian = true;
    for i in 0..gens.len() {
        for j in i + 1..gens.len() {
            let c = gens[i].commutator(&gens[j])?;
            if !c.is_identity() {
                abelian = false;
                tangent.push(TangentElement {
                    word: format!("[g{i},g{j}]"),
                    theta: formal_log(&c)?.theta,
                });
            }
        }
    }

    let mut out = GroupClassification {
        verdict: GroupVerdict::FormallyLinearizableCandidate,
        upper_bound: Some(GroupoidEq::g1n(RationalFunction::c_over_x(S::one()), 1)),
        conjugator: None,
        linear_parts,
        abelian,
        tangent,
        order: n,
        word_length: WORD_LENGTH,
    };
    if out.tangent.is_empty() {
        return Ok(out);
    }

    let thetas: Vec<Series1<S>> = out.tangent.iter().map(|t| t.theta.clone()).collect();
    let tmax = thetas.iter().map(|t| t.trunc()).min().unwrap_or(n);
    let (rank, pivots) = span_rank(&thetas, tmax);
    if rank >= 2 {
        let (a, b) = (pivots[0], pivots[1]);
        let br = thetas[a].field_bracket(&thetas[b]).chop(FLOAT_TOL);
        out.verdict = GroupVerdict::NotSolvableCertificate {
            pair: (a, b),
            bracket_order: br.order(),
        };
        out.upper_bound = Some(GroupoidEq::ginf());
        return Ok(out);
    }

    let base = &thetas[0];
    let v = base.order().unwrap_or(2);
    let lead = base.coeff(v);
    let unit_theta = base.scale(&(S::one() / lead.clone()));
    let nf = vf_normal_form(&unit_theta)?;
    let commensurable = thetas
        .iter()
        .all(|t| (t.coeff(v) / lead.clone()).rational_hint(50, 1e-9).is_some());
    let k = nf.k;
    let roots_of_unity = out.linear_parts.iter().all(|a| {
        let mut p = S::one();
        for _ in 0..k {
            p = p * a.clone();
        }
        (p - S::one()).is_negligible(FLOAT_TOL)
    });
    out.upper_bound = Some(if abelian && roots_of_unity {
        GroupoidEq::g1n(model_form(k, &nf.lambda), 1)
    } else {
        GroupoidEq::g2(model_g2_coefficient(k, &nf.lambda))
    });
    out.verdict = if abelian && commensurable {
        let first = sources.first().copied();
        GroupVerdict::ExceptionalCandidate {
            k,
            lambda: nf.lambda.clone(),
            single_generator: sources.iter().all(|&s| Some(s) == first),
        }
    } else {
        GroupVerdict::SolvableModel {
            k,
            lambda: nf.lambda.clone(),
        }
    };
    out.conjugator = Some(nf.phi);
    Ok(out)
}

/// `Φ ∘ g ∘ Φ⁻¹`.
pub fn conjugate<S: Scalar>(g: &Germ1<S>, phi: &Germ1<S>) -> Result<Germ1<S>, OnevarError> {
    let n = g.order().min(phi.order());
    let p = phi.with_order(n);
    p.compose(&g.with_order(n))?.compose(&p.inverse()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{q, qi, Q};
    use num_complex::Complex64;

    fn s(c: &[i64], t: i64) -> Series1<Q> {
        Series1::from_dense(&c.iter().map(|&x| qi(x)).collect::<Vec<_>>(), t)
    }

    fn geometric(c: i64, n: i64) -> Series1<Q> {
        // z/(1 - c z)
        Series1::from_coeffs((1..=n as u32).map(|e| (e, qi(c).pow(e as i32 - 1))), n)
    }

    #[test]
    fn flow_of_z_squared() {
        let g = flow_exp(&s(&[0, 0, 1], EXACT), &qi(1), 15).unwrap();
        assert_eq!(g.series(), &geometric(1, 15));
        let id = flow_exp(&s(&[0, 0, 1, 4], EXACT), &qi(0), 15).unwrap();
        assert!(id.is_identity());
        assert!(flow_exp(&Series1::<Q>::zero(10), &qi(3), 10).unwrap().is_identity());
    }

    #[test]
    fn flow_group_law() {
        let th = s(&[0, 0, 1, -2, 0, 3], EXACT);
        let a = flow_exp(&th, &q(2, 3), 20).unwrap();
        let b = flow_exp(&th, &q(-5, 7), 20).unwrap();
        let ab = flow_exp(&th, &(q(2, 3) + q(-5, 7)), 20).unwrap();
        assert!(a.compose(&b).unwrap().series().agrees_with(ab.series(), 20));
    }

    #[test]
    fn linear_flows() {
        let th = s(&[0, 2, 1], EXACT);
        assert_eq!(flow_exp(&th, &qi(1), 8), Err(OnevarError::LinearFlowNotRepresentable));
        let thc = th.map(Complex64::from_q);
        let t = Complex64::new(0.3, 0.2);
        let a = flow_exp(&thc, &t, 12).unwrap();
        let b = flow_exp(&thc, &t, 12).unwrap();
        let ab = flow_exp(&thc, &(t + t), 12).unwrap();
        assert!((a.alpha() - (Complex64::new(2.0, 0.0) * t).exp()).norm() < 1e-14);
        assert!(a.compose(&b).unwrap().series().max_abs_diff(ab.series(), 12) < 1e-10);
    }

    #[test]
    fn formal_log_examples() {
        let g = Germ1::new(geometric(1, 20)).unwrap();
        let l = formal_log(&g).unwrap();
        assert!(l.theta.agrees_with(&s(&[0, 0, 1], EXACT), 20));
        let g2 = Germ1::new(geometric(2, 20)).unwrap();
        assert!(formal_log(&g2).unwrap().theta.agrees_with(&s(&[0, 0, 2], EXACT), 20));
        let id = formal_log(&Germ1::<Q>::identity(10)).unwrap();
        assert!(id.identity && id.theta.is_zero());
        let lin = Germ1::linear(qi(2), 10).unwrap();
        assert_eq!(formal_log(&lin), Err(OnevarError::NotTangentToIdentity));
    }

    #[test]
    fn normal_form_examples() {
        let m = model_field(1, &qi(5), 12);
        let nf = vf_normal_form(&m).unwrap();
        assert_eq!((nf.k, nf.lambda.clone()), (1, qi(5)));
        assert!(nf.phi.is_identity());
        let nf = vf_normal_form(&s(&[0, 0, 1, 1], 12)).unwrap();
        assert_eq!((nf.k, nf.lambda), (1, qi(-1)));
        assert!(matches!(
            vf_normal_form(&s(&[0, 1, 1], 8)),
            Err(OnevarError::FieldOrder { .. })
        ));
    }

    #[test]
    fn normal_form_conjugator_works() {
        let th = s(&[0, 0, 0, 4, 1, -2, 3], 14);
        let nf = vf_normal_form(&th).unwrap();
        assert_eq!(nf.k, 2);
        let pushed = pushforward(&th, &nf.phi).unwrap();
        let model = model_field(2, &nf.lambda, 14);
        assert!(pushed.agrees_with(&model, nf.order));
    }

    #[test]
    fn conjugate_then_recover() {
        let model = model_field(2, &qi(2), 16);
        let phi0 = Germ1::new(s(&[0, 1, 3, -1, 2], 16)).unwrap();
        let th = pushforward(&model, &phi0).unwrap();
        let nf = vf_normal_form(&th).unwrap();
        assert_eq!((nf.k, nf.lambda), (2, qi(2)));
    }

    #[test]
    fn residuals_match_examples() {
        let eta = RationalFunction::c_over_x(qi(1));
        let g1 = GroupoidEq::g1n(eta.clone(), 1);
        let lin = Germ1::new(s(&[0, 2], EXACT)).unwrap();
        assert!(groupoid_residual(&g1, &lin, 12).unwrap().vanishes_to(10, 0.0));

        let mu = RationalFunction::c_over_x(qi(-2));
        let hom = Germ1::new(geometric(1, 14)).unwrap();
        let r = groupoid_residual(&GroupoidEq::g2(mu), &hom, 14).unwrap();
        assert!(r.vanishes_to(11, 0.0));

        // 1/(1+x)
        let quad = Germ1::new(s(&[0, 1, 1], EXACT)).unwrap();
        let r = groupoid_residual(&g1, &quad, 12).unwrap();
        assert_eq!(r.valuation(), 0);
        assert_eq!(r.leading(), qi(1));
        for e in 0..=9 {
            assert_eq!(r.coeff(e), qi(if e % 2 == 0 { 1 } else { -1 }));
        }
    }

    #[test]
    fn g3_accepts_homographies() {
        // Möbius maps have zero Schwarzian.
        let g = Germ1::new(geometric(3, 14)).unwrap();
        let nu = RationalFunction::polynomial(Series1::zero(EXACT));
        let r = groupoid_residual(&GroupoidEq::g3(nu), &g, 14).unwrap();
        assert!(r.vanishes_to(10, 0.0));
        let g = Germ1::new(s(&[0, 1, 1], EXACT)).unwrap();
        let nu = RationalFunction::polynomial(Series1::zero(EXACT));
        let r = groupoid_residual(&GroupoidEq::g3(nu), &g, 14).unwrap();
        assert!(!r.vanishes_to(5, 0.0));
    }

    #[test]
    fn g0_and_ginf() {
        let h = RationalFunction::polynomial(s(&[0, 0, 1], EXACT));
        let minus = Germ1::linear(qi(-1), 10).unwrap();
        assert!(groupoid_residual(&GroupoidEq::g0(h.clone()), &minus, 10)
            .unwrap()
            .vanishes_to(8, 0.0));
        let two = Germ1::linear(qi(2), 10).unwrap();
        assert!(!groupoid_residual(&GroupoidEq::g0(h), &two, 10)
            .unwrap()
            .vanishes_to(8, 0.0));
        assert!(groupoid_residual(&GroupoidEq::ginf(), &two, 10).unwrap().is_zero());
    }

    #[test]
    fn classify_linear() {
        let c = classify_group(&[Germ1::linear(qi(2), EXACT).unwrap()], 20).unwrap();
        assert_eq!(c.verdict, GroupVerdict::FormallyLinearizableCandidate);
        let eq = c.upper_bound.unwrap();
        assert_eq!(eq.render(), "G1n(1/x, 1)");
    }

    #[test]
    fn classify_model_group() {
        let g = flow_exp(&s(&[0, 0, 1], EXACT), &qi(1), 20).unwrap();
        let minus = Germ1::linear(qi(-1), 20).unwrap();
        let c = classify_group(&[g.clone(), minus.clone()], 20).unwrap();
        assert_eq!(c.verdict, GroupVerdict::SolvableModel { k: 1, lambda: qi(0) });
        let eq = c.upper_bound.clone().unwrap();
        assert_eq!(eq.kind, GroupoidKind::G2);
        let phi = c.conjugator.unwrap();
        for gen in [g, minus] {
            let r = groupoid_residual(&eq, &conjugate(&gen, &phi).unwrap(), 22).unwrap();
            assert!(r.abs_trunc() >= 17 && r.vanishes_to(17, 0.0));
        }
    }

    #[test]
    fn classify_exceptional_and_non_solvable() {
        let th = model_field(1, &qi(3), 20);
        let a = flow_exp(&th, &qi(1), 20).unwrap();
        let b = flow_exp(&th, &q(1, 2), 20).unwrap();
        let c = classify_group(&[a.clone(), b], 20).unwrap();
        assert!(c.abelian);
        assert_eq!(
            c.verdict,
            GroupVerdict::ExceptionalCandidate {
                k: 1,
                lambda: qi(3),
                single_generator: false
            }
        );
        assert_eq!(c.upper_bound.unwrap().kind, GroupoidKind::G1n);

        let h = Germ1::new(geometric(1, 20)).unwrap();
        let other = Germ1::new(s(&[0, 1, 0, 1, 0, 2, 7], EXACT)).unwrap();
        let c = classify_group(&[h, other], 20).unwrap();
        match c.verdict {
            GroupVerdict::NotSolvableCertificate { pair, bracket_order } => {
                assert_eq!(pair, (0, 1));
                // [z^2, z^3 + ...] = z^4 + ...
                assert_eq!(bracket_order, Some(4));
            }
            v => panic!("unexpected {v:?}"),
        }
    }

    #[test]
    fn pushforward_preserves_residue() {
        let th = s(&[0, 0, 1, 2, -1, 5], 15);
        let phi = Germ1::new(s(&[0, 1, -2, 4, 1], 15)).unwrap();
        let pushed = pushforward(&th, &phi).unwrap();
        assert_eq!(pushed.residue().unwrap(), th.residue().unwrap());
    }
}
