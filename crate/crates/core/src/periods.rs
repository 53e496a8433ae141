//! Periods on the Milnor fiber `h = z0` and the relative holonomy.
//!
//! On the fiber the horizontal form `η_j = a_j ω_R` becomes
//! `a_j (p2 y dx - p1 x dy) / (δ z0)`; it is integrated along loops in the
//! x-plane lifted to the curve by root tracking.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C;
use thiserror::Error;

use crate::onevar::{flow_exp, Germ1, OnevarError};
use crate::quasihomog::QuasiData;
use crate::scalar::{q_to_f64, rational_approx};
use crate::series::{Series1, Series2};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PeriodError {
    #[error("coincident y-roots over x = {x}: discriminant point")]
    Discriminant { x: C },
    #[error("degree in y drops over x = {x}")]
    DegreeDrop { x: C },
    #[error("h does not depend on y")]
    NoYDependence,
    #[error("root tracking collapsed at parameter {s} of segment {segment}")]
    StepCollapse { segment: usize, s: f64 },
    #[error("automatic cycles need h = a y^2 + c x^n; supply paths")]
    Unsupported,
    #[error("expected {expected} cycles, got {got}")]
    WrongCycleCount { expected: usize, got: usize },
    #[error("period matrix has rank {rank} < {mu}")]
    RankDeficient { rank: usize, mu: usize },
    #[error("lift of cycle {label} is not closed")]
    NotClosed { label: String },
    #[error("quadrature did not converge on cycle {label}")]
    Quadrature { label: String },
    #[error("period matrix is near singular (condition {cond:e})")]
    NearSingular { cond: f64 },
    #[error("vector length {got}, expected {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("at least two nonzero periods required")]
    TooFewPeriods,
    #[error("singular fiber z0 = 0")]
    SingularFiber,
    #[error("paths file line {line}: {message}")]
    PathSyntax { line: usize, message: String },
    #[error(transparent)]
    Onevar(#[from] OnevarError),
}

const COND_LIMIT: f64 = 1e12;

/// Polynomial in two variables with complex coefficients.
#[derive(Clone, Debug)]
struct CPoly {
    terms: Vec<(u32, u32, C)>,
}

impl CPoly {
    fn from_series(f: &Series2) -> Self {
        CPoly {
            terms: f
                .terms()
                .map(|(m, _, c)| (m.i, m.j, C::new(q_to_f64(c), 0.0)))
                .collect(),
        }
    }

    fn eval(&self, x: C, y: C) -> C {
        self.terms
            .iter()
            .fold(C::new(0.0, 0.0), |acc, &(i, j, c)| acc + c * x.powu(i) * y.powu(j))
    }

    fn scale_at(&self, x: C, y: C) -> f64 {
        self.terms
            .iter()
            .map(|&(i, j, c)| c.norm() * x.norm().powi(i as i32) * y.norm().powi(j as i32))
            .sum()
    }
}

/// The curve `h(x, y) = z0` with derivative data.
#[derive(Clone, Debug)]
pub struct Fiber {
    pub z0: C,
    p1: f64,
    p2: f64,
    delta: f64,
    h: CPoly,
    hx: CPoly,
    hy: CPoly,
    deg_y: u32,
}

impl Fiber {
    pub fn new(qd: &QuasiData, z0: C) -> Result<Self, PeriodError> {
        if z0.norm() == 0.0 {
            return Err(PeriodError::SingularFiber);
        }
        let h = CPoly::from_series(&qd.h);
        let deg_y = h.terms.iter().map(|t| t.1).max().unwrap_or(0);
        if deg_y == 0 {
            return Err(PeriodError::NoYDependence);
        }
        Ok(Fiber {
            z0,
            p1: qd.p1() as f64,
            p2: qd.p2() as f64,
            delta: qd.delta as f64,
            h,
            hx: CPoly::from_series(&qd.hx),
            hy: CPoly::from_series(&qd.hy),
            deg_y,
        })
    }

    pub fn residual(&self, x: C, y: C) -> C {
        self.h.eval(x, y) - self.z0
    }

    fn scale(&self, x: C, y: C) -> f64 {
        self.h.scale_at(x, y) + self.z0.norm()
    }

    /// Coefficients of `h(x, ·) - z0` as a polynomial in `y`.
    fn y_coeffs(&self, x: C) -> Vec<C> {
        let mut c = vec![C::new(0.0, 0.0); self.deg_y as usize + 1];
        for &(i, j, a) in &self.h.terms {
            c[j as usize] += a * x.powu(i);
        }
        c[0] -= self.z0;
        c
    }

    /// `dy/dx` along the curve.
    fn slope(&self, x: C, y: C) -> C {
        -self.hx.eval(x, y) / self.hy.eval(x, y)
    }

    fn newton(&self, x: C, mut y: C) -> Option<C> {
        for _ in 0..30 {
            let f = self.residual(x, y);
            let d = self.hy.eval(x, y);
            if d.norm() == 0.0 {
                return None;
            }
            let step = f / d;
            y -= step;
            if step.norm() <= 1e-15 * (1.0 + y.norm()) {
                return Some(y);
            }
        }
        (self.residual(x, y).norm() <= 1e-12 * self.scale(x, y)).then_some(y)
    }
}

fn cmp_roots(a: &C, b: &C) -> std::cmp::Ordering {
    let tol = 1e-9 * (1.0 + a.norm().max(b.norm()));
    if (a.re - b.re).abs() > tol {
        a.re.total_cmp(&b.re)
    } else {
        a.im.total_cmp(&b.im)
    }
}

fn min_separation(r: &[C]) -> f64 {
    let mut m = f64::INFINITY;
    for i in 0..r.len() {
        for j in i + 1..r.len() {
            m = m.min((r[i] - r[j]).norm());
        }
    }
    m
}

/// Roots of a polynomial with nonzero leading coefficient, by
/// Aberth–Ehrlich iteration.
fn poly_roots(c: &[C]) -> Vec<C> {
    let d = c.len() - 1;
    let lead = c[d];
    let monic: Vec<C> = c.iter().map(|v| v / lead).collect();
    if d == 1 {
        return vec![-monic[0]];
    }
    let radius = 1.0 + monic[..d].iter().map(|v| v.norm()).fold(0.0, f64::max);
    let mut z: Vec<C> = (0..d)
        .map(|k| C::from_polar(radius * 0.7, 0.4 + TAU * k as f64 / d as f64))
        .collect();
    let eval = |x: C| {
        let mut p = C::new(0.0, 0.0);
        let mut dp = C::new(0.0, 0.0);
        for a in monic.iter().rev() {
            dp = dp * x + p;
            p = p * x + a;
        }
        (p, dp)
    };
    for _ in 0..500 {
        let mut worst: f64 = 0.0;
        for k in 0..d {
            let (p, dp) = eval(z[k]);
            if p.norm() == 0.0 {
                continue;
            }
            let ratio = p / dp;
            let s: C = (0..d).filter(|&j| j != k).map(|j| 1.0 / (z[k] - z[j])).sum();
            let w = ratio / (1.0 - ratio * s);
            z[k] -= w;
            worst = worst.max(w.norm() / (1.0 + z[k].norm()));
        }
        if worst < 1e-16 {
            break;
        }
    }
    z
}

/// All y-roots of `h(x, y) = z0`, sorted by real then imaginary part.
pub fn fiber_roots(fiber: &Fiber, x: C) -> Result<Vec<C>, PeriodError> {
    let c = fiber.y_coeffs(x);
    let top = c.last().copied().unwrap_or_default();
    let cs: f64 = c.iter().map(|v| v.norm()).sum();
    if top.norm() <= 1e-12 * cs {
        return Err(PeriodError::DegreeDrop { x });
    }
    let mut roots = poly_roots(&c);
    for r in roots.iter_mut() {
        if let Some(p) = fiber.newton(x, *r) {
            *r = p;
        }
    }
    let scale = 1.0 + roots.iter().map(|r| r.norm()).fold(0.0, f64::max);
    if min_separation(&roots) < 1e-7 * scale {
        return Err(PeriodError::Discriminant { x });
    }
    roots.sort_by(cmp_roots);
    Ok(roots)
}

/// Piece of a path in the x-plane, parametrized by `s ∈ [0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub enum Segment {
    Line {
        from: C,
        to: C,
    },
    Arc {
        center: C,
        radius: f64,
        start: f64,
        sweep: f64,
    },
}

impl Segment {
    pub fn point(&self, s: f64) -> C {
        match *self {
            Segment::Line { from, to } => from + (to - from) * s,
            Segment::Arc {
                center,
                radius,
                start,
                sweep,
            } => center + C::from_polar(radius, start + sweep * s),
        }
    }

    pub fn velocity(&self, s: f64) -> C {
        match *self {
            Segment::Line { from, to } => to - from,
            Segment::Arc {
                radius, start, sweep, ..
            } => C::new(0.0, sweep) * C::from_polar(radius, start + sweep * s),
        }
    }

    /// Image under `x ↦ u x`.
    fn rotated(&self, u: C) -> Segment {
        match *self {
            Segment::Line { from, to } => Segment::Line {
                from: u * from,
                to: u * to,
            },
            Segment::Arc {
                center,
                radius,
                start,
                sweep,
            } => Segment::Arc {
                center: u * center,
                radius: radius * u.norm(),
                start: start + u.arg(),
                sweep,
            },
        }
    }
}

/// Closed loop in the x-plane with a starting sheet.
#[derive(Clone, Debug, PartialEq)]
pub struct CyclePath {
    pub label: String,
    pub segments: Vec<Segment>,
    /// Index into the sorted roots over the starting point.
    pub sheet: usize,
}

impl CyclePath {
    pub fn start(&self) -> C {
        self.segments[0].point(0.0)
    }

    /// Closed polygon through `nodes`.
    pub fn polygon(label: &str, nodes: &[C], sheet: usize) -> Self {
        let segments = (0..nodes.len())
            .map(|k| Segment::Line {
                from: nodes[k],
                to: nodes[(k + 1) % nodes.len()],
            })
            .collect();
        CyclePath {
            label: label.to_string(),
            segments,
            sheet,
        }
    }

    /// Full circle split into quarter arcs, starting at angle 0.
    pub fn circle(label: &str, center: C, radius: f64, sheet: usize) -> Self {
        let segments = (0..4)
            .map(|k| Segment::Arc {
                center,
                radius,
                start: k as f64 * TAU / 4.0,
                sweep: TAU / 4.0,
            })
            .collect();
        CyclePath {
            label: label.to_string(),
            segments,
            sheet,
        }
    }

    /// Homotopic polyline: each segment is sampled at `pieces` points and
    /// pushed off along its normal by `eps * |segment| * sin(πs)`, so that
    /// segment endpoints (and the starting sheet) are unchanged.
    pub fn perturbed(&self, eps: f64, pieces: usize) -> Self {
        let mut nodes = Vec::new();
        for seg in &self.segments {
            let len = (seg.point(1.0) - seg.point(0.0)).norm().max(seg.velocity(0.0).norm());
            for k in 0..pieces {
                let s = k as f64 / pieces as f64;
                let v = seg.velocity(s);
                let normal = C::new(0.0, 1.0) * v / v.norm();
                nodes.push(seg.point(s) + normal * (eps * len * (std::f64::consts::PI * s).sin()));
            }
        }
        CyclePath::polygon(&format!("{}~", self.label), &nodes, self.sheet)
    }
}

/// Roots tracked along one segment: accepted parameters and root vectors.
struct Track {
    nodes: Vec<(f64, Vec<C>)>,
}

fn track_segment(fiber: &Fiber, seg: &Segment, index: usize, start: &[C]) -> Result<Track, PeriodError> {
    let mut s = 0.0;
    let mut ds: f64 = 1.0 / 16.0;
    let mut roots = start.to_vec();
    let mut nodes = vec![(0.0, roots.clone())];
    while s < 1.0 {
        ds = ds.min(1.0 - s);
        let x0 = seg.point(s);
        let x1 = seg.point(s + ds);
        let v = seg.velocity(s) * ds;
        let sep = min_separation(&roots);
        let mut next = Vec::with_capacity(roots.len());
        let mut ok = true;
        for &r in &roots {
            let bound = 0.3 * sep.min(10.0 * (1.0 + r.norm()));
            let pred = r + fiber.slope(x0, r) * v;
            match fiber.newton(x1, pred) {
                Some(y) if (y - r).norm() < bound && (y - pred).norm() < bound / 3.0 => next.push(y),
                _ => {
                    ok = false;
                    break;
                }
            }
        }
        if ok && min_separation(&next) > 0.5 * sep.min(f64::MAX) {
            s += ds;
            roots = next;
            nodes.push((s, roots.clone()));
            ds = (ds * 1.5).min(0.125);
        } else {
            ds /= 2.0;
            if ds < 1e-10 {
                return Err(PeriodError::StepCollapse { segment: index, s });
            }
        }
    }
    Ok(Track { nodes })
}

/// Analytic continuation of all sheets along a path.
#[derive(Clone, Debug)]
pub struct Continuation {
    pub start_roots: Vec<C>,
    pub end_roots: Vec<C>,
    /// Sheet `i` at the start continues to sheet `permutation[i]` of the
    /// sorted roots at the end point.
    pub permutation: Vec<usize>,
}

fn nearest(roots: &[C], y: C) -> usize {
    let mut best = 0;
    for (k, r) in roots.iter().enumerate() {
        if (r - y).norm() < (roots[best] - y).norm() {
            best = k;
        }
    }
    best
}

fn track_path(fiber: &Fiber, segments: &[Segment]) -> Result<(Vec<C>, Vec<Track>), PeriodError> {
    let start = fiber_roots(fiber, segments[0].point(0.0))?;
    let mut roots = start.clone();
    let mut tracks = Vec::with_capacity(segments.len());
    for (i, seg) in segments.iter().enumerate() {
        let t = track_segment(fiber, seg, i, &roots)?;
        roots = t.nodes.last().map(|n| n.1.clone()).unwrap_or_default();
        tracks.push(t);
    }
    Ok((start, tracks))
}

pub fn continue_track(fiber: &Fiber, segments: &[Segment]) -> Result<Continuation, PeriodError> {
    let (start, tracks) = track_path(fiber, segments)?;
    let last = tracks
        .last()
        .and_then(|t| t.nodes.last())
        .map(|n| n.1.clone())
        .unwrap_or_default();
    let end_x = segments.last().map(|s| s.point(1.0)).unwrap_or_default();
    let end_roots = fiber_roots(fiber, end_x)?;
    let permutation = last.iter().map(|&y| nearest(&end_roots, y)).collect();
    Ok(Continuation {
        start_roots: start,
        end_roots,
        permutation,
    })
}

/// Continue the root `y0` over the start of the path to its end.
pub fn continue_root(fiber: &Fiber, segments: &[Segment], y0: C) -> Result<C, PeriodError> {
    let c = continue_track(fiber, segments)?;
    let i = nearest(&c.start_roots, y0);
    Ok(c.end_roots[c.permutation[i]])
}

/// Cycles around consecutive branch points for `h = a y^2 + c x^n`.
pub fn build_cycles(qd: &QuasiData, z0: C) -> Result<Vec<CyclePath>, PeriodError> {
    if z0.norm() == 0.0 {
        return Err(PeriodError::SingularFiber);
    }
    let terms: Vec<_> = qd.h.terms().map(|(m, _, c)| (m.i, m.j, q_to_f64(c))).collect();
    let (mut a, mut cx, mut n) = (None, None, 0);
    for &(i, j, c) in &terms {
        match (i, j) {
            (0, 2) => a = Some(c),
            (i, 0) if i >= 2 => {
                cx = Some(c);
                n = i;
            }
            _ => return Err(PeriodError::Unsupported),
        }
    }
    let (Some(_), Some(c)) = (a, cx) else {
        return Err(PeriodError::Unsupported);
    };
    if terms.len() != 2 {
        return Err(PeriodError::Unsupported);
    }
    // y = 0 over x^n = z0 / c.
    let w = z0 / c;
    let mut branch: Vec<C> = (0..n)
        .map(|k| C::from_polar(w.norm().powf(1.0 / n as f64), (w.arg() + TAU * k as f64) / n as f64))
        .collect();
    branch.sort_by(|u, v| {
        let au = u.arg().rem_euclid(TAU);
        let av = v.arg().rem_euclid(TAU);
        au.total_cmp(&av)
    });
    let mut cycles = Vec::new();
    for k in 0..n as usize - 1 {
        let (b0, b1) = (branch[k], branch[k + 1]);
        let mid = (b0 + b1) / 2.0;
        let half = (b1 - b0).norm() / 2.0;
        let other = branch
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != k && j != k + 1)
            .map(|(_, b)| (b - mid).norm())
            .fold(f64::INFINITY, f64::min);
        let radius = if other.is_finite() {
            (half + other) / 2.0
        } else {
            2.0 * half
        };
        cycles.push(CyclePath::circle(&format!("G{}", k + 1), mid, radius, 0));
    }
    if cycles.len() != qd.mu() {
        return Err(PeriodError::WrongCycleCount {
            expected: qd.mu(),
            got: cycles.len(),
        });
    }
    Ok(cycles)
}

// Gauss–Kronrod 7/15 nodes and weights on [-1, 1].
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15<F: FnMut(f64) -> Option<C>>(f: &mut F, a: f64, b: f64) -> Option<(C, f64)> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c)?;
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for i in 0..7 {
        let f1 = f(c - h * XGK[i])?;
        let f2 = f(c + h * XGK[i])?;
        k += (f1 + f2) * WGK[i];
        if i % 2 == 1 {
            g += (f1 + f2) * WG[i / 2];
        }
    }
    Some((k * h, ((k - g) * h).norm()))
}

fn adaptive<F: FnMut(f64) -> Option<C>>(f: &mut F, a: f64, b: f64, tol: f64, depth: u32) -> Option<(C, f64)> {
    let (v, e) = gk15(f, a, b)?;
    if e <= tol.max(1e-15 * v.norm()) {
        return Some((v, e));
    }
    if depth == 0 {
        return None;
    }
    let m = 0.5 * (a + b);
    let (v1, e1) = adaptive(f, a, m, tol / 2.0, depth - 1)?;
    let (v2, e2) = adaptive(f, m, b, tol / 2.0, depth - 1)?;
    Some((v1 + v2, e1 + e2))
}

/// A lifted loop: per-segment tracks of the chosen sheet.
struct Lift {
    pieces: Vec<(Segment, Vec<(f64, C)>)>,
}

fn lift(fiber: &Fiber, cycle: &CyclePath) -> Result<Lift, PeriodError> {
    let (start, tracks) = track_path(fiber, &cycle.segments)?;
    if cycle.sheet >= start.len() {
        return Err(PeriodError::NotClosed {
            label: cycle.label.clone(),
        });
    }
    let y0 = start[cycle.sheet];
    let mut pieces = Vec::new();
    // Root vectors stay aligned across segments, so the sheet index
    // follows the chosen root.
    for (seg, t) in cycle.segments.iter().zip(tracks) {
        let ys: Vec<(f64, C)> = t.nodes.iter().map(|(s, r)| (*s, r[cycle.sheet])).collect();
        pieces.push((seg.clone(), ys));
    }
    let end = pieces.last().and_then(|p| p.1.last()).map(|p| p.1).unwrap_or(y0);
    if (end - y0).norm() > 1e-8 * (1.0 + y0.norm()) {
        return Err(PeriodError::NotClosed {
            label: cycle.label.clone(),
        });
    }
    Ok(Lift { pieces })
}

/// `∫ f ω_R` over the lifted cycle with an error estimate, where on the
/// fiber `ω_R = (p2 y dx - p1 x dy)/(δ z0)`.
fn integrate_lift(fiber: &Fiber, lift: &Lift, f: &CPoly, label: &str) -> Result<(C, f64), PeriodError> {
    let mut total = C::new(0.0, 0.0);
    let mut err = 0.0;
    let denom = fiber.delta * fiber.z0;
    for (seg, ys) in &lift.pieces {
        for w in ys.windows(2) {
            let (s0, y0) = w[0];
            let (s1, _) = w[1];
            let x0 = seg.point(s0);
            let dy0 = fiber.slope(x0, y0) * seg.velocity(s0);
            let mut integrand = |s: f64| {
                let x = seg.point(s);
                let y = fiber.newton(x, y0 + dy0 * (s - s0))?;
                let xv = seg.velocity(s);
                let yv = fiber.slope(x, y) * xv;
                Some(f.eval(x, y) * (fiber.p2 * y * xv - fiber.p1 * x * yv) / denom)
            };
            let (v, e) = adaptive(&mut integrand, s0, s1, 1e-14, 24).ok_or_else(|| PeriodError::Quadrature {
                label: label.to_string(),
            })?;
            total += v;
            err += e;
        }
    }
    Ok((total, err))
}

/// Period `∫_Γ f ω_R` of an arbitrary polynomial coefficient `f`.
pub fn period_of(fiber: &Fiber, cycle: &CyclePath, f: &Series2) -> Result<(C, f64), PeriodError> {
    let l = lift(fiber, cycle)?;
    integrate_lift(fiber, &l, &CPoly::from_series(f), &cycle.label)
}

/// Cycles, period matrix `M[i][j] = ∫_{Γ_i} η_j` and its diagnostics.
#[derive(Clone, Debug)]
pub struct PeriodSystem {
    pub fiber: Fiber,
    pub cycles: Vec<CyclePath>,
    pub m: DMatrix<C>,
    /// Largest quadrature error estimate over all entries.
    pub error: f64,
    /// `‖M‖∞ ‖M⁻¹‖∞`, infinite when singular.
    pub cond: f64,
    /// Exponents `p_j = deg a_j - δ0` of the cobasis.
    pub p: Vec<i64>,
    delta: i64,
    cobasis: Vec<Series2>,
}

fn inf_norm(m: &DMatrix<C>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn period_matrix(qd: &QuasiData, z0: C, cycles: Vec<CyclePath>) -> Result<PeriodSystem, PeriodError> {
    let mu = qd.mu();
    if cycles.len() != mu {
        return Err(PeriodError::WrongCycleCount {
            expected: mu,
            got: cycles.len(),
        });
    }
    let fiber = Fiber::new(qd, z0)?;
    let cobasis: Vec<Series2> = (0..mu).map(|k| qd.cobasis_poly(k)).collect();
    let polys: Vec<CPoly> = cobasis.iter().map(CPoly::from_series).collect();
    let mut m = DMatrix::from_element(mu, mu, C::new(0.0, 0.0));
    let mut error: f64 = 0.0;
    for (i, cyc) in cycles.iter().enumerate() {
        let l = lift(&fiber, cyc)?;
        for (j, f) in polys.iter().enumerate() {
            let (v, e) = integrate_lift(&fiber, &l, f, &cyc.label)?;
            m[(i, j)] = v;
            error = error.max(e);
        }
    }
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let rank = sv.iter().filter(|&&s| s > 1e-10 * smax.max(1e-300)).count();
    if rank < mu {
        return Err(PeriodError::RankDeficient { rank, mu });
    }
    let cond = m
        .clone()
        .try_inverse()
        .map_or(f64::INFINITY, |inv| inf_norm(&m) * inf_norm(&inv));
    let p = qd.cobasis.iter().map(|c| c.degree - qd.delta0).collect();
    Ok(PeriodSystem {
        fiber,
        cycles,
        m,
        error,
        cond,
        p,
        delta: qd.delta,
        cobasis,
    })
}

impl PeriodSystem {
    pub fn mu(&self) -> usize {
        self.cycles.len()
    }

    pub fn det(&self) -> C {
        self.m.determinant()
    }

    /// Periods of `η_c = Σ c_j η_j`, i.e. `M c`.
    pub fn periods_of(&self, c: &[C]) -> Vec<C> {
        (&self.m * DVector::from_column_slice(c)).iter().copied().collect()
    }

    /// Periods of one cobasis form along another set of cycles.
    pub fn integrate(&self, cycle: &CyclePath, j: usize) -> Result<(C, f64), PeriodError> {
        period_of(&self.fiber, cycle, &self.cobasis[j])
    }

    /// `ζ = e^{2iπ/δ}`.
    pub fn zeta(&self) -> C {
        C::from_polar(1.0, TAU / self.delta as f64)
    }

    /// `ρ(x, y) = (ζ^{p1} x, ζ^{p2} y)`.
    pub fn rho(&self, x: C, y: C) -> (C, C) {
        let z = self.zeta();
        (z.powf(self.fiber.p1) * x, z.powf(self.fiber.p2) * y)
    }
}

/// Result of moving a cycle by the geometric monodromy.
#[derive(Clone, Debug)]
pub struct MonodromyReport {
    pub transformed: CyclePath,
    /// `∫_{ρΓ} η_j`.
    pub periods: Vec<C>,
    /// `ζ^{p_j}`, the phase picked up by `η_j` under `ρ`.
    pub phases: Vec<C>,
    /// `max_j |ζ^{-p_j} ∫_{ρΓ} η_j - ∫_Γ η_j|`.
    pub deviation: f64,
    /// `max |ρ^δ(p) - p|` over sample points of the cycle's lift.
    pub rho_power_error: f64,
}

/// Apply `ρ` to cycle `i`. Since `ρ^* ω_R = ζ^{p1+p2} ω_R` and
/// `ρ^* a_j = ζ^{deg a_j} a_j`, the form `η_j` picks up `ζ^{p_j}`; the
/// rescaled periods must reproduce the row of `M`.
pub fn monodromy_action(ps: &PeriodSystem, i: usize) -> Result<MonodromyReport, PeriodError> {
    let cyc = &ps.cycles[i];
    let z = ps.zeta();
    let u = z.powf(ps.fiber.p1);
    let start = cyc.start();
    let roots = fiber_roots(&ps.fiber, start)?;
    let y0 = roots[cyc.sheet];
    let (x1, y1) = ps.rho(start, y0);
    let moved_roots = fiber_roots(&ps.fiber, x1)?;
    let transformed = CyclePath {
        label: format!("rho({})", cyc.label),
        segments: cyc.segments.iter().map(|s| s.rotated(u)).collect(),
        sheet: nearest(&moved_roots, y1),
    };
    let l = lift(&ps.fiber, &transformed)?;
    let mut periods = Vec::new();
    let mut phases = Vec::new();
    let mut deviation: f64 = 0.0;
    for j in 0..ps.mu() {
        let (v, _) = integrate_lift(&ps.fiber, &l, &CPoly::from_series(&ps.cobasis[j]), &transformed.label)?;
        let ph = z.powi(ps.p[j].rem_euclid(ps.delta) as i32);
        deviation = deviation.max((v / ph - ps.m[(i, j)]).norm());
        periods.push(v);
        phases.push(ph);
    }
    let mut rho_power_error: f64 = 0.0;
    let lc = lift(&ps.fiber, cyc)?;
    for (seg, ys) in lc.pieces.iter() {
        for &(s, y) in ys.iter().step_by(3) {
            let (mut x, mut yy) = (seg.point(s), y);
            for _ in 0..ps.delta {
                (x, yy) = ps.rho(x, yy);
            }
            rho_power_error = rho_power_error.max((x - seg.point(s)).norm()).max((yy - y).norm());
        }
    }
    Ok(MonodromyReport {
        transformed,
        periods,
        phases,
        deviation,
        rho_power_error,
    })
}

#[derive(Clone, Debug)]
pub struct Realization {
    pub c: Vec<C>,
    /// `‖M C - T‖∞`.
    pub residual: f64,
    pub cond: f64,
}

/// Solve `T = M C` by LU with partial pivoting.
pub fn realize_constants(ps: &PeriodSystem, t: &[C]) -> Result<Realization, PeriodError> {
    if t.len() != ps.mu() {
        return Err(PeriodError::Dimension {
            expected: ps.mu(),
            got: t.len(),
        });
    }
    if ps.cond.is_nan() || ps.cond >= COND_LIMIT {
        return Err(PeriodError::NearSingular { cond: ps.cond });
    }
    let tv = DVector::from_column_slice(t);
    let c =
        ps.m.clone()
            .lu()
            .solve(&tv)
            .ok_or(PeriodError::NearSingular { cond: ps.cond })?;
    let residual = (&ps.m * &c - &tv).iter().map(|v| v.norm()).fold(0.0, f64::max);
    Ok(Realization {
        c: c.iter().copied().collect(),
        residual,
        cond: ps.cond,
    })
}

/// `exp(T_i θ)` for each period.
pub fn holonomy_generators(theta: &Series1<C>, t: &[C], n: i64) -> Result<Vec<Germ1<C>>, PeriodError> {
    let v = theta.order().unwrap_or(0);
    if v < 2 {
        return Err(OnevarError::FieldOrder { order: v, needed: 2 }.into());
    }
    t.iter().map(|ti| Ok(flow_exp(theta, ti, n)?)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct RatioCheck {
    pub i: usize,
    pub j: usize,
    pub ratio: C,
    /// `(p, q)` with `T_i/T_j ≈ p/q`, when found.
    pub rational: Option<(i64, i64)>,
    /// Recognized, but not to machine precision.
    pub borderline: bool,
}

/// Numeric heuristic only: continued-fraction detection of rational
/// period ratios.
#[derive(Clone, Debug, PartialEq)]
pub struct RationalityReport {
    pub pairs: Vec<RatioCheck>,
    pub all_rational: bool,
    pub max_den: i64,
    pub tol: f64,
}

pub fn exceptional_heuristic(t: &[C]) -> Result<RationalityReport, PeriodError> {
    const MAX_DEN: i64 = 50;
    const TOL: f64 = 1e-6;
    let nz: Vec<usize> = (0..t.len()).filter(|&i| t[i].norm() > 1e-300).collect();
    if nz.len() < 2 {
        return Err(PeriodError::TooFewPeriods);
    }
    let mut pairs = Vec::new();
    for (a, &i) in nz.iter().enumerate() {
        for &j in &nz[a + 1..] {
            let ratio = t[i] / t[j];
            let rational = if ratio.im.abs() <= TOL * (1.0 + ratio.re.abs()) {
                rational_approx(ratio.re, MAX_DEN, TOL)
            } else {
                None
            };
            let borderline = rational.is_some_and(|(p, q)| {
                (ratio - C::new(p as f64 / q as f64, 0.0)).norm() > 4.0 * f64::EPSILON * (1.0 + ratio.norm())
            });
            pairs.push(RatioCheck {
                i,
                j,
                ratio,
                rational,
                borderline,
            });
        }
    }
    let all_rational = pairs.iter().all(|p| p.rational.is_some());
    Ok(RationalityReport {
        pairs,
        all_rational,
        max_den: MAX_DEN,
        tol: TOL,
    })
}

/// Parse a paths file: one loop per line, a sheet index followed by
/// `re,im; re,im; ...` nodes of a closed polygon. Blank lines and lines
/// starting with `#` are skipped.
pub fn parse_paths(text: &str) -> Result<Vec<CyclePath>, PeriodError> {
    let mut out = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| PeriodError::PathSyntax { line: ln + 1, message };
        let (head, rest) = line
            .split_once(char::is_whitespace)
            .ok_or_else(|| err("expected a sheet index followed by nodes".into()))?;
        let sheet: usize = head.parse().map_err(|_| err(format!("invalid sheet index {head:?}")))?;
        let mut nodes = Vec::new();
        for part in rest.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let (re, im) = part
                .split_once(',')
                .ok_or_else(|| err(format!("node {part:?} is not re,im")))?;
            let re: f64 = re.trim().parse().map_err(|_| err(format!("invalid number {re:?}")))?;
            let im: f64 = im.trim().parse().map_err(|_| err(format!("invalid number {im:?}")))?;
            nodes.push(C::new(re, im));
        }
        if nodes.len() < 3 {
            return Err(err("a loop needs at least three nodes".into()));
        }
        out.push(CyclePath::polygon(&format!("P{}", out.len() + 1), &nodes, sheet));
    }
    Ok(out)
}
