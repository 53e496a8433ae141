//! Commands: each runs a prefix of the analysis chain and reports it.

use std::fmt;
use std::path::Path;

use folgal_core::invariant::{
    extract_invariant, final_reduce, gv_construct, reducibility_test, InvariantError, InvariantFamily,
    ReducibilityVerdict,
};
use folgal_core::logforms::{gv_search_length2, gv_verify, GvOutcome, GvSearch, LogFormError, LogOneForm};
use folgal_core::onevar::{classify_group, Germ1, GroupVerdict, OnevarError};
use folgal_core::periods::{
    build_cycles, exceptional_heuristic, holonomy_generators, monodromy_action, parse_paths, period_matrix,
    realize_constants, CyclePath, PeriodError, PeriodSystem,
};
use folgal_core::prenormal::{prenormalize, FiberedTransform, PrenormalError, PrenormalForm};
use folgal_core::quasihomog::{saito_decompose, LogVectorField, QuasiData, QuasiError};
use folgal_core::scalar::{Scalar, Q};
use num_complex::Complex64;
use num_traits::Zero;
use serde_json::{json, Value};

use crate::problem::{Curve, FieldSpec, ParseError, ProblemFile};
use crate::report::{self, object};

pub const DEFAULT_ORDER: i64 = 30;
/// Largest degree bound and order for the length-two search.
const SEARCH_LIMIT: i64 = 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Analyze,
    Prenorm,
    Invariant,
    Reduce,
    Gv,
    Holonomy,
    Classify,
    Realize,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Analyze => "analyze",
            Command::Prenorm => "prenorm",
            Command::Invariant => "invariant",
            Command::Reduce => "reduce",
            Command::Gv => "gv",
            Command::Holonomy => "holonomy",
            Command::Classify => "classify",
            Command::Realize => "realize",
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Options {
    pub order: Option<i64>,
    pub z0: Option<Complex64>,
    /// Contents of a paths file given on the command line.
    pub paths: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    /// Malformed or out-of-contract input.
    Input,
    /// The computation itself failed.
    Computation,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineError {
    pub kind: ErrorKind,
    pub module: &'static str,
    pub message: String,
}

impl PipelineError {
    fn input(module: &'static str, message: impl Into<String>) -> Self {
        PipelineError {
            kind: ErrorKind::Input,
            module,
            message: message.into(),
        }
    }

    fn computation(module: &'static str, message: impl Into<String>) -> Self {
        PipelineError {
            kind: ErrorKind::Computation,
            module,
            message: message.into(),
        }
    }

    pub fn to_json(&self) -> Value {
        json!({"error": {
            "module": self.module,
            "kind": match self.kind { ErrorKind::Input => "input", ErrorKind::Computation => "computation" },
            "message": self.message,
        }})
    }
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error [{}]: {}", self.module, self.message)
    }
}

impl From<ParseError> for PipelineError {
    fn from(e: ParseError) -> Self {
        PipelineError::input("problem", e.to_string())
    }
}

impl From<QuasiError> for PipelineError {
    fn from(e: QuasiError) -> Self {
        let kind = match e {
            QuasiError::NonIsolated { .. } | QuasiError::MilnorMismatch { .. } | QuasiError::Series(_) => {
                ErrorKind::Computation
            }
            _ => ErrorKind::Input,
        };
        PipelineError {
            kind,
            module: "quasihomog",
            message: e.to_string(),
        }
    }
}

impl From<PrenormalError> for PipelineError {
    fn from(e: PrenormalError) -> Self {
        let kind = match e {
            PrenormalError::CokernelInconsistent { .. } => ErrorKind::Computation,
            _ => ErrorKind::Input,
        };
        PipelineError {
            kind,
            module: "prenormal",
            message: e.to_string(),
        }
    }
}

impl From<InvariantError> for PipelineError {
    fn from(e: InvariantError) -> Self {
        PipelineError::computation("invariant", e.to_string())
    }
}

impl From<LogFormError> for PipelineError {
    fn from(e: LogFormError) -> Self {
        PipelineError::computation("logforms", e.to_string())
    }
}

impl From<OnevarError> for PipelineError {
    fn from(e: OnevarError) -> Self {
        PipelineError::computation("onevar", e.to_string())
    }
}

impl From<PeriodError> for PipelineError {
    fn from(e: PeriodError) -> Self {
        let kind = match e {
            PeriodError::PathSyntax { .. } | PeriodError::Dimension { .. } | PeriodError::SingularFiber => {
                ErrorKind::Input
            }
            _ => ErrorKind::Computation,
        };
        PipelineError {
            kind,
            module: "periods",
            message: e.to_string(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Report {
    pub body: Value,
    /// The verdict could not be decided at the requested order.
    pub inconclusive: bool,
}

/// Everything up to and including the reducibility verdict.
struct Chain {
    qd: QuasiData,
    field: LogVectorField,
    pf: PrenormalForm,
    transform: FiberedTransform,
    inv: InvariantFamily,
    verdict: ReducibilityVerdict,
}

fn quasi_section(qd: &QuasiData) -> Value {
    let cobasis: Vec<Value> = qd
        .cobasis
        .iter()
        .map(|c| json!({"monomial": [c.monomial.i, c.monomial.j], "degree": c.degree}))
        .collect();
    object(vec![
        ("weights", json!([qd.weights.p1, qd.weights.p2])),
        ("h", Value::String(qd.h.render())),
        ("delta", json!(qd.delta)),
        ("delta0", json!(qd.delta0)),
        ("mu", json!(qd.mu())),
        ("cobasis", Value::Array(cobasis)),
    ])
}

fn quasi_data(pfile: &ProblemFile) -> Result<QuasiData, PipelineError> {
    let Curve { weights, h } = pfile
        .curve
        .as_ref()
        .ok_or_else(|| PipelineError::input("problem", "missing keys `weights` and `h`"))?;
    Ok(QuasiData::new(h, *weights)?)
}

fn field_of(pfile: &ProblemFile, qd: &QuasiData) -> Result<LogVectorField, PipelineError> {
    let x = match &pfile.field {
        None => return Err(PipelineError::input("problem", "missing key `field`")),
        Some(FieldSpec::Log { a, b }) => LogVectorField::new(a.clone(), b.clone()),
        Some(FieldSpec::Cartesian { p, q }) => saito_decompose(p, q, qd)?,
    };
    let a0 = x.a.coeff(0, 0);
    if a0.is_zero() {
        return Err(PipelineError::input(
            "prenormal",
            "coefficient of X_h vanishes at the origin",
        ));
    }
    Ok(x.scale(&(Q::from_i64(1) / a0)))
}

fn order_of(pfile: &ProblemFile, opts: &Options) -> Result<i64, PipelineError> {
    let n = opts.order.or(pfile.order).unwrap_or(DEFAULT_ORDER);
    if n < 1 {
        return Err(PipelineError::input("cli", format!("order must be positive, got {n}")));
    }
    Ok(n)
}

fn run_chain(pfile: &ProblemFile, n: i64) -> Result<Chain, PipelineError> {
    let qd = quasi_data(pfile)?;
    let field = field_of(pfile, &qd)?;
    let (pf, transform) = prenormalize(&field, &qd, n)?;
    let inv = extract_invariant(&pf, &qd);
    let verdict = reducibility_test(&inv, n);
    Ok(Chain {
        qd,
        field,
        pf,
        transform,
        inv,
        verdict,
    })
}

fn field_section(x: &LogVectorField) -> Value {
    object(vec![
        ("a", Value::String(x.a.render())),
        ("b", Value::String(x.b.render())),
    ])
}

fn prenormal_section(ch: &Chain) -> Value {
    let d: Vec<Value> = ch.pf.d.iter().map(|s| report::series1(s, "h")).collect();
    object(vec![
        ("order", json!(ch.pf.order)),
        ("d", Value::Array(d)),
        ("factors", json!(ch.transform.factors.len())),
        ("u", report::series2(&ch.transform.u)),
    ])
}

fn invariant_section(inv: &InvariantFamily) -> Value {
    let entries: Vec<Value> = inv
        .entries
        .iter()
        .map(|e| {
            object(vec![
                ("index", json!(e.index)),
                ("p", json!(e.p)),
                ("r", report::q(&e.r)),
                ("k", json!(e.k)),
                ("q", json!(e.q)),
                ("d", report::series1(&e.d, "h")),
                ("theta", report::series1(&e.theta, "t")),
                ("residue", e.residue().map_or(Value::Null, |r| report::q(&r))),
            ])
        })
        .collect();
    object(vec![
        ("delta", json!(inv.delta)),
        ("order", json!(inv.order)),
        ("entries", Value::Array(entries)),
    ])
}

fn label(v: &ReducibilityVerdict) -> &'static str {
    match v {
        ReducibilityVerdict::ReducibleDim1 {
            first_integral: true, ..
        } => "first integral",
        ReducibilityVerdict::ReducibleDim1 { .. } => "Liouvillian",
        ReducibilityVerdict::NotReducible { .. } => "not reducible",
        ReducibilityVerdict::InconclusiveAtOrder { .. } => "inconclusive",
    }
}

fn verdict_section(inv: &InvariantFamily, v: &ReducibilityVerdict) -> Value {
    let mut out = vec![("verdict", json!(v.kind())), ("label", json!(label(v)))];
    match v {
        ReducibilityVerdict::ReducibleDim1 {
            theta,
            base,
            c,
            first_integral,
            order,
        } => {
            let residue = base.and_then(|i| inv.entries[i].residue());
            out.extend([
                ("c", report::qs(c)),
                ("base", json!(base)),
                ("first_integral", json!(first_integral)),
                ("theta", report::series1(theta, "t")),
                ("theta_order", json!(theta.order())),
                ("residue", residue.map_or(Value::Null, |r| report::q(&r))),
                ("order", json!(order)),
            ]);
        }
        ReducibilityVerdict::NotReducible { pair, bracket, order } => {
            out.extend([
                ("pair", json!([pair.0, pair.1])),
                ("bracket_order", json!(bracket.as_ref().map(|b| b.0))),
                (
                    "bracket_coefficient",
                    bracket.as_ref().map_or(Value::Null, |b| report::q(&b.1)),
                ),
                ("order", json!(order)),
            ]);
        }
        ReducibilityVerdict::InconclusiveAtOrder { needed, available } => {
            out.extend([("needed", json!(needed)), ("available", json!(available))]);
        }
    }
    object(out)
}

fn final_section(ch: &Chain) -> Result<Value, PipelineError> {
    let ReducibilityVerdict::ReducibleDim1 { base: Some(i), .. } = ch.verdict else {
        return Ok(Value::Null);
    };
    let f = final_reduce(&ch.inv, i, ch.pf.order)?;
    Ok(object(vec![
        ("index", json!(f.index)),
        ("m", json!(f.m)),
        ("n", json!(f.n)),
        ("lambda", report::q(&f.lambda)),
        ("lead", report::q(&f.lead)),
        ("model", report::series1(&f.model(), "h")),
        ("phi", report::series1(&f.phi, "h")),
        ("t_scaling", report::c(f.t_scaling)),
        (
            "residue_before",
            f.residue_before.as_ref().map_or(Value::Null, report::q),
        ),
        ("residue_after", f.residue_after.as_ref().map_or(Value::Null, report::q)),
        ("order", json!(f.order)),
    ]))
}

fn form_section(w: &LogOneForm) -> Value {
    object(vec![
        ("a", Value::String(w.a.render())),
        ("b", Value::String(w.b.render())),
    ])
}

fn outcome_json(o: &GvOutcome) -> Value {
    match o {
        GvOutcome::Pass { order } => json!({"status": "pass", "order": order}),
        GvOutcome::Fail {
            relation,
            residual_order,
        } => {
            json!({"status": "fail", "relation": relation, "residual_order": residual_order})
        }
        GvOutcome::InsufficientPrecision { relation, available } => {
            json!({"status": "insufficient_precision", "relation": relation, "available": available})
        }
    }
}

/// GV witness for a reducible verdict, length-two search otherwise.
fn gv_section(ch: &Chain) -> Result<(bool, Value), PipelineError> {
    let n = ch.pf.order;
    match &ch.verdict {
        ReducibilityVerdict::ReducibleDim1 { .. } => {
            let (wn, w1) = gv_construct(&ch.verdict, &ch.pf, &ch.inv, &ch.qd)?;
            let outcome = gv_verify(&[wn.clone(), w1.clone()], &ch.qd, n);
            Ok((
                outcome.passed(),
                object(vec![
                    ("omega_n", form_section(&wn)),
                    ("omega_1", form_section(&w1)),
                    ("verify", outcome_json(&outcome)),
                ]),
            ))
        }
        _ => {
            let limit = n.min(SEARCH_LIMIT);
            let x = ch.pf.field(&ch.qd);
            let found = gv_search_length2(&x, &ch.qd, limit, limit)?;
            let v = match &found {
                GvSearch::Feasible(w) => object(vec![("search", json!("feasible")), ("omega_1", form_section(w))]),
                GvSearch::Infeasible { degree_bound, order } => object(vec![
                    ("search", json!("infeasible")),
                    ("degree_bound", json!(degree_bound)),
                    ("order", json!(order)),
                ]),
            };
            Ok((found.is_feasible(), v))
        }
    }
}

fn z0_of(pfile: &ProblemFile, opts: &Options) -> Result<Complex64, PipelineError> {
    opts.z0
        .or(pfile.z0)
        .ok_or_else(|| PipelineError::input("problem", "missing key `z0`"))
}

fn cycles_of(
    pfile: &ProblemFile,
    opts: &Options,
    base_dir: &Path,
    qd: &QuasiData,
    z0: Complex64,
) -> Result<(Vec<CyclePath>, &'static str), PipelineError> {
    let text = match (&opts.paths, &pfile.paths) {
        (Some(t), _) => Some(t.clone()),
        (None, Some(p)) => {
            let path = base_dir.join(p);
            let t = std::fs::read_to_string(&path)
                .map_err(|e| PipelineError::input("cli", format!("cannot read {}: {e}", path.display())))?;
            Some(t)
        }
        (None, None) => None,
    };
    match text {
        Some(t) => Ok((parse_paths(&t)?, "paths")),
        None => Ok((build_cycles(qd, z0)?, "automatic")),
    }
}

fn matrix_json(ps: &PeriodSystem) -> Value {
    let rows: Vec<Value> =
        ps.m.row_iter()
            .map(|r| Value::Array(r.iter().copied().map(report::c).collect()))
            .collect();
    Value::Array(rows)
}

fn periods_section(ps: &PeriodSystem, source: &str) -> Result<Value, PipelineError> {
    let mut deviation: f64 = 0.0;
    let mut rho_power: f64 = 0.0;
    for i in 0..ps.mu() {
        let r = monodromy_action(ps, i)?;
        deviation = deviation.max(r.deviation);
        rho_power = rho_power.max(r.rho_power_error);
    }
    let labels: Vec<Value> = ps.cycles.iter().map(|c| json!(c.label)).collect();
    Ok(object(vec![
        ("cycles", json!(source)),
        ("labels", Value::Array(labels)),
        ("M", matrix_json(ps)),
        ("det", report::c(ps.det())),
        ("cond", report::real(ps.cond)),
        ("quadrature_error", report::real(ps.error)),
        ("p", json!(ps.p)),
        ("monodromy_deviation", report::real(deviation)),
        ("rho_power_error", report::real(rho_power)),
    ]))
}

fn holonomy_section(ch: &Chain, pfile: &ProblemFile, opts: &Options, base_dir: &Path) -> Result<Value, PipelineError> {
    let ReducibilityVerdict::ReducibleDim1 {
        theta,
        base: Some(_),
        c,
        ..
    } = &ch.verdict
    else {
        return Err(PipelineError::computation(
            "periods",
            format!(
                "holonomy needs a reducible field with nonzero invariant, verdict is {}",
                label(&ch.verdict)
            ),
        ));
    };
    let z0 = z0_of(pfile, opts)?;
    let (cycles, source) = cycles_of(pfile, opts, base_dir, &ch.qd, z0)?;
    let ps = period_matrix(&ch.qd, z0, cycles)?;
    let cc: Vec<Complex64> = c.iter().map(|v| v.to_c64()).collect();
    let t = ps.periods_of(&cc);
    let theta_c = theta.map(|v| v.to_c64());
    let n = theta.trunc();
    let gens = holonomy_generators(&theta_c, &t, n)?;
    let mut commutator: f64 = 0.0;
    for (i, g) in gens.iter().enumerate() {
        for h in &gens[i + 1..] {
            let k = g.commutator(h)?;
            commutator = commutator.max(k.series().max_abs_diff(Germ1::identity(n).series(), n));
        }
    }
    let heuristic = match exceptional_heuristic(&t) {
        Ok(r) => {
            let pairs: Vec<Value> = r
                .pairs
                .iter()
                .map(|p| {
                    object(vec![
                        ("i", json!(p.i)),
                        ("j", json!(p.j)),
                        ("ratio", report::c(p.ratio)),
                        (
                            "rational",
                            p.rational.map_or(Value::Null, |(a, b)| json!(format!("{a}/{b}"))),
                        ),
                        ("borderline", json!(p.borderline)),
                    ])
                })
                .collect();
            object(vec![
                ("all_rational", json!(r.all_rational)),
                ("max_den", json!(r.max_den)),
                ("tol", report::real(r.tol)),
                ("pairs", Value::Array(pairs)),
            ])
        }
        Err(e) => json!({"skipped": e.to_string()}),
    };
    let t0 = z0.powf(1.0 / ch.qd.delta as f64);
    let generators: Vec<Value> = gens.iter().map(|g| report::series1c(g.series(), "t")).collect();
    Ok(object(vec![
        ("z0", report::c(z0)),
        ("t0", report::c(t0)),
        ("periods", periods_section(&ps, source)?),
        ("C", report::cs(&cc)),
        ("T", report::cs(&t)),
        ("theta", report::series1(theta, "t")),
        ("generators", Value::Array(generators)),
        ("commutator_deviation", report::real(commutator)),
        ("order", json!(n)),
        ("rationality", heuristic),
    ]))
}

fn realize_section(pfile: &ProblemFile, opts: &Options, base_dir: &Path) -> Result<Value, PipelineError> {
    let qd = quasi_data(pfile)?;
    let t = pfile
        .periods
        .as_ref()
        .ok_or_else(|| PipelineError::input("problem", "missing key `periods`"))?;
    let z0 = z0_of(pfile, opts)?;
    let (cycles, source) = cycles_of(pfile, opts, base_dir, &qd, z0)?;
    let ps = period_matrix(&qd, z0, cycles)?;
    let r = realize_constants(&ps, t)?;
    Ok(object(vec![
        ("quasihomog", quasi_section(&qd)),
        ("z0", report::c(z0)),
        ("periods", periods_section(&ps, source)?),
        ("T", report::cs(t)),
        ("C", report::cs(&r.c)),
        ("residual", report::real(r.residual)),
        ("cond", report::real(r.cond)),
    ]))
}

fn scalar_json(v: &Q) -> Value {
    report::q(v)
}

fn classify_section(pfile: &ProblemFile, n: i64) -> Result<Value, PipelineError> {
    if pfile.germs.is_empty() {
        return Err(PipelineError::input("problem", "missing key `germ`"));
    }
    let gens: Vec<Germ1<Q>> = pfile
        .germs
        .iter()
        .enumerate()
        .map(|(i, g)| Germ1::new(g.clone()).map_err(|e| PipelineError::input("onevar", format!("germ {i}: {e}"))))
        .collect::<Result<_, _>>()?;
    let cl = classify_group(&gens, n)?;
    let mut verdict = vec![("verdict", json!(cl.verdict.kind()))];
    match &cl.verdict {
        GroupVerdict::FormallyLinearizableCandidate => {}
        GroupVerdict::SolvableModel { k, lambda } => {
            verdict.extend([("k", json!(k)), ("lambda", scalar_json(lambda))]);
        }
        GroupVerdict::ExceptionalCandidate {
            k,
            lambda,
            single_generator,
        } => {
            verdict.extend([
                ("k", json!(k)),
                ("lambda", scalar_json(lambda)),
                ("single_generator", json!(single_generator)),
            ]);
        }
        GroupVerdict::NotSolvableCertificate { pair, bracket_order } => {
            verdict.extend([
                ("pair", json!([pair.0, pair.1])),
                ("bracket_order", json!(bracket_order)),
            ]);
        }
    }
    let tangent: Vec<Value> = cl
        .tangent
        .iter()
        .map(|t| object(vec![("word", json!(t.word)), ("theta", report::series1(&t.theta, "z"))]))
        .collect();
    Ok(object(vec![
        ("classification", object(verdict)),
        ("qualifier", json!(cl.label())),
        (
            "upper_bound",
            cl.upper_bound.as_ref().map_or(Value::Null, |b| json!(b.render())),
        ),
        (
            "conjugator",
            cl.conjugator
                .as_ref()
                .map_or(Value::Null, |g| report::series1(g.series(), "z")),
        ),
        ("linear_parts", report::qs(&cl.linear_parts)),
        ("abelian", json!(cl.abelian)),
        ("tangent", Value::Array(tangent)),
        ("order", json!(cl.order)),
        ("word_length", json!(cl.word_length)),
    ]))
}

/// Run `cmd` on a parsed problem. `base_dir` resolves relative paths
/// named in the problem file.
pub fn run(cmd: Command, pfile: &ProblemFile, opts: &Options, base_dir: &Path) -> Result<Report, PipelineError> {
    let n = order_of(pfile, opts)?;
    let mut body = vec![("command", json!(cmd.name())), ("order", json!(n))];
    match cmd {
        Command::Classify => {
            body.push(("group", classify_section(pfile, n)?));
            return Ok(Report {
                body: object(body),
                inconclusive: false,
            });
        }
        Command::Realize => {
            body.push(("realize", realize_section(pfile, opts, base_dir)?));
            return Ok(Report {
                body: object(body),
                inconclusive: false,
            });
        }
        _ => {}
    }
    let ch = run_chain(pfile, n)?;
    body.push(("quasihomog", quasi_section(&ch.qd)));
    body.push(("field", field_section(&ch.field)));
    if matches!(cmd, Command::Prenorm | Command::Analyze) {
        body.push(("prenormal", prenormal_section(&ch)));
    }
    if cmd == Command::Prenorm {
        return Ok(Report {
            body: object(body),
            inconclusive: false,
        });
    }
    if matches!(cmd, Command::Invariant | Command::Analyze) {
        body.push(("invariant", invariant_section(&ch.inv)));
    }
    body.push(("reducibility", verdict_section(&ch.inv, &ch.verdict)));
    let inconclusive = matches!(ch.verdict, ReducibilityVerdict::InconclusiveAtOrder { .. });
    if matches!(cmd, Command::Reduce | Command::Analyze) {
        body.push(("final_normal_form", final_section(&ch)?));
    }
    if matches!(cmd, Command::Gv | Command::Analyze) && !inconclusive {
        let (present, section) = gv_section(&ch)?;
        body.push(("gv_witness_present", json!(present)));
        body.push(("gv", section));
    }
    if cmd == Command::Holonomy {
        body.push(("holonomy", holonomy_section(&ch, pfile, opts, base_dir)?));
    }
    Ok(Report {
        body: object(body),
        inconclusive,
    })
}
