//! Problem files.
//!
//! ```text
//! weights = 2 3
//! h = y^2 - x^3
//! field = a:1 b:x*h        # or P:... Q:...
//! order = 30
//! z0 = 1,0
//! germ = 2*z               # repeatable, for classify
//! periods = 1,0; 2,0       # T vector, for realize
//! paths = loops.txt
//! ```

use std::collections::BTreeMap;
use std::fmt;

use folgal_core::scalar::{qi, Q};
use folgal_core::series::{Series1, Series2, Weights, EXACT};
use num_complex::Complex64;
use num_traits::{One, Zero};

#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
    pub source_line: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "line {}, column {}: {}", self.line, self.col, self.message)?;
        writeln!(f, "  {}", self.source_line)?;
        write!(f, "  {}^", " ".repeat(self.col.saturating_sub(1)))
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone, PartialEq)]
pub enum FieldSpec {
    /// `a X_h + b R`.
    Log { a: Series2, b: Series2 },
    /// `P ∂x + Q ∂y`.
    Cartesian { p: Series2, q: Series2 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub weights: Weights,
    pub h: Series2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemFile {
    /// Absent only in germ-only files.
    pub curve: Option<Curve>,
    pub field: Option<FieldSpec>,
    pub order: Option<i64>,
    pub z0: Option<Complex64>,
    pub germs: Vec<Series1<Q>>,
    pub periods: Option<Vec<Complex64>>,
    pub paths: Option<String>,
}

/// Polynomial in `x, y, h` (or `z`), keyed by exponents.
type Poly = BTreeMap<(u32, u32, u32), Q>;

fn poly_const(c: Q) -> Poly {
    let mut p = Poly::new();
    if !c.is_zero() {
        p.insert((0, 0, 0), c);
    }
    p
}

fn poly_add(a: &Poly, b: &Poly, sign: &Q) -> Poly {
    let mut out = a.clone();
    for (k, v) in b {
        let e = out.entry(*k).or_insert_with(Q::zero);
        *e += v * sign;
        if e.is_zero() {
            out.remove(k);
        }
    }
    out
}

fn poly_mul(a: &Poly, b: &Poly) -> Poly {
    let mut out = Poly::new();
    for (ka, va) in a {
        for (kb, vb) in b {
            let k = (ka.0 + kb.0, ka.1 + kb.1, ka.2 + kb.2);
            let e = out.entry(k).or_insert_with(Q::zero);
            *e += va * vb;
        }
    }
    out.retain(|_, v| !v.is_zero());
    out
}

const MAX_POWER: u64 = 64;

/// Recursive-descent parser over one expression.
struct ExprParser<'a> {
    chars: Vec<char>,
    pos: usize,
    /// Column of `chars[0]` in the source line (1-based).
    base_col: usize,
    vars: &'a [char],
}

type PResult<T> = Result<T, (usize, String)>;

impl<'a> ExprParser<'a> {
    fn col(&self) -> usize {
        self.base_col + self.pos
    }

    fn err<T>(&self, msg: impl Into<String>) -> PResult<T> {
        Err((self.col(), msg.into()))
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).copied()
    }

    fn parse(mut self) -> PResult<Poly> {
        if self.peek().is_none() {
            return self.err("empty expression");
        }
        let p = self.expr()?;
        match self.peek() {
            None => Ok(p),
            Some(c) => self.err(format!("unexpected '{c}'")),
        }
    }

    fn expr(&mut self) -> PResult<Poly> {
        let mut acc = self.term()?;
        while let Some(c) = self.peek() {
            let sign = match c {
                '+' => Q::one(),
                '-' => -Q::one(),
                _ => break,
            };
            self.pos += 1;
            let t = self.term()?;
            acc = poly_add(&acc, &t, &sign);
        }
        Ok(acc)
    }

    fn term(&mut self) -> PResult<Poly> {
        let mut acc = self.power()?;
        while self.peek() == Some('*') {
            self.pos += 1;
            let f = self.power()?;
            acc = poly_mul(&acc, &f);
        }
        if self.peek() == Some('/') {
            return self.err("division is only allowed between integer literals");
        }
        Ok(acc)
    }

    fn power(&mut self) -> PResult<Poly> {
        let base = self.unary()?;
        if self.peek() != Some('^') {
            return Ok(base);
        }
        self.pos += 1;
        self.skip_ws();
        let start = self.pos;
        let n = self.integer()?;
        let n: u64 = n.try_into().ok().filter(|&k| k <= MAX_POWER).ok_or((
            self.base_col + start,
            format!("exponent must be an integer in 0..={MAX_POWER}"),
        ))?;
        let mut acc = poly_const(Q::one());
        for _ in 0..n {
            acc = poly_mul(&acc, &base);
        }
        Ok(acc)
    }

    fn unary(&mut self) -> PResult<Poly> {
        match self.peek() {
            Some('-') => {
                self.pos += 1;
                let p = self.unary()?;
                Ok(poly_add(&Poly::new(), &p, &-Q::one()))
            }
            Some('+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.primary(),
        }
    }

    fn integer(&mut self) -> PResult<i64> {
        let start = self.pos;
        while self.pos < self.chars.len() && self.chars[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return self.err("expected an integer");
        }
        let s: String = self.chars[start..self.pos].iter().collect();
        s.parse()
            .map_err(|_| (self.base_col + start, "integer too large".to_string()))
    }

    fn primary(&mut self) -> PResult<Poly> {
        let Some(c) = self.peek() else {
            return self.err("unexpected end of expression");
        };
        if c.is_ascii_digit() {
            let num = self.integer()?;
            if self.peek() == Some('/') {
                self.pos += 1;
                self.skip_ws();
                let at = self.col();
                let den = self.integer()?;
                if den == 0 {
                    return Err((at, "zero denominator".into()));
                }
                return Ok(poly_const(Q::new(num.into(), den.into())));
            }
            return Ok(poly_const(qi(num)));
        }
        if c == '(' {
            self.pos += 1;
            let p = self.expr()?;
            if self.peek() != Some(')') {
                return self.err("expected ')'");
            }
            self.pos += 1;
            return Ok(p);
        }
        if let Some(k) = self.vars.iter().position(|&v| v == c) {
            self.pos += 1;
            if self.chars.get(self.pos).is_some_and(|ch| ch.is_alphanumeric()) {
                return self.err(format!("unknown identifier starting with '{c}'"));
            }
            let e = match k {
                0 => (1, 0, 0),
                1 => (0, 1, 0),
                _ => (0, 0, 1),
            };
            let mut p = Poly::new();
            p.insert(e, Q::one());
            return Ok(p);
        }
        if c.is_alphabetic() {
            return self.err(format!("unknown variable '{c}'"));
        }
        self.err(format!("unexpected '{c}'"))
    }
}

fn parse_poly(text: &str, base_col: usize, vars: &[char]) -> PResult<Poly> {
    ExprParser {
        chars: text.chars().collect(),
        pos: 0,
        base_col,
        vars,
    }
    .parse()
}

/// Expand a polynomial in `x, y, h` with the declared `h`.
fn expand(p: &Poly, w: Weights, h: Option<&Series2>) -> Result<Series2, String> {
    let mut out = Series2::zero(w, EXACT);
    for (&(i, j, k), c) in p {
        let mut t = Series2::monomial(w, c.clone(), i, j, EXACT);
        if k > 0 {
            let h = h.ok_or("'h' used before it is declared")?;
            for _ in 0..k {
                t = t.mul(h);
            }
        }
        out = out.add(&t);
    }
    Ok(out)
}

fn parse_complex(s: &str) -> Option<Complex64> {
    let (re, im) = match s.split_once(',') {
        Some((a, b)) => (a.trim(), b.trim()),
        None => (s.trim(), "0"),
    };
    Some(Complex64::new(re.parse().ok()?, im.parse().ok()?))
}

/// Positions of `a:`/`b:`/`P:`/`Q:` markers in a field value.
fn field_parts(v: &str) -> Vec<(char, usize, usize)> {
    let chars: Vec<char> = v.chars().collect();
    let mut marks = Vec::new();
    for k in 0..chars.len().saturating_sub(1) {
        let starts = k == 0 || chars[k - 1].is_whitespace();
        if starts && "abPQ".contains(chars[k]) && chars[k + 1] == ':' {
            marks.push((chars[k], k));
        }
    }
    let mut out = Vec::new();
    for (n, &(c, k)) in marks.iter().enumerate() {
        let end = marks.get(n + 1).map_or(chars.len(), |m| m.1);
        out.push((c, k + 2, end));
    }
    out
}

pub fn parse_problem(text: &str) -> Result<ProblemFile, ParseError> {
    let mut weights = None;
    let mut field_raw: Option<(usize, String, usize)> = None;
    let mut order = None;
    let mut z0 = None;
    let mut germs = Vec::new();
    let mut germ_raw = Vec::new();
    let mut periods = None;
    let mut paths = None;
    let mut h_raw: Option<(usize, String, usize)> = None;

    for (ln, raw) in text.lines().enumerate() {
        let line_no = ln + 1;
        let code = raw.split('#').next().unwrap_or("");
        if code.trim().is_empty() {
            continue;
        }
        let mk = |col: usize, message: String| ParseError {
            line: line_no,
            col,
            message,
            source_line: raw.to_string(),
        };
        let Some(eq) = code.find('=') else {
            let col = code.len() - code.trim_start().len() + 1;
            return Err(mk(col, "expected 'key = value'".into()));
        };
        let key = code[..eq].trim();
        let value_start = eq + 1 + (code[eq + 1..].len() - code[eq + 1..].trim_start().len());
        let value = code[value_start..].trim_end();
        let vcol = code[..value_start].chars().count() + 1;
        match key {
            "weights" => {
                let nums: Vec<&str> = value.split_whitespace().collect();
                let parsed: Option<Vec<u32>> = nums.iter().map(|s| s.parse().ok()).collect();
                match parsed.as_deref() {
                    Some([p1, p2]) if *p1 > 0 && *p2 > 0 => weights = Some(Weights::new(*p1, *p2)),
                    _ => return Err(mk(vcol, "weights must be two positive integers".into())),
                }
            }
            "h" => h_raw = Some((line_no, value.to_string(), vcol)),
            "field" => field_raw = Some((line_no, value.to_string(), vcol)),
            "order" => {
                let n: i64 = value
                    .parse()
                    .ok()
                    .filter(|&n| n > 0)
                    .ok_or_else(|| mk(vcol, "order must be a positive integer".into()))?;
                order = Some(n);
            }
            "z0" => z0 = Some(parse_complex(value).ok_or_else(|| mk(vcol, "z0 must be re,im".into()))?),
            "germ" => germ_raw.push((line_no, value.to_string(), vcol)),
            "periods" => {
                let v: Option<Vec<Complex64>> = value.split(';').map(parse_complex).collect();
                periods = Some(v.ok_or_else(|| mk(vcol, "periods must be 're,im; re,im; ...'".into()))?);
            }
            "paths" => paths = Some(value.to_string()),
            other => {
                let col = code.len() - code.trim_start().len() + 1;
                return Err(mk(col, format!("unknown key '{other}'")));
            }
        }
    }

    let src = |line: usize| text.lines().nth(line - 1).unwrap_or("").to_string();
    let at = |line: usize, col: usize, message: String| ParseError {
        line,
        col,
        message,
        source_line: src(line),
    };
    // Germ-only files (for classify) need no curve.
    let curve = if weights.is_none() && h_raw.is_none() && field_raw.is_none() {
        None
    } else {
        let weights = weights.ok_or_else(|| at(1, 1, "missing key 'weights'".into()))?;
        let (hl, hv, hc) = h_raw.ok_or_else(|| at(1, 1, "missing key 'h'".into()))?;
        let hp = parse_poly(&hv, hc, &['x', 'y']).map_err(|(c, m)| at(hl, c, m))?;
        let h = expand(&hp, weights, None).map_err(|m| at(hl, hc, m))?;
        Some(Curve { weights, h })
    };

    let field = match field_raw {
        None => None,
        Some((fl, fv, fc)) => {
            let Curve { weights, h } = curve.as_ref().expect("field implies a curve");
            let parts = field_parts(&fv);
            if parts.is_empty() {
                return Err(at(fl, fc, "field needs 'a:' and 'b:' (or 'P:' and 'Q:') parts".into()));
            }
            let mut got: BTreeMap<char, Series2> = BTreeMap::new();
            let chars: Vec<char> = fv.chars().collect();
            for (name, s, e) in parts {
                let sub: String = chars[s..e].iter().collect();
                let p = parse_poly(&sub, fc + s, &['x', 'y', 'h']).map_err(|(c, m)| at(fl, c, m))?;
                let v = expand(&p, *weights, Some(h)).map_err(|m| at(fl, fc + s, m))?;
                if got.insert(name, v).is_some() {
                    return Err(at(fl, fc + s - 2, format!("duplicate part '{name}:'")));
                }
            }
            let keys: String = got.keys().collect();
            match keys.as_str() {
                "ab" => Some(FieldSpec::Log {
                    a: got.remove(&'a').expect("present"),
                    b: got.remove(&'b').expect("present"),
                }),
                "PQ" => Some(FieldSpec::Cartesian {
                    p: got.remove(&'P').expect("present"),
                    q: got.remove(&'Q').expect("present"),
                }),
                _ => return Err(at(fl, fc, "field needs exactly a:,b: or P:,Q:".into())),
            }
        }
    };

    for (gl, gv, gc) in germ_raw {
        let p = parse_poly(&gv, gc, &['z']).map_err(|(c, m)| at(gl, c, m))?;
        germs.push(Series1::from_coeffs(p.into_iter().map(|((i, _, _), c)| (i, c)), EXACT));
    }

    Ok(ProblemFile {
        curve,
        field,
        order,
        z0,
        germs,
        periods,
        paths,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cusp_instance() {
        let pf = parse_problem("weights = 2 3\nh = y^2 - x^3\nfield = a:1 b:x*h\norder = 30").unwrap();
        assert_eq!(pf.curve.as_ref().unwrap().weights, Weights::new(2, 3));
        assert_eq!(pf.curve.as_ref().unwrap().h.render(), "y^2 - x^3");
        assert_eq!(pf.order, Some(30));
        match pf.field.unwrap() {
            FieldSpec::Log { a, b } => {
                assert_eq!(a.render(), "1");
                assert_eq!(b.render(), "x*y^2 - x^4");
            }
            f => panic!("{f:?}"),
        }
    }

    #[test]
    fn caret_on_double_star() {
        let e = parse_problem("weights = 2 3\nh = y^2 - x^3\nfield = a:1 b: x**h\n").unwrap_err();
        assert_eq!(e.line, 3);
        assert_eq!(e.col, 18);
        assert!(e.to_string().ends_with(&format!("\n{}^", " ".repeat(19))));
    }

    #[test]
    fn rationals_parens_powers() {
        let pf = parse_problem("weights = 1 1\nh = (x + y)^2 - 1/2*x*y\n").unwrap();
        assert_eq!(pf.curve.as_ref().unwrap().h.render(), "y^2 + 3/2*x*y + x^2");
    }

    #[test]
    fn errors_are_positional() {
        let e = parse_problem("weights = 2 3\nh = y^2 - x^3\nfoo = 1\n").unwrap_err();
        assert_eq!((e.line, e.col), (3, 1));
        assert!(e.message.contains("unknown key"));
        let e = parse_problem("weights = 2 3\nh = y^2 / x\n").unwrap_err();
        assert!(e.message.contains("division"));
        let e = parse_problem("weights = 2 3\nh = y^2 - w\n").unwrap_err();
        assert_eq!(e.col, 11);
        let e = parse_problem("h = y^2\n").unwrap_err();
        assert!(e.message.contains("weights"));
    }

    #[test]
    fn germs_and_vectors() {
        let pf = parse_problem("weights = 1 1\nh = x*y\ngerm = 2*z\ngerm = z + z^2\nz0 = 1,0\nperiods = 1,0; 0,2\n")
            .unwrap();
        assert_eq!(pf.germs.len(), 2);
        assert_eq!(pf.germs[1].coeff(2), qi(1));
        assert_eq!(pf.z0, Some(Complex64::new(1.0, 0.0)));
        assert_eq!(pf.periods.unwrap()[1], Complex64::new(0.0, 2.0));
    }

    #[test]
    fn germ_only_file() {
        let pf = parse_problem(
            "germ = 2*z
order = 20
",
        )
        .unwrap();
        assert!(pf.curve.is_none());
        assert_eq!(pf.germs.len(), 1);
    }
}
