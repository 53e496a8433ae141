//! Value conversions and the text renderer.
//!
//! Reports are built as ordered JSON objects; text output walks the same
//! tree, so both formats carry identical content.

use folgal_core::scalar::{q_string, Q};
use folgal_core::series::{Series1, Series2, EXACT};
use num_complex::Complex64;
use serde_json::{json, Map, Value};

pub fn q(x: &Q) -> Value {
    Value::String(q_string(x))
}

pub fn qs(xs: &[Q]) -> Value {
    Value::Array(xs.iter().map(q).collect())
}

fn float(x: f64) -> Value {
    // Signed zero and tiny noise would make output depend on rounding paths.
    let x = if x.abs() < 1e-300 { 0.0 } else { x };
    serde_json::Number::from_f64(x).map_or_else(|| Value::String(format!("{x}")), Value::Number)
}

pub fn real(x: f64) -> Value {
    float(x)
}

pub fn c(z: Complex64) -> Value {
    Value::Array(vec![float(z.re), float(z.im)])
}

pub fn cs(zs: &[Complex64]) -> Value {
    Value::Array(zs.iter().copied().map(c).collect())
}

fn trunc(t: i64) -> Value {
    if t == EXACT {
        Value::String("exact".into())
    } else {
        Value::from(t)
    }
}

pub fn series1(s: &Series1<Q>, var: &str) -> Value {
    json!({
        "text": s.render(var),
        "trunc": trunc(s.trunc()),
        "terms": s.terms().map(|(e, v)| json!([e, q_string(v)])).collect::<Vec<_>>(),
    })
}

pub fn series1c(s: &Series1<Complex64>, var: &str) -> Value {
    json!({
        "trunc": trunc(s.trunc()),
        "terms": s.terms().map(|(e, v)| json!([e, c(*v)])).collect::<Vec<_>>(),
        "text": s.render(var),
    })
}

pub fn series2(s: &Series2) -> Value {
    json!({
        "text": s.render(),
        "trunc": trunc(s.trunc()),
    })
}

pub fn object(pairs: Vec<(&str, Value)>) -> Value {
    let mut m = Map::new();
    for (k, v) in pairs {
        m.insert(k.to_string(), v);
    }
    Value::Object(m)
}

fn scalar_text(v: &Value) -> Option<String> {
    match v {
        // Series print as their rendering only.
        Value::Object(o) if o.contains_key("text") && o.contains_key("trunc") => o["text"].as_str().map(str::to_string),
        Value::Null => Some("none".into()),
        Value::Bool(b) => Some(b.to_string()),
        Value::Number(n) => Some(n.to_string()),
        Value::String(s) => Some(s.clone()),
        Value::Array(a) if a.iter().all(|x| scalar_text(x).is_some()) => {
            let parts: Vec<String> = a.iter().map(|x| scalar_text(x).unwrap()).collect();
            Some(format!("[{}]", parts.join(", ")))
        }
        _ => None,
    }
}

fn write_text(v: &Value, indent: usize, out: &mut String) {
    let pad = "  ".repeat(indent);
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                match scalar_text(x) {
                    Some(s) => out.push_str(&format!("{pad}{k}: {s}\n")),
                    None => {
                        out.push_str(&format!("{pad}{k}:\n"));
                        write_text(x, indent + 1, out);
                    }
                }
            }
        }
        Value::Array(a) => {
            for x in a {
                match scalar_text(x) {
                    Some(s) => out.push_str(&format!("{pad}- {s}\n")),
                    None => {
                        out.push_str(&format!("{pad}-\n"));
                        write_text(x, indent + 1, out);
                    }
                }
            }
        }
        other => out.push_str(&format!("{pad}{}\n", scalar_text(other).unwrap_or_default())),
    }
}

pub fn to_text(v: &Value) -> String {
    let mut out = String::new();
    write_text(v, 0, &mut out);
    out
}

pub fn to_json(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}
