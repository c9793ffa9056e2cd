//! Report documents.
//!
//! A report is a JSON object with `"schema": 1` and `"command"`. Numeric
//! sections carry a `"method"` key naming how their numbers were obtained.
//! Non-finite floats are written as the strings `"inf"`, `"-inf"`, `"nan"`.
//! The text form is rendered from the JSON value alone.

use nalgebra::{DMatrix, DVector};
use serde_json::{json, Map, Value};

pub const SCHEMA: u64 = 1;

/// Linear-algebra results that involve no approximation beyond rounding.
pub const EXACT: &str = "exact";
pub const ANALYTIC: &str = "analytic";
pub const CLOSED_FORM: &str = "closed_form";

pub struct Report {
    root: Map<String, Value>,
}

impl Report {
    pub fn new(command: &str) -> Self {
        let mut root = Map::new();
        root.insert("schema".into(), json!(SCHEMA));
        root.insert("command".into(), json!(command));
        Report { root }
    }

    pub fn insert(&mut self, key: &str, value: Value) {
        self.root.insert(key.into(), value);
    }

    pub fn into_value(self) -> Value {
        Value::Object(self.root)
    }
}

pub fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else if x.is_nan() {
        json!("nan")
    } else if x > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

pub fn nums(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|x| num(*x)).collect())
}

pub fn vector(v: &DVector<f64>) -> Value {
    Value::Array(v.iter().map(|x| num(*x)).collect())
}

pub fn matrix(m: &DMatrix<f64>) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| Value::Array((0..m.ncols()).map(|j| num(m[(i, j)])).collect()))
            .collect(),
    )
}

/// `{name: value}` for parallel name and value lists.
pub fn named(names: &[String], xs: &[f64]) -> Value {
    Value::Object(names.iter().cloned().zip(xs.iter().map(|x| num(*x))).collect())
}

pub fn to_json(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

/// `%g`-style formatting with `sig` significant digits.
pub fn format_sig(x: f64, sig: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.*e}", sig - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= sig as i32 {
        let m = trim_zeros(mantissa);
        format!("{m}e{exp}")
    } else {
        let decimals = (sig as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn scalar(v: &Value) -> Option<String> {
    match v {
        Value::Null => Some("-".into()),
        Value::Bool(b) => Some(b.to_string()),
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(match (n.as_i64(), n.as_u64()) {
            (Some(i), _) => i.to_string(),
            (_, Some(u)) => u.to_string(),
            _ => format_sig(n.as_f64().expect("finite number"), 6),
        }),
        _ => None,
    }
}

fn inline_array(items: &[Value]) -> Option<String> {
    let parts: Option<Vec<String>> = items.iter().map(scalar).collect();
    parts.map(|p| format!("[{}]", p.join(", ")))
}

fn is_matrix(items: &[Value]) -> bool {
    !items.is_empty()
        && items
            .iter()
            .all(|r| matches!(r, Value::Array(row) if inline_array(row).is_some()))
}

/// Text rendering: nested keys are indented, scalar arrays inline, matrices
/// one row per line, numbers to 6 significant digits.
pub fn render_text(v: &Value) -> String {
    let mut out = String::new();
    render(v, 0, &mut out);
    out
}

fn render(v: &Value, indent: usize, out: &mut String) {
    let pad = " ".repeat(indent);
    match v {
        Value::Object(map) => {
            for (k, val) in map {
                render_entry(k, val, indent, out);
            }
        }
        Value::Array(items) => {
            for item in items {
                match item {
                    Value::Object(_) => {
                        out.push_str(&format!("{pad}-\n"));
                        render(item, indent + 2, out);
                    }
                    _ => render_entry("-", item, indent, out),
                }
            }
        }
        other => out.push_str(&format!("{pad}{}\n", scalar(other).unwrap_or_default())),
    }
}

fn render_entry(key: &str, val: &Value, indent: usize, out: &mut String) {
    let pad = " ".repeat(indent);
    if let Some(s) = scalar(val) {
        out.push_str(&format!("{pad}{key}: {s}\n"));
        return;
    }
    match val {
        Value::Array(items) if items.is_empty() => out.push_str(&format!("{pad}{key}: []\n")),
        Value::Array(items) => {
            if let Some(s) = inline_array(items) {
                out.push_str(&format!("{pad}{key}: {s}\n"));
            } else if is_matrix(items) {
                out.push_str(&format!("{pad}{key}:\n"));
                for row in items {
                    let Value::Array(row) = row else { unreachable!() };
                    out.push_str(&format!("{pad}  {}\n", inline_array(row).unwrap_or_default()));
                }
            } else {
                out.push_str(&format!("{pad}{key}:\n"));
                render(val, indent + 2, out);
            }
        }
        _ => {
            out.push_str(&format!("{pad}{key}:\n"));
            render(val, indent + 2, out);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(format_sig(0.0720016903697749, 6), "0.0720017");
        assert_eq!(format_sig(-0.604777686261766, 6), "-0.604778");
        assert_eq!(format_sig(1.5, 6), "1.5");
        assert_eq!(format_sig(1234567.0, 6), "1.23457e6");
        assert_eq!(format_sig(3.2e-7, 6), "3.2e-7");
        assert_eq!(format_sig(100.0, 6), "100");
    }

    #[test]
    fn non_finite_numbers_are_tagged() {
        assert_eq!(num(f64::INFINITY), json!("inf"));
        assert_eq!(num(f64::NEG_INFINITY), json!("-inf"));
        assert_eq!(num(f64::NAN), json!("nan"));
        assert_eq!(num(0.25), json!(0.25));
    }

    #[test]
    fn json_round_trips() {
        let mut r = Report::new("test");
        r.insert("m", matrix(&DMatrix::from_row_slice(2, 2, &[0.1, 1.0 / 3.0, -2e-17, 5.0])));
        r.insert("e", json!({"method": ANALYTIC, "x": num(f64::INFINITY)}));
        let v = r.into_value();
        let text = to_json(&v);
        let back: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(back, v);
        assert_eq!(to_json(&back), text);
    }

    #[test]
    fn text_rendering() {
        let v = json!({
            "a": [1.0, 2.5],
            "m": [[1.0, 0.0], [0.0, 1.0]],
            "s": {"method": "exact", "x": 0.123456789},
            "list": [{"k": 1}, {"k": 2}],
            "none": null
        });
        let text = render_text(&v);
        assert!(text.contains("a: [1, 2.5]"));
        assert!(text.contains("m:\n  [1, 0]\n  [0, 1]\n"));
        assert!(text.contains("s:\n  method: exact\n  x: 0.123457\n"));
        assert!(text.contains("list:\n  -\n    k: 1\n  -\n    k: 2\n"));
        assert!(text.contains("none: -"));
    }
}
