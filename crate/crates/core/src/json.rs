//! Canonical JSON: struct field order, two-space indentation, floats rounded to
//! nine significant digits. Equal values always produce identical bytes.

use std::io;
use std::path::Path;

use serde::Serialize;
use serde_json::{Number, Value};

pub const SIGNIFICANT_DIGITS: usize = 9;

/// Rounds `x` to [`SIGNIFICANT_DIGITS`] significant digits; `-0.0` becomes `0.0`.
pub fn round_significant(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return if x == 0.0 { 0.0 } else { x };
    }
    let r: f64 = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x)
        .parse()
        .unwrap_or(x);
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// Applies [`round_significant`] to every non-integer number in the tree.
pub fn canonicalize(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = round_significant(n.as_f64().unwrap_or(0.0));
            Number::from_f64(x).map_or(Value::Null, Value::Number)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(canonicalize).collect()),
        Value::Object(m) => {
            Value::Object(m.into_iter().map(|(k, v)| (k, canonicalize(v))).collect())
        }
        other => other,
    }
}

pub fn to_canonical_string<T: Serialize + ?Sized>(value: &T) -> serde_json::Result<String> {
    let v = canonicalize(serde_json::to_value(value)?);
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

pub fn write_canonical<T: Serialize + ?Sized>(path: &Path, value: &T) -> io::Result<()> {
    let s = to_canonical_string(value).map_err(io::Error::other)?;
    std::fs::write(path, s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn rounding() {
        assert_eq!(round_significant(0.1 + 0.2), 0.3);
        assert_eq!(round_significant(123456789.87), 123456790.0);
        assert_eq!(round_significant(-0.0), 0.0);
        assert_eq!(round_significant(1.0 / 3.0), 0.333333333);
        assert_eq!(round_significant(2.5e-12), 2.5e-12);
    }

    #[test]
    fn canonical_text() {
        let v = json!({"b": 0.1 + 0.2, "a": [1, 2.0, -0.0], "c": "x"});
        let s = to_canonical_string(&v).unwrap();
        assert_eq!(
            s,
            "{\n  \"b\": 0.3,\n  \"a\": [\n    1,\n    2.0,\n    0.0\n  ],\n  \"c\": \"x\"\n}\n"
        );
    }
}
