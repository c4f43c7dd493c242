//! Number formatting, report headers and file output.

use std::io::Write;
use std::path::Path;

use serde_json::{Map, Number, Value};

use crate::error::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Six significant digits, `%g` style: plain decimals for exponents in `-5..6`, otherwise
/// `<mantissa>e<exp>`. Trailing zeros are dropped.
pub fn sig6(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..6).contains(&exp) {
        trim(&format!("{x:.*}", (5 - exp) as usize))
    } else {
        format!("{}e{exp}", trim(mantissa))
    }
}

fn trim(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').into()
    } else {
        s.into()
    }
}

/// Rounds every non-integer number in `v` to six significant digits.
pub fn round_json(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().expect("f64 number");
            if let Some(r) = sig6(x).parse().ok().and_then(Number::from_f64) {
                *n = r;
            }
        }
        Value::Array(a) => a.iter_mut().for_each(round_json),
        Value::Object(o) => o.values_mut().for_each(round_json),
        _ => {}
    }
}

pub fn header_line(sha256: &str) -> String {
    format!("# qfnet {VERSION} config-sha256={sha256}\n")
}

/// JSON report: version, config digest and body under `result`.
pub fn json_report(sha256: &str, fields: Vec<(&str, Value)>) -> String {
    let mut obj = Map::new();
    obj.insert("qfnet_version".into(), Value::from(VERSION));
    obj.insert("config_sha256".into(), Value::from(sha256));
    for (k, mut v) in fields {
        round_json(&mut v);
        obj.insert(k.into(), v);
    }
    let mut s = serde_json::to_string_pretty(&Value::Object(obj)).expect("json values serialize");
    s.push('\n');
    s
}

/// Minimal CSV writer; fields never contain separators.
pub struct Csv {
    buf: String,
}

impl Csv {
    pub fn new(sha256: &str, columns: &[&str]) -> Self {
        let mut buf = header_line(sha256);
        buf.push_str(&columns.join(","));
        buf.push('\n');
        Csv { buf }
    }

    pub fn row<S: AsRef<str>>(&mut self, fields: &[S]) {
        let cells: Vec<&str> = fields.iter().map(AsRef::as_ref).collect();
        debug_assert!(cells.iter().all(|c| !c.contains([',', '\n', '"'])));
        self.buf.push_str(&cells.join(","));
        self.buf.push('\n');
    }

    pub fn finish(self) -> String {
        self.buf
    }
}

/// Writes to `path`, or stdout when absent.
pub fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Io(format!("writing {}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).and_then(|_| out.flush()).map_err(|e| CliError::Io(format!("stdout: {e}")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(552000.0), "552000");
        assert_eq!(sig6(551_234.567), "551235");
        assert_eq!(sig6(2.57e6), "2.57e6");
        assert_eq!(sig6(1.2432109e10), "1.24321e10");
        assert_eq!(sig6(9.6e-6), "9.6e-6");
        assert_eq!(sig6(1.0e-5), "0.00001");
        assert_eq!(sig6(0.1), "0.1");
        assert_eq!(sig6(-3.0), "-3");
        assert_eq!(sig6(999_999.7), "1e6");
        assert_eq!(sig6(0.0), "0");
    }

    #[test]
    fn json_rounding_keeps_integers() {
        let mut v = serde_json::json!({"a": 1.23456789, "b": [7, 2.0e-7], "c": 18446744073709551615u64});
        round_json(&mut v);
        assert_eq!(v["a"], serde_json::json!(1.23457));
        assert_eq!(v["b"][0], serde_json::json!(7));
        assert_eq!(v["c"], serde_json::json!(18446744073709551615u64));
    }

    #[test]
    fn csv_layout() {
        let mut c = Csv::new("ab", &["x", "y"]);
        c.row(&["1", "2"]);
        assert_eq!(c.finish(), format!("# qfnet {VERSION} config-sha256=ab\nx,y\n1,2\n"));
    }
}
