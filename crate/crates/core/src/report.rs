//! Bit-stable result emission: a small JSON tree with sorted keys and fixed
//! 17-significant-digit float formatting, plus CSV helpers using the same
//! number format. Identical inputs yield byte-identical artifacts.

use std::collections::BTreeMap;

/// Fixed float formatting: 17 significant digits in scientific notation,
/// enough to round-trip any f64 and stable across runs.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        return "nan".to_string();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    format!("{v:.16e}")
}

/// JSON value with deterministic rendering. Object keys are kept in a
/// `BTreeMap`, so emission order is always sorted. Non-finite numbers render
/// as `null` (JSON has no literal for them).
#[derive(Debug, Clone, PartialEq)]
pub enum Json {
    Null,
    Bool(bool),
    Int(i64),
    Num(f64),
    Str(String),
    Arr(Vec<Json>),
    Obj(BTreeMap<String, Json>),
}

impl Json {
    pub fn obj(entries: impl IntoIterator<Item = (&'static str, Json)>) -> Json {
        Json::Obj(
            entries
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
        )
    }

    pub fn arr(items: impl IntoIterator<Item = Json>) -> Json {
        Json::Arr(items.into_iter().collect())
    }

    pub fn nums(items: impl IntoIterator<Item = f64>) -> Json {
        Json::Arr(items.into_iter().map(Json::Num).collect())
    }

    pub fn opt_num(v: Option<f64>) -> Json {
        v.map(Json::Num).unwrap_or(Json::Null)
    }

    /// Renders with two-space indentation and a trailing newline.
    pub fn render(&self) -> String {
        let mut out = String::new();
        self.write(&mut out, 0);
        out.push('\n');
        out
    }

    fn write(&self, out: &mut String, indent: usize) {
        match self {
            Json::Null => out.push_str("null"),
            Json::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
            Json::Int(i) => out.push_str(&i.to_string()),
            Json::Num(v) => {
                if v.is_finite() {
                    out.push_str(&fmt_f64(*v));
                } else {
                    out.push_str("null");
                }
            }
            Json::Str(s) => write_escaped(out, s),
            Json::Arr(items) => {
                if items.is_empty() {
                    out.push_str("[]");
                    return;
                }
                out.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    out.push('\n');
                    out.push_str(&"  ".repeat(indent + 1));
                    item.write(out, indent + 1);
                }
                out.push('\n');
                out.push_str(&"  ".repeat(indent));
                out.push(']');
            }
            Json::Obj(map) => {
                if map.is_empty() {
                    out.push_str("{}");
                    return;
                }
                out.push('{');
                for (i, (key, value)) in map.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    out.push('\n');
                    out.push_str(&"  ".repeat(indent + 1));
                    write_escaped(out, key);
                    out.push_str(": ");
                    value.write(out, indent + 1);
                }
                out.push('\n');
                out.push_str(&"  ".repeat(indent));
                out.push('}');
            }
        }
    }
}

fn write_escaped(out: &mut String, s: &str) {
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out.push('"');
}

/// Accumulates CSV text with the shared float format. Optional cells render
/// empty.
#[derive(Debug, Default)]
pub struct Csv {
    buf: String,
}

impl Csv {
    pub fn new(header: &str) -> Self {
        let mut buf = String::with_capacity(1024);
        buf.push_str(header);
        buf.push('\n');
        Csv { buf }
    }

    pub fn row(&mut self, cells: &[CsvCell]) {
        for (i, cell) in cells.iter().enumerate() {
            if i > 0 {
                self.buf.push(',');
            }
            match cell {
                CsvCell::Int(v) => self.buf.push_str(&v.to_string()),
                CsvCell::Num(v) => self.buf.push_str(&fmt_f64(*v)),
                CsvCell::Opt(Some(v)) => self.buf.push_str(&fmt_f64(*v)),
                CsvCell::Opt(None) => {}
            }
        }
        self.buf.push('\n');
    }

    pub fn finish(self) -> String {
        self.buf
    }
}

#[derive(Debug, Clone, Copy)]
pub enum CsvCell {
    Int(i64),
    Num(f64),
    Opt(Option<f64>),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_render_with_17_significant_digits() {
        assert_eq!(fmt_f64(0.5), "5.0000000000000000e-1");
        assert_eq!(fmt_f64(-1.0), "-1.0000000000000000e0");
        assert_eq!(fmt_f64(f64::NEG_INFINITY), "-inf");
        assert_eq!(fmt_f64(f64::NAN), "nan");
    }

    #[test]
    fn format_round_trips_f64() {
        for v in [std::f64::consts::PI, 1.0 / 3.0, 2.25e-308, 1.7e308] {
            let parsed: f64 = fmt_f64(v).parse().unwrap();
            assert_eq!(parsed, v);
        }
    }

    #[test]
    fn object_keys_render_sorted() {
        let json = Json::obj([("zeta", Json::Int(1)), ("alpha", Json::Bool(true))]);
        let text = json.render();
        assert!(text.find("alpha").unwrap() < text.find("zeta").unwrap());
    }

    #[test]
    fn non_finite_numbers_become_null_in_json() {
        let json = Json::obj([("u", Json::Num(f64::NEG_INFINITY))]);
        assert!(json.render().contains("null"));
    }

    #[test]
    fn csv_rows_with_optional_cells() {
        let mut csv = Csv::new("generation,w,r");
        csv.row(&[CsvCell::Int(0), CsvCell::Num(1.0), CsvCell::Opt(None)]);
        let text = csv.finish();
        assert_eq!(text, "generation,w,r\n0,1.0000000000000000e0,\n");
    }
}
