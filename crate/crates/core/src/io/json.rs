//! JSON with every float written as 17 significant digits.
//!
//! Objects are emitted with sorted keys (they pass through
//! [`serde_json::Value`]), so equal values always give equal bytes.

use std::io;

use serde::Serialize;
use serde_json::ser::{CompactFormatter, Formatter, PrettyFormatter};
use serde_json::Value;

use crate::error::Result;

/// `d.dddddddddddddddde[-]x`: 17 significant digits, round-trips exactly.
pub fn format_float(value: f64) -> String {
    format!("{value:.16e}")
}

/// Wraps a formatter and replaces its float output. Non-finite values never
/// reach it: `serde_json` writes them as `null`.
struct Fixed<F>(F);

macro_rules! delegate {
    ($($name:ident($($arg:ident: $ty:ty),*);)*) => {
        $(
            fn $name<W: ?Sized + io::Write>(&mut self, writer: &mut W $(, $arg: $ty)*) -> io::Result<()> {
                self.0.$name(writer $(, $arg)*)
            }
        )*
    };
}

impl<F: Formatter> Formatter for Fixed<F> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(format_float(value).as_bytes())
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }

    delegate! {
        begin_array();
        end_array();
        begin_array_value(first: bool);
        end_array_value();
        begin_object();
        end_object();
        begin_object_key(first: bool);
        end_object_key();
        begin_object_value();
        end_object_value();
    }
}

/// Converts to a [`Value`], which orders object keys.
pub fn canonical_value<T: Serialize + ?Sized>(value: &T) -> Result<Value> {
    Ok(serde_json::to_value(value)?)
}

fn write_with<F: Formatter>(value: &Value, formatter: F) -> Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, Fixed(formatter));
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(out).expect("serde_json emits UTF-8"))
}

/// Single-line canonical form, used for hashing.
pub fn to_canonical_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    write_with(&canonical_value(value)?, CompactFormatter)
}

/// Indented canonical form with a trailing newline, used for files.
pub fn to_pretty_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut s = write_with(&canonical_value(value)?, PrettyFormatter::with_indent(b"  "))?;
    s.push('\n');
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn floats_have_seventeen_digits() {
        let s = to_canonical_string(&json!({"b": 0.1, "a": [1.0, -2.5e-300], "n": 3})).unwrap();
        assert_eq!(
            s,
            r#"{"a":[1.0000000000000000e0,-2.5000000000000000e-300],"b":1.0000000000000001e-1,"n":3}"#
        );
    }

    #[test]
    fn non_finite_is_null() {
        let s = to_canonical_string(&[f64::NAN, f64::INFINITY]).unwrap();
        assert_eq!(s, "[null,null]");
    }

    #[test]
    fn round_trip_is_exact() {
        let values = [0.1, 1.0 / 3.0, 6.02214076e23, f64::MIN_POSITIVE, -0.0, 4.9e-324];
        let s = to_pretty_string(&values).unwrap();
        let back: Vec<f64> = serde_json::from_str(&s).unwrap();
        for (a, b) in values.iter().zip(&back) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
