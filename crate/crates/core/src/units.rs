//! Rate values with optional unit suffixes.
//!
//! Values quoted in Hz-family units are taken verbatim as angular
//! frequencies in rad/µs: `"30 MHz"` is `30.0`, `"2 GHz"` is `2000.0` and
//! `"100 kHz"` is `0.1`. Bare numbers are already rad/µs.

use serde::de::{self, Deserializer, Visitor};

use crate::{Error, Result};

/// Parse `"<value> <unit>"` or a plain number into rad/µs.
pub fn parse_rate(s: &str) -> Result<f64> {
    let s = s.trim();
    let split = s
        .find(|c: char| c.is_ascii_alphabetic() && c != 'e' && c != 'E')
        .or_else(|| {
            // "1e3" is a number, "1e3 MHz" still has a unit further on
            s.find(' ')
        })
        .unwrap_or(s.len());
    let (num, unit) = s.split_at(split);
    let value: f64 = num
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("cannot parse rate value in {s:?}")))?;
    let scale = match unit.trim() {
        "" | "rad/us" | "rad/µs" => 1.0,
        "Hz" => 1e-6,
        "kHz" => 1e-3,
        "MHz" => 1.0,
        "GHz" => 1e3,
        other => return Err(Error::Config(format!("unknown rate unit {other:?}"))),
    };
    Ok(value * scale)
}

/// `deserialize_with` helper accepting a number or a string with a unit.
pub fn rate<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    struct RateVisitor;

    impl<'de> Visitor<'de> for RateVisitor {
        type Value = f64;

        fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
            f.write_str("a number or a string such as \"30 MHz\"")
        }

        fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<f64, E> {
            Ok(v)
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<f64, E> {
            parse_rate(v).map_err(E::custom)
        }
    }

    d.deserialize_any(RateVisitor)
}
