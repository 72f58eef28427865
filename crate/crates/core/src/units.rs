//! Durations written with an explicit unit, e.g. `"90s"`, `"1.5h"`,
//! `"30min"` or `"250ms"`.

use std::fmt;
use std::str::FromStr;

use serde::de::{self, Deserializer};
use serde::{Deserialize, Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct Seconds(pub f64);

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid duration {0:?}: expected a number followed by ms, s, min or h")]
pub struct DurationParseError(pub String);

impl FromStr for Seconds {
    type Err = DurationParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let split = t
            .find(|c: char| c.is_ascii_alphabetic())
            .ok_or_else(|| DurationParseError(s.to_string()))?;
        let (num, unit) = t.split_at(split);
        let value: f64 = num.trim().parse().map_err(|_| DurationParseError(s.to_string()))?;
        let scale = match unit.trim() {
            "ms" => 1e-3,
            "s" => 1.0,
            "min" => 60.0,
            "h" => 3600.0,
            _ => return Err(DurationParseError(s.to_string())),
        };
        if !value.is_finite() || value < 0.0 {
            return Err(DurationParseError(s.to_string()));
        }
        Ok(Seconds(value * scale))
    }
}

impl fmt::Display for Seconds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}s", self.0)
    }
}

impl Serialize for Seconds {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Seconds {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(de::Error::custom)
    }
}
