use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::interp::OutputValue;

/// Floor of the relative-deviation denominator.
pub const EPSILON: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Metric {
    /// `100 * mean(|cand - ref| / max(|ref|, EPSILON))`
    DeviationPercent,
    /// Pass iff every output is bitwise identical.
    BinaryExact,
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "deviation" | "deviation-percent" => Ok(Metric::DeviationPercent),
            "binary" | "binary-exact" | "exact" => Ok(Metric::BinaryExact),
            _ => Err(format!("unknown metric `{s}` (expected deviation or binary)")),
        }
    }
}

/// Quality requirement: a maximum deviation in percent, or exact output.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Threshold {
    Percent(f64),
    Exact,
}

impl fmt::Display for Threshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Threshold::Percent(p) => write!(f, "{p}%"),
            Threshold::Exact => f.write_str("exact"),
        }
    }
}

impl FromStr for Threshold {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let t = s.trim();
        if matches!(t, "exact" | "perfect") {
            return Ok(Threshold::Exact);
        }
        let num = t.strip_suffix('%').unwrap_or(t).trim();
        match num.parse::<f64>() {
            Ok(p) if p >= 0.0 && p.is_finite() => Ok(Threshold::Percent(p)),
            _ => Err(format!("bad threshold `{s}` (expected e.g. 10, 10% or exact)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
#[error("output shapes differ: reference has {reference} values, candidate {candidate}")]
pub struct ShapeMismatch {
    pub reference: usize,
    pub candidate: usize,
}

/// A metric score. For the binary metric the score is 0 (equal) or 100.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Score {
    pub value: f64,
    pub exact: bool,
}

impl Score {
    pub fn passes(self, t: Threshold) -> bool {
        match t {
            Threshold::Exact => self.exact,
            Threshold::Percent(p) => self.value <= p,
        }
    }
}

fn element_deviation(r: f64, c: f64) -> f64 {
    if r.is_nan() || c.is_nan() {
        return if r.is_nan() && c.is_nan() { 0.0 } else { f64::INFINITY };
    }
    if r.is_infinite() || c.is_infinite() {
        return if r == c { 0.0 } else { f64::INFINITY };
    }
    (c - r).abs() / r.abs().max(EPSILON)
}

pub fn quality(reference: &[OutputValue], candidate: &[OutputValue], metric: Metric) -> Result<Score, ShapeMismatch> {
    if reference.len() != candidate.len() {
        return Err(ShapeMismatch { reference: reference.len(), candidate: candidate.len() });
    }
    let exact = reference.iter().zip(candidate).all(|(r, c)| r.bits == c.bits && r.ty == c.ty);
    let value = match metric {
        Metric::BinaryExact => {
            if exact {
                0.0
            } else {
                100.0
            }
        }
        Metric::DeviationPercent if reference.is_empty() => 0.0,
        Metric::DeviationPercent => {
            let sum: f64 = reference
                .iter()
                .zip(candidate)
                .map(|(r, c)| element_deviation(r.as_f64(), c.as_f64()))
                .sum();
            100.0 * sum / reference.len() as f64
        }
    };
    Ok(Score { value, exact })
}
