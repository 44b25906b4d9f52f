//! Real-valued parameters that stay exact when they were written as rationals.
//!
//! Branch conditions in the rate formulas are equalities such as `alpha = tau + 1/2`.
//! Parsing `"1/2"` or `"0.5"` into a rational keeps those comparisons exact; values
//! that only exist as floats are compared with a small tolerance instead.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use num_rational::Ratio;

use crate::error::{Error, Result};

/// Tolerance used when at least one side of a comparison is a float.
pub const FLOAT_TOLERANCE: f64 = 1e-12;

/// Largest decimal digit count we convert to an exact rational.
const MAX_EXACT_DIGITS: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Param {
    Exact(Ratio<i64>),
    Float(f64),
}

/// Result of comparing two parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Comparison {
    pub ordering: Ordering,
    /// Equality was decided by tolerance rather than exact arithmetic.
    pub approximate: bool,
}

impl Param {
    pub fn int(n: i64) -> Self {
        Param::Exact(Ratio::from_integer(n))
    }

    pub fn ratio(num: i64, den: i64) -> Self {
        Param::Exact(Ratio::new(num, den))
    }

    pub fn value(self) -> f64 {
        match self {
            Param::Exact(r) => *r.numer() as f64 / *r.denom() as f64,
            Param::Float(x) => x,
        }
    }

    pub fn exact(self) -> Option<Ratio<i64>> {
        match self {
            Param::Exact(r) => Some(r),
            Param::Float(_) => None,
        }
    }

    pub fn is_finite(self) -> bool {
        match self {
            Param::Exact(_) => true,
            Param::Float(x) => x.is_finite(),
        }
    }

    pub fn compare(self, other: Param) -> Comparison {
        if let (Param::Exact(a), Param::Exact(b)) = (self, other) {
            return Comparison {
                ordering: a.cmp(&b),
                approximate: false,
            };
        }
        let diff = self.value() - other.value();
        if diff.abs() <= FLOAT_TOLERANCE {
            Comparison {
                ordering: Ordering::Equal,
                approximate: true,
            }
        } else if diff < 0.0 {
            Comparison {
                ordering: Ordering::Less,
                approximate: false,
            }
        } else {
            Comparison {
                ordering: Ordering::Greater,
                approximate: false,
            }
        }
    }

    pub fn max(self, other: Param) -> Param {
        if self.compare(other).ordering == Ordering::Less {
            other
        } else {
            self
        }
    }

    fn combine(
        self,
        other: Param,
        exact: impl Fn(Ratio<i64>, Ratio<i64>) -> Option<Ratio<i64>>,
        float: impl Fn(f64, f64) -> f64,
    ) -> Param {
        if let (Param::Exact(a), Param::Exact(b)) = (self, other) {
            if let Some(r) = exact(a, b) {
                return Param::Exact(r);
            }
        }
        Param::Float(float(self.value(), other.value()))
    }
}

impl From<f64> for Param {
    fn from(x: f64) -> Self {
        Param::Float(x)
    }
}

impl From<i64> for Param {
    fn from(n: i64) -> Self {
        Param::int(n)
    }
}

impl Add for Param {
    type Output = Param;
    fn add(self, rhs: Param) -> Param {
        self.combine(rhs, |a, b| checked(a, b, i64::checked_add), |a, b| a + b)
    }
}

impl Sub for Param {
    type Output = Param;
    fn sub(self, rhs: Param) -> Param {
        self + (-rhs)
    }
}

impl Mul for Param {
    type Output = Param;
    fn mul(self, rhs: Param) -> Param {
        self.combine(
            rhs,
            |a, b| {
                let num = a.numer().checked_mul(*b.numer())?;
                let den = a.denom().checked_mul(*b.denom())?;
                Some(Ratio::new(num, den))
            },
            |a, b| a * b,
        )
    }
}

impl Neg for Param {
    type Output = Param;
    fn neg(self) -> Param {
        match self {
            Param::Exact(r) => Param::Exact(-r),
            Param::Float(x) => Param::Float(-x),
        }
    }
}

fn checked(a: Ratio<i64>, b: Ratio<i64>, op: fn(i64, i64) -> Option<i64>) -> Option<Ratio<i64>> {
    let den = a.denom().checked_mul(*b.denom())?;
    let left = a.numer().checked_mul(*b.denom())?;
    let right = b.numer().checked_mul(*a.denom())?;
    Some(Ratio::new(op(left, right)?, den))
}

impl FromStr for Param {
    type Err = Error;

    /// Accepts integers, `p/q` fractions and plain decimals (all exact), or any
    /// other float syntax such as `1e-3` (kept as a float).
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Parse(format!("not a number: {s:?}"));
        if s.is_empty() {
            return Err(bad());
        }
        if let Some((num, den)) = s.split_once('/') {
            let num: i64 = num.trim().parse().map_err(|_| bad())?;
            let den: i64 = den.trim().parse().map_err(|_| bad())?;
            if den == 0 {
                return Err(Error::Parse(format!("zero denominator in {s:?}")));
            }
            return Ok(Param::ratio(num, den));
        }
        if let Some(r) = parse_decimal(s) {
            return Ok(Param::Exact(r));
        }
        let x: f64 = s.parse().map_err(|_| bad())?;
        if !x.is_finite() {
            return Err(bad());
        }
        Ok(Param::Float(x))
    }
}

/// Parses `[-+]digits[.digits]` into an exact rational.
fn parse_decimal(s: &str) -> Option<Ratio<i64>> {
    let (negative, body) = match s.as_bytes().first()? {
        b'-' => (true, &s[1..]),
        b'+' => (false, &s[1..]),
        _ => (false, s),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    let all_digits = |p: &str| p.bytes().all(|b| b.is_ascii_digit());
    if !all_digits(int_part) || !all_digits(frac_part) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let significant = digits.trim_start_matches('0');
    if significant.len() > MAX_EXACT_DIGITS || frac_part.len() > MAX_EXACT_DIGITS {
        return None;
    }
    let numer: i64 = if significant.is_empty() {
        0
    } else {
        significant.parse().ok()?
    };
    let denom = 10i64.checked_pow(frac_part.len() as u32)?;
    let r = Ratio::new(numer, denom);
    Some(if negative { -r } else { r })
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Param::Exact(r) if *r.denom() == 1 => write!(f, "{}", r.numer()),
            Param::Exact(r) => write!(f, "{}/{}", r.numer(), r.denom()),
            Param::Float(x) => write!(f, "{x}"),
        }
    }
}

/// A parsed `name:key=value,key=value` specification string.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecString {
    pub name: String,
    pub fields: Vec<(String, String)>,
}

impl SpecString {
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, rest) = s.split_once(':').unwrap_or((s, ""));
        let name = name.trim().to_ascii_lowercase();
        if name.is_empty() {
            return Err(Error::Parse(format!("missing name in {s:?}")));
        }
        let mut fields: Vec<(String, String)> = Vec::new();
        for part in rest.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key=value, got {part:?}")))?;
            let key = k.trim().to_string();
            if fields.iter().any(|(existing, _)| *existing == key) {
                return Err(Error::Parse(format!("duplicate key {key:?} in {s:?}")));
            }
            fields.push((key, v.trim().to_string()));
        }
        Ok(SpecString { name, fields })
    }

    /// Fails if any key is not in `allowed`.
    pub fn only(&self, allowed: &[&str]) -> Result<()> {
        for (k, _) in &self.fields {
            if !allowed.contains(&k.as_str()) {
                return Err(Error::Parse(format!(
                    "unknown key {k:?} for {:?} (expected one of {allowed:?})",
                    self.name
                )));
            }
        }
        Ok(())
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.fields
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn param(&self, key: &str) -> Result<Option<Param>> {
        self.raw(key).map(str::parse).transpose()
    }

    pub fn require(&self, key: &str) -> Result<Param> {
        self.param(key)?
            .ok_or_else(|| Error::Parse(format!("{:?} requires key {key:?}", self.name)))
    }
}
