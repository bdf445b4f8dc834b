//! Fixed-point quantities with 0.01 resolution.
//!
//! Times, powers and frequencies are stored as integer hundredths so that
//! sums of node durations are exact and release ordering never depends on
//! floating-point drift.

use std::fmt;
use std::ops::{Add, AddAssign, Sub, SubAssign};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of stored units per whole unit.
pub const SCALE: i64 = 100;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecimalError {
    #[error("empty number")]
    Empty,
    #[error("malformed number `{0}`")]
    Malformed(String),
    #[error("`{0}` has more than two decimal places")]
    TooPrecise(String),
    #[error("`{0}` is out of range")]
    OutOfRange(String),
}

/// Parses a non-negative decimal like `300`, `0.5` or `12.25` into hundredths.
pub fn parse_centi(text: &str) -> Result<i64, DecimalError> {
    if text.is_empty() {
        return Err(DecimalError::Empty);
    }
    let (whole, frac) = match text.split_once('.') {
        Some((w, f)) => (w, f),
        None => (text, ""),
    };
    let digits = |s: &str| s.bytes().all(|b| b.is_ascii_digit());
    if whole.is_empty() || !digits(whole) || !digits(frac) || (text.contains('.') && frac.is_empty())
    {
        return Err(DecimalError::Malformed(text.to_string()));
    }
    if frac.len() > 2 {
        return Err(DecimalError::TooPrecise(text.to_string()));
    }
    let whole: i64 = whole
        .parse()
        .map_err(|_| DecimalError::OutOfRange(text.to_string()))?;
    let mut frac_val: i64 = if frac.is_empty() { 0 } else { frac.parse().unwrap() };
    if frac.len() == 1 {
        frac_val *= 10;
    }
    whole
        .checked_mul(SCALE)
        .and_then(|w| w.checked_add(frac_val))
        .ok_or_else(|| DecimalError::OutOfRange(text.to_string()))
}

/// Formats hundredths with the shortest exact decimal representation.
pub fn format_centi(v: i64) -> String {
    let sign = if v < 0 { "-" } else { "" };
    let a = v.unsigned_abs();
    let whole = a / SCALE as u64;
    let frac = a % SCALE as u64;
    if frac == 0 {
        format!("{sign}{whole}")
    } else if frac.is_multiple_of(10) {
        format!("{sign}{whole}.{}", frac / 10)
    } else {
        format!("{sign}{whole}.{frac:02}")
    }
}

macro_rules! centi_quantity {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub i64);

        impl $name {
            pub const ZERO: Self = Self(0);

            /// Builds the quantity from a whole number of units.
            pub const fn from_units(units: i64) -> Self {
                Self(units * SCALE)
            }

            pub const fn from_centi(centi: i64) -> Self {
                Self(centi)
            }

            pub const fn centi(self) -> i64 {
                self.0
            }

            pub fn as_f64(self) -> f64 {
                self.0 as f64 / SCALE as f64
            }

            /// Rounds a floating value to the nearest hundredth.
            pub fn from_f64(v: f64) -> Self {
                Self((v * SCALE as f64).round() as i64)
            }

            pub fn parse(text: &str) -> Result<Self, DecimalError> {
                parse_centi(text).map(Self)
            }

            pub fn is_zero(self) -> bool {
                self.0 == 0
            }

            pub fn saturating_sub(self, rhs: Self) -> Self {
                Self((self.0 - rhs.0).max(0))
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&format_centi(self.0))
            }
        }

        impl Add for $name {
            type Output = Self;
            fn add(self, rhs: Self) -> Self {
                Self(self.0 + rhs.0)
            }
        }

        impl AddAssign for $name {
            fn add_assign(&mut self, rhs: Self) {
                self.0 += rhs.0;
            }
        }

        impl Sub for $name {
            type Output = Self;
            fn sub(self, rhs: Self) -> Self {
                Self(self.0 - rhs.0)
            }
        }

        impl SubAssign for $name {
            fn sub_assign(&mut self, rhs: Self) {
                self.0 -= rhs.0;
            }
        }

        impl std::iter::Sum for $name {
            fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
                Self(iter.map(|v| v.0).sum())
            }
        }
    };
}

centi_quantity!(
    /// A duration in microseconds.
    Micros
);
centi_quantity!(
    /// Peak test power in abstract units (the examples use µW).
    Power
);
centi_quantity!(
    /// A clock frequency in MHz.
    Mhz
);
