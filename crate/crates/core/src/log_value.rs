//! Signed extended-range reals stored as `sign · exp(log_magnitude)`.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `ln(f64::MAX)`; larger log-magnitudes overflow on conversion.
pub const LN_F64_MAX: f64 = 709.782_712_893_384;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogValue {
    sign: i8,
    log_magnitude: f64,
}

impl LogValue {
    pub const ZERO: LogValue = LogValue {
        sign: 0,
        log_magnitude: f64::NEG_INFINITY,
    };
    pub const ONE: LogValue = LogValue {
        sign: 1,
        log_magnitude: 0.0,
    };

    /// Builds `sign · exp(log_magnitude)`. A zero sign or a `−∞` log-magnitude
    /// gives [`LogValue::ZERO`].
    pub fn new(sign: i8, log_magnitude: f64) -> Self {
        if sign == 0 || log_magnitude == f64::NEG_INFINITY {
            Self::ZERO
        } else {
            Self {
                sign: sign.signum(),
                log_magnitude,
            }
        }
    }

    /// `exp(log_magnitude)`, positive.
    pub fn from_log(log_magnitude: f64) -> Self {
        Self::new(1, log_magnitude)
    }

    pub fn from_f64(x: f64) -> Self {
        if x == 0.0 {
            Self::ZERO
        } else {
            Self::new(if x > 0.0 { 1 } else { -1 }, x.abs().ln())
        }
    }

    pub fn sign(&self) -> i8 {
        self.sign
    }

    /// Natural log of `|value|`; `−∞` for zero.
    pub fn log_magnitude(&self) -> f64 {
        if self.sign == 0 {
            f64::NEG_INFINITY
        } else {
            self.log_magnitude
        }
    }

    pub fn log10_magnitude(&self) -> f64 {
        self.log_magnitude() / std::f64::consts::LN_10
    }

    pub fn is_zero(&self) -> bool {
        self.sign == 0
    }

    pub fn is_nan(&self) -> bool {
        self.sign != 0 && self.log_magnitude.is_nan()
    }

    pub fn abs(&self) -> Self {
        Self::new(self.sign.abs(), self.log_magnitude)
    }

    pub fn to_f64(&self) -> Result<f64> {
        match self.sign {
            0 => Ok(0.0),
            _ if self.log_magnitude > LN_F64_MAX => Err(Error::Overflow(self.log_magnitude)),
            s => Ok(s as f64 * self.log_magnitude.exp()),
        }
    }

    /// Compares magnitudes only.
    pub fn cmp_magnitude(&self, other: &Self) -> Ordering {
        self.log_magnitude().total_cmp(&other.log_magnitude())
    }
}

impl Default for LogValue {
    fn default() -> Self {
        Self::ZERO
    }
}

impl Neg for LogValue {
    type Output = LogValue;

    fn neg(self) -> LogValue {
        Self::new(-self.sign, self.log_magnitude)
    }
}

impl Mul for LogValue {
    type Output = LogValue;

    fn mul(self, rhs: LogValue) -> LogValue {
        if self.sign == 0 || rhs.sign == 0 {
            return Self::ZERO;
        }
        Self::new(self.sign * rhs.sign, self.log_magnitude + rhs.log_magnitude)
    }
}

impl Add for LogValue {
    type Output = LogValue;

    fn add(self, rhs: LogValue) -> LogValue {
        if self.sign == 0 {
            return rhs;
        }
        if rhs.sign == 0 {
            return self;
        }
        let (big, small) = if self.log_magnitude >= rhs.log_magnitude {
            (self, rhs)
        } else {
            (rhs, self)
        };
        let d = small.log_magnitude - big.log_magnitude;
        if d.is_nan() {
            return Self::new(big.sign, f64::NAN);
        }
        if big.sign == small.sign {
            Self::new(big.sign, big.log_magnitude + d.exp().ln_1p())
        } else if d == 0.0 {
            Self::ZERO
        } else {
            Self::new(big.sign, big.log_magnitude + (-d.exp()).ln_1p())
        }
    }
}

impl Sub for LogValue {
    type Output = LogValue;

    fn sub(self, rhs: LogValue) -> LogValue {
        self + (-rhs)
    }
}

impl std::iter::Sum for LogValue {
    fn sum<I: Iterator<Item = LogValue>>(iter: I) -> LogValue {
        iter.fold(LogValue::ZERO, |acc, v| acc + v)
    }
}

impl fmt::Display for LogValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.sign {
            0 => write!(f, "0"),
            s => {
                let l10 = self.log10_magnitude();
                let exponent = l10.floor();
                let mantissa = 10f64.powf(l10 - exponent);
                let sign = if s < 0 { "-" } else { "" };
                write!(f, "{sign}{mantissa:.6}e{exponent}")
            }
        }
    }
}

/// Numerically stable `ln Σ exp(xᵢ)`; `−∞` for an empty slice.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}
