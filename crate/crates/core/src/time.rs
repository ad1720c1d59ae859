//! Integer picosecond timestamps.
//!
//! Schedule arithmetic is done on integers so that timing identities such as
//! `3 * 400 ns + 500 ns == 1.7 us` hold exactly.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Sub};

use serde::{Deserialize, Serialize};

/// A signed time in picoseconds.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct Picos(pub i64);

impl Picos {
    pub const ZERO: Picos = Picos(0);

    /// Rounds a time in seconds to the nearest picosecond.
    pub fn from_secs(secs: f64) -> Self {
        Picos((secs * 1e12).round() as i64)
    }

    pub fn from_nanos(ns: i64) -> Self {
        Picos(ns * 1_000)
    }

    pub fn from_micros(us: i64) -> Self {
        Picos(us * 1_000_000)
    }

    pub fn as_secs(self) -> f64 {
        self.0 as f64 / 1e12
    }

    pub fn as_nanos(self) -> f64 {
        self.0 as f64 / 1e3
    }

    pub fn as_micros(self) -> f64 {
        self.0 as f64 / 1e6
    }
}

impl Add for Picos {
    type Output = Picos;
    fn add(self, rhs: Picos) -> Picos {
        Picos(self.0 + rhs.0)
    }
}

impl AddAssign for Picos {
    fn add_assign(&mut self, rhs: Picos) {
        self.0 += rhs.0;
    }
}

impl Sub for Picos {
    type Output = Picos;
    fn sub(self, rhs: Picos) -> Picos {
        Picos(self.0 - rhs.0)
    }
}

impl Mul<i64> for Picos {
    type Output = Picos;
    fn mul(self, rhs: i64) -> Picos {
        Picos(self.0 * rhs)
    }
}

impl fmt::Display for Picos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} us", self.as_micros())
    }
}
