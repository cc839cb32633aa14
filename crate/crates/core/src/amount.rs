//! Exact resource quantities.
//!
//! CPU and bandwidth are real-valued in the model, but reservations and
//! releases must cancel bit-for-bit over arbitrarily long simulations. Every
//! quantity is therefore kept on a fixed grid of one millionth of a unit and
//! all arithmetic happens on the integer grid index.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul, Sub, SubAssign};

/// Grid points per whole unit.
pub const UNITS_PER_WHOLE: i64 = 1_000_000;

/// A CPU (MIPS) or bandwidth amount on a fixed micro-unit grid.
#[derive(Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Amount(i64);

impl Amount {
    pub const ZERO: Amount = Amount(0);

    /// Rounds `value` to the nearest grid point.
    pub fn from_f64(value: f64) -> Amount {
        Amount((value * UNITS_PER_WHOLE as f64).round() as i64)
    }

    pub const fn from_whole(value: i64) -> Amount {
        Amount(value * UNITS_PER_WHOLE)
    }

    pub const fn from_micros(micros: i64) -> Amount {
        Amount(micros)
    }

    pub const fn micros(self) -> i64 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / UNITS_PER_WHOLE as f64
    }

    pub const fn is_negative(self) -> bool {
        self.0 < 0
    }

    pub fn checked_sub(self, rhs: Amount) -> Option<Amount> {
        self.0.checked_sub(rhs.0).map(Amount)
    }
}

impl From<f64> for Amount {
    fn from(value: f64) -> Self {
        Amount::from_f64(value)
    }
}

impl Add for Amount {
    type Output = Amount;
    fn add(self, rhs: Amount) -> Amount {
        Amount(self.0 + rhs.0)
    }
}

impl AddAssign for Amount {
    fn add_assign(&mut self, rhs: Amount) {
        self.0 += rhs.0;
    }
}

impl Sub for Amount {
    type Output = Amount;
    fn sub(self, rhs: Amount) -> Amount {
        Amount(self.0 - rhs.0)
    }
}

impl SubAssign for Amount {
    fn sub_assign(&mut self, rhs: Amount) {
        self.0 -= rhs.0;
    }
}

/// Scaling by a hop count.
impl Mul<usize> for Amount {
    type Output = Amount;
    fn mul(self, rhs: usize) -> Amount {
        Amount(self.0 * rhs as i64)
    }
}

impl Sum for Amount {
    fn sum<I: Iterator<Item = Amount>>(iter: I) -> Amount {
        iter.fold(Amount::ZERO, Add::add)
    }
}

impl<'a> Sum<&'a Amount> for Amount {
    fn sum<I: Iterator<Item = &'a Amount>>(iter: I) -> Amount {
        iter.copied().sum()
    }
}

impl fmt::Debug for Amount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.as_f64())
    }
}

impl fmt::Display for Amount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_f64())
    }
}
