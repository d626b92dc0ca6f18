//! Scalar types usable as transition probabilities.
//!
//! Top-k transition probabilities are ratios of occurrence counts, so the
//! automaton is generic over how those ratios are represented: `f64` for the
//! on-disk format and normal drafting, `f32` for compact in-memory use, and
//! [`Ratio<u64>`] when tests need exact arithmetic.

use std::fmt::Debug;
use std::ops::Mul;

use num_rational::Ratio;
use num_traits::One;

/// A probability value built from a pair of occurrence counts.
pub trait Probability:
    Copy + Debug + PartialOrd + Mul<Output = Self> + One + Send + Sync + 'static
{
    /// `num / den`. `den` is never zero for a well-formed automaton.
    fn from_counts(num: u64, den: u64) -> Self;

    fn to_f64(self) -> f64;
}

impl Probability for f64 {
    fn from_counts(num: u64, den: u64) -> Self {
        num as f64 / den as f64
    }

    fn to_f64(self) -> f64 {
        self
    }
}

impl Probability for f32 {
    fn from_counts(num: u64, den: u64) -> Self {
        (num as f64 / den as f64) as f32
    }

    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Probability for Ratio<u64> {
    fn from_counts(num: u64, den: u64) -> Self {
        Ratio::new(num, den)
    }

    fn to_f64(self) -> f64 {
        *self.numer() as f64 / *self.denom() as f64
    }
}
