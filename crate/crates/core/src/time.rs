//! Simulation time as integer picoseconds.
//!
//! Every timing constant in the node resolves exactly on a 1 ps grid
//! (the finest is the 15.5 ns memory wake time), so instants and
//! durations are plain `u64` picosecond counts. A `u64` covers about
//! 213 days, far beyond the one-day scenario horizon.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::{Add, AddAssign, Sub};

pub const PS_PER_NS: u64 = 1_000;
pub const PS_PER_US: u64 = 1_000_000;
pub const PS_PER_MS: u64 = 1_000_000_000;
pub const PS_PER_SEC: u64 = 1_000_000_000_000;

/// An instant or duration on the simulation clock, in picoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimTime(u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub const fn from_ps(ps: u64) -> Self {
        SimTime(ps)
    }

    pub const fn from_ns(ns: u64) -> Self {
        SimTime(ns * PS_PER_NS)
    }

    pub const fn from_us(us: u64) -> Self {
        SimTime(us * PS_PER_US)
    }

    pub const fn from_ms(ms: u64) -> Self {
        SimTime(ms * PS_PER_MS)
    }

    pub const fn from_secs(s: u64) -> Self {
        SimTime(s * PS_PER_SEC)
    }

    /// Nearest-picosecond conversion from seconds. Panics on negative input.
    pub fn from_secs_f64(s: f64) -> Self {
        assert!(s >= 0.0 && s.is_finite(), "invalid duration: {s}");
        SimTime((s * 1e12).round() as u64)
    }

    pub const fn as_ps(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 * 1e-12
    }

    pub fn checked_sub(self, rhs: SimTime) -> Option<SimTime> {
        self.0.checked_sub(rhs.0).map(SimTime)
    }

    pub fn saturating_sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(rhs.0))
    }
}

impl Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl AddAssign for SimTime {
    fn add_assign(&mut self, rhs: SimTime) {
        self.0 += rhs.0;
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.checked_sub(rhs.0).expect("time underflow"))
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ps = self.0;
        if ps == 0 {
            write!(f, "0")
        } else if ps.is_multiple_of(PS_PER_SEC) {
            write!(f, "{} s", ps / PS_PER_SEC)
        } else if ps.is_multiple_of(PS_PER_MS) {
            write!(f, "{} ms", ps / PS_PER_MS)
        } else if ps.is_multiple_of(PS_PER_US) {
            write!(f, "{} us", ps / PS_PER_US)
        } else if ps.is_multiple_of(PS_PER_NS) {
            write!(f, "{} ns", ps / PS_PER_NS)
        } else {
            write!(f, "{ps} ps")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_ns_is_exactly_1000_ps() {
        assert_eq!(SimTime::from_ns(1).as_ps(), 1_000);
    }

    #[test]
    fn memory_wake_time_is_exact() {
        // 15.5 ns resolves exactly on the picosecond grid.
        assert_eq!(SimTime::from_ps(15_500).as_ps(), 15_500);
        assert_eq!(SimTime::from_ps(15_500).as_secs_f64(), 15.5e-9);
    }

    #[test]
    fn one_day_fits() {
        let day = SimTime::from_secs(86_400);
        assert_eq!(day.as_ps(), 86_400 * PS_PER_SEC);
        assert!(day.as_ps() < u64::MAX / 100);
    }

    #[test]
    fn arithmetic_and_ordering() {
        let a = SimTime::from_ns(100);
        let b = SimTime::from_ns(250);
        assert_eq!((b - a).as_ps(), 150_000);
        assert!(a < b);
        assert_eq!(a + a, SimTime::from_ns(200));
        assert_eq!(b.checked_sub(a), Some(SimTime::from_ns(150)));
        assert_eq!(a.checked_sub(b), None);
    }

    #[test]
    fn display_picks_coarsest_exact_unit() {
        assert_eq!(SimTime::from_ns(207).to_string(), "207 ns");
        assert_eq!(SimTime::from_ps(15_500).to_string(), "15500 ps");
        assert_eq!(SimTime::from_secs(5).to_string(), "5 s");
    }

    #[test]
    fn from_secs_f64_rounds_to_nearest_ps() {
        assert_eq!(SimTime::from_secs_f64(15.5e-9).as_ps(), 15_500);
        assert_eq!(SimTime::from_secs_f64(1.0).as_ps(), PS_PER_SEC);
    }
}
