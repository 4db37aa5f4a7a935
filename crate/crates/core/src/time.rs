//! Whole-hour UTC clock and local calendar days.
//!
//! Telemetry is hourly and stamped in UTC. Anything that depends on the local
//! day (weekday clustering, daily planning, fan charts) goes through a site's
//! fixed offset from UTC in whole hours.

use core::fmt;
use core::ops::{Add, Sub};

use chrono::{DateTime, Datelike, NaiveDate, NaiveDateTime, Timelike, Weekday};
use serde::{Deserialize, Serialize};

/// Hours elapsed since 1970-01-01T00:00Z. A sample stamped `h` covers the
/// interval `[h, h + 1)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Hour(pub i64);

impl Hour {
    pub fn from_ymdh(year: i32, month: u32, day: u32, hour: u32) -> Option<Hour> {
        let dt = NaiveDate::from_ymd_opt(year, month, day)?.and_hms_opt(hour, 0, 0)?;
        Hour::from_naive_utc(dt)
    }

    /// Fails unless `dt` sits exactly on an hour boundary.
    pub fn from_naive_utc(dt: NaiveDateTime) -> Option<Hour> {
        let secs = dt.and_utc().timestamp();
        if dt.minute() != 0 || dt.second() != 0 || dt.nanosecond() != 0 {
            return None;
        }
        Some(Hour(secs.div_euclid(3600)))
    }

    pub fn to_naive_utc(self) -> NaiveDateTime {
        DateTime::from_timestamp(self.0 * 3600, 0)
            .expect("hour index within chrono range")
            .naive_utc()
    }

    pub fn unix_seconds(self) -> i64 {
        self.0 * 3600
    }

    /// The local calendar day this hour falls in.
    pub fn local_day(self, utc_offset_h: i32) -> Day {
        Day((self.0 + utc_offset_h as i64).div_euclid(24))
    }

    /// Local hour of day, 0..24.
    pub fn local_hour(self, utc_offset_h: i32) -> usize {
        (self.0 + utc_offset_h as i64).rem_euclid(24) as usize
    }
}

impl Add<i64> for Hour {
    type Output = Hour;
    fn add(self, rhs: i64) -> Hour {
        Hour(self.0 + rhs)
    }
}

impl Sub<i64> for Hour {
    type Output = Hour;
    fn sub(self, rhs: i64) -> Hour {
        Hour(self.0 - rhs)
    }
}

impl Sub<Hour> for Hour {
    type Output = i64;
    fn sub(self, rhs: Hour) -> i64 {
        self.0 - rhs.0
    }
}

impl fmt::Display for Hour {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_naive_utc().format("%Y-%m-%dT%H:00:00Z"))
    }
}

/// A local calendar day, counted from 1970-01-01 in the site's time zone.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Day(pub i64);

impl Day {
    pub fn from_date(date: NaiveDate) -> Day {
        let epoch = NaiveDate::from_ymd_opt(1970, 1, 1).expect("valid epoch");
        Day(date.signed_duration_since(epoch).num_days())
    }

    pub fn date(self) -> NaiveDate {
        NaiveDate::from_ymd_opt(1970, 1, 1)
            .expect("valid epoch")
            .checked_add_signed(chrono::TimeDelta::days(self.0))
            .expect("day within chrono range")
    }

    /// Monday = 0 … Sunday = 6.
    pub fn weekday_index(self) -> usize {
        // 1970-01-01 was a Thursday.
        (self.0 + 3).rem_euclid(7) as usize
    }

    pub fn weekday(self) -> Weekday {
        self.date().weekday()
    }

    /// First UTC hour of this local day.
    pub fn first_hour(self, utc_offset_h: i32) -> Hour {
        Hour(self.0 * 24 - utc_offset_h as i64)
    }

    pub fn next(self) -> Day {
        Day(self.0 + 1)
    }
}

impl fmt::Display for Day {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.date())
    }
}

/// Day of year (1-based) of a UTC instant given in Unix seconds, plus the
/// fractional UTC hour of day.
pub(crate) fn day_of_year_and_hour(unix_seconds: f64) -> (u32, f64) {
    let days = libm::floor(unix_seconds / 86_400.0);
    let day = Day(days as i64).date();
    let hour = (unix_seconds - days * 86_400.0) / 3600.0;
    (day.ordinal(), hour)
}
