//! Calendar arithmetic on second timestamps. All times are interpreted in a
//! single zone; the epoch day 1970-01-01 was a Thursday.

use core::f64::consts::PI;

pub const SECONDS_PER_DAY: i64 = 86_400;
pub const MINUTES_PER_DAY: i64 = 1_440;

/// Days since 1970-01-01.
#[inline]
pub fn day_index(ts: i64) -> i64 {
    ts.div_euclid(SECONDS_PER_DAY)
}

#[inline]
pub fn minute_of_day(ts: i64) -> i64 {
    ts.rem_euclid(SECONDS_PER_DAY) / 60
}

/// Monday = 0 … Sunday = 6.
#[inline]
pub fn day_of_week(ts: i64) -> i64 {
    (day_index(ts) + 3).rem_euclid(7)
}

/// `(cos, sin)` of the minute-of-day angle followed by `(cos, sin)` of the
/// day-of-week angle.
pub fn encode_time(ts: i64) -> [f64; 4] {
    let m = 2.0 * PI * minute_of_day(ts) as f64 / MINUTES_PER_DAY as f64;
    let d = 2.0 * PI * day_of_week(ts) as f64 / 7.0;
    [libm::cos(m), libm::sin(m), libm::cos(d), libm::sin(d)]
}

/// Civil date `(year, month, day)` of a day index (proleptic Gregorian).
pub fn civil_from_days(days: i64) -> (i64, u32, u32) {
    let z = days + 719_468;
    let era = z.div_euclid(146_097);
    let doe = z.rem_euclid(146_097);
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let y = yoe + era * 400;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let d = (doy - (153 * mp + 2) / 5 + 1) as u32;
    let m = if mp < 10 { mp + 3 } else { mp - 9 } as u32;
    (if m <= 2 { y + 1 } else { y }, m, d)
}

/// Day index of a civil date.
pub fn days_from_civil(year: i64, month: u32, day: u32) -> i64 {
    let y = if month <= 2 { year - 1 } else { year };
    let era = y.div_euclid(400);
    let yoe = y.rem_euclid(400);
    let m = month as i64;
    let doy = (153 * (if m > 2 { m - 3 } else { m + 9 }) + 2) / 5 + day as i64 - 1;
    let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    era * 146_097 + doe - 719_468
}
