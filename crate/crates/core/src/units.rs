//! Fixed-point quantities.
//!
//! Time is kept in integer picoseconds and energy in integer attojoules so
//! that every ledger sum is exact. Catalog values are decimal strings that
//! are parsed without going through floating point.

use std::fmt;
use std::ops::{Add, AddAssign};

/// Picoseconds.
pub type Ps = u64;

pub const PS_PER_NS: u64 = 1_000;
pub const AJ_PER_PJ: u64 = 1_000_000;

/// Energy in attojoules.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Energy(pub u128);

impl Energy {
    pub const ZERO: Energy = Energy(0);

    pub fn from_pj(pj: u64) -> Energy {
        Energy(pj as u128 * AJ_PER_PJ as u128)
    }

    pub fn attojoules(self) -> u128 {
        self.0
    }

    pub fn as_pj_f64(self) -> f64 {
        self.0 as f64 / AJ_PER_PJ as f64
    }

    pub fn as_joules_f64(self) -> f64 {
        self.0 as f64 * 1e-18
    }

    /// Exact decimal rendering in picojoules.
    pub fn pj_string(self) -> String {
        format_fixed(self.0, 6)
    }
}

impl Add for Energy {
    type Output = Energy;
    fn add(self, rhs: Energy) -> Energy {
        Energy(self.0 + rhs.0)
    }
}

impl AddAssign for Energy {
    fn add_assign(&mut self, rhs: Energy) {
        self.0 += rhs.0;
    }
}

impl std::iter::Sum for Energy {
    fn sum<I: Iterator<Item = Energy>>(iter: I) -> Energy {
        iter.fold(Energy::ZERO, |a, b| a + b)
    }
}

impl fmt::Display for Energy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} pJ", self.pj_string())
    }
}

/// Parses a non-negative decimal string into an integer scaled by
/// `10^frac_digits`. Fails if the value has more fractional digits than the
/// scale can hold exactly.
pub fn parse_fixed(s: &str, frac_digits: u32) -> Result<u64, String> {
    let s = s.trim();
    if s.is_empty() {
        return Err("empty number".into());
    }
    let (int_part, frac_part) = match s.split_once('.') {
        Some((i, f)) => (i, f),
        None => (s, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(format!("not a number: {s:?}"));
    }
    if !int_part.chars().all(|c| c.is_ascii_digit()) || !frac_part.chars().all(|c| c.is_ascii_digit()) {
        return Err(format!("not a non-negative decimal: {s:?}"));
    }
    let frac_trimmed = frac_part.trim_end_matches('0');
    if frac_trimmed.len() as u32 > frac_digits {
        return Err(format!("{s:?} has more than {frac_digits} fractional digits"));
    }
    let scale = 10u64.pow(frac_digits);
    let int_val: u64 = if int_part.is_empty() {
        0
    } else {
        int_part.parse().map_err(|_| format!("number too large: {s:?}"))?
    };
    let mut frac_val: u64 = 0;
    for (i, c) in frac_trimmed.chars().enumerate() {
        let d = c.to_digit(10).unwrap() as u64;
        frac_val += d * 10u64.pow(frac_digits - 1 - i as u32);
    }
    int_val
        .checked_mul(scale)
        .and_then(|v| v.checked_add(frac_val))
        .ok_or_else(|| format!("number too large: {s:?}"))
}

/// Inverse of [`parse_fixed`], trimming trailing zeros.
pub fn format_fixed(v: u128, frac_digits: u32) -> String {
    let scale = 10u128.pow(frac_digits);
    let int = v / scale;
    let frac = v % scale;
    if frac == 0 {
        return int.to_string();
    }
    let mut frac_s = format!("{:0width$}", frac, width = frac_digits as usize);
    while frac_s.ends_with('0') {
        frac_s.pop();
    }
    format!("{int}.{frac_s}")
}

/// Parses a fraction in [0, 1] into parts per million.
pub fn parse_ppm(s: &str) -> Result<u32, String> {
    let v = parse_fixed(s, 6)?;
    if v > 1_000_000 {
        return Err(format!("fraction {s:?} exceeds 1"));
    }
    Ok(v as u32)
}

/// Parses a byte size such as `32KiB`, `8MB`, `16 MiB` or `65536`.
/// Decimal-looking suffixes are treated as binary, as is customary for
/// cache capacities.
pub fn parse_size(s: &str) -> Result<u64, String> {
    let t = s.trim();
    let split = t.find(|c: char| !c.is_ascii_digit()).unwrap_or(t.len());
    let (num, suffix) = t.split_at(split);
    let n: u64 = num.parse().map_err(|_| format!("bad size {s:?}"))?;
    let mult = match suffix.trim().to_ascii_lowercase().as_str() {
        "" | "b" => 1,
        "k" | "kb" | "kib" => 1 << 10,
        "m" | "mb" | "mib" => 1 << 20,
        "g" | "gb" | "gib" => 1 << 30,
        other => return Err(format!("unknown size suffix {other:?} in {s:?}")),
    };
    n.checked_mul(mult).ok_or_else(|| format!("size overflow: {s:?}"))
}

/// `ceil(ps * mhz / 10^6)`: latency in core cycles.
pub fn ps_to_cycles_ceil(ps: Ps, clock_mhz: u32) -> u64 {
    let num = ps as u128 * clock_mhz as u128;
    num.div_ceil(1_000_000) as u64
}

/// Duration of `cycles` core cycles, rounded up to the picosecond, so that
/// it covers the distance between any two cycle starts that far apart.
pub fn cycles_to_ps_ceil(cycles: u64, clock_mhz: u32) -> Ps {
    (cycles as u128 * 1_000_000).div_ceil(clock_mhz as u128) as u64
}

/// Start time of a core cycle, rounded down to the picosecond.
pub fn cycles_to_ps(cycles: u64, clock_mhz: u32) -> Ps {
    (cycles as u128 * 1_000_000 / clock_mhz as u128) as u64
}
