//! Cache geometry and the mapping of (set, way) onto data-array subarrays.
//!
//! A 64 B line is one 512-bit subarray row. Each way owns its own subarrays:
//! a way with at least 256 sets is spread over `sets / 256` subarrays of 256
//! rows, a smaller way is mapped onto a single subarray with one row per set.
//! Tags live in a separate array and are not mapped here.

use crate::error::{Error, Result};
use crate::units::Ps;

pub const LINE_BYTES: u64 = 64;
pub const ROW_BITS: u64 = 512;
pub const MAX_SUBARRAY_ROWS: u64 = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CacheGeometry {
    capacity_bytes: u64,
    associativity: u32,
    sets: u64,
}

impl CacheGeometry {
    pub fn new(capacity_bytes: u64, associativity: u32) -> Result<CacheGeometry> {
        if capacity_bytes == 0 || associativity == 0 {
            return Err(Error::InvalidGeometry("capacity and associativity must be positive".into()));
        }
        let set_bytes = LINE_BYTES * associativity as u64;
        if capacity_bytes % set_bytes != 0 {
            return Err(Error::InvalidGeometry(format!(
                "capacity {capacity_bytes} B is not a multiple of {associativity} ways x {LINE_BYTES} B"
            )));
        }
        let sets = capacity_bytes / set_bytes;
        if !sets.is_power_of_two() {
            return Err(Error::InvalidGeometry(format!("{sets} sets is not a power of two")));
        }
        Ok(CacheGeometry { capacity_bytes, associativity, sets })
    }

    pub fn capacity_bytes(&self) -> u64 {
        self.capacity_bytes
    }

    pub fn associativity(&self) -> u32 {
        self.associativity
    }

    pub fn sets(&self) -> u64 {
        self.sets
    }

    pub fn bits(&self) -> u64 {
        self.capacity_bytes * 8
    }

    /// `(tag, set)` of a byte address.
    pub fn index(&self, addr: u64) -> (u64, u64) {
        index_address(addr, self)
    }

    /// First byte address of the line `(tag, set)`.
    pub fn line_addr(&self, tag: u64, set: u64) -> u64 {
        (tag * self.sets + set) * LINE_BYTES
    }
}

pub fn index_address(addr: u64, geom: &CacheGeometry) -> (u64, u64) {
    let line = addr / LINE_BYTES;
    (line / geom.sets, line % geom.sets)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SubarrayPlan {
    pub rows_per_subarray: u64,
    pub subarrays_per_way: u64,
    pub associativity: u32,
    pub sets: u64,
}

pub fn plan_subarrays(geom: &CacheGeometry) -> SubarrayPlan {
    let sets = geom.sets();
    let rows = sets.min(MAX_SUBARRAY_ROWS);
    SubarrayPlan {
        rows_per_subarray: rows,
        subarrays_per_way: sets.div_ceil(rows),
        associativity: geom.associativity(),
        sets,
    }
}

impl SubarrayPlan {
    pub fn total_subarrays(&self) -> u64 {
        self.associativity as u64 * self.subarrays_per_way
    }

    pub fn row_bits(&self) -> u64 {
        ROW_BITS
    }

    /// `(subarray, row)` holding `(set, way)`.
    pub fn locate(&self, set: u64, way: u32) -> Result<(u64, u64)> {
        if set >= self.sets || way >= self.associativity {
            return Err(Error::OutOfRange(format!(
                "(set {set}, way {way}) outside {} sets x {} ways",
                self.sets, self.associativity
            )));
        }
        Ok(self.locate_unchecked(set, way))
    }

    #[inline]
    pub fn locate_unchecked(&self, set: u64, way: u32) -> (u64, u64) {
        (
            way as u64 * self.subarrays_per_way + set / self.rows_per_subarray,
            set % self.rows_per_subarray,
        )
    }

    /// Rows of `subarray` that hold a set. Only the last subarray of a way
    /// can be partially populated.
    pub fn populated_rows(&self, subarray: u64) -> u64 {
        let within_way = subarray % self.subarrays_per_way;
        let first_set = within_way * self.rows_per_subarray;
        (self.sets - first_set).min(self.rows_per_subarray)
    }

    pub fn row_populated(&self, subarray: u64, row: u64) -> bool {
        row < self.populated_rows(subarray)
    }
}

/// Spacing between consecutive row refreshes of one subarray so that every
/// row is visited once per retention time. Rounded down to the picosecond.
pub fn stagger_period(plan: &SubarrayPlan, retention_ps: Ps) -> Ps {
    retention_ps / plan.rows_per_subarray
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn plan(cap: u64, ways: u32) -> SubarrayPlan {
        plan_subarrays(&CacheGeometry::new(cap, ways).unwrap())
    }

    #[test]
    fn small_way_maps_to_one_short_subarray() {
        let p = plan(64 << 10, 16);
        assert_eq!(p.rows_per_subarray, 64);
        assert_eq!(p.subarrays_per_way, 1);
        assert_eq!(p.total_subarrays(), 16);
    }

    #[test]
    fn large_way_spans_full_subarrays() {
        let p = plan(8 << 20, 16);
        assert_eq!(p.sets, 8192);
        assert_eq!(p.rows_per_subarray, 256);
        assert_eq!(p.subarrays_per_way, 32);
        // 32 KB per way: two 256-row subarrays
        let p = plan(256 << 10, 8);
        assert_eq!(p.subarrays_per_way, 2);
    }

    #[test]
    fn direct_mapped_boundary() {
        let p = plan(16 << 10, 1);
        assert_eq!(p.rows_per_subarray, 256);
        assert_eq!(p.subarrays_per_way, 1);
        assert_eq!(p.total_subarrays(), 1);
    }

    #[test]
    fn invalid_geometries() {
        assert!(matches!(CacheGeometry::new(3 * 64 * 8, 8), Err(Error::InvalidGeometry(_))));
        assert!(matches!(CacheGeometry::new(1000, 8), Err(Error::InvalidGeometry(_))));
        assert!(matches!(CacheGeometry::new(0, 8), Err(Error::InvalidGeometry(_))));
    }

    #[test]
    fn locate_examples() {
        let big = plan(8 << 20, 16);
        assert_eq!(big.locate(0, 0).unwrap(), (0, 0));
        assert_eq!(big.locate(300, 1).unwrap(), (33, 44));
        let small = plan(64 << 10, 16);
        assert_eq!(small.locate(5, 0).unwrap(), (0, 5));
        assert!(matches!(small.locate(64, 0), Err(Error::OutOfRange(_))));
        assert!(matches!(small.locate(0, 16), Err(Error::OutOfRange(_))));
    }

    #[test]
    fn index_examples() {
        let g = CacheGeometry::new(32 << 10, 8).unwrap();
        assert_eq!(g.sets(), 64);
        assert_eq!(g.index(0), (0, 0));
        // 0x10040 / 64 = 1025 -> set 1025 % 64 = 1, tag 0x10040 / 4096 = 16
        assert_eq!(g.index(0x1_0040), (16, 1));
        assert_eq!(g.index(64 * 64), (1, 0));
        assert_eq!(g.line_addr(16, 1), 0x1_0040);
    }

    #[test]
    fn stagger_examples() {
        assert_eq!(stagger_period(&plan(8 << 20, 16), 1_120_000_000), 4_375_000);
        assert_eq!(stagger_period(&plan(64 << 10, 16), 1_120_000_000), 17_500_000);
        assert_eq!(stagger_period(&plan(8 << 20, 16), 20_000_000), 78_125);
    }

    #[test]
    fn locate_is_a_bijection_on_small_geometries() {
        for (cap, ways) in [(4 << 10, 2), (64 << 10, 16), (32 << 10, 1), (512 << 10, 4), (1 << 20, 2)] {
            let p = plan(cap, ways);
            let mut seen = HashSet::new();
            for set in 0..p.sets {
                for way in 0..ways {
                    assert!(seen.insert(p.locate(set, way).unwrap()));
                }
            }
            assert_eq!(seen.len() as u64, p.sets * ways as u64);
            let cells = p.total_subarrays() * p.rows_per_subarray * ROW_BITS;
            assert_eq!(cells, cap * 8);
            assert!((0..p.total_subarrays()).all(|s| p.populated_rows(s) == p.rows_per_subarray));
        }
    }
}
