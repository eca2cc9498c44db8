//! Staggered refresh of dynamic subarrays.
//!
//! Each subarray refreshes one row per stagger period (retention / rows) and
//! walks its rows round-robin, so every row is visited once per retention
//! time. Slot `k` of subarray `s` starts at `anchor(s) + k * period` and
//! covers row `k mod rows`. On decoupled-bitline arrays a slot is a read-out
//! half followed by a write-back half: writes may proceed during the first
//! half and reads during the second. Other arrays are blocked for the whole
//! slot.
//!
//! Counts, last-refresh times and collisions are all computed in closed form
//! so that multi-megabyte arrays can be simulated without materialising every
//! refresh event.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cache::Op;
use crate::catalog::{RefreshParams, TechParams};
use crate::error::{Error, Result};
use crate::geometry::{SubarrayPlan, ROW_BITS};
use crate::units::{parse_ppm, Energy, Ps};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RefreshEvent {
    pub subarray: u64,
    pub row: u64,
    pub start_ps: Ps,
}

/// One retention bin: rows whose retention is at least `retention_multiplier`
/// times the worst case, holding `fraction_ppm` of all rows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RetentionBin {
    pub retention_multiplier: u32,
    pub fraction_ppm: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RetentionBins {
    bins: Vec<RetentionBin>,
}

impl RetentionBins {
    pub fn new(bins: Vec<RetentionBin>) -> Result<RetentionBins> {
        if bins.is_empty() {
            return Err(Error::Config("retention bins: at least one bin is required".into()));
        }
        if bins.iter().any(|b| b.retention_multiplier == 0 || b.retention_multiplier > u16::MAX as u32) {
            return Err(Error::Config(
                "retention bins: multipliers must be whole numbers >= 1 (no bin below the worst case)".into(),
            ));
        }
        let total: u64 = bins.iter().map(|b| b.fraction_ppm as u64).sum();
        if total != 1_000_000 {
            return Err(Error::Config(format!(
                "retention bins: fractions sum to {}, expected 1",
                total as f64 / 1e6
            )));
        }
        Ok(RetentionBins { bins })
    }

    /// Parses `(multiplier, "fraction")` pairs.
    pub fn parse(pairs: &[(u32, &str)]) -> Result<RetentionBins> {
        let bins = pairs
            .iter()
            .map(|&(m, f)| {
                Ok(RetentionBin {
                    retention_multiplier: m,
                    fraction_ppm: parse_ppm(f).map_err(Error::Config)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        RetentionBins::new(bins)
    }

    /// Synthetic example distribution: 50% of rows at 1x, 30% at 2x and 20%
    /// at 4x the worst-case retention.
    pub fn synthetic_example() -> RetentionBins {
        RetentionBins::parse(&[(1, "0.5"), (2, "0.3"), (4, "0.2")]).unwrap()
    }

    pub fn bins(&self) -> &[RetentionBin] {
        &self.bins
    }

    /// Deterministic assignment of `n` rows to bins: exact per-bin counts,
    /// shuffled with `seed`.
    fn assign(&self, n: usize, seed: u64) -> Vec<u16> {
        let mut out = Vec::with_capacity(n);
        let mut assigned = 0usize;
        for (i, b) in self.bins.iter().enumerate() {
            let count = if i + 1 == self.bins.len() {
                n - assigned
            } else {
                (n as u128 * b.fraction_ppm as u128 / 1_000_000) as usize
            };
            out.extend(std::iter::repeat_n(b.retention_multiplier as u16, count));
            assigned += count;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        out.shuffle(&mut rng);
        out
    }
}

#[derive(Clone, Debug)]
pub struct RefreshSchedule {
    plan: SubarrayPlan,
    /// Subarrays `0..subarrays` are refreshed (the GC prefix of a hybrid).
    subarrays: u64,
    retention_ps: Ps,
    period_ps: Ps,
    slot_ps: Ps,
    split_slot: bool,
    synchronized: bool,
    /// Per (subarray, row) retention multiplier, when binned.
    bin_of_row: Option<Vec<u16>>,
    next_slot: Vec<u64>,
    now_ps: Ps,
    collisions: u64,
}

impl RefreshSchedule {
    /// `interval_multiplier` stretches the refresh interval (and the retention
    /// it guarantees) for refresh-optimised arrays.
    pub fn new(
        plan: SubarrayPlan,
        subarrays: u64,
        refresh: RefreshParams,
        decoupled_bitlines: bool,
        synchronized: bool,
        interval_multiplier: u32,
    ) -> RefreshSchedule {
        let retention_ps = refresh.retention_ps * interval_multiplier.max(1) as u64;
        let period_ps = (retention_ps / plan.rows_per_subarray).max(1);
        let slot_ps = if decoupled_bitlines { 2 * refresh.row_period_ps } else { refresh.row_period_ps };
        RefreshSchedule {
            plan,
            subarrays,
            retention_ps,
            period_ps,
            slot_ps,
            split_slot: decoupled_bitlines,
            synchronized,
            bin_of_row: None,
            next_slot: vec![0; subarrays as usize],
            now_ps: 0,
            collisions: 0,
        }
    }

    /// Schedule for every subarray of `plan` using the technology's
    /// constants. `None` for static technologies.
    pub fn for_params(plan: SubarrayPlan, params: &TechParams, decoupled_bitlines: bool) -> Option<RefreshSchedule> {
        params
            .refresh
            .map(|r| RefreshSchedule::new(plan, plan.total_subarrays(), r, decoupled_bitlines, true, 1))
    }

    /// Gives every row the refresh interval of its retention bin.
    pub fn apply_bins(mut self, bins: &RetentionBins, seed: u64) -> RefreshSchedule {
        let n = (self.subarrays * self.plan.rows_per_subarray) as usize;
        self.bin_of_row = Some(bins.assign(n, seed));
        self
    }

    pub fn period_ps(&self) -> Ps {
        self.period_ps
    }

    pub fn slot_ps(&self) -> Ps {
        self.slot_ps
    }

    pub fn retention_ps(&self) -> Ps {
        self.retention_ps
    }

    pub fn subarrays(&self) -> u64 {
        self.subarrays
    }

    pub fn collisions(&self) -> u64 {
        self.collisions
    }

    fn rows(&self) -> u64 {
        self.plan.rows_per_subarray
    }

    fn anchor(&self, subarray: u64) -> Ps {
        if self.synchronized {
            0
        } else {
            subarray * (self.period_ps / self.subarrays.max(1))
        }
    }

    #[inline]
    fn multiplier(&self, subarray: u64, row: u64) -> u64 {
        match &self.bin_of_row {
            Some(b) => b[(subarray * self.rows() + row) as usize] as u64,
            None => 1,
        }
    }

    /// Retention guaranteed for lines in this row.
    pub fn row_retention_ps(&self, subarray: u64, row: u64) -> Ps {
        self.retention_ps * self.multiplier(subarray, row)
    }

    #[inline]
    fn slot_active(&self, subarray: u64, k: u64) -> bool {
        let row = k % self.rows();
        let cycle = k / self.rows();
        self.plan.row_populated(subarray, row) && cycle % self.multiplier(subarray, row) == 0
    }

    /// Emits every refresh slot starting before `now_ps` that has not been
    /// emitted yet, in time order.
    pub fn advance(&mut self, now_ps: Ps) -> Vec<RefreshEvent> {
        assert!(now_ps >= self.now_ps, "refresh time went backwards");
        self.now_ps = now_ps;
        let mut events = Vec::new();
        for s in 0..self.subarrays {
            let anchor = self.anchor(s);
            loop {
                let k = self.next_slot[s as usize];
                let start = anchor + k * self.period_ps;
                if start >= now_ps {
                    break;
                }
                if self.slot_active(s, k) {
                    events.push(RefreshEvent { subarray: s, row: k % self.rows(), start_ps: start });
                }
                self.next_slot[s as usize] += 1;
            }
        }
        events.sort_by_key(|e| (e.start_ps, e.subarray));
        events
    }

    /// Refreshes of `(subarray, row)` that start before `now_ps`.
    fn row_count_until(&self, subarray: u64, row: u64, now_ps: Ps) -> u64 {
        let first = self.anchor(subarray) + row * self.period_ps;
        if now_ps <= first || !self.plan.row_populated(subarray, row) {
            return 0;
        }
        let cycle_ps = self.rows() * self.period_ps;
        let cycles = (now_ps - first).div_ceil(cycle_ps);
        cycles.div_ceil(self.multiplier(subarray, row))
    }

    /// Total row refreshes starting before `now_ps`.
    pub fn count_until(&self, now_ps: Ps) -> u64 {
        let mut total = 0;
        for s in 0..self.subarrays {
            for row in 0..self.rows() {
                total += self.row_count_until(s, row, now_ps);
            }
        }
        total
    }

    /// Row refreshes before `now_ps`, grouped by retention multiplier.
    pub fn count_by_bin(&self, now_ps: Ps) -> BTreeMap<u64, u64> {
        let mut out = BTreeMap::new();
        for s in 0..self.subarrays {
            for row in 0..self.rows() {
                *out.entry(self.multiplier(s, row)).or_default() += self.row_count_until(s, row, now_ps);
            }
        }
        out
    }

    /// Time `subarray` spends inside refresh slots during `[0, now_ps)`.
    pub fn busy_ps(&self, subarray: u64, now_ps: Ps) -> Ps {
        let cycle_ps = self.rows() * self.period_ps;
        let mut busy = 0;
        for row in 0..self.rows() {
            let n = self.row_count_until(subarray, row, now_ps);
            if n == 0 {
                continue;
            }
            let m = self.multiplier(subarray, row);
            let last_start = self.anchor(subarray) + row * self.period_ps + (n - 1) * m * cycle_ps;
            busy += (n - 1) * self.slot_ps + self.slot_ps.min(now_ps - last_start);
        }
        busy
    }

    /// Start of the most recent refresh of `(subarray, row)` at or before `t`.
    pub fn last_refresh(&self, subarray: u64, row: u64, t: Ps) -> Option<Ps> {
        if subarray >= self.subarrays || !self.plan.row_populated(subarray, row) {
            return None;
        }
        let first = self.anchor(subarray) + row * self.period_ps;
        if t < first {
            return None;
        }
        let cycle_ps = self.rows() * self.period_ps;
        let mut j = (t - first) / cycle_ps;
        j -= j % self.multiplier(subarray, row);
        Some(first + j * cycle_ps)
    }

    /// Delay imposed on an access to `subarray` at `t`, if it falls inside a
    /// refresh slot that blocks it. Counts a collision whenever the delay is
    /// non-zero.
    pub fn collides(&mut self, subarray: u64, op: Op, t: Ps) -> Option<Ps> {
        let delay = self.blocking_delay(subarray, op, t);
        if delay.is_some() {
            self.collisions += 1;
        }
        delay
    }

    /// Same as [`collides`](Self::collides) without touching the counter.
    pub fn blocking_delay(&self, subarray: u64, op: Op, t: Ps) -> Option<Ps> {
        if subarray >= self.subarrays {
            return None;
        }
        let anchor = self.anchor(subarray);
        if t < anchor {
            return None;
        }
        let k = (t - anchor) / self.period_ps;
        let offset = t - anchor - k * self.period_ps;
        if offset >= self.slot_ps || !self.slot_active(subarray, k) {
            return None;
        }
        if !self.split_slot {
            return Some(self.slot_ps - offset);
        }
        let half = self.slot_ps / 2;
        match op {
            // read-out half: write bitlines are free
            Op::Write if offset < half => None,
            Op::Write => Some(self.slot_ps - offset),
            // write-back half: read bitlines are free
            Op::Read if offset < half => Some(half - offset),
            Op::Read => None,
        }
    }
}

/// Energy of `rows` row refreshes.
pub fn refresh_energy(rows: u64, params: &TechParams) -> Energy {
    match params.refresh {
        Some(r) => Energy(rows as u128 * ROW_BITS as u128 * r.energy_aj_per_bit as u128),
        None => Energy::ZERO,
    }
}
