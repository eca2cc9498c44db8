//! Energy accounting.
//!
//! Everything is accumulated in integer attojoules so that totals are exact
//! sums of their parts. A row access always activates the whole 512-bit row;
//! tag arrays are not charged.

use std::fmt;

use crate::cache::{dissimilar_bits, Line, ZERO_LINE};
use crate::catalog::{DramParams, TechClass, TechParams};
use crate::error::{Error, Result};
use crate::geometry::ROW_BITS;
use crate::units::{Energy, Ps};

/// Cache level as seen by the ledger. Private levels are aggregated over
/// cores.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LevelKind {
    L1I,
    L1D,
    L2,
    Llc,
}

impl LevelKind {
    pub const ALL: [LevelKind; 4] = [LevelKind::L1I, LevelKind::L1D, LevelKind::L2, LevelKind::Llc];

    pub fn name(self) -> &'static str {
        match self {
            LevelKind::L1I => "l1i",
            LevelKind::L1D => "l1d",
            LevelKind::L2 => "l2",
            LevelKind::Llc => "llc",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for LevelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// How a row write is priced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum WriteCharge {
    /// Every bit pays the full write energy.
    Full,
    /// `dissimilar` bits differ from the value last driven on the write
    /// bitlines; the rest pay the same-bit energy.
    Asymmetric { dissimilar: u32 },
    /// No payload available: a fraction `similarity_ppm / 1e6` of the bits
    /// is assumed unchanged.
    Modeled { similarity_ppm: u32 },
}

/// Energy of one row write under `charge`.
pub fn write_energy(p: &TechParams, charge: WriteCharge) -> Energy {
    let full = p.write_aj_per_bit as u128;
    let same = p.same_bit_write_aj_per_bit as u128;
    let bits = ROW_BITS as u128;
    Energy(match charge {
        WriteCharge::Full => bits * full,
        WriteCharge::Asymmetric { dissimilar } => {
            let d = dissimilar as u128;
            d * full + (bits - d) * same
        }
        WriteCharge::Modeled { similarity_ppm } => {
            let s = similarity_ppm as u128;
            bits * (s * same + (1_000_000 - s) * full) / 1_000_000
        }
    })
}

pub fn read_energy(p: &TechParams) -> Energy {
    Energy(ROW_BITS as u128 * p.read_aj_per_bit as u128)
}

/// Leakage of `bits` cells over `duration_ps` (attowatt x picosecond,
/// rounded down to the attojoule).
pub fn leakage_energy(p: &TechParams, bits: u64, duration_ps: Ps) -> Energy {
    Energy(p.leakage_aw_per_bit as u128 * bits as u128 * duration_ps as u128 / 1_000_000_000_000)
}

/// Last value driven on the write bitlines of every subarray of one array.
#[derive(Clone, Debug)]
pub struct WblShadow {
    last: Vec<Line>,
}

impl WblShadow {
    pub fn new(subarrays: u64) -> WblShadow {
        WblShadow { last: vec![ZERO_LINE; subarrays as usize] }
    }

    pub fn last(&self, subarray: u64) -> &Line {
        &self.last[subarray as usize]
    }

    /// Records a write of `line` and returns how many bits differ from the
    /// previous one.
    pub fn observe(&mut self, subarray: u64, line: &Line) -> u32 {
        let slot = &mut self.last[subarray as usize];
        let d = dissimilar_bits(slot, line);
        *slot = *line;
        d
    }
}

/// Picks the pricing of a write to a `tech` array.
///
/// Only decoupled-bitline arrays with asymmetric accounting enabled see a
/// reduced charge. `payload` is the new row value; `compare_with`, when set,
/// replaces the shadow as the reference value (the shadow is still updated).
pub fn resolve_write_charge(
    asymmetric: bool,
    tech: TechClass,
    payload: Option<&Line>,
    shadow: Option<(&mut WblShadow, u64)>,
    compare_with: Option<&Line>,
    similarity_ppm: Option<u32>,
    level: LevelKind,
) -> Result<WriteCharge> {
    if !asymmetric || !tech.decoupled_bitlines() {
        return Ok(WriteCharge::Full);
    }
    match (payload, shadow) {
        (Some(line), Some((shadow, sub))) => {
            let d = shadow.observe(sub, line);
            let d = match compare_with {
                Some(reference) => dissimilar_bits(reference, line),
                None => d,
            };
            Ok(WriteCharge::Asymmetric { dissimilar: d })
        }
        _ => match similarity_ppm {
            Some(s) => Ok(WriteCharge::Modeled { similarity_ppm: s }),
            None => Err(Error::MissingPayload { level: level.name().to_string() }),
        },
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LevelEnergy {
    pub reads: u64,
    /// Demand writes and writebacks into this level.
    pub writes: u64,
    /// Line fills after a miss.
    pub fills: u64,
    pub dynamic_read: Energy,
    /// Writes and fills.
    pub dynamic_write: Energy,
    pub refresh: Energy,
    pub leakage: Energy,
    pub refresh_rows: u64,
    pub dissimilar_bits: u64,
    pub total_write_bits: u64,
}

impl LevelEnergy {
    pub fn dynamic(&self) -> Energy {
        self.dynamic_read + self.dynamic_write
    }

    pub fn total(&self) -> Energy {
        self.dynamic() + self.refresh + self.leakage
    }

    fn merge(&mut self, o: &LevelEnergy) {
        self.reads += o.reads;
        self.writes += o.writes;
        self.fills += o.fills;
        self.dynamic_read += o.dynamic_read;
        self.dynamic_write += o.dynamic_write;
        self.refresh += o.refresh;
        self.leakage += o.leakage;
        self.refresh_rows += o.refresh_rows;
        self.dissimilar_bits += o.dissimilar_bits;
        self.total_write_bits += o.total_write_bits;
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DramEnergy {
    pub reads: u64,
    pub writes: u64,
    pub energy: Energy,
}

/// One priced action, kept when event logging is enabled so that a run can
/// be re-priced independently.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LedgerEvent {
    Read { level: LevelKind, params: TechParams },
    Write { level: LevelKind, params: TechParams, fill: bool, charge: WriteCharge },
    Refresh { level: LevelKind, params: TechParams, rows: u64 },
    Leakage { level: LevelKind, params: TechParams, bits: u64, duration_ps: Ps },
    DramRead { params: DramParams },
    DramWrite { params: DramParams },
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EnergyLedger {
    levels: [LevelEnergy; 4],
    pub dram: DramEnergy,
    log: Option<Vec<LedgerEvent>>,
}

impl EnergyLedger {
    pub fn new() -> EnergyLedger {
        EnergyLedger::default()
    }

    pub fn with_event_log() -> EnergyLedger {
        EnergyLedger { log: Some(Vec::new()), ..EnergyLedger::default() }
    }

    pub fn level(&self, level: LevelKind) -> &LevelEnergy {
        &self.levels[level.index()]
    }

    pub fn events(&self) -> Option<&[LedgerEvent]> {
        self.log.as_deref()
    }

    fn record(&mut self, e: LedgerEvent) {
        if let Some(log) = &mut self.log {
            log.push(e);
        }
    }

    pub fn charge_read(&mut self, level: LevelKind, p: &TechParams) -> Energy {
        let e = read_energy(p);
        let l = &mut self.levels[level.index()];
        l.reads += 1;
        l.dynamic_read += e;
        self.record(LedgerEvent::Read { level, params: *p });
        e
    }

    pub fn charge_write(&mut self, level: LevelKind, p: &TechParams, fill: bool, charge: WriteCharge) -> Energy {
        let e = write_energy(p, charge);
        let l = &mut self.levels[level.index()];
        if fill {
            l.fills += 1;
        } else {
            l.writes += 1;
        }
        l.dynamic_write += e;
        l.total_write_bits += ROW_BITS;
        if let WriteCharge::Asymmetric { dissimilar } = charge {
            l.dissimilar_bits += dissimilar as u64;
        }
        self.record(LedgerEvent::Write { level, params: *p, fill, charge });
        e
    }

    /// Prices a write against the bitline shadow of `subarray`.
    pub fn charge_write_asymmetric(
        &mut self,
        level: LevelKind,
        subarray: u64,
        new_line: &Line,
        shadow: &mut WblShadow,
        p: &TechParams,
    ) -> Energy {
        let dissimilar = shadow.observe(subarray, new_line);
        self.charge_write(level, p, false, WriteCharge::Asymmetric { dissimilar })
    }

    pub fn charge_write_model(&mut self, level: LevelKind, p: &TechParams, similarity_ppm: u32) -> Energy {
        self.charge_write(level, p, false, WriteCharge::Modeled { similarity_ppm })
    }

    pub fn charge_refresh(&mut self, level: LevelKind, p: &TechParams, rows: u64) -> Energy {
        let e = crate::refresh::refresh_energy(rows, p);
        let l = &mut self.levels[level.index()];
        l.refresh += e;
        l.refresh_rows += rows;
        self.record(LedgerEvent::Refresh { level, params: *p, rows });
        e
    }

    pub fn charge_leakage(&mut self, level: LevelKind, p: &TechParams, bits: u64, duration_ps: Ps) -> Energy {
        let e = leakage_energy(p, bits, duration_ps);
        self.levels[level.index()].leakage += e;
        self.record(LedgerEvent::Leakage { level, params: *p, bits, duration_ps });
        e
    }

    pub fn charge_dram_read(&mut self, p: &DramParams) -> Energy {
        let e = Energy(p.read_aj_per_line as u128);
        self.dram.reads += 1;
        self.dram.energy += e;
        self.record(LedgerEvent::DramRead { params: *p });
        e
    }

    pub fn charge_dram_write(&mut self, p: &DramParams) -> Energy {
        let e = Energy(p.write_aj_per_line as u128);
        self.dram.writes += 1;
        self.dram.energy += e;
        self.record(LedgerEvent::DramWrite { params: *p });
        e
    }

    pub fn cache_dynamic(&self) -> Energy {
        self.levels.iter().map(LevelEnergy::dynamic).sum()
    }

    pub fn cache_total(&self) -> Energy {
        self.levels.iter().map(LevelEnergy::total).sum()
    }

    pub fn total(&self) -> Energy {
        self.cache_total() + self.dram.energy
    }

    /// Energy-delay product in joule-seconds.
    pub fn edp(&self, total_time_ps: Ps) -> f64 {
        edp(self.total(), total_time_ps)
    }

    /// Adds another ledger's counters (event logs are concatenated).
    pub fn merge(&mut self, other: &EnergyLedger) {
        for (a, b) in self.levels.iter_mut().zip(&other.levels) {
            a.merge(b);
        }
        self.dram.reads += other.dram.reads;
        self.dram.writes += other.dram.writes;
        self.dram.energy += other.dram.energy;
        if let (Some(a), Some(b)) = (&mut self.log, &other.log) {
            a.extend_from_slice(b);
        }
    }
}

pub fn edp(energy: Energy, total_time_ps: Ps) -> f64 {
    energy.as_joules_f64() * (total_time_ps as f64 * 1e-12)
}
