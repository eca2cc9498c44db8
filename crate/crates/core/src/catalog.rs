//! Technology catalog: per-level array constants, DRAM constants and the
//! node scaling rule. Every other module reads technology parameters through
//! this catalog.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::units::{format_fixed, parse_fixed, ps_to_cycles_ceil, Ps};

/// Environment variable naming a catalog override file.
pub const CATALOG_ENV: &str = "CELLSIM_CATALOG";

const BUILTIN_CATALOG: &str = include_str!("../data/catalog.toml");

/// Memory cell technology. Hybrid caches assign one of these per way.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TechClass {
    Sram,
    Gc,
    Edram,
    SttRam,
}

impl TechClass {
    pub const ALL: [TechClass; 4] = [TechClass::Sram, TechClass::Gc, TechClass::Edram, TechClass::SttRam];

    /// Separate read and write bitlines: enables asymmetric writes,
    /// write/read overlap and split refresh slots.
    pub fn decoupled_bitlines(self) -> bool {
        matches!(self, TechClass::Gc)
    }

    /// Dynamic cells lose charge and need refresh (or NRP invalidation).
    pub fn is_dynamic(self) -> bool {
        matches!(self, TechClass::Gc | TechClass::Edram)
    }

    pub fn name(self) -> &'static str {
        match self {
            TechClass::Sram => "SRAM",
            TechClass::Gc => "GC",
            TechClass::Edram => "EDRAM",
            TechClass::SttRam => "STTRAM",
        }
    }
}

impl fmt::Display for TechClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TechClass {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace(['-', '_'], "").as_str() {
            "SRAM" => Ok(TechClass::Sram),
            "GC" | "GAINCELL" => Ok(TechClass::Gc),
            "EDRAM" => Ok(TechClass::Edram),
            "STTRAM" | "STT" => Ok(TechClass::SttRam),
            _ => Err(Error::Config(format!("unknown technology {s:?}"))),
        }
    }
}

/// Catalog level. L1 instruction and data caches share the L1 entries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CacheLevel {
    L1,
    L2,
    Llc,
}

impl CacheLevel {
    pub fn name(self) -> &'static str {
        match self {
            CacheLevel::L1 => "L1",
            CacheLevel::L2 => "L2",
            CacheLevel::Llc => "LLC",
        }
    }
}

impl fmt::Display for CacheLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CacheLevel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "L1" => Ok(CacheLevel::L1),
            "L2" => Ok(CacheLevel::L2),
            "LLC" | "L3" => Ok(CacheLevel::Llc),
            _ => Err(Error::Config(format!("unknown cache level {s:?}"))),
        }
    }
}

/// Which table an entry comes from: a single-technology array or one side
/// of the GC/STT-RAM hybrid LLC.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Variant {
    Plain,
    Hybrid,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CatalogKey {
    pub level: CacheLevel,
    pub tech: TechClass,
    pub variant: Variant,
}

/// Refresh constants of a dynamic technology.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RefreshParams {
    pub retention_ps: Ps,
    /// Time to read out (or write back) one row.
    pub row_period_ps: Ps,
    pub energy_aj_per_bit: u64,
}

/// Array constants for one (level, technology) pair. Energies are in
/// attojoules per bit, leakage in attowatts per bit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TechParams {
    pub read_latency_ps: Ps,
    pub write_latency_ps: Ps,
    pub read_latency_cycles: u32,
    pub write_latency_cycles: u32,
    pub read_aj_per_bit: u64,
    pub write_aj_per_bit: u64,
    pub same_bit_write_aj_per_bit: u64,
    pub leakage_aw_per_bit: u64,
    /// `None` for static and non-volatile technologies.
    pub refresh: Option<RefreshParams>,
}

impl TechParams {
    /// Recomputes the cycle figures for another core clock.
    pub fn at_clock(mut self, clock_mhz: u32) -> TechParams {
        self.read_latency_cycles = ps_to_cycles_ceil(self.read_latency_ps, clock_mhz).max(1) as u32;
        self.write_latency_cycles = ps_to_cycles_ceil(self.write_latency_ps, clock_mhz).max(1) as u32;
        self
    }

    pub fn retention_ps(&self) -> Option<Ps> {
        self.refresh.map(|r| r.retention_ps)
    }

    /// `(field, decimal value in the catalog's units)` for every field, in a
    /// stable order. Absent refresh fields are reported as `-`.
    pub fn fields(&self) -> Vec<(&'static str, String)> {
        let pj = |v: u64| format_fixed(v as u128, 6);
        let ns = |v: u64| format_fixed(v as u128, 3);
        let mut out = vec![
            ("read_latency_ns", ns(self.read_latency_ps)),
            ("write_latency_ns", ns(self.write_latency_ps)),
            ("read_latency_cycles", self.read_latency_cycles.to_string()),
            ("write_latency_cycles", self.write_latency_cycles.to_string()),
            ("read_energy_pj_per_bit", pj(self.read_aj_per_bit)),
            ("write_energy_pj_per_bit", pj(self.write_aj_per_bit)),
            ("same_bit_write_energy_pj_per_bit", pj(self.same_bit_write_aj_per_bit)),
            ("leakage_pw_per_bit", pj(self.leakage_aw_per_bit)),
        ];
        match self.refresh {
            Some(r) => {
                out.push(("retention_time_ns", ns(r.retention_ps)));
                out.push(("refresh_row_period_ns", ns(r.row_period_ps)));
                out.push(("refresh_energy_pj_per_bit", pj(r.energy_aj_per_bit)));
            }
            None => {
                out.push(("retention_time_ns", "-".into()));
                out.push(("refresh_row_period_ns", "-".into()));
                out.push(("refresh_energy_pj_per_bit", "-".into()));
            }
        }
        out
    }

    fn validate(&self, key: &CatalogKey) -> Result<()> {
        if self.same_bit_write_aj_per_bit > self.write_aj_per_bit {
            return Err(Error::Catalog(format!(
                "{} {}: same-bit write energy exceeds write energy",
                key.level, key.tech
            )));
        }
        if key.tech == TechClass::Sram && self.same_bit_write_aj_per_bit != self.write_aj_per_bit {
            return Err(Error::Catalog(format!(
                "{}: SRAM same-bit write energy must equal write energy",
                key.level
            )));
        }
        if let Some(r) = self.refresh {
            if r.retention_ps == 0 {
                return Err(Error::Catalog(format!("{} {}: zero retention time", key.level, key.tech)));
            }
        }
        Ok(())
    }
}

/// Main memory constants (flat latency, per-line energies).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct DramParams {
    pub access_latency_ps: Ps,
    pub read_aj_per_line: u64,
    pub write_aj_per_line: u64,
}

impl DramParams {
    pub fn latency_cycles(&self, clock_mhz: u32) -> u64 {
        ps_to_cycles_ceil(self.access_latency_ps, clock_mhz)
    }
}

/// Technology node. A step is one adjacent move in `28, 22, 14, 10, 7`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Node {
    Nm28,
    Nm22,
    Nm14,
    Nm10,
    Nm7,
}

impl Node {
    pub const ALL: [Node; 5] = [Node::Nm28, Node::Nm22, Node::Nm14, Node::Nm10, Node::Nm7];

    pub fn from_nm(nm: u32) -> Result<Node> {
        match nm {
            28 => Ok(Node::Nm28),
            22 => Ok(Node::Nm22),
            14 => Ok(Node::Nm14),
            10 => Ok(Node::Nm10),
            7 => Ok(Node::Nm7),
            _ => Err(Error::Config(format!("unsupported technology node {nm} nm"))),
        }
    }

    pub fn nm(self) -> u32 {
        match self {
            Node::Nm28 => 28,
            Node::Nm22 => 22,
            Node::Nm14 => 14,
            Node::Nm10 => 10,
            Node::Nm7 => 7,
        }
    }

    fn index(self) -> i32 {
        self as i32
    }
}

/// Halves (or doubles) `v` once per step, rounding to nearest. Exact for
/// every built-in value down to 7 nm.
fn scale_value(v: u64, steps_down: i32) -> u64 {
    if steps_down >= 0 {
        let k = steps_down as u32;
        if k == 0 {
            v
        } else {
            (v + (1u64 << (k - 1))) >> k
        }
    } else {
        v << (-steps_down) as u32
    }
}

/// Moves parameters between technology nodes: every per-bit energy, the
/// leakage and the retention time halve per step toward smaller nodes.
/// Latencies do not change.
pub fn scale(params: &TechParams, from: Node, to: Node) -> TechParams {
    let k = to.index() - from.index();
    let mut out = *params;
    out.read_aj_per_bit = scale_value(params.read_aj_per_bit, k);
    out.write_aj_per_bit = scale_value(params.write_aj_per_bit, k);
    out.same_bit_write_aj_per_bit = scale_value(params.same_bit_write_aj_per_bit, k);
    out.leakage_aw_per_bit = scale_value(params.leakage_aw_per_bit, k);
    out.refresh = params.refresh.map(|r| RefreshParams {
        retention_ps: scale_value(r.retention_ps, k),
        row_period_ps: r.row_period_ps,
        energy_aj_per_bit: scale_value(r.energy_aj_per_bit, k),
    });
    out
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CatalogFile {
    clock: Option<ClockSection>,
    dram: Option<DramSection>,
    #[serde(default)]
    entry: Vec<EntrySection>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ClockSection {
    frequency_ghz: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DramSection {
    access_latency_ns: String,
    read_energy_nj_per_line: String,
    write_energy_nj_per_line: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EntrySection {
    level: String,
    tech: String,
    variant: Option<String>,
    read_latency_ns: String,
    write_latency_ns: String,
    read_energy_pj_per_bit: String,
    write_energy_pj_per_bit: String,
    same_bit_write_energy_pj_per_bit: String,
    leakage_pw_per_bit: String,
    retention_time_ns: Option<String>,
    refresh_row_period_ns: Option<String>,
    refresh_energy_pj_per_bit: Option<String>,
}

fn field(v: &str, digits: u32, what: &str) -> Result<u64> {
    parse_fixed(v, digits).map_err(|e| Error::Catalog(format!("{what}: {e}")))
}

impl EntrySection {
    fn into_entry(self, clock_mhz: u32) -> Result<(CatalogKey, TechParams)> {
        let level: CacheLevel = self.level.parse().map_err(|_| Error::Catalog(format!("unknown level {:?}", self.level)))?;
        let tech: TechClass = self.tech.parse().map_err(|_| Error::Catalog(format!("unknown tech {:?}", self.tech)))?;
        let variant = match self.variant.as_deref() {
            None | Some("plain") => Variant::Plain,
            Some("hybrid") => Variant::Hybrid,
            Some(v) => return Err(Error::Catalog(format!("unknown variant {v:?}"))),
        };
        let key = CatalogKey { level, tech, variant };
        let refresh = match (self.retention_time_ns, self.refresh_row_period_ns, self.refresh_energy_pj_per_bit) {
            (None, None, None) => None,
            (Some(ret), Some(period), Some(energy)) => Some(RefreshParams {
                retention_ps: field(&ret, 3, "retention_time_ns")?,
                row_period_ps: field(&period, 3, "refresh_row_period_ns")?,
                energy_aj_per_bit: field(&energy, 6, "refresh_energy_pj_per_bit")?,
            }),
            _ => {
                return Err(Error::Catalog(format!(
                    "{level} {tech}: retention, row period and refresh energy must be given together"
                )))
            }
        };
        let params = TechParams {
            read_latency_ps: field(&self.read_latency_ns, 3, "read_latency_ns")?,
            write_latency_ps: field(&self.write_latency_ns, 3, "write_latency_ns")?,
            read_latency_cycles: 0,
            write_latency_cycles: 0,
            read_aj_per_bit: field(&self.read_energy_pj_per_bit, 6, "read_energy_pj_per_bit")?,
            write_aj_per_bit: field(&self.write_energy_pj_per_bit, 6, "write_energy_pj_per_bit")?,
            same_bit_write_aj_per_bit: field(
                &self.same_bit_write_energy_pj_per_bit,
                6,
                "same_bit_write_energy_pj_per_bit",
            )?,
            leakage_aw_per_bit: field(&self.leakage_pw_per_bit, 6, "leakage_pw_per_bit")?,
            refresh,
        }
        .at_clock(clock_mhz);
        params.validate(&key)?;
        Ok((key, params))
    }
}

/// Immutable set of technology tables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Catalog {
    clock_mhz: u32,
    dram: DramParams,
    entries: BTreeMap<CatalogKey, TechParams>,
}

impl Catalog {
    /// The shipped tables.
    pub fn builtin() -> &'static Catalog {
        static BUILTIN: OnceLock<Catalog> = OnceLock::new();
        BUILTIN.get_or_init(|| Catalog::from_toml_str(BUILTIN_CATALOG).expect("shipped catalog parses"))
    }

    pub fn builtin_source() -> &'static str {
        BUILTIN_CATALOG
    }

    /// Parses a complete catalog document.
    pub fn from_toml_str(s: &str) -> Result<Catalog> {
        let file: CatalogFile = toml::from_str(s).map_err(|e| Error::Catalog(e.to_string()))?;
        let clock = file
            .clock
            .ok_or_else(|| Error::Catalog("missing [clock] section".into()))?;
        let clock_mhz = parse_clock(&clock.frequency_ghz)?;
        let dram = parse_dram(file.dram.ok_or_else(|| Error::Catalog("missing [dram] section".into()))?)?;
        let mut entries = BTreeMap::new();
        for e in file.entry {
            let (k, p) = e.into_entry(clock_mhz)?;
            if entries.insert(k, p).is_some() {
                return Err(Error::Catalog(format!("duplicate entry {} {}", k.level, k.tech)));
            }
        }
        Ok(Catalog { clock_mhz, dram, entries })
    }

    /// Applies an override document with the same schema. Any entry, the
    /// clock and the DRAM block may be replaced.
    pub fn with_override(&self, s: &str) -> Result<Catalog> {
        let file: CatalogFile = toml::from_str(s).map_err(|e| Error::Catalog(e.to_string()))?;
        let mut out = self.clone();
        if let Some(c) = file.clock {
            out.clock_mhz = parse_clock(&c.frequency_ghz)?;
            for p in out.entries.values_mut() {
                *p = p.at_clock(out.clock_mhz);
            }
        }
        if let Some(d) = file.dram {
            out.dram = parse_dram(d)?;
        }
        for e in file.entry {
            let (k, p) = e.into_entry(out.clock_mhz)?;
            out.entries.insert(k, p);
        }
        Ok(out)
    }

    /// Built-in catalog, with the file named by `CELLSIM_CATALOG` applied on
    /// top when the variable is set.
    pub fn from_env() -> Result<Catalog> {
        match std::env::var_os(CATALOG_ENV) {
            Some(path) => {
                let text = std::fs::read_to_string(&path)?;
                Catalog::builtin().with_override(&text)
            }
            None => Ok(Catalog::builtin().clone()),
        }
    }

    pub fn clock_mhz(&self) -> u32 {
        self.clock_mhz
    }

    pub fn dram(&self) -> DramParams {
        self.dram
    }

    pub fn get(&self, key: CatalogKey) -> Result<TechParams> {
        self.entries.get(&key).copied().ok_or_else(|| Error::UnsupportedPair {
            level: key.level.to_string(),
            tech: match key.variant {
                Variant::Plain => key.tech.to_string(),
                Variant::Hybrid => format!("hybrid {}", key.tech),
            },
        })
    }

    pub fn params(&self, level: CacheLevel, tech: TechClass) -> Result<TechParams> {
        self.get(CatalogKey { level, tech, variant: Variant::Plain })
    }

    /// One side of the GC/STT-RAM hybrid LLC.
    pub fn hybrid_params(&self, tech: TechClass) -> Result<TechParams> {
        self.get(CatalogKey { level: CacheLevel::Llc, tech, variant: Variant::Hybrid })
    }

    pub fn entries(&self) -> impl Iterator<Item = (&CatalogKey, &TechParams)> {
        self.entries.iter()
    }
}

fn parse_clock(ghz: &str) -> Result<u32> {
    let mhz = field(ghz, 3, "frequency_ghz")?;
    if mhz == 0 || mhz > u32::MAX as u64 {
        return Err(Error::Catalog(format!("bad clock frequency {ghz:?}")));
    }
    Ok(mhz as u32)
}

fn parse_dram(d: DramSection) -> Result<DramParams> {
    Ok(DramParams {
        access_latency_ps: field(&d.access_latency_ns, 3, "access_latency_ns")?,
        read_aj_per_line: field(&d.read_energy_nj_per_line, 9, "read_energy_nj_per_line")?,
        write_aj_per_line: field(&d.write_energy_nj_per_line, 9, "write_energy_nj_per_line")?,
    })
}

/// Built-in constants for a (level, technology) pair.
pub fn builtin_params(level: CacheLevel, tech: TechClass) -> Result<TechParams> {
    Catalog::builtin().params(level, tech)
}

/// Built-in main-memory constants.
pub fn dram_params() -> DramParams {
    Catalog::builtin().dram()
}
