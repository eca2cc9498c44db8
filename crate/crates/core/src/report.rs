//! Simulation reports.
//!
//! The text form is line oriented: a version line followed by `key = value`
//! lines in a fixed order, so that two reports can be diffed line by line.
//! Energies are integer attojoules. A CSV with one row per level and a
//! human-readable summary table are derived from the same data.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::energy::{EnergyLedger, LevelKind};
use crate::error::{Error, Result};
use crate::units::{Energy, Ps};

pub const REPORT_VERSION: &str = "cellsim-report v1";

macro_rules! counters {
    ($(#[$m:meta])* pub struct $name:ident { $($(#[$fm:meta])* $field:ident),* $(,)? }) => {
        $(#[$m])*
        pub struct $name {
            $($(#[$fm])* pub $field: u64,)*
        }

        impl $name {
            pub fn fields(&self) -> Vec<(&'static str, u64)> {
                vec![$((stringify!($field), self.$field)),*]
            }

            pub fn merge(&mut self, o: &$name) {
                $(self.$field += o.$field;)*
            }
        }
    };
}

counters! {
    /// Event counts of one level, summed over cores for private levels.
    #[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
    pub struct LevelStats {
        lookups,
        hits,
        misses,
        demand_lookups,
        demand_hits,
        demand_misses,
        writeback_lookups,
        writeback_hits,
        writeback_misses,
        gc_way_hits,
        stt_way_hits,
        promotions,
        demotions,
        fills,
        evictions,
        dirty_evictions,
        /// Dirty lines sent to the next level (evictions and NRP).
        writebacks_out,
        nrp_ticks,
        nrp_invalidations,
        nrp_dirty_invalidations,
        /// Demand misses on lines that NRP had invalidated.
        nrp_misses,
        refresh_collisions,
        refresh_delay_ps,
        occupancy_delay_ps,
        writes_overlapped,
        writes_serialized,
        refresh_rows,
        /// Reads of a dynamic line older than its retention time.
        freshness_violations,
        nrp_safety_violations,
    }
}

/// Static description of a configured level.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LevelInfo {
    pub tech: String,
    pub capacity_bytes: u64,
    pub ways: u32,
    pub node_nm: u32,
    pub read_latency_cycles: u32,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SimReport {
    pub label: String,
    pub cores: u32,
    pub clock_mhz: u32,
    pub records: u64,
    pub reads: u64,
    pub writes: u64,
    pub ifetches: u64,
    /// Sum of access latencies.
    pub memory_cycles: u64,
    /// Sum of access latencies beyond an L1 hit.
    pub stall_cycles: u64,
    pub amat_cycles: f64,
    pub total_time_ps: Ps,
    pub info: [LevelInfo; 4],
    pub levels: [LevelStats; 4],
    pub ledger: EnergyLedger,
    pub refresh_conflict_fraction: f64,
    pub overlapped_write_fraction: f64,
    pub nrp_miss_fraction: f64,
    pub writeback_bytes: u64,
    pub writeback_bandwidth_bytes_per_s: f64,
    pub edp_js: f64,
}

fn ratio(n: u64, d: u64) -> f64 {
    if d == 0 {
        0.0
    } else {
        n as f64 / d as f64
    }
}

impl SimReport {
    pub fn level(&self, kind: LevelKind) -> &LevelStats {
        &self.levels[kind.index()]
    }

    /// Fills in every derived metric from the raw counters.
    pub fn finish(&mut self) {
        let accesses = self.reads + self.writes + self.ifetches;
        self.amat_cycles = ratio(self.memory_cycles, accesses);
        let refreshed: Vec<&LevelStats> =
            self.levels.iter().filter(|s| s.refresh_rows > 0 || s.refresh_collisions > 0).collect();
        self.refresh_conflict_fraction = ratio(
            refreshed.iter().map(|s| s.refresh_collisions).sum(),
            refreshed.iter().map(|s| s.demand_lookups).sum(),
        );
        let (ov, ser) = self
            .levels
            .iter()
            .fold((0, 0), |(a, b), s| (a + s.writes_overlapped, b + s.writes_serialized));
        self.overlapped_write_fraction = ratio(ov, ov + ser);
        let nrp: Vec<&LevelStats> = self.levels.iter().filter(|s| s.nrp_ticks > 0).collect();
        self.nrp_miss_fraction = ratio(
            nrp.iter().map(|s| s.nrp_misses).sum(),
            nrp.iter().map(|s| s.demand_misses).sum(),
        );
        let wbs: u64 = self.levels.iter().map(|s| s.writebacks_out).sum();
        self.writeback_bytes = wbs * crate::geometry::LINE_BYTES;
        self.writeback_bandwidth_bytes_per_s = if self.total_time_ps == 0 {
            0.0
        } else {
            self.writeback_bytes as f64 / (self.total_time_ps as f64 * 1e-12)
        };
        self.edp_js = self.ledger.edp(self.total_time_ps);
    }

    /// `(key, value)` pairs in report order.
    pub fn fields(&self) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> = Vec::new();
        let mut put = |k: String, v: String| out.push((k, v));
        put("label".into(), self.label.clone());
        put("cores".into(), self.cores.to_string());
        put("clock_mhz".into(), self.clock_mhz.to_string());
        put("records".into(), self.records.to_string());
        put("reads".into(), self.reads.to_string());
        put("writes".into(), self.writes.to_string());
        put("ifetches".into(), self.ifetches.to_string());
        put("memory_cycles".into(), self.memory_cycles.to_string());
        put("stall_cycles".into(), self.stall_cycles.to_string());
        put("amat_cycles".into(), format!("{:.6}", self.amat_cycles));
        put("total_time_ps".into(), self.total_time_ps.to_string());
        put("refresh_conflict_fraction".into(), format!("{:.9}", self.refresh_conflict_fraction));
        put("overlapped_write_fraction".into(), format!("{:.9}", self.overlapped_write_fraction));
        put("nrp_miss_fraction".into(), format!("{:.9}", self.nrp_miss_fraction));
        put("writeback_bytes".into(), self.writeback_bytes.to_string());
        put(
            "writeback_bandwidth_bytes_per_s".into(),
            format!("{:.6e}", self.writeback_bandwidth_bytes_per_s),
        );
        for kind in LevelKind::ALL {
            let i = &self.info[kind.index()];
            let p = format!("level.{kind}");
            put(format!("{p}.tech"), i.tech.clone());
            put(format!("{p}.capacity_bytes"), i.capacity_bytes.to_string());
            put(format!("{p}.ways"), i.ways.to_string());
            put(format!("{p}.node_nm"), i.node_nm.to_string());
            put(format!("{p}.read_latency_cycles"), i.read_latency_cycles.to_string());
            for (k, v) in self.levels[kind.index()].fields() {
                put(format!("{p}.{k}"), v.to_string());
            }
        }
        for kind in LevelKind::ALL {
            let e = self.ledger.level(kind);
            let p = format!("energy.{kind}");
            put(format!("{p}.reads"), e.reads.to_string());
            put(format!("{p}.writes"), e.writes.to_string());
            put(format!("{p}.fills"), e.fills.to_string());
            put(format!("{p}.dynamic_read_aj"), e.dynamic_read.attojoules().to_string());
            put(format!("{p}.dynamic_write_aj"), e.dynamic_write.attojoules().to_string());
            put(format!("{p}.refresh_aj"), e.refresh.attojoules().to_string());
            put(format!("{p}.leakage_aj"), e.leakage.attojoules().to_string());
            put(format!("{p}.refresh_rows"), e.refresh_rows.to_string());
            put(format!("{p}.dissimilar_bits"), e.dissimilar_bits.to_string());
            put(format!("{p}.total_write_bits"), e.total_write_bits.to_string());
            put(format!("{p}.total_aj"), e.total().attojoules().to_string());
        }
        put("energy.dram.reads".into(), self.ledger.dram.reads.to_string());
        put("energy.dram.writes".into(), self.ledger.dram.writes.to_string());
        put("energy.dram.energy_aj".into(), self.ledger.dram.energy.attojoules().to_string());
        put("energy.cache_dynamic_aj".into(), self.ledger.cache_dynamic().attojoules().to_string());
        put("energy.cache_total_aj".into(), self.ledger.cache_total().attojoules().to_string());
        put("energy.total_aj".into(), self.ledger.total().attojoules().to_string());
        put("edp_js".into(), format!("{:.9e}", self.edp_js));
        out
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from(REPORT_VERSION);
        s.push('\n');
        for (k, v) in self.fields() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    /// One row per level.
    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "level,tech,capacity_bytes,ways,lookups,hits,misses,dynamic_aj,refresh_aj,leakage_aj,total_aj\n",
        );
        for kind in LevelKind::ALL {
            let i = &self.info[kind.index()];
            let st = &self.levels[kind.index()];
            let e = self.ledger.level(kind);
            let _ = writeln!(
                s,
                "{kind},{},{},{},{},{},{},{},{},{},{}",
                i.tech,
                i.capacity_bytes,
                i.ways,
                st.lookups,
                st.hits,
                st.misses,
                e.dynamic().attojoules(),
                e.refresh.attojoules(),
                e.leakage.attojoules(),
                e.total().attojoules()
            );
        }
        let _ = writeln!(
            s,
            "dram,DRAM,0,0,{},0,0,{},0,0,{}",
            self.ledger.dram.reads + self.ledger.dram.writes,
            self.ledger.dram.energy.attojoules(),
            self.ledger.dram.energy.attojoules()
        );
        s
    }

    pub fn summary_table(&self) -> String {
        let nj = |e: Energy| format!("{:.3}", e.as_pj_f64() / 1e3);
        let mut s = String::new();
        let _ = writeln!(s, "run: {}", self.label);
        let _ = writeln!(
            s,
            "{:<5} {:<14} {:>10} {:>12} {:>12} {:>14} {:>14} {:>14}",
            "level", "tech", "size", "hits", "misses", "dynamic nJ", "refresh nJ", "leakage nJ"
        );
        for kind in LevelKind::ALL {
            let i = &self.info[kind.index()];
            let st = &self.levels[kind.index()];
            let e = self.ledger.level(kind);
            let _ = writeln!(
                s,
                "{:<5} {:<14} {:>10} {:>12} {:>12} {:>14} {:>14} {:>14}",
                kind.name(),
                i.tech,
                format!("{}K", i.capacity_bytes >> 10),
                st.hits,
                st.misses,
                nj(e.dynamic()),
                nj(e.refresh),
                nj(e.leakage)
            );
        }
        let _ = writeln!(
            s,
            "dram: {} reads, {} writes, {} nJ",
            self.ledger.dram.reads,
            self.ledger.dram.writes,
            nj(self.ledger.dram.energy)
        );
        let _ = writeln!(
            s,
            "AMAT {:.3} cycles, stalls {} cycles, time {:.3} us",
            self.amat_cycles,
            self.stall_cycles,
            self.total_time_ps as f64 / 1e6
        );
        let _ = writeln!(
            s,
            "total energy {} nJ, EDP {:.6e} Js",
            nj(self.ledger.total()),
            self.edp_js
        );
        s
    }
}

/// A report read back from its text form.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParsedReport {
    pub fields: Vec<(String, String)>,
}

impl ParsedReport {
    pub fn parse(text: &str) -> Result<ParsedReport> {
        let mut lines = text.lines();
        match lines.next() {
            Some(v) if v.trim() == REPORT_VERSION => {}
            Some(v) => return Err(Error::Report(format!("unsupported report version `{}`", v.trim()))),
            None => return Err(Error::Report("empty report".into())),
        }
        let mut fields = Vec::new();
        for (i, l) in lines.enumerate() {
            if l.trim().is_empty() {
                continue;
            }
            let (k, v) = l
                .split_once(" = ")
                .ok_or_else(|| Error::Report(format!("line {}: expected `key = value`", i + 2)))?;
            fields.push((k.to_string(), v.to_string()));
        }
        Ok(ParsedReport { fields })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.fields.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn number(&self, key: &str) -> Option<f64> {
        self.get(key)?.parse().ok()
    }
}

/// `(key, a, b, a / b)` for every numeric field present in both reports,
/// in the order of `a`. The ratio is `None` when `b` is zero.
pub fn compare(a: &ParsedReport, b: &ParsedReport) -> Vec<(String, f64, f64, Option<f64>)> {
    let bmap: BTreeMap<&str, f64> = b
        .fields
        .iter()
        .filter_map(|(k, v)| v.parse::<f64>().ok().map(|x| (k.as_str(), x)))
        .collect();
    a.fields
        .iter()
        .filter_map(|(k, v)| {
            let x: f64 = v.parse().ok()?;
            let y = *bmap.get(k.as_str())?;
            Some((k.clone(), x, y, (y != 0.0).then(|| x / y)))
        })
        .collect()
}

/// Renders [`compare`] as a table.
pub fn compare_table(a: &ParsedReport, b: &ParsedReport, only_nonzero: bool) -> String {
    let mut s = String::new();
    let la = a.get("label").unwrap_or("A");
    let lb = b.get("label").unwrap_or("B");
    let _ = writeln!(s, "{:<44} {:>22} {:>22} {:>12}", "field", la, lb, "ratio");
    for (k, x, y, r) in compare(a, b) {
        if only_nonzero && x == 0.0 && y == 0.0 {
            continue;
        }
        let r = r.map(|r| format!("{r:.6}")).unwrap_or_else(|| "-".into());
        let _ = writeln!(s, "{k:<44} {x:>22} {y:>22} {r:>12}");
    }
    s
}
