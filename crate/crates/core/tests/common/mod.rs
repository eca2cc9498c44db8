//! Oracles shared by the integration tests and the acceptance suite. None of
//! them call into the pricing, replacement or parsing code they check.
#![allow(dead_code)]

use cellsim_core::cache::Op;
use cellsim_core::catalog::{Catalog, CacheLevel, TechClass, TechParams};
use cellsim_core::config::HierarchyConfig;
use cellsim_core::energy::{EnergyLedger, LedgerEvent, LevelKind, WriteCharge};

pub const GOLDEN_PARAMS: &str = include_str!("../golden/published_params.txt");

/// Parses a non-negative decimal into an integer count of `10^-digits`.
pub fn decimal(s: &str, digits: u32) -> u128 {
    let (int, frac) = s.split_once('.').unwrap_or((s, ""));
    assert!(frac.len() as u32 <= digits, "{s} has too many decimals");
    let int: u128 = if int.is_empty() { 0 } else { int.parse().unwrap() };
    let frac_val: u128 = if frac.is_empty() { 0 } else { frac.parse().unwrap() };
    int * 10u128.pow(digits) + frac_val * 10u128.pow(digits - frac.len() as u32)
}

/// A printed value converted to the simulator's base unit (ps, aJ, aW,
/// MHz, bytes or a plain count).
fn golden_value(v: &str) -> u128 {
    let units: [(&str, u32, u128); 9] = [
        ("GHz", 3, 1),
        ("ns", 3, 1),
        ("ms", 9, 1),
        ("pJ", 6, 1),
        ("nJ", 9, 1),
        ("pW", 6, 1),
        ("KB", 0, 1 << 10),
        ("MB", 0, 1 << 20),
        ("", 0, 1),
    ];
    for (suffix, digits, mult) in units {
        if let Some(num) = v.strip_suffix(suffix) {
            if num.chars().all(|c| c.is_ascii_digit() || c == '.') && !num.is_empty() {
                return decimal(num, digits) * mult;
            }
        }
    }
    panic!("unrecognised golden value {v}")
}

fn param_field(p: &TechParams, field: &str) -> Option<u128> {
    let r = p.refresh;
    Some(match field {
        "latency" => {
            assert_eq!(p.read_latency_ps, p.write_latency_ps, "single printed latency");
            p.read_latency_ps as u128
        }
        "latency_cycles" => {
            assert_eq!(p.read_latency_cycles, p.write_latency_cycles);
            p.read_latency_cycles as u128
        }
        "read_latency" => p.read_latency_ps as u128,
        "write_latency" => p.write_latency_ps as u128,
        "read_latency_cycles" => p.read_latency_cycles as u128,
        "write_latency_cycles" => p.write_latency_cycles as u128,
        "read_energy" => p.read_aj_per_bit as u128,
        "write_energy" => p.write_aj_per_bit as u128,
        "same_bit_write_energy" => p.same_bit_write_aj_per_bit as u128,
        "leakage" => p.leakage_aw_per_bit as u128,
        "refresh_interval" => r?.retention_ps as u128,
        "refresh_period" => r?.row_period_ps as u128,
        "refresh_energy" => r?.energy_aj_per_bit as u128,
        _ => return None,
    })
}

fn system_field(field: &str) -> u128 {
    let cat = Catalog::builtin();
    let sys = HierarchyConfig::all_sram(1);
    let level = |k: LevelKind| sys.level(k);
    match field {
        "clock" => cat.clock_mhz() as u128,
        "dram_latency" => cat.dram().access_latency_ps as u128,
        "dram_read_energy" => cat.dram().read_aj_per_line as u128,
        "dram_write_energy" => cat.dram().write_aj_per_line as u128,
        _ => {
            let (name, what) = field.split_once('_').unwrap();
            let kind = LevelKind::ALL.into_iter().find(|k| k.name() == name).unwrap();
            let g = &level(kind).geometry;
            match what {
                "capacity" => g.capacity_bytes() as u128,
                "ways" => g.associativity() as u128,
                _ => panic!("unknown system field {field}"),
            }
        }
    }
}

/// Compares every golden line with the built-in catalog. Returns the
/// number of lines checked, or one message per mismatch.
pub fn check_published_params() -> Result<usize, Vec<String>> {
    let cat = Catalog::builtin();
    let mut errors = Vec::new();
    let mut n = 0;
    for line in GOLDEN_PARAMS.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        let (entry, tech, field, value) = match cols.as_slice() {
            [e, t, f, v] => (*e, *t, *f, *v),
            [e, f, v] => (*e, "", *f, *v),
            _ => panic!("bad golden line {line}"),
        };
        let want = golden_value(value);
        let got = match entry {
            "SYSTEM" => Some(system_field(field)),
            "HYBRID" => {
                let p = cat.hybrid_params(tech.parse::<TechClass>().unwrap()).unwrap();
                param_field(&p, field)
            }
            level => {
                let p = cat.params(level.parse::<CacheLevel>().unwrap(), tech.parse().unwrap()).unwrap();
                param_field(&p, field)
            }
        };
        n += 1;
        if got != Some(want) {
            errors.push(format!("{entry} {tech} {field}: published {value}, catalog {got:?} (base units {want})"));
        }
    }
    if errors.is_empty() {
        Ok(n)
    } else {
        Err(errors)
    }
}

/// Reference LRU: a list of tags, most recent first.
#[derive(Clone, Debug)]
pub struct StackOracle {
    ways: usize,
    stack: Vec<u64>,
}

impl StackOracle {
    pub fn new(ways: usize) -> StackOracle {
        StackOracle { ways, stack: Vec::new() }
    }

    /// `(hit, evicted tag)`.
    pub fn access(&mut self, tag: u64) -> (bool, Option<u64>) {
        if let Some(i) = self.stack.iter().position(|&t| t == tag) {
            let t = self.stack.remove(i);
            self.stack.insert(0, t);
            return (true, None);
        }
        self.stack.insert(0, tag);
        let evicted = if self.stack.len() > self.ways { self.stack.pop() } else { None };
        (false, evicted)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HybridOutcome {
    GcHit,
    SttHit,
    Miss,
}

/// Reference hybrid set: two recency lists of `(tag, dirty)`, most recent
/// first. STT-RAM hits trade places with the GC LRU line; misses fill the
/// STT-RAM side at its LRU end.
#[derive(Clone, Debug)]
pub struct HybridOracle {
    pub gc_ways: usize,
    pub stt_ways: usize,
    pub gc: Vec<(u64, bool)>,
    pub stt: Vec<(u64, bool)>,
    pub promote_mru: bool,
}

impl HybridOracle {
    pub fn new(gc_ways: usize, stt_ways: usize, promote_mru: bool) -> HybridOracle {
        HybridOracle { gc_ways, stt_ways, gc: Vec::new(), stt: Vec::new(), promote_mru }
    }

    /// Outcome and the `(tag, dirty)` that left the set.
    pub fn access(&mut self, op: Op, tag: u64) -> (HybridOutcome, Option<(u64, bool)>) {
        let w = op == Op::Write;
        if let Some(i) = self.gc.iter().position(|&(t, _)| t == tag) {
            let (t, d) = self.gc.remove(i);
            self.gc.insert(0, (t, d || w));
            return (HybridOutcome::GcHit, None);
        }
        if let Some(i) = self.stt.iter().position(|&(t, _)| t == tag) {
            let (t, d) = self.stt.remove(i);
            if self.gc.len() == self.gc_ways {
                let displaced = self.gc.pop().unwrap();
                self.stt.push(displaced);
            }
            if self.promote_mru {
                self.gc.insert(0, (t, d || w));
            } else {
                self.gc.push((t, d || w));
            }
            return (HybridOutcome::SttHit, None);
        }
        let victim = if self.stt.len() == self.stt_ways { self.stt.pop() } else { None };
        self.stt.push((tag, w));
        (HybridOutcome::Miss, victim)
    }
}

/// Per-level totals recomputed from an event log.
#[derive(Debug, Default, PartialEq, Eq, Clone, Copy)]
pub struct Priced {
    pub reads: u64,
    pub writes: u64,
    pub fills: u64,
    pub dynamic_read: u128,
    pub dynamic_write: u128,
    pub refresh: u128,
    pub leakage: u128,
    pub refresh_rows: u64,
    pub dissimilar_bits: u64,
    pub total_write_bits: u64,
}

/// Single pass over the event log with the per-bit arithmetic written out
/// longhand: 512-bit rows, aW x ps = 1e-12 aJ.
pub fn reprice(events: &[LedgerEvent]) -> ([Priced; 4], u64, u64, u128) {
    let mut levels = [Priced::default(); 4];
    let (mut dram_reads, mut dram_writes, mut dram_energy) = (0u64, 0u64, 0u128);
    for ev in events {
        match *ev {
            LedgerEvent::Read { level, params } => {
                let l = &mut levels[level.index()];
                l.reads += 1;
                l.dynamic_read += 512 * params.read_aj_per_bit as u128;
            }
            LedgerEvent::Write { level, params, fill, charge } => {
                let l = &mut levels[level.index()];
                if fill {
                    l.fills += 1;
                } else {
                    l.writes += 1;
                }
                l.total_write_bits += 512;
                let full = params.write_aj_per_bit as u128;
                let same = params.same_bit_write_aj_per_bit as u128;
                l.dynamic_write += match charge {
                    WriteCharge::Full => 512 * full,
                    WriteCharge::Asymmetric { dissimilar } => {
                        l.dissimilar_bits += dissimilar as u64;
                        let mut e = 0;
                        for bit in 0..512u32 {
                            e += if bit < dissimilar { full } else { same };
                        }
                        e
                    }
                    WriteCharge::Modeled { similarity_ppm } => {
                        let s = similarity_ppm as u128;
                        (512 * s * same + 512 * (1_000_000 - s) * full) / 1_000_000
                    }
                };
            }
            LedgerEvent::Refresh { level, params, rows } => {
                let l = &mut levels[level.index()];
                l.refresh_rows += rows;
                l.refresh += rows as u128 * 512 * params.refresh.unwrap().energy_aj_per_bit as u128;
            }
            LedgerEvent::Leakage { level, params, bits, duration_ps } => {
                levels[level.index()].leakage +=
                    params.leakage_aw_per_bit as u128 * bits as u128 * duration_ps as u128 / 1_000_000_000_000;
            }
            LedgerEvent::DramRead { params } => {
                dram_reads += 1;
                dram_energy += params.read_aj_per_line as u128;
            }
            LedgerEvent::DramWrite { params } => {
                dram_writes += 1;
                dram_energy += params.write_aj_per_line as u128;
            }
        }
    }
    (levels, dram_reads, dram_writes, dram_energy)
}

/// Field-by-field comparison of a ledger with its re-priced event log.
pub fn ledger_mismatches(ledger: &EnergyLedger) -> Vec<String> {
    let events = ledger.events().expect("event log enabled");
    let (levels, dr, dw, de) = reprice(events);
    let mut out = Vec::new();
    for kind in LevelKind::ALL {
        let a = ledger.level(kind);
        let b = levels[kind.index()];
        let pairs: [(&str, u128, u128); 10] = [
            ("reads", a.reads as u128, b.reads as u128),
            ("writes", a.writes as u128, b.writes as u128),
            ("fills", a.fills as u128, b.fills as u128),
            ("dynamic_read", a.dynamic_read.0, b.dynamic_read),
            ("dynamic_write", a.dynamic_write.0, b.dynamic_write),
            ("refresh", a.refresh.0, b.refresh),
            ("leakage", a.leakage.0, b.leakage),
            ("refresh_rows", a.refresh_rows as u128, b.refresh_rows as u128),
            ("dissimilar_bits", a.dissimilar_bits as u128, b.dissimilar_bits as u128),
            ("total_write_bits", a.total_write_bits as u128, b.total_write_bits as u128),
        ];
        for (name, x, y) in pairs {
            if x != y {
                out.push(format!("{}.{name}: ledger {x}, oracle {y}", kind.name()));
            }
        }
    }
    for (name, x, y) in [
        ("dram.reads", ledger.dram.reads as u128, dr as u128),
        ("dram.writes", ledger.dram.writes as u128, dw as u128),
        ("dram.energy", ledger.dram.energy.0, de),
    ] {
        if x != y {
            out.push(format!("{name}: ledger {x}, oracle {y}"));
        }
    }
    out
}

use cellsim_core::cache::{Outcome, SetState, WayLayout};

/// Depth-first walk over every access sequence of length `1..=max_len`
/// drawn from `alphabet`, carrying cloned state so prefixes are shared.
fn walk<S: Clone, A: Copy>(
    state: &S,
    alphabet: &[A],
    depth: usize,
    max_len: usize,
    path: &mut Vec<A>,
    step: &mut dyn FnMut(&mut S, A, &[A]) -> Result<(), String>,
    visited: &mut u64,
) -> Result<(), String> {
    if depth == max_len {
        return Ok(());
    }
    for &a in alphabet {
        let mut s = state.clone();
        path.push(a);
        *visited += 1;
        step(&mut s, a, path)?;
        walk(&s, alphabet, depth + 1, max_len, path, step, visited)?;
        path.pop();
    }
    Ok(())
}

/// Every sequence of length <= `max_len` over `tags` distinct tags on a
/// `ways`-way LRU set, against [`StackOracle`]. Returns the number of
/// sequences checked.
pub fn exhaustive_lru(ways: u16, tags: u64, max_len: usize) -> Result<u64, String> {
    let alphabet: Vec<u64> = (0..tags).map(|t| 0x100 + t).collect();
    let start = (SetState::new(WayLayout::Uniform { tech: TechClass::Sram, ways }), StackOracle::new(ways as usize));
    let mut n = 0;
    let mut step = |(set, oracle): &mut (SetState, StackOracle), tag: u64, path: &[u64]| {
        let r = set.access_plain(Op::Read, tag, None);
        let (hit, evicted) = oracle.access(tag);
        if r.outcome.is_hit() != hit || r.victim.as_ref().map(|v| v.tag) != evicted {
            return Err(format!("{path:x?}: set {:?}/{:?}, oracle hit={hit} evicted={evicted:?}", r.outcome, r.victim));
        }
        let order: Vec<u64> =
            set.recency().iter().map(|&w| set.line(w)).filter(|l| l.valid).map(|l| l.tag).collect();
        if order != oracle.stack {
            return Err(format!("{path:x?}: recency {order:x?}, oracle {:x?}", oracle.stack));
        }
        Ok(())
    };
    walk(&start, &alphabet, 0, max_len, &mut Vec::new(), &mut step, &mut n)?;
    Ok(n)
}

fn class_order(set: &SetState, gc: bool) -> Vec<(u64, bool)> {
    set.recency()
        .iter()
        .filter(|&&w| (set.layout().tech(w) == TechClass::Gc) == gc)
        .map(|&w| set.line(w))
        .filter(|l| l.valid)
        .map(|l| (l.tag, l.dirty))
        .collect()
}

/// Every read/write sequence of length <= `max_len` over `tags` tags on a
/// hybrid set, against [`HybridOracle`], plus the placement properties:
/// STT-RAM hits end in a GC way, new tags appear in an STT-RAM way, and
/// swaps conserve the set contents.
pub fn exhaustive_hybrid(gc_ways: u16, stt_ways: u16, tags: u64, max_len: usize, promote_mru: bool) -> Result<u64, String> {
    let mut alphabet = Vec::new();
    for t in 0..tags {
        alphabet.push((Op::Read, 0x40 + t));
        alphabet.push((Op::Write, 0x40 + t));
    }
    let start = (
        SetState::new(WayLayout::Hybrid { gc_ways, stt_ways }),
        HybridOracle::new(gc_ways as usize, stt_ways as usize, promote_mru),
    );
    let mut n = 0;
    let mut step = |(set, oracle): &mut (SetState, HybridOracle), (op, tag): (Op, u64), path: &[(Op, u64)]| {
        let mut before: Vec<u64> = set.lines().iter().filter(|l| l.valid).map(|l| l.tag).collect();
        before.sort_unstable();
        let r = set.access_hybrid(op, tag, None, promote_mru);
        let (want, left) = oracle.access(op, tag);
        let got = match r.outcome {
            Outcome::HitGcWay => HybridOutcome::GcHit,
            Outcome::HitSttWay => HybridOutcome::SttHit,
            Outcome::Miss => HybridOutcome::Miss,
            Outcome::Hit => return Err(format!("{path:?}: plain hit reported by a hybrid set")),
        };
        let victim = r.victim.as_ref().map(|v| (v.tag, v.dirty));
        if got != want || victim != left {
            return Err(format!("{path:?}: set {got:?} victim {victim:?}, oracle {want:?} victim {left:?}"));
        }
        let way = set.lookup(tag).ok_or_else(|| format!("{path:?}: accessed tag not resident"))?;
        let in_gc = set.layout().tech(way) == TechClass::Gc;
        match got {
            HybridOutcome::SttHit if !in_gc => return Err(format!("{path:?}: STT-RAM hit left the line in STT-RAM")),
            HybridOutcome::Miss if in_gc => return Err(format!("{path:?}: fill went straight to a GC way")),
            HybridOutcome::SttHit => {
                let mut after: Vec<u64> = set.lines().iter().filter(|l| l.valid).map(|l| l.tag).collect();
                after.sort_unstable();
                if after != before {
                    return Err(format!("{path:?}: swap changed the set contents"));
                }
            }
            _ => {}
        }
        if class_order(set, true) != oracle.gc || class_order(set, false) != oracle.stt {
            return Err(format!(
                "{path:?}: GC {:?} STT {:?}, oracle GC {:?} STT {:?}",
                class_order(set, true),
                class_order(set, false),
                oracle.gc,
                oracle.stt
            ));
        }
        Ok(())
    };
    walk(&start, &alphabet, 0, max_len, &mut Vec::new(), &mut step, &mut n)?;
    Ok(n)
}

use std::path::{Path, PathBuf};

use cellsim_core::config::{RunConfig, TraceSource};
use cellsim_core::report::SimReport;
use cellsim_core::sim::{simulate, SimOptions};
use cellsim_core::trace::{TraceOp, TraceRecord};

pub fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

/// Shipped config files, sorted by name.
pub fn shipped_configs() -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(repo_root().join("configs"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "toml"))
        .collect();
    v.sort();
    v
}

pub fn shipped(name: &str) -> RunConfig {
    RunConfig::load(&repo_root().join("configs").join(format!("{name}.toml"))).unwrap()
}

pub fn small_trace() -> PathBuf {
    repo_root().join("traces/small-2core.trace")
}

/// `run` with its trace replaced by a trace file, widened to its cores.
pub fn on_trace_file(mut run: RunConfig, path: PathBuf) -> RunConfig {
    let cores = cellsim_core::trace::open_trace(&path).unwrap().header().cores;
    run.hierarchy.cores = run.hierarchy.cores.max(cores);
    run.trace = TraceSource::File(path);
    run
}

pub fn rec(gap: u64, op: TraceOp, addr: u64, payload: Option<[u64; 8]>) -> TraceRecord {
    TraceRecord { core: 0, gap_cycles: gap, op, addr, payload }
}

pub fn run_records(run: &RunConfig, records: Vec<TraceRecord>, opts: &SimOptions) -> SimReport {
    let cores = records.iter().map(|r| r.core + 1).max().unwrap_or(1);
    simulate(&run.hierarchy, Catalog::builtin(), cores, records.into_iter().map(Ok), opts).unwrap()
}

/// Energy of one write event, from the per-bit constants.
pub fn event_write_energy(params: &TechParams, charge: WriteCharge) -> u128 {
    let (full, same) = (params.write_aj_per_bit as u128, params.same_bit_write_aj_per_bit as u128);
    match charge {
        WriteCharge::Full => 512 * full,
        WriteCharge::Asymmetric { dissimilar } => dissimilar as u128 * full + (512 - dissimilar as u128) * same,
        WriteCharge::Modeled { similarity_ppm } => {
            let s = similarity_ppm as u128;
            (512 * s * same + 512 * (1_000_000 - s) * full) / 1_000_000
        }
    }
}
