//! Trace-driven hierarchy simulation.
//!
//! Each core owns an L1I, an L1D and an L2; all cores share the LLC. Cores
//! are blocking and in order: a record issues `gap` cycles after the
//! previous record of its core completed, and the core with the earliest
//! issue time goes next (ties to the lower core id). An access pays the
//! lookup latency of every level it visits, then 100 ns of DRAM if it
//! misses everywhere. Refresh slots and pending array writes can delay the
//! lookup. Missed levels are filled when the access completes; dirty victims
//! are written back off the critical path, allocating without a fetch where
//! they miss. The hierarchy is non-inclusive and write-allocate.

use std::collections::{HashSet, VecDeque};

use crate::cache::{Evicted, Line, Op, Outcome, SetState, WayLayout};
use crate::catalog::{Catalog, DramParams, TechClass, TechParams};
use crate::config::{HierarchyConfig, LevelSpec, LevelTech, RunConfig, TraceSource};
use crate::energy::{resolve_write_charge, EnergyLedger, LevelKind, WblShadow};
use crate::error::{Error, Result};
use crate::geometry::{plan_subarrays, CacheGeometry, SubarrayPlan, ROW_BITS};
use crate::refresh::RefreshSchedule;
use crate::report::{LevelInfo, LevelStats, SimReport};
use crate::trace::{generate_cores, open_trace, TraceOp, TraceRecord};
use crate::units::{cycles_to_ps, cycles_to_ps_ceil, ps_to_cycles_ceil, Ps};

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SimOptions {
    /// Keep every priced action in the ledger.
    pub event_log: bool,
    /// Simulated time is at least this long (idle time still leaks and
    /// refreshes).
    pub min_duration_ps: Option<Ps>,
}

#[derive(Clone, Copy, Debug, Default)]
struct Occupancy {
    busy_until: Ps,
    /// `(issue, write latency)` of a write that may still overlap a read.
    pending: Option<(Ps, Ps)>,
}

#[derive(Clone, Debug)]
struct Nrp {
    epoch_ps: Ps,
    next_tick: u64,
    threshold: u8,
    ghosts: HashSet<(u64, u64)>,
}

/// A line leaving an array, with its byte address.
struct Victim {
    addr: u64,
    line: Evicted,
}

struct DemandOutcome {
    hit: bool,
    latency_cycles: u64,
    /// Subarray and way of the fill, which completes with the access.
    fill: Option<(u64, u16)>,
    victim: Option<Victim>,
}

struct Array {
    kind: LevelKind,
    spec: LevelSpec,
    geom: CacheGeometry,
    plan: SubarrayPlan,
    layout: WayLayout,
    sets: Vec<SetState>,
    main: TechParams,
    stt: Option<TechParams>,
    refresh: Option<RefreshSchedule>,
    shadow: Option<WblShadow>,
    occupancy: Vec<Occupancy>,
    written_at: Vec<Ps>,
    base_retention_ps: Option<Ps>,
    nrp: Option<Nrp>,
    overlap_window_ps: Ps,
    clock_mhz: u32,
    stats: LevelStats,
}

impl Array {
    fn new(kind: LevelKind, spec: &LevelSpec, catalog: &Catalog, clock_mhz: u32, seed: u64) -> Result<Array> {
        let (main, stt) = spec.params(kind, catalog, clock_mhz)?;
        let geom = spec.geometry;
        let plan = plan_subarrays(&geom);
        let ways = geom.associativity() as u16;
        let layout = match spec.tech {
            LevelTech::Uniform(tech) => WayLayout::Uniform { tech, ways },
            LevelTech::Hybrid { gc_ways, stt_ways } => WayLayout::Hybrid { gc_ways, stt_ways },
        };
        let dynamic_subarrays = match spec.tech {
            LevelTech::Uniform(t) if t.is_dynamic() => plan.total_subarrays(),
            LevelTech::Uniform(_) => 0,
            LevelTech::Hybrid { gc_ways, .. } => gc_ways as u64 * plan.subarrays_per_way,
        };
        let decoupled = spec.tech.has_gc_ways();
        let refresh = match main.refresh {
            Some(r) if dynamic_subarrays > 0 && !spec.nrp => {
                let s = RefreshSchedule::new(
                    plan,
                    dynamic_subarrays,
                    r,
                    decoupled,
                    spec.synchronized_subarrays,
                    spec.refresh_interval_multiplier,
                );
                Some(match &spec.bins {
                    Some(b) => s.apply_bins(b, seed ^ kind.index() as u64),
                    None => s,
                })
            }
            _ => None,
        };
        let nrp = match main.refresh {
            Some(r) if spec.nrp => Some(Nrp {
                epoch_ps: (r.retention_ps >> spec.nrp_counter_bits).max(1),
                next_tick: 1,
                threshold: spec.nrp_threshold(),
                ghosts: HashSet::new(),
            }),
            _ => None,
        };
        let window_cycles = spec.overlap_window_cycles.unwrap_or(main.write_latency_cycles) as u64;
        Ok(Array {
            kind,
            spec: spec.clone(),
            geom,
            plan,
            layout,
            sets: (0..geom.sets()).map(|_| SetState::new(layout)).collect(),
            main,
            stt,
            refresh,
            shadow: spec.asymmetric_writes.then(|| WblShadow::new(plan.total_subarrays())),
            occupancy: vec![Occupancy::default(); plan.total_subarrays() as usize],
            written_at: vec![0; (geom.sets() * ways as u64) as usize],
            base_retention_ps: main.refresh.map(|r| r.retention_ps),
            nrp,
            overlap_window_ps: cycles_to_ps_ceil(window_cycles, clock_mhz),
            clock_mhz,
            stats: LevelStats::default(),
        })
    }

    fn info(&self) -> LevelInfo {
        LevelInfo {
            tech: self.spec.tech.name(),
            capacity_bytes: self.geom.capacity_bytes(),
            ways: self.geom.associativity(),
            node_nm: self.spec.node.nm(),
            read_latency_cycles: self.main.read_latency_cycles,
        }
    }

    fn params(&self, tech: TechClass) -> &TechParams {
        match (&self.stt, tech) {
            (Some(stt), TechClass::SttRam) => stt,
            _ => &self.main,
        }
    }

    fn way_params(&self, way: u16) -> &TechParams {
        self.params(self.layout.tech(way))
    }

    fn subarray(&self, set: u64, way: u16) -> u64 {
        self.plan.locate_unchecked(set, way as u32).0
    }

    fn slot(&self, set: u64, way: u16) -> usize {
        (set * self.geom.associativity() as u64 + way as u64) as usize
    }

    fn overlap_enabled(&self, way: u16) -> bool {
        self.spec.overlap && self.layout.tech(way).decoupled_bitlines()
    }

    /// Delay before a demand access to `sub` at `t` may use the array.
    fn access_delay(&mut self, sub: u64, way: u16, op: Op, t: Ps) -> Ps {
        let mut at = t;
        if let Some(r) = &mut self.refresh {
            if let Some(d) = r.collides(sub, op, t) {
                self.stats.refresh_collisions += 1;
                self.stats.refresh_delay_ps += d;
                at += d;
            }
        }
        let window = self.overlap_window_ps;
        let overlap = self.overlap_enabled(way);
        let occ = &mut self.occupancy[sub as usize];
        let mut overlapped = false;
        if let Some((issue, wl)) = occ.pending {
            if op == Op::Read && overlap && at >= issue && at <= issue + window {
                self.stats.writes_overlapped += 1;
                occ.pending = None;
                overlapped = true;
            } else if op == Op::Write || at > issue + window {
                self.stats.writes_serialized += 1;
                occ.busy_until = occ.busy_until.max(issue) + wl;
                occ.pending = None;
            }
        }
        if !overlapped && at < occ.busy_until {
            self.stats.occupancy_delay_ps += occ.busy_until - at;
            at = occ.busy_until;
        }
        at - t
    }

    /// Occupies `sub` with a row write issued at `t`.
    fn register_write(&mut self, sub: u64, way: u16, t: Ps) {
        let wl = self.way_params(way).write_latency_ps;
        let overlap = self.overlap_enabled(way);
        let occ = &mut self.occupancy[sub as usize];
        if overlap {
            if let Some((issue, pwl)) = occ.pending.take() {
                self.stats.writes_serialized += 1;
                occ.busy_until = occ.busy_until.max(issue) + pwl;
            }
            occ.pending = Some((t, wl));
        } else {
            occ.busy_until = occ.busy_until.max(t) + wl;
        }
    }

    /// Occupancy of a write off the critical path, finishing by `end`.
    fn register_write_ending(&mut self, sub: u64, way: u16, end: Ps) {
        let wl = self.way_params(way).write_latency_ps;
        self.register_write(sub, way, end.saturating_sub(wl));
    }

    /// Resolves writes still waiting for a read.
    fn drain_pending(&mut self) {
        for occ in &mut self.occupancy {
            if occ.pending.take().is_some() {
                self.stats.writes_serialized += 1;
            }
        }
    }

    fn charge_write(
        &mut self,
        set: u64,
        way: u16,
        payload: Option<&Line>,
        fill: bool,
        victim_payload: Option<&Line>,
        t: Ps,
        ledger: &mut EnergyLedger,
    ) -> Result<()> {
        let tech = self.layout.tech(way);
        let sub = self.subarray(set, way);
        let reference = if fill && self.spec.compare_victim_on_fill { victim_payload } else { None };
        let charge = resolve_write_charge(
            self.spec.asymmetric_writes,
            tech,
            payload,
            self.shadow.as_mut().map(|s| (s, sub)),
            reference,
            self.spec.write_similarity_ppm,
            self.kind,
        )?;
        let p = *self.params(tech);
        ledger.charge_write(self.kind, &p, fill, charge);
        let slot = self.slot(set, way);
        self.written_at[slot] = t;
        Ok(())
    }

    /// Checks that a line about to be read has not outlived its retention.
    fn check_retention(&mut self, set: u64, way: u16, t: Ps) {
        if !self.layout.tech(way).is_dynamic() {
            return;
        }
        let Some(base) = self.base_retention_ps else { return };
        let (sub, row) = self.plan.locate_unchecked(set, way as u32);
        let mut last = self.written_at[self.slot(set, way)];
        let mut retention = base;
        if let Some(r) = &self.refresh {
            if let Some(rt) = r.last_refresh(sub, row, t) {
                last = last.max(rt);
            }
            retention = r.row_retention_ps(sub, row);
        }
        if t.saturating_sub(last) > retention {
            if self.nrp.is_some() {
                self.stats.nrp_safety_violations += 1;
            } else {
                self.stats.freshness_violations += 1;
            }
        }
    }

    fn victim(&mut self, set: u64, e: Option<Evicted>) -> Option<Victim> {
        let e = e?;
        self.stats.evictions += 1;
        if e.dirty {
            self.stats.dirty_evictions += 1;
        }
        Some(Victim { addr: self.geom.line_addr(e.tag, set), line: e })
    }

    fn forget_ghost(&mut self, set: u64, tag: u64, demand_miss: bool) {
        if let Some(n) = &mut self.nrp {
            if n.ghosts.remove(&(set, tag)) && demand_miss {
                self.stats.nrp_misses += 1;
            }
        }
    }

    /// Energy of an STT-RAM hit's swap: the promoted line is written into
    /// its GC way and the displaced GC line into the vacated STT-RAM way.
    fn charge_swap(&mut self, set: u64, gc_way: u16, promotions: &[(u16, u16)], t: Ps, ledger: &mut EnergyLedger) -> Result<()> {
        self.stats.promotions += 1;
        let promoted = self.sets[set as usize].line(gc_way).payload.as_deref().copied();
        self.charge_write(set, gc_way, promoted.as_ref(), false, None, t, ledger)?;
        let sub = self.subarray(set, gc_way);
        self.register_write_ending(sub, gc_way, t);
        if let Some(&(_, stt_way)) = promotions.get(1) {
            self.stats.demotions += 1;
            let demoted = self.sets[set as usize].line(stt_way).payload.as_deref().copied();
            self.charge_write(set, stt_way, demoted.as_ref(), false, None, t, ledger)?;
            let sub = self.subarray(set, stt_way);
            self.register_write_ending(sub, stt_way, t);
        }
        Ok(())
    }

    /// A demand lookup (read, or a store at the L1D).
    fn demand(&mut self, op: Op, addr: u64, payload: Option<&Line>, t: Ps, ledger: &mut EnergyLedger) -> Result<DemandOutcome> {
        let (tag, set) = self.geom.index(addr);
        let present = self.sets[set as usize].lookup(tag);
        let probe_way = present.unwrap_or(0);
        let sub = self.subarray(set, probe_way);
        let delay = self.access_delay(sub, probe_way, op, t);
        let at = t + delay;
        if let (Some(w), Op::Read) = (present, op) {
            self.check_retention(set, w, at);
        }
        let victim_payload = match present {
            None if self.spec.compare_victim_on_fill => {
                let s = &self.sets[set as usize];
                let l = s.line(s.fill_way());
                l.payload.as_deref().copied().filter(|_| l.valid)
            }
            _ => None,
        };
        let res = self.sets[set as usize].access(op, tag, payload, self.spec.hybrid_promote_mru);
        self.stats.lookups += 1;
        self.stats.demand_lookups += 1;
        let delay_cycles = ps_to_cycles_ceil(delay, self.clock_mhz);
        let mut out = DemandOutcome { hit: res.outcome.is_hit(), latency_cycles: 0, fill: None, victim: None };
        match res.outcome {
            Outcome::Hit | Outcome::HitGcWay => {
                self.stats.hits += 1;
                self.stats.demand_hits += 1;
                if res.outcome == Outcome::HitGcWay {
                    self.stats.gc_way_hits += 1;
                }
                let p = *self.way_params(res.way);
                if op == Op::Read {
                    ledger.charge_read(self.kind, &p);
                    if self.spec.nrp_read_resets {
                        self.sets[set as usize].line_mut(res.way).nrp_reset_on_write();
                    }
                    out.latency_cycles = p.read_latency_cycles as u64;
                } else {
                    self.charge_write(set, res.way, payload, false, None, at, ledger)?;
                    self.register_write(sub, res.way, at);
                    out.latency_cycles = p.write_latency_cycles as u64;
                }
            }
            Outcome::HitSttWay => {
                self.stats.hits += 1;
                self.stats.demand_hits += 1;
                self.stats.stt_way_hits += 1;
                let stt = *self.params(TechClass::SttRam);
                ledger.charge_read(self.kind, &stt);
                out.latency_cycles = stt.read_latency_cycles as u64;
                self.charge_swap(set, res.way, &res.promotions, at, ledger)?;
            }
            Outcome::Miss => {
                self.stats.misses += 1;
                self.stats.demand_misses += 1;
                self.stats.fills += 1;
                self.forget_ghost(set, tag, true);
                let main = self.main;
                ledger.charge_read(self.kind, &main);
                out.latency_cycles = main.read_latency_cycles as u64;
                self.charge_write(set, res.way, payload, true, victim_payload.as_ref(), at, ledger)?;
                out.fill = Some((self.subarray(set, res.way), res.way));
                out.victim = self.victim(set, res.victim);
            }
        }
        out.latency_cycles += delay_cycles;
        Ok(out)
    }

    /// A dirty line arriving from the level above.
    fn writeback(&mut self, addr: u64, payload: Option<&Line>, t: Ps, ledger: &mut EnergyLedger) -> Result<Option<Victim>> {
        let (tag, set) = self.geom.index(addr);
        let res = self.sets[set as usize].access(Op::Write, tag, payload, self.spec.hybrid_promote_mru);
        self.stats.lookups += 1;
        self.stats.writeback_lookups += 1;
        match res.outcome {
            Outcome::Hit | Outcome::HitGcWay => {
                self.stats.hits += 1;
                self.stats.writeback_hits += 1;
                if res.outcome == Outcome::HitGcWay {
                    self.stats.gc_way_hits += 1;
                }
                self.charge_write(set, res.way, payload, false, None, t, ledger)?;
                let sub = self.subarray(set, res.way);
                self.register_write_ending(sub, res.way, t);
                Ok(None)
            }
            Outcome::HitSttWay => {
                self.stats.hits += 1;
                self.stats.writeback_hits += 1;
                self.stats.stt_way_hits += 1;
                self.charge_swap(set, res.way, &res.promotions, t, ledger)?;
                Ok(None)
            }
            Outcome::Miss => {
                self.stats.misses += 1;
                self.stats.writeback_misses += 1;
                self.forget_ghost(set, tag, false);
                self.charge_write(set, res.way, payload, false, None, t, ledger)?;
                let sub = self.subarray(set, res.way);
                self.register_write_ending(sub, res.way, t);
                Ok(self.victim(set, res.victim))
            }
        }
    }

    /// Runs NRP epochs up to `t`. Returns the dirty lines invalidated, with
    /// the time of the epoch that dropped them.
    fn nrp_advance(&mut self, t: Ps) -> Vec<(Ps, Victim)> {
        let mut out = Vec::new();
        let Some(n) = &mut self.nrp else { return out };
        while n.next_tick * n.epoch_ps <= t {
            let at = n.next_tick * n.epoch_ps;
            n.next_tick += 1;
            self.stats.nrp_ticks += 1;
            for (set, s) in self.sets.iter_mut().enumerate() {
                for e in s.nrp_tick(n.threshold) {
                    self.stats.nrp_invalidations += 1;
                    n.ghosts.insert((set as u64, e.tag));
                    if e.dirty {
                        self.stats.nrp_dirty_invalidations += 1;
                        out.push((at, Victim { addr: self.geom.line_addr(e.tag, set as u64), line: e }));
                    }
                }
            }
        }
        out
    }

    fn finish(&mut self, end: Ps, ledger: &mut EnergyLedger) {
        self.drain_pending();
        if let Some(r) = &self.refresh {
            let rows = r.count_until(end);
            self.stats.refresh_rows += rows;
            let p = self.main;
            ledger.charge_refresh(self.kind, &p, rows);
        }
        let sets = self.geom.sets();
        match self.layout {
            WayLayout::Uniform { ways, .. } => {
                let p = self.main;
                ledger.charge_leakage(self.kind, &p, sets * ways as u64 * ROW_BITS, end);
            }
            WayLayout::Hybrid { gc_ways, stt_ways } => {
                let gc = self.main;
                let stt = self.stt.expect("hybrid has STT-RAM params");
                ledger.charge_leakage(self.kind, &gc, sets * gc_ways as u64 * ROW_BITS, end);
                ledger.charge_leakage(self.kind, &stt, sets * stt_ways as u64 * ROW_BITS, end);
            }
        }
    }
}

const L1I: usize = 0;
const L1D: usize = 1;
const L2: usize = 2;

/// One configured hierarchy, ready to consume records.
pub struct Simulator {
    clock_mhz: u32,
    dram: DramParams,
    dram_cycles: u64,
    private: Vec<[Array; 3]>,
    llc: Array,
    ledger: EnergyLedger,
    clocks: Vec<u64>,
    report: SimReport,
    options: SimOptions,
}

impl Simulator {
    pub fn new(config: &HierarchyConfig, catalog: &Catalog, options: SimOptions) -> Result<Simulator> {
        config.validate(catalog)?;
        let clock = config.clock_mhz;
        let mut private = Vec::with_capacity(config.cores as usize);
        for core in 0..config.cores as u64 {
            let seed = config.seed.wrapping_add(core << 8);
            private.push([
                Array::new(LevelKind::L1I, config.level(LevelKind::L1I), catalog, clock, seed)?,
                Array::new(LevelKind::L1D, config.level(LevelKind::L1D), catalog, clock, seed)?,
                Array::new(LevelKind::L2, config.level(LevelKind::L2), catalog, clock, seed)?,
            ]);
        }
        let llc = Array::new(LevelKind::Llc, config.level(LevelKind::Llc), catalog, clock, config.seed)?;
        let dram = catalog.dram();
        Ok(Simulator {
            clock_mhz: clock,
            dram,
            dram_cycles: dram.latency_cycles(clock),
            private,
            llc,
            ledger: if options.event_log { EnergyLedger::with_event_log() } else { EnergyLedger::new() },
            clocks: vec![0; config.cores as usize],
            report: SimReport { cores: config.cores, clock_mhz: clock, ..SimReport::default() },
            options,
        })
    }

    /// Simulates every record of a trace whose header declares
    /// `trace_cores` cores.
    pub fn run<I>(mut self, trace_cores: u32, records: I) -> Result<SimReport>
    where
        I: IntoIterator<Item = Result<TraceRecord>>,
    {
        let cores = self.private.len();
        if trace_cores as usize > cores {
            return Err(Error::Config(format!(
                "cores: the trace has {trace_cores} cores but the hierarchy only {cores}"
            )));
        }
        let active = trace_cores.max(1) as usize;
        let mut queues: Vec<VecDeque<TraceRecord>> = vec![VecDeque::new(); cores];
        let mut input = records.into_iter();
        let mut eof = false;
        loop {
            while !eof && queues[..active].iter().any(VecDeque::is_empty) {
                match input.next() {
                    None => eof = true,
                    Some(r) => {
                        let r = r?;
                        if r.core as usize >= active {
                            return Err(Error::Config(format!("record for core {} outside the trace's cores", r.core)));
                        }
                        queues[r.core as usize].push_back(r);
                    }
                }
            }
            let next = (0..cores)
                .filter_map(|c| queues[c].front().map(|r| (self.clocks[c] + r.gap_cycles, c)))
                .min();
            let Some((issue, core)) = next else { break };
            let rec = queues[core].pop_front().expect("front exists");
            self.step(core, issue, &rec)?;
        }
        self.finish()
    }

    fn step(&mut self, core: usize, issue: u64, rec: &TraceRecord) -> Result<()> {
        let t0 = cycles_to_ps(issue, self.clock_mhz);
        self.advance_nrp(core, t0)?;
        let (l1, op) = match rec.op {
            TraceOp::Read => {
                self.report.reads += 1;
                (L1D, Op::Read)
            }
            TraceOp::Write => {
                self.report.writes += 1;
                (L1D, Op::Write)
            }
            TraceOp::Ifetch => {
                self.report.ifetches += 1;
                (L1I, Op::Read)
            }
        };
        self.report.records += 1;
        let payload = rec.payload.as_ref();
        let mut cycles = 0u64;
        let mut fills: Vec<(usize, u64, u16)> = Vec::new();
        let mut victims: Vec<(usize, Victim)> = Vec::new();
        let mut hit = false;
        let l1_hit_cycles = self.private[core][l1].main.read_latency_cycles as u64;
        for (i, level) in [l1, L2, 3].into_iter().enumerate() {
            let t = cycles_to_ps(issue + cycles, self.clock_mhz);
            let level_op = if i == 0 { op } else { Op::Read };
            let arr = if level == 3 { &mut self.llc } else { &mut self.private[core][level] };
            let o = arr.demand(level_op, rec.addr, payload, t, &mut self.ledger)?;
            cycles += o.latency_cycles;
            if let Some((sub, way)) = o.fill {
                fills.push((level, sub, way));
            }
            if let Some(v) = o.victim {
                victims.push((level, v));
            }
            if o.hit {
                hit = true;
                break;
            }
        }
        if !hit {
            cycles += self.dram_cycles;
            self.ledger.charge_dram_read(&self.dram);
        }
        let done = issue + cycles;
        let t_done = cycles_to_ps(done, self.clock_mhz);
        for &(level, sub, way) in fills.iter().rev() {
            let arr = if level == 3 { &mut self.llc } else { &mut self.private[core][level] };
            arr.register_write_ending(sub, way, t_done);
        }
        for (level, v) in victims.into_iter().rev() {
            self.write_back(core, level, v, t_done)?;
        }
        self.report.memory_cycles += cycles;
        self.report.stall_cycles += cycles.saturating_sub(l1_hit_cycles);
        debug_assert!(done >= self.clocks[core]);
        self.clocks[core] = done;
        Ok(())
    }

    /// Sends a line evicted from `from` (array index, 3 = LLC) down the
    /// hierarchy. Clean lines are dropped.
    fn write_back(&mut self, core: usize, from: usize, v: Victim, t: Ps) -> Result<()> {
        let mut from = from;
        let mut v = v;
        loop {
            if !v.line.dirty {
                return Ok(());
            }
            let src = if from == 3 { &mut self.llc } else { &mut self.private[core][from] };
            src.stats.writebacks_out += 1;
            let payload = v.line.payload.as_deref().copied();
            let next = match from {
                L1I | L1D => L2,
                L2 => 3,
                _ => {
                    self.ledger.charge_dram_write(&self.dram);
                    return Ok(());
                }
            };
            let dst = if next == 3 { &mut self.llc } else { &mut self.private[core][next] };
            match dst.writeback(v.addr, payload.as_ref(), t, &mut self.ledger)? {
                Some(nv) => {
                    from = next;
                    v = nv;
                }
                None => return Ok(()),
            }
        }
    }

    fn advance_nrp(&mut self, core: usize, t: Ps) -> Result<()> {
        for (at, v) in self.llc.nrp_advance(t) {
            self.write_back(core, 3, v, at)?;
        }
        for level in [L2, L1D, L1I] {
            for (at, v) in self.private[core][level].nrp_advance(t) {
                self.write_back(core, level, v, at)?;
            }
        }
        Ok(())
    }

    fn finish(mut self) -> Result<SimReport> {
        let last = self.clocks.iter().copied().max().unwrap_or(0);
        let mut end = cycles_to_ps(last, self.clock_mhz);
        if let Some(d) = self.options.min_duration_ps {
            end = end.max(d);
        }
        for core in 0..self.private.len() {
            self.advance_nrp(core, end)?;
        }
        let mut levels = [LevelStats::default(); 4];
        let mut info: [LevelInfo; 4] = Default::default();
        for arrays in &mut self.private {
            for a in arrays.iter_mut() {
                a.finish(end, &mut self.ledger);
                levels[a.kind.index()].merge(&a.stats);
                info[a.kind.index()] = a.info();
            }
        }
        self.llc.finish(end, &mut self.ledger);
        levels[LevelKind::Llc.index()].merge(&self.llc.stats);
        info[LevelKind::Llc.index()] = self.llc.info();
        let mut r = self.report;
        r.levels = levels;
        r.info = info;
        r.total_time_ps = end;
        r.ledger = self.ledger;
        r.finish();
        Ok(r)
    }
}

/// Simulates `records` on `config`.
pub fn simulate<I>(
    config: &HierarchyConfig,
    catalog: &Catalog,
    trace_cores: u32,
    records: I,
    options: &SimOptions,
) -> Result<SimReport>
where
    I: IntoIterator<Item = Result<TraceRecord>>,
{
    Simulator::new(config, catalog, options.clone())?.run(trace_cores, records)
}

/// Simulates a complete run description, generating or opening its trace.
pub fn simulate_run(run: &RunConfig, catalog: &Catalog, options: &SimOptions) -> Result<SimReport> {
    let mut report = match &run.trace {
        TraceSource::Generated(g) => {
            let (header, records) = generate_cores(g, run.hierarchy.cores)?;
            simulate(&run.hierarchy, catalog, header.cores, records, options)?
        }
        TraceSource::File(path) => {
            let stream = open_trace(path)?;
            let cores = stream.header().cores;
            simulate(&run.hierarchy, catalog, cores, stream, options)?
        }
    };
    report.label = run.label.clone();
    Ok(report)
}

/// Runs independent simulations in parallel, one thread per run. Results
/// come back in input order.
pub fn run_sweep(runs: &[RunConfig], catalog: &Catalog, options: &SimOptions) -> Vec<Result<SimReport>> {
    std::thread::scope(|s| {
        let handles: Vec<_> = runs
            .iter()
            .map(|run| s.spawn(move || simulate_run(run, catalog, options)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Error::Config("simulation thread panicked".into()))))
            .collect()
    })
}
