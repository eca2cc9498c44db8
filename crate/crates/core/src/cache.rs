//! Set-associative cache state.
//!
//! Plain sets use true LRU with a recency stack. Hybrid sets split their ways
//! into a GC prefix and an STT-RAM suffix: a hit in an STT-RAM way swaps the
//! line with the LRU line of the GC ways, and misses always fill into the
//! STT-RAM ways. Every line carries a saturating NRP counter.

use crate::catalog::TechClass;

/// One 512-bit data row.
pub type Line = [u64; 8];

pub const ZERO_LINE: Line = [0; 8];

/// Number of bit positions in which two lines differ.
#[inline]
pub fn dissimilar_bits(a: &Line, b: &Line) -> u32 {
    a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones()).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Op {
    Read,
    Write,
}

/// Technology assignment of the ways of a set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum WayLayout {
    Uniform { tech: TechClass, ways: u16 },
    /// GC ways `0..gc_ways`, STT-RAM ways `gc_ways..gc_ways + stt_ways`.
    Hybrid { gc_ways: u16, stt_ways: u16 },
}

impl WayLayout {
    pub fn ways(&self) -> u16 {
        match *self {
            WayLayout::Uniform { ways, .. } => ways,
            WayLayout::Hybrid { gc_ways, stt_ways } => gc_ways + stt_ways,
        }
    }

    #[inline]
    pub fn tech(&self, way: u16) -> TechClass {
        match *self {
            WayLayout::Uniform { tech, .. } => tech,
            WayLayout::Hybrid { gc_ways, .. } => {
                if way < gc_ways {
                    TechClass::Gc
                } else {
                    TechClass::SttRam
                }
            }
        }
    }

    pub fn is_hybrid(&self) -> bool {
        matches!(self, WayLayout::Hybrid { .. })
    }

    fn is_gc_way(&self, way: u16) -> bool {
        matches!(*self, WayLayout::Hybrid { gc_ways, .. } if way < gc_ways)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CacheLine {
    pub tag: u64,
    pub valid: bool,
    pub dirty: bool,
    pub nrp_counter: u8,
    pub payload: Option<Box<Line>>,
}

impl CacheLine {
    pub fn nrp_reset_on_write(&mut self) {
        self.nrp_counter = 0;
    }

    /// Drops the line. Returns what has to be written back, if anything was
    /// held.
    pub fn nrp_invalidate(&mut self, way: u16) -> Option<Evicted> {
        if !self.valid {
            return None;
        }
        let out = Evicted { way, tag: self.tag, dirty: self.dirty, payload: self.payload.take() };
        *self = CacheLine::default();
        Some(out)
    }

    fn fill(&mut self, tag: u64, dirty: bool, payload: Option<&Line>) {
        self.tag = tag;
        self.valid = true;
        self.dirty = dirty;
        self.nrp_counter = 0;
        self.payload = payload.map(|p| Box::new(*p));
    }

    fn write(&mut self, payload: Option<&Line>) {
        self.dirty = true;
        self.nrp_counter = 0;
        if let Some(p) = payload {
            match &mut self.payload {
                Some(b) => **b = *p,
                None => self.payload = Some(Box::new(*p)),
            }
        }
    }
}

/// A line that left its way (eviction or NRP invalidation).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Evicted {
    pub way: u16,
    pub tag: u64,
    pub dirty: bool,
    pub payload: Option<Box<Line>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Outcome {
    HitGcWay,
    HitSttWay,
    Hit,
    Miss,
}

impl Outcome {
    pub fn is_hit(self) -> bool {
        !matches!(self, Outcome::Miss)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AccessResult {
    pub outcome: Outcome,
    /// Way holding the accessed line afterwards.
    pub way: u16,
    /// Line displaced by a fill (clean or dirty).
    pub victim: Option<Evicted>,
    /// `(from_way, to_way)` moves made by a hybrid swap.
    pub promotions: Vec<(u16, u16)>,
    /// Operation and technology of the way that served the access.
    pub latency_class: (Op, TechClass),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SetState {
    ways: Vec<CacheLine>,
    /// Permutation of way indices, front = MRU.
    stack: Vec<u16>,
    layout: WayLayout,
}

impl SetState {
    pub fn new(layout: WayLayout) -> SetState {
        let n = layout.ways();
        assert!(n > 0, "a set needs at least one way");
        if let WayLayout::Hybrid { gc_ways, stt_ways } = layout {
            assert!(gc_ways > 0 && stt_ways > 0, "hybrid sets need both GC and STT-RAM ways");
        }
        SetState { ways: vec![CacheLine::default(); n as usize], stack: (0..n).collect(), layout }
    }

    pub fn layout(&self) -> WayLayout {
        self.layout
    }

    pub fn line(&self, way: u16) -> &CacheLine {
        &self.ways[way as usize]
    }

    pub fn line_mut(&mut self, way: u16) -> &mut CacheLine {
        &mut self.ways[way as usize]
    }

    pub fn lines(&self) -> &[CacheLine] {
        &self.ways
    }

    /// Way indices from most to least recently used.
    pub fn recency(&self) -> &[u16] {
        &self.stack
    }

    pub fn lookup(&self, tag: u64) -> Option<u16> {
        self.ways.iter().position(|l| l.valid && l.tag == tag).map(|w| w as u16)
    }

    pub fn access(&mut self, op: Op, tag: u64, payload: Option<&Line>, promote_mru: bool) -> AccessResult {
        if self.layout.is_hybrid() {
            self.access_hybrid(op, tag, payload, promote_mru)
        } else {
            self.access_plain(op, tag, payload)
        }
    }

    /// LRU access: hits move to MRU, misses replace an invalid way or the LRU
    /// way and fill at MRU.
    pub fn access_plain(&mut self, op: Op, tag: u64, payload: Option<&Line>) -> AccessResult {
        debug_assert!(!self.layout.is_hybrid());
        if let Some(way) = self.lookup(tag) {
            self.touch(way);
            if op == Op::Write {
                self.ways[way as usize].write(payload);
            }
            return AccessResult {
                outcome: Outcome::Hit,
                way,
                victim: None,
                promotions: Vec::new(),
                latency_class: (op, self.layout.tech(way)),
            };
        }
        let way = self.pick_victim(|_| true);
        let victim = self.take_line(way);
        self.ways[way as usize].fill(tag, op == Op::Write, payload);
        self.touch(way);
        AccessResult {
            outcome: Outcome::Miss,
            way,
            victim,
            promotions: Vec::new(),
            latency_class: (op, self.layout.tech(way)),
        }
    }

    /// GC/STT-RAM hybrid access.
    ///
    /// * GC hit: served in place, recency updated.
    /// * STT-RAM hit: the line moves into the GC victim way (an invalid GC
    ///   way, else the GC LRU way) and is placed at the GC LRU position (MRU
    ///   with `promote_mru`); the displaced GC line takes the vacated
    ///   STT-RAM way at the STT-RAM LRU position. Nothing leaves the set.
    /// * Miss: the line fills the STT-RAM victim way at the STT-RAM LRU
    ///   position.
    pub fn access_hybrid(&mut self, op: Op, tag: u64, payload: Option<&Line>, promote_mru: bool) -> AccessResult {
        debug_assert!(self.layout.is_hybrid());
        if let Some(way) = self.lookup(tag) {
            if self.layout.is_gc_way(way) {
                self.touch(way);
                if op == Op::Write {
                    self.ways[way as usize].write(payload);
                }
                return AccessResult {
                    outcome: Outcome::HitGcWay,
                    way,
                    victim: None,
                    promotions: Vec::new(),
                    latency_class: (op, TechClass::Gc),
                };
            }
            let layout = self.layout;
            let gc = self.pick_victim(|w| layout.is_gc_way(w));
            self.ways.swap(way as usize, gc as usize);
            // the promoted line is rewritten into a GC way
            self.ways[gc as usize].nrp_counter = 0;
            if op == Op::Write {
                self.ways[gc as usize].write(payload);
            }
            let mut promotions = vec![(way, gc)];
            if self.ways[way as usize].valid {
                promotions.push((gc, way));
            }
            if promote_mru {
                self.touch(gc);
            } else {
                self.demote(gc);
            }
            self.demote(way);
            return AccessResult {
                outcome: Outcome::HitSttWay,
                way: gc,
                victim: None,
                promotions,
                latency_class: (op, TechClass::SttRam),
            };
        }
        let layout = self.layout;
        let way = self.pick_victim(|w| !layout.is_gc_way(w));
        let victim = self.take_line(way);
        self.ways[way as usize].fill(tag, op == Op::Write, payload);
        self.demote(way);
        AccessResult {
            outcome: Outcome::Miss,
            way,
            victim,
            promotions: Vec::new(),
            latency_class: (op, TechClass::SttRam),
        }
    }

    /// One NRP epoch: every valid line of a dynamic-technology way ages by
    /// one, saturating at `threshold`; lines that reach it are invalidated
    /// and returned (the caller writes back the dirty ones).
    pub fn nrp_tick(&mut self, threshold: u8) -> Vec<Evicted> {
        let mut out = Vec::new();
        for (w, line) in self.ways.iter_mut().enumerate() {
            if !line.valid || !self.layout.tech(w as u16).is_dynamic() {
                continue;
            }
            line.nrp_counter = line.nrp_counter.saturating_add(1).min(threshold);
            if line.nrp_counter >= threshold {
                if let Some(e) = line.nrp_invalidate(w as u16) {
                    out.push(e);
                }
            }
        }
        out
    }

    /// Way a miss would fill right now.
    pub fn fill_way(&self) -> u16 {
        let layout = self.layout;
        self.pick_victim(|w| !layout.is_gc_way(w))
    }

    pub fn valid_lines(&self) -> usize {
        self.ways.iter().filter(|l| l.valid).count()
    }

    fn take_line(&mut self, way: u16) -> Option<Evicted> {
        let line = &mut self.ways[way as usize];
        if !line.valid {
            return None;
        }
        Some(Evicted { way, tag: line.tag, dirty: line.dirty, payload: line.payload.take() })
    }

    /// Lowest-index invalid way among `eligible`, else the eligible way
    /// deepest in the recency stack.
    fn pick_victim(&self, eligible: impl Fn(u16) -> bool) -> u16 {
        if let Some(w) = (0..self.ways.len() as u16).find(|&w| eligible(w) && !self.ways[w as usize].valid) {
            return w;
        }
        *self
            .stack
            .iter()
            .rev()
            .find(|&&w| eligible(w))
            .expect("victim class has at least one way")
    }

    fn touch(&mut self, way: u16) {
        let pos = self.stack.iter().position(|&w| w == way).unwrap();
        self.stack[..=pos].rotate_right(1);
    }

    fn demote(&mut self, way: u16) {
        let pos = self.stack.iter().position(|&w| w == way).unwrap();
        self.stack[pos..].rotate_left(1);
    }
}
