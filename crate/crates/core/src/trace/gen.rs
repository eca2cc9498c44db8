use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{interleave, Interleave, TraceHeader, TraceOp, TraceRecord};
use crate::cache::{Line, ZERO_LINE};
use crate::error::{Error, Result};
use crate::geometry::LINE_BYTES;

/// Each core's copy of a generated trace lives in its own address space,
/// `core << CORE_ADDR_SHIFT` bytes up.
pub const CORE_ADDR_SHIFT: u32 = 40;

#[derive(Clone, Debug, PartialEq)]
pub enum GenKind {
    /// Cyclic sweep over a working set.
    Loop { working_set_bytes: u64, stride: u64, iterations: u64 },
    /// Uniform line addresses in the working set; with probability
    /// `hot_prob` the address is drawn from the first `hot_bytes` instead.
    Random { working_set_bytes: u64, count: u64, hot_bytes: u64, hot_prob: f64 },
    /// Sequential addresses that are never revisited.
    Stream { count: u64, stride: u64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenParams {
    pub kind: GenKind,
    pub write_ratio: f64,
    pub gap_cycles: u64,
    /// Attach payloads: random values on writes, the last written value (zero
    /// initially) on reads.
    pub data: bool,
    pub seed: u64,
}

impl GenParams {
    pub fn new(kind: GenKind) -> GenParams {
        GenParams { kind, write_ratio: 0.0, gap_cycles: 0, data: false, seed: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(0.0..=1.0).contains(&self.write_ratio) {
            return bad(format!("write_ratio {} outside [0, 1]", self.write_ratio));
        }
        match self.kind {
            GenKind::Loop { working_set_bytes, stride, .. } => {
                if stride < LINE_BYTES {
                    return bad(format!("stride {stride} is below the {LINE_BYTES} B line size"));
                }
                if working_set_bytes == 0 {
                    return bad("working set must be non-empty".into());
                }
            }
            GenKind::Random { working_set_bytes, hot_bytes, hot_prob, .. } => {
                if working_set_bytes < LINE_BYTES {
                    return bad("working set must hold at least one line".into());
                }
                if hot_bytes > working_set_bytes {
                    return bad("hot region larger than the working set".into());
                }
                if !(0.0..=1.0).contains(&hot_prob) {
                    return bad(format!("hot_prob {hot_prob} outside [0, 1]"));
                }
                if hot_prob > 0.0 && hot_bytes < LINE_BYTES {
                    return bad("hot region must hold at least one line".into());
                }
            }
            GenKind::Stream { stride, .. } => {
                if stride < LINE_BYTES {
                    return bad(format!("stride {stride} is below the {LINE_BYTES} B line size"));
                }
            }
        }
        Ok(())
    }

    /// Records per core.
    pub fn len(&self) -> u64 {
        match self.kind {
            GenKind::Loop { working_set_bytes, stride, iterations } => working_set_bytes.div_ceil(stride) * iterations,
            GenKind::Random { count, .. } | GenKind::Stream { count, .. } => count,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn header(&self, cores: u32) -> TraceHeader {
        let what = match &self.kind {
            GenKind::Loop { working_set_bytes, stride, iterations } => {
                format!("loop working_set={working_set_bytes} stride={stride} iterations={iterations}")
            }
            GenKind::Random { working_set_bytes, count, hot_bytes, hot_prob } => {
                format!("random working_set={working_set_bytes} count={count} hot_bytes={hot_bytes} hot_prob={hot_prob}")
            }
            GenKind::Stream { count, stride } => format!("stream count={count} stride={stride}"),
        };
        TraceHeader::new(cores, self.data).with_description(format!(
            "{what} write_ratio={} gap={} seed={}",
            self.write_ratio, self.gap_cycles, self.seed
        ))
    }
}

/// Lazy generator for one core.
pub struct TraceGen {
    params: GenParams,
    core: u32,
    rng: ChaCha8Rng,
    index: u64,
    len: u64,
    memory: HashMap<u64, Line>,
}

pub fn generate(params: &GenParams, core: u32) -> Result<TraceGen> {
    params.validate()?;
    Ok(TraceGen {
        params: params.clone(),
        core,
        rng: ChaCha8Rng::seed_from_u64(params.seed),
        index: 0,
        len: params.len(),
        memory: HashMap::new(),
    })
}

/// `cores` copies of the same generated trace, interleaved by issue time.
pub fn generate_cores(
    params: &GenParams,
    cores: u32,
) -> Result<(TraceHeader, Interleave<std::iter::Map<TraceGen, fn(TraceRecord) -> Result<TraceRecord>>>)> {
    let gens = (0..cores)
        .map(|c| Ok(generate(params, c)?.map(Ok as fn(TraceRecord) -> Result<TraceRecord>)))
        .collect::<Result<Vec<_>>>()?;
    Ok((params.header(cores), interleave(gens)))
}

impl TraceGen {
    fn next_offset(&mut self) -> u64 {
        let i = self.index;
        match self.params.kind {
            GenKind::Loop { working_set_bytes, stride, .. } => {
                let per_pass = working_set_bytes.div_ceil(stride);
                (i % per_pass) * stride
            }
            GenKind::Random { working_set_bytes, hot_bytes, hot_prob, .. } => {
                let hot = hot_prob > 0.0 && self.rng.gen_bool(hot_prob);
                let lines = if hot { hot_bytes / LINE_BYTES } else { working_set_bytes / LINE_BYTES };
                self.rng.gen_range(0..lines) * LINE_BYTES
            }
            GenKind::Stream { stride, .. } => i * stride,
        }
    }
}

impl Iterator for TraceGen {
    type Item = TraceRecord;

    fn next(&mut self) -> Option<TraceRecord> {
        if self.index >= self.len {
            return None;
        }
        let addr = self.next_offset() | ((self.core as u64) << CORE_ADDR_SHIFT);
        self.index += 1;
        let write = self.params.write_ratio > 0.0 && self.rng.gen_bool(self.params.write_ratio);
        let op = if write { TraceOp::Write } else { TraceOp::Read };
        let payload = if !self.params.data {
            None
        } else if write {
            let line: Line = self.rng.gen();
            self.memory.insert(addr / LINE_BYTES, line);
            Some(line)
        } else {
            Some(self.memory.get(&(addr / LINE_BYTES)).copied().unwrap_or(ZERO_LINE))
        };
        Some(TraceRecord { core: self.core, gap_cycles: self.params.gap_cycles, op, addr, payload })
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = (self.len - self.index) as usize;
        (n, Some(n))
    }
}
