use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::TraceRecord;
use crate::error::Result;

/// Merges per-core streams by nominal issue time.
///
/// Each record is assumed to take one cycle, so a core's next record issues
/// `gap + 1` cycles after its previous one. Ties go to the lower core id.
/// Records are relabelled with the index of the stream they came from.
pub struct Interleave<I> {
    sources: Vec<I>,
    heads: Vec<Option<TraceRecord>>,
    clocks: Vec<u64>,
    ready: BinaryHeap<Reverse<(u64, u32)>>,
    primed: bool,
    failed: bool,
}

pub fn interleave<I>(sources: Vec<I>) -> Interleave<I>
where
    I: Iterator<Item = Result<TraceRecord>>,
{
    let n = sources.len();
    Interleave {
        sources,
        heads: vec![None; n],
        clocks: vec![0; n],
        ready: BinaryHeap::new(),
        primed: false,
        failed: false,
    }
}

impl<I> Interleave<I>
where
    I: Iterator<Item = Result<TraceRecord>>,
{
    fn pull(&mut self, core: usize) -> Result<()> {
        if let Some(mut r) = self.sources[core].next().transpose()? {
            r.core = core as u32;
            let issue = self.clocks[core] + r.gap_cycles;
            self.heads[core] = Some(r);
            self.ready.push(Reverse((issue, core as u32)));
        }
        Ok(())
    }
}

impl<I> Iterator for Interleave<I>
where
    I: Iterator<Item = Result<TraceRecord>>,
{
    type Item = Result<TraceRecord>;

    fn next(&mut self) -> Option<Result<TraceRecord>> {
        if self.failed {
            return None;
        }
        if !self.primed {
            self.primed = true;
            for c in 0..self.sources.len() {
                if let Err(e) = self.pull(c) {
                    self.failed = true;
                    return Some(Err(e));
                }
            }
        }
        let Reverse((issue, core)) = self.ready.pop()?;
        let c = core as usize;
        let rec = self.heads[c].take().expect("queued core has a head record");
        self.clocks[c] = issue + 1;
        if let Err(e) = self.pull(c) {
            self.failed = true;
            return Some(Err(e));
        }
        Some(Ok(rec))
    }
}
