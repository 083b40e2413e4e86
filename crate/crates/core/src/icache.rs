//! Set-associative instruction cache model.
//!
//! The cache is read-only from the core's point of view. Lines are replaced
//! with true LRU per set, and misses are tracked in a small table of pending
//! fills (MSHR entries). A victim way is reserved as soon as its fill starts,
//! so an in-flight fill can never be evicted.

use crate::error::{Result, SimError};

/// Geometry and timing of one instruction cache instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CacheConfig {
    pub sets: usize,
    pub ways: usize,
    /// Block size in bytes.
    pub block_size: u64,
    /// Lookups served per cycle, per bank.
    pub ports: usize,
    pub banks: usize,
    pub hit_latency: u64,
    /// Cycles to fill a block from the next level.
    pub miss_latency: u64,
    /// Outstanding fills allowed per cache.
    pub mshr_entries: usize,
    pub address_bits: u32,
}

impl Default for CacheConfig {
    /// Fermi-class L1 instruction cache: 4 sets, 4 ways, 128 B blocks.
    fn default() -> Self {
        CacheConfig {
            sets: 4,
            ways: 4,
            block_size: 128,
            ports: 1,
            banks: 1,
            hit_latency: 0,
            miss_latency: 10,
            mshr_entries: 1,
            address_bits: 32,
        }
    }
}

/// Fields of an address as seen by one cache geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AddressParts {
    pub tag: u64,
    pub set_index: usize,
    pub block_offset: u64,
    pub bank_index: usize,
}

impl CacheConfig {
    pub fn validate(&self) -> Result<()> {
        fn pow2(name: &str, v: u64) -> Result<()> {
            if v == 0 || !v.is_power_of_two() {
                return Err(SimError::config(format!(
                    "{name} must be a positive power of two, got {v}"
                )));
            }
            Ok(())
        }
        fn positive(name: &str, v: u64) -> Result<()> {
            if v == 0 {
                return Err(SimError::config(format!("{name} must be at least 1")));
            }
            Ok(())
        }
        pow2("sets", self.sets as u64)?;
        pow2("block_size", self.block_size)?;
        pow2("banks", self.banks as u64)?;
        positive("ways", self.ways as u64)?;
        positive("ports", self.ports as u64)?;
        positive("mshr_entries", self.mshr_entries as u64)?;
        positive("miss_latency", self.miss_latency)?;
        if self.address_bits == 0 || self.address_bits > 64 {
            return Err(SimError::config(format!(
                "address_bits must be in 1..=64, got {}",
                self.address_bits
            )));
        }
        let index_bits = self.set_bits() + self.offset_bits();
        if index_bits > self.address_bits {
            return Err(SimError::config(format!(
                "address_bits ({}) too small for {} sets of {} B blocks",
                self.address_bits, self.sets, self.block_size
            )));
        }
        Ok(())
    }

    pub fn capacity_bytes(&self) -> u64 {
        self.sets as u64 * self.ways as u64 * self.block_size
    }

    pub fn set_bits(&self) -> u32 {
        self.sets.trailing_zeros()
    }

    pub fn offset_bits(&self) -> u32 {
        self.block_size.trailing_zeros()
    }

    pub fn tag_bits(&self) -> u32 {
        self.address_bits - self.set_bits() - self.offset_bits()
    }

    fn address_limit(&self) -> Option<u64> {
        1u64.checked_shl(self.address_bits)
            .filter(|_| self.address_bits < 64)
    }

    /// Splits a byte address into tag, set, offset and bank.
    pub fn decompose(&self, address: u64) -> Result<AddressParts> {
        if let Some(limit) = self.address_limit() {
            if address >= limit {
                return Err(SimError::config(format!(
                    "address {address:#x} does not fit in {} address bits",
                    self.address_bits
                )));
            }
        }
        let block = address / self.block_size;
        Ok(AddressParts {
            tag: block / self.sets as u64,
            set_index: (block % self.sets as u64) as usize,
            block_offset: address % self.block_size,
            bank_index: (block % self.banks as u64) as usize,
        })
    }

    pub fn recompose(&self, parts: &AddressParts) -> u64 {
        (parts.tag * self.sets as u64 + parts.set_index as u64) * self.block_size
            + parts.block_offset
    }
}

/// Result of looking an address up without changing cache state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Probe {
    Hit(usize),
    Miss,
    /// The block is already being filled; data arrives at the given cycle.
    PendingHit(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FillOutcome {
    Started { ready_cycle: u64, way: usize },
    /// Every MSHR entry (or every way of the set) is busy with another fill.
    Rejected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PendingFill {
    pub set: usize,
    pub way: usize,
    pub tag: u64,
    pub ready_cycle: u64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Line {
    valid: bool,
    tag: u64,
    lru_stamp: u64,
}

/// Tag, LRU and pending-fill state of one cache during simulation.
#[derive(Debug, Clone)]
pub struct CacheState {
    ways: usize,
    mshr_entries: usize,
    miss_latency: u64,
    lines: Vec<Line>,
    pending: Vec<PendingFill>,
    clock: u64,
}

impl CacheState {
    pub fn new(config: &CacheConfig) -> Self {
        CacheState {
            ways: config.ways,
            mshr_entries: config.mshr_entries,
            miss_latency: config.miss_latency,
            lines: vec![Line::default(); config.sets * config.ways],
            pending: Vec::with_capacity(config.mshr_entries),
            clock: 0,
        }
    }

    fn set_lines(&self, set: usize) -> &[Line] {
        &self.lines[set * self.ways..(set + 1) * self.ways]
    }

    pub fn probe(&self, parts: &AddressParts) -> Probe {
        if let Some(way) = self
            .set_lines(parts.set_index)
            .iter()
            .position(|l| l.valid && l.tag == parts.tag)
        {
            return Probe::Hit(way);
        }
        match self
            .pending
            .iter()
            .find(|p| p.set == parts.set_index && p.tag == parts.tag)
        {
            Some(p) => Probe::PendingHit(p.ready_cycle),
            None => Probe::Miss,
        }
    }

    /// Marks a valid line as most recently used.
    pub fn touch(&mut self, set: usize, way: usize) {
        let clock = self.clock;
        let line = &mut self.lines[set * self.ways + way];
        assert!(line.valid, "touch of invalid line (set {set}, way {way})");
        line.lru_stamp = clock;
        self.clock += 1;
    }

    fn is_reserved(&self, set: usize, way: usize) -> bool {
        self.pending.iter().any(|p| p.set == set && p.way == way)
    }

    fn choose_victim(&self, set: usize) -> Option<usize> {
        let lines = self.set_lines(set);
        let free = (0..self.ways).filter(|&w| !self.is_reserved(set, w));
        let mut lru: Option<usize> = None;
        for way in free {
            if !lines[way].valid {
                return Some(way);
            }
            if lru.is_none_or(|b| lines[way].lru_stamp < lines[b].lru_stamp) {
                lru = Some(way);
            }
        }
        lru
    }

    /// Starts a fill for a probed miss, reserving (and invalidating) a victim way.
    pub fn begin_fill(&mut self, parts: &AddressParts, now: u64) -> FillOutcome {
        debug_assert_eq!(self.probe(parts), Probe::Miss);
        if self.pending.len() >= self.mshr_entries {
            return FillOutcome::Rejected;
        }
        let Some(way) = self.choose_victim(parts.set_index) else {
            return FillOutcome::Rejected;
        };
        self.lines[parts.set_index * self.ways + way].valid = false;
        let ready_cycle = now + self.miss_latency;
        self.pending.push(PendingFill {
            set: parts.set_index,
            way,
            tag: parts.tag,
            ready_cycle,
        });
        FillOutcome::Started { ready_cycle, way }
    }

    /// Installs every fill whose data has arrived by `now`. Returns how many
    /// fills completed.
    pub fn complete_fills(&mut self, now: u64) -> usize {
        let mut done = 0;
        let mut i = 0;
        while i < self.pending.len() {
            if self.pending[i].ready_cycle <= now {
                let fill = self.pending.remove(i);
                let line = &mut self.lines[fill.set * self.ways + fill.way];
                line.valid = true;
                line.tag = fill.tag;
                line.lru_stamp = self.clock;
                self.clock += 1;
                done += 1;
            } else {
                i += 1;
            }
        }
        done
    }

    /// Installs a block immediately, bypassing the MSHR. Used to warm a cache.
    pub fn preload(&mut self, parts: &AddressParts) {
        match self.probe(parts) {
            Probe::Hit(way) => self.touch(parts.set_index, way),
            Probe::PendingHit(_) => {}
            Probe::Miss => {
                if let Some(way) = self.choose_victim(parts.set_index) {
                    let line = &mut self.lines[parts.set_index * self.ways + way];
                    line.valid = true;
                    line.tag = parts.tag;
                    line.lru_stamp = self.clock;
                    self.clock += 1;
                }
            }
        }
    }

    pub fn pending_fills(&self) -> &[PendingFill] {
        &self.pending
    }

    pub fn next_fill_ready(&self) -> Option<u64> {
        self.pending.iter().map(|p| p.ready_cycle).min()
    }

    /// Valid tags of one set, in way order.
    pub fn valid_tags(&self, set: usize) -> Vec<u64> {
        self.set_lines(set)
            .iter()
            .filter(|l| l.valid)
            .map(|l| l.tag)
            .collect()
    }
}
