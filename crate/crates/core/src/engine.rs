//! Cycle-stepped simulation of cores fetching through shared, banked,
//! multi-ported instruction caches.
//!
//! Each cycle runs in a fixed order:
//!
//! 1. every cache installs fills whose data has arrived;
//! 2. cores waiting on a fill or on hit latency complete, and cores whose own
//!    miss has been filled rejoin arbitration to receive the block;
//! 3. idle cores with stream left issue their next fetch;
//! 4. per cache, requests are taken in rotating priority order (the offset
//!    advances by one core each cycle) and each bank serves at most `ports`
//!    of them. Losers retry next cycle.
//!
//! A core has at most one fetch in flight and issues again the cycle after
//! its previous fetch completes. An access is stalled when its latency
//! exceeds the cache hit latency. When every core is waiting on a timer the
//! engine jumps straight to the next event.

use crate::error::{Result, SimError};
use crate::icache::{AddressParts, CacheConfig, CacheState, FillOutcome, Probe};
use crate::metrics::{Counters, SimStats};
use crate::topology::Topology;
use crate::workload::FetchStream;

/// How an access was resolved the first time it won a cache port.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AccessClass {
    Hit,
    Miss,
    /// Coalesced into a fill already in flight for the same block.
    PendingHit,
}

impl AccessClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            AccessClass::Hit => "hit",
            AccessClass::Miss => "miss",
            AccessClass::PendingHit => "pending_hit",
        }
    }
}

/// One retired fetch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AccessRecord {
    pub core: usize,
    pub address: u64,
    pub issue_cycle: u64,
    pub complete_cycle: u64,
    pub class: AccessClass,
    pub stalled: bool,
}

#[derive(Debug, Clone)]
pub struct EngineConfig {
    pub cache: CacheConfig,
    pub topology: Topology,
    /// Cycle cap; `None` derives a generous bound from the workload size.
    pub max_cycles: Option<u64>,
    pub record_accesses: bool,
}

impl EngineConfig {
    pub fn new(cache: CacheConfig, topology: Topology) -> Self {
        EngineConfig {
            cache,
            topology,
            max_cycles: None,
            record_accesses: false,
        }
    }

    pub(crate) fn validate(&self, streams: &[FetchStream]) -> Result<()> {
        self.cache.validate()?;
        if self.max_cycles == Some(0) {
            return Err(SimError::config("max_cycles must be positive"));
        }
        if streams.is_empty() {
            return Err(SimError::config("no fetch streams given"));
        }
        if streams.len() != self.topology.num_cores() {
            return Err(SimError::config(format!(
                "{} fetch streams given for {} cores",
                streams.len(),
                self.topology.num_cores()
            )));
        }
        for (core, s) in streams.iter().enumerate() {
            for &a in &s.addresses {
                self.cache
                    .decompose(a)
                    .map_err(|e| SimError::config(format!("core {core}: {e}")))?;
            }
        }
        Ok(())
    }

    pub(crate) fn cycle_cap(&self, streams: &[FetchStream]) -> u64 {
        if let Some(cap) = self.max_cycles {
            return cap;
        }
        let fetches: u64 = streams.iter().map(|s| s.len() as u64).sum();
        let per_fetch = (self.cache.miss_latency + self.cache.hit_latency + 2)
            .saturating_mul(self.topology.num_cores() as u64);
        (fetches + 1)
            .saturating_mul(per_fetch)
            .saturating_mul(2)
            .saturating_add(1024)
    }
}

#[derive(Debug)]
pub struct SimOutput {
    pub stats: SimStats,
    pub records: Vec<AccessRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    /// Needs a port: fresh issue, port loss or MSHR rejection.
    Arbitrate,
    /// Own miss in flight; the block arrives at the given cycle.
    AwaitFill(u64),
    /// Block has arrived; needs a port to deliver it.
    Return,
    /// Completes at the given cycle without further arbitration.
    Finish(u64),
}

#[derive(Debug, Clone, Copy)]
struct InFlight {
    address: u64,
    parts: AddressParts,
    issue_cycle: u64,
    class: Option<AccessClass>,
    phase: Phase,
}

impl InFlight {
    fn wants_port(&self) -> bool {
        matches!(self.phase, Phase::Arbitrate | Phase::Return)
    }
}

/// Fetch front end of one core.
#[derive(Debug, Clone)]
pub struct CoreFrontEnd {
    pub core_id: usize,
    pub cursor: usize,
    pub retired: usize,
    in_flight: Option<InFlight>,
    next_issue: u64,
    stats: Counters,
}

pub struct Engine<'a> {
    cache_config: CacheConfig,
    groups: Vec<Vec<usize>>,
    streams: &'a [FetchStream],
    caches: Vec<CacheState>,
    cores: Vec<CoreFrontEnd>,
    now: u64,
    cap: u64,
    bank_use: Vec<usize>,
    total: Counters,
    records: Option<Vec<AccessRecord>>,
}

impl<'a> Engine<'a> {
    pub fn new(config: &EngineConfig, streams: &'a [FetchStream]) -> Result<Self> {
        config.validate(streams)?;
        let mut groups = config.topology.groups().to_vec();
        for g in &mut groups {
            g.sort_unstable();
        }
        Ok(Engine {
            cache_config: config.cache,
            caches: groups.iter().map(|_| CacheState::new(&config.cache)).collect(),
            groups,
            streams,
            cores: (0..streams.len())
                .map(|core_id| CoreFrontEnd {
                    core_id,
                    cursor: 0,
                    retired: 0,
                    in_flight: None,
                    next_issue: 0,
                    stats: Counters::default(),
                })
                .collect(),
            now: 0,
            cap: config.cycle_cap(streams),
            bank_use: vec![0; config.cache.banks],
            total: Counters::default(),
            records: config.record_accesses.then(Vec::new),
        })
    }

    /// Installs `address` in cache `cache` before simulation starts.
    pub fn preload(&mut self, cache: usize, address: u64) -> Result<()> {
        let parts = self.cache_config.decompose(address)?;
        self.caches[cache].preload(&parts);
        Ok(())
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn cores(&self) -> &[CoreFrontEnd] {
        &self.cores
    }

    pub fn caches(&self) -> &[CacheState] {
        &self.caches
    }

    pub fn is_finished(&self) -> bool {
        self.cores
            .iter()
            .all(|c| c.in_flight.is_none() && c.cursor == self.streams[c.core_id].len())
    }

    fn retire(&mut self, core: usize, complete_cycle: u64) {
        let hit_latency = self.cache_config.hit_latency;
        let c = &mut self.cores[core];
        let f = c.in_flight.take().expect("retire without fetch in flight");
        let class = f.class.expect("retired fetch was never classified");
        let stalled = complete_cycle - f.issue_cycle > hit_latency;
        c.retired += 1;
        c.next_issue = complete_cycle + 1;
        for counters in [&mut c.stats, &mut self.total] {
            counters.accesses += 1;
            match class {
                AccessClass::Hit => counters.hits += 1,
                AccessClass::Miss => counters.misses += 1,
                AccessClass::PendingHit => counters.pending_hits += 1,
            }
            counters.stalled_accesses += stalled as u64;
            counters.total_cycles = counters.total_cycles.max(complete_cycle + 1);
        }
        if let Some(records) = &mut self.records {
            records.push(AccessRecord {
                core,
                address: f.address,
                issue_cycle: f.issue_cycle,
                complete_cycle,
                class,
                stalled,
            });
        }
    }

    fn complete_at(&mut self, core: usize, at: u64) {
        if at <= self.now {
            self.retire(core, at);
        } else if let Some(f) = &mut self.cores[core].in_flight {
            f.phase = Phase::Finish(at);
        }
    }

    fn serve(&mut self, cache: usize, core: usize) {
        let now = self.now;
        let hit_latency = self.cache_config.hit_latency;
        let f = self.cores[core].in_flight.expect("served core has no fetch");
        if f.phase == Phase::Return {
            self.complete_at(core, now + hit_latency);
            return;
        }
        let state = &mut self.caches[cache];
        let (class, phase) = match state.probe(&f.parts) {
            Probe::Hit(way) => {
                state.touch(f.parts.set_index, way);
                (Some(AccessClass::Hit), Phase::Finish(now + hit_latency))
            }
            Probe::PendingHit(ready) => {
                (Some(AccessClass::PendingHit), Phase::Finish(ready + hit_latency))
            }
            Probe::Miss => match state.begin_fill(&f.parts, now) {
                FillOutcome::Started { ready_cycle, .. } => {
                    (Some(AccessClass::Miss), Phase::AwaitFill(ready_cycle))
                }
                FillOutcome::Rejected => (None, Phase::Arbitrate),
            },
        };
        let slot = self.cores[core].in_flight.as_mut().unwrap();
        slot.class = class;
        slot.phase = phase;
        if let Phase::Finish(at) = phase {
            self.complete_at(core, at);
        }
    }

    /// Simulates the current cycle, then advances to the next cycle in which
    /// anything can happen.
    pub fn step(&mut self) {
        let now = self.now;

        for cache in &mut self.caches {
            cache.complete_fills(now);
        }

        for core in 0..self.cores.len() {
            let Some(f) = self.cores[core].in_flight else { continue };
            match f.phase {
                Phase::Finish(at) if at <= now => self.retire(core, at),
                Phase::AwaitFill(ready) if ready <= now => {
                    self.cores[core].in_flight.as_mut().unwrap().phase = Phase::Return;
                }
                _ => {}
            }
        }

        for c in &mut self.cores {
            let stream = &self.streams[c.core_id].addresses;
            if c.in_flight.is_none() && c.cursor < stream.len() && now >= c.next_issue {
                let address = stream[c.cursor];
                c.cursor += 1;
                c.in_flight = Some(InFlight {
                    address,
                    parts: self
                        .cache_config
                        .decompose(address)
                        .expect("addresses validated at construction"),
                    issue_cycle: now,
                    class: None,
                    phase: Phase::Arbitrate,
                });
            }
        }

        for cache in 0..self.groups.len() {
            let len = self.groups[cache].len();
            let offset = (now % len as u64) as usize;
            self.bank_use.fill(0);
            for i in 0..len {
                let core = self.groups[cache][(offset + i) % len];
                let Some(f) = self.cores[core].in_flight else { continue };
                if !f.wants_port() {
                    continue;
                }
                let bank = f.parts.bank_index;
                if self.bank_use[bank] < self.cache_config.ports {
                    self.bank_use[bank] += 1;
                    self.serve(cache, core);
                }
            }
        }

        self.now = self.next_event().unwrap_or(now + 1);
    }

    fn next_event(&self) -> Option<u64> {
        let soon = self.now + 1;
        let mut next: Option<u64> = None;
        let mut consider = |t: u64| next = Some(next.map_or(t, |n: u64| n.min(t)));
        for c in &self.cores {
            match c.in_flight {
                Some(f) => match f.phase {
                    Phase::Arbitrate | Phase::Return => return Some(soon),
                    Phase::AwaitFill(t) | Phase::Finish(t) => consider(t.max(soon)),
                },
                None if c.cursor < self.streams[c.core_id].len() => {
                    consider(c.next_issue.max(soon))
                }
                None => {}
            }
        }
        for cache in &self.caches {
            if let Some(t) = cache.next_fill_ready() {
                consider(t.max(soon));
            }
        }
        next
    }

    pub fn run_to_end(&mut self) -> Result<()> {
        while !self.is_finished() {
            if self.now >= self.cap {
                return Err(SimError::Deadlock {
                    cycle: self.now,
                    cursors: self.cores.iter().map(|c| c.cursor).collect(),
                });
            }
            self.step();
        }
        Ok(())
    }

    pub fn finish(self) -> SimOutput {
        SimOutput {
            stats: SimStats {
                total: self.total,
                per_core: self.cores.into_iter().map(|c| c.stats).collect(),
            },
            records: self.records.unwrap_or_default(),
        }
    }
}

/// Runs every stream to completion. Stream `i` is fetched by core `i`.
pub fn run(config: &EngineConfig, streams: &[FetchStream]) -> Result<SimOutput> {
    let mut engine = Engine::new(config, streams)?;
    engine.run_to_end()?;
    Ok(engine.finish())
}
