//! Miss/stall statistics, the storage model, configuration sweeps and CSV
//! output.

use std::fmt::Write as _;
use std::io::Write;

use rayon::prelude::*;

use crate::engine::{self, AccessRecord, EngineConfig};
use crate::error::{Result, SimError};
use crate::icache::CacheConfig;
use crate::topology::Topology;
use crate::workload::FetchStream;

pub const SWEEP_HEADER: &str = "sharing_degree,num_caches,ports,banks,mshr_entries,accesses,misses,stalled_accesses,miss_rate,stall_rate,total_cycles,data_bytes,total_bits";
pub const RECORD_HEADER: &str = "core,address,issue_cycle,complete_cycle,class,stalled";

/// Integer access counters for one core or a whole run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counters {
    pub accesses: u64,
    pub hits: u64,
    pub misses: u64,
    pub pending_hits: u64,
    pub stalled_accesses: u64,
    /// One past the last completion cycle.
    pub total_cycles: u64,
}

fn ratio(n: u64, d: u64) -> f64 {
    if d == 0 {
        0.0
    } else {
        n as f64 / d as f64
    }
}

impl Counters {
    pub fn miss_rate(&self) -> f64 {
        ratio(self.misses, self.accesses)
    }

    pub fn stall_rate(&self) -> f64 {
        ratio(self.stalled_accesses, self.accesses)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SimStats {
    pub total: Counters,
    pub per_core: Vec<Counters>,
}

impl SimStats {
    pub fn miss_rate(&self) -> f64 {
        self.total.miss_rate()
    }

    pub fn stall_rate(&self) -> f64 {
        self.total.stall_rate()
    }
}

/// Storage needed by all instruction caches on the chip.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AreaReport {
    pub num_caches: usize,
    pub data_bytes: u64,
    pub tag_bits_per_line: u32,
    /// Tag plus valid bit.
    pub overhead_bits_per_line: u32,
    pub total_bits: u64,
}

pub fn area(config: &CacheConfig, num_caches: usize) -> AreaReport {
    let lines = num_caches as u64 * config.sets as u64 * config.ways as u64;
    let tag_bits_per_line = config.tag_bits();
    let overhead_bits_per_line = tag_bits_per_line + 1;
    AreaReport {
        num_caches,
        data_bytes: lines * config.block_size,
        tag_bits_per_line,
        overhead_bits_per_line,
        total_bits: lines * (config.block_size * 8 + overhead_bits_per_line as u64),
    }
}

/// One simulated configuration of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub sharing_degree: usize,
    pub num_caches: usize,
    pub ports: usize,
    pub banks: usize,
    pub mshr_entries: usize,
    pub accesses: u64,
    pub misses: u64,
    pub stalled_accesses: u64,
    pub total_cycles: u64,
    pub data_bytes: u64,
    pub total_bits: u64,
    /// Per-cache geometry the row was simulated with.
    pub cache: CacheConfig,
}

impl SweepRow {
    pub fn new(sharing_degree: usize, cache: &CacheConfig, num_caches: usize, stats: &SimStats) -> Self {
        let a = area(cache, num_caches);
        SweepRow {
            sharing_degree,
            num_caches,
            ports: cache.ports,
            banks: cache.banks,
            mshr_entries: cache.mshr_entries,
            accesses: stats.total.accesses,
            misses: stats.total.misses,
            stalled_accesses: stats.total.stalled_accesses,
            total_cycles: stats.total.total_cycles,
            data_bytes: a.data_bytes,
            total_bits: a.total_bits,
            cache: *cache,
        }
    }

    pub fn miss_rate(&self) -> f64 {
        ratio(self.misses, self.accesses)
    }

    pub fn stall_rate(&self) -> f64 {
        ratio(self.stalled_accesses, self.accesses)
    }
}

fn sweep_with<F>(
    base: &EngineConfig,
    streams: &[FetchStream],
    degrees: &[usize],
    cache_for: F,
) -> Result<Vec<SweepRow>>
where
    F: Fn(usize) -> Result<CacheConfig> + Sync,
{
    let num_cores = base.topology.num_cores();
    degrees
        .par_iter()
        .map(|&degree| {
            let point = || -> Result<SweepRow> {
                let cache = cache_for(degree)?;
                let topology = Topology::uniform(num_cores, degree)?;
                let num_caches = topology.num_caches();
                let config = EngineConfig {
                    cache,
                    topology,
                    record_accesses: false,
                    ..base.clone()
                };
                let out = engine::run(&config, streams)?;
                Ok(SweepRow::new(degree, &cache, num_caches, &out.stats))
            };
            point().map_err(|e| SimError::Sweep {
                degree,
                source: Box::new(e),
            })
        })
        .collect()
}

/// Fixed per-cache geometry; more cores share each cache as the degree grows.
pub fn sweep_method2(
    base: &EngineConfig,
    streams: &[FetchStream],
    degrees: &[usize],
) -> Result<Vec<SweepRow>> {
    sweep_with(base, streams, degrees, |_| Ok(base.cache))
}

/// Fixed total storage; each shared cache gets `degree` times the sets.
pub fn sweep_method1(
    base: &EngineConfig,
    streams: &[FetchStream],
    degrees: &[usize],
) -> Result<Vec<SweepRow>> {
    sweep_with(base, streams, degrees, |degree| {
        let sets = base.cache.sets * degree;
        if !sets.is_power_of_two() {
            return Err(SimError::config(format!(
                "scaled set count {sets} ({} x {degree}) is not a power of two",
                base.cache.sets
            )));
        }
        let cache = CacheConfig { sets, ..base.cache };
        cache.validate()?;
        Ok(cache)
    })
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{:.6},{:.6},{},{},{}",
            r.sharing_degree,
            r.num_caches,
            r.ports,
            r.banks,
            r.mshr_entries,
            r.accesses,
            r.misses,
            r.stalled_accesses,
            r.miss_rate(),
            r.stall_rate(),
            r.total_cycles,
            r.data_bytes,
            r.total_bits
        )
        .unwrap();
    }
    out
}

pub fn write_csv<W: Write>(rows: &[SweepRow], mut dest: W) -> Result<()> {
    dest.write_all(sweep_csv(rows).as_bytes())?;
    dest.flush()?;
    Ok(())
}

pub fn records_csv(records: &[AccessRecord]) -> String {
    let mut out = String::from(RECORD_HEADER);
    out.push('\n');
    for r in records {
        writeln!(
            out,
            "{},{:#x},{},{},{},{}",
            r.core,
            r.address,
            r.issue_cycle,
            r.complete_cycle,
            r.class.as_str(),
            r.stalled as u8
        )
        .unwrap();
    }
    out
}

pub fn write_records_csv<W: Write>(records: &[AccessRecord], mut dest: W) -> Result<()> {
    dest.write_all(records_csv(records).as_bytes())?;
    dest.flush()?;
    Ok(())
}
