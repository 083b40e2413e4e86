//! Per-core instruction fetch streams: the on-disk trace format and a
//! synthetic SIMT workload generator.
//!
//! Trace format, one record per line:
//!
//! ```text
//! # comment
//! 0 0x0
//! 0 0x80
//! 1 0x0
//! ```

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, SimError};

/// Ordered byte addresses fetched by one core.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FetchStream {
    pub core_id: u32,
    pub addresses: Vec<u64>,
}

impl FetchStream {
    pub fn new(core_id: u32, addresses: Vec<u64>) -> Self {
        FetchStream { core_id, addresses }
    }

    pub fn len(&self) -> usize {
        self.addresses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.addresses.is_empty()
    }
}

/// Parameters of the synthetic kernel-loop workload.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub num_cores: usize,
    pub warps_per_core: usize,
    /// Distinct static instructions in the main kernel body.
    pub footprint_instrs: u64,
    pub instr_size: u64,
    pub loop_iterations: usize,
    /// Chance, per warp and iteration, of running the side path.
    pub divergence_prob: f64,
    pub side_path_len: u64,
    /// Core `c` skips its first `c * stagger_cycles` fetches.
    pub stagger_cycles: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            num_cores: 1,
            warps_per_core: 48,
            footprint_instrs: 256,
            instr_size: 8,
            loop_iterations: 1,
            divergence_prob: 0.0,
            side_path_len: 0,
            stagger_cycles: 0,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.footprint_instrs == 0 {
            return Err(SimError::config("synthetic.footprint_instrs must be at least 1"));
        }
        if self.instr_size == 0 {
            return Err(SimError::config("synthetic.instr_size must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.divergence_prob) {
            return Err(SimError::config(format!(
                "synthetic.divergence_prob must be in [0, 1], got {}",
                self.divergence_prob
            )));
        }
        Ok(())
    }

    pub fn footprint_bytes(&self) -> u64 {
        (self.footprint_instrs + self.side_path_len) * self.instr_size
    }
}

/// Parses trace text into one stream per core id, in order of first appearance.
pub fn parse_trace(text: &str) -> Result<Vec<FetchStream>> {
    let mut streams: Vec<FetchStream> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let err = |reason: &str| SimError::Parse {
            line: line_no,
            text: raw.to_string(),
            reason: reason.to_string(),
        };
        let mut fields = content.split_whitespace();
        let (Some(core), Some(addr), None) = (fields.next(), fields.next(), fields.next())
        else {
            return Err(err("expected `<core_id> <address>`"));
        };
        if !core.bytes().all(|b| b.is_ascii_digit()) {
            return Err(err("core id must be a decimal unsigned integer"));
        }
        let core_id: u32 = core.parse().map_err(|_| err("core id out of range"))?;
        let hex = addr
            .strip_prefix("0x")
            .or_else(|| addr.strip_prefix("0X"))
            .ok_or_else(|| err("address must be 0x-prefixed hex"))?;
        if hex.is_empty() || !hex.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(err("address is not hexadecimal"));
        }
        let address = u64::from_str_radix(hex, 16).map_err(|_| err("address overflows 64 bits"))?;
        match streams.iter_mut().find(|s| s.core_id == core_id) {
            Some(s) => s.addresses.push(address),
            None => streams.push(FetchStream::new(core_id, vec![address])),
        }
    }
    Ok(streams)
}

/// Serializes streams in the trace format, core by core.
pub fn write_trace(streams: &[FetchStream]) -> String {
    let mut out = String::new();
    for s in streams {
        for a in &s.addresses {
            writeln!(out, "{} {:#x}", s.core_id, a).unwrap();
        }
    }
    out
}

/// Places parsed streams at their core id, filling absent cores with empty streams.
pub fn streams_by_core(streams: Vec<FetchStream>, num_cores: usize) -> Result<Vec<FetchStream>> {
    let mut out: Vec<FetchStream> = (0..num_cores as u32)
        .map(|c| FetchStream::new(c, Vec::new()))
        .collect();
    for s in streams {
        let slot = out.get_mut(s.core_id as usize).ok_or_else(|| {
            SimError::config(format!(
                "trace names core {} but num_cores is {num_cores}",
                s.core_id
            ))
        })?;
        *slot = s;
    }
    Ok(out)
}

fn warp_walk(spec: &SyntheticSpec, core: usize, warp: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(((core as u64) << 32) | warp as u64);
    let main = 0..spec.footprint_instrs;
    let side = spec.footprint_instrs..spec.footprint_instrs + spec.side_path_len;
    let mut pcs = Vec::new();
    for _ in 0..spec.loop_iterations {
        pcs.extend(main.clone().map(|i| i * spec.instr_size));
        if rng.gen_bool(spec.divergence_prob) {
            pcs.extend(side.clone().map(|i| i * spec.instr_size));
        }
    }
    pcs
}

/// Generates one fetch stream per core. Each core interleaves its warps
/// round-robin, one fetch per warp per turn.
pub fn generate(spec: &SyntheticSpec) -> Result<Vec<FetchStream>> {
    spec.validate()?;
    let streams = (0..spec.num_cores)
        .map(|core| {
            let walks: Vec<Vec<u64>> = (0..spec.warps_per_core)
                .map(|w| warp_walk(spec, core, w))
                .collect();
            let longest = walks.iter().map(Vec::len).max().unwrap_or(0);
            let mut addresses = Vec::with_capacity(walks.iter().map(Vec::len).sum());
            for step in 0..longest {
                addresses.extend(walks.iter().filter_map(|w| w.get(step)));
            }
            let skip = (core * spec.stagger_cycles).min(addresses.len());
            addresses.drain(..skip);
            FetchStream::new(core as u32, addresses)
        })
        .collect();
    Ok(streams)
}
