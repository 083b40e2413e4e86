//! Acceptance experiments. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::fs;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sharecache::metrics::{sweep_csv, sweep_method1, sweep_method2, SweepRow};
use sharecache::{
    generate, reference_run, run, CacheConfig, CacheState, EngineConfig, FetchStream, FillOutcome,
    Probe, SyntheticSpec, Topology,
};

const DEGREES: [usize; 5] = [1, 2, 4, 8, 16];

type Outcome = Result<String, String>;

fn check(cond: bool, msg: String) -> Outcome {
    if cond {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn base16(cache: CacheConfig) -> EngineConfig {
    EngineConfig::new(cache, Topology::uniform(16, 1).unwrap())
}

/// Every core runs the same 512-instruction kernel: twice the 2 KiB cache.
fn large_footprint_spec() -> SyntheticSpec {
    SyntheticSpec {
        num_cores: 16,
        warps_per_core: 48,
        footprint_instrs: 512,
        side_path_len: 0,
        instr_size: 8,
        loop_iterations: 4,
        divergence_prob: 0.0,
        stagger_cycles: 0,
        seed: 2013,
    }
}

fn rates(rows: &[SweepRow]) -> String {
    rows.iter()
        .map(|r| format!("d{}: miss {:.4} stall {:.4}", r.sharing_degree, r.miss_rate(), r.stall_rate()))
        .collect::<Vec<_>>()
        .join(", ")
}

fn random_instance(rng: &mut ChaCha8Rng) -> (EngineConfig, Vec<FetchStream>) {
    let pick = |rng: &mut ChaCha8Rng, opts: &[usize]| *opts.choose(rng).unwrap();
    let cache = CacheConfig {
        sets: pick(rng, &[1, 2, 4, 8, 16]),
        ways: pick(rng, &[1, 2, 4, 8, 16]),
        block_size: pick(rng, &[16, 32, 64, 128]) as u64,
        ports: pick(rng, &[1, 2, 4]),
        banks: pick(rng, &[1, 2, 4]),
        mshr_entries: pick(rng, &[1, 2, 4]),
        miss_latency: pick(rng, &[1, 10]) as u64,
        hit_latency: rng.gen_range(0..=1),
        address_bits: 32,
    };
    let cores = rng.gen_range(1..=4);
    let divisors: Vec<usize> = (1..=cores).filter(|d| cores % d == 0).collect();
    let degree = pick(rng, &divisors);
    let blocks = rng.gen_range(1..=96u64);
    let streams = (0..cores)
        .map(|c| {
            let len = rng.gen_range(0..=256);
            let addrs = (0..len).map(|_| rng.gen_range(0..blocks * cache.block_size)).collect();
            FetchStream::new(c as u32, addrs)
        })
        .collect();
    (
        EngineConfig::new(cache, Topology::uniform(cores, degree).unwrap()),
        streams,
    )
}

fn criterion_oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = Instant::now();
    let mut mismatches = 0;
    for _ in 0..500 {
        let (cfg, streams) = random_instance(&mut rng);
        let fast = run(&cfg, &streams).map_err(|e| e.to_string())?.stats;
        let slow = reference_run(&cfg, &streams).map_err(|e| e.to_string())?;
        mismatches += (fast != slow) as usize;
    }
    let elapsed = start.elapsed();
    check(
        mismatches == 0 && elapsed < Duration::from_secs(10),
        format!("500 instances, {mismatches} mismatches, {elapsed:.2?} (limit 10 s)"),
    )
}

fn criterion_lru_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut bad = 0;
    for _ in 0..200 {
        let ways = *[1usize, 2, 4, 8, 16].choose(&mut rng).unwrap();
        let config = CacheConfig { sets: 1, ways, ..CacheConfig::default() };
        let distinct = rng.gen_range(1..=2 * ways as u64 + 2);
        let len = rng.gen_range(0..=300);
        let tags: Vec<u64> = (0..len).map(|_| rng.gen_range(0..distinct)).collect();

        let mut mtf: Vec<u64> = Vec::new();
        let expected: Vec<bool> = tags
            .iter()
            .map(|t| match mtf.iter().position(|x| x == t) {
                Some(p) => {
                    mtf.remove(p);
                    mtf.insert(0, *t);
                    true
                }
                None => {
                    mtf.insert(0, *t);
                    mtf.truncate(ways);
                    false
                }
            })
            .collect();

        let mut state = CacheState::new(&config);
        let got: Vec<bool> = tags
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let now = i as u64 * 100;
                let parts = config.decompose(t * config.block_size).unwrap();
                match state.probe(&parts) {
                    Probe::Hit(way) => {
                        state.touch(parts.set_index, way);
                        true
                    }
                    _ => {
                        assert!(matches!(state.begin_fill(&parts, now), FillOutcome::Started { .. }));
                        state.complete_fills(now + config.miss_latency);
                        false
                    }
                }
            })
            .collect();
        bad += (got != expected) as usize;
    }
    check(bad == 0, format!("200 sequences, {bad} mismatching"))
}

fn criterion_sharing_benefit() -> Outcome {
    // 16 blocks x 16 instructions of 8 B, one pass
    let stream: Vec<u64> = (0..256).map(|i| i * 8).collect();
    let streams: Vec<FetchStream> = (0..16).map(|c| FetchStream::new(c, stream.clone())).collect();
    let cache = CacheConfig { ports: 16, ..CacheConfig::default() };
    let shared = run(
        &EngineConfig::new(cache, Topology::uniform(16, 16).unwrap()),
        &streams,
    )
    .map_err(|e| e.to_string())?
    .stats
    .total
    .misses;
    let private = run(&base16(cache), &streams)
        .map_err(|e| e.to_string())?
        .stats
        .total
        .misses;
    check(
        shared == 16 && private == 256,
        format!("shared misses {shared} (want 16), private misses {private} (want 256)"),
    )
}

fn large_sweep(banks: usize) -> Result<(Vec<SweepRow>, Duration), String> {
    let start = Instant::now();
    let streams = generate(&large_footprint_spec()).map_err(|e| e.to_string())?;
    let cache = CacheConfig { ports: 1, banks, mshr_entries: 1, ..CacheConfig::default() };
    let rows = sweep_method2(&base16(cache), &streams, &DEGREES).map_err(|e| e.to_string())?;
    Ok((rows, start.elapsed()))
}

fn criterion_stall_trend(rows: &[SweepRow], elapsed: Duration) -> Outcome {
    let monotone = rows.windows(2).all(|w| w[1].stall_rate() >= w[0].stall_rate());
    let gap = rows[4].stall_rate() - rows[0].stall_rate();
    let dominated = rows.iter().all(|r| r.stall_rate() >= r.miss_rate());
    check(
        monotone && gap >= 0.10 && dominated && elapsed < Duration::from_secs(60),
        format!(
            "non-decreasing {monotone}, stall(16)-stall(1) = {gap:.4} (>= 0.10), stall>=miss {dominated}, {elapsed:.2?} (limit 60 s); {}",
            rates(rows)
        ),
    )
}

fn criterion_insensitive() -> Outcome {
    let spec = SyntheticSpec {
        footprint_instrs: 64,
        ..large_footprint_spec()
    };
    let footprint = spec.footprint_bytes();
    let streams = generate(&spec).map_err(|e| e.to_string())?;
    let cache = CacheConfig { ports: 16, ..CacheConfig::default() };
    let rows = sweep_method2(&base16(cache), &streams, &DEGREES).map_err(|e| e.to_string())?;
    let delta = rows[4].stall_rate() - rows[0].stall_rate();
    check(
        footprint * 4 <= cache.capacity_bytes() && delta <= 0.02,
        format!("footprint {footprint} B, stall(16)-stall(1) = {delta:.6} (<= 0.02); {}", rates(&rows)),
    )
}

fn criterion_area() -> Outcome {
    let spec = SyntheticSpec {
        warps_per_core: 2,
        loop_iterations: 1,
        ..large_footprint_spec()
    };
    let streams = generate(&spec).map_err(|e| e.to_string())?;
    let cfg = base16(CacheConfig::default());
    let m2 = sweep_method2(&cfg, &streams, &DEGREES).map_err(|e| e.to_string())?;
    let m1 = sweep_method1(&cfg, &streams, &DEGREES).map_err(|e| e.to_string())?;
    let m2_bytes: Vec<u64> = m2.iter().map(|r| r.data_bytes).collect();
    let m1_bytes: Vec<u64> = m1.iter().map(|r| r.data_bytes).collect();
    check(
        m2_bytes == [32768, 16384, 8192, 4096, 2048] && m1_bytes.iter().all(|&b| b == 32768),
        format!("method 2 data_bytes {m2_bytes:?}, method 1 data_bytes {m1_bytes:?}"),
    )
}

fn criterion_banking(one_bank: &[SweepRow]) -> Outcome {
    let (four_banks, _) = large_sweep(4)?;
    let relief = one_bank[4].stall_rate() - four_banks[4].stall_rate();
    check(
        relief >= 0.05,
        format!(
            "stall(16) banks=1 {:.4}, banks=4 {:.4}, relief {relief:.4} (>= 0.05)",
            one_bank[4].stall_rate(),
            four_banks[4].stall_rate()
        ),
    )
}

fn criterion_determinism() -> Outcome {
    let dir = tempfile::TempDir::new().map_err(|e| e.to_string())?;
    let config = "\
num_cores = 16
ports = 1
synthetic.warps_per_core = 8
synthetic.footprint_instrs = 448
synthetic.side_path_len = 64
synthetic.loop_iterations = 2
synthetic.divergence_prob = 0.25
sweep.method = 2
sweep.degrees = 1,2,4,8,16
out = sweep.csv
";
    fs::write(dir.path().join("sweep.conf"), config).map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for _ in 0..2 {
        let status = Command::new(env!("CARGO_BIN_EXE_sharecache"))
            .args(["sweep", "sweep.conf", "--seed", "42"])
            .current_dir(dir.path())
            .status()
            .map_err(|e| e.to_string())?;
        if !status.success() {
            return Err(format!("sweep exited with {status}"));
        }
        outputs.push(fs::read(dir.path().join("sweep.csv")).map_err(|e| e.to_string())?);
    }
    check(
        outputs[0] == outputs[1] && outputs[0].split(|&b| b == b'\n').count() == 7,
        format!("two sweep runs, {} bytes each, identical {}", outputs[0].len(), outputs[0] == outputs[1]),
    )
}

fn main() {
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    results.push(("1 oracle equivalence", criterion_oracle_equivalence()));
    results.push(("2 LRU oracle", criterion_lru_oracle()));
    results.push(("3 sharing benefit", criterion_sharing_benefit()));
    match large_sweep(1) {
        Ok((rows, elapsed)) => {
            println!("{}", sweep_csv(&rows).trim_end());
            results.push(("4 stall trend", criterion_stall_trend(&rows, elapsed)));
            results.push(("5 insensitive regime", criterion_insensitive()));
            results.push(("6 area model", criterion_area()));
            results.push(("7 banking relief", criterion_banking(&rows)));
        }
        Err(e) => {
            results.push(("4 stall trend", Err(e.clone())));
            results.push(("5 insensitive regime", criterion_insensitive()));
            results.push(("6 area model", criterion_area()));
            results.push(("7 banking relief", Err(e)));
        }
    }
    results.push(("8 determinism", criterion_determinism()));

    let mut failed = 0;
    for (name, outcome) in &results {
        match outcome {
            Ok(msg) => println!("PASS criterion {name}: {msg}"),
            Err(msg) => {
                failed += 1;
                println!("FAIL criterion {name}: {msg}");
            }
        }
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
