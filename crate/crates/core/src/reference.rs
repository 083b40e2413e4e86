//! A deliberately naive re-implementation of the engine, for cross-checking.
//!
//! Every cycle is simulated one by one, every core and cache line is scanned
//! linearly, and nothing is cached between cycles. It follows the same timing
//! rules as [`crate::engine`] but shares none of its code, including the cache
//! model. Meant for desk-scale inputs in tests.

use crate::engine::EngineConfig;
use crate::error::{Result, SimError};
use crate::metrics::{Counters, SimStats};
use crate::workload::FetchStream;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Kind {
    Hit,
    Miss,
    Pending,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Wait {
    /// Wants a port this cycle.
    Port,
    /// Own miss; the block lands at this cycle, after which it needs a port.
    Fill(u64),
    /// Fill landed; wants a port to deliver.
    Deliver,
    /// Done at this cycle.
    DoneAt(u64),
}

struct Fetch {
    addr: u64,
    issued: u64,
    kind: Option<Kind>,
    wait: Wait,
}

struct Core {
    next: usize,
    fetch: Option<Fetch>,
    earliest_issue: u64,
}

struct Line {
    set: u64,
    way: usize,
    valid: bool,
    tag: u64,
    last_use: u64,
}

struct Fill {
    set: u64,
    way: usize,
    tag: u64,
    ready: u64,
}

struct Cache {
    lines: Vec<Line>,
    fills: Vec<Fill>,
    uses: u64,
}

/// Same contract as [`crate::engine::run`], without the access log.
pub fn reference_run(config: &EngineConfig, streams: &[FetchStream]) -> Result<SimStats> {
    config.validate(streams)?;
    let cap = config.cycle_cap(streams);
    let cc = config.cache;
    let sets = cc.sets as u64;
    let block = cc.block_size;
    let banks = cc.banks as u64;
    let set_of = |a: u64| (a / block) % sets;
    let tag_of = |a: u64| (a / block) / sets;
    let bank_of = |a: u64| (a / block) % banks;

    let n = streams.len();
    let mut caches: Vec<Cache> = config
        .topology
        .groups()
        .iter()
        .map(|_| Cache {
            lines: (0..sets)
                .flat_map(|set| {
                    (0..cc.ways).map(move |way| Line {
                        set,
                        way,
                        valid: false,
                        tag: 0,
                        last_use: 0,
                    })
                })
                .collect(),
            fills: Vec::new(),
            uses: 0,
        })
        .collect();
    let mut cores: Vec<Core> = (0..n)
        .map(|_| Core { next: 0, fetch: None, earliest_issue: 0 })
        .collect();
    let mut per_core = vec![Counters::default(); n];

    let mut cycle: u64 = 0;
    loop {
        let all_done = (0..n).all(|c| cores[c].fetch.is_none() && cores[c].next == streams[c].len());
        if all_done {
            break;
        }
        if cycle >= cap {
            return Err(SimError::Deadlock {
                cycle,
                cursors: cores.iter().map(|c| c.next).collect(),
            });
        }

        // fills land
        for cache in caches.iter_mut() {
            let mut k = 0;
            while k < cache.fills.len() {
                if cache.fills[k].ready <= cycle {
                    let f = cache.fills.remove(k);
                    for line in cache.lines.iter_mut() {
                        if line.set == f.set && line.way == f.way {
                            line.valid = true;
                            line.tag = f.tag;
                            line.last_use = cache.uses;
                        }
                    }
                    cache.uses += 1;
                } else {
                    k += 1;
                }
            }
        }

        // timers expire
        let mut retire_now: Vec<(usize, u64)> = Vec::new();
        for (c, core) in cores.iter_mut().enumerate() {
            if let Some(f) = core.fetch.as_mut() {
                match f.wait {
                    Wait::DoneAt(t) if t <= cycle => retire_now.push((c, t)),
                    Wait::Fill(t) if t <= cycle => f.wait = Wait::Deliver,
                    _ => {}
                }
            }
        }
        for (c, t) in retire_now {
            retire(&mut cores[c], &mut per_core[c], t, cc.hit_latency);
        }

        // issue
        for c in 0..n {
            let core = &mut cores[c];
            if core.fetch.is_none() && core.next < streams[c].len() && cycle >= core.earliest_issue {
                core.fetch = Some(Fetch {
                    addr: streams[c].addresses[core.next],
                    issued: cycle,
                    kind: None,
                    wait: Wait::Port,
                });
                core.next += 1;
            }
        }

        // arbitrate
        for (ci, group) in config.topology.groups().iter().enumerate() {
            let mut members = group.clone();
            members.sort();
            let rot = (cycle % members.len() as u64) as usize;
            members.rotate_left(rot);
            let mut granted_per_bank = vec![0usize; cc.banks];
            for &c in &members {
                let wants = match &cores[c].fetch {
                    Some(f) => f.wait == Wait::Port || f.wait == Wait::Deliver,
                    None => false,
                };
                if !wants {
                    continue;
                }
                let addr = cores[c].fetch.as_ref().unwrap().addr;
                let bank = bank_of(addr) as usize;
                if granted_per_bank[bank] >= cc.ports {
                    continue;
                }
                granted_per_bank[bank] += 1;

                let cache = &mut caches[ci];
                let f = cores[c].fetch.as_mut().unwrap();
                let mut done_at = None;
                if f.wait == Wait::Deliver {
                    done_at = Some(cycle + cc.hit_latency);
                } else {
                    let (set, tag) = (set_of(addr), tag_of(addr));
                    let hit = cache
                        .lines
                        .iter()
                        .position(|l| l.set == set && l.valid && l.tag == tag);
                    let inflight = cache.fills.iter().find(|p| p.set == set && p.tag == tag);
                    if let Some(i) = hit {
                        cache.lines[i].last_use = cache.uses;
                        cache.uses += 1;
                        f.kind = Some(Kind::Hit);
                        done_at = Some(cycle + cc.hit_latency);
                    } else if let Some(p) = inflight {
                        f.kind = Some(Kind::Pending);
                        done_at = Some(p.ready + cc.hit_latency);
                    } else if cache.fills.len() < cc.mshr_entries {
                        let busy = |way: usize| cache.fills.iter().any(|p| p.set == set && p.way == way);
                        let candidates: Vec<&Line> = cache
                            .lines
                            .iter()
                            .filter(|l| l.set == set && !busy(l.way))
                            .collect();
                        let invalid = candidates.iter().filter(|l| !l.valid).map(|l| l.way).min();
                        let oldest = candidates
                            .iter()
                            .filter(|l| l.valid)
                            .min_by_key(|l| l.last_use)
                            .map(|l| l.way);
                        if let Some(way) = invalid.or(oldest) {
                            for l in cache.lines.iter_mut() {
                                if l.set == set && l.way == way {
                                    l.valid = false;
                                }
                            }
                            let ready = cycle + cc.miss_latency;
                            cache.fills.push(Fill { set, way, tag, ready });
                            f.kind = Some(Kind::Miss);
                            f.wait = Wait::Fill(ready);
                        }
                    }
                }
                if let Some(t) = done_at {
                    if t <= cycle {
                        retire(&mut cores[c], &mut per_core[c], t, cc.hit_latency);
                    } else {
                        f.wait = Wait::DoneAt(t);
                    }
                }
            }
        }

        cycle += 1;
    }

    let mut total = Counters::default();
    for c in &per_core {
        total.accesses += c.accesses;
        total.hits += c.hits;
        total.misses += c.misses;
        total.pending_hits += c.pending_hits;
        total.stalled_accesses += c.stalled_accesses;
        total.total_cycles = total.total_cycles.max(c.total_cycles);
    }
    Ok(SimStats { total, per_core })
}

fn retire(core: &mut Core, counters: &mut Counters, done: u64, hit_latency: u64) {
    let f = core.fetch.take().unwrap();
    counters.accesses += 1;
    match f.kind.unwrap() {
        Kind::Hit => counters.hits += 1,
        Kind::Miss => counters.misses += 1,
        Kind::Pending => counters.pending_hits += 1,
    }
    if done - f.issued > hit_latency {
        counters.stalled_accesses += 1;
    }
    counters.total_cycles = counters.total_cycles.max(done + 1);
    core.earliest_issue = done + 1;
}
