//! Flat `key = value` run configuration.
//!
//! ```text
//! # Fermi-like chip, all 16 cores on one cache
//! num_cores = 16
//! sharing_degree = 16
//! ports = 4
//! synthetic.footprint_instrs = 512
//! synthetic.loop_iterations = 4
//! sweep.method = 2
//! sweep.degrees = 1,2,4,8,16
//! out = sweep.csv
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sharecache::{CacheConfig, SyntheticSpec, Topology};

use crate::CliError;

const CACHE_KEYS: &[&str] = &[
    "sets",
    "ways",
    "block_size",
    "ports",
    "banks",
    "hit_latency",
    "miss_latency",
    "mshr_entries",
    "address_bits",
];

const OTHER_KEYS: &[&str] = &[
    "num_cores",
    "sharing_degree",
    "groups",
    "trace",
    "sweep.method",
    "sweep.degrees",
    "out",
    "max_cycles",
];

const SYNTHETIC_KEYS: &[&str] = &[
    "synthetic.warps_per_core",
    "synthetic.footprint_instrs",
    "synthetic.instr_size",
    "synthetic.loop_iterations",
    "synthetic.divergence_prob",
    "synthetic.side_path_len",
    "synthetic.stagger_cycles",
    "synthetic.seed",
];

#[derive(Debug, Clone, PartialEq)]
pub enum TopologyKey {
    Degree(usize),
    Groups(Vec<Vec<usize>>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Workload {
    Trace(PathBuf),
    Synthetic(SyntheticSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMethod {
    /// Constant total storage; each shared cache grows with the degree.
    ConstantTotal,
    /// Constant per-cache size; more cores per cache.
    ConstantPerCache,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub method: SweepMethod,
    pub degrees: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub cache: CacheConfig,
    pub num_cores: usize,
    pub topology: TopologyKey,
    pub workload: Workload,
    pub sweep: Option<SweepSpec>,
    pub out: Option<PathBuf>,
    pub max_cycles: Option<u64>,
}

impl RunConfig {
    pub fn topology(&self) -> Result<Topology, CliError> {
        let t = match &self.topology {
            TopologyKey::Degree(d) => Topology::uniform(self.num_cores, *d),
            TopologyKey::Groups(g) => Topology::with_cores(self.num_cores, g.clone()),
        };
        t.map_err(|e| CliError::Config(e.to_string()))
    }

    /// Resolves relative `trace` and `out` paths against `dir`.
    pub fn relative_to(mut self, dir: &Path) -> Self {
        if let Workload::Trace(p) = &mut self.workload {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
        if let Some(p) = &mut self.out {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
        self
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str, expected: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Config(format!("{key}: expected {expected}, got {value:?}")))
}

struct Entries(BTreeMap<String, (usize, String)>);

impl Entries {
    fn get<T: FromStr>(&self, key: &str, expected: &str) -> Result<Option<T>, CliError> {
        self.0
            .get(key)
            .map(|(_, v)| parse_value(key, v, expected))
            .transpose()
    }

    fn get_or<T: FromStr>(&self, key: &str, expected: &str, default: T) -> Result<T, CliError> {
        Ok(self.get(key, expected)?.unwrap_or(default))
    }

    fn has(&self, key: &str) -> bool {
        self.0.contains_key(key)
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(|(_, v)| v.as_str())
    }
}

fn parse_degrees(text: &str) -> Result<Vec<usize>, CliError> {
    let degrees: Vec<usize> = text
        .split(',')
        .map(|s| parse_value("sweep.degrees", s.trim(), "a comma-separated list of positive integers"))
        .collect::<Result<_, _>>()?;
    if degrees.is_empty() || degrees.contains(&0) {
        return Err(CliError::Config(
            "sweep.degrees: expected a comma-separated list of positive integers".into(),
        ));
    }
    Ok(degrees)
}

/// Parses and validates a configuration file's text.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let mut map = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Config(format!(
                "line {}: expected `key = value`, got {line:?}",
                idx + 1
            )));
        };
        let (key, value) = (key.trim(), value.trim());
        let known = CACHE_KEYS.contains(&key)
            || OTHER_KEYS.contains(&key)
            || SYNTHETIC_KEYS.contains(&key);
        if !known {
            return Err(CliError::Config(format!("line {}: unknown key {key:?}", idx + 1)));
        }
        if let Some((first, _)) = map.insert(key.to_string(), (idx + 1, value.to_string())) {
            return Err(CliError::Config(format!(
                "line {}: key {key:?} already set on line {first}",
                idx + 1
            )));
        }
    }
    let e = Entries(map);

    let defaults = CacheConfig::default();
    let int = "a non-negative integer";
    let cache = CacheConfig {
        sets: e.get_or("sets", int, defaults.sets)?,
        ways: e.get_or("ways", int, defaults.ways)?,
        block_size: e.get_or("block_size", int, defaults.block_size)?,
        ports: e.get_or("ports", int, defaults.ports)?,
        banks: e.get_or("banks", int, defaults.banks)?,
        hit_latency: e.get_or("hit_latency", int, defaults.hit_latency)?,
        miss_latency: e.get_or("miss_latency", int, defaults.miss_latency)?,
        mshr_entries: e.get_or("mshr_entries", int, defaults.mshr_entries)?,
        address_bits: e.get_or("address_bits", int, defaults.address_bits)?,
    };
    cache
        .validate()
        .map_err(|err| CliError::Config(err.to_string()))?;

    let num_cores: usize = e
        .get("num_cores", "a positive integer")?
        .ok_or_else(|| CliError::Config("missing required key num_cores (a positive integer)".into()))?;
    if num_cores == 0 {
        return Err(CliError::Config("num_cores: expected a positive integer, got 0".into()));
    }

    let topology = match (e.raw("sharing_degree"), e.raw("groups")) {
        (Some(_), Some(_)) => {
            return Err(CliError::Config(
                "sharing_degree and groups are mutually exclusive".into(),
            ))
        }
        (_, Some(g)) => TopologyKey::Groups(
            Topology::parse_groups(g).map_err(|err| CliError::Config(format!("groups: {err}")))?,
        ),
        _ => TopologyKey::Degree(e.get_or("sharing_degree", "a positive integer", 1)?),
    };

    let has_synthetic = SYNTHETIC_KEYS.iter().any(|k| e.has(k));
    let workload = match (e.raw("trace"), has_synthetic) {
        (Some(_), true) => {
            return Err(CliError::Config(
                "exactly one workload source: got both trace and synthetic.* keys".into(),
            ))
        }
        (None, false) => {
            return Err(CliError::Config(
                "exactly one workload source: set trace = <path> or synthetic.footprint_instrs".into(),
            ))
        }
        (Some(path), false) => Workload::Trace(PathBuf::from(path)),
        (None, true) => {
            let d = SyntheticSpec::default();
            let spec = SyntheticSpec {
                num_cores,
                warps_per_core: e.get_or("synthetic.warps_per_core", int, d.warps_per_core)?,
                footprint_instrs: e.get("synthetic.footprint_instrs", "a positive integer")?.ok_or_else(|| {
                    CliError::Config(
                        "missing required key synthetic.footprint_instrs (a positive integer)".into(),
                    )
                })?,
                instr_size: e.get_or("synthetic.instr_size", int, d.instr_size)?,
                loop_iterations: e.get_or("synthetic.loop_iterations", int, d.loop_iterations)?,
                divergence_prob: e.get_or(
                    "synthetic.divergence_prob",
                    "a probability in [0, 1]",
                    d.divergence_prob,
                )?,
                side_path_len: e.get_or("synthetic.side_path_len", int, d.side_path_len)?,
                stagger_cycles: e.get_or("synthetic.stagger_cycles", int, d.stagger_cycles)?,
                seed: e.get_or("synthetic.seed", int, d.seed)?,
            };
            spec.validate()
                .map_err(|err| CliError::Config(err.to_string()))?;
            Workload::Synthetic(spec)
        }
    };

    let sweep = match (e.raw("sweep.method"), e.raw("sweep.degrees")) {
        (None, None) => None,
        (method, degrees) => {
            let method = match method.unwrap_or("2") {
                "1" => SweepMethod::ConstantTotal,
                "2" => SweepMethod::ConstantPerCache,
                other => {
                    return Err(CliError::Config(format!(
                        "sweep.method: expected 1 or 2, got {other:?}"
                    )))
                }
            };
            let degrees = parse_degrees(degrees.ok_or_else(|| {
                CliError::Config("missing required key sweep.degrees (comma-separated list)".into())
            })?)?;
            if let Some(bad) = degrees.iter().find(|&&d| !num_cores.is_multiple_of(d)) {
                return Err(CliError::Config(format!(
                    "sweep.degrees: degree {bad} does not divide num_cores {num_cores}"
                )));
            }
            Some(SweepSpec { method, degrees })
        }
    };

    let max_cycles = e.get("max_cycles", "a positive integer")?;
    if max_cycles == Some(0) {
        return Err(CliError::Config("max_cycles: expected a positive integer, got 0".into()));
    }

    let config = RunConfig {
        cache,
        num_cores,
        topology,
        workload,
        sweep,
        out: e.raw("out").map(PathBuf::from),
        max_cycles,
    };
    config.topology()?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn err(text: &str) -> String {
        parse_config(text).unwrap_err().to_string()
    }

    #[test]
    fn minimal_config_takes_defaults() {
        let c = parse_config("num_cores=16\nsharing_degree=16\ntrace=t.txt\n").unwrap();
        assert_eq!(c.cache, CacheConfig::default());
        assert_eq!((c.cache.sets, c.cache.ways, c.cache.block_size), (4, 4, 128));
        assert_eq!(
            (c.cache.ports, c.cache.banks, c.cache.hit_latency, c.cache.miss_latency),
            (1, 1, 0, 10)
        );
        assert_eq!((c.cache.mshr_entries, c.cache.address_bits), (1, 32));
        assert_eq!(c.topology, TopologyKey::Degree(16));
        assert_eq!(c.workload, Workload::Trace("t.txt".into()));
        assert_eq!(c.sweep, None);
        assert_eq!(c.topology().unwrap().num_caches(), 1);
    }

    #[test]
    fn full_config() {
        let c = parse_config(
            "# header\n\
             sets = 8 # inline\n\
             ways=2\nports=2\nbanks=4\nhit_latency=1\nmiss_latency=20\nmshr_entries=4\n\
             num_cores = 4\ngroups = 0|1,2,3\n\
             synthetic.footprint_instrs = 100\nsynthetic.warps_per_core = 8\n\
             synthetic.divergence_prob = 0.25\nsynthetic.side_path_len = 12\nsynthetic.seed = 7\n\
             sweep.method = 1\nsweep.degrees = 1, 2,4\nout = r.csv\n",
        )
        .unwrap();
        assert_eq!(c.cache.sets, 8);
        assert_eq!(c.topology, TopologyKey::Groups(vec![vec![0], vec![1, 2, 3]]));
        let Workload::Synthetic(s) = &c.workload else { panic!() };
        assert_eq!((s.num_cores, s.warps_per_core, s.footprint_instrs), (4, 8, 100));
        assert_eq!((s.divergence_prob, s.side_path_len, s.seed), (0.25, 12, 7));
        assert_eq!(
            c.sweep,
            Some(SweepSpec { method: SweepMethod::ConstantTotal, degrees: vec![1, 2, 4] })
        );
        assert_eq!(c.out, Some("r.csv".into()));
    }

    #[test]
    fn rejects_two_workload_sources() {
        let e = err("num_cores=1\ntrace=t\nsynthetic.footprint_instrs=4\n");
        assert!(e.contains("exactly one workload source"), "{e}");
        let e = err("num_cores=1\n");
        assert!(e.contains("exactly one workload source"), "{e}");
    }

    #[test]
    fn rejects_non_dividing_sweep_degree() {
        let e = err("num_cores=16\ntrace=t\nsweep.degrees=1,3\n");
        assert!(e.contains("degree 3"), "{e}");
    }

    #[test]
    fn rejects_unknown_duplicate_and_malformed() {
        assert!(err("num_cores=1\ntrace=t\ncolour=red\n").contains("unknown key \"colour\""));
        assert!(err("num_cores=1\nnum_cores=2\ntrace=t\n").contains("already set"));
        assert!(err("num_cores=1\ntrace=t\nsets\n").contains("line 3"));
        let e = err("num_cores=1\ntrace=t\nways=many\n");
        assert!(e.contains("ways") && e.contains("integer"), "{e}");
    }

    #[test]
    fn rejects_missing_and_invalid_values() {
        assert!(err("trace=t\n").contains("num_cores"));
        assert!(err("num_cores=1\ntrace=t\nsets=3\n").contains("sets"));
        assert!(err("num_cores=4\ntrace=t\nsharing_degree=3\n").contains('3'));
        assert!(err("num_cores=3\ntrace=t\ngroups=0|2\n").contains("core 1 unassigned"));
        assert!(err("num_cores=2\nsynthetic.footprint_instrs=4\nsynthetic.divergence_prob=2\n")
            .contains("divergence_prob"));
        assert!(err("num_cores=2\nsynthetic.seed=4\n").contains("synthetic.footprint_instrs"));
        assert!(err("num_cores=2\ntrace=t\nsweep.method=3\nsweep.degrees=1\n").contains("sweep.method"));
        assert!(err("num_cores=2\ntrace=t\nsweep.method=1\n").contains("sweep.degrees"));
        assert!(err("num_cores=2\ntrace=t\nsharing_degree=1\ngroups=0,1\n").contains("exclusive"));
    }

    #[test]
    fn relative_paths_follow_the_config_file() {
        let c = parse_config("num_cores=1\ntrace=t.txt\nout=/abs/o.csv\n")
            .unwrap()
            .relative_to(Path::new("/cfg"));
        assert_eq!(c.workload, Workload::Trace("/cfg/t.txt".into()));
        assert_eq!(c.out, Some("/abs/o.csv".into()));
    }
}
