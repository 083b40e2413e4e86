//! Assignment of cores to cache instances.

use crate::error::{Result, SimError};

/// A partition of cores into groups; each group shares one cache.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    num_cores: usize,
    groups: Vec<Vec<usize>>,
    cache_of: Vec<usize>,
}

impl Topology {
    /// Consecutive blocks of `sharing_degree` cores share one cache.
    pub fn uniform(num_cores: usize, sharing_degree: usize) -> Result<Self> {
        if num_cores == 0 {
            return Err(SimError::config("num_cores must be at least 1"));
        }
        if sharing_degree == 0 || !num_cores.is_multiple_of(sharing_degree) {
            return Err(SimError::config(format!(
                "sharing degree {sharing_degree} does not divide num_cores {num_cores}"
            )));
        }
        let groups = (0..num_cores)
            .step_by(sharing_degree)
            .map(|start| (start..start + sharing_degree).collect())
            .collect();
        Self::asymmetric(groups)
    }

    /// Builds a topology from explicit groups, which must partition
    /// `0..num_cores` where `num_cores` is one past the largest core id.
    pub fn asymmetric(groups: Vec<Vec<usize>>) -> Result<Self> {
        if groups.is_empty() {
            return Err(SimError::config("topology needs at least one group"));
        }
        if let Some(i) = groups.iter().position(|g| g.is_empty()) {
            return Err(SimError::config(format!("group {i} is empty")));
        }
        let num_cores = groups.iter().flatten().max().map_or(0, |&m| m + 1);
        Self::with_cores(num_cores, groups)
    }

    /// Like [`Topology::asymmetric`], but checks coverage of an explicit core count.
    pub fn with_cores(num_cores: usize, groups: Vec<Vec<usize>>) -> Result<Self> {
        const UNASSIGNED: usize = usize::MAX;
        let mut cache_of = vec![UNASSIGNED; num_cores];
        for (gi, group) in groups.iter().enumerate() {
            if group.is_empty() {
                return Err(SimError::config(format!("group {gi} is empty")));
            }
            for &core in group {
                if core >= num_cores {
                    return Err(SimError::config(format!(
                        "core {core} in group {gi} is out of range for {num_cores} cores"
                    )));
                }
                if cache_of[core] != UNASSIGNED {
                    return Err(SimError::config(format!(
                        "core {core} appears in two groups"
                    )));
                }
                cache_of[core] = gi;
            }
        }
        if let Some(core) = cache_of.iter().position(|&c| c == UNASSIGNED) {
            return Err(SimError::config(format!("core {core} unassigned")));
        }
        if num_cores == 0 {
            return Err(SimError::config("num_cores must be at least 1"));
        }
        Ok(Topology {
            num_cores,
            groups,
            cache_of,
        })
    }

    pub fn num_cores(&self) -> usize {
        self.num_cores
    }

    pub fn num_caches(&self) -> usize {
        self.groups.len()
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn cache_of(&self, core: usize) -> usize {
        self.cache_of[core]
    }

    /// Parses `0|1,2,3`: pipe-separated groups of comma-separated core ids.
    pub fn parse_groups(text: &str) -> Result<Vec<Vec<usize>>> {
        text.split('|')
            .enumerate()
            .map(|(gi, g)| {
                g.split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| {
                        s.parse::<usize>().map_err(|_| {
                            SimError::config(format!("group {gi}: bad core id {s:?}"))
                        })
                    })
                    .collect()
            })
            .collect()
    }
}
