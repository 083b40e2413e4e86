//! Trace-driven, cycle-stepped simulation of instruction caches shared among
//! processor cores.
//!
//! Cores fetch from per-core instruction streams ([`workload`]) through
//! caches ([`icache`]) assigned by a [`topology`]. The [`engine`] arbitrates
//! ports and banks cycle by cycle, and [`metrics`] turns the counters into
//! miss rate, stall rate and storage figures across sharing sweeps.

pub mod engine;
pub mod error;
pub mod icache;
pub mod metrics;
pub mod reference;
pub mod topology;
pub mod workload;

pub use engine::{run, AccessClass, AccessRecord, Engine, EngineConfig, SimOutput};
pub use error::{Result, SimError};
pub use icache::{AddressParts, CacheConfig, CacheState, FillOutcome, Probe};
pub use metrics::{area, sweep_method1, sweep_method2, AreaReport, Counters, SimStats, SweepRow};
pub use reference::reference_run;
pub use topology::Topology;
pub use workload::{generate, parse_trace, FetchStream, SyntheticSpec};
