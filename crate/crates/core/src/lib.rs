//! Simulation and evaluation of static mappings of task-graph
//! applications onto cloud platforms.
//!
//! The workflow mirrors the four classic steps: model an application as
//! tasks, runnables and labels ([`appmodel`]); describe the platform's
//! hosts, links and routes ([`platform`]); assign every runnable and
//! label to a host ([`mapping`]); and execute the mapped application on
//! a deterministic discrete-event kernel under max-min fair resource
//! sharing ([`simkernel`]), producing makespan, per-host energy
//! ([`metrics`]) and a Paje timeline ([`trace`]).

pub mod appmodel;
pub mod error;
pub mod escience;
pub mod mapping;
pub mod metrics;
pub mod platform;
pub mod simkernel;
pub mod trace;

pub use appmodel::{
    lift_dag, normalize_application, parse_application, parse_application_str,
    serialize_application, validate_application, write_application, ApplicationModel,
};
pub use error::{Error, Result};
pub use escience::{generate_escience, EscienceProfile};
pub use mapping::{
    map_all_on, map_greedy_load, map_random, map_round_robin, parse_mapping, serialize_mapping,
    validate_mapping, write_mapping, AllOnStrategy, GreedyLoadStrategy, Mapping, MappingStrategy,
    RandomStrategy, RoundRobinStrategy, SplitMix64, StrategySpec,
};
pub use metrics::{summarize_batch, BatchRow, BatchSummary, SimulationResult};
pub use platform::{parse_platform, parse_platform_str, serialize_platform, PlatformModel};
pub use simkernel::{simulate, simulate_with, KernelDiagnostics, SimulateOptions};
pub use trace::{emit_paje, render_paje, validate_paje};
