//! Deterministic, seed-reproducible evolution over nested part-whole
//! hierarchies ("holons").
//!
//! A holon is either a leaf or a whole owning other holons. Populations of
//! root holons reproduce, vary, fuse into higher-level wholes, and fission
//! back into their parts; scenarios in [`scenarios`] supply fitness. Every
//! run is driven by one seeded ChaCha stream, so `(config, seed)` fixes the
//! complete event log.
//!
//! The core is generic over the scalar type ([`Scalar`], implemented for
//! `f32` and `f64`); the aliases below name the common `f64` instances.

pub mod engine;
pub mod events;
pub mod holon;
pub mod io;
pub mod metrics;
pub mod operators;
pub mod report;
pub mod scalar;
pub mod scenarios;
pub mod stats;

pub use engine::{
    run, Enables, Engine, EngineConfig, EngineError, EngineState, RunRecord, RunStatus,
};
pub use events::{DeathCause, Event, EventCounts, EventKind};
pub use holon::{
    Holon, HolonId, IdSource, Mechanisms, MutationRates, Origin, ReproMode, TraitVector,
    VariationKind,
};
pub use metrics::{condition_audit, detect_transitions, AuditReport, GenerationMetrics};
pub use operators::{BlendWeights, OperatorError, SelectionScheme};
pub use scalar::Scalar;
pub use scenarios::Scenario;

pub type HolonF64 = holon::Holon<f64>;
pub type HolonF32 = holon::Holon<f32>;
pub type EngineF64 = engine::Engine<f64>;
pub type EngineF32 = engine::Engine<f32>;
pub type ConfigF64 = engine::EngineConfig<f64>;
pub type ConfigF32 = engine::EngineConfig<f32>;
