//! Streaming regression with prototype-based generative replay.
//!
//! A decision-tree regressor discretizes the continuous target space into
//! virtual labels, an incremental LVQ-style prototype memory summarizes the
//! stream, and a mixture density network is trained on batches that mix real
//! samples with synthetic ones drawn from the prototypes. The [`eval`]
//! module hosts the protocols used to measure forgetting on non-stationary
//! streams.

pub mod engine;
pub mod error;
pub mod eval;
pub mod math;
pub mod mdn;
pub mod proto;
pub mod real;
pub mod rehearsal;
pub mod reservoir;
pub mod stream;
pub mod synth;
pub mod tree;

pub use error::{Error, Result};
pub use real::{real, Real};

/// Concrete double-precision instantiations of the generic types; most
/// callers want these.
pub type Sample64 = stream::Sample<f64>;
pub type LabeledBatch64 = stream::LabeledBatch<f64>;
pub type RunningStats64 = stream::RunningStats<f64>;
pub type TreeParams64 = tree::TreeParams<f64>;
pub type DecisionTree64 = tree::DecisionTree<f64>;
pub type IlvqParams64 = proto::IlvqParams<f64>;
pub type PrototypeMemory64 = proto::PrototypeMemory<f64>;
pub type MdnConfig64 = mdn::MdnConfig<f64>;
pub type MdnParams64 = mdn::MdnParams<f64>;
pub type RehearsalConfig64 = rehearsal::RehearsalConfig<f64>;
pub type EngineConfig64 = engine::EngineConfig<f64>;
pub type Engine64 = engine::Engine<f64>;
pub type StepReport64 = engine::StepReport<f64>;
pub type PhaseReport64 = eval::PhaseReport<f64>;
pub type ForgettingSummary64 = eval::ForgettingSummary<f64>;
pub type ClearReport64 = eval::ClearReport<f64>;
