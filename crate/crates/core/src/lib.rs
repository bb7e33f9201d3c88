//! Open-system model of a ring photocell: spectra, Redfield and Lindblad
//! dissipators, steady states and the experiments built on them.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dissipators;
pub mod engine;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod model;
pub mod spectral;

pub use engine::{
    assemble_liouvillian, optimize_trap_rate, steady_state, CellSpec, Diagnostics, Liouvillian, Photocell,
    PhotocellMetrics, SteadyState, TrapSearch,
};
pub use error::{Error, Result};
pub use model::{BathSpec, ExtractionMode, ImperfectionSpec, RingSpec, ScenarioKind, TrapSpec};
