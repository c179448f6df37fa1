//! Kuramoto phase oscillators on graphs generated from graphons.
//!
//! The crate covers the whole pipeline: kernels ([`graphon`]), finite graphs
//! sampled or averaged from them ([`graphgen`]), kernel-operator spectra and
//! the critical couplings they predict ([`spectral`]), Heun integration of the
//! dynamics ([`simulate`]), and sweeps, threshold estimates and twisted-state
//! diagnostics ([`analysis`]).

pub mod analysis;
pub mod error;
pub mod graphgen;
pub mod graphon;
pub mod simulate;
pub mod spectral;

#[cfg(test)]
mod quadrature;

pub use analysis::{detect_winding, estimate_kc, sqrt_scaling_fit, sweep, GraphSpec, SweepResult, SweepRow, TwistReport};
pub use error::{Error, Result};
pub use graphon::{Graphon, GraphonKind, StepKernel};
pub use graphgen::{
    deterministic_graph, dense_random, paley, sparse_random, DegreeStats, Graph, Model, Storage,
};
pub use simulate::{init_state, order_classical, order_graph, order_norm, run, run_from, OrderSample, OscillatorState, RunOutput, SimConfig};
pub use spectral::{spectral_report, FrequencyDensity, Method, SpectralReport};
