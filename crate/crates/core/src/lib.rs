//! Generalised network autoregressive (GNAR) processes: network-derived
//! regression structure, simulation, least-squares estimation, forecasting,
//! network autocorrelation diagnostics, spectral checks and influence indices.

pub mod correlogram;
pub mod error;
pub mod fit;
pub mod graph;
pub mod influence;
pub mod io;
pub mod model;
pub mod rng;
pub mod spectral;

#[cfg(test)]
mod testutil;

pub use correlogram::{
    corbit_layout, grid, nacf, pnacf, wagner_layout, CorbitLayout, CorrelogramKind, NacfGrid, WagnerLayout,
};
pub use error::{GnarError, Result};
pub use fit::{fit_least_squares, forecast, information_criteria, CandidateModel, FitResult};
pub use graph::{Network, NetworkStructure, WeightMatrix};
pub use influence::{influence_report, InfluenceReport, RelevanceVariant};
pub use io::{Dataset, FitRecord, Transform};
pub use model::{
    check_stationarity, simulate, Alpha, AlphaMode, GnarCoefficients, GnarOrder, NetworkTimeSeries, SimulationConfig,
};
pub use spectral::{verify_conditional_support, SupportReport};
