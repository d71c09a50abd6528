//! Monte Carlo simulation under the physical and the myopic measure.

pub mod engine;
pub mod estimate;
pub mod policy;
pub mod rng;
pub mod samplers;

pub use engine::{
    mc_expect, myopic_factor_drift, novikov_partition, sample_terminal_exact, Deflator, ExactDynamics, Market, Measure,
    NovikovReport, PathBundle, PathTerminal, SimConfig, SimOutput, Simulation, StepDiagnostic,
};
pub use estimate::McEstimate;
pub use policy::{perturbation_set, PolicySpec};
pub use rng::{Purpose, RngSpec};
pub use samplers::{sample_cir_exact, sample_ou_exact, CirDynamics, OuDynamics};
