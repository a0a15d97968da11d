//! Order-σ² roughness corrections to the electromagnetic Casimir free energy
//! between a rough and a flat dielectric interface.
//!
//! Lengths are measured in units of 1/ω_p and frequencies and momenta in
//! units of ω_p unless a physical-units adapter from [`units`] is used.

pub mod casimir;
pub mod error;
pub mod experiment;
pub mod greens;
pub mod media;
pub mod quadrature;
pub mod roughness;
pub mod specfun;
pub mod units;

pub use casimir::{
    total_correction, Accuracy, CounterPotential, EnergyBreakdown, PfaCorrection, ResponseValue, Scenario, T2Matrix,
};
pub use error::{Error, QuadError, Result};
pub use experiment::{CombinedSpectrum, FitResult, ForceDataset, SpherePlateConfig};
pub use media::{Kinematics, PermittivityModel};
pub use quadrature::{MatsubaraPolicy, QuadSpec};
pub use roughness::{CorrelationSpec, HeightField, Spectrum};
