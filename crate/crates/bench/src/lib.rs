//! Shared fixtures for the benchmarks.

use rough_casimir::casimir::{Accuracy, Scenario};
use rough_casimir::{CorrelationSpec, PermittivityModel};

pub const PLASMA: PermittivityModel = PermittivityModel::Plasma { wp: 1.0 };

/// A mid-range plasma scenario with the given spectrum, at relative tolerance `tol`.
pub fn scenario(spec: CorrelationSpec, a: f64, tol: f64) -> Scenario {
    Scenario::new(PLASMA, spec, a).with_accuracy(Accuracy::new(tol))
}

pub fn gaussian(lc: f64) -> CorrelationSpec {
    CorrelationSpec::Gaussian { sigma: 1.0, lc }
}

pub fn exponential(lc: f64) -> CorrelationSpec {
    CorrelationSpec::Exponential { sigma: 1.0, lc }
}
