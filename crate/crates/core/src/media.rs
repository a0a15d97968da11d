//! Permittivity models, imaginary-frequency kinematics and Fresnel coefficients.

use serde::{Deserialize, Serialize};

use crate::error::{domain, parameter, Error, Result};

/// Dielectric response of both plates (identical materials).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PermittivityModel {
    Plasma { wp: f64 },
    Drude { wp: f64, gamma: f64 },
    IdealMetal,
}

impl PermittivityModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PermittivityModel::Plasma { wp } if !(wp > 0.0 && wp.is_finite()) => {
                parameter(format!("plasma frequency must be positive, got {wp}"))
            }
            PermittivityModel::Drude { wp, gamma } if !(wp > 0.0 && wp.is_finite() && gamma >= 0.0 && gamma.is_finite()) => {
                parameter(format!("Drude parameters need wp > 0 and gamma >= 0, got wp = {wp}, gamma = {gamma}"))
            }
            _ => Ok(()),
        }
    }

    pub fn is_ideal(&self) -> bool {
        matches!(self, PermittivityModel::IdealMetal)
    }

    pub fn plasma_frequency(&self) -> Option<f64> {
        match *self {
            PermittivityModel::Plasma { wp } | PermittivityModel::Drude { wp, .. } => Some(wp),
            PermittivityModel::IdealMetal => None,
        }
    }

    /// ζ²(ε(ζ) − 1), finite down to ζ = 0.
    pub fn delta(&self, zeta: f64) -> f64 {
        match *self {
            PermittivityModel::Plasma { wp } => wp * wp,
            PermittivityModel::Drude { wp, gamma } => {
                if gamma == 0.0 {
                    wp * wp
                } else {
                    wp * wp * zeta / (zeta + gamma)
                }
            }
            PermittivityModel::IdealMetal => f64::INFINITY,
        }
    }
}

/// ε(ζ) on the imaginary axis.
pub fn permittivity(model: &PermittivityModel, zeta: f64) -> Result<f64> {
    if !(zeta > 0.0) {
        return domain(format!("permittivity needs zeta > 0, got {zeta}"));
    }
    model.validate()?;
    match *model {
        PermittivityModel::Plasma { wp } | PermittivityModel::Drude { wp, gamma: 0.0 } => Ok(1.0 + (wp / zeta).powi(2)),
        PermittivityModel::Drude { wp, gamma } => Ok(1.0 + wp * wp / (zeta * (zeta + gamma))),
        PermittivityModel::IdealMetal => Err(Error::Domain(
            "ideal metal has no finite permittivity; use the ideal-metal kernels".into(),
        )),
    }
}

/// Per-(ζ, k) quantities shared by every integrand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kinematics {
    pub zeta: f64,
    pub k: f64,
    /// ε(ζ); infinite at ζ = 0 for metals and for the ideal metal.
    pub eps: f64,
    /// Vacuum κ = √(k²+ζ²).
    pub kappa3: f64,
    /// Medium κ = √(k²+ζ²ε).
    pub kappa_eps: f64,
    pub r_te: f64,
    pub r_tm: f64,
    /// 1 − r_te², formed without cancellation.
    pub t_te: f64,
    /// 1 − r_tm², formed without cancellation.
    pub t_tm: f64,
}

/// Kinematics at (ζ, k), with the analytic ζ → 0 limits of each model.
pub fn kinematics(model: &PermittivityModel, zeta: f64, k: f64) -> Result<Kinematics> {
    if !(zeta >= 0.0 && k >= 0.0) || (zeta == 0.0 && k == 0.0) {
        return domain(format!("kinematics needs zeta, k >= 0 not both zero (zeta = {zeta}, k = {k})"));
    }
    model.validate()?;
    let kappa3 = k.hypot(zeta);
    if model.is_ideal() {
        return Ok(Kinematics {
            zeta,
            k,
            eps: f64::INFINITY,
            kappa3,
            kappa_eps: f64::INFINITY,
            r_te: -1.0,
            r_tm: 1.0,
            t_te: 0.0,
            t_tm: 0.0,
        });
    }
    let delta = model.delta(zeta);
    let kappa_eps = (kappa3 * kappa3 + delta).sqrt();
    let s = kappa3 + kappa_eps;
    let r_te = -delta / (s * s);
    let t_te = 4.0 * kappa3 * kappa_eps / (s * s);
    if zeta == 0.0 {
        return Ok(Kinematics {
            zeta,
            k,
            eps: f64::INFINITY,
            kappa3,
            kappa_eps,
            r_te,
            r_tm: 1.0,
            t_te,
            t_tm: 0.0,
        });
    }
    let eps = 1.0 + delta / (zeta * zeta);
    let em1 = delta / (zeta * zeta);
    let sb = eps * kappa3 + kappa_eps;
    // εκ − κ_ε = (ε−1)((ε+1)k² + εζ²)/(εκ + κ_ε)
    let r_tm = em1 * ((eps + 1.0) * k * k + eps * zeta * zeta) / (sb * sb);
    let t_tm = 4.0 * eps * kappa3 * kappa_eps / (sb * sb);
    Ok(Kinematics {
        zeta,
        k,
        eps,
        kappa3,
        kappa_eps,
        r_te,
        r_tm,
        t_te,
        t_tm,
    })
}

/// ζ/(1+√ε(ζ)), the long-wavelength surface-plasmon propagator.
pub fn plasmon_propagator(model: &PermittivityModel, zeta: f64) -> Result<f64> {
    let eps = permittivity(model, zeta)?;
    Ok(zeta / (1.0 + eps.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const PL: PermittivityModel = PermittivityModel::Plasma { wp: 1.0 };

    #[test]
    fn permittivity_values() {
        assert!((permittivity(&PL, 1.0).unwrap() - 2.0).abs() < 1e-15);
        assert!((permittivity(&PL, 1.0 / 3.0).unwrap() - 10.0).abs() < 1e-13);
        let dr = PermittivityModel::Drude { wp: 1.0, gamma: 0.0 };
        for &z in &[0.01, 0.7, 40.0] {
            assert_eq!(permittivity(&dr, z).unwrap(), permittivity(&PL, z).unwrap());
        }
        assert!(permittivity(&PL, 0.0).is_err());
        assert!(permittivity(&PermittivityModel::IdealMetal, 1.0).is_err());
        assert!(permittivity(&PermittivityModel::Plasma { wp: -1.0 }, 1.0).is_err());
    }

    #[test]
    fn kinematics_values() {
        let kin = kinematics(&PL, 1.0, 0.0).unwrap();
        let s2 = 2f64.sqrt();
        assert!((kin.kappa3 - 1.0).abs() < 1e-15);
        assert!((kin.kappa_eps - s2).abs() < 1e-15);
        assert!((kin.r_te - (1.0 - s2) / (1.0 + s2)).abs() < 1e-15);
        let k0 = kinematics(&PL, 0.0, 0.8).unwrap();
        assert!((k0.kappa_eps - (0.64f64 + 1.0).sqrt()).abs() < 1e-15);
        assert_eq!(k0.r_tm, 1.0);
        let dr = PermittivityModel::Drude { wp: 1.0, gamma: 0.005 };
        let kd = kinematics(&dr, 0.0, 0.8).unwrap();
        assert_eq!((kd.kappa_eps, kd.r_te, kd.r_tm), (0.8, 0.0, 1.0));
        let id = kinematics(&PermittivityModel::IdealMetal, 0.3, 0.2).unwrap();
        assert_eq!((id.r_te, id.r_tm), (-1.0, 1.0));
        assert!(kinematics(&PL, 0.0, 0.0).is_err());
        assert!(kinematics(&PL, -1.0, 0.0).is_err());
    }

    #[test]
    fn plasmon_values() {
        let p = plasmon_propagator(&PL, 1.0).unwrap();
        assert!((p - 1.0 / (1.0 + 2f64.sqrt())).abs() < 1e-15);
        let big = PermittivityModel::Plasma { wp: 1e12 };
        assert!(plasmon_propagator(&big, 1.0).unwrap() < 1e-11);
        let z = 1e-4;
        assert!((plasmon_propagator(&PL, z).unwrap() / (z * z) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn large_permittivity_limit() {
        let big = PermittivityModel::Plasma { wp: 1e8 };
        let kin = kinematics(&big, 0.5, 0.3).unwrap();
        assert!((kin.r_te + 1.0).abs() < 1e-7);
        assert!((kin.r_tm - 1.0).abs() < 1e-7);
    }

    fn model() -> impl Strategy<Value = PermittivityModel> {
        prop_oneof![
            (0.1f64..10.0).prop_map(|wp| PermittivityModel::Plasma { wp }),
            (0.1f64..10.0, 0.0f64..1.0).prop_map(|(wp, gamma)| PermittivityModel::Drude { wp, gamma }),
        ]
    }

    proptest! {
        #[test]
        fn kappa_difference(m in model(), z in 1e-3f64..50.0, k in 0.0f64..50.0) {
            let kin = kinematics(&m, z, k).unwrap();
            let lhs = kin.kappa_eps.powi(2) - kin.kappa3.powi(2);
            let rhs = z * z * (kin.eps - 1.0);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * kin.kappa_eps.powi(2));
            prop_assert!(kin.kappa_eps >= kin.kappa3);
        }

        #[test]
        fn reflection_signs(m in model(), z in 1e-3f64..50.0, k in 0.0f64..50.0) {
            let kin = kinematics(&m, z, k).unwrap();
            prop_assert!(kin.r_te <= 0.0 && kin.r_te >= -1.0);
            prop_assert!(kin.r_tm >= 0.0 && kin.r_tm <= 1.0);
            prop_assert!(kin.r_te * kin.r_tm <= 0.0);
            prop_assert!((kin.t_te - (1.0 - kin.r_te * kin.r_te)).abs() < 1e-12);
            prop_assert!((kin.t_tm - (1.0 - kin.r_tm * kin.r_tm)).abs() < 1e-12);
        }

        #[test]
        fn te_reflection_monotone_in_k(wp in 0.1f64..10.0, z in 1e-3f64..20.0, k in 0.0f64..20.0, dk in 1e-3f64..5.0) {
            let m = PermittivityModel::Plasma { wp };
            let a = kinematics(&m, z, k).unwrap();
            let b = kinematics(&m, z, k + dk).unwrap();
            prop_assert!(b.r_te.abs() <= a.r_te.abs());
        }
    }
}
