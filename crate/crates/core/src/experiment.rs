//! Sphere-plate comparison: combined roughness spectra, the Derjaguin force,
//! the ratio to the flat-plate energy, force-data ingestion and the
//! effective-separation fit.
//!
//! Configurations are in physical units (lengths in nm, permittivity
//! parameters in nm⁻¹, forces in pN); the energy kernels run in units of
//! the plasma frequency.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::casimir::{flat_energy, total_correction_with, Accuracy};
use crate::error::{parameter, Error, Result};
use crate::media::PermittivityModel;
use crate::roughness::{spectrum, CorrelationSpec, Spectrum};
use crate::units::{ev_to_inv_nm, inv_nm2_to_pn};

/// Sum of two independent roughness spectra.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CombinedSpectrum {
    pub plate: CorrelationSpec,
    pub sphere: CorrelationSpec,
}

impl Spectrum for CombinedSpectrum {
    fn sigma2(&self) -> f64 {
        self.plate.sigma2() + self.sphere.sigma2()
    }

    fn value(&self, q: f64) -> f64 {
        self.plate.value(q) + self.sphere.value(q)
    }

    fn moments(&self, k: f64, kp: f64) -> [f64; 3] {
        let p = self.plate.moments(k, kp);
        let s = self.sphere.moments(k, kp);
        [p[0] + s[0], p[1] + s[1], p[2] + s[2]]
    }

    fn lengths(&self) -> Vec<f64> {
        let mut out = self.plate.lengths();
        for l in self.sphere.lengths() {
            if !out.contains(&l) {
                out.push(l);
            }
        }
        out
    }

    fn check(&self) -> Result<()> {
        self.plate.check()?;
        self.sphere.check()
    }
}

/// D_plate(q) + D_sphere(q).
pub fn combine_spectra(plate: &CorrelationSpec, sphere: &CorrelationSpec, q: f64) -> Result<f64> {
    Ok(spectrum(plate, q)? + spectrum(sphere, q)?)
}

/// A rough sphere of large radius above a rough plate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpherePlateConfig {
    /// Sphere radius in nm.
    pub radius: f64,
    /// Plate roughness with σ as reported (before `sigma_multiplier`).
    pub plate_spec: CorrelationSpec,
    pub sphere_spec: CorrelationSpec,
    /// Permittivity with parameters in nm⁻¹.
    pub model: PermittivityModel,
    /// Multiplies every measured force.
    pub calibration: f64,
    /// Effective flat-plate permittivity for the separation-shift fit.
    pub model_eff: Option<PermittivityModel>,
    /// Applied to the reported standard deviations of both surfaces.
    pub sigma_multiplier: f64,
    pub g2: f64,
    pub accuracy: Accuracy,
}

impl SpherePlateConfig {
    pub fn new(radius: f64, plate_spec: CorrelationSpec, sphere_spec: CorrelationSpec, model: PermittivityModel) -> Self {
        Self {
            radius,
            plate_spec,
            sphere_spec,
            model,
            calibration: 1.0,
            model_eff: None,
            sigma_multiplier: 1.0,
            g2: 1.0,
            accuracy: Accuracy::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return parameter(format!("sphere radius must be positive, got {}", self.radius));
        }
        if !(self.calibration > 0.0 && self.calibration.is_finite()) {
            return parameter(format!("calibration factor must be positive, got {}", self.calibration));
        }
        if !(self.sigma_multiplier > 0.0 && self.sigma_multiplier.is_finite()) {
            return parameter(format!("sigma multiplier must be positive, got {}", self.sigma_multiplier));
        }
        if !(0.0..=1.0).contains(&self.g2) {
            return parameter(format!("g2 must lie in [0, 1], got {}", self.g2));
        }
        self.model.validate()?;
        if self.model.is_ideal() {
            return Err(Error::Unsupported("the sphere-plate comparison needs a finite plasma frequency".into()));
        }
        if let Some(m) = &self.model_eff {
            m.validate()?;
            if m.is_ideal() {
                return Err(Error::Unsupported("the effective model needs a finite plasma frequency".into()));
            }
        }
        self.effective_spectrum().check()
    }

    /// Both spectra with the multiplier applied to σ.
    pub fn effective_spectrum(&self) -> CombinedSpectrum {
        CombinedSpectrum {
            plate: self.plate_spec.with_sigma(self.plate_spec.sigma() * self.sigma_multiplier),
            sphere: self.sphere_spec.with_sigma(self.sphere_spec.sigma() * self.sigma_multiplier),
        }
    }

    /// Standard deviation of the combined profile in nm.
    pub fn sigma_total(&self) -> f64 {
        self.effective_spectrum().sigma2().sqrt()
    }

    pub fn warnings(&self, a: f64) -> Vec<String> {
        let mut out = Vec::new();
        if a > self.radius / 500.0 {
            out.push(format!("separation {a} nm exceeds R/500; the Derjaguin force is unreliable there"));
        }
        out
    }
}

const PRESET_RADIUS_NM: f64 = 1e5;
const PRESET_SIGMA_MULTIPLIER: f64 = 1.7;

/// Named parameter sets for gold-coated sphere-plate measurements.
/// Known names: `film-200nm`, `film-100nm`.
pub fn preset(name: &str) -> Option<SpherePlateConfig> {
    let (plate_sigma, plate_lc, calibration) = match name {
        "film-200nm" => (4.3, 25.0, 1.0),
        "film-100nm" => (2.6, 21.0, 0.94),
        _ => return None,
    };
    let ev = ev_to_inv_nm;
    let raw = |s: f64| s / PRESET_SIGMA_MULTIPLIER;
    let mut cfg = SpherePlateConfig::new(
        PRESET_RADIUS_NM,
        CorrelationSpec::Exponential { sigma: raw(plate_sigma), lc: plate_lc },
        CorrelationSpec::Exponential { sigma: raw(8.0), lc: 33.0 },
        PermittivityModel::Drude { wp: ev(9.0), gamma: ev(0.045) },
    );
    cfg.calibration = calibration;
    cfg.sigma_multiplier = PRESET_SIGMA_MULTIPLIER;
    cfg.model_eff = Some(PermittivityModel::Drude { wp: ev(7.5), gamma: ev(0.045) });
    Some(cfg)
}

/// Energies per area in nm⁻³ at separation `a` nm and T = 0.
struct Energies {
    flat: f64,
    correction: f64,
}

/// Rescale a model with parameters in nm⁻¹ to units of its plasma frequency.
fn natural(model: &PermittivityModel) -> Result<(PermittivityModel, f64)> {
    match *model {
        PermittivityModel::Plasma { wp } => Ok((PermittivityModel::Plasma { wp: 1.0 }, wp)),
        PermittivityModel::Drude { wp, gamma } => Ok((PermittivityModel::Drude { wp: 1.0, gamma: gamma / wp }, wp)),
        PermittivityModel::IdealMetal => Err(Error::Unsupported("no plasma frequency to set the scale".into())),
    }
}

fn scale_spec(spec: &CorrelationSpec, wp: f64) -> CorrelationSpec {
    let mut out = spec.with_sigma(spec.sigma() * wp);
    match &mut out {
        CorrelationSpec::Gaussian { lc, .. }
        | CorrelationSpec::Exponential { lc, .. }
        | CorrelationSpec::Affine { lc, .. }
        | CorrelationSpec::Rational { lc, .. } => *lc *= wp,
        _ => {}
    }
    out
}

fn flat_nm(model: &PermittivityModel, a: f64) -> Result<f64> {
    let (m, wp) = natural(model)?;
    Ok(flat_energy(&m, a * wp, 0.0)? * wp.powi(3))
}

fn energies(cfg: &SpherePlateConfig, a: f64) -> Result<Energies> {
    cfg.validate()?;
    if !(a > 0.0 && a.is_finite()) {
        return parameter(format!("separation must be positive, got {a}"));
    }
    let (m, wp) = natural(&cfg.model)?;
    let eff = cfg.effective_spectrum();
    let sp = CombinedSpectrum {
        plate: scale_spec(&eff.plate, wp),
        sphere: scale_spec(&eff.sphere, wp),
    };
    let flat = flat_energy(&m, a * wp, 0.0)?;
    let correction = if sp.sigma2() == 0.0 {
        0.0
    } else {
        total_correction_with(&m, &sp, a * wp, 0.0, cfg.g2, &cfg.accuracy)?.total_correction
    };
    let w3 = wp.powi(3);
    Ok(Energies {
        flat: flat * w3,
        correction: correction * w3,
    })
}

/// Derjaguin force 2πR·(F∥ + ΔF)/A in pN at separation `a` nm (attractive
/// forces are negative).
pub fn sphere_force(cfg: &SpherePlateConfig, a: f64) -> Result<f64> {
    let e = energies(cfg, a)?;
    Ok(inv_nm2_to_pn(2.0 * PI * cfg.radius * (e.flat + e.correction)))
}

/// Force between a smooth sphere and a flat plate of the given model.
pub fn smooth_force(radius: f64, model: &PermittivityModel, a: f64) -> Result<f64> {
    Ok(inv_nm2_to_pn(2.0 * PI * radius * flat_nm(model, a)?))
}

/// ρ(a) = 1 + ΔF/F∥.
pub fn rho_ratio(cfg: &SpherePlateConfig, a: f64) -> Result<f64> {
    let e = energies(cfg, a)?;
    Ok(1.0 + e.correction / e.flat)
}

/// One measured point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForceRecord {
    /// Separation in nm.
    pub separation: f64,
    /// Calibrated force in pN, negative for attraction.
    pub force: f64,
}

/// Measured sphere-plate forces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForceDataset {
    pub records: Vec<ForceRecord>,
    pub label: String,
    pub calibration: f64,
}

impl ForceDataset {
    /// Sign convention applied on ingestion.
    pub const CONVENTION: &'static str = "attractive forces negative; input magnitudes are used";
}

/// Parse `separation_nm,force_pN` rows. Lines starting with `#` are
/// comments; the header line is required. Forces are taken by magnitude,
/// scaled by `calibration` and stored as attractive (negative).
pub fn parse_dataset(text: &str, calibration: f64, label: &str) -> Result<ForceDataset> {
    if !(calibration > 0.0 && calibration.is_finite()) {
        return parameter(format!("calibration factor must be positive, got {calibration}"));
    }
    let mut records: Vec<ForceRecord> = Vec::new();
    let mut header = false;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let n = i + 1;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !header {
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols != ["separation_nm", "force_pN"] {
                return Err(Error::Parse {
                    line: n,
                    msg: format!("expected header 'separation_nm,force_pN', found '{line}'"),
                });
            }
            header = true;
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 2 {
            return Err(Error::Parse {
                line: n,
                msg: format!("expected 2 columns, found {}", cols.len()),
            });
        }
        let num = |s: &str| {
            s.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::Parse {
                line: n,
                msg: format!("'{s}' is not a finite number"),
            })
        };
        let (sep, force) = (num(cols[0])?, num(cols[1])?);
        if !(sep > 0.0) {
            return Err(Error::Parse {
                line: n,
                msg: format!("separation must be positive, got {sep}"),
            });
        }
        if let Some(last) = records.last() {
            if sep <= last.separation {
                return Err(Error::Parse {
                    line: n,
                    msg: format!("separations must increase strictly ({sep} after {})", last.separation),
                });
            }
        }
        records.push(ForceRecord {
            separation: sep,
            force: -force.abs() * calibration,
        });
    }
    if records.is_empty() {
        return parameter(format!("dataset '{label}' contains no data rows"));
    }
    Ok(ForceDataset {
        records,
        label: label.to_string(),
        calibration,
    })
}

pub fn load_dataset(path: &Path, calibration: f64) -> Result<ForceDataset> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_dataset(&text, calibration, &path.display().to_string())
}

/// Measured force over the smooth effective-plate force at `a − δa`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftPoint {
    pub separation: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// Separation shift in nm.
    pub delta_a: f64,
    /// √Σ(ratio − 1)².
    pub residual_norm: f64,
    pub points: Vec<ShiftPoint>,
    /// The optimum sits at an end of the search interval.
    pub at_bracket_edge: bool,
}

impl FitResult {
    /// Weighting of the least-squares problem.
    pub const NORM: &'static str = "unweighted least squares on the force ratio";
}

const GOLDEN_TOL_NM: f64 = 1e-5;
const GOLDEN_MAX_ITER: usize = 200;

/// Fit δa so that smooth effective plates at `a − δa` reproduce the data.
/// Searches δa ∈ [0, 2σ_total] by golden section.
pub fn fit_shift(cfg: &SpherePlateConfig, data: &ForceDataset) -> Result<FitResult> {
    cfg.validate()?;
    let model = cfg
        .model_eff
        .ok_or_else(|| Error::Parameter("the shift fit needs an effective model (model_eff)".into()))?;
    if data.records.is_empty() {
        return parameter("dataset is empty");
    }
    let hi = 2.0 * cfg.sigma_total();
    if hi >= data.records[0].separation {
        return parameter(format!(
            "search interval [0, {hi}] nm reaches the smallest separation {}",
            data.records[0].separation
        ));
    }
    let ratios = |d: f64| -> Result<Vec<ShiftPoint>> {
        data.records
            .iter()
            .map(|r| {
                Ok(ShiftPoint {
                    separation: r.separation,
                    ratio: r.force / smooth_force(cfg.radius, &model, r.separation - d)?,
                })
            })
            .collect()
    };
    let cost = |d: f64| -> Result<f64> { Ok(ratios(d)?.iter().map(|p| (p.ratio - 1.0).powi(2)).sum()) };
    let invphi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut up) = (0.0, hi);
    let mut x1 = up - invphi * (up - lo);
    let mut x2 = lo + invphi * (up - lo);
    let (mut f1, mut f2) = (cost(x1)?, cost(x2)?);
    let mut iter = 0;
    while up - lo > GOLDEN_TOL_NM {
        iter += 1;
        if iter > GOLDEN_MAX_ITER {
            return parameter(format!("golden-section search did not converge in {GOLDEN_MAX_ITER} steps"));
        }
        if f1 <= f2 {
            up = x2;
            x2 = x1;
            f2 = f1;
            x1 = up - invphi * (up - lo);
            f1 = cost(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + invphi * (up - lo);
            f2 = cost(x2)?;
        }
    }
    let mut best = 0.5 * (lo + up);
    let mut best_cost = cost(best)?;
    for edge in [0.0, hi] {
        let c = cost(edge)?;
        if c < best_cost {
            best = edge;
            best_cost = c;
        }
    }
    let edge = best < 10.0 * GOLDEN_TOL_NM || best > hi - 10.0 * GOLDEN_TOL_NM;
    Ok(FitResult {
        delta_a: best,
        residual_norm: best_cost.sqrt(),
        points: ratios(best)?,
        at_bracket_edge: edge,
    })
}

/// One row of the model/data comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub separation: f64,
    pub rho_model: f64,
    /// Measured force over the smooth sphere-plate force of `cfg.model`.
    pub rho_data: f64,
    /// rho_data − rho_model.
    pub residual: f64,
}

pub fn compare(cfg: &SpherePlateConfig, data: &ForceDataset) -> Result<Vec<ComparisonRow>> {
    data.records
        .iter()
        .map(|r| {
            let rho_model = rho_ratio(cfg, r.separation)?;
            let rho_data = r.force / smooth_force(cfg.radius, &cfg.model, r.separation)?;
            Ok(ComparisonRow {
                separation: r.separation,
                rho_model,
                rho_data,
                residual: rho_data - rho_model,
            })
        })
        .collect()
}

/// CSV with header `separation_nm,rho_model,rho_data,residual`.
pub fn comparison_csv(rows: &[ComparisonRow]) -> String {
    let mut out = String::from("separation_nm,rho_model,rho_data,residual\n");
    for r in rows {
        out.push_str(&format!("{},{:.10e},{:.10e},{:.10e}\n", r.separation, r.rho_model, r.rho_data, r.residual));
    }
    out
}
