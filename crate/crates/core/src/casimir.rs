//! Flat-plate free energy and its order-σ² roughness corrections: the four
//! loop terms, their closed-form limits, the response function, the
//! one-loop single-interface scattering matrix and the one-loop outputs of
//! the counterterm expansion.
//!
//! Every kernel is evaluated at unit variance and scaled by σ² at the end.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{domain, parameter, Error, Result};
use crate::media::PermittivityModel;
use rayon::prelude::*;

use crate::quadrature::{
    adapted_nodes, integrate_pieces, matsubara_reduce_vec, pairwise_sum, piece_nodes, MatsubaraPolicy, Node, Piece, QuadSpec,
};
use crate::roughness::{signed_spectra, spectrum, CorrelationSpec, Spectrum};
use crate::specfun::bessel_k2;

/// The ζ = 0 Matsubara term is evaluated at this multiple of the material
/// scale (ω_p, or 1/a for the ideal metal).
pub const ZETA_FLOOR: f64 = 1e-9;

/// Loop momenta above 10·ω_p count towards the UV diagnostic.
const UV_DIAGNOSTIC: f64 = 10.0;

/// UV split: beyond max(40/a, 40·ω_p, 40/l_c) only the finite b + c
/// combination is integrated.
const UV_SPLIT: f64 = 40.0;

const TWO_PI: f64 = 2.0 * PI;
const FOUR_PI2: f64 = 4.0 * PI * PI;

/// Tolerances for the nested reductions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    /// Relative tolerance of the outermost (frequency) reduction.
    pub rel_tol: f64,
    /// Evaluate quadrature nodes on the rayon pool.
    pub parallel: bool,
}

impl Default for Accuracy {
    fn default() -> Self {
        Self {
            rel_tol: 1e-6,
            parallel: true,
        }
    }
}

impl Accuracy {
    pub fn new(rel_tol: f64) -> Self {
        Self {
            rel_tol,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return parameter(format!("relative tolerance must lie in (0, 1), got {}", self.rel_tol));
        }
        Ok(())
    }

    fn level(&self, depth: i32) -> QuadSpec {
        QuadSpec::new(self.rel_tol * 0.25f64.powi(depth))
            .with_parallel(self.parallel && depth < 2)
            .with_max_depth(2000)
    }
}

/// One rough-flat configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub model: PermittivityModel,
    pub spec: CorrelationSpec,
    /// Mean separation.
    pub a: f64,
    pub temperature: f64,
    /// Squared plasmon coupling.
    pub g2: f64,
    pub accuracy: Accuracy,
}

impl Scenario {
    pub fn new(model: PermittivityModel, spec: CorrelationSpec, a: f64) -> Self {
        Self {
            model,
            spec,
            a,
            temperature: 0.0,
            g2: 1.0,
            accuracy: Accuracy::default(),
        }
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }

    pub fn with_g2(mut self, g2: f64) -> Self {
        self.g2 = g2;
        self
    }

    pub fn with_accuracy(mut self, accuracy: Accuracy) -> Self {
        self.accuracy = accuracy;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.spec.validate()?;
        check_common(self.a, self.temperature)?;
        if !(0.0..=1.0).contains(&self.g2) {
            return parameter(format!("plasmon coupling g2 must lie in [0, 1], got {}", self.g2));
        }
        self.accuracy.validate()
    }

    /// Non-fatal conditions outside the regime of validity.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        let ratio = self.spec.sigma() / self.a;
        if ratio > 0.3 {
            out.push(format!("sigma/a = {ratio:.3} exceeds 0.3; the order-sigma^2 expansion is unreliable"));
        }
        out
    }
}

fn check_common(a: f64, temperature: f64) -> Result<()> {
    if !(a > 0.0 && a.is_finite()) {
        return parameter(format!("separation must be positive, got {a}"));
    }
    if !(temperature >= 0.0 && temperature.is_finite()) {
        return parameter(format!("temperature must be non-negative, got {temperature}"));
    }
    Ok(())
}

/// Flat free energy and the four roughness terms, all per unit area.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub flat: f64,
    pub seagull: f64,
    pub single_scatter: f64,
    pub counterterm: f64,
    pub double_scatter: f64,
    pub total_correction: f64,
    /// The g²-linear plasmon part of the counterterm.
    pub plasmon: f64,
    /// Fraction of the single-scatter term from loop momenta above 10·ω_p.
    pub uv_tail_fraction: Option<f64>,
}

impl EnergyBreakdown {
    fn assemble(flat: f64, seagull: f64, single: f64, counter: f64, double: f64, plasmon: f64, uv: Option<f64>) -> Self {
        Self {
            flat,
            seagull,
            single_scatter: single,
            counterterm: counter,
            double_scatter: double,
            total_correction: seagull + single + counter + double,
            plasmon,
            uv_tail_fraction: uv,
        }
    }

    /// (a²/σ²)·ΔF/F, the dimensionless correction ratio.
    pub fn ratio(&self, a: f64, sigma: f64) -> f64 {
        a * a / (sigma * sigma) * self.total_correction / self.flat
    }

    pub fn warnings(&self) -> Vec<String> {
        match self.uv_tail_fraction {
            Some(f) if f.abs() > 0.1 => vec![format!(
                "{:.1}% of the single-scatter term comes from loop momenta above 10 wp",
                100.0 * f.abs()
            )],
            _ => Vec::new(),
        }
    }
}

/// Frequency-dependent material data.
#[derive(Debug, Clone, Copy)]
struct Freq {
    zeta: f64,
    delta: f64,
    em1: f64,
    eps: f64,
    /// ζ(√ε − 1).
    plasmon: f64,
}

fn freq(model: &PermittivityModel, zeta: f64, floor: f64) -> Freq {
    let zeta = zeta.max(floor);
    let delta = model.delta(zeta);
    let em1 = delta / (zeta * zeta);
    let eps = 1.0 + em1;
    Freq {
        zeta,
        delta,
        em1,
        eps,
        plasmon: delta / (zeta * (eps.sqrt() + 1.0)),
    }
}

/// Per-(ζ, k) reflection data with the cavity factor e = e^{−2aκ}.
#[derive(Debug, Clone, Copy)]
struct Wave {
    k: f64,
    kappa: f64,
    kappa_eps: f64,
    r_te: f64,
    r_tm: f64,
    e: f64,
    x_te: f64,
    x_tm: f64,
    alpha_te: f64,
    alpha_tm: f64,
}

fn wave(f: &Freq, k: f64, a: f64) -> Wave {
    let kappa = k.hypot(f.zeta);
    let kappa_eps = (kappa * kappa + f.delta).sqrt();
    let s = kappa + kappa_eps;
    let r_te = -f.delta / (s * s);
    let t_te = 4.0 * kappa * kappa_eps / (s * s);
    let sb = f.eps * kappa + kappa_eps;
    let r_tm = f.em1 * ((f.eps + 1.0) * k * k + f.eps * f.zeta * f.zeta) / (sb * sb);
    let t_tm = 4.0 * f.eps * kappa * kappa_eps / (sb * sb);
    let e = (-2.0 * a * kappa).exp();
    let dte = 1.0 - r_te * r_te * e;
    let dtm = 1.0 - r_tm * r_tm * e;
    Wave {
        k,
        kappa,
        kappa_eps,
        r_te,
        r_tm,
        e,
        x_te: r_te * r_te * e / dte,
        x_tm: r_tm * r_tm * e / dtm,
        alpha_te: f.delta * r_te * t_te * e / (dte * kappa_eps),
        alpha_tm: f.em1 / f.eps * r_tm * t_tm * e / dtm,
    }
}

/// Loop-momentum factors shared by the single-scatter and counter kernels.
struct LoopFactors {
    e1: f64,
    e2: f64,
    c3: f64,
}

fn loop_factors(f: &Freq, w: &Wave, p: &Wave) -> LoopFactors {
    let sb = f.eps * p.kappa + p.kappa_eps;
    let kk = w.k * p.k;
    LoopFactors {
        e1: f.em1 * p.kappa * p.kappa_eps / sb,
        e2: f.delta / (p.kappa + p.kappa_eps),
        c3: f.em1 * f.eps * kk * kk / (w.kappa_eps * sb),
    }
}

/// Single-scatter integrand for the measure k′dk′/(2π)², angular moments m.
fn single_kernel(f: &Freq, w: &Wave, p: &Wave, lf: &LoopFactors, m: [f64; 3]) -> f64 {
    let [m0, m1, m2] = m;
    let te = 0.5 * w.alpha_te * (lf.e1 * (m0 - m2) + lf.e2 * m2);
    let tm = 0.5
        * w.alpha_tm
        * (lf.c3 * m0 - f.em1 * w.k * p.k * p.r_tm * m1 - w.kappa_eps * (lf.e1 * m2 + lf.e2 * (m0 - m2)));
    -0.5 * (te + tm)
}

/// Loop part of the counter integrand for the measure k′dk′/(2π), spectrum value d.
fn counter_kernel(w: &Wave, lf: &LoopFactors, d: f64) -> f64 {
    0.5 * d * (0.5 * w.alpha_tm * lf.c3 + 0.25 * (w.alpha_te - w.kappa_eps * w.alpha_tm) * (lf.e1 + lf.e2))
}

/// Double-scatter integrand for the measure k′dk′/(2π)².
fn double_kernel(f: &Freq, w: &Wave, p: &Wave, m: [f64; 3]) -> f64 {
    let [m0, m1, m2] = m;
    let kk = w.k * p.k;
    let te = w.alpha_te * (p.alpha_te * m2 - 2.0 * p.alpha_tm * p.kappa_eps * (m0 - m2));
    let tm = w.alpha_tm
        * p.alpha_tm
        * (f.eps * f.eps * kk * kk * m0 / (w.kappa_eps * p.kappa_eps)
            + 2.0 * f.eps * kk * m1
            + w.kappa_eps * p.kappa_eps * m2);
    -(te + tm) / 16.0
}

/// Plasmon part of the counterterm at unit variance and unit g², measure k dk/(2π).
fn plasmon_kernel(f: &Freq, w: &Wave) -> f64 {
    -0.25 * (w.alpha_te - w.kappa_eps * w.alpha_tm) * f.plasmon
}

fn seagull_kernel(w: &Wave) -> f64 {
    -w.kappa * w.kappa_eps * (w.x_te + w.x_tm)
}

fn policy(a: f64, temperature: f64, quad: QuadSpec) -> MatsubaraPolicy {
    MatsubaraPolicy {
        temperature,
        cutoff_n: None,
        zeta_scale: 1.0 / a,
        quad,
    }
}

/// k-integration pieces; the width grows with ζ to follow e^{−2a√(k²+ζ²)}.
fn k_pieces(a: f64, zeta: f64) -> [Piece; 2] {
    let scale = (1.0 + 2.0 * a * zeta).sqrt() / a;
    [Piece::finite(0.0, scale), Piece::exp_tail(scale, scale)]
}

fn material_floor(model: &PermittivityModel, a: f64) -> f64 {
    ZETA_FLOOR * model.plasma_frequency().unwrap_or(1.0 / a)
}

/// Double reduction M[∫k dk/(2π) g(ζ, k)] of a vector integrand.
fn reduce_k<const N: usize, G>(
    model: &PermittivityModel,
    a: f64,
    temperature: f64,
    outer: QuadSpec,
    inner: QuadSpec,
    g: G,
) -> Result<[f64; N]>
where
    G: Fn(&Freq, f64) -> Result<[f64; N]> + Sync,
{
    let floor = material_floor(model, a);
    let per_zeta = |zeta: f64| -> Result<[f64; N]> {
        let f = freq(model, zeta, floor);
        let h = |k: f64| -> Result<[f64; N]> {
            let mut v = g(&f, k)?;
            for x in v.iter_mut() {
                *x *= k / TWO_PI;
            }
            Ok(v)
        };
        Ok(integrate_pieces(&h, &k_pieces(a, f.zeta), &inner)?.0)
    };
    matsubara_reduce_vec(&per_zeta, &policy(a, temperature, outer))
}

/// Flat-plate Lifshitz free energy per unit area.
pub fn flat_energy(model: &PermittivityModel, a: f64, temperature: f64) -> Result<f64> {
    model.validate()?;
    check_common(a, temperature)?;
    let outer = QuadSpec::new(1e-12).with_max_depth(2000);
    let inner = QuadSpec::new(1e-13).with_max_depth(2000);
    let ideal = model.is_ideal();
    let v = reduce_k(model, a, temperature, outer, inner, |f, k| {
        if ideal {
            let kappa = k.hypot(f.zeta);
            return Ok([(-(-2.0 * a * kappa).exp()).ln_1p()]);
        }
        let w = wave(f, k, a);
        Ok([0.5 * ((-w.r_te * w.r_te * w.e).ln_1p() + (-w.r_tm * w.r_tm * w.e).ln_1p())])
    })?;
    Ok(v[0])
}

/// −(1/A)∂F/∂a, the one-loop c₁(a) − c₁(∞).
pub fn c1_counterterm(model: &PermittivityModel, a: f64, temperature: f64) -> Result<f64> {
    model.validate()?;
    check_common(a, temperature)?;
    let outer = QuadSpec::new(1e-11).with_max_depth(2000);
    let inner = QuadSpec::new(1e-12).with_max_depth(2000);
    let ideal = model.is_ideal();
    let v = reduce_k(model, a, temperature, outer, inner, |f, k| {
        if ideal {
            let kappa = k.hypot(f.zeta);
            let e = (-2.0 * a * kappa).exp();
            return Ok([-2.0 * kappa * e / (1.0 - e)]);
        }
        let w = wave(f, k, a);
        Ok([-w.kappa * (w.x_te + w.x_tm)])
    })?;
    Ok(v[0])
}

/// PFA roughness correction ½σ²∂²F/∂a² in its two forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PfaCorrection {
    /// From the closed k-integrand.
    pub closed: f64,
    /// From central differences of the flat energy with step 10⁻³a.
    pub finite_difference: f64,
}

pub fn pfa_correction(model: &PermittivityModel, a: f64, temperature: f64, sigma: f64) -> Result<PfaCorrection> {
    model.validate()?;
    check_common(a, temperature)?;
    check_sigma(sigma)?;
    let s2 = sigma * sigma;
    let outer = QuadSpec::new(1e-11).with_max_depth(2000);
    let inner = QuadSpec::new(1e-12).with_max_depth(2000);
    let ideal = model.is_ideal();
    let closed = reduce_k(model, a, temperature, outer, inner, |f, k| {
        let (kappa, pair) = if ideal {
            let kappa = k.hypot(f.zeta);
            let e = (-2.0 * a * kappa).exp();
            (kappa, 2.0 * e / (1.0 - e).powi(2))
        } else {
            let w = wave(f, k, a);
            let te = w.r_te * w.r_te * w.e / (1.0 - w.r_te * w.r_te * w.e).powi(2);
            let tm = w.r_tm * w.r_tm * w.e / (1.0 - w.r_tm * w.r_tm * w.e).powi(2);
            (w.kappa, te + tm)
        };
        Ok([-kappa * kappa * pair])
    })?[0]
        * s2;
    let h = 1e-3 * a;
    let fp = flat_energy(model, a + h, temperature)?;
    let f0 = flat_energy(model, a, temperature)?;
    let fm = flat_energy(model, a - h, temperature)?;
    Ok(PfaCorrection {
        closed,
        finite_difference: 0.5 * s2 * (fp - 2.0 * f0 + fm) / (h * h),
    })
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return parameter(format!("rms roughness must be non-negative, got {sigma}"));
    }
    Ok(())
}

/// Correction for uncorrelated roughness (l_c → 0).
pub fn uncorrelated_limit(model: &PermittivityModel, a: f64, temperature: f64, sigma: f64, g2: f64) -> Result<f64> {
    Ok(uncorrelated_parts(model, a, temperature, sigma, g2, &Accuracy::new(1e-9))?.0)
}

/// (total, seagull, plasmon piece) of the l_c → 0 limit.
fn uncorrelated_parts(
    model: &PermittivityModel,
    a: f64,
    temperature: f64,
    sigma: f64,
    g2: f64,
    acc: &Accuracy,
) -> Result<(f64, f64, f64)> {
    model.validate()?;
    check_common(a, temperature)?;
    check_sigma(sigma)?;
    let s2 = sigma * sigma;
    if model.is_ideal() {
        if g2 != 1.0 {
            return Err(Error::Unsupported("the ideal-metal limit exists only for g2 = 1".into()));
        }
        let v = reduce_k(model, a, temperature, acc.level(0), acc.level(1), |f, k| {
            let z = f.zeta;
            let kappa = k.hypot(z);
            let e = (-2.0 * a * kappa).exp();
            Ok([-z * (kappa * kappa + z * z) * e / (kappa * (1.0 - e))])
        })?;
        return Ok((s2 * v[0], 0.0, 0.0));
    }
    let v = reduce_k(model, a, temperature, acc.level(0), acc.level(1), |f, k| {
        let w = wave(f, k, a);
        let ke2 = w.kappa_eps * w.kappa_eps;
        let den = k * k * f.eps + ke2;
        let tm = w.x_tm * w.kappa * w.kappa_eps * (2.0 * f.em1 / (f.eps + 1.0) * k * k + ke2 - g2 * f.plasmon * w.kappa_eps)
            / den;
        let te = w.x_te * w.kappa * (w.kappa_eps - g2 * f.plasmon);
        Ok([-(tm + te), seagull_kernel(&w), g2 * plasmon_kernel(f, &w)])
    })?;
    Ok((s2 * v[0], s2 * v[1], s2 * v[2]))
}

/// The four terms in the limit l_c → ∞ (a δ-function spectrum).
pub fn large_correlation_limit(
    model: &PermittivityModel,
    a: f64,
    temperature: f64,
    sigma: f64,
    g2: f64,
    acc: &Accuracy,
) -> Result<EnergyBreakdown> {
    model.validate()?;
    check_common(a, temperature)?;
    check_sigma(sigma)?;
    let s2 = sigma * sigma;
    let flat = flat_energy(model, a, temperature)?;
    if model.is_ideal() {
        if g2 != 1.0 {
            return Err(Error::Unsupported("the ideal-metal limit exists only for g2 = 1".into()));
        }
        let v = reduce_k(model, a, temperature, acc.level(0), acc.level(1), |f, k| {
            let kappa = k.hypot(f.zeta);
            let e = (-2.0 * a * kappa).exp();
            let x = e / (1.0 - e);
            Ok([-2.0 * kappa * kappa * x, -2.0 * kappa * kappa * x * x])
        })?;
        return Ok(EnergyBreakdown::assemble(flat, 0.0, s2 * v[0], 0.0, s2 * v[1], 0.0, None));
    }
    let v = reduce_k(model, a, temperature, acc.level(0), acc.level(1), |f, k| {
        let w = wave(f, k, a);
        let x = w.x_te + w.x_tm;
        let single = w.kappa * (w.kappa_eps - w.kappa) * x;
        let ke2 = w.kappa_eps * w.kappa_eps;
        let counter_shape = f.plasmon * w.kappa * (w.x_te + w.x_tm * ke2 / (f.eps * k * k + ke2));
        let double = -w.kappa * w.kappa * (w.x_te * w.x_te + w.x_tm * w.x_tm);
        Ok([seagull_kernel(&w), single, counter_shape, double])
    })?;
    let counter = (g2 - 1.0) * s2 * v[2];
    Ok(EnergyBreakdown::assemble(flat, s2 * v[0], s2 * v[1], counter, s2 * v[3], g2 * s2 * v[2], None))
}

/// Seagull term; independent of the correlation length.
pub fn seagull_term(scn: &Scenario) -> Result<f64> {
    scn.validate()?;
    if scn.model.is_ideal() {
        return Ok(0.0);
    }
    let acc = scn.accuracy;
    let v = reduce_k(&scn.model, scn.a, scn.temperature, acc.level(0), acc.level(1), |f, k| {
        Ok([seagull_kernel(&wave(f, k, scn.a))])
    })?;
    Ok(scn.spec.sigma().powi(2) * v[0])
}

pub fn single_scatter_term(scn: &Scenario) -> Result<f64> {
    Ok(total_correction(scn)?.single_scatter)
}

pub fn counterterm_term(scn: &Scenario) -> Result<f64> {
    Ok(total_correction(scn)?.counterterm)
}

pub fn double_scatter_term(scn: &Scenario) -> Result<f64> {
    Ok(total_correction(scn)?.double_scatter)
}

/// All four roughness terms and the flat energy. The δ-limit and
/// uncorrelated specs dispatch to their closed forms.
pub fn total_correction(scn: &Scenario) -> Result<EnergyBreakdown> {
    scn.validate()?;
    let (model, a, t, g2, acc) = (&scn.model, scn.a, scn.temperature, scn.g2, &scn.accuracy);
    match scn.spec {
        CorrelationSpec::DeltaLimit { sigma } => large_correlation_limit(model, a, t, sigma, g2, acc),
        CorrelationSpec::Uncorrelated { sigma } => {
            let flat = flat_energy(model, a, t)?;
            let (total, seagull, plasmon) = uncorrelated_parts(model, a, t, sigma, g2, acc)?;
            Ok(EnergyBreakdown::assemble(flat, seagull, total - seagull - plasmon, plasmon, 0.0, plasmon, None))
        }
        _ => total_correction_with(model, &scn.spec, a, t, g2, acc),
    }
}

/// Loop placement data for one spectrum.
struct LoopGrid {
    lengths: Vec<f64>,
    fixed: Vec<f64>,
    uv_split: f64,
    uv_diag: f64,
}

impl LoopGrid {
    fn new(model: &PermittivityModel, sp: &dyn Spectrum, a: f64) -> Self {
        let lengths = sp.lengths();
        let wp = model.plasma_frequency();
        let mut lam = UV_SPLIT / a;
        for l in &lengths {
            lam = lam.max(UV_SPLIT / l);
        }
        let mut fixed = vec![1.0 / a, 4.0 / a];
        if let Some(wp) = wp {
            lam = lam.max(UV_SPLIT * wp);
            fixed.push(wp);
            fixed.push(UV_DIAGNOSTIC * wp);
        }
        Self {
            lengths,
            fixed,
            uv_split: lam,
            uv_diag: wp.map_or(f64::INFINITY, |w| UV_DIAGNOSTIC * w),
        }
    }

    fn pieces(&self, k: f64) -> Vec<Piece> {
        let lam = self.uv_split;
        let mut pts = vec![0.0, lam];
        pts.extend(self.fixed.iter().copied());
        for &l in &self.lengths {
            for j in [0.0, 0.5, 1.0, 2.0, 4.0, 8.0] {
                pts.push(k + j / l);
                pts.push(k - j / l);
            }
        }
        pts.retain(|&p| (0.0..=lam).contains(&p));
        pts.sort_by(f64::total_cmp);
        pts.dedup_by(|x, y| (*x - *y).abs() <= 1e-12 * lam);
        let mut out: Vec<Piece> = pts.windows(2).map(|w| Piece::finite(w[0], w[1])).collect();
        out.push(Piece::algebraic_tail(lam, lam));
        out
    }
}

/// Loop-momentum node of the fixed rule at one k, with the ζ-independent
/// spectral data cached.
struct LoopNode {
    kp: f64,
    w: f64,
    m: [f64; 3],
    d: f64,
}

struct KNode {
    k: f64,
    /// Quadrature weight times k/(2π).
    w: f64,
    loops: Vec<LoopNode>,
}

/// Fixed k-rule: doubling pieces from a quarter of the smallest physical
/// momentum scale up to 40/a.
fn k_rule(model: &PermittivityModel, lengths: &[f64], a: f64) -> Vec<Node> {
    let mut u = 1.0 / a;
    if let Some(wp) = model.plasma_frequency() {
        u = u.min(wp);
    }
    for l in lengths {
        u = u.min(1.0 / l);
    }
    u *= 0.25;
    let top = UV_SPLIT / a;
    let mut pts = vec![0.0];
    let mut x = u;
    while x < top {
        pts.push(x);
        x *= 2.0;
    }
    pts.push(top);
    let pieces: Vec<Piece> = pts.windows(2).map(|w| Piece::finite(w[0], w[1])).collect();
    piece_nodes(&pieces)
}

/// Frequencies at which the fixed loop rules are adapted.
fn reference_freqs(model: &PermittivityModel, a: f64) -> [Freq; 3] {
    let floor = material_floor(model, a);
    [freq(model, 0.0, floor), freq(model, 0.5 / a, floor), freq(model, 2.0 / a, floor)]
}

/// Per-k′ values: b below the UV diagnostic, b above it, c, the b + c tail
/// beyond Λ and d, for the dielectric kernels.
fn dielectric_loop(f: &Freq, w: &Wave, kp: f64, m: [f64; 3], d: f64, a: f64, grid: &LoopGrid) -> [f64; 5] {
    let p = wave(f, kp, a);
    let lf = loop_factors(f, w, &p);
    let b = single_kernel(f, w, &p, &lf, m) * kp / FOUR_PI2;
    let c = counter_kernel(w, &lf, d) * kp / TWO_PI;
    if kp >= grid.uv_split {
        return [0.0, 0.0, 0.0, b + c, 0.0];
    }
    let dd = double_kernel(f, w, &p, m) * kp / FOUR_PI2;
    if kp < grid.uv_diag {
        [b, 0.0, c, 0.0, dd]
    } else {
        [0.0, b, c, 0.0, dd]
    }
}

/// Ideal-metal analogue: first-order, third (counter) and second-order
/// pieces, with the first + third tail beyond Λ in slot 3.
fn ideal_loop(zeta: f64, k: f64, kp: f64, m: [f64; 3], d: f64, a: f64, lam: f64) -> [f64; 5] {
    let z2 = zeta * zeta;
    let kappa = k.hypot(zeta);
    let e = (-2.0 * a * kappa).exp();
    let g = e / (1.0 - e);
    let kpa = kp.hypot(zeta);
    let [m0, m1, m2] = m;
    let kk = k * kp;
    let shape = (z2 * z2 + kappa * kappa * kpa * kpa) * m0 + 2.0 * z2 * kk * m1 + kk * kk * m2;
    let first = -shape * g / (kappa * kpa) * kp / FOUR_PI2;
    let third = d * (2.0 * kk * kk + (kappa * kappa + z2) * (kpa - zeta).powi(2)) * g / (2.0 * kappa * kpa) * kp / TWO_PI;
    if kp >= lam {
        return [0.0, 0.0, 0.0, first + third, 0.0];
    }
    let ep = (-2.0 * a * kpa).exp();
    let second = -shape * g * ep / ((1.0 - ep) * kappa * kpa) * kp / FOUR_PI2;
    [first, 0.0, third, 0.0, second]
}

/// Builds the fixed (k, k′) rule for one spectrum, adapting each k′
/// partition to the loop integrand at the reference frequencies.
fn loop_rule(model: &PermittivityModel, sp: &dyn Spectrum, a: f64, grid: &LoopGrid, acc: &Accuracy) -> Result<Vec<KNode>> {
    let refs = reference_freqs(model, a);
    let spec = acc.level(1).with_parallel(false);
    let ideal = model.is_ideal();
    let build = |node: &Node| -> Result<KNode> {
        let k = node.x;
        let waves = refs.map(|f| wave(&f, k, a));
        let proxy = |kp: f64| -> Result<[f64; 15]> {
            let m = sp.moments(k, kp);
            let d = sp.value(kp);
            let mut out = [0.0; 15];
            for (i, f) in refs.iter().enumerate() {
                let v = if ideal {
                    ideal_loop(f.zeta, k, kp, m, d, a, grid.uv_split)
                } else {
                    dielectric_loop(f, &waves[i], kp, m, d, a, grid)
                };
                out[5 * i..5 * i + 5].copy_from_slice(&v);
            }
            Ok(out)
        };
        let nodes = adapted_nodes(&proxy, &grid.pieces(k), &spec)?;
        let loops = nodes
            .into_iter()
            .map(|n| LoopNode {
                kp: n.x,
                w: n.w,
                m: sp.moments(k, n.x),
                d: sp.value(n.x),
            })
            .collect();
        Ok(KNode {
            k,
            w: node.w * k / TWO_PI,
            loops,
        })
    };
    let knodes = k_rule(model, &sp.lengths(), a);
    if acc.parallel {
        knodes.par_iter().map(build).collect()
    } else {
        knodes.iter().map(build).collect()
    }
}

/// Sums a per-k vector over the fixed k-rule.
fn sum_over_k<const N: usize, G>(knodes: &[KNode], parallel: bool, g: G) -> [f64; N]
where
    G: Fn(&KNode) -> [f64; N] + Sync,
{
    let parts: Vec<[f64; N]> = if parallel {
        knodes.par_iter().map(|kn| g(kn).map(|v| v * kn.w)).collect()
    } else {
        knodes.iter().map(|kn| g(kn).map(|v| v * kn.w)).collect()
    };
    let mut out = [0.0; N];
    let mut buf = Vec::with_capacity(parts.len());
    for (j, o) in out.iter_mut().enumerate() {
        buf.clear();
        buf.extend(parts.iter().map(|v| v[j]));
        *o = pairwise_sum(&buf);
    }
    out
}

/// Generic loop pipeline for any spectrum implementing [`Spectrum`].
pub fn total_correction_with(
    model: &PermittivityModel,
    sp: &dyn Spectrum,
    a: f64,
    temperature: f64,
    g2: f64,
    acc: &Accuracy,
) -> Result<EnergyBreakdown> {
    model.validate()?;
    check_common(a, temperature)?;
    sp.check()?;
    acc.validate()?;
    if model.is_ideal() {
        if g2 != 1.0 {
            return Err(Error::Unsupported("the ideal-metal limit exists only for g2 = 1".into()));
        }
        return ideal_metal_terms(sp, a, temperature, acc);
    }
    let s2 = sp.sigma2();
    let flat = flat_energy(model, a, temperature)?;
    if s2 == 0.0 {
        return Ok(EnergyBreakdown::assemble(flat, 0.0, 0.0, 0.0, 0.0, 0.0, Some(0.0)));
    }
    let grid = LoopGrid::new(model, sp, a);
    let knodes = loop_rule(model, sp, a, &grid, acc)?;
    let floor = material_floor(model, a);
    // components: seagull, b(<10wp), b(10wp..Λ), c, (b+c)(>Λ), d, plasmon
    let per_zeta = |zeta: f64| -> Result<[f64; 7]> {
        let f = freq(model, zeta, floor);
        let r = sum_over_k(&knodes, acc.parallel, |kn| {
            let w = wave(&f, kn.k, a);
            let mut l = [0.0; 5];
            for ln in &kn.loops {
                let v = dielectric_loop(&f, &w, ln.kp, ln.m, ln.d, a, &grid);
                for j in 0..5 {
                    l[j] += ln.w * v[j];
                }
            }
            [seagull_kernel(&w) * s2, l[0], l[1], l[2], l[3], l[4], plasmon_kernel(&f, &w) * g2 * s2]
        });
        Ok(r)
    };
    let v = matsubara_reduce_vec(&per_zeta, &policy(a, temperature, acc.level(0).with_parallel(false)))?;
    let single = v[1] + v[2] + v[4];
    let counter = v[3] + v[6];
    let uv = if single != 0.0 { Some((v[2] + v[4]) / single) } else { None };
    Ok(EnergyBreakdown::assemble(flat, v[0], single, counter, v[5], v[6], uv))
}

/// Ideal-metal limit of the four terms for a finite-l_c spectrum. The
/// seagull and single-scatter pieces are reported together under
/// `single_scatter`.
pub fn ideal_metal_terms(sp: &dyn Spectrum, a: f64, temperature: f64, acc: &Accuracy) -> Result<EnergyBreakdown> {
    check_common(a, temperature)?;
    sp.check()?;
    acc.validate()?;
    let model = PermittivityModel::IdealMetal;
    let flat = flat_energy(&model, a, temperature)?;
    let grid = LoopGrid::new(&model, sp, a);
    let knodes = loop_rule(&model, sp, a, &grid, acc)?;
    let floor = material_floor(&model, a);
    let per_zeta = |zeta: f64| -> Result<[f64; 5]> {
        let z = zeta.max(floor);
        Ok(sum_over_k(&knodes, acc.parallel, |kn| {
            let mut l = [0.0; 5];
            for ln in &kn.loops {
                let v = ideal_loop(z, kn.k, ln.kp, ln.m, ln.d, a, grid.uv_split);
                for j in 0..5 {
                    l[j] += ln.w * v[j];
                }
            }
            l
        }))
    };
    let v = matsubara_reduce_vec(&per_zeta, &policy(a, temperature, acc.level(0).with_parallel(false)))?;
    Ok(EnergyBreakdown::assemble(flat, 0.0, v[0] + v[3], v[2], v[4], 0.0, None))
}

/// Renormalized and unsubtracted response at one momentum transfer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponseValue {
    pub q: f64,
    /// Including the counter potential with the given g².
    pub renormalized: f64,
    /// Without the counter potential.
    pub unsubtracted: f64,
}

/// Response R(q) with ΔF = ∫ q dq D(q) R(q)/(2π).
pub fn response(model: &PermittivityModel, a: f64, temperature: f64, g2: f64, q: f64, acc: &Accuracy) -> Result<ResponseValue> {
    model.validate()?;
    check_common(a, temperature)?;
    acc.validate()?;
    if !(q >= 0.0 && q.is_finite()) {
        return domain(format!("response needs finite q >= 0, got {q}"));
    }
    if model.is_ideal() {
        return Err(Error::Unsupported("the response function is implemented for dielectric models".into()));
    }
    let refs = reference_freqs(model, a);
    let spec = acc.level(1).with_parallel(false);
    // pointwise loop momentum and cos θ′ at azimuth φ of q relative to k
    let geometry = |k: f64, phi: f64| {
        let (s, c) = phi.sin_cos();
        let kx = k + q * c;
        let kp = kx.hypot(q * s);
        (kp, if kp > 0.0 { kx / kp } else { 1.0 })
    };
    let pointwise = |f: &Freq, w: &Wave, kp: f64, cth: f64| -> [f64; 2] {
        let p = wave(f, kp, a);
        let lf = loop_factors(f, w, &p);
        let m = [1.0, cth, cth * cth];
        [single_kernel(f, w, &p, &lf, m) / PI, double_kernel(f, w, &p, m) / PI]
    };
    let lengths = [q.max(1e-300).recip()];
    let build = |node: &Node| -> Result<(f64, f64, Vec<(f64, f64, f64)>)> {
        let k = node.x;
        if q == 0.0 {
            return Ok((k, node.w * k / TWO_PI, vec![(k, 1.0, PI)]));
        }
        let waves = refs.map(|f| wave(&f, k, a));
        let proxy = |phi: f64| -> Result<[f64; 6]> {
            let (kp, cth) = geometry(k, phi);
            let mut out = [0.0; 6];
            for (i, f) in refs.iter().enumerate() {
                let v = pointwise(f, &waves[i], kp, cth);
                out[2 * i] = v[0];
                out[2 * i + 1] = v[1];
            }
            Ok(out)
        };
        let pieces = [Piece::finite(0.0, 0.5 * PI), Piece::finite(0.5 * PI, PI)];
        let nodes = adapted_nodes(&proxy, &pieces, &spec)?;
        let pts = nodes
            .into_iter()
            .map(|n| {
                let (kp, cth) = geometry(k, n.x);
                (kp, cth, n.w)
            })
            .collect();
        Ok((k, node.w * k / TWO_PI, pts))
    };
    let knodes = k_rule(model, if q > 0.0 { &lengths } else { &[] }, a);
    let rule: Vec<_> = if acc.parallel {
        knodes.par_iter().map(build).collect::<Result<_>>()?
    } else {
        knodes.iter().map(build).collect::<Result<_>>()?
    };
    let floor = material_floor(model, a);
    let per_zeta = |zeta: f64| -> Result<[f64; 2]> {
        let f = freq(model, zeta, floor);
        let parts: Vec<[f64; 2]> = rule
            .iter()
            .map(|(k, wk, pts)| {
                let w = wave(&f, *k, a);
                let mut bd = 0.0;
                for &(kp, cth, wphi) in pts {
                    let v = pointwise(&f, &w, kp, cth);
                    bd += wphi * (v[0] + v[1]);
                }
                let p = wave(&f, q, a);
                let c = counter_kernel(&w, &loop_factors(&f, &w, &p), 1.0);
                [wk * (seagull_kernel(&w) + bd), wk * (c + g2 * plasmon_kernel(&f, &w))]
            })
            .collect();
        let col = |j: usize| pairwise_sum(&parts.iter().map(|v| v[j]).collect::<Vec<_>>());
        Ok([col(0), col(1)])
    };
    let v = matsubara_reduce_vec(&per_zeta, &policy(a, temperature, acc.level(0).with_parallel(false)))?;
    Ok(ResponseValue {
        q,
        renormalized: v[0] + v[1],
        unsubtracted: v[0],
    })
}

/// Order-σ² single-interface scattering matrix at transverse momentum k
/// along x. The xz and zx entries are coefficients of i.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct T2Matrix {
    pub t_xx: f64,
    pub t_yy: f64,
    pub t_zz: f64,
    pub t_xz: f64,
    pub t_zx: f64,
    pub subtracted: bool,
}

/// Tabulated d₊₋(q) on a logarithmic grid; d₊₊ = D/2 − d₊₋.
struct SignedTable {
    lnq: Vec<f64>,
    pm: Vec<f64>,
}

impl SignedTable {
    fn new(spec: &CorrelationSpec, lc: f64) -> Result<Self> {
        let n = 97;
        let (lo, hi) = ((1e-2 / lc).ln(), (1e2 / lc).ln());
        let mut lnq = Vec::with_capacity(n);
        let mut pm = Vec::with_capacity(n);
        for i in 0..n {
            let x = lo + (hi - lo) * i as f64 / (n - 1) as f64;
            lnq.push(x);
            pm.push(signed_spectra(spec, x.exp())?.1);
        }
        Ok(Self { lnq, pm })
    }

    fn pm(&self, q: f64) -> f64 {
        let n = self.lnq.len();
        let x = q.max(1e-300).ln();
        if x <= self.lnq[0] {
            return self.pm[0];
        }
        if x >= self.lnq[n - 1] {
            let (a, b) = (self.pm[n - 2], self.pm[n - 1]);
            if a * b <= 0.0 || b.abs() >= a.abs() {
                return 0.0;
            }
            let slope = (b.abs() / a.abs()).ln() / (self.lnq[n - 1] - self.lnq[n - 2]);
            return b * (slope * (x - self.lnq[n - 1])).exp();
        }
        let h = self.lnq[1] - self.lnq[0];
        let t = (x - self.lnq[0]) / h;
        let i = (t.floor() as usize).min(n - 2);
        let u = t - i as f64;
        let y = |j: isize| self.pm[(i as isize + j).clamp(0, n as isize - 1) as usize];
        let (y0, y1, y2, y3) = (y(-1), y(0), y(1), y(2));
        // Catmull-Rom cubic
        let m1 = 0.5 * (y2 - y0);
        let m2 = 0.5 * (y3 - y1);
        let u2 = u * u;
        let u3 = u2 * u;
        (2.0 * u3 - 3.0 * u2 + 1.0) * y1 + (u3 - 2.0 * u2 + u) * m1 + (-2.0 * u3 + 3.0 * u2) * y2 + (u3 - u2) * m2
    }
}

fn loop_convergent(spec: &CorrelationSpec) -> bool {
    match spec {
        CorrelationSpec::Gaussian { .. } => true,
        CorrelationSpec::Affine { s, .. } => *s > 0.5,
        _ => false,
    }
}

/// k′-pieces for single-interface loop integrals.
fn t2_pieces(k: f64, lc: f64, zeta: f64, wp: f64) -> Vec<Piece> {
    let mut pts = vec![0.0, zeta, wp, k];
    for j in [0.5, 1.0, 2.0, 4.0, 8.0, 16.0] {
        pts.push(k + j / lc);
        pts.push(k - j / lc);
    }
    let top = k + 16.0 / lc;
    pts.retain(|&p| (0.0..=top).contains(&p));
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|x, y| (*x - *y).abs() <= 1e-12 * top);
    let mut out: Vec<Piece> = pts.windows(2).map(|w| Piece::finite(w[0], w[1])).collect();
    out.push(Piece::algebraic_tail(top, top));
    out
}

/// One-loop t⁽²⁾(k, ζ). The subtracted form replaces the k = 0 loop value
/// by the plasmon model −σ²g²ζ(ε−1)²/(1+√ε)·diag(1, 1, 0).
pub fn t2_scattering(
    model: &PermittivityModel,
    spec: &CorrelationSpec,
    k: f64,
    zeta: f64,
    subtracted: bool,
    g2: f64,
) -> Result<T2Matrix> {
    model.validate()?;
    spec.validate()?;
    if model.is_ideal() {
        return Err(Error::Unsupported("the single-interface scattering matrix needs a finite permittivity".into()));
    }
    if !(k >= 0.0 && zeta > 0.0) {
        return domain(format!("t2 needs k >= 0 and zeta > 0, got k = {k}, zeta = {zeta}"));
    }
    let lc = spec
        .lc()
        .ok_or_else(|| Error::Unsupported(format!("{spec:?} has no finite correlation length")))?;
    spectrum(spec, 0.0)?;
    if !subtracted && !loop_convergent(spec) {
        return Err(Error::Unsupported(format!(
            "the unsubtracted loop integrals diverge logarithmically for {spec:?}"
        )));
    }
    let s2 = spec.sigma().powi(2);
    let wp = model.plasma_frequency().unwrap_or(1.0);
    let f = freq(model, zeta, 0.0);
    let table = SignedTable::new(spec, lc)?;
    let d_of = |q: f64| spectrum(spec, q).unwrap_or(0.0);
    let zz_weight = |q: f64| {
        let pm = table.pm(q);
        (f.eps + 1.0 / f.eps) * (0.5 * d_of(q) - pm) + 2.0 * pm
    };
    let ang_spec = QuadSpec::new(1e-10).with_max_depth(2000);
    let quad = QuadSpec::new(1e-9).with_max_depth(4000);
    // components per k′: xx, yy, zz, xz (coefficients of the measure k′dk′/(2π)²)
    let loop_fn = |kp: f64| -> Result<[f64; 4]> {
        let kpa = kp.hypot(f.zeta);
        let kpe = (kpa * kpa + f.delta).sqrt();
        let sb = f.eps * kpa + kpe;
        let e1 = f.em1 * kpa * kpe / sb;
        let e2 = f.delta / (kpa + kpe);
        let [m0, _, m2] = spec.moments(k, kp);
        let (mut xx, mut yy) = (e1 * m2 + e2 * (m0 - m2), e1 * (m0 - m2) + e2 * m2);
        let ang = |th: f64| -> Result<[f64; 3]> {
            let c = th.cos();
            let q = (k * k + kp * kp - 2.0 * k * kp * c).max(0.0).sqrt();
            let pm = table.pm(q);
            let pp = 0.5 * d_of(q) - pm;
            Ok([2.0 * zz_weight(q), 2.0 * c * (kpe - kpa) * pp, 2.0 * c * (kpe - f.eps * kpa) * pm])
        };
        let pieces = [Piece::finite(0.0, 0.5 * PI), Piece::finite(0.5 * PI, PI)];
        let [mzz, mxz_pp, mxz_pm] = if k == 0.0 || kp == 0.0 {
            let v = ang(0.0)?;
            [v[0] * PI, v[1] * PI, v[2] * PI]
        } else {
            integrate_pieces(&ang, &pieces, &ang_spec)?.0
        };
        let mut zz = f.em1 * f.em1 * kp * kp / sb * mzz;
        let xz = -f.em1 * f.em1 * kp / sb * (mxz_pp + mxz_pm);
        if subtracted {
            let d0 = TWO_PI * d_of(kp);
            xx -= 0.5 * d0 * (e1 + e2);
            yy -= 0.5 * d0 * (e1 + e2);
            zz -= f.em1 * f.em1 * kp * kp / sb * TWO_PI * zz_weight(kp);
        }
        let w = kp / FOUR_PI2;
        Ok([-f.em1 * xx * w, -f.em1 * yy * w, zz * w, xz * w])
    };
    let v = integrate_pieces(&loop_fn, &t2_pieces(k, lc, f.zeta, wp), &quad)?.0;
    // point terms from the ±σ²/(2π) plateaus of the signed correlators
    let kappa = k.hypot(f.zeta);
    let kpe = (kappa * kappa + f.delta).sqrt();
    let sb = f.eps * kappa + kpe;
    let em1sq = f.em1 * f.em1;
    let zz_point = s2 / TWO_PI * em1sq * k * k / sb * em1sq / f.eps;
    let xz_point = -s2 / TWO_PI * em1sq * k * f.em1 * kappa / sb;
    let plasmon = if subtracted { plasmon_t0(&f, s2, g2) } else { 0.0 };
    Ok(T2Matrix {
        t_xx: v[0] + plasmon,
        t_yy: v[1] + plasmon,
        t_zz: v[2] + zz_point,
        t_xz: v[3] + xz_point,
        t_zx: -(v[3] + xz_point),
        subtracted,
    })
}

/// −σ²g²ζ(ε−1)²/(1+√ε).
fn plasmon_t0(f: &Freq, s2: f64, g2: f64) -> f64 {
    -s2 * g2 * f.zeta * f.em1 * f.em1 / (1.0 + f.eps.sqrt())
}

/// Strengths of the δ(z) counter potential layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CounterPotential {
    /// δV_xx = δV_yy.
    pub v_xx: f64,
    pub v_zz: f64,
    /// The plasmon part of v_xx.
    pub plasmon_xx: f64,
    /// The subtracted loop part of v_xx.
    pub loop_xx: f64,
}

pub fn counter_potential(model: &PermittivityModel, spec: &CorrelationSpec, zeta: f64, g2: f64) -> Result<CounterPotential> {
    model.validate()?;
    spec.validate()?;
    if model.is_ideal() {
        return Err(Error::Unsupported("the counter potential needs a finite permittivity".into()));
    }
    if !(zeta > 0.0) {
        return domain(format!("counter potential needs zeta > 0, got {zeta}"));
    }
    let lc = spec
        .lc()
        .ok_or_else(|| Error::Unsupported(format!("{spec:?} has no finite correlation length")))?;
    if !loop_convergent(spec) {
        return Err(Error::Unsupported(format!("the counter-potential loop integral diverges for {spec:?}")));
    }
    let f = freq(model, zeta, 0.0);
    let em1sq = f.em1 * f.em1;
    let g = |k: f64| -> Result<[f64; 2]> {
        let d = spectrum(spec, k)?;
        let kappa = k.hypot(f.zeta);
        let kpe = (kappa * kappa + f.delta).sqrt();
        let sb = f.eps * kappa + kpe;
        let xx = k / (4.0 * PI) * d * (kappa * kpe / sb + f.zeta * f.zeta / (kappa + kpe));
        let zz = k / TWO_PI * d * k * k / sb;
        Ok([xx, zz])
    };
    let wp = model.plasma_frequency().unwrap_or(1.0);
    let pieces = t2_pieces(0.0, lc, f.zeta, wp);
    let v = integrate_pieces(&g, &pieces, &QuadSpec::new(1e-11).with_max_depth(2000))?.0;
    let s2 = spec.sigma().powi(2);
    let plasmon_xx = -em1sq * g2 * s2 * f.zeta / (1.0 + f.eps.sqrt());
    let loop_xx = em1sq * v[0];
    Ok(CounterPotential {
        v_xx: plasmon_xx + loop_xx,
        v_zz: -em1sq * v[1],
        plasmon_xx,
        loop_xx,
    })
}

/// Representation used for the bulk free-energy shift.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BulkForm {
    /// Photon term plus the K₂ series.
    Closed,
    /// Direct thermal integral over the two dispersion relations.
    Integral,
}

/// Temperature-dependent bulk free-energy density shift of the medium
/// relative to vacuum (plasma model).
pub fn bulk_shift(model: &PermittivityModel, temperature: f64, form: BulkForm) -> Result<f64> {
    model.validate()?;
    let wp = match *model {
        PermittivityModel::Plasma { wp } | PermittivityModel::Drude { wp, gamma: 0.0 } => wp,
        _ => return Err(Error::Unsupported("the bulk shift is available for the plasma model only".into())),
    };
    if !(temperature >= 0.0 && temperature.is_finite()) {
        return parameter(format!("temperature must be non-negative, got {temperature}"));
    }
    if temperature == 0.0 {
        return Ok(0.0);
    }
    let t = temperature;
    match form {
        BulkForm::Closed => {
            let photon = -PI.powi(4) / 45.0 * t.powi(4) / (PI * PI);
            let mut sum = 0.0;
            let mut n = 1usize;
            loop {
                let x = n as f64 * wp / t;
                let term = bessel_k2(x)? / (n * n) as f64;
                sum += term;
                if term <= 1e-17 * sum || n > 100_000 {
                    break;
                }
                n += 1;
            }
            Ok(photon + t * t * wp * wp / (PI * PI) * sum)
        }
        BulkForm::Integral => {
            let photon = |y: f64| -> Result<[f64; 1]> { Ok([y.powi(3) / y_bose(y, t)]) };
            let massive = |y: f64| -> Result<[f64; 1]> {
                let u = (y * y - wp * wp).max(0.0);
                Ok([u * u.sqrt() / y_bose(y, t)])
            };
            let spec = QuadSpec::new(1e-11).with_max_depth(2000);
            let p = integrate_pieces(&photon, &[Piece::finite(0.0, t), Piece::exp_tail(t, t)], &spec)?.0[0];
            let m = integrate_pieces(&massive, &[Piece::sqrt_endpoint(wp, wp + t), Piece::exp_tail(wp + t, t)], &spec)?.0[0];
            Ok(-(p - m) / (3.0 * PI * PI))
        }
    }
}

/// e^{y/T} − 1 without cancellation.
fn y_bose(y: f64, t: f64) -> f64 {
    (y / t).exp_m1()
}
