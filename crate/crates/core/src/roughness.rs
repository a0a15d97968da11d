//! Roughness statistics: correlation spectra, real-space correlators, the
//! signed correlators of the positive and negative parts of a Gaussian
//! profile, and a spectral-synthesis random-field generator.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{domain, parameter, Error, Result};
use crate::quadrature::{affine_moments, gauss_moments, integrate_pieces, AffineOrder, Piece, QuadSpec};
use crate::specfun::{bessel_j0, ln_bessel_k};

/// Above this order the affine real-space correlator is obtained by a
/// Hankel transform of its spectrum.
const AFFINE_CLOSED_MAX_S: f64 = 60.0;

/// Statistics of an isotropic Gaussian height profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CorrelationSpec {
    Gaussian { sigma: f64, lc: f64 },
    Exponential { sigma: f64, lc: f64 },
    Affine { sigma: f64, lc: f64, s: f64 },
    /// σ²/(1+(r/l_c)²)², available in real space only.
    Rational { sigma: f64, lc: f64 },
    /// l_c → ∞: the proximity-force limit.
    DeltaLimit { sigma: f64 },
    /// l_c → 0: uncorrelated roughness.
    Uncorrelated { sigma: f64 },
}

impl CorrelationSpec {
    pub fn sigma(&self) -> f64 {
        match *self {
            CorrelationSpec::Gaussian { sigma, .. }
            | CorrelationSpec::Exponential { sigma, .. }
            | CorrelationSpec::Affine { sigma, .. }
            | CorrelationSpec::Rational { sigma, .. }
            | CorrelationSpec::DeltaLimit { sigma }
            | CorrelationSpec::Uncorrelated { sigma } => sigma,
        }
    }

    pub fn lc(&self) -> Option<f64> {
        match *self {
            CorrelationSpec::Gaussian { lc, .. }
            | CorrelationSpec::Exponential { lc, .. }
            | CorrelationSpec::Affine { lc, .. }
            | CorrelationSpec::Rational { lc, .. } => Some(lc),
            _ => None,
        }
    }

    /// Same statistics with a different σ.
    pub fn with_sigma(&self, sigma: f64) -> Self {
        let mut out = *self;
        match &mut out {
            CorrelationSpec::Gaussian { sigma: s, .. }
            | CorrelationSpec::Exponential { sigma: s, .. }
            | CorrelationSpec::Affine { sigma: s, .. }
            | CorrelationSpec::Rational { sigma: s, .. }
            | CorrelationSpec::DeltaLimit { sigma: s }
            | CorrelationSpec::Uncorrelated { sigma: s } => *s = sigma,
        }
        out
    }

    /// Position in the affine family (Exponential is s = 1/2, Gaussian s = ∞).
    pub fn affine_order(&self) -> Option<AffineOrder> {
        match *self {
            CorrelationSpec::Gaussian { .. } => Some(AffineOrder::Infinite),
            CorrelationSpec::Exponential { .. } => Some(AffineOrder::Finite(0.5)),
            CorrelationSpec::Affine { s, .. } => Some(AffineOrder::Finite(s)),
            _ => None,
        }
    }

    pub fn is_symbolic(&self) -> bool {
        matches!(self, CorrelationSpec::DeltaLimit { .. } | CorrelationSpec::Uncorrelated { .. })
    }

    pub fn validate(&self) -> Result<()> {
        let sigma = self.sigma();
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return parameter(format!("sigma must be non-negative, got {sigma}"));
        }
        if let Some(lc) = self.lc() {
            if !(lc > 0.0 && lc.is_finite()) {
                return parameter(format!("correlation length must be positive, got {lc}"));
            }
        }
        if let CorrelationSpec::Affine { s, .. } = *self {
            if !(s > 0.0 && s.is_finite()) {
                return parameter(format!("affine order must be positive, got {s}"));
            }
        }
        Ok(())
    }
}

/// Interface consumed by the energy kernels: a spectrum D(q) with its
/// angular moments about a loop momentum.
pub trait Spectrum: Sync {
    /// Total variance σ² = ∫ q dq D(q)/(2π).
    fn sigma2(&self) -> f64;
    fn value(&self, q: f64) -> f64;
    /// (M₀, M₁, M₂) = ∫₀^{2π} dθ D(|k − k′|) cosⁿθ.
    fn moments(&self, k: f64, kp: f64) -> [f64; 3];
    /// Correlation lengths, used to place quadrature breakpoints.
    fn lengths(&self) -> Vec<f64>;
    /// Reject specs that have no finite spectrum.
    fn check(&self) -> Result<()>;
}

impl Spectrum for CorrelationSpec {
    fn sigma2(&self) -> f64 {
        self.sigma().powi(2)
    }

    fn value(&self, q: f64) -> f64 {
        spectrum(self, q).unwrap_or(0.0)
    }

    fn moments(&self, k: f64, kp: f64) -> [f64; 3] {
        let (Some(order), Some(lc)) = (self.affine_order(), self.lc()) else {
            return [0.0; 3];
        };
        let l2 = lc * lc;
        let pref = 2.0 * PI * self.sigma2() * l2;
        let dk = k - kp;
        let m = match order {
            AffineOrder::Infinite => gauss_moments(0.5 * l2 * dk * dk, l2 * k * kp),
            AffineOrder::Finite(s) => {
                let a = 0.5 * l2 * (k * k + kp * kp) / s;
                let b = l2 * k * kp / s;
                affine_moments(s, 1.0 + a, b, 1.0 + 0.5 * l2 * dk * dk / s)
            }
        };
        [pref * m[0], pref * m[1], pref * m[2]]
    }

    fn lengths(&self) -> Vec<f64> {
        self.lc().into_iter().collect()
    }

    fn check(&self) -> Result<()> {
        self.validate()?;
        if self.affine_order().is_none() {
            return Err(Error::Unsupported(format!("{self:?} has no spectrum for the loop integrals")));
        }
        Ok(())
    }
}

/// D(q) in the 2-D Fourier convention D(q) = ∫d²x e^{iq·x} D₂(|x|).
pub fn spectrum(spec: &CorrelationSpec, q: f64) -> Result<f64> {
    if !(q >= 0.0) {
        return domain(format!("spectrum needs q >= 0, got {q}"));
    }
    spec.validate()?;
    let s2 = spec.sigma().powi(2);
    match *spec {
        CorrelationSpec::Gaussian { lc, .. } => Ok(2.0 * PI * s2 * lc * lc * (-0.5 * (q * lc).powi(2)).exp()),
        CorrelationSpec::Exponential { lc, .. } => {
            Ok(2.0 * PI * s2 * lc * lc * (1.0 + (q * lc).powi(2)).powf(-1.5))
        }
        CorrelationSpec::Affine { lc, s, .. } => {
            Ok(2.0 * PI * s2 * lc * lc * (1.0 + (q * lc).powi(2) / (2.0 * s)).powf(-1.0 - s))
        }
        _ => Err(Error::Unsupported(format!("{spec:?} has no numerical spectrum"))),
    }
}

/// Height-height correlator D₂(r).
pub fn real_space(spec: &CorrelationSpec, r: f64) -> Result<f64> {
    if !(r >= 0.0) {
        return domain(format!("real-space correlator needs r >= 0, got {r}"));
    }
    spec.validate()?;
    let s2 = spec.sigma().powi(2);
    if r == 0.0 {
        return Ok(s2);
    }
    match *spec {
        CorrelationSpec::Gaussian { lc, .. } => Ok(s2 * (-0.5 * (r / lc).powi(2)).exp()),
        CorrelationSpec::Exponential { lc, .. } => Ok(s2 * (-r / lc).exp()),
        CorrelationSpec::Rational { lc, .. } => Ok(s2 / (1.0 + (r / lc).powi(2)).powi(2)),
        CorrelationSpec::Affine { lc, s, .. } if s <= AFFINE_CLOSED_MAX_S => {
            let x = r * (2.0 * s).sqrt() / lc;
            let ln = 2f64.ln() + s * (0.5 * x).ln() - ln_gamma(s) + ln_bessel_k(s, x);
            Ok(s2 * ln.exp())
        }
        CorrelationSpec::Affine { lc, .. } => {
            let f = |q: f64| spectrum(spec, q).unwrap_or(0.0) * q / (2.0 * PI);
            hankel0(&f, r, lc, 60.0 * lc / r.max(lc) + 40.0 / lc, s2 * 1e-13)
        }
        _ => Err(Error::Unsupported(format!("{spec:?} has no real-space correlator"))),
    }
}

/// ∫₀^{upper} g(x) J₀(y x) dx with panels no wider than half an oscillation.
fn hankel0(g: &(dyn Fn(f64) -> f64 + Sync), y: f64, scale: f64, upper: f64, abs_tol: f64) -> Result<f64> {
    let width = (0.5 * scale).min(if y > 0.0 { PI / y } else { f64::INFINITY });
    let n = ((upper / width).ceil() as usize).max(1);
    let pieces: Vec<Piece> = (0..n)
        .map(|i| Piece::finite(upper * i as f64 / n as f64, upper * (i + 1) as f64 / n as f64))
        .collect();
    let spec = QuadSpec::new(1e-10).with_abs(abs_tol).with_max_depth(50 * n + 200);
    let f = |x: f64| -> Result<[f64; 1]> { Ok([g(x) * bessel_j0(y * x)]) };
    Ok(integrate_pieces(&f, &pieces, &spec)?.0[0])
}

/// ⟨h₊h₊⟩ and ⟨h₊h₋⟩ at one separation, h± the positive and negative parts of h.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignedCorrelators {
    pub pp: f64,
    pub pm: f64,
}

/// Signed correlators from the correlation coefficient c = D₂/σ² ∈ [0, 1].
pub fn signed_from_ratio(c: f64, sigma2: f64) -> Result<SignedCorrelators> {
    if !(0.0..=1.0).contains(&c) {
        return domain(format!("correlation coefficient {c} outside [0, 1]; spectrum must be monotone"));
    }
    let phi = c.acos();
    let (sp, cp) = phi.sin_cos();
    let pref = sigma2 / (2.0 * PI);
    Ok(SignedCorrelators {
        pp: pref * (sp + (PI - phi) * cp),
        pm: pref * (phi * cp - sp),
    })
}

pub fn signed_pair(spec: &CorrelationSpec, r: f64) -> Result<SignedCorrelators> {
    let s2 = spec.sigma().powi(2);
    if s2 == 0.0 {
        return Ok(SignedCorrelators { pp: 0.0, pm: 0.0 });
    }
    let d2 = real_space(spec, r)?;
    signed_from_ratio((d2 / s2).min(1.0), s2)
}

/// Radius beyond which D₂ is below 1e-15 σ².
fn decay_radius(spec: &CorrelationSpec) -> Result<f64> {
    let lc = spec.lc().ok_or_else(|| Error::Unsupported(format!("{spec:?} has no correlation length")))?;
    let s2 = spec.sigma().powi(2);
    let mut r = lc;
    while real_space(spec, r)? > 1e-15 * s2 {
        r *= 1.25;
        if r > 1e4 * lc {
            break;
        }
    }
    Ok(r)
}

/// Fourier transforms (d₊₊, d₊₋) of the signed correlators at q > 0, with
/// the constant ±σ²/(2π) plateaus removed (they only contribute at q = 0).
pub fn signed_spectra(spec: &CorrelationSpec, q: f64) -> Result<(f64, f64)> {
    if !(q > 0.0) {
        return domain(format!("signed spectra need q > 0, got {q}"));
    }
    spectrum(spec, q)?;
    let lc = spec.lc().unwrap_or(1.0);
    let s2 = spec.sigma().powi(2);
    let rmax = decay_radius(spec)?;
    let plateau = s2 / (2.0 * PI);
    let gpp = |r: f64| 2.0 * PI * r * (signed_pair(spec, r).map(|p| p.pp).unwrap_or(0.0) - plateau);
    let gpm = |r: f64| 2.0 * PI * r * (signed_pair(spec, r).map(|p| p.pm).unwrap_or(0.0) + plateau);
    let tol = 1e-11 * s2 * lc * lc;
    Ok((hankel0(&gpp, q, lc, rmax, tol)?, hankel0(&gpm, q, lc, rmax, tol)?))
}

/// A sampled periodic height field on an nx × ny grid of spacing dx (row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct HeightField {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub data: Vec<f64>,
}

impl HeightField {
    #[inline]
    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.data[iy * self.nx + ix]
    }
}

/// Spectral synthesis of a zero-mean periodic Gaussian field with spectrum
/// D(q); the discrete spectrum is rescaled so the expected grid variance is σ².
pub fn synthesize_profile(spec: &CorrelationSpec, grid_size: usize, box_length: f64, seed: u64) -> Result<HeightField> {
    if grid_size < 2 || !grid_size.is_power_of_two() {
        return parameter(format!("grid size {grid_size} must be a power of two"));
    }
    let lc = spec
        .lc()
        .ok_or_else(|| Error::Unsupported(format!("{spec:?} cannot be sampled")))?;
    spectrum(spec, 0.0)?;
    let n = grid_size;
    let dx = box_length / n as f64;
    if box_length < 20.0 * lc {
        return parameter(format!("box length {box_length} shorter than 20 correlation lengths"));
    }
    if lc / dx < 8.0 {
        return parameter(format!("grid spacing {dx} resolves l_c = {lc} with fewer than 8 points"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buf: Vec<Complex<f64>> = (0..n * n)
        .map(|_| Complex::new(StandardNormal.sample(&mut rng), 0.0))
        .collect();
    let mut planner = FftPlanner::new();
    fft2(&mut buf, n, planner.plan_fft_forward(n).as_ref());
    let dq = 2.0 * PI / box_length;
    let freq = |i: usize| if i <= n / 2 { i as f64 } else { i as f64 - n as f64 };
    let mut amp = vec![0.0; n * n];
    let mut total = 0.0;
    for iy in 0..n {
        for ix in 0..n {
            if ix == 0 && iy == 0 {
                continue;
            }
            let q = dq * freq(ix).hypot(freq(iy));
            let d = spectrum(spec, q)?;
            amp[iy * n + ix] = d;
            total += d;
        }
    }
    // Expected variance of the synthesized grid is Σ_q amp/N² · (per-mode power N²)/N².
    let norm = spec.sigma().powi(2) * (n * n) as f64 / total;
    for (c, a) in buf.iter_mut().zip(&amp) {
        *c *= (a * norm).sqrt();
    }
    fft2(&mut buf, n, planner.plan_fft_inverse(n).as_ref());
    let scale = 1.0 / (n * n) as f64;
    Ok(HeightField {
        nx: n,
        ny: n,
        dx,
        data: buf.iter().map(|c| c.re * scale).collect(),
    })
}

fn fft2(buf: &mut [Complex<f64>], n: usize, fft: &dyn rustfft::Fft<f64>) {
    for row in buf.chunks_mut(n) {
        fft.process(row);
    }
    let mut col = vec![Complex::new(0.0, 0.0); n];
    for ix in 0..n {
        for iy in 0..n {
            col[iy] = buf[iy * n + ix];
        }
        fft.process(&mut col);
        for iy in 0..n {
            buf[iy * n + ix] = col[iy];
        }
    }
}

/// Area-averaged correlators along the two grid axes.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationEstimate {
    pub r: Vec<f64>,
    /// ⟨h⟩.
    pub d1: f64,
    pub d2: Vec<f64>,
    pub pp: Vec<f64>,
    pub pm: Vec<f64>,
}

/// Estimators of D₁, D₂(r), ⟨h₊h₊⟩(r) and ⟨h₊h₋⟩(r) at r = j·dx. The signed
/// estimators are symmetrised over (h₊, h₋) so that pp + pm = D₂/2 holds
/// sample by sample.
pub fn estimate_correlations(field: &HeightField, max_r: f64) -> CorrelationEstimate {
    let (nx, ny) = (field.nx, field.ny);
    let jmax = ((max_r / field.dx).floor() as usize).min(nx.min(ny) / 2);
    let npts = (nx * ny) as f64;
    let d1 = field.data.iter().sum::<f64>() / npts;
    let plus: Vec<f64> = field.data.iter().map(|&h| h.max(0.0)).collect();
    let minus: Vec<f64> = field.data.iter().map(|&h| h.min(0.0)).collect();
    let mut r = Vec::with_capacity(jmax + 1);
    let mut d2 = Vec::with_capacity(jmax + 1);
    let mut pp = Vec::with_capacity(jmax + 1);
    let mut pm = Vec::with_capacity(jmax + 1);
    for j in 0..=jmax {
        let (mut s_hh, mut s_pp, mut s_mm, mut s_pm, mut s_mp) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for iy in 0..ny {
            for ix in 0..nx {
                let i0 = iy * nx + ix;
                for i1 in [iy * nx + (ix + j) % nx, ((iy + j) % ny) * nx + ix] {
                    s_hh += field.data[i0] * field.data[i1];
                    s_pp += plus[i0] * plus[i1];
                    s_mm += minus[i0] * minus[i1];
                    s_pm += plus[i0] * minus[i1];
                    s_mp += minus[i0] * plus[i1];
                }
            }
        }
        let w = 1.0 / (2.0 * npts);
        r.push(j as f64 * field.dx);
        d2.push(s_hh * w);
        pp.push(0.5 * (s_pp + s_mm) * w);
        pm.push(0.5 * (s_pm + s_mp) * w);
    }
    CorrelationEstimate { r, d1, d2, pp, pm }
}

/// Read a height field: header line `nx,ny,dx_nm`, a line with those three
/// values, then ny rows of nx comma-separated heights.
pub fn read_height_field(path: &Path) -> Result<HeightField> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_height_field(&text)
}

pub fn parse_height_field(text: &str) -> Result<HeightField> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
    let bad = |line: usize, msg: &str| Error::Parse {
        line: line + 1,
        msg: msg.to_string(),
    };
    let (hl, header) = lines.next().ok_or_else(|| bad(0, "empty height field"))?;
    if header.trim().replace(' ', "") != "nx,ny,dx_nm" {
        return Err(bad(hl, "expected header nx,ny,dx_nm"));
    }
    let (ml, meta) = lines.next().ok_or_else(|| bad(hl + 1, "missing grid dimensions"))?;
    let parts: Vec<&str> = meta.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(bad(ml, "expected three values nx,ny,dx_nm"));
    }
    let nx: usize = parts[0].parse().map_err(|_| bad(ml, "invalid nx"))?;
    let ny: usize = parts[1].parse().map_err(|_| bad(ml, "invalid ny"))?;
    let dx: f64 = parts[2].parse().map_err(|_| bad(ml, "invalid dx_nm"))?;
    if nx == 0 || ny == 0 || !(dx > 0.0) {
        return Err(bad(ml, "grid dimensions and spacing must be positive"));
    }
    let mut data = Vec::with_capacity(nx * ny);
    let mut rows = 0;
    for (ln, line) in lines {
        let row: Vec<f64> = line
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad(ln, "invalid height value"))?;
        if row.len() != nx {
            return Err(bad(ln, &format!("expected {nx} values, found {}", row.len())));
        }
        data.extend(row);
        rows += 1;
    }
    if rows != ny {
        return Err(bad(0, &format!("expected {ny} rows, found {rows}")));
    }
    Ok(HeightField { nx, ny, dx, data })
}

pub fn write_height_field(field: &HeightField) -> String {
    let mut out = format!("nx,ny,dx_nm\n{},{},{}\n", field.nx, field.ny, field.dx);
    for row in field.data.chunks(field.nx) {
        let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}
