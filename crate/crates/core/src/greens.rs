//! Green's dyadic of a medium half-space (z > 0) facing vacuum (z < 0), with
//! an identical second plate occupying z < -a.
//!
//! Region matrices are indexed `[z region][z′ region]` with 0 for the medium
//! side (+) and 1 for the vacuum side (−). The xz and zx components carry an
//! overall factor i; they are stored as the real coefficient of i.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::media::{kinematics, PermittivityModel};

/// Reduced Green's function for TE (E) or TM (H) polarisation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    E,
    H,
}

/// Single-interface part or the separation-dependent correction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Part {
    Single,
    Separation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Component {
    Xx,
    Yy,
    Zz,
    Xz,
    Zx,
}

impl Component {
    pub const ALL: [Component; 5] = [Component::Xx, Component::Yy, Component::Zz, Component::Xz, Component::Zx];
}

/// 2×2 matrix over (region of z, region of z′).
pub type RegionMatrix = [[f64; 2]; 2];

/// Interface data at one (ζ, k).
#[derive(Debug, Clone, Copy)]
struct Medium {
    eps: f64,
    k: f64,
    zeta: f64,
    kappa2: f64,
    kappa3: f64,
    r: f64,
    rbar: f64,
    t: f64,
    tbar: f64,
}

impl Medium {
    fn new(model: &PermittivityModel, zeta: f64, k: f64) -> Result<Self> {
        if model.is_ideal() {
            return domain("the dyadic needs a finite permittivity");
        }
        if !(zeta > 0.0) {
            return domain(format!("the dyadic needs zeta > 0, got {zeta}"));
        }
        let kin = kinematics(model, zeta, k)?;
        Ok(Self {
            eps: kin.eps,
            k,
            zeta,
            kappa2: kin.kappa_eps,
            kappa3: kin.kappa3,
            r: kin.r_te,
            rbar: kin.r_tm,
            t: kin.t_te,
            tbar: kin.t_tm,
        })
    }

    fn eps_at(&self, z: f64) -> f64 {
        if z >= 0.0 {
            self.eps
        } else {
            1.0
        }
    }
}

/// c·e^{p z + p′ z′}, or c·e^{-κ|z−z′|} when `abs` is set (then p = κ).
#[derive(Debug, Clone, Copy)]
struct Term {
    c: f64,
    p: f64,
    pp: f64,
    abs: bool,
}

impl Term {
    fn exp(c: f64, p: f64, pp: f64) -> Self {
        Self { c, p, pp, abs: false }
    }

    fn abs(c: f64, kappa: f64) -> Self {
        Self {
            c,
            p: kappa,
            pp: 0.0,
            abs: true,
        }
    }

    /// Value with ∂_z^dz ∂_z′^dzp applied; `sgn` is sgn(z − z′) for the |z−z′| term.
    fn eval(&self, z: f64, zp: f64, dz: u32, dzp: u32, sgn: f64) -> f64 {
        if self.abs {
            let e = self.c * (-self.p * (z - zp).abs()).exp();
            let n = dz + dzp;
            let s = if n % 2 == 0 { 1.0 } else { sgn };
            let parity = if dz % 2 == 0 { 1.0 } else { -1.0 };
            e * parity * s * self.p.powi(n as i32)
        } else {
            self.c * (self.p * z + self.pp * zp).exp() * self.p.powi(dz as i32) * self.pp.powi(dzp as i32)
        }
    }
}

fn region(z: f64) -> usize {
    if z >= 0.0 {
        0
    } else {
        1
    }
}

fn terms(m: &Medium, mode: Mode, part: Part, a: f64, rz: usize, rzp: usize) -> Vec<Term> {
    let (k2, k3) = (m.kappa2, m.kappa3);
    let (rho, one_m_rho2, big2, big3) = match mode {
        Mode::E => (m.r, m.t, k2, k3),
        Mode::H => (m.rbar, m.tbar, k2 / m.eps, k3),
    };
    match part {
        Part::Single => match (rz, rzp) {
            (0, 0) => vec![Term::abs(0.5 / big2, k2), Term::exp(-0.5 * rho / big2, -k2, -k2)],
            (0, 1) => vec![Term::exp(1.0 / (big2 + big3), -k2, k3)],
            (1, 0) => vec![Term::exp(1.0 / (big2 + big3), k3, -k2)],
            _ => vec![Term::abs(0.5 / big3, k3), Term::exp(0.5 * rho / big3, k3, k3)],
        },
        Part::Separation => {
            let e = (-2.0 * a * k3).exp();
            let pref = rho * e / (1.0 - rho * rho * e);
            let c23 = pref / (big2 + big3);
            match (rz, rzp) {
                (0, 0) => vec![Term::exp(0.5 * pref * one_m_rho2 / big2, -k2, -k2)],
                (0, 1) => vec![Term::exp(c23, -k2, -k3), Term::exp(c23 * rho, -k2, k3)],
                (1, 0) => vec![Term::exp(c23, -k3, -k2), Term::exp(c23 * rho, k3, -k2)],
                _ => {
                    let c = 0.5 * pref / big3;
                    vec![
                        Term::exp(c, -k3, -k3),
                        Term::exp(c * rho, -k3, k3),
                        Term::exp(c * rho, k3, -k3),
                        Term::exp(c * rho * rho, k3, k3),
                    ]
                }
            }
        }
    }
}

fn check_geometry(part: Part, a: f64, z: f64, zp: f64) -> Result<()> {
    if !(z.is_finite() && zp.is_finite()) {
        return domain("positions must be finite");
    }
    if part == Part::Separation && !(a > 0.0) {
        return domain(format!("separation must be positive, got {a}"));
    }
    if a > 0.0 && (z < -a || zp < -a) {
        return domain(format!("points must lie above the second plate at z = {}", -a));
    }
    Ok(())
}

fn sum_terms(ts: &[Term], z: f64, zp: f64, dz: u32, dzp: u32, sgn: f64) -> f64 {
    ts.iter().map(|t| t.eval(z, zp, dz, dzp, sgn)).sum()
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Reduced Green's function g_E or g_H (single-interface or separation part).
/// z = 0 is taken on the medium side.
#[allow(clippy::too_many_arguments)]
pub fn reduced_green(mode: Mode, part: Part, model: &PermittivityModel, zeta: f64, k: f64, a: f64, z: f64, zp: f64) -> Result<f64> {
    check_geometry(part, a, z, zp)?;
    let m = Medium::new(model, zeta, k)?;
    let ts = terms(&m, mode, part, a, region(z), region(zp));
    Ok(sum_terms(&ts, z, zp, 0, 0, sign(z - zp)))
}

/// ∂_z^dz ∂_z′^dzp of a reduced Green's function, dropping the δ(z−z′) term.
#[allow(clippy::too_many_arguments)]
pub fn reduced_green_derivative(
    mode: Mode,
    part: Part,
    model: &PermittivityModel,
    zeta: f64,
    k: f64,
    a: f64,
    z: f64,
    zp: f64,
    dz: u32,
    dzp: u32,
) -> Result<f64> {
    check_geometry(part, a, z, zp)?;
    let m = Medium::new(model, zeta, k)?;
    let ts = terms(&m, mode, part, a, region(z), region(zp));
    Ok(sum_terms(&ts, z, zp, dz, dzp, sign(z - zp)))
}

fn component_at(m: &Medium, comp: Component, part: Part, a: f64, z: f64, zp: f64, sgn: f64) -> f64 {
    let (rz, rzp) = (region(z), region(zp));
    let ez = m.eps_at(z);
    let ezp = m.eps_at(zp);
    match comp {
        Component::Yy => m.zeta * m.zeta * sum_terms(&terms(m, Mode::E, part, a, rz, rzp), z, zp, 0, 0, sgn),
        Component::Xx => -sum_terms(&terms(m, Mode::H, part, a, rz, rzp), z, zp, 1, 1, sgn) / (ez * ezp),
        Component::Zz => -m.k * m.k * sum_terms(&terms(m, Mode::H, part, a, rz, rzp), z, zp, 0, 0, sgn) / (ez * ezp),
        Component::Xz => -m.k * sum_terms(&terms(m, Mode::H, part, a, rz, rzp), z, zp, 1, 0, sgn) / (ez * ezp),
        Component::Zx => m.k * sum_terms(&terms(m, Mode::H, part, a, rz, rzp), z, zp, 0, 1, sgn) / (ez * ezp),
    }
}

/// One entry of the δ-subtracted dyadic G̃ at (z, z′). At z = z′ the
/// discontinuous xz/zx entries return the mean of the two one-sided limits.
#[allow(clippy::too_many_arguments)]
pub fn dyadic_component(comp: Component, part: Part, model: &PermittivityModel, zeta: f64, k: f64, a: f64, z: f64, zp: f64) -> Result<f64> {
    check_geometry(part, a, z, zp)?;
    let m = Medium::new(model, zeta, k)?;
    Ok(component_at(&m, comp, part, a, z, zp, sign(z - zp)))
}

/// Limits of the dyadic as z, z′ → 0 for both parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryMatrices {
    pub single: [RegionMatrix; 5],
    pub separation: [RegionMatrix; 5],
}

impl BoundaryMatrices {
    pub fn get(&self, comp: Component, part: Part) -> RegionMatrix {
        let i = Component::ALL.iter().position(|&c| c == comp).unwrap_or(0);
        match part {
            Part::Single => self.single[i],
            Part::Separation => self.separation[i],
        }
    }
}

fn scaled(c: f64, m: RegionMatrix) -> RegionMatrix {
    [[c * m[0][0], c * m[0][1]], [c * m[1][0], c * m[1][1]]]
}

/// Closed-form boundary values of the dyadic at z, z′ → 0±.
pub fn boundary_matrices(model: &PermittivityModel, zeta: f64, k: f64, a: f64) -> Result<BoundaryMatrices> {
    if !(a > 0.0) {
        return domain(format!("separation must be positive, got {a}"));
    }
    let m = Medium::new(model, zeta, k)?;
    let (eps, k2, k3) = (m.eps, m.kappa2, m.kappa3);
    let den = eps * k3 + k2;
    let kb2 = k2 / eps;
    let single = [
        scaled(k2 * k3 / den, [[1.0, 1.0], [1.0, 1.0]]),
        scaled(m.zeta * m.zeta / (k2 + k3), [[1.0, 1.0], [1.0, 1.0]]),
        scaled(-k * k / den, [[1.0 / eps, 1.0], [1.0, eps]]),
        scaled(k / den, [[kb2, k2], [-k3, -eps * k3]]),
        scaled(-k / den, [[kb2, -k3], [k2, -eps * k3]]),
    ];
    let e = (-2.0 * a * k3).exp();
    let pb = m.rbar * m.tbar * e / (1.0 - m.rbar * m.rbar * e);
    let pe = m.r * m.t * e / (1.0 - m.r * m.r * e);
    let separation = [
        scaled(-pb * k2 / (2.0 * eps), [[1.0, 1.0], [1.0, 1.0]]),
        scaled(pe * m.zeta * m.zeta / (2.0 * k2), [[1.0, 1.0], [1.0, 1.0]]),
        scaled(-pb * k * k / (2.0 * k2), [[1.0 / eps, 1.0], [1.0, eps]]),
        scaled(0.5 * pb * k, [[1.0 / eps, 1.0], [1.0 / eps, 1.0]]),
        scaled(-0.5 * pb * k, [[1.0 / eps, 1.0 / eps], [1.0, 1.0]]),
    ];
    Ok(BoundaryMatrices { single, separation })
}

/// R·G·Rᵀ for the rotation taking the x axis onto the direction of `kvec`.
pub fn rotate_dyadic(g: [[f64; 3]; 3], kvec: [f64; 2]) -> Result<[[f64; 3]; 3]> {
    let k = kvec[0].hypot(kvec[1]);
    if !(k > 0.0) {
        return domain("rotation needs a non-zero transverse vector");
    }
    let (c, s) = (kvec[0] / k, kvec[1] / k);
    let r = [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]];
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3)
                .flat_map(|p| (0..3).map(move |q| (p, q)))
                .map(|(p, q)| r[i][p] * g[p][q] * r[j][q])
                .sum();
        }
    }
    Ok(out)
}
