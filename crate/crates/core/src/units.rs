//! Conversion between natural units (ħ = c = k_B = 1) and nm / eV.

/// ħc in eV·nm.
pub const HBAR_C_EV_NM: f64 = 197.326_980_4;
/// One electron-volt in joule.
pub const EV_J: f64 = 1.602_176_634e-19;
/// Boltzmann constant in eV/K.
pub const K_B_EV: f64 = 8.617_333_262e-5;

/// Energy in eV to inverse length in nm⁻¹.
pub fn ev_to_inv_nm(ev: f64) -> f64 {
    ev / HBAR_C_EV_NM
}

/// Inverse length in nm⁻¹ to energy in eV.
pub fn inv_nm_to_ev(k: f64) -> f64 {
    k * HBAR_C_EV_NM
}

/// Force in piconewton from a natural-units value measured in nm⁻²
/// (energy per area times length, with ħc restored).
pub fn inv_nm2_to_pn(f: f64) -> f64 {
    // ħc [J·nm] / nm² = 1e9 N.
    f * HBAR_C_EV_NM * EV_J * 1e9 * 1e12
}

/// Inverse of [`inv_nm2_to_pn`].
pub fn pn_to_inv_nm2(f: f64) -> f64 {
    f / (HBAR_C_EV_NM * EV_J * 1e21)
}

/// Temperature in kelvin to inverse length in nm⁻¹.
pub fn kelvin_to_inv_nm(t: f64) -> f64 {
    ev_to_inv_nm(t * K_B_EV)
}

/// Energy per area in J/m² from a natural-units value in nm⁻³.
pub fn inv_nm3_to_j_per_m2(e: f64) -> f64 {
    // ħc [J·nm] / nm³ = 1e18 J/m².
    e * HBAR_C_EV_NM * EV_J * 1e18
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gold_anchor() {
        let wp = ev_to_inv_nm(9.0);
        assert!((wp - 0.0456).abs() < 1e-3);
        assert!((inv_nm_to_ev(wp) - 9.0).abs() < 1e-12);
        assert!((pn_to_inv_nm2(inv_nm2_to_pn(0.37)) - 0.37).abs() < 1e-15);
        assert!((kelvin_to_inv_nm(300.0) - 1.3101e-4).abs() < 1e-7);
        // Ideal-metal Casimir energy at 100 nm: −π²ħc/(720 a³) ≈ −4.334e-7 J/m².
        let e = -std::f64::consts::PI.powi(2) / (720.0 * 1e6);
        assert!((inv_nm3_to_j_per_m2(e) / -4.334e-7 - 1.0).abs() < 1e-3);
    }
}
