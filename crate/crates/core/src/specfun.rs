//! Special-function kernels: complete elliptic integrals (AGM), modified
//! Bessel functions I₀, I₁, I₂ and K₂, the hypergeometric function
//! ₂F₁(½, ν; 1; x) and ζ(5).

use std::f64::consts::PI;

use statrs::function::gamma::{digamma, gamma};

use crate::error::{domain, Result};

const SQRT_PI: f64 = 1.772_453_850_905_516;
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Series/asymptotic crossover for I_n.
const I_CROSSOVER: f64 = 20.0;
/// Above this argument K₂ uses its asymptotic expansion.
const K_ASYMPTOTIC: f64 = 50.0;
/// Above this argument J₀ uses its Hankel expansion.
const J0_ASYMPTOTIC: f64 = 25.0;

/// Complete elliptic integrals of the first and second kind at parameter m.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipticPair {
    pub k_complete: f64,
    pub e_complete: f64,
    pub m: f64,
}

/// K(m) and E(m) for 0 ≤ m < 1 (parameter convention, not modulus).
pub fn elliptic_complete(m: f64) -> Result<EllipticPair> {
    if !(0.0..1.0).contains(&m) {
        return domain(format!("elliptic parameter m = {m} outside [0, 1)"));
    }
    Ok(elliptic_with_complement(m, 1.0 - m))
}

/// AGM evaluation taking the complementary parameter `m1 = 1 - m` directly,
/// which keeps full accuracy for m close to 1.
pub(crate) fn elliptic_with_complement(m: f64, m1: f64) -> EllipticPair {
    let mut a = 1.0_f64;
    let mut b = m1.sqrt();
    let mut sum = 0.5 * m;
    let mut weight = 0.5;
    for _ in 0..64 {
        let c = 0.5 * (a - b);
        let an = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = an;
        weight *= 2.0;
        sum += weight * c * c;
        if c.abs() <= 1e-17 * a {
            break;
        }
    }
    let k = PI / (2.0 * a);
    EllipticPair {
        k_complete: k,
        e_complete: k * (1.0 - sum),
        m,
    }
}

/// Modified Bessel function I_n(x), n ∈ {0, 1, 2}.
pub fn bessel_i(order: u32, x: f64) -> Result<f64> {
    check_i_args(order, x)?;
    if x < I_CROSSOVER {
        Ok(i_series(order, x))
    } else {
        Ok(i_asymptotic_scaled(order, x) * x.exp())
    }
}

/// Exponentially scaled e^{-x}·I_n(x), safe for arbitrarily large x.
pub fn bessel_i_scaled(order: u32, x: f64) -> Result<f64> {
    check_i_args(order, x)?;
    Ok(i_scaled_unchecked(order, x))
}

pub(crate) fn i_scaled_unchecked(order: u32, x: f64) -> f64 {
    if x < I_CROSSOVER {
        i_series(order, x) * (-x).exp()
    } else {
        i_asymptotic_scaled(order, x)
    }
}

fn check_i_args(order: u32, x: f64) -> Result<()> {
    if order > 2 {
        return domain(format!("Bessel I order {order} not in {{0, 1, 2}}"));
    }
    if !(x >= 0.0) {
        return domain(format!("Bessel I argument {x} is negative"));
    }
    Ok(())
}

fn i_series(order: u32, x: f64) -> f64 {
    let h = 0.5 * x;
    let q = h * h;
    let mut term = match order {
        0 => 1.0,
        1 => h,
        _ => 0.5 * q,
    };
    let n = order as f64;
    let mut sum = term;
    let mut j = 0.0;
    loop {
        j += 1.0;
        term *= q / (j * (j + n));
        sum += term;
        if term <= 1e-17 * sum {
            break;
        }
    }
    sum
}

fn i_asymptotic_scaled(order: u32, x: f64) -> f64 {
    let mu = 4.0 * (order as f64).powi(2);
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut prev = f64::INFINITY;
    for k in 1..60 {
        let odd = (2 * k - 1) as f64;
        term *= -(mu - odd * odd) / (k as f64 * 8.0 * x);
        if term.abs() >= prev {
            break;
        }
        sum += term;
        prev = term.abs();
        if term.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    sum / (2.0 * PI * x).sqrt()
}

/// Modified Bessel function K₂(x), normalized so K₂(x→0) ~ 2/x².
pub fn bessel_k2(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return domain(format!("Bessel K2 argument {x} must be positive"));
    }
    if x <= 2.0 {
        Ok(k2_series(x))
    } else if x <= K_ASYMPTOTIC {
        Ok(bessel_k_scaled(2.0, x) * (-x).exp())
    } else {
        Ok(k_asymptotic_scaled(2.0, x) * (-x).exp())
    }
}

fn k2_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut harmonic_k = 0.0;
    let mut harmonic_k2 = 1.5;
    let mut coeff = 0.5;
    let mut sum = 0.0;
    let mut k = 0.0;
    loop {
        let term = coeff * (2.0 * (-EULER_GAMMA) + harmonic_k + harmonic_k2);
        sum += term;
        if term.abs() <= 1e-18 * sum.abs() && k > 2.0 {
            break;
        }
        k += 1.0;
        harmonic_k += 1.0 / k;
        harmonic_k2 += 1.0 / (k + 2.0);
        coeff *= q / (k * (k + 2.0));
    }
    2.0 / (x * x) - 0.5 - (0.5 * x).ln() * i_series(2, x) + 0.5 * q * sum
}

fn k_asymptotic_scaled(nu: f64, x: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut prev = f64::INFINITY;
    for k in 1..60 {
        let odd = (2 * k - 1) as f64;
        term *= (mu - odd * odd) / (k as f64 * 8.0 * x);
        if term.abs() >= prev {
            break;
        }
        sum += term;
        prev = term.abs();
        if term.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    sum * (PI / (2.0 * x)).sqrt()
}

/// e^{x}·K_ν(x) for real ν ≥ 0 and x > 0, from the trapezoidal rule applied
/// to ∫₀^∞ exp(-2x sinh²(t/2))·cosh(νt) dt, which converges exponentially.
pub(crate) fn bessel_k_scaled(nu: f64, x: f64) -> f64 {
    let h = 0.125_f64.min(0.4 / x.sqrt());
    let mut sum = 0.5;
    let mut prev = 0.5;
    let mut t = 0.0_f64;
    loop {
        t += h;
        let s = (0.5 * t).sinh();
        let term = (-2.0 * x * s * s).exp() * (nu * t).cosh();
        sum += term;
        if term < prev && term <= 1e-18 * sum {
            break;
        }
        prev = term;
        if t > 800.0 {
            break;
        }
    }
    h * sum
}

/// Gauss hypergeometric function ₂F₁(½, ν; 1; x) for 0 ≤ x < 1.
pub fn hyp2f1_half(nu: f64, x: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&x) {
        return domain(format!("hypergeometric argument {x} outside [0, 1)"));
    }
    if !nu.is_finite() {
        return domain("hypergeometric order must be finite");
    }
    Ok(hyp2f1_half_c(nu, x, 1.0 - x))
}

/// ₂F₁(½, ν; 1; x) given both x and its complement x1 = 1 - x.
pub(crate) fn hyp2f1_half_c(nu: f64, x: f64, x1: f64) -> f64 {
    if x == 0.0 {
        return 1.0;
    }
    if nu <= 0.0 && nu == nu.round() {
        return f_direct(nu, x);
    }
    if x <= 0.7 {
        return f_direct(nu, x);
    }
    let excess = 0.5 - nu;
    let n = excess.round();
    let d = excess - n;
    if d.abs() > 1e-3 {
        return f_transform(nu, x1);
    }
    let nu0 = 0.5 - n;
    if d.abs() < 1e-14 {
        return f_transform_log(x1, n as i32);
    }
    // Lagrange interpolation across the removable degeneracy at half-integer ν.
    let h = 2e-3;
    let nodes = [-2.0, -1.0, 0.0, 1.0, 2.0];
    let vals: Vec<f64> = nodes
        .iter()
        .map(|&j| {
            if j == 0.0 {
                f_transform_log(x1, n as i32)
            } else {
                f_transform(nu0 - j * h, x1)
            }
        })
        .collect();
    let t = d / h;
    let mut out = 0.0;
    for (i, &xi) in nodes.iter().enumerate() {
        let mut w = 1.0;
        for (j, &xj) in nodes.iter().enumerate() {
            if i != j {
                w *= (t - xj) / (xi - xj);
            }
        }
        out += w * vals[i];
    }
    out
}

fn f_direct(nu: f64, x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut n = 0.0;
    while n < 200_000.0 {
        term *= (0.5 + n) * (nu + n) / ((n + 1.0) * (n + 1.0)) * x;
        n += 1.0;
        sum += term;
        if term == 0.0 || (term.abs() <= 1e-17 * sum.abs() && n > nu.abs()) {
            break;
        }
    }
    sum
}

/// Plain series Σ (a)_n (b)_n / ((c)_n n!) z^n.
fn series_2f1(a: f64, b: f64, c: f64, z: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut n = 0.0;
    while n < 10_000.0 {
        term *= (a + n) * (b + n) / ((c + n) * (n + 1.0)) * z;
        n += 1.0;
        sum += term;
        if term == 0.0 || (term.abs() <= 1e-17 * sum.abs() && n > b.abs().max(a.abs())) {
            break;
        }
    }
    sum
}

fn rgamma(x: f64) -> f64 {
    if x <= 0.0 && x == x.round() {
        0.0
    } else {
        1.0 / gamma(x)
    }
}

/// Linear transformation x → 1 - x for non-integer ½ - ν.
fn f_transform(nu: f64, x1: f64) -> f64 {
    let a = gamma(0.5 - nu) * rgamma(1.0 - nu) / SQRT_PI;
    let b = gamma(nu - 0.5) * rgamma(nu) / SQRT_PI;
    let first = if a == 0.0 {
        0.0
    } else {
        a * series_2f1(0.5, nu, nu + 0.5, x1)
    };
    let second = if b == 0.0 {
        0.0
    } else {
        b * x1.powf(0.5 - nu) * series_2f1(0.5, 1.0 - nu, 1.5 - nu, x1)
    };
    first + second
}

/// Degenerate transformation when ½ - ν = n is an integer.
fn f_transform_log(x1: f64, n: i32) -> f64 {
    let ln1 = x1.ln();
    if n == 0 {
        let mut coeff = 1.0;
        let mut pw = 1.0;
        let mut sum = 0.0;
        for j in 0..2000 {
            let jf = j as f64;
            let term = coeff * coeff
                * pw
                * (2.0 * digamma(jf + 1.0) - 2.0 * digamma(0.5 + jf) - ln1);
            sum += term;
            if term.abs() <= 1e-17 * sum.abs() && j > 2 {
                break;
            }
            coeff *= (0.5 + jf) / (jf + 1.0);
            pw *= x1;
        }
        return sum / PI;
    }
    if n < 0 {
        let m = -n;
        let mf = m as f64;
        let nu = 0.5 + mf;
        let mut finite = 0.0;
        let mut t = 1.0;
        for j in 0..m {
            let jf = j as f64;
            finite += t;
            t *= (0.5 - mf + jf) * (nu - mf + jf) / ((jf + 1.0) * (1.0 - mf + jf)) * x1;
        }
        let t1 = gamma(mf) / (SQRT_PI * gamma(nu)) * x1.powi(-m) * finite;
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        let pref = -sign / (gamma(0.5 - mf) * SQRT_PI);
        let mut coeff = 1.0 / gamma(mf + 1.0);
        let mut sum = 0.0;
        for j in 0..2000 {
            let jf = j as f64;
            let term = coeff
                * (ln1 - digamma(jf + 1.0) - digamma(jf + mf + 1.0)
                    + digamma(0.5 + jf)
                    + digamma(nu + jf));
            sum += term;
            if term.abs() <= 1e-17 * sum.abs() && j > 2 {
                break;
            }
            coeff *= (0.5 + jf) * (nu + jf) / ((jf + 1.0) * (jf + mf + 1.0)) * x1;
        }
        return t1 + pref * sum;
    }
    let m = n;
    let mf = m as f64;
    let nu = 0.5 - mf;
    let mut finite = 0.0;
    let mut t = 1.0;
    for j in 0..m {
        let jf = j as f64;
        finite += t;
        t *= (0.5 + jf) * (nu + jf) / ((jf + 1.0) * (1.0 - mf + jf)) * x1;
    }
    let t1 = gamma(mf) / (gamma(0.5 + mf) * gamma(nu + mf)) * finite;
    let pref = -(-x1).powi(m) / (SQRT_PI * gamma(nu));
    let mut coeff = 1.0 / gamma(mf + 1.0);
    let mut sum = 0.0;
    for j in 0..2000 {
        let jf = j as f64;
        let term = coeff
            * (ln1 - digamma(jf + 1.0) - digamma(jf + mf + 1.0)
                + digamma(0.5 + mf + jf)
                + digamma(nu + mf + jf));
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() && j > 2 {
            break;
        }
        coeff *= (0.5 + mf + jf) * (nu + mf + jf) / ((jf + 1.0) * (jf + mf + 1.0)) * x1;
    }
    t1 + pref * sum
}

/// Riemann ζ(5) from a partial sum with an Euler–Maclaurin tail.
pub fn riemann_zeta5() -> f64 {
    let n = 20.0_f64;
    let mut s = 0.0;
    let mut j = 19.0_f64;
    while j >= 1.0 {
        s += j.powi(-5);
        j -= 1.0;
    }
    s + n.powi(-4) / 4.0 + n.powi(-5) / 2.0 + 5.0 * n.powi(-6) / 12.0
        - 210.0 * n.powi(-8) / 720.0
        + 15120.0 * n.powi(-10) / 30240.0
}

/// Bessel function J₀(x) for x ≥ 0.
pub fn bessel_j0(x: f64) -> f64 {
    let x = x.abs();
    if x <= J0_ASYMPTOTIC {
        // Midpoint rule on (1/π)∫₀^π cos(x sin θ) dθ, exact to rounding for n > x + 20.
        let n = x.ceil() as usize + 25;
        let h = PI / n as f64;
        return (0..n).map(|j| (x * ((j as f64 + 0.5) * h).sin()).cos()).sum::<f64>() / n as f64;
    }
    let mut p = 0.0;
    let mut q = 0.0;
    let mut term = 1.0_f64;
    let mut k = 0usize;
    loop {
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 0 {
            p += sign * term;
        } else {
            q -= sign * term;
        }
        let kf = (k + 1) as f64;
        let next = term * (2.0 * kf - 1.0).powi(2) / (kf * 8.0 * x);
        if next > term || next < 1e-17 || k > 200 {
            break;
        }
        term = next;
        k += 1;
    }
    let chi = x - 0.25 * PI;
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

/// ln K_ν(x) for ν ≥ 0, x > 0.
pub(crate) fn ln_bessel_k(nu: f64, x: f64) -> f64 {
    if x > K_ASYMPTOTIC && nu < 10.0 {
        return -x + k_asymptotic_scaled(nu, x).ln();
    }
    -x + bessel_k_scaled(nu, x).ln()
}
