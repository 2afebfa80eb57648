//! Faddeeva function w(z) = exp(-z²) erfc(-iz) in the upper half plane.
//!
//! Weideman's rational expansion (SIAM J. Numer. Anal. 31, 1497, 1994) with
//! N = 40 terms; relative accuracy is about 1e-13 or better for Im z > 0.
//! This is used as the closed-form check of the one-dimensional Doppler
//! integrals ∫F(v)/(x − qv + iΓ') dv.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64 as C64;

use crate::error::{EiaError, Result};

const TERMS: usize = 40;

fn scale() -> f64 {
    (TERMS as f64 / std::f64::consts::SQRT_2).sqrt()
}

fn coefficients() -> &'static [f64; TERMS] {
    static COEFFS: OnceLock<[f64; TERMS]> = OnceLock::new();
    COEFFS.get_or_init(|| {
        let m = 2 * TERMS;
        let m2 = 2 * m;
        let l = scale();
        // Samples at k = -M+1 .. M-1, preceded by a zero: length 2M.
        let mut f = vec![0.0; m2];
        for (idx, k) in (-(m as i64) + 1..m as i64).enumerate() {
            let theta = k as f64 * PI / m as f64;
            let t = l * (0.5 * theta).tan();
            f[idx + 1] = (-t * t).exp() * (l * l + t * t);
        }
        // fftshift for even length: rotate by half.
        f.rotate_left(m);
        let mut out = [0.0; TERMS];
        for (j, slot) in out.iter_mut().enumerate() {
            let jj = TERMS - j; // reversed order of a[1..=N]
            let s: f64 = f
                .iter()
                .enumerate()
                .map(|(n, &fv)| fv * (2.0 * PI * (jj * n) as f64 / m2 as f64).cos())
                .sum();
            *slot = s / m2 as f64;
        }
        out
    })
}

/// w(z) for Im z > 0.
pub fn faddeeva_oracle(z: C64) -> Result<C64> {
    if !(z.im > 0.0) || !z.re.is_finite() || !z.im.is_finite() {
        return Err(EiaError::Domain(format!(
            "Faddeeva evaluation requires finite z with Im z > 0, got {z}"
        )));
    }
    let i = C64::new(0.0, 1.0);
    let l = scale();
    let denom = l - i * z;
    let big_z = (l + i * z) / denom;
    let p = coefficients()
        .iter()
        .fold(C64::new(0.0, 0.0), |acc, &c| acc * big_z + c);
    Ok(2.0 * p / (denom * denom) + (1.0 / PI.sqrt()) / denom)
}

/// ∫φ(v)/(x − s·v + iγ) dv for the standard normal φ, with s ≥ 0 and γ > 0.
pub fn gaussian_pole_integral(x: f64, s: f64, gamma: f64) -> Result<C64> {
    if s == 0.0 {
        return Ok(C64::new(1.0, 0.0) / C64::new(x, gamma));
    }
    let s = s.abs();
    let z = C64::new(x, gamma) / (std::f64::consts::SQRT_2 * s);
    let w = faddeeva_oracle(z)?;
    Ok(C64::new(0.0, -(PI / 2.0).sqrt() / s) * w)
}
