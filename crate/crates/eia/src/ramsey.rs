//! Ramsey narrowing for a one-dimensional stepwise light sheet |x| ≤ a.
//!
//! Inside the sheet the ground (R_g = R_g1g2) and excited (R_e = R_e1e2)
//! Raman coherences obey
//!
//!   D R_g'' + (bAΓD/γ_vcc) R_e'' = Dα1² R_g − bAΓ R_e + β1
//!   D R_e''                      = Dα2² R_e − β2 R_g − β3
//!
//! and outside the same system holds with α1 → α3 and no sources. Lengths
//! are in units of 1/q_p and rates in units of Γ, so D = qp_vth²/γ_vcc.
//! The optical coherence is R_e1g2 = iK_1p(V1 R_g + Vp n0) inside the sheet.

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, EiaError, Result};
use crate::model::{FieldConfig, ModelParams};
use crate::quadrature::Quadrature;
use crate::spectrum::{validate_detunings, Spectrum};
use crate::velocity::{one_photon_kernels, OnePhotonKernels};

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Relative root separation below which the two interior modes are treated
/// as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-10;

/// Relative γ_vcc shift used to split degenerate modes.
pub const DEGENERACY_SHIFT: f64 = 1e-9;

/// Conversion between physical and model units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalUnits {
    /// One-dimensional thermal speed √(k_B T/m) in m/s.
    pub v_th: f64,
    /// Probe wavelength in m.
    pub wavelength: f64,
}

impl PhysicalUnits {
    /// Rb-85 at 300 K on the 780 nm line.
    pub fn rb85_room_temperature() -> Self {
        Self {
            v_th: 171.4,
            wavelength: 780e-9,
        }
    }

    /// q_p in 1/m.
    pub fn q_p(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.wavelength
    }

    /// A length in metres expressed in units of 1/q_p.
    pub fn length(&self, metres: f64) -> f64 {
        metres * self.q_p()
    }

    /// Γ in 1/s implied by a dimensionless q_p·v_th.
    pub fn gamma_rate(&self, qp_vth: f64) -> f64 {
        self.q_p() * self.v_th / qp_vth
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.v_th > 0.0 && self.v_th.is_finite()) {
            return Err(invalid("v_th", "must be finite and > 0"));
        }
        if !(self.wavelength > 0.0 && self.wavelength.is_finite()) {
            return Err(invalid("wavelength", "must be finite and > 0"));
        }
        Ok(())
    }
}

impl Default for PhysicalUnits {
    fn default() -> Self {
        Self::rb85_room_temperature()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RamseyConfig {
    pub params: ModelParams,
    pub fields: FieldConfig,
    /// Sheet half-thickness a in metres.
    pub half_width: f64,
    pub units: PhysicalUnits,
    /// Dimensionless diffusion coefficient; defaults to qp_vth²/γ_vcc.
    pub diffusion_d: Option<f64>,
}

impl RamseyConfig {
    pub fn new(params: ModelParams, fields: FieldConfig, half_width: f64) -> Self {
        Self {
            params,
            fields,
            half_width,
            units: PhysicalUnits::default(),
            diffusion_d: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.fields.validate()?;
        self.units.validate()?;
        if !(self.half_width > 0.0 && self.half_width.is_finite()) {
            return Err(invalid("half_width", "must be finite and > 0"));
        }
        if self.fields.dq_vth != 0.0 {
            return Err(invalid("dq_vth", "the stepwise-sheet solution needs δq = 0"));
        }
        if self.fields.delta1 != 0.0 || self.fields.delta2 != 0.0 {
            return Err(invalid("delta1/delta2", "the stepwise-sheet solution needs Δ1 = Δ2 = 0"));
        }
        if !(self.params.gamma_vcc > 0.0) {
            return Err(invalid("gamma_vcc", "diffusion needs γ_vcc > 0"));
        }
        if let Some(d) = self.diffusion_d {
            if !(d > 0.0 && d.is_finite()) {
                return Err(invalid("diffusion_d", "must be finite and > 0"));
            }
        }
        Ok(())
    }

    /// a in units of 1/q_p.
    pub fn half_width_scaled(&self) -> f64 {
        self.units.length(self.half_width)
    }

    pub fn diffusion(&self) -> f64 {
        self.diffusion_d
            .unwrap_or(self.fields.qp_vth * self.fields.qp_vth / self.params.gamma_vcc)
    }

    pub fn with_deltap(&self, deltap: f64) -> Self {
        Self {
            fields: self.fields.with_deltap(deltap),
            ..*self
        }
    }
}

/// Rates, sources and interior mode wave-numbers at one Δp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RamseyCoefficients {
    pub deltap: f64,
    pub diffusion_d: f64,
    /// γ_vcc entering the mode equations (shifted if the modes were degenerate).
    pub gamma_vcc: f64,
    /// bAΓ.
    pub toc_rate: f64,
    pub alpha1_sq: C64,
    pub alpha2_sq: C64,
    pub alpha3_sq: C64,
    pub beta1: C64,
    pub beta2: C64,
    pub beta3: C64,
    pub k1: C64,
    pub k2: C64,
    pub degenerate_shifted: bool,
}

impl RamseyCoefficients {
    pub fn alpha2(&self) -> C64 {
        decaying_sqrt(self.alpha2_sq)
    }

    pub fn alpha3(&self) -> C64 {
        decaying_sqrt(self.alpha3_sq)
    }

    /// Ground/excited amplitudes (g, e) of an interior mode with wave-number k.
    pub fn interior_mode(&self, k: C64) -> (C64, C64) {
        let d = self.diffusion_d;
        let u = k * k;
        let row1 = (d * (u - self.alpha1_sq), self.toc_rate * (1.0 + d * u / self.gamma_vcc));
        let row2 = (self.beta2, d * (u - self.alpha2_sq));
        let from1 = (-row1.1, row1.0);
        let from2 = (-row2.1, row2.0);
        let norm = |v: (C64, C64)| (v.0.norm_sqr() + v.1.norm_sqr()).sqrt();
        let v = if norm(from1) >= norm(from2) { from1 } else { from2 };
        let n = norm(v);
        if n == 0.0 {
            (C64::new(1.0, 0.0), C64::new(0.0, 0.0))
        } else {
            (v.0 / n, v.1 / n)
        }
    }

    /// R_g amplitude of the exterior mode that carries R_e = 1 and decays as e^{−α2|x|}.
    pub fn exterior_ground_share(&self) -> C64 {
        let d = self.diffusion_d;
        -self.toc_rate * (1.0 + d * self.alpha2_sq / self.gamma_vcc) / (d * (self.alpha2_sq - self.alpha3_sq))
    }

    /// Uniform-illumination (∇ = 0) values of R_g and R_e inside the sheet.
    pub fn particular(&self) -> Result<(C64, C64)> {
        let d = self.diffusion_d;
        let den = d * d * self.alpha1_sq * self.alpha2_sq - self.toc_rate * self.beta2;
        if den.norm() == 0.0 {
            return Err(EiaError::Singular("uniform-illumination system is singular".into()));
        }
        let pg = (self.toc_rate * self.beta3 - d * self.alpha2_sq * self.beta1) / den;
        let pe = (self.beta2 * pg + self.beta3) / (d * self.alpha2_sq);
        Ok((pg, pe))
    }
}

/// Square root with Re ≥ 0; a purely imaginary result takes Im > 0.
pub fn decaying_sqrt(z: C64) -> C64 {
    let s = z.sqrt();
    if s.re < 0.0 || (s.re == 0.0 && s.im < 0.0) {
        -s
    } else {
        s
    }
}

/// Roots u = k² of Dγu² − [Dγα₊² + bAΓβ2]u + Dγα1²α2² − bAΓβ2γ/D = 0
/// with γ = γ_vcc, ordered as returned by the stable quadratic formula.
fn mode_roots(
    d: f64,
    gv: f64,
    toc: f64,
    a1: C64,
    a2: C64,
    beta2: C64,
) -> Result<(C64, C64, f64)> {
    let qa = C64::new(d * gv, 0.0);
    let qb = -(d * gv * (a1 + a2) + toc * beta2);
    let qc = d * gv * a1 * a2 - toc * beta2 * gv / d;
    let disc = qb * qb - 4.0 * qa * qc;
    if !disc.re.is_finite() || !disc.im.is_finite() {
        return Err(EiaError::Domain("mode discriminant is not finite".into()));
    }
    let s = disc.sqrt();
    let q = if (qb.conj() * s).re >= 0.0 { -0.5 * (qb + s) } else { -0.5 * (qb - s) };
    if q.norm() == 0.0 {
        let u = -qb / (2.0 * qa);
        return Ok((u, u, 0.0));
    }
    let (u1, u2) = (q / qa, qc / q);
    let sep = (u1 - u2).norm() / (u1.norm() + u2.norm()).max(f64::MIN_POSITIVE);
    Ok((u1, u2, sep))
}

/// α's, β's and the interior wave-numbers at the configured Δp.
pub fn ramsey_coefficients(cfg: &RamseyConfig, kernels: &OnePhotonKernels) -> Result<RamseyCoefficients> {
    cfg.validate()?;
    let p = &cfg.params;
    let f = &cfg.fields;
    let d = cfg.diffusion();
    let toc = p.toc_rate();
    let detune = C64::new(p.gamma_g, -f.deltap);
    let alpha3_sq = detune / d;
    let alpha2_sq = alpha3_sq + p.gamma_sp / d;
    let alpha1_sq = (detune + kernels.k_1p * f.v1.norm_sqr() + kernels.k_3p * f.v2.norm_sqr()) / d;
    let beta1 = f.v1.conj() * f.vp * kernels.k_1p * p.n0;
    let beta2 = f.v1 * f.v2.conj() * (kernels.k_1p + kernels.k_3p);
    let beta3 = f.v2.conj() * f.vp * (kernels.k_1p + kernels.k_pump) * p.n0;

    let mut gv = p.gamma_vcc;
    let mut d_eff = d;
    let mut shifted = false;
    let (mut u1, mut u2, sep) = mode_roots(d, gv, toc, alpha1_sq, alpha2_sq, beta2)?;
    if sep < DEGENERACY_TOL {
        log::warn!(
            "degenerate diffusion modes at Δp = {}; shifting γ_vcc by a relative {DEGENERACY_SHIFT:e}",
            f.deltap
        );
        gv *= 1.0 + DEGENERACY_SHIFT;
        if cfg.diffusion_d.is_none() {
            d_eff = f.qp_vth * f.qp_vth / gv;
        }
        let scale = d / d_eff;
        let (r1, r2, sep2) = mode_roots(d_eff, gv, toc, alpha1_sq * scale, alpha2_sq * scale, beta2)?;
        if sep2 < DEGENERACY_TOL {
            return Err(EiaError::Singular("diffusion modes stay degenerate after the γ_vcc shift".into()));
        }
        u1 = r1;
        u2 = r2;
        shifted = true;
    }
    let scale = d / d_eff;
    Ok(RamseyCoefficients {
        deltap: f.deltap,
        diffusion_d: d_eff,
        gamma_vcc: gv,
        toc_rate: toc,
        alpha1_sq: alpha1_sq * scale,
        alpha2_sq: alpha2_sq * scale,
        alpha3_sq: alpha3_sq * scale,
        beta1,
        beta2,
        beta3,
        k1: decaying_sqrt(u1),
        k2: decaying_sqrt(u2),
        degenerate_shifted: shifted,
    })
}

/// e^{−2z} for Re z ≥ 0.
fn em2(z: C64) -> C64 {
    (-2.0 * z).exp()
}

/// cosh(kx)/cosh(ka) for 0 ≤ x ≤ a, Re k ≥ 0, without overflow.
fn cosh_ratio(k: C64, x: f64, a: f64) -> C64 {
    (k * (x - a)).exp() * (1.0 + em2(k * x)) / (1.0 + em2(k * a))
}

/// sinh(kx)/cosh(ka) for 0 ≤ x ≤ a, Re k ≥ 0.
fn sinh_ratio(k: C64, x: f64, a: f64) -> C64 {
    (k * (x - a)).exp() * (1.0 - em2(k * x)) / (1.0 + em2(k * a))
}

fn tanh_pos(z: C64) -> C64 {
    let e = em2(z);
    (1.0 - e) / (1.0 + e)
}

/// tanh(z)/z, the beam average of cosh(kx)/cosh(ka).
fn tanh_over(z: C64) -> C64 {
    if z.norm() < 1e-4 {
        1.0 - z * z / 3.0
    } else {
        tanh_pos(z) / z
    }
}

/// Piecewise solution at one Δp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RamseySolution {
    pub coeffs: RamseyCoefficients,
    /// a in units of 1/q_p.
    pub half_width: f64,
    pub k_1p: C64,
    pub v1: C64,
    pub vp: C64,
    pub n0: f64,
    /// (g, e) amplitudes of the k1 and k2 interior modes.
    pub modes: [(C64, C64); 2],
    /// Uniform-illumination R_g and R_e.
    pub particular: (C64, C64),
    /// Interior mode weights (k1, k2), each multiplying cosh(k x)/cosh(k a).
    pub c_interior: [C64; 2],
    /// Weight of the exterior e^{−α2(|x|−a)} mode (R_e = 1 at x = a).
    pub c3: C64,
    /// Weight of the exterior e^{−α3(|x|−a)} ground-only mode.
    pub c4: C64,
    /// Beam average of R_e1g2 / Vp.
    pub response: C64,
    /// Absorption Im(response), proportional to (1/a)·Im∫R_e1g2 dx.
    pub p_delta: f64,
}

impl RamseySolution {
    /// (R_g, R_e) at position x.
    pub fn coherences(&self, x: f64) -> (C64, C64) {
        let x = x.abs();
        let a = self.half_width;
        let ks = [self.coeffs.k1, self.coeffs.k2];
        if x <= a {
            let (mut g, mut e) = self.particular;
            for j in 0..2 {
                let c = self.c_interior[j] * cosh_ratio(ks[j], x, a);
                g += c * self.modes[j].0;
                e += c * self.modes[j].1;
            }
            (g, e)
        } else {
            let ea = (-self.coeffs.alpha2() * (x - a)).exp() * self.c3;
            let eb = (-self.coeffs.alpha3() * (x - a)).exp() * self.c4;
            (ea * self.coeffs.exterior_ground_share() + eb, ea)
        }
    }

    /// d/dx of (R_g, R_e) for x ≥ 0, taken from the inside at x = a.
    pub fn slopes(&self, x: f64) -> (C64, C64) {
        let sign = if x < 0.0 { -1.0 } else { 1.0 };
        let x = x.abs();
        let a = self.half_width;
        let ks = [self.coeffs.k1, self.coeffs.k2];
        let (g, e) = if x <= a {
            let mut g = C64::new(0.0, 0.0);
            let mut e = C64::new(0.0, 0.0);
            for j in 0..2 {
                let c = self.c_interior[j] * ks[j] * sinh_ratio(ks[j], x, a);
                g += c * self.modes[j].0;
                e += c * self.modes[j].1;
            }
            (g, e)
        } else {
            let (a2, a3) = (self.coeffs.alpha2(), self.coeffs.alpha3());
            let ea = -a2 * (-a2 * (x - a)).exp() * self.c3;
            let eb = -a3 * (-a3 * (x - a)).exp() * self.c4;
            (ea * self.coeffs.exterior_ground_share() + eb, ea)
        };
        (sign * g, sign * e)
    }

    /// R_e1g2 / Vp at x (zero outside the sheet).
    pub fn optical_coherence(&self, x: f64) -> C64 {
        if x.abs() > self.half_width {
            return C64::new(0.0, 0.0);
        }
        let (g, _) = self.coherences(x);
        I * self.k_1p * (self.v1 * g + self.vp * self.n0) / self.vp
    }

    /// Largest relative mismatch of R_g, R_e and their slopes across x = a.
    pub fn continuity_residual(&self) -> f64 {
        let a = self.half_width;
        let ks = [self.coeffs.k1, self.coeffs.k2];
        let mut gi = self.particular.0;
        let mut ei = self.particular.1;
        let mut gsi = C64::new(0.0, 0.0);
        let mut esi = C64::new(0.0, 0.0);
        for j in 0..2 {
            let t = ks[j] * tanh_pos(ks[j] * a);
            gi += self.c_interior[j] * self.modes[j].0;
            ei += self.c_interior[j] * self.modes[j].1;
            gsi += self.c_interior[j] * self.modes[j].0 * t;
            esi += self.c_interior[j] * self.modes[j].1 * t;
        }
        let share = self.coeffs.exterior_ground_share();
        let (a2, a3) = (self.coeffs.alpha2(), self.coeffs.alpha3());
        let go = self.c3 * share + self.c4;
        let eo = self.c3;
        let gso = -a2 * self.c3 * share - a3 * self.c4;
        let eso = -a2 * self.c3;
        let rel = |x: C64, y: C64| (x - y).norm() / x.norm().max(y.norm()).max(f64::MIN_POSITIVE);
        [rel(gi, go), rel(ei, eo), rel(gsi, gso), rel(esi, eso)]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

/// Matches value and slope of R_g and R_e at x = a.
pub fn solve_continuity(cfg: &RamseyConfig, coeffs: &RamseyCoefficients, kernels: &OnePhotonKernels) -> Result<RamseySolution> {
    let a = cfg.half_width_scaled();
    let ks = [coeffs.k1, coeffs.k2];
    let all = [coeffs.k1, coeffs.k2, coeffs.alpha1_sq, coeffs.alpha2_sq, coeffs.beta1, coeffs.beta2, coeffs.beta3];
    if all.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(EiaError::Domain("non-finite Ramsey coefficients".into()));
    }
    let modes = [coeffs.interior_mode(ks[0]), coeffs.interior_mode(ks[1])];
    let (pg, pe) = coeffs.particular()?;
    let share = coeffs.exterior_ground_share();
    let (a2, a3) = (coeffs.alpha2(), coeffs.alpha3());
    let t = [ks[0] * tanh_pos(ks[0] * a), ks[1] * tanh_pos(ks[1] * a)];
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    #[rustfmt::skip]
    let m = Matrix4::new(
        modes[0].0,        modes[1].0,        -share,      -one,
        modes[0].1,        modes[1].1,        -one,        zero,
        modes[0].0 * t[0], modes[1].0 * t[1], a2 * share,  a3,
        modes[0].1 * t[0], modes[1].1 * t[1], a2 * one,    zero,
    );
    let rhs = Vector4::new(-pg, -pe, zero, zero);
    let c = m
        .lu()
        .solve(&rhs)
        .ok_or_else(|| EiaError::Singular("continuity matching matrix is rank-deficient".into()))?;
    if c.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(EiaError::Singular("continuity solve produced non-finite weights".into()));
    }
    let f = &cfg.fields;
    let mean_g = pg + c[0] * modes[0].0 * tanh_over(ks[0] * a) + c[1] * modes[1].0 * tanh_over(ks[1] * a);
    let response = I * kernels.k_1p * (f.v1 * mean_g + f.vp * cfg.params.n0) / f.vp;
    let sol = RamseySolution {
        coeffs: *coeffs,
        half_width: a,
        k_1p: kernels.k_1p,
        v1: f.v1,
        vp: f.vp,
        n0: cfg.params.n0,
        modes,
        particular: (pg, pe),
        c_interior: [c[0], c[1]],
        c3: c[2],
        c4: c[3],
        response,
        p_delta: response.im,
    };
    let resid = sol.continuity_residual();
    if !(resid < 1e-8) {
        return Err(EiaError::Singular(format!("continuity residual {resid:.3e} after solve")));
    }
    Ok(sol)
}

/// Kernels, coefficients and matching at the configured Δp.
pub fn solve_point(cfg: &RamseyConfig, quad: &Quadrature) -> Result<RamseySolution> {
    cfg.validate()?;
    let kernels = one_photon_kernels(&cfg.params, &cfg.fields, quad)?;
    let coeffs = ramsey_coefficients(cfg, &kernels)?;
    solve_continuity(cfg, &coeffs, &kernels)
}

/// R_e1g2/Vp for uniform illumination (no transverse structure).
pub fn uniform_response(cfg: &RamseyConfig, quad: &Quadrature) -> Result<C64> {
    cfg.validate()?;
    let kernels = one_photon_kernels(&cfg.params, &cfg.fields, quad)?;
    let coeffs = ramsey_coefficients(cfg, &kernels)?;
    let (pg, _) = coeffs.particular()?;
    let f = &cfg.fields;
    Ok(I * kernels.k_1p * (f.v1 * pg + f.vp * cfg.params.n0) / f.vp)
}

/// Beam-averaged response over a detuning grid.
pub fn ramsey_spectrum(cfg: &RamseyConfig, quad: &Quadrature, detuning_grid: &[f64]) -> Result<Spectrum> {
    cfg.validate()?;
    validate_detunings(detuning_grid)?;
    let response = detuning_grid
        .par_iter()
        .map(|&dp| solve_point(&cfg.with_deltap(dp), quad).map(|s| s.response))
        .collect::<Result<Vec<_>>>()?;
    Ok(Spectrum::from_response(detuning_grid.to_vec(), response, None))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    /// Largest |lhs − rhs| over points and both equations.
    pub max_absolute: f64,
    /// Largest |lhs − rhs| divided by the sum of the magnitudes of the terms.
    pub max_relative: f64,
    pub points: usize,
    pub step: f64,
}

/// Residual of the coupled diffusion equations for an arbitrary field
/// `field(x) = (R_g, R_e)`, with second derivatives from central
/// differences at steps h and h/2 combined by Richardson extrapolation.
pub fn diffusion_residual(
    coeffs: &RamseyCoefficients,
    half_width: f64,
    field: impl Fn(f64) -> (C64, C64),
    xs: &[f64],
    h: f64,
) -> ResidualReport {
    let d = coeffs.diffusion_d;
    let cross = coeffs.toc_rate * d / coeffs.gamma_vcc;
    let second = |x: f64, h: f64| {
        let (gm, em) = field(x - h);
        let (g0, e0) = field(x);
        let (gp, ep) = field(x + h);
        ((gp - 2.0 * g0 + gm) / (h * h), (ep - 2.0 * e0 + em) / (h * h))
    };
    let mut max_abs = 0.0f64;
    let mut max_rel = 0.0f64;
    for &x in xs {
        let (g1, e1) = second(x, h);
        let (g2, e2) = second(x, 0.5 * h);
        let gxx = (4.0 * g2 - g1) / 3.0;
        let exx = (4.0 * e2 - e1) / 3.0;
        let (g, e) = field(x);
        let inside = x.abs() <= half_width;
        let a1 = if inside { coeffs.alpha1_sq } else { coeffs.alpha3_sq };
        let (b1, b2, b3) = if inside {
            (coeffs.beta1, coeffs.beta2, coeffs.beta3)
        } else {
            Default::default()
        };
        let t1 = [d * gxx, cross * exx, d * a1 * g, coeffs.toc_rate * e, b1];
        let r1 = t1[0] + t1[1] - t1[2] + t1[3] - t1[4];
        let t2 = [d * exx, d * coeffs.alpha2_sq * e, b2 * g, b3];
        let r2 = t2[0] - t2[1] + t2[2] + t2[3];
        for (r, terms) in [(r1, &t1[..]), (r2, &t2[..])] {
            let scale: f64 = terms.iter().map(|t| t.norm()).sum();
            max_abs = max_abs.max(r.norm());
            if scale > 0.0 {
                max_rel = max_rel.max(r.norm() / scale);
            }
        }
    }
    ResidualReport {
        max_absolute: max_abs,
        max_relative: max_rel,
        points: xs.len(),
        step: h,
    }
}

/// Residual of the analytic solution at interior and exterior points kept
/// a few steps away from |x| = a, where the second derivative jumps.
pub fn diffusion_operator_check(sol: &RamseySolution) -> ResidualReport {
    let c = &sol.coeffs;
    let shortest = [c.k1, c.k2, c.alpha2(), c.alpha3()]
        .iter()
        .map(|k| 1.0 / k.norm())
        .fold(f64::INFINITY, f64::min);
    let a = sol.half_width;
    let h = (0.02 * shortest).min(0.01 * a);
    let mut xs: Vec<f64> = (0..20).map(|i| (i as f64 + 0.5) / 20.0 * (a - 4.0 * h)).collect();
    xs.extend((0..10).map(|i| a + 4.0 * h + i as f64 * 3.0 * shortest));
    diffusion_residual(c, a, |x| sol.coherences(x), &xs, h)
}
