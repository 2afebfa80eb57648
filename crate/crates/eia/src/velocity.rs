//! Boltzmann averages of rational functions of the complex frequencies,
//! and the strong-collision one-photon kernels built from them.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::faddeeva::gaussian_pole_integral;
use crate::model::{toc_determinant, xi_set, DqDirection, FieldConfig, ModelParams};
use crate::quadrature::{velocity_average, QuadStats, Quadrature};

const I: C64 = C64::new(0.0, 1.0);

/// A factor of a G-kernel: one of ξ1..ξ5 or the determinant ξ_d.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Factor {
    Xi(u8),
    Det,
}

/// G = ⟨Π numerator / Π denominator⟩ over the velocity distribution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GKernelSpec {
    pub numerator: Vec<u8>,
    pub denominator: Vec<Factor>,
}

impl GKernelSpec {
    pub fn new(numerator: &[u8], denominator: &[Factor]) -> Result<Self> {
        if denominator.is_empty() {
            return Err(invalid("denominator", "must contain at least one factor"));
        }
        let bad_num = numerator.iter().any(|&i| !(1..=5).contains(&i));
        let bad_den = denominator
            .iter()
            .any(|f| matches!(f, Factor::Xi(i) if !(1..=5).contains(i)));
        if bad_num || bad_den {
            return Err(invalid("numerator", "ξ indices must lie in 1..=5"));
        }
        Ok(Self {
            numerator: numerator.to_vec(),
            denominator: denominator.to_vec(),
        })
    }

    fn fixed(numerator: &[u8], denominator: &[Factor]) -> Self {
        Self {
            numerator: numerator.to_vec(),
            denominator: denominator.to_vec(),
        }
    }

    pub fn g1() -> Self {
        Self::fixed(&[2, 3, 4], &[Factor::Det])
    }
    pub fn g2() -> Self {
        Self::fixed(&[3, 4], &[Factor::Det])
    }
    pub fn g3() -> Self {
        Self::fixed(&[2, 4], &[Factor::Xi(5), Factor::Det])
    }
    pub fn g4() -> Self {
        Self::fixed(&[1, 3, 4], &[Factor::Det])
    }
    pub fn g5() -> Self {
        Self::fixed(&[3], &[Factor::Det])
    }
    /// ⟨1/ξ2⟩, the probe one-photon average.
    pub fn g_1p() -> Self {
        Self::fixed(&[], &[Factor::Xi(2)])
    }
    /// ⟨1/ξ4⟩, the three-photon average.
    pub fn g_3p() -> Self {
        Self::fixed(&[], &[Factor::Xi(4)])
    }
    /// ⟨1/ξ5⟩, the pump one-photon average.
    pub fn g_pump() -> Self {
        Self::fixed(&[], &[Factor::Xi(5)])
    }

    /// The integrand at one velocity.
    pub fn integrand(&self, params: &ModelParams, fields: &FieldConfig, v_par: f64, v_res: f64) -> C64 {
        let xi = xi_set(params, fields, v_par, v_res);
        let xs = xi.as_array();
        let mut num = C64::new(1.0, 0.0);
        for &i in &self.numerator {
            num *= xs[usize::from(i) - 1];
        }
        let mut den = C64::new(1.0, 0.0);
        for f in &self.denominator {
            den *= match f {
                Factor::Xi(i) => xs[usize::from(*i) - 1],
                Factor::Det => toc_determinant(&xi, params, fields),
            };
        }
        num / den
    }
}

/// Several G-kernels averaged in one pass over the velocity distribution.
pub fn g_integrals<const N: usize>(
    specs: &[GKernelSpec; N],
    params: &ModelParams,
    fields: &FieldConfig,
    quad: &Quadrature,
) -> Result<([C64; N], QuadStats)> {
    velocity_average(quad, fields, |vp, vr| {
        std::array::from_fn(|k| specs[k].integrand(params, fields, vp, vr))
    })
}

pub fn g_integral(
    spec: &GKernelSpec,
    params: &ModelParams,
    fields: &FieldConfig,
    quad: &Quadrature,
) -> Result<C64> {
    let (val, _) = velocity_average(quad, fields, |vp, vr| [spec.integrand(params, fields, vp, vr)])?;
    Ok(val[0])
}

/// Strong-collision response K = iG/(1 − iγ_vcc·G) for a one-photon average G.
pub fn strong_collision(g: C64, gamma_vcc: f64) -> C64 {
    I * g / (1.0 - I * gamma_vcc * g)
}

/// K_1p: the probe one-photon strong-collision response.
pub fn one_photon_response(params: &ModelParams, fields: &FieldConfig, quad: &Quadrature) -> Result<C64> {
    let g = g_integral(&GKernelSpec::g_1p(), params, fields, quad)?;
    Ok(strong_collision(g, params.gamma_vcc))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OnePhotonKernels {
    pub k_1p: C64,
    pub k_3p: C64,
    pub k_pump: C64,
}

/// K_1p, K_3p and K_pump from ⟨1/ξ2⟩, ⟨1/ξ4⟩ and ⟨1/ξ5⟩.
pub fn one_photon_kernels(
    params: &ModelParams,
    fields: &FieldConfig,
    quad: &Quadrature,
) -> Result<OnePhotonKernels> {
    let specs = [GKernelSpec::g_1p(), GKernelSpec::g_3p(), GKernelSpec::g_pump()];
    let (g, _) = g_integrals(&specs, params, fields, quad)?;
    let gv = params.gamma_vcc;
    Ok(OnePhotonKernels {
        k_1p: strong_collision(g[0], gv),
        k_3p: strong_collision(g[1], gv),
        k_pump: strong_collision(g[2], gv),
    })
}

/// Which one-photon average to express in closed form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OnePhotonKind {
    Probe,
    ThreePhoton,
    Pump,
}

/// ⟨1/ξ⟩ for ξ2, ξ4 or ξ5 through the Faddeeva function. Each of these ξ is
/// x ± s·u + iΓ' with u a unit Gaussian, s the combined Doppler scale.
pub fn one_photon_closed_form(kind: OnePhotonKind, params: &ModelParams, fields: &FieldConfig) -> Result<C64> {
    let width = params.gamma_opt() + params.gamma_vcc;
    let (q, dq) = (fields.qp_vth, fields.dq_vth);
    let transverse = fields.dq_direction == DqDirection::Transverse;
    let combine = |m: f64| {
        if transverse {
            (q * q + m * m * dq * dq).sqrt()
        } else {
            (q - m * dq).abs()
        }
    };
    let (x, s) = match kind {
        OnePhotonKind::Probe => (fields.deltap, q),
        OnePhotonKind::ThreePhoton => (fields.deltap - fields.delta1 - fields.delta2, combine(2.0)),
        OnePhotonKind::Pump => (-fields.delta2, combine(1.0)),
    };
    gaussian_pole_integral(x, s, width)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{make_grid, AdaptiveRule};

    fn fig2() -> (ModelParams, FieldConfig) {
        (ModelParams::default(), FieldConfig::default())
    }

    fn rel(a: C64, b: C64) -> f64 {
        (a - b).norm() / b.norm()
    }

    #[test]
    fn empty_denominator_rejected() {
        assert!(GKernelSpec::new(&[1], &[]).is_err());
        assert!(GKernelSpec::new(&[6], &[Factor::Det]).is_err());
        assert!(GKernelSpec::new(&[2, 3, 4], &[Factor::Det]).is_ok());
    }

    #[test]
    fn motionless_probe_average() {
        let (p, mut f) = fig2();
        f.qp_vth = 1e-6;
        f.deltap = 0.2;
        let g = g_integral(&GKernelSpec::g_1p(), &p, &f, &Quadrature::default()).unwrap();
        let expect = C64::new(1.0, 0.0) / C64::new(0.2, p.gamma_opt() + p.gamma_vcc);
        assert!(rel(g, expect) < 1e-6);
    }

    #[test]
    fn probe_average_matches_faddeeva_form() {
        let (p, f) = fig2();
        let g = g_integral(&GKernelSpec::g_1p(), &p, &f, &Quadrature::default()).unwrap();
        let c = one_photon_closed_form(OnePhotonKind::Probe, &p, &f).unwrap();
        assert!(rel(g, c) < 1e-8, "{g} vs {c}");
    }

    #[test]
    fn tightening_tolerance_converges() {
        let (p, f) = fig2();
        let a = g_integral(&GKernelSpec::g_1p(), &p, &f, &Quadrature::Adaptive(AdaptiveRule::with_rtol(1e-8))).unwrap();
        let b = g_integral(&GKernelSpec::g_1p(), &p, &f, &Quadrature::Adaptive(AdaptiveRule::with_rtol(1e-12))).unwrap();
        assert!(rel(a, b) < 1e-9);
    }

    #[test]
    fn coarse_hermite_grid_is_flagged() {
        let (p, f) = fig2();
        let grid = make_grid(40, 1).unwrap();
        let r = g_integral(&GKernelSpec::g_1p(), &p, &f, &Quadrature::Hermite(grid));
        assert!(r.is_err());
    }

    #[test]
    fn hermite_grid_agrees_for_broad_lines() {
        let (mut p, mut f) = fig2();
        p.gamma_pcc = 20.0;
        f.qp_vth = 5.0;
        let grid = make_grid(80, 1).unwrap();
        let h = g_integral(&GKernelSpec::g_1p(), &p, &f, &Quadrature::Hermite(grid)).unwrap();
        let c = one_photon_closed_form(OnePhotonKind::Probe, &p, &f).unwrap();
        assert!(rel(h, c) < 1e-7);
    }

    #[test]
    fn g5_factorizes_without_pumps() {
        let (p, mut f) = fig2();
        f.v1 = C64::new(0.0, 0.0);
        f.v2 = C64::new(0.0, 0.0);
        f.deltap = 0.03;
        let quad = Quadrature::default();
        let g5 = g_integral(&GKernelSpec::g5(), &p, &f, &quad).unwrap();
        let alt = GKernelSpec::new(&[], &[Factor::Xi(1), Factor::Xi(2), Factor::Xi(4)]).unwrap();
        let g = g_integral(&alt, &p, &f, &quad).unwrap();
        assert!(rel(g5, g) < 1e-12);
    }

    #[test]
    fn motionless_kernel_drops_vcc() {
        let (p, mut f) = fig2();
        f.qp_vth = 1e-6;
        f.deltap = -0.4;
        let k = one_photon_response(&p, &f, &Quadrature::default()).unwrap();
        let expect = I / C64::new(-0.4, p.gamma_opt());
        assert!(rel(k, expect) < 1e-6);
    }

    #[test]
    fn dicke_narrowing_raises_resonant_kernel() {
        let (mut p, mut f) = fig2();
        p.gamma_pcc = 0.0;
        p.gamma_g = 0.0;
        f.qp_vth = 36.5;
        let quad = Quadrature::default();
        p.gamma_vcc = 0.0;
        let k0 = one_photon_response(&p, &f, &quad).unwrap();
        p.gamma_vcc = 10.0;
        let k10 = one_photon_response(&p, &f, &quad).unwrap();
        // Independent dense trapezoid sums of the same two cases.
        let dense = |gv: f64| {
            let h = 2e-4;
            let mut s = C64::new(0.0, 0.0);
            let mut v: f64 = -9.0;
            while v <= 9.0 {
                let w = (-0.5 * v * v).exp() / (2.0 * std::f64::consts::PI).sqrt();
                s += w * h / C64::new(-36.5 * v, 0.5 + gv);
                v += h;
            }
            strong_collision(s, gv)
        };
        assert!(rel(k0, dense(0.0)) < 1e-6);
        assert!(rel(k10, dense(10.0)) < 1e-6);
        assert!(k10.norm() > k0.norm());
    }

    #[test]
    fn resonant_kernel_is_absorptive() {
        // K is real and positive at resonance; the response iK has Im > 0.
        let (p, f) = fig2();
        let k = one_photon_response(&p, &f, &Quadrature::default()).unwrap();
        assert!(k.re > 0.0);
        assert!(k.im.abs() < 1e-12 * k.re);
        assert!((I * k).im > 0.0);
    }

    #[test]
    fn kernel_half_width_shrinks_with_vcc_in_dicke_regime() {
        let (mut p, mut f) = fig2();
        p.gamma_pcc = 0.0;
        p.gamma_g = 0.0;
        f.qp_vth = 36.5;
        let quad = Quadrature::default();
        let mut last = f64::INFINITY;
        for gv in [100.0, 200.0, 400.0, 800.0, 1600.0] {
            p.gamma_vcc = gv;
            let peak = one_photon_response(&p, &f.with_deltap(0.0), &quad).unwrap().re;
            // Bisect for the half-maximum point of Re K.
            let (mut lo, mut hi) = (0.0, 2000.0);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                let v = one_photon_response(&p, &f.with_deltap(mid), &quad).unwrap().re;
                if v > 0.5 * peak {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            assert!(lo < last, "half width {lo} at γ_vcc = {gv}");
            last = lo;
        }
    }
}
