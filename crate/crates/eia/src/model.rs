//! Physical parameters of the N system and the per-velocity complex frequencies.
//!
//! Rates and detunings are dimensionless in units of the spontaneous emission
//! rate Γ, velocities in units of the one-dimensional thermal velocity v_th.
//! The velocity enters only through two projections: `v_par` along the probe
//! wave-vector and `v_res` along the pump-probe mismatch δq.

use nalgebra::Matrix4;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

const I: C64 = C64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Spontaneous emission rate Γ; the frequency unit, normally 1.
    pub gamma_sp: f64,
    /// Optical pressure broadening from phase-changing collisions.
    pub gamma_pcc: f64,
    /// Velocity-changing collision rate (strong-collision relaxation).
    pub gamma_vcc: f64,
    /// Inner decoherence rate of the ground and excited manifolds.
    pub gamma_g: f64,
    /// Transfer-of-coherence switch, 0 or 1.
    pub b: u8,
    /// Branching parameter A of the spontaneous coherence transfer.
    pub branching_a: f64,
    pub n0: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            gamma_sp: 1.0,
            gamma_pcc: 5.0,
            gamma_vcc: 0.025,
            gamma_g: 0.001,
            b: 1,
            branching_a: 0.816,
            n0: 1.0,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_sp > 0.0 && self.gamma_sp.is_finite()) {
            return Err(invalid("gamma_sp", "must be finite and > 0"));
        }
        for (key, v) in [
            ("gamma_pcc", self.gamma_pcc),
            ("gamma_vcc", self.gamma_vcc),
            ("gamma_g", self.gamma_g),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(key, format!("must be finite and >= 0, got {v}")));
            }
        }
        if self.b > 1 {
            return Err(invalid("b", format!("must be 0 or 1, got {}", self.b)));
        }
        if !(self.branching_a > 0.0 && self.branching_a < 1.0) {
            return Err(invalid(
                "branching_a",
                format!("must lie in (0, 1), got {}", self.branching_a),
            ));
        }
        if !(self.n0 > 0.0 && self.n0.is_finite()) {
            return Err(invalid("n0", "must be finite and > 0"));
        }
        Ok(())
    }

    /// Γ/2 + Γ_pcc + γ, the optical coherence decay without VCC.
    pub fn gamma_opt(&self) -> f64 {
        0.5 * self.gamma_sp + self.gamma_pcc + self.gamma_g
    }

    /// b·A·Γ, the strength of the spontaneous coherence transfer.
    pub fn toc_rate(&self) -> f64 {
        f64::from(self.b) * self.branching_a * self.gamma_sp
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DqDirection {
    /// δq parallel to q_p (pure frequency mismatch).
    Collinear,
    /// δq orthogonal to q_p (pure angular deviation).
    #[default]
    Transverse,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldConfig {
    pub v1: C64,
    pub v2: C64,
    pub vp: C64,
    pub delta1: f64,
    pub delta2: f64,
    pub deltap: f64,
    /// One-photon Doppler scale q_p·v_th.
    pub qp_vth: f64,
    /// Residual Doppler scale |δq|·v_th.
    pub dq_vth: f64,
    pub dq_direction: DqDirection,
}

impl Default for FieldConfig {
    fn default() -> Self {
        let a = 0.816;
        Self {
            v1: C64::new(a * 0.1, 0.0),
            v2: C64::new(0.1, 0.0),
            vp: C64::new(0.001, 0.0),
            delta1: 0.0,
            delta2: 0.0,
            deltap: 0.0,
            qp_vth: 36.5,
            dq_vth: 0.0,
            dq_direction: DqDirection::Transverse,
        }
    }
}

/// Largest allowed |Vp| / min(|V1|, |V2|) for the first-order probe treatment.
pub const PROBE_RATIO_LIMIT: f64 = 0.1;

impl FieldConfig {
    pub fn validate(&self) -> Result<()> {
        for (key, v) in [("v1", self.v1), ("v2", self.v2), ("vp", self.vp)] {
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(invalid(key, "must be finite"));
            }
        }
        if self.vp.norm() == 0.0 {
            return Err(invalid("vp", "probe Rabi frequency must be nonzero"));
        }
        let pump_min = self.v1.norm().min(self.v2.norm());
        if pump_min > 0.0 && self.vp.norm() > PROBE_RATIO_LIMIT * pump_min {
            return Err(invalid(
                "vp",
                format!(
                    "|vp| = {} exceeds {} x min(|v1|, |v2|) = {}",
                    self.vp.norm(),
                    PROBE_RATIO_LIMIT,
                    PROBE_RATIO_LIMIT * pump_min
                ),
            ));
        }
        for (key, v) in [
            ("delta1", self.delta1),
            ("delta2", self.delta2),
            ("deltap", self.deltap),
        ] {
            if !v.is_finite() {
                return Err(invalid(key, "must be finite"));
            }
        }
        for (key, v) in [("qp_vth", self.qp_vth), ("dq_vth", self.dq_vth)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(key, format!("must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }

    pub fn with_deltap(&self, deltap: f64) -> Self {
        Self { deltap, ..*self }
    }

    /// True when the velocity average is two-dimensional (independent v_res).
    pub fn needs_residual_axis(&self) -> bool {
        self.dq_vth > 0.0 && self.dq_direction == DqDirection::Transverse
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XiSet {
    pub xi1: C64,
    pub xi2: C64,
    pub xi3: C64,
    pub xi4: C64,
    pub xi5: C64,
}

impl XiSet {
    pub fn as_array(&self) -> [C64; 5] {
        [self.xi1, self.xi2, self.xi3, self.xi4, self.xi5]
    }

    /// ξ_i for i in 1..=5.
    pub fn get(&self, i: usize) -> C64 {
        self.as_array()[i - 1]
    }
}

/// The five complex frequencies at one velocity, with q1 = q2 = q_p − δq.
pub fn xi_set(params: &ModelParams, fields: &FieldConfig, v_par: f64, v_res: f64) -> XiSet {
    let gv = params.gamma_vcc;
    let g = params.gamma_g;
    let opt = params.gamma_opt() + gv;
    let dp = fields.deltap;
    let (d1, d2) = (fields.delta1, fields.delta2);
    let qv = fields.qp_vth * v_par;
    let dqv = fields.dq_vth * v_res;
    XiSet {
        xi1: C64::new(dp - d1 - dqv, g + gv),
        xi2: C64::new(dp - qv, opt),
        xi3: C64::new(dp - d2 - dqv, params.gamma_sp + g + gv),
        xi4: C64::new(dp - d1 - d2 + qv - 2.0 * dqv, opt),
        xi5: C64::new(-d2 + qv - dqv, opt),
    }
}

/// ξ_d = ξ1ξ2ξ3ξ4 − ξ3(ξ2|V2|² + ξ4|V1|²) + i·bAΓ·V1V2*·(ξ2+ξ4).
pub fn toc_determinant(xi: &XiSet, params: &ModelParams, fields: &FieldConfig) -> C64 {
    let v1 = fields.v1;
    let v2 = fields.v2;
    xi.xi1 * xi.xi2 * xi.xi3 * xi.xi4 - xi.xi3 * (xi.xi2 * v2.norm_sqr() + xi.xi4 * v1.norm_sqr())
        + I * params.toc_rate() * v1 * v2.conj() * (xi.xi2 + xi.xi4)
}

/// Per-velocity coefficient matrix of the coupled probe-order coherences
/// (ρ_g1g2, ρ_e1g2, ρ_e1e2, ρ_g1e2). Its determinant equals `toc_determinant`.
pub fn coherence_matrix(xi: &XiSet, params: &ModelParams, fields: &FieldConfig) -> Matrix4<C64> {
    let z = C64::new(0.0, 0.0);
    let (v1, v2) = (fields.v1, fields.v2);
    let toc = -I * params.toc_rate();
    Matrix4::new(
        xi.xi1, v1.conj(), toc, -v2, //
        v1, xi.xi2, z, z, //
        z, -v2.conj(), xi.xi3, v1, //
        -v2.conj(), z, z, xi.xi4,
    )
}
