//! EIA as a spatial-frequency filter of a structured probe.
//!
//! Transverse coordinates are in units of 1/q_p, spatial frequencies in
//! units of q_p and rates in units of Γ, so the diffusion coefficient is the
//! dimensionless D = (q_p v_th)²/(Γ γ_vcc).

use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64 as C64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, EiaError, Result};
use crate::model::{FieldConfig, ModelParams};
use crate::quadrature::{velocity_average, Quadrature};
use crate::velocity::{one_photon_kernels, OnePhotonKernels};

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Largest populated spatial frequency (units of q_p) accepted by the
/// paraxial slice propagation.
pub const PARAXIAL_LIMIT: f64 = 0.1;

/// Spectral samples below this fraction of the peak |amplitude| are not
/// considered populated for the paraxial check.
pub const POPULATED_FRACTION: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterParams {
    /// η = |V1|/|V2|.
    pub eta: f64,
    /// Γ_p = K|V2|²; its real part is the rate entering L.
    pub power_broadening: C64,
    pub diffusion_d: f64,
    /// Common one-photon kernel K multiplying (1 + L) in χ.
    pub kernel: C64,
    /// Overall susceptibility scale (coupling × density) in units of q_p.
    pub optical_depth_scale: f64,
}

impl FilterParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(invalid("eta", "must lie in (0, 1]"));
        }
        if !(self.diffusion_d > 0.0) || !self.diffusion_d.is_finite() {
            return Err(invalid("diffusion_d", "must be finite and > 0"));
        }
        if !self.power_broadening.re.is_finite() || !self.power_broadening.im.is_finite() {
            return Err(invalid("power_broadening", "must be finite"));
        }
        if !self.optical_depth_scale.is_finite() {
            return Err(invalid("optical_depth_scale", "must be finite"));
        }
        Ok(())
    }

    /// Filter parameters implied by a model: η from the pump amplitudes,
    /// Γ_p = K|V2|² with the common kernel, and D = qp_vth²/γ_vcc unless
    /// overridden. With V2 = 0 the filter is off (η is set to 1, Γ_p = 0).
    pub fn from_model(
        params: &ModelParams,
        fields: &FieldConfig,
        quad: &Quadrature,
        diffusion_d: Option<f64>,
        optical_depth_scale: f64,
    ) -> Result<Self> {
        params.validate()?;
        let kernel = common_kernel(params, fields, quad)?;
        let d = match diffusion_d {
            Some(d) => d,
            None if params.gamma_vcc > 0.0 => fields.qp_vth * fields.qp_vth / params.gamma_vcc,
            None => return Err(invalid("diffusion_d", "needs gamma_vcc > 0 or an explicit value")),
        };
        let v2 = fields.v2.norm();
        let eta = if v2 > 0.0 { fields.v1.norm() / v2 } else { 1.0 };
        let fp = Self {
            eta,
            power_broadening: kernel * v2 * v2,
            diffusion_d: d,
            kernel,
            optical_depth_scale,
        };
        fp.validate()?;
        Ok(fp)
    }

    /// Γ_hom = γ + Re Γ_p.
    pub fn homogeneous_width(&self, params: &ModelParams) -> f64 {
        params.gamma_g + self.power_broadening.re
    }

    /// γ + (η² + 1 − 2bAη)·Re Γ_p: the k = 0 Raman width of L.
    pub fn raman_width(&self, params: &ModelParams) -> f64 {
        let ba = params.b as f64 * params.branching_a;
        params.gamma_g + (self.eta * self.eta + 1.0 - 2.0 * ba * self.eta) * self.power_broadening.re
    }
}

/// K = i∫F(v)/[q_p·v + i(Γ/2+Γ_pcc+γ+γ_vcc)] over the probe axis.
pub fn common_kernel(params: &ModelParams, fields: &FieldConfig, quad: &Quadrature) -> Result<C64> {
    let width = params.gamma_opt() + params.gamma_vcc;
    let q = fields.qp_vth;
    let one_axis = FieldConfig { dq_vth: 0.0, ..*fields };
    let (g, _) = velocity_average(quad, &one_axis, |v, _| [C64::new(1.0, 0.0) / C64::new(q * v, width)])?;
    Ok(I * g[0])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterKernels {
    pub k_1p: C64,
    pub k_3p: C64,
    pub k_pump: C64,
    pub k_common: C64,
}

pub fn k_kernels(params: &ModelParams, fields: &FieldConfig, quad: &Quadrature) -> Result<FilterKernels> {
    let OnePhotonKernels { k_1p, k_3p, k_pump } = one_photon_kernels(params, fields, quad)?;
    Ok(FilterKernels {
        k_1p,
        k_3p,
        k_pump,
        k_common: common_kernel(params, fields, quad)?,
    })
}

/// L(k; Δp) = η(2bA−η)Γ_p / (−iΔp + γ + (η²+1−2bAη)Γ_p + Dk²).
pub fn filter_response(fp: &FilterParams, params: &ModelParams, deltap: f64, k: f64) -> C64 {
    let gp = fp.power_broadening.re;
    let ba = params.b as f64 * params.branching_a;
    let num = fp.eta * (2.0 * ba - fp.eta) * gp;
    num / C64::new(fp.raman_width(params) + fp.diffusion_d * k * k, -deltap)
}

/// L over a k grid, with a warning when Δp is outside the single-kernel
/// regime |Δp| ≲ Γ_hom.
pub fn filter_curve(fp: &FilterParams, params: &ModelParams, deltap: f64, k_grid: &[f64]) -> Result<Vec<C64>> {
    fp.validate()?;
    let hom = fp.homogeneous_width(params);
    if deltap.abs() > 2.0 * hom {
        log::warn!("Δp = {deltap} is beyond 2Γ_hom = {}; the common-kernel filter is outside its range", 2.0 * hom);
    }
    Ok(k_grid.iter().map(|&k| filter_response(fp, params, deltap, k)).collect())
}

/// χ(k) = scale·iK·(1 + L(k)).
pub fn susceptibility(fp: &FilterParams, params: &ModelParams, deltap: f64, k: f64) -> C64 {
    fp.optical_depth_scale * I * fp.kernel * (1.0 + filter_response(fp, params, deltap, k))
}

/// A 2-D complex field sampled on a regular grid, stored row-major
/// (index `iy * nx + ix`).
#[derive(Debug, Clone, PartialEq)]
pub struct TransverseProfile {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    pub samples: Vec<C64>,
}

impl TransverseProfile {
    pub fn new(nx: usize, ny: usize, dx: f64, dy: f64, samples: Vec<C64>) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(invalid("profile", "grid dimensions must be nonzero"));
        }
        if !(dx > 0.0 && dy > 0.0) || !dx.is_finite() || !dy.is_finite() {
            return Err(invalid("profile", "grid spacings must be finite and > 0"));
        }
        if samples.len() != nx * ny {
            return Err(invalid("profile", format!("expected {} samples, got {}", nx * ny, samples.len())));
        }
        if samples.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(invalid("profile", "samples must be finite"));
        }
        Ok(Self { nx, ny, dx, dy, samples })
    }

    /// Samples `f(x, y)` on a grid centred at the origin.
    pub fn from_fn(nx: usize, ny: usize, dx: f64, dy: f64, f: impl Fn(f64, f64) -> C64) -> Result<Self> {
        let mut samples = Vec::with_capacity(nx * ny);
        for iy in 0..ny {
            let y = (iy as f64 - (ny / 2) as f64) * dy;
            for ix in 0..nx {
                let x = (ix as f64 - (nx / 2) as f64) * dx;
                samples.push(f(x, y));
            }
        }
        Self::new(nx, ny, dx, dy, samples)
    }

    pub fn power(&self) -> f64 {
        self.samples.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.dx * self.dy
    }

    pub fn at(&self, ix: usize, iy: usize) -> C64 {
        self.samples[iy * self.nx + ix]
    }

    /// Text form: a header line `nx ny dx dy`, then one `re im` pair per
    /// line in row-major order.
    pub fn write_text(&self, w: impl Write) -> Result<()> {
        let mut w = BufWriter::new(w);
        writeln!(w, "{} {} {:e} {:e}", self.nx, self.ny, self.dx, self.dy)?;
        for z in &self.samples {
            writeln!(w, "{:e} {:e}", z.re, z.im)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_text(r: impl Read) -> Result<Self> {
        let mut lines = BufReader::new(r).lines();
        let header = lines.next().ok_or_else(|| EiaError::Config("empty profile file".into()))??;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 4 {
            return Err(EiaError::Config("profile header must be `nx ny dx dy`".into()));
        }
        let bad = |what: &str| EiaError::Config(format!("bad profile {what}"));
        let nx: usize = h[0].parse().map_err(|_| bad("nx"))?;
        let ny: usize = h[1].parse().map_err(|_| bad("ny"))?;
        let dx: f64 = h[2].parse().map_err(|_| bad("dx"))?;
        let dy: f64 = h[3].parse().map_err(|_| bad("dy"))?;
        let mut samples = Vec::with_capacity(nx.saturating_mul(ny).min(1 << 24));
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let re: f64 = it.next().ok_or_else(|| bad("sample"))?.parse().map_err(|_| bad("sample"))?;
            let im: f64 = it.next().ok_or_else(|| bad("sample"))?.parse().map_err(|_| bad("sample"))?;
            samples.push(C64::new(re, im));
        }
        Self::new(nx, ny, dx, dy, samples)
    }

    /// Binary form, little-endian: u64 nx, u64 ny, f64 dx, f64 dy, then
    /// f64 (re, im) pairs in row-major order.
    pub fn write_binary(&self, w: impl Write) -> Result<()> {
        let mut w = BufWriter::new(w);
        w.write_all(&(self.nx as u64).to_le_bytes())?;
        w.write_all(&(self.ny as u64).to_le_bytes())?;
        w.write_all(&self.dx.to_le_bytes())?;
        w.write_all(&self.dy.to_le_bytes())?;
        for z in &self.samples {
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_binary(r: impl Read) -> Result<Self> {
        let mut r = BufReader::new(r);
        let mut buf = [0u8; 8];
        let mut next = |r: &mut BufReader<_>| -> Result<[u8; 8]> {
            r.read_exact(&mut buf)?;
            Ok(buf)
        };
        let nx = u64::from_le_bytes(next(&mut r)?) as usize;
        let ny = u64::from_le_bytes(next(&mut r)?) as usize;
        let dx = f64::from_le_bytes(next(&mut r)?);
        let dy = f64::from_le_bytes(next(&mut r)?);
        let count = nx
            .checked_mul(ny)
            .ok_or_else(|| EiaError::Config("profile dimensions overflow".into()))?;
        let mut samples = Vec::with_capacity(count.min(1 << 24));
        for _ in 0..count {
            let re = f64::from_le_bytes(next(&mut r)?);
            let im = f64::from_le_bytes(next(&mut r)?);
            samples.push(C64::new(re, im));
        }
        Self::new(nx, ny, dx, dy, samples)
    }

    /// Reads `.bin` files as binary and anything else as text.
    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        if path.extension().is_some_and(|e| e == "bin") {
            Self::read_binary(f)
        } else {
            Self::read_text(f)
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        if path.extension().is_some_and(|e| e == "bin") {
            self.write_binary(f)
        } else {
            self.write_text(f)
        }
    }
}

/// Angular frequencies 2π·fftfreq(n, d).
fn fft_frequencies(n: usize, d: f64) -> Vec<f64> {
    let step = 2.0 * std::f64::consts::PI / (n as f64 * d);
    (0..n)
        .map(|i| {
            let j = if i < n.div_ceil(2) { i as f64 } else { i as f64 - n as f64 };
            j * step
        })
        .collect()
}

fn transpose(data: &[C64], rows: usize, cols: usize) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); data.len()];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = data[r * cols + c];
        }
    }
    out
}

fn fft2(data: &mut Vec<C64>, nx: usize, ny: usize, inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let (fx, fy) = if inverse {
        (planner.plan_fft_inverse(nx), planner.plan_fft_inverse(ny))
    } else {
        (planner.plan_fft_forward(nx), planner.plan_fft_forward(ny))
    };
    fx.process(data);
    let mut t = transpose(data, ny, nx);
    fy.process(&mut t);
    *data = transpose(&t, nx, ny);
    if inverse {
        let norm = 1.0 / (nx * ny) as f64;
        data.iter_mut().for_each(|z| *z *= norm);
    }
}

/// One thin slice of paraxial propagation: each spatial-frequency component
/// is multiplied by exp[i(χ(|k|) − k²/2)·z]. Errors if a populated component
/// lies beyond the paraxial limit.
pub fn propagate_slice(
    profile: &TransverseProfile,
    slice_length: f64,
    chi: impl Fn(f64) -> C64,
) -> Result<TransverseProfile> {
    if !slice_length.is_finite() || slice_length < 0.0 {
        return Err(invalid("slice_length", "must be finite and >= 0"));
    }
    let (nx, ny) = (profile.nx, profile.ny);
    let mut spec = profile.samples.clone();
    fft2(&mut spec, nx, ny, false);
    let kx = fft_frequencies(nx, profile.dx);
    let ky = fft_frequencies(ny, profile.dy);
    let peak = spec.iter().map(|z| z.norm()).fold(0.0, f64::max);
    for (iy, &qy) in ky.iter().enumerate() {
        for (ix, &qx) in kx.iter().enumerate() {
            let z = &mut spec[iy * nx + ix];
            let k = qx.hypot(qy);
            if k > PARAXIAL_LIMIT && z.norm() > POPULATED_FRACTION * peak {
                return Err(EiaError::Paraxial { k, limit: PARAXIAL_LIMIT });
            }
            *z *= (I * (chi(k) - 0.5 * k * k) * slice_length).exp();
        }
    }
    fft2(&mut spec, nx, ny, true);
    TransverseProfile::new(nx, ny, profile.dx, profile.dy, spec)
}

/// Applies the EIA filter through one slice of length `slice_length`.
pub fn apply_filter(
    profile: &TransverseProfile,
    fp: &FilterParams,
    params: &ModelParams,
    deltap: f64,
    slice_length: f64,
) -> Result<TransverseProfile> {
    fp.validate()?;
    propagate_slice(profile, slice_length, |k| susceptibility(fp, params, deltap, k))
}
