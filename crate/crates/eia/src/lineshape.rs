//! Line-shape descriptors: half-maximum widths, Lorentzian fits, the
//! Dicke-limit width law, and δq scans of the sharp EIA peak.

use nalgebra::{Matrix4, Vector4};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, EiaError, Result};
use crate::model::{FieldConfig, ModelParams};
use crate::quadrature::Quadrature;
use crate::spectrum::{solve_approximate, uniform_grid, Spectrum};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorentzFit {
    pub center: f64,
    pub hwhm: f64,
    pub amplitude: f64,
    pub offset: f64,
    /// Euclidean norm of the residual vector (uniform weights).
    pub residual_norm: f64,
    pub iterations: usize,
}

impl LorentzFit {
    pub fn eval(&self, x: f64) -> f64 {
        lorentzian(x, self.center, self.hwhm, self.amplitude, self.offset)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineMetrics {
    pub fwhm: f64,
    pub peak_value: f64,
    pub peak_position: f64,
    pub baseline: f64,
    pub fit: Option<LorentzFit>,
}

/// Which curve of a spectrum to measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    /// Imaginary part of the VCC-fed third term alone.
    SharpPeakComponent,
    /// Imaginary part of the |V2|²G5 pedestal term alone.
    PedestalComponent,
    /// Total absorption minus the one-photon background term.
    TotalMinusBackground,
    /// Total absorption.
    Absorption,
}

pub fn lorentzian(x: f64, center: f64, hwhm: f64, amplitude: f64, offset: f64) -> f64 {
    let w2 = hwhm * hwhm;
    offset + amplitude * w2 / ((x - center).powi(2) + w2)
}

fn feature_values(spectrum: &Spectrum, feature: Feature) -> Result<Vec<f64>> {
    let need = || {
        EiaError::Analysis(format!(
            "{feature:?} needs a spectrum with its three-term decomposition"
        ))
    };
    match feature {
        Feature::Absorption => Ok(spectrum.absorption.clone()),
        Feature::SharpPeakComponent => spectrum.component_absorption(|c| c.sharp_peak).ok_or_else(need),
        Feature::PedestalComponent => spectrum.component_absorption(|c| c.pedestal).ok_or_else(need),
        Feature::TotalMinusBackground => spectrum
            .component_absorption(|c| c.pedestal + c.sharp_peak)
            .ok_or_else(need),
    }
}

/// FWHM of the chosen curve of `spectrum`.
pub fn extract_fwhm(spectrum: &Spectrum, feature: Feature) -> Result<LineMetrics> {
    let y = feature_values(spectrum, feature)?;
    fwhm_from_samples(&spectrum.detunings, &y)
}

/// Mean of the outer 5% of samples on each side (at least one per side).
pub fn wing_baseline(y: &[f64]) -> f64 {
    let k = (y.len() / 20).max(1);
    let sum: f64 = y[..k].iter().chain(&y[y.len() - k..]).sum();
    sum / (2 * k) as f64
}

/// Bisection for the level crossing of the linear interpolant between two
/// samples; `lo` and `hi` bracket the level.
fn bisect_crossing(x0: f64, y0: f64, x1: f64, y1: f64, level: f64) -> f64 {
    let interp = |x: f64| y0 + (y1 - y0) * (x - x0) / (x1 - x0);
    let (mut a, mut b) = (x0, x1);
    let above_at_a = y0 > level;
    let tol = 1e-13 * (x1 - x0).abs();
    while (b - a).abs() > tol {
        let m = 0.5 * (a + b);
        if (interp(m) > level) == above_at_a {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// FWHM of sampled data: maximum, wing baseline, and the half-level
/// crossings on either side found on the linear interpolant.
pub fn fwhm_from_samples(x: &[f64], y: &[f64]) -> Result<LineMetrics> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(EiaError::Analysis("need at least three paired samples".into()));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(EiaError::Analysis("non-finite sample".into()));
    }
    let (imax, &peak) = y
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty");
    let baseline = wing_baseline(y);
    if !(peak > baseline) {
        return Err(EiaError::Analysis("no peak above the wing baseline".into()));
    }
    let half = baseline + 0.5 * (peak - baseline);
    let left = (0..imax).rev().find(|&i| y[i] <= half);
    let right = (imax + 1..y.len()).find(|&i| y[i] <= half);
    let (l, r) = match (left, right) {
        (Some(l), Some(r)) => (l, r),
        _ => {
            return Err(EiaError::Analysis(
                "half maximum not crossed on both sides; widen the detuning grid".into(),
            ))
        }
    };
    let xl = bisect_crossing(x[l], y[l], x[l + 1], y[l + 1], half);
    let xr = bisect_crossing(x[r - 1], y[r - 1], x[r], y[r], half);
    Ok(LineMetrics {
        fwhm: xr - xl,
        peak_value: peak,
        peak_position: x[imax],
        baseline,
        fit: None,
    })
}

/// Width law 2·(2/a²)·γ_vcc·H(a·v_th·δq/γ_vcc) with H(x) = e^{−x} − 1 + x
/// and a² = 2/ln 2. Reduces to 2v_th²δq²/γ_vcc for small argument and to
/// the Gaussian residual-Doppler FWHM (4/a)·v_th·δq for large argument.
pub fn dicke_fwhm_model(gamma_vcc: f64, v_th_dq: f64) -> Result<f64> {
    if !(gamma_vcc > 0.0) {
        return Err(invalid("gamma_vcc", "must be > 0 for the Dicke width law"));
    }
    let a = (2.0 / std::f64::consts::LN_2).sqrt();
    let x = a * v_th_dq / gamma_vcc;
    // e^{-x} − 1 + x without cancellation at small x.
    let h = if x.abs() < 1e-3 {
        x * x / 2.0 - x.powi(3) / 6.0 + x.powi(4) / 24.0
    } else {
        (-x).exp_m1() + x
    };
    Ok(2.0 * (2.0 / (a * a)) * gamma_vcc * h)
}

/// Least-squares Lorentzian fit of the absorption of `spectrum`.
pub fn fit_lorentzian(spectrum: &Spectrum) -> Result<LineMetrics> {
    fit_lorentzian_samples(&spectrum.detunings, &spectrum.absorption)
}

const FIT_MAX_ITER: usize = 500;

/// Levenberg–Marquardt fit of offset + amplitude·w²/((x−c)² + w²),
/// started from the half-maximum metrics of the data.
pub fn fit_lorentzian_samples(x: &[f64], y: &[f64]) -> Result<LineMetrics> {
    let start = fwhm_from_samples(x, y)?;
    let mut p = Vector4::new(
        start.peak_position,
        0.5 * start.fwhm,
        start.peak_value - start.baseline,
        start.baseline,
    );
    let cost_of = |p: &Vector4<f64>| -> f64 {
        x.iter()
            .zip(y)
            .map(|(&xi, &yi)| (lorentzian(xi, p[0], p[1], p[2], p[3]) - yi).powi(2))
            .sum()
    };
    let mut cost = cost_of(&p);
    let scale = y.iter().map(|v| v * v).sum::<f64>().max(f64::MIN_POSITIVE);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    for it in 0..FIT_MAX_ITER {
        iterations = it + 1;
        let mut jtj = Matrix4::<f64>::zeros();
        let mut jtr = Vector4::<f64>::zeros();
        for (&xi, &yi) in x.iter().zip(y) {
            let (c, w, a, o) = (p[0], p[1], p[2], p[3]);
            let d = xi - c;
            let den = d * d + w * w;
            let shape = w * w / den;
            let r = o + a * shape - yi;
            let grad = Vector4::new(
                a * 2.0 * w * w * d / (den * den),
                a * 2.0 * w * d * d / (den * den),
                shape,
                1.0,
            );
            jtj += grad * grad.transpose();
            jtr += grad * r;
        }
        if cost <= 1e-30 * scale {
            converged = true;
            break;
        }
        let mut improved = false;
        for _ in 0..40 {
            let mut damped = jtj;
            for k in 0..4 {
                damped[(k, k)] += lambda * jtj[(k, k)].max(1e-300);
            }
            let step = match damped.lu().solve(&(-jtr)) {
                Some(s) => s,
                None => {
                    lambda *= 10.0;
                    continue;
                }
            };
            let trial = p + step;
            let trial_cost = cost_of(&trial);
            if trial_cost.is_finite() && trial_cost <= cost {
                let rel_step = (0..4)
                    .map(|k| step[k].abs() / (p[k].abs() + 1e-300))
                    .fold(0.0, f64::max);
                let rel_cost = (cost - trial_cost) / cost.max(f64::MIN_POSITIVE);
                p = trial;
                cost = trial_cost;
                lambda = (lambda * 0.3).max(1e-15);
                improved = true;
                if rel_step < 1e-13 || rel_cost < 1e-15 {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if converged || !improved {
            // No downhill step at any damping: a minimum to machine precision.
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(EiaError::FitNonConvergence { iterations });
    }
    let fit = LorentzFit {
        center: p[0],
        hwhm: p[1].abs(),
        amplitude: p[2],
        offset: p[3],
        residual_norm: cost.sqrt(),
        iterations,
    };
    Ok(LineMetrics {
        fit: Some(fit),
        ..start
    })
}

/// Largest |data − fit| over the samples, and data − fit at the sample
/// nearest the fitted centre.
pub fn fit_residuals(x: &[f64], y: &[f64], fit: &LorentzFit) -> (f64, f64) {
    let max = x
        .iter()
        .zip(y)
        .map(|(&xi, &yi)| (yi - fit.eval(xi)).abs())
        .fold(0.0, f64::max);
    let ic = x
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - fit.center).abs().total_cmp(&(b.1 - fit.center).abs()))
        .map(|(i, _)| i)
        .unwrap_or(0);
    (max, y[ic] - fit.eval(x[ic]))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub dq_vth: f64,
    /// FWHM of the sharp-peak component.
    pub fwhm: f64,
    /// Total absorption at the sharp-peak maximum.
    pub peak_absorption: f64,
    /// FWHM of the pedestal component.
    pub pedestal_fwhm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanOptions {
    /// Samples per spectrum.
    pub points: usize,
    /// Half-width of the sharp-peak window in units of the expected width
    /// (Dicke law plus `intrinsic_width`).
    pub sharp_window: f64,
    /// Expected sharp-peak FWHM at δq = 0.
    pub intrinsic_width: f64,
    /// Half-width of the pedestal window in units of γ_vcc + γ.
    pub pedestal_window: f64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            points: 401,
            sharp_window: 15.0,
            intrinsic_width: 0.003,
            pedestal_window: 20.0,
        }
    }
}

/// Sharp-peak FWHM, total peak absorption and pedestal FWHM along a δq ladder.
pub fn scan_delta_q(
    params: &ModelParams,
    fields: &FieldConfig,
    quad: &Quadrature,
    dq_ladder: &[f64],
    opts: &ScanOptions,
) -> Result<Vec<ScanRow>> {
    if dq_ladder.is_empty() {
        return Err(invalid("dq_ladder", "must not be empty"));
    }
    if dq_ladder.windows(2).any(|w| !(w[1] > w[0])) || dq_ladder[0] < 0.0 {
        return Err(invalid("dq_ladder", "must be nonnegative and strictly ascending"));
    }
    dq_ladder
        .par_iter()
        .map(|&dq| {
            let f = FieldConfig { dq_vth: dq, ..*fields };
            let expected = if params.gamma_vcc > 0.0 {
                dicke_fwhm_model(params.gamma_vcc, dq)?
            } else {
                0.0
            } + opts.intrinsic_width;
            let w = opts.sharp_window * expected;
            let sharp_grid = uniform_grid(-w, w, opts.points)?;
            let (narrow, _) = solve_approximate(params, &f, quad, &sharp_grid)?;
            let sharp = extract_fwhm(&narrow, Feature::SharpPeakComponent)?;
            let peak_absorption = narrow.absorption.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let wp = opts.pedestal_window * (params.gamma_vcc + params.gamma_g);
            let wide_grid = uniform_grid(-wp, wp, opts.points)?;
            let (wide, _) = solve_approximate(params, &f, quad, &wide_grid)?;
            let pedestal = extract_fwhm(&wide, Feature::PedestalComponent)?;
            Ok(ScanRow {
                dq_vth: dq,
                fwhm: sharp.fwhm,
                peak_absorption,
                pedestal_fwhm: pedestal.fwhm,
            })
        })
        .collect()
}
