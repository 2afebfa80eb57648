//! Probe response spectra: the exact self-consistent solve, the approximate
//! three-term expression with its background / pedestal / sharp-peak
//! decomposition, and the closed form for atoms at rest.
//!
//! `response` is R_e1g2 / Vp (it carries the density n0), and `absorption`
//! is its imaginary part.

use std::cell::Cell;

use log::warn;
use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, EiaError, Result};
use crate::model::{coherence_matrix, xi_set, FieldConfig, ModelParams};
use crate::quadrature::{velocity_average, QuadStats, Quadrature};
use crate::velocity::{g_integrals, strong_collision, GKernelSpec};

const I: C64 = C64::new(0.0, 1.0);

/// Condition estimates above this abort the solve.
pub const CONDITION_ERROR: f64 = 1e12;
/// Condition estimates above this are reported as warnings.
pub const CONDITION_WARN: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Components {
    pub background: C64,
    pub pedestal: C64,
    pub sharp_peak: C64,
}

impl Components {
    pub fn total(&self) -> C64 {
        self.background + self.pedestal + self.sharp_peak
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub detunings: Vec<f64>,
    pub response: Vec<C64>,
    pub absorption: Vec<f64>,
    pub components: Option<Vec<Components>>,
}

impl Spectrum {
    pub(crate) fn from_response(detunings: Vec<f64>, response: Vec<C64>, components: Option<Vec<Components>>) -> Self {
        let absorption = response.iter().map(|r| r.im).collect();
        Self {
            detunings,
            response,
            absorption,
            components,
        }
    }

    pub fn len(&self) -> usize {
        self.detunings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detunings.is_empty()
    }

    /// Absorption of one named component, if present.
    pub fn component_absorption(&self, pick: impl Fn(&Components) -> C64) -> Option<Vec<f64>> {
        self.components
            .as_ref()
            .map(|cs| cs.iter().map(|c| pick(c).im).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    Approximate,
    AtRest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub method: Method,
    pub quadrature: String,
    pub points: usize,
    pub evaluations: usize,
    pub max_panels: usize,
    /// Largest 1-norm condition estimate met in the per-velocity and
    /// velocity-integrated linear systems.
    pub max_condition: f64,
    pub converged: bool,
    pub warnings: Vec<String>,
}

impl SolveReport {
    fn new(method: Method, quad: Option<&Quadrature>, points: usize) -> Self {
        Self {
            method,
            quadrature: quad.map_or_else(|| "none".to_string(), Quadrature::describe),
            points,
            evaluations: 0,
            max_panels: 0,
            max_condition: 1.0,
            converged: true,
            warnings: Vec::new(),
        }
    }

    fn absorb(&mut self, stats: &QuadStats, cond: f64) {
        self.evaluations += stats.evaluations;
        self.max_panels = self.max_panels.max(stats.panels);
        self.converged &= stats.converged;
        self.max_condition = self.max_condition.max(cond);
    }
}

pub fn validate_detunings(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(invalid("detuning_grid", "must contain at least one point"));
    }
    if grid.iter().any(|d| !d.is_finite()) {
        return Err(invalid("detuning_grid", "must be finite"));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("detuning_grid", "must be strictly increasing"));
    }
    Ok(())
}

/// `n` evenly spaced detunings on [lo, hi].
pub fn uniform_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if n == 0 || !(hi > lo) && n > 1 {
        return Err(invalid("detuning_grid", "need n >= 1 and hi > lo"));
    }
    if n == 1 {
        return Ok(vec![0.5 * (lo + hi)]);
    }
    let step = (hi - lo) / (n - 1) as f64;
    Ok((0..n).map(|i| lo + step * i as f64).collect())
}

/// A uniform grid merged with log-spaced points inside |Δp| < `core`,
/// `per_decade` points per decade down to `core`·1e-3, mirrored about zero.
pub fn refined_grid(lo: f64, hi: f64, n: usize, core: f64, per_decade: usize) -> Result<Vec<f64>> {
    let mut pts = uniform_grid(lo, hi, n)?;
    if core > 0.0 && per_decade > 0 {
        let count = 3 * per_decade;
        for k in 0..=count {
            let x = core * 10f64.powf(-(k as f64) / per_decade as f64);
            for v in [x, -x] {
                if v > lo && v < hi {
                    pts.push(v);
                }
            }
        }
        if lo < 0.0 && hi > 0.0 {
            pts.push(0.0);
        }
    }
    pts.sort_by(f64::total_cmp);
    let tol = 1e-12 * (hi - lo).abs().max(1.0);
    pts.dedup_by(|a, b| (*a - *b).abs() <= tol);
    Ok(pts)
}

fn check_inputs(params: &ModelParams, fields: &FieldConfig, grid: &[f64]) -> Result<()> {
    params.validate()?;
    fields.validate()?;
    validate_detunings(grid)
}

fn condition_1norm(m: &Matrix4<C64>, inv: &Matrix4<C64>) -> f64 {
    let norm1 = |a: &Matrix4<C64>| {
        (0..4)
            .map(|j| (0..4).map(|i| a[(i, j)].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    };
    norm1(m) * norm1(inv)
}

/// Per-point result of the exact solve.
#[derive(Debug, Clone, Copy)]
pub struct ExactPoint {
    pub response: C64,
    /// Velocity-integrated (R_g1g2, R_e1g2, R_e1e2, R_g1e2) divided by Vp.
    pub densities: [C64; 4],
    /// Velocity-integrated pump dipole R_g2e2.
    pub pump_dipole: C64,
    pub condition: f64,
    pub stats: QuadStats,
}

/// Exact weak-probe response at the detuning in `fields`.
///
/// At each velocity the four probe-order coherences satisfy
/// M(v)·ρ = F(v)·(iγ_vcc·R + s(v)), where R are their velocity integrals
/// and s holds the probe and pump-dipole sources. Averaging M⁻¹ and M⁻¹s
/// over velocity turns the Boltzmann self-consistency into one 4×4 solve.
pub fn exact_point(params: &ModelParams, fields: &FieldConfig, quad: &Quadrature) -> Result<ExactPoint> {
    let max_cond = Cell::new(1.0_f64);
    let singular = Cell::new(false);
    let (avg, stats) = velocity_average::<21, _>(quad, fields, |vp, vr| {
        let xi = xi_set(params, fields, vp, vr);
        let m = coherence_matrix(&xi, params, fields);
        let mut out = [C64::new(0.0, 0.0); 21];
        match m.try_inverse() {
            Some(inv) => {
                max_cond.set(max_cond.get().max(condition_1norm(&m, &inv)));
                for r in 0..4 {
                    for c in 0..4 {
                        out[4 * r + c] = inv[(r, c)];
                    }
                    out[16 + r] = inv[(r, 2)] / xi.xi5;
                }
                out[20] = 1.0 / xi.xi5;
            }
            None => singular.set(true),
        }
        out
    })?;
    if singular.get() {
        return Err(EiaError::Singular(format!(
            "per-velocity coherence matrix at Δp = {}",
            fields.deltap
        )));
    }
    let gv = params.gamma_vcc;
    let n0 = params.n0;
    let vp = fields.vp;
    let k_pump = strong_collision(avg[20], gv);
    let pump_dipole = -I * k_pump * fields.v2.conj() * n0;
    let a = Matrix4::from_fn(|r, c| avg[4 * r + c]);
    let b_pump = Vector4::from_fn(|r, _| avg[16 + r]);
    let c = -vp * (I * gv * pump_dipole + fields.v2.conj() * n0);
    let rhs = a.column(1) * (-vp * n0) + b_pump * c;
    let sys = Matrix4::identity() - a * (I * gv);
    let inv = sys
        .try_inverse()
        .ok_or_else(|| EiaError::Singular(format!("velocity-integrated system at Δp = {}", fields.deltap)))?;
    let cond = condition_1norm(&sys, &inv).max(max_cond.get());
    if !cond.is_finite() || cond > CONDITION_ERROR {
        return Err(EiaError::IllConditioned { cond });
    }
    let r = inv * rhs;
    let densities = [r[0] / vp, r[1] / vp, r[2] / vp, r[3] / vp];
    Ok(ExactPoint {
        response: densities[1],
        densities,
        pump_dipole,
        condition: cond,
        stats,
    })
}

/// Approximate response components at the detuning in `fields`:
/// background −n0·G4, pedestal n0|V2|²G5 and the VCC-fed sharp peak
/// n0·iV1V2*·bAΓ·iG2G3γ_vcc/(1 − iG1γ_vcc), all divided by Vp.
pub fn approximate_point(params: &ModelParams, fields: &FieldConfig, quad: &Quadrature) -> Result<(Components, QuadStats)> {
    let specs = [
        GKernelSpec::g1(),
        GKernelSpec::g2(),
        GKernelSpec::g3(),
        GKernelSpec::g4(),
        GKernelSpec::g5(),
    ];
    let (g, stats) = g_integrals(&specs, params, fields, quad)?;
    let [g1, g2, g3, g4, g5] = g;
    let n0 = params.n0;
    let gv = params.gamma_vcc;
    let coupling = I * fields.v1 * fields.v2.conj() * params.toc_rate();
    let sharp = coupling * (I * g2 * g3 * gv) / (1.0 - I * g1 * gv);
    Ok((
        Components {
            background: -n0 * g4,
            pedestal: n0 * fields.v2.norm_sqr() * g5,
            sharp_peak: n0 * sharp,
        },
        stats,
    ))
}

fn note_condition(report: &mut SolveReport, deltap: f64, cond: f64) {
    if cond > CONDITION_WARN {
        let msg = format!("condition estimate {cond:.3e} at Δp = {deltap}");
        warn!("{msg}");
        report.warnings.push(msg);
    }
}

pub fn solve_exact(
    params: &ModelParams,
    fields: &FieldConfig,
    quad: &Quadrature,
    detuning_grid: &[f64],
) -> Result<(Spectrum, SolveReport)> {
    check_inputs(params, fields, detuning_grid)?;
    let points: Vec<ExactPoint> = detuning_grid
        .par_iter()
        .map(|&d| exact_point(params, &fields.with_deltap(d), quad))
        .collect::<Result<_>>()?;
    let mut report = SolveReport::new(Method::Exact, Some(quad), detuning_grid.len());
    for (p, &d) in points.iter().zip(detuning_grid) {
        report.absorb(&p.stats, p.condition);
        note_condition(&mut report, d, p.condition);
    }
    let response = points.iter().map(|p| p.response).collect();
    Ok((Spectrum::from_response(detuning_grid.to_vec(), response, None), report))
}

pub fn solve_approximate(
    params: &ModelParams,
    fields: &FieldConfig,
    quad: &Quadrature,
    detuning_grid: &[f64],
) -> Result<(Spectrum, SolveReport)> {
    check_inputs(params, fields, detuning_grid)?;
    let mut report = SolveReport::new(Method::Approximate, Some(quad), detuning_grid.len());
    let validity = params.gamma_pcc + 0.5 * params.gamma_sp;
    if params.gamma_vcc >= validity {
        let msg = format!(
            "approximate solution assumes γ_vcc ≪ Γ_pcc + Γ/2; got γ_vcc = {} vs {}",
            params.gamma_vcc, validity
        );
        warn!("{msg}");
        report.warnings.push(msg);
    }
    let points: Vec<(Components, QuadStats)> = detuning_grid
        .par_iter()
        .map(|&d| approximate_point(params, &fields.with_deltap(d), quad))
        .collect::<Result<_>>()?;
    for (_, s) in &points {
        report.absorb(s, 1.0);
    }
    let components: Vec<Components> = points.into_iter().map(|(c, _)| c).collect();
    let response = components.iter().map(Components::total).collect();
    Ok((
        Spectrum::from_response(detuning_grid.to_vec(), response, Some(components)),
        report,
    ))
}

/// Closed-form spectrum for atoms at rest with transfer of coherence:
/// i·n0/(Γ/2 − iΔp)·[1 + (2A|V1|²/Γ)/(2(1−A²)|V2|²/Γ − iΔp)].
/// The one-photon factor is returned as the background component.
pub fn at_rest_spectrum(params: &ModelParams, fields: &FieldConfig, detuning_grid: &[f64]) -> Result<Spectrum> {
    check_inputs(params, fields, detuning_grid)?;
    let gamma = params.gamma_sp;
    let a = params.branching_a;
    let n0 = params.n0;
    let num = 2.0 * a * fields.v1.norm_sqr() / gamma;
    let width = 2.0 * (1.0 - a * a) * fields.v2.norm_sqr() / gamma;
    let components: Vec<Components> = detuning_grid
        .iter()
        .map(|&d| {
            let one_photon = I * n0 / C64::new(0.5 * gamma, -d);
            let eia = one_photon * num / C64::new(width, -d);
            Components {
                background: one_photon,
                pedestal: C64::new(0.0, 0.0),
                sharp_peak: eia,
            }
        })
        .collect();
    let response = components.iter().map(Components::total).collect();
    Ok(Spectrum::from_response(detuning_grid.to_vec(), response, Some(components)))
}
