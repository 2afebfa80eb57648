//! Flat scenario configuration, named presets and `key=value` overrides.
//!
//! Rates and detunings are in units of Γ, velocities in units of v_th,
//! transverse lengths and spatial frequencies in units of 1/q_p and q_p,
//! except the Ramsey sheet half-widths, which are in metres.

use std::path::Path;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{EiaError, Result};
use crate::model::{DqDirection, FieldConfig, ModelParams};
use crate::quadrature::{make_grid, AdaptiveRule, Quadrature};
use crate::ramsey::PhysicalUnits;
use crate::spectrum::{refined_grid, uniform_grid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    SpectrumExact,
    SpectrumApprox,
    AtRest,
    FwhmScan,
    FilterCurve,
    BeamFilter,
    Ramsey,
}

impl Scenario {
    pub const ALL: [Scenario; 7] = [
        Scenario::SpectrumExact,
        Scenario::SpectrumApprox,
        Scenario::AtRest,
        Scenario::FwhmScan,
        Scenario::FilterCurve,
        Scenario::BeamFilter,
        Scenario::Ramsey,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::SpectrumExact => "spectrum_exact",
            Scenario::SpectrumApprox => "spectrum_approx",
            Scenario::AtRest => "at_rest",
            Scenario::FwhmScan => "fwhm_scan",
            Scenario::FilterCurve => "filter_curve",
            Scenario::BeamFilter => "beam_filter",
            Scenario::Ramsey => "ramsey",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureKind {
    #[default]
    Adaptive,
    Hermite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    #[default]
    Uniform,
    /// Uniform plus log-spaced points toward Δp = 0.
    Refined,
}

/// Every scenario parameter as a flat key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub scenario: Scenario,

    pub gamma_sp: f64,
    pub gamma_pcc: f64,
    pub gamma_vcc: f64,
    pub gamma_g: f64,
    pub b: u8,
    pub branching_a: f64,
    pub n0: f64,

    pub v1_re: f64,
    pub v1_im: f64,
    pub v2_re: f64,
    pub v2_im: f64,
    pub vp_re: f64,
    pub vp_im: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub qp_vth: f64,
    pub dq_vth: f64,
    pub dq_direction: DqDirection,

    /// Detuning grid.
    pub deltap_min: f64,
    pub deltap_max: f64,
    pub points: usize,
    pub grid: GridKind,
    /// Refined grid: log-spaced core half-width and points per decade.
    pub refine_core: f64,
    pub refine_per_decade: usize,

    pub quadrature: QuadratureKind,
    pub rtol: f64,
    pub hermite_nodes: usize,
    pub hermite_nodes_res: usize,

    /// Spectrum scenarios repeat over these γ_vcc values when nonempty.
    pub gamma_vcc_ladder: Vec<f64>,
    /// Spectrum and scan scenarios repeat over these δq·v_th values when nonempty.
    pub dq_ladder: Vec<f64>,
    /// spectrum_approx also runs the exact solver on the same grid.
    pub with_exact: bool,

    /// fwhm_scan: samples per spectrum and window sizes.
    pub scan_points: usize,
    pub scan_sharp_window: f64,
    pub scan_pedestal_window: f64,

    /// Filter: η override (default |V1|/|V2|), diffusion override (default qp_vth²/γ_vcc).
    pub eta: Option<f64>,
    pub diffusion_d: Option<f64>,
    pub optical_depth_scale: f64,
    pub k_max: f64,
    pub k_points: usize,
    /// filter_curve: probe detunings in units of Γ_hom.
    pub filter_deltaps: Vec<f64>,
    /// beam_filter: probe detuning in units of Γ.
    pub filter_deltap: f64,

    /// beam_filter: input profile file (`.bin` binary, otherwise text);
    /// without one, a narrow plus a wide Gaussian on an n×n grid.
    pub profile_path: Option<String>,
    pub beam_grid: usize,
    pub beam_dx: f64,
    pub beam_narrow_waist: f64,
    pub beam_wide_waist: f64,
    pub beam_offset: f64,
    pub slice_length: f64,
    pub slices: usize,

    /// Ramsey sheet half-widths in metres.
    pub half_widths: Vec<f64>,
    pub v_th_m_s: f64,
    pub wavelength_m: f64,

    pub out: Option<String>,
    pub format: OutputFormat,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let m = ModelParams::default();
        let f = FieldConfig::default();
        let u = PhysicalUnits::default();
        Self {
            scenario: Scenario::SpectrumApprox,
            gamma_sp: m.gamma_sp,
            gamma_pcc: m.gamma_pcc,
            gamma_vcc: m.gamma_vcc,
            gamma_g: m.gamma_g,
            b: m.b,
            branching_a: m.branching_a,
            n0: m.n0,
            v1_re: f.v1.re,
            v1_im: f.v1.im,
            v2_re: f.v2.re,
            v2_im: f.v2.im,
            vp_re: f.vp.re,
            vp_im: f.vp.im,
            delta1: f.delta1,
            delta2: f.delta2,
            qp_vth: f.qp_vth,
            dq_vth: f.dq_vth,
            dq_direction: f.dq_direction,
            deltap_min: -0.1,
            deltap_max: 0.1,
            points: 401,
            grid: GridKind::Uniform,
            refine_core: 0.01,
            refine_per_decade: 10,
            quadrature: QuadratureKind::Adaptive,
            rtol: AdaptiveRule::default().rtol,
            hermite_nodes: 80,
            hermite_nodes_res: 40,
            gamma_vcc_ladder: Vec::new(),
            dq_ladder: Vec::new(),
            with_exact: false,
            scan_points: 401,
            scan_sharp_window: 15.0,
            scan_pedestal_window: 20.0,
            eta: None,
            diffusion_d: None,
            optical_depth_scale: 1e-3,
            k_max: 0.002,
            k_points: 201,
            filter_deltaps: vec![0.0],
            filter_deltap: 0.0,
            profile_path: None,
            beam_grid: 256,
            beam_dx: 100.0,
            beam_narrow_waist: 300.0,
            beam_wide_waist: 3000.0,
            beam_offset: 6000.0,
            slice_length: 1e4,
            slices: 1,
            half_widths: vec![50e-6, 5e-3],
            v_th_m_s: u.v_th,
            wavelength_m: u.wavelength,
            out: None,
            format: OutputFormat::Csv,
        }
    }
}

fn config_err(key: &str, reason: impl std::fmt::Display) -> EiaError {
    EiaError::InvalidParameter {
        key: key.to_string(),
        reason: reason.to_string(),
    }
}

/// δq·v_th values for pump–probe angles θ (mrad) with |δq| ≈ θ·q_p.
pub fn angle_ladder(qp_vth: f64, angles_mrad: &[f64]) -> Vec<f64> {
    angles_mrad.iter().map(|t| t * 1e-3 * qp_vth).collect()
}

pub const PRESETS: [&str; 6] = ["fig2", "fig3", "fig4", "fig5", "fig6", "fig7"];

/// Named parameter set (`fig2` … `fig7`) as a full configuration.
pub fn preset(name: &str) -> Option<ScenarioConfig> {
    let base = ScenarioConfig::default();
    let cfg = match name {
        "fig2" => ScenarioConfig {
            scenario: Scenario::SpectrumApprox,
            with_exact: true,
            deltap_min: -0.2,
            deltap_max: 0.2,
            points: 201,
            grid: GridKind::Refined,
            refine_core: 0.02,
            ..base
        },
        "fig3" => ScenarioConfig {
            scenario: Scenario::SpectrumApprox,
            gamma_vcc_ladder: vec![0.025, 0.1, 0.25],
            deltap_min: -1.0,
            deltap_max: 1.0,
            points: 201,
            grid: GridKind::Refined,
            refine_core: 0.05,
            ..base
        },
        "fig4" => ScenarioConfig {
            scenario: Scenario::SpectrumApprox,
            gamma_vcc: 0.1,
            gamma_pcc: 1.0,
            dq_ladder: angle_ladder(base.qp_vth, &[0.0, 0.2, 0.4, 0.6, 0.8, 1.0]),
            deltap_min: -0.5,
            deltap_max: 0.5,
            points: 201,
            grid: GridKind::Refined,
            refine_core: 0.02,
            ..base
        },
        "fig5" => ScenarioConfig {
            scenario: Scenario::FwhmScan,
            gamma_vcc: 0.1,
            gamma_pcc: 1.0,
            dq_ladder: vec![0.05, 0.1, 0.2, 0.3, 0.4, 0.5],
            ..base
        },
        "fig6" => ScenarioConfig {
            scenario: Scenario::FilterCurve,
            gamma_vcc: 0.025,
            gamma_pcc: 10.0,
            filter_deltaps: vec![-2.0, -1.0, 0.0, 1.0, 2.0],
            ..base
        },
        "fig7" => ScenarioConfig {
            scenario: Scenario::Ramsey,
            half_widths: vec![50e-6, 5e-3],
            deltap_min: -0.02,
            deltap_max: 0.02,
            points: 801,
            ..base
        },
        _ => return None,
    };
    Some(cfg)
}

impl ScenarioConfig {
    pub fn model(&self) -> ModelParams {
        ModelParams {
            gamma_sp: self.gamma_sp,
            gamma_pcc: self.gamma_pcc,
            gamma_vcc: self.gamma_vcc,
            gamma_g: self.gamma_g,
            b: self.b,
            branching_a: self.branching_a,
            n0: self.n0,
        }
    }

    pub fn fields(&self) -> FieldConfig {
        FieldConfig {
            v1: C64::new(self.v1_re, self.v1_im),
            v2: C64::new(self.v2_re, self.v2_im),
            vp: C64::new(self.vp_re, self.vp_im),
            delta1: self.delta1,
            delta2: self.delta2,
            deltap: 0.0,
            qp_vth: self.qp_vth,
            dq_vth: self.dq_vth,
            dq_direction: self.dq_direction,
        }
    }

    pub fn units(&self) -> PhysicalUnits {
        PhysicalUnits {
            v_th: self.v_th_m_s,
            wavelength: self.wavelength_m,
        }
    }

    pub fn quadrature(&self) -> Result<Quadrature> {
        Ok(match self.quadrature {
            QuadratureKind::Adaptive => Quadrature::Adaptive(AdaptiveRule::with_rtol(self.rtol)),
            QuadratureKind::Hermite => Quadrature::Hermite(make_grid(self.hermite_nodes, self.hermite_nodes_res)?),
        })
    }

    pub fn detuning_grid(&self) -> Result<Vec<f64>> {
        match self.grid {
            GridKind::Uniform => uniform_grid(self.deltap_min, self.deltap_max, self.points),
            GridKind::Refined => refined_grid(
                self.deltap_min,
                self.deltap_max,
                self.points,
                self.refine_core,
                self.refine_per_decade,
            ),
        }
    }

    /// Checks everything the selected scenario reads, before any computation.
    pub fn validate(&self) -> Result<()> {
        self.model().validate()?;
        self.fields().validate()?;
        self.units().validate()?;
        if !(self.rtol > 0.0 && self.rtol < 1.0) {
            return Err(config_err("rtol", "must lie in (0, 1)"));
        }
        self.quadrature()?;
        for (key, ladder) in [("gamma_vcc_ladder", &self.gamma_vcc_ladder), ("dq_ladder", &self.dq_ladder)] {
            if ladder.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(config_err(key, "entries must be finite and >= 0"));
            }
        }
        match self.scenario {
            Scenario::SpectrumExact | Scenario::SpectrumApprox | Scenario::AtRest | Scenario::Ramsey => {
                self.detuning_grid()?;
            }
            _ => {}
        }
        match self.scenario {
            Scenario::FwhmScan => {
                if self.dq_ladder.is_empty() {
                    return Err(config_err("dq_ladder", "fwhm_scan needs at least one value"));
                }
                if !(self.gamma_vcc > 0.0) {
                    return Err(config_err("gamma_vcc", "fwhm_scan needs gamma_vcc > 0"));
                }
                if self.scan_points < 21 {
                    return Err(config_err("scan_points", "must be >= 21"));
                }
                if !(self.scan_sharp_window > 0.0 && self.scan_pedestal_window > 0.0) {
                    return Err(config_err("scan_sharp_window", "scan windows must be > 0"));
                }
            }
            Scenario::FilterCurve | Scenario::BeamFilter => {
                if let Some(eta) = self.eta {
                    if !(eta > 0.0 && eta <= 1.0) {
                        return Err(config_err("eta", "must lie in (0, 1]"));
                    }
                }
                if let Some(d) = self.diffusion_d {
                    if !(d > 0.0 && d.is_finite()) {
                        return Err(config_err("diffusion_d", "must be finite and > 0"));
                    }
                } else if !(self.gamma_vcc > 0.0) {
                    return Err(config_err("gamma_vcc", "default diffusion_d needs gamma_vcc > 0"));
                }
                if !self.optical_depth_scale.is_finite() {
                    return Err(config_err("optical_depth_scale", "must be finite"));
                }
                if self.scenario == Scenario::FilterCurve {
                    if !(self.k_max > 0.0) || self.k_points < 2 {
                        return Err(config_err("k_max", "need k_max > 0 and k_points >= 2"));
                    }
                    if self.filter_deltaps.is_empty() || self.filter_deltaps.iter().any(|d| !d.is_finite()) {
                        return Err(config_err("filter_deltaps", "need at least one finite value"));
                    }
                } else {
                    if self.profile_path.is_none() {
                        if self.beam_grid < 2 || !(self.beam_dx > 0.0) {
                            return Err(config_err("beam_grid", "need beam_grid >= 2 and beam_dx > 0"));
                        }
                        if !(self.beam_narrow_waist > 0.0 && self.beam_wide_waist > 0.0) {
                            return Err(config_err("beam_narrow_waist", "waists must be > 0"));
                        }
                    }
                    if !(self.slice_length >= 0.0 && self.slice_length.is_finite()) || self.slices == 0 {
                        return Err(config_err("slice_length", "need slice_length >= 0 and slices >= 1"));
                    }
                }
            }
            Scenario::Ramsey => {
                if self.half_widths.is_empty() || self.half_widths.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
                    return Err(config_err("half_widths", "need at least one finite value > 0 (metres)"));
                }
                if self.dq_vth != 0.0 || self.delta1 != 0.0 || self.delta2 != 0.0 {
                    return Err(config_err("dq_vth", "ramsey needs dq_vth = delta1 = delta2 = 0"));
                }
                if !(self.gamma_vcc > 0.0) {
                    return Err(config_err("gamma_vcc", "ramsey needs gamma_vcc > 0"));
                }
            }
            _ => {}
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| EiaError::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| EiaError::Config(e.to_string()))
    }

    /// Applies one `key=value` override; the value is read as a TOML value,
    /// falling back to a bare string.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| EiaError::Config(format!("override `{assignment}` is not key=value")))?;
        let key = key.trim();
        let value = value.trim();
        let mut table = toml::Table::try_from(&*self).map_err(|e| EiaError::Config(e.to_string()))?;
        let parsed: toml::Value = match format!("v = {value}").parse::<toml::Table>() {
            Ok(mut t) => t.remove("v").expect("parsed key"),
            Err(_) => toml::Value::String(value.to_string()),
        };
        table.insert(key.to_string(), parsed);
        *self = table
            .try_into()
            .map_err(|e: toml::de::Error| EiaError::Config(format!("override `{key}`: {}", e.message())))?;
        Ok(())
    }
}

/// Resolves a positional scenario-or-preset name, an optional TOML file and
/// overrides into a validated configuration. A config file's `scenario` key
/// is replaced by a scenario name given positionally; a preset supplies the
/// base values that the file and overrides then adjust.
pub fn parse_config(name: Option<&str>, path: Option<&Path>, overrides: &[String]) -> Result<ScenarioConfig> {
    let mut cfg = match name {
        Some(n) => match preset(n) {
            Some(p) => p,
            None => {
                let scenario = Scenario::from_name(n).ok_or_else(|| {
                    let mut names: Vec<&str> = Scenario::ALL.iter().map(|s| s.name()).collect();
                    names.extend(PRESETS);
                    EiaError::Config(format!("unknown scenario or preset `{n}`; expected one of {}", names.join(", ")))
                })?;
                ScenarioConfig {
                    scenario,
                    ..ScenarioConfig::default()
                }
            }
        },
        None => ScenarioConfig::default(),
    };
    if let Some(path) = path {
        let text = std::fs::read_to_string(path)
            .map_err(|e| EiaError::Config(format!("cannot read {}: {e}", path.display())))?;
        let file: toml::Table = text.parse().map_err(|e: toml::de::Error| EiaError::Config(e.to_string()))?;
        let mut table = toml::Table::try_from(&cfg).map_err(|e| EiaError::Config(e.to_string()))?;
        let positional = name.and_then(Scenario::from_name);
        for (k, v) in file {
            if k == "scenario" && positional.is_some() {
                continue;
            }
            table.insert(k, v);
        }
        cfg = table.try_into().map_err(|e: toml::de::Error| EiaError::Config(e.message().to_string()))?;
    }
    for o in overrides {
        cfg.set(o)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fig2_preset_values() {
        let c = parse_config(Some("fig2"), None, &[]).unwrap();
        assert_eq!(c.gamma_pcc, 5.0);
        assert_eq!(c.gamma_vcc, 0.025);
        assert_eq!(c.branching_a, 0.816);
        assert_eq!(c.v2_re, 0.1);
        assert!((c.v1_re - 0.816 * 0.1).abs() < 1e-15);
        assert_eq!(c.vp_re, 0.001);
        assert_eq!(c.gamma_g, 0.001);
        assert_eq!((c.delta1, c.delta2), (0.0, 0.0));
    }

    #[test]
    fn fig6_preset_values() {
        let c = parse_config(Some("fig6"), None, &[]).unwrap();
        assert_eq!(c.scenario, Scenario::FilterCurve);
        assert_eq!(c.gamma_vcc, 0.025);
        assert_eq!(c.gamma_pcc, 10.0);
    }

    #[test]
    fn negative_rate_names_the_key() {
        let err = parse_config(Some("at_rest"), None, &["gamma_pcc=-1".into()]).unwrap_err();
        assert!(err.to_string().contains("gamma_pcc"), "{err}");
    }

    #[test]
    fn unknown_key_is_an_error() {
        let err = parse_config(Some("at_rest"), None, &["gamma_pc=1".into()]).unwrap_err();
        assert!(err.to_string().contains("gamma_pc"), "{err}");
        let err = ScenarioConfig::from_toml_str("scenario = \"at_rest\"\nbogus = 2\n").unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn unknown_scenario_is_an_error() {
        assert!(parse_config(Some("fig9"), None, &[]).is_err());
    }

    #[test]
    fn overrides_parse_typed_values() {
        let c = parse_config(
            Some("spectrum_approx"),
            None,
            &["dq_ladder=[0.1, 0.2]".into(), "dq_direction=collinear".into(), "points=11".into()],
        )
        .unwrap();
        assert_eq!(c.dq_ladder, vec![0.1, 0.2]);
        assert_eq!(c.dq_direction, DqDirection::Collinear);
        assert_eq!(c.points, 11);
    }

    #[test]
    fn toml_round_trip_is_idempotent() {
        for p in PRESETS {
            let c = preset(p).unwrap();
            let s1 = c.to_toml_string().unwrap();
            let c2 = ScenarioConfig::from_toml_str(&s1).unwrap();
            assert_eq!(c, c2);
            assert_eq!(s1, c2.to_toml_string().unwrap());
        }
    }

    #[test]
    fn file_values_and_positional_scenario() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "scenario = \"ramsey\"\ngamma_vcc = 0.05\npoints = 5\n").unwrap();
        let c = parse_config(None, Some(&path), &[]).unwrap();
        assert_eq!(c.scenario, Scenario::Ramsey);
        assert_eq!(c.gamma_vcc, 0.05);
        let c = parse_config(Some("at_rest"), Some(&path), &["points=7".into()]).unwrap();
        assert_eq!(c.scenario, Scenario::AtRest);
        assert_eq!(c.points, 7);
    }

    #[test]
    fn scenario_requirements_checked_up_front() {
        assert!(parse_config(Some("fwhm_scan"), None, &[]).is_err());
        assert!(parse_config(Some("ramsey"), None, &["dq_vth=0.1".into()]).is_err());
        assert!(parse_config(Some("filter_curve"), None, &["eta=1.5".into()]).is_err());
    }
}
