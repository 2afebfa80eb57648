//! Scenario dispatch, tabular output and run manifests.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64 as C64;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Scenario, ScenarioConfig};
use crate::error::{EiaError, Result};
use crate::filter::{apply_filter, filter_curve, k_kernels, FilterParams, TransverseProfile};
use crate::lineshape::{dicke_fwhm_model, scan_delta_q, ScanOptions};
use crate::model::{FieldConfig, ModelParams};
use crate::ramsey::{ramsey_spectrum, RamseyConfig};
use crate::spectrum::{at_rest_spectrum, solve_approximate, solve_exact, uniform_grid, SolveReport};

/// Named numeric columns.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    /// Comma-separated with a header row and LF line endings.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "{}", self.columns.join(","))?;
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|&v| format_number(v)).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }

    pub fn write_json(&self, w: impl Write) -> Result<()> {
        serde_json::to_writer_pretty(w, self).map_err(|e| EiaError::Config(e.to_string()))
    }
}

/// Shortest round-trip representation; exponent form outside [1e-4, 1e15).
fn format_number(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// Everything needed to reproduce a run and judge its numerics.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub software: String,
    pub version: String,
    pub scenario: String,
    pub config: ScenarioConfig,
    pub columns: Vec<String>,
    pub rows: usize,
    pub reports: Vec<SolveReport>,
    pub converged: bool,
    pub warnings: Vec<String>,
    pub metadata: BTreeMap<String, Value>,
    pub wall_time_s: f64,
    pub data_file: Option<String>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub table: Table,
    pub manifest: RunManifest,
}

struct Collected {
    table: Table,
    reports: Vec<SolveReport>,
    warnings: Vec<String>,
    metadata: BTreeMap<String, Value>,
}

impl Collected {
    fn new(table: Table) -> Self {
        Self {
            table,
            reports: Vec::new(),
            warnings: Vec::new(),
            metadata: BTreeMap::new(),
        }
    }
}

/// (γ_vcc, δq) combinations of the ladders; an empty ladder keeps the base value.
fn ladder_cases(cfg: &ScenarioConfig) -> Vec<(ModelParams, FieldConfig, Vec<f64>)> {
    let gvs: Vec<Option<f64>> = if cfg.gamma_vcc_ladder.is_empty() {
        vec![None]
    } else {
        cfg.gamma_vcc_ladder.iter().copied().map(Some).collect()
    };
    let dqs: Vec<Option<f64>> = if cfg.dq_ladder.is_empty() {
        vec![None]
    } else {
        cfg.dq_ladder.iter().copied().map(Some).collect()
    };
    let mut out = Vec::new();
    for gv in &gvs {
        for dq in &dqs {
            let mut p = cfg.model();
            let mut f = cfg.fields();
            let mut prefix = Vec::new();
            if let Some(g) = gv {
                p.gamma_vcc = *g;
                prefix.push(*g);
            }
            if let Some(d) = dq {
                f.dq_vth = *d;
                prefix.push(*d);
            }
            out.push((p, f, prefix));
        }
    }
    out
}

fn ladder_columns(cfg: &ScenarioConfig, rest: &[&str]) -> Vec<String> {
    let mut cols = Vec::new();
    if !cfg.gamma_vcc_ladder.is_empty() {
        cols.push("gamma_vcc".to_string());
    }
    if !cfg.dq_ladder.is_empty() {
        cols.push("dq_vth".to_string());
    }
    cols.extend(rest.iter().map(|s| s.to_string()));
    cols
}

fn run_spectrum(cfg: &ScenarioConfig, exact: bool) -> Result<Collected> {
    let quad = cfg.quadrature()?;
    let grid = cfg.detuning_grid()?;
    let mut rest = vec!["deltap", "re_response", "im_response"];
    if !exact {
        rest.extend(["background_im", "pedestal_im", "sharp_peak_im"]);
        if cfg.with_exact {
            rest.extend(["exact_re", "exact_im"]);
        }
    }
    let mut out = Collected::new(Table {
        columns: ladder_columns(cfg, &rest),
        rows: Vec::new(),
    });
    for (p, f, prefix) in ladder_cases(cfg) {
        let (spec, report) = if exact {
            solve_exact(&p, &f, &quad, &grid)?
        } else {
            solve_approximate(&p, &f, &quad, &grid)?
        };
        let exact_spec = if !exact && cfg.with_exact {
            let (s, r) = solve_exact(&p, &f, &quad, &grid)?;
            out.reports.push(r);
            Some(s)
        } else {
            None
        };
        out.reports.push(report);
        for i in 0..spec.len() {
            let mut row = prefix.clone();
            row.extend([spec.detunings[i], spec.response[i].re, spec.response[i].im]);
            if let Some(cs) = &spec.components {
                let c = cs[i];
                row.extend([c.background.im, c.pedestal.im, c.sharp_peak.im]);
            }
            if let Some(e) = &exact_spec {
                row.extend([e.response[i].re, e.response[i].im]);
            }
            out.table.rows.push(row);
        }
    }
    out.metadata.insert("response_normalization".into(), json!("velocity-integrated R_e1g2 / Vp (includes n0)"));
    Ok(out)
}

fn run_at_rest(cfg: &ScenarioConfig) -> Result<Collected> {
    let grid = cfg.detuning_grid()?;
    let spec = at_rest_spectrum(&cfg.model(), &cfg.fields(), &grid)?;
    let mut out = Collected::new(Table::new(&["deltap", "re_response", "im_response"]));
    for (d, r) in spec.detunings.iter().zip(&spec.response) {
        out.table.rows.push(vec![*d, r.re, r.im]);
    }
    Ok(out)
}

fn run_fwhm_scan(cfg: &ScenarioConfig) -> Result<Collected> {
    let quad = cfg.quadrature()?;
    let p = cfg.model();
    let opts = ScanOptions {
        points: cfg.scan_points,
        sharp_window: cfg.scan_sharp_window,
        pedestal_window: cfg.scan_pedestal_window,
        ..ScanOptions::default()
    };
    let rows = scan_delta_q(&p, &cfg.fields(), &quad, &cfg.dq_ladder, &opts)?;
    let mut out = Collected::new(Table::new(&["dq_vth", "fwhm", "peak_abs", "pedestal_fwhm", "model_fwhm"]));
    for r in rows {
        let model = dicke_fwhm_model(p.gamma_vcc, r.dq_vth)?;
        out.table.rows.push(vec![r.dq_vth, r.fwhm, r.peak_absorption, r.pedestal_fwhm, model]);
    }
    out.metadata.insert("sharp_width".into(), json!("FWHM of the sharp-peak (third) component"));
    out.metadata.insert("pedestal_width".into(), json!("FWHM of the pedestal (|V2|^2 G5) component"));
    out.metadata.insert("baseline".into(), json!("mean of the outer 5% of each window"));
    out.metadata.insert("scan_options".into(), serde_json::to_value(opts).unwrap_or(Value::Null));
    Ok(out)
}

fn filter_params(cfg: &ScenarioConfig) -> Result<(FilterParams, ModelParams)> {
    let quad = cfg.quadrature()?;
    let p = cfg.model();
    let mut fp = FilterParams::from_model(&p, &cfg.fields(), &quad, cfg.diffusion_d, cfg.optical_depth_scale)?;
    if let Some(eta) = cfg.eta {
        fp.eta = eta;
    }
    fp.validate()?;
    Ok((fp, p))
}

fn run_filter_curve(cfg: &ScenarioConfig) -> Result<Collected> {
    let (fp, p) = filter_params(cfg)?;
    let ks = uniform_grid(0.0, cfg.k_max, cfg.k_points)?;
    let hom = fp.homogeneous_width(&p);
    let mut out = Collected::new(Table::new(&["deltap_hom", "deltap", "k", "re_l", "im_l"]));
    for &u in &cfg.filter_deltaps {
        let dp = u * hom;
        for (k, l) in ks.iter().zip(filter_curve(&fp, &p, dp, &ks)?) {
            out.table.rows.push(vec![u, dp, *k, l.re, l.im]);
        }
    }
    let kernels = k_kernels(&p, &cfg.fields(), &cfg.quadrature()?)?;
    out.metadata.insert("filter".into(), serde_json::to_value(fp).unwrap_or(Value::Null));
    out.metadata.insert("kernels_at_resonance".into(), serde_json::to_value(kernels).unwrap_or(Value::Null));
    out.metadata.insert("gamma_hom".into(), json!(hom));
    out.metadata.insert("k_units".into(), json!("q_p"));
    Ok(out)
}

fn run_beam_filter(cfg: &ScenarioConfig) -> Result<Collected> {
    let (fp, p) = filter_params(cfg)?;
    let input = match &cfg.profile_path {
        Some(path) => TransverseProfile::load(Path::new(path))?,
        None => {
            let (wn, ww, off) = (cfg.beam_narrow_waist, cfg.beam_wide_waist, cfg.beam_offset);
            let n = cfg.beam_grid;
            TransverseProfile::from_fn(n, n, cfg.beam_dx, cfg.beam_dx, |x, y| {
                let narrow = (-((x + off).powi(2) + y * y) / (2.0 * wn * wn)).exp();
                let wide = (-((x - off).powi(2) + y * y) / (2.0 * ww * ww)).exp();
                C64::new(narrow + wide, 0.0)
            })?
        }
    };
    let mut field = input.clone();
    for _ in 0..cfg.slices {
        field = apply_filter(&field, &fp, &p, cfg.filter_deltap, cfg.slice_length)?;
    }
    let mut out = Collected::new(Table::new(&["x", "y", "re_in", "im_in", "re_out", "im_out"]));
    for iy in 0..input.ny {
        let y = (iy as f64 - (input.ny / 2) as f64) * input.dy;
        for ix in 0..input.nx {
            let x = (ix as f64 - (input.nx / 2) as f64) * input.dx;
            let (a, b) = (input.at(ix, iy), field.at(ix, iy));
            out.table.rows.push(vec![x, y, a.re, a.im, b.re, b.im]);
        }
    }
    out.metadata.insert("filter".into(), serde_json::to_value(fp).unwrap_or(Value::Null));
    out.metadata.insert("power_in".into(), json!(input.power()));
    out.metadata.insert("power_out".into(), json!(field.power()));
    out.metadata.insert("grid".into(), json!({"nx": input.nx, "ny": input.ny, "dx": input.dx, "dy": input.dy}));
    out.metadata.insert("length_units".into(), json!("1/q_p"));
    Ok(out)
}

fn run_ramsey(cfg: &ScenarioConfig) -> Result<Collected> {
    let quad = cfg.quadrature()?;
    let grid = cfg.detuning_grid()?;
    let mut out = Collected::new(Table::new(&["half_width_m", "deltap", "re_response", "im_response"]));
    let units = cfg.units();
    let mut sheets = Vec::new();
    for &a in &cfg.half_widths {
        let rc = RamseyConfig {
            params: cfg.model(),
            fields: cfg.fields(),
            half_width: a,
            units,
            diffusion_d: cfg.diffusion_d,
        };
        let spec = ramsey_spectrum(&rc, &quad, &grid)?;
        for (d, r) in spec.detunings.iter().zip(&spec.response) {
            out.table.rows.push(vec![a, *d, r.re, r.im]);
        }
        sheets.push(json!({"half_width_m": a, "half_width_scaled": rc.half_width_scaled()}));
    }
    let rc = RamseyConfig::new(cfg.model(), cfg.fields(), cfg.half_widths[0]);
    out.metadata.insert(
        "units".into(),
        json!({
            "q_p_per_m": units.q_p(),
            "gamma_per_s": units.gamma_rate(cfg.qp_vth),
            "v_th_m_s": units.v_th,
            "wavelength_m": units.wavelength,
            "diffusion_d_scaled": cfg.diffusion_d.unwrap_or(rc.diffusion()),
            "length_unit": "1/q_p",
        }),
    );
    out.metadata.insert("sheets".into(), Value::Array(sheets));
    out.metadata.insert("response".into(), json!("beam average of R_e1g2 / Vp over |x| <= a"));
    Ok(out)
}

/// Runs the configured scenario without touching the filesystem (except to
/// read an input profile).
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let start = Instant::now();
    let collected = match cfg.scenario {
        Scenario::SpectrumExact => run_spectrum(cfg, true)?,
        Scenario::SpectrumApprox => run_spectrum(cfg, false)?,
        Scenario::AtRest => run_at_rest(cfg)?,
        Scenario::FwhmScan => run_fwhm_scan(cfg)?,
        Scenario::FilterCurve => run_filter_curve(cfg)?,
        Scenario::BeamFilter => run_beam_filter(cfg)?,
        Scenario::Ramsey => run_ramsey(cfg)?,
    };
    let mut warnings = collected.warnings;
    for r in &collected.reports {
        warnings.extend(r.warnings.iter().cloned());
    }
    let mut metadata = collected.metadata;
    metadata.insert("quadrature".into(), json!(cfg.quadrature()?.describe()));
    metadata.insert("fit_weights".into(), json!("uniform"));
    let manifest = RunManifest {
        software: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        scenario: cfg.scenario.name().to_string(),
        config: cfg.clone(),
        columns: collected.table.columns.clone(),
        rows: collected.table.rows.len(),
        converged: collected.reports.iter().all(|r| r.converged),
        reports: collected.reports,
        warnings,
        metadata,
        wall_time_s: start.elapsed().as_secs_f64(),
        data_file: None,
    };
    Ok(RunOutput {
        table: collected.table,
        manifest,
    })
}

/// `<data>.manifest.json` next to the data file.
pub fn manifest_path(data: &Path) -> PathBuf {
    data.with_extension("manifest.json")
}

/// Runs the scenario and writes the data file and its manifest.
pub fn execute(cfg: &ScenarioConfig, data_path: &Path) -> Result<(PathBuf, PathBuf)> {
    let mut output = run_scenario(cfg)?;
    let mut f = std::io::BufWriter::new(std::fs::File::create(data_path)?);
    match cfg.format {
        crate::config::OutputFormat::Csv => output.table.write_csv(&mut f)?,
        crate::config::OutputFormat::Json => output.table.write_json(&mut f)?,
    }
    f.flush()?;
    output.manifest.data_file = Some(data_path.display().to_string());
    let mpath = manifest_path(data_path);
    let m = std::fs::File::create(&mpath)?;
    serde_json::to_writer_pretty(m, &output.manifest).map_err(|e| EiaError::Config(e.to_string()))?;
    Ok((data_path.to_path_buf(), mpath))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    #[test]
    fn at_rest_table_contract() {
        let cfg = parse_config(Some("at_rest"), None, &["points=37".into()]).unwrap();
        let out = run_scenario(&cfg).unwrap();
        assert_eq!(out.table.columns, ["deltap", "re_response", "im_response"]);
        assert_eq!(out.table.rows.len(), 37);
        let mut csv = Vec::new();
        out.table.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("deltap,re_response,im_response\n"));
        assert_eq!(text.lines().count(), 38);
        assert!(!text.contains('\r'));
    }

    #[test]
    fn number_format_round_trips() {
        for v in [0.0, 1.5, -2.25e-9, 3.0e20, 0.001, 123456.789] {
            assert_eq!(format_number(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn spectrum_ladder_columns() {
        let cfg = parse_config(
            Some("spectrum_approx"),
            None,
            &["points=5".into(), "gamma_vcc_ladder=[0.025, 0.1]".into(), "deltap_max=0.05".into(), "deltap_min=-0.05".into()],
        )
        .unwrap();
        let out = run_scenario(&cfg).unwrap();
        assert_eq!(out.table.columns[0], "gamma_vcc");
        assert_eq!(out.table.rows.len(), 10);
        assert!(out.manifest.converged);
    }
}
