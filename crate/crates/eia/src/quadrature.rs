//! Averages over the thermal velocity distribution.
//!
//! Two rules are available. `QuadratureGrid` is a fixed Gauss–Hermite
//! product rule against the unit-variance Gaussian. `AdaptiveRule` is a
//! vector-valued adaptive Gauss–Kronrod (G7/K15) rule on a truncated
//! interval, which resolves the near-real-axis poles of the Doppler
//! integrands (distance Γ̃/(q_p v_th), a few percent of v_th) that a fixed
//! Hermite grid of modest size cannot.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, EiaError, Result};
use crate::model::{DqDirection, FieldConfig};

/// Largest accepted Gauss–Hermite order.
pub const MAX_NODES: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureGrid {
    /// (velocity, weight) along q_p; weights sum to one.
    pub nodes_par: Vec<(f64, f64)>,
    /// (velocity, weight) along δq.
    pub nodes_res: Vec<(f64, f64)>,
    pub n_par: usize,
    pub n_res: usize,
    /// When set, every average is repeated on a grid with doubled node
    /// counts and must agree to this relative tolerance.
    pub check_rtol: Option<f64>,
}

/// Default tolerance of the Gauss–Hermite doubling check.
pub const HERMITE_CHECK_RTOL: f64 = 1e-7;

pub fn make_grid(n_par: usize, n_res: usize) -> Result<QuadratureGrid> {
    for (key, n) in [("n_par", n_par), ("n_res", n_res)] {
        if n == 0 {
            return Err(invalid(key, "node count must be >= 1"));
        }
        if n > MAX_NODES {
            return Err(invalid(key, format!("node count {n} exceeds {MAX_NODES}")));
        }
    }
    Ok(QuadratureGrid {
        nodes_par: gauss_hermite_normal(n_par)?,
        nodes_res: gauss_hermite_normal(n_res)?,
        n_par,
        n_res,
        check_rtol: Some(HERMITE_CHECK_RTOL),
    })
}

/// Gauss–Hermite nodes and weights for the standard normal density.
///
/// Newton iteration on the orthonormal Hermite recurrence, started from the
/// WKB estimate of each zero, with running rescaling so that large orders
/// neither overflow nor lose the node.
fn gauss_hermite_normal(n: usize) -> Result<Vec<(f64, f64)>> {
    const PIM4: f64 = 0.751_125_544_464_942_5; // π^(-1/4)
    const SCALE: f64 = 1e150;
    let nf = n as f64;
    let m = n.div_ceil(2);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..m {
        let mut z = wkb_zero_guess(n, i + 1);
        let mut converged = false;
        let mut pp = 0.0;
        let mut log_scale = 0.0;
        for _ in 0..200 {
            let mut p1 = PIM4;
            let mut p2 = 0.0;
            log_scale = 0.0;
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
                if p1.abs() > SCALE {
                    p1 /= SCALE;
                    p2 /= SCALE;
                    log_scale += SCALE.ln();
                }
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(EiaError::NonConvergence(format!(
                "Gauss-Hermite root {i} of order {n}"
            )));
        }
        let wi = (2.0_f64.ln() - 2.0 * (pp.abs().ln() + log_scale)).exp();
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if x.windows(2).any(|p| !(p[0] > p[1])) {
        return Err(EiaError::NonConvergence(format!(
            "Gauss-Hermite order {n}: zeros not separated"
        )));
    }
    let norm = std::f64::consts::PI.sqrt();
    Ok(x
        .iter()
        .zip(&w)
        .rev()
        .map(|(&xi, &wi)| (std::f64::consts::SQRT_2 * xi, wi / norm))
        .collect())
}

/// k-th largest zero of H_n from the WKB phase condition
/// (ν/2)(φ − sin φ cos φ) = (k − 1/4)π with x = √ν cos φ, ν = 2n + 1.
fn wkb_zero_guess(n: usize, k: usize) -> f64 {
    let nu = 2.0 * n as f64 + 1.0;
    let target = 2.0 * std::f64::consts::PI * (k as f64 - 0.25) / nu;
    let mut phi = target.cbrt().min(std::f64::consts::FRAC_PI_2);
    for _ in 0..100 {
        let f = phi - phi.sin() * phi.cos() - target;
        let d = 2.0 * phi.sin().powi(2);
        let step = f / d.max(1e-300);
        phi = (phi - step).clamp(1e-12, std::f64::consts::FRAC_PI_2);
        if step.abs() < 1e-15 {
            break;
        }
    }
    nu.sqrt() * phi.cos()
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
/// Gauss weights at XGK[1], XGK[3], XGK[5] and the centre.
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveRule {
    /// Relative tolerance per output component.
    pub rtol: f64,
    /// Components smaller than this fraction of the largest one are held
    /// to an absolute tolerance instead.
    pub floor: f64,
    /// Integration range is [-half_range, half_range] in units of v_th.
    pub half_range: f64,
    pub initial_panels: usize,
    pub max_panels: usize,
}

impl Default for AdaptiveRule {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            floor: 1e-8,
            half_range: 9.0,
            initial_panels: 16,
            max_panels: 20_000,
        }
    }
}

impl AdaptiveRule {
    pub fn with_rtol(rtol: f64) -> Self {
        Self {
            rtol,
            ..Self::default()
        }
    }
}

/// How velocity averages are evaluated.
#[derive(Debug, Clone, PartialEq)]
pub enum Quadrature {
    Hermite(QuadratureGrid),
    Adaptive(AdaptiveRule),
}

impl Default for Quadrature {
    fn default() -> Self {
        Quadrature::Adaptive(AdaptiveRule::default())
    }
}

impl Quadrature {
    pub fn describe(&self) -> String {
        match self {
            Quadrature::Hermite(g) => format!("gauss-hermite({}x{})", g.n_par, g.n_res),
            Quadrature::Adaptive(r) => format!("adaptive-gk15(rtol={:e})", r.rtol),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct QuadStats {
    pub evaluations: usize,
    pub panels: usize,
    pub converged: bool,
}

impl QuadStats {
    fn merge(&mut self, other: QuadStats) {
        self.evaluations += other.evaluations;
        self.panels = self.panels.max(other.panels);
        self.converged &= other.converged;
    }
}

fn normal_pdf(v: f64) -> f64 {
    (-0.5 * v * v).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

struct Panel<const N: usize> {
    a: f64,
    b: f64,
    value: [C64; N],
    error: [f64; N],
    score: f64,
}

impl<const N: usize> PartialEq for Panel<N> {
    fn eq(&self, other: &Self) -> bool {
        self.score == other.score
    }
}
impl<const N: usize> Eq for Panel<N> {}
impl<const N: usize> PartialOrd for Panel<N> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<const N: usize> Ord for Panel<N> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.score.total_cmp(&other.score)
    }
}

fn gk15<const N: usize, F>(f: &mut F, a: f64, b: f64) -> Result<([C64; N], [f64; N])>
where
    F: FnMut(f64) -> Result<[C64; N]>,
{
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let zero = C64::new(0.0, 0.0);
    let mut kron = [zero; N];
    let mut gauss = [zero; N];
    let fc = f(c)?;
    let wc = normal_pdf(c);
    for k in 0..N {
        kron[k] = fc[k] * (WGK[7] * wc);
        gauss[k] = fc[k] * (WG[3] * wc);
    }
    for j in 0..7 {
        let dx = h * XGK[j];
        let (x1, x2) = (c - dx, c + dx);
        let (f1, f2) = (f(x1)?, f(x2)?);
        let (w1, w2) = (normal_pdf(x1), normal_pdf(x2));
        for k in 0..N {
            let s = f1[k] * w1 + f2[k] * w2;
            kron[k] += s * WGK[j];
            if j % 2 == 1 {
                gauss[k] += s * WG[j / 2];
            }
        }
    }
    let mut err = [0.0; N];
    for k in 0..N {
        kron[k] *= h;
        gauss[k] *= h;
        err[k] = (kron[k] - gauss[k]).norm();
    }
    Ok((kron, err))
}

/// ∫ φ(v) f(v) dv with φ the standard normal density, by adaptive G7/K15.
pub fn integrate_normal<const N: usize, F>(rule: &AdaptiveRule, mut f: F) -> Result<([C64; N], QuadStats)>
where
    F: FnMut(f64) -> Result<[C64; N]>,
{
    let zero = C64::new(0.0, 0.0);
    let l = rule.half_range;
    let n0 = rule.initial_panels.max(1);
    let width = 2.0 * l / n0 as f64;
    let mut heap: BinaryHeap<Panel<N>> = BinaryHeap::new();
    let mut total = [zero; N];
    let mut total_err = [0.0; N];
    let mut evaluations = 0;
    let mut panels = Vec::with_capacity(n0);
    for p in 0..n0 {
        let a = -l + width * p as f64;
        let b = if p + 1 == n0 { l } else { a + width };
        let (value, error) = gk15(&mut f, a, b)?;
        evaluations += 15;
        for k in 0..N {
            total[k] += value[k];
            total_err[k] += error[k];
        }
        panels.push((a, b, value, error));
    }
    let tolerances = |total: &[C64; N]| -> [f64; N] {
        let scale = total.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let mut tol = [0.0; N];
        for k in 0..N {
            tol[k] = rule.rtol * total[k].norm() + rule.floor * rule.rtol * scale + f64::MIN_POSITIVE;
        }
        tol
    };
    let score = |error: &[f64; N], tol: &[f64; N]| -> f64 {
        error
            .iter()
            .zip(tol)
            .map(|(e, t)| e / t)
            .fold(0.0, f64::max)
    };
    let tol = tolerances(&total);
    for (a, b, value, error) in panels {
        let s = score(&error, &tol);
        heap.push(Panel { a, b, value, error, score: s });
    }
    loop {
        let tol = tolerances(&total);
        let done = (0..N).all(|k| total_err[k] <= tol[k]);
        if done {
            return Ok((
                total,
                QuadStats {
                    evaluations,
                    panels: heap.len(),
                    converged: true,
                },
            ));
        }
        if heap.len() >= rule.max_panels {
            return Err(EiaError::NonConvergence(format!(
                "adaptive rule reached {} panels; worst relative error {:.3e}",
                heap.len(),
                (0..N)
                    .map(|k| total_err[k] / tol[k] * rule.rtol)
                    .fold(0.0, f64::max)
            )));
        }
        let worst = match heap.pop() {
            Some(p) => p,
            None => unreachable!("panel heap is never empty"),
        };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            return Err(EiaError::NonConvergence(
                "panel width reached floating-point resolution".into(),
            ));
        }
        for k in 0..N {
            total[k] -= worst.value[k];
            total_err[k] -= worst.error[k];
        }
        for (a, b) in [(worst.a, mid), (mid, worst.b)] {
            let (value, error) = gk15(&mut f, a, b)?;
            evaluations += 15;
            for k in 0..N {
                total[k] += value[k];
                total_err[k] += error[k];
            }
            let s = score(&error, &tol);
            heap.push(Panel { a, b, value, error, score: s });
        }
        // Guard against the running error sum drifting negative.
        for e in total_err.iter_mut() {
            *e = e.max(0.0);
        }
    }
}

/// Thermal average ⟨f(v_par, v_res)⟩ for the geometry in `fields`.
///
/// Without a residual mismatch, or for collinear mismatch, the average is
/// one-dimensional (v_res = 0 or v_res = v_par). A transverse mismatch adds
/// an independent Gaussian axis, integrated as an outer average.
pub fn velocity_average<const N: usize, F>(
    quad: &Quadrature,
    fields: &FieldConfig,
    mut f: F,
) -> Result<([C64; N], QuadStats)>
where
    F: FnMut(f64, f64) -> [C64; N],
{
    let collinear = fields.dq_direction == DqDirection::Collinear;
    let two_d = fields.needs_residual_axis();
    match quad {
        Quadrature::Hermite(grid) => match grid.check_rtol {
            Some(rtol) => hermite_with_doubling_check(grid, fields, rtol, &mut f),
            None => Ok(hermite_sum(grid, fields, &mut f)),
        },
        Quadrature::Adaptive(rule) => {
            if !two_d {
                return integrate_normal(rule, |v| Ok(f(v, if collinear { v } else { 0.0 })));
            }
            let inner = AdaptiveRule {
                rtol: 0.1 * rule.rtol,
                ..*rule
            };
            let mut stats = QuadStats {
                converged: true,
                ..Default::default()
            };
            let (value, outer) = integrate_normal(rule, |vr| {
                let (val, s) = integrate_normal(&inner, |vp| Ok(f(vp, vr)))?;
                stats.merge(s);
                Ok(val)
            })?;
            stats.merge(outer);
            Ok((value, stats))
        }
    }
}

fn hermite_sum<const N: usize, F>(grid: &QuadratureGrid, fields: &FieldConfig, f: &mut F) -> ([C64; N], QuadStats)
where
    F: FnMut(f64, f64) -> [C64; N],
{
    let collinear = fields.dq_direction == DqDirection::Collinear;
    let res_nodes: &[(f64, f64)] = if fields.needs_residual_axis() {
        &grid.nodes_res
    } else {
        &[(0.0, 1.0)]
    };
    let mut acc = [C64::new(0.0, 0.0); N];
    for &(vr, wr) in res_nodes {
        for &(vp, wp) in &grid.nodes_par {
            let v_res = if collinear { vp } else { vr };
            let val = f(vp, v_res);
            for k in 0..N {
                acc[k] += val[k] * (wr * wp);
            }
        }
    }
    let stats = QuadStats {
        evaluations: grid.n_par * res_nodes.len(),
        panels: 0,
        converged: true,
    };
    (acc, stats)
}

/// Hermite average repeated with doubled node counts; errors when the two
/// differ by more than `rtol` in any component.
fn hermite_with_doubling_check<const N: usize, F>(
    grid: &QuadratureGrid,
    fields: &FieldConfig,
    rtol: f64,
    f: &mut F,
) -> Result<([C64; N], QuadStats)>
where
    F: FnMut(f64, f64) -> [C64; N],
{
    let coarse = hermite_sum(grid, fields, f);
    let fine_grid = make_grid(
        (2 * grid.n_par).min(MAX_NODES),
        (2 * grid.n_res).min(MAX_NODES),
    )?;
    let fine = hermite_sum(&fine_grid, fields, f);
    let scale = fine.0.iter().map(|z| z.norm()).fold(0.0, f64::max);
    for k in 0..N {
        let diff = (fine.0[k] - coarse.0[k]).norm();
        if diff > rtol * fine.0[k].norm().max(1e-8 * scale) {
            return Err(EiaError::NonConvergence(format!(
                "Gauss-Hermite {}x{} vs doubled grid differ by {:.3e} (component {k})",
                grid.n_par,
                grid.n_res,
                diff / fine.0[k].norm().max(f64::MIN_POSITIVE)
            )));
        }
    }
    let mut stats = fine.1;
    stats.evaluations += coarse.1.evaluations;
    Ok((fine.0, stats))
}
