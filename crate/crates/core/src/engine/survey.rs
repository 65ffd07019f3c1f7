//! Multi-mode surveys: locate, window, fit and classify every resonance in a
//! band, either on a model assembly or on a measured/synthetic trace.

use serde::{Deserialize, Serialize};

use super::fit::{all_params, fit_resonance, mode_index, seed_fit, FitOptions, ResonanceFitResult};
use super::resonances::{find_dips, half_depth_width, locate_modes, nearest_mode, Dip};
use crate::abcd::{external_q, total_q, PortSpec};
use crate::error::{Error, Result};
use crate::sweep::{linspace, SweepResult};
use crate::topology::{CurrentClass, ResonatorTopology};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeRecord {
    pub n: u32,
    pub f_n: f64,
    pub q_i_n: f64,
    pub current_class: CurrentClass,
    /// `|I(interface)| / max |I|` for the mode's standing wave.
    pub current_ratio: f64,
    pub converged: bool,
    /// Set when the mode could not be fitted; `q_i_n` is then NaN.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<ResonanceFitResult>,
}

impl ModeRecord {
    pub fn is_ok(&self) -> bool {
        self.error.is_none() && self.q_i_n.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SurveyOptions {
    pub fit: FitOptions,
    /// Smallest half-span of the first local sweep around a model mode,
    /// relative to its frequency. Narrower probes start at ten estimated
    /// linewidths.
    pub probe_span: f64,
    pub probe_points: usize,
    /// Dip threshold on noiseless model sweeps. Strongly undercoupled modes
    /// are shallow, so this is far below the threshold used on real traces.
    pub model_min_dip_db: f64,
}

impl Default for SurveyOptions {
    fn default() -> Self {
        Self {
            fit: FitOptions::default(),
            probe_span: 1e-6,
            probe_points: 2001,
            model_min_dip_db: 1e-3,
        }
    }
}

/// Surveys one assembly geometry repeatedly. Resonance positions depend only
/// on the lossless geometry, so they are located once and reused while the
/// losses change. Each fit starts fresh, so a survey depends only on the
/// topology it is given.
#[derive(Debug, Clone)]
pub struct ModeSurveyor {
    geometry: ResonatorTopology,
    port: PortSpec,
    opts: SurveyOptions,
    modes: Vec<f64>,
}

impl ModeSurveyor {
    pub fn new(topology: &ResonatorTopology, f_lo: f64, f_hi: f64, port: &PortSpec, opts: &SurveyOptions) -> Result<Self> {
        if !(f_lo > 0.0 && f_lo < f_hi) {
            return Err(Error::Usage(format!("survey band [{f_lo}, {f_hi}] is empty")));
        }
        topology.validate()?;
        let mut opts = *opts;
        opts.fit.min_dip_db = opts.model_min_dip_db;
        opts.fit.validate()?;
        let modes = locate_modes(topology, f_lo, f_hi, port)?;
        Ok(Self {
            geometry: topology.lossless(),
            port: *port,
            opts,
            modes,
        })
    }

    pub fn mode_frequencies(&self) -> &[f64] {
        &self.modes
    }

    /// Fits every located mode of `topology`, which must share the surveyor's
    /// lossless geometry.
    pub fn survey(&self, topology: &ResonatorTopology) -> Result<Vec<ModeRecord>> {
        if topology.lossless() != self.geometry {
            return Err(Error::Usage("topology geometry differs from the surveyed one".into()));
        }
        let template: ResonatorTopology = topology.bare_equivalent().into();
        let mut out = Vec::with_capacity(self.modes.len());
        for &f_r in &self.modes {
            out.push(self.survey_mode(topology, &template, f_r));
        }
        out.sort_by_key(|r| r.n);
        Ok(out)
    }

    fn survey_mode(
        &self,
        topology: &ResonatorTopology,
        template: &ResonatorTopology,
        f_r: f64,
    ) -> ModeRecord {
        let (current_ratio, current_class) = match topology.interface_current_ratio(f_r, &self.port) {
            Ok(r) => (r, CurrentClass::from_ratio(r)),
            Err(_) => (f64::NAN, CurrentClass::Intermediate),
        };
        let fallback_n = ((f_r / topology.fsr()).round() as u32).max(1);
        match self.fit_mode(topology, template, f_r) {
            Ok(fit) => ModeRecord {
                n: fit.mode_n,
                f_n: fit.f0,
                q_i_n: fit.q_i,
                current_class,
                current_ratio,
                converged: fit.converged,
                error: None,
                fit: Some(fit),
            },
            Err(e) => {
                log::debug!("mode near {f_r:.6e} Hz failed: {e}");
                ModeRecord {
                    n: fallback_n,
                    f_n: f_r,
                    q_i_n: f64::NAN,
                    current_class,
                    current_ratio,
                    converged: false,
                    error: Some(e.to_string()),
                    fit: None,
                }
            }
        }
    }

    fn fit_mode(
        &self,
        topology: &ResonatorTopology,
        template: &ResonatorTopology,
        f_r: f64,
    ) -> Result<ResonanceFitResult> {
        let q_e = external_q(mode_index(f_r, topology.fsr()), f_r, topology.c_in(), self.port.z0);
        let q_i = topology.cable().internal_q.unwrap_or(f64::INFINITY);
        let start = (10.0 * f_r / total_q(q_i, q_e)).max(self.opts.probe_span * f_r);
        let fwhm = self.probe_linewidth(topology, f_r, start)?;
        let half = self.opts.fit.window_linewidths * fwhm;
        let centre = nearest_dip(topology, f_r, half, &self.port)?;
        let grid = linspace(centre - half, centre + half, self.opts.fit.min_points);
        let window = topology.sweep(&grid, &self.port)?;
        let seed = seed_fit(&window, template, &self.port, None, &self.opts.fit)?;
        fit_resonance(&window, template, &all_params(), &seed, &self.opts.fit, &self.port)
    }

    /// Half-depth width of the dip near `f_r`, from local sweeps that widen
    /// or narrow until the dip is resolved.
    fn probe_linewidth(&self, topology: &ResonatorTopology, f_r: f64, start: f64) -> Result<f64> {
        let cap = 0.25 * topology.fsr();
        let mut half = start.min(cap);
        for _ in 0..12 {
            let grid = linspace(f_r - half, f_r + half, self.opts.probe_points);
            let step = grid[1] - grid[0];
            let s = topology.sweep(&grid, &self.port)?;
            let p = s.power();
            let dips = find_dips(&s, self.opts.fit.min_dip_db, 2.0 * half);
            let Some(dip) = dips.first() else {
                if half >= cap {
                    return Err(Error::NoResonance);
                }
                half = (half * 4.0).min(cap);
                continue;
            };
            let w = half_depth_width(&grid, &p, dip.index, dip.baseline);
            if w > 0.2 * half && half < cap {
                half = (half * 4.0).min(cap);
            } else if w < 40.0 * step {
                half = (w * 20.0).max(half / 50.0);
            } else {
                return Ok(w);
            }
        }
        Err(Error::Calibration(format!("could not resolve the linewidth near {f_r:.6e} Hz")))
    }
}

/// |S11| minimum of the lossy assembly within `±half` of `f_r`.
fn nearest_dip(topology: &ResonatorTopology, f_r: f64, half: f64, port: &PortSpec) -> Result<f64> {
    let grid = linspace(f_r - half, f_r + half, 801);
    let s = topology.sweep(&grid, port)?;
    let p = s.power();
    let i = (0..p.len()).min_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap();
    Ok(grid[i])
}

/// Fits every mode of `topology` in `[f_lo, f_hi]`.
pub fn mode_survey(topology: &ResonatorTopology, f_lo: f64, f_hi: f64, port: &PortSpec) -> Result<Vec<ModeRecord>> {
    mode_survey_with(topology, f_lo, f_hi, port, &SurveyOptions::default())
}

pub fn mode_survey_with(
    topology: &ResonatorTopology,
    f_lo: f64,
    f_hi: f64,
    port: &PortSpec,
    opts: &SurveyOptions,
) -> Result<Vec<ModeRecord>> {
    ModeSurveyor::new(topology, f_lo, f_hi, port, opts)?.survey(topology)
}

/// Finds and fits every dip of a measured or synthetic trace. `template`
/// supplies the fit model and the geometry used to classify each mode.
pub fn survey_trace(
    sweep: &SweepResult,
    template: &ResonatorTopology,
    port: &PortSpec,
    opts: &FitOptions,
) -> Result<Vec<ModeRecord>> {
    sweep.validate()?;
    opts.validate()?;
    let fsr_model = template.fsr();
    let dips = find_dips(sweep, opts.min_dip_db, 0.25 * fsr_model);
    let fsr_hint = fsr_estimate(&dips.iter().map(|d| d.f0).collect::<Vec<_>>());
    let fit_template: ResonatorTopology = template.bare_equivalent().into();
    let mut out = Vec::new();
    for d in &dips {
        let (current_ratio, current_class) = nearest_mode(template, d.f0, port)
            .and_then(|f| template.interface_current_ratio(f, port))
            .map(|r| (r, CurrentClass::from_ratio(r)))
            .unwrap_or((f64::NAN, CurrentClass::Intermediate));
        let fitted = fit_dip(sweep, d, &fit_template, port, fsr_hint, opts);
        out.push(match fitted {
            Ok(fit) => ModeRecord {
                n: fit.mode_n,
                f_n: fit.f0,
                q_i_n: fit.q_i,
                current_class,
                current_ratio,
                converged: fit.converged,
                error: None,
                fit: Some(fit),
            },
            Err(e) => ModeRecord {
                n: ((d.f0 / fsr_hint.unwrap_or(fsr_model)).round() as u32).max(1),
                f_n: d.f0,
                q_i_n: f64::NAN,
                current_class,
                current_ratio,
                converged: false,
                error: Some(e.to_string()),
                fit: None,
            },
        });
    }
    out.sort_by_key(|r| r.n);
    Ok(out)
}

/// Seeds and fits the resonance behind `dip`, on a window of
/// `±window_linewidths` half-depth widths widened until it holds
/// `min_points` samples (or reaches 40% of the mode spacing).
pub fn fit_dip(
    sweep: &SweepResult,
    dip: &Dip,
    template: &ResonatorTopology,
    port: &PortSpec,
    fsr_hint: Option<f64>,
    opts: &FitOptions,
) -> Result<ResonanceFitResult> {
    let cap = 0.4 * fsr_hint.unwrap_or_else(|| template.fsr());
    let mut half = (opts.window_linewidths * dip.fwhm).min(cap);
    let mut window = sweep.window(dip.f0 - half, dip.f0 + half);
    while window.len() < opts.min_points && half < cap {
        half = (half * 1.5).min(cap);
        window = sweep.window(dip.f0 - half, dip.f0 + half);
    }
    if window.len() < 16 {
        return Err(Error::NoResonance);
    }
    let seed = seed_fit(&window, template, port, fsr_hint, opts)?;
    fit_resonance(&window, template, &all_params(), &seed, opts, port)
}

/// Mode spacing from adjacent resonance frequencies: the mean of the gaps
/// shorter than 1.5 times the smallest, so that alternating spacings average
/// out and gaps left by missing modes are ignored.
pub fn fsr_estimate(f: &[f64]) -> Option<f64> {
    let gaps: Vec<f64> = f.windows(2).map(|w| w[1] - w[0]).collect();
    let smallest = gaps.iter().copied().fold(f64::INFINITY, f64::min);
    let kept: Vec<f64> = gaps.into_iter().filter(|&g| g < 1.5 * smallest).collect();
    (!kept.is_empty()).then(|| kept.iter().sum::<f64>() / kept.len() as f64)
}

/// `f_n − (n·fsr + offset)` with the offset fitted by least squares.
pub fn fsr_residuals(modes: &[ModeRecord], fsr: f64) -> Result<Vec<f64>> {
    if modes.len() < 2 {
        return Err(Error::Usage("FSR residuals need at least two modes".into()));
    }
    let offset = modes.iter().map(|m| m.f_n - m.n as f64 * fsr).sum::<f64>() / modes.len() as f64;
    Ok(modes.iter().map(|m| m.f_n - (m.n as f64 * fsr + offset)).collect())
}

/// Arithmetic mean of the fitted `Q_i` over successful modes in `[f_lo, f_hi]`
/// whose class passes `keep`.
pub fn mean_q(modes: &[ModeRecord], f_lo: f64, f_hi: f64, keep: impl Fn(CurrentClass) -> bool) -> Option<f64> {
    let q: Vec<f64> = modes
        .iter()
        .filter(|m| m.is_ok() && m.f_n >= f_lo && m.f_n <= f_hi && keep(m.current_class))
        .map(|m| m.q_i_n)
        .collect();
    (!q.is_empty()).then(|| q.iter().sum::<f64>() / q.len() as f64)
}
