//! Synthetic traces: model sweeps with optional complex Gaussian noise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::abcd::{external_q, total_q, PortSpec, C64};
use crate::engine::fit::mode_index;
use crate::engine::resonances::locate_modes;
use crate::error::{Error, Result};
use crate::sweep::{check_grid, linspace, SweepResult};
use crate::topology::ResonatorTopology;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    None,
    #[default]
    AdditiveComplexGaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    /// Standard deviation of each quadrature.
    pub sigma: f64,
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            kind: NoiseKind::AdditiveComplexGaussian,
            sigma: 0.005,
            seed: 0,
        }
    }
}

impl NoiseModel {
    pub fn none() -> Self {
        Self {
            kind: NoiseKind::None,
            sigma: 0.0,
            seed: 0,
        }
    }

    pub fn gaussian(sigma: f64, seed: u64) -> Self {
        Self {
            kind: NoiseKind::AdditiveComplexGaussian,
            sigma,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::validation("noise.sigma", "must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Frequency grid for a synthetic sweep.
#[derive(Debug, Clone, PartialEq)]
pub enum GridSpec {
    Uniform { f_min: f64, f_max: f64, points: usize },
    /// Equal-step windows of `±linewidths` estimated linewidths around every
    /// mode in the band, concatenated.
    ModeWindows {
        f_min: f64,
        f_max: f64,
        linewidths: f64,
        points_per_mode: usize,
    },
    Explicit(Vec<f64>),
}

impl GridSpec {
    pub fn frequencies(&self, topology: &ResonatorTopology, port: &PortSpec) -> Result<Vec<f64>> {
        let grid = match self {
            Self::Uniform { f_min, f_max, points } => {
                if *points < 2 {
                    return Err(Error::validation("sweep.points", "must be >= 2"));
                }
                linspace(*f_min, *f_max, *points)
            }
            Self::ModeWindows {
                f_min,
                f_max,
                linewidths,
                points_per_mode,
            } => mode_windows(topology, *f_min, *f_max, *linewidths, *points_per_mode, port)?,
            Self::Explicit(f) => f.clone(),
        };
        check_grid(&grid)?;
        Ok(grid)
    }
}

fn mode_windows(
    topology: &ResonatorTopology,
    f_min: f64,
    f_max: f64,
    linewidths: f64,
    points: usize,
    port: &PortSpec,
) -> Result<Vec<f64>> {
    if points < 2 {
        return Err(Error::validation("sweep.points", "must be >= 2"));
    }
    let fsr = topology.fsr();
    let q_i = topology.cable().internal_q.unwrap_or(f64::INFINITY);
    let mut grid: Vec<f64> = Vec::new();
    for f in locate_modes(topology, f_min, f_max, port)? {
        let q_e = external_q(mode_index(f, fsr), f, topology.c_in(), port.z0);
        let half = (linewidths * f / total_q(q_i, q_e)).min(0.4 * fsr);
        for x in linspace(f - half, f + half, points) {
            if grid.last().map_or(true, |&last| x > last) {
                grid.push(x);
            }
        }
    }
    if grid.len() < 2 {
        return Err(Error::NoResonance);
    }
    Ok(grid)
}

/// SHA-256 of the topology's canonical JSON, hex encoded.
pub fn topology_hash(topology: &ResonatorTopology) -> String {
    let json = serde_json::to_vec(topology).expect("topology serialises");
    hex::encode(Sha256::digest(&json))
}

/// Model sweep plus independent complex Gaussian noise per point.
pub fn synthesize(
    topology: &ResonatorTopology,
    grid: &GridSpec,
    noise: &NoiseModel,
    port: &PortSpec,
) -> Result<SweepResult> {
    topology.validate()?;
    noise.validate()?;
    let freqs = grid.frequencies(topology, port)?;
    let mut sweep = topology.sweep(&freqs, port)?;
    let kind = match noise.kind {
        NoiseKind::None => "none",
        NoiseKind::AdditiveComplexGaussian => "additive-complex-gaussian",
    };
    if noise.kind == NoiseKind::AdditiveComplexGaussian && noise.sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
        let normal = Normal::new(0.0, noise.sigma).map_err(|e| Error::validation("noise.sigma", e.to_string()))?;
        for s in &mut sweep.s11 {
            *s += C64::new(normal.sample(&mut rng), normal.sample(&mut rng));
        }
    }
    Ok(sweep
        .with_meta("source", format!("synth:{}", topology.kind()))
        .with_meta("topology_sha256", topology_hash(topology))
        .with_meta("noise_kind", kind)
        .with_meta("noise_sigma", noise.sigma.to_string())
        .with_meta("noise_seed", noise.seed.to_string()))
}
