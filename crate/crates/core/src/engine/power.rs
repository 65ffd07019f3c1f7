//! Absorbed power, intracavity photon number and loss-tangent conversions.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::fit::ResonanceFitResult;
use crate::abcd::constants::H;
use crate::error::{Error, Result};

/// Fraction of the incident on-resonance power absorbed by the resonator.
pub fn absorbed_fraction(q_t: f64, q_i: f64) -> Result<f64> {
    if !(q_t > 0.0 && q_i > 0.0) {
        return Err(Error::Domain(format!("q_t = {q_t}, q_i = {q_i} must be > 0")));
    }
    if q_t > q_i * (1.0 + 1e-12) {
        return Err(Error::Domain(format!("q_t = {q_t} exceeds q_i = {q_i}")));
    }
    let x = 2.0 * q_t / q_i - 1.0;
    Ok((1.0 - x * x).clamp(0.0, 1.0))
}

/// On-resonance photon number for incident power `p_in` at the coupler.
pub fn photon_number(q_t: f64, p_in: f64, a: f64, f: f64) -> f64 {
    q_t * p_in * a / (2.0 * PI * H * f * f)
}

/// Loss tangent of the bulk dielectric implied by a mean `Q_i` measured
/// with effective permittivity `eps_eff`.
pub fn bulk_loss_tangent(q_i_mean: f64, eps_eff: f64, eps_bulk: f64) -> f64 {
    (1.0 / q_i_mean) * (eps_bulk / eps_eff)
}

/// Generator power after a fixed attenuation chain, W.
pub fn power_at_coupler(p_generator: f64, chain_attenuation_db: f64) -> f64 {
    p_generator * 10f64.powf(-chain_attenuation_db / 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerPoint {
    pub p_generator: f64,
    pub chain_attenuation: f64,
    pub p_in: f64,
    pub a_fraction: f64,
    pub n_photon: f64,
    pub q_i: f64,
}

/// One row per (fit, generator power), sorted by photon number.
pub fn power_sweep_table(
    fits: &[ResonanceFitResult],
    p_generator: &[f64],
    chain_attenuation: f64,
) -> Result<Vec<PowerPoint>> {
    if fits.len() != p_generator.len() {
        return Err(Error::Usage(format!(
            "{} fits but {} generator powers",
            fits.len(),
            p_generator.len()
        )));
    }
    let mut rows = fits
        .iter()
        .zip(p_generator)
        .map(|(fit, &p)| {
            if !(p >= 0.0) {
                return Err(Error::Domain(format!("generator power {p} must be >= 0")));
            }
            let p_in = power_at_coupler(p, chain_attenuation);
            let a = absorbed_fraction(fit.q_t, fit.q_i)?;
            Ok(PowerPoint {
                p_generator: p,
                chain_attenuation,
                p_in,
                a_fraction: a,
                n_photon: photon_number(fit.q_t, p_in, a, fit.f0),
                q_i: fit.q_i,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| a.n_photon.total_cmp(&b.n_photon));
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn absorbed_fraction_limits() {
        assert_eq!(absorbed_fraction(0.5e6, 1e6).unwrap(), 1.0);
        assert_eq!(absorbed_fraction(1e6, 1e6).unwrap(), 0.0);
        assert!(absorbed_fraction(1.1e6, 1e6).is_err());
        assert!(absorbed_fraction(0.0, 1e6).is_err());
    }

    #[test]
    fn attenuation_chain() {
        let p = power_at_coupler(1e-7, 80.4);
        assert!((p / 9.120_108_393_559_1e-16 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn photon_number_is_linear_in_power() {
        let a = photon_number(8.926e5, 1e-15, 0.9783, 4.902e9);
        let b = photon_number(8.926e5, 2e-15, 0.9783, 4.902e9);
        assert!((b / a - 2.0).abs() < 1e-14);
        assert_eq!(photon_number(8.926e5, 0.0, 0.9783, 4.902e9), 0.0);
    }
}
