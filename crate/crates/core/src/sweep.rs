use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::abcd::C64;
use crate::error::{Error, Result};

/// Complex S11 samples on a strictly increasing frequency grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub freqs: Vec<f64>,
    pub s11: Vec<C64>,
    /// Provenance: source file, generating topology, noise seed, ...
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
}

impl SweepResult {
    pub fn new(freqs: Vec<f64>, s11: Vec<C64>) -> Result<Self> {
        let s = Self {
            freqs,
            s11,
            meta: BTreeMap::new(),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.freqs.len() != self.s11.len() {
            return Err(Error::validation(
                "sweep",
                format!("{} frequencies but {} samples", self.freqs.len(), self.s11.len()),
            ));
        }
        if self.freqs.len() < 2 {
            return Err(Error::validation("sweep", "needs at least 2 points"));
        }
        check_grid(&self.freqs)?;
        if let Some(i) = self.s11.iter().position(|z| !z.is_finite()) {
            return Err(Error::validation("sweep.s11", format!("non-finite sample at index {i}")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    /// |S11|² per point.
    pub fn power(&self) -> Vec<f64> {
        self.s11.iter().map(|z| z.norm_sqr()).collect()
    }

    /// Points with `lo <= f <= hi`, provenance kept.
    pub fn window(&self, lo: f64, hi: f64) -> Self {
        let start = self.freqs.partition_point(|&f| f < lo);
        let end = self.freqs.partition_point(|&f| f <= hi);
        Self {
            freqs: self.freqs[start..end].to_vec(),
            s11: self.s11[start..end].to_vec(),
            meta: self.meta.clone(),
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl Into<String>) -> Self {
        self.meta.insert(key.to_string(), value.into());
        self
    }
}

/// Checks that `freqs` is finite and strictly increasing.
pub fn check_grid(freqs: &[f64]) -> Result<()> {
    if let Some(i) = freqs.iter().position(|f| !f.is_finite()) {
        return Err(Error::validation("freqs", format!("non-finite frequency at index {i}")));
    }
    if let Some(i) = freqs.windows(2).position(|w| w[1] <= w[0]) {
        return Err(Error::validation(
            "freqs",
            format!(
                "frequencies not strictly increasing at index {} ({} -> {})",
                i + 1,
                freqs[i],
                freqs[i + 1]
            ),
        ));
    }
    Ok(())
}

/// `points` equally spaced frequencies from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => vec![],
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (points - 1) as f64;
            (0..points)
                .map(|i| if i == points - 1 { hi } else { lo + step * i as f64 })
                .collect()
        }
    }
}
