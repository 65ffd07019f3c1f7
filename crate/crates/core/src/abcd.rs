//! Two-port ABCD algebra, element constructors and the line/quality-factor
//! conversions shared by every resonator model.
//!
//! Sign convention is engineering `e^{jωt}`: a capacitor has impedance
//! `-j/(ωC)` and a lossy line propagates as `e^{-jβx}` with
//! `β = 2πf√εr/c − jα/2`, so that `α` is the power attenuation per metre.

use std::f64::consts::PI;
use std::ops::Mul;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// CODATA-exact constants.
pub mod constants {
    /// Vacuum speed of light, m/s.
    pub const C: f64 = 299_792_458.0;
    /// Planck constant, J·s.
    pub const H: f64 = 6.626_070_15e-34;
}

/// Decibels per neper for a power ratio.
pub const DB_PER_NEPER_POWER: f64 = 4.342_944_819_032_518;

const J: C64 = C64::new(0.0, 1.0);

/// Reference port of the measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PortSpec {
    /// Reference impedance, Ω.
    pub z0: f64,
}

impl Default for PortSpec {
    fn default() -> Self {
        Self { z0: 50.0 }
    }
}

impl PortSpec {
    pub fn new(z0: f64) -> Result<Self> {
        let p = Self { z0 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.z0.is_finite() && self.z0 > 0.0) {
            return Err(Error::validation("port.z0", "must be finite and > 0"));
        }
        Ok(())
    }
}

/// One uniform TEM line segment.
///
/// `internal_q = None` is a lossless line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransmissionLineSpec {
    /// Characteristic impedance, Ω.
    pub impedance: f64,
    /// Physical length, m.
    pub length: f64,
    /// Capacitance per unit length, F/m.
    pub cap_per_length: f64,
    /// Internal quality factor of the line material.
    pub internal_q: Option<f64>,
}

impl TransmissionLineSpec {
    /// Builds a segment from its relative permittivity instead of `C_l`.
    pub fn from_permittivity(impedance: f64, length: f64, eps_r: f64, internal_q: Option<f64>) -> Self {
        Self {
            impedance,
            length,
            cap_per_length: eps_r.sqrt() / (constants::C * impedance),
            internal_q,
        }
    }

    pub fn lossless(mut self) -> Self {
        self.internal_q = None;
        self
    }

    pub fn with_length(mut self, length: f64) -> Self {
        self.length = length;
        self
    }

    pub fn eps_r(&self) -> f64 {
        epsilon_r(self.cap_per_length, self.impedance)
    }

    /// Power attenuation coefficient at `f`, Np/m.
    pub fn attenuation(&self, f: f64) -> f64 {
        match self.internal_q {
            None => 0.0,
            Some(q) => attenuation_coeff(f, self.eps_r(), q),
        }
    }

    /// Complex propagation constant `β' − jα/2`, rad/m.
    pub fn propagation(&self, f: f64) -> C64 {
        let beta = 2.0 * PI * f * self.eps_r().sqrt() / constants::C;
        C64::new(beta, -0.5 * self.attenuation(f))
    }

    /// One-way delay `l·√εr / c`, s.
    pub fn delay(&self) -> f64 {
        self.length * self.eps_r().sqrt() / constants::C
    }

    pub fn validate(&self, key: &str) -> Result<()> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !pos(self.impedance) {
            return Err(Error::validation(format!("{key}.impedance"), "must be finite and > 0"));
        }
        if !(self.length.is_finite() && self.length >= 0.0) {
            return Err(Error::validation(format!("{key}.length"), "must be finite and >= 0"));
        }
        if !pos(self.cap_per_length) {
            return Err(Error::validation(format!("{key}.cap_per_length"), "must be finite and > 0"));
        }
        if let Some(q) = self.internal_q {
            if !(q > 0.0) || q.is_nan() {
                return Err(Error::validation(format!("{key}.internal_q"), "must be > 0 (null for lossless)"));
            }
        }
        Ok(())
    }
}

/// 2×2 complex transfer matrix relating `(V1, I1)` to `(V2, I2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ABCDMatrix {
    pub a: C64,
    pub b: C64,
    pub c: C64,
    pub d: C64,
}

impl ABCDMatrix {
    pub const IDENTITY: Self = Self {
        a: C64::new(1.0, 0.0),
        b: C64::new(0.0, 0.0),
        c: C64::new(0.0, 0.0),
        d: C64::new(1.0, 0.0),
    };

    pub fn new(a: C64, b: C64, c: C64, d: C64) -> Self {
        Self { a, b, c, d }
    }

    pub fn det(&self) -> C64 {
        self.a * self.d - self.b * self.c
    }

    /// Inverse of a unimodular matrix.
    pub fn inverse(&self) -> Self {
        let det = self.det();
        Self {
            a: self.d / det,
            b: -self.b / det,
            c: -self.c / det,
            d: self.a / det,
        }
    }

    pub fn is_finite(&self) -> bool {
        [self.a, self.b, self.c, self.d].iter().all(|z| z.is_finite())
    }

    /// Applies the matrix to an output-side state, giving the input-side state.
    pub fn apply(&self, v: C64, i: C64) -> (C64, C64) {
        (self.a * v + self.b * i, self.c * v + self.d * i)
    }

    /// Largest absolute deviation between corresponding entries.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        [
            self.a - other.a,
            self.b - other.b,
            self.c - other.c,
            self.d - other.d,
        ]
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
    }

    /// Input impedance seen with `load` at the output.
    pub fn input_impedance(&self, load: C64) -> C64 {
        (self.a * load + self.b) / (self.c * load + self.d)
    }
}

impl Mul for ABCDMatrix {
    type Output = ABCDMatrix;

    fn mul(self, r: ABCDMatrix) -> ABCDMatrix {
        ABCDMatrix {
            a: self.a * r.a + self.b * r.c,
            b: self.a * r.b + self.b * r.d,
            c: self.c * r.a + self.d * r.c,
            d: self.c * r.b + self.d * r.d,
        }
    }
}

fn check_finite(z: C64, what: &str) -> Result<()> {
    if z.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(format!("{what} is not finite")))
    }
}

/// Matrix of one line segment at frequency `f`.
pub fn tline_matrix(spec: &TransmissionLineSpec, f: f64) -> Result<ABCDMatrix> {
    if !(f >= 0.0) || !f.is_finite() {
        return Err(Error::Domain(format!("frequency must be finite and >= 0, got {f}")));
    }
    spec.validate("line")?;
    let theta = spec.propagation(f) * spec.length;
    // cos/sin of a complex argument via cosh/sinh of the (small) imaginary
    // part; no subtraction of nearly equal exponentials.
    let (cos, sin) = (theta.cos(), theta.sin());
    let z = spec.impedance;
    let m = ABCDMatrix {
        a: cos,
        b: J * z * sin,
        c: J * sin / z,
        d: cos,
    };
    if !m.is_finite() {
        return Err(Error::NonFinite(format!(
            "line matrix overflow (alpha*l = {:.3e})",
            spec.attenuation(f) * spec.length
        )));
    }
    Ok(m)
}

/// `[[1, z], [0, 1]]`.
pub fn series_impedance_matrix(z: C64) -> Result<ABCDMatrix> {
    check_finite(z, "series impedance")?;
    Ok(ABCDMatrix {
        b: z,
        ..ABCDMatrix::IDENTITY
    })
}

/// `[[1, 0], [y, 1]]`.
pub fn shunt_admittance_matrix(y: C64) -> Result<ABCDMatrix> {
    check_finite(y, "shunt admittance")?;
    Ok(ABCDMatrix {
        c: y,
        ..ABCDMatrix::IDENTITY
    })
}

/// Series coupling capacitor, `z = -j/(2πf·C)`. An infinite capacitance is a
/// through connection.
pub fn series_capacitor_matrix(c_in: f64, f: f64) -> Result<ABCDMatrix> {
    if c_in.is_infinite() && c_in > 0.0 {
        return Ok(ABCDMatrix::IDENTITY);
    }
    if !(c_in > 0.0) || !(f > 0.0) || !f.is_finite() {
        return Err(Error::SingularImpedance(format!(
            "series capacitor needs c_in > 0 and f > 0 (c_in = {c_in}, f = {f})"
        )));
    }
    series_impedance_matrix(C64::new(0.0, -1.0 / (2.0 * PI * f * c_in)))
}

/// Symmetric tee of two `r_cont/2` series arms around a shunt `r_shunt`.
/// `r_shunt = ∞` is allowed and removes the shunt branch.
pub fn tee_attach_matrix(r_cont: f64, r_shunt: f64) -> Result<ABCDMatrix> {
    if !(r_cont >= 0.0) || !r_cont.is_finite() {
        return Err(Error::Domain(format!("r_cont must be finite and >= 0, got {r_cont}")));
    }
    if !(r_shunt > 0.0) {
        return Err(Error::Domain(format!("r_shunt must be > 0, got {r_shunt}")));
    }
    let ad = 1.0 + r_cont / (2.0 * r_shunt);
    Ok(ABCDMatrix {
        a: ad.into(),
        b: (r_cont + r_cont * r_cont / (4.0 * r_shunt)).into(),
        c: (1.0 / r_shunt).into(),
        d: ad.into(),
    })
}

/// Left-to-right product, input side first.
pub fn cascade<'a, I>(elements: I) -> Result<ABCDMatrix>
where
    I: IntoIterator<Item = &'a ABCDMatrix>,
{
    let mut it = elements.into_iter();
    let first = *it
        .next()
        .ok_or_else(|| Error::Usage("cascade of an empty sequence".into()))?;
    Ok(it.fold(first, |acc, m| acc * *m))
}

/// Reflection coefficient with the output terminated in `port.z0`.
pub fn s11(m: &ABCDMatrix, port: &PortSpec) -> Result<C64> {
    let z0 = port.z0;
    let p = m.a + m.b / z0;
    let q = m.c * z0 + m.d;
    let den = p + q;
    let scale = m.a.norm() + m.b.norm() / z0 + m.c.norm() * z0 + m.d.norm();
    if !(den.norm() > 1e-14 * scale) {
        return Err(Error::Singular { freq_hz: f64::NAN });
    }
    Ok((p - q) / den)
}

/// Forward transmission with both ports at `port.z0`.
pub fn s21(m: &ABCDMatrix, port: &PortSpec) -> Result<C64> {
    let z0 = port.z0;
    let den = m.a + m.b / z0 + m.c * z0 + m.d;
    if den.norm() == 0.0 {
        return Err(Error::Singular { freq_hz: f64::NAN });
    }
    Ok(2.0 / den)
}

/// Relative permittivity implied by `C_l` and `Z0`: `(c·C_l·Z0)²`.
pub fn epsilon_r(c_l: f64, z0: f64) -> f64 {
    let v = constants::C * c_l * z0;
    v * v
}

/// Power attenuation per metre, Np/m: `2πf√εr/(c·Q_i)`.
pub fn attenuation_coeff(f: f64, eps_r: f64, q_i: f64) -> f64 {
    2.0 * PI * f * eps_r.sqrt() / (constants::C * q_i)
}

/// Converts a power attenuation coefficient from Np/m to dB/km.
pub fn np_per_m_to_db_per_km(alpha: f64) -> f64 {
    alpha * DB_PER_NEPER_POWER * 1000.0
}

/// External quality factor of mode `n` behind a series capacitor.
pub fn external_q(n: u32, f: f64, c_in: f64, z0: f64) -> f64 {
    let x = f * c_in * z0;
    n as f64 / (8.0 * PI * x * x)
}

/// Harmonic combination `1/(1/Q_i + 1/Q_e)`; infinite inputs are allowed.
pub fn total_q(q_i: f64, q_e: f64) -> f64 {
    1.0 / (1.0 / q_i + 1.0 / q_e)
}
