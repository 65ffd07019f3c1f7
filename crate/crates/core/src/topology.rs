//! The three measurable resonator assemblies and their compilation into a
//! single two-port at one frequency.
//!
//! Every assembly is `launch · C_in · T_res · Z_out`, terminated in the port
//! impedance; the variants differ only in how `T_res` is built.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::abcd::{
    self, constants, series_capacitor_matrix, series_impedance_matrix, tee_attach_matrix,
    tline_matrix, ABCDMatrix, PortSpec, TransmissionLineSpec, C64,
};
use crate::error::{Error, Result};
use crate::sweep::{check_grid, SweepResult};

/// Relative permittivity of the aluminium/LD-PTFE cable, from its FSR.
pub const CABLE_EPS_R: f64 = 1.55;
/// Mean internal quality factor of the bare cable.
pub const CABLE_Q: f64 = 1.55e6;
/// Coupling capacitance of the recessed-pin launch.
pub const DEFAULT_C_IN: f64 = 3.602e-15;
/// Effective permittivity of an on-chip CPW on silicon.
pub const CPW_EPS_R: f64 = 6.45;
/// Far-end series impedance standing in for an open end.
pub const DEFAULT_Z_OUT: f64 = 1e9;
/// Frequency at which the chip CPW lengths are half/quarter wave.
pub const CPW_DESIGN_FREQ: f64 = 5e9;

pub(crate) mod complex_obj {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Obj {
        re: f64,
        #[serde(default)]
        im: f64,
    }

    pub fn serialize<S: Serializer>(z: &Complex64, s: S) -> Result<S::Ok, S::Error> {
        Obj { re: z.re, im: z.im }.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Complex64, D::Error> {
        let o = Obj::deserialize(d)?;
        Ok(Complex64::new(o.re, o.im))
    }
}

fn default_z_out() -> C64 {
    C64::new(DEFAULT_Z_OUT, 0.0)
}

/// 50 Ω, 0.1 m, lossless.
pub fn default_launch() -> TransmissionLineSpec {
    TransmissionLineSpec::from_permittivity(50.0, 0.1, CABLE_EPS_R, None)
}

/// 1 m of the aluminium cable at its bare-cable Q.
pub fn default_cable(length: f64) -> TransmissionLineSpec {
    TransmissionLineSpec::from_permittivity(50.0, length, CABLE_EPS_R, Some(CABLE_Q))
}

/// Short lossless 45 Ω section bridging the two cable halves.
pub fn default_join() -> TransmissionLineSpec {
    TransmissionLineSpec::from_permittivity(45.0, 6e-3, CABLE_EPS_R, None)
}

/// Lossless 50 Ω CPW whose length is `fraction` of a wavelength at 5 GHz.
pub fn default_cpw(fraction: f64) -> TransmissionLineSpec {
    let wavelength = constants::C / (CPW_DESIGN_FREQ * CPW_EPS_R.sqrt());
    TransmissionLineSpec::from_permittivity(50.0, fraction * wavelength, CPW_EPS_R, None)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BareCableTopology {
    pub launch: TransmissionLineSpec,
    pub c_in: f64,
    pub resonator: TransmissionLineSpec,
    #[serde(with = "complex_obj")]
    pub z_out: C64,
}

impl Default for BareCableTopology {
    fn default() -> Self {
        Self {
            launch: default_launch(),
            c_in: DEFAULT_C_IN,
            resonator: default_cable(1.0),
            z_out: default_z_out(),
        }
    }
}

/// Cable with an indium splice at its midpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplicedCableTopology {
    pub launch: TransmissionLineSpec,
    pub c_in: f64,
    pub half_a: TransmissionLineSpec,
    /// Contact resistance of each of the two joins, Ω.
    pub r_cont: f64,
    pub join: TransmissionLineSpec,
    pub half_b: TransmissionLineSpec,
    #[serde(with = "complex_obj")]
    pub z_out: C64,
}

impl Default for SplicedCableTopology {
    fn default() -> Self {
        Self::with_total_length(1.0, 6e-4)
    }
}

impl SplicedCableTopology {
    /// Splice centred in a resonator of `total` metres including the join.
    pub fn with_total_length(total: f64, r_cont: f64) -> Self {
        let join = default_join();
        let half = default_cable((total - join.length) / 2.0);
        Self {
            launch: default_launch(),
            c_in: DEFAULT_C_IN,
            half_a: half,
            r_cont,
            join,
            half_b: half,
            z_out: default_z_out(),
        }
    }
}

/// Cable pressed onto an on-chip CPW that follows the coupling capacitor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChipCableTopology {
    pub launch: TransmissionLineSpec,
    pub c_in: f64,
    pub cpw: TransmissionLineSpec,
    pub r_cont: f64,
    pub r_shunt: f64,
    pub cable: TransmissionLineSpec,
    #[serde(with = "complex_obj")]
    pub z_out: C64,
}

impl Default for ChipCableTopology {
    fn default() -> Self {
        Self::half_wave()
    }
}

impl ChipCableTopology {
    fn with_cpw(cpw: TransmissionLineSpec) -> Self {
        Self {
            launch: default_launch(),
            c_in: DEFAULT_C_IN,
            cpw,
            r_cont: 8.5e-4,
            r_shunt: 1.3e7,
            cable: default_cable(1.0),
            z_out: default_z_out(),
        }
    }

    /// Interface at a voltage maximum at 5 GHz.
    pub fn half_wave() -> Self {
        Self::with_cpw(default_cpw(1.0))
    }

    /// Interface at a current maximum at 5 GHz.
    pub fn quarter_wave() -> Self {
        Self::with_cpw(default_cpw(0.25))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResonatorTopology {
    Bare(BareCableTopology),
    Splice(SplicedCableTopology),
    Chip(ChipCableTopology),
}

/// One factor of `T_res`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Element {
    Line(TransmissionLineSpec),
    Series(C64),
    Tee { r_cont: f64, r_shunt: f64 },
}

impl Element {
    pub fn matrix(&self, f: f64) -> Result<ABCDMatrix> {
        match self {
            Element::Line(spec) => tline_matrix(spec, f),
            Element::Series(z) => series_impedance_matrix(*z),
            Element::Tee { r_cont, r_shunt } => tee_attach_matrix(*r_cont, *r_shunt),
        }
    }

    fn length(&self) -> f64 {
        match self {
            Element::Line(spec) => spec.length,
            _ => 0.0,
        }
    }
}

/// Where the current is probed when classifying a mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurrentClass {
    Node,
    Antinode,
    Intermediate,
}

impl CurrentClass {
    /// `ratio` is `|I(interface)| / max |I|`.
    pub fn from_ratio(ratio: f64) -> Self {
        if ratio < 0.25 {
            CurrentClass::Node
        } else if ratio > 0.75 {
            CurrentClass::Antinode
        } else {
            CurrentClass::Intermediate
        }
    }
}

impl ResonatorTopology {
    pub fn launch(&self) -> &TransmissionLineSpec {
        match self {
            Self::Bare(t) => &t.launch,
            Self::Splice(t) => &t.launch,
            Self::Chip(t) => &t.launch,
        }
    }

    pub fn c_in(&self) -> f64 {
        match self {
            Self::Bare(t) => t.c_in,
            Self::Splice(t) => t.c_in,
            Self::Chip(t) => t.c_in,
        }
    }

    pub fn z_out(&self) -> C64 {
        match self {
            Self::Bare(t) => t.z_out,
            Self::Splice(t) => t.z_out,
            Self::Chip(t) => t.z_out,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Bare(_) => "bare",
            Self::Splice(_) => "splice",
            Self::Chip(_) => "chip",
        }
    }

    /// The cable segment whose loss `fixed_cable_q` and `q_i` fits refer to.
    pub fn cable(&self) -> &TransmissionLineSpec {
        match self {
            Self::Bare(t) => &t.resonator,
            Self::Splice(t) => &t.half_a,
            Self::Chip(t) => &t.cable,
        }
    }

    /// Factors of `T_res`, input side first.
    pub fn resonator_elements(&self) -> Vec<Element> {
        match self {
            Self::Bare(t) => vec![Element::Line(t.resonator)],
            Self::Splice(t) => vec![
                Element::Line(t.half_a),
                Element::Series(t.r_cont.into()),
                Element::Line(t.join),
                Element::Series(t.r_cont.into()),
                Element::Line(t.half_b),
            ],
            Self::Chip(t) => vec![
                Element::Line(t.cpw),
                Element::Tee {
                    r_cont: t.r_cont,
                    r_shunt: t.r_shunt,
                },
                Element::Line(t.cable),
            ],
        }
    }

    /// Physical length of `T_res`, m.
    pub fn resonator_length(&self) -> f64 {
        self.resonator_elements().iter().map(Element::length).sum()
    }

    /// One-way delay through `T_res`, s.
    pub fn resonator_delay(&self) -> f64 {
        self.resonator_elements()
            .iter()
            .map(|e| match e {
                Element::Line(s) => s.delay(),
                _ => 0.0,
            })
            .sum()
    }

    /// Free spectral range of the uncoupled resonator, `1/(2·delay)`.
    pub fn fsr(&self) -> f64 {
        0.5 / self.resonator_delay()
    }

    /// Position along `T_res` of the join (splice centre), the chip interface,
    /// or the midpoint of a bare cable.
    pub fn interface_position(&self) -> f64 {
        match self {
            Self::Bare(t) => t.resonator.length / 2.0,
            Self::Splice(t) => t.half_a.length + t.join.length / 2.0,
            Self::Chip(t) => t.cpw.length,
        }
    }

    /// Same geometry with every loss removed.
    pub fn lossless(&self) -> Self {
        let mut t = *self;
        match &mut t {
            Self::Bare(b) => b.resonator.internal_q = None,
            Self::Splice(s) => {
                s.half_a.internal_q = None;
                s.half_b.internal_q = None;
                s.join.internal_q = None;
                s.r_cont = 0.0;
            }
            Self::Chip(c) => {
                c.cpw.internal_q = None;
                c.cable.internal_q = None;
                c.r_cont = 0.0;
                c.r_shunt = f64::INFINITY;
            }
        }
        match &mut t {
            Self::Bare(b) => b.launch.internal_q = None,
            Self::Splice(s) => s.launch.internal_q = None,
            Self::Chip(c) => c.launch.internal_q = None,
        }
        t
    }

    /// A bare cable with the same launch, coupling, termination and total
    /// electrical length, whose line carries the cable's impedance and loss.
    /// Per-mode `Q_i` of any assembly is fitted with this model.
    pub fn bare_equivalent(&self) -> BareCableTopology {
        let cable = *self.cable();
        let length = self.resonator_delay() * constants::C / cable.eps_r().sqrt();
        BareCableTopology {
            launch: *self.launch(),
            c_in: self.c_in(),
            resonator: cable.with_length(length),
            z_out: self.z_out(),
        }
    }

    /// Cable length (for the splice: total including the join).
    pub fn length(&self) -> f64 {
        match self {
            Self::Bare(t) => t.resonator.length,
            Self::Splice(t) => t.half_a.length + t.join.length + t.half_b.length,
            Self::Chip(t) => t.cable.length,
        }
    }

    pub fn with_length(&self, length: f64) -> Self {
        let mut t = *self;
        match &mut t {
            Self::Bare(b) => b.resonator.length = length,
            Self::Splice(s) => {
                let half = (length - s.join.length) / 2.0;
                s.half_a.length = half;
                s.half_b.length = half;
            }
            Self::Chip(c) => c.cable.length = length,
        }
        t
    }

    pub fn with_c_in(&self, c_in: f64) -> Self {
        let mut t = *self;
        match &mut t {
            Self::Bare(b) => b.c_in = c_in,
            Self::Splice(s) => s.c_in = c_in,
            Self::Chip(c) => c.c_in = c_in,
        }
        t
    }

    pub fn with_cable_q(&self, q: Option<f64>) -> Self {
        let mut t = *self;
        match &mut t {
            Self::Bare(b) => b.resonator.internal_q = q,
            Self::Splice(s) => {
                s.half_a.internal_q = q;
                s.half_b.internal_q = q;
            }
            Self::Chip(c) => c.cable.internal_q = q,
        }
        t
    }

    pub fn validate(&self) -> Result<()> {
        let k = format!("topology.{}", self.kind());
        self.launch().validate(&format!("{k}.launch"))?;
        let c_in = self.c_in();
        if !(c_in > 0.0) || c_in.is_nan() {
            return Err(Error::validation(format!("{k}.c_in"), "must be > 0"));
        }
        if !self.z_out().is_finite() {
            return Err(Error::validation(format!("{k}.z_out"), "must be finite"));
        }
        match self {
            Self::Bare(t) => t.resonator.validate(&format!("{k}.resonator"))?,
            Self::Splice(t) => {
                t.half_a.validate(&format!("{k}.half_a"))?;
                t.join.validate(&format!("{k}.join"))?;
                t.half_b.validate(&format!("{k}.half_b"))?;
                if !(t.r_cont >= 0.0 && t.r_cont.is_finite()) {
                    return Err(Error::validation(format!("{k}.r_cont"), "must be finite and >= 0"));
                }
            }
            Self::Chip(t) => {
                t.cpw.validate(&format!("{k}.cpw"))?;
                t.cable.validate(&format!("{k}.cable"))?;
                if !(t.r_cont >= 0.0 && t.r_cont.is_finite()) {
                    return Err(Error::validation(format!("{k}.r_cont"), "must be finite and >= 0"));
                }
                if !(t.r_shunt > 0.0) {
                    return Err(Error::validation(format!("{k}.r_shunt"), "must be > 0"));
                }
            }
        }
        Ok(())
    }

    /// `T_res · Z_out` at `f`.
    fn back_matrix(&self, f: f64) -> Result<ABCDMatrix> {
        let mut m = ABCDMatrix::IDENTITY;
        for e in self.resonator_elements() {
            m = m * e.matrix(f)?;
        }
        Ok(m * series_impedance_matrix(self.z_out())?)
    }

    /// `T_launch · C_in` at `f`.
    fn front_matrix(&self, f: f64) -> Result<ABCDMatrix> {
        Ok(tline_matrix(self.launch(), f)? * series_capacitor_matrix(self.c_in(), f)?)
    }

    /// `T_launch · C_in · T_res · Z_out` at `f`.
    pub fn compile(&self, f: f64) -> Result<ABCDMatrix> {
        if !(f > 0.0) || !f.is_finite() {
            return Err(Error::Domain(format!("frequency must be > 0, got {f}")));
        }
        let inner = || -> Result<ABCDMatrix> { Ok(self.front_matrix(f)? * self.back_matrix(f)?) };
        inner().map_err(|e| e.at_frequency(f))
    }

    pub fn s11_at(&self, f: f64, port: &PortSpec) -> Result<C64> {
        abcd::s11(&self.compile(f)?, port).map_err(|e| e.at_frequency(f))
    }

    /// Model S11 over `grid`, returned with the grid unchanged.
    pub fn sweep(&self, grid: &[f64], port: &PortSpec) -> Result<SweepResult> {
        check_grid(grid)?;
        if grid.len() < 2 {
            return Err(Error::validation("grid", "needs at least 2 points"));
        }
        if let Some(&f) = grid.iter().find(|&&f| !(f > 0.0)) {
            return Err(Error::Domain(format!("sweep frequency must be > 0, got {f}")));
        }
        let s11 = grid
            .iter()
            .map(|&f| self.s11_at(f, port))
            .collect::<Result<Vec<_>>>()?;
        Ok(SweepResult {
            freqs: grid.to_vec(),
            s11,
            meta: [("source".to_string(), format!("model:{}", self.kind()))].into(),
        })
    }

    /// Input admittance of `T_res · Z_out` terminated in the port impedance.
    pub fn resonator_admittance(&self, f: f64, port: &PortSpec) -> Result<C64> {
        let m = self.back_matrix(f)?;
        Ok((m.c * port.z0 + m.d) / (m.a * port.z0 + m.b))
    }

    /// Voltage and current phasors at each of `positions` (metres along
    /// `T_res`, measured from the coupling capacitor) for a unit incident
    /// wave `V+ = 1 V` at the reference port. Lumped elements sitting exactly
    /// at a probed position are taken to lie upstream of it.
    pub fn state_profile(&self, f: f64, positions: &[f64], port: &PortSpec) -> Result<Vec<(C64, C64)>> {
        if !(f > 0.0) {
            return Err(Error::Domain(format!("frequency must be > 0, got {f}")));
        }
        let total = self.resonator_length();
        for &x in positions {
            if !(x >= 0.0 && x <= total * (1.0 + 1e-12)) {
                return Err(Error::Domain(format!(
                    "position {x} m outside the resonator [0, {total}] m"
                )));
            }
        }
        let elements = self.resonator_elements();
        let mut starts = Vec::with_capacity(elements.len());
        let mut s = 0.0;
        for e in &elements {
            starts.push(s);
            s += e.length();
        }

        // Walk from the termination towards the port.
        let mut order: Vec<usize> = (0..positions.len()).collect();
        order.sort_by(|&i, &j| positions[j].total_cmp(&positions[i]));
        let mut states = vec![(C64::default(), C64::default()); positions.len()];
        let mut v = C64::new(port.z0, 0.0);
        let mut i = C64::new(1.0, 0.0);
        (v, i) = series_impedance_matrix(self.z_out())?.apply(v, i);

        let mut next = 0;
        for (k, e) in elements.iter().enumerate().rev() {
            let start = starts[k];
            match e {
                Element::Line(spec) => {
                    let end = start + spec.length;
                    // (x, state) pairs inside this segment, from the far end
                    let mut here = end;
                    while next < order.len() && positions[order[next]] >= start {
                        let x = positions[order[next]].min(end);
                        let part = tline_matrix(&spec.with_length(here - x), f)?;
                        (v, i) = part.apply(v, i);
                        here = x;
                        states[order[next]] = (v, i);
                        next += 1;
                    }
                    let part = tline_matrix(&spec.with_length(here - start), f)?;
                    (v, i) = part.apply(v, i);
                }
                _ => {
                    (v, i) = e.matrix(f)?.apply(v, i);
                    while next < order.len() && positions[order[next]] >= start {
                        states[order[next]] = (v, i);
                        next += 1;
                    }
                }
            }
        }
        for &idx in &order[next..] {
            states[idx] = (v, i);
        }
        let (vp, ip) = self.front_matrix(f)?.apply(v, i);
        let incident = (vp + ip * port.z0) / 2.0;
        if incident.norm() == 0.0 || !incident.is_finite() {
            return Err(Error::Singular { freq_hz: f });
        }
        Ok(states.into_iter().map(|(v, i)| (v / incident, i / incident)).collect())
    }

    /// Voltage and current at one position; see [`Self::state_profile`].
    pub fn internal_state(&self, f: f64, position: f64, port: &PortSpec) -> Result<(C64, C64)> {
        Ok(self.state_profile(f, &[position], port)?[0])
    }

    /// Sample positions dense enough to resolve the standing wave at `f`.
    pub fn profile_positions(&self, f: f64) -> Vec<f64> {
        let mut xs = Vec::new();
        let mut start = 0.0;
        for e in self.resonator_elements() {
            if let Element::Line(spec) = e {
                let phase = 2.0 * PI * f * spec.delay();
                let n = ((phase / (PI / 64.0)).ceil() as usize).max(4);
                for k in 0..=n {
                    xs.push(start + spec.length * k as f64 / n as f64);
                }
                start += spec.length;
            }
        }
        xs
    }

    /// `|I(interface)| / max |I|` along the resonator at `f`.
    pub fn interface_current_ratio(&self, f: f64, port: &PortSpec) -> Result<f64> {
        let mut xs = self.profile_positions(f);
        xs.push(self.interface_position());
        let states = self.state_profile(f, &xs, port)?;
        let at = states.last().unwrap().1.norm();
        let max = states.iter().map(|s| s.1.norm()).fold(0.0, f64::max);
        Ok(if max > 0.0 { at / max } else { 0.0 })
    }
}

impl From<BareCableTopology> for ResonatorTopology {
    fn from(t: BareCableTopology) -> Self {
        Self::Bare(t)
    }
}

impl From<SplicedCableTopology> for ResonatorTopology {
    fn from(t: SplicedCableTopology) -> Self {
        Self::Splice(t)
    }
}

impl From<ChipCableTopology> for ResonatorTopology {
    fn from(t: ChipCableTopology) -> Self {
        Self::Chip(t)
    }
}
