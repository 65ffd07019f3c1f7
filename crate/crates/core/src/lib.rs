//! ABCD-matrix modelling of superconducting coaxial-cable resonators:
//! assembly models, S11 synthesis and fitting, and extraction of contact and
//! shunt resistances from per-mode internal quality factors.

pub mod abcd;
pub mod dataio;
pub mod engine;
pub mod error;
pub mod lm;
pub mod sweep;
pub mod topology;

pub use abcd::{ABCDMatrix, PortSpec, TransmissionLineSpec, C64};
pub use error::{Error, Result};
pub use sweep::SweepResult;
pub use topology::{BareCableTopology, ChipCableTopology, CurrentClass, ResonatorTopology, SplicedCableTopology};
