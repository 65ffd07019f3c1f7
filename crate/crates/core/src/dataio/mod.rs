//! Trace files, configuration documents and synthetic trace generation.

pub mod config;
pub mod synth;
pub mod trace;

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::Result;

pub use config::{apply_override, CalibrationConfig, ConfigDocument, PowerConfig, SweepConfig, SCHEMA_VERSION};
pub use synth::{synthesize, topology_hash, GridSpec, NoiseKind, NoiseModel};
pub use trace::{read_trace, write_trace, TraceFormat};

/// Writes `bytes` to a sibling temporary file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}
