//! Resonance search, fitting, surveys, calibration and power analysis.

pub mod calibrate;
pub mod fit;
pub mod power;
pub mod resonances;
pub mod scalar;
pub mod survey;

pub use calibrate::{
    calibrate_chip, calibrate_chip_means, calibrate_splice, calibrate_splice_means, family_means, FamilyMeans,
    GlobalFitResult,
};
pub use fit::{fit_resonance, seed_fit, FitOptions, FitParam, ResonanceFitResult};
pub use power::{absorbed_fraction, bulk_loss_tangent, photon_number, power_sweep_table, PowerPoint};
pub use resonances::{find_resonances, locate_modes};
pub use survey::{fsr_residuals, mode_survey, survey_trace, ModeRecord, ModeSurveyor, SurveyOptions};
