//! Machine-readable report payloads shared by the CLI commands.

use serde::{Deserialize, Serialize};

use crate::analysis::{BoundReport, DecayFit};
use crate::lattice::DobrushinReport;
use crate::potentials::ConditionReport;

/// Numeric tolerances in force for a run; every report carries them.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Tolerances {
    /// Absolute target of the interaction-ratio optimizer.
    pub ratio_optimizer_abs: f64,
    /// Certified relative tail mass outside truncation intervals.
    pub tail_mass: f64,
    /// CDF accuracy of inverse-CDF draws.
    pub cdf: f64,
    /// Relative convergence target of nested quadrature.
    pub quadrature_rel: f64,
    /// Floor of the numeric slack granted to bound checks.
    pub bound_num_floor: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            ratio_optimizer_abs: crate::potentials::RATIO_TOL,
            tail_mass: crate::numerics::DEFAULT_TAIL_TOL,
            cdf: crate::numerics::CDF_TOL,
            quadrature_rel: 1e-12,
            bound_num_floor: 1e-10,
        }
    }
}

/// Decay-fit outcome; fitting legitimately fails when nothing rises above
/// the noise.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum FitOutcome {
    Fit(DecayFit),
    NoSignal { reason: String },
}

/// Top-level report written by `check`, `analyze` and `verify`.
#[derive(Clone, Debug, Serialize, Deserialize, Default)]
pub struct Report {
    pub version: String,
    pub config_digest: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<Tolerances>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conditions: Option<ConditionReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dobrushin: Option<DobrushinReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<Vec<BoundReport>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay_fit: Option<FitOutcome>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl Report {
    pub fn new(config_digest: &str) -> Self {
        Report {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_digest: config_digest.to_string(),
            tolerances: Some(Tolerances::default()),
            ..Report::default()
        }
    }
}

/// Hex SHA-256 of raw bytes; used for config digests.
pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
