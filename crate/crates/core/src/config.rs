//! JSON run configuration: model, lattice, semimetric, sampler and analysis
//! settings. The seed is mandatory; there is no wall-clock default anywhere.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::Observable;
use crate::lattice::{build_lattice, Boundary, LatticeError, LatticeSpec, Semimetric};
use crate::poly::Polynomial;
use crate::potentials::{Displacement, ModelCandidate, ModelSpec, PotentialError};
use crate::sampler::{RunParams, SweepOrder};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(#[from] serde_json::Error),

    #[error("config io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("invalid config: {0}")]
    Invalid(String),

    #[error(transparent)]
    Potential(#[from] PotentialError),

    #[error(transparent)]
    Lattice(#[from] LatticeError),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub lattice: LatticeConfig,
    #[serde(default)]
    pub metric: MetricConfig,
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let config: RunConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<(Self, Vec<u8>), ConfigError> {
        let bytes = std::fs::read(path)?;
        let text = String::from_utf8_lossy(&bytes);
        Ok((Self::from_json(&text)?, bytes))
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if self.sampler.sweeps == 0 {
            return Err(ConfigError::Invalid("sampler.sweeps must be positive".into()));
        }
        if !(self.metric.alpha >= 0.0) {
            return Err(ConfigError::Invalid(format!(
                "metric.alpha = {} must be >= 0",
                self.metric.alpha
            )));
        }
        if self.lattice.dim == 0 || self.lattice.l.len() != self.lattice.dim {
            return Err(ConfigError::Invalid(format!(
                "lattice needs dim >= 1 and exactly dim extents (dim = {}, L = {:?})",
                self.lattice.dim, self.lattice.l
            )));
        }
        self.model.candidate()?;
        self.sampler.order()?;
        self.analysis.observable()?;
        Ok(())
    }

    pub fn metric(&self) -> Result<Semimetric, ConfigError> {
        Ok(Semimetric::new(self.metric.alpha)?)
    }
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelConfig {
    /// `F = (1 + x^2)^(2n+1)`, `G_j(u) = b_j u^(2n+2)`.
    Model1 {
        n: u32,
        lambda: f64,
        #[serde(default)]
        b: BTreeMap<String, f64>,
    },
    /// `F = eps x^2 / 2`, `G_j(u) = b_j u^2`.
    Gaussian {
        epsilon: f64,
        lambda: f64,
        #[serde(default)]
        b: BTreeMap<String, f64>,
    },
    /// Arbitrary polynomial potentials by coefficient lists.
    Custom {
        #[serde(rename = "F")]
        f: Vec<f64>,
        #[serde(rename = "G", default)]
        g: BTreeMap<String, Vec<f64>>,
        lambda: f64,
    },
}

fn parse_b(b: &BTreeMap<String, f64>) -> Result<BTreeMap<Displacement, f64>, ConfigError> {
    let mut out = BTreeMap::new();
    for (key, &value) in b {
        let d = Displacement::parse(key).map_err(ConfigError::Invalid)?;
        if d.is_zero() {
            return Err(ConfigError::Invalid("displacement 0 is not a pair".into()));
        }
        out.insert(d, value);
    }
    Ok(out)
}

impl ModelConfig {
    pub fn lambda(&self) -> f64 {
        match self {
            ModelConfig::Model1 { lambda, .. }
            | ModelConfig::Gaussian { lambda, .. }
            | ModelConfig::Custom { lambda, .. } => *lambda,
        }
    }

    /// Raw potentials for condition checking (negative couplings and
    /// non-convex polynomials survive into the candidate so the checker can
    /// flag them).
    pub fn candidate(&self) -> Result<ModelCandidate, ConfigError> {
        match self {
            ModelConfig::Model1 { n, lambda, b } => {
                let base = Polynomial::new(vec![1.0, 0.0, 1.0]).pow(2 * n + 1);
                let b = parse_b(b)?;
                let pairs = b
                    .iter()
                    .filter(|(_, &bj)| bj != 0.0)
                    .map(|(d, &bj)| {
                        (d.clone(), (Polynomial::monomial(bj, (2 * n + 2) as usize), Some(bj)))
                    })
                    .collect();
                Ok(ModelCandidate { f: base, pairs, lambda: *lambda })
            }
            ModelConfig::Gaussian { epsilon, lambda, b } => {
                let b = parse_b(b)?;
                let pairs = b
                    .iter()
                    .filter(|(_, &bj)| bj != 0.0)
                    .map(|(d, &bj)| (d.clone(), (Polynomial::monomial(bj, 2), Some(bj))))
                    .collect();
                Ok(ModelCandidate {
                    f: Polynomial::monomial(epsilon / 2.0, 2),
                    pairs,
                    lambda: *lambda,
                })
            }
            ModelConfig::Custom { f, g, lambda } => {
                let mut pairs = BTreeMap::new();
                for (key, coeffs) in g {
                    let d = Displacement::parse(key).map_err(ConfigError::Invalid)?;
                    if d.is_zero() {
                        return Err(ConfigError::Invalid("displacement 0 is not a pair".into()));
                    }
                    pairs.insert(d, (Polynomial::new(coeffs.clone()), None));
                }
                Ok(ModelCandidate { f: Polynomial::new(f.clone()), pairs, lambda: *lambda })
            }
        }
    }

    pub fn build(&self) -> Result<ModelSpec, ConfigError> {
        Ok(self.candidate()?.build()?)
    }
}

// ---------------------------------------------------------------------------
// Lattice and metric
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    pub dim: usize,
    #[serde(rename = "L")]
    pub l: Vec<i64>,
    pub bc: String,
    /// Fixed-boundary shell values, row-major over the enlarged box with the
    /// interior skipped; `shell_value` fills a constant shell instead.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shell: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shell_value: Option<f64>,
}

impl LatticeConfig {
    pub fn build(&self, r0: i64) -> Result<LatticeSpec, ConfigError> {
        let boundary = match self.bc.as_str() {
            "torus" => Boundary::Torus,
            "free" => Boundary::Free,
            "fixed" => {
                let inner: usize = self.l.iter().map(|&l| l as usize).product();
                let enlarged: usize =
                    self.l.iter().map(|&l| (l + 2 * r0) as usize).product();
                let want = enlarged - inner;
                let shell = match (&self.shell, self.shell_value) {
                    (Some(shell), None) => shell.clone(),
                    (None, Some(v)) => vec![v; want],
                    (None, None) => {
                        return Err(ConfigError::Invalid(
                            "fixed boundary needs `shell` or `shell_value`".into(),
                        ))
                    }
                    (Some(_), Some(_)) => {
                        return Err(ConfigError::Invalid(
                            "give either `shell` or `shell_value`, not both".into(),
                        ))
                    }
                };
                Boundary::Fixed { shell }
            }
            other => {
                return Err(ConfigError::Invalid(format!(
                    "unknown boundary condition {other:?} (torus | free | fixed)"
                )))
            }
        };
        Ok(build_lattice(self.dim, self.l.clone(), boundary, r0)?)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricConfig {
    pub alpha: f64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig { alpha: 0.0 }
    }
}

// ---------------------------------------------------------------------------
// Sampler and analysis settings
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    pub sweeps: u64,
    /// Defaults to 10% of sweeps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burnin: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thin: Option<u64>,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_every: Option<u64>,
}

impl SamplerConfig {
    pub fn order(&self) -> Result<SweepOrder, ConfigError> {
        match self.order.as_deref() {
            None | Some("sequential") => Ok(SweepOrder::Sequential),
            Some("checkerboard") => Ok(SweepOrder::Checkerboard),
            Some(other) => Err(ConfigError::Invalid(format!(
                "unknown sweep order {other:?} (sequential | checkerboard)"
            ))),
        }
    }

    pub fn run_params(&self) -> Result<RunParams, ConfigError> {
        Ok(RunParams {
            sweeps: self.sweeps,
            burnin: self.burnin.unwrap_or(self.sweeps / 10),
            thin: self.thin.unwrap_or(1),
            seed: self.seed,
            order: self.order()?,
            snapshot_every: self.snapshot_every,
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observable: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_displacement: Option<i64>,
    /// Exponential-moment parameter; must stay below eps / 2.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batches: Option<usize>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig { observable: None, max_displacement: None, a: None, batches: None }
    }
}

impl AnalysisConfig {
    pub fn observable(&self) -> Result<Observable, ConfigError> {
        parse_observable(self.observable.as_deref().unwrap_or("tanh"))
    }

    pub fn max_displacement(&self) -> i64 {
        self.max_displacement.unwrap_or(4)
    }

    pub fn a(&self) -> f64 {
        self.a.unwrap_or(0.0)
    }

    pub fn batches(&self) -> usize {
        self.batches.unwrap_or(crate::analysis::DEFAULT_BATCHES)
    }
}

pub fn parse_observable(name: &str) -> Result<Observable, ConfigError> {
    match name {
        "x" | "coordinate" => Ok(Observable::Coordinate),
        "tanh" => Ok(Observable::Tanh),
        "one_plus_tanh" => Ok(Observable::OnePlusTanh),
        other => Err(ConfigError::Invalid(format!(
            "unknown observable {other:?} (x | coordinate | tanh | one_plus_tanh)"
        ))),
    }
}

/// All displacements with `1 <= |k|_1 <= radius` plus the zero displacement,
/// in deterministic order.
pub fn displacement_ball(dim: usize, radius: i64) -> Vec<Displacement> {
    let mut out = Vec::new();
    let mut current = vec![0i64; dim];
    fn recurse(axis: usize, dim: usize, radius: i64, current: &mut Vec<i64>, out: &mut Vec<Displacement>) {
        if axis == dim {
            out.push(Displacement(current.clone()));
            return;
        }
        let used: i64 = current[..axis].iter().map(|c| c.abs()).sum();
        for v in -(radius - used)..=(radius - used) {
            current[axis] = v;
            recurse(axis + 1, dim, radius, current, out);
        }
        current[axis] = 0;
    }
    recurse(0, dim, radius, &mut current, &mut out);
    out.sort();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"{
        "model": {"type": "model1", "n": 1, "lambda": 0.02, "b": {"1": 1.0, "-1": 1.0}},
        "lattice": {"dim": 1, "L": [64], "bc": "torus"},
        "metric": {"alpha": 0.5},
        "sampler": {"sweeps": 1000, "burnin": 200, "thin": 4, "seed": 12345, "order": "checkerboard"},
        "analysis": {"observable": "tanh", "max_displacement": 8, "a": 1.0}
    }"#;

    #[test]
    fn parses_the_reference_schema() {
        let config = RunConfig::from_json(EXAMPLE).unwrap();
        let model = config.model.build().unwrap();
        assert_eq!(model.r0(), 1);
        assert_eq!(model.lambda(), 0.02);
        let lat = config.lattice.build(model.r0()).unwrap();
        assert_eq!(lat.n_sites(), 64);
        let params = config.sampler.run_params().unwrap();
        assert_eq!(params.thin, 4);
        assert_eq!(params.order, SweepOrder::Checkerboard);
        assert_eq!(config.analysis.max_displacement(), 8);
    }

    #[test]
    fn seed_is_mandatory() {
        let no_seed = r#"{
            "model": {"type": "model1", "n": 1, "lambda": 0.0},
            "lattice": {"dim": 1, "L": [8], "bc": "torus"},
            "sampler": {"sweeps": 100}
        }"#;
        assert!(RunConfig::from_json(no_seed).is_err());
    }

    #[test]
    fn burnin_defaults_to_ten_percent() {
        let cfg = r#"{
            "model": {"type": "gaussian", "epsilon": 1.0, "lambda": 0.0},
            "lattice": {"dim": 1, "L": [8], "bc": "torus"},
            "sampler": {"sweeps": 1000, "seed": 1}
        }"#;
        let config = RunConfig::from_json(cfg).unwrap();
        let params = config.sampler.run_params().unwrap();
        assert_eq!(params.burnin, 100);
        assert_eq!(params.thin, 1);
        assert_eq!(params.order, SweepOrder::Sequential);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let cfg = r#"{
            "model": {"type": "model1", "n": 1, "lambda": 0.0, "typo": 3},
            "lattice": {"dim": 1, "L": [8], "bc": "torus"},
            "sampler": {"sweeps": 100, "seed": 1}
        }"#;
        assert!(RunConfig::from_json(cfg).is_err());
    }

    #[test]
    fn custom_model_schema() {
        let cfg = r#"{
            "model": {"type": "custom", "F": [0.0, 0.0, 0.5], "G": {"1": [0.0, 0.0, 1.0]}, "lambda": 0.1},
            "lattice": {"dim": 1, "L": [8], "bc": "torus"},
            "sampler": {"sweeps": 100, "seed": 1}
        }"#;
        let config = RunConfig::from_json(cfg).unwrap();
        let model = config.model.build().unwrap();
        assert_eq!(model.epsilon(), 1.0);
        assert_eq!(model.pairs().len(), 2);
    }

    #[test]
    fn two_dimensional_displacement_keys() {
        let cfg = r#"{
            "model": {"type": "model1", "n": 1, "lambda": 0.01, "b": {"1,0": 1.0, "0,1": 0.5}},
            "lattice": {"dim": 2, "L": [8, 8], "bc": "torus"},
            "sampler": {"sweeps": 100, "seed": 1}
        }"#;
        let config = RunConfig::from_json(cfg).unwrap();
        let model = config.model.build().unwrap();
        assert_eq!(model.pairs().len(), 4);
        assert!(model.pairs().contains_key(&Displacement(vec![-1, 0])));
    }

    #[test]
    fn fixed_boundary_with_constant_shell() {
        let cfg = r#"{
            "model": {"type": "gaussian", "epsilon": 1.0, "lambda": 0.1, "b": {"1": 1.0, "-1": 1.0}},
            "lattice": {"dim": 1, "L": [4], "bc": "fixed", "shell_value": 0.5},
            "sampler": {"sweeps": 100, "seed": 1}
        }"#;
        let config = RunConfig::from_json(cfg).unwrap();
        let model = config.model.build().unwrap();
        let lat = config.lattice.build(model.r0()).unwrap();
        assert_eq!(lat.n_sites(), 4);
    }

    #[test]
    fn displacement_ball_counts() {
        // d = 1: {-r..r} -> 2r + 1 entries.
        assert_eq!(displacement_ball(1, 4).len(), 9);
        // d = 2, |k|_1 <= 2: 1 + 4 + 8 = 13.
        assert_eq!(displacement_ball(2, 2).len(), 13);
        assert!(displacement_ball(2, 2).contains(&Displacement(vec![0, 0])));
    }
}
