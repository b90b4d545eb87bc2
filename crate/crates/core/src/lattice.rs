//! Finite lattice boxes with boundary conditions, the weighted interaction
//! sum `gamma_d` with its uniqueness threshold, and the exactly solvable
//! quadratic-model covariance oracle.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::potentials::{check_model, ConditionReport, Displacement, ModelSpec};

#[derive(Debug, Error)]
pub enum LatticeError {
    #[error("wrap violation: torus extent {extent} < 2 r0 + 1 = {min} (dimension {axis})")]
    WrapViolation { axis: usize, extent: i64, min: i64 },

    #[error("boundary shell has {got} values, lattice needs {want}")]
    ShellMismatch { got: usize, want: usize },

    #[error("invalid lattice: {0}")]
    Invalid(String),

    #[error("not Gaussian: {0}")]
    NotGaussian(String),

    #[error("oracle limited to 4096 sites, lattice has {0}")]
    TooLarge(usize),

    #[error("conditions A-C failed: {0:?}")]
    ConditionFailed(Box<ConditionReport>),

    #[error("model dimension {model} does not match lattice dimension {lattice}")]
    DimensionMismatch { model: usize, lattice: usize },
}

/// Boundary condition of the finite box.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum Boundary {
    /// Periodic wrap in every direction.
    Torus,
    /// Pairs leaving the volume are dropped.
    Free,
    /// Conditioning on fixed spin values on a shell of width `r0` around the
    /// box, enumerated row-major over the enlarged box with interior sites
    /// skipped.
    Fixed { shell: Vec<f64> },
}

/// Where a displaced site lands.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SiteRef {
    Volume(usize),
    Shell(f64),
    Outside,
}

/// Finite box `L_1 x ... x L_d` with row-major site indexing.
#[derive(Clone, Debug, Serialize)]
pub struct LatticeSpec {
    dim: usize,
    extents: Vec<i64>,
    boundary: Boundary,
    r0: i64,
    n_sites: usize,
    #[serde(skip)]
    shell_lookup: BTreeMap<Vec<i64>, usize>,
}

pub fn build_lattice(
    dim: usize,
    extents: Vec<i64>,
    boundary: Boundary,
    r0: i64,
) -> Result<LatticeSpec, LatticeError> {
    if dim == 0 || extents.len() != dim {
        return Err(LatticeError::Invalid(format!(
            "need {dim} extents, got {}",
            extents.len()
        )));
    }
    if extents.iter().any(|&l| l < 1) {
        return Err(LatticeError::Invalid("extents must be positive".into()));
    }
    if r0 < 0 {
        return Err(LatticeError::Invalid("negative interaction range".into()));
    }
    if matches!(boundary, Boundary::Torus) {
        for (axis, &l) in extents.iter().enumerate() {
            if l < 2 * r0 + 1 {
                return Err(LatticeError::WrapViolation { axis, extent: l, min: 2 * r0 + 1 });
            }
        }
    }
    let n_sites: usize = extents.iter().map(|&l| l as usize).product();
    let mut shell_lookup = BTreeMap::new();
    if let Boundary::Fixed { shell } = &boundary {
        let enlarged: usize = extents.iter().map(|&l| (l + 2 * r0) as usize).product();
        let want = enlarged - n_sites;
        if shell.len() != want {
            return Err(LatticeError::ShellMismatch { got: shell.len(), want });
        }
        // Row-major enumeration of the enlarged box, interior skipped.
        let enlarged_total: usize = extents.iter().map(|&l| (l + 2 * r0) as usize).product();
        let mut idx = 0usize;
        for flat in 0..enlarged_total {
            let mut rem = flat;
            let mut coords = vec![0i64; dim];
            for axis in (0..dim).rev() {
                let l = (extents[axis] + 2 * r0) as usize;
                coords[axis] = (rem % l) as i64 - r0;
                rem /= l;
            }
            let interior = coords.iter().zip(&extents).all(|(&c, &l)| c >= 0 && c < l);
            if !interior {
                shell_lookup.insert(coords, idx);
                idx += 1;
            }
        }
    }
    Ok(LatticeSpec { dim, extents, boundary, r0, n_sites, shell_lookup })
}

impl LatticeSpec {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn extents(&self) -> &[i64] {
        &self.extents
    }

    pub fn boundary(&self) -> &Boundary {
        &self.boundary
    }

    pub fn r0(&self) -> i64 {
        self.r0
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn is_torus(&self) -> bool {
        matches!(self.boundary, Boundary::Torus)
    }

    pub fn coords(&self, mut site: usize) -> Vec<i64> {
        let mut coords = vec![0i64; self.dim];
        for axis in (0..self.dim).rev() {
            let l = self.extents[axis] as usize;
            coords[axis] = (site % l) as i64;
            site /= l;
        }
        coords
    }

    pub fn index(&self, coords: &[i64]) -> usize {
        let mut idx = 0usize;
        for (axis, &c) in coords.iter().enumerate() {
            idx = idx * self.extents[axis] as usize + c as usize;
        }
        idx
    }

    /// Site reached from `site` by `displacement`, honoring the boundary.
    pub fn resolve(&self, site: usize, displacement: &Displacement) -> SiteRef {
        let coords = self.coords(site);
        let mut target: Vec<i64> =
            coords.iter().zip(&displacement.0).map(|(&c, &d)| c + d).collect();
        match &self.boundary {
            Boundary::Torus => {
                for (axis, t) in target.iter_mut().enumerate() {
                    let l = self.extents[axis];
                    *t = t.rem_euclid(l);
                }
                SiteRef::Volume(self.index(&target))
            }
            Boundary::Free => {
                if target.iter().zip(&self.extents).all(|(&t, &l)| t >= 0 && t < l) {
                    SiteRef::Volume(self.index(&target))
                } else {
                    SiteRef::Outside
                }
            }
            Boundary::Fixed { shell } => {
                if target.iter().zip(&self.extents).all(|(&t, &l)| t >= 0 && t < l) {
                    SiteRef::Volume(self.index(&target))
                } else {
                    match self.shell_lookup.get(&target) {
                        Some(&slot) => SiteRef::Shell(shell[slot]),
                        None => SiteRef::Outside,
                    }
                }
            }
        }
    }

    /// In-volume shifted site for displacement averaging; torus wraps, other
    /// boundaries return `None` when the shift leaves the box.
    pub fn shift_site(&self, site: usize, displacement: &Displacement) -> Option<usize> {
        match self.resolve(site, displacement) {
            SiteRef::Volume(m) => Some(m),
            _ => None,
        }
    }
}

// ---------------------------------------------------------------------------
// Semimetric and the uniqueness threshold
// ---------------------------------------------------------------------------

/// Translation-invariant semimetric `d(k, j) = alpha * |k - j|_1` entering
/// the exponential weights of the correlation-decay bound.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Semimetric {
    pub alpha: f64,
}

impl Semimetric {
    pub fn new(alpha: f64) -> Result<Self, LatticeError> {
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(LatticeError::Invalid(format!("alpha = {alpha} must be >= 0")));
        }
        Ok(Semimetric { alpha })
    }

    pub fn weight(&self, d: &Displacement) -> f64 {
        (self.alpha * d.norm_l1() as f64).exp()
    }
}

/// Semimetric-weighted sum of the interaction-ratio suprema over all stored
/// displacements (both signs).
pub fn gamma_d(c: &BTreeMap<Displacement, f64>, metric: &Semimetric) -> f64 {
    c.iter().map(|(d, &cj)| metric.weight(d) * cj).sum()
}

/// Uniqueness verdict: the coupling is compared against `1 / gamma_d`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DobrushinReport {
    pub epsilon: f64,
    pub c: BTreeMap<Displacement, f64>,
    pub gamma_d: f64,
    /// `1 / gamma_d`; `None` encodes an infinite threshold (no interaction).
    pub threshold: Option<f64>,
    pub lambda: f64,
    pub unique: bool,
    /// Worst ratio-optimizer tolerance backing the `c` values.
    pub tolerance: f64,
}

impl DobrushinReport {
    pub fn threshold_value(&self) -> f64 {
        self.threshold.unwrap_or(f64::INFINITY)
    }
}

/// Runs the admissibility checks and aggregates the threshold report.
/// Condition failures propagate as errors.
pub fn uniqueness_threshold(
    model: &ModelSpec,
    metric: &Semimetric,
) -> Result<DobrushinReport, LatticeError> {
    let report = check_model(model);
    if !report.all_ok() {
        return Err(LatticeError::ConditionFailed(Box::new(report)));
    }
    let gamma = gamma_d(&report.c, metric);
    let threshold = if gamma > 0.0 { Some(1.0 / gamma) } else { None };
    let unique = model.lambda() < threshold.unwrap_or(f64::INFINITY) - report.tolerance;
    Ok(DobrushinReport {
        epsilon: report.epsilon,
        c: report.c,
        gamma_d: gamma,
        threshold,
        lambda: model.lambda(),
        unique,
        tolerance: report.tolerance,
    })
}

// ---------------------------------------------------------------------------
// Quadratic-model oracle
// ---------------------------------------------------------------------------

/// Exact mean and covariance of a quadratic (Gaussian) model on a finite
/// lattice, from the dense inverse of the precision matrix.
#[derive(Clone, Debug)]
pub struct GaussianOracle {
    pub cov: DMatrix<f64>,
    pub mean: DVector<f64>,
}

impl GaussianOracle {
    pub fn cov_entry(&self, i: usize, j: usize) -> f64 {
        self.cov[(i, j)]
    }
}

/// Assembles the quadratic form of the energy exactly and inverts twice the
/// form with a dense symmetric positive-definite solve. Limited to 4096
/// sites; errors on any potential of degree above 2.
pub fn gaussian_covariance_oracle(
    model: &ModelSpec,
    lattice: &LatticeSpec,
) -> Result<GaussianOracle, LatticeError> {
    let n = lattice.n_sites();
    if n > 4096 {
        return Err(LatticeError::TooLarge(n));
    }
    if let Some(md) = model.interaction_dim() {
        if md != lattice.dim() {
            return Err(LatticeError::DimensionMismatch { model: md, lattice: lattice.dim() });
        }
    }
    let f = model.f().poly();
    if f.degree().map_or(false, |d| d > 2) {
        return Err(LatticeError::NotGaussian(format!(
            "self potential has degree {:?}",
            f.degree()
        )));
    }
    let eps_half = f.coeffs().get(2).copied().unwrap_or(0.0);
    if !(eps_half > 0.0) {
        return Err(LatticeError::NotGaussian("self potential is not quadratic".into()));
    }
    let f_lin = f.coeffs().get(1).copied().unwrap_or(0.0);

    let lambda = model.lambda();
    let mut q = DMatrix::<f64>::zeros(n, n);
    let mut lin = DVector::<f64>::zeros(n);
    for k in 0..n {
        q[(k, k)] += eps_half;
        lin[k] += f_lin;
    }
    for (d, pair) in model.pairs() {
        let g = pair.poly();
        if g.degree().map_or(false, |deg| deg > 2) {
            return Err(LatticeError::NotGaussian(format!(
                "pair potential at {d} has degree {:?}",
                g.degree()
            )));
        }
        let b = g.coeffs().get(2).copied().unwrap_or(0.0);
        let a = g.coeffs().get(1).copied().unwrap_or(0.0);
        for k in 0..n {
            match lattice.resolve(k, d) {
                // In-volume pairs are visited from both endpoints: halve.
                SiteRef::Volume(m) => {
                    q[(k, k)] += 0.5 * lambda * b;
                    q[(m, m)] += 0.5 * lambda * b;
                    q[(k, m)] -= 0.5 * lambda * b;
                    q[(m, k)] -= 0.5 * lambda * b;
                    lin[k] += 0.5 * lambda * a;
                    lin[m] -= 0.5 * lambda * a;
                }
                SiteRef::Shell(v) => {
                    q[(k, k)] += lambda * b;
                    lin[k] += lambda * (a - 2.0 * b * v);
                }
                SiteRef::Outside => {}
            }
        }
    }

    let precision = 2.0 * q;
    let chol = precision
        .clone()
        .cholesky()
        .ok_or_else(|| LatticeError::NotGaussian("precision matrix is not positive definite".into()))?;
    let cov = chol.inverse();
    let mean = -(&cov * lin);
    Ok(GaussianOracle { cov, mean })
}
