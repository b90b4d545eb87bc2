//! Observables and the numerical verifiers: weighted Lipschitz seminorms,
//! covariance estimation with batch-means errors, exponential decay fits, the
//! correlation-decay bound, moment/temperedness bounds, and the 1-D
//! quadrature checks of the Brascamp-Lieb, Poincare, log-Sobolev and
//! one-step contraction inequalities.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{DobrushinReport, LatticeError, LatticeSpec, Semimetric};
use crate::numerics::{
    integrate, integrate_many, maximize_1d, Density1D, NumericsError, DEFAULT_TAIL_TOL,
};
use crate::poly::Polynomial;
use crate::potentials::{Displacement, ModelSpec, PotentialError, SelfPotential};
use crate::sampler::SampleRecord;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("unbounded seminorm: {0}")]
    UnboundedSeminorm(String),

    #[error("insufficient samples: {got} records, need at least {need}")]
    InsufficientSamples { got: usize, need: usize },

    #[error("no signal: {0}")]
    NoSignal(String),

    #[error("outside uniqueness region: lambda * gamma_d = {0}")]
    OutsideUniquenessRegion(f64),

    #[error("moment parameter a = {a} out of range [0, {limit})")]
    AOutOfRange { a: f64, limit: f64 },

    #[error("observable must be bounded for product seminorms: {0}")]
    UnboundedObservable(String),

    #[error("grid-sup not converged under refinement: last improvement {0:.3e}")]
    GridSupNotConverged(f64),

    #[error("derivative identity cross-check failed: {0}")]
    CrossCheckFailed(String),

    #[error(transparent)]
    Numerics(#[from] NumericsError),

    #[error(transparent)]
    Potential(#[from] PotentialError),

    #[error(transparent)]
    Lattice(#[from] LatticeError),
}

// ---------------------------------------------------------------------------
// Observables
// ---------------------------------------------------------------------------

/// Single-site test functions with exact derivatives.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum Observable {
    /// phi(u) = u
    Coordinate,
    /// phi(u) = tanh(u)
    Tanh,
    /// phi(u) = 1 + tanh(u)
    OnePlusTanh,
    /// phi(u) = u + amplitude * sin(u)
    XPlusSin { amplitude: f64 },
    /// phi(u) = exp(u / 2)
    ExpHalf,
    /// phi(u) = c
    Constant(f64),
    /// Arbitrary polynomial.
    Poly(Polynomial),
}

impl Observable {
    pub fn eval(&self, u: f64) -> f64 {
        match self {
            Observable::Coordinate => u,
            Observable::Tanh => u.tanh(),
            Observable::OnePlusTanh => 1.0 + u.tanh(),
            Observable::XPlusSin { amplitude } => u + amplitude * u.sin(),
            Observable::ExpHalf => (0.5 * u).exp(),
            Observable::Constant(c) => *c,
            Observable::Poly(p) => p.eval(u),
        }
    }

    pub fn deriv(&self, u: f64) -> f64 {
        match self {
            Observable::Coordinate => 1.0,
            Observable::Tanh | Observable::OnePlusTanh => {
                let t = u.tanh();
                1.0 - t * t
            }
            Observable::XPlusSin { amplitude } => 1.0 + amplitude * u.cos(),
            Observable::ExpHalf => 0.5 * (0.5 * u).exp(),
            Observable::Constant(_) => 0.0,
            Observable::Poly(p) => p.derivative().eval(u),
        }
    }

    /// Supremum of |phi| when finite.
    pub fn sup_abs(&self) -> Option<f64> {
        match self {
            Observable::Tanh => Some(1.0),
            Observable::OnePlusTanh => Some(2.0),
            Observable::Constant(c) => Some(c.abs()),
            Observable::Poly(p) if p.degree().map_or(true, |d| d == 0) => {
                Some(p.constant_term().abs())
            }
            _ => None,
        }
    }

    pub fn name(&self) -> String {
        match self {
            Observable::Coordinate => "x".into(),
            Observable::Tanh => "tanh".into(),
            Observable::OnePlusTanh => "one_plus_tanh".into(),
            Observable::XPlusSin { amplitude } => format!("x_plus_{amplitude}sin"),
            Observable::ExpHalf => "exp_half".into(),
            Observable::Constant(c) => format!("const_{c}"),
            Observable::Poly(_) => "poly".into(),
        }
    }
}

/// Weighted Lipschitz seminorm of a single-site observable:
/// `sup_u |phi'(u)| / sqrt(F''(u))`.
pub fn delta_k(obs: &Observable, f: &SelfPotential) -> Result<f64, AnalysisError> {
    if matches!(obs, Observable::Constant(_)) {
        return Ok(0.0);
    }
    let fdd = f.poly().derivative().derivative();
    let obs = obs.clone();
    match maximize_1d(move |u| obs.deriv(u).abs() / fdd.eval(u).sqrt()) {
        Ok(r) => Ok(r.max),
        Err(NumericsError::DivergentSup(v)) => Err(AnalysisError::UnboundedSeminorm(format!(
            "|phi'| / sqrt(F'') grows without bound (reached {v:.3e})"
        ))),
        Err(e) => Err(e.into()),
    }
}

// ---------------------------------------------------------------------------
// Covariance estimation
// ---------------------------------------------------------------------------

/// Rectangular sample matrix: one row per retained sweep, one column per
/// site, raw spin values.
#[derive(Clone, Debug)]
pub struct Samples {
    pub n_sites: usize,
    pub sweeps: Vec<u64>,
    data: Vec<f64>,
}

impl Samples {
    pub fn from_records(records: &[SampleRecord]) -> Self {
        let n_sites = records.first().map_or(0, |r| r.field.len());
        let mut data = Vec::with_capacity(records.len() * n_sites);
        let mut sweeps = Vec::with_capacity(records.len());
        for r in records {
            assert_eq!(r.field.len(), n_sites, "ragged sample records");
            sweeps.push(r.sweep);
            data.extend_from_slice(&r.field);
        }
        Samples { n_sites, sweeps, data }
    }

    pub fn from_rows(sweeps: Vec<u64>, rows: Vec<Vec<f64>>) -> Self {
        let n_sites = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * n_sites);
        for r in &rows {
            assert_eq!(r.len(), n_sites, "ragged sample rows");
            data.extend_from_slice(r);
        }
        Samples { n_sites, sweeps, data }
    }

    pub fn n_records(&self) -> usize {
        self.sweeps.len()
    }

    pub fn record(&self, t: usize) -> &[f64] {
        &self.data[t * self.n_sites..(t + 1) * self.n_sites]
    }
}

pub const DEFAULT_BATCHES: usize = 32;
const MIN_RECORDS: usize = 100;

/// Two-point function estimates per displacement with batch-means errors.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CovarianceSeries {
    pub displacements: Vec<Displacement>,
    pub cov: Vec<f64>,
    pub stderr: Vec<f64>,
    pub n_samples: usize,
    pub n_batches: usize,
    pub f_name: String,
    pub g_name: String,
}

/// Empirical `cov(f(x_b), g(x_{b+k}))` per displacement `k`.
///
/// On a torus (`base_site = None`) the estimate is averaged over every base
/// site; with `base_site` given only that base is used, which is what free
/// and fixed boundaries require. Standard errors come from `n_batches`
/// contiguous record batches.
pub fn estimate_covariances(
    samples: &Samples,
    lattice: &LatticeSpec,
    f: &Observable,
    g: &Observable,
    base_site: Option<usize>,
    displacements: &[Displacement],
    n_batches: usize,
) -> Result<CovarianceSeries, AnalysisError> {
    let n = samples.n_records();
    if n < MIN_RECORDS {
        return Err(AnalysisError::InsufficientSamples { got: n, need: MIN_RECORDS });
    }
    if base_site.is_none() && !lattice.is_torus() {
        return Err(AnalysisError::NoSignal(
            "translation averaging needs a torus; pass a base site instead".into(),
        ));
    }
    let bases: Vec<usize> = match base_site {
        Some(b) => vec![b],
        None => (0..lattice.n_sites()).collect(),
    };
    // Valid (base, target) site pairs per displacement.
    let mut pairs: Vec<Vec<(usize, usize)>> = Vec::with_capacity(displacements.len());
    for d in displacements {
        let valid: Vec<(usize, usize)> = bases
            .iter()
            .filter_map(|&b| lattice.shift_site(b, d).map(|m| (b, m)))
            .collect();
        if valid.is_empty() {
            return Err(AnalysisError::NoSignal(format!(
                "displacement {d} has no valid base sites on this lattice"
            )));
        }
        pairs.push(valid);
    }

    // Per-record translation-averaged statistics.
    let nd = displacements.len();
    let mut prod = vec![vec![0.0f64; n]; nd];
    let mut fmean = vec![vec![0.0f64; n]; nd];
    let mut gmean = vec![vec![0.0f64; n]; nd];
    for t in 0..n {
        let row = samples.record(t);
        for (di, valid) in pairs.iter().enumerate() {
            let mut sp = 0.0;
            let mut sf = 0.0;
            let mut sg = 0.0;
            for &(b, m) in valid {
                let fv = f.eval(row[b]);
                let gv = g.eval(row[m]);
                sp += fv * gv;
                sf += fv;
                sg += gv;
            }
            let c = valid.len() as f64;
            prod[di][t] = sp / c;
            fmean[di][t] = sf / c;
            gmean[di][t] = sg / c;
        }
    }

    let cov_of = |ps: &[f64], fs: &[f64], gs: &[f64]| -> f64 {
        let m = ps.len() as f64;
        let p = ps.iter().sum::<f64>() / m;
        let fm = fs.iter().sum::<f64>() / m;
        let gm = gs.iter().sum::<f64>() / m;
        p - fm * gm
    };

    let batch = n / n_batches;
    if batch == 0 {
        return Err(AnalysisError::InsufficientSamples { got: n, need: n_batches });
    }
    let mut cov = Vec::with_capacity(nd);
    let mut stderr = Vec::with_capacity(nd);
    for di in 0..nd {
        cov.push(cov_of(&prod[di], &fmean[di], &gmean[di]));
        let mut batch_vals = Vec::with_capacity(n_batches);
        for bi in 0..n_batches {
            let range = bi * batch..(bi + 1) * batch;
            batch_vals.push(cov_of(
                &prod[di][range.clone()],
                &fmean[di][range.clone()],
                &gmean[di][range],
            ));
        }
        let bm = batch_vals.iter().sum::<f64>() / n_batches as f64;
        let var = batch_vals.iter().map(|v| (v - bm) * (v - bm)).sum::<f64>()
            / (n_batches as f64 - 1.0);
        stderr.push((var / n_batches as f64).sqrt());
    }

    Ok(CovarianceSeries {
        displacements: displacements.to_vec(),
        cov,
        stderr,
        n_samples: n,
        n_batches,
        f_name: f.name(),
        g_name: g.name(),
    })
}

// ---------------------------------------------------------------------------
// Decay-rate fit
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecayFit {
    pub rate: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Per series entry: included in the fit after the 3-sigma signal cut.
    pub used: Vec<bool>,
}

/// Weighted least squares of `log |cov(k)|` against `|k|_1`, weights
/// `(cov / stderr)^2`; displacements failing the 3-sigma cut (and the zero
/// displacement, which is a variance, not a decay point) are excluded.
pub fn fit_decay_rate(series: &CovarianceSeries) -> Result<DecayFit, AnalysisError> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut ws = Vec::new();
    let mut used = vec![false; series.displacements.len()];
    for (i, d) in series.displacements.iter().enumerate() {
        let c = series.cov[i];
        let s = series.stderr[i];
        if d.norm_l1() == 0 || c == 0.0 || c.abs() <= 3.0 * s {
            continue;
        }
        used[i] = true;
        xs.push(d.norm_l1() as f64);
        ys.push(c.abs().ln());
        let rel = s.max(c.abs() * 1e-12) / c.abs();
        ws.push(1.0 / (rel * rel));
    }
    if xs.len() < 3 {
        return Err(AnalysisError::NoSignal(format!(
            "{} displacements survive the 3-sigma cut, need 3",
            xs.len()
        )));
    }
    let distinct = {
        let mut v = xs.clone();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v.dedup();
        v.len()
    };
    if distinct < 2 {
        return Err(AnalysisError::NoSignal(
            "all surviving displacements share one distance".into(),
        ));
    }

    let wsum: f64 = ws.iter().sum();
    let xbar = xs.iter().zip(&ws).map(|(x, w)| x * w).sum::<f64>() / wsum;
    let ybar = ys.iter().zip(&ws).map(|(y, w)| y * w).sum::<f64>() / wsum;
    let sxx: f64 = xs.iter().zip(&ws).map(|(x, w)| w * (x - xbar) * (x - xbar)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(&ys)
        .zip(&ws)
        .map(|((x, y), w)| w * (x - xbar) * (y - ybar))
        .sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .zip(&ws)
        .map(|((x, y), w)| {
            let r = y - (intercept + slope * x);
            w * r * r
        })
        .sum();
    let ss_tot: f64 = ys.iter().zip(&ws).map(|(y, w)| w * (y - ybar) * (y - ybar)).sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(DecayFit { rate: -slope, intercept, r_squared, used })
}

// ---------------------------------------------------------------------------
// Bound reports
// ---------------------------------------------------------------------------

/// Outcome of one inequality check. `pass` means
/// `lhs <= rhs + 3 stat_error + num_tol`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundReport {
    pub name: String,
    pub lhs: f64,
    /// `None` encodes an unbounded right side (informational reports).
    pub rhs: Option<f64>,
    pub slack: Option<f64>,
    pub stat_error: f64,
    pub quad_error: f64,
    pub num_tol: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl BoundReport {
    fn bounded(
        name: &str,
        lhs: f64,
        rhs: f64,
        stat_error: f64,
        quad_error: f64,
        note: Option<String>,
    ) -> Self {
        let num_tol = (10.0 * quad_error).max(1e-10);
        BoundReport {
            name: name.to_string(),
            lhs,
            rhs: Some(rhs),
            slack: Some(rhs - lhs),
            stat_error,
            quad_error,
            num_tol,
            pass: lhs <= rhs + 3.0 * stat_error + num_tol,
            note,
        }
    }

    fn informational(name: &str, lhs: f64, stat_error: f64, note: Option<String>) -> Self {
        BoundReport {
            name: name.to_string(),
            lhs,
            rhs: None,
            slack: None,
            stat_error,
            quad_error: 0.0,
            num_tol: 0.0,
            pass: lhs.is_finite(),
            note,
        }
    }
}

// ---------------------------------------------------------------------------
// Correlation-decay bound
// ---------------------------------------------------------------------------

/// Weighted partial sum `sum_k e^{alpha |k|_1} |cov(k)|` against
/// `delta(f) delta(g) / (1 - lambda gamma_d)` for single-site observables.
///
/// The left side truncates the lattice sum at the measured displacements and
/// is therefore a lower bound on the full sum; the report notes this.
pub fn check_decay_bound(
    series: &CovarianceSeries,
    model: &ModelSpec,
    metric: &Semimetric,
    f: &Observable,
    g: &Observable,
    dobrushin: &DobrushinReport,
) -> Result<BoundReport, AnalysisError> {
    let lambda_gamma = model.lambda() * dobrushin.gamma_d;
    if lambda_gamma >= 1.0 {
        return Err(AnalysisError::OutsideUniquenessRegion(lambda_gamma));
    }
    let df = delta_k(f, model.f())?;
    let dg = delta_k(g, model.f())?;
    let mut lhs = 0.0;
    let mut stat = 0.0;
    for (i, d) in series.displacements.iter().enumerate() {
        let w = metric.weight(d);
        lhs += w * series.cov[i].abs();
        stat += w * series.stderr[i];
    }
    let rhs = df * dg / (1.0 - lambda_gamma);
    Ok(BoundReport::bounded(
        "decay_bound",
        lhs,
        rhs,
        stat,
        0.0,
        Some(format!(
            "partial sum (lower bound on LHS) over {} displacements; lambda*gamma = {lambda_gamma:.6}",
            series.displacements.len()
        )),
    ))
}

// ---------------------------------------------------------------------------
// Moment and temperedness bounds
// ---------------------------------------------------------------------------

fn batch_stats(values: &[f64], n_batches: usize) -> (f64, f64) {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let batch = (n / n_batches).max(1);
    let usable = n_batches.min(n / batch).max(2);
    let mut batch_means = Vec::with_capacity(usable);
    for bi in 0..usable.min(n / batch) {
        let chunk = &values[bi * batch..(bi + 1) * batch];
        batch_means.push(chunk.iter().sum::<f64>() / chunk.len() as f64);
    }
    let k = batch_means.len() as f64;
    let bm = batch_means.iter().sum::<f64>() / k;
    let var = batch_means.iter().map(|v| (v - bm) * (v - bm)).sum::<f64>() / (k - 1.0).max(1.0);
    (mean, (var / k).sqrt())
}

/// Cumulative curvature length `rho(x, 0) = int_0^x sqrt(F'')`, tabulated
/// once over `[-x_max, x_max]` and evaluated with a local Simpson
/// correction.
pub struct RhoTable {
    lo: f64,
    h: f64,
    values: Vec<f64>,
    prefix: Vec<f64>,
    sqrt_fdd: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    at_zero: f64,
}

impl RhoTable {
    pub fn new(f: &SelfPotential, x_max: f64) -> Self {
        let fdd = f.poly().derivative().derivative();
        let sqrt_fdd = move |x: f64| fdd.eval(x).sqrt();
        let lo = -x_max;
        let n = 8192usize;
        let h = 2.0 * x_max / n as f64;
        let values: Vec<f64> = (0..=2 * n).map(|j| sqrt_fdd(lo + 0.5 * h * j as f64)).collect();
        let mut prefix = Vec::with_capacity(n + 1);
        prefix.push(0.0);
        let mut acc = 0.0;
        for i in 0..n {
            acc += h / 6.0 * (values[2 * i] + 4.0 * values[2 * i + 1] + values[2 * i + 2]);
            prefix.push(acc);
        }
        let mut table =
            RhoTable { lo, h, values, prefix, sqrt_fdd: Box::new(sqrt_fdd), at_zero: 0.0 };
        table.at_zero = table.raw(0.0);
        table
    }

    /// `rho(x, 0)` (signed).
    pub fn eval(&self, x: f64) -> f64 {
        self.raw(x) - self.at_zero
    }

    fn raw(&self, x: f64) -> f64 {
        let n = self.prefix.len() - 1;
        let pos = ((x - self.lo) / self.h).clamp(0.0, n as f64 - 1e-12);
        let i = pos as usize;
        let x0 = self.lo + i as f64 * self.h;
        let s = x - x0;
        // Local 3-point Simpson over [x0, x].
        let f0 = self.values[2 * i];
        let fm = (self.sqrt_fdd)(x0 + 0.5 * s);
        let f1 = (self.sqrt_fdd)(x);
        self.prefix[i] + s / 6.0 * (f0 + 4.0 * fm + f1)
    }
}

/// Site-maximal moment reports from chain samples: second moment vs `1/eps`,
/// exponential moment vs `exp(a / (eps - 2a))`, and the (informational)
/// curvature-length second moment.
pub fn check_moment_bounds(
    samples: &Samples,
    model: &ModelSpec,
    a: f64,
    n_batches: usize,
) -> Result<Vec<BoundReport>, AnalysisError> {
    let eps = model.epsilon();
    if !(0.0..eps / 2.0).contains(&a) {
        return Err(AnalysisError::AOutOfRange { a, limit: eps / 2.0 });
    }
    let n = samples.n_records();
    if n < MIN_RECORDS {
        return Err(AnalysisError::InsufficientSamples { got: n, need: MIN_RECORDS });
    }
    let x_max = (0..n)
        .flat_map(|t| samples.record(t).iter())
        .fold(0.0f64, |m, &v| m.max(v.abs()));
    let rho = RhoTable::new(model.f(), x_max + 1.0);

    let mut second = Vec::new();
    let mut expm = Vec::new();
    let mut rho2 = Vec::new();
    let mut series = vec![0.0f64; n];
    for site in 0..samples.n_sites {
        for t in 0..n {
            let x = samples.record(t)[site];
            series[t] = x * x;
        }
        second.push(batch_stats(&series, n_batches));
        for t in 0..n {
            let x = samples.record(t)[site];
            series[t] = (a * x * x).exp();
        }
        expm.push(batch_stats(&series, n_batches));
        for t in 0..n {
            let x = samples.record(t)[site];
            let r = rho.eval(x);
            series[t] = r * r;
        }
        rho2.push(batch_stats(&series, n_batches));
    }

    fn argmax(v: &[(f64, f64)]) -> (usize, (f64, f64)) {
        let (i, &pair) =
            v.iter().enumerate().max_by(|a, b| a.1 .0.total_cmp(&b.1 .0)).unwrap();
        (i, pair)
    }

    let (site2, (m2, s2)) = argmax(&second);
    let (site_e, (me, se)) = argmax(&expm);
    let (site_r, (mr, sr)) = argmax(&rho2);
    Ok(vec![
        BoundReport::bounded(
            "second_moment",
            m2,
            1.0 / eps,
            s2,
            0.0,
            Some(format!("site-max mean of x^2 at site {site2}")),
        ),
        BoundReport::bounded(
            "exp_moment",
            me,
            (a / (eps - 2.0 * a)).exp(),
            se,
            0.0,
            Some(format!("site-max mean of exp({a} x^2) at site {site_e}")),
        ),
        BoundReport::informational(
            "rho_squared_moment",
            mr,
            sr,
            Some(format!(
                "site-max mean of rho(x,0)^2 at site {site_r}; finite value reported, no bound claimed"
            )),
        ),
    ])
}

/// Deterministic quadrature version of the moment bounds for the single-site
/// measure `exp(-F)` (the zero-coupling case).
pub fn moment_quadrature_bounds(
    f: &SelfPotential,
    a: f64,
) -> Result<Vec<BoundReport>, AnalysisError> {
    let eps = f.epsilon();
    if !(0.0..eps / 2.0).contains(&a) {
        return Err(AnalysisError::AOutOfRange { a, limit: eps / 2.0 });
    }
    let d = single_site_density(f, DEFAULT_TAIL_TOL)?;
    let second = integrate(&d, |x| x * x)?;
    // E[exp(a x^2)] through the tilted density exp(-F + a x^2), which is
    // still strongly log-concave with parameter eps - 2a: its truncation
    // certifies both the tilted mass and exp(-F) <= tilted density, and
    // E[exp(a x^2)] = 1 / E_tilted[exp(-a x^2)].
    let f0 = f.poly().clone();
    let f1 = f.poly().derivative();
    let tilted = Density1D::new(
        move |x| -f0.eval(x) + a * x * x,
        move |x| -f1.eval(x) + 2.0 * a * x,
        eps - 2.0 * a,
        DEFAULT_TAIL_TOL,
    )?;
    let reciprocal = integrate(&tilted, |x| (-a * x * x).exp())?;
    let expm_value = 1.0 / reciprocal.value;
    let expm_err = reciprocal.abs_error_estimate / (reciprocal.value * reciprocal.value);
    Ok(vec![
        BoundReport::bounded(
            "second_moment_quadrature",
            second.value,
            1.0 / eps,
            0.0,
            second.abs_error_estimate,
            None,
        ),
        BoundReport::bounded(
            "exp_moment_quadrature",
            expm_value,
            (a / (eps - 2.0 * a)).exp(),
            0.0,
            expm_err,
            None,
        ),
    ])
}

// ---------------------------------------------------------------------------
// 1-D inequality verifiers
// ---------------------------------------------------------------------------

fn single_site_density(f: &SelfPotential, tol: f64) -> Result<Density1D, NumericsError> {
    single_site_density_with_epsilon(f, f.epsilon(), tol)
}

fn single_site_density_with_epsilon(
    f: &SelfPotential,
    epsilon: f64,
    tol: f64,
) -> Result<Density1D, NumericsError> {
    let f0 = f.poly().clone();
    let f1 = f.poly().derivative();
    Density1D::new(move |x| -f0.eval(x), move |x| -f1.eval(x), epsilon, tol)
}

/// Variance bounds under `dmu = e^{-F} dx / Z`:
/// `cov(phi, phi) <= int phi'^2 / F'' dmu <= (1/eps) int phi'^2 dmu`,
/// plus `int phi'^2 / F'' dmu <= delta(phi)^2` when the seminorm is finite.
pub fn verify_brascamp_lieb_1d(
    f: &SelfPotential,
    phi: &Observable,
) -> Result<Vec<BoundReport>, AnalysisError> {
    let d = single_site_density(f, DEFAULT_TAIL_TOL)?;
    let eps = f.epsilon();
    let fdd = f.poly().derivative().derivative();
    let p = phi.clone();
    let p2 = phi.clone();
    let p3 = phi.clone();
    let mean_fn = move |x: f64| p.eval(x);
    let dsq_fn = move |x: f64| {
        let v = p2.deriv(x);
        v * v
    };
    let weighted_fn = move |x: f64| {
        let v = p3.deriv(x);
        v * v / fdd.eval(x)
    };
    let first = integrate_many(&d, &[&mean_fn, &dsq_fn, &weighted_fn])?;
    let (mean, dsq, weighted) = (first[0], first[1], first[2]);
    let p4 = phi.clone();
    let mu = mean.value;
    let var = integrate(&d, move |x| {
        let c = p4.eval(x) - mu;
        c * c
    })?;

    let b7 = weighted.value;
    let b6 = dsq.value / eps;
    let quad = var.abs_error_estimate + weighted.abs_error_estimate + dsq.abs_error_estimate;
    let mut reports = vec![
        BoundReport::bounded("brascamp_lieb", var.value, b7, 0.0, quad, None),
        BoundReport::bounded("poincare_weight", b7, b6, 0.0, quad, None),
    ];
    if let Ok(delta) = delta_k(phi, f) {
        reports.push(BoundReport::bounded(
            "delta_seminorm_bound",
            b7,
            delta * delta,
            0.0,
            weighted.abs_error_estimate,
            None,
        ));
    }
    Ok(reports)
}

/// Entropy bound `Ent(phi^2) <= (2/eps) int phi'^2 dmu` under
/// `dmu = e^{-F} dx / Z`.
pub fn verify_lsi_1d(f: &SelfPotential, phi: &Observable) -> Result<BoundReport, AnalysisError> {
    let d = single_site_density(f, DEFAULT_TAIL_TOL)?;
    let eps = f.epsilon();
    let p = phi.clone();
    let p2 = phi.clone();
    let p3 = phi.clone();
    let sq_fn = move |x: f64| {
        let v = p.eval(x);
        v * v
    };
    let entropy_fn = move |x: f64| {
        let v = p2.eval(x);
        let t = v * v;
        // t ln t -> 0 as t -> 0; the floor keeps the logarithm finite there.
        t * t.max(1e-300).ln()
    };
    let dsq_fn = move |x: f64| {
        let v = p3.deriv(x);
        v * v
    };
    let r = integrate_many(&d, &[&sq_fn, &entropy_fn, &dsq_fn])?;
    let (sq, ent_raw, dsq) = (r[0], r[1], r[2]);
    let ent = ent_raw.value - sq.value * sq.value.max(1e-300).ln();
    let bound = 2.0 / eps * dsq.value;
    let quad = ent_raw.abs_error_estimate + sq.abs_error_estimate + dsq.abs_error_estimate;
    Ok(BoundReport::bounded("log_sobolev", ent, bound, 0.0, quad, None))
}

/// One-step contraction of the single-site conditional expectation on a
/// 2-site system with product observable `f = phi0(x_0) phi1(x_1)`:
/// grid supremum of `|d/dx_1 mu_0(f)| / sqrt(F''(x_1))` against
/// `delta_1(f) + lambda C_01 delta_0(f)`.
///
/// The `x_1` derivative is taken through the covariance identity
/// `d_1 mu_0(f) = mu_0(d_1 f) - lambda cov(f, d_1 G(x_0 - x_1))`, which is
/// cross-checked against central finite differences at three probe points.
pub fn verify_contraction(
    model: &ModelSpec,
    phi0: &Observable,
    phi1: &Observable,
) -> Result<BoundReport, AnalysisError> {
    let f = model.f();
    let lambda = model.lambda();
    let pair = model.pairs().get(&Displacement(vec![1]));
    let sup0 =
        phi0.sup_abs().ok_or_else(|| AnalysisError::UnboundedObservable(phi0.name()))?;
    let sup1 =
        phi1.sup_abs().ok_or_else(|| AnalysisError::UnboundedObservable(phi1.name()))?;
    let dphi0 = delta_k(phi0, f)?;
    let dphi1 = delta_k(phi1, f)?;
    let delta0_f = dphi0 * sup1;
    let delta1_f = dphi1 * sup0;
    let c01 = match pair {
        Some(p) => crate::potentials::interaction_ratio_sup(f, p)?.value,
        None => 0.0,
    };
    let rhs = delta1_f + lambda * c01 * delta0_f;

    let fdd = f.poly().derivative().derivative();
    let g_polys = pair.map(|p| (p.poly().clone(), p.poly().derivative()));
    let f0_poly = f.poly().clone();
    let f1_poly = f.poly().derivative();
    let eps = f.epsilon();

    // mu_0(phi0)(x1): quadrature against the conditional density of x_0.
    let mu0 = |x1: f64| -> Result<f64, NumericsError> {
        let d = conditional_on_x1(&f0_poly, &f1_poly, &g_polys, lambda, eps, x1)?;
        let p = phi0.clone();
        Ok(integrate(&d, move |x0| p.eval(x0))?.value)
    };
    // d/dx_1 of mu_0(f) via the covariance identity.
    let derivative_at = |x1: f64| -> Result<f64, NumericsError> {
        let d = conditional_on_x1(&f0_poly, &f1_poly, &g_polys, lambda, eps, x1)?;
        let p0 = phi0.clone();
        let e_phi0 = move |x0: f64| p0.eval(x0);
        match &g_polys {
            None => Ok(phi1.deriv(x1) * integrate(&d, e_phi0)?.value),
            Some((_, g1)) => {
                let g1c = g1.clone();
                let gd_fn = move |x0: f64| g1c.eval(x0 - x1);
                let p0c = phi0.clone();
                let g1c2 = g1.clone();
                let prod_fn = move |x0: f64| p0c.eval(x0) * g1c2.eval(x0 - x1);
                let r = integrate_many(&d, &[&e_phi0, &gd_fn, &prod_fn])?;
                let cov = r[2].value - r[0].value * r[1].value;
                Ok(phi1.deriv(x1) * r[0].value + lambda * phi1.eval(x1) * cov)
            }
        }
    };

    // Grid over the truncation interval of the single-site measure.
    let base = single_site_density(f, DEFAULT_TAIL_TOL)?;
    let (lo, hi) = (base.lo(), base.hi());
    let objective =
        |x1: f64| -> Result<f64, NumericsError> { Ok(derivative_at(x1)?.abs() / fdd.eval(x1).sqrt()) };

    let mut best_x = lo;
    let mut best = f64::NEG_INFINITY;
    let coarse = 129;
    for i in 0..coarse {
        let x = lo + (hi - lo) * i as f64 / (coarse - 1) as f64;
        let v = objective(x)?;
        if v > best {
            best = v;
            best_x = x;
        }
    }
    let mut width = (hi - lo) / 2.0;
    let mut improvement = f64::INFINITY;
    for _ in 0..8 {
        width /= 4.0;
        let prev = best;
        let a = (best_x - width).max(lo);
        let b = (best_x + width).min(hi);
        for i in 0..33 {
            let x = a + (b - a) * i as f64 / 32.0;
            let v = objective(x)?;
            if v > best {
                best = v;
                best_x = x;
            }
        }
        improvement = best - prev;
    }
    if improvement > 1e-6 {
        return Err(AnalysisError::GridSupNotConverged(improvement));
    }

    // Finite-difference cross-check of the covariance identity.
    for frac in [0.3, 0.5, 0.7] {
        let x1 = lo + (hi - lo) * frac;
        let h = 1e-5 * (1.0 + x1.abs());
        let fd =
            (mu0(x1 + h)? * phi1.eval(x1 + h) - mu0(x1 - h)? * phi1.eval(x1 - h)) / (2.0 * h);
        let ident = derivative_at(x1)?;
        if (fd - ident).abs() > 1e-4 * (1.0 + ident.abs()) {
            return Err(AnalysisError::CrossCheckFailed(format!(
                "at x1 = {x1}: finite difference {fd} vs identity {ident}"
            )));
        }
    }

    Ok(BoundReport::bounded(
        "one_step_contraction",
        best,
        rhs,
        0.0,
        1e-9,
        Some(format!(
            "grid sup at x1 = {best_x:.6}; rhs parts: delta_1(f) = {delta1_f:.6}, C_01 = {c01:.6}, delta_0(f) = {delta0_f:.6}"
        )),
    ))
}

fn conditional_on_x1(
    f0: &Polynomial,
    f1: &Polynomial,
    g_polys: &Option<(Polynomial, Polynomial)>,
    lambda: f64,
    eps: f64,
    x1: f64,
) -> Result<Density1D, NumericsError> {
    let f0 = f0.clone();
    let f1 = f1.clone();
    let g = g_polys.clone();
    let g2 = g.clone();
    Density1D::new(
        move |x0| {
            let mut acc = -f0.eval(x0);
            if let Some((gp, _)) = &g {
                acc -= lambda * gp.eval(x0 - x1);
            }
            acc
        },
        move |x0| {
            let mut acc = -f1.eval(x0);
            if let Some((_, g1)) = &g2 {
                acc -= lambda * g1.eval(x0 - x1);
            }
            acc
        },
        eps,
        DEFAULT_TAIL_TOL,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_lattice, Boundary};
    use crate::numerics::{cumulative_rho_of, RngStream};
    use crate::potentials::{build_gaussian, build_model1};
    use std::collections::BTreeMap;

    fn model1_f() -> SelfPotential {
        SelfPotential::new(Polynomial::new(vec![1.0, 0.0, 1.0]).pow(3)).unwrap()
    }

    fn gaussian_f(eps: f64) -> SelfPotential {
        SelfPotential::new(Polynomial::monomial(eps / 2.0, 2)).unwrap()
    }

    fn nn_b(b: f64) -> BTreeMap<Displacement, f64> {
        let mut m = BTreeMap::new();
        m.insert(Displacement(vec![1]), b);
        m.insert(Displacement(vec![-1]), b);
        m
    }

    #[test]
    fn delta_of_coordinate_under_constant_curvature() {
        let f = gaussian_f(4.0);
        let d = delta_k(&Observable::Coordinate, &f).unwrap();
        assert!((d - 0.5).abs() < 1e-9, "{d}");
    }

    #[test]
    fn delta_of_tanh_under_model1() {
        // Both |phi'| max and F'' min sit at the origin: 1 / sqrt(6).
        let f = model1_f();
        let d = delta_k(&Observable::Tanh, &f).unwrap();
        let want = 1.0 / 6.0f64.sqrt();
        assert!((d - want).abs() < 1e-9, "{d} vs {want}");
        // Dense-grid oracle.
        let fdd = f.poly().derivative().derivative();
        let grid_max = (0..200_001)
            .map(|i| {
                let u = -10.0 + 1e-4 * i as f64;
                let t = u.tanh();
                (1.0 - t * t) / fdd.eval(u).sqrt()
            })
            .fold(0.0f64, f64::max);
        assert!(d >= grid_max - 1e-9);
    }

    #[test]
    fn delta_scaling_and_constant() {
        let f = model1_f();
        assert_eq!(delta_k(&Observable::Constant(3.0), &f).unwrap(), 0.0);
        let one = delta_k(&Observable::Poly(Polynomial::new(vec![0.0, 1.0])), &f).unwrap();
        let five = delta_k(&Observable::Poly(Polynomial::new(vec![0.0, 5.0])), &f).unwrap();
        assert!((five - 5.0 * one).abs() < 5.0 * 1e-9);
    }

    #[test]
    fn delta_unbounded_for_quadratic_against_gaussian() {
        let f = gaussian_f(1.0);
        let r = delta_k(&Observable::Poly(Polynomial::monomial(1.0, 2)), &f);
        assert!(matches!(r, Err(AnalysisError::UnboundedSeminorm(_))));
    }

    fn synthetic_iid_samples(n_records: usize, n_sites: usize, seed: u64) -> Samples {
        let root = RngStream::new(seed);
        let rows: Vec<Vec<f64>> = (0..n_records)
            .map(|t| {
                (0..n_sites)
                    .map(|s| root.substream(s as u64, t as u64).next_f64() - 0.5)
                    .collect()
            })
            .collect();
        Samples::from_rows((1..=n_records as u64).collect(), rows)
    }

    #[test]
    fn independent_sites_show_no_covariance_signal() {
        let lat = build_lattice(1, vec![16], Boundary::Torus, 1).unwrap();
        let samples = synthetic_iid_samples(4000, 16, 31);
        let disps: Vec<Displacement> =
            (1..=4).map(|k| Displacement(vec![k])).collect();
        let series = estimate_covariances(
            &samples,
            &lat,
            &Observable::Tanh,
            &Observable::Tanh,
            None,
            &disps,
            DEFAULT_BATCHES,
        )
        .unwrap();
        for i in 0..series.displacements.len() {
            assert!(
                series.cov[i].abs() <= 4.0 * series.stderr[i],
                "k={}: cov {} stderr {}",
                series.displacements[i],
                series.cov[i],
                series.stderr[i]
            );
            assert!(series.stderr[i] > 0.0);
        }
        assert!(matches!(fit_decay_rate(&series), Err(AnalysisError::NoSignal(_))));
    }

    #[test]
    fn variance_at_zero_displacement_is_positive() {
        let lat = build_lattice(1, vec![8], Boundary::Torus, 1).unwrap();
        let samples = synthetic_iid_samples(500, 8, 7);
        let series = estimate_covariances(
            &samples,
            &lat,
            &Observable::Coordinate,
            &Observable::Coordinate,
            None,
            &[Displacement(vec![0])],
            DEFAULT_BATCHES,
        )
        .unwrap();
        assert!(series.cov[0] > 0.0);
        // Uniform(-1/2, 1/2) variance oracle.
        assert!((series.cov[0] - 1.0 / 12.0).abs() < 0.01);
    }

    #[test]
    fn observable_swap_matches_negated_displacement() {
        let lat = build_lattice(1, vec![8], Boundary::Torus, 1).unwrap();
        let samples = synthetic_iid_samples(300, 8, 99);
        let fwd = estimate_covariances(
            &samples,
            &lat,
            &Observable::Tanh,
            &Observable::Coordinate,
            None,
            &[Displacement(vec![2])],
            8,
        )
        .unwrap();
        let bwd = estimate_covariances(
            &samples,
            &lat,
            &Observable::Coordinate,
            &Observable::Tanh,
            None,
            &[Displacement(vec![-2])],
            8,
        )
        .unwrap();
        assert!((fwd.cov[0] - bwd.cov[0]).abs() < 1e-12);
    }

    #[test]
    fn insufficient_samples_are_rejected() {
        let lat = build_lattice(1, vec![8], Boundary::Torus, 1).unwrap();
        let samples = synthetic_iid_samples(50, 8, 1);
        let r = estimate_covariances(
            &samples,
            &lat,
            &Observable::Tanh,
            &Observable::Tanh,
            None,
            &[Displacement(vec![1])],
            DEFAULT_BATCHES,
        );
        assert!(matches!(r, Err(AnalysisError::InsufficientSamples { .. })));
    }

    #[test]
    fn decay_fit_recovers_synthetic_rate() {
        let disps: Vec<Displacement> = (-5i64..=5)
            .filter(|&k| k != 0)
            .map(|k| Displacement(vec![k]))
            .collect();
        let cov: Vec<f64> = disps
            .iter()
            .map(|d| (-0.7 * d.norm_l1() as f64).exp() * 0.5)
            .collect();
        let stderr: Vec<f64> = cov.iter().map(|c| c.abs() * 1e-3).collect();
        let series = CovarianceSeries {
            displacements: disps,
            cov,
            stderr,
            n_samples: 1000,
            n_batches: 32,
            f_name: "x".into(),
            g_name: "x".into(),
        };
        let fit = fit_decay_rate(&series).unwrap();
        assert!((fit.rate - 0.7).abs() < 0.01, "rate {}", fit.rate);
        assert!((fit.intercept - 0.5f64.ln()).abs() < 0.01);
        assert!(fit.r_squared > 0.999);
        assert!(fit.used.iter().all(|&u| u));
    }

    #[test]
    fn decay_bound_single_site_tanh() {
        // Zero coupling, one displacement (0): LHS = Var(tanh), RHS =
        // delta(tanh)^2 = 1/6, and the variance bound chain guarantees the
        // pass deterministically.
        let model = build_model1(1, &BTreeMap::new(), 0.0).unwrap();
        let metric = Semimetric::new(0.0).unwrap();
        let dob =
            crate::lattice::uniqueness_threshold(&model, &metric).unwrap();
        let d = single_site_density(model.f(), DEFAULT_TAIL_TOL).unwrap();
        let var = {
            let m = integrate(&d, |x| x.tanh()).unwrap().value;
            integrate(&d, move |x| {
                let c = x.tanh() - m;
                c * c
            })
            .unwrap()
            .value
        };
        let series = CovarianceSeries {
            displacements: vec![Displacement(vec![0])],
            cov: vec![var],
            stderr: vec![1e-12],
            n_samples: 1000,
            n_batches: 32,
            f_name: "tanh".into(),
            g_name: "tanh".into(),
        };
        let report = check_decay_bound(
            &series,
            &model,
            &metric,
            &Observable::Tanh,
            &Observable::Tanh,
            &dob,
        )
        .unwrap();
        assert!(report.pass, "{report:?}");
        assert!((report.rhs.unwrap() - 1.0 / 6.0).abs() < 1e-6);
        assert!(report.lhs < report.rhs.unwrap());
        assert!(report.note.as_deref().unwrap().contains("partial sum"));
    }

    #[test]
    fn decay_bound_rejects_supercritical_coupling() {
        let model = build_gaussian(1.0, &nn_b(1.0), 0.3).unwrap();
        let metric = Semimetric::new(0.0).unwrap();
        // gamma = 4, lambda gamma = 1.2.
        let dob = DobrushinReport {
            epsilon: 1.0,
            c: nn_b(2.0),
            gamma_d: 4.0,
            threshold: Some(0.25),
            lambda: 0.3,
            unique: false,
            tolerance: 0.0,
        };
        let series = CovarianceSeries {
            displacements: vec![Displacement(vec![0])],
            cov: vec![1.0],
            stderr: vec![0.1],
            n_samples: 1000,
            n_batches: 32,
            f_name: "tanh".into(),
            g_name: "tanh".into(),
        };
        let r = check_decay_bound(
            &series,
            &model,
            &metric,
            &Observable::Tanh,
            &Observable::Tanh,
            &dob,
        );
        assert!(matches!(r, Err(AnalysisError::OutsideUniquenessRegion(_))));
    }

    #[test]
    fn rho_table_matches_direct_quadrature() {
        let f = model1_f();
        let table = RhoTable::new(&f, 5.0);
        let fdd = f.poly().derivative().derivative();
        let sqrt_fdd = move |s: f64| fdd.eval(s).sqrt();
        for &x in &[-4.2, -1.0, -0.3, 0.0, 0.7, 2.5, 4.9] {
            let direct = cumulative_rho_of(&sqrt_fdd, x).unwrap().value;
            assert!(
                (table.eval(x) - direct).abs() < 1e-9,
                "x={x}: {} vs {direct}",
                table.eval(x)
            );
        }
    }

    #[test]
    fn moment_bounds_on_synthetic_gaussian_samples() {
        // iid standard-normal-ish samples via the inverse CDF of the
        // quadrature density; eps = 1, bound E x^2 <= 1 is tight.
        let model = build_gaussian(1.0, &BTreeMap::new(), 0.0).unwrap();
        let d = single_site_density(model.f(), DEFAULT_TAIL_TOL).unwrap();
        let root = RngStream::new(5);
        let n = 2000;
        let sites = 4;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|t| {
                (0..sites)
                    .map(|s| {
                        let mut st = root.substream(s as u64, t as u64);
                        d.sample(&mut st).unwrap()
                    })
                    .collect()
            })
            .collect();
        let samples = Samples::from_rows((1..=n as u64).collect(), rows);
        let reports = check_moment_bounds(&samples, &model, 0.25, DEFAULT_BATCHES).unwrap();
        assert_eq!(reports.len(), 3);
        assert!(reports[0].pass, "{:?}", reports[0]);
        assert!(reports[1].pass, "{:?}", reports[1]);
        assert!(reports[2].pass && reports[2].rhs.is_none());
        // Equality case: site-max mean is within noise of 1/eps.
        assert!((reports[0].lhs - 1.0).abs() < 0.15);

        let err = check_moment_bounds(&samples, &model, 0.6, DEFAULT_BATCHES);
        assert!(matches!(err, Err(AnalysisError::AOutOfRange { .. })));
    }

    #[test]
    fn quadrature_moment_bounds_model1() {
        let f = model1_f();
        let reports = moment_quadrature_bounds(&f, 1.0).unwrap();
        // E x^2 < 1/6 strictly; E exp(x^2) < exp(1/(6-2)) = exp(0.25).
        assert!(reports[0].pass && reports[0].slack.unwrap() > 0.0, "{:?}", reports[0]);
        assert!(reports[0].lhs > 0.0);
        assert!(reports[1].pass && reports[1].slack.unwrap() > 0.0, "{:?}", reports[1]);
        assert!((reports[1].rhs.unwrap() - 0.25f64.exp()).abs() < 1e-12);
        assert!(reports[1].lhs > 1.0);
    }

    #[test]
    fn quadrature_moment_equality_for_gaussian() {
        let f = gaussian_f(1.0);
        let reports = moment_quadrature_bounds(&f, 0.3).unwrap();
        assert!((reports[0].lhs - 1.0).abs() < 1e-9, "{}", reports[0].lhs);
        assert!(reports[0].pass);
        // E exp(0.3 x^2) = 1/sqrt(1 - 0.6) for a standard Gaussian.
        let want = 1.0 / 0.4f64.sqrt();
        assert!((reports[1].lhs - want).abs() < 1e-8, "{} vs {want}", reports[1].lhs);
        assert!(reports[1].pass);
    }

    #[test]
    fn brascamp_lieb_gaussian_equality_for_coordinate() {
        let f = gaussian_f(1.0);
        let reports = verify_brascamp_lieb_1d(&f, &Observable::Coordinate).unwrap();
        let bl = &reports[0];
        let pc = &reports[1];
        assert!(bl.pass && pc.pass);
        assert!((bl.lhs - 1.0).abs() < 1e-9);
        assert!((bl.rhs.unwrap() - 1.0).abs() < 1e-9);
        assert!((pc.rhs.unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn brascamp_lieb_model1_strict_improvement() {
        // Growing F'' makes the weighted bound strictly sharper.
        let f = model1_f();
        let reports = verify_brascamp_lieb_1d(&f, &Observable::Coordinate).unwrap();
        let bl = &reports[0];
        let pc = &reports[1];
        assert!(bl.pass && bl.slack.unwrap() > 0.0, "{bl:?}");
        assert!(pc.pass && pc.slack.unwrap() > 1e-3, "{pc:?}");
        assert!(bl.quad_error < 1e-8 && pc.quad_error < 1e-8);
        // delta chain for the coordinate: delta = 1/sqrt(6).
        let chain = &reports[2];
        assert!(chain.pass, "{chain:?}");
        assert!((chain.rhs.unwrap() - 1.0 / 6.0).abs() < 1e-6);
    }

    #[test]
    fn brascamp_lieb_tanh_chain() {
        let f = model1_f();
        let reports = verify_brascamp_lieb_1d(&f, &Observable::Tanh).unwrap();
        assert_eq!(reports.len(), 3);
        for r in &reports {
            assert!(r.pass, "{r:?}");
        }
    }

    #[test]
    fn lsi_trivial_and_gaussian_extremal() {
        let f = gaussian_f(1.0);
        let trivial = verify_lsi_1d(&f, &Observable::Constant(1.0)).unwrap();
        assert!(trivial.pass);
        assert!(trivial.lhs.abs() < 1e-10 && trivial.rhs.unwrap().abs() < 1e-10);

        // exp(x/2) saturates the Gaussian log-Sobolev inequality:
        // Ent = bound = exp(1/2)/2.
        let extremal = verify_lsi_1d(&f, &Observable::ExpHalf).unwrap();
        assert!(extremal.pass, "{extremal:?}");
        let want = 0.5f64.exp() / 2.0;
        assert!((extremal.lhs - want).abs() < 1e-8, "{} vs {want}", extremal.lhs);
        assert!((extremal.rhs.unwrap() - want).abs() < 1e-8);
    }

    #[test]
    fn lsi_model1_strict() {
        let f = model1_f();
        let r = verify_lsi_1d(&f, &Observable::OnePlusTanh).unwrap();
        assert!(r.pass && r.slack.unwrap() > 0.0, "{r:?}");
    }

    #[test]
    fn contraction_zero_coupling_factorizes() {
        // lambda = 0 and phi0 = tanh: mu_0 integrates tanh out to its mean 0,
        // so the grid sup collapses to |E tanh| * delta(tanh) = 0.
        let model = build_model1(1, &nn_b(1.0), 0.0).unwrap();
        let r = verify_contraction(&model, &Observable::Tanh, &Observable::Tanh).unwrap();
        assert!(r.pass, "{r:?}");
        assert!(r.lhs.abs() < 1e-9, "lhs {}", r.lhs);

        // phi0 constant: f depends on x_1 only and the operator changes
        // nothing; lhs = delta_1(f) exactly.
        let r =
            verify_contraction(&model, &Observable::Constant(1.0), &Observable::Tanh).unwrap();
        let want = delta_k(&Observable::Tanh, model.f()).unwrap();
        assert!((r.lhs - want).abs() < 1e-6, "lhs {} want {want}", r.lhs);
        assert!((r.rhs.unwrap() - want).abs() < 1e-9);
    }

    #[test]
    fn contraction_model1_bounded_with_slack() {
        let model = build_model1(1, &nn_b(1.0), 0.02).unwrap();
        let r = verify_contraction(&model, &Observable::Tanh, &Observable::Tanh).unwrap();
        assert!(r.pass, "{r:?}");
        assert!(r.slack.unwrap() > 0.0, "{r:?}");
    }

    #[test]
    fn contraction_gaussian_model() {
        let model = build_gaussian(1.0, &nn_b(1.0), 0.1).unwrap();
        let r = verify_contraction(&model, &Observable::Tanh, &Observable::Tanh).unwrap();
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn contraction_rejects_unbounded_factor() {
        let model = build_model1(1, &nn_b(1.0), 0.02).unwrap();
        let r = verify_contraction(&model, &Observable::Coordinate, &Observable::Tanh);
        assert!(matches!(r, Err(AnalysisError::UnboundedObservable(_))));
    }
}
