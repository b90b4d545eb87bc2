//! Nested-refinement Simpson quadrature with two-level error estimates.
//!
//! Node sets are the uniform doubling family, so results are reproducible
//! across platforms and runs; there is no adaptive subdivision tree.

use super::{Density1D, NumericsError, MAX_QUAD_INTERVALS};

#[derive(Clone, Copy, Debug)]
pub struct QuadratureResult {
    pub value: f64,
    pub abs_error_estimate: f64,
    pub nodes_used: usize,
}

const ABS_TOL: f64 = 1e-12;
const REL_TOL: f64 = 1e-12;

/// Normalized expectation `∫ g ρ / ∫ ρ` over the truncation interval of `d`.
///
/// Numerator and denominator are computed on the same node set, so the
/// normalization never appears as a separate pass and `g ≡ 1` yields exactly
/// 1.
pub fn integrate(d: &Density1D, g: impl Fn(f64) -> f64) -> Result<QuadratureResult, NumericsError> {
    let gs: [&dyn Fn(f64) -> f64; 1] = [&g];
    Ok(integrate_many(d, &gs)?[0])
}

/// Same as [`integrate`] for several integrands sharing the density samples.
pub fn integrate_many(
    d: &Density1D,
    gs: &[&dyn Fn(f64) -> f64],
) -> Result<Vec<QuadratureResult>, NumericsError> {
    let lo = d.lo();
    let hi = d.hi();
    let mut n = 64usize;
    let mut samples = simpson_samples(lo, hi, n, |x| d.rel_density(x));
    let mut prev: Option<Vec<f64>> = None;
    loop {
        let h = (hi - lo) / n as f64;
        let denom = simpson_sum(lo, h, &samples, |_, rho| rho);
        let values: Vec<f64> = gs
            .iter()
            .map(|g| simpson_sum(lo, h, &samples, |x, rho| g(x) * rho) / denom)
            .collect();
        if let Some(prev_values) = prev {
            let errors: Vec<f64> = values
                .iter()
                .zip(&prev_values)
                .map(|(v, p)| (v - p).abs())
                .collect();
            let converged = values
                .iter()
                .zip(&errors)
                .all(|(v, e)| *e <= ABS_TOL.max(REL_TOL * v.abs()));
            if converged {
                return Ok(values
                    .iter()
                    .zip(&errors)
                    .map(|(&value, &abs_error_estimate)| QuadratureResult {
                        value,
                        abs_error_estimate,
                        nodes_used: samples.len(),
                    })
                    .collect());
            }
            if n >= MAX_QUAD_INTERVALS {
                let (worst, val) = errors
                    .iter()
                    .zip(&values)
                    .map(|(e, v)| (*e, v.abs()))
                    .fold((0.0f64, 0.0f64), |acc, x| if x.0 > acc.0 { x } else { acc });
                return Err(NumericsError::NonConvergent {
                    estimate: worst,
                    tolerance: ABS_TOL.max(REL_TOL * val),
                    nodes: samples.len(),
                });
            }
        }
        prev = Some(values);
        samples = refine_samples(lo, hi, n, samples, |x| d.rel_density(x));
        n *= 2;
    }
}

/// Adaptive Simpson integral of a plain function over `[a, b]` (signed in the
/// orientation of the interval).
pub fn integrate_function(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<QuadratureResult, NumericsError> {
    if a == b {
        return Ok(QuadratureResult { value: 0.0, abs_error_estimate: 0.0, nodes_used: 0 });
    }
    let mut n = 64usize;
    let mut samples = simpson_samples(a, b, n, &f);
    let mut prev: Option<f64> = None;
    loop {
        let value = simpson_sum(a, (b - a) / n as f64, &samples, |_, v| v);
        if let Some(p) = prev {
            let err = (value - p).abs();
            if err <= abs_tol.max(rel_tol * value.abs()) {
                return Ok(QuadratureResult {
                    value,
                    abs_error_estimate: err,
                    nodes_used: samples.len(),
                });
            }
            if n >= MAX_QUAD_INTERVALS {
                return Err(NumericsError::NonConvergent {
                    estimate: err,
                    tolerance: abs_tol.max(rel_tol * value.abs()),
                    nodes: samples.len(),
                });
            }
        }
        prev = Some(value);
        samples = refine_samples(a, b, n, samples, &f);
        n *= 2;
    }
}

/// Signed arc-length style accumulation `∫_0^x f(s) ds` used for the
/// curvature semimetric `rho(x, 0)` with `f = sqrt(F'')`.
pub fn cumulative_rho_of(
    sqrt_curvature: impl Fn(f64) -> f64,
    x: f64,
) -> Result<QuadratureResult, NumericsError> {
    integrate_function(sqrt_curvature, 0.0, x, 1e-13, 1e-12)
}

/// Samples at the `2n + 1` uniform Simpson nodes of `[a, b]`.
fn simpson_samples(a: f64, b: f64, n: usize, f: impl Fn(f64) -> f64) -> Vec<f64> {
    let step = (b - a) / (2 * n) as f64;
    (0..=2 * n).map(|j| f(a + j as f64 * step)).collect()
}

/// Insert midpoints between consecutive samples (doubles the interval count).
fn refine_samples(
    a: f64,
    b: f64,
    n: usize,
    old: Vec<f64>,
    f: impl Fn(f64) -> f64,
) -> Vec<f64> {
    let fine_step = (b - a) / (4 * n) as f64;
    let mut out = Vec::with_capacity(2 * old.len() - 1);
    for (j, &v) in old.iter().enumerate() {
        out.push(v);
        if j + 1 < old.len() {
            out.push(f(a + (2 * j + 1) as f64 * fine_step));
        }
    }
    out
}

/// Composite Simpson sum; `map` receives the node position and the cached
/// sample value there.
fn simpson_sum(a: f64, h: f64, samples: &[f64], map: impl Fn(f64, f64) -> f64) -> f64 {
    let n = (samples.len() - 1) / 2;
    let mut acc = 0.0;
    for i in 0..n {
        let x0 = a + i as f64 * h;
        acc += h / 6.0
            * (map(x0, samples[2 * i])
                + 4.0 * map(x0 + 0.5 * h, samples[2 * i + 1])
                + map(x0 + h, samples[2 * i + 2]));
    }
    acc
}
