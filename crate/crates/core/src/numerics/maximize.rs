//! Suprema over unbounded domains via tangent compactification.
//!
//! The plane (or line) is mapped through `x = tan(theta)` so the whole domain
//! becomes an open box in `theta`. A coarse scan is followed by local grid
//! refinement around the running maximum; the window may slide toward the
//! compactified boundary, which lets suprema attained in the limit
//! `|x| -> inf` be approached to within the reported tolerance. A supremum
//! that is actually infinite shows up as the running maximum sitting against
//! the boundary while still growing between rounds; that pattern raises
//! [`NumericsError::DivergentSup`].

use super::NumericsError;

use std::f64::consts::FRAC_PI_2;

#[derive(Clone, Copy, Debug)]
pub struct MaxResult {
    /// Argmax in original coordinates; the second component is 0 for 1-D.
    pub argmax: (f64, f64),
    pub max: f64,
    /// Improvement contributed by the final refinement round.
    pub tolerance: f64,
}

const REFINE_ROUNDS: usize = 8;
const COARSE_2D: usize = 257;
const REFINE_2D: usize = 65;
const COARSE_1D: usize = 2049;
const REFINE_1D: usize = 129;
const MARGIN_FLOOR: f64 = 1e-12;

/// Supremum of `f` over the plane.
pub fn maximize_2d(f: impl Fn(f64, f64) -> f64) -> Result<MaxResult, NumericsError> {
    let margin0 = FRAC_PI_2 / COARSE_2D as f64;
    let axis = coarse_axis(COARSE_2D, margin0);
    let mut best_val = f64::NEG_INFINITY;
    let mut best = (0.0f64, 0.0f64);
    for &t in &axis {
        let x = t.tan();
        for &p in &axis {
            let v = f(x, p.tan());
            if v.is_finite() && v > best_val {
                best_val = v;
                best = (t, p);
            }
        }
    }
    if !best_val.is_finite() {
        return Err(NumericsError::DivergentSup(best_val));
    }

    let mut width = FRAC_PI_2;
    let mut margin = margin0;
    let mut boundary_streak = 0usize;
    let mut last_improvement = 0.0;
    for _ in 0..REFINE_ROUNDS {
        width /= 4.0;
        margin = (margin / 8.0).max(MARGIN_FLOOR);
        let ta = clamped_window(best.0, width, margin);
        let pa = clamped_window(best.1, width, margin);
        let taxis = linspace(ta, REFINE_2D);
        let paxis = linspace(pa, REFINE_2D);
        let prev_val = best_val;
        for &t in &taxis {
            let x = t.tan();
            for &p in &paxis {
                let v = f(x, p.tan());
                if v.is_finite() && v > best_val {
                    best_val = v;
                    best = (t, p);
                }
            }
        }
        last_improvement = best_val - prev_val;
        let at_boundary = touches_boundary(best.0, margin) || touches_boundary(best.1, margin);
        if at_boundary && best_val > grow_threshold(prev_val) {
            boundary_streak += 1;
            if boundary_streak >= 2 {
                return Err(NumericsError::DivergentSup(best_val));
            }
        } else {
            boundary_streak = 0;
        }
    }
    Ok(MaxResult {
        argmax: (best.0.tan(), best.1.tan()),
        max: best_val,
        tolerance: last_improvement,
    })
}

/// Supremum of `f` over the line.
pub fn maximize_1d(f: impl Fn(f64) -> f64) -> Result<MaxResult, NumericsError> {
    let margin0 = FRAC_PI_2 / COARSE_1D as f64;
    let axis = coarse_axis(COARSE_1D, margin0);
    let mut best_val = f64::NEG_INFINITY;
    let mut best = 0.0f64;
    for &t in &axis {
        let v = f(t.tan());
        if v.is_finite() && v > best_val {
            best_val = v;
            best = t;
        }
    }
    if !best_val.is_finite() {
        return Err(NumericsError::DivergentSup(best_val));
    }

    let mut width = FRAC_PI_2;
    let mut margin = margin0;
    let mut boundary_streak = 0usize;
    let mut last_improvement = 0.0;
    for _ in 0..REFINE_ROUNDS {
        width /= 4.0;
        margin = (margin / 8.0).max(MARGIN_FLOOR);
        let window = clamped_window(best, width, margin);
        let prev_val = best_val;
        for &t in &linspace(window, REFINE_1D) {
            let v = f(t.tan());
            if v.is_finite() && v > best_val {
                best_val = v;
                best = t;
            }
        }
        last_improvement = best_val - prev_val;
        if touches_boundary(best, margin) && best_val > grow_threshold(prev_val) {
            boundary_streak += 1;
            if boundary_streak >= 2 {
                return Err(NumericsError::DivergentSup(best_val));
            }
        } else {
            boundary_streak = 0;
        }
    }
    Ok(MaxResult { argmax: (best.tan(), 0.0), max: best_val, tolerance: last_improvement })
}

/// Uniform cell-center nodes of (-pi/2, pi/2); outermost node sits `margin`
/// inside the boundary.
fn coarse_axis(n: usize, margin: f64) -> Vec<f64> {
    let span = 2.0 * (FRAC_PI_2 - margin);
    (0..n).map(|i| -FRAC_PI_2 + margin + span * i as f64 / (n - 1) as f64).collect()
}

fn clamped_window(center: f64, half_width: f64, margin: f64) -> (f64, f64) {
    let lo = (center - half_width).max(-(FRAC_PI_2 - margin));
    let hi = (center + half_width).min(FRAC_PI_2 - margin);
    (lo, hi)
}

fn linspace((lo, hi): (f64, f64), n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn touches_boundary(theta: f64, margin: f64) -> bool {
    FRAC_PI_2 - theta.abs() <= margin * 1.000_001
}

/// Growth threshold for the divergence rule: a boundary maximum must grow by
/// at least half its magnitude between rounds to count as escaping.
fn grow_threshold(prev: f64) -> f64 {
    prev + 0.5 * prev.abs().max(1e-12)
}
