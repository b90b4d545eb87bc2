//! Strongly log-concave 1-D densities with certified tail truncation and
//! exact inverse-CDF sampling.

use super::{DrawStream, NumericsError, CDF_TOL, MAX_QUAD_INTERVALS};

type RealFn = Box<dyn Fn(f64) -> f64 + Send + Sync>;

/// Unnormalized log-concave density on the line, reduced to a working
/// interval `[lo, hi]` outside of which the remaining mass is certified below
/// `tail_tol` times a lower bound on the interior mass.
///
/// The certification uses only strong log-concavity: if the negated
/// log-density has second derivative at least `epsilon` everywhere, the
/// density is dominated by the Gaussian envelope
/// `exp(log_density(mode) - epsilon (x - mode)^2 / 2)`.
pub struct Density1D {
    log_density: RealFn,
    dlog_density: RealFn,
    mode: f64,
    log_at_mode: f64,
    lo: f64,
    hi: f64,
    tail_mass_bound: f64,
    epsilon: f64,
}

impl Density1D {
    /// `log_density` is the unnormalized log-density, `dlog_density` its
    /// first derivative, `epsilon > 0` a lower bound on the curvature of the
    /// negated log-density.
    pub fn new(
        log_density: impl Fn(f64) -> f64 + Send + Sync + 'static,
        dlog_density: impl Fn(f64) -> f64 + Send + Sync + 'static,
        epsilon: f64,
        tail_tol: f64,
    ) -> Result<Self, NumericsError> {
        if !(epsilon > 0.0) {
            return Err(NumericsError::EnvelopeFailure(epsilon));
        }
        let mode = find_mode(&dlog_density)?;
        let log_at_mode = log_density(mode);

        // Interior-mass lower bound over [mode - a, mode + a]: the density is
        // unimodal, so it is bounded below by its endpoint values there. The
        // half-width a follows the local curvature, not epsilon, so the bound
        // stays O(1) even when the density is much stiffer than epsilon.
        let h = 1e-4 * (1.0 + mode.abs());
        let curv = ((2.0 * log_at_mode - log_density(mode + h) - log_density(mode - h))
            / (h * h))
            .max(epsilon);
        let mut a = 1.0 / curv.sqrt();
        let mut lower_mass = 0.0;
        for _ in 0..60 {
            let lo_rel = (log_density(mode - a) - log_at_mode).exp();
            let hi_rel = (log_density(mode + a) - log_at_mode).exp();
            lower_mass = a * (lo_rel + hi_rel);
            if lo_rel > 1e-8 && hi_rel > 1e-8 {
                break;
            }
            a *= 0.5;
        }

        // Smallest half-width T on a 1/(8 sqrt(eps)) grid whose two-sided
        // Gaussian tail bound drops below tol * lower_mass.
        let step = 0.125 / epsilon.sqrt();
        let mut half_width = None;
        for k in 1..=400_000u64 {
            let t = k as f64 * step;
            if gaussian_tail_bound(epsilon, t) <= tail_tol * lower_mass {
                half_width = Some(t);
                break;
            }
        }
        let t = half_width.ok_or(NumericsError::EnvelopeFailure(epsilon))?;

        // The envelope can be far too loose when the density decays much
        // faster than exp(-eps x^2 / 2); tighten each side with the
        // support-line bound: beyond p the density is below
        // rel(p) exp(dlog(p) (x - p)), so the one-sided tail mass is below
        // rel(p) / |dlog(p)|. The bound decreases in p, so the innermost
        // certified cut is found by bisection against half the tail budget.
        let budget = 0.5 * tail_tol * lower_mass;
        let line_bound = |p: f64, sign: f64| -> f64 {
            let slope = sign * dlog_density(p);
            if slope >= 0.0 {
                return f64::INFINITY;
            }
            (log_density(p) - log_at_mode).exp() / slope.abs()
        };
        let tighten = |sign: f64| -> (f64, f64) {
            // sign = +1 for the upper tail, -1 for the lower.
            let outer = mode + sign * t;
            if line_bound(outer, sign) > budget {
                return (outer, gaussian_tail_bound(epsilon, t) / 2.0);
            }
            let mut inner = mode;
            let mut cut = outer;
            for _ in 0..48 {
                let midpoint = 0.5 * (inner + cut);
                if line_bound(midpoint, sign) <= budget {
                    cut = midpoint;
                } else {
                    inner = midpoint;
                }
            }
            (cut, line_bound(cut, sign))
        };
        let (hi, hi_bound) = tighten(1.0);
        let (lo, lo_bound) = tighten(-1.0);

        Ok(Density1D {
            log_density: Box::new(log_density),
            dlog_density: Box::new(dlog_density),
            mode,
            log_at_mode,
            lo,
            hi,
            tail_mass_bound: lo_bound + hi_bound,
            epsilon,
        })
    }

    pub fn mode(&self) -> f64 {
        self.mode
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    /// Certified relative tail mass outside `[lo, hi]`, in units where the
    /// density at the mode is 1.
    pub fn tail_mass_bound(&self) -> f64 {
        self.tail_mass_bound
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn log_density(&self, x: f64) -> f64 {
        (self.log_density)(x)
    }

    pub fn dlog_density(&self, x: f64) -> f64 {
        (self.dlog_density)(x)
    }

    /// Density normalized to 1 at the mode; never overflows.
    #[inline]
    pub fn rel_density(&self, x: f64) -> f64 {
        ((self.log_density)(x) - self.log_at_mode).exp()
    }

    /// One exact-up-to-tolerance draw by inverse CDF on an adaptive grid.
    pub fn sample(&self, stream: &mut DrawStream) -> Result<f64, NumericsError> {
        let u = stream.next_f64();
        self.invert_cdf(u)
    }

    /// Location `x` with `CDF(x) = u * CDF(hi)`, accurate to [`CDF_TOL`] in
    /// CDF units. Refinement doubles the node count and accepts once the
    /// previous level's inverse lands within tolerance under the finer table.
    pub fn invert_cdf(&self, u: f64) -> Result<f64, NumericsError> {
        debug_assert!(u > 0.0 && u < 1.0);
        let mut n = 256usize;
        let mut table = CdfTable::build(self, n)?;
        let mut x_prev = table.invert(u);
        loop {
            n *= 2;
            if n > MAX_QUAD_INTERVALS {
                return Err(NumericsError::NonConvergent {
                    estimate: f64::NAN,
                    tolerance: CDF_TOL,
                    nodes: 2 * n + 1,
                });
            }
            table = table.refine(self)?;
            let x_cur = table.invert(u);
            let drift = (table.cdf(x_prev) / table.total() - u).abs();
            if drift <= CDF_TOL {
                return Ok(x_cur);
            }
            x_prev = x_cur;
        }
    }
}

/// Two-sided Gaussian tail bound: `2 exp(-eps t^2 / 2) / (eps t)` dominates
/// the mass of `exp(-eps s^2 / 2)` beyond `|s| > t` for `t > 0`.
fn gaussian_tail_bound(epsilon: f64, t: f64) -> f64 {
    2.0 * (-0.5 * epsilon * t * t).exp() / (epsilon * t)
}

/// Root of the strictly decreasing log-density derivative.
fn find_mode(dlog: &impl Fn(f64) -> f64) -> Result<f64, NumericsError> {
    let mut lo = -1.0f64;
    let mut hi = 1.0f64;
    let mut expansions = 0;
    while dlog(hi) > 0.0 {
        hi *= 2.0;
        expansions += 1;
        if expansions > 400 {
            return Err(NumericsError::ModeBracketing(hi.abs()));
        }
    }
    while dlog(lo) < 0.0 {
        lo *= 2.0;
        expansions += 1;
        if expansions > 400 {
            return Err(NumericsError::ModeBracketing(lo.abs()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if !(mid > lo && mid < hi) {
            break;
        }
        if dlog(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Cumulative table over `[lo, hi]` with `n` intervals; per-interval masses
/// use Simpson's rule on the interval endpoints and midpoint, so `values`
/// holds `2n + 1` density samples.
struct CdfTable {
    lo: f64,
    h: f64,
    values: Vec<f64>,
    prefix: Vec<f64>,
}

impl CdfTable {
    fn build(d: &Density1D, n: usize) -> Result<Self, NumericsError> {
        let lo = d.lo();
        let h = (d.hi() - d.lo()) / n as f64;
        let step = 0.5 * h;
        let values: Vec<f64> = (0..=2 * n).map(|j| d.rel_density(lo + j as f64 * step)).collect();
        Self::from_values(lo, h, values)
    }

    fn from_values(lo: f64, h: f64, values: Vec<f64>) -> Result<Self, NumericsError> {
        let n = (values.len() - 1) / 2;
        let mut prefix = Vec::with_capacity(n + 1);
        prefix.push(0.0);
        let mut acc = 0.0;
        for i in 0..n {
            let mass = h / 6.0 * (values[2 * i] + 4.0 * values[2 * i + 1] + values[2 * i + 2]);
            if !(mass > 0.0) {
                return Err(NumericsError::NonMonotoneCdf);
            }
            acc += mass;
            prefix.push(acc);
        }
        Ok(CdfTable { lo, h, values, prefix })
    }

    /// Double the interval count, reusing every existing density sample.
    fn refine(&self, d: &Density1D) -> Result<Self, NumericsError> {
        let old = &self.values;
        let mut values = Vec::with_capacity(2 * old.len() - 1);
        let step = 0.25 * self.h;
        for (j, &v) in old.iter().enumerate() {
            values.push(v);
            if j + 1 < old.len() {
                values.push(d.rel_density(self.lo + (2 * j + 1) as f64 * step));
            }
        }
        Self::from_values(self.lo, 0.5 * self.h, values)
    }

    fn total(&self) -> f64 {
        *self.prefix.last().unwrap()
    }

    /// Quadratic density model on interval `i`: coefficients of
    /// `q(s) = a s^2 + b s + c` through the three Simpson samples.
    fn interval_model(&self, i: usize) -> (f64, f64, f64) {
        let f0 = self.values[2 * i];
        let fm = self.values[2 * i + 1];
        let f1 = self.values[2 * i + 2];
        let h = self.h;
        let a = (2.0 * f0 - 4.0 * fm + 2.0 * f1) / (h * h);
        let b = (-3.0 * f0 + 4.0 * fm - f1) / h;
        (a, b, f0)
    }

    fn cdf(&self, x: f64) -> f64 {
        let n = self.prefix.len() - 1;
        let pos = (x - self.lo) / self.h;
        if pos <= 0.0 {
            return 0.0;
        }
        if pos >= n as f64 {
            return self.total();
        }
        let i = pos as usize;
        let s = (pos - i as f64) * self.h;
        let (a, b, c) = self.interval_model(i);
        self.prefix[i] + ((a * s / 3.0 + b * 0.5) * s + c) * s
    }

    /// Inverse CDF at `u * total()`.
    fn invert(&self, u: f64) -> f64 {
        let target = u * self.total();
        // Leftmost interval whose prefix exceeds the target.
        let mut lo_idx = 0usize;
        let mut hi_idx = self.prefix.len() - 1;
        while hi_idx - lo_idx > 1 {
            let mid = (lo_idx + hi_idx) / 2;
            if self.prefix[mid] < target {
                lo_idx = mid;
            } else {
                hi_idx = mid;
            }
        }
        let i = lo_idx;
        let local = target - self.prefix[i];
        let mass_i = self.prefix[i + 1] - self.prefix[i];
        let (a, b, c) = self.interval_model(i);
        let mass = |s: f64| ((a * s / 3.0 + b * 0.5) * s + c) * s;
        let q = |s: f64| (a * s + b) * s + c;

        // Safeguarded Newton on the monotone cubic mass function.
        let mut s_lo = 0.0f64;
        let mut s_hi = self.h;
        let mut s = self.h * (local / mass_i).clamp(0.0, 1.0);
        for _ in 0..60 {
            let r = mass(s) - local;
            if r > 0.0 {
                s_hi = s;
            } else {
                s_lo = s;
            }
            let slope = q(s);
            let mut next = if slope > 0.0 { s - r / slope } else { f64::NAN };
            if !(next > s_lo && next < s_hi) {
                next = 0.5 * (s_lo + s_hi);
            }
            if (next - s).abs() <= 1e-16 * self.h {
                s = next;
                break;
            }
            s = next;
        }
        self.lo + i as f64 * self.h + s
    }
}
