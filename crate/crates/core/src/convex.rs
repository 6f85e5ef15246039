//! Scalar convex potentials `B : R -> [0, +inf]`, their Moreau-Yosida
//! envelopes, proximal maps and Yosida slopes.

use alloc::vec::Vec;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("non-finite argument {0}")]
    NonFinite(f64),
    #[error("regularization parameter must be positive and finite, got {0}")]
    BadLambda(f64),
    #[error("invalid potential: {0}")]
    InvalidPotential(&'static str),
    #[error("potentials live on different domains: [{0}, {1}] vs [{2}, {3}]")]
    DomainMismatch(f64, f64, f64, f64),
    #[error("invalid compatibility constants: {0}")]
    InvalidConstants(&'static str),
    #[error("sample count must be positive")]
    NoSamples,
}

/// Bisection controls for the tabulated prox.
const TAB_PROX_TOL: f64 = 1e-12;
const TAB_PROX_MAX_ITERS: usize = 200;

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    /// `I_[lo, hi]`.
    Indicator { lo: f64, hi: f64 },
    /// `c t^2 / 2` on the whole line.
    Quadratic { c: f64 },
    /// Piecewise-linear interpolant of `(t_i, B_i)`, `+inf` outside `[t_0, t_last]`.
    Tabulated { t: Vec<f64>, b: Vec<f64> },
}

/// A proper, lower semicontinuous, convex, nonnegative potential with `B(0) = 0`.
///
/// The effective domain is always a closed interval containing zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    kind: Kind,
}

impl Potential {
    pub fn indicator(lo: f64, hi: f64) -> Result<Self, KernelError> {
        if lo.is_nan() || hi.is_nan() || !(lo < hi) {
            return Err(KernelError::InvalidPotential("indicator needs lo < hi"));
        }
        if !(lo <= 0.0 && 0.0 <= hi) {
            return Err(KernelError::InvalidPotential("indicator interval must contain 0"));
        }
        Ok(Self { kind: Kind::Indicator { lo, hi } })
    }

    /// `B(t) = c t^2 / 2`, `c > 0`.
    pub fn quadratic(c: f64) -> Result<Self, KernelError> {
        if !(c.is_finite() && c > 0.0) {
            return Err(KernelError::InvalidPotential("quadratic coefficient must be positive"));
        }
        Ok(Self { kind: Kind::Quadratic { c } })
    }

    /// Piecewise-linear potential through `points`, infinite outside their range.
    ///
    /// The breakpoints must be strictly increasing, the values finite and
    /// nonnegative, the slopes nondecreasing, and the interpolant must vanish at 0.
    pub fn tabulated(points: &[(f64, f64)]) -> Result<Self, KernelError> {
        if points.len() < 2 {
            return Err(KernelError::InvalidPotential("tabulated potential needs at least two points"));
        }
        if points.iter().any(|&(t, b)| !t.is_finite() || !b.is_finite()) {
            return Err(KernelError::InvalidPotential("tabulated points must be finite"));
        }
        if points.windows(2).any(|w| !(w[0].0 < w[1].0)) {
            return Err(KernelError::InvalidPotential("breakpoints must be strictly increasing"));
        }
        if points.iter().any(|&(_, b)| b < 0.0) {
            return Err(KernelError::InvalidPotential("tabulated values must be nonnegative"));
        }
        let t: Vec<f64> = points.iter().map(|p| p.0).collect();
        let b: Vec<f64> = points.iter().map(|p| p.1).collect();
        let slopes: Vec<f64> = (0..t.len() - 1).map(|k| (b[k + 1] - b[k]) / (t[k + 1] - t[k])).collect();
        let scale = slopes.iter().fold(1.0f64, |m, s| m.max(libm::fabs(*s)));
        if slopes.windows(2).any(|w| w[1] < w[0] - 1e-12 * scale) {
            return Err(KernelError::InvalidPotential("tabulated potential is not convex"));
        }
        if !(t[0] <= 0.0 && 0.0 <= t[t.len() - 1]) {
            return Err(KernelError::InvalidPotential("tabulated domain must contain 0"));
        }
        let p = Self { kind: Kind::Tabulated { t, b } };
        if libm::fabs(p.value(0.0)) > 1e-14 {
            return Err(KernelError::InvalidPotential("tabulated potential must vanish at 0"));
        }
        Ok(p)
    }

    /// Closed effective domain `[lo, hi]`; ends may be infinite.
    pub fn domain(&self) -> (f64, f64) {
        match &self.kind {
            Kind::Indicator { lo, hi } => (*lo, *hi),
            Kind::Quadratic { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            Kind::Tabulated { t, .. } => (t[0], t[t.len() - 1]),
        }
    }

    pub fn in_domain(&self, r: f64) -> bool {
        let (lo, hi) = self.domain();
        lo <= r && r <= hi
    }

    /// Exact value, `+inf` outside the domain.
    pub fn value(&self, r: f64) -> f64 {
        if !self.in_domain(r) {
            return f64::INFINITY;
        }
        match &self.kind {
            Kind::Indicator { .. } => 0.0,
            Kind::Quadratic { c } => 0.5 * c * r * r,
            Kind::Tabulated { t, b } => {
                let k = segment(t, r);
                let s = (r - t[k]) / (t[k + 1] - t[k]);
                b[k] + s * (b[k + 1] - b[k])
            }
        }
    }

    /// Least-norm element of the subdifferential `beta(r)`; `None` outside the domain.
    ///
    /// At a finite endpoint of the domain the subdifferential is a half line and
    /// its least-norm element is returned, which may be zero.
    pub fn minimal_section(&self, r: f64) -> Option<f64> {
        if !self.in_domain(r) {
            return None;
        }
        let (lo, hi) = self.domain();
        let (left, right) = match &self.kind {
            Kind::Indicator { .. } => (0.0, 0.0),
            Kind::Quadratic { c } => (c * r, c * r),
            Kind::Tabulated { .. } => self.one_sided_slopes(r),
        };
        let left = if r == lo { f64::NEG_INFINITY } else { left };
        let right = if r == hi { f64::INFINITY } else { right };
        Some(0.0f64.clamp(left, right))
    }

    /// Projection `T_B` onto the closed domain.
    pub fn project_domain(&self, r: f64) -> f64 {
        let (lo, hi) = self.domain();
        r.max(lo).min(hi)
    }

    /// Unique minimizer of `(t - r)^2 / (2 lambda) + B(t)`.
    pub fn prox(&self, lambda: f64, r: f64) -> Result<f64, KernelError> {
        check_args(lambda, r)?;
        Ok(self.prox_unchecked(lambda, r))
    }

    /// Moreau-Yosida envelope `B^lambda(r)`.
    pub fn my_eval(&self, lambda: f64, r: f64) -> Result<f64, KernelError> {
        check_args(lambda, r)?;
        Ok(self.my_eval_unchecked(lambda, r))
    }

    /// Yosida approximation `beta^lambda(r) = (r - prox(r)) / lambda`, the
    /// derivative of the envelope.
    pub fn yosida_slope(&self, lambda: f64, r: f64) -> Result<f64, KernelError> {
        check_args(lambda, r)?;
        Ok(self.yosida_slope_unchecked(lambda, r))
    }

    /// Almost-everywhere derivative of the Yosida slope, used by Newton solvers.
    pub fn yosida_slope_derivative(&self, lambda: f64, r: f64) -> Result<f64, KernelError> {
        check_args(lambda, r)?;
        Ok(self.yosida_slope_derivative_unchecked(lambda, r))
    }

    pub(crate) fn prox_unchecked(&self, lambda: f64, r: f64) -> f64 {
        match &self.kind {
            Kind::Indicator { lo, hi } => r.max(*lo).min(*hi),
            Kind::Quadratic { c } => r / (1.0 + lambda * c),
            Kind::Tabulated { t, .. } => self.tabulated_prox(t, lambda, r),
        }
    }

    pub(crate) fn my_eval_unchecked(&self, lambda: f64, r: f64) -> f64 {
        match &self.kind {
            // Closed form avoids cancellation in (prox - r)^2 for large |r|.
            Kind::Quadratic { c } => 0.5 * c * r * r / (1.0 + lambda * c),
            _ => {
                let p = self.prox_unchecked(lambda, r);
                let d = p - r;
                0.5 * d * d / lambda + self.value(p)
            }
        }
    }

    pub(crate) fn yosida_slope_unchecked(&self, lambda: f64, r: f64) -> f64 {
        match &self.kind {
            Kind::Quadratic { c } => c * r / (1.0 + lambda * c),
            _ => (r - self.prox_unchecked(lambda, r)) / lambda,
        }
    }

    pub(crate) fn yosida_slope_derivative_unchecked(&self, lambda: f64, r: f64) -> f64 {
        match &self.kind {
            Kind::Indicator { lo, hi } => {
                if r < *lo || r > *hi {
                    1.0 / lambda
                } else {
                    0.0
                }
            }
            Kind::Quadratic { c } => c / (1.0 + lambda * c),
            Kind::Tabulated { t, .. } => {
                // prox is locally constant at breakpoints and a unit shift on open pieces
                let p = self.tabulated_prox(t, lambda, r);
                let at_break = t.iter().any(|&tk| libm::fabs(p - tk) <= 1e-12 * (1.0 + libm::fabs(tk)));
                if at_break {
                    1.0 / lambda
                } else {
                    0.0
                }
            }
        }
    }

    fn one_sided_slopes(&self, r: f64) -> (f64, f64) {
        let Kind::Tabulated { t, b } = &self.kind else {
            unreachable!("one-sided slopes are only needed for tabulated potentials")
        };
        let slope = |k: usize| (b[k + 1] - b[k]) / (t[k + 1] - t[k]);
        let n = t.len();
        // exact breakpoint hit gives a genuine interval
        if let Some(k) = t.iter().position(|&tk| tk == r) {
            let left = if k == 0 { f64::NEG_INFINITY } else { slope(k - 1) };
            let right = if k == n - 1 { f64::INFINITY } else { slope(k) };
            return (left, right);
        }
        let k = segment(t, r);
        (slope(k), slope(k))
    }

    /// Bisection on `t + lambda * dB(t) ∋ r` over the domain.
    fn tabulated_prox(&self, t: &[f64], lambda: f64, r: f64) -> f64 {
        let (mut lo, mut hi) = (t[0], t[t.len() - 1]);
        // endpoint subdifferentials are half lines
        if r <= lo + lambda * self.one_sided_slopes(lo).1 {
            return lo;
        }
        if r >= hi + lambda * self.one_sided_slopes(hi).0 {
            return hi;
        }
        // a breakpoint whose subgradient interval captures r is the exact answer
        for &tk in &t[1..t.len() - 1] {
            let (sl, sr) = self.one_sided_slopes(tk);
            if tk + lambda * sl <= r && r <= tk + lambda * sr {
                return tk;
            }
        }
        // otherwise the answer is interior to a piece, where it is a plain shift
        let Kind::Tabulated { b, .. } = &self.kind else { unreachable!() };
        for k in 0..t.len() - 1 {
            let cand = r - lambda * (b[k + 1] - b[k]) / (t[k + 1] - t[k]);
            if t[k] < cand && cand < t[k + 1] {
                return cand;
            }
        }
        // rounding at a piece boundary; bisect
        for _ in 0..TAB_PROX_MAX_ITERS {
            let mid = 0.5 * (lo + hi);
            let (sl, sr) = self.one_sided_slopes(mid);
            let below = mid + lambda * sl;
            let above = mid + lambda * sr;
            if below > r {
                hi = mid;
            } else if above < r {
                lo = mid;
            } else {
                return mid;
            }
            if hi - lo <= TAB_PROX_TOL * (1.0 + libm::fabs(mid)) {
                break;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Index `k` of the piece `[t_k, t_{k+1}]` containing `r` (clamped to valid pieces).
fn segment(t: &[f64], r: f64) -> usize {
    let n = t.len();
    match t.partition_point(|&tk| tk <= r) {
        0 => 0,
        p if p >= n => n - 2,
        p => p - 1,
    }
}

fn check_args(lambda: f64, r: f64) -> Result<(), KernelError> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(KernelError::BadLambda(lambda));
    }
    if !r.is_finite() {
        return Err(KernelError::NonFinite(r));
    }
    Ok(())
}

/// Constants of the bulk/boundary growth compatibility condition
/// `a0 |beta_G(t)| - b0 <= |beta(t)| <= a1 |beta_G(t)| + b1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompatibilityConstants {
    pub a0: f64,
    pub a1: f64,
    pub b0: f64,
    pub b1: f64,
}

impl CompatibilityConstants {
    pub fn new(a0: f64, a1: f64, b0: f64, b1: f64) -> Result<Self, KernelError> {
        if !(a0.is_finite() && a0 > 0.0 && a1.is_finite() && a1 > 0.0) {
            return Err(KernelError::InvalidConstants("a0 and a1 must be positive"));
        }
        if !(b0.is_finite() && b0 >= 0.0 && b1.is_finite() && b1 >= 0.0) {
            return Err(KernelError::InvalidConstants("b0 and b1 must be nonnegative"));
        }
        Ok(Self { a0, a1, b0, b1 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompatibilityReport {
    pub holds: bool,
    /// Smallest slack of either inequality over the samples; negative means violated.
    pub worst_margin: f64,
    /// Sample point where the worst margin was attained.
    pub worst_at: f64,
}

/// Half-width of the sampling window used for unbounded domain ends.
pub const UNBOUNDED_SAMPLE_RADIUS: f64 = 10.0;

/// Samples the compatibility inequalities at `samples` interior points of the
/// shared domain, with unbounded ends truncated at `UNBOUNDED_SAMPLE_RADIUS`.
pub fn check_compatibility(
    bulk: &Potential,
    bdry: &Potential,
    c: &CompatibilityConstants,
    samples: usize,
) -> Result<CompatibilityReport, KernelError> {
    let (lo, hi) = bulk.domain();
    let (lo_g, hi_g) = bdry.domain();
    if lo != lo_g || hi != hi_g {
        return Err(KernelError::DomainMismatch(lo, hi, lo_g, hi_g));
    }
    if samples == 0 {
        return Err(KernelError::NoSamples);
    }
    let a = if lo.is_finite() { lo } else { -UNBOUNDED_SAMPLE_RADIUS };
    let b = if hi.is_finite() { hi } else { UNBOUNDED_SAMPLE_RADIUS };
    // interior points only: open grid when an end is a true domain boundary
    let open_lo = lo.is_finite();
    let open_hi = hi.is_finite();
    let mut worst = f64::INFINITY;
    let mut worst_at = 0.0;
    for k in 0..samples {
        let s = if samples == 1 {
            0.5
        } else {
            let (start, denom) = match (open_lo, open_hi) {
                (true, true) => (1.0, (samples + 1) as f64),
                (true, false) => (1.0, samples as f64),
                (false, true) => (0.0, samples as f64),
                (false, false) => (0.0, (samples - 1) as f64),
            };
            (k as f64 + start) / denom
        };
        let tau = a + (b - a) * s;
        let Some(bb) = bulk.minimal_section(tau) else { continue };
        let Some(bg) = bdry.minimal_section(tau) else { continue };
        let (bb, bg) = (libm::fabs(bb), libm::fabs(bg));
        let lower = bb - (c.a0 * bg - c.b0);
        let upper = c.a1 * bg + c.b1 - bb;
        let m = lower.min(upper);
        if m < worst {
            worst = m;
            worst_at = tau;
        }
    }
    let scale = 1.0 + libm::fabs(worst_at) * (c.a0 + c.a1);
    Ok(CompatibilityReport { holds: worst >= -1e-12 * scale, worst_margin: worst, worst_at })
}
