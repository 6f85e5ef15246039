use alloc::vec::Vec;

use super::EnergyError;

/// Shape of the smooth non-convex part `G` (shared by bulk and boundary).
#[derive(Debug, Clone, PartialEq)]
pub enum PerturbationKind {
    None,
    /// `G(s) = -s^2 / 2`, the classical double-well companion of the obstacle.
    NegQuadratic,
    /// Piecewise-linear derivative `g` through `(s_i, g_i)`, with `G(s) = int_0^s g`.
    Tabulated(Vec<(f64, f64)>),
}

/// `G`, `g = G'` and their Lipschitz extensions outside the closed potential domain:
/// `g_ext(r) = g(T r)` and `G_ext(r) = G(T r) + g(T r) (r - T r)` with `T` the
/// projection onto the domain, so that `G_ext' = g_ext` everywhere.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothPerturbation {
    kind: PerturbationKind,
    lo: f64,
    hi: f64,
    lipschitz: f64,
}

impl SmoothPerturbation {
    pub fn new(kind: PerturbationKind, domain: (f64, f64)) -> Result<Self, EnergyError> {
        let (mut lo, mut hi) = domain;
        let lipschitz = match &kind {
            PerturbationKind::None => 0.0,
            PerturbationKind::NegQuadratic => 1.0,
            PerturbationKind::Tabulated(pts) => {
                if pts.len() < 2 {
                    return Err(EnergyError::Invalid("tabulated perturbation needs at least two points"));
                }
                if pts.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
                    return Err(EnergyError::Invalid("tabulated perturbation points must be finite"));
                }
                if pts.windows(2).any(|w| !(w[0].0 < w[1].0)) {
                    return Err(EnergyError::Invalid("tabulated perturbation abscissae must increase"));
                }
                // constant extension beyond the table
                lo = lo.max(pts[0].0);
                hi = hi.min(pts[pts.len() - 1].0);
                if !(lo <= hi) {
                    return Err(EnergyError::Invalid("tabulated perturbation misses the potential domain"));
                }
                pts.windows(2)
                    .map(|w| libm::fabs((w[1].1 - w[0].1) / (w[1].0 - w[0].0)))
                    .fold(0.0, f64::max)
            }
        };
        Ok(Self { kind, lo, hi, lipschitz })
    }

    pub fn kind(&self) -> &PerturbationKind {
        &self.kind
    }

    pub fn is_none(&self) -> bool {
        matches!(self.kind, PerturbationKind::None)
    }

    /// Lipschitz constant of `g_ext`.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    #[inline]
    fn clamp(&self, r: f64) -> f64 {
        r.max(self.lo).min(self.hi)
    }

    #[inline]
    pub fn g(&self, r: f64) -> f64 {
        let s = self.clamp(r);
        match &self.kind {
            PerturbationKind::None => 0.0,
            PerturbationKind::NegQuadratic => -s,
            PerturbationKind::Tabulated(pts) => {
                let k = piece(pts, s);
                let (a, b) = (pts[k], pts[k + 1]);
                a.1 + (s - a.0) * (b.1 - a.1) / (b.0 - a.0)
            }
        }
    }

    #[inline]
    pub fn big_g(&self, r: f64) -> f64 {
        let s = self.clamp(r);
        let inner = match &self.kind {
            PerturbationKind::None => return 0.0,
            PerturbationKind::NegQuadratic => -0.5 * s * s,
            PerturbationKind::Tabulated(pts) => integrate(pts, s),
        };
        inner + self.g(s) * (r - s)
    }

    /// Almost-everywhere derivative of `g_ext`.
    #[inline]
    pub fn g_prime(&self, r: f64) -> f64 {
        if r < self.lo || r > self.hi {
            return 0.0;
        }
        match &self.kind {
            PerturbationKind::None => 0.0,
            PerturbationKind::NegQuadratic => -1.0,
            PerturbationKind::Tabulated(pts) => {
                let k = piece(pts, r);
                (pts[k + 1].1 - pts[k].1) / (pts[k + 1].0 - pts[k].0)
            }
        }
    }
}

fn piece(pts: &[(f64, f64)], s: f64) -> usize {
    let n = pts.len();
    match pts.partition_point(|p| p.0 <= s) {
        0 => 0,
        p if p >= n => n - 2,
        p => p - 1,
    }
}

/// `int_0^s g` for the piecewise-linear table, `s` inside the table range.
fn integrate(pts: &[(f64, f64)], s: f64) -> f64 {
    let g_at = |x: f64| {
        let k = piece(pts, x);
        let (a, b) = (pts[k], pts[k + 1]);
        a.1 + (x - a.0) * (b.1 - a.1) / (b.0 - a.0)
    };
    let (from, to, sign) = if s >= 0.0 { (0.0, s, 1.0) } else { (s, 0.0, -1.0) };
    // trapezoid per piece is exact for a linear integrand
    let mut knots: Vec<f64> = pts.iter().map(|p| p.0).filter(|&x| x > from && x < to).collect();
    knots.insert(0, from);
    knots.push(to);
    let total: f64 = knots.windows(2).map(|w| 0.5 * (w[1] - w[0]) * (g_at(w[0]) + g_at(w[1]))).sum();
    sign * total
}
