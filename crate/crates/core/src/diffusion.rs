//! Smoothed Euclidean norm `f_delta(w) = sqrt(|w|^2 + delta^2) - delta` and the
//! sign selection it converges to.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("smoothing parameter must lie in (0, 1], got {0}")]
pub struct BadDelta(pub f64);

/// Growth constant of the gradient bound `|grad f(w)| <= C0 (|w| + 1)`.
pub const GROWTH_CONSTANT: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularizedNorm {
    delta: f64,
}

impl RegularizedNorm {
    pub fn new(delta: f64) -> Result<Self, BadDelta> {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(BadDelta(delta));
        }
        Ok(Self { delta })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    #[inline]
    fn root<const N: usize>(&self, w: &[f64; N]) -> f64 {
        libm::sqrt(norm_sq(w) + self.delta * self.delta)
    }

    #[inline]
    pub fn eval<const N: usize>(&self, w: &[f64; N]) -> f64 {
        let n2 = norm_sq(w);
        // sqrt(a + d^2) - d rewritten to avoid cancellation for |w| << delta
        n2 / (libm::sqrt(n2 + self.delta * self.delta) + self.delta)
    }

    #[inline]
    pub fn grad<const N: usize>(&self, w: &[f64; N]) -> [f64; N] {
        let s = self.root(w);
        w.map(|x| x / s)
    }

    /// Hessian-vector product `(I - w w^T / s^2) v / s`, `s = sqrt(|w|^2 + delta^2)`.
    #[inline]
    pub fn hessian_apply<const N: usize>(&self, w: &[f64; N], v: &[f64; N]) -> [f64; N] {
        let s = self.root(w);
        let wv = dot(w, v) / (s * s);
        let mut out = [0.0; N];
        for i in 0..N {
            out[i] = (v[i] - w[i] * wv) / s;
        }
        out
    }
}

/// Selection from the set-valued sign map: `w / |w|`, or zero at the origin.
pub fn sgn_select<const N: usize>(w: &[f64; N]) -> [f64; N] {
    let n = libm::sqrt(norm_sq(w));
    if n == 0.0 {
        [0.0; N]
    } else {
        w.map(|x| x / n)
    }
}

#[inline]
pub(crate) fn norm_sq<const N: usize>(w: &[f64; N]) -> f64 {
    w.iter().map(|x| x * x).sum()
}

#[inline]
pub(crate) fn dot<const N: usize>(a: &[f64; N], b: &[f64; N]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
