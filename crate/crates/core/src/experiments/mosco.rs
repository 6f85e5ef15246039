use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::{descending, Check, ExperimentError};
use crate::convex::Potential;
use crate::diffusion::RegularizedNorm;

/// Printed in every report.
pub const MOSCO_LIMITATION: &str = "This probe can only refute, never prove, the lower-bound condition: \
it quantifies over weakly convergent sequences, and only finitely many sampled strongly convergent \
sequences are checked here.";

/// Slack allowed on the lower-bound and recovery checks.
pub const MOSCO_SLACK: f64 = 1e-8;

/// `w_n = limit + h_n * direction` where `h_n` is the n-th regularization parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleSequence {
    pub limit: [f64; 2],
    pub direction: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct MoscoConfig {
    /// Descending `delta_n` for `f_delta -> |.|`, all in `(0, 1]`.
    pub deltas: Vec<f64>,
    /// Points for the constant recovery sequence.
    pub points: Vec<[f64; 2]>,
    pub sequences: Vec<SampleSequence>,
    /// Descending `lambda_n` for `B^lambda -> B`.
    pub lambdas: Vec<f64>,
    /// Potentials with scalars in the interior of their domains.
    pub potentials: Vec<(Potential, Vec<f64>)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MoscoCheck {
    pub label: String,
    /// Estimated limit of the sampled values.
    pub estimate: f64,
    /// Value of the limit function.
    pub target: f64,
    /// `estimate - target` for lower bounds, `|estimate - target|` for recovery.
    pub slack: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MoscoReport {
    pub lower_bound: Vec<MoscoCheck>,
    pub recovery: Vec<MoscoCheck>,
    /// Smallest `estimate - target` over the lower-bound checks.
    pub worst_lower_slack: f64,
    /// Largest recovery error.
    pub worst_recovery_error: f64,
    pub checks: Vec<Check>,
    pub limitation: &'static str,
}

impl MoscoReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Tail estimate of `lim v_n` from the last two samples, extrapolating linearly in `h`.
fn tail_limit(h: &[f64], v: &[f64]) -> f64 {
    let n = v.len();
    if n < 2 || h[n - 2] == h[n - 1] {
        return v[n - 1];
    }
    let (h1, h2) = (h[n - 2], h[n - 1]);
    (h1 * v[n - 1] - h2 * v[n - 2]) / (h1 - h2)
}

fn norm(w: &[f64; 2]) -> f64 {
    libm::hypot(w[0], w[1])
}

fn lower(label: String, h: &[f64], v: &[f64], target: f64) -> MoscoCheck {
    let estimate = tail_limit(h, v);
    let slack = estimate - target;
    MoscoCheck { label, estimate, target, slack, passed: slack >= -MOSCO_SLACK }
}

fn recovery(label: String, h: &[f64], v: &[f64], target: f64) -> MoscoCheck {
    let estimate = tail_limit(h, v);
    let slack = libm::fabs(estimate - target);
    MoscoCheck { label, estimate, target, slack, passed: slack <= MOSCO_SLACK }
}

/// Sampled probe of `f_delta -> |.|` and `B^lambda -> B`: a lower bound along
/// the given sequences and recovery by constant sequences.
pub fn mosco_probe(cfg: &MoscoConfig) -> Result<MoscoReport, ExperimentError> {
    let valid = |xs: &[f64]| xs.len() >= 2 && descending(xs) && xs.iter().all(|x| x.is_finite() && *x > 0.0);
    if !valid(&cfg.deltas) || cfg.deltas[0] > 1.0 {
        return Err(ExperimentError::Invalid("deltas must be at least two descending values in (0, 1]".into()));
    }
    if !cfg.potentials.is_empty() && !valid(&cfg.lambdas) {
        return Err(ExperimentError::Invalid("lambdas must be at least two descending positive values".into()));
    }
    let norms: Vec<RegularizedNorm> = cfg
        .deltas
        .iter()
        .map(|&d| RegularizedNorm::new(d).map_err(|e| ExperimentError::Invalid(format!("{e}"))))
        .collect::<Result<_, _>>()?;

    let mut lower_bound = Vec::new();
    let mut rec = Vec::new();
    for s in &cfg.sequences {
        let v: Vec<f64> = norms
            .iter()
            .zip(&cfg.deltas)
            .map(|(f, &h)| f.eval(&[s.limit[0] + h * s.direction[0], s.limit[1] + h * s.direction[1]]))
            .collect();
        lower_bound.push(lower(format!("f_delta along {:?} + h {:?}", s.limit, s.direction), &cfg.deltas, &v, norm(&s.limit)));
    }
    for w in &cfg.points {
        let v: Vec<f64> = norms.iter().map(|f| f.eval(w)).collect();
        rec.push(recovery(format!("f_delta at {w:?}"), &cfg.deltas, &v, norm(w)));
    }
    for (k, (pot, scalars)) in cfg.potentials.iter().enumerate() {
        for &r in scalars {
            let target = pot.value(r);
            if !target.is_finite() {
                return Err(ExperimentError::Invalid(format!("scalar {r} lies outside the domain of potential {k}")));
            }
            let env = |l: f64, x: f64| pot.my_eval(l, x).map_err(|e| ExperimentError::Invalid(format!("{e}")));
            let v = cfg.lambdas.iter().map(|&l| env(l, r)).collect::<Result<Vec<_>, _>>()?;
            rec.push(recovery(format!("B^lambda of potential {k} at {r}"), &cfg.lambdas, &v, target));
            for dir in [-1.0, 1.0] {
                let v = cfg.lambdas.iter().map(|&l| env(l, r + dir * l)).collect::<Result<Vec<_>, _>>()?;
                lower_bound.push(lower(format!("B^lambda of potential {k} along {r} + {dir} h"), &cfg.lambdas, &v, target));
            }
        }
    }
    let worst_lower_slack = lower_bound.iter().map(|c| c.slack).fold(f64::INFINITY, f64::min);
    let worst_recovery_error = rec.iter().map(|c| c.slack).fold(0.0, f64::max);
    let first_bad = |cs: &[MoscoCheck]| cs.iter().find(|c| !c.passed).map(|c| c.label.clone());
    let checks = alloc::vec![
        Check::new(
            "lower bound along sampled sequences",
            lower_bound.iter().all(|c| c.passed),
            match first_bad(&lower_bound) {
                None => format!("worst slack {worst_lower_slack:e}"),
                Some(l) => format!("fails for {l}"),
            },
        ),
        Check::new(
            "recovery by constant sequences",
            rec.iter().all(|c| c.passed),
            match first_bad(&rec) {
                None => format!("worst error {worst_recovery_error:e}"),
                Some(l) => format!("fails for {l}"),
            },
        ),
    ];
    Ok(MoscoReport {
        lower_bound,
        recovery: rec,
        worst_lower_slack,
        worst_recovery_error,
        checks,
        limitation: MOSCO_LIMITATION,
    })
}
