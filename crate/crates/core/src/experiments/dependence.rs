use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{descending, trajectory_distance, Check, ExperimentError, FlowProblem, ParallelMap};
use crate::energy::ForcingField;
use crate::field::CoupledField;
use crate::mesh::Mesh;
use crate::solver::FlowTrace;

const MODES: usize = 4;

/// Seeded smooth field `sum_j a_j cos(k_j . x + phi_j)` with `sup |.| <= 1`.
pub fn smooth_random_field(mesh: &Mesh, seed: u64) -> CoupledField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let modes: Vec<(f64, [f64; 2], f64)> = (0..MODES)
        .map(|_| {
            let a: f64 = rng.random_range(-1.0..1.0);
            let k = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
            let phi = rng.random_range(0.0..core::f64::consts::TAU);
            (a, k, phi)
        })
        .collect();
    let total: f64 = modes.iter().map(|m| libm::fabs(m.0)).sum::<f64>().max(f64::MIN_POSITIVE);
    mesh.sample(|x, y| modes.iter().map(|(a, k, p)| a * libm::cos(k[0] * x + k[1] * y + p)).sum::<f64>() / total)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DependenceEntry {
    pub magnitude: f64,
    /// Perturbs the initial value as well as the forcing.
    pub perturbs_initial: bool,
    pub sup_h: f64,
    pub v0: f64,
    /// `|dU0|^2 + sum_n tau |dTheta^n|^2`.
    pub data_sq: f64,
    pub ratio: f64,
    pub within_envelope: bool,
    pub trace: FlowTrace,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DependenceReport {
    pub seed: u64,
    pub envelope: f64,
    pub baseline_trace: FlowTrace,
    pub entries: Vec<DependenceEntry>,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
}

impl DependenceReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

struct Job {
    magnitude: f64,
    perturbs_initial: bool,
    problem: FlowProblem,
}

/// Perturbs the initial value and the forcing along seeded smooth directions at
/// each magnitude and compares the perturbed runs with the baseline.
///
/// The ratio `(sup_n |dU^n|^2 + int |dU|_V0^2) / (|dU0|^2 + int |dTheta|^2)` must stay
/// below `2 exp(2 L_g T) (1 + T)` at every magnitude.
pub fn continuous_dependence_probe<P: ParallelMap>(
    base: &FlowProblem,
    magnitudes: &[f64],
    seed: u64,
    pm: &P,
) -> Result<DependenceReport, ExperimentError> {
    if magnitudes.is_empty() {
        return Err(ExperimentError::Invalid("magnitude list must not be empty".into()));
    }
    if magnitudes.iter().any(|m| !(m.is_finite() && *m > 0.0)) || !descending(magnitudes) {
        return Err(ExperimentError::Invalid(format!(
            "magnitudes must be positive and strictly descending, got {magnitudes:?}"
        )));
    }
    let mesh = &base.mesh;
    let nodes = mesh.num_nodes();
    let du = smooth_random_field(mesh, seed);
    let dtheta = ForcingField::constant(smooth_random_field(mesh, seed.wrapping_add(1)));
    let bulk = base.params.bulk_potential();

    let perturbed = |m: f64, initial: bool| -> FlowProblem {
        let mut p = base.clone();
        if initial {
            p.u0 = CoupledField::new(
                base.u0.values().iter().zip(du.values()).map(|(u, d)| bulk.project_domain(u + m * d)).collect(),
            );
        }
        p.forcing = base.forcing.perturbed(m, &dtheta, nodes);
        p
    };
    let mut jobs = alloc::vec![
        Job { magnitude: 0.0, perturbs_initial: true, problem: base.clone() },
        Job { magnitude: 0.0, perturbs_initial: true, problem: perturbed(0.0, true) },
    ];
    for &m in magnitudes {
        jobs.push(Job { magnitude: m, perturbs_initial: true, problem: perturbed(m, true) });
    }
    jobs.push(Job { magnitude: magnitudes[0], perturbs_initial: false, problem: perturbed(magnitudes[0], false) });

    let indexed: Vec<(usize, &Job)> = jobs.iter().enumerate().collect();
    let runs = pm
        .map_ordered(indexed, |(i, j)| j.problem.trajectory().map_err(|source| ExperimentError::Run { index: i, source }))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;

    let t = base.flow.steps() as f64 * base.flow.tau;
    let envelope = 2.0 * libm::exp(2.0 * base.params.perturbation().lipschitz() * t) * (1.0 + t);
    let baseline = &runs[0];

    let bitwise = runs[1].states.iter().zip(&baseline.states).all(|(a, b)| a.values() == b.values());
    let mut checks = alloc::vec![Check::new(
        "zero perturbation reproduces the baseline bitwise",
        bitwise,
        format!("{} states compared", baseline.states.len()),
    )];

    let mut entries = Vec::new();
    for (job, run) in jobs.iter().zip(&runs).skip(2) {
        let d = trajectory_distance(mesh, base.flow.tau, run, baseline)?;
        let du0 = mesh.h_norm(&job.problem.u0.sub(&base.u0))?;
        let mut data_sq = du0 * du0;
        for n in 1..=base.flow.steps() {
            let tn = (n - 1) as f64 * base.flow.tau;
            let zero = CoupledField::zeros(nodes);
            let a = job.problem.forcing.at(tn).unwrap_or(&zero);
            let b = base.forcing.at(tn).unwrap_or(&zero);
            let dn = mesh.h_norm(&a.sub(b))?;
            data_sq += base.flow.tau * dn * dn;
        }
        let ratio = (d.sup_h * d.sup_h + d.v0 * d.v0) / data_sq;
        entries.push(DependenceEntry {
            magnitude: job.magnitude,
            perturbs_initial: job.perturbs_initial,
            sup_h: d.sup_h,
            v0: d.v0,
            data_sq,
            ratio,
            within_envelope: ratio.is_finite() && ratio <= envelope,
            trace: run.trace.clone(),
        });
    }
    let worst = entries.iter().map(|e| e.ratio).fold(0.0, f64::max);
    checks.push(Check::new(
        "ratios within envelope",
        entries.iter().all(|e| e.within_envelope),
        format!("worst ratio {worst:e}, envelope {envelope:e}"),
    ));
    let joint: Vec<f64> = entries.iter().filter(|e| e.perturbs_initial).map(|e| e.ratio).collect();
    let (lo, hi) = joint.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
    checks.push(Check::new(
        "ratios within a factor 2 of each other",
        hi <= 2.0 * lo,
        format!("ratios {joint:?}"),
    ));
    Ok(DependenceReport {
        seed,
        envelope,
        baseline_trace: baseline.trace.clone(),
        entries,
        checks,
        notes: alloc::vec![
            String::from("Perturbed initial values are projected onto the potential domain; the data norm uses the projected difference."),
            String::from(super::V0_NOTE),
        ],
    })
}
