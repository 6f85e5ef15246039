//! Scripted studies: parameter sweeps over `eps` and the regularization pair,
//! a continuous-dependence probe, and a sampled probe of the limits
//! `f_delta -> |.|` and `B^lambda -> B`.
//!
//! Every study is deterministic. Independent runs go through a [`ParallelMap`],
//! and results are reduced in input order, so a parallel backend produces the
//! same report as [`Sequential`].

mod dependence;
mod mosco;
mod sweep;

use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

pub use dependence::{continuous_dependence_probe, smooth_random_field, DependenceEntry, DependenceReport};
pub use mosco::{mosco_probe, MoscoCheck, MoscoConfig, MoscoReport, SampleSequence, MOSCO_LIMITATION, MOSCO_SLACK};
pub use sweep::{sweep_epsilon, sweep_regularization, SweepEntry, SweepKind, SweepReport, V0_NOTE};

use crate::energy::{EnergyError, EnergyParams, ForcingField};
use crate::field::CoupledField;
use crate::mesh::Mesh;
use crate::solver::{run_flow_with, FlowError, FlowParams, FlowTrace};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExperimentError {
    #[error("{0}")]
    Invalid(String),
    #[error("run {index} failed: {source}")]
    Run { index: usize, source: FlowError },
    #[error(transparent)]
    Energy(#[from] EnergyError),
}

impl From<crate::mesh::MeshError> for ExperimentError {
    fn from(e: crate::mesh::MeshError) -> Self {
        Self::Energy(e.into())
    }
}

/// Order-preserving map over independent jobs.
pub trait ParallelMap {
    fn map_ordered<T, R, F>(&self, items: Vec<T>, f: F) -> Vec<R>
    where
        T: Send,
        R: Send,
        F: Fn(T) -> R + Sync + Send;
}

/// Runs jobs one after another.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl ParallelMap for Sequential {
    fn map_ordered<T, R, F>(&self, items: Vec<T>, f: F) -> Vec<R>
    where
        T: Send,
        R: Send,
        F: Fn(T) -> R + Sync + Send,
    {
        items.into_iter().map(f).collect()
    }
}

/// Everything needed to run one flow.
#[derive(Debug, Clone)]
pub struct FlowProblem {
    pub mesh: Mesh,
    pub params: EnergyParams,
    pub flow: FlowParams,
    pub u0: CoupledField,
    pub forcing: ForcingField,
}

/// A full trajectory `U^0, ..., U^N` with its trace.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<CoupledField>,
    pub trace: FlowTrace,
}

impl FlowProblem {
    pub fn trajectory(&self) -> Result<Trajectory, FlowError> {
        let mut states = Vec::with_capacity(self.flow.steps() + 1);
        let (_, trace) = run_flow_with(&self.mesh, &self.params, &self.flow, &self.u0, &self.forcing, |_, _, u| {
            states.push(u.clone())
        })?;
        Ok(Trajectory { states, trace })
    }
}

/// Distances between two trajectories on one mesh and time grid.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrajectoryDistance {
    /// `max_n |U^n - V^n|` in the product norm.
    pub sup_h: f64,
    /// `(sum_n tau (|grad (u - v)|^2 + |u_G - v_G|^2_{L2(G)}))^(1/2)`.
    pub v0: f64,
    /// Same with the tangential gradient of the boundary trace; `None` without surface calculus.
    pub gamma_h1: Option<f64>,
}

pub fn trajectory_distance(mesh: &Mesh, tau: f64, a: &Trajectory, b: &Trajectory) -> Result<TrajectoryDistance, EnergyError> {
    if a.states.len() != b.states.len() {
        return Err(EnergyError::Invalid("trajectories have different lengths"));
    }
    let mut d = TrajectoryDistance::default();
    let (mut v0, mut gh1) = (0.0, 0.0);
    for (n, (x, y)) in a.states.iter().zip(&b.states).enumerate() {
        let diff = x.sub(y);
        d.sup_h = d.sup_h.max(mesh.h_norm(&diff)?);
        if n == 0 {
            continue;
        }
        let bl2 = mesh.boundary_l2_sq(&diff)?;
        v0 += tau * (mesh.grad_seminorm_sq(&diff)? + bl2);
        gh1 += tau * (mesh.surface_seminorm_sq(&diff)? + bl2);
    }
    d.v0 = libm::sqrt(v0);
    d.gamma_h1 = mesh.has_surface_calculus().then(|| libm::sqrt(gh1));
    Ok(d)
}

/// Least-squares slope of `log y` against `log x` over the positive pairs.
pub fn fitted_rate(x: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (libm::log(*a), libm::log(*b)))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx)
}

/// One named pass/fail assertion of a study.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, passed: bool, detail: String) -> Self {
        Self { name: name.into(), passed, detail }
    }
}

/// First failed check, if any.
pub fn first_failure(checks: &[Check]) -> Option<&Check> {
    checks.iter().find(|c| !c.passed)
}

fn descending(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[0] > w[1])
}
