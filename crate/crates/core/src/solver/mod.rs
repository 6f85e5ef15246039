//! Proximal implicit-Euler time stepping.
//!
//! Each step minimizes
//!
//! `J(V) = |V - U_prev|^2 / (2 tau) + phi_reg(V) + (G(U_prev) - Theta_n, V)`
//!
//! so that the minimizer solves `(V - U_prev) / tau + A V = Theta_n - G(U_prev)`,
//! where `A` is the gradient of the regularized convex energy. The smooth
//! perturbation is lagged by default, which keeps every subproblem convex.

mod flow;
mod inner;

use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

pub use flow::{proximal_step, resolvent, run_flow, run_flow_with, FlowOutcome, Snapshot};
pub use inner::InnerOutcome;

use crate::energy::EnergyError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("inner solver did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("non-finite value in the step objective")]
    NumericalFailure,
    #[error(transparent)]
    Energy(#[from] EnergyError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FlowError {
    #[error("invalid flow parameters: {0}")]
    Config(String),
    #[error("initial value leaves the potential domain at node {node} (value {value})")]
    InfeasibleInitial { node: usize, value: f64 },
    #[error("step {step} failed: {source}")]
    StepFailed { step: usize, source: SolveError },
    #[error(transparent)]
    Energy(#[from] EnergyError),
}

/// Default iteration cap of the inner solver.
pub const DEFAULT_INNER_MAX_ITERS: usize = 200;

/// Time-stepping controls.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowParams {
    pub tau: f64,
    pub horizon: f64,
    /// Gradient-norm tolerance of the inner solver; `None` selects `1e-9 sqrt(dofs)`.
    pub inner_tol: Option<f64>,
    pub inner_max_iters: usize,
    /// Evaluate the perturbation at the previous state (`true`) or implicitly.
    pub semi_implicit_g: bool,
}

impl FlowParams {
    pub fn new(tau: f64, horizon: f64) -> Self {
        Self { tau, horizon, inner_tol: None, inner_max_iters: DEFAULT_INNER_MAX_ITERS, semi_implicit_g: true }
    }

    pub fn with_inner_tol(mut self, tol: f64) -> Self {
        self.inner_tol = Some(tol);
        self
    }

    pub fn resolved_inner_tol(&self, dofs: usize) -> f64 {
        self.inner_tol.unwrap_or_else(|| 1e-9 * libm::sqrt(dofs as f64))
    }

    pub fn steps(&self) -> usize {
        let r = self.horizon / self.tau;
        (libm::ceil(r - 1e-9 * r) as usize).max(1)
    }

    /// Largest admissible step for a perturbation with Lipschitz constant `lip`.
    pub fn max_stable_tau(lip: f64) -> f64 {
        if lip > 0.0 {
            0.5 / lip
        } else {
            f64::INFINITY
        }
    }

    pub fn validate(&self, lipschitz: f64) -> Result<(), FlowError> {
        use alloc::format;
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(FlowError::Config(format!("tau must be positive, got {}", self.tau)));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(FlowError::Config(format!("horizon T must be positive, got {}", self.horizon)));
        }
        if let Some(t) = self.inner_tol {
            if !(t.is_finite() && t > 0.0) {
                return Err(FlowError::Config(format!("inner_tol must be positive, got {t}")));
            }
        }
        if self.inner_max_iters == 0 {
            return Err(FlowError::Config("inner_max_iters must be positive".into()));
        }
        let max_tau = Self::max_stable_tau(lipschitz);
        if self.tau > max_tau {
            return Err(FlowError::Config(format!(
                "tau = {} exceeds the stability bound 1/(2 L_g) = {} for L_g = {}; reduce tau",
                self.tau, max_tau, lipschitz
            )));
        }
        Ok(())
    }
}

/// One accepted time step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub time: f64,
    pub phi_reg: f64,
    /// Regularized convex energy plus the extended perturbation.
    pub free_energy: f64,
    /// `|U^{n+1} - U^n| / tau` in the product norm.
    pub rate_norm: f64,
    pub inner_iters: usize,
    pub inner_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FlowTrace {
    pub records: Vec<StepRecord>,
}
