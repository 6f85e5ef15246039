//! Proximal implicit-Euler gradient flows for an Allen-Cahn system with
//! total-variation diffusion in the bulk and a dynamic boundary condition.
//!
//! The crate is `no_std` and only needs `alloc`. IO, configuration and the
//! command-line front end live in the companion `acgf` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod convex;
pub mod diffusion;
pub mod energy;
pub mod experiments;
pub mod field;
pub mod mesh;
pub mod solver;

pub use convex::{check_compatibility, CompatibilityConstants, CompatibilityReport, KernelError, Potential};
pub use diffusion::{sgn_select, RegularizedNorm};
pub use energy::{
    EnergyError, EnergyParams, EnergyTerms, ForcingField, PerturbationKind, SmoothPerturbation,
};
pub use field::CoupledField;
pub use mesh::{Mesh, MeshError, MeshKind};

pub use solver::{
    proximal_step, resolvent, run_flow, run_flow_with, FlowError, FlowOutcome, FlowParams, FlowTrace, InnerOutcome,
    Snapshot, SolveError, StepRecord,
};
