//! Discrete convex energies, the free energy, and the product-space gradient.
//!
//! All gradients returned here are taken with respect to the discrete inner
//! product `Mesh::h_inner`: nodal partial derivatives divided by the lumped mass,
//! so that `h_inner(grad, v)` is the directional derivative along `v`.

mod forcing;
mod perturbation;

use alloc::vec::Vec;

use thiserror::Error;

pub use forcing::ForcingField;
pub use perturbation::{PerturbationKind, SmoothPerturbation};

use crate::convex::{KernelError, Potential};
use crate::diffusion::{BadDelta, RegularizedNorm};
use crate::field::CoupledField;
use crate::mesh::{Mesh, MeshError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnergyError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Delta(#[from] BadDelta),
    #[error("invalid energy parameters: {0}")]
    Invalid(&'static str),
    #[error("field contains non-finite values")]
    NonFinite,
}

/// Coefficients and potentials of the regularized convex energy.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyParams {
    kappa: f64,
    eps: f64,
    norm: RegularizedNorm,
    lambda: f64,
    bulk: Potential,
    bdry: Potential,
    perturbation: SmoothPerturbation,
}

impl EnergyParams {
    /// Parameters without a smooth perturbation. The two potentials must share
    /// their effective domain.
    pub fn new(
        kappa: f64,
        eps: f64,
        delta: f64,
        lambda: f64,
        bulk: Potential,
        bdry: Potential,
    ) -> Result<Self, EnergyError> {
        if !(kappa.is_finite() && kappa > 0.0) {
            return Err(EnergyError::Invalid("kappa must be positive"));
        }
        if !(eps.is_finite() && eps >= 0.0) {
            return Err(EnergyError::Invalid("eps must be nonnegative"));
        }
        if !(lambda > 0.0 && lambda <= 1.0) {
            return Err(EnergyError::Invalid("lambda must lie in (0, 1]"));
        }
        let norm = RegularizedNorm::new(delta)?;
        let (lo, hi) = bulk.domain();
        let (lo_g, hi_g) = bdry.domain();
        if lo != lo_g || hi != hi_g {
            return Err(KernelError::DomainMismatch(lo, hi, lo_g, hi_g).into());
        }
        let perturbation = SmoothPerturbation::new(PerturbationKind::None, (lo, hi))?;
        Ok(Self { kappa, eps, norm, lambda, bulk, bdry, perturbation })
    }

    pub fn with_perturbation(mut self, kind: PerturbationKind) -> Result<Self, EnergyError> {
        self.perturbation = SmoothPerturbation::new(kind, self.bulk.domain())?;
        Ok(self)
    }

    pub fn with_eps(mut self, eps: f64) -> Result<Self, EnergyError> {
        if !(eps.is_finite() && eps >= 0.0) {
            return Err(EnergyError::Invalid("eps must be nonnegative"));
        }
        self.eps = eps;
        Ok(self)
    }

    pub fn with_kappa(mut self, kappa: f64) -> Result<Self, EnergyError> {
        if !(kappa.is_finite() && kappa > 0.0) {
            return Err(EnergyError::Invalid("kappa must be positive"));
        }
        self.kappa = kappa;
        Ok(self)
    }

    pub fn with_regularization(mut self, delta: f64, lambda: f64) -> Result<Self, EnergyError> {
        if !(lambda > 0.0 && lambda <= 1.0) {
            return Err(EnergyError::Invalid("lambda must lie in (0, 1]"));
        }
        self.norm = RegularizedNorm::new(delta)?;
        self.lambda = lambda;
        Ok(self)
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }
    pub fn eps(&self) -> f64 {
        self.eps
    }
    pub fn delta(&self) -> f64 {
        self.norm.delta()
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn norm(&self) -> &RegularizedNorm {
        &self.norm
    }
    pub fn bulk_potential(&self) -> &Potential {
        &self.bulk
    }
    pub fn bdry_potential(&self) -> &Potential {
        &self.bdry
    }
    pub fn perturbation(&self) -> &SmoothPerturbation {
        &self.perturbation
    }

    /// Whether every nodal value lies in the closed potential domain.
    pub fn is_feasible(&self, u: &CoupledField) -> bool {
        u.values().iter().all(|&v| self.bulk.in_domain(v))
    }

    /// `G(U) = [g(u), g_G(u_G)]` as a nodal field.
    pub fn perturbation_field(&self, u: &CoupledField) -> CoupledField {
        u.map(|v| self.perturbation.g(v))
    }
}

/// Per-term breakdown of an energy evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyTerms {
    pub tv: f64,
    pub quad: f64,
    pub bulk_potential: f64,
    pub surface: f64,
    pub bdry_potential: f64,
    pub perturbation: f64,
}

impl EnergyTerms {
    /// The convex part (everything except the perturbation).
    pub fn convex(&self) -> f64 {
        self.tv + self.quad + self.bulk_potential + self.surface + self.bdry_potential
    }

    pub fn total(&self) -> f64 {
        self.convex() + self.perturbation
    }
}

fn check(mesh: &Mesh, u: &CoupledField) -> Result<(), EnergyError> {
    mesh.check(u)?;
    if !u.is_finite() {
        return Err(EnergyError::NonFinite);
    }
    Ok(())
}

fn common_terms(mesh: &Mesh, p: &EnergyParams, u: &[f64], terms: &mut EnergyTerms, exact: bool) {
    for c in 0..mesh.num_cells() {
        let g = mesh.cell_gradient(c, u);
        let w = mesh.cell_weights()[c];
        let n2 = g[0] * g[0] + g[1] * g[1];
        terms.tv += w * if exact { libm::sqrt(n2) } else { p.norm.eval(&g) };
        terms.quad += w * 0.5 * p.kappa * p.kappa * n2;
    }
    if p.eps > 0.0 && mesh.has_surface_calculus() {
        let arc = mesh.arc_spacing();
        let e2 = p.eps * p.eps;
        terms.surface = mesh.segment_gradients(u).map(|s| 0.5 * e2 * s * s * arc).sum();
    }
    let pert = &p.perturbation;
    if !pert.is_none() {
        let bulk: f64 = u.iter().zip(mesh.bulk_weights()).map(|(&v, w)| pert.big_g(v) * w).sum();
        let bdry: f64 = mesh
            .boundary_nodes()
            .iter()
            .zip(mesh.boundary_weights())
            .map(|(&n, w)| pert.big_g(u[n]) * w)
            .sum();
        terms.perturbation = bulk + bdry;
    }
}

/// Breakdown of the regularized energy; `perturbation` holds `int G_ext(u)` over both parts.
pub fn regularized_terms(mesh: &Mesh, p: &EnergyParams, u: &CoupledField) -> Result<EnergyTerms, EnergyError> {
    check(mesh, u)?;
    let v = u.values();
    let mut t = EnergyTerms::default();
    common_terms(mesh, p, v, &mut t, false);
    t.bulk_potential = v
        .iter()
        .zip(mesh.bulk_weights())
        .map(|(&x, w)| p.bulk.my_eval_unchecked(p.lambda, x) * w)
        .sum();
    t.bdry_potential = mesh
        .boundary_nodes()
        .iter()
        .zip(mesh.boundary_weights())
        .map(|(&n, w)| p.bdry.my_eval_unchecked(p.lambda, v[n]) * w)
        .sum();
    Ok(t)
}

/// Breakdown of the exact energy; potential terms are `+inf` off the domain.
pub fn exact_terms(mesh: &Mesh, p: &EnergyParams, u: &CoupledField) -> Result<EnergyTerms, EnergyError> {
    check(mesh, u)?;
    let v = u.values();
    let mut t = EnergyTerms::default();
    common_terms(mesh, p, v, &mut t, true);
    t.bulk_potential = v.iter().zip(mesh.bulk_weights()).map(|(&x, w)| exact_term(&p.bulk, x, *w)).sum();
    t.bdry_potential = mesh
        .boundary_nodes()
        .iter()
        .zip(mesh.boundary_weights())
        .map(|(&n, w)| exact_term(&p.bdry, v[n], *w))
        .sum();
    Ok(t)
}

fn exact_term(b: &Potential, x: f64, w: f64) -> f64 {
    b.value(x) * w
}

/// Regularized convex energy; always finite.
pub fn phi_regularized(mesh: &Mesh, p: &EnergyParams, u: &CoupledField) -> Result<f64, EnergyError> {
    Ok(regularized_terms(mesh, p, u)?.convex())
}

/// Exact convex energy with total variation and the unrelaxed potentials.
pub fn phi_exact(mesh: &Mesh, p: &EnergyParams, u: &CoupledField) -> Result<f64, EnergyError> {
    Ok(exact_terms(mesh, p, u)?.convex())
}

/// Exact convex energy plus the smooth perturbation.
pub fn free_energy(mesh: &Mesh, p: &EnergyParams, u: &CoupledField) -> Result<f64, EnergyError> {
    Ok(exact_terms(mesh, p, u)?.total())
}

/// Regularized convex energy plus the extended perturbation; the quantity
/// dissipated by the semi-implicit flow.
pub fn regularized_free_energy(mesh: &Mesh, p: &EnergyParams, u: &CoupledField) -> Result<f64, EnergyError> {
    Ok(regularized_terms(mesh, p, u)?.total())
}

/// Nodal partial derivatives of `phi_regularized`, accumulated into `out`.
pub(crate) fn add_partials(mesh: &Mesh, p: &EnergyParams, u: &[f64], out: &mut [f64]) {
    let k2 = p.kappa * p.kappa;
    for c in 0..mesh.num_cells() {
        let g = mesh.cell_gradient(c, u);
        let w = mesh.cell_weights()[c];
        let gf = p.norm.grad(&g);
        let flux = [w * (gf[0] + k2 * g[0]), w * (gf[1] + k2 * g[1])];
        let (nodes, coef) = mesh.cell(c);
        for (&n, a) in nodes.iter().zip(coef) {
            out[n] += flux[0] * a[0] + flux[1] * a[1];
        }
    }
    for (n, (&x, w)) in u.iter().zip(mesh.bulk_weights()).enumerate() {
        out[n] += p.bulk.yosida_slope_unchecked(p.lambda, x) * w;
    }
    for (&n, w) in mesh.boundary_nodes().iter().zip(mesh.boundary_weights()) {
        out[n] += p.bdry.yosida_slope_unchecked(p.lambda, u[n]) * w;
    }
    if p.eps > 0.0 && mesh.has_surface_calculus() {
        let b = mesh.boundary_nodes();
        let m = b.len();
        let coef = p.eps * p.eps / mesh.arc_spacing();
        for j in 0..m {
            let (a, c) = (b[j], b[(j + 1) % m]);
            let d = coef * (u[c] - u[a]);
            out[a] -= d;
            out[c] += d;
        }
    }
}

/// Product-space gradient of `phi_regularized`.
pub fn grad_phi_regularized(mesh: &Mesh, p: &EnergyParams, u: &CoupledField) -> Result<CoupledField, EnergyError> {
    check(mesh, u)?;
    let mut out = alloc::vec![0.0; u.len()];
    add_partials(mesh, p, u.values(), &mut out);
    for (o, m) in out.iter_mut().zip(mesh.mass()) {
        *o /= m;
    }
    Ok(CoupledField::new(out))
}

/// `|u_star - grad phi(u)|` in the product norm: the distance of `[u, u_star]`
/// from the graph of the regularized subdifferential.
pub fn euler_lagrange_residual(
    mesh: &Mesh,
    p: &EnergyParams,
    u: &CoupledField,
    u_star: &CoupledField,
) -> Result<f64, EnergyError> {
    check(mesh, u_star)?;
    let g = grad_phi_regularized(mesh, p, u)?;
    let d = u_star.sub(&g);
    Ok(mesh.h_norm(&d)?)
}

/// Second-order model of `phi_regularized` frozen at a state, for matrix-free
/// Newton solves. Products are in nodal (unweighted) coordinates.
#[derive(Debug, Clone)]
pub struct Linearization<'m> {
    mesh: &'m Mesh,
    /// Per-cell symmetric 2x2 blocks `w (Hess f_delta + kappa^2 I)`, stored `[xx, xy, yy]`.
    cell_blocks: Vec<[f64; 3]>,
    /// Per-node curvature of the potential envelopes, weighted.
    node_diag: Vec<f64>,
    /// `eps^2 / arc`, zero when the surface term is absent.
    surface: f64,
}

impl<'m> Linearization<'m> {
    pub fn new(mesh: &'m Mesh, p: &EnergyParams, u: &CoupledField) -> Result<Self, EnergyError> {
        check(mesh, u)?;
        let v = u.values();
        let k2 = p.kappa * p.kappa;
        let cell_blocks = (0..mesh.num_cells())
            .map(|c| {
                let g = mesh.cell_gradient(c, v);
                let w = mesh.cell_weights()[c];
                let hx = p.norm.hessian_apply(&g, &[1.0, 0.0]);
                let hy = p.norm.hessian_apply(&g, &[0.0, 1.0]);
                [w * (hx[0] + k2), w * hx[1], w * (hy[1] + k2)]
            })
            .collect();
        let mut node_diag: Vec<f64> = v
            .iter()
            .zip(mesh.bulk_weights())
            .map(|(&x, w)| p.bulk.yosida_slope_derivative_unchecked(p.lambda, x) * w)
            .collect();
        for (&n, w) in mesh.boundary_nodes().iter().zip(mesh.boundary_weights()) {
            node_diag[n] += p.bdry.yosida_slope_derivative_unchecked(p.lambda, v[n]) * w;
        }
        let surface = if p.eps > 0.0 && mesh.has_surface_calculus() {
            p.eps * p.eps / mesh.arc_spacing()
        } else {
            0.0
        };
        Ok(Self { mesh, cell_blocks, node_diag, surface })
    }

    /// `out = H v`.
    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        let mesh = self.mesh;
        for (o, (d, x)) in out.iter_mut().zip(self.node_diag.iter().zip(v)) {
            *o = d * x;
        }
        for (c, h) in self.cell_blocks.iter().enumerate() {
            let g = mesh.cell_gradient(c, v);
            let f = [h[0] * g[0] + h[1] * g[1], h[1] * g[0] + h[2] * g[1]];
            let (nodes, coef) = mesh.cell(c);
            for (&n, a) in nodes.iter().zip(coef) {
                out[n] += f[0] * a[0] + f[1] * a[1];
            }
        }
        if self.surface > 0.0 {
            let b = mesh.boundary_nodes();
            let m = b.len();
            for j in 0..m {
                let (a, c) = (b[j], b[(j + 1) % m]);
                let d = self.surface * (v[c] - v[a]);
                out[a] -= d;
                out[c] += d;
            }
        }
    }

    /// Diagonal of `H`, for Jacobi preconditioning.
    pub fn diagonal(&self) -> Vec<f64> {
        let mesh = self.mesh;
        let mut d = self.node_diag.clone();
        for (c, h) in self.cell_blocks.iter().enumerate() {
            let (nodes, coef) = mesh.cell(c);
            for (&n, a) in nodes.iter().zip(coef) {
                d[n] += h[0] * a[0] * a[0] + 2.0 * h[1] * a[0] * a[1] + h[2] * a[1] * a[1];
            }
        }
        if self.surface > 0.0 {
            for &n in mesh.boundary_nodes() {
                d[n] += 2.0 * self.surface;
            }
        }
        d
    }
}
