//! Minimization of the strongly convex step objective
//!
//! `J(V) = |V - A|^2 / (2 tau) + phi(V) + (c, V) [+ int G_ext(V)]`
//!
//! with all norms and pairings in the discrete product space. Damped Newton with
//! a Jacobi-preconditioned conjugate-gradient inner solve; after three rejected
//! Newton directions the solver continues with preconditioned gradient descent.

use alloc::vec;
use alloc::vec::Vec;

use super::SolveError;
use crate::energy::{add_partials, regularized_terms, EnergyParams, Linearization};
use crate::field::CoupledField;
use crate::mesh::Mesh;

const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 40;
const MAX_NEWTON_REJECTIONS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerOutcome {
    pub iterations: usize,
    /// Product-space norm of the objective gradient at the returned point.
    pub residual: f64,
    pub newton_rejections: usize,
}

pub(crate) struct StepObjective<'a> {
    pub mesh: &'a Mesh,
    pub params: &'a EnergyParams,
    pub anchor: &'a [f64],
    pub inv_tau: f64,
    /// Linear term in product-space form: contributes `sum m_i c_i V_i`.
    pub linear: Vec<f64>,
    /// Include `int G_ext(V)` implicitly.
    pub implicit_g: bool,
}

impl StepObjective<'_> {
    fn value(&self, v: &[f64]) -> Result<f64, SolveError> {
        let field = CoupledField::new(v.to_vec());
        let terms = regularized_terms(self.mesh, self.params, &field).map_err(|_| SolveError::NumericalFailure)?;
        let mut j = terms.convex();
        if self.implicit_g {
            j += terms.perturbation;
        }
        let m = self.mesh.mass();
        for i in 0..v.len() {
            let d = v[i] - self.anchor[i];
            j += m[i] * (0.5 * self.inv_tau * d * d + self.linear[i] * v[i]);
        }
        if j.is_nan() {
            return Err(SolveError::NumericalFailure);
        }
        Ok(j)
    }

    /// Nodal partial derivatives of `J`.
    fn partials(&self, v: &[f64], out: &mut [f64]) {
        let m = self.mesh.mass();
        let pert = self.params.perturbation();
        for i in 0..v.len() {
            out[i] = m[i] * (self.inv_tau * (v[i] - self.anchor[i]) + self.linear[i]);
            if self.implicit_g {
                out[i] += m[i] * pert.g(v[i]);
            }
        }
        add_partials(self.mesh, self.params, v, out);
    }

    fn h_norm_of_partials(&self, g: &[f64]) -> f64 {
        libm::sqrt(g.iter().zip(self.mesh.mass()).map(|(x, m)| x * x / m).sum())
    }
}

pub(crate) fn minimize(
    obj: &StepObjective<'_>,
    start: &[f64],
    tol: f64,
    max_iters: usize,
) -> Result<(Vec<f64>, InnerOutcome), SolveError> {
    let n = start.len();
    let mass = obj.mesh.mass();
    let mut v = start.to_vec();
    let mut g = vec![0.0; n];
    obj.partials(&v, &mut g);
    let mut res = obj.h_norm_of_partials(&g);
    let mut j = obj.value(&v)?;
    let mut rejections = 0;
    let mut iters = 0;
    let mut d = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut g_trial = vec![0.0; n];

    while res > tol {
        if iters == max_iters {
            return Err(SolveError::NonConvergence { iterations: iters, residual: res });
        }
        if !res.is_finite() {
            return Err(SolveError::NumericalFailure);
        }
        iters += 1;

        let field = CoupledField::new(v.clone());
        let lin = Linearization::new(obj.mesh, obj.params, &field).map_err(|_| SolveError::NumericalFailure)?;
        let pert = obj.params.perturbation();
        let shift: Vec<f64> = (0..n)
            .map(|i| {
                let mut s = mass[i] * obj.inv_tau;
                if obj.implicit_g {
                    s += mass[i] * pert.g_prime(v[i]);
                }
                s
            })
            .collect();
        let mut diag = lin.diagonal();
        for (dd, s) in diag.iter_mut().zip(&shift) {
            *dd += s;
        }

        let newton = rejections < MAX_NEWTON_REJECTIONS;
        if newton {
            let apply = |x: &[f64], y: &mut [f64]| {
                lin.apply(x, y);
                for i in 0..n {
                    y[i] += shift[i] * x[i];
                }
            };
            let rhs: Vec<f64> = g.iter().map(|x| -x).collect();
            let forcing = libm::sqrt(res).clamp(1e-12, 0.5);
            pcg(&apply, &diag, &rhs, &mut d, forcing, 20 * n + 100);
        } else {
            for i in 0..n {
                d[i] = -g[i] / diag[i];
            }
        }

        let slope: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
        let mut accepted = false;
        if slope < 0.0 && slope.is_finite() {
            let mut alpha = 1.0;
            for _ in 0..MAX_BACKTRACKS {
                for i in 0..n {
                    trial[i] = v[i] + alpha * d[i];
                }
                let jt = obj.value(&trial)?;
                let sufficient = jt <= j + ARMIJO * alpha * slope;
                // below roundoff in J, fall back to gradient decrease
                let flat = jt <= j + 1e-14 * (1.0 + libm::fabs(j));
                if sufficient || flat {
                    obj.partials(&trial, &mut g_trial);
                    let rt = obj.h_norm_of_partials(&g_trial);
                    if sufficient || rt < res {
                        core::mem::swap(&mut v, &mut trial);
                        core::mem::swap(&mut g, &mut g_trial);
                        res = rt;
                        j = jt;
                        accepted = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
        }
        if !accepted {
            if newton {
                rejections += 1;
                continue;
            }
            return Err(SolveError::NonConvergence { iterations: iters, residual: res });
        }
    }
    Ok((v, InnerOutcome { iterations: iters, residual: res, newton_rejections: rejections }))
}

/// Jacobi-preconditioned conjugate gradients for the SPD system `A x = b`, from `x = 0`.
fn pcg(apply: &dyn Fn(&[f64], &mut [f64]), diag: &[f64], b: &[f64], x: &mut [f64], rel_tol: f64, max_iters: usize) {
    let n = b.len();
    x.iter_mut().for_each(|v| *v = 0.0);
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(a, d)| a / d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let b_norm = libm::sqrt(b.iter().map(|v| v * v).sum());
    if b_norm == 0.0 {
        return;
    }
    for _ in 0..max_iters {
        apply(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 || !pap.is_finite() {
            break;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let r_norm = libm::sqrt(r.iter().map(|v| v * v).sum());
        if r_norm <= rel_tol * b_norm {
            break;
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pcg_solves_small_spd_system() {
        // tridiagonal [4 -1; -1 4 -1; ...]
        let n = 12;
        let apply = |x: &[f64], y: &mut [f64]| {
            for i in 0..n {
                y[i] = 4.0 * x[i];
                if i > 0 {
                    y[i] -= x[i - 1];
                }
                if i + 1 < n {
                    y[i] -= x[i + 1];
                }
            }
        };
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut x = vec![0.0; n];
        pcg(&apply, &vec![4.0; n], &b, &mut x, 1e-14, 200);
        let mut ax = vec![0.0; n];
        apply(&x, &mut ax);
        for i in 0..n {
            assert!((ax[i] - b[i]).abs() < 1e-12);
        }
    }
}
