use alloc::vec;
use alloc::vec::Vec;

use super::inner::{minimize, InnerOutcome, StepObjective};
use super::{FlowError, FlowParams, FlowTrace, SolveError, StepRecord};
use crate::energy::{phi_regularized, regularized_free_energy, EnergyParams, ForcingField};
use crate::field::CoupledField;
use crate::mesh::Mesh;

/// Minimizer of the step objective from `u_prev` with forcing `theta` (`None` = zero).
pub fn proximal_step(
    mesh: &Mesh,
    params: &EnergyParams,
    flow: &FlowParams,
    u_prev: &CoupledField,
    theta: Option<&CoupledField>,
) -> Result<(CoupledField, InnerOutcome), SolveError> {
    mesh.check(u_prev).map_err(crate::energy::EnergyError::from)?;
    if !u_prev.is_finite() {
        return Err(SolveError::NumericalFailure);
    }
    if let Some(t) = theta {
        mesh.check(t).map_err(crate::energy::EnergyError::from)?;
    }
    let n = u_prev.len();
    let pert = params.perturbation();
    let mut linear = vec![0.0; n];
    for i in 0..n {
        if flow.semi_implicit_g {
            linear[i] += pert.g(u_prev[i]);
        }
        if let Some(t) = theta {
            linear[i] -= t[i];
        }
    }
    let obj = StepObjective {
        mesh,
        params,
        anchor: u_prev.values(),
        inv_tau: 1.0 / flow.tau,
        linear,
        implicit_g: !flow.semi_implicit_g,
    };
    let tol = flow.resolved_inner_tol(n);
    let (v, out) = minimize(&obj, u_prev.values(), tol, flow.inner_max_iters)?;
    Ok((CoupledField::new(v), out))
}

/// `(A + I)^{-1} w`: minimizer of `|V - w|^2 / 2 + phi_reg(V)`.
pub fn resolvent(
    mesh: &Mesh,
    params: &EnergyParams,
    w: &CoupledField,
    tol: f64,
    max_iters: usize,
) -> Result<(CoupledField, InnerOutcome), SolveError> {
    mesh.check(w).map_err(crate::energy::EnergyError::from)?;
    if !w.is_finite() {
        return Err(SolveError::NumericalFailure);
    }
    let obj = StepObjective {
        mesh,
        params,
        anchor: w.values(),
        inv_tau: 1.0,
        linear: vec![0.0; w.len()],
        implicit_g: false,
    };
    let (v, out) = minimize(&obj, w.values(), tol, max_iters)?;
    Ok((CoupledField::new(v), out))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub time: f64,
    pub field: CoupledField,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowOutcome {
    pub final_state: CoupledField,
    pub trace: FlowTrace,
    pub snapshots: Vec<Snapshot>,
}

/// Runs the flow, calling `observe(step, time, state)` for the initial state and
/// after every step.
pub fn run_flow_with(
    mesh: &Mesh,
    params: &EnergyParams,
    flow: &FlowParams,
    u0: &CoupledField,
    forcing: &ForcingField,
    mut observe: impl FnMut(usize, f64, &CoupledField),
) -> Result<(CoupledField, FlowTrace), FlowError> {
    flow.validate(params.perturbation().lipschitz())?;
    mesh.check(u0).map_err(crate::energy::EnergyError::from)?;
    forcing.check_len(mesh.num_nodes())?;
    if let Some((node, &value)) = u0.values().iter().enumerate().find(|(_, v)| !params.bulk_potential().in_domain(**v)) {
        return Err(FlowError::InfeasibleInitial { node, value });
    }
    if !u0.is_finite() {
        return Err(FlowError::InfeasibleInitial { node: 0, value: f64::NAN });
    }

    let steps = flow.steps();
    let mut trace = FlowTrace { records: Vec::with_capacity(steps) };
    let mut u = u0.clone();
    observe(0, 0.0, &u);
    for n in 1..=steps {
        let t_prev = (n - 1) as f64 * flow.tau;
        let theta = forcing.at(t_prev);
        let (v, out) = proximal_step(mesh, params, flow, &u, theta)
            .map_err(|source| FlowError::StepFailed { step: n, source })?;
        let diff = v.sub(&u);
        let rate = mesh.h_norm(&diff).map_err(crate::energy::EnergyError::from)? / flow.tau;
        let time = n as f64 * flow.tau;
        trace.records.push(StepRecord {
            step: n,
            time,
            phi_reg: phi_regularized(mesh, params, &v)?,
            free_energy: regularized_free_energy(mesh, params, &v)?,
            rate_norm: rate,
            inner_iters: out.iterations,
            inner_residual: out.residual,
        });
        u = v;
        observe(n, time, &u);
    }
    Ok((u, trace))
}

/// Runs the flow and keeps every `snapshot_every`-th state plus the initial and final ones.
pub fn run_flow(
    mesh: &Mesh,
    params: &EnergyParams,
    flow: &FlowParams,
    u0: &CoupledField,
    forcing: &ForcingField,
    snapshot_every: Option<usize>,
) -> Result<FlowOutcome, FlowError> {
    let steps = flow.steps();
    let mut snapshots = Vec::new();
    let (final_state, trace) = run_flow_with(mesh, params, flow, u0, forcing, |step, time, u| {
        let keep = match snapshot_every {
            Some(k) if k > 0 => step % k == 0 || step == steps,
            _ => step == 0 || step == steps,
        };
        if keep {
            snapshots.push(Snapshot { step, time, field: u.clone() });
        }
    })?;
    Ok(FlowOutcome { final_state, trace, snapshots })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex::Potential;
    use crate::energy::{euler_lagrange_residual, PerturbationKind};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(eps: f64, delta: f64, lambda: f64) -> EnergyParams {
        let b = Potential::indicator(-1.0, 1.0).unwrap();
        EnergyParams::new(1.0, eps, delta, lambda, b.clone(), b).unwrap()
    }

    fn random_feasible(n: usize, seed: u64) -> CoupledField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        CoupledField::new((0..n).map(|_| rng.random_range(-0.95..0.95)).collect())
    }

    fn step_objective(mesh: &Mesh, p: &EnergyParams, tau: f64, prev: &CoupledField, v: &CoupledField) -> f64 {
        let d = v.sub(prev);
        let lin: f64 = (0..v.len()).map(|i| mesh.mass()[i] * p.perturbation().g(prev[i]) * v[i]).sum();
        mesh.h_norm(&d).unwrap().powi(2) / (2.0 * tau) + phi_regularized(mesh, p, v).unwrap() + lin
    }

    #[test]
    fn constant_state_is_stationary() {
        let p = params(0.3, 0.1, 0.1);
        for mesh in [Mesh::interval(1.0, 16).unwrap(), Mesh::disc(1.0, 4, 12).unwrap()] {
            let u = CoupledField::constant(mesh.num_nodes(), 0.4);
            let (v, out) = proximal_step(&mesh, &p, &FlowParams::new(0.01, 1.0), &u, None).unwrap();
            assert!(out.iterations <= 1);
            assert!(v.max_abs_diff(&u) < 1e-12);
        }
    }

    #[test]
    fn step_satisfies_energy_inequality_and_certificate() {
        let p = params(0.5, 0.2, 0.25).with_perturbation(PerturbationKind::NegQuadratic).unwrap();
        let tau = 0.1;
        let flow = FlowParams::new(tau, 1.0);
        for mesh in [Mesh::interval(2.0, 12).unwrap(), Mesh::disc(1.0, 5, 16).unwrap()] {
            for seed in 0..4 {
                let u = random_feasible(mesh.num_nodes(), seed);
                let (v, out) = proximal_step(&mesh, &p, &flow, &u, None).unwrap();
                assert!(out.residual <= flow.resolved_inner_tol(mesh.num_nodes()));
                let jv = step_objective(&mesh, &p, tau, &u, &v);
                let ju = step_objective(&mesh, &p, tau, &u, &u);
                assert!(jv <= ju + 1e-12 * (1.0 + ju.abs()));
                // (V - U)/tau + grad phi(V) = -g(U)
                let star = v.sub(&u).map(|x| -x / tau).sub(&p.perturbation_field(&u));
                let r = euler_lagrange_residual(&mesh, &p, &v, &star).unwrap();
                assert!(r <= 2.0 * flow.resolved_inner_tol(mesh.num_nodes()), "residual {r}");
            }
        }
    }

    #[test]
    fn resolvent_of_zero_and_optimality() {
        let p = params(0.4, 0.1, 0.1);
        let mesh = Mesh::disc(1.0, 4, 12).unwrap();
        let (v, _) = resolvent(&mesh, &p, &CoupledField::zeros(mesh.num_nodes()), 1e-10, 200).unwrap();
        assert!(v.values().iter().all(|x| x.abs() < 1e-14));
        let w = random_feasible(mesh.num_nodes(), 9).map(|x| 1.5 * x);
        let (v, out) = resolvent(&mesh, &p, &w, 1e-10, 200).unwrap();
        assert!(out.residual <= 1e-10);
        let r = euler_lagrange_residual(&mesh, &p, &v, &w.sub(&v)).unwrap();
        assert!(r <= 1e-10);
    }

    #[test]
    fn resolvent_is_nonexpansive() {
        let p = params(0.2, 0.05, 0.1);
        let mesh = Mesh::interval(1.0, 20).unwrap();
        for seed in 0..10 {
            let w1 = random_feasible(mesh.num_nodes(), 2 * seed).map(|x| 2.0 * x);
            let w2 = random_feasible(mesh.num_nodes(), 2 * seed + 1).map(|x| 2.0 * x);
            let (v1, _) = resolvent(&mesh, &p, &w1, 1e-11, 200).unwrap();
            let (v2, _) = resolvent(&mesh, &p, &w2, 1e-11, 200).unwrap();
            let dv = mesh.h_norm(&v1.sub(&v2)).unwrap();
            let dw = mesh.h_norm(&w1.sub(&w2)).unwrap();
            assert!(dv <= dw * (1.0 + 1e-9));
        }
    }

    #[test]
    fn pure_convex_flow_dissipates() {
        let p = params(0.3, 0.1, 0.05);
        for mesh in [Mesh::interval(1.0, 24).unwrap(), Mesh::disc(1.0, 4, 12).unwrap()] {
            let u0 = random_feasible(mesh.num_nodes(), 3);
            let flow = FlowParams::new(0.02, 0.6);
            let out = run_flow(&mesh, &p, &flow, &u0, &ForcingField::zero(), Some(10)).unwrap();
            let mut prev = phi_regularized(&mesh, &p, &u0).unwrap();
            assert_eq!(out.trace.records.len(), 30);
            for r in &out.trace.records {
                assert!(r.phi_reg <= prev + 1e-10 * (1.0 + prev.abs()));
                prev = r.phi_reg;
            }
            let steps: Vec<usize> = out.snapshots.iter().map(|s| s.step).collect();
            assert_eq!(steps, [0, 10, 20, 30]);
        }
    }

    #[test]
    fn semi_implicit_free_energy_dissipates_and_stays_near_domain() {
        let lambda = 0.01;
        let p = params(0.2, 0.1, lambda).with_perturbation(PerturbationKind::NegQuadratic).unwrap();
        let mesh = Mesh::interval(1.0, 32).unwrap();
        let u0 = mesh.sample(|x, _| if x < 0.5 { 0.9 } else { -0.9 });
        let flow = FlowParams::new(0.25, 5.0);
        let b = p.bulk_potential();
        let mut worst_slope: f64 = 0.0;
        let mut prev = regularized_free_energy(&mesh, &p, &u0).unwrap();
        let (_, trace) = run_flow_with(&mesh, &p, &flow, &u0, &ForcingField::zero(), |_, _, u| {
            for &x in u.values() {
                worst_slope = worst_slope.max(b.yosida_slope(lambda, x).unwrap().abs());
            }
        })
        .unwrap();
        for r in &trace.records {
            assert!(r.free_energy <= prev + 1e-10 * (1.0 + prev.abs()));
            prev = r.free_energy;
        }
        // overshoot past the indicator domain is lambda * |slope| by construction of the Yosida map
        assert!(worst_slope * lambda <= 1.0, "overshoot {}", worst_slope * lambda);
    }

    #[test]
    fn rejects_bad_configuration() {
        let p = params(0.0, 0.1, 0.1).with_perturbation(PerturbationKind::NegQuadratic).unwrap();
        let mesh = Mesh::interval(1.0, 4).unwrap();
        let u0 = CoupledField::zeros(5);
        let err = run_flow(&mesh, &p, &FlowParams::new(0.6, 1.0), &u0, &ForcingField::zero(), None).unwrap_err();
        assert!(matches!(err, FlowError::Config(_)));
        let bad = CoupledField::constant(5, 1.5);
        let err = run_flow(&mesh, &p, &FlowParams::new(0.1, 1.0), &bad, &ForcingField::zero(), None).unwrap_err();
        assert_eq!(err, FlowError::InfeasibleInitial { node: 0, value: 1.5 });
    }

    #[test]
    fn step_failures_carry_step_index() {
        let p = params(0.0, 0.01, 0.01);
        let mesh = Mesh::interval(1.0, 16).unwrap();
        let u0 = random_feasible(17, 1);
        let mut flow = FlowParams::new(0.5, 1.0).with_inner_tol(1e-14);
        flow.inner_max_iters = 1;
        match run_flow(&mesh, &p, &flow, &u0, &ForcingField::zero(), None) {
            Err(FlowError::StepFailed { step: 1, source: SolveError::NonConvergence { iterations: 1, residual } }) => {
                assert!(residual > 0.0)
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn steps_is_ceiling() {
        assert_eq!(FlowParams::new(0.1, 1.0).steps(), 10);
        assert_eq!(FlowParams::new(0.3, 1.0).steps(), 4);
        assert_eq!(FlowParams::new(1.0 / 128.0, 0.5).steps(), 64);
        assert_eq!(FlowParams::max_stable_tau(1.0), 0.5);
    }
}
