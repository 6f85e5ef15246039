use alloc::vec::Vec;

use super::EnergyError;
use crate::field::CoupledField;

/// Piecewise-constant-in-time forcing pair.
///
/// Value on `[t_k, t_{k+1})` is `values[k]`; before the first breakpoint the
/// forcing vanishes. An empty forcing is identically zero.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ForcingField {
    times: Vec<f64>,
    values: Vec<CoupledField>,
}

impl ForcingField {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(value: CoupledField) -> Self {
        Self { times: alloc::vec![f64::NEG_INFINITY], values: alloc::vec![value] }
    }

    pub fn piecewise(times: Vec<f64>, values: Vec<CoupledField>) -> Result<Self, EnergyError> {
        if times.len() != values.len() {
            return Err(EnergyError::Invalid("forcing needs one value per breakpoint"));
        }
        if times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(EnergyError::Invalid("forcing breakpoints must increase"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EnergyError::Invalid("forcing values must be finite"));
        }
        Ok(Self { times, values })
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| v.values().iter().all(|x| *x == 0.0))
    }

    /// Checks every value against the node count.
    pub fn check_len(&self, nodes: usize) -> Result<(), EnergyError> {
        for v in &self.values {
            if v.len() != nodes {
                return Err(EnergyError::Mesh(crate::mesh::MeshError::SizeMismatch {
                    expected: nodes,
                    got: v.len(),
                }));
            }
        }
        Ok(())
    }

    /// Forcing in effect at time `t`, or `None` where it vanishes.
    pub fn at(&self, t: f64) -> Option<&CoupledField> {
        let k = self.times.partition_point(|&s| s <= t);
        if k == 0 {
            None
        } else {
            Some(&self.values[k - 1])
        }
    }

    /// `self + s * other` on a shared breakpoint grid.
    pub fn perturbed(&self, s: f64, other: &ForcingField, nodes: usize) -> ForcingField {
        let mut times: Vec<f64> = self.times.iter().chain(&other.times).copied().collect();
        times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        times.dedup();
        let zero = CoupledField::zeros(nodes);
        let values = times
            .iter()
            .map(|&t| {
                let a = self.at(t).unwrap_or(&zero);
                let b = other.at(t).unwrap_or(&zero);
                a.add_scaled(s, b)
            })
            .collect();
        ForcingField { times, values }
    }
}
