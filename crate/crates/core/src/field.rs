use alloc::vec;
use alloc::vec::Vec;

/// Nodal values of the pair `[u, u_Gamma]`.
///
/// Boundary nodes are ordinary nodes: their value is both the bulk trace and the
/// boundary unknown, so the trace constraint holds by construction.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CoupledField(Vec<f64>);

impl CoupledField {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn constant(len: usize, c: f64) -> Self {
        Self(vec![c; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// `self - other`, entrywise.
    pub fn sub(&self, other: &CoupledField) -> CoupledField {
        debug_assert_eq!(self.len(), other.len());
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    /// `self + s * other`, entrywise.
    pub fn add_scaled(&self, s: f64, other: &CoupledField) -> CoupledField {
        debug_assert_eq!(self.len(), other.len());
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a + s * b).collect())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> CoupledField {
        Self(self.0.iter().map(|&v| f(v)).collect())
    }

    pub fn max_abs_diff(&self, other: &CoupledField) -> f64 {
        self.0.iter().zip(&other.0).fold(0.0f64, |m, (a, b)| m.max(libm::fabs(a - b)))
    }
}

impl From<Vec<f64>> for CoupledField {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl core::ops::Index<usize> for CoupledField {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl core::ops::IndexMut<usize> for CoupledField {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}
