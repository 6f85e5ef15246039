//! Structured discretizations of the domain and its boundary.
//!
//! Two layouts are supported. `Interval1D` is `(0, L)` with `n` uniform cells;
//! its boundary is the two end points, each carrying unit counting measure.
//! `Disc2D` is a polar tensor grid on the disc of radius `R`: `nr` rings at
//! `r_i = (i + 1/2) dr` with the last ring on the circle, and `ntheta` nodes
//! per ring. Each node owns an annular sector of the disc, so the nodal weights
//! integrate constants exactly. Gradients live on cells: two linear triangles per
//! ring-to-ring quadrilateral, plus one central polygon cell whose gradient is the
//! least-squares affine fit over the innermost ring.

use alloc::vec::Vec;
use core::f64::consts::PI;

use thiserror::Error;

use crate::field::CoupledField;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeshError {
    #[error("field has {got} entries, mesh has {expected} nodes")]
    SizeMismatch { expected: usize, got: usize },
    #[error("operation not supported on this mesh: {0}")]
    Unsupported(&'static str),
    #[error("invalid mesh parameters: {0}")]
    Invalid(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeshKind {
    Interval1D { length: f64, n: usize },
    Disc2D { radius: f64, nr: usize, ntheta: usize },
}

#[derive(Debug, Clone)]
pub struct Mesh {
    kind: MeshKind,
    coords: Vec<[f64; 2]>,
    bulk_weights: Vec<f64>,
    /// Boundary slot -> global node index.
    boundary_nodes: Vec<usize>,
    boundary_weights: Vec<f64>,
    /// `bulk_weights + boundary_weights` scattered to nodes: the lumped mass of the product space.
    mass: Vec<f64>,
    is_boundary: Vec<bool>,
    cell_ptr: Vec<usize>,
    cell_nodes: Vec<usize>,
    cell_coef: Vec<[f64; 2]>,
    cell_weights: Vec<f64>,
    /// Arc length between consecutive boundary nodes (`Disc2D` only).
    arc: f64,
}

impl Mesh {
    pub fn interval(length: f64, n: usize) -> Result<Self, MeshError> {
        if !(length.is_finite() && length > 0.0) {
            return Err(MeshError::Invalid("interval length must be positive"));
        }
        if n == 0 {
            return Err(MeshError::Invalid("interval needs at least one cell"));
        }
        let h = length / n as f64;
        let coords: Vec<[f64; 2]> = (0..=n).map(|i| [i as f64 * h, 0.0]).collect();
        let mut bulk_weights = alloc::vec![h; n + 1];
        bulk_weights[0] = 0.5 * h;
        bulk_weights[n] = 0.5 * h;
        let mut cell_ptr = Vec::with_capacity(n + 1);
        let mut cell_nodes = Vec::with_capacity(2 * n);
        let mut cell_coef = Vec::with_capacity(2 * n);
        cell_ptr.push(0);
        for c in 0..n {
            cell_nodes.extend_from_slice(&[c, c + 1]);
            cell_coef.extend_from_slice(&[[-1.0 / h, 0.0], [1.0 / h, 0.0]]);
            cell_ptr.push(cell_nodes.len());
        }
        let cell_weights = alloc::vec![h; n];
        Ok(Self::assemble(
            MeshKind::Interval1D { length, n },
            coords,
            bulk_weights,
            alloc::vec![0, n],
            alloc::vec![1.0, 1.0],
            cell_ptr,
            cell_nodes,
            cell_coef,
            cell_weights,
            0.0,
        ))
    }

    pub fn disc(radius: f64, nr: usize, ntheta: usize) -> Result<Self, MeshError> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(MeshError::Invalid("disc radius must be positive"));
        }
        if nr == 0 {
            return Err(MeshError::Invalid("disc needs at least one ring"));
        }
        if ntheta < 3 {
            return Err(MeshError::Invalid("disc needs at least three nodes per ring"));
        }
        let dr = radius / (nr as f64 - 0.5);
        let dth = 2.0 * PI / ntheta as f64;
        let ring = |i: usize| if i + 1 == nr { radius } else { (i as f64 + 0.5) * dr };
        let node = |i: usize, j: usize| i * ntheta + (j % ntheta);

        let mut coords = Vec::with_capacity(nr * ntheta);
        let mut bulk_weights = Vec::with_capacity(nr * ntheta);
        for i in 0..nr {
            let r = ring(i);
            let r_in = (r - 0.5 * dr).max(0.0);
            let r_out = (r + 0.5 * dr).min(radius);
            let w = 0.5 * dth * (r_out * r_out - r_in * r_in);
            for j in 0..ntheta {
                let th = j as f64 * dth;
                coords.push([r * libm::cos(th), r * libm::sin(th)]);
                bulk_weights.push(w);
            }
        }

        let mut cell_ptr = alloc::vec![0];
        let mut cell_nodes = Vec::new();
        let mut cell_coef = Vec::new();
        let mut cell_weights = Vec::new();

        // central polygon: least-squares affine fit over ring 0
        let r0 = ring(0);
        let scale = 2.0 / (ntheta as f64 * r0 * r0);
        for j in 0..ntheta {
            let p = coords[node(0, j)];
            cell_nodes.push(node(0, j));
            cell_coef.push([scale * p[0], scale * p[1]]);
        }
        cell_ptr.push(cell_nodes.len());
        cell_weights.push(0.5 * ntheta as f64 * r0 * r0 * libm::sin(dth));

        let mut push_triangle = |a: usize, b: usize, c: usize, coords: &[[f64; 2]]| {
            let (pa, pb, pc) = (coords[a], coords[b], coords[c]);
            let two_area = (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]);
            // gradient of the hat function at k from the opposite edge (q0, q1)
            for (k, q0, q1) in [(a, pb, pc), (b, pc, pa), (c, pa, pb)] {
                cell_nodes.push(k);
                cell_coef.push([(q0[1] - q1[1]) / two_area, (q1[0] - q0[0]) / two_area]);
            }
            cell_ptr.push(cell_nodes.len());
            cell_weights.push(0.5 * libm::fabs(two_area));
        };
        for i in 0..nr.saturating_sub(1) {
            for j in 0..ntheta {
                let (a, b) = (node(i, j), node(i + 1, j));
                let (c, d) = (node(i + 1, j + 1), node(i, j + 1));
                push_triangle(a, b, c, &coords);
                push_triangle(a, c, d, &coords);
            }
        }

        let boundary_nodes: Vec<usize> = (0..ntheta).map(|j| node(nr - 1, j)).collect();
        let arc = radius * dth;
        Ok(Self::assemble(
            MeshKind::Disc2D { radius, nr, ntheta },
            coords,
            bulk_weights,
            boundary_nodes,
            alloc::vec![arc; ntheta],
            cell_ptr,
            cell_nodes,
            cell_coef,
            cell_weights,
            arc,
        ))
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        kind: MeshKind,
        coords: Vec<[f64; 2]>,
        bulk_weights: Vec<f64>,
        boundary_nodes: Vec<usize>,
        boundary_weights: Vec<f64>,
        cell_ptr: Vec<usize>,
        cell_nodes: Vec<usize>,
        cell_coef: Vec<[f64; 2]>,
        cell_weights: Vec<f64>,
        arc: f64,
    ) -> Self {
        let mut mass = bulk_weights.clone();
        let mut is_boundary = alloc::vec![false; coords.len()];
        for (&n, &w) in boundary_nodes.iter().zip(&boundary_weights) {
            mass[n] += w;
            is_boundary[n] = true;
        }
        Self {
            kind,
            coords,
            bulk_weights,
            boundary_nodes,
            boundary_weights,
            mass,
            is_boundary,
            cell_ptr,
            cell_nodes,
            cell_coef,
            cell_weights,
            arc,
        }
    }

    pub fn kind(&self) -> MeshKind {
        self.kind
    }

    pub fn num_nodes(&self) -> usize {
        self.coords.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cell_weights.len()
    }

    pub fn coords(&self) -> &[[f64; 2]] {
        &self.coords
    }

    pub fn bulk_weights(&self) -> &[f64] {
        &self.bulk_weights
    }

    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary_nodes
    }

    pub fn boundary_weights(&self) -> &[f64] {
        &self.boundary_weights
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.is_boundary[node]
    }

    /// Per-node weight of the discrete product inner product.
    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn cell_weights(&self) -> &[f64] {
        &self.cell_weights
    }

    /// Nodes and gradient coefficients of cell `c`: `grad u = sum_k coef_k u[node_k]`.
    pub fn cell(&self, c: usize) -> (&[usize], &[[f64; 2]]) {
        let r = self.cell_ptr[c]..self.cell_ptr[c + 1];
        (&self.cell_nodes[r.clone()], &self.cell_coef[r])
    }

    /// Whether the boundary carries tangential derivatives (a closed curve).
    pub fn has_surface_calculus(&self) -> bool {
        matches!(self.kind, MeshKind::Disc2D { .. })
    }

    /// Arc length between consecutive boundary nodes; zero for `Interval1D`.
    pub fn arc_spacing(&self) -> f64 {
        self.arc
    }

    pub fn volume(&self) -> f64 {
        self.bulk_weights.iter().sum()
    }

    pub fn boundary_measure(&self) -> f64 {
        self.boundary_weights.iter().sum()
    }

    pub(crate) fn check(&self, u: &CoupledField) -> Result<(), MeshError> {
        if u.len() != self.num_nodes() {
            return Err(MeshError::SizeMismatch { expected: self.num_nodes(), got: u.len() });
        }
        Ok(())
    }

    #[inline]
    pub(crate) fn cell_gradient(&self, c: usize, u: &[f64]) -> [f64; 2] {
        let (nodes, coef) = self.cell(c);
        let mut g = [0.0; 2];
        for (&n, a) in nodes.iter().zip(coef) {
            g[0] += a[0] * u[n];
            g[1] += a[1] * u[n];
        }
        g
    }

    pub fn bulk_gradient(&self, u: &CoupledField) -> Result<Vec<[f64; 2]>, MeshError> {
        self.check(u)?;
        Ok((0..self.num_cells()).map(|c| self.cell_gradient(c, u.values())).collect())
    }

    #[inline]
    pub(crate) fn segment_gradients<'a>(&'a self, u: &'a [f64]) -> impl Iterator<Item = f64> + 'a {
        let m = if self.has_surface_calculus() { self.boundary_nodes.len() } else { 0 };
        let b = &self.boundary_nodes;
        let arc = self.arc;
        (0..m).map(move |j| (u[b[(j + 1) % m]] - u[b[j]]) / arc)
    }

    /// Tangential difference quotient on each boundary segment `j -> j+1`.
    pub fn surface_gradient(&self, u: &CoupledField) -> Result<Vec<f64>, MeshError> {
        self.check(u)?;
        Ok(self.segment_gradients(u.values()).collect())
    }

    /// Periodic second difference along the boundary loop, one value per boundary slot.
    pub fn laplace_beltrami(&self, u: &CoupledField) -> Result<Vec<f64>, MeshError> {
        if !self.has_surface_calculus() {
            return Err(MeshError::Unsupported("Laplace-Beltrami needs a closed boundary curve"));
        }
        self.check(u)?;
        let b = &self.boundary_nodes;
        let m = b.len();
        let h2 = self.arc * self.arc;
        Ok((0..m)
            .map(|j| {
                let (l, c, r) = (u[b[(j + m - 1) % m]], u[b[j]], u[b[(j + 1) % m]]);
                (l - 2.0 * c + r) / h2
            })
            .collect())
    }

    /// Discrete inner product of `L2(Omega) x L2(Gamma)`.
    pub fn h_inner(&self, u: &CoupledField, v: &CoupledField) -> Result<f64, MeshError> {
        self.check(u)?;
        self.check(v)?;
        Ok(self.h_inner_raw(u.values(), v.values()))
    }

    pub fn h_norm(&self, u: &CoupledField) -> Result<f64, MeshError> {
        self.check(u)?;
        Ok(libm::sqrt(self.h_inner_raw(u.values(), u.values())))
    }

    #[inline]
    pub(crate) fn h_inner_raw(&self, u: &[f64], v: &[f64]) -> f64 {
        self.mass.iter().zip(u).zip(v).map(|((m, a), b)| m * a * b).sum()
    }

    /// Bulk `H1` seminorm squared, `sum_cells |grad u|^2 w`.
    pub fn grad_seminorm_sq(&self, u: &CoupledField) -> Result<f64, MeshError> {
        self.check(u)?;
        Ok((0..self.num_cells())
            .map(|c| {
                let g = self.cell_gradient(c, u.values());
                (g[0] * g[0] + g[1] * g[1]) * self.cell_weights[c]
            })
            .sum())
    }

    /// `L2(Gamma)` norm squared of the boundary trace.
    pub fn boundary_l2_sq(&self, u: &CoupledField) -> Result<f64, MeshError> {
        self.check(u)?;
        Ok(self.boundary_nodes.iter().zip(&self.boundary_weights).map(|(&n, w)| u[n] * u[n] * w).sum())
    }

    /// Tangential `H1` seminorm squared of the boundary trace; zero for `Interval1D`.
    pub fn surface_seminorm_sq(&self, u: &CoupledField) -> Result<f64, MeshError> {
        self.check(u)?;
        Ok(self.segment_gradients(u.values()).map(|g| g * g * self.arc).sum())
    }

    /// Samples `f(x, y)` at every node.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> CoupledField {
        CoupledField::new(self.coords.iter().map(|p| f(p[0], p[1])).collect())
    }
}
