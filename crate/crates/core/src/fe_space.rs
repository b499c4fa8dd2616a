//! Continuous Lagrange spaces of degree 1 and 2 on triangles.
//!
//! Global numbering puts vertex DOFs first (index = vertex index), followed by
//! one DOF per edge for degree 2. Local numbering on a triangle is
//! `[v0, v1, v2]` for P1 and `[v0, v1, v2, e0, e1, e2]` for P2, where `e_i` is
//! the edge opposite `v_i`. Vector-valued fields use two stacked copies of the
//! scalar space: all x components, then all y components.

use std::sync::Arc;

use crate::mesh::TriMesh;
use crate::time_rules::gauss_rule;
use crate::{Error, Result};

/// Reference-coordinate gradients of the barycentric coordinates
/// `l0 = 1 - xi - eta`, `l1 = xi`, `l2 = eta`.
const BARY_GRADS: [[f64; 2]; 3] = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];

/// Vertex pairs spanned by local edges `e0, e1, e2`.
const EDGE_VERTS: [[usize; 2]; 3] = [[1, 2], [2, 0], [0, 1]];

pub fn local_dof_count(degree: usize) -> usize {
    (degree + 1) * (degree + 2) / 2
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasisEval {
    pub values: Vec<f64>,
    /// Gradients with respect to the reference coordinates `(xi, eta)`.
    pub grads: Vec<[f64; 2]>,
}

/// Shape functions and reference gradients at a barycentric point.
pub fn eval_basis(degree: usize, bary: [f64; 3]) -> Result<BasisEval> {
    if degree != 1 && degree != 2 {
        return Err(Error::invalid(format!("unsupported Lagrange degree {degree}")));
    }
    let sum: f64 = bary.iter().sum();
    if bary.iter().any(|&l| l < -1e-14 || !l.is_finite()) || (sum - 1.0).abs() > 1e-12 {
        return Err(Error::invalid(format!(
            "invalid barycentric point {bary:?}"
        )));
    }
    let n = local_dof_count(degree);
    let mut values = vec![0.0; n];
    let mut grads = vec![[0.0; 2]; n];
    basis_into(degree, bary, &mut values, &mut grads);
    Ok(BasisEval { values, grads })
}

pub(crate) fn basis_into(degree: usize, l: [f64; 3], values: &mut [f64], grads: &mut [[f64; 2]]) {
    match degree {
        1 => {
            values[..3].copy_from_slice(&l);
            grads[..3].copy_from_slice(&BARY_GRADS);
        }
        2 => {
            for i in 0..3 {
                values[i] = l[i] * (2.0 * l[i] - 1.0);
                let s = 4.0 * l[i] - 1.0;
                grads[i] = [s * BARY_GRADS[i][0], s * BARY_GRADS[i][1]];
            }
            for (e, &[a, b]) in EDGE_VERTS.iter().enumerate() {
                values[3 + e] = 4.0 * l[a] * l[b];
                grads[3 + e] = [
                    4.0 * (l[a] * BARY_GRADS[b][0] + l[b] * BARY_GRADS[a][0]),
                    4.0 * (l[a] * BARY_GRADS[b][1] + l[b] * BARY_GRADS[a][1]),
                ];
            }
        }
        _ => unreachable!("degree validated by callers"),
    }
}

/// Quadrature on the reference triangle `(0,0), (1,0), (0,1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialQuadrature {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl SpatialQuadrature {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Integral over the reference triangle of `f(xi, eta)`.
    pub fn integrate_reference(&self, f: impl Fn(f64, f64) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(l, w)| w * f(l[1], l[2]))
            .sum()
    }
}

/// Rule exact for total degree `d`, `1 <= d <= 8`.
///
/// Degrees 1 and 2 use the centroid and edge-midpoint rules; higher degrees
/// use a collapsed Gauss-Legendre product (Duffy transform).
pub fn triangle_quadrature(d: usize) -> Result<SpatialQuadrature> {
    match d {
        1 => Ok(SpatialQuadrature {
            points: vec![[1.0 / 3.0; 3]],
            weights: vec![0.5],
            degree: 1,
        }),
        2 => Ok(SpatialQuadrature {
            points: vec![[0.0, 0.5, 0.5], [0.5, 0.0, 0.5], [0.5, 0.5, 0.0]],
            weights: vec![1.0 / 6.0; 3],
            degree: 2,
        }),
        3..=8 => {
            // the collapsed coordinate carries an extra (1 - s) factor
            let m = (d + 2).div_ceil(2);
            let g = gauss_rule(m)?.map(0.0, 1.0)?;
            let mut points = Vec::with_capacity(m * m);
            let mut weights = Vec::with_capacity(m * m);
            for (&s, &ws) in g.nodes.iter().zip(&g.weights) {
                for (&t, &wt) in g.nodes.iter().zip(&g.weights) {
                    let xi = s;
                    let eta = t * (1.0 - s);
                    points.push([1.0 - xi - eta, xi, eta]);
                    weights.push(ws * wt * (1.0 - s));
                }
            }
            Ok(SpatialQuadrature {
                points,
                weights,
                degree: d,
            })
        }
        _ => Err(Error::invalid(format!(
            "triangle quadrature degree {d} outside 1..=8"
        ))),
    }
}

/// Affine map from the reference triangle onto a mesh triangle.
#[derive(Debug, Clone, Copy)]
pub struct ElementMap {
    origin: [f64; 2],
    jac: [[f64; 2]; 2],
    inv_t: [[f64; 2]; 2],
    det: f64,
}

impl ElementMap {
    pub fn new(coords: [[f64; 2]; 3]) -> Self {
        let [a, b, c] = coords;
        let jac = [[b[0] - a[0], c[0] - a[0]], [b[1] - a[1], c[1] - a[1]]];
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        // inverse transpose: maps reference gradients to physical ones
        let inv_t = [
            [jac[1][1] / det, -jac[1][0] / det],
            [-jac[0][1] / det, jac[0][0] / det],
        ];
        Self {
            origin: a,
            jac,
            inv_t,
            det,
        }
    }

    /// `|det J|`, twice the triangle area.
    pub fn det(&self) -> f64 {
        self.det.abs()
    }

    pub fn to_physical(&self, bary: [f64; 3]) -> [f64; 2] {
        let (xi, eta) = (bary[1], bary[2]);
        [
            self.origin[0] + self.jac[0][0] * xi + self.jac[0][1] * eta,
            self.origin[1] + self.jac[1][0] * xi + self.jac[1][1] * eta,
        ]
    }

    pub fn physical_grad(&self, g: [f64; 2]) -> [f64; 2] {
        [
            self.inv_t[0][0] * g[0] + self.inv_t[0][1] * g[1],
            self.inv_t[1][0] * g[0] + self.inv_t[1][1] * g[1],
        ]
    }
}

/// Basis values and reference gradients tabulated at the points of a rule.
#[derive(Debug, Clone)]
pub(crate) struct BasisTable {
    pub n_local: usize,
    pub values: Vec<Vec<f64>>,
    pub grads: Vec<Vec<[f64; 2]>>,
}

impl BasisTable {
    pub fn new(degree: usize, quad: &SpatialQuadrature) -> Self {
        let n_local = local_dof_count(degree);
        let mut values = Vec::with_capacity(quad.len());
        let mut grads = Vec::with_capacity(quad.len());
        for &l in &quad.points {
            let mut v = vec![0.0; n_local];
            let mut g = vec![[0.0; 2]; n_local];
            basis_into(degree, l, &mut v, &mut g);
            values.push(v);
            grads.push(g);
        }
        Self {
            n_local,
            values,
            grads,
        }
    }
}

/// Scalar Lagrange space `V_h^r` with its DOF maps and boundary DOFs.
#[derive(Debug, Clone)]
pub struct FeSpace {
    mesh: Arc<TriMesh>,
    degree: usize,
    cell_dofs: Vec<usize>,
    dof_coords: Vec<[f64; 2]>,
    dirichlet: Vec<usize>,
    is_dirichlet: Vec<bool>,
}

pub fn build_space(mesh: Arc<TriMesh>, degree: usize) -> Result<FeSpace> {
    FeSpace::new(mesh, degree)
}

fn on_square_boundary(p: [f64; 2]) -> bool {
    p[0] == 0.0 || p[0] == 1.0 || p[1] == 0.0 || p[1] == 1.0
}

impl FeSpace {
    pub fn new(mesh: Arc<TriMesh>, degree: usize) -> Result<Self> {
        if degree != 1 && degree != 2 {
            return Err(Error::invalid(format!(
                "unsupported Lagrange degree {degree} (expected 1 or 2)"
            )));
        }
        let nv = mesh.vertex_count();
        let mut dof_coords: Vec<[f64; 2]> = mesh.vertices().to_vec();
        let nloc = local_dof_count(degree);
        let mut cell_dofs = Vec::with_capacity(nloc * mesh.triangle_count());
        if degree == 2 {
            for &[a, b] in mesh.edges() {
                let (p, q) = (mesh.vertices()[a], mesh.vertices()[b]);
                dof_coords.push([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]);
            }
        }
        for (t, tri) in mesh.triangles().iter().enumerate() {
            cell_dofs.extend_from_slice(tri);
            if degree == 2 {
                cell_dofs.extend(mesh.triangle_edges()[t].iter().map(|e| nv + e));
            }
        }
        let is_dirichlet: Vec<bool> = dof_coords.iter().map(|&p| on_square_boundary(p)).collect();
        let dirichlet = (0..dof_coords.len()).filter(|&i| is_dirichlet[i]).collect();
        Ok(Self {
            mesh,
            degree,
            cell_dofs,
            dof_coords,
            dirichlet,
            is_dirichlet,
        })
    }

    pub fn mesh(&self) -> &Arc<TriMesh> {
        &self.mesh
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn dof_count(&self) -> usize {
        self.dof_coords.len()
    }

    pub fn local_dofs(&self) -> usize {
        local_dof_count(self.degree)
    }

    pub fn cell_dofs(&self, t: usize) -> &[usize] {
        let n = self.local_dofs();
        &self.cell_dofs[t * n..(t + 1) * n]
    }

    pub fn dof_coords(&self) -> &[[f64; 2]] {
        &self.dof_coords
    }

    pub fn dirichlet_dofs(&self) -> &[usize] {
        &self.dirichlet
    }

    pub fn is_dirichlet(&self, dof: usize) -> bool {
        self.is_dirichlet[dof]
    }

    pub fn element_map(&self, t: usize) -> ElementMap {
        ElementMap::new(self.mesh.triangle_coords(t))
    }

    pub fn same_mesh(&self, other: &FeSpace) -> bool {
        Arc::ptr_eq(&self.mesh, &other.mesh) || *self.mesh == *other.mesh
    }

    /// Evaluates the discrete function with coefficients `coeffs` at every
    /// quadrature point of every element, calling
    /// `visit(point, weight, value, physical_gradient)` with the physical
    /// quadrature weight.
    pub fn for_each_quad_point(
        &self,
        coeffs: &[f64],
        quad: &SpatialQuadrature,
        mut visit: impl FnMut([f64; 2], f64, f64, [f64; 2]),
    ) {
        let table = BasisTable::new(self.degree, quad);
        for t in 0..self.mesh.triangle_count() {
            let map = self.element_map(t);
            let dofs = self.cell_dofs(t);
            for (q, (&l, &w)) in quad.points.iter().zip(&quad.weights).enumerate() {
                let mut value = 0.0;
                let mut grad = [0.0; 2];
                for (i, &dof) in dofs.iter().enumerate() {
                    let c = coeffs[dof];
                    value += c * table.values[q][i];
                    let g = map.physical_grad(table.grads[q][i]);
                    grad[0] += c * g[0];
                    grad[1] += c * g[1];
                }
                visit(map.to_physical(l), w * map.det(), value, grad);
            }
        }
    }
}

/// Nodal interpolant: the coefficient of each DOF is `f` at its coordinate.
pub fn interpolate_nodal(f: impl Fn(f64, f64) -> f64, space: &FeSpace) -> Vec<f64> {
    space.dof_coords().iter().map(|&[x, y]| f(x, y)).collect()
}

/// Component-stacked nodal interpolant of a vector field.
pub fn interpolate_vector(f: impl Fn(f64, f64) -> [f64; 2], space: &FeSpace) -> Vec<f64> {
    let n = space.dof_count();
    let mut out = vec![0.0; 2 * n];
    for (i, &[x, y]) in space.dof_coords().iter().enumerate() {
        let v = f(x, y);
        out[i] = v[0];
        out[n + i] = v[1];
    }
    out
}
