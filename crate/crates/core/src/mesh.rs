//! Structured triangulations of the unit square.

use std::collections::HashMap;

use crate::{Error, Result};

/// A conforming triangulation of `(0, 1)^2`.
///
/// Local edge `e` of a triangle is the edge opposite its local vertex `e`.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    n: usize,
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<bool>,
    edges: Vec<[usize; 2]>,
    triangle_edges: Vec<[usize; 3]>,
}

/// Uniform `n x n` grid with every cell split along its lower-left to
/// upper-right diagonal. Vertex `(i, j)` has index `j * (n + 1) + i`.
pub fn structured_unit_square(n: usize) -> Result<TriMesh> {
    if n < 1 {
        return Err(Error::invalid("subdivision count n must be at least 1"));
    }
    let np = n + 1;
    let mut vertices = Vec::with_capacity(np * np);
    let mut boundary = Vec::with_capacity(np * np);
    for j in 0..np {
        for i in 0..np {
            vertices.push([i as f64 / n as f64, j as f64 / n as f64]);
            boundary.push(i == 0 || j == 0 || i == n || j == n);
        }
    }
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let v00 = j * np + i;
            let v10 = v00 + 1;
            let v01 = v00 + np;
            let v11 = v01 + 1;
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }
    Ok(TriMesh::from_parts(n, vertices, triangles, boundary))
}

impl TriMesh {
    fn from_parts(
        n: usize,
        vertices: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
        boundary: Vec<bool>,
    ) -> Self {
        let mut index: HashMap<[usize; 2], usize> = HashMap::with_capacity(3 * triangles.len());
        let mut edges = Vec::new();
        let triangle_edges = triangles
            .iter()
            .map(|t| {
                let mut te = [0usize; 3];
                for (e, slot) in te.iter_mut().enumerate() {
                    let (a, b) = (t[(e + 1) % 3], t[(e + 2) % 3]);
                    let key = [a.min(b), a.max(b)];
                    *slot = *index.entry(key).or_insert_with(|| {
                        edges.push(key);
                        edges.len() - 1
                    });
                }
                te
            })
            .collect();
        Self {
            n,
            vertices,
            triangles,
            boundary,
            edges,
            triangle_edges,
        }
    }

    /// Subdivisions per side.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn triangle_edges(&self) -> &[[usize; 3]] {
        &self.triangle_edges
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary[v]
    }

    pub fn boundary_vertices(&self) -> Vec<usize> {
        (0..self.vertex_count()).filter(|&v| self.boundary[v]).collect()
    }

    pub fn triangle_coords(&self, t: usize) -> [[f64; 2]; 3] {
        self.triangles[t].map(|v| self.vertices[v])
    }

    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_coords(t);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    /// Longest edge over all triangles.
    pub fn mesh_size(&self) -> f64 {
        self.edges
            .iter()
            .map(|&[a, b]| {
                let (p, q) = (self.vertices[a], self.vertices[b]);
                (p[0] - q[0]).hypot(p[1] - q[1])
            })
            .fold(0.0, f64::max)
    }
}

pub fn mesh_size(mesh: &TriMesh) -> f64 {
    mesh.mesh_size()
}
