//! Compressed-row matrices and the finite element forms of the weak
//! formulation: mass, isotropic elasticity, divergence coupling and loads.
//!
//! Coefficients such as `alpha` or `d1 * eta_k` are not baked into the
//! matrices here; the slab solver scales and combines them.

use std::io::Write;

use crate::fe_space::{BasisTable, FeSpace, SpatialQuadrature, triangle_quadrature};
use crate::{Error, Result};

/// Sparse matrix in compressed row layout with sorted, unique column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

/// Coordinate-format accumulator; duplicates are summed on conversion.
#[derive(Debug, Clone, Default)]
pub struct TripletBuilder {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(nrows: usize, ncols: usize, cap: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::with_capacity(cap),
        }
    }

    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.nrows && j < self.ncols);
        self.entries.push((i, j, v));
    }

    /// Adds `scale * m` with its top-left corner at `(row0, col0)`.
    pub fn add_block(&mut self, row0: usize, col0: usize, scale: f64, m: &SparseMatrix) {
        if scale == 0.0 {
            return;
        }
        for (i, j, v) in m.iter() {
            self.push(row0 + i, col0 + j, scale * v);
        }
    }

    /// Adds `scale * m^T` with its top-left corner at `(row0, col0)`.
    pub fn add_block_transposed(&mut self, row0: usize, col0: usize, scale: f64, m: &SparseMatrix) {
        if scale == 0.0 {
            return;
        }
        for (i, j, v) in m.iter() {
            self.push(row0 + j, col0 + i, scale * v);
        }
    }

    pub fn build(mut self) -> SparseMatrix {
        self.entries.sort_unstable_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; self.nrows + 1];
        let mut col_idx = Vec::with_capacity(self.entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in self.entries {
            if last == Some((i, j)) {
                *values.last_mut().expect("entry exists") += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..self.nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            row_ptr,
            col_idx,
            values,
        }
    }
}

impl SparseMatrix {
    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let ncols = rows.first().map_or(0, Vec::len);
        let mut b = TripletBuilder::new(rows.len(), ncols);
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    b.push(i, j, v);
                }
            }
        }
        b.build()
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    /// All stored entries as `(row, col, value)`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols, "dimension mismatch in mat-vec");
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    /// `y^T A x`.
    pub fn bilinear(&self, y: &[f64], x: &[f64]) -> f64 {
        (0..self.nrows)
            .map(|i| y[i] * self.row(i).map(|(j, v)| v * x[j]).sum::<f64>())
            .sum()
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut b = TripletBuilder::with_capacity(self.ncols, self.nrows, self.nnz());
        for (i, j, v) in self.iter() {
            b.push(j, i, v);
        }
        b.build()
    }

    /// `max |A - A^T|` (infinite for rectangular matrices).
    pub fn asymmetry(&self) -> f64 {
        if self.nrows != self.ncols {
            return f64::INFINITY;
        }
        self.iter()
            .map(|(i, j, v)| (v - self.get(j, i)).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.asymmetry() <= tol
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, j, v) in self.iter() {
            d[i][j] = v;
        }
        d
    }

    /// Writes the matrix in Matrix Market coordinate format.
    pub fn write_matrix_market(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(out, "{} {} {}", self.nrows, self.ncols, self.nnz())?;
        for (i, j, v) in self.iter() {
            writeln!(out, "{} {} {:e}", i + 1, j + 1, v)?;
        }
        Ok(())
    }
}

/// Isotropic elasticity `C eps = 2 mu eps + lambda tr(eps) I`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElasticityTensor {
    pub lambda: f64,
    pub mu: f64,
}

impl ElasticityTensor {
    pub fn new(lambda: f64, mu: f64) -> Result<Self> {
        if !(lambda > 0.0 && mu > 0.0) {
            return Err(Error::InvalidParams(format!(
                "Lame constants must be positive, got lambda = {lambda}, mu = {mu}"
            )));
        }
        Ok(Self { lambda, mu })
    }

    /// Plane-strain conversion from Young's modulus and Poisson ratio.
    pub fn from_young_poisson(young: f64, poisson: f64) -> Result<Self> {
        if !(young > 0.0) || !(poisson > 0.0 && poisson < 0.5) {
            return Err(Error::InvalidParams(format!(
                "need E > 0 and 0 < nu < 0.5, got E = {young}, nu = {poisson}"
            )));
        }
        let mu = young / (2.0 * (1.0 + poisson));
        let lambda = young * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson));
        Self::new(lambda, mu)
    }
}

fn default_quad(space: &FeSpace) -> SpatialQuadrature {
    triangle_quadrature(2 * space.degree()).expect("degree 2 or 4 rule exists")
}

/// Scalar mass matrix `<phi_j, phi_i>`.
pub fn mass_scalar(space: &FeSpace) -> SparseMatrix {
    let quad = default_quad(space);
    let table = BasisTable::new(space.degree(), &quad);
    let nl = table.n_local;
    let nt = space.mesh().triangle_count();
    let mut b = TripletBuilder::with_capacity(space.dof_count(), space.dof_count(), nt * nl * nl);
    let mut local = vec![0.0; nl * nl];
    for t in 0..nt {
        let det = space.element_map(t).det();
        local.iter_mut().for_each(|v| *v = 0.0);
        for (q, &w) in quad.weights.iter().enumerate() {
            let phi = &table.values[q];
            for i in 0..nl {
                for j in 0..nl {
                    local[i * nl + j] += w * det * phi[i] * phi[j];
                }
            }
        }
        let dofs = space.cell_dofs(t);
        for i in 0..nl {
            for j in 0..nl {
                b.push(dofs[i], dofs[j], local[i * nl + j]);
            }
        }
    }
    b.build()
}

/// Block-diagonal mass for a component-stacked vector field.
pub fn mass_vector(space: &FeSpace) -> SparseMatrix {
    let m = mass_scalar(space);
    let n = space.dof_count();
    let mut b = TripletBuilder::with_capacity(2 * n, 2 * n, 2 * m.nnz());
    b.add_block(0, 0, 1.0, &m);
    b.add_block(n, n, 1.0, &m);
    b.build()
}

/// Elasticity stiffness `A(u, phi) = <C eps(u), eps(phi)>` on the stacked
/// vector space.
pub fn stiffness_elasticity(space: &FeSpace, tensor: ElasticityTensor) -> SparseMatrix {
    let quad = default_quad(space);
    let table = BasisTable::new(space.degree(), &quad);
    let nl = table.n_local;
    let n = space.dof_count();
    let nt = space.mesh().triangle_count();
    let (lam, mu) = (tensor.lambda, tensor.mu);
    let mut b = TripletBuilder::with_capacity(2 * n, 2 * n, nt * 4 * nl * nl);
    let mut grads = vec![[0.0; 2]; nl];
    // local blocks [xx, xy; yx, yy]
    let mut local = vec![[0.0; 4]; nl * nl];
    for t in 0..nt {
        let map = space.element_map(t);
        let det = map.det();
        local.iter_mut().for_each(|v| *v = [0.0; 4]);
        for (q, &w) in quad.weights.iter().enumerate() {
            for i in 0..nl {
                grads[i] = map.physical_grad(table.grads[q][i]);
            }
            let wq = w * det;
            for i in 0..nl {
                let [ix, iy] = grads[i];
                for j in 0..nl {
                    let [jx, jy] = grads[j];
                    let e = &mut local[i * nl + j];
                    e[0] += wq * ((lam + 2.0 * mu) * ix * jx + mu * iy * jy);
                    e[1] += wq * (lam * ix * jy + mu * iy * jx);
                    e[2] += wq * (lam * iy * jx + mu * ix * jy);
                    e[3] += wq * ((lam + 2.0 * mu) * iy * jy + mu * ix * jx);
                }
            }
        }
        let dofs = space.cell_dofs(t);
        for i in 0..nl {
            for j in 0..nl {
                let e = local[i * nl + j];
                let (gi, gj) = (dofs[i], dofs[j]);
                b.push(gi, gj, e[0]);
                b.push(gi, n + gj, e[1]);
                b.push(n + gi, gj, e[2]);
                b.push(n + gi, n + gj, e[3]);
            }
        }
    }
    b.build()
}

/// `D[i][j] = <div phi_j, psi_i>` with `phi_j` ranging over the stacked
/// vector space and `psi_i` over the scalar space.
pub fn divergence_coupling(vspace: &FeSpace, sspace: &FeSpace) -> Result<SparseMatrix> {
    if !vspace.same_mesh(sspace) {
        return Err(Error::invalid(
            "divergence coupling needs both spaces on the same mesh",
        ));
    }
    let quad = triangle_quadrature(vspace.degree() + sspace.degree() - 1)
        .expect("rule of degree <= 3 exists");
    let vt = BasisTable::new(vspace.degree(), &quad);
    let st = BasisTable::new(sspace.degree(), &quad);
    let (nv, ns) = (vt.n_local, st.n_local);
    let n = vspace.dof_count();
    let nt = vspace.mesh().triangle_count();
    let mut b = TripletBuilder::with_capacity(sspace.dof_count(), 2 * n, nt * 2 * nv * ns);
    let mut local = vec![[0.0; 2]; ns * nv];
    for t in 0..nt {
        let map = vspace.element_map(t);
        let det = map.det();
        local.iter_mut().for_each(|v| *v = [0.0; 2]);
        for (q, &w) in quad.weights.iter().enumerate() {
            for j in 0..nv {
                let g = map.physical_grad(vt.grads[q][j]);
                for i in 0..ns {
                    let s = w * det * st.values[q][i];
                    local[i * nv + j][0] += s * g[0];
                    local[i * nv + j][1] += s * g[1];
                }
            }
        }
        let vd = vspace.cell_dofs(t);
        let sd = sspace.cell_dofs(t);
        for i in 0..ns {
            for j in 0..nv {
                let e = local[i * nv + j];
                b.push(sd[i], vd[j], e[0]);
                b.push(sd[i], n + vd[j], e[1]);
            }
        }
    }
    Ok(b.build())
}

/// `<f, phi_i>` for a scalar source.
pub fn load_vector(space: &FeSpace, f: impl Fn(f64, f64) -> f64, quad: &SpatialQuadrature) -> Vec<f64> {
    let table = BasisTable::new(space.degree(), quad);
    let mut out = vec![0.0; space.dof_count()];
    for t in 0..space.mesh().triangle_count() {
        let map = space.element_map(t);
        let dofs = space.cell_dofs(t);
        for (q, (&l, &w)) in quad.points.iter().zip(&quad.weights).enumerate() {
            let [x, y] = map.to_physical(l);
            let fw = f(x, y) * w * map.det();
            for (i, &d) in dofs.iter().enumerate() {
                out[d] += fw * table.values[q][i];
            }
        }
    }
    out
}

/// `<f, phi_i>` for a vector source, component-stacked.
pub fn load_vector_2d(
    space: &FeSpace,
    f: impl Fn(f64, f64) -> [f64; 2],
    quad: &SpatialQuadrature,
) -> Vec<f64> {
    let table = BasisTable::new(space.degree(), quad);
    let n = space.dof_count();
    let mut out = vec![0.0; 2 * n];
    for t in 0..space.mesh().triangle_count() {
        let map = space.element_map(t);
        let dofs = space.cell_dofs(t);
        for (q, (&l, &w)) in quad.points.iter().zip(&quad.weights).enumerate() {
            let [x, y] = map.to_physical(l);
            let v = f(x, y);
            let s = w * map.det();
            for (i, &d) in dofs.iter().enumerate() {
                let phi = s * table.values[q][i];
                out[d] += v[0] * phi;
                out[n + d] += v[1] * phi;
            }
        }
    }
    out
}
