//! Per-slab block system of the lowest-order continuous Galerkin scheme.
//!
//! With `k = 1` the trial functions are linear in time on each slab and the
//! test functions are constant, so every time integral collapses to a
//! midpoint/trapezoid expression and the scheme coincides with Crank-Nicolson.
//! Unknowns of a slab are the end values `(u_n, v_n, p_n, psi_n)`, stacked in
//! that order. With `M` the vector mass, `Ms` the pressure mass, `A` the
//! elasticity stiffness and `D` the divergence coupling, the four block rows are
//!
//! ```text
//! M (u_n - u_o) - tau/2 M (v_n + v_o)                                     = 0
//! rho M (v_n - v_o) + tau/2 A (u_n + u_o) - tau/2 alpha D^T (p_n + p_o)
//!     + rho_f M (psi_n - psi_o)                                           = tau/2 (F_u^o + F_u^n)
//! c0 Ms (p_n - p_o) + alpha D (u_n - u_o) + tau/2 D (psi_n + psi_o)       = tau/2 (G^o + G^n)
//! rho_f c1 F M (psi_n - psi_o) + tau/2 rho_f F M (psi_n + psi_o)
//!     - tau/2 d1 eta_k D^T (p_n + p_o) + rho_f d1 eta_k M (v_n - v_o)     = tau/2 (F_psi^o + F_psi^n)
//! ```
//!
//! The right-hand sides are the two-point Gauss-Lobatto (trapezoid) rule
//! applied to the source loads.

use std::sync::Arc;

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

use crate::assembly::{
    divergence_coupling, load_vector, load_vector_2d, mass_scalar, mass_vector,
    stiffness_elasticity, ElasticityTensor, SparseMatrix, TripletBuilder,
};
use crate::fe_space::{triangle_quadrature, FeSpace};
use crate::mesh::TriMesh;
use crate::{Error, Result};

/// Relative residual accepted from the direct solver.
pub const SOLVER_RTOL: f64 = 1e-10;
/// Absolute residual accepted when the right-hand side vanishes.
pub const SOLVER_ATOL: f64 = 1e-12;

/// Physical coefficients of the poroelastic model with memory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysParams {
    /// Bulk density.
    pub rho: f64,
    /// Fluid density.
    pub rho_f: f64,
    /// Storage coefficient.
    pub c0: f64,
    /// Biot-Willis coefficient.
    pub alpha: f64,
    /// Memory-kernel fit constants.
    pub c1: f64,
    pub d1: f64,
    /// Kinetic viscosity.
    pub eta_k: f64,
    /// Formation factor.
    pub formation_factor: f64,
    pub young: f64,
    pub poisson: f64,
}

impl Default for PhysParams {
    /// Every coefficient 1 except the Poisson ratio, 0.49.
    fn default() -> Self {
        Self {
            rho: 1.0,
            rho_f: 1.0,
            c0: 1.0,
            alpha: 1.0,
            c1: 1.0,
            d1: 1.0,
            eta_k: 1.0,
            formation_factor: 1.0,
            young: 1.0,
            poisson: 0.49,
        }
    }
}

impl PhysParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rho", self.rho),
            ("rho_f", self.rho_f),
            ("c1", self.c1),
            ("d1", self.d1),
            ("eta_k", self.eta_k),
            ("formation_factor", self.formation_factor),
            ("young", self.young),
            ("poisson", self.poisson),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParams(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("c0", self.c0), ("alpha", self.alpha)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParams(format!(
                    "{name} must be nonnegative, got {v}"
                )));
            }
        }
        if self.poisson >= 0.5 {
            return Err(Error::InvalidParams(format!(
                "Poisson ratio must be below 0.5, got {}",
                self.poisson
            )));
        }
        self.check_n_psd()
    }

    pub fn elasticity(&self) -> Result<ElasticityTensor> {
        ElasticityTensor::from_young_poisson(self.young, self.poisson)
    }

    /// `rho_f c1 F / (eta_k d1)`, the memory entry of `N`.
    pub fn memory_weight(&self) -> f64 {
        self.rho_f * self.c1 * self.formation_factor / (self.eta_k * self.d1)
    }

    /// The velocity/memory energy weight `N`.
    pub fn n_matrix(&self) -> [[f64; 2]; 2] {
        [[self.rho, self.rho_f], [self.rho_f, self.memory_weight()]]
    }

    pub fn check_n_psd(&self) -> Result<()> {
        let [[a, b], [_, d]] = self.n_matrix();
        let det = a * d - b * b;
        // a singular N (det = 0 up to rounding) is admissible
        if a < 0.0 || d < 0.0 || det < -1e-12 * (a * d).max(b * b) {
            return Err(Error::InvalidParams(format!(
                "N = [[{a}, {b}], [{b}, {d}]] is not positive semidefinite"
            )));
        }
        Ok(())
    }
}

/// Finite element spaces for the displacement-like fields `(u, v, psi)` and
/// for the pressure.
#[derive(Debug, Clone)]
pub struct Spaces {
    pub disp: Arc<FeSpace>,
    pub pres: Arc<FeSpace>,
}

impl Spaces {
    pub fn equal_order(mesh: Arc<TriMesh>, r: usize) -> Result<Self> {
        let space = Arc::new(FeSpace::new(mesh, r)?);
        Ok(Self {
            disp: space.clone(),
            pres: space,
        })
    }

    /// Vector fields in degree `r + 1`, pressure in degree `r`.
    pub fn taylor_hood(mesh: Arc<TriMesh>, r: usize) -> Result<Self> {
        Ok(Self {
            disp: Arc::new(FeSpace::new(mesh.clone(), r + 1)?),
            pres: Arc::new(FeSpace::new(mesh, r)?),
        })
    }

    pub fn layout(&self) -> BlockLayout {
        BlockLayout {
            nu: 2 * self.disp.dof_count(),
            np: self.pres.dof_count(),
        }
    }
}

/// Sizes of the vector blocks (`nu`, for each of u, v, psi) and the
/// pressure block (`np`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockLayout {
    pub nu: usize,
    pub np: usize,
}

impl BlockLayout {
    pub fn u(&self) -> usize {
        0
    }
    pub fn v(&self) -> usize {
        self.nu
    }
    pub fn p(&self) -> usize {
        2 * self.nu
    }
    pub fn psi(&self) -> usize {
        2 * self.nu + self.np
    }
    pub fn total(&self) -> usize {
        3 * self.nu + self.np
    }
}

/// Assembled, coefficient-free operators shared by all slabs.
#[derive(Debug, Clone)]
pub struct SystemMatrices {
    pub mass_vec: SparseMatrix,
    pub mass_p: SparseMatrix,
    pub stiffness: SparseMatrix,
    /// `np x nu`, `D[i][j] = <div phi_j, psi_i>`.
    pub div: SparseMatrix,
    /// Constrained indices within a vector block.
    pub disp_dirichlet: Vec<usize>,
    /// Constrained indices within the pressure block.
    pub pres_dirichlet: Vec<usize>,
}

impl SystemMatrices {
    pub fn assemble(spaces: &Spaces, params: &PhysParams) -> Result<Self> {
        let disp = &spaces.disp;
        let n = disp.dof_count();
        let disp_dirichlet = disp
            .dirichlet_dofs()
            .iter()
            .copied()
            .chain(disp.dirichlet_dofs().iter().map(|d| d + n))
            .collect();
        Ok(Self {
            mass_vec: mass_vector(disp),
            mass_p: mass_scalar(&spaces.pres),
            stiffness: stiffness_elasticity(disp, params.elasticity()?),
            div: divergence_coupling(disp, &spaces.pres)?,
            disp_dirichlet,
            pres_dirichlet: spaces.pres.dirichlet_dofs().to_vec(),
        })
    }

    pub fn layout(&self) -> BlockLayout {
        BlockLayout {
            nu: self.mass_vec.nrows(),
            np: self.mass_p.nrows(),
        }
    }

    /// Every constrained index of the stacked slab system.
    pub fn dirichlet_dofs(&self) -> Vec<usize> {
        let l = self.layout();
        let mut out = Vec::with_capacity(3 * self.disp_dirichlet.len() + self.pres_dirichlet.len());
        for off in [l.u(), l.v(), l.psi()] {
            out.extend(self.disp_dirichlet.iter().map(|d| off + d));
        }
        out.extend(self.pres_dirichlet.iter().map(|d| l.p() + d));
        out.sort_unstable();
        out
    }
}

/// Coefficients of `(u, v, p, psi)` at one time node.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub t: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub p: Vec<f64>,
    pub psi: Vec<f64>,
}

impl FieldState {
    pub fn zeros(layout: BlockLayout, t: f64) -> Self {
        Self {
            t,
            u: vec![0.0; layout.nu],
            v: vec![0.0; layout.nu],
            p: vec![0.0; layout.np],
            psi: vec![0.0; layout.nu],
        }
    }

    pub fn layout(&self) -> BlockLayout {
        BlockLayout {
            nu: self.u.len(),
            np: self.p.len(),
        }
    }

    pub fn to_vector(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.layout().total());
        x.extend_from_slice(&self.u);
        x.extend_from_slice(&self.v);
        x.extend_from_slice(&self.p);
        x.extend_from_slice(&self.psi);
        x
    }

    pub fn from_vector(layout: BlockLayout, t: f64, x: &[f64]) -> Self {
        assert_eq!(x.len(), layout.total());
        Self {
            t,
            u: x[layout.u()..layout.v()].to_vec(),
            v: x[layout.v()..layout.p()].to_vec(),
            p: x[layout.p()..layout.psi()].to_vec(),
            psi: x[layout.psi()..].to_vec(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_vector().iter().all(|v| v.is_finite())
    }

    /// Largest magnitude found at a constrained index.
    pub fn boundary_max(&self, mats: &SystemMatrices) -> f64 {
        let x = self.to_vector();
        mats.dirichlet_dofs()
            .iter()
            .map(|&i| x[i].abs())
            .fold(0.0, f64::max)
    }
}

/// Right-hand sides of the mechanics, flow and memory equations.
pub trait SourceTerms {
    fn mechanics(&self, x: f64, y: f64, t: f64) -> [f64; 2];
    fn flow(&self, x: f64, y: f64, t: f64) -> f64;
    fn memory(&self, x: f64, y: f64, t: f64) -> [f64; 2];

    /// Sources known to vanish identically skip load assembly.
    fn is_zero(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NoSources;

impl SourceTerms for NoSources {
    fn mechanics(&self, _: f64, _: f64, _: f64) -> [f64; 2] {
        [0.0; 2]
    }
    fn flow(&self, _: f64, _: f64, _: f64) -> f64 {
        0.0
    }
    fn memory(&self, _: f64, _: f64, _: f64) -> [f64; 2] {
        [0.0; 2]
    }
    fn is_zero(&self) -> bool {
        true
    }
}

/// Assembled source loads at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct SlabLoads {
    pub mechanics: Vec<f64>,
    pub flow: Vec<f64>,
    pub memory: Vec<f64>,
}

impl SlabLoads {
    pub fn zeros(layout: BlockLayout) -> Self {
        Self {
            mechanics: vec![0.0; layout.nu],
            flow: vec![0.0; layout.np],
            memory: vec![0.0; layout.nu],
        }
    }

    pub fn assemble(spaces: &Spaces, sources: &(impl SourceTerms + ?Sized), t: f64) -> Self {
        if sources.is_zero() {
            return Self::zeros(spaces.layout());
        }
        let qd = triangle_quadrature(2 * spaces.disp.degree() + 4).expect("degree <= 8");
        let qp = triangle_quadrature(2 * spaces.pres.degree() + 4).expect("degree <= 8");
        Self {
            mechanics: load_vector_2d(&spaces.disp, |x, y| sources.mechanics(x, y, t), &qd),
            flow: load_vector(&spaces.pres, |x, y| sources.flow(x, y, t), &qp),
            memory: load_vector_2d(&spaces.disp, |x, y| sources.memory(x, y, t), &qd),
        }
    }
}

/// Block matrix, right-hand side and constraint set of one slab.
#[derive(Debug, Clone)]
pub struct SlabSystem {
    pub matrix: SparseMatrix,
    pub rhs: Vec<f64>,
    pub layout: BlockLayout,
    /// Time at the end of the slab.
    pub t_next: f64,
    constrained: Vec<bool>,
}

impl SlabSystem {
    pub fn new(matrix: SparseMatrix, rhs: Vec<f64>, layout: BlockLayout, t_next: f64) -> Self {
        let n = rhs.len();
        Self {
            matrix,
            rhs,
            layout,
            t_next,
            constrained: vec![false; n],
        }
    }

    pub fn is_constrained(&self, i: usize) -> bool {
        self.constrained[i]
    }

    pub fn constrained_dofs(&self) -> Vec<usize> {
        (0..self.constrained.len()).filter(|&i| self.constrained[i]).collect()
    }
}

fn check_step(tau: f64, k: usize) -> Result<()> {
    if k != 1 {
        return Err(Error::Unsupported(format!(
            "continuous Galerkin order k = {k}; only k = 1 is implemented"
        )));
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::invalid(format!("time step must be positive, got {tau}")));
    }
    Ok(())
}

/// The slab matrix; it depends on the step but not on the state.
pub fn slab_matrix(params: &PhysParams, mats: &SystemMatrices, tau: f64, k: usize) -> Result<SparseMatrix> {
    check_step(tau, k)?;
    let l = mats.layout();
    let h = 0.5 * tau;
    let c = params;
    let (m, ms, a, d) = (&mats.mass_vec, &mats.mass_p, &mats.stiffness, &mats.div);
    let nnz = 6 * m.nnz() + a.nnz() + ms.nnz() + 6 * d.nnz();
    let mut b = TripletBuilder::with_capacity(l.total(), l.total(), nnz);
    // displacement-velocity relation
    b.add_block(l.u(), l.u(), 1.0, m);
    b.add_block(l.u(), l.v(), -h, m);
    // mechanics
    b.add_block(l.v(), l.u(), h, a);
    b.add_block(l.v(), l.v(), c.rho, m);
    b.add_block_transposed(l.v(), l.p(), -h * c.alpha, d);
    b.add_block(l.v(), l.psi(), c.rho_f, m);
    // flow
    b.add_block(l.p(), l.u(), c.alpha, d);
    b.add_block(l.p(), l.p(), c.c0, ms);
    b.add_block(l.p(), l.psi(), h, d);
    // memory
    let de = c.d1 * c.eta_k;
    b.add_block(l.psi(), l.v(), c.rho_f * de, m);
    b.add_block_transposed(l.psi(), l.p(), -h * de, d);
    b.add_block(
        l.psi(),
        l.psi(),
        c.rho_f * c.formation_factor * (c.c1 + h),
        m,
    );
    Ok(b.build())
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Right-hand side of a slab from the previous state and the loads at both
/// slab endpoints.
pub fn slab_rhs(
    params: &PhysParams,
    mats: &SystemMatrices,
    prev: &FieldState,
    tau: f64,
    loads_prev: &SlabLoads,
    loads_next: &SlabLoads,
) -> Vec<f64> {
    let l = mats.layout();
    let h = 0.5 * tau;
    let c = params;
    let de = c.d1 * c.eta_k;
    let (m, ms, a, d) = (&mats.mass_vec, &mats.mass_p, &mats.stiffness, &mats.div);
    let dt = d.transpose();

    let mu = m.mul_vec(&prev.u);
    let mv = m.mul_vec(&prev.v);
    let mpsi = m.mul_vec(&prev.psi);
    let au = a.mul_vec(&prev.u);
    let dtp = dt.mul_vec(&prev.p);
    let du = d.mul_vec(&prev.u);
    let dpsi = d.mul_vec(&prev.psi);
    let msp = ms.mul_vec(&prev.p);

    let mut rhs = vec![0.0; l.total()];
    {
        let r = &mut rhs[l.u()..l.v()];
        axpy(r, 1.0, &mu);
        axpy(r, h, &mv);
    }
    {
        let r = &mut rhs[l.v()..l.p()];
        axpy(r, -h, &au);
        axpy(r, c.rho, &mv);
        axpy(r, h * c.alpha, &dtp);
        axpy(r, c.rho_f, &mpsi);
        axpy(r, h, &loads_prev.mechanics);
        axpy(r, h, &loads_next.mechanics);
    }
    {
        let r = &mut rhs[l.p()..l.psi()];
        axpy(r, c.alpha, &du);
        axpy(r, c.c0, &msp);
        axpy(r, -h, &dpsi);
        axpy(r, h, &loads_prev.flow);
        axpy(r, h, &loads_next.flow);
    }
    {
        let r = &mut rhs[l.psi()..];
        axpy(r, c.rho_f * de, &mv);
        axpy(r, h * de, &dtp);
        axpy(r, c.rho_f * c.formation_factor * (c.c1 - h), &mpsi);
        axpy(r, h, &loads_prev.memory);
        axpy(r, h, &loads_next.memory);
    }
    rhs
}

/// Builds the (unconstrained) slab system advancing `prev` by `tau`.
pub fn assemble_slab(
    params: &PhysParams,
    spaces: &Spaces,
    mats: &SystemMatrices,
    prev: &FieldState,
    tau: f64,
    sources: &(impl SourceTerms + ?Sized),
    k: usize,
) -> Result<SlabSystem> {
    let matrix = slab_matrix(params, mats, tau, k)?;
    let lp = SlabLoads::assemble(spaces, sources, prev.t);
    let ln = SlabLoads::assemble(spaces, sources, prev.t + tau);
    let rhs = slab_rhs(params, mats, prev, tau, &lp, &ln);
    Ok(SlabSystem::new(matrix, rhs, mats.layout(), prev.t + tau))
}

/// Symmetric elimination of homogeneous constraints: constrained rows and
/// columns are cleared, unit diagonals inserted and right-hand side entries
/// set to zero.
pub fn apply_dirichlet(mut system: SlabSystem, dofs: &[usize]) -> SlabSystem {
    for &d in dofs {
        system.constrained[d] = true;
    }
    system.matrix = eliminate(&system.matrix, &system.constrained);
    for (i, r) in system.rhs.iter_mut().enumerate() {
        if system.constrained[i] {
            *r = 0.0;
        }
    }
    system
}

fn eliminate(matrix: &SparseMatrix, constrained: &[bool]) -> SparseMatrix {
    let n = matrix.nrows();
    let mut b = TripletBuilder::with_capacity(n, matrix.ncols(), matrix.nnz());
    for (i, j, v) in matrix.iter() {
        if !constrained[i] && !constrained[j] {
            b.push(i, j, v);
        }
    }
    for i in (0..n).filter(|&i| constrained[i]) {
        b.push(i, i, 1.0);
    }
    b.build()
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Sparse LU factorization of a slab matrix with a residual-checked solve.
pub struct SlabFactorization {
    matrix: SparseMatrix,
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
}

impl SlabFactorization {
    pub fn new(matrix: &SparseMatrix) -> Result<Self> {
        let n = matrix.nrows();
        if n != matrix.ncols() {
            return Err(Error::invalid("slab matrix must be square"));
        }
        let triplets: Vec<Triplet<usize, usize, f64>> =
            matrix.iter().map(|(i, j, v)| Triplet::new(i, j, v)).collect();
        let csc = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets).map_err(|e| {
            Error::SolverFailure {
                message: format!("could not convert slab matrix: {e:?}"),
                relative_residual: f64::NAN,
                size: n,
            }
        })?;
        let lu = csc.sp_lu().map_err(|e| Error::SolverFailure {
            message: format!("sparse LU factorization failed: {e:?}"),
            relative_residual: f64::NAN,
            size: n,
        })?;
        Ok(Self {
            matrix: matrix.clone(),
            lu,
        })
    }

    fn raw_solve(&self, b: &[f64]) -> Vec<f64> {
        let mut rhs = Mat::<f64>::from_fn(b.len(), 1, |i, _| b[i]);
        self.lu.solve_in_place(rhs.as_mut());
        (0..b.len()).map(|i| rhs[(i, 0)]).collect()
    }

    /// Solves `A x = b`, refining iteratively until the residual meets
    /// [`SOLVER_RTOL`] (or [`SOLVER_ATOL`] for `b = 0`).
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let bn = norm(b);
        let mut x = self.raw_solve(b);
        let mut res = self.residual_norm(b, &x);
        for _ in 0..3 {
            if Self::accepted(res, bn) {
                break;
            }
            let r: Vec<f64> = self
                .matrix
                .mul_vec(&x)
                .iter()
                .zip(b)
                .map(|(ax, bi)| bi - ax)
                .collect();
            let dx = self.raw_solve(&r);
            axpy(&mut x, 1.0, &dx);
            res = self.residual_norm(b, &x);
        }
        if !Self::accepted(res, bn) || !x.iter().all(|v| v.is_finite()) {
            return Err(Error::SolverFailure {
                message: "direct solve did not reach the residual tolerance".into(),
                relative_residual: if bn > 0.0 { res / bn } else { res },
                size: b.len(),
            });
        }
        Ok(x)
    }

    fn accepted(res: f64, bn: f64) -> bool {
        if bn == 0.0 {
            res <= SOLVER_ATOL
        } else {
            res <= SOLVER_RTOL * bn
        }
    }

    fn residual_norm(&self, b: &[f64], x: &[f64]) -> f64 {
        let ax = self.matrix.mul_vec(x);
        ax.iter()
            .zip(b)
            .map(|(a, bi)| (bi - a) * (bi - a))
            .sum::<f64>()
            .sqrt()
    }
}

/// Factorizes and solves one constrained slab system.
pub fn solve_slab(system: &SlabSystem) -> Result<FieldState> {
    let fact = SlabFactorization::new(&system.matrix)?;
    let mut x = fact.solve(&system.rhs)?;
    for (i, xi) in x.iter_mut().enumerate() {
        if system.constrained[i] {
            *xi = 0.0;
        }
    }
    Ok(FieldState::from_vector(system.layout, system.t_next, &x))
}

/// Marches `initial` over `n_steps` uniform slabs up to `final_time`, calling
/// `observer` on the initial state and after every step. Returns the final
/// state.
#[allow(clippy::too_many_arguments)]
pub fn run_transient_with(
    params: &PhysParams,
    spaces: &Spaces,
    mats: &SystemMatrices,
    initial: &FieldState,
    final_time: f64,
    n_steps: usize,
    sources: &(impl SourceTerms + ?Sized),
    mut observer: impl FnMut(&FieldState) -> Result<()>,
) -> Result<FieldState> {
    if n_steps == 0 {
        return Err(Error::invalid("need at least one time step"));
    }
    if !(final_time > initial.t) {
        return Err(Error::invalid(format!(
            "final time {final_time} must exceed the initial time {}",
            initial.t
        )));
    }
    let tau = (final_time - initial.t) / n_steps as f64;
    let dofs = mats.dirichlet_dofs();
    let layout = mats.layout();
    let mut constrained = vec![false; layout.total()];
    for &d in &dofs {
        constrained[d] = true;
    }
    let matrix = eliminate(&slab_matrix(params, mats, tau, 1)?, &constrained);
    let fact = SlabFactorization::new(&matrix)?;

    observer(initial)?;
    let mut state = initial.clone();
    let mut loads_prev = SlabLoads::assemble(spaces, sources, state.t);
    for step in 1..=n_steps {
        let t_next = initial.t + step as f64 * tau;
        let loads_next = SlabLoads::assemble(spaces, sources, t_next);
        let mut rhs = slab_rhs(params, mats, &state, tau, &loads_prev, &loads_next);
        for &d in &dofs {
            rhs[d] = 0.0;
        }
        let mut x = fact.solve(&rhs)?;
        for &d in &dofs {
            x[d] = 0.0;
        }
        state = FieldState::from_vector(layout, t_next, &x);
        observer(&state)?;
        loads_prev = loads_next;
    }
    Ok(state)
}

/// Like [`run_transient_with`], collecting the whole trajectory.
pub fn run_transient(
    params: &PhysParams,
    spaces: &Spaces,
    mats: &SystemMatrices,
    initial: &FieldState,
    final_time: f64,
    n_steps: usize,
    sources: &(impl SourceTerms + ?Sized),
) -> Result<Vec<FieldState>> {
    let mut out = Vec::with_capacity(n_steps + 1);
    run_transient_with(params, spaces, mats, initial, final_time, n_steps, sources, |s| {
        out.push(s.clone());
        Ok(())
    })?;
    Ok(out)
}

/// `u^T A u / 2 + (v, psi)^T (N x M) (v, psi) / 2 + c0 p^T Ms p / 2`.
pub fn discrete_energy(state: &FieldState, mats: &SystemMatrices, params: &PhysParams) -> f64 {
    let [[n11, n12], [_, n22]] = params.n_matrix();
    let m = &mats.mass_vec;
    let elastic = mats.stiffness.bilinear(&state.u, &state.u);
    let kinetic = n11 * m.bilinear(&state.v, &state.v)
        + 2.0 * n12 * m.bilinear(&state.v, &state.psi)
        + n22 * m.bilinear(&state.psi, &state.psi);
    let storage = params.c0 * mats.mass_p.bilinear(&state.p, &state.p);
    0.5 * (elastic + kinetic + storage)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fe_space::interpolate_vector;
    use crate::mesh::structured_unit_square;

    fn setup(n: usize, r: usize) -> (PhysParams, Spaces, SystemMatrices) {
        let params = PhysParams::default();
        let spaces = Spaces::equal_order(Arc::new(structured_unit_square(n).unwrap()), r).unwrap();
        let mats = SystemMatrices::assemble(&spaces, &params).unwrap();
        (params, spaces, mats)
    }

    #[test]
    fn params_validation() {
        let p = PhysParams::default();
        p.validate().unwrap();
        assert_eq!(p.n_matrix(), [[1.0, 1.0], [1.0, 1.0]]);
        let bad = PhysParams { rho: 0.5, ..p };
        assert!(matches!(bad.validate(), Err(Error::InvalidParams(_))));
        assert!(PhysParams { poisson: 0.5, ..p }.validate().is_err());
        assert!(PhysParams { c0: -1.0, ..p }.validate().is_err());
        PhysParams { c0: 0.0, alpha: 0.0, ..p }.validate().unwrap();
    }

    #[test]
    fn rejects_bad_step() {
        let (params, spaces, mats) = setup(2, 1);
        let s = FieldState::zeros(mats.layout(), 0.0);
        assert!(matches!(
            assemble_slab(&params, &spaces, &mats, &s, 0.1, &NoSources, 2),
            Err(Error::Unsupported(_))
        ));
        assert!(matches!(
            assemble_slab(&params, &spaces, &mats, &s, 0.0, &NoSources, 1),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn zero_state_stays_zero() {
        let (params, spaces, mats) = setup(3, 1);
        let s = FieldState::zeros(mats.layout(), 0.0);
        let sys = assemble_slab(&params, &spaces, &mats, &s, 0.05, &NoSources, 1).unwrap();
        let sys = apply_dirichlet(sys, &mats.dirichlet_dofs());
        let next = solve_slab(&sys).unwrap();
        assert!(next.to_vector().iter().all(|&v| v == 0.0));
        assert!((next.t - 0.05).abs() < 1e-16);
    }

    #[test]
    fn scalar_reduction_is_crank_nicolson() {
        // one displacement DOF, alpha = rho_f = 0, pressure and memory constrained
        let (m, kk, rho) = (2.0, 5.0, 1.5);
        let mats = SystemMatrices {
            mass_vec: SparseMatrix::from_dense(&[vec![m]]),
            mass_p: SparseMatrix::from_dense(&[vec![1.0]]),
            stiffness: SparseMatrix::from_dense(&[vec![kk]]),
            div: SparseMatrix::from_dense(&[vec![0.0]]),
            disp_dirichlet: vec![],
            pres_dirichlet: vec![],
        };
        let params = PhysParams {
            rho,
            rho_f: 0.0,
            alpha: 0.0,
            ..PhysParams::default()
        };
        let l = mats.layout();
        let prev = FieldState {
            t: 0.0,
            u: vec![0.3],
            v: vec![-0.7],
            p: vec![0.0],
            psi: vec![0.0],
        };
        let tau = 0.1;
        let z = SlabLoads::zeros(l);
        let sys = SlabSystem::new(
            slab_matrix(&params, &mats, tau, 1).unwrap(),
            slab_rhs(&params, &mats, &prev, tau, &z, &z),
            l,
            tau,
        );
        let sys = apply_dirichlet(sys, &[l.p(), l.psi()]);
        let next = solve_slab(&sys).unwrap();

        let w2 = kk / (rho * m);
        let det = 1.0 + tau * tau * w2 / 4.0;
        let a = 1.0 - tau * tau * w2 / 4.0;
        let u = (a * 0.3 + tau * -0.7) / det;
        let v = (-tau * w2 * 0.3 + a * -0.7) / det;
        assert!((next.u[0] - u).abs() < 1e-15);
        assert!((next.v[0] - v).abs() < 1e-15);
    }

    #[test]
    fn dirichlet_elimination() {
        let a = SparseMatrix::from_dense(&[
            vec![4.0, 1.0, 0.5],
            vec![1.0, 3.0, 0.2],
            vec![0.5, 0.2, 2.0],
        ]);
        let layout = BlockLayout { nu: 0, np: 3 };
        let sys = SlabSystem::new(a.clone(), vec![1.0, 2.0, 3.0], layout, 1.0);
        let once = apply_dirichlet(sys, &[1]);
        assert!(once.matrix.is_symmetric(0.0));
        assert_eq!(once.matrix.get(1, 1), 1.0);
        assert_eq!(once.matrix.get(0, 1), 0.0);
        let twice = apply_dirichlet(once.clone(), &[1]);
        assert_eq!(twice.matrix, once.matrix);
        assert_eq!(twice.rhs, once.rhs);
        let x = solve_slab(&once).unwrap();
        let sol = x.to_vector();
        assert_eq!(sol[1], 0.0);
        let r = once.matrix.mul_vec(&sol);
        assert_eq!(once.rhs[1] - r[1], 0.0);

        let all = apply_dirichlet(SlabSystem::new(a, vec![1.0, 2.0, 3.0], layout, 1.0), &[0, 1, 2]);
        assert_eq!(all.matrix, SparseMatrix::identity(3));
        assert!(solve_slab(&all).unwrap().to_vector().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_solve_returns_rhs() {
        let f = SlabFactorization::new(&SparseMatrix::identity(4)).unwrap();
        assert_eq!(f.solve(&[1.0, -2.0, 3.0, 0.5]).unwrap(), vec![1.0, -2.0, 3.0, 0.5]);
    }

    #[test]
    fn singular_matrix_reports_failure() {
        let a = SparseMatrix::from_dense(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        let out = SlabFactorization::new(&a).and_then(|f| f.solve(&[1.0, 0.0]));
        assert!(matches!(out, Err(Error::SolverFailure { .. })));
    }

    #[test]
    fn energy_examples() {
        let (params, spaces, mats) = setup(3, 1);
        let l = mats.layout();
        assert_eq!(discrete_energy(&FieldState::zeros(l, 0.0), &mats, &params), 0.0);
        let mut s = FieldState::zeros(l, 0.0);
        s.u = interpolate_vector(|_, _| [1.0, -0.5], &spaces.disp);
        assert!(discrete_energy(&s, &mats, &params).abs() < 1e-12);

        // N = [[1,1],[1,1]] makes the kinetic part (v + psi)^T M (v + psi) / 2
        let mut s = FieldState::zeros(l, 0.0);
        s.v = interpolate_vector(|x, y| [x * y, 1.0 - x], &spaces.disp);
        s.psi = interpolate_vector(|x, _| [0.3, x * x], &spaces.disp);
        let sum: Vec<f64> = s.v.iter().zip(&s.psi).map(|(a, b)| a + b).collect();
        let expect = 0.5 * mats.mass_vec.bilinear(&sum, &sum);
        assert!((discrete_energy(&s, &mats, &params) - expect).abs() < 1e-14);
    }

    #[test]
    fn velocity_relation_holds_algebraically() {
        let (params, spaces, mats) = setup(4, 1);
        let mut init = FieldState::zeros(mats.layout(), 0.0);
        let bump = |x: f64, y: f64| x * (1.0 - x) * y * (1.0 - y);
        init.v = interpolate_vector(|x, y| [bump(x, y), -bump(x, y)], &spaces.disp);
        let traj = run_transient(&params, &spaces, &mats, &init, 0.1, 4, &NoSources).unwrap();
        assert_eq!(traj.len(), 5);
        let tau = 0.025;
        for w in traj.windows(2) {
            for i in 0..w[0].u.len() {
                let lhs = w[1].u[i] - w[0].u[i];
                let rhs = 0.5 * tau * (w[1].v[i] + w[0].v[i]);
                assert!((lhs - rhs).abs() < 1e-10);
            }
        }
    }
}
