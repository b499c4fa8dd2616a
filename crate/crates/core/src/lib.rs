//! Space-time finite elements for the Biot-Allard poroelastic system with a
//! single exponential memory kernel.
//!
//! The memory convolution is replaced by an auxiliary differential equation
//! for a memory variable `psi`, the system is written in first order form with
//! `v = du/dt`, and it is discretized with continuous Galerkin time stepping
//! (lowest order, equivalent to Crank-Nicolson) and Lagrange elements on
//! triangles.
//!
//! Module map:
//!
//! - [`time_rules`]: Gauss and Gauss-Lobatto rules, temporal interpolation and projection
//! - [`mesh`]: structured triangulations of the unit square
//! - [`fe_space`]: P1/P2 Lagrange spaces, shape functions, triangle quadrature
//! - [`assembly`]: compressed-row matrices and the bilinear forms of the weak form
//! - [`slab_solver`]: per-slab block system, Dirichlet elimination, time marching, energy
//! - [`manufactured`]: manufactured solution and its source terms
//! - [`error_study`]: error norms, EOC tables and the refinement study driver
//! - [`kernel_oracle`]: scalar check that the memory ODE reproduces the exponential kernel
//! - [`vtk`]: legacy VTK output

pub mod assembly;
pub mod error;
pub mod error_study;
pub mod fe_space;
pub mod kernel_oracle;
pub mod manufactured;
pub mod mesh;
pub mod slab_solver;
pub mod time_rules;
pub mod vtk;

pub use error::{Error, Result};
