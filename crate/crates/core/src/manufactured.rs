//! Manufactured solution `u = psi = phi (1, 1)`, `p = phi` with
//! `phi = sin(pi t) sin(pi x) sin(pi y)`, and the source terms that make it
//! an exact solution of the first-order system.

use std::f64::consts::PI;

use crate::assembly::ElasticityTensor;
use crate::fe_space::{interpolate_nodal, interpolate_vector};
use crate::slab_solver::{FieldState, PhysParams, SourceTerms, Spaces};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExactField {
    U,
    V,
    P,
    Psi,
    /// Rows are components: `[[du1/dx, du1/dy], [du2/dx, du2/dy]]`.
    GradU,
    GradP,
}

/// `phi` and the partial derivatives the sources need.
#[derive(Debug, Clone, Copy)]
struct Phi {
    val: f64,
    t: f64,
    tt: f64,
    x: f64,
    y: f64,
    xx: f64,
    yy: f64,
    xy: f64,
    tx: f64,
    ty: f64,
}

impl Phi {
    fn at(x: f64, y: f64, t: f64) -> Self {
        let (st, ct) = (PI * t).sin_cos();
        let (sx, cx) = (PI * x).sin_cos();
        let (sy, cy) = (PI * y).sin_cos();
        let pi2 = PI * PI;
        Self {
            val: st * sx * sy,
            t: PI * ct * sx * sy,
            tt: -pi2 * st * sx * sy,
            x: PI * st * cx * sy,
            y: PI * st * sx * cy,
            xx: -pi2 * st * sx * sy,
            yy: -pi2 * st * sx * sy,
            xy: pi2 * st * cx * cy,
            tx: pi2 * ct * cx * sy,
            ty: pi2 * ct * sx * cy,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ManufacturedCase {
    params: PhysParams,
    tensor: ElasticityTensor,
}

impl ManufacturedCase {
    pub fn new(params: PhysParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params,
            tensor: params.elasticity()?,
        })
    }

    pub fn params(&self) -> &PhysParams {
        &self.params
    }

    pub fn phi(x: f64, y: f64, t: f64) -> f64 {
        (PI * t).sin() * (PI * x).sin() * (PI * y).sin()
    }

    pub fn u(&self, x: f64, y: f64, t: f64) -> [f64; 2] {
        let p = Self::phi(x, y, t);
        [p, p]
    }

    pub fn v(&self, x: f64, y: f64, t: f64) -> [f64; 2] {
        let p = PI * (PI * t).cos() * (PI * x).sin() * (PI * y).sin();
        [p, p]
    }

    pub fn p(&self, x: f64, y: f64, t: f64) -> f64 {
        Self::phi(x, y, t)
    }

    pub fn psi(&self, x: f64, y: f64, t: f64) -> [f64; 2] {
        self.u(x, y, t)
    }

    pub fn grad_u(&self, x: f64, y: f64, t: f64) -> [[f64; 2]; 2] {
        let g = self.grad_p(x, y, t);
        [g, g]
    }

    pub fn grad_p(&self, x: f64, y: f64, t: f64) -> [f64; 2] {
        let f = Phi::at(x, y, t);
        [f.x, f.y]
    }

    /// Flattened evaluation of any exact field.
    pub fn eval_exact(&self, field: ExactField, x: f64, y: f64, t: f64) -> Vec<f64> {
        match field {
            ExactField::U => self.u(x, y, t).to_vec(),
            ExactField::V => self.v(x, y, t).to_vec(),
            ExactField::P => vec![self.p(x, y, t)],
            ExactField::Psi => self.psi(x, y, t).to_vec(),
            ExactField::GradU => self.grad_u(x, y, t).concat(),
            ExactField::GradP => self.grad_p(x, y, t).to_vec(),
        }
    }

    /// Strong residuals of the exact fields: `(f_u, g_p, f_psi)`.
    pub fn eval_sources(&self, x: f64, y: f64, t: f64) -> ([f64; 2], f64, [f64; 2]) {
        let f = Phi::at(x, y, t);
        let c = &self.params;
        let (lam, mu) = (self.tensor.lambda, self.tensor.mu);
        let lap = f.xx + f.yy;
        // div C eps(u) = mu lap u + (lambda + mu) grad div u, with u = (phi, phi)
        let div_stress = [
            mu * lap + (lam + mu) * (f.xx + f.xy),
            mu * lap + (lam + mu) * (f.xy + f.yy),
        ];
        let grad_p = [f.x, f.y];
        let mech = [0, 1].map(|i| {
            c.rho * f.tt - div_stress[i] + c.alpha * grad_p[i] + c.rho_f * f.t
        });
        let flow = c.c0 * f.t + c.alpha * (f.tx + f.ty) + (f.x + f.y);
        let de = c.d1 * c.eta_k;
        let memory = [0, 1].map(|i| {
            c.rho_f * c.c1 * c.formation_factor * f.t
                + c.rho_f * c.formation_factor * f.val
                + de * grad_p[i]
                + c.rho_f * de * f.tt
        });
        (mech, flow, memory)
    }

    /// Nodal interpolation of the exact fields at `t = 0`.
    pub fn initial_state(&self, spaces: &Spaces) -> FieldState {
        self.interpolate_state(spaces, 0.0)
    }

    /// Nodal interpolation at time `t`; boundary coefficients are set to
    /// exactly zero (the sine factors only vanish up to rounding there).
    pub fn interpolate_state(&self, spaces: &Spaces, t: f64) -> FieldState {
        let mut s = FieldState {
            t,
            u: interpolate_vector(|x, y| self.u(x, y, t), &spaces.disp),
            v: interpolate_vector(|x, y| self.v(x, y, t), &spaces.disp),
            p: interpolate_nodal(|x, y| self.p(x, y, t), &spaces.pres),
            psi: interpolate_vector(|x, y| self.psi(x, y, t), &spaces.disp),
        };
        let n = spaces.disp.dof_count();
        for &d in spaces.disp.dirichlet_dofs() {
            for field in [&mut s.u, &mut s.v, &mut s.psi] {
                field[d] = 0.0;
                field[n + d] = 0.0;
            }
        }
        for &d in spaces.pres.dirichlet_dofs() {
            s.p[d] = 0.0;
        }
        s
    }
}

impl SourceTerms for ManufacturedCase {
    fn mechanics(&self, x: f64, y: f64, t: f64) -> [f64; 2] {
        self.eval_sources(x, y, t).0
    }
    fn flow(&self, x: f64, y: f64, t: f64) -> f64 {
        self.eval_sources(x, y, t).1
    }
    fn memory(&self, x: f64, y: f64, t: f64) -> [f64; 2] {
        self.eval_sources(x, y, t).2
    }
}
