//! Scalar check that the local memory ODE reproduces the exponential
//! relaxation kernel.
//!
//! `c1 rho_f psi' + rho_f psi = (d1 eta_k / F) g` is marched with
//! Crank-Nicolson and compared against the convolution
//! `psi(t) = e^{-t/c1} psi0 + a \int_0^t e^{-(t-s)/c1} g(s) ds`,
//! `a = d1 eta_k / (F c1 rho_f)`, evaluated by composite Simpson.

use std::fmt;
use std::fmt::Write as _;
use std::sync::Arc;

use crate::error_study::fitted_order;
use crate::{Error, Result};

pub type Forcing = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct KernelProblem {
    pub c1: f64,
    pub d1: f64,
    pub eta_k: f64,
    pub formation_factor: f64,
    pub rho_f: f64,
    pub psi0: f64,
    pub final_time: f64,
    pub forcing: Forcing,
}

impl fmt::Debug for KernelProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KernelProblem")
            .field("c1", &self.c1)
            .field("d1", &self.d1)
            .field("eta_k", &self.eta_k)
            .field("formation_factor", &self.formation_factor)
            .field("rho_f", &self.rho_f)
            .field("psi0", &self.psi0)
            .field("final_time", &self.final_time)
            .finish_non_exhaustive()
    }
}

impl KernelProblem {
    /// Unit coefficients on `[0, 1]` with the given forcing and `psi0`.
    pub fn unit(psi0: f64, forcing: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            c1: 1.0,
            d1: 1.0,
            eta_k: 1.0,
            formation_factor: 1.0,
            rho_f: 1.0,
            psi0,
            final_time: 1.0,
            forcing: Arc::new(forcing),
        }
    }

    fn validate(&self) -> Result<()> {
        let positive = [
            ("c1", self.c1),
            ("d1", self.d1),
            ("eta_k", self.eta_k),
            ("F", self.formation_factor),
            ("rho_f", self.rho_f),
            ("final time", self.final_time),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParams(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Kernel amplitude `a`.
    pub fn amplitude(&self) -> f64 {
        self.d1 * self.eta_k / (self.formation_factor * self.c1 * self.rho_f)
    }
}

/// Crank-Nicolson trajectory at `t_j = j dt`; `dt` must divide the final time.
pub fn ade_march(problem: &KernelProblem, dt: f64) -> Result<Vec<(f64, f64)>> {
    problem.validate()?;
    if !(dt > 0.0) {
        return Err(Error::invalid(format!("dt must be positive, got {dt}")));
    }
    let steps = (problem.final_time / dt).round() as usize;
    if steps == 0 || (steps as f64 * dt - problem.final_time).abs() > 1e-9 * problem.final_time {
        return Err(Error::invalid(format!(
            "dt = {dt} does not divide final time {}",
            problem.final_time
        )));
    }
    let lead = problem.c1 * problem.rho_f;
    let rhs_scale = problem.d1 * problem.eta_k / problem.formation_factor;
    let half = 0.5 * dt * problem.rho_f;
    let g = &problem.forcing;
    let mut out = Vec::with_capacity(steps + 1);
    let mut psi = problem.psi0;
    out.push((0.0, psi));
    for j in 0..steps {
        let (t0, t1) = (j as f64 * dt, (j + 1) as f64 * dt);
        let rhs = (lead - half) * psi + 0.5 * dt * rhs_scale * (g(t0) + g(t1));
        psi = rhs / (lead + half);
        out.push((t1, psi));
    }
    Ok(out)
}

/// Number of Simpson panels per unit time (doubled for short intervals).
pub const SIMPSON_PANELS: usize = 10_000;

/// Convolution representation of psi at time `t`.
pub fn convolution_eval(problem: &KernelProblem, t: f64) -> Result<f64> {
    problem.validate()?;
    if !(t >= 0.0) {
        return Err(Error::invalid(format!("time must be nonnegative, got {t}")));
    }
    let decay = (-t / problem.c1).exp() * problem.psi0;
    if t == 0.0 {
        return Ok(decay);
    }
    let m = SIMPSON_PANELS.max((SIMPSON_PANELS as f64 * t).ceil() as usize);
    let m = m + m % 2;
    let h = t / m as f64;
    let g = &problem.forcing;
    let f = |s: f64| (-(t - s) / problem.c1).exp() * g(s);
    let mut sum = f(0.0) + f(t);
    for i in 1..m {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(i as f64 * h);
    }
    Ok(decay + problem.amplitude() * sum * h / 3.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceReport {
    pub dts: Vec<f64>,
    /// Max over the time grid of `|psi_ade - psi_conv|`.
    pub discrepancies: Vec<f64>,
    /// Pairwise orders between consecutive step sizes.
    pub orders: Vec<f64>,
    /// Least-squares order over all step sizes; `None` for a single level.
    pub fitted_order: Option<f64>,
}

impl EquivalenceReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("dt,max_discrepancy,fitted_order\n");
        let order = self.fitted_order.map(|o| o.to_string()).unwrap_or_default();
        for (dt, d) in self.dts.iter().zip(&self.discrepancies) {
            let _ = writeln!(out, "{dt},{d},{order}");
        }
        out
    }
}

pub fn equivalence_report(problem: &KernelProblem, dts: &[f64]) -> Result<EquivalenceReport> {
    if dts.is_empty() {
        return Err(Error::invalid("need at least one step size"));
    }
    let mut discrepancies = Vec::with_capacity(dts.len());
    for &dt in dts {
        let mut worst = 0.0f64;
        for (t, psi) in ade_march(problem, dt)? {
            worst = worst.max((psi - convolution_eval(problem, t)?).abs());
        }
        discrepancies.push(worst);
    }
    let orders = dts
        .windows(2)
        .zip(discrepancies.windows(2))
        .map(|(h, e)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln())
        .collect();
    let fitted_order = if dts.len() > 1 {
        Some(fitted_order(dts, &discrepancies)?)
    } else {
        None
    };
    Ok(EquivalenceReport {
        dts: dts.to_vec(),
        discrepancies,
        orders,
        fitted_order,
    })
}

/// `dt = 0.1 / 2^l` for `l = 0..levels`.
pub fn default_dts(levels: usize) -> Vec<f64> {
    (0..levels).map(|l| 0.1 / (1u64 << l) as f64).collect()
}
