//! Test oracles shared by the integration targets.
#![allow(dead_code)]

use biotallard::manufactured::ManufacturedCase;
use biotallard::time_rules::{gauss_rule, project_pkm1, TimePoly};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 5e-3;

/// Fourth-order central first derivative.
pub fn d1(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h)
}

/// Fourth-order central second derivative.
pub fn d2(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (-f(x - 2.0 * h) + 16.0 * f(x - h) - 30.0 * f(x) + 16.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h * h)
}

/// Strong residuals `(mechanics, flow, memory)` of the exact fields against
/// the closed-form sources, with every derivative taken by finite differences
/// of the exact field evaluators.
pub fn fd_residuals(case: &ManufacturedCase, x: f64, y: f64, t: f64) -> ([f64; 2], f64, [f64; 2]) {
    let h = FD_STEP;
    let c = *case.params();
    let lame = c.elasticity().unwrap();
    let (lam, mu) = (lame.lambda, lame.mu);
    let u = |i: usize, x: f64, y: f64| case.u(x, y, t)[i];

    // div(lambda tr(eps) I + 2 mu eps), expanded in second derivatives of u
    let uxx = |i| d2(|s| u(i, s, y), x, h);
    let uyy = |i| d2(|s| u(i, x, s), y, h);
    let uxy = |i| d1(|s| d1(|r| u(i, r, s), x, h), y, h);
    let div_stress = [
        (lam + 2.0 * mu) * uxx(0) + mu * uyy(0) + (lam + mu) * uxy(1),
        (lam + 2.0 * mu) * uyy(1) + mu * uxx(1) + (lam + mu) * uxy(0),
    ];
    let grad_p = [d1(|s| case.p(s, y, t), x, h), d1(|s| case.p(x, s, t), y, h)];
    let (f_u, g_p, f_psi) = case.eval_sources(x, y, t);

    let mech = [0, 1].map(|i| {
        c.rho * d1(|s| case.v(x, y, s)[i], t, h) - div_stress[i]
            + c.alpha * grad_p[i]
            + c.rho_f * d1(|s| case.psi(x, y, s)[i], t, h)
            - f_u[i]
    });
    let div = |field: &dyn Fn(f64, f64) -> [f64; 2]| d1(|s| field(s, y)[0], x, h) + d1(|s| field(x, s)[1], y, h);
    let flow = c.c0 * d1(|s| case.p(x, y, s), t, h)
        + c.alpha * div(&|a, b| case.v(a, b, t))
        + div(&|a, b| case.psi(a, b, t))
        - g_p;
    let de = c.d1 * c.eta_k;
    let memory = [0, 1].map(|i| {
        c.rho_f * c.c1 * c.formation_factor * d1(|s| case.psi(x, y, s)[i], t, h)
            + c.rho_f * c.formation_factor * case.psi(x, y, t)[i]
            + de * grad_p[i]
            + c.rho_f * de * d1(|s| case.v(x, y, s)[i], t, h)
            - f_psi[i]
    });
    (mech, flow, memory)
}

/// Largest FD residual over `count` seeded random points in `(0,1)^2 x (0, 0.1]`.
pub fn max_fd_residual(case: &ManufacturedCase, count: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..count {
        let (x, y, t) = (rng.gen::<f64>(), rng.gen::<f64>(), rng.gen_range(0.0..0.1));
        let (m, f, p) = fd_residuals(case, x, y, t);
        for r in [m[0], m[1], f, p[0], p[1]] {
            worst = worst.max(r.abs());
        }
    }
    worst
}

/// Largest `|Pi^{k-1} w - w|` at the Gauss nodes over `count` random
/// degree-`k` polynomials on random intervals, `k` cycling through 1..=3.
pub fn gauss_node_projection_defect(count: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for i in 0..count {
        let k = 1 + i % 3;
        let t0 = rng.gen_range(-1.0..1.0);
        let t1 = t0 + rng.gen_range(0.05..2.0);
        worst = worst.max(projection_defect(k, t0, t1, |_| rng.gen_range(-1.0..1.0)));
    }
    worst
}

pub fn projection_defect(k: usize, t0: f64, t1: f64, mut coeff: impl FnMut(usize) -> f64) -> f64 {
    let c: Vec<f64> = (0..=k).map(&mut coeff).collect();
    let w = |t: f64| c.iter().rev().fold(0.0, |acc, &a| acc * t + a);
    let poly = TimePoly::interpolate(t0, t1, k, w).unwrap();
    let proj = project_pkm1(&poly, k).unwrap();
    let nodes = gauss_rule(k).unwrap().map(t0, t1).unwrap().nodes;
    nodes
        .iter()
        .map(|&t| (proj.eval(t).unwrap() - poly.eval(t).unwrap()).abs())
        .fold(0.0, f64::max)
}
