//! Error norms at the final time, EOC tables and the simultaneous
//! space-time refinement study.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::fe_space::{triangle_quadrature, FeSpace, SpatialQuadrature};
use crate::manufactured::ManufacturedCase;
use crate::mesh::structured_unit_square;
use crate::slab_solver::{run_transient_with, FieldState, PhysParams, Spaces, SystemMatrices};
use crate::{Error, Result};

fn error_quad(space: &FeSpace) -> SpatialQuadrature {
    triangle_quadrature(2 * space.degree() + 4).expect("degree <= 8")
}

/// `||exact - u_h||_{L2}` for a scalar field.
pub fn l2_error(coeffs: &[f64], space: &FeSpace, exact: impl Fn(f64, f64) -> f64) -> f64 {
    let mut sum = 0.0;
    space.for_each_quad_point(coeffs, &error_quad(space), |[x, y], w, v, _| {
        sum += w * (exact(x, y) - v).powi(2);
    });
    sum.sqrt()
}

/// `||exact - u_h||_{L2}` for a component-stacked vector field.
pub fn l2_error_vector(coeffs: &[f64], space: &FeSpace, exact: impl Fn(f64, f64) -> [f64; 2]) -> f64 {
    let n = space.dof_count();
    let quad = error_quad(space);
    let mut sum = 0.0;
    for c in 0..2 {
        space.for_each_quad_point(&coeffs[c * n..(c + 1) * n], &quad, |[x, y], w, v, _| {
            sum += w * (exact(x, y)[c] - v).powi(2);
        });
    }
    sum.sqrt()
}

/// `||grad(exact - u_h)||_{L2}` for a component-stacked vector field; the
/// exact gradient has rows `[d/dx, d/dy]` per component.
pub fn h1_semi_error(
    coeffs: &[f64],
    space: &FeSpace,
    exact_grad: impl Fn(f64, f64) -> [[f64; 2]; 2],
) -> f64 {
    let n = space.dof_count();
    let quad = error_quad(space);
    let mut sum = 0.0;
    for c in 0..2 {
        space.for_each_quad_point(&coeffs[c * n..(c + 1) * n], &quad, |[x, y], w, _, g| {
            let e = exact_grad(x, y)[c];
            sum += w * ((e[0] - g[0]).powi(2) + (e[1] - g[1]).powi(2));
        });
    }
    sum.sqrt()
}

/// `|| N^{1/2} (v - v_h, psi - psi_h) ||`, i.e. the square root of
/// `\int (dv, dpsi)^T N (dv, dpsi)`.
pub fn combined_energy_error(
    v: &[f64],
    psi: &[f64],
    space: &FeSpace,
    params: &PhysParams,
    exact_v: impl Fn(f64, f64) -> [f64; 2],
    exact_psi: impl Fn(f64, f64) -> [f64; 2],
) -> Result<f64> {
    params.check_n_psd()?;
    let [[a, b], [_, d]] = params.n_matrix();
    let n = space.dof_count();
    let quad = error_quad(space);
    let mut sum = 0.0;
    for c in 0..2 {
        let mut dv = Vec::new();
        space.for_each_quad_point(&v[c * n..(c + 1) * n], &quad, |[x, y], w, val, _| {
            dv.push((w, exact_v(x, y)[c] - val));
        });
        let mut q = 0;
        space.for_each_quad_point(&psi[c * n..(c + 1) * n], &quad, |[x, y], _, val, _| {
            let (w, ev) = dv[q];
            let ep = exact_psi(x, y)[c] - val;
            sum += w * (a * ev * ev + 2.0 * b * ev * ep + d * ep * ep);
            q += 1;
        });
    }
    Ok(sum.max(0.0).sqrt())
}

/// Pairwise `log2(e_l / e_{l+1})`.
pub fn eoc(errors: &[f64]) -> Result<Vec<f64>> {
    if let Some(e) = errors.iter().find(|&&e| !(e > 0.0 && e.is_finite())) {
        return Err(Error::invalid(format!("EOC needs positive errors, got {e}")));
    }
    Ok(errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect())
}

/// Least-squares slope of `log(err)` against `log(step)`.
pub fn fitted_order(steps: &[f64], errors: &[f64]) -> Result<f64> {
    if steps.len() != errors.len() || steps.len() < 2 {
        return Err(Error::invalid("order fit needs at least two matching samples"));
    }
    if steps.iter().chain(errors).any(|&v| !(v > 0.0)) {
        return Err(Error::invalid("order fit needs positive samples"));
    }
    let lx: Vec<f64> = steps.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = errors.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementChoice {
    /// Every field in degree `r`.
    EqualOrder { r: usize },
    /// Vector fields in degree `r + 1`, pressure in degree `r`.
    TaylorHood { r: usize },
}

impl ElementChoice {
    pub fn spaces(&self, n: usize) -> Result<Spaces> {
        let mesh = Arc::new(structured_unit_square(n)?);
        match *self {
            ElementChoice::EqualOrder { r } => Spaces::equal_order(mesh, r),
            ElementChoice::TaylorHood { r } => Spaces::taylor_hood(mesh, r),
        }
    }

    pub fn label(&self) -> String {
        match *self {
            ElementChoice::EqualOrder { r } => format!("equal order P{r}"),
            ElementChoice::TaylorHood { r } => format!("Taylor-Hood P{}/P{r}", r + 1),
        }
    }
}

/// Final-time errors of one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelErrors {
    pub grad_u: f64,
    pub v: f64,
    pub p: f64,
    pub psi: f64,
    pub energy: f64,
}

impl LevelErrors {
    pub fn columns(&self) -> [f64; 4] {
        [self.grad_u, self.v, self.p, self.psi]
    }
}

/// Errors of `state` against the manufactured solution at `state.t`.
pub fn measure_errors(case: &ManufacturedCase, spaces: &Spaces, state: &FieldState) -> Result<LevelErrors> {
    let t = state.t;
    let disp = &spaces.disp;
    Ok(LevelErrors {
        grad_u: h1_semi_error(&state.u, disp, |x, y| case.grad_u(x, y, t)),
        v: l2_error_vector(&state.v, disp, |x, y| case.v(x, y, t)),
        p: l2_error(&state.p, &spaces.pres, |x, y| case.p(x, y, t)),
        psi: l2_error_vector(&state.psi, disp, |x, y| case.psi(x, y, t)),
        energy: combined_energy_error(
            &state.v,
            &state.psi,
            disp,
            case.params(),
            |x, y| case.v(x, y, t),
            |x, y| case.psi(x, y, t),
        )?,
    })
}

/// Runs the manufactured problem on an `n x n` mesh with `n_steps` slabs up to
/// `final_time` and returns the errors there.
pub fn run_manufactured(
    params: &PhysParams,
    element: ElementChoice,
    n: usize,
    n_steps: usize,
    final_time: f64,
) -> Result<LevelErrors> {
    let case = ManufacturedCase::new(*params)?;
    let spaces = element.spaces(n)?;
    let mats = SystemMatrices::assemble(&spaces, params)?;
    let init = case.initial_state(&spaces);
    let last = run_transient_with(params, &spaces, &mats, &init, final_time, n_steps, &case, |_| Ok(()))?;
    measure_errors(&case, &spaces, &last)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub element: ElementChoice,
    pub k: usize,
    pub levels: usize,
    pub base_n: usize,
    pub base_tau: f64,
    pub final_time: f64,
    pub params: PhysParams,
}

impl StudyConfig {
    /// Five levels starting at `n = 4`, `tau = 0.05`, up to `T = 0.1`.
    pub fn new(element: ElementChoice) -> Self {
        Self {
            element,
            k: 1,
            levels: 5,
            base_n: 4,
            base_tau: 0.05,
            final_time: 0.1,
            params: PhysParams::default(),
        }
    }

    pub fn with_levels(mut self, levels: usize) -> Self {
        self.levels = levels;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelRow {
    pub level: usize,
    pub n: usize,
    pub tau: f64,
    pub h: f64,
    pub errors: LevelErrors,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub element: ElementChoice,
    pub final_time: f64,
    pub rows: Vec<LevelRow>,
}

/// Study aborted by a failing level; `partial` holds the completed rows.
#[derive(Debug)]
pub struct StudyFailure {
    pub partial: ConvergenceReport,
    pub source: Error,
}

impl std::fmt::Display for StudyFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "convergence study stopped after {} level(s): {}",
            self.partial.rows.len(),
            self.source
        )
    }
}

impl std::error::Error for StudyFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

const MAX_LEVELS: usize = 5;

/// Level `l` uses `n = base_n 2^l` and `tau = base_tau / 2^l`.
pub fn run_convergence_study(config: &StudyConfig) -> Result<ConvergenceReport, StudyFailure> {
    let mut report = ConvergenceReport {
        element: config.element,
        final_time: config.final_time,
        rows: Vec::new(),
    };
    let fail = |report: ConvergenceReport, source| StudyFailure {
        partial: report,
        source,
    };
    if config.k != 1 {
        return Err(fail(report, Error::Unsupported(format!("time order k = {}", config.k))));
    }
    if config.levels == 0 || config.levels > MAX_LEVELS {
        return Err(fail(
            report,
            Error::invalid(format!("levels must be in 1..={MAX_LEVELS}, got {}", config.levels)),
        ));
    }
    for level in 0..config.levels {
        let scale = 1usize << level;
        let n = config.base_n * scale;
        let tau = config.base_tau / scale as f64;
        let steps = (config.final_time / tau).round() as usize;
        if steps == 0 || ((steps as f64 * tau) - config.final_time).abs() > 1e-9 * config.final_time {
            return Err(fail(
                report,
                Error::invalid(format!(
                    "final time {} is not a multiple of tau = {tau}",
                    config.final_time
                )),
            ));
        }
        let run = run_manufactured(&config.params, config.element, n, steps, config.final_time);
        match run {
            Ok(errors) => report.rows.push(LevelRow {
                level,
                n,
                tau,
                h: 2f64.sqrt() / n as f64,
                errors,
            }),
            Err(e) => return Err(fail(report, e)),
        }
    }
    Ok(report)
}

/// `%g`-style formatting with `sig` significant digits.
pub fn format_sig(x: f64, sig: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if exp < -4 || exp >= sig as i32 {
        let s = format!("{:.*e}", sig - 1, x);
        let (mant, e) = s.split_once('e').expect("exponent form");
        let mant = trim_zeros(mant);
        let e: i32 = e.parse().expect("integer exponent");
        format!("{mant}e{}{:02}", if e < 0 { '-' } else { '+' }, e.abs())
    } else {
        let decimals = (sig as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub const CSV_HEADER: &str =
    "level,n,tau,h,err_grad_u,err_v,err_p,err_psi,err_energy,eoc_grad_u,eoc_v,eoc_p,eoc_psi";

impl ConvergenceReport {
    /// EOC per column for every adjacent pair of levels.
    pub fn eocs(&self) -> Vec<[f64; 4]> {
        self.rows
            .windows(2)
            .map(|w| {
                let (a, b) = (w[0].errors.columns(), w[1].errors.columns());
                [0, 1, 2, 3].map(|i| (a[i] / b[i]).log2())
            })
            .collect()
    }

    /// EOCs between the two finest levels.
    pub fn finest_eoc(&self) -> Option<[f64; 4]> {
        self.eocs().last().copied()
    }

    pub fn to_csv(&self) -> String {
        let eocs = self.eocs();
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for (i, row) in self.rows.iter().enumerate() {
            let e = &row.errors;
            let _ = write!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                row.level, row.n, row.tau, row.h, e.grad_u, e.v, e.p, e.psi, e.energy
            );
            match i.checked_sub(1).map(|j| eocs[j]) {
                Some(o) => {
                    let _ = writeln!(out, ",{},{},{},{}", o[0], o[1], o[2], o[3]);
                }
                None => out.push_str(",,,,\n"),
            }
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let eocs = self.eocs();
        let mut out = format!(
            "Errors at t = {} ({})\n\n",
            format_sig(self.final_time, 6),
            self.element.label()
        );
        out.push_str("| tau, h | grad(u - u_h) | EOC | v - v_h | EOC | p - p_h | EOC | psi - psi_h | EOC |\n");
        out.push_str("|---|---|---|---|---|---|---|---|---|\n");
        for (i, row) in self.rows.iter().enumerate() {
            let cols = row.errors.columns();
            let _ = write!(out, "| tau0/2^{0}, h0/2^{0} ", row.level);
            for c in 0..4 {
                let o = match i.checked_sub(1) {
                    Some(j) => format!("{:.2}", eocs[j][c]),
                    None => "-".to_string(),
                };
                let _ = write!(out, "| {} | {} ", format_sig(cols[c], 6), o);
            }
            out.push_str("|\n");
        }
        out
    }
}
