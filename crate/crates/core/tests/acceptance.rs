//! Acceptance suite: one PASS/FAIL line per criterion, then a single
//! assertion that every criterion passed.

mod common;

use std::sync::Arc;

use biotallard::error_study::{
    fitted_order, format_sig, run_convergence_study, run_manufactured, ConvergenceReport, ElementChoice, StudyConfig,
};
use biotallard::fe_space::{interpolate_nodal, interpolate_vector};
use biotallard::kernel_oracle::{ade_march, default_dts, equivalence_report, KernelProblem};
use biotallard::manufactured::ManufacturedCase;
use biotallard::mesh::structured_unit_square;
use biotallard::slab_solver::{discrete_energy, run_transient, FieldState, NoSources, PhysParams, Spaces, SystemMatrices};
use biotallard::time_rules::{gauss_lobatto_rule, gauss_rule};

struct Outcome {
    id: usize,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn record(out: &mut Vec<Outcome>, id: usize, name: &'static str, pass: bool, detail: String) {
    println!("[{}] criterion {id}: {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    out.push(Outcome { id, name, pass, detail });
}

fn eoc_check(report: &ConvergenceReport, expected: [f64; 4], tol: f64) -> (bool, String) {
    let got = report.finest_eoc().expect("five levels give four EOC rows");
    let pass = got.iter().zip(expected).all(|(g, e)| (g - e).abs() <= tol);
    let detail = format!(
        "finest EOCs ({:.2}, {:.2}, {:.2}, {:.2}) vs ({:.2}, {:.2}, {:.2}, {:.2}) +-{tol}",
        got[0], got[1], got[2], got[3], expected[0], expected[1], expected[2], expected[3]
    );
    (pass, detail)
}

fn study(element: ElementChoice) -> ConvergenceReport {
    run_convergence_study(&StudyConfig::new(element)).unwrap_or_else(|e| panic!("{e}"))
}

fn source_oracle(out: &mut Vec<Outcome>) -> bool {
    let case = ManufacturedCase::new(PhysParams::default()).unwrap();
    let worst = common::max_fd_residual(&case, 100, 2024);
    let pass = worst <= 1e-6;
    record(out, 7, "manufactured-source oracle", pass, format!("max FD residual {worst:.2e} <= 1e-6"));
    pass
}

fn study_p1(out: &mut Vec<Outcome>, gate: bool) {
    let name = "refinement study EOCs, equal order P1";
    if !gate {
        return record(out, 1, name, false, "skipped: source oracle failed".into());
    }
    let report = study(ElementChoice::EqualOrder { r: 1 });
    let (pass, detail) = eoc_check(&report, [0.99, 1.99, 2.00, 1.99], 0.15);
    record(out, 1, name, pass, detail);
    let reference = [0.0238241, 0.00179916, 7.78498e-05, 0.000684646];
    let finest = report.rows.last().unwrap().errors.columns();
    let ratios: Vec<String> = finest
        .iter()
        .zip(reference)
        .map(|(g, p)| {
            let r = g / p;
            let flag = if (1.0 / 3.0..=3.0).contains(&r) { "" } else { " (outside 3x)" };
            format!("{} [x{r:.2}{flag}]", format_sig(*g, 6))
        })
        .collect();
    println!("       advisory: finest magnitudes {}", ratios.join(", "));
}

fn study_p2(out: &mut Vec<Outcome>, gate: bool) {
    let name = "refinement study EOCs, equal order P2";
    if !gate {
        return record(out, 2, name, false, "skipped: source oracle failed".into());
    }
    let (pass, detail) = eoc_check(&study(ElementChoice::EqualOrder { r: 2 }), [2.00, 2.06, 1.99, 2.00], 0.2);
    record(out, 2, name, pass, detail);
}

fn study_taylor_hood(out: &mut Vec<Outcome>, gate: bool) {
    let name = "refinement study EOCs, Taylor-Hood P2/P1";
    if !gate {
        return record(out, 3, name, false, "skipped: source oracle failed".into());
    }
    let (pass, detail) = eoc_check(&study(ElementChoice::TaylorHood { r: 1 }), [2.00, 2.15, 2.00, 1.98], 0.2);
    record(out, 3, name, pass, detail);
}

fn energy(out: &mut Vec<Outcome>) {
    use std::f64::consts::PI;
    let params = PhysParams::default();
    let spaces = Spaces::equal_order(Arc::new(structured_unit_square(8).unwrap()), 1).unwrap();
    let mats = SystemMatrices::assemble(&spaces, &params).unwrap();
    let b = |x: f64, y: f64| (PI * x).sin() * (PI * y).sin();
    let mut init = FieldState::zeros(spaces.layout(), 0.0);
    init.u = interpolate_vector(|x, y| [b(x, y), -0.5 * b(x, y) * x], &spaces.disp);
    init.v = interpolate_vector(|x, y| [0.3 * b(x, y) * y, b(x, y)], &spaces.disp);
    init.psi = interpolate_vector(|x, y| [-b(x, y), 0.7 * b(x, y)], &spaces.disp);
    init.p = interpolate_nodal(|x, y| b(x, y) * (x - y), &spaces.pres);
    let n = spaces.disp.dof_count();
    for &d in spaces.disp.dirichlet_dofs() {
        for f in [&mut init.u, &mut init.v, &mut init.psi] {
            f[d] = 0.0;
            f[n + d] = 0.0;
        }
    }
    for &d in spaces.pres.dirichlet_dofs() {
        init.p[d] = 0.0;
    }
    let traj = run_transient(&params, &spaces, &mats, &init, 0.32, 32, &NoSources).unwrap();
    let e: Vec<f64> = traj.iter().map(|s| discrete_energy(s, &mats, &params)).collect();
    let worst = e.windows(2).map(|w| (w[1] - w[0]) / e[0]).fold(f64::NEG_INFINITY, f64::max);
    let pass = e[0] > 0.0 && worst <= 1e-9;
    record(
        out,
        4,
        "energy stability",
        pass,
        format!("32 steps, E0 = {:.6}, E32 = {:.6}, max relative increase {worst:.2e}", e[0], e[32]),
    );
}

fn time_rules(out: &mut Vec<Outcome>) {
    let mut worst = 0.0f64;
    for k in 1..=5usize {
        for rule in [gauss_rule(k).unwrap(), gauss_lobatto_rule(k).unwrap()] {
            for d in 0..=(2 * k - 1) {
                let exact = if d % 2 == 0 { 2.0 / (d as f64 + 1.0) } else { 0.0 };
                worst = worst.max((rule.integrate(|t| t.powi(d as i32)) - exact).abs());
            }
        }
    }
    let identity = common::gauss_node_projection_defect(1000, 99);
    let pass = worst <= 1e-13 && identity <= 1e-12;
    record(
        out,
        5,
        "time-rule suite",
        pass,
        format!("exactness defect {worst:.1e} (k<=5), projection identity defect {identity:.1e} over 1000 polynomials"),
    );
}

fn kernel(out: &mut Vec<Outcome>) {
    let cases: [(&str, KernelProblem, fn(f64) -> f64); 3] = [
        ("g=0", KernelProblem::unit(1.0, |_| 0.0), |t| (-t).exp()),
        ("g=1", KernelProblem::unit(0.0, |_| 1.0), |t| 1.0 - (-t).exp()),
        ("g=t", KernelProblem::unit(0.0, |t| t), |t| t - 1.0 + (-t).exp()),
    ];
    let dts = default_dts(4);
    let mut pass = true;
    let mut parts = Vec::new();
    for (label, problem, exact) in &cases {
        let report = equivalence_report(problem, &dts).unwrap();
        let order = report.fitted_order.unwrap();
        let closed: Vec<f64> = dts
            .iter()
            .map(|&dt| {
                ade_march(problem, dt)
                    .unwrap()
                    .iter()
                    .map(|&(t, psi)| (psi - exact(t)).abs())
                    .fold(0.0, f64::max)
            })
            .collect();
        let closed_order = fitted_order(&dts, &closed).unwrap();
        let same = closed.iter().zip(&report.discrepancies).all(|(a, b)| (a - b).abs() <= 1e-10);
        pass &= (order - 2.0).abs() <= 0.2 && (closed_order - 2.0).abs() <= 0.2 && same;
        parts.push(format!("{label}: order {order:.3}"));
    }
    record(out, 6, "kernel oracle", pass, parts.join(", "));
}

fn temporal(out: &mut Vec<Outcome>) {
    let params = PhysParams::default();
    let steps = [2usize, 4, 8, 16];
    let errs: Vec<f64> = steps
        .iter()
        .map(|&s| run_manufactured(&params, ElementChoice::EqualOrder { r: 2 }, 64, s, 0.1).unwrap().v)
        .collect();
    let taus: Vec<f64> = steps.iter().map(|&s| 0.1 / s as f64).collect();
    let order = fitted_order(&taus, &errs).unwrap();
    record(
        out,
        8,
        "temporal-order isolation",
        order >= 1.8,
        format!("n=64, r=2, tau 0.05..0.00625: fitted order of v error {order:.3} >= 1.8"),
    );
}

#[test]
fn acceptance_criteria() {
    let mut out = Vec::new();
    let gate = source_oracle(&mut out);
    study_p1(&mut out, gate);
    study_p2(&mut out, gate);
    study_taylor_hood(&mut out, gate);
    energy(&mut out);
    time_rules(&mut out);
    kernel(&mut out);
    temporal(&mut out);
    out.sort_by_key(|o| o.id);
    println!("summary:");
    for o in &out {
        println!("  {} {}: {}", if o.pass { "PASS" } else { "FAIL" }, o.id, o.name);
    }
    let failed: Vec<String> = out.iter().filter(|o| !o.pass).map(|o| format!("{}: {}", o.id, o.detail)).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
