mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use biotallard::error_study::{measure_errors, run_convergence_study};
use biotallard::kernel_oracle::{default_dts, equivalence_report, KernelProblem};
use biotallard::manufactured::ManufacturedCase;
use biotallard::slab_solver::{discrete_energy, run_transient_with, FieldState, NoSources, SystemMatrices};
use biotallard::time_rules::{gauss_lobatto_rule, gauss_rule, TimeRule, MAX_K};
use biotallard::vtk::write_vtk;
use clap::{Parser, Subcommand};

use config::{Case, Element, Format, RunConfig};

#[derive(Parser)]
#[command(name = "biotallard", version, about = "Space-time finite elements for the dynamic Biot-Allard system")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the simultaneous space-time refinement study.
    Converge {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        element: Option<Element>,
        #[arg(long)]
        r: Option<usize>,
        #[arg(long)]
        levels: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a single transient simulation.
    Solve {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Write one VTK file per time step.
        #[arg(long)]
        vtk: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the exactness table of the Gauss and Gauss-Lobatto rules.
    Quadcheck {
        #[arg(long, default_value_t = 5)]
        max_k: usize,
    },
    /// Compare the memory ODE with the exponential-kernel convolution.
    Oracle {
        #[arg(long, default_value_t = 4)]
        levels: usize,
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
}

/// Failure classes with their process exit codes.
#[derive(Debug)]
enum Failure {
    Config(String),
    Solver(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Runtime(_) => 1,
            Failure::Config(_) => 2,
            Failure::Solver(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Solver(m) | Failure::Runtime(m) => m,
        }
    }
}

impl From<biotallard::Error> for Failure {
    fn from(e: biotallard::Error) -> Self {
        use biotallard::Error as E;
        match e {
            E::SolverFailure { .. } => Failure::Solver(e.to_string()),
            E::InvalidArgument(_) | E::InvalidParams(_) | E::Unsupported(_) => Failure::Config(e.to_string()),
            E::Io(_) => Failure::Runtime(e.to_string()),
        }
    }
}

fn io(path: &Path) -> impl Fn(std::io::Error) -> Failure + '_ {
    move |e| Failure::Runtime(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io(dir))?;
    }
    fs::write(path, contents).map_err(io(path))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn converge(
    config: Option<PathBuf>,
    element: Option<Element>,
    r: Option<usize>,
    levels: Option<usize>,
    out: Option<PathBuf>,
) -> Result<(), Failure> {
    let mut cfg = RunConfig::load(config.as_deref()).map_err(Failure::Config)?;
    if let Some(e) = element {
        cfg.discretization.element = e;
    }
    if let Some(r) = r {
        cfg.discretization.r = r;
    }
    if let Some(l) = levels {
        cfg.study.levels = l;
    }
    if let Some(o) = out {
        cfg.output.directory = o;
    }
    cfg.validate().map_err(Failure::Config)?;
    let dir = cfg.output.directory.clone();
    let (report, failure) = match run_convergence_study(&cfg.study_config()) {
        Ok(r) => (r, None),
        Err(f) => (f.partial, Some(f.source)),
    };
    // partial results are still written so a failed level can be inspected
    if cfg.output.wants(Format::Csv) {
        write_file(&dir.join("convergence.csv"), &report.to_csv())?;
    }
    let md = report.to_markdown();
    if cfg.output.wants(Format::Md) {
        write_file(&dir.join("convergence.md"), &md)?;
    }
    println!("{md}");
    match failure {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

fn solve(config: Option<PathBuf>, vtk: bool, out: Option<PathBuf>) -> Result<(), Failure> {
    let mut cfg = RunConfig::load(config.as_deref()).map_err(Failure::Config)?;
    if let Some(o) = out {
        cfg.output.directory = o;
    }
    let steps = cfg.solve_steps().map_err(Failure::Config)?;
    let d = &cfg.discretization;
    let params = cfg.physics.params();
    let spaces = d.element_choice().spaces(d.n)?;
    let mats = SystemMatrices::assemble(&spaces, &params)?;
    let case = ManufacturedCase::new(params)?;
    let dir = cfg.output.directory.clone();
    let write_vtk_files = vtk || cfg.output.wants(Format::Vtk);
    if write_vtk_files {
        fs::create_dir_all(&dir).map_err(io(&dir))?;
    }

    let mut history = String::from("step,t,energy\n");
    let mut step = 0usize;
    let observer = |s: &FieldState| -> biotallard::Result<()> {
        history.push_str(&format!("{step},{},{}\n", s.t, discrete_energy(s, &mats, &params)));
        if write_vtk_files {
            write_vtk(&dir.join(format!("fields_{step:04}.vtk")), &spaces, s)?;
        }
        step += 1;
        Ok(())
    };
    let last = match d.case {
        Case::Manufactured => {
            let init = case.initial_state(&spaces);
            run_transient_with(&params, &spaces, &mats, &init, d.final_time, steps, &case, observer)?
        }
        Case::Zero => {
            let init = FieldState::zeros(spaces.layout(), 0.0);
            run_transient_with(&params, &spaces, &mats, &init, d.final_time, steps, &NoSources, observer)?
        }
    };
    let label = d.element_choice().label();
    println!("{label}, n = {}, {steps} steps of tau = {} to t = {}", d.n, d.tau, last.t);
    if write_vtk_files {
        println!("wrote {} VTK files to {}", steps + 1, dir.display());
    }
    if cfg.output.wants(Format::Csv) {
        write_file(&dir.join("energy.csv"), &history)?;
    }
    if d.case == Case::Manufactured {
        let e = measure_errors(&case, &spaces, &last)?;
        println!(
            "errors at t = {}: grad u {:e}, v {:e}, p {:e}, psi {:e}, energy norm {:e}",
            last.t, e.grad_u, e.v, e.p, e.psi, e.energy
        );
    }
    Ok(())
}

fn rule_defect(rule: &TimeRule, degree: usize) -> f64 {
    let exact = if degree % 2 == 0 { 2.0 / (degree as f64 + 1.0) } else { 0.0 };
    (rule.integrate(|t| t.powi(degree as i32)) - exact).abs()
}

fn quadcheck(max_k: usize) -> Result<(), Failure> {
    if max_k == 0 || max_k > MAX_K {
        return Err(Failure::Config(format!("--max-k must be in 1..={MAX_K}, got {max_k}")));
    }
    println!("{:>3} {:>13} {:>6} {:>10} {:>12} {:>14}", "k", "rule", "points", "exactness", "max defect", "defect at 2k");
    let mut ok = true;
    for k in 1..=max_k {
        for (name, rule) in [("gauss", gauss_rule(k)?), ("gauss-lobatto", gauss_lobatto_rule(k)?)] {
            let worst = (0..=rule.exactness()).map(|d| rule_defect(&rule, d)).fold(0.0, f64::max);
            let beyond = rule_defect(&rule, 2 * k);
            ok &= worst <= 1e-13 && beyond > 1e-10;
            println!(
                "{k:>3} {name:>13} {:>6} {:>10} {worst:>12.2e} {beyond:>14.2e}",
                rule.len(),
                rule.exactness()
            );
        }
    }
    if ok {
        Ok(())
    } else {
        Err(Failure::Runtime("a rule failed its exactness check".into()))
    }
}

fn oracle(levels: usize, out: &Path) -> Result<(), Failure> {
    if levels == 0 || levels > 12 {
        return Err(Failure::Config(format!("--levels must be in 1..=12, got {levels}")));
    }
    let dts = default_dts(levels);
    let cases = [
        ("zero", KernelProblem::unit(1.0, |_| 0.0)),
        ("constant", KernelProblem::unit(0.0, |_| 1.0)),
        ("linear", KernelProblem::unit(0.0, |t| t)),
    ];
    for (name, problem) in &cases {
        let report = equivalence_report(problem, &dts)?;
        let order = report.fitted_order.map(|o| format!("{o:.4}")).unwrap_or_else(|| "-".into());
        println!("forcing {name}: fitted order {order}");
        for (dt, d) in report.dts.iter().zip(&report.discrepancies) {
            println!("  dt = {dt:<10} max discrepancy {d:.6e}");
        }
        write_file(&out.join(format!("kernel_{name}.csv")), &report.to_csv())?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Converge {
            config,
            element,
            r,
            levels,
            out,
        } => converge(config, element, r, levels, out),
        Command::Solve { config, vtk, out } => solve(config, vtk, out),
        Command::Quadcheck { max_k } => quadcheck(max_k),
        Command::Oracle { levels, out } => oracle(levels, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use biotallard::error_study::ElementChoice;

    #[test]
    fn exit_codes_follow_error_class() {
        let solver = biotallard::Error::SolverFailure {
            message: "singular".into(),
            relative_residual: 1.0,
            size: 3,
        };
        assert_eq!(Failure::from(solver).code(), 3);
        assert_eq!(Failure::from(biotallard::Error::InvalidParams("x".into())).code(), 2);
        assert_eq!(Failure::from(biotallard::Error::Unsupported("k".into())).code(), 2);
    }

    #[test]
    fn element_choice_from_flags() {
        let mut cfg = RunConfig::default();
        cfg.discretization.element = Element::TaylorHood;
        assert_eq!(cfg.discretization.element_choice(), ElementChoice::TaylorHood { r: 1 });
    }
}
