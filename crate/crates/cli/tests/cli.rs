use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_biotallard"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("run.toml");
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn converge_single_level_has_empty_eoc_columns() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["converge", "--levels", "1", "--out", "res"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("res/convergence.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "level,n,tau,h,err_grad_u,err_v,err_p,err_psi,err_energy,eoc_grad_u,eoc_v,eoc_p,eoc_psi"
    );
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("0,4,0.05,"));
    assert!(lines[1].ends_with(",,,,"));
    let md = fs::read_to_string(dir.path().join("res/convergence.md")).unwrap();
    assert!(md.contains("equal order P1"));
}

#[test]
fn converge_taylor_hood_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[study]\nlevels = 2\n[output]\nformats = [\"csv\"]\n");
    let a = run(&["converge", "--config", &cfg, "--element", "taylor-hood", "--out", "a"], dir.path());
    let b = run(&["converge", "--config", &cfg, "--element", "taylor-hood", "--out", "b"], dir.path());
    assert!(a.status.success() && b.status.success());
    assert!(stdout(&a).contains("Taylor-Hood P2/P1"));
    let ca = fs::read(dir.path().join("a/convergence.csv")).unwrap();
    let cb = fs::read(dir.path().join("b/convergence.csv")).unwrap();
    assert_eq!(ca, cb);
    assert!(!dir.path().join("a/convergence.md").exists());
}

#[test]
fn solve_writes_one_vtk_file_per_step() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[discretization]\nn = 8\ntau = 0.025\nfinal_time = 0.1\n[output]\ndirectory = \"vtk\"\nformats = []\n",
    );
    let o = run(&["solve", "--config", &cfg, "--vtk"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut names: Vec<String> = fs::read_dir(dir.path().join("vtk"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(names, ["fields_0000.vtk", "fields_0001.vtk", "fields_0002.vtk", "fields_0003.vtk", "fields_0004.vtk"]);
    assert!(stdout(&o).contains("errors at t = 0.1"));
}

#[test]
fn solve_without_vtk_writes_no_field_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[discretization]\nn = 4\n[output]\ndirectory = \"out\"\nformats = [\"csv\"]\n");
    let o = run(&["solve", "--config", &cfg], dir.path());
    assert!(o.status.success());
    let files: Vec<String> = fs::read_dir(dir.path().join("out"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert_eq!(files, ["energy.csv"]);
}

#[test]
fn zero_case_produces_zero_fields() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[discretization]\nn = 4\ncase = \"zero\"\n[output]\ndirectory = \"z\"\nformats = [\"vtk\"]\n",
    );
    let o = run(&["solve", "--config", &cfg], dir.path());
    assert!(o.status.success());
    let text = fs::read_to_string(dir.path().join("z/fields_0004.vtk")).unwrap();
    let data = text.split_once("POINT_DATA").unwrap().1;
    let values: Vec<f64> = data
        .lines()
        .skip(1)
        .filter(|l| !l.starts_with(|c: char| c.is_ascii_alphabetic()))
        .flat_map(|l| l.split_whitespace().map(|v| v.parse::<f64>().unwrap()))
        .collect();
    // 25 vertices: three 3-component vectors and one scalar each
    assert_eq!(values.len(), 25 * 10);
    assert!(values.iter().all(|&v| v == 0.0));
}

#[test]
fn config_errors_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[physics]\nrho = 1.0\nbogus = 3\n");
    let o = run(&["solve", "--config", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bogus"));

    let cfg = write_config(dir.path(), "[physics]\npoisson = 0.5\n");
    assert_eq!(run(&["converge", "--config", &cfg], dir.path()).status.code(), Some(2));

    let cfg = write_config(dir.path(), "[discretization]\ntau = 0.03\n");
    assert_eq!(run(&["solve", "--config", &cfg], dir.path()).status.code(), Some(2));

    let missing = run(&["solve", "--config", "nope.toml"], dir.path());
    assert_eq!(missing.status.code(), Some(2));
    assert_eq!(run(&["converge", "--levels", "9"], dir.path()).status.code(), Some(2));
}

#[test]
fn quadcheck_prints_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["quadcheck", "--max-k", "3"], dir.path());
    assert!(o.status.success());
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 1 + 2 * 3);
    assert!(out.contains("gauss-lobatto"));
    assert_eq!(run(&["quadcheck", "--max-k", "99"], dir.path()).status.code(), Some(2));
}

#[test]
fn oracle_writes_kernel_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["oracle", "--levels", "4", "--out", "k"], dir.path());
    assert!(o.status.success());
    let csv = fs::read_to_string(dir.path().join("k/kernel_linear.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("dt,max_discrepancy,fitted_order"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 4);
    assert!((rows[0][2] - 2.0).abs() < 0.2);
}
