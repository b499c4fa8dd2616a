//! TOML run configuration. Every section and key is optional; missing values
//! take the defaults of the standard manufactured study.

use std::path::{Path, PathBuf};

use biotallard::error_study::{ElementChoice, StudyConfig};
use biotallard::slab_solver::PhysParams;
use serde::Deserialize;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub physics: Physics,
    pub discretization: Discretization,
    pub study: Study,
    pub output: Output,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Physics {
    pub rho: f64,
    pub rho_f: f64,
    pub c0: f64,
    pub alpha: f64,
    pub c1: f64,
    pub d1: f64,
    pub eta_k: f64,
    #[serde(alias = "F")]
    pub formation_factor: f64,
    #[serde(alias = "E")]
    pub young: f64,
    #[serde(alias = "nu")]
    pub poisson: f64,
}

impl Default for Physics {
    fn default() -> Self {
        let p = PhysParams::default();
        Self {
            rho: p.rho,
            rho_f: p.rho_f,
            c0: p.c0,
            alpha: p.alpha,
            c1: p.c1,
            d1: p.d1,
            eta_k: p.eta_k,
            formation_factor: p.formation_factor,
            young: p.young,
            poisson: p.poisson,
        }
    }
}

impl Physics {
    pub fn params(&self) -> PhysParams {
        PhysParams {
            rho: self.rho,
            rho_f: self.rho_f,
            c0: self.c0,
            alpha: self.alpha,
            c1: self.c1,
            d1: self.d1,
            eta_k: self.eta_k,
            formation_factor: self.formation_factor,
            young: self.young,
            poisson: self.poisson,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Element {
    EqualOrder,
    TaylorHood,
}

/// Initial data and sources of a single run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Case {
    /// Exact fields at `t = 0` and matching sources.
    Manufactured,
    /// Zero initial data and zero sources.
    Zero,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Discretization {
    pub element: Element,
    pub r: usize,
    pub k: usize,
    pub n: usize,
    pub tau: f64,
    pub final_time: f64,
    pub case: Case,
}

impl Default for Discretization {
    fn default() -> Self {
        Self {
            element: Element::EqualOrder,
            r: 1,
            k: 1,
            n: 8,
            tau: 0.025,
            final_time: 0.1,
            case: Case::Manufactured,
        }
    }
}

impl Discretization {
    pub fn element_choice(&self) -> ElementChoice {
        match self.element {
            Element::EqualOrder => ElementChoice::EqualOrder { r: self.r },
            Element::TaylorHood => ElementChoice::TaylorHood { r: self.r },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Study {
    pub levels: usize,
    pub base_n: usize,
    pub base_tau: f64,
    pub final_time: f64,
}

impl Default for Study {
    fn default() -> Self {
        Self {
            levels: 5,
            base_n: 4,
            base_tau: 0.05,
            final_time: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Md,
    Vtk,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Output {
    pub directory: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for Output {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("results"),
            formats: vec![Format::Csv, Format::Md],
        }
    }
}

impl Output {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        let cfg: Self = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path`, or returns the defaults when no path is given.
    pub fn load(path: Option<&Path>) -> Result<Self, String> {
        match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
                Self::parse(&text).map_err(|e| format!("{}: {e}", p.display()))
            }
            None => Ok(Self::default()),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        self.physics.params().validate().map_err(|e| e.to_string())?;
        let d = &self.discretization;
        if d.k != 1 {
            return Err(format!("discretization.k = {} is not supported; only k = 1", d.k));
        }
        if d.r == 0 || d.r > 3 {
            return Err(format!("discretization.r must be 1, 2 or 3, got {}", d.r));
        }
        if d.n == 0 {
            return Err("discretization.n must be positive".into());
        }
        if !(d.tau > 0.0 && d.final_time > 0.0) {
            return Err("discretization.tau and final_time must be positive".into());
        }
        let s = &self.study;
        if s.base_n == 0 || !(s.base_tau > 0.0 && s.final_time > 0.0) {
            return Err("study.base_n, base_tau and final_time must be positive".into());
        }
        Ok(())
    }

    /// Number of uniform steps of a single run; `tau` must divide the final time.
    pub fn solve_steps(&self) -> Result<usize, String> {
        let d = &self.discretization;
        let steps = (d.final_time / d.tau).round() as usize;
        if steps == 0 || (steps as f64 * d.tau - d.final_time).abs() > 1e-9 * d.final_time {
            return Err(format!("tau = {} does not divide final_time = {}", d.tau, d.final_time));
        }
        Ok(steps)
    }

    pub fn study_config(&self) -> StudyConfig {
        let s = &self.study;
        StudyConfig {
            element: self.discretization.element_choice(),
            k: self.discretization.k,
            levels: s.levels,
            base_n: s.base_n,
            base_tau: s.base_tau,
            final_time: s.final_time,
            params: self.physics.params(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = RunConfig::parse("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.physics.poisson, 0.49);
        assert_eq!(cfg.study.levels, 5);
    }

    #[test]
    fn sections_and_aliases() {
        let cfg = RunConfig::parse(
            "[physics]\nE = 2.0\nnu = 0.3\nrho = 3.0\n\
             [discretization]\nelement = \"taylor_hood\"\nn = 4\ncase = \"zero\"\n\
             [output]\nformats = [\"vtk\"]\n",
        )
        .unwrap();
        assert_eq!(cfg.physics.young, 2.0);
        assert_eq!(cfg.physics.poisson, 0.3);
        assert_eq!(cfg.discretization.element_choice(), ElementChoice::TaylorHood { r: 1 });
        assert_eq!(cfg.discretization.case, Case::Zero);
        assert!(cfg.output.wants(Format::Vtk) && !cfg.output.wants(Format::Csv));
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(RunConfig::parse("[physics]\nrhoo = 1.0\n").is_err());
        assert!(RunConfig::parse("[extra]\n").is_err());
        assert!(RunConfig::parse("[physics]\npoisson = 0.5\n").is_err());
        assert!(RunConfig::parse("[discretization]\nk = 2\n").is_err());
        assert!(RunConfig::parse("[discretization]\nelement = \"mini\"\n").is_err());
    }

    #[test]
    fn step_count() {
        let mut cfg = RunConfig::default();
        assert_eq!(cfg.solve_steps().unwrap(), 4);
        cfg.discretization.tau = 0.03;
        assert!(cfg.solve_steps().is_err());
    }
}
