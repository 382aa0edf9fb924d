//! TOML run configuration.

use std::path::{Path, PathBuf};

use bdgz_core::basis::BasisOptions;
use bdgz_core::bogoliubov::SpectrumOptions;
use bdgz_core::gp::{PhysicalParams, SolverOptions};
use bdgz_core::grid::{Boundary, Grid, LaplacianScheme, TrapPotential};
use bdgz_core::pipeline::PipelineOptions;
use bdgz_core::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    /// Optional; must agree with `points` when given.
    pub dimension: Option<usize>,
    pub points: Vec<usize>,
    pub lengths: Vec<f64>,
    #[serde(default = "periodic")]
    pub boundary: Boundary,
    #[serde(default = "spectral")]
    pub laplacian: LaplacianScheme,
}

fn periodic() -> Boundary {
    Boundary::Periodic
}

fn spectral() -> LaplacianScheme {
    LaplacianScheme::Spectral
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsSection {
    pub g: Option<f64>,
    pub scattering_length: Option<f64>,
    pub n0: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisSection {
    pub f: usize,
    #[serde(default)]
    pub dense_limit: Option<usize>,
    #[serde(default)]
    pub tolerance: Option<f64>,
    #[serde(default)]
    pub max_restarts: Option<usize>,
    #[serde(default)]
    pub degeneracy_tol: Option<f64>,
}

impl BasisSection {
    pub fn options(&self) -> BasisOptions {
        let d = BasisOptions::default();
        BasisOptions {
            dense_limit: self.dense_limit.unwrap_or(d.dense_limit),
            tolerance: self.tolerance.unwrap_or(d.tolerance),
            max_restarts: self.max_restarts.unwrap_or(d.max_restarts),
            degeneracy_tol: self.degeneracy_tol.unwrap_or(d.degeneracy_tol),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VacuumSection {
    /// Truncation of each paired-mode vacuum.
    pub n_max: usize,
    /// Truncation of the zero-mode vacuum; `ceil(2 N0) + 64` when absent.
    pub zero_mode_n_max: Option<usize>,
}

impl Default for VacuumSection {
    fn default() -> Self {
        VacuumSection { n_max: 60, zero_mode_n_max: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub format: Format,
    /// Snapshot written by `solve` and read by the other commands.
    pub state: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { format: Format::Csv, state: PathBuf::from("state.bdgz") }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridSection,
    #[serde(default = "no_trap")]
    pub trap: TrapPotential,
    pub physics: PhysicsSection,
    #[serde(default)]
    pub solver: SolverOptions,
    pub basis: BasisSection,
    #[serde(default)]
    pub bogoliubov: SpectrumOptions,
    #[serde(default)]
    pub vacuum: VacuumSection,
    #[serde(default)]
    pub output: OutputSection,
}

fn no_trap() -> TrapPotential {
    TrapPotential::Zero
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(d) = self.grid.dimension {
            if d != self.grid.points.len() {
                return Err(Error::Config(format!(
                    "grid.dimension = {d} but {} point counts given",
                    self.grid.points.len()
                )));
            }
        }
        let grid = self.grid()?;
        self.params()?;
        self.solver.validate()?;
        if self.basis.f == 0 || self.basis.f > grid.len() {
            return Err(Error::Config(format!("basis.f must be in 1..={}", grid.len())));
        }
        let b = self.basis.options();
        let s = &self.bogoliubov;
        let positive = [
            ("basis.tolerance", b.tolerance),
            ("basis.degeneracy_tol", b.degeneracy_tol),
            ("bogoliubov.zero_tol_rel", s.zero_tol_rel),
            ("bogoliubov.degeneracy_tol_rel", s.degeneracy_tol_rel),
            ("bogoliubov.pattern_tol", s.pattern_tol),
            ("bogoliubov.canonical_tol", s.canonical_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.vacuum.n_max == 0 || self.vacuum.zero_mode_n_max == Some(0) {
            return Err(Error::Config("vacuum truncations must be at least 1".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(&self.grid.points, &self.grid.lengths, self.grid.boundary)
            .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn params(&self) -> Result<PhysicalParams> {
        let p = &self.physics;
        let built = match (p.g, p.scattering_length) {
            (Some(g), None) => PhysicalParams::new(g, p.n0, self.trap.clone()),
            (None, Some(a)) => PhysicalParams::from_scattering_length(a, p.n0, self.trap.clone()),
            _ => {
                return Err(Error::Config(
                    "give exactly one of physics.g and physics.scattering_length".into(),
                ))
            }
        };
        built.map_err(|e| match e {
            Error::Config(m) => Error::Config(m),
            other => Error::Config(other.to_string()),
        })
    }

    pub fn pipeline(&self) -> PipelineOptions {
        PipelineOptions { basis: self.basis.options(), spectrum: self.bogoliubov.clone() }
    }

    pub fn zero_mode_n_max(&self) -> usize {
        self.vacuum.zero_mode_n_max.unwrap_or((2.0 * self.physics.n0).ceil() as usize + 64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"
[grid]
points = [64]
lengths = [16.0]

[trap]
kind = "harmonic"
frequencies = [1.0]

[physics]
g = 0.01
n0 = 1000

[basis]
f = 12
"#;

    #[test]
    fn defaults_fill_in() {
        let c = RunConfig::parse(BASIC).unwrap();
        assert_eq!(c.grid.boundary, Boundary::Periodic);
        assert_eq!(c.grid.laplacian, LaplacianScheme::Spectral);
        assert_eq!(c.solver, SolverOptions::default());
        assert_eq!(c.vacuum.n_max, 60);
        assert_eq!(c.zero_mode_n_max(), 2064);
        assert!((c.params().unwrap().interaction() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_values() {
        let bad_f = BASIC.replace("f = 12", "f = 0");
        assert!(matches!(RunConfig::parse(&bad_f), Err(Error::Config(_))));
        let both = BASIC.replace("g = 0.01", "g = 0.01\nscattering_length = 0.1");
        assert!(matches!(RunConfig::parse(&both), Err(Error::Config(_))));
        let tol = format!("{BASIC}\n[bogoliubov]\nzero_tol_rel = -1.0\n");
        assert!(matches!(RunConfig::parse(&tol), Err(Error::Config(_))));
        let dim = BASIC.replace("points = [64]", "dimension = 2\npoints = [64]");
        assert!(matches!(RunConfig::parse(&dim), Err(Error::Config(_))));
        let unknown = BASIC.replace("[basis]", "[basis]\nbogus = 1");
        assert!(matches!(RunConfig::parse(&unknown), Err(Error::Config(_))));
    }
}
