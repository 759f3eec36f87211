//! JSON problem description.

use std::path::{Path, PathBuf};

use masolve_core::measures::{Atom, SourceDensity, TabulatedDensity};
use masolve_core::mesh::AssumptionProfile;
use masolve_core::{
    BoundaryData, ConvexDomain, DomainShape, QuadratureConfig, SlopeDensity, SolveConfig, SourceMeasure,
};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub domain: DomainShape,
    pub boundary: BoundaryData,
    pub slope_density: SlopeSpec,
    #[serde(default)]
    pub source: SourceSpec,
    pub mesh: MeshSpec,
    #[serde(default)]
    pub solve: SolveConfig,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    #[serde(default)]
    pub assumptions: AssumptionProfile,
    #[serde(default)]
    pub delta_schedule: Option<Vec<f64>>,
    #[serde(default)]
    pub study: Option<StudySpec>,
    #[serde(default)]
    pub verify: VerifySpec,
    /// Seed for every Monte-Carlo oracle; `--seed` overrides it.
    #[serde(default)]
    pub seed: u64,
}

/// `R` as in the core catalog, plus grids loaded from a `px,py,value` CSV
/// file (relative paths resolve against the config's directory).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SlopeSpec {
    Constant { value: f64 },
    GaussCurvature { q: f64 },
    PowerTail { c0: f64, k: f64, r0: f64 },
    TabulatedCsv { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    pub density: SourceDensity,
    #[serde(default)]
    pub atoms: Vec<Atom>,
}

impl Default for SourceSpec {
    fn default() -> Self {
        Self {
            density: SourceDensity::Zero,
            atoms: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSpec {
    pub n_boundary: usize,
    pub spacing: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySpec {
    /// Defaults to three meshes, doubling `n_boundary` and halving `spacing`
    /// from the `mesh` entry.
    #[serde(default)]
    pub meshes: Option<Vec<MeshSpec>>,
    pub delta: f64,
    #[serde(default = "default_radial_samples")]
    pub radial_samples: usize,
}

fn default_radial_samples() -> usize {
    4001
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySpec {
    pub monte_carlo_samples: usize,
    /// Interior vertices whose cells are checked by Monte-Carlo.
    pub cells: usize,
    /// Relative tolerance for cell areas against Monte-Carlo.
    pub area_rel_tol: f64,
    /// Absolute mass tolerance for the comparison solves.
    pub comparison_mass_tol: f64,
}

impl Default for VerifySpec {
    fn default() -> Self {
        Self {
            monte_carlo_samples: 1_000_000,
            cells: 8,
            area_rel_tol: 0.01,
            comparison_mass_tol: 1e-14,
        }
    }
}

/// Validated problem data.
#[derive(Debug, Clone)]
pub struct Problem {
    pub config: ProblemConfig,
    pub domain: ConvexDomain,
    pub slope: SlopeDensity,
    pub source: SourceMeasure,
}

impl ProblemConfig {
    /// Parses JSON, reporting the line, column and field path of the first
    /// error.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            CliError::Config(format!(
                "line {}, column {}, field `{}`: {}",
                inner.line(),
                inner.column(),
                path,
                inner
            ))
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Builds the module-level types; `base` resolves relative table paths.
    pub fn resolve(self, base: &Path) -> Result<Problem, CliError> {
        let field = |name: &str, e: &dyn std::fmt::Display| CliError::Config(format!("field `{name}`: {e}"));
        let domain = ConvexDomain::new(self.domain.clone(), self.boundary.clone()).map_err(|e| match e {
            masolve_core::MeshError::NotStrictlyConvex => CliError::Assumption(format!("domain: {e}")),
            e => field("domain", &e),
        })?;
        let slope = match &self.slope_density {
            SlopeSpec::Constant { value } => SlopeDensity::Constant { value: *value },
            SlopeSpec::GaussCurvature { q } => SlopeDensity::GaussCurvature { q: *q },
            SlopeSpec::PowerTail { c0, k, r0 } => SlopeDensity::PowerTail {
                c0: *c0,
                k: *k,
                r0: *r0,
            },
            SlopeSpec::TabulatedCsv { path } => {
                let path = base.join(path);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| field("slope_density.path", &format!("cannot read {}: {e}", path.display())))?;
                SlopeDensity::Tabulated(TabulatedDensity::from_csv(&text).map_err(|e| field("slope_density", &e))?)
            }
        };
        slope.validate().map_err(|e| field("slope_density", &e))?;
        let source = SourceMeasure::new(self.source.density.clone(), self.source.atoms.clone())
            .map_err(|e| field("source", &e))?;
        source.validate_on(&domain).map_err(|e| field("source", &e))?;
        if let Some(a) = source.atoms().iter().find(|a| !domain.contains(a.position)) {
            return Err(field(
                "source.atoms",
                &format!("atom at ({}, {}) lies outside the domain", a.position.x, a.position.y),
            ));
        }
        self.quadrature.validate().map_err(|e| field("quadrature", &e))?;
        self.solve.validate().map_err(|e| field("solve", &e))?;
        if self.mesh.n_boundary < 3 || !(self.mesh.spacing > 0.0 && self.mesh.spacing.is_finite()) {
            return Err(field("mesh", &"n_boundary must be ≥ 3 and spacing positive"));
        }
        if let Some(s) = &self.delta_schedule {
            if s.is_empty() || s.iter().any(|&d| !(d > 0.0 && d.is_finite())) || s.windows(2).any(|w| w[1] >= w[0]) {
                return Err(field(
                    "delta_schedule",
                    &"must be non-empty, positive and strictly decreasing",
                ));
            }
        }
        if let Some(study) = &self.study {
            if !(study.delta >= 0.0 && study.delta.is_finite()) || study.radial_samples < 2 {
                return Err(field("study", &"delta must be ≥ 0 and radial_samples ≥ 2"));
            }
        }
        let v = &self.verify;
        let positive = |x: f64| x > 0.0;
        if v.monte_carlo_samples == 0 || !positive(v.area_rel_tol) || !positive(v.comparison_mass_tol) {
            return Err(field("verify", &"samples and tolerances must be positive"));
        }
        Ok(Problem {
            config: self,
            domain,
            slope,
            source,
        })
    }
}

impl Problem {
    pub fn study_meshes(&self) -> Vec<MeshSpec> {
        let study = self.config.study.as_ref();
        match study.and_then(|s| s.meshes.clone()) {
            Some(m) => m,
            None => {
                let MeshSpec { n_boundary, spacing } = self.config.mesh;
                (0..3)
                    .map(|k| MeshSpec {
                        n_boundary: n_boundary << k,
                        spacing: spacing / (1 << k) as f64,
                    })
                    .collect()
            }
        }
    }
}
