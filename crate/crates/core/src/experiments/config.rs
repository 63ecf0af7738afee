//! Experiment configuration, read from TOML.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{FieldModel, Rect};
use crate::mapping::MappingKind;
use crate::par::Exec;
use crate::solver::SolverKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Problem {
    Periodic2d,
    TokamakConvergence,
    TokamakFilament,
    MappingError,
    CartesianCompare,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: Problem,
    /// Name of the run's output subdirectory.
    #[serde(default)]
    pub label: Option<String>,
    /// Seeds the random test points; nothing else is random.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub exec: Exec,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub periodic2d: Periodic2dConfig,
    #[serde(default)]
    pub tokamak: TokamakConfig,
    #[serde(default)]
    pub convergence: ConvergenceConfig,
    #[serde(default)]
    pub filament: FilamentConfig,
    #[serde(default)]
    pub mapping_error: MappingErrorConfig,
    #[serde(default)]
    pub cartesian: CartesianConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub kind: SolverKind,
    pub tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            kind: SolverKind::Auto,
            tol: 1e-10,
        }
    }
}

/// One resolution series: `n_z[i]` points along `Z` with `n_zeta[i]` planes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Series {
    pub label: String,
    pub n_z: Vec<usize>,
    pub n_zeta: Vec<usize>,
}

/// Doubly periodic `(Z, zeta)` problem with a straight field and the source
/// `sin[n (Z - zeta)] (1 + sin Z) / 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Periodic2dConfig {
    pub wave_number: i32,
    pub b_z: f64,
    pub b_zeta: f64,
    pub z_period: f64,
    pub zeta_period: f64,
    pub orders: Vec<usize>,
    pub series: Vec<Series>,
    /// Quadrature points per cell along `Z`.
    pub refinement_z: usize,
    /// Quadrature points per cell along `zeta`; 0 selects the same physical
    /// spacing as along `Z`.
    pub refinement_zeta: usize,
    /// Error samples per grid cell along each axis (relative to `N_Z`).
    pub sample_factor: usize,
}

impl Default for Periodic2dConfig {
    fn default() -> Self {
        Self {
            wave_number: 10,
            b_z: 1.0,
            b_zeta: 1.0,
            z_period: 2.0 * PI,
            zeta_period: 2.0 * PI,
            orders: vec![1, 2],
            series: vec![
                Series {
                    label: "ratio_4_43".into(),
                    n_z: vec![43, 86, 172],
                    n_zeta: vec![4, 8, 16],
                },
                Series {
                    label: "ratio_1_10".into(),
                    n_z: vec![40, 80, 160],
                    n_zeta: vec![4, 8, 16],
                },
            ],
            refinement_z: 10,
            refinement_zeta: 0,
            sample_factor: 3,
        }
    }
}

/// How the field-aligned splines end at the walls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WallSplines {
    /// Uniform knots continue past the walls, with ghost nodes as unknowns.
    #[default]
    Open,
    /// Open (repeated) end knots on the walls.
    Clamped,
}

/// Geometry and discretisation shared by the tokamak problems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TokamakConfig {
    pub field: FieldModel,
    pub r_range: (f64, f64),
    pub z_range: (f64, f64),
    pub zeta_period: f64,
    /// Cells along `R` and `Z` and planes along `zeta`.
    pub n_r: usize,
    pub n_z: usize,
    pub n_zeta: usize,
    pub order: usize,
    pub mapping: MappingKind,
    /// Per-unit-length tolerance of the traced mapping.
    pub exact_tol: f64,
    pub refinement: [usize; 3],
    pub walls: WallSplines,
    /// Width of the ghost layer on each side, as a fraction of the domain
    /// extent along that axis. Traced images beyond it are dropped.
    pub ghost_margin: f64,
}

impl Default for TokamakConfig {
    fn default() -> Self {
        Self {
            field: FieldModel::divertor(1.0),
            r_range: (0.0, 2.0),
            z_range: (-1.0, 1.5),
            zeta_period: PI / 20.0,
            n_r: 20,
            n_z: 20,
            n_zeta: 1,
            order: 2,
            mapping: MappingKind::TaylorSpline,
            exact_tol: 1e-10,
            refinement: [10, 10, 10],
            walls: WallSplines::Open,
            ghost_margin: 0.1,
        }
    }
}

impl TokamakConfig {
    pub fn domain(&self) -> Rect {
        Rect::new(self.r_range, self.z_range)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reference {
    /// Fine-grid solution of the same discretisation.
    SelfConverged,
    /// The closed-form solution `-rho / |k|^2`.
    Analytic,
}

/// Uniform refinement scan from the base grid in [`TokamakConfig`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergenceConfig {
    pub scale_factors: Vec<usize>,
    pub reference: Reference,
    /// Scale factor of the self-converged reference solution.
    pub reference_scale: usize,
    /// Error samples per base-grid cell along `R` and `Z`.
    pub samples_rz: usize,
    pub samples_zeta: usize,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self {
            scale_factors: vec![1, 2, 3],
            reference: Reference::SelfConverged,
            reference_scale: 6,
            samples_rz: 6,
            samples_zeta: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilamentConfig {
    pub start: [f64; 3],
    /// Also solve with the traced mapping and report the relative difference.
    pub compare_exact: bool,
    /// Also assemble the identity-mapping matrix for the sparsity comparison.
    pub identity_sparsity: bool,
    /// Slice oversampling relative to the grid.
    pub oversample: usize,
    /// Planes at which the peak of the projected charge is located.
    pub alignment_slices: usize,
    pub voxel_shape: [usize; 3],
    pub export_matrix: bool,
}

impl Default for FilamentConfig {
    fn default() -> Self {
        Self {
            start: [0.36, -1.0, 0.0],
            compare_exact: true,
            identity_sparsity: true,
            oversample: 3,
            alignment_slices: 8,
            voxel_shape: [100, 100, 16],
            export_matrix: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MappingErrorConfig {
    /// Approximate mapping to assess; the reference is always the traced one.
    pub mapping: MappingKind,
    pub taylor_order: usize,
}

impl Default for MappingErrorConfig {
    fn default() -> Self {
        Self {
            mapping: MappingKind::TaylorSpline,
            taylor_order: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CartesianCase {
    /// Tensor splines with `N_zeta = N_Z` against the field-aligned series of
    /// the periodic problem.
    Periodic2d,
    /// Tensor splines on `(N_R, N_Z, 10 N_zeta)` against the filament problem.
    TokamakFilament,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CartesianConfig {
    pub case: CartesianCase,
    /// Resolutions `N_Z = N_zeta` of the tensor-spline scan.
    pub n: Vec<usize>,
    /// Field-aligned runs to compare with, as `(N_Z, N_zeta)`.
    pub fcifem: Vec<(usize, usize)>,
    pub order: usize,
    /// Toroidal refinement for the tokamak case.
    pub zeta_factor: usize,
    /// Solve the tokamak Cartesian system (otherwise only count unknowns).
    pub solve: bool,
}

impl Default for CartesianConfig {
    fn default() -> Self {
        Self {
            case: CartesianCase::Periodic2d,
            n: vec![40, 80, 120, 160],
            fcifem: vec![(43, 4), (86, 8), (172, 16)],
            order: 2,
            zeta_factor: 10,
            solve: false,
        }
    }
}

impl ExperimentConfig {
    pub fn new(problem: Problem) -> Self {
        Self {
            problem,
            label: None,
            seed: 0,
            exec: Exec::default(),
            solver: SolverConfig::default(),
            periodic2d: Periodic2dConfig::default(),
            tokamak: TokamakConfig::default(),
            convergence: ConvergenceConfig::default(),
            filament: FilamentConfig::default(),
            mapping_error: MappingErrorConfig::default(),
            cartesian: CartesianConfig::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is serialisable")
    }

    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| {
            serde_json::to_value(self.problem)
                .ok()
                .and_then(|v| v.as_str().map(str::to_owned))
                .unwrap_or_default()
        })
    }

    /// Applies `key.path=value` overrides; `value` is parsed as a TOML value
    /// and falls back to a plain string.
    pub fn with_overrides(&self, overrides: &[String]) -> Result<Self> {
        let mut tree = toml::Value::try_from(self).map_err(|e| Error::Config(e.to_string()))?;
        for ov in overrides {
            let (key, raw) = ov
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{ov}` is not key=value")))?;
            let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
                .ok()
                .and_then(|mut t| t.remove("v"))
                .unwrap_or_else(|| toml::Value::String(raw.to_owned()));
            let mut node = &mut tree;
            let parts: Vec<&str> = key.trim().split('.').collect();
            for (n, part) in parts.iter().enumerate() {
                let table = node
                    .as_table_mut()
                    .ok_or_else(|| Error::Config(format!("`{key}` does not name a table entry")))?;
                if n + 1 == parts.len() {
                    table.insert(part.to_string(), value.clone());
                    break;
                }
                node = table
                    .entry(part.to_string())
                    .or_insert_with(|| toml::Value::Table(Default::default()));
            }
        }
        let cfg: Self = tree.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let t = &self.tokamak;
        if !(t.r_range.0 < t.r_range.1 && t.z_range.0 < t.z_range.1 && t.zeta_period > 0.0) {
            return bad("domain bounds must be ordered and the period positive".into());
        }
        if t.n_r < 2 || t.n_z < 2 || t.n_zeta == 0 {
            return bad("tokamak grid needs at least two cells in R and Z and one plane".into());
        }
        if !(t.ghost_margin >= 0.0) {
            return bad("ghost margin must be non-negative".into());
        }
        if t.refinement.contains(&0) {
            return bad("quadrature refinement must be positive".into());
        }
        let orders = self.periodic2d.orders.iter().chain([&t.order, &self.cartesian.order]);
        for &o in orders {
            if !(1..=2).contains(&o) {
                return bad(format!("spline order {o} not in {{1, 2}}"));
            }
        }
        let p = &self.periodic2d;
        if !(p.z_period > 0.0 && p.zeta_period > 0.0) {
            return bad("periodic lengths must be positive".into());
        }
        for s in &p.series {
            if s.n_z.len() != s.n_zeta.len() || s.n_z.iter().chain(&s.n_zeta).any(|&n| n == 0) {
                return bad(format!("series `{}` needs matching positive n_z and n_zeta lists", s.label));
            }
        }
        if self.convergence.scale_factors.contains(&0) || self.convergence.reference_scale == 0 {
            return bad("scale factors must be positive".into());
        }
        if self.solver.tol <= 0.0 {
            return bad("solver tolerance must be positive".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let c = ExperimentConfig::from_toml_str("problem = \"periodic2d\"").unwrap();
        assert_eq!(c.periodic2d.series.len(), 2);
        assert_eq!(c.tokamak.n_r, 20);
        assert_eq!(c.label(), "periodic2d");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_toml_str("problem = \"periodic2d\"\nbogus = 1").is_err());
    }

    #[test]
    fn overrides_reach_nested_keys() {
        let c = ExperimentConfig::new(Problem::TokamakFilament)
            .with_overrides(&[
                "tokamak.n_r=50".into(),
                "tokamak.mapping=exact_ode".into(),
                "convergence.scale_factors=[1, 2]".into(),
            ])
            .unwrap();
        assert_eq!(c.tokamak.n_r, 50);
        assert_eq!(c.tokamak.mapping, MappingKind::ExactOde);
        assert_eq!(c.convergence.scale_factors, vec![1, 2]);
        assert!(ExperimentConfig::new(Problem::Periodic2d)
            .with_overrides(&["tokamak.n_r=0".into()])
            .is_err());
    }

    #[test]
    fn echo_round_trips() {
        let c = ExperimentConfig::new(Problem::MappingError);
        assert_eq!(ExperimentConfig::from_toml_str(&c.to_toml()).unwrap(), c);
    }
}
