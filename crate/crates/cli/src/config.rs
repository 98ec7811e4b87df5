//! Experiment configuration files.
//!
//! A config is a TOML document with a few scalar keys at the top and one
//! table each for the space, domain, surface, field, grids, tolerances and
//! output. Unknown keys are rejected everywhere.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use substatic_core::geometry::BaseKind;
use substatic_core::surfaces::{off_center_sphere, SpaceFormKind};
use substatic_core::{
    BoundaryClass, BuiltinName, BvpKind, Domain, FieldExpr, GridSpec, InnerBoundary, PChoice,
    RadialGraph, WarpedSpace,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    VerifyReilly,
    CheckHk,
    CheckMinkowski,
    CheckAf,
    Solve,
    Eig,
    AuditFormulas,
    Calibrate,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::VerifyReilly => "verify-reilly",
            ExperimentKind::CheckHk => "check-hk",
            ExperimentKind::CheckMinkowski => "check-minkowski",
            ExperimentKind::CheckAf => "check-af",
            ExperimentKind::Solve => "solve",
            ExperimentKind::Eig => "eig",
            ExperimentKind::AuditFormulas => "audit-formulas",
            ExperimentKind::Calibrate => "calibrate",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentKind>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub name: String,
    pub space: SpaceConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<DomainConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surface: Option<SurfaceConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<FieldConfig>,
    #[serde(default)]
    pub grids: GridConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputConfig>,
}

/// Either a builtin model or a custom profile `phi`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<BuiltinName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<String>,
    #[serde(default = "default_dim")]
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_max: Option<f64>,
    /// Required for a custom profile.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<BoundaryClass>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<BaseKind>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
}

fn default_dim() -> usize {
    3
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InnerKind {
    Center,
    Horizon,
    Slice,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    /// Defaults to the horizon when the space has one, the center otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner: Option<InnerKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner_radius: Option<f64>,
    /// Boundary value problem for `solve`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<BvpKind>,
}

/// Exactly one of a slice radius, a graph expression `rho(theta)` or an
/// off-center geodesic sphere in a space form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slice: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sphere_center: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sphere_radius: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    /// Catalog entry name, or `all`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub catalog: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expr: Option<String>,
    /// Selects the general formula with this `P`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<PChoice>,
    /// Weight replacing the potential in the general formula.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<String>,
    /// Constant multiple of the potential used by `check-af`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_scale: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_radial")]
    pub radial: usize,
    #[serde(default = "default_polar")]
    pub polar: usize,
    #[serde(default = "default_azimuthal")]
    pub azimuthal: usize,
    /// Radial mesh cells for `solve` and `eig`.
    #[serde(default = "default_mesh")]
    pub mesh: usize,
    /// Refinement levels; level `k` of `L` uses the grid halved `L - 1 - k` times.
    #[serde(default = "default_levels")]
    pub levels: usize,
}

fn default_radial() -> usize {
    GridSpec::default().radial
}
fn default_polar() -> usize {
    GridSpec::default().polar
}
fn default_azimuthal() -> usize {
    GridSpec::default().azimuthal
}
fn default_mesh() -> usize {
    substatic_core::solver::DEFAULT_MESH
}
fn default_levels() -> usize {
    3
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            radial: default_radial(),
            polar: default_polar(),
            azimuthal: default_azimuthal(),
            mesh: default_mesh(),
            levels: default_levels(),
        }
    }
}

impl GridConfig {
    pub fn spec(&self) -> GridSpec {
        GridSpec::new(self.radial, self.polar, self.azimuthal)
    }

    /// Coarse to fine, ending at [`GridConfig::spec`].
    pub fn ladder(&self) -> Vec<GridSpec> {
        let top = self.spec();
        (0..self.levels.max(1))
            .rev()
            .map(|k| top.scaled(0.5f64.powi(k as i32)))
            .collect()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let g = self.spec().scaled(factor);
        GridConfig {
            radial: g.radial,
            polar: g.polar,
            azimuthal: g.azimuthal,
            mesh: ((self.mesh as f64 * factor).round() as usize).max(4),
            levels: self.levels,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Relative residual of an integral identity.
    #[serde(default = "tol_identity")]
    pub identity: f64,
    /// Required drop of the residual across the refinement ladder.
    #[serde(default = "tol_drop")]
    pub refinement_drop: f64,
    /// Residuals below this count as converged regardless of the drop.
    #[serde(default = "tol_floor")]
    pub roundoff_floor: f64,
    /// `|margin|` below which a slice counts as an equality case.
    #[serde(default = "tol_equality")]
    pub equality: f64,
    /// Allowed negative margin.
    #[serde(default = "tol_margin")]
    pub margin: f64,
    /// Flux identity and proof chain slacks, relative.
    #[serde(default = "tol_solver")]
    pub solver: f64,
    /// Imposed boundary values of a solve.
    #[serde(default = "tol_bc")]
    pub boundary_condition: f64,
    /// Consistency of two evaluations of the same quantity.
    #[serde(default = "tol_consistency")]
    pub consistency: f64,
    /// Quadrature against closed forms.
    #[serde(default = "tol_quadrature")]
    pub quadrature: f64,
}

fn tol_identity() -> f64 {
    1e-6
}
fn tol_drop() -> f64 {
    100.0
}
fn tol_floor() -> f64 {
    1e-12
}
fn tol_equality() -> f64 {
    1e-7
}
fn tol_margin() -> f64 {
    1e-9
}
fn tol_solver() -> f64 {
    1e-6
}
fn tol_bc() -> f64 {
    1e-10
}
fn tol_consistency() -> f64 {
    1e-9
}
fn tol_quadrature() -> f64 {
    1e-10
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            identity: tol_identity(),
            refinement_drop: tol_drop(),
            roundoff_floor: tol_floor(),
            equality: tol_equality(),
            margin: tol_margin(),
            solver: tol_solver(),
            boundary_condition: tol_bc(),
            consistency: tol_consistency(),
            quadrature: tol_quadrature(),
        }
    }
}

impl Tolerances {
    /// Every tolerance except the refinement drop multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Tolerances {
            identity: self.identity * factor,
            refinement_drop: self.refinement_drop,
            roundoff_floor: self.roundoff_floor * factor,
            equality: self.equality * factor,
            margin: self.margin * factor,
            solver: self.solver * factor,
            boundary_condition: self.boundary_condition * factor,
            consistency: self.consistency * factor,
            quadrature: self.quadrature * factor,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
    GnuplotDat,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<OutputFormat>,
}

/// Syntax or schema problem in a config; maps to the config exit code.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

impl ExperimentConfig {
    /// Parses a TOML document. Errors carry line and column.
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        toml::from_str(text).map_err(|e| ConfigError(e.to_string()).into())
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg =
            Self::parse(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        if cfg.name.is_empty() {
            cfg.name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> anyhow::Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn build_space(&self) -> anyhow::Result<WarpedSpace> {
        let sp = &self.space;
        let space = match (&sp.builtin, &sp.phi) {
            (Some(name), None) => {
                if sp.s_min.is_some() || sp.boundary.is_some() || sp.base.is_some() {
                    return Err(config_err(
                        "space: s_min, boundary and base apply to custom profiles only",
                    ));
                }
                WarpedSpace::builtin(*name, sp.n, &sp.params, sp.s_max)
            }
            (None, Some(src)) => {
                let phi = parse_expr("space.phi", src)?;
                let (Some(s_max), Some(class)) = (sp.s_max, sp.boundary) else {
                    return Err(config_err(
                        "space: a custom profile needs s_max and boundary",
                    ));
                };
                WarpedSpace::custom(
                    &phi,
                    sp.n,
                    sp.base.unwrap_or(BaseKind::RoundSphere),
                    &sp.params,
                    sp.s_min.unwrap_or(0.0),
                    s_max,
                    class,
                )
            }
            _ => return Err(config_err("space: give exactly one of `builtin` and `phi`")),
        };
        space.map_err(|e| config_err(format!("space: {e}")))
    }

    pub fn inner_boundary(&self, space: &WarpedSpace) -> anyhow::Result<InnerBoundary> {
        let dom = self.domain.as_ref();
        let kind = dom.and_then(|d| d.inner).unwrap_or(if space.is_horizon() {
            InnerKind::Horizon
        } else {
            InnerKind::Center
        });
        let radius = dom.and_then(|d| d.inner_radius);
        match (kind, radius) {
            (InnerKind::Slice, Some(s)) => Ok(InnerBoundary::Slice { s }),
            (InnerKind::Slice, None) => {
                Err(config_err("domain: an inner slice needs inner_radius"))
            }
            (_, Some(_)) => Err(config_err(
                "domain: inner_radius is only used with inner = \"slice\"",
            )),
            (InnerKind::Center, None) => Ok(InnerBoundary::Center),
            (InnerKind::Horizon, None) => Ok(InnerBoundary::Horizon),
        }
    }

    pub fn surface(&self) -> anyhow::Result<&SurfaceConfig> {
        self.surface
            .as_ref()
            .ok_or_else(|| config_err("missing [surface] table"))
    }

    pub fn graph(&self) -> anyhow::Result<RadialGraph> {
        let sf = self.surface()?;
        match (sf.slice, &sf.graph, sf.sphere_center, sf.sphere_radius) {
            (Some(s), None, None, None) => Ok(RadialGraph::slice(s)),
            (None, Some(src), None, None) => {
                let rho = self.expr("surface.graph", src)?;
                RadialGraph::new(src.clone(), rho).map_err(|e| config_err(format!("surface.graph: {e}")))
            }
            (None, None, Some(d), Some(r)) => {
                let kind = match self.space.builtin {
                    Some(BuiltinName::Euclidean) => SpaceFormKind::Euclidean,
                    Some(BuiltinName::Hyperbolic) => SpaceFormKind::Hyperbolic,
                    Some(BuiltinName::Hemisphere) => SpaceFormKind::Hemisphere,
                    _ => return Err(config_err("surface: off-center spheres need a builtin space form")),
                };
                off_center_sphere(kind, d, r).map_err(|e| config_err(format!("surface: {e}")))
            }
            _ => Err(config_err(
                "surface: give exactly one of `slice`, `graph` or `sphere_center` with `sphere_radius`",
            )),
        }
    }

    pub fn domain(&self, space: &WarpedSpace) -> anyhow::Result<Domain> {
        Ok(Domain {
            inner: self.inner_boundary(space)?,
            outer: self.graph()?,
        })
    }

    pub fn apply_scales(&mut self, grid_scale: f64, tol_scale: f64) -> anyhow::Result<()> {
        if !(grid_scale > 0.0 && grid_scale.is_finite())
            || !(tol_scale > 0.0 && tol_scale.is_finite())
        {
            bail!(ConfigError(format!(
                "scales must be positive (grid {grid_scale}, tolerance {tol_scale})"
            )));
        }
        if grid_scale != 1.0 {
            self.grids = self.grids.scaled(grid_scale);
        }
        if tol_scale != 1.0 {
            self.tolerances = self.tolerances.scaled(tol_scale);
        }
        Ok(())
    }
}

impl ExperimentConfig {
    /// Parses a field, weight or graph expression with the space parameters
    /// bound, so `m*s*cos(theta1)` works on `schwarzschild`.
    pub fn expr(&self, key: &str, src: &str) -> anyhow::Result<FieldExpr> {
        let e = parse_expr(key, src)?.with_params(&self.space.params);
        match e.free_params().first() {
            Some(name) => Err(config_err(format!(
                "{key}: unknown symbol `{name}` in `{src}`"
            ))),
            None => Ok(e),
        }
    }
}

pub fn parse_expr(key: &str, src: &str) -> anyhow::Result<FieldExpr> {
    FieldExpr::parse(src).map_err(|e| config_err(format!("{key}: {e} in `{src}`")))
}

pub fn config_err(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
experiment = "verify-reilly"
name = "hyperbolic-annulus"

[space]
builtin = "hyperbolic"
n = 3

[domain]
inner = "slice"
inner_radius = 0.5

[surface]
slice = 1.5

[field]
expr = "s*cos(theta1)"

[grids]
radial = 8
polar = 8
azimuthal = 16
"#;

    #[test]
    fn parses_and_round_trips() {
        let cfg = ExperimentConfig::parse(SAMPLE).unwrap();
        assert_eq!(cfg.experiment, Some(ExperimentKind::VerifyReilly));
        assert_eq!(cfg.grids.mesh, substatic_core::solver::DEFAULT_MESH);
        let again = ExperimentConfig::parse(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn round_trip_with_every_table() {
        let mut cfg = ExperimentConfig::parse(SAMPLE).unwrap();
        cfg.space.params.insert("m".into(), 1.0);
        cfg.field.as_mut().unwrap().p = Some(PChoice::ConstantCurvature { kappa: -1.0 });
        cfg.domain.as_mut().unwrap().problem = Some(BvpKind::NeumannMinkowski);
        cfg.output = Some(OutputConfig {
            dir: Some("out".into()),
            format: Some(OutputFormat::GnuplotDat),
        });
        let text = cfg.to_toml().unwrap();
        assert_eq!(ExperimentConfig::parse(&text).unwrap(), cfg, "{text}");
    }

    #[test]
    fn unknown_keys_are_rejected_with_position() {
        let bad = SAMPLE.replace("n = 3", "n = 3\ncolour = 1");
        let err = ExperimentConfig::parse(&bad).unwrap_err().to_string();
        assert!(err.contains("colour") && err.contains("line"), "{err}");
        let bad = SAMPLE.replace("[grids]", "[grids]\nlevel = 2");
        assert!(ExperimentConfig::parse(&bad).is_err());
    }

    #[test]
    fn builds_the_objects() {
        let cfg = ExperimentConfig::parse(SAMPLE).unwrap();
        let sp = cfg.build_space().unwrap();
        assert_eq!(
            cfg.inner_boundary(&sp).unwrap(),
            InnerBoundary::Slice { s: 0.5 }
        );
        assert_eq!(cfg.graph().unwrap().slice_radius(), Some(1.5));
    }

    #[test]
    fn inconsistent_tables_are_config_errors() {
        let mut cfg = ExperimentConfig::parse(SAMPLE).unwrap();
        cfg.space.phi = Some("1 + s^2".into());
        assert!(cfg.build_space().unwrap_err().is::<ConfigError>());
        let mut cfg = ExperimentConfig::parse(SAMPLE).unwrap();
        cfg.surface.as_mut().unwrap().graph = Some("1".into());
        assert!(cfg.graph().unwrap_err().is::<ConfigError>());
        let mut cfg = ExperimentConfig::parse(SAMPLE).unwrap();
        cfg.space.phi = None;
        cfg.space.builtin = None;
        assert!(cfg.build_space().is_err());
        let mut cfg = ExperimentConfig::parse(SAMPLE).unwrap();
        cfg.field.as_mut().unwrap().expr = Some("s*(".into());
        let err =
            parse_expr("field.expr", cfg.field.unwrap().expr.as_deref().unwrap()).unwrap_err();
        assert!(err.to_string().contains("column"), "{err}");
    }

    #[test]
    fn ladder_ends_at_the_configured_grid() {
        let g = GridConfig {
            radial: 12,
            polar: 12,
            azimuthal: 24,
            mesh: 64,
            levels: 3,
        };
        let l = g.ladder();
        assert_eq!(l.len(), 3);
        assert_eq!(l[0], GridSpec::new(3, 3, 6));
        assert_eq!(l[2], g.spec());
    }

    #[test]
    fn custom_profile() {
        let text = r#"
[space]
phi = "1 + k*s^2"
s_max = 2.0
boundary = "H1-center"
params = { k = 0.5 }
"#;
        let cfg = ExperimentConfig::parse(text).unwrap();
        let sp = cfg.build_space().unwrap();
        assert_eq!(sp.profile.label, "custom");
        assert!((sp.profile.phi(1.0).unwrap() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn expressions_see_the_space_parameters() {
        let cfg = ExperimentConfig::parse(
            "experiment = \"verify-reilly\"\n[space]\nbuiltin = \"schwarzschild\"\nparams = { m = 2.0 }\n",
        )
        .unwrap();
        let e = cfg.expr("field.expr", "m*s").unwrap();
        assert!(e.free_params().is_empty());
        let err = cfg.expr("field.expr", "q*s").unwrap_err();
        assert!(err.is::<ConfigError>());
        assert!(err.to_string().contains("`q`"), "{err}");
    }
}
