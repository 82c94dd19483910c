//! Case files: a TOML tree with `include` support, strict keys and
//! defaults for everything.
//!
//! Units are SI throughout unless a case is written in dimensionless form.
//! Per key:
//!
//! * `mesh.cells` [-], `mesh.lengths` [m], `mesh.origin` [m]
//! * `fluid.gravity` [m s^-2], `fluid.density.f0` [kg m^-3], `fluid.viscosity.f0` [Pa s]
//! * `medium.porosity` [-], `medium.storativity` [Pa^-1], `medium.permeability.value` [m^2]
//! * `medium.dispersion.Dm` [m^2 s^-1], `alphaL`/`alphaT` [m]
//! * `initial.value` and transport boundary values: concentration units
//! * pressure boundary values [Pa], velocities [m s^-1], `massFlowRate.rate` [kg s^-1]
//! * `sources.rate` [s^-1] per unit cell volume
//! * `time.end`, `time.dt`, `time.writeInterval` [s]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use log::{debug, info};
use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::benchmarks::FiveSpot;
use crate::constitutive::{DispersionParameters, FluidPropertyModel};
use crate::coupling::{FluidModels, PicardControls, Simulation};
use crate::error::{Error, Result};
use crate::flow::{
    Continuity, DualScheme, FlowState, Formulation, PatchConditions, PressureBc, PressureOptions,
    Source,
};
use crate::geostat::{self, RandomFieldSpec};
use crate::io::stats::BinSpacing;
use crate::linsolve::{Preconditioner, SolverControls};
use crate::mesh::{axis_unit, Field, Mesh, SymTensor, Vec3, PATCH_NAMES};
use crate::transport::{
    Advection, CourantControls, TimeScheme, TransportBc, TransportOptions, TransportState,
};

const MAX_INCLUDE_DEPTH: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "camelCase")]
pub struct CaseConfig {
    pub name: String,
    pub mesh: MeshConfig,
    pub fluid: FluidConfig,
    pub medium: MediumConfig,
    pub initial: InitialConfig,
    /// Conditions per patch name (`xmin` ... `zmax`).
    pub boundary: BTreeMap<String, PatchConfig>,
    pub sources: Vec<Source>,
    pub transport: TransportConfig,
    pub picard: PicardControls,
    pub time: TimeConfig,
    pub solver: SolverConfig,
    pub output: OutputConfig,
    /// Dual-porosity five-spot run instead of the coupled simulation.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dual: Option<DualConfig>,
}

impl Default for CaseConfig {
    fn default() -> Self {
        CaseConfig {
            name: "case".into(),
            mesh: MeshConfig::default(),
            fluid: FluidConfig::default(),
            medium: MediumConfig::default(),
            initial: InitialConfig::default(),
            boundary: BTreeMap::new(),
            sources: Vec::new(),
            transport: TransportConfig::default(),
            picard: PicardControls::default(),
            time: TimeConfig::default(),
            solver: SolverConfig::default(),
            output: OutputConfig::default(),
            dual: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "camelCase")]
pub struct MeshConfig {
    pub cells: [usize; 3],
    pub lengths: Vec3,
    pub origin: Vec3,
}

impl Default for MeshConfig {
    fn default() -> Self {
        MeshConfig {
            cells: [1, 1, 1],
            lengths: [1.0; 3],
            origin: [0.0; 3],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "camelCase")]
pub struct FluidConfig {
    pub gravity: Vec3,
    pub density: FluidPropertyModel,
    pub viscosity: FluidPropertyModel,
    pub formulation: Formulation,
    pub continuity: Continuity,
}

impl Default for FluidConfig {
    fn default() -> Self {
        FluidConfig {
            gravity: [0.0; 3],
            density: FluidPropertyModel::Constant { f0: 1000.0 },
            viscosity: FluidPropertyModel::Constant { f0: 1e-3 },
            formulation: Formulation::Reduced,
            continuity: Continuity::Boussinesq,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "camelCase")]
pub struct MediumConfig {
    pub porosity: f64,
    pub storativity: f64,
    pub permeability: PermeabilityConfig,
    pub dispersion: DispersionParameters,
}

impl Default for MediumConfig {
    fn default() -> Self {
        MediumConfig {
            porosity: 1.0,
            storativity: 0.0,
            permeability: PermeabilityConfig::default(),
            dispersion: DispersionParameters::default(),
        }
    }
}

/// `K = value * f(x) * diag(anisotropy)` with `f` a generated random field
/// (1 when absent).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "camelCase")]
pub struct PermeabilityConfig {
    pub value: f64,
    pub anisotropy: Vec3,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub random: Option<RandomFieldSpec>,
}

impl Default for PermeabilityConfig {
    fn default() -> Self {
        PermeabilityConfig {
            value: 1.0,
            anisotropy: [1.0; 3],
            random: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase", deny_unknown_fields)]
pub enum Profile {
    /// Linear in the coordinate along `axis`, `start` at the domain's lower
    /// bound and `end` at its upper bound.
    Linear { axis: usize, start: f64, end: f64 },
    /// `below` for coordinates under `position`, `above` otherwise.
    Step {
        axis: usize,
        position: f64,
        below: f64,
        above: f64,
    },
}

/// Uniform noise in `[-amplitude, amplitude]`, optionally restricted to a
/// coordinate band along `axis`; the result is clipped to the range of the
/// noise-free field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "camelCase")]
pub struct NoiseConfig {
    pub amplitude: f64,
    pub seed: u64,
    pub axis: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub band: Option<[f64; 2]>,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            amplitude: 0.0,
            seed: 0,
            axis: 0,
            band: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "camelCase")]
pub struct InitialConfig {
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub profile: Option<Profile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseConfig>,
}

/// Pressure conditions as written in case files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase", deny_unknown_fields)]
pub enum PressureBcConfig {
    FixedPressure {
        value: f64,
    },
    DarcyFixedVelocity {
        velocity: Vec3,
    },
    /// Inward mass flow `rate` of fluid with `density`, spread uniformly
    /// over the patch as a Darcy velocity.
    MassFlowRate {
        rate: f64,
        density: f64,
    },
    #[serde(rename_all = "camelCase")]
    HydrostaticPressure {
        reference_density: f64,
        #[serde(default)]
        reference_point: Vec3,
        #[serde(default)]
        reference_pressure: f64,
    },
    Robin {
        alpha: f64,
        beta: f64,
        gamma: f64,
    },
    NoFlux,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "camelCase")]
pub struct PatchConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pressure: Option<PressureBcConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transport: Option<TransportBc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "camelCase")]
pub struct TransportConfig {
    pub time_scheme: TimeScheme,
    pub advection: Advection,
    pub correctors: usize,
}

impl Default for TransportConfig {
    fn default() -> Self {
        let d = TransportOptions::default();
        TransportConfig {
            time_scheme: d.time_scheme,
            advection: d.advection,
            correctors: d.correctors,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "camelCase")]
pub struct TimeConfig {
    /// End time; 0 solves the initial pressure field only.
    pub end: f64,
    /// First time step (later steps follow the Courant control).
    pub dt: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub write_interval: Option<f64>,
    pub courant: CourantControls,
}

impl Default for TimeConfig {
    fn default() -> Self {
        TimeConfig {
            end: 0.0,
            dt: 1.0,
            write_interval: None,
            courant: CourantControls::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct LinearSolverConfig {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub preconditioner: Preconditioner,
}

impl From<SolverControls> for LinearSolverConfig {
    fn from(s: SolverControls) -> Self {
        LinearSolverConfig {
            tolerance: s.tolerance,
            max_iterations: s.max_iterations,
            preconditioner: s.preconditioner,
        }
    }
}

impl From<LinearSolverConfig> for SolverControls {
    fn from(s: LinearSolverConfig) -> Self {
        SolverControls {
            tolerance: s.tolerance,
            max_iterations: s.max_iterations,
            preconditioner: s.preconditioner,
        }
    }
}

fn default_pressure_solver() -> LinearSolverConfig {
    SolverControls::pressure().into()
}

fn default_transport_solver() -> LinearSolverConfig {
    SolverControls::transport().into()
}

/// Keys left out of a solver table keep the equation's default.
#[derive(Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
struct PartialSolver {
    tolerance: Option<f64>,
    max_iterations: Option<usize>,
    preconditioner: Option<Preconditioner>,
}

impl PartialSolver {
    fn over(self, d: LinearSolverConfig) -> LinearSolverConfig {
        LinearSolverConfig {
            tolerance: self.tolerance.unwrap_or(d.tolerance),
            max_iterations: self.max_iterations.unwrap_or(d.max_iterations),
            preconditioner: self.preconditioner.unwrap_or(d.preconditioner),
        }
    }
}

fn pressure_solver<'de, D: serde::Deserializer<'de>>(
    d: D,
) -> std::result::Result<LinearSolverConfig, D::Error> {
    Ok(PartialSolver::deserialize(d)?.over(default_pressure_solver()))
}

fn transport_solver<'de, D: serde::Deserializer<'de>>(
    d: D,
) -> std::result::Result<LinearSolverConfig, D::Error> {
    Ok(PartialSolver::deserialize(d)?.over(default_transport_solver()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct SolverConfig {
    #[serde(
        default = "default_pressure_solver",
        deserialize_with = "pressure_solver"
    )]
    pub pressure: LinearSolverConfig,
    #[serde(
        default = "default_transport_solver",
        deserialize_with = "transport_solver"
    )]
    pub transport: LinearSolverConfig,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            pressure: default_pressure_solver(),
            transport: default_transport_solver(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct HistogramRequest {
    pub field: String,
    pub bins: usize,
    #[serde(default)]
    pub spacing: BinSpacing,
}

/// Wall heat (or solute) flux normalised by pure conduction across `height`
/// for a wall-to-wall difference `delta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct NusseltRequest {
    pub patch: String,
    pub wall_value: f64,
    pub delta: f64,
    pub height: f64,
}

/// Farthest extent, from the `from` patch, of cells along the bottom row
/// (lowest y layer) at or above `level`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct ToeRequest {
    pub level: f64,
    pub from: String,
}

pub const FIELD_NAMES: &[&str] = &["c", "p", "p_rgh", "K", "rho", "mu", "U", "phi"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "camelCase")]
pub struct OutputConfig {
    /// Cell fields written to VTK: any of `c`, `p`, `p_rgh`, `K`, `rho`, `mu`, `U`, `phi`.
    pub fields: Vec<String>,
    pub vtk: bool,
    /// Per-step CSV of time, step size, outer iterations and balance.
    pub time_series: bool,
    /// Fields whose statistics are appended to `metrics.csv` at write times.
    pub metrics: Vec<String>,
    pub histograms: Vec<HistogramRequest>,
    /// Contour level whose length enters the time series.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub isoline: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nusselt: Option<NusseltRequest>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub toe: Option<ToeRequest>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            fields: vec!["c".into(), "p".into(), "K".into()],
            vtk: true,
            time_series: true,
            metrics: Vec::new(),
            histograms: Vec::new(),
            isoline: None,
            nusselt: None,
            toe: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "camelCase")]
pub struct DualConfig {
    pub five_spot: FiveSpot,
    pub scheme: DualScheme,
    pub tolerance: f64,
    pub max_outer: usize,
}

impl Default for DualConfig {
    fn default() -> Self {
        DualConfig {
            five_spot: FiveSpot::default(),
            scheme: DualScheme::SchurSplit,
            tolerance: 1e-8,
            max_outer: 200,
        }
    }
}

/// Appends ``; did you mean `x`?`` to serde's unknown field/variant messages.
fn suggest(message: &str) -> String {
    let Some(start) = message
        .find("unknown field `")
        .or_else(|| message.find("unknown variant `"))
    else {
        return message.to_string();
    };
    let rest = &message[start..];
    let open = rest.find('`').expect("matched a backtick") + 1;
    let close = open + rest[open..].find('`').unwrap_or(0);
    let unknown = &rest[open..close];
    let candidates: Vec<&str> = rest[close + 1..].split('`').skip(1).step_by(2).collect();
    let best = candidates
        .iter()
        .map(|c| (strsim::levenshtein(unknown, c), *c))
        .min();
    match best {
        Some((d, c)) if d <= unknown.len().max(3) => {
            let line_end = message[start..]
                .find('\n')
                .map_or(message.len(), |i| start + i);
            format!(
                "{}; did you mean `{c}`?{}",
                &message[..line_end],
                &message[line_end..]
            )
        }
        _ => message.to_string(),
    }
}

fn syntax_error(path: &Path, text: Option<&str>, e: &toml::de::Error) -> Error {
    let location = match (text, e.span()) {
        (Some(text), Some(span)) => {
            let before = &text[..span.start.min(text.len())];
            let line = before.matches('\n').count() + 1;
            let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
            format!("line {line}, column {column}: ")
        }
        _ => String::new(),
    };
    Error::CaseSyntax {
        path: path.to_path_buf(),
        message: format!("{location}{}", suggest(e.message().trim())),
    }
}

/// Recursive merge; values in `top` win.
/// Tag keys of the enum-valued tables; a table that changes its tag replaces
/// the included one instead of merging into it.
const TAGS: [&str; 2] = ["type", "model"];

fn merge(base: &mut toml::Table, top: toml::Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(t))
                if TAGS
                    .iter()
                    .all(|tag| t.get(*tag).is_none_or(|x| b.get(*tag) == Some(x))) =>
            {
                merge(b, t)
            }
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn load_table(path: &Path, depth: usize) -> Result<toml::Table> {
    if depth > MAX_INCLUDE_DEPTH {
        return Err(Error::config(format!(
            "include nesting deeper than {MAX_INCLUDE_DEPTH} at {}",
            path.display()
        )));
    }
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config(format!("cannot read case file {}: {e}", path.display())))?;
    let mut table: toml::Table = text
        .parse()
        .map_err(|e| syntax_error(path, Some(&text), &e))?;
    let includes = match table.remove("include") {
        None => Vec::new(),
        Some(toml::Value::String(s)) => vec![s],
        Some(toml::Value::Array(a)) => a
            .into_iter()
            .map(|v| match v {
                toml::Value::String(s) => Ok(s),
                other => Err(Error::config(format!(
                    "include: expected a path, got {other}"
                ))),
            })
            .collect::<Result<_>>()?,
        Some(other) => {
            return Err(Error::config(format!(
                "include: expected a path or list, got {other}"
            )))
        }
    };
    if includes.is_empty() {
        return Ok(table);
    }
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut merged = toml::Table::new();
    for inc in includes {
        merge(&mut merged, load_table(&dir.join(inc), depth + 1)?);
    }
    merge(&mut merged, table);
    Ok(merged)
}

/// Reads, merges includes, validates and logs a case file.
pub fn parse_case(path: impl AsRef<Path>) -> Result<CaseConfig> {
    let path = path.as_ref();
    let table = load_table(path, 0)?;
    // re-render so that errors carry line and column of the merged tree
    let text = toml::to_string(&table).map_err(|e| Error::config(e.to_string()))?;
    let cfg =
        toml::from_str::<CaseConfig>(&text).map_err(|e| syntax_error(path, Some(&text), &e))?;
    cfg.validate()?;
    debug!("case {}:\n{}", path.display(), cfg.to_toml()?);
    Ok(cfg)
}

/// Parses case text (no includes) and validates it.
pub fn parse_case_str(text: &str) -> Result<CaseConfig> {
    let cfg = toml::from_str::<CaseConfig>(text)
        .map_err(|e| syntax_error(Path::new("<string>"), Some(text), &e))?;
    cfg.validate()?;
    Ok(cfg)
}

fn unknown_patch(key: &str) -> Error {
    let best = PATCH_NAMES
        .iter()
        .min_by_key(|p| strsim::levenshtein(key, p))
        .expect("six patches");
    Error::config(format!(
        "boundary.{key}: unknown patch; did you mean `{best}`?"
    ))
}

fn check_axis(axis: usize, key: &str) -> Result<()> {
    if axis > 2 {
        return Err(Error::config(format!(
            "{key}.axis must be 0, 1 or 2, got {axis}"
        )));
    }
    Ok(())
}

impl CaseConfig {
    /// Canonical TOML rendering.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(format!("cannot serialise case: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        let mesh = self.mesh()?;
        for key in self.boundary.keys() {
            if mesh.patch_id(key).is_none() {
                return Err(unknown_patch(key));
            }
        }
        let at = |key: &str, e: Error| match e {
            Error::Config(m) => Error::Config(format!("{key}: {m}")),
            other => other,
        };
        self.fluid
            .density
            .validate()
            .map_err(|e| at("fluid.density", e))?;
        self.fluid
            .viscosity
            .validate()
            .map_err(|e| at("fluid.viscosity", e))?;
        if !(self.medium.porosity > 0.0 && self.medium.porosity <= 1.0) {
            return Err(Error::config(format!(
                "medium.porosity: must be in (0, 1], got {}",
                self.medium.porosity
            )));
        }
        if self.medium.storativity < 0.0 {
            return Err(Error::config("medium.storativity: must be >= 0"));
        }
        let k = &self.medium.permeability;
        if !(k.value > 0.0) || k.anisotropy.iter().any(|a| !(*a > 0.0)) {
            return Err(Error::config(
                "medium.permeability: value and anisotropy must be > 0",
            ));
        }
        if let Some(r) = &k.random {
            r.validate()
                .map_err(|e| at("medium.permeability.random", e))?;
        }
        self.medium
            .dispersion
            .validate()
            .map_err(|e| at("medium.dispersion", e))?;
        for (name, p) in &self.boundary {
            if let Some(t) = &p.transport {
                t.validate()
                    .map_err(|e| at(&format!("boundary.{name}.transport"), e))?;
            }
            if let Some(PressureBcConfig::MassFlowRate { density, .. }) = &p.pressure {
                if !(*density > 0.0) {
                    return Err(Error::config(format!(
                        "boundary.{name}.pressure.density: must be > 0"
                    )));
                }
            }
        }
        if let Some(profile) = &self.initial.profile {
            match profile {
                Profile::Linear { axis, .. } | Profile::Step { axis, .. } => {
                    check_axis(*axis, "initial.profile")?
                }
            }
        }
        if let Some(n) = &self.initial.noise {
            check_axis(n.axis, "initial.noise")?;
        }
        for (i, s) in self.sources.iter().enumerate() {
            if let Some(c) = s.cells.iter().find(|&&c| c >= mesh.n_cells()) {
                return Err(Error::config(format!(
                    "sources[{i}].cells: cell {c} outside the {}-cell mesh",
                    mesh.n_cells()
                )));
            }
        }
        self.picard.validate().map_err(|e| at("picard", e))?;
        let t = &self.time;
        if !(t.end >= 0.0) || !(t.dt > 0.0) || t.write_interval.is_some_and(|w| !(w > 0.0)) {
            return Err(Error::config(
                "time: end must be >= 0, dt and writeInterval > 0",
            ));
        }
        let c = &t.courant;
        if !(c.max_courant > 0.0 && c.dt_min > 0.0 && c.dt_max >= c.dt_min && c.growth >= 1.0) {
            return Err(Error::config(format!(
                "time.courant: inconsistent controls {c:?}"
            )));
        }
        let known = |f: &str, key: &str| -> Result<()> {
            if FIELD_NAMES.contains(&f) {
                return Ok(());
            }
            let best = FIELD_NAMES
                .iter()
                .min_by_key(|n| strsim::levenshtein(f, n))
                .expect("non-empty");
            Err(Error::config(format!(
                "{key}: unknown field `{f}`; did you mean `{best}`?"
            )))
        };
        for f in &self.output.fields {
            known(f, "output.fields")?;
        }
        for f in &self.output.metrics {
            known(f, "output.metrics")?;
        }
        for h in &self.output.histograms {
            known(&h.field, "output.histograms")?;
            if h.bins == 0 {
                return Err(Error::config("output.histograms: bins must be >= 1"));
            }
        }
        if let Some(n) = &self.output.nusselt {
            mesh.patch(&n.patch).map_err(|e| at("output.nusselt", e))?;
        }
        if let Some(t) = &self.output.toe {
            mesh.patch(&t.from).map_err(|e| at("output.toe", e))?;
        }
        Ok(())
    }

    pub fn mesh(&self) -> Result<Mesh> {
        let [nx, ny, nz] = self.mesh.cells;
        Mesh::build_cartesian(nx, ny, nz, self.mesh.lengths, self.mesh.origin).map_err(
            |e| match e {
                Error::Config(m) => Error::Config(format!("mesh: {m}")),
                other => other,
            },
        )
    }

    /// Sets every seed in the case (random fields and initial noise).
    pub fn set_seed(&mut self, seed: u64) {
        if let Some(r) = &mut self.medium.permeability.random {
            r.seed = seed;
        }
        if let Some(n) = &mut self.initial.noise {
            n.seed = seed;
        }
    }

    /// Scalar permeability multiplier field `value * f(x)`.
    pub fn permeability_field(&self, mesh: &Mesh) -> Result<Vec<f64>> {
        let k = &self.medium.permeability;
        match &k.random {
            None => Ok(vec![k.value; mesh.n_cells()]),
            Some(spec) => {
                let f = geostat::generate(mesh, spec)?;
                Ok(f.values.iter().map(|v| k.value * v).collect())
            }
        }
    }

    pub fn initial_concentration(&self, mesh: &Mesh) -> Vec<f64> {
        let init = &self.initial;
        let lo = mesh.origin();
        let len = mesh.lengths();
        let base: Vec<f64> = (0..mesh.n_cells())
            .map(|c| {
                let x = mesh.cell_center(c);
                match init.profile {
                    None => init.value,
                    Some(Profile::Linear { axis, start, end }) => {
                        start + (end - start) * (x[axis] - lo[axis]) / len[axis]
                    }
                    Some(Profile::Step {
                        axis,
                        position,
                        below,
                        above,
                    }) => {
                        if x[axis] < position {
                            below
                        } else {
                            above
                        }
                    }
                }
            })
            .collect();
        let Some(noise) = &init.noise else {
            return base;
        };
        let (min, max) = base
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
                (a.min(v), b.max(v))
            });
        let mut rng = ChaCha20Rng::seed_from_u64(noise.seed);
        base.iter()
            .enumerate()
            .map(|(c, &v)| {
                // one draw per cell keeps the stream independent of the band
                let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
                let x = mesh.cell_center(c)[noise.axis];
                let inside = noise.band.is_none_or(|[a, b]| x >= a && x <= b);
                if inside {
                    (v + noise.amplitude * (2.0 * u - 1.0)).clamp(min, max)
                } else {
                    v
                }
            })
            .collect()
    }

    fn patch_config(&self, name: &str) -> PatchConfig {
        self.boundary.get(name).cloned().unwrap_or_default()
    }

    /// Unset non-empty patches default to no flux (logged).
    pub fn pressure_conditions(&self, mesh: &Mesh) -> Result<PatchConditions<PressureBc>> {
        let mut out = PatchConditions::new();
        for patch in mesh.patches() {
            let bc = match self.patch_config(patch.name).pressure {
                None => {
                    if !patch.empty {
                        info!("boundary.{}.pressure not set: noFlux", patch.name);
                    }
                    PressureBc::NoFlux
                }
                Some(PressureBcConfig::FixedPressure { value }) => {
                    PressureBc::FixedPressure { value }
                }
                Some(PressureBcConfig::DarcyFixedVelocity { velocity }) => {
                    PressureBc::DarcyFixedVelocity { velocity }
                }
                Some(PressureBcConfig::MassFlowRate { rate, density }) => {
                    let faces = mesh.patch_faces(mesh.patch_id(patch.name).expect("own patch"));
                    let area: f64 = faces.iter().map(|f| f.area).sum();
                    if area == 0.0 {
                        return Err(Error::config(format!(
                            "boundary.{}: massFlowRate on an empty patch",
                            patch.name
                        )));
                    }
                    let n = axis_unit(patch.axis);
                    let s = -patch.sign * rate / (density * area);
                    PressureBc::DarcyFixedVelocity {
                        velocity: [s * n[0], s * n[1], s * n[2]],
                    }
                }
                Some(PressureBcConfig::HydrostaticPressure {
                    reference_density,
                    reference_point,
                    reference_pressure,
                }) => PressureBc::HydrostaticPressure {
                    reference_density,
                    reference_point,
                    reference_pressure,
                },
                Some(PressureBcConfig::Robin { alpha, beta, gamma }) => {
                    PressureBc::Robin { alpha, beta, gamma }
                }
                Some(PressureBcConfig::NoFlux) => PressureBc::NoFlux,
            };
            out.set(patch.name, bc)?;
        }
        Ok(out)
    }

    /// Unset non-empty patches default to zero gradient (logged).
    pub fn transport_conditions(&self, mesh: &Mesh) -> Result<PatchConditions<TransportBc>> {
        let mut out = PatchConditions::new();
        for patch in mesh.patches() {
            let bc = self.patch_config(patch.name).transport.unwrap_or_else(|| {
                if !patch.empty {
                    info!("boundary.{}.transport not set: zeroGradient", patch.name);
                }
                TransportBc::ZeroGradient
            });
            out.set(patch.name, bc)?;
        }
        Ok(out)
    }

    pub fn transport_options(&self) -> TransportOptions {
        TransportOptions {
            time_scheme: self.transport.time_scheme,
            advection: self.transport.advection,
            correctors: self.transport.correctors,
            solver: self.solver.transport.into(),
        }
    }

    /// The coupled simulation described by the case, before `initialize`.
    pub fn simulation(&self) -> Result<Simulation> {
        self.validate()?;
        let mesh = self.mesh()?;
        let scalar = self.permeability_field(&mesh)?;
        let a = self.medium.permeability.anisotropy;
        let permeability = Field::new(
            scalar
                .iter()
                .map(|&k| SymTensor::diagonal([k * a[0], k * a[1], k * a[2]]))
                .collect(),
        );
        let c0 = self.initial_concentration(&mesh);
        let models = FluidModels {
            density: self.fluid.density.clone(),
            viscosity: self.fluid.viscosity.clone(),
        };
        let mut flow = FlowState::new(&mesh, permeability, 0.0, 0.0);
        models.update(&mut flow, &c0)?;
        flow.gravity = self.fluid.gravity;
        flow.storativity = vec![self.medium.storativity; mesh.n_cells()];
        flow.sources = self.sources.clone();
        let transport =
            TransportState::new(&mesh, c0, self.medium.porosity, self.medium.dispersion);
        Ok(Simulation {
            pressure_bcs: self.pressure_conditions(&mesh)?,
            transport_bcs: self.transport_conditions(&mesh)?,
            mesh,
            flow,
            transport,
            models,
            pressure: PressureOptions {
                formulation: self.fluid.formulation,
                continuity: self.fluid.continuity,
                dt: None,
                reference: None,
            },
            pressure_solver: self.solver.pressure.into(),
            transport_options: self.transport_options(),
            picard: self.picard,
        })
    }
}

/// Bundled case templates, `(name, text)`.
pub const TEMPLATES: &[(&str, &str)] = &[
    (
        "henry_diffusive",
        include_str!("../../cases/henry_diffusive.toml"),
    ),
    (
        "henry_dispersive",
        include_str!("../../cases/henry_dispersive.toml"),
    ),
    (
        "henry_heterogeneous",
        include_str!("../../cases/henry_heterogeneous.toml"),
    ),
    (
        "hrl_lognormal",
        include_str!("../../cases/hrl_lognormal.toml"),
    ),
    (
        "hrl_truncated",
        include_str!("../../cases/hrl_truncated.toml"),
    ),
    (
        "fingering_2d",
        include_str!("../../cases/fingering_2d.toml"),
    ),
    (
        "fingering_3d",
        include_str!("../../cases/fingering_3d.toml"),
    ),
    (
        "fivespot_dual",
        include_str!("../../cases/fivespot_dual.toml"),
    ),
];

/// A bundled template by name, parsed and validated.
pub fn template(name: &str) -> Result<CaseConfig> {
    match TEMPLATES.iter().find(|(n, _)| *n == name) {
        Some((_, text)) => parse_case_str(text),
        None => {
            let best = TEMPLATES
                .iter()
                .map(|(n, _)| *n)
                .min_by_key(|n| strsim::levenshtein(name, n))
                .expect("templates exist");
            Err(Error::config(format!(
                "unknown template `{name}`; did you mean `{best}`?"
            )))
        }
    }
}

/// A case file path, or the name of a bundled template.
pub fn load_case(spec: &str) -> Result<CaseConfig> {
    let path = PathBuf::from(spec);
    if path.exists() {
        parse_case(&path)
    } else if TEMPLATES.iter().any(|(n, _)| *n == spec) {
        template(spec)
    } else if spec.ends_with(".toml") || spec.contains('/') {
        Err(Error::config(format!("case file {spec} does not exist")))
    } else {
        template(spec)
    }
}
