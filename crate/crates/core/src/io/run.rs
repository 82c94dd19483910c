//! Drives a case from its configuration to files on disk.

use std::path::{Path, PathBuf};

use log::info;

use crate::coupling::{nusselt_number, Simulation, StepReport};
use crate::error::{Error, Result};
use crate::flow::{
    self, cell_velocity, DualControls, DualPorosityResult, Formulation, PressureOptions,
};
use crate::io::config::{CaseConfig, DualConfig, OutputConfig, ToeRequest};
use crate::io::stats::{field_metrics, isoline_length, spatial_pdf, Histogram};
use crate::io::vtk::{fmt_sig, write_vtk, CellData};
use crate::mesh::{dot, Mesh};

/// CSV with a header row and numbers at nine significant digits.
pub struct CsvTable {
    writer: csv::Writer<std::fs::File>,
    path: PathBuf,
}

impl CsvTable {
    pub fn create(path: impl AsRef<Path>, header: &[&str]) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut writer = csv::Writer::from_path(&path)?;
        writer.write_record(header)?;
        Ok(CsvTable { writer, path })
    }

    pub fn row(&mut self, label: Option<&str>, values: &[f64]) -> Result<()> {
        let mut rec: Vec<String> = label.map(str::to_string).into_iter().collect();
        rec.extend(values.iter().map(|v| fmt_sig(*v)));
        self.writer.write_record(&rec)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<PathBuf> {
        self.writer.flush()?;
        Ok(self.path)
    }
}

pub fn write_histogram(path: impl AsRef<Path>, h: &Histogram) -> Result<PathBuf> {
    let mut t = CsvTable::create(path, &["lower", "upper", "density", "mass"])?;
    for ((w, d), m) in h.edges.windows(2).zip(&h.density).zip(h.mass()) {
        t.row(None, &[w[0], w[1], *d, m])?;
    }
    t.finish()
}

/// Named cell field of the simulation state.
pub fn cell_field(sim: &Simulation, name: &str) -> Result<CellData> {
    let mesh = &sim.mesh;
    let scalar = |v: Vec<f64>| Ok(CellData::Scalar(name.to_string(), v));
    match name {
        "c" => scalar(sim.transport.concentration.clone()),
        "p" => scalar(sim.flow.total_pressure(mesh, sim.pressure.formulation)),
        "p_rgh" => match sim.pressure.formulation {
            Formulation::Reduced => scalar(sim.flow.pressure.clone()),
            Formulation::Total => scalar(
                (0..mesh.n_cells())
                    .map(|c| {
                        sim.flow.pressure[c]
                            - sim.flow.density[c] * dot(sim.flow.gravity, mesh.cell_center(c))
                    })
                    .collect(),
            ),
        },
        "K" => scalar(sim.flow.permeability.iter().map(|k| k.get(0, 0)).collect()),
        "rho" => scalar(sim.flow.density.clone()),
        "mu" => scalar(sim.flow.viscosity.clone()),
        "phi" => scalar(sim.transport.porosity.clone()),
        "U" => Ok(CellData::Vector(
            name.to_string(),
            cell_velocity(mesh, &sim.flow.flux),
        )),
        other => Err(Error::config(format!("unknown output field `{other}`"))),
    }
}

fn scalar_values(data: &CellData) -> Vec<f64> {
    match data {
        CellData::Scalar(_, v) => v.clone(),
        CellData::Vector(_, v) => v.iter().map(|x| dot(*x, *x).sqrt()).collect(),
    }
}

/// Distance from the `from` patch, along the lowest layer of cells, to the
/// farthest crossing of `level` (linear interpolation between centres).
pub fn toe_length(mesh: &Mesh, c: &[f64], toe: &ToeRequest) -> Result<f64> {
    let patch = mesh.patch(&toe.from)?;
    let axis = patch.axis;
    let n = mesh.dims()[axis];
    let idx = |i: usize| {
        let mut ijk = [0; 3];
        ijk[axis] = if patch.sign > 0.0 { n - 1 - i } else { i };
        mesh.cell_index(ijk)
    };
    let wall = if patch.sign > 0.0 {
        mesh.origin()[axis] + mesh.lengths()[axis]
    } else {
        mesh.origin()[axis]
    };
    let dist = |i: usize| (mesh.cell_center(idx(i))[axis] - wall).abs();
    let mut reach = 0.0;
    for i in 0..n {
        if c[idx(i)] >= toe.level {
            reach = dist(i);
            if i + 1 < n && c[idx(i + 1)] < toe.level {
                let (a, b) = (c[idx(i)], c[idx(i + 1)]);
                reach = dist(i) + (a - toe.level) / (a - b) * (dist(i + 1) - dist(i));
            }
        }
    }
    Ok(reach)
}

/// Output-side diagnostics of one state, in time-series column order.
fn diagnostics(sim: &Simulation, out: &OutputConfig) -> Result<Vec<f64>> {
    let c = &sim.transport.concentration;
    let mut v = Vec::new();
    if let Some(level) = out.isoline {
        v.push(isoline_length(&sim.mesh, c, level)?);
    }
    if let Some(n) = &out.nusselt {
        v.push(nusselt_number(
            &sim.mesh,
            c,
            &n.patch,
            n.wall_value,
            n.delta,
            n.height,
        )?);
    }
    if let Some(t) = &out.toe {
        v.push(toe_length(&sim.mesh, c, t)?);
    }
    Ok(v)
}

fn diagnostic_names(out: &OutputConfig) -> Vec<&'static str> {
    let mut v = Vec::new();
    if out.isoline.is_some() {
        v.push("isoline_length");
    }
    if out.nusselt.is_some() {
        v.push("nusselt");
    }
    if out.toe.is_some() {
        v.push("toe");
    }
    v
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub files: Vec<PathBuf>,
    pub reports: Vec<StepReport>,
    pub dual: Option<DualPorosityResult>,
    /// Final diagnostics (isoline length, Nusselt number, toe) as configured.
    pub diagnostics: Vec<(String, f64)>,
}

struct Writer<'a> {
    cfg: &'a CaseConfig,
    dir: &'a Path,
    index: usize,
    files: Vec<PathBuf>,
    metrics: Option<CsvTable>,
}

impl Writer<'_> {
    fn snapshot(&mut self, sim: &Simulation) -> Result<()> {
        let out = &self.cfg.output;
        let k = self.index;
        self.index += 1;
        let fields = out
            .fields
            .iter()
            .map(|f| cell_field(sim, f))
            .collect::<Result<Vec<_>>>()?;
        if out.vtk {
            let path = self.dir.join(format!("{}_{k:04}.vtk", self.cfg.name));
            let title = format!("{} t={}", self.cfg.name, fmt_sig(sim.time()));
            write_vtk(&path, &sim.mesh, &title, &fields)?;
            self.files.push(path);
        }
        if let Some(table) = &mut self.metrics {
            for f in &out.metrics {
                let m = field_metrics(&sim.mesh, &scalar_values(&cell_field(sim, f)?))?;
                table.row(
                    Some(f),
                    &[sim.time(), m.mean, m.variance, m.min, m.max, m.integral],
                )?;
            }
        }
        for h in &out.histograms {
            let values = scalar_values(&cell_field(sim, &h.field)?);
            let hist = spatial_pdf(&sim.mesh, &values, h.bins, h.spacing)?;
            let path = self
                .dir
                .join(format!("{}_pdf_{}_{k:04}.csv", self.cfg.name, h.field));
            self.files.push(write_histogram(&path, &hist)?);
        }
        Ok(())
    }
}

/// Runs the case and writes VTK snapshots, the time series, metrics and
/// histograms into `dir` (created if needed).
pub fn run_case(cfg: &CaseConfig, dir: &Path) -> Result<RunSummary> {
    cfg.validate()?;
    std::fs::create_dir_all(dir)
        .map_err(|e| Error::config(format!("cannot create {}: {e}", dir.display())))?;
    if let Some(dual) = &cfg.dual {
        return run_dual(cfg, dual, dir);
    }
    let mut sim = cfg.simulation()?;
    sim.initialize()?;
    let out = &cfg.output;
    let metrics = if out.metrics.is_empty() {
        None
    } else {
        Some(CsvTable::create(
            dir.join(format!("{}_metrics.csv", cfg.name)),
            &[
                "field", "time", "mean", "variance", "min", "max", "integral",
            ],
        )?)
    };
    let mut writer = Writer {
        cfg,
        dir,
        index: 0,
        files: Vec::new(),
        metrics,
    };
    writer.snapshot(&sim)?;
    let names = diagnostic_names(out);
    let mut series = if out.time_series {
        let mut header = vec![
            "time",
            "dt",
            "outer_iterations",
            "converged",
            "mass",
            "balance_error",
        ];
        header.extend(&names);
        Some(CsvTable::create(
            dir.join(format!("{}_series.csv", cfg.name)),
            &header,
        )?)
    } else {
        None
    };
    let t = &cfg.time;
    let reports = if t.end > 0.0 {
        let write_interval = t.write_interval;
        sim.run(t.end, t.dt, &t.courant, write_interval, |s, r, write| {
            if let Some(table) = &mut series {
                let mut row = vec![
                    r.time,
                    r.dt,
                    r.outer_iterations as f64,
                    if r.converged { 1.0 } else { 0.0 },
                    s.transport.mass(&s.mesh, &s.transport.concentration),
                    r.balance_error(),
                ];
                row.extend(diagnostics(s, out)?);
                table.row(None, &row)?;
            }
            if write {
                writer.snapshot(s)?;
            }
            Ok(())
        })?
    } else {
        Vec::new()
    };
    if t.end > 0.0 && t.write_interval.is_none() {
        writer.snapshot(&sim)?;
    }
    let mut files = writer.files;
    if let Some(m) = writer.metrics {
        files.push(m.finish()?);
    }
    if let Some(s) = series {
        files.push(s.finish()?);
    }
    let diagnostics = names
        .iter()
        .map(|n| n.to_string())
        .zip(diagnostics(&sim, out)?)
        .collect();
    info!(
        "{}: {} steps, {} files",
        cfg.name,
        reports.len(),
        files.len()
    );
    Ok(RunSummary {
        files,
        reports,
        dual: None,
        diagnostics,
    })
}

fn run_dual(cfg: &CaseConfig, dual: &DualConfig, dir: &Path) -> Result<RunSummary> {
    let spot = &dual.five_spot;
    let mesh = spot.mesh()?;
    let mut state = spot.state(&mesh);
    let bcs = spot.boundary_conditions();
    let controls = DualControls {
        scheme: dual.scheme,
        tolerance: dual.tolerance,
        max_outer: dual.max_outer,
        ..DualControls::default()
    };
    let result = flow::solve_dual_porosity(
        &mesh,
        &mut state,
        &bcs,
        &bcs,
        &PressureOptions::default(),
        &controls,
    )?;
    if !result.converged {
        return Err(Error::Numerical(format!(
            "dual-porosity iterations not converged after {} outer iterations",
            result.iterations
        )));
    }
    let fields = vec![
        CellData::Scalar("p_matrix".into(), state.matrix.pressure.clone()),
        CellData::Scalar("p_fracture".into(), state.fracture.pressure.clone()),
        CellData::Scalar("transfer".into(), state.transfer(&mesh)),
        CellData::Vector("U_matrix".into(), cell_velocity(&mesh, &state.matrix.flux)),
        CellData::Vector(
            "U_fracture".into(),
            cell_velocity(&mesh, &state.fracture.flux),
        ),
    ];
    let vtk = dir.join(format!("{}_0000.vtk", cfg.name));
    write_vtk(&vtk, &mesh, &cfg.name, &fields)?;
    let mut table = CsvTable::create(
        dir.join(format!("{}_convergence.csv", cfg.name)),
        &["iteration", "residual"],
    )?;
    for (i, r) in result.history.iter().enumerate() {
        table.row(None, &[(i + 1) as f64, *r])?;
    }
    let files = vec![vtk, table.finish()?];
    Ok(RunSummary {
        files,
        reports: Vec::new(),
        dual: Some(result),
        diagnostics: Vec::new(),
    })
}

/// Generates the case's permeability field and writes it as VTK.
pub fn generate_field(cfg: &CaseConfig, dir: &Path) -> Result<PathBuf> {
    cfg.validate()?;
    std::fs::create_dir_all(dir)
        .map_err(|e| Error::config(format!("cannot create {}: {e}", dir.display())))?;
    let mesh = cfg.mesh()?;
    let k = cfg.permeability_field(&mesh)?;
    let path = dir.join(format!("{}_field.vtk", cfg.name));
    write_vtk(
        &path,
        &mesh,
        &format!("{} permeability", cfg.name),
        &[CellData::Scalar("K".into(), k)],
    )?;
    Ok(path)
}
