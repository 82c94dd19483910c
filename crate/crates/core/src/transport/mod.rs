//! Scalar transport `d(phi c)/dt + div(v c) - div(phi D grad c) = Q c*` on
//! the face fluxes of the flow solution.
//!
//! Advection is first-order upwind, optionally corrected towards a limited
//! linear face value. Dispersion uses harmonic face values of `n.(phi D).n`;
//! the off-normal part of the tensor and the limiter enter as deferred
//! corrections, re-solving the implicit system `correctors` times.

pub mod bc;

use serde::{Deserialize, Serialize};

use crate::constitutive::{dispersion_tensor, DispersionParameters};
use crate::error::{Error, Result};
use crate::flow::{cell_velocity, Continuity, FlowState, PatchConditions};
use crate::linsolve::{self, SolveReport, SolverControls, SparseSystem};
use crate::mesh::{harmonic_face_values, FaceField, Mesh, SymTensor};

pub use bc::{TransportBc, TransportBoundary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeScheme {
    #[default]
    Euler,
    Bdf2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Advection {
    #[default]
    Upwind,
    /// Limited linear face values (`psi = max(0, min(2r, 1))`).
    LimitedLinear,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransportOptions {
    pub time_scheme: TimeScheme,
    pub advection: Advection,
    /// Deferred-correction sweeps for cross dispersion and the limiter.
    pub correctors: usize,
    pub solver: SolverControls,
}

impl Default for TransportOptions {
    fn default() -> Self {
        TransportOptions {
            time_scheme: TimeScheme::Euler,
            advection: Advection::Upwind,
            correctors: 2,
            solver: SolverControls::transport(),
        }
    }
}

/// Volumetric inflow (`rate > 0`, carrying `concentration`) or extraction of
/// resident fluid (`rate < 0`), in volume per time for one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellSource {
    pub cell: usize,
    pub rate: f64,
    pub concentration: f64,
}

/// Per-cell volumetric source rates consistent with the flow continuity
/// equation: Boussinesq continuity injects `rho* q / rho` in volume.
pub fn cell_sources(mesh: &Mesh, flow: &FlowState, continuity: Continuity) -> Vec<CellSource> {
    let vol = mesh.cell_volume();
    let mut out = Vec::new();
    for s in &flow.sources {
        for &c in &s.cells {
            let rho_in = if s.rate >= 0.0 {
                s.density
            } else {
                flow.density[c]
            };
            let scale = match continuity {
                Continuity::Boussinesq => rho_in / flow.density[c],
                Continuity::Compressible => 1.0,
            };
            out.push(CellSource {
                cell: c,
                rate: s.rate * vol * scale,
                concentration: s.concentration,
            });
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct TransportState {
    pub concentration: Vec<f64>,
    /// Value at the start of the current step.
    pub old: Vec<f64>,
    /// Value one step earlier (BDF2 history).
    pub older: Option<Vec<f64>>,
    pub porosity: Vec<f64>,
    pub dispersion: Vec<DispersionParameters>,
    pub time: f64,
    /// Size of the last committed step.
    pub last_dt: Option<f64>,
}

impl TransportState {
    pub fn new(
        mesh: &Mesh,
        concentration: Vec<f64>,
        porosity: f64,
        dispersion: DispersionParameters,
    ) -> Self {
        let n = mesh.n_cells();
        TransportState {
            old: concentration.clone(),
            concentration,
            older: None,
            porosity: vec![porosity; n],
            dispersion: vec![dispersion; n],
            time: 0.0,
            last_dt: None,
        }
    }

    fn check(&self, mesh: &Mesh) -> Result<()> {
        let n = mesh.n_cells();
        for (name, len) in [
            ("concentration", self.concentration.len()),
            ("old concentration", self.old.len()),
            ("porosity", self.porosity.len()),
            ("dispersion", self.dispersion.len()),
        ] {
            if len != n {
                return Err(Error::config(format!(
                    "{name} has {len} values for {n} cells"
                )));
            }
        }
        if let Some(c) = self.porosity.iter().position(|&p| !(p > 0.0 && p <= 1.0)) {
            return Err(Error::Domain(format!(
                "porosity {} outside (0, 1] in cell {c}",
                self.porosity[c]
            )));
        }
        for d in &self.dispersion {
            d.validate()?;
        }
        Ok(())
    }

    /// Solute mass `sum phi c V`.
    pub fn mass(&self, mesh: &Mesh, c: &[f64]) -> f64 {
        let vol = mesh.cell_volume();
        c.iter().zip(&self.porosity).map(|(c, p)| p * c * vol).sum()
    }

    /// Accepts `c` as the solution at `time + dt` and shifts the history.
    pub fn commit(&mut self, c: Vec<f64>, dt: f64) {
        let old = std::mem::replace(&mut self.old, c.clone());
        self.older = Some(old);
        self.concentration = c;
        self.time += dt;
        self.last_dt = Some(dt);
    }
}

/// Coefficients `(a0, a1, a2)` of `(a0 c + a1 c_old + a2 c_older) / dt`.
fn time_coefficients(scheme: TimeScheme, state: &TransportState, dt: f64) -> [f64; 3] {
    match (scheme, &state.older, state.last_dt) {
        (TimeScheme::Bdf2, Some(_), Some(prev)) => {
            let w = dt / prev;
            [(1.0 + 2.0 * w) / (1.0 + w), -(1.0 + w), w * w / (1.0 + w)]
        }
        (TimeScheme::Bdf2, ..) => {
            log::debug!("BDF2 without history: first step uses backward Euler");
            [1.0, -1.0, 0.0]
        }
        (TimeScheme::Euler, ..) => [1.0, -1.0, 0.0],
    }
}

/// Cell dispersion tensors `phi D` from the cell-centred Darcy velocity.
pub fn cell_dispersion(mesh: &Mesh, state: &TransportState, flux: &FaceField) -> Vec<SymTensor> {
    cell_velocity(mesh, flux)
        .iter()
        .zip(&state.dispersion)
        .zip(&state.porosity)
        .map(|((&v, d), &phi)| dispersion_tensor(v, d).scale(phi))
        .collect()
}

#[derive(Debug, Clone)]
pub struct TransportAssembly {
    pub system: SparseSystem,
    /// Diffusive face conductances (harmonic `n.(phi D).n` times area over distance).
    pub conductance: FaceField,
    pub boundary: Vec<TransportBoundary>,
    pub tensors: Vec<SymTensor>,
    time: [f64; 3],
    dt: f64,
}

/// Implicit transport system for a step of size `dt` from `state.old`.
pub fn assemble_transport(
    mesh: &Mesh,
    state: &TransportState,
    flux: &FaceField,
    sources: &[CellSource],
    bcs: &PatchConditions<TransportBc>,
    scheme: TimeScheme,
    dt: f64,
) -> Result<TransportAssembly> {
    state.check(mesh)?;
    if !(dt > 0.0) {
        return Err(Error::config(format!(
            "time step must be positive, got {dt}"
        )));
    }
    let tensors = cell_dispersion(mesh, state, flux);
    let conductance = harmonic_face_values(mesh, |c, axis| tensors[c].get(axis, axis));
    let boundary = bc::boundary_coefficients(mesh, bcs, &conductance.boundary, &flux.boundary)?;
    let mut system = SparseSystem::for_mesh(mesh);

    for (k, f) in mesh.faces().iter().enumerate() {
        let (o, n) = (f.owner, f.neighbour);
        let g = conductance.internal[k];
        let phi = flux.internal[k];
        system.diag[o] += g + phi.max(0.0);
        system.diag[n] += g + (-phi).max(0.0);
        system.upper[k] = -g + phi.min(0.0);
        system.lower[k] = -g - phi.max(0.0);
    }
    for (i, b) in mesh.boundary_faces().iter().enumerate() {
        system.diag[b.cell] += boundary[i].internal;
        system.rhs[b.cell] -= boundary[i].constant;
    }
    let time = time_coefficients(scheme, state, dt);
    let vol = mesh.cell_volume();
    for c in 0..mesh.n_cells() {
        let m = state.porosity[c] * vol / dt;
        system.diag[c] += time[0] * m;
        let hist = time[1] * state.old[c] + state.older.as_ref().map_or(0.0, |o| time[2] * o[c]);
        system.rhs[c] -= m * hist;
    }
    for s in sources {
        if s.cell >= mesh.n_cells() {
            return Err(Error::config(format!(
                "source cell {} outside mesh",
                s.cell
            )));
        }
        if s.rate >= 0.0 {
            system.rhs[s.cell] += s.rate * s.concentration;
        } else {
            system.diag[s.cell] -= s.rate;
        }
    }
    Ok(TransportAssembly {
        system,
        conductance,
        boundary,
        tensors,
        time,
        dt,
    })
}

/// Central-difference cell gradients (one-sided at the domain edge).
pub fn cell_gradient(mesh: &Mesh, c: &[f64]) -> Vec<[f64; 3]> {
    let dims = mesh.dims();
    let h = mesh.spacing();
    (0..mesh.n_cells())
        .map(|cell| {
            let ijk = mesh.ijk(cell);
            let mut g = [0.0; 3];
            for a in 0..3 {
                if dims[a] == 1 {
                    continue;
                }
                let s = mesh.stride(a);
                let lo = if ijk[a] > 0 { cell - s } else { cell };
                let hi = if ijk[a] + 1 < dims[a] { cell + s } else { cell };
                let span = (hi - lo) / s;
                g[a] = (c[hi] - c[lo]) / (span as f64 * h[a]);
            }
            g
        })
        .collect()
}

/// Explicit face fluxes (owner to neighbour) from the off-normal dispersion
/// components and the limited-linear correction, for the current iterate.
fn deferred_fluxes(
    mesh: &Mesh,
    a: &TransportAssembly,
    flux: &FaceField,
    c: &[f64],
    advection: Advection,
) -> Vec<f64> {
    let grad = cell_gradient(mesh, c);
    let dims = mesh.dims();
    mesh.faces()
        .iter()
        .enumerate()
        .map(|(k, f)| {
            let (o, n) = (f.owner, f.neighbour);
            let mut q = 0.0;
            for b in (0..3).filter(|&b| b != f.axis && dims[b] > 1) {
                let d = 0.5 * (a.tensors[o].get(f.axis, b) + a.tensors[n].get(f.axis, b));
                if d != 0.0 {
                    q -= f.area * d * 0.5 * (grad[o][b] + grad[n][b]);
                }
            }
            if advection == Advection::LimitedLinear {
                let phi = flux.internal[k];
                let s = mesh.stride(f.axis);
                let i = mesh.ijk(o)[f.axis];
                // upwind, downwind and far-upwind cells along the face axis
                let (up, down, far) = if phi >= 0.0 {
                    (o, n, (i > 0).then(|| o - s))
                } else {
                    (n, o, (i + 2 < dims[f.axis]).then(|| n + s))
                };
                if let Some(far) = far {
                    let jump = c[down] - c[up];
                    if jump != 0.0 {
                        let r = (c[up] - c[far]) / jump;
                        let psi = (2.0 * r).clamp(0.0, 1.0);
                        q += phi * 0.5 * psi * jump;
                    }
                }
            }
            q
        })
        .collect()
}

fn needs_correction(a: &TransportAssembly, advection: Advection) -> bool {
    advection == Advection::LimitedLinear
        || a.tensors
            .iter()
            .any(|t| t.xy != 0.0 || t.xz != 0.0 || t.yz != 0.0)
}

#[derive(Debug, Clone)]
pub struct TransportSolution {
    pub concentration: Vec<f64>,
    pub assembly: TransportAssembly,
    /// Explicit internal-face corrections applied in the last solve.
    pub corrections: Vec<f64>,
    pub reports: Vec<SolveReport>,
}

impl TransportSolution {
    /// Outward scalar flux through every boundary face.
    pub fn boundary_flux(&self, mesh: &Mesh) -> Vec<f64> {
        mesh.boundary_faces()
            .iter()
            .zip(&self.assembly.boundary)
            .map(|(b, coeff)| coeff.flux(self.concentration[b.cell]))
            .collect()
    }

    /// `sum phi V (a0 c + a1 c_old + a2 c_older) / dt`: the discrete rate of
    /// change of solute mass used by the scheme.
    pub fn mass_rate(&self, mesh: &Mesh, state: &TransportState) -> f64 {
        let [a0, a1, a2] = self.assembly.time;
        let vol = mesh.cell_volume();
        (0..mesh.n_cells())
            .map(|c| {
                let older = state.older.as_ref().map_or(0.0, |o| a2 * o[c]);
                state.porosity[c] * vol * (a0 * self.concentration[c] + a1 * state.old[c] + older)
            })
            .sum::<f64>()
            / self.assembly.dt
    }
}

/// Solves one step from `state.old` without committing it.
#[allow(clippy::too_many_arguments)]
pub fn solve_transport(
    mesh: &Mesh,
    state: &TransportState,
    flux: &FaceField,
    sources: &[CellSource],
    bcs: &PatchConditions<TransportBc>,
    options: &TransportOptions,
    dt: f64,
    guess: &[f64],
) -> Result<TransportSolution> {
    let assembly = assemble_transport(mesh, state, flux, sources, bcs, options.time_scheme, dt)?;
    let mut reports = vec![linsolve::solve(&assembly.system, guess, &options.solver)?];
    let mut c = reports[0].x.clone();
    let mut corrections = vec![0.0; mesh.faces().len()];
    if needs_correction(&assembly, options.advection) {
        for _ in 0..options.correctors {
            corrections = deferred_fluxes(mesh, &assembly, flux, &c, options.advection);
            let mut sys = assembly.system.clone();
            for (k, f) in mesh.faces().iter().enumerate() {
                sys.rhs[f.owner] -= corrections[k];
                sys.rhs[f.neighbour] += corrections[k];
            }
            let r = linsolve::solve(&sys, &c, &options.solver)?;
            c.copy_from_slice(&r.x);
            reports.push(r);
        }
    }
    if let Some(i) = c.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            field: "concentration".into(),
            cell: i,
        });
    }
    Ok(TransportSolution {
        concentration: c,
        assembly,
        corrections,
        reports,
    })
}

/// Courant-number time step control.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CourantControls {
    #[serde(rename = "maxCo")]
    pub max_courant: f64,
    #[serde(rename = "dtMin")]
    pub dt_min: f64,
    #[serde(rename = "dtMax")]
    pub dt_max: f64,
    /// Largest ratio between consecutive steps.
    pub growth: f64,
}

impl Default for CourantControls {
    fn default() -> Self {
        CourantControls {
            max_courant: 0.5,
            dt_min: 1e-12,
            dt_max: f64::INFINITY,
            growth: 1.2,
        }
    }
}

/// `min(dt_max, growth dt_prev, Co_max min_cells phi V / sum outgoing flux)`.
pub fn adaptive_dt(
    mesh: &Mesh,
    flux: &FaceField,
    porosity: &[f64],
    ctl: &CourantControls,
    dt_prev: f64,
) -> Result<f64> {
    let mut out = vec![0.0; mesh.n_cells()];
    for (k, f) in mesh.faces().iter().enumerate() {
        let q = flux.internal[k];
        if q > 0.0 {
            out[f.owner] += q;
        } else {
            out[f.neighbour] -= q;
        }
    }
    for (i, b) in mesh.boundary_faces().iter().enumerate() {
        out[b.cell] += flux.boundary[i].max(0.0);
    }
    let vol = mesh.cell_volume();
    let mut dt = ctl.dt_max.min(ctl.growth * dt_prev);
    let mut limiting = None;
    for (c, &q) in out.iter().enumerate() {
        if q > 0.0 {
            let local = ctl.max_courant * porosity[c] * vol / q;
            if local < dt {
                dt = local;
                limiting = Some(c);
            }
        }
    }
    if dt < ctl.dt_min {
        return Err(Error::TimeStepTooSmall {
            required: dt,
            minimum: ctl.dt_min,
            cell: limiting.unwrap_or(0),
        });
    }
    Ok(dt)
}
