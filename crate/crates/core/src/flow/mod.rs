//! Darcy pressure equation: assembly in total or reduced (`p_rgh = p - rho g.x`)
//! pressure, face fluxes, boundary conditions and the dual-porosity system.
//!
//! Face mobilities are harmonic means of `K_nn / mu`. The volumetric flux
//! through an internal face (owner `O` to neighbour `N`) is
//!
//! * total form:   `phi = -T (p_N - p_O) + T rho_f g.(x_N - x_O)`
//! * reduced form: `phi = -T (p_N - p_O) - T (g.x_f)(rho_N - rho_O)`
//!
//! Boussinesq continuity balances volumetric fluxes, compressible continuity
//! balances mass fluxes `rho_f phi` and adds the storage and
//! concentration-rate terms.

pub mod bc;
pub mod dual;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linsolve::{self, SolveReport, SolverControls, SparseSystem};
use crate::mesh::{dot, harmonic_face_values, FaceField, Mesh, TensorField, Vec3};

pub use bc::{BoundaryCoeffs, PatchConditions, PressureBc};
pub use dual::{
    solve_dual_porosity, DualControls, DualPorosityResult, DualPorosityState, DualScheme,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Formulation {
    Total,
    #[default]
    Reduced,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Continuity {
    #[default]
    Boussinesq,
    Compressible,
}

/// Volumetric source `rate` (per unit cell volume and time) injecting fluid
/// of `density` and solute `concentration`. Negative rates extract resident
/// fluid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Source {
    pub cells: Vec<usize>,
    pub rate: f64,
    pub density: f64,
    #[serde(default)]
    pub concentration: f64,
}

#[derive(Debug, Clone)]
pub struct FlowState {
    /// Solved pressure variable (`p` or `p_rgh`).
    pub pressure: Vec<f64>,
    pub pressure_old: Vec<f64>,
    /// Volumetric face fluxes, positive owner to neighbour / outward.
    pub flux: FaceField,
    pub density: Vec<f64>,
    pub viscosity: Vec<f64>,
    pub permeability: TensorField,
    pub storativity: Vec<f64>,
    pub gravity: Vec3,
    pub sources: Vec<Source>,
}

impl FlowState {
    pub fn new(mesh: &Mesh, permeability: TensorField, density: f64, viscosity: f64) -> Self {
        let n = mesh.n_cells();
        FlowState {
            pressure: vec![0.0; n],
            pressure_old: vec![0.0; n],
            flux: FaceField::zeros(mesh),
            density: vec![density; n],
            viscosity: vec![viscosity; n],
            permeability,
            storativity: vec![0.0; n],
            gravity: [0.0; 3],
            sources: Vec::new(),
        }
    }

    /// Total pressure per cell, whatever the solved variable.
    pub fn total_pressure(&self, mesh: &Mesh, formulation: Formulation) -> Vec<f64> {
        match formulation {
            Formulation::Total => self.pressure.clone(),
            Formulation::Reduced => (0..mesh.n_cells())
                .map(|c| {
                    self.pressure[c] + self.density[c] * dot(self.gravity, mesh.cell_center(c))
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PressureOptions {
    pub formulation: Formulation,
    pub continuity: Continuity,
    /// Time step for the storage term; `None` assembles a steady problem.
    pub dt: Option<f64>,
    /// Pins `(cell, value)` when the problem has no Dirichlet-type boundary
    /// and no storage; `None` uses cell 0 and value 0.
    pub reference: Option<(usize, f64)>,
}

impl Default for PressureOptions {
    fn default() -> Self {
        PressureOptions {
            formulation: Formulation::Reduced,
            continuity: Continuity::Boussinesq,
            dt: None,
            reference: None,
        }
    }
}

/// Lagged `rho'(c) phi dc/dt` data for compressible continuity.
#[derive(Debug, Clone, Copy)]
pub struct ConcentrationRate<'a> {
    pub drho_dc: &'a [f64],
    pub dc_dt: &'a [f64],
    pub porosity: &'a [f64],
}

#[derive(Debug, Clone)]
pub struct PressureAssembly {
    pub system: SparseSystem,
    /// Face mobilities `T_f` (harmonic `K/mu`, times area over distance).
    pub mobility: FaceField,
    /// Explicit buoyancy part of each face flux.
    pub gravity_flux: FaceField,
    /// Continuity weights (1 or face density).
    pub weights: FaceField,
    pub boundary: Vec<BoundaryCoeffs>,
    pub formulation: Formulation,
    pub pinned: Option<usize>,
    /// No Dirichlet-type boundary and no storage: pressure is defined up to
    /// a constant unless pinned.
    pub floating: bool,
}

fn mobility(mesh: &Mesh, state: &FlowState) -> FaceField {
    harmonic_face_values(mesh, |c, axis| {
        state.permeability[c].get(axis, axis) / state.viscosity[c]
    })
}

fn check_state(mesh: &Mesh, state: &FlowState) -> Result<()> {
    let n = mesh.n_cells();
    state.permeability.check_bound(mesh, "permeability")?;
    for (name, v) in [
        ("pressure", &state.pressure),
        ("density", &state.density),
        ("viscosity", &state.viscosity),
        ("storativity", &state.storativity),
    ] {
        if v.len() != n {
            return Err(Error::config(format!(
                "{name} has {} values for {n} cells",
                v.len()
            )));
        }
    }
    if let Some(c) = state.viscosity.iter().position(|&m| !(m > 0.0)) {
        return Err(Error::Domain(format!("non-positive viscosity in cell {c}")));
    }
    crate::mesh::face_transmissibility(mesh, &state.permeability).map(|_| ())
}

/// Boundary coefficients for every boundary face (empty patches get zero flux).
pub fn boundary_coefficients(
    mesh: &Mesh,
    state: &FlowState,
    bcs: &PatchConditions<PressureBc>,
    formulation: Formulation,
    boundary_mobility: &[f64],
) -> Result<Vec<BoundaryCoeffs>> {
    bcs.check(mesh, "pressure")?;
    let mut out = vec![BoundaryCoeffs::default(); mesh.boundary_faces().len()];
    for (p, patch) in mesh.patches().iter().enumerate() {
        if patch.empty {
            continue;
        }
        let bc = bcs.get(p).expect("checked");
        let range = patch.range();
        let faces = mesh.patch_faces(p);
        match *bc {
            PressureBc::FixedPressure { value } => {
                for i in range.clone() {
                    out[i] = BoundaryCoeffs::dirichlet(boundary_mobility[i], value);
                }
            }
            PressureBc::DarcyFixedVelocity { velocity } => {
                let c = bc::darcy_fixed_velocity(mesh, p, velocity, boundary_mobility)?;
                out[range.clone()].copy_from_slice(&c);
            }
            PressureBc::HydrostaticPressure {
                reference_density,
                reference_point,
                reference_pressure,
            } => {
                let values = bc::hydrostatic_pressure(
                    mesh,
                    p,
                    reference_density,
                    reference_point,
                    reference_pressure,
                    state.gravity,
                    formulation,
                    &state.density,
                );
                for (i, v) in range.clone().zip(values) {
                    out[i] = BoundaryCoeffs::dirichlet(boundary_mobility[i], v);
                }
            }
            PressureBc::Robin { alpha, beta, gamma } => {
                for (i, b) in range.clone().zip(faces) {
                    out[i] = BoundaryCoeffs::robin(
                        boundary_mobility[i],
                        b.half_distance,
                        alpha,
                        beta,
                        gamma,
                    )?;
                }
            }
            PressureBc::NoFlux => {
                for i in range.clone() {
                    out[i] = BoundaryCoeffs::flux(0.0);
                }
            }
        }
    }
    Ok(out)
}

/// Assembles the pressure equation for the current density, viscosity and
/// boundary data.
pub fn assemble_pressure(
    mesh: &Mesh,
    state: &FlowState,
    bcs: &PatchConditions<PressureBc>,
    options: &PressureOptions,
    rate: Option<ConcentrationRate<'_>>,
) -> Result<PressureAssembly> {
    let mut a = assemble_unpinned(mesh, state, bcs, options, rate)?;
    if a.floating {
        let (cell, value) = options.reference.unwrap_or((0, 0.0));
        pin(&mut a, cell, value)?;
    }
    Ok(a)
}

/// Adds a diagonal penalty fixing `cell` to `value`.
pub(crate) fn pin(a: &mut PressureAssembly, cell: usize, value: f64) -> Result<()> {
    let n = a.system.n();
    if cell >= n {
        return Err(Error::config(format!(
            "pressure reference cell {cell} outside mesh"
        )));
    }
    let d = a.system.diag[cell].max(f64::MIN_POSITIVE);
    a.system.diag[cell] += d;
    a.system.rhs[cell] += d * value;
    a.pinned = Some(cell);
    Ok(())
}

pub(crate) fn assemble_unpinned(
    mesh: &Mesh,
    state: &FlowState,
    bcs: &PatchConditions<PressureBc>,
    options: &PressureOptions,
    rate: Option<ConcentrationRate<'_>>,
) -> Result<PressureAssembly> {
    check_state(mesh, state)?;
    if let Some(dt) = options.dt {
        if !(dt > 0.0) {
            return Err(Error::config(format!(
                "time step must be positive, got {dt}"
            )));
        }
    }
    let mob = mobility(mesh, state);
    let boundary = boundary_coefficients(mesh, state, bcs, options.formulation, &mob.boundary)?;
    let g = state.gravity;
    let rho = &state.density;
    let compressible = options.continuity == Continuity::Compressible;

    let mut system = SparseSystem::for_mesh(mesh);
    let mut gravity_flux = FaceField::zeros(mesh);
    let mut weights = FaceField::zeros(mesh);

    for (k, f) in mesh.faces().iter().enumerate() {
        let (o, n) = (f.owner, f.neighbour);
        let t = mob.internal[k];
        let rho_f = 0.5 * (rho[o] + rho[n]);
        let gf = match options.formulation {
            Formulation::Total => {
                let xo = mesh.cell_center(o);
                let xn = mesh.cell_center(n);
                t * rho_f * dot(g, [xn[0] - xo[0], xn[1] - xo[1], xn[2] - xo[2]])
            }
            Formulation::Reduced => -t * dot(g, f.center) * (rho[n] - rho[o]),
        };
        let w = if compressible { rho_f } else { 1.0 };
        gravity_flux.internal[k] = gf;
        weights.internal[k] = w;
        let c = w * t;
        system.diag[o] += c;
        system.diag[n] += c;
        system.upper[k] = -c;
        system.lower[k] = -c;
        system.rhs[o] -= w * gf;
        system.rhs[n] += w * gf;
    }

    let mut has_dirichlet = false;
    for (i, b) in mesh.boundary_faces().iter().enumerate() {
        if mesh.patches()[b.patch].empty {
            continue;
        }
        let bc = boundary[i];
        let gb = if bc.prescribed_flux {
            0.0
        } else {
            match options.formulation {
                Formulation::Total => {
                    let xo = mesh.cell_center(b.cell);
                    let d = [
                        b.center[0] - xo[0],
                        b.center[1] - xo[1],
                        b.center[2] - xo[2],
                    ];
                    mob.boundary[i] * rho[b.cell] * dot(g, d)
                }
                Formulation::Reduced => 0.0,
            }
        };
        let w = if compressible { rho[b.cell] } else { 1.0 };
        gravity_flux.boundary[i] = gb;
        weights.boundary[i] = w;
        if bc.internal > 0.0 {
            has_dirichlet = true;
        }
        system.diag[b.cell] += w * bc.internal;
        system.rhs[b.cell] += w * (bc.value - gb);
    }

    let vol = mesh.cell_volume();
    let mut has_storage = false;
    if let Some(dt) = options.dt {
        for c in 0..mesh.n_cells() {
            let s0 = state.storativity[c];
            if s0 > 0.0 {
                has_storage = true;
                let s = s0 * vol / dt * if compressible { rho[c] } else { 1.0 };
                system.diag[c] += s;
                system.rhs[c] += s * state.pressure_old[c];
            }
        }
    }
    if compressible {
        if let Some(r) = rate {
            for c in 0..mesh.n_cells() {
                system.rhs[c] -= r.porosity[c] * r.drho_dc[c] * r.dc_dt[c] * vol;
            }
        }
    }
    for s in &state.sources {
        for &c in &s.cells {
            if c >= mesh.n_cells() {
                return Err(Error::config(format!("source cell {c} outside mesh")));
            }
            let q = s.rate * vol;
            let inflow_density = if s.rate >= 0.0 { s.density } else { rho[c] };
            system.rhs[c] += if compressible {
                inflow_density * q
            } else {
                inflow_density * q / rho[c]
            };
        }
    }

    Ok(PressureAssembly {
        system,
        mobility: mob,
        gravity_flux,
        weights,
        boundary,
        formulation: options.formulation,
        pinned: None,
        floating: !has_dirichlet && !has_storage,
    })
}

/// Face fluxes reconstructed from a pressure solution with the same
/// coefficients used in assembly.
pub fn darcy_flux(mesh: &Mesh, assembly: &PressureAssembly, pressure: &[f64]) -> FaceField {
    let internal = mesh
        .faces()
        .iter()
        .enumerate()
        .map(|(k, f)| {
            -assembly.mobility.internal[k] * (pressure[f.neighbour] - pressure[f.owner])
                + assembly.gravity_flux.internal[k]
        })
        .collect();
    let boundary = mesh
        .boundary_faces()
        .iter()
        .enumerate()
        .map(|(i, b)| {
            if mesh.patches()[b.patch].empty {
                return 0.0;
            }
            let c = assembly.boundary[i];
            c.internal * pressure[b.cell] - c.value + assembly.gravity_flux.boundary[i]
        })
        .collect();
    FaceField { internal, boundary }
}

/// Boundary values of the solved pressure variable, reconstructed from the
/// face fluxes.
pub fn boundary_pressure(
    mesh: &Mesh,
    assembly: &PressureAssembly,
    pressure: &[f64],
    flux: &FaceField,
) -> Vec<f64> {
    mesh.boundary_faces()
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let t = assembly.mobility.boundary[i];
            if t > 0.0 {
                pressure[b.cell] - (flux.boundary[i] - assembly.gravity_flux.boundary[i]) / t
            } else {
                pressure[b.cell]
            }
        })
        .collect()
}

/// Net outflow per cell, `sum_f w_f phi_f` with the continuity weights.
pub fn flux_divergence(mesh: &Mesh, flux: &FaceField, weights: Option<&FaceField>) -> Vec<f64> {
    let mut div = vec![0.0; mesh.n_cells()];
    for (k, f) in mesh.faces().iter().enumerate() {
        let w = weights.map_or(1.0, |w| w.internal[k]);
        div[f.owner] += w * flux.internal[k];
        div[f.neighbour] -= w * flux.internal[k];
    }
    for (i, b) in mesh.boundary_faces().iter().enumerate() {
        let w = weights.map_or(1.0, |w| w.boundary[i]);
        div[b.cell] += w * flux.boundary[i];
    }
    div
}

/// Assembles, solves and stores pressure and fluxes in `state`.
pub fn solve_pressure(
    mesh: &Mesh,
    state: &mut FlowState,
    bcs: &PatchConditions<PressureBc>,
    options: &PressureOptions,
    rate: Option<ConcentrationRate<'_>>,
    controls: &SolverControls,
) -> Result<(PressureAssembly, SolveReport)> {
    let assembly = assemble_pressure(mesh, state, bcs, options, rate)?;
    let report = linsolve::solve(&assembly.system, &state.pressure, controls)?;
    state.pressure.copy_from_slice(&report.x);
    state.flux = darcy_flux(mesh, &assembly, &state.pressure);
    Ok((assembly, report))
}

/// Cell-centred Darcy velocity from face fluxes (average of the two opposite
/// faces on each axis, divided by face area).
pub fn cell_velocity(mesh: &Mesh, flux: &FaceField) -> Vec<Vec3> {
    let mut sum = vec![[0.0; 3]; mesh.n_cells()];
    for (k, f) in mesh.faces().iter().enumerate() {
        let u = flux.internal[k] / f.area;
        sum[f.owner][f.axis] += 0.5 * u;
        sum[f.neighbour][f.axis] += 0.5 * u;
    }
    for (i, b) in mesh.boundary_faces().iter().enumerate() {
        sum[b.cell][b.axis] += 0.5 * b.sign * flux.boundary[i] / b.area;
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{Field, SymTensor};

    fn column(n: usize, length: f64) -> Mesh {
        Mesh::build_cartesian(n, 1, 1, [length, 1.0, 1.0], [0.0; 3]).unwrap()
    }

    fn sides(left: PressureBc, right: PressureBc) -> PatchConditions<PressureBc> {
        PatchConditions::uniform(PressureBc::NoFlux)
            .with("xmin", left)
            .with("xmax", right)
    }

    fn solve(
        mesh: &Mesh,
        state: &mut FlowState,
        bcs: &PatchConditions<PressureBc>,
        opts: PressureOptions,
    ) -> PressureAssembly {
        let ctl = SolverControls::pressure().with_tolerance(1e-13);
        solve_pressure(mesh, state, bcs, &opts, None, &ctl)
            .unwrap()
            .0
    }

    #[test]
    fn linear_pressure_in_uniform_column() {
        let m = column(20, 2.0);
        let mut s = FlowState::new(
            &m,
            Field::uniform(&m, SymTensor::isotropic(3.0)),
            1000.0,
            1.5,
        );
        let bcs = sides(
            PressureBc::FixedPressure { value: 1.0 },
            PressureBc::FixedPressure { value: 0.0 },
        );
        solve(&m, &mut s, &bcs, PressureOptions::default());
        let q = 3.0 / 1.5 * 1.0 / 2.0;
        for (c, p) in s.pressure.iter().enumerate() {
            let x = m.cell_center(c)[0];
            assert!((p - (1.0 - x / 2.0)).abs() < 1e-10);
        }
        for phi in &s.flux.internal {
            assert!((phi - q).abs() < 1e-10 * q);
        }
        assert!((s.flux.boundary[m.patches()[1].start] - q).abs() < 1e-10);
    }

    #[test]
    fn two_layer_series_flux() {
        let m = column(10, 1.0);
        let (k1, k2) = (1.0, 0.1);
        let k = Field::from_fn(&m, |_, x| {
            SymTensor::isotropic(if x[0] < 0.5 { k1 } else { k2 })
        });
        let mut s = FlowState::new(&m, k, 1.0, 1.0);
        let bcs = sides(
            PressureBc::FixedPressure { value: 1.0 },
            PressureBc::FixedPressure { value: 0.0 },
        );
        solve(&m, &mut s, &bcs, PressureOptions::default());
        let q = 2.0 * k1 * k2 / (k1 + k2) * 1.0 / 1.0;
        for phi in &s.flux.internal {
            assert!((phi - q).abs() < 1e-10 * q, "{phi} vs {q}");
        }
    }

    #[test]
    fn hydrostatic_state_has_no_flux() {
        let m = Mesh::build_cartesian(6, 8, 1, [1.0, 2.0, 1.0], [0.0; 3]).unwrap();
        for formulation in [Formulation::Reduced, Formulation::Total] {
            let mut s = FlowState::new(
                &m,
                Field::uniform(&m, SymTensor::isotropic(1e-9)),
                1025.0,
                1e-3,
            );
            s.gravity = [0.0, -9.81, 0.0];
            let bcs = PatchConditions::uniform(PressureBc::NoFlux);
            let opts = PressureOptions {
                formulation,
                ..Default::default()
            };
            let a = solve(&m, &mut s, &bcs, opts);
            assert!(a.pinned.is_some());
            let scale = 1e-9 / 1e-3 * 1025.0 * 9.81;
            for phi in s.flux.internal.iter().chain(&s.flux.boundary) {
                assert!(phi.abs() < 1e-10 * scale, "{formulation:?}: {phi}");
            }
        }
    }

    #[test]
    fn hydrostatic_boundary_values() {
        let m = Mesh::build_cartesian(1, 4, 1, [1.0, 1.0, 1.0], [0.0; 3]).unwrap();
        let g = [0.0, -9.81, 0.0];
        let xmax = m.patch_id("xmax").unwrap();
        let rho = vec![1025.0; 4];
        let v = bc::hydrostatic_pressure(
            &m,
            xmax,
            1025.0,
            [0.0, 1.0, 0.0],
            0.0,
            g,
            Formulation::Total,
            &rho,
        );
        // cell centres at y = 0.125 .. 0.875; difference bottom - top = rho g * 0.75
        assert!(((v[0] - v[3]) - 1025.0 * 9.81 * 0.75).abs() < 1e-9);
        let ymin = m.patch_id("ymin").unwrap();
        let ymax = m.patch_id("ymax").unwrap();
        let bottom = bc::hydrostatic_pressure(
            &m,
            ymin,
            1025.0,
            [0.0, 1.0, 0.0],
            0.0,
            g,
            Formulation::Total,
            &rho,
        )[0];
        let top = bc::hydrostatic_pressure(
            &m,
            ymax,
            1025.0,
            [0.0, 1.0, 0.0],
            0.0,
            g,
            Formulation::Total,
            &rho,
        )[0];
        assert!(((bottom - top) - 10055.25).abs() < 1e-9);
        // reduced form with rho equal to the reference: uniform p_rgh
        let r = bc::hydrostatic_pressure(
            &m,
            xmax,
            1025.0,
            [0.0, 1.0, 0.0],
            0.0,
            g,
            Formulation::Reduced,
            &rho,
        );
        assert!(r.iter().all(|v| (v - r[0]).abs() < 1e-9));
        // without gravity: uniform reference value
        let z = bc::hydrostatic_pressure(
            &m,
            xmax,
            1025.0,
            [0.0, 1.0, 0.0],
            5.0,
            [0.0; 3],
            Formulation::Total,
            &rho,
        );
        assert!(z.iter().all(|&v| v == 5.0));
    }

    #[test]
    fn fixed_velocity_balances_outflow() {
        let m = column(25, 3.0);
        let k = Field::from_fn(&m, |c, _| SymTensor::isotropic(1e-10 * (1.0 + c as f64)));
        let mut s = FlowState::new(&m, k, 1000.0, 1e-3);
        let u = 6.6e-5;
        let bcs = sides(
            PressureBc::DarcyFixedVelocity {
                velocity: [u, 0.0, 0.0],
            },
            PressureBc::FixedPressure { value: 0.0 },
        );
        solve(&m, &mut s, &bcs, PressureOptions::default());
        let inflow = -s.flux.boundary[m.patches()[0].start];
        let outflow = s.flux.boundary[m.patches()[1].start];
        assert!((inflow - u).abs() <= 1e-15);
        assert!((outflow - inflow).abs() <= 1e-12 * inflow);
    }

    #[test]
    fn zero_velocity_is_no_flux() {
        let m = column(5, 1.0);
        let mut s = FlowState::new(&m, Field::uniform(&m, SymTensor::isotropic(1.0)), 1.0, 1.0);
        let bcs = sides(
            PressureBc::DarcyFixedVelocity { velocity: [0.0; 3] },
            PressureBc::FixedPressure { value: 2.0 },
        );
        solve(&m, &mut s, &bcs, PressureOptions::default());
        assert!(s.pressure.iter().all(|p| (p - 2.0).abs() < 1e-12));
    }

    #[test]
    fn missing_bc_is_an_error() {
        let m = column(3, 1.0);
        let s = FlowState::new(&m, Field::uniform(&m, SymTensor::isotropic(1.0)), 1.0, 1.0);
        let bcs = PatchConditions::new().with("xmin", PressureBc::NoFlux);
        let err = assemble_pressure(&m, &s, &bcs, &PressureOptions::default(), None).unwrap_err();
        assert!(matches!(err, Error::Config(msg) if msg.contains("xmax")));
        let bcs = PatchConditions::uniform(PressureBc::NoFlux);
        let opts = PressureOptions {
            dt: Some(-1.0),
            ..Default::default()
        };
        assert!(assemble_pressure(&m, &s, &bcs, &opts, None).is_err());
    }

    #[test]
    fn robin_limits() {
        let m = column(10, 1.0);
        let k = Field::uniform(&m, SymTensor::isotropic(1.0));
        let mut a = FlowState::new(&m, k.clone(), 1.0, 1.0);
        let mut b = FlowState::new(&m, k, 1.0, 1.0);
        let dir = sides(
            PressureBc::FixedPressure { value: 3.0 },
            PressureBc::FixedPressure { value: 1.0 },
        );
        let rob = sides(
            PressureBc::Robin {
                alpha: 2.0,
                beta: 0.0,
                gamma: 6.0,
            },
            PressureBc::FixedPressure { value: 1.0 },
        );
        solve(&m, &mut a, &dir, PressureOptions::default());
        solve(&m, &mut b, &rob, PressureOptions::default());
        for (x, y) in a.pressure.iter().zip(&b.pressure) {
            assert!((x - y).abs() < 1e-10);
        }
        // alpha = 0: Neumann dp/dn = gamma/beta; outward flux = -K/mu * dp/dn * A
        let mut c = FlowState::new(&m, Field::uniform(&m, SymTensor::isotropic(1.0)), 1.0, 1.0);
        let neu = sides(
            PressureBc::Robin {
                alpha: 0.0,
                beta: 1.0,
                gamma: 0.5,
            },
            PressureBc::FixedPressure { value: 0.0 },
        );
        solve(&m, &mut c, &neu, PressureOptions::default());
        assert!((c.flux.boundary[m.patches()[0].start] + 0.5).abs() < 1e-10);
    }

    #[test]
    fn scaling_k_and_mu_leaves_solution_unchanged() {
        let m = Mesh::build_cartesian(7, 5, 1, [1.0, 1.0, 1.0], [0.0; 3]).unwrap();
        let k = Field::from_fn(&m, |c, _| SymTensor::isotropic(1.0 + (c % 3) as f64));
        let bcs = sides(
            PressureBc::FixedPressure { value: 1.0 },
            PressureBc::FixedPressure { value: 0.0 },
        );
        let mut a = FlowState::new(&m, k.clone(), 1.0, 2.0);
        let kk = Field::new(k.values.iter().map(|t| t.scale(1e3)).collect());
        let mut b = FlowState::new(&m, kk, 1.0, 2e3);
        solve(&m, &mut a, &bcs, PressureOptions::default());
        solve(&m, &mut b, &bcs, PressureOptions::default());
        for (x, y) in a.pressure.iter().zip(&b.pressure) {
            assert!((x - y).abs() < 1e-9);
        }
        for (x, y) in a.flux.internal.iter().zip(&b.flux.internal) {
            assert!((x - y).abs() < 1e-9 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn sources_balance_boundary_outflow() {
        let m = Mesh::build_cartesian(5, 5, 1, [1.0, 1.0, 1.0], [0.0; 3]).unwrap();
        let mut s = FlowState::new(&m, Field::uniform(&m, SymTensor::isotropic(1.0)), 1.0, 1.0);
        s.sources.push(Source {
            cells: vec![12],
            rate: 4.0,
            density: 1.0,
            concentration: 0.0,
        });
        let bcs = PatchConditions::uniform(PressureBc::FixedPressure { value: 0.0 });
        solve(&m, &mut s, &bcs, PressureOptions::default());
        let out: f64 = s.flux.boundary.iter().sum();
        assert!((out - 4.0 * m.cell_volume()).abs() < 1e-10);
        let div = flux_divergence(&m, &s.flux, None);
        assert!((div[12] - 4.0 * m.cell_volume()).abs() < 1e-10);
    }
}
