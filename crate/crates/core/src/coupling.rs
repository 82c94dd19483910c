//! Flow-transport coupling: an under-relaxed Picard loop per time step, the
//! adaptive time loop and the Rayleigh/Nusselt diagnostics.

use serde::{Deserialize, Serialize};

use crate::constitutive::FluidPropertyModel;
use crate::error::{Error, Result};
use crate::flow::{
    self, ConcentrationRate, Continuity, FlowState, PatchConditions, PressureBc, PressureOptions,
};
use crate::linsolve::SolverControls;
use crate::mesh::Mesh;
use crate::transport::{
    self, CourantControls, TransportBc, TransportOptions, TransportSolution, TransportState,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "camelCase")]
pub struct PicardControls {
    pub max_outer: usize,
    /// Relative max-norm change of `c` between iterations.
    pub tolerance: f64,
    pub relax: f64,
    /// Commit the last transport solution without relaxation.
    pub final_unrelaxed: bool,
}

impl Default for PicardControls {
    fn default() -> Self {
        PicardControls {
            max_outer: 50,
            tolerance: 1e-6,
            relax: 0.7,
            final_unrelaxed: true,
        }
    }
}

impl PicardControls {
    pub fn validate(&self) -> Result<()> {
        if !(self.relax > 0.0 && self.relax <= 1.0) {
            return Err(Error::config(format!(
                "relaxation factor must be in (0, 1], got {}",
                self.relax
            )));
        }
        if self.max_outer == 0 {
            return Err(Error::config("maxOuter must be >= 1"));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::config("outer tolerance must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FluidModels {
    pub density: FluidPropertyModel,
    pub viscosity: FluidPropertyModel,
}

impl FluidModels {
    pub fn constant(density: f64, viscosity: f64) -> Self {
        FluidModels {
            density: FluidPropertyModel::Constant { f0: density },
            viscosity: FluidPropertyModel::Constant { f0: viscosity },
        }
    }

    fn is_constant(&self) -> bool {
        matches!(self.density, FluidPropertyModel::Constant { .. })
            && matches!(self.viscosity, FluidPropertyModel::Constant { .. })
    }

    /// Sets cell density and viscosity from `c`.
    pub fn update(&self, flow: &mut FlowState, c: &[f64]) -> Result<()> {
        flow.density = self.density.evaluate_field(c)?;
        flow.viscosity = self.viscosity.evaluate_field(c)?;
        Ok(())
    }
}

/// Coupled variable-density flow and transport on one mesh.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub mesh: Mesh,
    pub flow: FlowState,
    pub transport: TransportState,
    pub pressure_bcs: PatchConditions<PressureBc>,
    pub transport_bcs: PatchConditions<TransportBc>,
    pub models: FluidModels,
    pub pressure: PressureOptions,
    pub pressure_solver: SolverControls,
    pub transport_options: TransportOptions,
    pub picard: PicardControls,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub time: f64,
    pub dt: f64,
    pub outer_iterations: usize,
    pub converged: bool,
    /// Outer residual per iteration.
    pub residuals: Vec<f64>,
    /// Discrete rate of change of solute mass.
    pub mass_rate: f64,
    /// Net outward solute flux through the boundary.
    pub boundary_outflow: f64,
    /// Sum of absolute boundary solute fluxes.
    pub boundary_throughput: f64,
    /// Net solute added by sources and sinks.
    pub source_rate: f64,
    /// The step was retried with half the time step.
    pub retried: bool,
}

impl StepReport {
    /// `|dM/dt + outflow - sources|` relative to the largest gross term, so
    /// that balanced in- and outflow do not shrink the scale.
    pub fn balance_error(&self) -> f64 {
        let scale = self
            .mass_rate
            .abs()
            .max(self.boundary_throughput)
            .max(self.source_rate.abs());
        if scale == 0.0 {
            0.0
        } else {
            (self.mass_rate + self.boundary_outflow - self.source_rate).abs() / scale
        }
    }
}

struct Iterate {
    flow: FlowState,
    solution: TransportSolution,
    concentration: Vec<f64>,
    residuals: Vec<f64>,
    converged: bool,
}

const DIVERGENCE_WINDOW: usize = 5;

impl Simulation {
    /// Properties and pressure for the initial concentration, so that the
    /// first time step sees consistent fluxes.
    pub fn initialize(&mut self) -> Result<()> {
        self.picard.validate()?;
        self.models
            .update(&mut self.flow, &self.transport.concentration)?;
        let opts = PressureOptions {
            dt: None,
            ..self.pressure
        };
        flow::solve_pressure(
            &self.mesh,
            &mut self.flow,
            &self.pressure_bcs,
            &opts,
            None,
            &self.pressure_solver,
        )?;
        Ok(())
    }

    pub fn time(&self) -> f64 {
        self.transport.time
    }

    fn outer_loop(&self, dt: f64) -> Result<Iterate> {
        let ctl = &self.picard;
        let mesh = &self.mesh;
        let coupled = !self.models.is_constant();
        let opts = PressureOptions {
            dt: Some(dt),
            ..self.pressure
        };
        let mut flow = self.flow.clone();
        flow.pressure_old = self.flow.pressure.clone();
        let mut c_it = self.transport.concentration.clone();
        let mut residuals = Vec::new();
        let mut growth = 0;
        for it in 1..=ctl.max_outer {
            self.models.update(&mut flow, &c_it)?;
            let (drho, dcdt);
            let rate = if self.pressure.continuity == Continuity::Compressible {
                drho = c_it
                    .iter()
                    .map(|&c| self.models.density.derivative(c))
                    .collect::<Vec<_>>();
                dcdt = c_it
                    .iter()
                    .zip(&self.transport.old)
                    .map(|(c, o)| (c - o) / dt)
                    .collect::<Vec<_>>();
                Some(ConcentrationRate {
                    drho_dc: &drho,
                    dc_dt: &dcdt,
                    porosity: &self.transport.porosity,
                })
            } else {
                None
            };
            let (_, report) = flow::solve_pressure(
                mesh,
                &mut flow,
                &self.pressure_bcs,
                &opts,
                rate,
                &self.pressure_solver,
            )?;
            if !report.converged {
                log::warn!(
                    "pressure solver stopped at relative residual {:.3e}",
                    report.residual
                );
            }
            let sources = transport::cell_sources(mesh, &flow, self.pressure.continuity);
            let solution = transport::solve_transport(
                mesh,
                &self.transport,
                &flow.flux,
                &sources,
                &self.transport_bcs,
                &self.transport_options,
                dt,
                &c_it,
            )?;
            let c_new = &solution.concentration;
            let scale = c_new
                .iter()
                .chain(&c_it)
                .fold(0.0f64, |m, v| m.max(v.abs()))
                .max(f64::MIN_POSITIVE);
            let res = c_new
                .iter()
                .zip(&c_it)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
                / scale;
            if residuals.last().is_some_and(|&last| res > last) {
                growth += 1;
            } else {
                growth = 0;
            }
            residuals.push(res);
            log::debug!("outer iteration {it}: residual {res:.3e}");
            let done = !coupled || res < ctl.tolerance;
            if done || it == ctl.max_outer {
                let concentration = if ctl.final_unrelaxed || !coupled {
                    solution.concentration.clone()
                } else {
                    c_it.iter()
                        .zip(c_new)
                        .map(|(o, n)| o + ctl.relax * (n - o))
                        .collect()
                };
                return Ok(Iterate {
                    flow,
                    solution,
                    concentration,
                    residuals,
                    converged: done,
                });
            }
            if growth >= DIVERGENCE_WINDOW {
                return Err(Error::Numerical(format!(
                    "outer iterations diverging at t = {:.6e} (residual {res:.3e} after {it} iterations)",
                    self.time()
                )));
            }
            for (o, n) in c_it.iter_mut().zip(c_new) {
                *o += ctl.relax * (n - *o);
            }
        }
        unreachable!("loop returns on its last iteration")
    }

    /// Advances one step of size `dt` (halved once if the outer loop
    /// diverges) and commits the result.
    pub fn advance(&mut self, dt: f64) -> Result<StepReport> {
        let (iterate, dt, retried) = match self.outer_loop(dt) {
            Ok(it) => (it, dt, false),
            Err(Error::Numerical(msg)) => {
                log::warn!("{msg}; retrying with dt = {:.3e}", 0.5 * dt);
                (self.outer_loop(0.5 * dt)?, 0.5 * dt, true)
            }
            Err(e) => return Err(e),
        };
        if !iterate.converged {
            log::warn!(
                "outer loop not converged at t = {:.6e}: residual {:.3e}",
                self.time() + dt,
                iterate.residuals.last().copied().unwrap_or(0.0)
            );
        }
        let mut solution = iterate.solution;
        solution.concentration = iterate.concentration;
        let mesh = &self.mesh;
        let mass_rate = solution.mass_rate(mesh, &self.transport);
        let boundary_flux = solution.boundary_flux(mesh);
        let boundary_outflow: f64 = boundary_flux.iter().sum();
        let boundary_throughput: f64 = boundary_flux.iter().map(|f| f.abs()).sum();
        let sources = transport::cell_sources(mesh, &iterate.flow, self.pressure.continuity);
        let source_rate: f64 = sources
            .iter()
            .map(|s| {
                if s.rate >= 0.0 {
                    s.rate * s.concentration
                } else {
                    s.rate * solution.concentration[s.cell]
                }
            })
            .sum();
        self.flow = iterate.flow;
        self.transport.commit(solution.concentration, dt);
        Ok(StepReport {
            time: self.transport.time,
            dt,
            outer_iterations: iterate.residuals.len(),
            converged: iterate.converged,
            residuals: iterate.residuals,
            mass_rate,
            boundary_outflow,
            boundary_throughput,
            source_rate,
            retried,
        })
    }

    /// Runs to `end_time` with Courant-limited steps, never stepping past
    /// `end_time` or the next multiple of `write_interval`. `on_step` sees
    /// every committed step; it is also called when a write time is reached
    /// with `write = true`.
    pub fn run(
        &mut self,
        end_time: f64,
        dt_initial: f64,
        courant: &CourantControls,
        write_interval: Option<f64>,
        mut on_step: impl FnMut(&Simulation, &StepReport, bool) -> Result<()>,
    ) -> Result<Vec<StepReport>> {
        let mut reports = Vec::new();
        let mut dt_prev = dt_initial / courant.growth;
        let mut next_write = write_interval.map(|w| (self.time() / w).floor() * w + w);
        let eps = 1e-12 * end_time.abs().max(1.0);
        while self.time() < end_time - eps {
            let mut dt = transport::adaptive_dt(
                &self.mesh,
                &self.flow.flux,
                &self.transport.porosity,
                courant,
                dt_prev,
            )?;
            let mut write = false;
            if let Some(w) = next_write {
                if self.time() + dt >= w - eps {
                    dt = w - self.time();
                    write = true;
                }
            }
            if self.time() + dt >= end_time - eps {
                dt = end_time - self.time();
                write = write_interval.is_some();
            }
            let report = self.advance(dt)?;
            if report.retried {
                write = false;
            } else {
                dt_prev = dt;
            }
            if write {
                let w = write_interval.expect("write implies an interval");
                next_write = Some(((self.time() + eps) / w).floor() * w + w);
            }
            on_step(self, &report, write)?;
            reports.push(report);
        }
        Ok(reports)
    }
}

/// `Ra = k g drho H / (phi mu K_th)`.
pub fn rayleigh_number(
    permeability: f64,
    gravity: f64,
    density_difference: f64,
    height: f64,
    porosity: f64,
    viscosity: f64,
    conductivity: f64,
) -> Result<f64> {
    let denom = porosity * viscosity * conductivity;
    if !(denom > 0.0) || !denom.is_finite() {
        return Err(Error::Domain(format!(
            "Rayleigh number needs porosity, viscosity and conductivity > 0 (product {denom})"
        )));
    }
    Ok(permeability * gravity * density_difference * height / denom)
}

/// Onset of convection in a porous layer heated from below.
pub const CRITICAL_RAYLEIGH: f64 = 4.0 * std::f64::consts::PI * std::f64::consts::PI;

/// Diffusive flux through a Dirichlet wall held at `wall_value`, normalised by
/// the conduction flux `delta / height` over the patch area. Impermeable walls
/// carry no advective flux, so this is the total flux ratio there.
pub fn nusselt_number(
    mesh: &Mesh,
    c: &[f64],
    patch: &str,
    wall_value: f64,
    delta: f64,
    height: f64,
) -> Result<f64> {
    if !(delta != 0.0 && height > 0.0) {
        return Err(Error::Domain(
            "Nusselt number needs a non-zero difference and positive height".into(),
        ));
    }
    let p = mesh
        .patch_id(patch)
        .ok_or_else(|| Error::config(format!("unknown patch `{patch}`")))?;
    let faces = mesh.patch_faces(p);
    let (mut flux, mut area) = (0.0, 0.0);
    for b in faces {
        flux += b.area * (wall_value - c[b.cell]) / b.half_distance;
        area += b.area;
    }
    Ok((flux / area * height / delta).abs())
}
