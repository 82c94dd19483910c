//! Two overlapping continua (matrix and fracture) exchanging fluid through a
//! linear transfer term `tau = -tau0 (p - p_hat)`.
//!
//! `tau0` is a pressure-difference coefficient per unit volume, so the
//! assembled coupling of a cell is `T_i = tau0_i V`:
//!
//! ```text
//! (A + T) p     - T p_hat = b
//! (A_hat + T) p_hat - T p = b_hat
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linsolve::{self, SolverControls, SparseSystem};
use crate::mesh::Mesh;

use super::{
    assemble_unpinned, darcy_flux, pin, FlowState, PatchConditions, PressureAssembly, PressureBc,
    PressureOptions,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DualScheme {
    /// Block Gauss-Seidel: each continuum solved with the partner lagged.
    Segregated,
    /// Segregated sweep preceded by a correction of the common pressure
    /// mode with `A + A_hat`, the strong-transfer limit of the Schur
    /// complement. Removes the slow mode that stalls plain segregation.
    #[default]
    SchurSplit,
}

#[derive(Debug, Clone)]
pub struct DualPorosityState {
    pub matrix: FlowState,
    pub fracture: FlowState,
    pub matrix_porosity: Vec<f64>,
    pub fracture_porosity: Vec<f64>,
    /// Transfer coefficient per cell.
    pub tau0: Vec<f64>,
}

impl DualPorosityState {
    pub fn new(mesh: &Mesh, matrix: FlowState, fracture: FlowState, tau0: f64) -> Self {
        let n = mesh.n_cells();
        DualPorosityState {
            matrix,
            fracture,
            matrix_porosity: vec![1.0; n],
            fracture_porosity: vec![1.0; n],
            tau0: vec![tau0; n],
        }
    }

    /// Transfer into the matrix per cell, `-tau0 (p - p_hat) V`. The fracture
    /// receives exactly the negative.
    pub fn transfer(&self, mesh: &Mesh) -> Vec<f64> {
        let v = mesh.cell_volume();
        (0..mesh.n_cells())
            .map(|c| -self.tau0[c] * v * (self.matrix.pressure[c] - self.fracture.pressure[c]))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct DualPorosityResult {
    pub iterations: usize,
    pub converged: bool,
    /// Scaled coupled-system residual after each outer iteration.
    pub history: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct DualControls {
    pub scheme: DualScheme,
    pub tolerance: f64,
    pub max_outer: usize,
    pub linear: SolverControls,
}

impl Default for DualControls {
    fn default() -> Self {
        DualControls {
            scheme: DualScheme::SchurSplit,
            tolerance: 1e-8,
            max_outer: 200,
            linear: SolverControls::pressure().with_tolerance(1e-12),
        }
    }
}

fn with_coupling(sys: &SparseSystem, t: &[f64], partner: &[f64]) -> SparseSystem {
    let mut s = sys.clone();
    for i in 0..s.n() {
        s.diag[i] += t[i];
        s.rhs[i] += t[i] * partner[i];
    }
    s
}

/// Coupled residual of the matrix rows scaled by their diagonal, relative to
/// the pressure magnitude. The fracture rows are satisfied exactly after
/// each sweep of either scheme.
fn coupled_residual(a: &SparseSystem, t: &[f64], p: &[f64], ph: &[f64]) -> f64 {
    let r = a.residual(p);
    let mut worst = 0.0f64;
    let mut scale = f64::MIN_POSITIVE;
    for i in 0..a.n() {
        let ri = r[i] - t[i] * (p[i] - ph[i]);
        worst = worst.max(ri.abs() / (a.diag[i] + t[i]));
        scale = scale.max(p[i].abs()).max(ph[i].abs());
    }
    worst / scale
}

/// Assembled (unpinned-then-pinned) operators of both continua. A floating
/// coupled problem is pinned through the matrix continuum only, so the
/// transfer between the two is not perturbed.
pub fn assemble_dual(
    mesh: &Mesh,
    dual: &DualPorosityState,
    matrix_bcs: &PatchConditions<PressureBc>,
    fracture_bcs: &PatchConditions<PressureBc>,
    options: &PressureOptions,
) -> Result<(PressureAssembly, PressureAssembly, Vec<f64>)> {
    let n = mesh.n_cells();
    if dual.tau0.len() != n {
        return Err(Error::config(format!(
            "tau0 has {} values for {n} cells",
            dual.tau0.len()
        )));
    }
    if let Some(c) = dual
        .tau0
        .iter()
        .position(|&t| !(t >= 0.0) || !t.is_finite())
    {
        return Err(Error::Domain(format!(
            "transfer coefficient must be >= 0 (cell {c})"
        )));
    }
    let mut am = assemble_unpinned(mesh, &dual.matrix, matrix_bcs, options, None)?;
    let mut af = assemble_unpinned(mesh, &dual.fracture, fracture_bcs, options, None)?;
    let v = mesh.cell_volume();
    let t: Vec<f64> = dual.tau0.iter().map(|x| x * v).collect();
    let (cell, value) = options.reference.unwrap_or((0, 0.0));
    let coupled = t.iter().any(|&x| x > 0.0);
    if am.floating && af.floating {
        pin(&mut am, cell, value)?;
        if !coupled {
            pin(&mut af, cell, value)?;
        }
    } else if am.floating && !coupled {
        pin(&mut am, cell, value)?;
    } else if af.floating && !coupled {
        pin(&mut af, cell, value)?;
    }
    Ok((am, af, t))
}

/// Solves the coupled steady system and stores pressures and fluxes of both
/// continua in `dual`. Non-convergence is reported in the result, not as an
/// error.
pub fn solve_dual_porosity(
    mesh: &Mesh,
    dual: &mut DualPorosityState,
    matrix_bcs: &PatchConditions<PressureBc>,
    fracture_bcs: &PatchConditions<PressureBc>,
    options: &PressureOptions,
    controls: &DualControls,
) -> Result<DualPorosityResult> {
    let (am, af, t) = assemble_dual(mesh, dual, matrix_bcs, fracture_bcs, options)?;
    let n = mesh.n_cells();
    let a = &am.system;
    let ah = &af.system;
    let lin = &controls.linear;

    let coarse = (controls.scheme == DualScheme::SchurSplit).then(|| common_mode_operator(a, ah));

    let mut p = dual.matrix.pressure.clone();
    let mut ph = dual.fracture.pressure.clone();
    let mut history = Vec::new();
    let mut converged = false;
    for _ in 0..controls.max_outer.max(1) {
        if let Some(c) = &coarse {
            let rm = coupled_rows(a, &t, &p, &ph);
            let rf = coupled_rows(ah, &t, &ph, &p);
            let mut sys = c.clone();
            for i in 0..n {
                sys.rhs[i] = rm[i] + rf[i];
            }
            let delta = checked(linsolve::solve(&sys, &vec![0.0; n], lin)?, "common-mode")?;
            for i in 0..n {
                p[i] += delta[i];
                ph[i] += delta[i];
            }
        }
        let sys = with_coupling(a, &t, &ph);
        p = checked(linsolve::solve(&sys, &p, lin)?, "matrix")?;
        let sys = with_coupling(ah, &t, &p);
        ph = checked(linsolve::solve(&sys, &ph, lin)?, "fracture")?;
        let r = coupled_residual(a, &t, &p, &ph);
        history.push(r);
        log::debug!("dual porosity outer {}: residual {r:.3e}", history.len());
        if r < controls.tolerance {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!(
            "dual porosity ({:?}) not converged after {} outer iterations, residual {:.3e}",
            controls.scheme,
            history.len(),
            history.last().copied().unwrap_or(f64::NAN)
        );
    }
    dual.matrix.flux = darcy_flux(mesh, &am, &p);
    dual.fracture.flux = darcy_flux(mesh, &af, &ph);
    dual.matrix.pressure = p;
    dual.fracture.pressure = ph;
    Ok(DualPorosityResult {
        iterations: history.len(),
        converged,
        history,
    })
}

/// Residual of one continuum's rows of the coupled system.
fn coupled_rows(a: &SparseSystem, t: &[f64], p: &[f64], partner: &[f64]) -> Vec<f64> {
    let mut r = a.residual(p);
    for i in 0..a.n() {
        r[i] -= t[i] * (p[i] - partner[i]);
    }
    r
}

/// `A + A_hat`: the coupled operator restricted to equal continuum
/// pressures, which is also the strong-transfer limit of either Schur
/// complement `A + (T^-1 + A_hat^-1)^-1`.
fn common_mode_operator(a: &SparseSystem, ah: &SparseSystem) -> SparseSystem {
    let mut s = a.clone();
    for i in 0..s.n() {
        s.diag[i] += ah.diag[i];
        s.rhs[i] = 0.0;
    }
    for k in 0..s.upper.len() {
        s.upper[k] += ah.upper[k];
        s.lower[k] += ah.lower[k];
    }
    s
}

fn checked(report: linsolve::SolveReport, which: &str) -> Result<Vec<f64>> {
    if !report.converged {
        log::warn!(
            "{which} pressure solve stopped at residual {:.3e} after {} iterations",
            report.residual,
            report.iterations
        );
    }
    if let Some(c) = report.x.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            field: format!("{which} pressure"),
            cell: c,
        });
    }
    Ok(report.x)
}
