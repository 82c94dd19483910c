use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{dot, Mesh, Vec3, PATCH_NAMES};

use super::Formulation;

/// Boundary condition for the pressure equation on one patch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase", deny_unknown_fields)]
pub enum PressureBc {
    /// Prescribes the solved pressure variable (`p`, or `p_rgh` in the reduced form).
    FixedPressure {
        value: f64,
    },
    /// Imposes the Darcy velocity vector; the outward flux is `velocity . n A`.
    DarcyFixedVelocity {
        velocity: Vec3,
    },
    /// `p = p_ref + rho_ref g . (x - x_ref)` in terms of total pressure.
    #[serde(rename_all = "camelCase")]
    HydrostaticPressure {
        reference_density: f64,
        #[serde(default)]
        reference_point: Vec3,
        #[serde(default)]
        reference_pressure: f64,
    },
    /// `alpha p + beta dp/dn = gamma`, `n` outward.
    Robin {
        alpha: f64,
        beta: f64,
        gamma: f64,
    },
    NoFlux,
}

/// Exactly one condition per patch of one equation.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchConditions<T> {
    conditions: [Option<T>; 6],
}

impl<T> Default for PatchConditions<T> {
    fn default() -> Self {
        PatchConditions {
            conditions: Default::default(),
        }
    }
}

impl<T: Clone> PatchConditions<T> {
    /// Every patch set to `bc`.
    pub fn uniform(bc: T) -> Self {
        PatchConditions {
            conditions: std::array::from_fn(|_| Some(bc.clone())),
        }
    }
}

impl<T> PatchConditions<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, patch: &str, bc: T) -> Result<&mut Self> {
        let p = PATCH_NAMES
            .iter()
            .position(|&n| n == patch)
            .ok_or_else(|| {
                Error::config(format!(
                    "unknown patch `{patch}` (expected one of {PATCH_NAMES:?})"
                ))
            })?;
        self.conditions[p] = Some(bc);
        Ok(self)
    }

    pub fn with(mut self, patch: &str, bc: T) -> Self {
        self.set(patch, bc).expect("valid patch name");
        self
    }

    pub fn get(&self, patch: usize) -> Option<&T> {
        self.conditions[patch].as_ref()
    }

    /// Every non-empty patch of `mesh` must have a condition.
    pub fn check(&self, mesh: &Mesh, equation: &str) -> Result<()> {
        for (p, patch) in mesh.patches().iter().enumerate() {
            if !patch.empty && self.conditions[p].is_none() {
                return Err(Error::config(format!(
                    "no {equation} boundary condition on patch `{}`",
                    patch.name
                )));
            }
        }
        Ok(())
    }
}

/// Linearised boundary flux: outward volumetric flux through a boundary face
/// is `internal * p_cell - value + gravity`, where `gravity` is the explicit
/// buoyancy part (absent for prescribed fluxes).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BoundaryCoeffs {
    pub internal: f64,
    pub value: f64,
    pub prescribed_flux: bool,
}

impl BoundaryCoeffs {
    pub fn dirichlet(transmissibility: f64, value: f64) -> Self {
        BoundaryCoeffs {
            internal: transmissibility,
            value: transmissibility * value,
            prescribed_flux: false,
        }
    }

    pub fn flux(outward: f64) -> Self {
        BoundaryCoeffs {
            internal: 0.0,
            value: -outward,
            prescribed_flux: true,
        }
    }

    /// Robin `alpha f + beta df/dn = gamma` discretised with the one-sided
    /// gradient `(f_b - f_P) / half_distance`.
    pub fn robin(
        transmissibility: f64,
        half_distance: f64,
        alpha: f64,
        beta: f64,
        gamma: f64,
    ) -> Result<Self> {
        let denom = alpha + beta / half_distance;
        if denom == 0.0 || !denom.is_finite() {
            return Err(Error::config(format!(
                "Robin condition alpha = {alpha}, beta = {beta} is degenerate"
            )));
        }
        Ok(BoundaryCoeffs {
            internal: transmissibility * alpha / denom,
            value: transmissibility * gamma / denom,
            prescribed_flux: false,
        })
    }
}

/// Per-face coefficients imposing `velocity . n` on `patch` under any
/// formulation. Fails if a face has zero normal mobility, since the
/// boundary pressure could not be reconstructed there.
pub fn darcy_fixed_velocity(
    mesh: &Mesh,
    patch: usize,
    velocity: Vec3,
    boundary_mobility: &[f64],
) -> Result<Vec<BoundaryCoeffs>> {
    let faces = mesh.patch_faces(patch);
    let start = mesh.patches()[patch].start;
    let blocked: Vec<usize> = (0..faces.len())
        .filter(|&i| !(boundary_mobility[start + i] > 0.0))
        .map(|i| start + i)
        .collect();
    if !blocked.is_empty() {
        return Err(Error::SingularMedium(format!(
            "darcyFixedVelocity on `{}`: zero normal permeability on boundary faces {blocked:?}",
            mesh.patches()[patch].name
        )));
    }
    Ok(faces
        .iter()
        .map(|b| BoundaryCoeffs::flux(dot(velocity, b.normal()) * b.area))
        .collect())
}

/// Dirichlet values of the solved pressure variable for a hydrostatic patch.
/// In the reduced form the face density is the adjacent cell density.
pub fn hydrostatic_pressure(
    mesh: &Mesh,
    patch: usize,
    reference_density: f64,
    reference_point: Vec3,
    reference_pressure: f64,
    gravity: Vec3,
    formulation: Formulation,
    density: &[f64],
) -> Vec<f64> {
    mesh.patch_faces(patch)
        .iter()
        .map(|b| {
            let dx = [
                b.center[0] - reference_point[0],
                b.center[1] - reference_point[1],
                b.center[2] - reference_point[2],
            ];
            let p = reference_pressure + reference_density * dot(gravity, dx);
            match formulation {
                Formulation::Total => p,
                Formulation::Reduced => p - density[b.cell] * dot(gravity, b.center),
            }
        })
        .collect()
}
