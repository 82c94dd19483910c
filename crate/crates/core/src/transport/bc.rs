use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::Mesh;

/// Boundary condition for the transported scalar on one patch. Normals point
/// out of the domain and face fluxes are positive outward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase", deny_unknown_fields)]
pub enum TransportBc {
    FixedValue {
        value: f64,
    },
    ZeroGradient,
    /// No advective and no diffusive flux, whatever the fluid flux.
    NoFlux,
    /// Dirichlet on faces with inward flux, zero gradient elsewhere.
    InletOutlet {
        value: f64,
    },
    /// `alpha c + beta dc/dn = gamma`.
    Robin {
        alpha: f64,
        beta: f64,
        gamma: f64,
    },
    /// `-D dc/dn + u_n c = u_n c_a - d (c_d - c) / delta + F`.
    #[serde(rename_all = "camelCase")]
    FixedTransportFlux {
        /// Concentration `c_a` carried by the advective flux.
        #[serde(default)]
        inlet_value: f64,
        /// Outward normal velocity `u_n`; defaults to the face flux over the area.
        #[serde(default)]
        velocity: Option<f64>,
        /// Exchange coefficient `d`.
        #[serde(default)]
        coefficient: f64,
        /// External concentration `c_d`.
        #[serde(default)]
        external_value: f64,
        /// Distance `delta` to the external value; defaults to the half-cell distance.
        #[serde(default)]
        distance: Option<f64>,
        /// Explicit outward flux `F` per unit area.
        #[serde(default)]
        flux: f64,
    },
}

/// Outward scalar flux through a boundary face, `internal * c_P + constant`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TransportBoundary {
    pub internal: f64,
    pub constant: f64,
}

impl TransportBoundary {
    pub fn flux(&self, c_cell: f64) -> f64 {
        self.internal * c_cell + self.constant
    }
}

/// Face value linear in the cell value, `c_b = slope * c_P + offset`, with
/// upwind advection (`c_b` on inflow, `c_P` on outflow) and diffusive
/// conductance `g = A n.(phi D).n / half_distance`.
fn face_value_flux(slope: f64, offset: f64, g: f64, flux: f64) -> TransportBoundary {
    let mut b = TransportBoundary {
        internal: g * (1.0 - slope),
        constant: -g * offset,
    };
    if flux >= 0.0 {
        b.internal += flux;
    } else {
        b.internal += flux * slope;
        b.constant += flux * offset;
    }
    b
}

impl TransportBc {
    pub fn validate(&self) -> Result<()> {
        match *self {
            TransportBc::FixedTransportFlux {
                coefficient,
                distance,
                ..
            } => {
                if coefficient < 0.0 {
                    return Err(Error::config(format!(
                        "fixedTransportFlux coefficient must be >= 0, got {coefficient}"
                    )));
                }
                if coefficient != 0.0 && distance.is_some_and(|d| !(d > 0.0)) {
                    return Err(Error::config(format!(
                        "fixedTransportFlux distance must be > 0 when the coefficient is non-zero, got {distance:?}"
                    )));
                }
                Ok(())
            }
            TransportBc::Robin { alpha, beta, .. } => {
                if alpha == 0.0 && beta == 0.0 {
                    return Err(Error::config(
                        "Robin condition needs alpha or beta non-zero",
                    ));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Coefficients for one face given its diffusive conductance `g`,
    /// outward fluid flux, area and half-cell distance.
    pub fn coefficients(
        &self,
        g: f64,
        flux: f64,
        area: f64,
        half: f64,
    ) -> Result<TransportBoundary> {
        Ok(match *self {
            TransportBc::FixedValue { value } => face_value_flux(0.0, value, g, flux),
            TransportBc::ZeroGradient => face_value_flux(1.0, 0.0, g, flux),
            TransportBc::NoFlux => TransportBoundary::default(),
            TransportBc::InletOutlet { value } => {
                if flux < 0.0 {
                    face_value_flux(0.0, value, g, flux)
                } else {
                    face_value_flux(1.0, 0.0, g, flux)
                }
            }
            TransportBc::Robin { alpha, beta, gamma } => {
                let denom = alpha + beta / half;
                if denom == 0.0 || !denom.is_finite() {
                    return Err(Error::config(format!(
                        "Robin condition alpha = {alpha}, beta = {beta} is degenerate"
                    )));
                }
                face_value_flux(beta / half / denom, gamma / denom, g, flux)
            }
            TransportBc::FixedTransportFlux {
                inlet_value,
                velocity,
                coefficient,
                external_value,
                distance,
                flux: explicit,
            } => {
                let un = velocity.unwrap_or(flux / area);
                let prescribed = un * inlet_value + explicit;
                if coefficient == 0.0 {
                    return Ok(TransportBoundary {
                        internal: 0.0,
                        constant: area * prescribed,
                    });
                }
                let delta = distance.unwrap_or(half);
                let e = coefficient / delta;
                // Face value from the interior relation
                // gd (c_P - c_b) + u_n c_up = s + e (c_b - c_d), gd = g / A.
                let gd = g / area;
                let (slope, offset) = if un >= 0.0 {
                    (
                        (gd + un) / (gd + e),
                        (e * external_value - prescribed) / (gd + e),
                    )
                } else {
                    (
                        gd / (gd + e - un),
                        (e * external_value - prescribed) / (gd + e - un),
                    )
                };
                TransportBoundary {
                    internal: area * e * slope,
                    constant: area * (prescribed + e * (offset - external_value)),
                }
            }
        })
    }
}

pub(crate) fn boundary_coefficients(
    mesh: &Mesh,
    bcs: &crate::flow::PatchConditions<TransportBc>,
    conductance: &[f64],
    flux: &[f64],
) -> Result<Vec<TransportBoundary>> {
    bcs.check(mesh, "transport")?;
    let mut out = vec![TransportBoundary::default(); mesh.boundary_faces().len()];
    for (p, patch) in mesh.patches().iter().enumerate() {
        if patch.empty {
            continue;
        }
        let bc = bcs.get(p).expect("checked");
        bc.validate()?;
        for (i, b) in patch.range().zip(mesh.patch_faces(p)) {
            out[i] = bc.coefficients(conductance[i], flux[i], b.area, b.half_distance)?;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inlet_outlet_switches_with_flux() {
        let bc = TransportBc::InletOutlet { value: 2.0 };
        let dir = TransportBc::FixedValue { value: 2.0 };
        let zg = TransportBc::ZeroGradient;
        assert_eq!(
            bc.coefficients(3.0, -1.5, 1.0, 0.5).unwrap(),
            dir.coefficients(3.0, -1.5, 1.0, 0.5).unwrap()
        );
        assert_eq!(
            bc.coefficients(3.0, 1.5, 1.0, 0.5).unwrap(),
            zg.coefficients(3.0, 1.5, 1.0, 0.5).unwrap()
        );
    }

    #[test]
    fn robin_limits() {
        let (g, h) = (2.0, 0.25);
        let dir = TransportBc::FixedValue { value: 3.0 }
            .coefficients(g, 0.7, 1.0, h)
            .unwrap();
        let r = TransportBc::Robin {
            alpha: 2.0,
            beta: 0.0,
            gamma: 6.0,
        }
        .coefficients(g, 0.7, 1.0, h)
        .unwrap();
        assert!(
            (dir.internal - r.internal).abs() < 1e-15 && (dir.constant - r.constant).abs() < 1e-15
        );
        // pure Neumann dc/dn = 4: outward diffusive flux -g h 4
        let n = TransportBc::Robin {
            alpha: 0.0,
            beta: 1.0,
            gamma: 4.0,
        }
        .coefficients(g, 0.0, 1.0, h)
        .unwrap();
        assert_eq!(n.internal, 0.0);
        assert!((n.constant + g * h * 4.0).abs() < 1e-15);
    }

    #[test]
    fn transport_flux_homogeneous_neumann() {
        let bc = TransportBc::FixedTransportFlux {
            inlet_value: 5.0,
            velocity: Some(0.0),
            coefficient: 0.0,
            external_value: 0.0,
            distance: None,
            flux: 0.0,
        };
        assert_eq!(
            bc.coefficients(1.0, 0.3, 2.0, 0.5).unwrap(),
            TransportBoundary::default()
        );
    }

    #[test]
    fn transport_flux_series_resistance() {
        // diffusion only: flux = (g e / (g + e)) (c_P - c_d) per unit area
        let (g, d, delta) = (4.0, 3.0, 0.5);
        let bc = TransportBc::FixedTransportFlux {
            inlet_value: 0.0,
            velocity: Some(0.0),
            coefficient: d,
            external_value: 1.0,
            distance: Some(delta),
            flux: 0.0,
        };
        let b = bc.coefficients(g, 0.0, 1.0, 0.5).unwrap();
        let e = d / delta;
        let series = g * e / (g + e);
        for cp in [0.0, 0.4, 2.0] {
            assert!((b.flux(cp) - series * (cp - 1.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn bad_distance_rejected() {
        let bc = TransportBc::FixedTransportFlux {
            inlet_value: 0.0,
            velocity: None,
            coefficient: 1.0,
            external_value: 0.0,
            distance: Some(0.0),
            flux: 0.0,
        };
        assert!(bc.validate().is_err());
    }
}
