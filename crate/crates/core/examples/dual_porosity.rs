//! Fractured five-spot: matrix and fracture pressures coupled by transfer,
//! solved with both outer schemes.

use porous_fv::benchmarks::FiveSpot;
use porous_fv::flow::{solve_dual_porosity, DualControls, DualScheme, PressureOptions};

fn main() -> porous_fv::Result<()> {
    let spot = FiveSpot::default();
    let mesh = spot.mesh()?;
    let bcs = spot.boundary_conditions();
    for scheme in [DualScheme::SchurSplit, DualScheme::Segregated] {
        let mut state = spot.state(&mesh);
        let controls = DualControls {
            scheme,
            max_outer: 500,
            ..DualControls::default()
        };
        let r = solve_dual_porosity(
            &mesh,
            &mut state,
            &bcs,
            &bcs,
            &PressureOptions::default(),
            &controls,
        )?;
        let transfer: f64 = state.transfer(&mesh).iter().map(|t| t.abs()).sum();
        println!(
            "{scheme:?}: converged {} in {} outer iterations, total |transfer| {:.4e}",
            r.converged, r.iterations, transfer
        );
    }
    Ok(())
}
