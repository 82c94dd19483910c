//! A solute front advected through a uniform column, compared with the
//! Ogata-Banks solution.

use porous_fv::constitutive::DispersionParameters;
use porous_fv::flow::PatchConditions;
use porous_fv::mesh::{FaceField, Mesh};
use porous_fv::transport::{
    solve_transport, Advection, TransportBc, TransportOptions, TransportState,
};
use statrs::function::erf::erfc;

fn main() -> porous_fv::Result<()> {
    let (n, length, u, d) = (200, 1.0, 1.0, 1e-3);
    let mesh = Mesh::build_cartesian(n, 1, 1, [length, 0.01, 0.01], [0.0; 3])?;
    let mut flux = FaceField::zeros(&mesh);
    for (i, f) in mesh.faces().iter().enumerate() {
        flux.internal[i] = u * f.area;
    }
    for (b, face) in mesh.boundary_faces().iter().enumerate() {
        if face.axis == 0 {
            flux.boundary[b] = face.sign * u * face.area;
        }
    }
    let bcs = PatchConditions::uniform(TransportBc::ZeroGradient)
        .with("xmin", TransportBc::FixedValue { value: 1.0 });

    for advection in [Advection::Upwind, Advection::LimitedLinear] {
        let mut state = TransportState::new(
            &mesh,
            vec![0.0; n],
            1.0,
            DispersionParameters::new(d, 0.0, 0.0),
        );
        let options = TransportOptions {
            advection,
            ..TransportOptions::default()
        };
        let dt = 0.5 * length / n as f64 / u;
        let steps = (0.4 / dt).round() as usize;
        for _ in 0..steps {
            let guess = state.concentration.clone();
            let sol = solve_transport(&mesh, &state, &flux, &[], &bcs, &options, dt, &guess)?;
            state.commit(sol.concentration, dt);
        }
        let t = state.time;
        let err = (0..n)
            .map(|c| {
                let x = mesh.cell_center(c)[0];
                let exact = 0.5 * erfc((x - u * t) / (2.0 * (d * t).sqrt()))
                    + 0.5
                        * (u * x / d).exp().min(1e300)
                        * erfc((x + u * t) / (2.0 * (d * t).sqrt()));
                (state.concentration[c] - exact).abs()
            })
            .fold(0.0, f64::max);
        println!("{advection:?}: t = {t:.3}, max error vs analytical {err:.4}");
    }
    Ok(())
}
