//! Density and viscosity laws of concentration and their derivatives.

use porous_fv::constitutive::{dispersion_tensor, DispersionParameters, FluidPropertyModel};

fn main() -> porous_fv::Result<()> {
    let models = [
        (
            "seawater density",
            FluidPropertyModel::Linear {
                f0: 1000.0,
                slope: 0.6832,
            },
        ),
        (
            "viscous fingering",
            FluidPropertyModel::Exponential {
                f0: 1.0,
                rate: -3.0,
            },
        ),
        (
            "tabulated",
            FluidPropertyModel::Tabulated {
                table: vec![(0.0, 1.0), (0.5, 0.8), (1.0, 0.7)],
            },
        ),
    ];
    for (name, model) in &models {
        model.validate()?;
        print!("{name:>18}:");
        for c in [0.0, 0.25, 0.5, 1.0] {
            print!("  f({c}) = {:.4}", model.evaluate(c)?);
        }
        println!("  f'(0.5) = {:.4}", model.derivative(0.5));
    }

    let d = dispersion_tensor(
        [1e-4, 0.0, 0.0],
        &DispersionParameters::new(1e-9, 0.1, 0.01),
    );
    println!(
        "D for u = 1e-4 along x: xx {:.3e} yy {:.3e} xy {:.3e}",
        d.xx, d.yy, d.xy
    );
    Ok(())
}
