//! Steady pressure across a lognormal medium and its effective permeability.

use porous_fv::flow::{solve_pressure, FlowState, PatchConditions, PressureBc, PressureOptions};
use porous_fv::geostat::{self, CovarianceKind, RandomFieldSpec};
use porous_fv::linsolve::{Preconditioner, SolverControls};
use porous_fv::mesh::{Field, Mesh, SymTensor};

fn main() -> porous_fv::Result<()> {
    let mesh = Mesh::build_cartesian(128, 128, 1, [1.0; 3], [0.0; 3])?;
    let mut spec = RandomFieldSpec::continuous(CovarianceKind::Gaussian, 0.05, 64, 11);
    spec.lognormal = true;
    spec.ksigma = 1.0;
    let k = geostat::generate(&mesh, &spec)?.values;
    let perm = Field::from_fn(&mesh, |c, _| SymTensor::isotropic(k[c]));

    let mut state = FlowState::new(&mesh, perm, 1.0, 1.0);
    let bcs = PatchConditions::uniform(PressureBc::NoFlux)
        .with("xmin", PressureBc::FixedPressure { value: 1.0 })
        .with("xmax", PressureBc::FixedPressure { value: 0.0 });
    let controls = SolverControls::pressure()
        .with_preconditioner(Preconditioner::Dilu)
        .with_tolerance(1e-10);
    let (_, report) = solve_pressure(
        &mesh,
        &mut state,
        &bcs,
        &PressureOptions::default(),
        None,
        &controls,
    )?;
    println!(
        "pressure: {} iterations, residual {:.2e}",
        report.iterations, report.residual
    );

    let q: f64 = mesh
        .patch("xmax")?
        .range()
        .map(|b| state.flux.boundary[b])
        .sum();
    let geometric = (k.iter().map(|v| v.ln()).sum::<f64>() / k.len() as f64).exp();
    println!("effective K {:.4}, geometric mean {:.4}", q, geometric);
    Ok(())
}
