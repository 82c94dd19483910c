//! Lognormal permeability from the spectral generator, with its sample
//! statistics and empirical variogram against the model.

use porous_fv::geostat::{self, empirical_variogram, CovarianceKind, RandomFieldSpec};
use porous_fv::io::field_metrics;
use porous_fv::mesh::Mesh;

fn main() -> porous_fv::Result<()> {
    let mesh = Mesh::build_cartesian(256, 128, 1, [2.0, 1.0, 1.0], [0.0; 3])?;
    let mut spec = RandomFieldSpec::continuous(CovarianceKind::Exponential, 0.1, 64, 7);
    spec.lognormal = true;
    spec.ksigma = 1.0;
    let field = geostat::generate(&mesh, &spec)?;

    let m = field_metrics(&mesh, &field.gaussian[0])?;
    println!("log K: mean {:+.4} variance {:.4}", m.mean, m.variance);
    let k = field_metrics(&mesh, &field.values)?;
    println!(
        "K:     mean {:.4} (lognormal theory {:.4})",
        k.mean,
        (0.5f64).exp()
    );

    let model = spec.model()?;
    println!("{:>8} {:>10} {:>10}", "lag", "empirical", "model");
    for bin in empirical_variogram(&mesh, &field.gaussian[0], 8, 0.4)? {
        if let Some(gamma) = bin.gamma {
            println!(
                "{:8.3} {:10.4} {:10.4}",
                bin.distance,
                gamma,
                model.variogram(bin.distance)?
            );
        }
    }
    Ok(())
}
