//! Writes a truncated Gaussian field to VTK, reads it back, and prints
//! its histogram and metrics.

use porous_fv::geostat::{self, CovarianceKind, FieldType, RandomFieldSpec};
use porous_fv::io::{field_metrics, read_vtk, spatial_pdf, write_vtk, BinSpacing, CellData};
use porous_fv::mesh::Mesh;

fn main() -> porous_fv::Result<()> {
    let mesh = Mesh::build_cartesian(128, 64, 1, [2.0, 1.0, 1.0], [0.0; 3])?;
    let mut spec = RandomFieldSpec::continuous(CovarianceKind::Gaussian, 0.1, 64, 3);
    spec.field_type = FieldType::Truncated;
    spec.thresholds = vec![0.25, 0.5, 0.75];
    spec.percentile = true;
    spec.values = vec![0.27, 58.9, 0.0183, 3.99];
    let k = geostat::generate(&mesh, &spec)?.values;

    let path = std::env::temp_dir().join("porous-fv-facies.vtk");
    write_vtk(&path, &mesh, "facies", &[CellData::Scalar("K".into(), k)])?;
    let data = read_vtk(&path)?;
    let k = data.field("K")?;
    let mesh = data.mesh()?;

    let m = field_metrics(&mesh, &k)?;
    println!(
        "mean {:.4} variance {:.4} min {} max {}",
        m.mean, m.variance, m.min, m.max
    );
    let h = spatial_pdf(&mesh, &k, 8, BinSpacing::Log)?;
    for ((w, p), c) in h.edges.windows(2).zip(h.mass()).zip(h.centers()) {
        if p > 0.0 {
            println!("[{:9.4}, {:9.4}) centre {c:8.3}: {:.3}", w[0], w[1], p);
        }
    }
    Ok(())
}
