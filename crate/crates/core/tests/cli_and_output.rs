use std::path::Path;
use std::process::Command;

use porous_fv::geostat::{self, CovarianceKind, RandomFieldSpec};
use porous_fv::io::{
    field_metrics, read_vtk, run_case, spatial_pdf, write_vtk, BinSpacing, CaseConfig, CellData,
};
use porous_fv::mesh::Mesh;

const CONVECTION: &str = r#"
name = "box"
[mesh]
cells = [24, 12, 1]
lengths = [2.0, 1.0, 1.0]
[fluid]
gravity = [0.0, -1.0, 0.0]
density = { model = "linear", f0 = 1.0, slope = -1.0 }
viscosity = { model = "constant", f0 = VISCOSITY }
[medium.dispersion]
Dm = 1.0
[medium.permeability]
value = 100.0
[initial]
profile = { type = "linear", axis = 1, start = 1.0, end = 0.0 }
noise = { amplitude = 0.01, seed = 4 }
[boundary.ymin]
transport = { type = "fixedValue", value = 1.0 }
[boundary.ymax]
transport = { type = "fixedValue", value = 0.0 }
[time]
end = 0.2
dt = 0.01
writeInterval = 0.1
[output]
fields = ["c", "p", "U"]
metrics = ["c", "U"]
histograms = [{ field = "c", bins = 6 }]
nusselt = { patch = "ymin", wallValue = 1.0, delta = 1.0, height = 1.0 }
"#;

fn convection(viscosity: f64) -> String {
    CONVECTION.replace("VISCOSITY", &format!("{viscosity:?}"))
}

fn lognormal_field(mesh: &Mesh) -> Vec<f64> {
    let mut spec = RandomFieldSpec::continuous(CovarianceKind::Exponential, 0.1, 32, 9);
    spec.lognormal = true;
    spec.ksigma = 2.0;
    geostat::generate(mesh, &spec).unwrap().values
}

#[test]
fn vtk_round_trip_keeps_nine_digits() {
    let mesh = Mesh::build_cartesian(20, 10, 3, [2.0, 1.0, 0.3], [-1.0, 0.5, 0.0]).unwrap();
    let k = lognormal_field(&mesh);
    let u: Vec<[f64; 3]> = (0..mesh.n_cells()).map(|c| mesh.cell_center(c)).collect();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.vtk");
    write_vtk(
        &path,
        &mesh,
        "round trip",
        &[
            CellData::Scalar("K".into(), k.clone()),
            CellData::Vector("U".into(), u),
        ],
    )
    .unwrap();
    let data = read_vtk(&path).unwrap();
    assert_eq!(data.dims, [20, 10, 3]);
    let centre = data.mesh().unwrap().cell_center(7);
    assert!(centre
        .iter()
        .zip(mesh.cell_center(7))
        .all(|(a, b)| (a - b).abs() < 1e-12));
    for (a, b) in k.iter().zip(data.field("K").unwrap()) {
        assert!((a - b).abs() <= 5e-9 * a.abs(), "{a} vs {b}");
    }
    assert!(data.field("U").unwrap().iter().all(|v| v.is_finite()));
}

#[test]
fn metrics_match_flat_array_reductions() {
    let mesh = Mesh::build_cartesian(64, 32, 1, [2.0, 1.0, 1.0], [0.0; 3]).unwrap();
    let k = lognormal_field(&mesh);
    let n = k.len() as f64;
    let mean = k.iter().sum::<f64>() / n;
    let variance = k.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let m = field_metrics(&mesh, &k).unwrap();
    assert!((m.mean - mean).abs() <= 1e-12 * mean);
    assert!((m.variance - variance).abs() <= 1e-12 * variance);
    assert!((m.integral - mean * 2.0).abs() <= 1e-12 * m.integral);
    assert_eq!(m.min, k.iter().cloned().fold(f64::INFINITY, f64::min));

    let h = spatial_pdf(&mesh, &k, 10, BinSpacing::Log).unwrap();
    let counted = k
        .iter()
        .filter(|&&v| v >= h.edges[3] && v < h.edges[4])
        .count() as f64
        / n;
    assert!((h.mass()[3] - counted).abs() < 1e-12);
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    v.sort();
    v
}

#[test]
fn run_writes_identical_outputs_twice() {
    let cfg: CaseConfig = porous_fv::io::parse_case_str(&convection(1.0)).unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let summary = run_case(&cfg, a.path()).unwrap();
    run_case(&cfg, b.path()).unwrap();
    let (fa, fb) = (files(a.path()), files(b.path()));
    let names: Vec<&str> = fa.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(
        names,
        [
            "box_0000.vtk",
            "box_0001.vtk",
            "box_0002.vtk",
            "box_metrics.csv",
            "box_pdf_c_0000.csv",
            "box_pdf_c_0001.csv",
            "box_pdf_c_0002.csv",
            "box_series.csv"
        ]
    );
    assert_eq!(fa, fb);
    let balance: Vec<f64> = summary.reports.iter().map(|r| r.balance_error()).collect();
    assert!(balance.iter().all(|&e| e < 1e-6), "{balance:?}");
    let series = String::from_utf8(fa[7].1.clone()).unwrap();
    assert!(series.starts_with("time,dt,outer_iterations,converged,mass,balance_error,nusselt\n"));
    // nine significant digits
    let first = series.lines().nth(1).unwrap().split(',').next().unwrap();
    assert_eq!(first.split('e').next().unwrap().len(), 10, "{first}");
}

fn cli(args: &[&str], dir: &Path) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_porous-fv"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "error")
        .output()
        .unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8_lossy(&out.stdout).into_owned(),
    )
}

#[test]
fn command_line_exit_codes_and_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("bad.toml"), "[mesh]\ncels = [4, 4, 1]\n").unwrap();
    assert_eq!(cli(&["run", "bad.toml"], d).0, 1);
    assert_eq!(cli(&["run", "missing.toml"], d).0, 1);
    assert_eq!(cli(&["frobnicate"], d).0, 1);

    // vigorous convection with a huge first step cannot converge
    std::fs::write(d.join("stiff.toml"), convection(1e-3)).unwrap();
    assert_eq!(cli(&["run", "stiff.toml", "--output-dir", "stiff"], d).0, 2);

    let (code, out) = cli(
        &[
            "genfield",
            "hrl_lognormal",
            "--seed",
            "5",
            "--output-dir",
            "k",
        ],
        d,
    );
    assert_eq!(code, 0);
    let vtk = out.trim().to_string();
    assert!(vtk.ends_with("hrl_lognormal_field.vtk"), "{vtk}");
    let (code, _) = cli(
        &[
            "genfield",
            "hrl_lognormal",
            "--seed",
            "5",
            "--output-dir",
            "k2",
        ],
        d,
    );
    assert_eq!(code, 0);
    assert_eq!(
        std::fs::read(d.join(&vtk)).unwrap(),
        std::fs::read(d.join("k2/hrl_lognormal_field.vtk")).unwrap()
    );

    let (code, out) = cli(
        &[
            "pdf",
            &vtk,
            "--field",
            "K",
            "--bins",
            "12",
            "--spacing",
            "log",
            "--output-dir",
            "s",
        ],
        d,
    );
    assert_eq!(code, 0);
    let csv = std::fs::read_to_string(d.join(out.trim())).unwrap();
    assert_eq!(csv.lines().count(), 13);
    assert_eq!(cli(&["pdf", &vtk, "--field", "nope"], d).0, 1);

    let (code, out) = cli(&["metrics", &vtk, "--output-dir", "s"], d);
    assert_eq!(code, 0);
    assert!(out.starts_with("K: mean"), "{out}");

    std::fs::write(d.join("box.toml"), convection(1.0)).unwrap();
    let (code, out) = cli(
        &[
            "run",
            "box.toml",
            "--output-dir",
            "r",
            "--write-interval",
            "0.05",
        ],
        d,
    );
    assert_eq!(code, 0, "{out}");
    assert!(out.starts_with("nusselt = "), "{out}");
    assert!(d.join("r/box_0004.vtk").exists());
}
