//! Legacy ASCII VTK (structured points, cell data) writer and a reader for
//! the same subset.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Vec3};

/// Nine significant digits.
pub fn fmt_sig(v: f64) -> String {
    format!("{v:.8e}")
}

#[derive(Debug, Clone, PartialEq)]
pub enum CellData {
    Scalar(String, Vec<f64>),
    Vector(String, Vec<Vec3>),
}

impl CellData {
    pub fn name(&self) -> &str {
        match self {
            CellData::Scalar(n, _) | CellData::Vector(n, _) => n,
        }
    }

    fn len(&self) -> usize {
        match self {
            CellData::Scalar(_, v) => v.len(),
            CellData::Vector(_, v) => v.len(),
        }
    }

    fn first_non_finite(&self) -> Option<usize> {
        match self {
            CellData::Scalar(_, v) => v.iter().position(|x| !x.is_finite()),
            CellData::Vector(_, v) => v.iter().position(|x| x.iter().any(|c| !c.is_finite())),
        }
    }
}

/// Renders the file contents; values in lexicographic cell order.
pub fn render_vtk(mesh: &Mesh, title: &str, fields: &[CellData]) -> Result<String> {
    let n = mesh.n_cells();
    for f in fields {
        if f.len() != n {
            return Err(Error::config(format!(
                "field `{}` has {} values for {n} cells",
                f.name(),
                f.len()
            )));
        }
        if f.name().is_empty() || f.name().contains(char::is_whitespace) {
            return Err(Error::config(format!(
                "invalid VTK field name `{}`",
                f.name()
            )));
        }
        if let Some(cell) = f.first_non_finite() {
            return Err(Error::NonFinite {
                field: f.name().to_string(),
                cell,
            });
        }
    }
    let [nx, ny, nz] = mesh.dims();
    let o = mesh.origin();
    let h = mesh.spacing();
    let mut s = String::with_capacity(32 * n * fields.len().max(1) + 256);
    s.push_str("# vtk DataFile Version 3.0\n");
    // the title line must be a single line of at most 256 characters
    let title: String = title.chars().filter(|c| *c != '\n').take(255).collect();
    let _ = writeln!(s, "{title}");
    s.push_str("ASCII\nDATASET STRUCTURED_POINTS\n");
    let _ = writeln!(s, "DIMENSIONS {} {} {}", nx + 1, ny + 1, nz + 1);
    let _ = writeln!(
        s,
        "ORIGIN {} {} {}",
        fmt_sig(o[0]),
        fmt_sig(o[1]),
        fmt_sig(o[2])
    );
    let _ = writeln!(
        s,
        "SPACING {} {} {}",
        fmt_sig(h[0]),
        fmt_sig(h[1]),
        fmt_sig(h[2])
    );
    let _ = writeln!(s, "CELL_DATA {n}");
    for f in fields {
        match f {
            CellData::Scalar(name, v) => {
                let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
                for x in v {
                    s.push_str(&fmt_sig(*x));
                    s.push('\n');
                }
            }
            CellData::Vector(name, v) => {
                let _ = writeln!(s, "VECTORS {name} double");
                for x in v {
                    let _ = writeln!(s, "{} {} {}", fmt_sig(x[0]), fmt_sig(x[1]), fmt_sig(x[2]));
                }
            }
        }
    }
    Ok(s)
}

pub fn write_vtk(
    path: impl AsRef<Path>,
    mesh: &Mesh,
    title: &str,
    fields: &[CellData],
) -> Result<()> {
    let text = render_vtk(mesh, title, fields)?;
    let path = path.as_ref();
    std::fs::write(path, text)
        .map_err(|e| Error::config(format!("cannot write {}: {e}", path.display())))
}

/// Contents of a structured-points file with cell data.
#[derive(Debug, Clone, PartialEq)]
pub struct VtkData {
    pub title: String,
    pub dims: [usize; 3],
    pub origin: Vec3,
    pub spacing: Vec3,
    pub scalars: BTreeMap<String, Vec<f64>>,
    pub vectors: BTreeMap<String, Vec<Vec3>>,
}

impl VtkData {
    /// The cell mesh the data lives on.
    pub fn mesh(&self) -> Result<Mesh> {
        let [nx, ny, nz] = self.dims;
        let l = [
            self.spacing[0] * nx as f64,
            self.spacing[1] * ny as f64,
            self.spacing[2] * nz as f64,
        ];
        Mesh::build_cartesian(nx, ny, nz, l, self.origin)
    }

    pub fn field_names(&self) -> Vec<String> {
        self.scalars
            .keys()
            .chain(self.vectors.keys())
            .cloned()
            .collect()
    }

    /// A scalar field, or the magnitude of a vector field.
    pub fn field(&self, name: &str) -> Result<Vec<f64>> {
        if let Some(v) = self.scalars.get(name) {
            return Ok(v.clone());
        }
        if let Some(v) = self.vectors.get(name) {
            return Ok(v
                .iter()
                .map(|x| (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt())
                .collect());
        }
        Err(Error::config(format!(
            "no field `{name}` in the file; available: {:?}",
            self.field_names()
        )))
    }
}

fn parse_err(path: &Path, line: usize, msg: impl std::fmt::Display) -> Error {
    Error::CaseSyntax {
        path: path.to_path_buf(),
        message: format!("line {line}: {msg}"),
    }
}

/// Reads files produced by [`write_vtk`] (ASCII structured points, cell data).
pub fn read_vtk(path: impl AsRef<Path>) -> Result<VtkData> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
    parse_vtk(path, &text)
}

fn parse_vtk(path: &Path, text: &str) -> Result<VtkData> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let mut next = |what: &str| -> Result<(usize, &str)> {
        lines
            .by_ref()
            .find(|(_, l)| !l.is_empty())
            .ok_or_else(|| parse_err(path, 0, format!("unexpected end of file, expected {what}")))
    };
    let (n, header) = next("header")?;
    if !header.starts_with("# vtk DataFile") {
        return Err(parse_err(path, n, "not a legacy VTK file"));
    }
    let (_, title) = next("title")?;
    let title = title.to_string();
    let (n, fmt) = next("ASCII")?;
    if fmt != "ASCII" {
        return Err(parse_err(path, n, "only ASCII files are supported"));
    }
    let (n, ds) = next("DATASET")?;
    if ds != "DATASET STRUCTURED_POINTS" {
        return Err(parse_err(
            path,
            n,
            "only STRUCTURED_POINTS datasets are supported",
        ));
    }
    let mut dims = None;
    let mut origin = [0.0; 3];
    let mut spacing = [1.0; 3];
    let mut n_cells = None;
    let nums = |n: usize, rest: &[&str]| -> Result<Vec<f64>> {
        rest.iter()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|e| parse_err(path, n, format!("`{t}`: {e}")))
            })
            .collect()
    };
    while n_cells.is_none() {
        let (n, l) = next("CELL_DATA")?;
        let tok: Vec<&str> = l.split_whitespace().collect();
        match tok[0] {
            "DIMENSIONS" => {
                let v = nums(n, &tok[1..])?;
                if v.len() != 3 || v.iter().any(|&d| d < 2.0) {
                    return Err(parse_err(
                        path,
                        n,
                        "DIMENSIONS needs three point counts >= 2",
                    ));
                }
                dims = Some([v[0] as usize - 1, v[1] as usize - 1, v[2] as usize - 1]);
            }
            "ORIGIN" | "SPACING" => {
                let v = nums(n, &tok[1..])?;
                if v.len() != 3 {
                    return Err(parse_err(path, n, format!("{} needs three values", tok[0])));
                }
                let t = if tok[0] == "ORIGIN" {
                    &mut origin
                } else {
                    &mut spacing
                };
                t.copy_from_slice(&v);
            }
            "CELL_DATA" => {
                n_cells = Some(
                    tok.get(1)
                        .and_then(|t| t.parse::<usize>().ok())
                        .ok_or_else(|| parse_err(path, n, "CELL_DATA needs a count"))?,
                );
            }
            other => return Err(parse_err(path, n, format!("unexpected keyword `{other}`"))),
        }
    }
    let dims = dims.ok_or_else(|| parse_err(path, 0, "missing DIMENSIONS"))?;
    let count = n_cells.expect("loop exits with a count");
    if count != dims[0] * dims[1] * dims[2] {
        return Err(parse_err(
            path,
            0,
            format!("CELL_DATA {count} does not match DIMENSIONS"),
        ));
    }
    let mut scalars = BTreeMap::new();
    let mut vectors = BTreeMap::new();
    let rest: Vec<(usize, &str)> = lines.filter(|(_, l)| !l.is_empty()).collect();
    let mut i = 0;
    while i < rest.len() {
        let (n, l) = rest[i];
        let tok: Vec<&str> = l.split_whitespace().collect();
        match tok[0] {
            "SCALARS" => {
                let name = tok
                    .get(1)
                    .ok_or_else(|| parse_err(path, n, "SCALARS needs a name"))?;
                i += 1;
                if rest
                    .get(i)
                    .is_some_and(|(_, l)| l.starts_with("LOOKUP_TABLE"))
                {
                    i += 1;
                }
                let mut v = Vec::with_capacity(count);
                while v.len() < count {
                    let (n, l) = rest
                        .get(i)
                        .ok_or_else(|| parse_err(path, 0, format!("`{name}` is truncated")))?;
                    for t in l.split_whitespace() {
                        v.push(
                            t.parse::<f64>()
                                .map_err(|e| parse_err(path, *n, format!("`{t}`: {e}")))?,
                        );
                    }
                    i += 1;
                }
                scalars.insert(name.to_string(), v);
            }
            "VECTORS" => {
                let name = tok
                    .get(1)
                    .ok_or_else(|| parse_err(path, n, "VECTORS needs a name"))?;
                i += 1;
                let mut flat = Vec::with_capacity(3 * count);
                while flat.len() < 3 * count {
                    let (n, l) = rest
                        .get(i)
                        .ok_or_else(|| parse_err(path, 0, format!("`{name}` is truncated")))?;
                    for t in l.split_whitespace() {
                        flat.push(
                            t.parse::<f64>()
                                .map_err(|e| parse_err(path, *n, format!("`{t}`: {e}")))?,
                        );
                    }
                    i += 1;
                }
                vectors.insert(
                    name.to_string(),
                    flat.chunks(3).map(|c| [c[0], c[1], c[2]]).collect(),
                );
            }
            other => return Err(parse_err(path, n, format!("unexpected keyword `{other}`"))),
        }
    }
    Ok(VtkData {
        title,
        dims,
        origin,
        spacing,
        scalars,
        vectors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_values_in_lexicographic_order() {
        let mesh = Mesh::build_cartesian(2, 2, 1, [1.0; 3], [0.0; 3]).unwrap();
        let s = render_vtk(
            &mesh,
            "t",
            &[CellData::Scalar("c".into(), vec![0.0, 1.0, 2.0, 3.0])],
        )
        .unwrap();
        let body: Vec<&str> = s
            .lines()
            .skip_while(|l| !l.starts_with("LOOKUP_TABLE"))
            .skip(1)
            .collect();
        assert_eq!(
            body,
            [
                "0.00000000e0",
                "1.00000000e0",
                "2.00000000e0",
                "3.00000000e0"
            ]
        );
        assert!(s.contains("DIMENSIONS 3 3 2") && s.contains("CELL_DATA 4"));
    }

    #[test]
    fn nan_is_refused_with_cell() {
        let mesh = Mesh::build_cartesian(3, 1, 1, [1.0; 3], [0.0; 3]).unwrap();
        let err = render_vtk(
            &mesh,
            "t",
            &[CellData::Scalar("c".into(), vec![0.0, 1.0, f64::NAN])],
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonFinite { cell: 2, .. }), "{err}");
    }

    #[test]
    fn parse_back() {
        let mesh = Mesh::build_cartesian(3, 2, 1, [1.5, 1.0, 0.1], [1.0, 0.0, 0.0]).unwrap();
        let c: Vec<f64> = (0..6).map(|i| (i as f64).sqrt() * 1e-7).collect();
        let u: Vec<Vec3> = (0..6).map(|i| [i as f64, -1.0 / 3.0, 0.0]).collect();
        let s = render_vtk(
            &mesh,
            "x",
            &[
                CellData::Scalar("c".into(), c.clone()),
                CellData::Vector("U".into(), u.clone()),
            ],
        )
        .unwrap();
        let d = parse_vtk(Path::new("mem"), &s).unwrap();
        assert_eq!(d.dims, [3, 2, 1]);
        for (a, b) in d.scalars["c"].iter().zip(&c) {
            assert!((a - b).abs() <= 1e-8 * b.abs());
        }
        assert!((d.vectors["U"][4][1] + 1.0 / 3.0).abs() < 1e-9);
        assert_eq!(d.mesh().unwrap().n_cells(), 6);
    }
}
