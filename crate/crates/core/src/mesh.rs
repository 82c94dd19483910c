//! Cartesian finite-volume grids.
//!
//! Cells are numbered `i + nx * (j + ny * k)`. Internal faces are stored
//! axis by axis and, within one axis, in increasing owner order; the owner of
//! an internal face always has the smaller cell index. Boundary faces are
//! grouped into the six patches `xmin, xmax, ymin, ymax, zmin, zmax`, each in
//! increasing cell order.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];

pub const PATCH_NAMES: [&str; 6] = ["xmin", "xmax", "ymin", "ymax", "zmin", "zmax"];

pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub fn axis_unit(axis: usize) -> Vec3 {
    let mut e = [0.0; 3];
    e[axis] = 1.0;
    e
}

/// Symmetric 3x3 tensor stored as its six independent components.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SymTensor {
    pub xx: f64,
    pub xy: f64,
    pub xz: f64,
    pub yy: f64,
    pub yz: f64,
    pub zz: f64,
}

impl SymTensor {
    pub fn isotropic(value: f64) -> Self {
        Self::diagonal([value; 3])
    }

    pub fn diagonal(d: Vec3) -> Self {
        SymTensor {
            xx: d[0],
            yy: d[1],
            zz: d[2],
            ..Default::default()
        }
    }

    /// Components in the order `xx, xy, xz, yy, yz, zz`.
    pub fn components(&self) -> [f64; 6] {
        [self.xx, self.xy, self.xz, self.yy, self.yz, self.zz]
    }

    pub fn from_components(c: [f64; 6]) -> Self {
        SymTensor {
            xx: c[0],
            xy: c[1],
            xz: c[2],
            yy: c[3],
            yz: c[4],
            zz: c[5],
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match (i.min(j), i.max(j)) {
            (0, 0) => self.xx,
            (0, 1) => self.xy,
            (0, 2) => self.xz,
            (1, 1) => self.yy,
            (1, 2) => self.yz,
            (2, 2) => self.zz,
            _ => panic!("tensor index ({i}, {j}) out of range"),
        }
    }

    pub fn to_matrix(&self) -> [[f64; 3]; 3] {
        let mut m = [[0.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.get(i, j);
            }
        }
        m
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::from_components(self.components().map(|c| c * s))
    }

    pub fn apply(&self, v: Vec3) -> Vec3 {
        let m = self.to_matrix();
        [dot(m[0], v), dot(m[1], v), dot(m[2], v)]
    }
}

/// Cell-centred data bound to a mesh by length.
#[derive(Debug, Clone, PartialEq)]
pub struct Field<T> {
    pub values: Vec<T>,
}

pub type ScalarField = Field<f64>;
pub type VectorField = Field<Vec3>;
pub type TensorField = Field<SymTensor>;

impl<T: Clone> Field<T> {
    pub fn uniform(mesh: &Mesh, value: T) -> Self {
        Field {
            values: vec![value; mesh.n_cells()],
        }
    }
}

impl<T> Field<T> {
    pub fn new(values: Vec<T>) -> Self {
        Field { values }
    }

    pub fn from_fn(mesh: &Mesh, mut f: impl FnMut(usize, Vec3) -> T) -> Self {
        Field {
            values: (0..mesh.n_cells())
                .map(|c| f(c, mesh.cell_center(c)))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.values.iter()
    }

    pub fn check_bound(&self, mesh: &Mesh, name: &str) -> Result<()> {
        if self.values.len() != mesh.n_cells() {
            return Err(Error::config(format!(
                "field `{name}` has {} values for {} cells",
                self.values.len(),
                mesh.n_cells()
            )));
        }
        Ok(())
    }
}

impl Field<f64> {
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Field::new(self.values.iter().map(|&v| f(v)).collect())
    }
}

impl<T> Index<usize> for Field<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.values[i]
    }
}

impl<T> IndexMut<usize> for Field<T> {
    fn index_mut(&mut self, i: usize) -> &mut T {
        &mut self.values[i]
    }
}

/// Per-face data: one value per internal face and one per boundary face.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FaceField {
    pub internal: Vec<f64>,
    pub boundary: Vec<f64>,
}

impl FaceField {
    pub fn zeros(mesh: &Mesh) -> Self {
        FaceField {
            internal: vec![0.0; mesh.faces().len()],
            boundary: vec![0.0; mesh.boundary_faces().len()],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Face {
    pub owner: usize,
    pub neighbour: usize,
    pub axis: usize,
    pub area: f64,
    /// Centre-to-centre distance between owner and neighbour.
    pub distance: f64,
    pub center: Vec3,
}

impl Face {
    /// Unit normal, pointing from owner to neighbour.
    pub fn normal(&self) -> Vec3 {
        axis_unit(self.axis)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryFace {
    pub cell: usize,
    pub patch: usize,
    pub axis: usize,
    /// +1 when the outward normal points along +axis.
    pub sign: f64,
    pub area: f64,
    /// Distance from the cell centre to the face centre.
    pub half_distance: f64,
    pub center: Vec3,
}

impl BoundaryFace {
    pub fn normal(&self) -> Vec3 {
        let mut n = axis_unit(self.axis);
        n[self.axis] = self.sign;
        n
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub name: &'static str,
    pub axis: usize,
    pub sign: f64,
    /// Range into `Mesh::boundary_faces`.
    pub start: usize,
    pub len: usize,
    /// Patches normal to a collapsed axis of a 2-D grid carry no flux.
    pub empty: bool,
}

impl Patch {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.len
    }
}

#[derive(Debug, Clone)]
pub struct Mesh {
    dims: [usize; 3],
    origin: Vec3,
    lengths: Vec3,
    spacing: Vec3,
    faces: Vec<Face>,
    boundary: Vec<BoundaryFace>,
    patches: Vec<Patch>,
}

impl Mesh {
    /// Builds an `nx * ny * nz` grid covering `origin .. origin + lengths`.
    /// A 2-D grid is `nz = 1`; `lengths[2]` is then its thickness.
    pub fn build_cartesian(
        nx: usize,
        ny: usize,
        nz: usize,
        lengths: Vec3,
        origin: Vec3,
    ) -> Result<Mesh> {
        let dims = [nx, ny, nz];
        if dims.contains(&0) {
            return Err(Error::config(format!(
                "cell counts must be >= 1, got {dims:?}"
            )));
        }
        if lengths.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::config(format!(
                "domain lengths must be > 0, got {lengths:?}"
            )));
        }
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::config("origin must be finite"));
        }
        let spacing = [
            lengths[0] / nx as f64,
            lengths[1] / ny as f64,
            lengths[2] / nz as f64,
        ];
        let mut mesh = Mesh {
            dims,
            origin,
            lengths,
            spacing,
            faces: Vec::new(),
            boundary: Vec::new(),
            patches: Vec::new(),
        };
        mesh.build_faces();
        Ok(mesh)
    }

    fn face_area(&self, axis: usize) -> f64 {
        let (a, b) = match axis {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        self.spacing[a] * self.spacing[b]
    }

    fn build_faces(&mut self) {
        let n = self.n_cells();
        let mut faces = Vec::new();
        for axis in 0..3 {
            let area = self.face_area(axis);
            let stride = self.stride(axis);
            for c in 0..n {
                let ijk = self.ijk(c);
                if ijk[axis] + 1 < self.dims[axis] {
                    let mut center = self.cell_center(c);
                    center[axis] += 0.5 * self.spacing[axis];
                    faces.push(Face {
                        owner: c,
                        neighbour: c + stride,
                        axis,
                        area,
                        distance: self.spacing[axis],
                        center,
                    });
                }
            }
        }
        let mut boundary = Vec::new();
        let mut patches = Vec::new();
        for (p, name) in PATCH_NAMES.iter().enumerate() {
            let axis = p / 2;
            let sign = if p % 2 == 0 { -1.0 } else { 1.0 };
            let layer = if sign < 0.0 { 0 } else { self.dims[axis] - 1 };
            let start = boundary.len();
            let area = self.face_area(axis);
            for c in 0..n {
                if self.ijk(c)[axis] == layer {
                    let mut center = self.cell_center(c);
                    center[axis] += sign * 0.5 * self.spacing[axis];
                    boundary.push(BoundaryFace {
                        cell: c,
                        patch: p,
                        axis,
                        sign,
                        area,
                        half_distance: 0.5 * self.spacing[axis],
                        center,
                    });
                }
            }
            patches.push(Patch {
                name,
                axis,
                sign,
                start,
                len: boundary.len() - start,
                empty: axis == 2 && self.dims[2] == 1,
            });
        }
        self.faces = faces;
        self.boundary = boundary;
        self.patches = patches;
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn origin(&self) -> Vec3 {
        self.origin
    }

    pub fn lengths(&self) -> Vec3 {
        self.lengths
    }

    pub fn spacing(&self) -> Vec3 {
        self.spacing
    }

    pub fn n_cells(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_2d(&self) -> bool {
        self.dims[2] == 1
    }

    pub fn stride(&self, axis: usize) -> usize {
        match axis {
            0 => 1,
            1 => self.dims[0],
            _ => self.dims[0] * self.dims[1],
        }
    }

    pub fn ijk(&self, cell: usize) -> [usize; 3] {
        let [nx, ny, _] = self.dims;
        [cell % nx, (cell / nx) % ny, cell / (nx * ny)]
    }

    pub fn cell_index(&self, ijk: [usize; 3]) -> usize {
        ijk[0] + self.dims[0] * (ijk[1] + self.dims[1] * ijk[2])
    }

    pub fn cell_center(&self, cell: usize) -> Vec3 {
        let ijk = self.ijk(cell);
        let mut x = [0.0; 3];
        for a in 0..3 {
            x[a] = self.origin[a] + (ijk[a] as f64 + 0.5) * self.spacing[a];
        }
        x
    }

    pub fn cell_centers(&self) -> Vec<Vec3> {
        (0..self.n_cells()).map(|c| self.cell_center(c)).collect()
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    pub fn total_volume(&self) -> f64 {
        self.lengths.iter().product()
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn boundary_faces(&self) -> &[BoundaryFace] {
        &self.boundary
    }

    pub fn patches(&self) -> &[Patch] {
        &self.patches
    }

    pub fn patch_id(&self, name: &str) -> Option<usize> {
        PATCH_NAMES.iter().position(|&n| n == name)
    }

    pub fn patch(&self, name: &str) -> Result<&Patch> {
        self.patch_id(name)
            .map(|p| &self.patches[p])
            .ok_or_else(|| {
                Error::config(format!(
                    "unknown patch `{name}` (expected one of {PATCH_NAMES:?})"
                ))
            })
    }

    /// Boundary faces of one patch.
    pub fn patch_faces(&self, patch: usize) -> &[BoundaryFace] {
        &self.boundary[self.patches[patch].range()]
    }

    /// Index of the cell containing `x`, clamped to the grid.
    pub fn locate(&self, x: Vec3) -> usize {
        let mut ijk = [0usize; 3];
        for a in 0..3 {
            let s = ((x[a] - self.origin[a]) / self.spacing[a]).floor();
            ijk[a] = (s.max(0.0) as usize).min(self.dims[a] - 1);
        }
        self.cell_index(ijk)
    }
}

/// Harmonic face interpolation of a per-cell, per-axis coefficient,
/// multiplied by area over distance. A zero coefficient on either side gives
/// a zero face value. Boundary faces receive the one-sided value.
pub(crate) fn harmonic_face_values(mesh: &Mesh, coeff: impl Fn(usize, usize) -> f64) -> FaceField {
    let internal = mesh
        .faces()
        .iter()
        .map(|f| {
            let ko = coeff(f.owner, f.axis);
            let kn = coeff(f.neighbour, f.axis);
            if ko <= 0.0 || kn <= 0.0 {
                return 0.0;
            }
            let half = 0.5 * f.distance;
            f.area / (half / ko + half / kn)
        })
        .collect();
    let boundary = mesh
        .boundary_faces()
        .iter()
        .map(|b| {
            let k = coeff(b.cell, b.axis);
            if k <= 0.0 {
                0.0
            } else {
                b.area * k / b.half_distance
            }
        })
        .collect();
    FaceField { internal, boundary }
}

/// Two-point transmissibilities `A_f / (d_O / k_O + d_N / k_N)` using the
/// permeability component normal to each face.
pub fn face_transmissibility(mesh: &Mesh, permeability: &TensorField) -> Result<FaceField> {
    permeability.check_bound(mesh, "permeability")?;
    for (c, k) in permeability.iter().enumerate() {
        for axis in 0..3 {
            if axis == 2 && mesh.is_2d() {
                continue;
            }
            let v = k.get(axis, axis);
            if !(v > 0.0) {
                return Err(Error::SingularMedium(format!(
                    "non-positive permeability component {v:e} along axis {axis} in cell {c}"
                )));
            }
        }
    }
    Ok(harmonic_face_values(mesh, |c, axis| {
        permeability[c].get(axis, axis)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_line(n: usize) -> Mesh {
        Mesh::build_cartesian(n, 1, 1, [n as f64, 1.0, 1.0], [0.0; 3]).unwrap()
    }

    #[test]
    fn single_cell_has_six_boundary_faces() {
        let m = Mesh::build_cartesian(1, 1, 1, [1.0; 3], [0.0; 3]).unwrap();
        assert_eq!(m.n_cells(), 1);
        assert_eq!(m.faces().len(), 0);
        assert_eq!(m.boundary_faces().len(), 6);
    }

    #[test]
    fn two_cell_line() {
        let m = unit_line(2);
        assert_eq!(m.n_cells(), 2);
        assert_eq!(m.faces().len(), 1);
        let f = m.faces()[0];
        assert_eq!((f.owner, f.neighbour), (0, 1));
        assert_eq!(f.area, 1.0);
        assert_eq!(f.distance, 1.0);
    }

    #[test]
    fn hrl_grid_size() {
        let m = Mesh::build_cartesian(1024, 512, 1, [2.0, 1.0, 0.01], [0.0; 3]).unwrap();
        assert_eq!(m.n_cells(), 524_288);
        assert!(m.patches()[4].empty && m.patches()[5].empty);
    }

    #[test]
    fn rejects_degenerate_input() {
        assert!(matches!(
            Mesh::build_cartesian(0, 1, 1, [1.0; 3], [0.0; 3]),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            Mesh::build_cartesian(1, 1, 1, [1.0, -1.0, 1.0], [0.0; 3]),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn face_counts_and_ordering() {
        let m = Mesh::build_cartesian(3, 4, 2, [3.0, 4.0, 2.0], [0.0; 3]).unwrap();
        // 2*4*2 + 3*3*2 + 3*4*1
        assert_eq!(m.faces().len(), 16 + 18 + 12);
        for w in m.faces().windows(2) {
            assert!((w[0].axis, w[0].owner) < (w[1].axis, w[1].owner));
        }
        for f in m.faces() {
            assert!(f.owner < f.neighbour);
        }
        // every boundary face in exactly one patch
        let total: usize = m.patches().iter().map(|p| p.len).sum();
        assert_eq!(total, m.boundary_faces().len());
        for (p, patch) in m.patches().iter().enumerate() {
            assert!(m
                .patch_faces(p)
                .iter()
                .all(|b| b.patch == p && b.axis == patch.axis));
        }
    }

    #[test]
    fn cells_are_closed() {
        let m = Mesh::build_cartesian(3, 2, 2, [1.0, 2.0, 0.5], [0.1, -0.2, 0.3]).unwrap();
        let mut sum = vec![[0.0f64; 3]; m.n_cells()];
        for f in m.faces() {
            for a in 0..3 {
                let s = f.area * f.normal()[a];
                sum[f.owner][a] += s;
                sum[f.neighbour][a] -= s;
            }
        }
        for b in m.boundary_faces() {
            for a in 0..3 {
                sum[b.cell][a] += b.area * b.normal()[a];
            }
        }
        for s in sum {
            assert!(norm(s) < 1e-14, "{s:?}");
        }
        let vol: f64 = (0..m.n_cells()).map(|_| m.cell_volume()).sum();
        assert!((vol - m.total_volume()).abs() < 1e-14);
    }

    #[test]
    fn transmissibility_examples() {
        let m = unit_line(2);
        let k = Field::new(vec![SymTensor::isotropic(3.0); 2]);
        let t = face_transmissibility(&m, &k).unwrap();
        assert!((t.internal[0] - 3.0).abs() < 1e-15);

        let k = Field::new(vec![SymTensor::isotropic(1e-9), SymTensor::isotropic(4e-9)]);
        let t = face_transmissibility(&m, &k).unwrap();
        assert!((t.internal[0] - 1.6e-9).abs() < 1e-24);

        let k = Field::new(vec![
            SymTensor::isotropic(1.0),
            SymTensor::isotropic(1e-300),
        ]);
        let t = face_transmissibility(&m, &k).unwrap();
        assert!(t.internal[0] < 1e-299);
    }

    #[test]
    fn transmissibility_matches_series_flux() {
        // Flux through two slabs in series: q = dp / (h1/k1 + h2/k2).
        let m = unit_line(2);
        let (k1, k2) = (2.5, 0.25);
        let k = Field::new(vec![SymTensor::isotropic(k1), SymTensor::isotropic(k2)]);
        let t = face_transmissibility(&m, &k).unwrap();
        let series = 1.0 / (0.5 / k1 + 0.5 / k2);
        assert!((t.internal[0] - series).abs() < 1e-14);
    }

    #[test]
    fn transmissibility_rejects_zero_component() {
        let m = unit_line(2);
        let k = Field::new(vec![
            SymTensor::isotropic(1.0),
            SymTensor::diagonal([0.0, 1.0, 1.0]),
        ]);
        match face_transmissibility(&m, &k) {
            Err(Error::SingularMedium(msg)) => assert!(msg.contains("cell 1")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn transmissibility_is_swap_invariant() {
        let m = unit_line(2);
        let a = Field::new(vec![SymTensor::isotropic(0.3), SymTensor::isotropic(7.0)]);
        let b = Field::new(vec![SymTensor::isotropic(7.0), SymTensor::isotropic(0.3)]);
        let ta = face_transmissibility(&m, &a).unwrap();
        let tb = face_transmissibility(&m, &b).unwrap();
        assert_eq!(ta.internal[0], tb.internal[0]);
    }

    #[test]
    fn uniform_transmissibility_is_ka_over_d() {
        let m = Mesh::build_cartesian(4, 3, 2, [2.0, 1.5, 0.4], [0.0; 3]).unwrap();
        let k = Field::uniform(&m, SymTensor::isotropic(2.0));
        let t = face_transmissibility(&m, &k).unwrap();
        for (f, tf) in m.faces().iter().zip(&t.internal) {
            let expected = 2.0 * f.area / f.distance;
            assert!((tf - expected).abs() <= 1e-14 * expected);
        }
    }

    #[test]
    fn symmetric_tensor_reconstruction() {
        let t = SymTensor::from_components([1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let m = t.to_matrix();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(m[i][j], m[j][i]);
            }
        }
    }
}
