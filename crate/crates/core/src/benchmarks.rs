//! Ready-made problem setups shared by the examples, the CLI templates and
//! the test suites.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::flow::{DualPorosityState, FlowState, PatchConditions, PressureBc, Source};
use crate::mesh::{Field, Mesh, SymTensor};

/// Quarter five-spot with a cross-shaped fracture system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "camelCase")]
pub struct FiveSpot {
    pub cells: usize,
    pub length: f64,
    pub matrix_permeability: f64,
    pub fracture_permeability: f64,
    /// Stand-in for the zero fracture permeability components, which would
    /// leave the fracture operator singular.
    pub permeability_floor: f64,
    /// Fracture width in cells.
    pub fracture_width: usize,
    pub tau0: f64,
    pub viscosity: f64,
    pub density: f64,
    /// Injection (and extraction) rate per unit volume of the well cell.
    pub rate: f64,
}

impl Default for FiveSpot {
    fn default() -> Self {
        FiveSpot {
            cells: 100,
            length: 100.0,
            matrix_permeability: 1e-11,
            fracture_permeability: 1e-8,
            permeability_floor: 1e-20,
            fracture_width: 2,
            tau0: 1e-5,
            viscosity: 1e-3,
            density: 1000.0,
            rate: 1e-3,
        }
    }
}

impl FiveSpot {
    pub fn mesh(&self) -> Result<Mesh> {
        Mesh::build_cartesian(
            self.cells,
            self.cells,
            1,
            [self.length, self.length, 1.0],
            [0.0; 3],
        )
    }

    fn in_band(&self, i: usize) -> bool {
        let lo = (self.cells - self.fracture_width) / 2;
        i >= lo && i < lo + self.fracture_width
    }

    /// Whether the cell belongs to the (vertical, horizontal) fracture.
    pub fn fracture_cell(&self, mesh: &Mesh, cell: usize) -> (bool, bool) {
        let [i, j, _] = mesh.ijk(cell);
        (self.in_band(i), self.in_band(j))
    }

    pub fn state(&self, mesh: &Mesh) -> DualPorosityState {
        let km = Field::uniform(mesh, SymTensor::isotropic(self.matrix_permeability));
        let floor = self.permeability_floor;
        let kf = Field::from_fn(mesh, |c, _| {
            let (vertical, horizontal) = self.fracture_cell(mesh, c);
            let kxx = if horizontal {
                self.fracture_permeability
            } else {
                floor
            };
            let kyy = if vertical {
                self.fracture_permeability
            } else {
                floor
            };
            SymTensor::diagonal([kxx, kyy, floor])
        });
        let mut matrix = FlowState::new(mesh, km, self.density, self.viscosity);
        let n = mesh.n_cells();
        matrix.sources = vec![
            Source {
                cells: vec![0],
                rate: self.rate,
                density: self.density,
                concentration: 1.0,
            },
            Source {
                cells: vec![n - 1],
                rate: -self.rate,
                density: self.density,
                concentration: 0.0,
            },
        ];
        let fracture = FlowState::new(mesh, kf, self.density, self.viscosity);
        let mut dual = DualPorosityState::new(mesh, matrix, fracture, self.tau0);
        for c in 0..n {
            let (v, h) = self.fracture_cell(mesh, c);
            let fractured = v || h;
            dual.matrix_porosity[c] = if fractured { 1e-5 } else { 0.3 };
            dual.fracture_porosity[c] = if fractured { 0.99 } else { 1e-5 };
        }
        dual
    }

    pub fn boundary_conditions(&self) -> PatchConditions<PressureBc> {
        PatchConditions::uniform(PressureBc::NoFlux)
    }
}
