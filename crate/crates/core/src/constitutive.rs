//! Fluid density/viscosity laws and the hydrodynamic dispersion tensor.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{norm, SymTensor, Vec3};

/// Velocity magnitude below which dispersion reduces to molecular diffusion.
pub const ZERO_VELOCITY: f64 = 1e-14;

/// A fluid property as a function of concentration (or temperature).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase", deny_unknown_fields)]
pub enum FluidPropertyModel {
    Constant {
        f0: f64,
    },
    /// `f0 + slope * c`
    Linear {
        f0: f64,
        slope: f64,
    },
    /// `f0 * exp(rate * c)`
    Exponential {
        f0: f64,
        rate: f64,
    },
    /// Piecewise-linear in `c`, clamped outside the table.
    Tabulated {
        table: Vec<(f64, f64)>,
    },
}

impl FluidPropertyModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            FluidPropertyModel::Tabulated { table } => {
                if table.len() < 2 {
                    return Err(Error::config(format!(
                        "tabulated property needs at least 2 points, got {}",
                        table.len()
                    )));
                }
                if table.windows(2).any(|w| !(w[1].0 > w[0].0)) {
                    return Err(Error::config(
                        "tabulated property: concentrations must be strictly ascending",
                    ));
                }
                Ok(())
            }
            FluidPropertyModel::Constant { f0 }
            | FluidPropertyModel::Linear { f0, .. }
            | FluidPropertyModel::Exponential { f0, .. } => {
                if f0.is_finite() {
                    Ok(())
                } else {
                    Err(Error::config(
                        "fluid property reference value must be finite",
                    ))
                }
            }
        }
    }

    pub fn evaluate(&self, c: f64) -> Result<f64> {
        self.validate()?;
        Ok(self.eval(c))
    }

    /// Evaluation without validation; callers validate once up front.
    pub(crate) fn eval(&self, c: f64) -> f64 {
        match *self {
            FluidPropertyModel::Constant { f0 } => f0,
            FluidPropertyModel::Linear { f0, slope } => f0 + slope * c,
            FluidPropertyModel::Exponential { f0, rate } => f0 * (rate * c).exp(),
            FluidPropertyModel::Tabulated { ref table } => interpolate(table, c).0,
        }
    }

    /// `df/dc`; zero outside a tabulated range.
    pub fn derivative(&self, c: f64) -> f64 {
        match *self {
            FluidPropertyModel::Constant { .. } => 0.0,
            FluidPropertyModel::Linear { slope, .. } => slope,
            FluidPropertyModel::Exponential { f0, rate } => f0 * rate * (rate * c).exp(),
            FluidPropertyModel::Tabulated { ref table } => {
                if c <= table[0].0 || c >= table[table.len() - 1].0 {
                    return 0.0;
                }
                let i = table
                    .partition_point(|&(x, _)| x <= c)
                    .clamp(1, table.len() - 1);
                let (x0, y0) = table[i - 1];
                let (x1, y1) = table[i];
                (y1 - y0) / (x1 - x0)
            }
        }
    }

    /// Evaluates every cell, warning once if a tabulated model is queried
    /// outside its range.
    pub fn evaluate_field(&self, c: &[f64]) -> Result<Vec<f64>> {
        self.validate()?;
        if let FluidPropertyModel::Tabulated { table } = self {
            let clamped = c.iter().filter(|&&v| interpolate(table, v).1).count();
            if clamped > 0 {
                warn!(
                    "tabulated property clamped in {clamped} cells (table range {}..{})",
                    table[0].0,
                    table[table.len() - 1].0
                );
            }
        }
        let out: Vec<f64> = c.iter().map(|&v| self.eval(v)).collect();
        if let Some(i) = out.iter().position(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::Domain(format!(
                "fluid property evaluates to {} at cell {i} (c = {})",
                out[i], c[i]
            )));
        }
        Ok(out)
    }
}

/// Returns the interpolated value and whether clamping occurred.
fn interpolate(table: &[(f64, f64)], c: f64) -> (f64, bool) {
    let first = table[0];
    let last = table[table.len() - 1];
    if c <= first.0 {
        return (first.1, c < first.0);
    }
    if c >= last.0 {
        return (last.1, c > last.0);
    }
    let i = table
        .partition_point(|&(x, _)| x <= c)
        .clamp(1, table.len() - 1);
    let (x0, y0) = table[i - 1];
    let (x1, y1) = table[i];
    (y0 + (y1 - y0) * (c - x0) / (x1 - x0), false)
}

/// Reads a two-column `c,f` table. A non-numeric first line is treated as a header.
pub fn read_table(path: &std::path::Path) -> Result<Vec<(f64, f64)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut table = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec?;
        if rec.len() < 2 {
            return Err(Error::config(format!(
                "{}: line {} needs two columns",
                path.display(),
                line + 1
            )));
        }
        match (rec[0].parse::<f64>(), rec[1].parse::<f64>()) {
            (Ok(c), Ok(f)) => table.push((c, f)),
            _ if line == 0 => continue,
            _ => {
                return Err(Error::config(format!(
                    "{}: line {} is not numeric",
                    path.display(),
                    line + 1
                )))
            }
        }
    }
    Ok(table)
}

/// Molecular diffusion and dispersivities.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DispersionParameters {
    #[serde(rename = "Dm", default)]
    pub molecular: f64,
    #[serde(rename = "alphaL", default)]
    pub alpha_l: f64,
    #[serde(rename = "alphaT", default)]
    pub alpha_t: f64,
}

impl DispersionParameters {
    pub fn new(molecular: f64, alpha_l: f64, alpha_t: f64) -> Self {
        DispersionParameters {
            molecular,
            alpha_l,
            alpha_t,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.molecular < 0.0 || self.alpha_l < 0.0 || self.alpha_t < 0.0 {
            return Err(Error::config(format!(
                "negative dispersion parameter in {self:?}"
            )));
        }
        if self.alpha_l < self.alpha_t {
            warn!(
                "transverse dispersivity {} exceeds longitudinal {}",
                self.alpha_t, self.alpha_l
            );
        }
        Ok(())
    }
}

/// `D = Dm I + aT |v| I + (aL - aT) v v^T / |v|`.
pub fn dispersion_tensor(v: Vec3, params: &DispersionParameters) -> SymTensor {
    let speed = norm(v);
    if speed < ZERO_VELOCITY {
        return SymTensor::isotropic(params.molecular);
    }
    let iso = params.molecular + params.alpha_t * speed;
    let k = (params.alpha_l - params.alpha_t) / speed;
    SymTensor {
        xx: iso + k * v[0] * v[0],
        xy: k * v[0] * v[1],
        xz: k * v[0] * v[2],
        yy: iso + k * v[1] * v[1],
        yz: k * v[1] * v[2],
        zz: iso + k * v[2] * v[2],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn seawater_density() {
        let m = FluidPropertyModel::Linear {
            f0: 1000.0,
            slope: 0.6832,
        };
        let rho = m.evaluate(36.5925).unwrap();
        assert!((rho - 1025.0).abs() < 0.01, "{rho}");
    }

    #[test]
    fn exponential_at_zero() {
        let m = FluidPropertyModel::Exponential {
            f0: 1.0,
            rate: -3.0,
        };
        assert_eq!(m.evaluate(0.0).unwrap(), 1.0);
        assert!((m.evaluate(1.0).unwrap() - (-3.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn tabulated_midpoint_and_clamp() {
        let m = FluidPropertyModel::Tabulated {
            table: vec![(0.0, 1.0), (1.0, 3.0)],
        };
        assert_eq!(m.evaluate(0.5).unwrap(), 2.0);
        assert_eq!(m.evaluate(-1.0).unwrap(), 1.0);
        assert_eq!(m.evaluate(5.0).unwrap(), 3.0);
        assert_eq!(m.derivative(0.5), 2.0);
    }

    #[test]
    fn tabulated_needs_two_points() {
        let m = FluidPropertyModel::Tabulated {
            table: vec![(0.0, 1.0)],
        };
        assert!(matches!(m.evaluate(0.0), Err(Error::Config(_))));
        let m = FluidPropertyModel::Tabulated {
            table: vec![(1.0, 1.0), (0.0, 2.0)],
        };
        assert!(m.validate().is_err());
    }

    #[test]
    fn table_file_with_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mu.csv");
        std::fs::write(&path, "c,mu\n0,1.0\n0.5,2.0\n1,4.0\n").unwrap();
        let t = read_table(&path).unwrap();
        assert_eq!(t, vec![(0.0, 1.0), (0.5, 2.0), (1.0, 4.0)]);
    }

    #[test]
    fn zero_velocity_is_molecular() {
        let p = DispersionParameters::new(2e-9, 0.1, 0.01);
        assert_eq!(dispersion_tensor([0.0; 3], &p), SymTensor::isotropic(2e-9));
    }

    #[test]
    fn equal_dispersivities_are_isotropic() {
        let p = DispersionParameters::new(1e-3, 0.2, 0.2);
        let v = [0.3, -0.4, 1.2];
        let d = dispersion_tensor(v, &p);
        let expected = 1e-3 + 0.2 * norm(v);
        assert!((d.xx - expected).abs() < 1e-15);
        assert!((d.yy - expected).abs() < 1e-15);
        assert!((d.zz - expected).abs() < 1e-15);
        assert!(d.xy.abs() < 1e-15 && d.xz.abs() < 1e-15 && d.yz.abs() < 1e-15);
    }

    #[test]
    fn axis_aligned_flow() {
        let p = DispersionParameters::new(0.0, 0.1, 0.01);
        let d = dispersion_tensor([1.0, 0.0, 0.0], &p);
        assert_eq!(d, SymTensor::diagonal([0.1, 0.01, 0.01]));
    }

    fn rotation(a: f64, b: f64, c: f64) -> [[f64; 3]; 3] {
        let (sa, ca) = a.sin_cos();
        let (sb, cb) = b.sin_cos();
        let (sc, cc) = c.sin_cos();
        let rz = [[ca, -sa, 0.0], [sa, ca, 0.0], [0.0, 0.0, 1.0]];
        let ry = [[cb, 0.0, sb], [0.0, 1.0, 0.0], [-sb, 0.0, cb]];
        let rx = [[1.0, 0.0, 0.0], [0.0, cc, -sc], [0.0, sc, cc]];
        mul(mul(rz, ry), rx)
    }

    fn mul(a: [[f64; 3]; 3], b: [[f64; 3]; 3]) -> [[f64; 3]; 3] {
        let mut m = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
            }
        }
        m
    }

    fn transpose(a: [[f64; 3]; 3]) -> [[f64; 3]; 3] {
        let mut m = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] = a[j][i];
            }
        }
        m
    }

    proptest! {
        #[test]
        fn rotation_equivariance(
            v in prop::array::uniform3(-5.0f64..5.0),
            angles in prop::array::uniform3(0.0f64..6.3),
            dm in 0.0f64..1.0, al in 0.0f64..1.0, at in 0.0f64..1.0,
        ) {
            let p = DispersionParameters::new(dm, al, at);
            let q = rotation(angles[0], angles[1], angles[2]);
            let qv = [
                q[0][0] * v[0] + q[0][1] * v[1] + q[0][2] * v[2],
                q[1][0] * v[0] + q[1][1] * v[1] + q[1][2] * v[2],
                q[2][0] * v[0] + q[2][1] * v[1] + q[2][2] * v[2],
            ];
            let lhs = dispersion_tensor(qv, &p).to_matrix();
            let rhs = mul(mul(q, dispersion_tensor(v, &p).to_matrix()), transpose(q));
            for i in 0..3 {
                for j in 0..3 {
                    prop_assert!((lhs[i][j] - rhs[i][j]).abs() < 1e-12 * (1.0 + rhs[i][j].abs()));
                }
            }
        }

        #[test]
        fn eigenpairs(v in prop::array::uniform3(-5.0f64..5.0), dm in 0.0f64..1.0, al in 0.0f64..1.0, at in 0.0f64..1.0) {
            let speed = norm(v);
            prop_assume!(speed > 1e-6);
            let p = DispersionParameters::new(dm, al, at);
            let d = dispersion_tensor(v, &p);
            // v is an eigenvector with eigenvalue Dm + aL |v|
            let dv = d.apply(v);
            for a in 0..3 {
                prop_assert!((dv[a] - (dm + al * speed) * v[a]).abs() < 1e-12 * (1.0 + speed * speed));
            }
            // trace = Dm*3 + aL|v| + 2 aT|v|
            let tr = d.xx + d.yy + d.zz;
            prop_assert!((tr - (3.0 * dm + al * speed + 2.0 * at * speed)).abs() < 1e-12 * (1.0 + tr));
        }

        #[test]
        fn monotone_laws(c1 in -2.0f64..2.0, dc in 0.0f64..2.0, slope in 0.0f64..5.0, rate in 0.0f64..3.0) {
            let lin = FluidPropertyModel::Linear { f0: 1.0, slope };
            let exp = FluidPropertyModel::Exponential { f0: 1.0, rate };
            prop_assert!(lin.eval(c1 + dc) >= lin.eval(c1));
            prop_assert!(exp.eval(c1 + dc) >= exp.eval(c1));
        }
    }
}
