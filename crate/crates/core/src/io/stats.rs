//! Field statistics, histograms and contour measures.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::Mesh;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FieldMetrics {
    pub mean: f64,
    pub variance: f64,
    pub min: f64,
    pub max: f64,
    /// `sum v V`.
    pub integral: f64,
}

/// Volume-weighted mean, variance, extrema and integral.
pub fn field_metrics(mesh: &Mesh, values: &[f64]) -> Result<FieldMetrics> {
    if values.len() != mesh.n_cells() {
        return Err(Error::config(format!(
            "field has {} values for {} cells",
            values.len(),
            mesh.n_cells()
        )));
    }
    let vol = mesh.cell_volume();
    let total = mesh.total_volume();
    let integral: f64 = values.iter().map(|v| v * vol).sum();
    let mean = integral / total;
    let variance = values.iter().map(|v| (v - mean).powi(2) * vol).sum::<f64>() / total;
    let (min, max) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    Ok(FieldMetrics {
        mean,
        variance,
        min,
        max,
        integral,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BinSpacing {
    #[default]
    Linear,
    Log,
}

/// Volume-weighted probability density on `edges.len() - 1` bins.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub density: Vec<f64>,
}

impl Histogram {
    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// Probability mass per bin.
    pub fn mass(&self) -> Vec<f64> {
        self.edges
            .windows(2)
            .zip(&self.density)
            .map(|(w, d)| d * (w[1] - w[0]))
            .collect()
    }
}

/// Histogram of a cell field. Log spacing places edges uniformly in
/// `ln v`; densities are per unit of `v` in both cases. A constant field
/// gets a range of unit half-width (scaled by `|v|`) around its value.
pub fn spatial_pdf(
    mesh: &Mesh,
    values: &[f64],
    bins: usize,
    spacing: BinSpacing,
) -> Result<Histogram> {
    if bins == 0 {
        return Err(Error::config("histogram needs at least one bin"));
    }
    if values.len() != mesh.n_cells() {
        return Err(Error::config(format!(
            "field has {} values for {} cells",
            values.len(),
            mesh.n_cells()
        )));
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            field: "histogram input".into(),
            cell: i,
        });
    }
    let map: fn(f64) -> f64 = match spacing {
        BinSpacing::Linear => |v| v,
        BinSpacing::Log => {
            let bad = values.iter().filter(|&&v| v <= 0.0).count();
            if bad > 0 {
                return Err(Error::Domain(format!(
                    "log-spaced histogram: {bad} non-positive values"
                )));
            }
            f64::ln
        }
    };
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(map(v)), hi.max(map(v)))
        });
    let (lo, hi) = if hi > lo {
        (lo, hi)
    } else {
        let half = 0.5 * lo.abs().max(1.0);
        (lo - half, hi + half)
    };
    let width = (hi - lo) / bins as f64;
    let mapped: Vec<f64> = (0..=bins)
        .map(|i| if i == bins { hi } else { lo + i as f64 * width })
        .collect();
    let edges: Vec<f64> = match spacing {
        BinSpacing::Linear => mapped.clone(),
        BinSpacing::Log => mapped.iter().map(|v| v.exp()).collect(),
    };
    let mut mass = vec![0.0; bins];
    let vol = mesh.cell_volume();
    for &v in values {
        let b = (((map(v) - lo) / width) as usize).min(bins - 1);
        mass[b] += vol;
    }
    let total = mesh.total_volume();
    let density = mass
        .iter()
        .zip(edges.windows(2))
        .map(|(m, w)| m / total / (w[1] - w[0]))
        .collect();
    Ok(Histogram { edges, density })
}

/// Length of the `level` contour of a cell field, by marching squares on the
/// lattice of cell centres in each x-y layer (summed over layers).
pub fn isoline_length(mesh: &Mesh, values: &[f64], level: f64) -> Result<f64> {
    if values.len() != mesh.n_cells() {
        return Err(Error::config("isoline field does not match the mesh"));
    }
    let [nx, ny, nz] = mesh.dims();
    let [hx, hy, _] = mesh.spacing();
    let mut length = 0.0;
    for k in 0..nz {
        for j in 0..ny.saturating_sub(1) {
            for i in 0..nx.saturating_sub(1) {
                let v = |di: usize, dj: usize| values[mesh.cell_index([i + di, j + dj, k])] - level;
                // corners counter-clockwise from the lower left
                let c = [v(0, 0), v(1, 0), v(1, 1), v(0, 1)];
                let pos = [(0.0, 0.0), (hx, 0.0), (hx, hy), (0.0, hy)];
                let mut points = Vec::with_capacity(4);
                for e in 0..4 {
                    let (a, b) = (c[e], c[(e + 1) % 4]);
                    if (a > 0.0) != (b > 0.0) {
                        let t = a / (a - b);
                        let (pa, pb) = (pos[e], pos[(e + 1) % 4]);
                        points.push((pa.0 + t * (pb.0 - pa.0), pa.1 + t * (pb.1 - pa.1)));
                    }
                }
                let seg = |p: (f64, f64), q: (f64, f64)| {
                    ((p.0 - q.0).powi(2) + (p.1 - q.1).powi(2)).sqrt()
                };
                length += match points.len() {
                    2 => seg(points[0], points[1]),
                    4 => {
                        // saddle: pair crossings according to the centre value
                        let centre = 0.25 * c.iter().sum::<f64>();
                        if (centre > 0.0) == (c[0] > 0.0) {
                            seg(points[0], points[3]) + seg(points[1], points[2])
                        } else {
                            seg(points[0], points[1]) + seg(points[2], points[3])
                        }
                    }
                    _ => 0.0,
                };
            }
        }
    }
    Ok(length)
}
