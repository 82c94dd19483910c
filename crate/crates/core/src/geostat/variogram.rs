use crate::error::{Error, Result};
use crate::mesh::Mesh;

/// One lag bin of an empirical variogram. `gamma` is `None` when no pair
/// fell into the bin.
#[derive(Debug, Clone, PartialEq)]
pub struct LagBin {
    pub lower: f64,
    pub upper: f64,
    /// Mean pair distance in the bin (bin centre when empty).
    pub distance: f64,
    pub gamma: Option<f64>,
    pub pairs: usize,
}

/// Isotropic semivariance `1/2 mean (z(x) - z(x + h))^2` over every cell pair
/// with `|h| <= max_lag`, binned into `n_lags` equal bins.
pub fn empirical_variogram(
    mesh: &Mesh,
    z: &[f64],
    n_lags: usize,
    max_lag: f64,
) -> Result<Vec<LagBin>> {
    if z.len() != mesh.n_cells() {
        return Err(Error::config(format!(
            "field has {} values for {} cells",
            z.len(),
            mesh.n_cells()
        )));
    }
    if n_lags == 0 || !(max_lag > 0.0) {
        return Err(Error::config("variogram needs n_lags >= 1 and max_lag > 0"));
    }
    let dims = mesh.dims();
    let h = mesh.spacing();
    let min_extent = (0..3)
        .filter(|&a| dims[a] > 1)
        .map(|a| mesh.lengths()[a])
        .fold(f64::INFINITY, f64::min);
    if max_lag > 0.5 * min_extent {
        log::warn!("max lag {max_lag} exceeds half the smallest domain extent {min_extent}");
    }
    let reach: [i64; 3] = std::array::from_fn(|a| {
        if dims[a] > 1 {
            ((max_lag / h[a]).floor() as i64).min(dims[a] as i64 - 1)
        } else {
            0
        }
    });
    let width = max_lag / n_lags as f64;
    let mut sum = vec![0.0; n_lags];
    let mut dist = vec![0.0; n_lags];
    let mut count = vec![0usize; n_lags];
    // half-space of offsets: first non-zero component positive
    for dz in -reach[2]..=reach[2] {
        for dy in -reach[1]..=reach[1] {
            for dx in -reach[0]..=reach[0] {
                let first = [dx, dy, dz].into_iter().find(|&v| v != 0);
                if first.is_none_or(|v| v < 0) {
                    continue;
                }
                let r = ((dx as f64 * h[0]).powi(2)
                    + (dy as f64 * h[1]).powi(2)
                    + (dz as f64 * h[2]).powi(2))
                .sqrt();
                if r > max_lag {
                    continue;
                }
                let b = ((r / width) as usize).min(n_lags - 1);
                let (mut s, mut c) = (0.0, 0usize);
                let range =
                    |n: usize, d: i64| (d.max(0) as usize)..((n as i64 + d.min(0)) as usize);
                for k in range(dims[2], -dz) {
                    for j in range(dims[1], -dy) {
                        for i in range(dims[0], -dx) {
                            let a = mesh.cell_index([i, j, k]);
                            let o = mesh.cell_index([
                                (i as i64 + dx) as usize,
                                (j as i64 + dy) as usize,
                                (k as i64 + dz) as usize,
                            ]);
                            s += (z[a] - z[o]).powi(2);
                            c += 1;
                        }
                    }
                }
                sum[b] += s;
                dist[b] += r * c as f64;
                count[b] += c;
            }
        }
    }
    Ok((0..n_lags)
        .map(|b| {
            let lower = b as f64 * width;
            let upper = lower + width;
            LagBin {
                lower,
                upper,
                distance: if count[b] > 0 {
                    dist[b] / count[b] as f64
                } else {
                    0.5 * (lower + upper)
                },
                gamma: (count[b] > 0).then(|| 0.5 * sum[b] / count[b] as f64),
                pairs: count[b],
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::ChaCha8Rng;
    use rand_core::{RngCore, SeedableRng};

    #[test]
    fn constant_field_has_zero_variogram() {
        let mesh = Mesh::build_cartesian(10, 10, 1, [1.0; 3], [0.0; 3]).unwrap();
        let v = empirical_variogram(&mesh, &vec![3.0; 100], 5, 0.5).unwrap();
        assert!(v.iter().filter(|b| b.pairs > 0).count() >= 4);
        for b in v.iter().filter(|b| b.pairs > 0) {
            assert_eq!(b.gamma, Some(0.0));
        }
    }

    #[test]
    fn white_noise_variogram_is_variance() {
        let mesh = Mesh::build_cartesian(60, 60, 1, [1.0; 3], [0.0; 3]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        // uniform on (-1, 1): variance 1/3
        let z: Vec<f64> = (0..3600)
            .map(|_| 2.0 * (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 - 1.0)
            .collect();
        let v = empirical_variogram(&mesh, &z, 6, 0.3).unwrap();
        for b in v.iter().filter(|b| b.pairs > 0) {
            assert!((b.gamma.unwrap() - 1.0 / 3.0).abs() < 0.03, "{b:?}");
        }
    }

    #[test]
    fn empty_bins_are_reported() {
        // with unit spacing, no pair has distance below 1
        let mesh = Mesh::build_cartesian(6, 1, 1, [6.0, 1.0, 1.0], [0.0; 3]).unwrap();
        let z: Vec<f64> = (0..6).map(|i| i as f64).collect();
        let v = empirical_variogram(&mesh, &z, 6, 3.0).unwrap();
        assert_eq!(v[0].gamma, None);
        assert_eq!(v[0].pairs, 0);
        // linear field: gamma(h) = h^2 / 2
        let b = v.iter().find(|b| b.lower <= 2.0 && 2.0 < b.upper).unwrap();
        assert_eq!(b.gamma, Some(2.0));
        assert_eq!(b.pairs, 4);
    }
}
