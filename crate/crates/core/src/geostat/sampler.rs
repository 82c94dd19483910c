//! Explicit spectral synthesis of Gaussian random fields
//!
//! ```text
//! Z(x) = sum_j w_j [cos(2 pi a_j.x) W_j + sin(2 pi a_j.x) W'_j]
//! ```
//!
//! over a deterministic half-space lattice of frequencies `a_j` (cycles per
//! unit length). The weights are `w_j^2 = S_a(a_j) da^d`, doubled for
//! non-zero frequencies (each stands for the pair `+-a_j`), with
//! `S_a(a) = (2 pi)^d S(2 pi a)` the spectral density per cycle. They are
//! rescaled once so that `sum w_j^2 = sigma^2` exactly.
//!
//! Random numbers: ChaCha20 seeded with `seed_from_u64(seed)` (stream 0 for
//! the first field, stream `n` for the `n`-th additional field). Each draw
//! `u = (next_u64 >> 11) * 2^-53`; per frequency, in lattice order, two
//! draws `u1 = 1 - u`, `u2 = u` give `W = r cos(2 pi u2)`,
//! `W' = r sin(2 pi u2)` with `r = sqrt(-2 ln u1)`.

use std::f64::consts::PI;

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};
use rayon::prelude::*;

use super::covariance::CovarianceModel;
use crate::error::{Error, Result};
use crate::mesh::{Mesh, Vec3};

/// Default extension of the spectral period for non-periodic fields.
pub const DEFAULT_EXTENSION: f64 = 2.0;

#[derive(Debug, Clone)]
pub struct SpectralSampler {
    /// Lattice indices per frequency, zero on inactive axes.
    pub indices: Vec<[i64; 3]>,
    /// Frequency spacing `1/L_ext` per axis.
    pub spacing: Vec3,
    pub weights: Vec<f64>,
    pub w: Vec<f64>,
    pub w_prime: Vec<f64>,
    pub periodic: bool,
    pub seed: u64,
    pub stream: u64,
}

/// Half-space lattice: the first active axis takes `m = 0..n-1`, the others
/// `m = -(n-1)..(n-1)`, keeping only vectors whose first non-zero index is
/// positive (plus the zero frequency).
fn lattice(nfreq: [usize; 3], active: [bool; 3]) -> Vec<[i64; 3]> {
    let axes: Vec<usize> = (0..3).filter(|&i| active[i]).collect();
    let range = |axis: usize, first: bool| -> Vec<i64> {
        let n = nfreq[axis] as i64;
        if first {
            (0..n).collect()
        } else {
            (-(n - 1)..n).collect()
        }
    };
    let mut out = Vec::new();
    let r: Vec<Vec<i64>> = (0..3)
        .map(|i| {
            if active[i] {
                range(i, Some(&i) == axes.first())
            } else {
                vec![0]
            }
        })
        .collect();
    for &mx in &r[0] {
        for &my in &r[1] {
            for &mz in &r[2] {
                let m = [mx, my, mz];
                let first_nonzero = axes.iter().map(|&a| m[a]).find(|&v| v != 0);
                if first_nonzero.is_none_or(|v| v > 0) {
                    out.push(m);
                }
            }
        }
    }
    out
}

fn uniform(rng: &mut ChaCha20Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Box-Muller pairs, one per frequency in lattice order.
fn normal_pairs(seed: u64, stream: u64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut w = Vec::with_capacity(n);
    let mut wp = Vec::with_capacity(n);
    for _ in 0..n {
        let u1 = 1.0 - uniform(&mut rng);
        let u2 = uniform(&mut rng);
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (2.0 * PI * u2).sin_cos();
        w.push(r * c);
        wp.push(r * s);
    }
    (w, wp)
}

impl SpectralSampler {
    /// Builds the frequency lattice for a domain of extents `lengths`.
    /// Inactive axes of the model get the single zero frequency.
    pub fn new(
        model: &CovarianceModel,
        lengths: Vec3,
        nfreq: [usize; 3],
        periodic: bool,
        extension: f64,
        seed: u64,
    ) -> Result<Self> {
        model.validate()?;
        if !(extension >= 1.0) {
            return Err(Error::config(format!(
                "spectral extension factor must be >= 1, got {extension}"
            )));
        }
        let mut nf = nfreq;
        for i in 0..3 {
            if !model.active[i] {
                nf[i] = 1;
            } else if nf[i] == 0 {
                return Err(Error::config(format!(
                    "nfreq must be >= 1 on active axis {i}"
                )));
            }
        }
        let mut spacing = [0.0; 3];
        for i in 0..3 {
            if !(lengths[i] > 0.0) {
                return Err(Error::config(format!(
                    "domain length must be > 0 on axis {i}"
                )));
            }
            let l_ext = if periodic {
                lengths[i]
            } else {
                extension * lengths[i]
            };
            spacing[i] = 1.0 / l_ext;
            if model.active[i] && nf[i] > 1 {
                let lam = model.lambda[i];
                if spacing[i] * lam > 0.5 || (nf[i] - 1) as f64 * spacing[i] * lam < 1.0 {
                    log::warn!(
                        "axis {i}: {} frequencies with spacing {:.3e} resolve correlation length {lam} poorly",
                        nf[i],
                        spacing[i]
                    );
                }
            }
        }
        let indices = lattice(nf, model.active);
        let d = model.dim() as i32;
        let da: f64 = (0..3)
            .filter(|&i| model.active[i])
            .map(|i| spacing[i])
            .product();
        let mut weights = Vec::with_capacity(indices.len());
        for m in &indices {
            let k = [
                2.0 * PI * m[0] as f64 * spacing[0],
                2.0 * PI * m[1] as f64 * spacing[1],
                2.0 * PI * m[2] as f64 * spacing[2],
            ];
            let s_a = (2.0 * PI).powi(d) * model.spectrum(k)?;
            let mult = if *m == [0, 0, 0] { 1.0 } else { 2.0 };
            weights.push(mult * s_a * da);
        }
        let total: f64 = weights.iter().sum();
        let norm = if total > 0.0 {
            model.sigma2 / total
        } else {
            0.0
        };
        let weights = weights.into_iter().map(|w2| (w2 * norm).sqrt()).collect();
        let (w, w_prime) = normal_pairs(seed, 0, indices.len());
        Ok(SpectralSampler {
            indices,
            spacing,
            weights,
            w,
            w_prime,
            periodic,
            seed,
            stream: 0,
        })
    }

    /// Same lattice and weights with an independent set of normal draws.
    pub fn with_stream(&self, stream: u64) -> Self {
        let (w, w_prime) = normal_pairs(self.seed, stream, self.indices.len());
        SpectralSampler {
            w,
            w_prime,
            stream,
            ..self.clone()
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn frequency(&self, j: usize) -> Vec3 {
        let m = self.indices[j];
        [
            m[0] as f64 * self.spacing[0],
            m[1] as f64 * self.spacing[1],
            m[2] as f64 * self.spacing[2],
        ]
    }

    /// Sum of squared weights (the field variance).
    pub fn variance(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum()
    }

    /// Direct evaluation at an arbitrary point.
    pub fn evaluate(&self, x: Vec3) -> f64 {
        (0..self.len())
            .map(|j| {
                let a = self.frequency(j);
                let theta = 2.0 * PI * (a[0] * x[0] + a[1] * x[1] + a[2] * x[2]);
                let (s, c) = theta.sin_cos();
                self.weights[j] * (c * self.w[j] + s * self.w_prime[j])
            })
            .sum()
    }

    /// Field at every cell centre, using the tensor-product structure of the
    /// lattice and of the grid: `exp(i theta)` factorises per axis.
    pub fn generate(&self, mesh: &Mesh) -> Vec<f64> {
        let dims = mesh.dims();
        // distinct lattice indices per axis
        let mut axis_idx: [Vec<i64>; 3] = Default::default();
        for a in 0..3 {
            let mut v: Vec<i64> = self.indices.iter().map(|m| m[a]).collect();
            v.sort_unstable();
            v.dedup();
            axis_idx[a] = v;
        }
        let pos = |a: usize, m: i64| axis_idx[a].binary_search(&m).expect("index present");
        // phase tables e[a][cell_index_on_axis][freq_pos] as (cos, sin)
        let tables: Vec<Vec<Vec<(f64, f64)>>> = (0..3)
            .map(|a| {
                (0..dims[a])
                    .map(|i| {
                        let mut ijk = [0; 3];
                        ijk[a] = i;
                        let x = mesh.cell_center(mesh.cell_index(ijk))[a];
                        axis_idx[a]
                            .iter()
                            .map(|&m| {
                                let (s, c) = (2.0 * PI * m as f64 * self.spacing[a] * x).sin_cos();
                                (c, s)
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let (nx, ny, nz) = (axis_idx[0].len(), axis_idx[1].len(), axis_idx[2].len());
        // coefficient c = w (W - i W') so that Re(c e^{i theta}) = w (cos W + sin W')
        let mut coef = vec![(0.0, 0.0); nx * ny * nz];
        for j in 0..self.len() {
            let m = self.indices[j];
            let idx = pos(0, m[0]) + nx * (pos(1, m[1]) + ny * pos(2, m[2]));
            coef[idx].0 += self.weights[j] * self.w[j];
            coef[idx].1 -= self.weights[j] * self.w_prime[j];
        }
        let mul = |a: (f64, f64), b: (f64, f64)| (a.0 * b.0 - a.1 * b.1, a.0 * b.1 + a.1 * b.0);
        // contract z: g2[k][fx + nx fy]
        let g2: Vec<Vec<(f64, f64)>> = (0..dims[2])
            .into_par_iter()
            .map(|k| {
                let ez = &tables[2][k];
                let mut out = vec![(0.0, 0.0); nx * ny];
                for (fz, &e) in ez.iter().enumerate() {
                    let block = &coef[nx * ny * fz..nx * ny * (fz + 1)];
                    for (o, &c) in out.iter_mut().zip(block) {
                        let p = mul(c, e);
                        o.0 += p.0;
                        o.1 += p.1;
                    }
                }
                out
            })
            .collect();
        // contract y then x for every (j, k) row
        let rows: Vec<Vec<f64>> = (0..dims[1] * dims[2])
            .into_par_iter()
            .map(|row| {
                let (j, k) = (row % dims[1], row / dims[1]);
                let ey = &tables[1][j];
                let mut g1 = vec![(0.0, 0.0); nx];
                for (fy, &e) in ey.iter().enumerate() {
                    for fx in 0..nx {
                        let p = mul(g2[k][fx + nx * fy], e);
                        g1[fx].0 += p.0;
                        g1[fx].1 += p.1;
                    }
                }
                (0..dims[0])
                    .map(|i| {
                        tables[0][i]
                            .iter()
                            .zip(&g1)
                            .map(|(&e, &g)| mul(g, e).0)
                            .sum()
                    })
                    .collect()
            })
            .collect();
        rows.into_iter().flatten().collect()
    }
}
