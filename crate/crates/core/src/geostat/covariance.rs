use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, ln_gamma};

use super::special::ln_bessel_k;
use crate::error::{Error, Result};
use crate::mesh::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovarianceKind {
    Gaussian,
    Exponential,
    Matern,
    Spherical,
}

/// Stationary covariance with per-axis correlation lengths. Axes switched off
/// in `active` do not contribute to the dimension `d` of the spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceModel {
    pub kind: CovarianceKind,
    pub sigma2: f64,
    pub lambda: Vec3,
    /// Matérn smoothness.
    pub nu: f64,
    pub active: [bool; 3],
}

impl CovarianceModel {
    pub fn new(kind: CovarianceKind, sigma2: f64, lambda: Vec3) -> Result<Self> {
        let m = CovarianceModel {
            kind,
            sigma2,
            lambda,
            nu: 0.5,
            active: [true; 3],
        };
        m.validate()?;
        Ok(m)
    }

    pub fn isotropic(kind: CovarianceKind, sigma2: f64, lambda: f64, dim: usize) -> Result<Self> {
        Self::new(kind, sigma2, [lambda; 3])?.with_dim(dim)
    }

    pub fn matern(sigma2: f64, lambda: Vec3, nu: f64) -> Result<Self> {
        let mut m = Self::new(CovarianceKind::Matern, sigma2, lambda)?;
        m.nu = nu;
        m.validate()?;
        Ok(m)
    }

    /// Keeps the first `dim` axes active.
    pub fn with_dim(mut self, dim: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::config(format!(
                "covariance dimension must be 1, 2 or 3, got {dim}"
            )));
        }
        self.active = [true, dim >= 2, dim >= 3];
        Ok(self)
    }

    pub fn with_active(mut self, active: [bool; 3]) -> Result<Self> {
        if !active.iter().any(|&a| a) {
            return Err(Error::config("at least one axis must be active"));
        }
        self.active = active;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma2 >= 0.0) || !self.sigma2.is_finite() {
            return Err(Error::config(format!(
                "variance must be >= 0, got {}",
                self.sigma2
            )));
        }
        if let Some(l) = self.lambda.iter().find(|&&l| !(l > 0.0) || !l.is_finite()) {
            return Err(Error::config(format!(
                "correlation lengths must be > 0, got {l}"
            )));
        }
        if self.kind == CovarianceKind::Matern && !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(Error::config(format!(
                "Matérn smoothness must be > 0, got {}",
                self.nu
            )));
        }
        Ok(())
    }

    /// Correlation `C(r)/sigma^2` at dimensionless distance `s = r / lambda`.
    pub fn correlation(&self, s: f64) -> f64 {
        match self.kind {
            CovarianceKind::Gaussian => (-0.25 * PI * s * s).exp(),
            CovarianceKind::Exponential => (-s).exp(),
            CovarianceKind::Matern => {
                if s == 0.0 {
                    return 1.0;
                }
                let nu = self.nu;
                let x = (2.0 * nu).sqrt() * s;
                let ln = (1.0 - nu) * 2f64.ln() - ln_gamma(nu) + nu * x.ln() + ln_bessel_k(nu, x);
                ln.exp().min(1.0)
            }
            CovarianceKind::Spherical => {
                if s < 1.0 {
                    1.0 - 1.5 * s + 0.5 * s * s * s
                } else {
                    0.0
                }
            }
        }
    }

    /// Variogram at isotropic distance `r`, scaled by the first active
    /// correlation length.
    pub fn variogram(&self, r: f64) -> Result<f64> {
        if !(r >= 0.0) {
            return Err(Error::Domain(format!(
                "variogram distance must be >= 0, got {r}"
            )));
        }
        Ok(self.sigma2 * (1.0 - self.correlation(r / self.lambda[self.first_axis()])))
    }

    pub fn covariance(&self, r: f64) -> Result<f64> {
        Ok(self.sigma2 - self.variogram(r)?)
    }

    /// Variogram for a lag vector, each active component divided by its
    /// correlation length.
    pub fn variogram_lag(&self, h: Vec3) -> f64 {
        self.sigma2 * (1.0 - self.correlation(self.scaled_norm(h)))
    }

    fn scaled_norm(&self, h: Vec3) -> f64 {
        (0..3)
            .filter(|&i| self.active[i])
            .map(|i| (h[i] / self.lambda[i]).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    fn first_axis(&self) -> usize {
        self.active.iter().position(|&a| a).unwrap_or(0)
    }

    /// Spectral density per unit angular wave number, normalised so that its
    /// integral over the active dimensions equals `sigma^2`.
    pub fn spectrum(&self, k: Vec3) -> Result<f64> {
        let d = self.dim() as f64;
        let vol: f64 = (0..3)
            .filter(|&i| self.active[i])
            .map(|i| self.lambda[i])
            .product();
        let kl2 = self.scaled_norm_k(k);
        let s = match self.kind {
            CovarianceKind::Gaussian => (1.0 / PI).powf(d) * (-kl2 / PI).exp(),
            CovarianceKind::Exponential => {
                let e = 0.5 * (d + 1.0);
                gamma(e) / (PI * (1.0 + kl2)).powf(e)
            }
            CovarianceKind::Matern => {
                let nu = self.nu;
                let e = nu + 0.5 * d;
                let ln = ln_gamma(e) + nu * (2.0 * nu).ln() - ln_gamma(nu) - 0.5 * d * PI.ln() - e * (2.0 * nu + kl2).ln();
                ln.exp()
            }
            CovarianceKind::Spherical => {
                return Err(Error::Unsupported(
                    "no spectral density is implemented for the spherical model; use gaussian, exponential or matern"
                        .into(),
                ))
            }
        };
        Ok(self.sigma2 * vol * s)
    }

    fn scaled_norm_k(&self, k: Vec3) -> f64 {
        (0..3)
            .filter(|&i| self.active[i])
            .map(|i| (k[i] * self.lambda[i]).powi(2))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Radial Fourier integral of a correlation function in 1, 2 or 3
    /// dimensions, by the trapezoidal rule on a long interval.
    fn spectrum_by_quadrature(model: &CovarianceModel, k: f64) -> f64 {
        let d = model.dim();
        let lam = model.lambda[0];
        let (h, rmax) = (1e-3 * lam, 60.0 * lam);
        let n = (rmax / h) as usize;
        let mut sum = 0.0;
        for i in 0..=n {
            let r = i as f64 * h;
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            let c = model.correlation(r / lam);
            let kernel = match d {
                1 => 2.0 * (k * r).cos(),
                2 => 2.0 * PI * r * bessel_j0(k * r),
                _ => {
                    if k * r == 0.0 {
                        4.0 * PI * r * r
                    } else {
                        4.0 * PI * r * (k * r).sin() / k
                    }
                }
            };
            sum += w * c * kernel;
        }
        model.sigma2 * sum * h / (2.0 * PI).powi(d as i32)
    }

    fn bessel_j0(x: f64) -> f64 {
        // integral representation (1/pi) int_0^pi cos(x sin t) dt
        let n = 200;
        let h = PI / n as f64;
        (0..=n)
            .map(|i| {
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                w * (x * (i as f64 * h).sin()).cos()
            })
            .sum::<f64>()
            * h
            / PI
    }

    #[test]
    fn variogram_examples() {
        let g = CovarianceModel::isotropic(CovarianceKind::Gaussian, 3.0, 0.7, 2).unwrap();
        assert_eq!(g.variogram(0.0).unwrap(), 0.0);
        let e = CovarianceModel::isotropic(CovarianceKind::Exponential, 2.0, 1.0, 2).unwrap();
        assert!((e.variogram(1.0).unwrap() - 2.0 * (1.0 - (-1f64).exp())).abs() < 1e-15);
        assert!((e.variogram(1.0).unwrap() - 1.264_241_117_657_115_4).abs() < 1e-12);
        let s = CovarianceModel::isotropic(CovarianceKind::Spherical, 1.0, 1.0, 2).unwrap();
        assert_eq!(s.variogram(2.0).unwrap(), 1.0);
        assert_eq!(s.variogram(1.0).unwrap(), 1.0);
        assert!((s.variogram(0.5).unwrap() - (1.5 * 0.5 - 0.5 * 0.125)).abs() < 1e-15);
        assert!(matches!(s.variogram(-1.0), Err(Error::Domain(_))));
        assert!(matches!(s.spectrum([0.0; 3]), Err(Error::Unsupported(_))));
    }

    #[test]
    fn spectrum_examples() {
        let g = CovarianceModel::isotropic(CovarianceKind::Gaussian, 1.0, PI, 2).unwrap();
        assert!((g.spectrum([0.0; 3]).unwrap() - 1.0).abs() < 1e-15);
        let e = CovarianceModel::isotropic(CovarianceKind::Exponential, 1.0, 1.0, 1).unwrap();
        assert!((e.spectrum([0.0; 3]).unwrap() - 1.0 / PI).abs() < 1e-15);
    }

    #[test]
    fn matern_half_is_exponential() {
        for d in 1..=3 {
            let m = CovarianceModel::matern(1.7, [0.4, 0.9, 1.3], 0.5)
                .unwrap()
                .with_dim(d)
                .unwrap();
            let e = CovarianceModel::new(CovarianceKind::Exponential, 1.7, [0.4, 0.9, 1.3])
                .unwrap()
                .with_dim(d)
                .unwrap();
            for i in 0..200 {
                let k = [0.05 * i as f64, 0.03 * i as f64, -0.02 * i as f64];
                let (a, b) = (m.spectrum(k).unwrap(), e.spectrum(k).unwrap());
                assert!((a - b).abs() <= 1e-10 * b, "d {d}: {a} vs {b}");
            }
            for i in 0..100 {
                let s = 0.05 * i as f64;
                assert!((m.correlation(s) - e.correlation(s)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn spectra_are_fourier_transforms_of_correlations() {
        let cases = [
            CovarianceModel::isotropic(CovarianceKind::Gaussian, 1.3, 0.8, 1).unwrap(),
            CovarianceModel::isotropic(CovarianceKind::Gaussian, 1.3, 0.8, 2).unwrap(),
            CovarianceModel::isotropic(CovarianceKind::Gaussian, 1.3, 0.8, 3).unwrap(),
            CovarianceModel::isotropic(CovarianceKind::Exponential, 0.6, 1.1, 1).unwrap(),
            CovarianceModel::isotropic(CovarianceKind::Exponential, 0.6, 1.1, 3).unwrap(),
            CovarianceModel::matern(2.0, [0.5; 3], 1.0)
                .unwrap()
                .with_dim(2)
                .unwrap(),
            CovarianceModel::matern(2.0, [0.5; 3], 2.5)
                .unwrap()
                .with_dim(3)
                .unwrap(),
        ];
        for m in &cases {
            for &k in &[0.0, 0.4, 1.5, 3.0] {
                let exact = m.spectrum([k, 0.0, 0.0]).unwrap();
                let q = spectrum_by_quadrature(m, k);
                assert!(
                    (q - exact).abs() < 2e-3 * exact,
                    "{:?} d {} k {k}: {q} vs {exact}",
                    m.kind,
                    m.dim()
                );
            }
        }
    }

    #[test]
    fn matern_large_nu_approaches_gaussian() {
        // the Matérn limit is exp(-s^2/2); the Gaussian here is exp(-pi s^2/4)
        let lm = 1.0;
        let lg = lm * (PI / 2.0).sqrt();
        let m = CovarianceModel::matern(1.0, [lm; 3], 50.0).unwrap();
        let g = CovarianceModel::isotropic(CovarianceKind::Gaussian, 1.0, lg, 3).unwrap();
        for i in 1..=100 {
            let r = 2.0 * lm * i as f64 / 100.0;
            let (a, b) = (m.variogram(r).unwrap(), g.variogram(r).unwrap());
            assert!((a - b).abs() <= 0.05 * b, "r {r}: {a} vs {b}");
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(CovarianceModel::isotropic(CovarianceKind::Gaussian, -1.0, 1.0, 2).is_err());
        assert!(CovarianceModel::isotropic(CovarianceKind::Gaussian, 1.0, 0.0, 2).is_err());
        assert!(CovarianceModel::matern(1.0, [1.0; 3], 0.0).is_err());
        assert!(CovarianceModel::isotropic(CovarianceKind::Gaussian, 1.0, 1.0, 4).is_err());
    }

    proptest! {
        #[test]
        fn variogram_limits(kind in prop::sample::select(vec![
                CovarianceKind::Gaussian, CovarianceKind::Exponential, CovarianceKind::Matern, CovarianceKind::Spherical]),
            sigma2 in 0.1f64..10.0, lambda in 0.1f64..10.0, nu in 0.2f64..20.0) {
            let mut m = CovarianceModel::isotropic(kind, sigma2, lambda, 2).unwrap();
            m.nu = nu;
            prop_assert_eq!(m.variogram(0.0).unwrap(), 0.0);
            let far = m.variogram(1e3 * lambda).unwrap();
            prop_assert!((far - sigma2).abs() < 1e-9 * sigma2);
            // non-decreasing in r
            let mut prev = 0.0;
            for i in 1..50 {
                let g = m.variogram(0.1 * lambda * i as f64).unwrap();
                prop_assert!(g >= prev - 1e-12 * sigma2);
                prev = g;
            }
        }

        #[test]
        fn spectrum_positive_and_decreasing(kind in prop::sample::select(vec![
                CovarianceKind::Gaussian, CovarianceKind::Exponential, CovarianceKind::Matern]),
            lambda in 0.1f64..5.0, k in 0.0f64..10.0, nu in 0.2f64..20.0, d in 1usize..=3) {
            let mut m = CovarianceModel::isotropic(kind, 1.0, lambda, d).unwrap();
            m.nu = nu;
            let a = m.spectrum([k, 0.0, 0.0]).unwrap();
            let b = m.spectrum([k + 0.1, 0.0, 0.0]).unwrap();
            prop_assert!(a >= 0.0 && b <= a);
            prop_assert!(m.spectrum([0.0; 3]).unwrap() > 0.0);
        }
    }
}
