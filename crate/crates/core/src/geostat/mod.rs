//! Gaussian random fields by explicit spectral synthesis, truncated and
//! pluri-Gaussian facies fields, and statistical checks.

pub mod covariance;
pub mod sampler;
pub mod special;
pub mod truncation;
pub mod variogram;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::Mesh;

pub use covariance::{CovarianceKind, CovarianceModel};
pub use sampler::{SpectralSampler, DEFAULT_EXTENSION};
pub use truncation::TruncationRule;
pub use variogram::{empirical_variogram, LagBin};

/// `mean + sigma * z`, or its exponential for log-normal fields. `z` is
/// expected to have unit variance.
pub fn scale_field(z: &[f64], mean: f64, sigma: f64, lognormal: bool) -> Vec<f64> {
    z.iter()
        .map(|&v| {
            let y = mean + sigma * v;
            if lognormal {
                y.exp()
            } else {
                y
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldType {
    #[default]
    Continuous,
    Truncated,
    Bitruncated,
}

fn default_one() -> f64 {
    1.0
}

fn default_extension() -> f64 {
    DEFAULT_EXTENSION
}

fn default_nfreq() -> Vec<usize> {
    vec![32]
}

/// Random field generator options. `Ksigma` is the standard deviation of the
/// Gaussian field (of its logarithm when `lognormal`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomFieldSpec {
    #[serde(rename = "type", default)]
    pub field_type: FieldType,
    #[serde(default = "default_correlation")]
    pub correlation: CovarianceKind,
    #[serde(rename = "Kmean", default)]
    pub kmean: f64,
    #[serde(rename = "Ksigma", default = "default_one")]
    pub ksigma: f64,
    /// Correlation length per axis; a single value applies to all axes.
    #[serde(rename = "Lcorr")]
    pub lcorr: Vec<f64>,
    #[serde(default)]
    pub nu: Option<f64>,
    /// Frequencies per axis; a single value applies to all axes.
    #[serde(default = "default_nfreq")]
    pub nfreq: Vec<usize>,
    #[serde(rename = "disableY", default)]
    pub disable_y: bool,
    #[serde(rename = "disableZ", default)]
    pub disable_z: bool,
    #[serde(default)]
    pub periodic: bool,
    #[serde(default)]
    pub values: Vec<f64>,
    #[serde(default)]
    pub thresholds: Vec<f64>,
    #[serde(default)]
    pub thresholds2: Option<Vec<f64>>,
    /// Thresholds given as standard-normal probabilities.
    #[serde(default)]
    pub percentile: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub lognormal: bool,
    /// Spectral period extension for non-periodic fields.
    #[serde(default = "default_extension")]
    pub extension: f64,
}

fn default_correlation() -> CovarianceKind {
    CovarianceKind::Gaussian
}

fn per_axis<T: Copy>(v: &[T], name: &str) -> Result<[T; 3]> {
    match v.len() {
        1 => Ok([v[0]; 3]),
        2 => Ok([v[0], v[1], v[1]]),
        3 => Ok([v[0], v[1], v[2]]),
        n => Err(Error::config(format!(
            "{name} needs 1 to 3 values, got {n}"
        ))),
    }
}

impl RandomFieldSpec {
    pub fn continuous(correlation: CovarianceKind, lcorr: f64, nfreq: usize, seed: u64) -> Self {
        RandomFieldSpec {
            field_type: FieldType::Continuous,
            correlation,
            kmean: 0.0,
            ksigma: 1.0,
            lcorr: vec![lcorr],
            nu: None,
            nfreq: vec![nfreq],
            disable_y: false,
            disable_z: true,
            periodic: false,
            values: Vec::new(),
            thresholds: Vec::new(),
            thresholds2: None,
            percentile: false,
            seed,
            lognormal: false,
            extension: DEFAULT_EXTENSION,
        }
    }

    /// Unit-variance covariance model of the underlying Gaussian field(s).
    pub fn model(&self) -> Result<CovarianceModel> {
        let lambda = per_axis(&self.lcorr, "Lcorr")?;
        let mut m = CovarianceModel::new(self.correlation, 1.0, lambda)?;
        if self.correlation == CovarianceKind::Matern {
            m.nu = self
                .nu
                .ok_or_else(|| Error::config("matern correlation needs `nu`"))?;
        } else if self.nu.is_some() {
            log::warn!("`nu` is ignored for {:?} correlation", self.correlation);
        }
        m.validate()?;
        m.with_active([true, !self.disable_y, !self.disable_z])
    }

    pub fn rule(&self) -> Result<Option<TruncationRule>> {
        let rule = match self.field_type {
            FieldType::Continuous => return Ok(None),
            FieldType::Truncated => {
                if self.thresholds2.is_some() {
                    log::warn!("`thresholds2` is ignored for truncated fields");
                }
                TruncationRule {
                    thresholds: self.thresholds.clone(),
                    thresholds2: None,
                    values: self.values.clone(),
                    percentile: self.percentile,
                }
            }
            FieldType::Bitruncated => TruncationRule {
                thresholds: self.thresholds.clone(),
                thresholds2: Some(
                    self.thresholds2
                        .clone()
                        .ok_or_else(|| Error::config("bitruncated field needs `thresholds2`"))?,
                ),
                values: self.values.clone(),
                percentile: self.percentile,
            },
        };
        rule.validate()?;
        Ok(Some(rule))
    }

    pub fn validate(&self) -> Result<()> {
        self.model()?;
        self.rule()?;
        per_axis(&self.nfreq, "nfreq")?;
        if !(self.ksigma >= 0.0) {
            return Err(Error::config(format!(
                "Ksigma must be >= 0, got {}",
                self.ksigma
            )));
        }
        Ok(())
    }

    pub fn sampler(&self, mesh: &Mesh) -> Result<SpectralSampler> {
        let model = self.model()?;
        let nfreq = per_axis(&self.nfreq, "nfreq")?;
        SpectralSampler::new(
            &model,
            mesh.lengths(),
            nfreq,
            self.periodic,
            self.extension,
            self.seed,
        )
    }
}

/// Generated property and the underlying unit-variance Gaussian fields.
#[derive(Debug, Clone)]
pub struct GeneratedField {
    pub values: Vec<f64>,
    pub gaussian: Vec<Vec<f64>>,
}

pub fn generate(mesh: &Mesh, spec: &RandomFieldSpec) -> Result<GeneratedField> {
    spec.validate()?;
    let sampler = spec.sampler(mesh)?;
    // evaluate at cell centres in absolute coordinates relative to the origin
    let z1 = sampler.generate(mesh);
    let values = match spec.rule()? {
        None => scale_field(&z1, spec.kmean, spec.ksigma, spec.lognormal),
        Some(rule) if rule.is_bivariate() => {
            let z2 = sampler.with_stream(1).generate(mesh);
            let v = rule.bitruncate(&z1, &z2)?;
            return Ok(GeneratedField {
                values: v,
                gaussian: vec![z1, z2],
            });
        }
        Some(rule) => rule.truncate(&z1)?,
    };
    Ok(GeneratedField {
        values,
        gaussian: vec![z1],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scale_examples() {
        let z = [-1.0, 0.0, 0.5, 2.0];
        assert_eq!(scale_field(&z, 3.0, 0.0, false), vec![3.0; 4]);
        assert!(scale_field(&z, 1.0, 0.0, true)
            .iter()
            .all(|&v| v == 1f64.exp()));
        let one = scale_field(&z, 0.0, 1.0, false);
        let two = scale_field(&z, 0.0, 2.0, false);
        for (a, b) in one.iter().zip(&two) {
            assert_eq!(2.0 * a, *b);
        }
    }

    #[test]
    fn spec_parsing_and_validation() {
        let spec: RandomFieldSpec = toml::from_str(
            r#"
            type = "bitruncated"
            correlation = "matern"
            nu = 1.5
            Lcorr = [0.2, 0.1]
            nfreq = [16, 8]
            disableZ = true
            thresholds = [-0.5, 0.0, 0.5]
            thresholds2 = [0.0, 1.0]
            values = [1, 1, 2, 1, 3, 2, 4, 3, 2, 4, 4, 4]
            seed = 3
            "#,
        )
        .unwrap();
        spec.validate().unwrap();
        let m = spec.model().unwrap();
        assert_eq!(m.dim(), 2);
        assert_eq!(m.lambda, [0.2, 0.1, 0.1]);
        let mut bad = spec.clone();
        bad.values.pop();
        assert!(bad.validate().is_err());
        let mut bad = spec.clone();
        bad.nu = None;
        assert!(bad.validate().is_err());
        assert!(toml::from_str::<RandomFieldSpec>("Lcorr = [1.0]\nnfrq = [2]").is_err());
    }

    #[test]
    fn generated_fields() {
        let mesh = Mesh::build_cartesian(16, 8, 1, [2.0, 1.0, 1.0], [0.0; 3]).unwrap();
        let mut spec = RandomFieldSpec::continuous(CovarianceKind::Exponential, 0.2, 8, 4);
        spec.kmean = -20.0;
        spec.ksigma = 0.0;
        spec.lognormal = true;
        let g = generate(&mesh, &spec).unwrap();
        assert!(g.values.iter().all(|&v| (v - (-20f64).exp()).abs() < 1e-30));
        spec.field_type = FieldType::Truncated;
        spec.thresholds = vec![0.0];
        spec.values = vec![1.0, 2.0];
        let g = generate(&mesh, &spec).unwrap();
        for (v, z) in g.values.iter().zip(&g.gaussian[0]) {
            assert_eq!(*v, if *z <= 0.0 { 1.0 } else { 2.0 });
        }
    }
}
