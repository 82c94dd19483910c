use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Maps one (single truncation) or two (bi-truncation) standard-normal
/// fields to facies values. The table for bi-truncation is row-major over
/// the bins of the first field: `values[i * (J + 1) + j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationRule {
    pub thresholds: Vec<f64>,
    #[serde(default)]
    pub thresholds2: Option<Vec<f64>>,
    pub values: Vec<f64>,
    /// Thresholds given as probabilities of the standard normal marginal.
    #[serde(default)]
    pub percentile: bool,
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("valid")
}

fn check_ascending(t: &[f64], name: &str, percentile: bool) -> Result<()> {
    for w in t.windows(2) {
        if !(w[0] < w[1]) {
            return Err(Error::config(format!(
                "{name} must be strictly ascending, got {t:?}"
            )));
        }
    }
    if let Some(v) = t.iter().find(|v| v.is_nan()) {
        return Err(Error::config(format!("{name} contains {v}")));
    }
    if percentile {
        if let Some(v) = t.iter().find(|&&v| !(v > 0.0 && v < 1.0)) {
            return Err(Error::config(format!(
                "percentile {name} must lie in (0, 1), got {v}"
            )));
        }
    }
    Ok(())
}

/// Bin index `i` with `t_{i-1} < z <= t_i`.
fn bin(t: &[f64], z: f64) -> usize {
    t.partition_point(|&ti| ti < z)
}

impl TruncationRule {
    pub fn single(thresholds: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let r = TruncationRule {
            thresholds,
            thresholds2: None,
            values,
            percentile: false,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn bivariate(
        thresholds: Vec<f64>,
        thresholds2: Vec<f64>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let r = TruncationRule {
            thresholds,
            thresholds2: Some(thresholds2),
            values,
            percentile: false,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn with_percentiles(mut self) -> Result<Self> {
        self.percentile = true;
        self.validate()?;
        Ok(self)
    }

    pub fn is_bivariate(&self) -> bool {
        self.thresholds2.is_some()
    }

    /// `(I + 1, J + 1)` with `J = 0` for single truncation.
    pub fn shape(&self) -> (usize, usize) {
        (
            self.thresholds.len() + 1,
            self.thresholds2.as_ref().map_or(1, |t| t.len() + 1),
        )
    }

    pub fn validate(&self) -> Result<()> {
        check_ascending(&self.thresholds, "thresholds", self.percentile)?;
        if let Some(t2) = &self.thresholds2 {
            check_ascending(t2, "thresholds2", self.percentile)?;
        }
        let (ni, nj) = self.shape();
        if self.values.len() != ni * nj {
            return Err(Error::config(format!(
                "truncation table needs {} values ({ni} x {nj}), got {}",
                ni * nj,
                self.values.len()
            )));
        }
        Ok(())
    }

    /// Thresholds on the GRF scale.
    pub fn raw_thresholds(&self) -> (Vec<f64>, Vec<f64>) {
        let conv = |t: &[f64]| -> Vec<f64> {
            if self.percentile {
                let n = std_normal();
                t.iter().map(|&p| n.inverse_cdf(p)).collect()
            } else {
                t.to_vec()
            }
        };
        (
            conv(&self.thresholds),
            self.thresholds2.as_deref().map(conv).unwrap_or_default(),
        )
    }

    /// Single truncation of a field.
    pub fn truncate(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.validate()?;
        if self.is_bivariate() {
            return Err(Error::config(
                "bivariate rule needs two fields (use bitruncate)",
            ));
        }
        let (t, _) = self.raw_thresholds();
        Ok(z.iter().map(|&v| self.values[bin(&t, v)]).collect())
    }

    /// Bi-truncation of two independent fields on the same mesh.
    pub fn bitruncate(&self, z1: &[f64], z2: &[f64]) -> Result<Vec<f64>> {
        self.validate()?;
        if !self.is_bivariate() {
            return Err(Error::config("bitruncate needs thresholds2"));
        }
        if z1.len() != z2.len() {
            return Err(Error::config(format!(
                "bitruncate fields differ in size: {} vs {}",
                z1.len(),
                z2.len()
            )));
        }
        let (t1, t2) = self.raw_thresholds();
        let nj = t2.len() + 1;
        Ok(z1
            .iter()
            .zip(z2)
            .map(|(&a, &b)| self.values[bin(&t1, a) * nj + bin(&t2, b)])
            .collect())
    }

    /// Table index `(i, j)` of a point.
    pub fn bin_of(&self, z1: f64, z2: f64) -> (usize, usize) {
        let (t1, t2) = self.raw_thresholds();
        (
            bin(&t1, z1),
            if self.is_bivariate() { bin(&t2, z2) } else { 0 },
        )
    }

    /// Analytic proportion of table cell `(i, j)` for standard-normal fields.
    pub fn facies_proportion(&self, i: usize, j: usize) -> Result<f64> {
        let (ni, nj) = self.shape();
        if i >= ni || j >= nj {
            return Err(Error::config(format!(
                "bin ({i}, {j}) outside {ni} x {nj} table"
            )));
        }
        let (t1, t2) = self.raw_thresholds();
        let n = std_normal();
        let g = |t: &[f64], k: usize| -> f64 {
            let hi = if k < t.len() { n.cdf(t[k]) } else { 1.0 };
            let lo = if k > 0 { n.cdf(t[k - 1]) } else { 0.0 };
            hi - lo
        };
        Ok(g(&t1, i) * if self.is_bivariate() { g(&t2, j) } else { 1.0 })
    }

    /// Analytic proportion of every distinct facies value, in table order of
    /// first appearance.
    pub fn value_proportions(&self) -> Result<Vec<(f64, f64)>> {
        let (ni, nj) = self.shape();
        let mut out: Vec<(f64, f64)> = Vec::new();
        for i in 0..ni {
            for j in 0..nj {
                let v = self.values[i * nj + j];
                let p = self.facies_proportion(i, j)?;
                match out.iter_mut().find(|(u, _)| *u == v) {
                    Some(e) => e.1 += p,
                    None => out.push((v, p)),
                }
            }
        }
        Ok(out)
    }
}
