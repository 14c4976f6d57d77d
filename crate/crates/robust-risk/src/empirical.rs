//! Finite empirical distributions with equal atom weights, their quantile
//! machinery, moments, and the one-dimensional p-Wasserstein distance.
//!
//! Every distribution here is a sorted vector of n outcomes, each carrying
//! probability 1/n. On that space the left quantile is an array lookup and
//! the p-Wasserstein distance between equal-size samples reduces to a
//! sorted-difference norm:
//!
//! ```text
//! W_p(X, Z)^p = (1/n) sum_i |x_(i) - z_(i)|^p
//! ```
//!
//! No transport plan is ever solved.

use serde::Serialize;

use crate::error::{Result, RiskError};

/// A conjugate exponent pair (p, q) with 1/p + 1/q = 1.
///
/// `p = 1` pairs with `q = inf` and `p = inf` with `q = 1`; both infinities
/// are stored as `f64::INFINITY`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PNorm {
    p: f64,
    q: f64,
}

impl PNorm {
    /// Builds the pair from the primal exponent `p in [1, inf]`.
    pub fn new(p: f64) -> Result<Self> {
        if p.is_nan() || p < 1.0 {
            return Err(RiskError::OutOfRange {
                name: "p",
                requirement: "in [1, inf]",
                value: p,
            });
        }
        let q = if p == 1.0 {
            f64::INFINITY
        } else if p.is_infinite() {
            1.0
        } else {
            p / (p - 1.0)
        };
        Ok(Self { p, q })
    }

    pub fn one() -> Self {
        Self::new(1.0).expect("1 is a valid exponent")
    }

    pub fn two() -> Self {
        Self::new(2.0).expect("2 is a valid exponent")
    }

    pub fn infinity() -> Self {
        Self::new(f64::INFINITY).expect("inf is a valid exponent")
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// The conjugate exponent, the one dual densities are measured in.
    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn is_one(&self) -> bool {
        self.p == 1.0
    }

    pub fn is_infinite(&self) -> bool {
        self.p.is_infinite()
    }
}

/// A sorted finite sample with equal atom weights 1/n.
///
/// Values are monetary returns: positive is a gain, negative a loss.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalDistribution {
    values: Vec<f64>,
}

impl EmpiricalDistribution {
    /// Builds a distribution from raw samples; the copy is sorted ascending.
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(RiskError::EmptySample);
        }
        if let Some(index) = samples.iter().position(|v| !v.is_finite()) {
            return Err(RiskError::NonFiniteValue { index });
        }
        let mut values = samples.to_vec();
        values.sort_by(|a, b| a.partial_cmp(b).expect("values are finite"));
        Ok(Self { values })
    }

    /// Number of atoms.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction rejects empty samples
    }

    /// Sorted values, ascending.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// Left quantile: the smallest x with F(x) >= u, for u in (0, 1).
    ///
    /// On n equal atoms this is `values[ceil(u * n) - 1]`.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(RiskError::OutOfRange {
                name: "u",
                requirement: "in (0, 1)",
                value: u,
            });
        }
        let n = self.values.len();
        let k = (u * n as f64).ceil() as usize;
        let k = k.clamp(1, n);
        Ok(self.values[k - 1])
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Population variance, (1/n) sum (x_i - mean)^2.
    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        self.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / self.values.len() as f64
    }

    pub fn std_dev(&self) -> f64 {
        self.variance().sqrt()
    }

    pub fn is_constant(&self) -> bool {
        self.values.iter().all(|&v| v == self.values[0])
    }

    /// Distribution shifted by a scalar: every atom moved by `c`.
    pub fn shifted(&self, c: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v + c).collect(),
        }
    }

    /// Distribution scaled by a non-negative factor.
    pub fn scaled(&self, lambda: f64) -> Self {
        let mut values: Vec<f64> = self.values.iter().map(|v| v * lambda).collect();
        if lambda < 0.0 {
            values.reverse();
        }
        Self { values }
    }
}

/// p-Wasserstein distance between two equal-size empirical distributions.
///
/// With sorted values and equal weights the quantile-coupling integral is a
/// plain sorted-difference norm; `p = inf` takes the largest coordinate gap.
pub fn wasserstein_distance(
    a: &EmpiricalDistribution,
    b: &EmpiricalDistribution,
    norm: PNorm,
) -> Result<f64> {
    if a.len() != b.len() {
        return Err(RiskError::UnequalSupportSize {
            left: a.len(),
            right: b.len(),
        });
    }
    let diffs = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(x, z)| (x - z).abs());
    if norm.is_infinite() {
        return Ok(diffs.fold(0.0_f64, f64::max));
    }
    let p = norm.p();
    let n = a.len() as f64;
    if p == 1.0 {
        Ok(diffs.sum::<f64>() / n)
    } else {
        let sum: f64 = diffs.map(|d| d.powf(p)).sum();
        Ok((sum / n).powf(1.0 / p))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(values: &[f64]) -> EmpiricalDistribution {
        EmpiricalDistribution::from_samples(values).unwrap()
    }

    #[test]
    fn construction_sorts() {
        let d = dist(&[3.0, 1.0, 2.0]);
        assert_eq!(d.values(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn construction_singleton() {
        let d = dist(&[5.0]);
        assert_eq!(d.values(), &[5.0]);
    }

    #[test]
    fn construction_rejects_nan() {
        let err = EmpiricalDistribution::from_samples(&[1.0, f64::NAN]).unwrap_err();
        assert_eq!(err, RiskError::NonFiniteValue { index: 1 });
    }

    #[test]
    fn construction_rejects_empty() {
        assert_eq!(
            EmpiricalDistribution::from_samples(&[]).unwrap_err(),
            RiskError::EmptySample
        );
    }

    #[test]
    fn left_quantile_convention() {
        let d = dist(&[1.0, 2.0, 3.0, 4.0]);
        // F(1) = 0.25 >= 0.25, so the left quantile at 0.25 is 1.
        assert_eq!(d.quantile(0.25).unwrap(), 1.0);
        // At 0.26 the smallest x with F(x) >= 0.26 is 2.
        assert_eq!(d.quantile(0.26).unwrap(), 2.0);
        assert_eq!(d.quantile(0.75).unwrap(), 3.0);
        assert_eq!(d.quantile(0.76).unwrap(), 4.0);
    }

    #[test]
    fn quantile_constant() {
        let d = dist(&[7.0]);
        for u in [0.01, 0.5, 0.99] {
            assert_eq!(d.quantile(u).unwrap(), 7.0);
        }
    }

    #[test]
    fn quantile_rejects_bad_level() {
        let d = dist(&[1.0, 2.0]);
        assert!(d.quantile(0.0).is_err());
        assert!(d.quantile(1.0).is_err());
        assert!(d.quantile(-0.3).is_err());
    }

    #[test]
    fn moments() {
        let d = dist(&[1.0, 2.0, 3.0]);
        assert!((d.mean() - 2.0).abs() < 1e-15);
        assert!((d.variance() - 2.0 / 3.0).abs() < 1e-15);

        let c = dist(&[4.0, 4.0, 4.0]);
        assert_eq!(c.variance(), 0.0);

        let pm = dist(&[-1.0, 1.0]);
        assert_eq!(pm.mean(), 0.0);
        assert_eq!(pm.std_dev(), 1.0);
    }

    #[test]
    fn wasserstein_examples() {
        let a = dist(&[0.0, 0.0]);
        let b = dist(&[1.0, 1.0]);
        assert_eq!(wasserstein_distance(&a, &a, PNorm::one()).unwrap(), 0.0);
        assert_eq!(wasserstein_distance(&a, &b, PNorm::one()).unwrap(), 1.0);

        let c = dist(&[0.0, 2.0]);
        assert_eq!(
            wasserstein_distance(&c, &a, PNorm::infinity()).unwrap(),
            2.0
        );
    }

    #[test]
    fn wasserstein_rejects_unequal_sizes() {
        let a = dist(&[0.0, 1.0]);
        let b = dist(&[0.0, 1.0, 2.0]);
        assert!(matches!(
            wasserstein_distance(&a, &b, PNorm::two()),
            Err(RiskError::UnequalSupportSize { .. })
        ));
    }

    #[test]
    fn conjugate_exponents() {
        assert_eq!(PNorm::one().q(), f64::INFINITY);
        assert_eq!(PNorm::infinity().q(), 1.0);
        assert_eq!(PNorm::two().q(), 2.0);
        let p3 = PNorm::new(3.0).unwrap();
        assert!((1.0 / p3.p() + 1.0 / p3.q() - 1.0).abs() < 1e-15);
        assert!(PNorm::new(0.5).is_err());
    }
}
