//! Dual densities dQ/dP of the base measures, their q-norms, and penalty
//! (convex-conjugate) evaluation.
//!
//! A density lives on the n atoms of a distribution, aligned to the sorted
//! values, with `(1/n) sum w_i = 1` and `w_i >= 0`. For every supported
//! measure `subgradient_density` returns a canonical member of the
//! subdifferential, i.e. a density attaining the dual representation
//!
//! ```text
//! rho(X) = E_Q[-X] - penalty(Q)
//! ```
//!
//! For the coherent measures the penalty is the {0, +inf} indicator of the
//! dual set, decided by an explicit membership predicate; the entropic
//! penalty is scaled relative entropy and the quadratic-shortfall penalty is
//! `sqrt(2 l0) ||w||_2`.

use serde::Serialize;

use crate::empirical::{EmpiricalDistribution, PNorm};
use crate::error::{Result, RiskError};
use crate::measures::{self, RiskMeasureSpec, SpectralFunction};

/// Slack for the {0, +inf} dual-set membership predicates.
const MEMBERSHIP_TOL: f64 = 1e-9;

/// Required accuracy of the subgradient certificate
/// `E_Q[-X] - penalty(Q) = rho(X)`.
const CERTIFICATE_TOL: f64 = 1e-8;

/// A Radon-Nikodym derivative dQ/dP on the atoms of a sorted sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualDensity {
    weights: Vec<f64>,
}

impl DualDensity {
    /// Validates normalization `(1/n) sum w = 1` (1e-10) and
    /// non-negativity (slack 1e-12).
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(RiskError::InvalidDensity("no weights".into()));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite()) {
            return Err(RiskError::InvalidDensity(format!("non-finite weight {w}")));
        }
        if let Some(w) = weights.iter().find(|&&w| w < -1e-12) {
            return Err(RiskError::InvalidDensity(format!("negative weight {w}")));
        }
        let mean = weights.iter().sum::<f64>() / weights.len() as f64;
        if (mean - 1.0).abs() > 1e-10 {
            return Err(RiskError::InvalidDensity(format!(
                "weights average to {mean}, expected 1"
            )));
        }
        Ok(Self { weights })
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            weights: vec![1.0; n],
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn max_weight(&self) -> f64 {
        self.weights.iter().fold(0.0_f64, |a, &b| a.max(b))
    }

    pub fn min_weight(&self) -> f64 {
        self.weights.iter().fold(f64::INFINITY, |a, &b| a.min(b))
    }

    /// Expectation of -X under Q, `(1/n) sum w_i (-x_i)`.
    pub fn expect_negative(&self, d: &EmpiricalDistribution) -> f64 {
        debug_assert_eq!(self.len(), d.len());
        self.weights
            .iter()
            .zip(d.values())
            .map(|(w, x)| w * -x)
            .sum::<f64>()
            / self.len() as f64
    }
}

/// A penalty value in [0, +inf]: the infinite case is a dedicated variant so
/// it cannot be confused with an overflowed computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum PenaltyValue {
    Finite(f64),
    Infinite,
}

impl PenaltyValue {
    pub fn is_finite(&self) -> bool {
        matches!(self, PenaltyValue::Finite(_))
    }

    /// The value as f64, mapping the infinite variant to `f64::INFINITY`.
    pub fn as_f64(&self) -> f64 {
        match self {
            PenaltyValue::Finite(v) => *v,
            PenaltyValue::Infinite => f64::INFINITY,
        }
    }
}

/// Averages weights across runs of equal sample values, making the density a
/// function of the value alone. Subdifferentials are sets when values tie;
/// this picks a deterministic, law-invariant member without changing
/// `E_Q[-X]` or the normalization.
fn average_over_ties(values: &[f64], weights: &mut [f64]) {
    let n = values.len();
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && values[j] == values[i] {
            j += 1;
        }
        if j - i > 1 {
            let avg = weights[i..j].iter().sum::<f64>() / (j - i) as f64;
            weights[i..j].fill(avg);
        }
        i = j;
    }
}

/// Canonical subgradient density of the measure at `d`.
///
/// Supported: ES, Spectral, Expectile, MSD, Entropic. The construction is
/// checked on the spot: the certificate `E_Q[-X] - penalty = rho(X)` must
/// hold to 1e-8.
pub fn subgradient_density(
    spec: &RiskMeasureSpec,
    d: &EmpiricalDistribution,
) -> Result<DualDensity> {
    spec.validate()?;
    let n = d.len();
    let values = d.values();
    let mut weights = match spec {
        RiskMeasureSpec::Es { alpha } => {
            let m = alpha * n as f64;
            if m < 1.0 {
                return Err(RiskError::AlphaTooSmallForSample { alpha: *alpha, n });
            }
            let whole = m.floor() as usize;
            let frac = m - whole as f64;
            let mut w = vec![0.0; n];
            for wi in w.iter_mut().take(whole) {
                *wi = 1.0 / alpha;
            }
            if whole < n && frac > 0.0 {
                w[whole] = frac / alpha;
            }
            w
        }
        RiskMeasureSpec::Spectral { spectrum } => spectrum.cell_averages(n),
        RiskMeasureSpec::Expectile { alpha } => {
            // Two-level density from the first-order condition: weight
            // proportional to (1-alpha) below the expectile point and to
            // alpha at or above it.
            let e = -measures::expectile(d, *alpha)?;
            let raw: Vec<f64> = values
                .iter()
                .map(|&x| if x < e { 1.0 - alpha } else { *alpha })
                .collect();
            let mean = raw.iter().sum::<f64>() / n as f64;
            raw.into_iter().map(|w| w / mean).collect()
        }
        RiskMeasureSpec::Msd { beta } => {
            let mean = d.mean();
            let downside: Vec<f64> = values.iter().map(|&x| (mean - x).max(0.0)).collect();
            let norm = (downside.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
            if norm == 0.0 {
                vec![1.0; n] // constant sample
            } else {
                let v: Vec<f64> = downside.into_iter().map(|x| x / norm).collect();
                let v_mean = v.iter().sum::<f64>() / n as f64;
                v.into_iter().map(|vi| 1.0 + beta * (vi - v_mean)).collect()
            }
        }
        RiskMeasureSpec::Entropic { gamma } => {
            let shift = -gamma * d.min();
            let raw: Vec<f64> = values.iter().map(|&x| (-gamma * x - shift).exp()).collect();
            let mean = raw.iter().sum::<f64>() / n as f64;
            raw.into_iter().map(|w| w / mean).collect()
        }
        RiskMeasureSpec::Var { .. } | RiskMeasureSpec::ShortfallQuadratic { .. } => {
            return Err(RiskError::Unsupported(format!(
                "no canonical subgradient density for {}",
                spec.name()
            )));
        }
    };
    average_over_ties(values, &mut weights);
    let density = DualDensity::from_weights(weights)?;

    let certificate =
        density.expect_negative(d) - penalty(spec, &density)?.as_f64() - spec.evaluate(d)?;
    assert!(
        certificate.abs() <= CERTIFICATE_TOL,
        "subgradient certificate violated for {}: residual {certificate:e}",
        spec.name()
    );
    Ok(density)
}

/// q-norm of a density in the conjugate exponent of `norm`:
/// `((1/n) sum w^q)^(1/q)`; the sup-norm for q = inf and exactly 1 for
/// q = 1 (the normalization).
pub fn q_norm(density: &DualDensity, norm: PNorm) -> f64 {
    let q = norm.q();
    if q.is_infinite() {
        return density.max_weight();
    }
    if q == 1.0 {
        debug_assert!(
            (density.weights().iter().sum::<f64>() / density.len() as f64 - 1.0).abs() < 1e-9
        );
        return 1.0;
    }
    let n = density.len() as f64;
    let sum: f64 = density.weights().iter().map(|w| w.powf(q)).sum();
    (sum / n).powf(1.0 / q)
}

/// 2-norm of `w - 1`, i.e. `sqrt(||w||_2^2 - 1)`; the identity with
/// `q_norm(., 2)` is asserted to 1e-10.
pub fn centered_two_norm(density: &DualDensity) -> f64 {
    let n = density.len() as f64;
    let sum: f64 = density.weights().iter().map(|w| (w - 1.0).powi(2)).sum();
    let centered = (sum / n).sqrt();
    let two = q_norm(density, PNorm::two());
    assert!(
        (centered * centered + 1.0 - two * two).abs() <= 1e-10 * (1.0 + two * two),
        "norm identity violated: {} vs {}",
        centered * centered + 1.0,
        two * two
    );
    centered
}

/// Membership test for the spectral dual set: the decreasing rearrangement
/// of w must be dominated by phi in running integral. Both running
/// integrals are piecewise linear, so checking every kink point of either
/// side decides the comparison exactly.
fn spectral_member(spectrum: &SpectralFunction, density: &DualDensity) -> bool {
    let n = density.len();
    let nf = n as f64;
    let mut sorted = density.weights().to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("weights are finite"));
    let prefix: Vec<f64> = sorted
        .iter()
        .scan(0.0, |acc, w| {
            *acc += w / nf;
            Some(*acc)
        })
        .collect();

    let running_w = |t: f64| -> f64 {
        let cell = (t * nf).floor() as usize;
        if cell >= n {
            return prefix[n - 1];
        }
        let base = if cell == 0 { 0.0 } else { prefix[cell - 1] };
        base + sorted[cell] * (t - cell as f64 / nf)
    };

    let mut checkpoints: Vec<f64> = (1..=n).map(|i| i as f64 / nf).collect();
    checkpoints.extend(spectrum.segments().iter().map(|s| s.hi));
    checkpoints
        .into_iter()
        .all(|t| running_w(t) <= spectrum.integral_on(0.0, t) + MEMBERSHIP_TOL)
}

/// Membership test for the MSD dual set `{1 + beta (V - E[V])}` with
/// `V >= 0`, `||V||_2 = 1`: solve the decomposition for `E[V]` and check
/// the resulting V is admissible.
fn msd_member(beta: f64, density: &DualDensity) -> bool {
    let centered = centered_two_norm(density);
    if beta == 0.0 {
        return centered <= MEMBERSHIP_TOL;
    }
    let ratio = centered / beta;
    if ratio > 1.0 + MEMBERSHIP_TOL {
        return false;
    }
    // E[V] is pinned by ||V||_2 = 1; V >= 0 needs E[V] >= (1 - min w)/beta.
    let ev = (1.0 - (ratio * ratio).min(1.0)).sqrt();
    ev + MEMBERSHIP_TOL >= (1.0 - density.min_weight()) / beta
}

/// Penalty (convex conjugate) of the measure at a density.
///
/// Coherent measures return the {0, +inf} indicator of their dual set.
/// The entropic penalty is `(1/gamma) E[w log w]`; the quadratic-shortfall
/// penalty is `sqrt(2 l0) ||w||_2`. VaR has no convex dual representation.
pub fn penalty(spec: &RiskMeasureSpec, density: &DualDensity) -> Result<PenaltyValue> {
    spec.validate()?;
    let member_to_penalty = |member: bool| {
        if member {
            PenaltyValue::Finite(0.0)
        } else {
            PenaltyValue::Infinite
        }
    };
    match spec {
        RiskMeasureSpec::Es { alpha } => Ok(member_to_penalty(
            density.max_weight() <= 1.0 / alpha + MEMBERSHIP_TOL,
        )),
        RiskMeasureSpec::Spectral { spectrum } => {
            Ok(member_to_penalty(spectral_member(spectrum, density)))
        }
        RiskMeasureSpec::Expectile { alpha } => {
            // some a > 0 with a <= w <= a (1-alpha)/alpha
            let kappa = (1.0 - alpha) / alpha;
            let min = density.min_weight();
            let max = density.max_weight();
            Ok(member_to_penalty(
                min > 0.0 && max <= kappa * min + MEMBERSHIP_TOL,
            ))
        }
        RiskMeasureSpec::Msd { beta } => Ok(member_to_penalty(msd_member(*beta, density))),
        RiskMeasureSpec::Entropic { gamma } => {
            let n = density.len() as f64;
            let entropy: f64 = density
                .weights()
                .iter()
                .map(|&w| if w > 0.0 { w * w.ln() } else { 0.0 })
                .sum::<f64>()
                / n;
            Ok(PenaltyValue::Finite(entropy / gamma))
        }
        RiskMeasureSpec::ShortfallQuadratic { l0 } => Ok(PenaltyValue::Finite(
            (2.0 * l0).sqrt() * q_norm(density, PNorm::two()),
        )),
        RiskMeasureSpec::Var { .. } => Err(RiskError::Unsupported(
            "var is not convex and has no penalty representation".into(),
        )),
    }
}

/// Worst-case penalty under a Wasserstein ball of radius `eps`:
/// `penalty(Q) - eps ||Q||_q`, with +inf propagating.
pub fn wc_penalty_wasserstein(
    spec: &RiskMeasureSpec,
    density: &DualDensity,
    norm: PNorm,
    eps: f64,
) -> Result<PenaltyValue> {
    if eps.is_nan() || eps < 0.0 {
        return Err(RiskError::OutOfRange {
            name: "eps",
            requirement: ">= 0",
            value: eps,
        });
    }
    Ok(match penalty(spec, density)? {
        PenaltyValue::Infinite => PenaltyValue::Infinite,
        PenaltyValue::Finite(p) => PenaltyValue::Finite(p - eps * q_norm(density, norm)),
    })
}
