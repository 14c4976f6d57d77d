//! Base law-invariant convex risk measures evaluated on empirical
//! distributions.
//!
//! All measures follow the monetary convention: the input is a return
//! (gains positive) and the output is a capital requirement, so
//! `rho(X + c) = rho(X) - c` and lower outcomes mean higher risk.
//!
//! Implemented families:
//!
//! * `var`       - negative left quantile (base statistic, not convex);
//! * `es`        - expected shortfall, exact integral of the step quantile;
//! * `spectral`  - quantile integral against a non-increasing step density;
//! * `expectile` - negative expectile, solved from its first-order condition;
//! * `msd`       - mean plus semi-deviation;
//! * `entropic`  - log-exponential certainty equivalent;
//! * `shortfall_quadratic` - utility-based shortfall with quadratic loss
//!   `l(x) = x^2/2 on x >= 0`, the smallest reserve m with
//!   `E[l(-X - m)] <= l0`.

use serde::Serialize;

use crate::empirical::{EmpiricalDistribution, PNorm};
use crate::error::{Result, RiskError};

/// Absolute tolerance for the scalar bisections (expectile, shortfall).
pub(crate) const BISECTION_TOL: f64 = 1e-10;

/// A non-increasing step density on [0,1] with unit integral.
///
/// Stored as contiguous segments `[lo, hi) -> value`; the value weights the
/// tail quantile `VaR^u` at levels `u` inside the segment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralFunction {
    segments: Vec<SpectralSegment>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralSegment {
    pub lo: f64,
    pub hi: f64,
    pub value: f64,
}

impl SpectralFunction {
    /// Validates and stores segments `(lo, hi, value)`.
    ///
    /// Segments must tile [0,1] in order, carry non-negative non-increasing
    /// values and integrate to 1 within 1e-12.
    pub fn from_segments(segments: &[(f64, f64, f64)]) -> Result<Self> {
        if segments.is_empty() {
            return Err(RiskError::InvalidSpectrum("no segments".into()));
        }
        let mut parsed = Vec::with_capacity(segments.len());
        let mut cursor = 0.0_f64;
        let mut prev_value = f64::INFINITY;
        let mut integral = 0.0_f64;
        for &(lo, hi, value) in segments {
            if !(lo.is_finite() && hi.is_finite() && value.is_finite()) {
                return Err(RiskError::InvalidSpectrum("non-finite segment".into()));
            }
            if (lo - cursor).abs() > 1e-12 {
                return Err(RiskError::InvalidSpectrum(format!(
                    "segment starts at {lo}, expected {cursor}"
                )));
            }
            if hi <= lo {
                return Err(RiskError::InvalidSpectrum(format!(
                    "segment [{lo}, {hi}) has non-positive length"
                )));
            }
            if value < 0.0 {
                return Err(RiskError::InvalidSpectrum(format!(
                    "negative density {value}"
                )));
            }
            if value > prev_value + 1e-12 {
                return Err(RiskError::InvalidSpectrum(format!(
                    "density increases from {prev_value} to {value}"
                )));
            }
            integral += value * (hi - lo);
            parsed.push(SpectralSegment { lo, hi, value });
            cursor = hi;
            prev_value = value;
        }
        if (cursor - 1.0).abs() > 1e-12 {
            return Err(RiskError::InvalidSpectrum(format!(
                "segments end at {cursor}, expected 1"
            )));
        }
        if (integral - 1.0).abs() > 1e-12 {
            return Err(RiskError::InvalidSpectrum(format!(
                "integral is {integral}, expected 1"
            )));
        }
        Ok(Self { segments: parsed })
    }

    /// The expected-shortfall spectrum `(1/alpha) 1_(0,alpha)`.
    pub fn expected_shortfall(alpha: f64) -> Result<Self> {
        check_open_unit("alpha", alpha)?;
        Self::from_segments(&[(0.0, alpha, 1.0 / alpha), (alpha, 1.0, 0.0)])
    }

    /// The flat spectrum, which reproduces the negative mean.
    pub fn uniform() -> Self {
        Self::from_segments(&[(0.0, 1.0, 1.0)]).expect("flat density is valid")
    }

    pub fn segments(&self) -> &[SpectralSegment] {
        &self.segments
    }

    /// Exact integral of the density over `[a, b] intersect [0, 1]`.
    pub fn integral_on(&self, a: f64, b: f64) -> f64 {
        self.segments
            .iter()
            .map(|s| {
                let lo = s.lo.max(a);
                let hi = s.hi.min(b);
                if hi > lo {
                    s.value * (hi - lo)
                } else {
                    0.0
                }
            })
            .sum()
    }

    /// Exact q-norm of the step function on [0,1].
    pub fn q_norm(&self, norm: PNorm) -> f64 {
        let q = norm.q();
        if q.is_infinite() {
            return self
                .segments
                .iter()
                .map(|s| s.value)
                .fold(0.0_f64, f64::max);
        }
        if q == 1.0 {
            // unit integral by construction
            return 1.0;
        }
        let sum: f64 = self
            .segments
            .iter()
            .map(|s| s.value.powf(q) * (s.hi - s.lo))
            .sum();
        sum.powf(1.0 / q)
    }

    /// Exact 2-norm of `phi - 1` on [0,1].
    pub fn centered_two_norm(&self) -> f64 {
        let sum: f64 = self
            .segments
            .iter()
            .map(|s| (s.value - 1.0).powi(2) * (s.hi - s.lo))
            .sum();
        sum.sqrt()
    }

    /// Per-atom averages `n * integral over ((i)/n, (i+1)/n)`, the density
    /// this spectrum induces on n equal atoms sorted worst-first.
    pub fn cell_averages(&self, n: usize) -> Vec<f64> {
        let nf = n as f64;
        (0..n)
            .map(|i| nf * self.integral_on(i as f64 / nf, (i + 1) as f64 / nf))
            .collect()
    }

    /// True when every breakpoint sits on the grid {0, 1/n, ..., 1}.
    pub fn aligned_to(&self, n: usize) -> bool {
        let nf = n as f64;
        self.segments.iter().all(|s| {
            let t = s.hi * nf;
            (t - t.round()).abs() < 1e-9
        })
    }
}

/// Tagged description of a base risk measure with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "measure", rename_all = "snake_case")]
pub enum RiskMeasureSpec {
    /// Value at risk at level alpha in (0,1). Base statistic only: it is not
    /// convex, so no worst-case machinery is attached to it.
    Var { alpha: f64 },
    /// Expected shortfall at level alpha in (0,1); requires alpha * n >= 1.
    Es { alpha: f64 },
    /// Spectral measure with a caller-supplied step density.
    Spectral { spectrum: SpectralFunction },
    /// Negative expectile at asymmetry alpha in (0, 0.5].
    Expectile { alpha: f64 },
    /// Mean plus semi-deviation with loading beta in [0,1].
    Msd { beta: f64 },
    /// Entropic measure with risk aversion gamma > 0.
    Entropic { gamma: f64 },
    /// Quadratic-loss shortfall with budget l0 > 0.
    ShortfallQuadratic { l0: f64 },
}

impl RiskMeasureSpec {
    pub fn name(&self) -> &'static str {
        match self {
            RiskMeasureSpec::Var { .. } => "var",
            RiskMeasureSpec::Es { .. } => "es",
            RiskMeasureSpec::Spectral { .. } => "spectral",
            RiskMeasureSpec::Expectile { .. } => "expectile",
            RiskMeasureSpec::Msd { .. } => "msd",
            RiskMeasureSpec::Entropic { .. } => "entropic",
            RiskMeasureSpec::ShortfallQuadratic { .. } => "shortfall_quadratic",
        }
    }

    /// Parameter validation; every evaluation path calls this first.
    pub fn validate(&self) -> Result<()> {
        match self {
            RiskMeasureSpec::Var { alpha } | RiskMeasureSpec::Es { alpha } => {
                check_open_unit("alpha", *alpha)
            }
            RiskMeasureSpec::Spectral { .. } => Ok(()), // validated at construction
            RiskMeasureSpec::Expectile { alpha } => {
                if *alpha > 0.0 && *alpha <= 0.5 {
                    Ok(())
                } else {
                    Err(RiskError::OutOfRange {
                        name: "alpha",
                        requirement: "in (0, 0.5]",
                        value: *alpha,
                    })
                }
            }
            RiskMeasureSpec::Msd { beta } => {
                if (0.0..=1.0).contains(beta) {
                    Ok(())
                } else {
                    Err(RiskError::OutOfRange {
                        name: "beta",
                        requirement: "in [0, 1]",
                        value: *beta,
                    })
                }
            }
            RiskMeasureSpec::Entropic { gamma } => {
                if *gamma > 0.0 {
                    Ok(())
                } else {
                    Err(RiskError::OutOfRange {
                        name: "gamma",
                        requirement: "> 0",
                        value: *gamma,
                    })
                }
            }
            RiskMeasureSpec::ShortfallQuadratic { l0 } => {
                if *l0 > 0.0 {
                    Ok(())
                } else {
                    Err(RiskError::OutOfRange {
                        name: "l0",
                        requirement: "> 0",
                        value: *l0,
                    })
                }
            }
        }
    }

    /// Evaluates the measure on a distribution.
    pub fn evaluate(&self, d: &EmpiricalDistribution) -> Result<f64> {
        self.validate()?;
        match self {
            RiskMeasureSpec::Var { alpha } => var(d, *alpha),
            RiskMeasureSpec::Es { alpha } => es(d, *alpha),
            RiskMeasureSpec::Spectral { spectrum } => Ok(spectral(d, spectrum)),
            RiskMeasureSpec::Expectile { alpha } => expectile(d, *alpha),
            RiskMeasureSpec::Msd { beta } => msd(d, *beta),
            RiskMeasureSpec::Entropic { gamma } => entropic(d, *gamma),
            RiskMeasureSpec::ShortfallQuadratic { l0 } => shortfall_quadratic(d, *l0),
        }
    }
}

fn check_open_unit(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(RiskError::OutOfRange {
            name,
            requirement: "in (0, 1)",
            value,
        })
    }
}

/// Value at risk: the negative left quantile at level alpha.
pub fn var(d: &EmpiricalDistribution, alpha: f64) -> Result<f64> {
    Ok(-d.quantile(alpha)?)
}

/// Expected shortfall: the average of `VaR^u` over u in (0, alpha).
///
/// Evaluated as the exact Lebesgue integral of the empirical step quantile,
/// so a non-integer tail `alpha * n` contributes a fractional top atom.
pub fn es(d: &EmpiricalDistribution, alpha: f64) -> Result<f64> {
    check_open_unit("alpha", alpha)?;
    let n = d.len();
    let m = alpha * n as f64;
    if m < 1.0 {
        return Err(RiskError::AlphaTooSmallForSample { alpha, n });
    }
    let whole = m.floor() as usize;
    let frac = m - whole as f64;
    let values = d.values();
    let mut tail: f64 = values[..whole].iter().sum();
    if whole < n {
        tail += frac * values[whole];
    }
    Ok(-tail / m)
}

/// Spectral measure: exact integral of the step quantile against the step
/// density, `sum_i (-x_(i)) * integral of phi over ((i)/n, (i+1)/n)`.
pub fn spectral(d: &EmpiricalDistribution, spectrum: &SpectralFunction) -> f64 {
    let n = d.len();
    let nf = n as f64;
    d.values()
        .iter()
        .enumerate()
        .map(|(i, v)| -v * spectrum.integral_on(i as f64 / nf, (i + 1) as f64 / nf))
        .sum()
}

/// First-order-condition residual of the expectile point:
/// `alpha E[(X-e)^+] - (1-alpha) E[(e-X)^+]`, strictly decreasing in e.
fn expectile_residual(d: &EmpiricalDistribution, alpha: f64, e: f64) -> f64 {
    let n = d.len() as f64;
    let (gain, loss) = d.values().iter().fold((0.0, 0.0), |(g, l), &x| {
        ((x - e).max(0.0) + g, (e - x).max(0.0) + l)
    });
    alpha * gain / n - (1.0 - alpha) * loss / n
}

/// Negative expectile: `-e` where e solves
/// `alpha E[(X-e)^+] = (1-alpha) E[(e-X)^+]`, found by bisection on
/// the sample range.
pub fn expectile(d: &EmpiricalDistribution, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 0.5) {
        return Err(RiskError::OutOfRange {
            name: "alpha",
            requirement: "in (0, 0.5]",
            value: alpha,
        });
    }
    let (mut lo, mut hi) = (d.min(), d.max());
    if lo == hi {
        return Ok(-lo);
    }
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        if expectile_residual(d, alpha, mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(-0.5 * (lo + hi))
}

/// Mean plus semi-deviation: `-E[X] + beta ||(X - E[X])^-||_2`.
pub fn msd(d: &EmpiricalDistribution, beta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(RiskError::OutOfRange {
            name: "beta",
            requirement: "in [0, 1]",
            value: beta,
        });
    }
    let mean = d.mean();
    let n = d.len() as f64;
    let downside: f64 = d
        .values()
        .iter()
        .map(|&x| (mean - x).max(0.0).powi(2))
        .sum::<f64>()
        / n;
    Ok(-mean + beta * downside.sqrt())
}

/// Entropic measure: `(1/gamma) log E[exp(-gamma X)]`, evaluated with a
/// max-shift so large exponents cannot overflow.
pub fn entropic(d: &EmpiricalDistribution, gamma: f64) -> Result<f64> {
    if gamma <= 0.0 {
        return Err(RiskError::OutOfRange {
            name: "gamma",
            requirement: "> 0",
            value: gamma,
        });
    }
    let shift = -gamma * d.min(); // the largest exponent
    let n = d.len() as f64;
    let sum: f64 = d
        .values()
        .iter()
        .map(|&x| (-gamma * x - shift).exp())
        .sum();
    Ok((shift + (sum / n).ln()) / gamma)
}

/// Expected quadratic shortfall of the loss beyond the reserve m:
/// `(1/n) sum l(-x_i - m)` with `l(x) = x^2/2 on x >= 0`.
fn shortfall_budget(d: &EmpiricalDistribution, m: f64) -> f64 {
    let n = d.len() as f64;
    d.values()
        .iter()
        .map(|&x| {
            let excess = (-x - m).max(0.0);
            0.5 * excess * excess
        })
        .sum::<f64>()
        / n
}

/// Quadratic-loss shortfall risk: the smallest reserve m with
/// `E[l(-X - m)] <= l0`, found by bisection.
///
/// The budget is continuous and non-increasing in m, zero at `m = -min(X)`
/// and at least `l0 * n` at `m = -max(X) - sqrt(2 l0 n)`, so the crossing
/// is bracketed. For a constant sample c this reduces to `-c - sqrt(2 l0)`.
pub fn shortfall_quadratic(d: &EmpiricalDistribution, l0: f64) -> Result<f64> {
    if l0 <= 0.0 {
        return Err(RiskError::OutOfRange {
            name: "l0",
            requirement: "> 0",
            value: l0,
        });
    }
    let mut hi = -d.min(); // budget is 0 here
    let mut lo = -d.max() - 2.0 * (2.0 * l0 * d.len() as f64).sqrt();
    debug_assert!(shortfall_budget(d, lo) >= l0);
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        if shortfall_budget(d, mid) <= l0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
