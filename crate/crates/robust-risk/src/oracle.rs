//! Brute-force adversarial certification of the worst-case closed forms.
//!
//! The oracle never trusts a formula: it climbs the risk surface directly,
//! proposing Gaussian perturbations of candidate outcomes and projecting
//! them back onto the uncertainty set. Runs are seeded (restart i derives
//! its generator from `cfg.seed` and i alone) and merged by a commutative
//! rule, so serial and parallel executions produce bit-identical reports.
//!
//! A report compares the best value found against a reference closed form:
//! `CONFIRMED` when they agree within tolerance, `VIOLATED` when the search
//! strictly beats the formula (the formula is wrong or too small), `SLACK`
//! when the search falls short (either the formula overshoots or the
//! maximizer is not representable on the sample atoms).

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::dual;
use crate::empirical::{wasserstein_distance, EmpiricalDistribution, PNorm};
use crate::error::Result;
use crate::measures::RiskMeasureSpec;
use crate::robust::{self, OracleCertification, WorstCaseResult};

/// Tuning of the adversarial search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleConfig {
    /// Root seed; everything random derives from it.
    pub seed: u64,
    /// Independent hill-climbing restarts.
    pub restarts: usize,
    /// Proposals per restart.
    pub iterations: usize,
    /// Step-size multiplier applied after 20 consecutive rejections.
    pub step_decay: f64,
    /// Agreement tolerance between search and closed form.
    pub tolerance: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            restarts: 32,
            iterations: 2000,
            step_decay: 0.95,
            tolerance: 1e-4,
        }
    }
}

impl OracleConfig {
    fn validate(&self) -> Result<()> {
        if self.restarts == 0 || self.iterations == 0 {
            return Err(crate::error::RiskError::OutOfRange {
                name: "restarts/iterations",
                requirement: "positive",
                value: 0.0,
            });
        }
        if !(self.step_decay > 0.0 && self.step_decay < 1.0) {
            return Err(crate::error::RiskError::OutOfRange {
                name: "step_decay",
                requirement: "in (0, 1)",
                value: self.step_decay,
            });
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(crate::error::RiskError::OutOfRange {
                name: "tolerance",
                requirement: "> 0",
                value: self.tolerance,
            });
        }
        Ok(())
    }
}

/// Outcome of a certification run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum OracleVerdict {
    /// Search and closed form agree within tolerance.
    Confirmed,
    /// The search found a strictly better point: the closed form is wrong.
    Violated,
    /// The search could not reach the closed form.
    Slack,
}

/// Result of an adversarial search against a reference value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub best_value: f64,
    pub best_point: EmpiricalDistribution,
    pub closed_form_value: f64,
    /// `closed_form_value - best_value`.
    pub gap: f64,
    pub verdict: OracleVerdict,
}

impl OracleReport {
    fn new(best_value: f64, best_point: EmpiricalDistribution, reference: f64, tol: f64) -> Self {
        let gap = reference - best_value;
        let verdict = if best_value > reference + tol {
            OracleVerdict::Violated
        } else if best_value < reference - tol {
            OracleVerdict::Slack
        } else {
            OracleVerdict::Confirmed
        };
        Self {
            best_value,
            best_point,
            closed_form_value: reference,
            gap,
            verdict,
        }
    }

    /// Certification summary for attaching to a `WorstCaseResult`.
    pub fn certification(&self) -> OracleCertification {
        OracleCertification {
            confirmed: self.verdict == OracleVerdict::Confirmed,
            gap: self.gap,
        }
    }
}

/// Feasible-set geometry the search projects onto.
enum Feasible<'a> {
    MeanVariance {
        mean: f64,
        sigma: f64,
    },
    Ball {
        anchor: &'a EmpiricalDistribution,
        norm: PNorm,
        eps: f64,
    },
}

impl Feasible<'_> {
    /// Maps an arbitrary sorted candidate into the set. Mean-variance:
    /// recenter, then shrink the centered part radially if too dispersed.
    /// Ball: shrink the sorted difference radially in the p-norm (clamp
    /// per coordinate for p = inf).
    fn project(&self, values: &mut [f64]) {
        match self {
            Feasible::MeanVariance { mean, sigma } => {
                let n = values.len() as f64;
                let m = values.iter().sum::<f64>() / n;
                for v in values.iter_mut() {
                    *v += mean - m;
                }
                let var = values.iter().map(|v| (*v - mean).powi(2)).sum::<f64>() / n;
                let s = var.sqrt();
                if s > *sigma {
                    let scale = sigma / s;
                    for v in values.iter_mut() {
                        *v = mean + (*v - mean) * scale;
                    }
                }
            }
            Feasible::Ball { anchor, norm, eps } => {
                values.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
                let x = anchor.values();
                if norm.is_infinite() {
                    for (v, xi) in values.iter_mut().zip(x) {
                        *v = (*v).clamp(xi - eps, xi + eps);
                    }
                    return;
                }
                let p = norm.p();
                let n = values.len() as f64;
                let dist = if p == 1.0 {
                    values
                        .iter()
                        .zip(x)
                        .map(|(v, xi)| (v - xi).abs())
                        .sum::<f64>()
                        / n
                } else {
                    (values
                        .iter()
                        .zip(x)
                        .map(|(v, xi)| (v - xi).abs().powf(p))
                        .sum::<f64>()
                        / n)
                        .powf(1.0 / p)
                };
                if dist > *eps {
                    let scale = eps / dist;
                    for (v, xi) in values.iter_mut().zip(x) {
                        *v = xi + (*v - xi) * scale;
                    }
                }
            }
        }
    }

    fn contains(&self, d: &EmpiricalDistribution, slack: f64) -> bool {
        match self {
            Feasible::MeanVariance { mean, sigma } => {
                (d.mean() - mean).abs() <= slack * (1.0 + mean.abs())
                    && d.std_dev() <= sigma + slack * (1.0 + sigma)
            }
            Feasible::Ball { anchor, norm, eps } => {
                wasserstein_distance(d, anchor, *norm).is_ok_and(|w| w <= eps + slack)
            }
        }
    }
}

fn mix_seed(seed: u64, restart: u64) -> u64 {
    // splitmix-style stream separation
    let mut z = seed ^ restart.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One restart: hill climbing with Gaussian proposals, projection, and a
/// step schedule that shrinks after 20 straight rejections.
fn climb(
    spec: &RiskMeasureSpec,
    feasible: &Feasible<'_>,
    start: &[f64],
    initial_step: f64,
    iterations: usize,
    step_decay: f64,
    rng: &mut ChaCha8Rng,
) -> (f64, Vec<f64>) {
    let evaluate = |values: &[f64]| -> f64 {
        let d = EmpiricalDistribution::from_samples(values).expect("finite candidate");
        spec.evaluate(&d).expect("validated spec")
    };

    let mut current = start.to_vec();
    feasible.project(&mut current);
    current.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let mut current_value = evaluate(&current);

    let mut step = initial_step.max(1e-12);
    let mut rejections = 0;
    let mut proposal = vec![0.0; current.len()];
    for _ in 0..iterations {
        for (p, c) in proposal.iter_mut().zip(&current) {
            let noise: f64 = rng.sample(StandardNormal);
            *p = c + step * noise;
        }
        feasible.project(&mut proposal);
        proposal.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
        let value = evaluate(&proposal);
        if value > current_value {
            current.copy_from_slice(&proposal);
            current_value = value;
            rejections = 0;
        } else {
            rejections += 1;
            if rejections >= 20 {
                step *= step_decay;
                rejections = 0;
            }
        }
    }
    (current_value, current)
}

/// Runs every restart (in parallel when a rayon pool is available) and
/// merges by value, breaking ties toward the lexicographically smaller
/// point, so the merge is order-independent.
fn search(
    spec: &RiskMeasureSpec,
    feasible: &Feasible<'_>,
    seeds: &[Vec<f64>],
    anchor: &EmpiricalDistribution,
    initial_step: f64,
    cfg: &OracleConfig,
) -> (f64, EmpiricalDistribution) {
    let results: Vec<(f64, Vec<f64>)> = (0..cfg.restarts)
        .into_par_iter()
        .map(|restart| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, restart as u64));
            let start: Vec<f64> = if restart < seeds.len() {
                seeds[restart].clone()
            } else {
                // fresh random start: anchor plus a coarse Gaussian cloud
                anchor
                    .values()
                    .iter()
                    .map(|v| {
                        let noise: f64 = rng.sample(StandardNormal);
                        v + 4.0 * initial_step * noise
                    })
                    .collect()
            };
            climb(
                spec,
                feasible,
                &start,
                initial_step,
                cfg.iterations,
                cfg.step_decay,
                &mut rng,
            )
        })
        .collect();

    let (best_value, best_point) = results
        .into_iter()
        .reduce(|a, b| {
            if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
                b
            } else {
                a
            }
        })
        .expect("at least one restart");
    (
        best_value,
        EmpiricalDistribution::from_samples(&best_point).expect("finite best point"),
    )
}

/// Adversarial search over the mean-variance set, scored against the
/// module's own closed form.
pub fn oracle_mean_variance(
    spec: &RiskMeasureSpec,
    d: &EmpiricalDistribution,
    cfg: &OracleConfig,
) -> Result<OracleReport> {
    let closed = robust::wc_mean_variance(spec, d)?;
    oracle_mean_variance_against(spec, d, cfg, closed.value, Some(&closed))
}

/// Same search scored against a caller-supplied reference value; used by
/// self-tests that corrupt the closed form on purpose.
pub fn oracle_mean_variance_against(
    spec: &RiskMeasureSpec,
    d: &EmpiricalDistribution,
    cfg: &OracleConfig,
    reference: f64,
    closed: Option<&WorstCaseResult>,
) -> Result<OracleReport> {
    cfg.validate()?;
    spec.evaluate(d)?; // surface parameter/sample incompatibilities up front
    let feasible = Feasible::MeanVariance {
        mean: d.mean(),
        sigma: d.std_dev(),
    };
    let mut seeds = Vec::new();
    if let Some(c) = closed {
        seeds.push(c.argmax.values().to_vec());
    }
    seeds.push(d.values().to_vec());
    let initial_step = (d.std_dev() / 4.0).max(1e-9);
    let (best_value, best_point) = search(spec, &feasible, &seeds, d, initial_step, cfg);
    assert!(
        feasible.contains(&best_point, 1e-8),
        "projection failed to keep the search feasible"
    );
    Ok(OracleReport::new(
        best_value,
        best_point,
        reference,
        cfg.tolerance,
    ))
}

/// Adversarial search over the p-Wasserstein ball, scored against the
/// module's own closed form.
pub fn oracle_wasserstein(
    spec: &RiskMeasureSpec,
    d: &EmpiricalDistribution,
    norm: PNorm,
    eps: f64,
    cfg: &OracleConfig,
) -> Result<OracleReport> {
    let closed = robust::wc_wasserstein(spec, d, norm, eps)?;
    oracle_wasserstein_against(spec, d, norm, eps, cfg, closed.value, Some(&closed))
}

/// Ball search against a caller-supplied reference value.
pub fn oracle_wasserstein_against(
    spec: &RiskMeasureSpec,
    d: &EmpiricalDistribution,
    norm: PNorm,
    eps: f64,
    cfg: &OracleConfig,
    reference: f64,
    closed: Option<&WorstCaseResult>,
) -> Result<OracleReport> {
    cfg.validate()?;
    spec.evaluate(d)?;
    if eps == 0.0 {
        // degenerate ball: the anchor is the only member
        return Ok(OracleReport::new(
            spec.evaluate(d)?,
            d.clone(),
            reference,
            cfg.tolerance,
        ));
    }
    let feasible = Feasible::Ball {
        anchor: d,
        norm,
        eps,
    };
    let mut seeds = Vec::new();
    if let Some(c) = closed {
        seeds.push(c.argmax.values().to_vec());
    }
    seeds.push(d.values().to_vec());
    if let Ok(density) = dual::subgradient_density(spec, d) {
        // monotone improvement seed: push the transport budget onto the
        // atoms carrying the largest subgradient weight
        let max = density.max_weight();
        let tol = 1e-12 * (1.0 + max);
        let block: Vec<usize> = density
            .weights()
            .iter()
            .enumerate()
            .filter(|(_, &w)| w >= max - tol)
            .map(|(i, _)| i)
            .collect();
        let per_atom = if norm.is_infinite() {
            eps
        } else {
            d.len() as f64 * eps / block.len() as f64
        };
        let mut values = d.values().to_vec();
        for i in block {
            values[i] -= per_atom;
        }
        seeds.push(values);
    }
    let initial_step = (eps / 4.0).max(1e-9);
    let (best_value, best_point) = search(spec, &feasible, &seeds, d, initial_step, cfg);
    assert!(
        feasible.contains(&best_point, 1e-8),
        "projection failed to keep the search feasible"
    );
    Ok(OracleReport::new(
        best_value,
        best_point,
        reference,
        cfg.tolerance,
    ))
}
