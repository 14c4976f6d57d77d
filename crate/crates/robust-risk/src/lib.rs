//! Law-invariant convex risk measures on empirical return samples, their
//! worst-case values under two kinds of model uncertainty, and a
//! brute-force adversarial oracle that certifies every closed form.
//!
//! The crate works on finite samples with equal atom weights. On that
//! space quantiles are array lookups, spectral integrals are finite sums,
//! the 1-D p-Wasserstein distance is a sorted-difference norm, and all
//! dual densities are weight vectors, so every formula implemented here is
//! exact rather than discretized.
//!
//! Module map:
//!
//! * [`empirical`] - distributions, quantiles, moments, Wasserstein distance;
//! * [`measures`] - the base risk measures (VaR, ES, spectral, expectile,
//!   mean plus semi-deviation, entropic, quadratic shortfall);
//! * [`dual`] - subgradient densities, q-norms, penalty evaluation;
//! * [`robust`] - worst-case closed forms and argmax construction for the
//!   mean-variance set and Wasserstein balls;
//! * [`oracle`] - seeded random-restart hill climbing that certifies the
//!   closed forms from the primal side.

pub mod dual;
pub mod empirical;
pub mod error;
pub mod measures;
pub mod oracle;
pub mod robust;

pub use dual::{DualDensity, PenaltyValue};
pub use empirical::{wasserstein_distance, EmpiricalDistribution, PNorm};
pub use error::{Result, RiskError};
pub use measures::{RiskMeasureSpec, SpectralFunction};
pub use oracle::{OracleConfig, OracleReport, OracleVerdict};
pub use robust::{UncertaintySpec, WorstCaseResult};
