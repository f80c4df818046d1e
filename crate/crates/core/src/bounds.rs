//! Sensitivity bounds on the lower-level variables.
//!
//! However the attacker places its q samples, the fitted coefficients can
//! only drift so far from the clean-data solution. Writing the weights in
//! the mean-centered closed form and passing to the SVD of the design
//! matrix X, every weight is bounded by
//!
//! ```text
//! |w| <= max_i g(σ_i(X)) · ( ‖y⁰‖₂ + √q + (Σy⁰ + q)/√(n+q) ),   g(σ) = σ/(σ²+λ)
//! ```
//!
//! and the (mean-centered) intercept lies in
//! `[Σy⁰/(n+q), (Σy⁰+q)/(n+q)]` exactly. X depends on the poison, so the
//! spectral factor is controlled through the unpoisoned block X⁰: the gram
//! matrix splits as X⁰ᵀX⁰ + ZᵀZ with ZᵀZ positive semidefinite, hence every
//! eigenvalue of XᵀX dominates the matching eigenvalue of X⁰ᵀX⁰.
//!
//! Because g is not monotone (it peaks at σ = √λ with value 1/(2√λ)),
//! evaluating g at a single extreme singular value of X⁰ is only a valid
//! bound when the whole spectrum of X sits on one side of √λ:
//!
//! - √λ ≤ σ_min(X⁰): g is decreasing on the spectrum, so g(σ_min(X⁰)) is safe;
//! - √λ ≥ an upper bound on σ_max(X): g is increasing there; σ_max(X)² is at
//!   most σ_max(X⁰)² + q·(m+t) since each poison row has norm² ≤ m + t;
//! - otherwise only the unconditional ceiling 1/(2√λ) applies.
//!
//! The reported bound is the tightest valid candidate, never above the ceiling.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, PoisonSet};
use crate::error::{Error, Result};
use crate::ridge;

/// Bounds on the lower-level variables computed from the unpoisoned data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableBounds {
    /// Bound on every |wⁿᵢ| and |wᶜⱼz|.
    pub weight_bound: f64,
    pub intercept_lo: f64,
    pub intercept_hi: f64,
    /// The σ plugged into g for the selected candidate (√λ when capped, the
    /// inflated σ_max upper bound in the above-spectrum case).
    pub sigma_used: f64,
    /// True when the unconditional 1/(2√λ) ceiling was the binding factor.
    pub capped: bool,
}

/// Both single-σ readings of the spectral factor, reported for audit. These
/// are informational; neither is used when it cannot be certified sound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReadings {
    pub sigma_min: f64,
    pub sigma_max: f64,
    /// g(σ_min(X⁰)) · y-term.
    pub bound_via_sigma_min: f64,
    /// g(σ_max(X⁰)) · y-term.
    pub bound_via_sigma_max: f64,
}

fn g(sigma: f64, lambda: f64) -> f64 {
    sigma / (sigma * sigma + lambda)
}

/// Compute [`VariableBounds`] for a clean training set and q poison samples.
pub fn compute_bounds(train: &Dataset, q: usize, lambda: f64) -> Result<VariableBounds> {
    let (bounds, _) = compute_bounds_with_readings(train, q, lambda)?;
    Ok(bounds)
}

/// Same as [`compute_bounds`] but also returns the audit readings.
pub fn compute_bounds_with_readings(
    train: &Dataset,
    q: usize,
    lambda: f64,
) -> Result<(VariableBounds, SpectralReadings)> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Argument(format!(
            "variable bounds require lambda > 0, got {lambda}"
        )));
    }
    let n = train.n_samples();
    if n == 0 {
        return Err(Error::Argument("bounds need a nonempty training set".into()));
    }

    let empty = PoisonSet::empty(std::sync::Arc::clone(train.schema()));
    let (x0, y0) = ridge::design_matrix(train, &empty)?;
    let d = x0.ncols();
    let singular: DVector<f64> = x0.clone().svd(false, false).singular_values;
    let sigma_max = if d == 0 { 0.0 } else { singular.max() };
    // the gram matrix is d x d; with fewer rows than columns its smallest
    // eigenvalue is zero regardless of the thin singular values
    let sigma_min = if d == 0 {
        0.0
    } else if n < d {
        0.0
    } else {
        singular.min()
    };

    let sum_y0: f64 = y0.iter().sum();
    let y_term = y0.norm() + (q as f64).sqrt() + (sum_y0 + q as f64) / ((n + q) as f64).sqrt();

    let sqrt_lambda = lambda.sqrt();
    let cap = 1.0 / (2.0 * sqrt_lambda);
    let mut factor = cap;
    let mut sigma_used = sqrt_lambda;
    let mut capped = true;

    if sqrt_lambda <= sigma_min {
        // whole X-spectrum is above sqrt(lambda); g decreasing there
        let candidate = g(sigma_min, lambda);
        if candidate <= factor {
            factor = candidate;
            sigma_used = sigma_min;
            capped = false;
        }
    } else {
        let m = train.schema().num_numerical();
        let t = train.schema().num_categorical();
        let sigma_max_ub = (sigma_max * sigma_max + (q * (m + t)) as f64).sqrt();
        if sqrt_lambda >= sigma_max_ub {
            // whole X-spectrum is below sqrt(lambda); g increasing there
            let candidate = g(sigma_max_ub, lambda);
            if candidate <= factor {
                factor = candidate;
                sigma_used = sigma_max_ub;
                capped = false;
            }
        }
    }

    let bounds = VariableBounds {
        weight_bound: factor * y_term,
        intercept_lo: sum_y0 / (n + q) as f64,
        intercept_hi: (sum_y0 + q as f64) / (n + q) as f64,
        sigma_used,
        capped,
    };
    let readings = SpectralReadings {
        sigma_min,
        sigma_max,
        bound_via_sigma_min: g(sigma_min, lambda) * y_term,
        bound_via_sigma_max: g(sigma_max, lambda) * y_term,
    };
    Ok((bounds, readings))
}

/// The mean-centered intercept parameterization used in the sensitivity
/// derivation: the intercept is the mean of the combined responses.
pub fn mean_centered_intercept(train: &Dataset, poison: &PoisonSet) -> f64 {
    let n = train.n_samples();
    let q = poison.n_samples();
    let total: f64 = train.y().iter().sum::<f64>() + poison.y().iter().sum::<f64>();
    total / (n + q) as f64
}
