//! Brute-force attack solver for tiny instances.
//!
//! Enumerates every combination of grid values for the numeric poison
//! features and every SOS-1 assignment for the categorical ones, refitting
//! ridge exactly per combination. Ground truth for optimizer quality checks
//! at toy scale; refuses anything whose enumeration would blow the budget.

use crate::dataset::{Dataset, PoisonSet};
use crate::error::{Error, Result};
use crate::ridge;
use crate::schema::FeatureSchema;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleConfig {
    /// Grid points per numeric dimension (includes both box endpoints).
    pub grid_points: usize,
    /// Hard cap on the number of ridge refits.
    pub max_evaluations: u128,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            grid_points: 21,
            max_evaluations: 10_000_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub poison: PoisonSet,
    pub objective: f64,
    pub evaluations: u128,
}

/// Number of refits a full enumeration needs: grid^(q·m) · (Π n(j))^q.
/// Saturates at `u128::MAX` on overflow.
pub fn required_evaluations(schema: &FeatureSchema, q: usize, grid_points: usize) -> u128 {
    let mut total: u128 = 1;
    let numeric_dims = q * schema.num_numerical();
    for _ in 0..numeric_dims {
        total = total.saturating_mul(grid_points as u128);
    }
    for _ in 0..q {
        for j in 0..schema.num_categorical() {
            total = total.saturating_mul(schema.cardinality(j) as u128);
        }
    }
    total
}

/// Exhaustively maximize the leader objective over the poison grid. The
/// template fixes q, the responses, and the origins; its feature values are
/// ignored. Ties keep the first (lexicographically smallest) assignment.
pub fn brute_force(
    train: &Dataset,
    poison_template: &PoisonSet,
    lambda: f64,
    config: &OracleConfig,
) -> Result<OracleResult> {
    if config.grid_points < 2 {
        return Err(Error::Argument("oracle needs at least 2 grid points".into()));
    }
    let schema = train.schema();
    let q = poison_template.n_samples();
    let m = schema.num_numerical();
    let t = schema.num_categorical();

    let required = required_evaluations(schema, q, config.grid_points);
    if required > config.max_evaluations {
        return Err(Error::EnumerationBudget {
            required,
            budget: config.max_evaluations,
        });
    }

    // odometer digits: numeric grid indices (sample-major), then category
    // indices (sample-major); the last digit spins fastest
    let mut radices: Vec<usize> = Vec::with_capacity(q * (m + t));
    radices.extend(std::iter::repeat(config.grid_points).take(q * m));
    for _ in 0..q {
        for j in 0..t {
            radices.push(schema.cardinality(j));
        }
    }
    let mut digits = vec![0usize; radices.len()];

    let grid_value = |i: usize| i as f64 / (config.grid_points - 1) as f64;
    let mut best_objective = f64::NEG_INFINITY;
    let mut best_poison: Option<PoisonSet> = None;
    let mut evaluations: u128 = 0;

    loop {
        let mut poison = poison_template.clone();
        for k in 0..q {
            for j in 0..m {
                poison.set_num(k, j, grid_value(digits[k * m + j]));
            }
            for j in 0..t {
                poison.set_cat(k, j, digits[q * m + k * t + j]);
            }
        }
        let params = ridge::fit(train, &poison, lambda)?;
        let objective = ridge::mse(&params, train)?;
        evaluations += 1;
        if objective > best_objective {
            best_objective = objective;
            best_poison = Some(poison);
        }

        // lexicographic increment from the last digit
        let mut pos = digits.len();
        loop {
            if pos == 0 {
                break;
            }
            pos -= 1;
            digits[pos] += 1;
            if digits[pos] < radices[pos] {
                break;
            }
            digits[pos] = 0;
        }
        if digits.iter().all(|&d| d == 0) {
            break;
        }
    }

    debug_assert_eq!(evaluations, required);
    Ok(OracleResult {
        poison: best_poison.expect("at least one evaluation"),
        objective: best_objective,
        evaluations,
    })
}

/// Snap a poison set's numeric features to the oracle grid (nearest point),
/// for comparing a continuous solution against a grid optimum.
pub fn snap_to_grid(poison: &PoisonSet, grid_points: usize) -> PoisonSet {
    let mut snapped = poison.clone();
    let g = (grid_points - 1) as f64;
    for k in 0..poison.n_samples() {
        for j in 0..poison.schema().num_numerical() {
            let v = poison.num()[(k, j)];
            snapped.set_num(k, j, (v * g).round() / g);
        }
    }
    snapped
}
