//! Box-constrained local maximization of the leader objective over a batch
//! of continuous poison features.
//!
//! Plain projected gradient ascent with Armijo backtracking: each iterate
//! projects onto [0,1], each accepted step must increase the objective by a
//! fraction of the first-order prediction, and a rejected overall solve
//! restores the state bit-for-bit. A quasi-Newton direction buys nothing
//! here since every objective evaluation already pays a dense refit.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::bilevel::AttackState;
use crate::error::Result;

/// Armijo sufficient-increase fraction for the backtracking line search.
const ARMIJO_C: f64 = 1e-4;

/// Minimum objective gain that counts as a real improvement rather than
/// roundoff in the accept/restore test.
pub const IMPROVEMENT_EPS: f64 = 1e-12;

/// Knobs for one batch solve.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct OptimizerConfig {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub step_init: f64,
    pub backtrack_factor: f64,
    pub min_step: f64,
    /// Number of starts per batch solve: the incoming point plus
    /// `multistart - 1` uniform-random feasible starts.
    pub multistart: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            max_iters: 500,
            grad_tol: 1e-6,
            step_init: 1.0,
            backtrack_factor: 0.5,
            min_step: 1e-12,
            multistart: 1,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(crate::error::Error::Argument("max_iters must be >= 1".into()));
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return Err(crate::error::Error::Argument(
                "backtrack_factor must lie in (0,1)".into(),
            ));
        }
        if !(self.min_step < self.step_init) {
            return Err(crate::error::Error::Argument(
                "min_step must be smaller than step_init".into(),
            ));
        }
        if !(self.grad_tol >= 0.0) || self.multistart < 1 {
            return Err(crate::error::Error::Argument(
                "grad_tol must be nonnegative and multistart >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Gradient components clipped at active bounds: a coordinate pinned at a
/// bound with the gradient pointing outward contributes zero.
fn projected_gradient(x: &[f64], grad: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(grad)
        .map(|(&xi, &gi)| {
            if (xi <= 0.0 && gi < 0.0) || (xi >= 1.0 && gi > 0.0) {
                0.0
            } else {
                gi
            }
        })
        .collect()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |a, x| a.max(x.abs()))
}

fn read_active(state: &AttackState, active: &[(usize, usize)]) -> Vec<f64> {
    active
        .iter()
        .map(|&(k, v)| state.poison().num()[(k, v)])
        .collect()
}

fn write_active(state: &mut AttackState, active: &[(usize, usize)], x: &[f64]) -> Result<()> {
    for (&(k, v), &val) in active.iter().zip(x) {
        state.set_num(k, v, val);
    }
    state.refit()
}

/// Why an ascent stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Termination {
    GradTol,
    MaxIters,
    StepTooSmall,
}

/// Ascend from the state's current point; returns the best objective found
/// and the stopping reason. The state is left at the final iterate.
///
/// The trial step carries over between iterations, growing by 1/backtrack
/// after each acceptance, so flat directions are traversed at the scale the
/// objective actually supports instead of creeping at `step_init`.
fn ascend(
    state: &mut AttackState,
    active: &[(usize, usize)],
    config: &OptimizerConfig,
) -> Result<(f64, Termination)> {
    let mut x = read_active(state, active);
    let mut f = state.leader_objective()?;
    let mut step_seed = config.step_init;
    let mut reason = Termination::MaxIters;

    for _ in 0..config.max_iters {
        let grad = state.hypergradient(active)?;
        let pg = projected_gradient(&x, &grad);
        if inf_norm(&pg) <= config.grad_tol {
            reason = Termination::GradTol;
            break;
        }
        let mut step = step_seed;
        let mut accepted = false;
        while step >= config.min_step {
            let candidate: Vec<f64> = x
                .iter()
                .zip(&grad)
                .map(|(&xi, &gi)| (xi + step * gi).clamp(0.0, 1.0))
                .collect();
            let predicted: f64 = grad
                .iter()
                .zip(candidate.iter().zip(&x))
                .map(|(g, (c, xi))| g * (c - xi))
                .sum();
            if predicted <= 0.0 {
                // projection neutralized the step; shrink and retry
                step *= config.backtrack_factor;
                continue;
            }
            write_active(state, active, &candidate)?;
            let f_new = state.leader_objective()?;
            if f_new >= f + ARMIJO_C * predicted {
                x = candidate;
                f = f_new;
                accepted = true;
                step_seed = step / config.backtrack_factor;
                break;
            }
            step *= config.backtrack_factor;
        }
        if !accepted {
            reason = Termination::StepTooSmall;
            break;
        }
    }
    // make sure the state reflects x exactly (on most exits it already does)
    let current = read_active(state, active);
    if current != x {
        write_active(state, active, &x)?;
    }
    Ok((state.leader_objective()?, reason))
}

/// Locally maximize the leader objective over the numeric features of the
/// given poison samples, projecting onto [0,1].
///
/// Runs `config.multistart` ascents (the incoming point first, then random
/// feasible starts drawn from `rng`), keeps the best, and applies it only
/// if it beats the entry objective by more than [`IMPROVEMENT_EPS`];
/// otherwise the state is restored to its entry values and `false` is
/// returned. The leader objective never decreases across a call.
pub fn optimize_batch(
    state: &mut AttackState,
    batch: &[usize],
    config: &OptimizerConfig,
    rng: &mut ChaCha8Rng,
) -> Result<bool> {
    config.validate()?;
    let m = state.train().schema().num_numerical();
    let q = state.poison().n_samples();
    for &k in batch {
        if k >= q {
            return Err(crate::error::Error::Argument(format!(
                "batch sample index {k} out of range ({q} poison samples)"
            )));
        }
    }
    let active: Vec<(usize, usize)> = batch
        .iter()
        .flat_map(|&k| (0..m).map(move |v| (k, v)))
        .collect();
    if active.is_empty() {
        return Ok(false); // nothing to optimize (m = 0 or empty batch)
    }

    let entry = state.snapshot();
    let entry_objective = state.leader_objective()?;

    let mut best_objective = entry_objective;
    let mut best_x: Option<Vec<f64>> = None;

    for start in 0..config.multistart {
        if start == 0 {
            state.restore(entry.clone());
        } else {
            let random: Vec<f64> = (0..active.len()).map(|_| rng.gen_range(0.0..=1.0)).collect();
            state.restore(entry.clone());
            write_active(state, &active, &random)?;
        }
        let (f, _) = ascend(state, &active, config)?;
        if f > best_objective {
            best_objective = f;
            best_x = Some(read_active(state, &active));
        }
    }

    if best_objective > entry_objective + IMPROVEMENT_EPS {
        let x = best_x.expect("improvement implies a recorded point");
        state.restore(entry);
        write_active(state, &active, &x)?;
        Ok(true)
    } else {
        state.restore(entry);
        Ok(false)
    }
}
