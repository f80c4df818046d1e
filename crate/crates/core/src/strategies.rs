//! The attack strategies: IAS (benchmark), SAS, and IFCF.
//!
//! All three partition the poison samples into batches and hand each batch
//! to the local optimizer. They differ in what the follower sees while a
//! batch is optimized:
//!
//! - IAS grows the training data one batch at a time; batch i is optimized
//!   with the original data plus batches 1..i-1 as fixed parameters and the
//!   not-yet-poisoned batches absent.
//! - SAS keeps every poison sample in the data from the start, optimizing
//!   batches in turn while the others are fixed parameters, with a
//!   per-batch accept/restore rule.
//! - IFCF wraps SAS with greedy categorical flips: per sample, push the
//!   one-hot assignments toward the all-argmax or all-argmin category
//!   weights, keep the flip only if the leader MSE strictly improves, and
//!   re-run SAS once per epoch.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bilevel::AttackState;
use crate::dataset::{Dataset, PoisonSet};
use crate::error::{Error, Result};
use crate::localopt::{optimize_batch, OptimizerConfig};
use crate::ridge::RegressionParams;

/// Which attack strategy to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Ias,
    Sas,
    Ifcf,
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ias" => Ok(Method::Ias),
            "sas" => Ok(Method::Sas),
            "ifcf" => Ok(Method::Ifcf),
            other => Err(Error::Argument(format!(
                "unknown method '{other}' (expected ias, sas, or ifcf)"
            ))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Method::Ias => write!(f, "ias"),
            Method::Sas => write!(f, "sas"),
            Method::Ifcf => write!(f, "ifcf"),
        }
    }
}

/// Strategy configuration shared by all three methods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyConfig {
    pub method: Method,
    /// Fraction of the poison samples optimized per batch, in (0,1].
    pub batch_fraction: f64,
    /// Flip/SAS epochs (IFCF only).
    pub epochs: usize,
    pub optimizer: OptimizerConfig,
    pub seed: u64,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        StrategyConfig {
            method: Method::Sas,
            batch_fraction: 0.1,
            epochs: 2,
            optimizer: OptimizerConfig::default(),
            seed: 0,
        }
    }
}

/// Result of one strategy run.
#[derive(Debug, Clone)]
pub struct AttackOutcome {
    pub poison: PoisonSet,
    pub params: RegressionParams,
    /// Final leader objective (MSE on the unpoisoned training rows).
    pub objective: f64,
    /// Initial objective followed by the objective after each accepted
    /// event, all measured against one fixed lower-level problem, so the
    /// accept/restore rules make the sequence non-decreasing. For SAS and
    /// IFCF that problem is the full poisoned dataset throughout; for IAS,
    /// whose dataset grows per stage, it is the final full-q stage.
    pub trajectory: Vec<f64>,
    /// Number of events that actually changed the poison set.
    pub accepted_events: usize,
    /// IAS only: leader objective after each stage, measured on that
    /// stage's own (partial) dataset. Diagnostic; not monotone in general
    /// because consecutive entries refer to different follower problems.
    pub stage_objectives: Vec<f64>,
    /// IFCF: the objective right after the initial numeric-only SAS phase.
    pub sas_phase_objective: Option<f64>,
}

/// Partition `0..q` into consecutive batches of `round(batch_fraction * q)`
/// samples; the last batch takes the remainder.
pub fn partition_batches(q: usize, batch_fraction: f64) -> Result<Vec<Vec<usize>>> {
    if !(batch_fraction > 0.0 && batch_fraction <= 1.0) {
        return Err(Error::Argument(format!(
            "batch fraction must be in (0,1], got {batch_fraction}"
        )));
    }
    if q == 0 {
        return Err(Error::Argument("no poison samples to partition".into()));
    }
    let size = (batch_fraction * q as f64).round() as usize;
    if size == 0 {
        return Err(Error::Argument(format!(
            "batch fraction {batch_fraction} rounds to an empty batch for q = {q}"
        )));
    }
    Ok((0..q)
        .collect::<Vec<_>>()
        .chunks(size)
        .map(|c| c.to_vec())
        .collect())
}

/// Dispatch on `config.method`.
pub fn run(
    train: &Arc<Dataset>,
    poison: PoisonSet,
    lambda: f64,
    config: &StrategyConfig,
) -> Result<AttackOutcome> {
    match config.method {
        Method::Ias => run_ias(train, poison, lambda, config),
        Method::Sas => run_sas(train, poison, lambda, config),
        Method::Ifcf => run_ifcf(train, poison, lambda, config),
    }
}

/// Iterative attack strategy: poison batches are appended to the training
/// data one at a time and optimized on the grown dataset; future batches
/// are excluded until their turn.
pub fn run_ias(
    train: &Arc<Dataset>,
    poison: PoisonSet,
    lambda: f64,
    config: &StrategyConfig,
) -> Result<AttackOutcome> {
    let q = poison.n_samples();
    let batches = partition_batches(q, config.batch_fraction)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut current = poison;
    let mut trajectory = Vec::new();
    let mut stage_objectives = Vec::with_capacity(batches.len());
    let mut accepted_events = 0;
    let mut boundary = 0;
    let mut last_state: Option<AttackState> = None;

    for (i, batch) in batches.iter().enumerate() {
        boundary += batch.len();
        let prefix: Vec<usize> = (0..boundary).collect();
        let mut state =
            AttackState::new(Arc::clone(train), current.subset(&prefix), lambda)?;
        // the trajectory tracks the final stage, the only one whose
        // follower problem is the attack's actual full-q objective
        let is_last = i + 1 == batches.len();
        if is_last {
            trajectory.push(state.leader_objective()?);
        }
        let improved = optimize_batch(&mut state, batch, &config.optimizer, &mut rng)?;
        if improved {
            accepted_events += 1;
            copy_batch_back(&mut current, state.poison(), batch);
            if is_last {
                trajectory.push(state.leader_objective()?);
            }
        }
        stage_objectives.push(state.leader_objective()?);
        last_state = Some(state);
    }

    let state = last_state.expect("at least one batch");
    Ok(AttackOutcome {
        objective: state.leader_objective()?,
        params: state.params()?.clone(),
        poison: current,
        trajectory,
        accepted_events,
        stage_objectives,
        sas_phase_objective: None,
    })
}

fn copy_batch_back(dest: &mut PoisonSet, src: &PoisonSet, batch: &[usize]) {
    let m = dest.schema().num_numerical();
    let t = dest.schema().num_categorical();
    for &k in batch {
        for j in 0..m {
            dest.set_num(k, j, src.num()[(k, j)]);
        }
        for j in 0..t {
            dest.set_cat(k, j, src.cat(k, j));
        }
    }
}

/// One SAS sweep over all batches on an existing state. Returns true if the
/// objective improved during the sweep.
fn sas_pass(
    state: &mut AttackState,
    batches: &[Vec<usize>],
    optimizer: &OptimizerConfig,
    rng: &mut ChaCha8Rng,
) -> Result<bool> {
    let before = state.leader_objective()?;
    for batch in batches {
        optimize_batch(state, batch, optimizer, rng)?;
    }
    Ok(state.leader_objective()? > before)
}

/// Shifting attack strategy: all poison samples are present from the start;
/// each batch is optimized while the rest stay fixed, accept/restore per
/// batch. The objective never decreases.
pub fn run_sas(
    train: &Arc<Dataset>,
    poison: PoisonSet,
    lambda: f64,
    config: &StrategyConfig,
) -> Result<AttackOutcome> {
    let q = poison.n_samples();
    let batches = partition_batches(q, config.batch_fraction)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut state = AttackState::new(Arc::clone(train), poison, lambda)?;
    let mut trajectory = vec![state.leader_objective()?];
    let mut accepted_events = 0;
    for batch in &batches {
        let improved = optimize_batch(&mut state, batch, &config.optimizer, &mut rng)?;
        if improved {
            accepted_events += 1;
            trajectory.push(state.leader_objective()?);
        }
    }

    Ok(AttackOutcome {
        objective: state.leader_objective()?,
        params: state.params()?.clone(),
        trajectory,
        accepted_events,
        stage_objectives: Vec::new(),
        sas_phase_objective: None,
        poison: state.into_poison(),
    })
}

/// The categorical flip candidates derived from the current weights: the
/// all-argmax assignment (pushes predictions up), the all-argmin assignment
/// (pushes them down), and the chosen one given the numeric features and
/// the sample's fixed response. Ties inside a feature go to the lowest
/// category index; an up/down score tie prefers up.
fn flip_candidates(
    params: &RegressionParams,
    num_row: &[f64],
    target: f64,
) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
    let mut up = Vec::with_capacity(params.w_cat.len());
    let mut down = Vec::with_capacity(params.w_cat.len());
    let mut sum_up = 0.0;
    let mut sum_down = 0.0;
    for block in &params.w_cat {
        let mut zmax = 0;
        let mut zmin = 0;
        for z in 1..block.len() {
            if block[z] > block[zmax] {
                zmax = z;
            }
            if block[z] < block[zmin] {
                zmin = z;
            }
        }
        sum_up += block[zmax];
        sum_down += block[zmin];
        up.push(zmax);
        down.push(zmin);
    }
    let base: f64 = params.c
        + params
            .w_num
            .iter()
            .zip(num_row)
            .map(|(w, x)| w * x)
            .sum::<f64>();
    let e_up = (target - (base + sum_up)).abs();
    let e_down = (target - (base + sum_down)).abs();
    let chosen = if e_up >= e_down { up.clone() } else { down.clone() };
    (chosen, up, down)
}

/// Greedy categorical flip of one poison sample: move every categorical
/// feature to the argmax (or argmin) weight category, whichever prediction
/// error is larger, refit, and keep the flip only if the leader MSE
/// strictly improves. Returns whether the state changed.
pub fn flip_sample(state: &mut AttackState, k: usize) -> Result<bool> {
    let t = state.train().schema().num_categorical();
    if t == 0 {
        return Ok(false);
    }
    if k >= state.poison().n_samples() {
        return Err(Error::Argument(format!(
            "poison sample index {k} out of range"
        )));
    }
    let m = state.train().schema().num_numerical();
    let num_row: Vec<f64> = (0..m).map(|j| state.poison().num()[(k, j)]).collect();
    let target = state.poison().y()[k];
    let (chosen, _, _) = flip_candidates(state.params()?, &num_row, target);

    let current: Vec<usize> = (0..t).map(|j| state.poison().cat(k, j)).collect();
    if chosen == current {
        return Ok(false);
    }

    let before = state.leader_objective()?;
    let snap = state.snapshot();
    for (j, &z) in chosen.iter().enumerate() {
        state.set_cat(k, j, z);
    }
    state.refit()?;
    if state.leader_objective()? > before {
        Ok(true)
    } else {
        state.restore(snap);
        Ok(false)
    }
}

/// Iterative flipping of categorical features: a numeric-only SAS phase,
/// then per epoch a flip sweep over all poison samples followed by another
/// SAS pass, stopping early when an epoch changes nothing.
///
/// With no categorical features this is exactly [`run_sas`].
pub fn run_ifcf(
    train: &Arc<Dataset>,
    poison: PoisonSet,
    lambda: f64,
    config: &StrategyConfig,
) -> Result<AttackOutcome> {
    if train.schema().num_categorical() == 0 {
        return run_sas(train, poison, lambda, config);
    }
    if config.epochs == 0 {
        return Err(Error::Argument("ifcf needs at least one epoch".into()));
    }
    let q = poison.n_samples();
    let batches = partition_batches(q, config.batch_fraction)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut state = AttackState::new(Arc::clone(train), poison, lambda)?;
    let mut trajectory = vec![state.leader_objective()?];
    let mut accepted_events = 0;

    // phase 1: optimize numeric features with categoricals fixed
    if sas_pass(&mut state, &batches, &config.optimizer, &mut rng)? {
        accepted_events += 1;
        trajectory.push(state.leader_objective()?);
    }
    let sas_phase_objective = state.leader_objective()?;

    for _ in 0..config.epochs {
        let mut epoch_changed = false;
        for k in 0..q {
            if flip_sample(&mut state, k)? {
                accepted_events += 1;
                epoch_changed = true;
                trajectory.push(state.leader_objective()?);
            }
        }
        if sas_pass(&mut state, &batches, &config.optimizer, &mut rng)? {
            accepted_events += 1;
            epoch_changed = true;
            trajectory.push(state.leader_objective()?);
        }
        if !epoch_changed {
            break;
        }
    }

    Ok(AttackOutcome {
        objective: state.leader_objective()?,
        params: state.params()?.clone(),
        trajectory,
        accepted_events,
        stage_objectives: Vec::new(),
        sas_phase_objective: Some(sas_phase_objective),
        poison: state.into_poison(),
    })
}
