//! Leader objective and its gradient through the exact follower response.
//!
//! The attacker's objective is the mean squared error of the fitted model
//! on the unpoisoned training rows. The fitted parameters θ*(x) are the
//! unique solution of the stationarity system, so the objective is a smooth
//! implicit function of the continuous poison features and its gradient
//! comes from one adjoint solve with the same SPD matrix used by the fit:
//!
//! ```text
//! ∇θF = (2/n) X̃⁰ᵀ(X̃⁰θ − y⁰)          (leader sensitivity to θ)
//! A ã = ∇θF                            (adjoint solve, A = X̃ᵀX̃ + NλĨ)
//! ∂F/∂x_kv = −( θ_v · (ã·x̃_ρ) + r_ρ · ã_v ),   ρ = n + k,  r_ρ = x̃_ρ·θ − y_ρ
//! ```
//!
//! The trilinear coupling (poison features multiply weights which multiply
//! poison features again) is differentiated directly; no linearization.

use std::sync::Arc;

use nalgebra::DVector;

use crate::dataset::{Dataset, PoisonSet};
use crate::error::{Error, Result};
use crate::ridge::{self, RegressionParams, Stationarity};

/// One attack in progress: the training data, the current poison set, and
/// the follower solution kept in sync with them.
#[derive(Clone, Debug)]
pub struct AttackState {
    train: Arc<Dataset>,
    poison: PoisonSet,
    lambda: f64,
    solved: Stationarity,
    params: RegressionParams,
    leader_mse: f64,
    stale: bool,
}

/// Saved state for exact restore after a rejected move.
#[derive(Clone, Debug)]
pub struct StateSnapshot {
    poison: PoisonSet,
    solved: Stationarity,
    params: RegressionParams,
    leader_mse: f64,
}

impl AttackState {
    /// Fit the follower on (train ∪ poison) and cache the solution.
    pub fn new(train: Arc<Dataset>, poison: PoisonSet, lambda: f64) -> Result<Self> {
        let (solved, params, leader_mse) = Self::solve(&train, &poison, lambda)?;
        Ok(AttackState {
            train,
            poison,
            lambda,
            solved,
            params,
            leader_mse,
            stale: false,
        })
    }

    fn solve(
        train: &Dataset,
        poison: &PoisonSet,
        lambda: f64,
    ) -> Result<(Stationarity, RegressionParams, f64)> {
        let (x, y) = ridge::design_matrix(train, poison)?;
        let xt = ridge::augment_with_intercept(&x);
        let solved = ridge::solve_stationarity(xt, y, lambda)?;
        let params = RegressionParams::from_flat(train.schema(), &solved.theta)?;
        let leader_mse = leader_mse_from_cache(&solved, train.n_samples());
        Ok((solved, params, leader_mse))
    }

    pub fn train(&self) -> &Arc<Dataset> {
        &self.train
    }

    pub fn poison(&self) -> &PoisonSet {
        &self.poison
    }

    pub fn into_poison(self) -> PoisonSet {
        self.poison
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    fn ensure_fresh(&self) -> Result<()> {
        if self.stale {
            return Err(Error::StaleState(
                "poison set was mutated; call refit() before reading the state".into(),
            ));
        }
        Ok(())
    }

    /// Current follower solution θ*.
    pub fn params(&self) -> Result<&RegressionParams> {
        self.ensure_fresh()?;
        Ok(&self.params)
    }

    /// Leader objective: MSE of θ* on the unpoisoned training rows.
    pub fn leader_objective(&self) -> Result<f64> {
        self.ensure_fresh()?;
        Ok(self.leader_mse)
    }

    /// Max-norm stationarity residual of the cached solution.
    pub fn kkt_residual(&self) -> Result<f64> {
        self.ensure_fresh()?;
        ridge::kkt_residual(&self.params, &self.train, &self.poison, self.lambda)
    }

    /// Mutate one continuous poison feature; the state becomes stale until
    /// the next [`AttackState::refit`].
    pub fn set_num(&mut self, k: usize, j: usize, value: f64) {
        self.poison.set_num(k, j, value);
        self.stale = true;
    }

    /// Mutate one categorical assignment; the state becomes stale.
    pub fn set_cat(&mut self, k: usize, j: usize, category: usize) {
        self.poison.set_cat(k, j, category);
        self.stale = true;
    }

    /// Re-solve the follower for the current poison set.
    pub fn refit(&mut self) -> Result<()> {
        let (solved, params, leader_mse) = Self::solve(&self.train, &self.poison, self.lambda)?;
        self.solved = solved;
        self.params = params;
        self.leader_mse = leader_mse;
        self.stale = false;
        Ok(())
    }

    /// Gradient of the leader objective with respect to the listed
    /// `(sample, numeric feature)` poison variables, via the adjoint of the
    /// stationarity system.
    pub fn hypergradient(&self, active: &[(usize, usize)]) -> Result<Vec<f64>> {
        self.ensure_fresh()?;
        let n = self.train.n_samples();
        let q = self.poison.n_samples();
        let m = self.train.schema().num_numerical();
        for &(k, v) in active {
            if k >= q || v >= m {
                return Err(Error::Argument(format!(
                    "active variable ({k},{v}) outside poison dimensions {q}x{m}"
                )));
            }
        }

        let xt = &self.solved.xt;
        let theta = &self.solved.theta;
        let y = &self.solved.y;

        // ∇θF over the first n (train) rows only
        let train_block = xt.rows(0, n);
        let r_train = train_block * theta - y.rows(0, n);
        let dfdtheta: DVector<f64> = train_block.tr_mul(&r_train) * (2.0 / n as f64);

        let adjoint = self.solved.factor.solve(&dfdtheta).ok_or_else(|| {
            Error::Numeric("adjoint solve failed on the stationarity factorization".into())
        })?;

        let mut grad = Vec::with_capacity(active.len());
        for &(k, v) in active {
            let row = xt.row(n + k);
            let residual = row.dot(&theta.transpose()) - y[n + k];
            let dot = row.dot(&adjoint.transpose());
            grad.push(-(theta[v] * dot + residual * adjoint[v]));
        }
        Ok(grad)
    }

    /// Clone the mutable parts for a later exact restore.
    pub fn snapshot(&self) -> StateSnapshot {
        StateSnapshot {
            poison: self.poison.clone(),
            solved: self.solved.clone(),
            params: self.params.clone(),
            leader_mse: self.leader_mse,
        }
    }

    /// Restore a snapshot taken on this state.
    pub fn restore(&mut self, snap: StateSnapshot) {
        self.poison = snap.poison;
        self.solved = snap.solved;
        self.params = snap.params;
        self.leader_mse = snap.leader_mse;
        self.stale = false;
    }
}

fn leader_mse_from_cache(solved: &Stationarity, n: usize) -> f64 {
    let train_block = solved.xt.rows(0, n);
    let r = train_block * &solved.theta - solved.y.rows(0, n);
    r.norm_squared() / n as f64
}

/// Central finite-difference gradient of the leader objective, refitting
/// exactly at each probe. The independent check for [`AttackState::hypergradient`].
pub fn finite_difference_gradient(
    train: &Arc<Dataset>,
    poison: &PoisonSet,
    lambda: f64,
    active: &[(usize, usize)],
    h: f64,
) -> Result<Vec<f64>> {
    let mut grad = Vec::with_capacity(active.len());
    for &(k, v) in active {
        let x0 = poison.num()[(k, v)];
        // keep probes inside [0,1]; shift the stencil at the box edge
        let (lo, hi) = if x0 - h < 0.0 {
            (x0, x0 + 2.0 * h)
        } else if x0 + h > 1.0 {
            (x0 - 2.0 * h, x0)
        } else {
            (x0 - h, x0 + h)
        };
        let probe = |x: f64| -> Result<f64> {
            let mut p = poison.clone();
            p.set_num(k, v, x);
            let state = AttackState::new(Arc::clone(train), p, lambda)?;
            state.leader_objective()
        };
        let f_hi = probe(hi)?;
        let f_lo = probe(lo)?;
        grad.push((f_hi - f_lo) / (hi - lo));
    }
    Ok(grad)
}
