//! Independent reference implementations used by the test suites.
//!
//! Everything in this module deliberately avoids the solver paths of the
//! main crate: the normal-equations oracle builds its system with plain
//! nested `Vec`s and Gaussian elimination so it can act as a second opinion
//! on [`crate::ridge::fit`], and the finite-difference helper probes
//! objectives by refitting rather than reusing hypergradient machinery.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::{Dataset, PoisonSet};
use crate::schema::{CategoricalSpec, FeatureSchema};

/// Deterministic sub-stream derivation for a master seed.
pub fn subseed(seed: u64, stream: u64) -> u64 {
    seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Build a random scaled instance: `n` training rows, `m` numeric features,
/// `t` categorical features with cardinalities cycling 2..=4, and `q`
/// feasible poison rows seeded from the training data.
pub fn random_instance(seed: u64, n: usize, m: usize, t: usize, q: usize) -> (Dataset, PoisonSet) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let schema = Arc::new(random_schema(m, t));
    let train = random_dataset(&mut rng, &schema, n);
    let poison = if q == 0 {
        PoisonSet::empty(Arc::clone(&schema))
    } else {
        let rate = q as f64 / n as f64;
        // nudge the rate so rounding lands exactly on q
        let mut p = crate::dataset::init_poison(&train, rate.clamp(1e-9, 1.0), rng.gen()).unwrap();
        assert_eq!(p.n_samples(), q, "rate rounding mismatch");
        randomize_poison_features(&mut rng, &mut p);
        p
    };
    (train, poison)
}

/// Schema with `m` numeric features and `t` categorical features whose
/// cardinalities cycle through 2, 3, 4.
pub fn random_schema(m: usize, t: usize) -> FeatureSchema {
    let numerical = (0..m).map(|j| format!("x{j}")).collect();
    let categorical = (0..t)
        .map(|j| {
            let nj = 2 + (j % 3);
            CategoricalSpec {
                name: format!("c{j}"),
                labels: (0..nj).map(|z| format!("c{j}l{z}")).collect(),
            }
        })
        .collect();
    FeatureSchema::new(numerical, categorical, "y".into()).unwrap()
}

/// Uniform-random dataset respecting all box and SOS-1 invariants.
pub fn random_dataset(rng: &mut ChaCha8Rng, schema: &Arc<FeatureSchema>, n: usize) -> Dataset {
    let m = schema.num_numerical();
    let t = schema.num_categorical();
    let num = DMatrix::from_fn(n, m, |_, _| rng.gen_range(0.0..=1.0));
    let cat: Vec<usize> = (0..n * t)
        .map(|i| rng.gen_range(0..schema.cardinality(i % t)))
        .collect();
    let y = DVector::from_fn(n, |_, _| rng.gen_range(0.0..=1.0));
    Dataset::new(Arc::clone(schema), num, cat, y).unwrap()
}

/// Scramble poison features uniformly over the feasible set (responses and
/// origins untouched).
pub fn randomize_poison_features(rng: &mut ChaCha8Rng, poison: &mut PoisonSet) {
    let schema = Arc::clone(poison.schema());
    for k in 0..poison.n_samples() {
        for j in 0..schema.num_numerical() {
            poison.set_num(k, j, rng.gen_range(0.0..=1.0));
        }
        for j in 0..schema.num_categorical() {
            poison.set_cat(k, j, rng.gen_range(0..schema.cardinality(j)));
        }
    }
}

/// Independent ridge fit: assembles the scaled normal equations
/// `(XᵀX·(2/N) + 2λĨ)θ = (2/N)Xᵀy` (intercept column appended, Ĩ zero on
/// the intercept) with nested `Vec`s and solves by Gaussian elimination
/// with partial pivoting. Returns the flat (weights..., intercept) vector.
pub fn normal_equations_fit(train: &Dataset, poison: &PoisonSet, lambda: f64) -> Vec<f64> {
    let schema = train.schema();
    let m = schema.num_numerical();
    let t = schema.num_categorical();
    let d = schema.design_width() + 1; // + intercept
    let n = train.n_samples();
    let q = poison.n_samples();
    let big_n = n + q;

    // materialize rows independently of ridge::design_matrix
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(big_n);
    let mut ys: Vec<f64> = Vec::with_capacity(big_n);
    for i in 0..n {
        let mut row = vec![0.0; d];
        for j in 0..m {
            row[j] = train.num()[(i, j)];
        }
        for j in 0..t {
            row[schema.cat_block_offset(j) + train.cat(i, j)] = 1.0;
        }
        row[d - 1] = 1.0;
        rows.push(row);
        ys.push(train.y()[i]);
    }
    for k in 0..q {
        let mut row = vec![0.0; d];
        for j in 0..m {
            row[j] = poison.num()[(k, j)];
        }
        for j in 0..t {
            row[schema.cat_block_offset(j) + poison.cat(k, j)] = 1.0;
        }
        row[d - 1] = 1.0;
        rows.push(row);
        ys.push(poison.y()[k]);
    }

    let scale = 2.0 / big_n as f64;
    let mut a = vec![vec![0.0; d]; d];
    let mut b = vec![0.0; d];
    for (row, &yv) in rows.iter().zip(&ys) {
        for i in 0..d {
            if row[i] == 0.0 {
                continue;
            }
            for j in 0..d {
                a[i][j] += scale * row[i] * row[j];
            }
            b[i] += scale * row[i] * yv;
        }
    }
    for i in 0..d - 1 {
        a[i][i] += 2.0 * lambda;
    }
    gaussian_solve(a, b)
}

/// Plain Gaussian elimination with partial pivoting.
pub fn gaussian_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let d = b.len();
    for col in 0..d {
        let pivot = (col..d)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        let diag = a[col][col];
        assert!(diag.abs() > 1e-300, "oracle system is singular");
        for row in col + 1..d {
            let factor = a[row][col] / diag;
            if factor == 0.0 {
                continue;
            }
            for j in col..d {
                a[row][j] -= factor * a[col][j];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; d];
    for row in (0..d).rev() {
        let mut acc = b[row];
        for j in row + 1..d {
            acc -= a[row][j] * x[j];
        }
        x[row] = acc / a[row][row];
    }
    x
}

/// Prediction from a flat oracle parameter vector.
pub fn oracle_predict(schema: &FeatureSchema, theta: &[f64], ds: &Dataset, i: usize) -> f64 {
    let m = schema.num_numerical();
    let mut acc = theta[theta.len() - 1];
    for j in 0..m {
        acc += theta[j] * ds.num()[(i, j)];
    }
    for j in 0..schema.num_categorical() {
        acc += theta[schema.cat_block_offset(j) + ds.cat(i, j)];
    }
    acc
}

/// Cross-validation loop driven entirely by the normal-equations oracle;
/// mirrors the fold layout of [`crate::ridge::cv_lambda`].
pub fn cv_lambda_oracle(train: &Dataset, grid: &[f64], folds: usize, seed: u64) -> f64 {
    use rand::seq::SliceRandom;
    let n = train.n_samples();
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    let bounds: Vec<usize> = (0..=folds).map(|f| f * n / folds).collect();
    let empty = PoisonSet::empty(Arc::clone(train.schema()));

    let mut best: Option<(f64, f64)> = None;
    for &lambda in grid {
        let mut total = 0.0;
        for f in 0..folds {
            let hold: Vec<usize> = indices[bounds[f]..bounds[f + 1]].to_vec();
            let keep: Vec<usize> = indices[..bounds[f]]
                .iter()
                .chain(&indices[bounds[f + 1]..])
                .copied()
                .collect();
            let theta =
                normal_equations_fit(&train.subset(&keep), &empty, lambda);
            let hold_ds = train.subset(&hold);
            let mut acc = 0.0;
            for i in 0..hold_ds.n_samples() {
                let r = oracle_predict(train.schema(), &theta, &hold_ds, i) - hold_ds.y()[i];
                acc += r * r;
            }
            total += acc / hold_ds.n_samples() as f64;
        }
        let mean = total / folds as f64;
        best = match best {
            None => Some((lambda, mean)),
            Some((bl, bm)) if mean < bm || (mean == bm && lambda > bl) => Some((lambda, mean)),
            keep => keep,
        };
    }
    best.unwrap().0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_solver_on_known_system() {
        // 2x + y = 5, x - y = 1  ->  x = 2, y = 1
        let a = vec![vec![2.0, 1.0], vec![1.0, -1.0]];
        let b = vec![5.0, 1.0];
        let x = gaussian_solve(a, b);
        assert!((x[0] - 2.0).abs() < 1e-12);
        assert!((x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn random_instance_respects_invariants() {
        let (train, poison) = random_instance(3, 20, 3, 2, 4);
        assert_eq!(train.n_samples(), 20);
        assert_eq!(poison.n_samples(), 4);
        for k in 0..poison.n_samples() {
            assert!(poison.y()[k] == 0.0 || poison.y()[k] == 1.0);
        }
    }
}
