//! Exact lower-level solver: ridge regression on (train ∪ poison) data.
//!
//! The follower minimizes
//!
//! ```text
//! (1/(n+q)) * Σ (f(x_i, B_i, θ) − y_i)²  +  λ‖w‖₂²
//! ```
//!
//! with an unregularized intercept. The minimizer is found by solving the
//! full stationarity system directly: with X̃ the design matrix augmented by
//! an intercept column and Ĩ the identity with a zero in the intercept slot,
//!
//! ```text
//! (X̃ᵀX̃ + (n+q)·λ·Ĩ) θ = X̃ᵀ y
//! ```
//!
//! which is symmetric positive definite for λ > 0. The gradient of the
//! objective at θ is (2/(n+q))·(X̃ᵀX̃θ + (n+q)λĨθ − X̃ᵀy); its max-norm is
//! the KKT residual reported by [`kkt_residual`].

use nalgebra::linalg::{Cholesky, LU};
use nalgebra::{DMatrix, DVector, Dyn};

use crate::dataset::{Dataset, PoisonSet};
use crate::error::{Error, Result};
use crate::schema::FeatureSchema;

/// Residual tolerance guaranteed by [`fit`], in max-norm of the gradient.
pub const FIT_TOLERANCE: f64 = 1e-8;

/// Lower-level solution θ = (w_num, {w_cat_j}, c).
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionParams {
    pub w_num: DVector<f64>,
    pub w_cat: Vec<DVector<f64>>,
    pub c: f64,
}

impl RegressionParams {
    /// Rebuild from a flat stationarity-system solution (weights then intercept).
    pub fn from_flat(schema: &FeatureSchema, theta: &DVector<f64>) -> Result<Self> {
        let d = schema.design_width();
        if theta.len() != d + 1 {
            return Err(Error::Argument(format!(
                "flat parameter vector has {} entries, expected {}",
                theta.len(),
                d + 1
            )));
        }
        let m = schema.num_numerical();
        let w_num = DVector::from_fn(m, |i, _| theta[i]);
        let mut w_cat = Vec::with_capacity(schema.num_categorical());
        for j in 0..schema.num_categorical() {
            let off = schema.cat_block_offset(j);
            let nj = schema.cardinality(j);
            w_cat.push(DVector::from_fn(nj, |z, _| theta[off + z]));
        }
        Ok(RegressionParams {
            w_num,
            w_cat,
            c: theta[d],
        })
    }

    /// Flatten back to (weights..., intercept).
    pub fn to_flat(&self) -> DVector<f64> {
        let d: usize = self.w_num.len() + self.w_cat.iter().map(|v| v.len()).sum::<usize>();
        let mut theta = DVector::zeros(d + 1);
        let mut k = 0;
        for &v in self.w_num.iter() {
            theta[k] = v;
            k += 1;
        }
        for block in &self.w_cat {
            for &v in block.iter() {
                theta[k] = v;
                k += 1;
            }
        }
        theta[d] = self.c;
        theta
    }

    /// Total parameter dimension m + Σ n(j) + 1.
    pub fn dim(&self) -> usize {
        self.w_num.len() + self.w_cat.iter().map(|v| v.len()).sum::<usize>() + 1
    }

    /// Linear prediction wⁿᵀx + Σⱼ wᶜⱼ[zⱼ] + c for a sample given its
    /// numeric features and per-feature category indices.
    pub fn predict(&self, num: &[f64], cat: &[usize]) -> f64 {
        debug_assert_eq!(num.len(), self.w_num.len());
        debug_assert_eq!(cat.len(), self.w_cat.len());
        let mut acc = self.c;
        for (w, x) in self.w_num.iter().zip(num) {
            acc += w * x;
        }
        for (block, &z) in self.w_cat.iter().zip(cat) {
            acc += block[z];
        }
        acc
    }

    /// Prediction for row `i` of a dataset.
    pub fn predict_row(&self, ds: &Dataset, i: usize) -> f64 {
        let t = ds.schema().num_categorical();
        let mut acc = self.c;
        for (j, w) in self.w_num.iter().enumerate() {
            acc += w * ds.num()[(i, j)];
        }
        for j in 0..t {
            acc += self.w_cat[j][ds.cat(i, j)];
        }
        acc
    }

    /// Largest absolute weight (numeric or categorical), for bound checks.
    pub fn max_abs_weight(&self) -> f64 {
        let num = self.w_num.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        self.w_cat
            .iter()
            .flat_map(|b| b.iter())
            .fold(num, |a, v| a.max(v.abs()))
    }
}

/// Materialize the stacked design matrix (train rows then poison rows) and
/// the matching response vector. Columns: numerical features in schema
/// order, then each categorical block in schema order. No intercept column.
pub fn design_matrix(train: &Dataset, poison: &PoisonSet) -> Result<(DMatrix<f64>, DVector<f64>)> {
    if train.schema().as_ref() != poison.schema().as_ref() {
        return Err(Error::Argument(
            "train and poison sets have different schemas".into(),
        ));
    }
    let schema = train.schema();
    let n = train.n_samples();
    let q = poison.n_samples();
    let m = schema.num_numerical();
    let t = schema.num_categorical();
    let d = schema.design_width();

    let mut x = DMatrix::zeros(n + q, d);
    let mut y = DVector::zeros(n + q);
    for i in 0..n {
        for j in 0..m {
            x[(i, j)] = train.num()[(i, j)];
        }
        for j in 0..t {
            x[(i, schema.cat_block_offset(j) + train.cat(i, j))] = 1.0;
        }
        y[i] = train.y()[i];
    }
    for k in 0..q {
        let r = n + k;
        for j in 0..m {
            x[(r, j)] = poison.num()[(k, j)];
        }
        for j in 0..t {
            x[(r, schema.cat_block_offset(j) + poison.cat(k, j))] = 1.0;
        }
        y[r] = poison.y()[k];
    }
    Ok((x, y))
}

/// Append the intercept column of ones.
pub(crate) fn augment_with_intercept(x: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, d) = x.shape();
    let mut xt = DMatrix::zeros(n, d + 1);
    xt.view_mut((0, 0), (n, d)).copy_from(x);
    xt.column_mut(d).fill(1.0);
    xt
}

/// Reusable factorization of the stationarity matrix.
#[derive(Clone, Debug)]
pub(crate) enum Factor {
    Chol(Cholesky<f64, Dyn>),
    Lu(LU<f64, Dyn, Dyn>),
}

impl Factor {
    pub(crate) fn solve(&self, b: &DVector<f64>) -> Option<DVector<f64>> {
        match self {
            Factor::Chol(chol) => Some(chol.solve(b)),
            Factor::Lu(lu) => lu.solve(b),
        }
    }
}

/// Solution of the stationarity system plus everything needed to reuse it.
#[derive(Clone, Debug)]
pub(crate) struct Stationarity {
    /// Design matrix with intercept column, (n+q) x (d+1).
    pub xt: DMatrix<f64>,
    pub y: DVector<f64>,
    pub factor: Factor,
    pub theta: DVector<f64>,
}

pub(crate) fn solve_stationarity(
    xt: DMatrix<f64>,
    y: DVector<f64>,
    lambda: f64,
) -> Result<Stationarity> {
    let n_total = xt.nrows();
    if n_total == 0 {
        return Err(Error::Argument("cannot fit on zero samples".into()));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::Argument(format!(
            "lambda must be a finite nonnegative real, got {lambda}"
        )));
    }
    let d1 = xt.ncols();
    let mut a = xt.tr_mul(&xt);
    let ridge_term = n_total as f64 * lambda;
    for i in 0..d1 - 1 {
        a[(i, i)] += ridge_term; // Ĩ leaves the intercept unregularized
    }
    let b: DVector<f64> = xt.tr_mul(&y);

    let factor = if lambda > 0.0 {
        match Cholesky::new(a.clone()) {
            Some(chol) => Factor::Chol(chol),
            None => Factor::Lu(a.clone().lu()),
        }
    } else {
        Factor::Lu(a.clone().lu())
    };
    let mut theta = factor.solve(&b).ok_or_else(|| {
        Error::RankDeficient(
            "stationarity system is singular; with lambda = 0 the design must have full column rank"
                .into(),
        )
    })?;

    // Iterative refinement: push the gradient residual to FIT_TOLERANCE.
    let scale = 2.0 / n_total as f64;
    for _ in 0..3 {
        let r = &b - &a * &theta;
        if scale * r.amax() <= FIT_TOLERANCE * 0.5 {
            break;
        }
        if let Some(delta) = factor.solve(&r) {
            theta += delta;
        } else {
            break;
        }
    }

    if theta.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("fit produced non-finite parameters".into()));
    }
    let residual = scale * (&b - &a * &theta).amax();
    if residual > FIT_TOLERANCE {
        if lambda == 0.0 {
            return Err(Error::RankDeficient(format!(
                "stationarity residual {residual:.3e} exceeds {FIT_TOLERANCE:.0e}; the lambda = 0 system is rank-deficient"
            )));
        }
        return Err(Error::Numeric(format!(
            "stationarity residual {residual:.3e} exceeds {FIT_TOLERANCE:.0e}"
        )));
    }
    Ok(Stationarity {
        xt,
        y,
        factor,
        theta,
    })
}

/// Fit ridge regression on (train ∪ poison) by solving the stationarity
/// system exactly. Guarantees `kkt_residual(result) <= FIT_TOLERANCE`.
pub fn fit(train: &Dataset, poison: &PoisonSet, lambda: f64) -> Result<RegressionParams> {
    let (x, y) = design_matrix(train, poison)?;
    let xt = augment_with_intercept(&x);
    let solved = solve_stationarity(xt, y, lambda)?;
    RegressionParams::from_flat(train.schema(), &solved.theta)
}

/// Max-norm of the stationarity expressions (one per numerical weight, one
/// per categorical weight, one for the intercept) evaluated at `params`.
pub fn kkt_residual(
    params: &RegressionParams,
    train: &Dataset,
    poison: &PoisonSet,
    lambda: f64,
) -> Result<f64> {
    let (x, y) = design_matrix(train, poison)?;
    let xt = augment_with_intercept(&x);
    let theta = params.to_flat();
    if theta.len() != xt.ncols() {
        return Err(Error::Argument(format!(
            "parameter dimension {} does not match design width {}",
            theta.len(),
            xt.ncols()
        )));
    }
    let n_total = xt.nrows() as f64;
    let residuals = &xt * &theta - &y;
    let mut grad: DVector<f64> = xt.tr_mul(&residuals) * (2.0 / n_total);
    for i in 0..theta.len() - 1 {
        grad[i] += 2.0 * lambda * theta[i];
    }
    Ok(grad.amax())
}

/// Value of the lower-level objective at `params`.
pub fn lower_objective(
    params: &RegressionParams,
    train: &Dataset,
    poison: &PoisonSet,
    lambda: f64,
) -> Result<f64> {
    let (x, y) = design_matrix(train, poison)?;
    let xt = augment_with_intercept(&x);
    let theta = params.to_flat();
    let n_total = xt.nrows() as f64;
    let residuals = &xt * &theta - &y;
    let weight_sq: f64 = theta.iter().take(theta.len() - 1).map(|w| w * w).sum();
    Ok(residuals.norm_squared() / n_total + lambda * weight_sq)
}

/// Mean squared error of `params` over a dataset.
pub fn mse(params: &RegressionParams, dataset: &Dataset) -> Result<f64> {
    let n = dataset.n_samples();
    if n == 0 {
        return Err(Error::Argument("mse of an empty dataset".into()));
    }
    let mut acc = 0.0;
    for i in 0..n {
        let r = params.predict_row(dataset, i) - dataset.y()[i];
        acc += r * r;
    }
    Ok(acc / n as f64)
}

/// Default λ grid: 10⁻³..10 log-spaced, three points per decade.
pub fn lambda_grid_default() -> Vec<f64> {
    (0..=12).map(|i| 10f64.powf(-3.0 + i as f64 / 3.0)).collect()
}

/// Grid-search λ with seeded k-fold cross-validation on unpoisoned data.
///
/// Folds are contiguous blocks of a seeded shuffle. Returns the grid value
/// minimizing mean validation MSE, ties broken toward larger λ.
pub fn cv_lambda(train: &Dataset, grid: &[f64], folds: usize, seed: u64) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::Argument("empty lambda grid".into()));
    }
    if folds < 2 {
        return Err(Error::Argument(format!(
            "cross-validation needs at least 2 folds, got {folds}"
        )));
    }
    let n = train.n_samples();
    if n < folds {
        return Err(Error::Argument(format!(
            "cannot split {n} samples into {folds} folds"
        )));
    }

    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);

    let bounds: Vec<usize> = (0..=folds).map(|f| f * n / folds).collect();
    let empty = PoisonSet::empty(std::sync::Arc::clone(train.schema()));

    let mut best: Option<(f64, f64)> = None; // (lambda, mean mse)
    for &lambda in grid {
        let mut total = 0.0;
        for f in 0..folds {
            let hold: Vec<usize> = indices[bounds[f]..bounds[f + 1]].to_vec();
            let keep: Vec<usize> = indices[..bounds[f]]
                .iter()
                .chain(&indices[bounds[f + 1]..])
                .copied()
                .collect();
            let params = fit(&train.subset(&keep), &empty, lambda)?;
            total += mse(&params, &train.subset(&hold))?;
        }
        let mean = total / folds as f64;
        best = match best {
            None => Some((lambda, mean)),
            Some((bl, bm)) if mean < bm || (mean == bm && lambda > bl) => Some((lambda, mean)),
            keep => keep,
        };
    }
    Ok(best.expect("grid is nonempty").0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::CategoricalSpec;
    use crate::testkit;
    use nalgebra::DMatrix;
    use std::sync::Arc;

    fn schema_2num_1cat() -> Arc<FeatureSchema> {
        Arc::new(
            FeatureSchema::new(
                vec!["a".into(), "b".into()],
                vec![CategoricalSpec {
                    name: "c".into(),
                    labels: vec!["u".into(), "v".into(), "w".into()],
                }],
                "y".into(),
            )
            .unwrap(),
        )
    }

    fn toy_dataset() -> Dataset {
        let schema = schema_2num_1cat();
        let num = DMatrix::from_row_slice(2, 2, &[0.1, 0.9, 0.4, 0.2]);
        Dataset::new(
            schema,
            num,
            vec![0, 2],
            nalgebra::DVector::from_vec(vec![0.3, 0.8]),
        )
        .unwrap()
    }

    fn toy_poison(train: &Dataset) -> PoisonSet {
        crate::dataset::init_poison(train, 0.5, 1).unwrap()
    }

    #[test]
    fn design_matrix_dimensions() {
        // n=2, q=1, m=2, one categorical n(1)=3 -> 3x5
        let train = toy_dataset();
        let poison = toy_poison(&train);
        assert_eq!(poison.n_samples(), 1);
        let (x, y) = design_matrix(&train, &poison).unwrap();
        assert_eq!(x.shape(), (3, 5));
        assert_eq!(y.len(), 3);
        // each categorical block row sums to exactly 1
        for i in 0..3 {
            let s: f64 = (2..5).map(|j| x[(i, j)]).sum();
            assert_eq!(s, 1.0);
        }
    }

    #[test]
    fn design_matrix_empty_poison_is_train_design() {
        let train = toy_dataset();
        let empty = PoisonSet::empty(Arc::clone(train.schema()));
        let (x, y) = design_matrix(&train, &empty).unwrap();
        assert_eq!(x.nrows(), train.n_samples());
        assert_eq!(y.len(), 2);
        assert_eq!(x[(0, 0)], 0.1);
    }

    #[test]
    fn design_matrix_deterministic() {
        let train = toy_dataset();
        let poison = toy_poison(&train);
        let (x1, y1) = design_matrix(&train, &poison).unwrap();
        let (x2, y2) = design_matrix(&train, &poison).unwrap();
        assert_eq!(x1, x2);
        assert_eq!(y1, y2);
    }

    #[test]
    fn huge_lambda_crushes_weights() {
        let (train, poison) = testkit::random_instance(11, 20, 3, 2, 2);
        let params = fit(&train, &poison, 1e6).unwrap();
        assert!(params.max_abs_weight() <= 1e-3);
        let (_, y) = design_matrix(&train, &poison).unwrap();
        assert!((params.c - y.mean()).abs() <= 1e-3);
    }

    #[test]
    fn exact_interpolation_with_zero_lambda() {
        // y = 0.5 * x1, no categoricals, lambda = 0
        let schema = Arc::new(
            FeatureSchema::new(vec!["x1".into()], vec![], "y".into()).unwrap(),
        );
        let xs = [0.0, 0.25, 0.5, 0.75, 1.0];
        let num = DMatrix::from_fn(5, 1, |i, _| xs[i]);
        let y = nalgebra::DVector::from_fn(5, |i, _| 0.5 * xs[i]);
        let train = Dataset::new(Arc::clone(&schema), num, vec![], y).unwrap();
        let empty = PoisonSet::empty(schema);
        let params = fit(&train, &empty, 0.0).unwrap();
        assert!((params.w_num[0] - 0.5).abs() < 1e-10);
        assert!(params.c.abs() < 1e-10);
        assert!(mse(&params, &train).unwrap() < 1e-18);
    }

    #[test]
    fn zero_lambda_with_one_hot_block_is_rank_deficient() {
        // a complete one-hot block plus the intercept column is collinear
        let train = toy_dataset();
        let empty = PoisonSet::empty(Arc::clone(train.schema()));
        match fit(&train, &empty, 0.0) {
            Err(Error::RankDeficient(_)) => {}
            other => panic!("expected rank-deficiency error, got {other:?}"),
        }
    }

    #[test]
    fn fit_matches_normal_equations_oracle() {
        // random 20-sample instance, lambda = 0.1, agreement to 1e-8
        let (train, poison) = testkit::random_instance(77, 20, 3, 2, 3);
        let params = fit(&train, &poison, 0.1).unwrap();
        let oracle = testkit::normal_equations_fit(&train, &poison, 0.1);
        let flat = params.to_flat();
        assert_eq!(flat.len(), oracle.len());
        for i in 0..flat.len() {
            assert!(
                (flat[i] - oracle[i]).abs() <= 1e-8,
                "component {i}: {} vs {}",
                flat[i],
                oracle[i]
            );
        }
    }

    #[test]
    fn kkt_residual_of_fit_is_tiny() {
        let (train, poison) = testkit::random_instance(5, 30, 4, 2, 3);
        for lambda in [0.01, 0.1, 1.0] {
            let params = fit(&train, &poison, lambda).unwrap();
            assert!(kkt_residual(&params, &train, &poison, lambda).unwrap() <= FIT_TOLERANCE);
        }
    }

    #[test]
    fn perturbed_intercept_moves_residual_by_point_two() {
        let (train, poison) = testkit::random_instance(6, 25, 3, 1, 3);
        let mut params = fit(&train, &poison, 0.1).unwrap();
        params.c += 0.1;
        // the intercept stationarity expression is linear in c with slope 2
        let r = kkt_residual(&params, &train, &poison, 0.1).unwrap();
        assert!(r >= 0.2 - 1e-6, "residual {r}");
    }

    #[test]
    fn residual_at_zero_params_is_scaled_gram_of_y() {
        // hand evaluation on a 2-sample, 1-numeric instance:
        // rows x = [0.5], [1.0]; y = [0.2, 0.6]; no categoricals
        let schema = Arc::new(
            FeatureSchema::new(vec!["x".into()], vec![], "y".into()).unwrap(),
        );
        let num = DMatrix::from_column_slice(2, 1, &[0.5, 1.0]);
        let y = nalgebra::DVector::from_vec(vec![0.2, 0.6]);
        let train = Dataset::new(Arc::clone(&schema), num, vec![], y).unwrap();
        let empty = PoisonSet::empty(schema);
        let zero = RegressionParams {
            w_num: nalgebra::DVector::zeros(1),
            w_cat: vec![],
            c: 0.0,
        };
        // gradient at zero = -(2/2) X̃ᵀ y:
        //   weight row: -(0.5*0.2 + 1.0*0.6) = -0.7
        //   intercept : -(0.2 + 0.6)         = -0.8
        let r = kkt_residual(&zero, &train, &empty, 0.3).unwrap();
        assert!((r - 0.8).abs() < 1e-12, "residual {r}");
    }

    #[test]
    fn predict_constant_model() {
        let params = RegressionParams {
            w_num: nalgebra::DVector::zeros(2),
            w_cat: vec![nalgebra::DVector::zeros(3)],
            c: 0.4,
        };
        assert_eq!(params.predict(&[0.9, 0.1], &[2]), 0.4);
    }

    #[test]
    fn predict_selects_active_category_weight() {
        let params = RegressionParams {
            w_num: nalgebra::DVector::from_vec(vec![0.5]),
            w_cat: vec![nalgebra::DVector::from_vec(vec![10.0, 20.0, 30.0])],
            c: 1.0,
        };
        assert_eq!(params.predict(&[0.0], &[1]), 21.0);
    }

    #[test]
    fn predict_arithmetic() {
        let params = RegressionParams {
            w_num: nalgebra::DVector::from_vec(vec![2.0]),
            w_cat: vec![],
            c: 0.1,
        };
        assert!((params.predict(&[0.25], &[]) - 0.6).abs() < 1e-15);
    }

    #[test]
    fn mse_zero_when_exact_and_one_when_off_by_one() {
        let schema = Arc::new(
            FeatureSchema::new(vec![], vec![], "y".into()).unwrap(),
        );
        let y = nalgebra::DVector::from_element(4, 1.0);
        let ds = Dataset::new(schema, DMatrix::zeros(4, 0), vec![], y).unwrap();
        let exact = RegressionParams {
            w_num: nalgebra::DVector::zeros(0),
            w_cat: vec![],
            c: 1.0,
        };
        assert_eq!(mse(&exact, &ds).unwrap(), 0.0);
        let zero = RegressionParams { c: 0.0, ..exact };
        assert_eq!(mse(&zero, &ds).unwrap(), 1.0);
    }

    #[test]
    fn mse_is_sample_order_invariant() {
        let (train, _) = testkit::random_instance(9, 17, 2, 2, 0);
        let params = fit(&train, &PoisonSet::empty(Arc::clone(train.schema())), 0.5).unwrap();
        let a = mse(&params, &train).unwrap();
        let perm: Vec<usize> = (0..train.n_samples()).rev().collect();
        let b = mse(&params, &train.subset(&perm)).unwrap();
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn mse_empty_dataset_errors() {
        let schema = Arc::new(FeatureSchema::new(vec![], vec![], "y".into()).unwrap());
        let ds = Dataset::new(
            Arc::clone(&schema),
            DMatrix::zeros(0, 0),
            vec![],
            nalgebra::DVector::zeros(0),
        )
        .unwrap();
        let params = RegressionParams {
            w_num: nalgebra::DVector::zeros(0),
            w_cat: vec![],
            c: 0.0,
        };
        assert!(matches!(mse(&params, &ds), Err(Error::Argument(_))));
    }

    #[test]
    fn fit_is_exact_minimizer_under_perturbation() {
        use rand::Rng;
        use rand::SeedableRng;
        let (train, poison) = testkit::random_instance(21, 30, 3, 2, 3);
        let lambda = 0.1;
        let params = fit(&train, &poison, lambda).unwrap();
        let base = lower_objective(&params, &train, &poison, lambda).unwrap();
        let dim = params.dim();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for _ in 0..100 {
            let mut delta = nalgebra::DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0));
            delta *= 1e-3 / delta.norm();
            let flat = params.to_flat() + delta;
            let perturbed = RegressionParams::from_flat(train.schema(), &flat).unwrap();
            let val = lower_objective(&perturbed, &train, &poison, lambda).unwrap();
            assert!(val >= base - 1e-15, "perturbation decreased objective");
        }
    }

    #[test]
    fn cv_single_grid_returns_it() {
        let (train, _) = testkit::random_instance(3, 24, 2, 1, 0);
        assert_eq!(cv_lambda(&train, &[0.7], 4, 0).unwrap(), 0.7);
    }

    #[test]
    fn cv_noiseless_linear_selects_smallest_lambda() {
        // exactly linear data: less regularization always fits validation
        // folds better, so the smallest grid value wins
        let schema = Arc::new(
            FeatureSchema::new(vec!["x".into()], vec![], "y".into()).unwrap(),
        );
        let n = 24;
        let num = DMatrix::from_fn(n, 1, |i, _| i as f64 / (n - 1) as f64);
        let y = nalgebra::DVector::from_fn(n, |i, _| 0.25 + 0.5 * (i as f64 / (n - 1) as f64));
        let train = Dataset::new(schema, num, vec![], y).unwrap();
        let grid = [1e-4, 1e-2, 1.0];
        let chosen = cv_lambda(&train, &grid, 4, 11).unwrap();
        // independent check: fold CV loop using the normal-equations oracle
        let oracle_choice = testkit::cv_lambda_oracle(&train, &grid, 4, 11);
        assert_eq!(chosen, oracle_choice);
        assert_eq!(chosen, 1e-4);
    }

    #[test]
    fn cv_deterministic() {
        let (train, _) = testkit::random_instance(8, 30, 3, 1, 0);
        let grid = lambda_grid_default();
        let a = cv_lambda(&train, &grid, 10, 5).unwrap();
        let b = cv_lambda(&train, &grid, 10, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cv_empty_grid_errors() {
        let (train, _) = testkit::random_instance(8, 30, 3, 1, 0);
        assert!(matches!(
            cv_lambda(&train, &[], 5, 0),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn lambda_grid_spans_paper_sweep() {
        let grid = lambda_grid_default();
        assert_eq!(grid.len(), 13);
        assert!((grid[0] - 1e-3).abs() < 1e-12);
        assert!((grid[12] - 10.0).abs() < 1e-9);
        // the five sweep values are all on the grid
        for target in [1e-3, 1e-2, 1e-1, 1.0, 10.0] {
            assert!(grid.iter().any(|&g| (g - target).abs() < 1e-9 * target));
        }
    }
}
