//! Tabular data ingestion and the poison-set container.
//!
//! Raw CSV rows are parsed against a [`FeatureSchema`], min-max scaled to
//! [0,1] (numerics and response alike), and categorical labels are kept as
//! category indices; the one-hot expansion happens when design matrices are
//! materialized. Storing indices makes the one-per-block (SOS-1) invariant
//! hold by construction.

use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::schema::FeatureSchema;

/// Parsed but not yet scaled rows: numeric cells as reals, categorical
/// cells as label indices into the schema.
#[derive(Debug, Clone)]
pub struct RawTable {
    pub schema: Arc<FeatureSchema>,
    /// Row-major numeric cells, `n_rows * m`.
    pub num: Vec<f64>,
    /// Row-major category indices, `n_rows * t`.
    pub cat: Vec<usize>,
    pub y: Vec<f64>,
}

impl RawTable {
    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    /// Clone out the rows at `indices` (order preserved).
    pub fn subset(&self, indices: &[usize]) -> RawTable {
        let m = self.schema.num_numerical();
        let t = self.schema.num_categorical();
        let mut num = Vec::with_capacity(indices.len() * m);
        let mut cat = Vec::with_capacity(indices.len() * t);
        let mut y = Vec::with_capacity(indices.len());
        for &i in indices {
            num.extend_from_slice(&self.num[i * m..(i + 1) * m]);
            cat.extend_from_slice(&self.cat[i * t..(i + 1) * t]);
            y.push(self.y[i]);
        }
        RawTable {
            schema: Arc::clone(&self.schema),
            num,
            cat,
            y,
        }
    }
}

/// Parse a CSV file against a schema.
///
/// The first row must be a header containing every schema name (extra
/// columns are ignored, which lets subset schemas run against a full file).
pub fn load_csv(path: impl AsRef<Path>, schema: &FeatureSchema) -> Result<RawTable> {
    let file = std::fs::File::open(path.as_ref())?;
    load_csv_reader(file, schema)
}

/// Same as [`load_csv`] but over any reader; used by tests and the fetcher.
pub fn load_csv_reader(reader: impl std::io::Read, schema: &FeatureSchema) -> Result<RawTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let headers = rdr
        .headers()
        .map_err(|e| Error::Schema(format!("cannot read header row: {e}")))?
        .clone();
    let col_of = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("missing column '{name}' in CSV header")))
    };

    let num_cols: Vec<usize> = schema
        .numerical
        .iter()
        .map(|n| col_of(n))
        .collect::<Result<_>>()?;
    let cat_cols: Vec<usize> = schema
        .categorical
        .iter()
        .map(|c| col_of(&c.name))
        .collect::<Result<_>>()?;
    let y_col = col_of(&schema.response)?;

    let m = schema.num_numerical();
    let t = schema.num_categorical();
    let mut num = Vec::new();
    let mut cat = Vec::new();
    let mut y = Vec::new();

    for (row_idx, record) in rdr.records().enumerate() {
        let row = row_idx + 1; // 1-based data row for error messages
        let record = record.map_err(|e| Error::Parse {
            row,
            column: String::new(),
            message: e.to_string(),
        })?;
        let parse_real = |col: usize, name: &str| -> Result<f64> {
            let cell = record.get(col).unwrap_or("");
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row,
                column: name.to_string(),
                message: format!("'{cell}' is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    column: name.to_string(),
                    message: format!("non-finite value '{cell}'"),
                });
            }
            Ok(v)
        };
        for (j, &col) in num_cols.iter().enumerate() {
            num.push(parse_real(col, &schema.numerical[j])?);
        }
        for (j, &col) in cat_cols.iter().enumerate() {
            let cell = record.get(col).unwrap_or("");
            let idx = schema.categorical[j].label_index(cell).ok_or_else(|| {
                Error::Schema(format!(
                    "row {row}: unknown label '{cell}' for categorical feature '{}'",
                    schema.categorical[j].name
                ))
            })?;
            cat.push(idx);
        }
        y.push(parse_real(y_col, &schema.response)?);
    }

    debug_assert_eq!(num.len(), y.len() * m);
    debug_assert_eq!(cat.len(), y.len() * t);
    Ok(RawTable {
        schema: Arc::new(schema.clone()),
        num,
        cat,
        y,
    })
}

/// Per-column min/max gathered from a table, applied as min-max scaling.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ScalingStats {
    /// (min, max) per numerical feature, schema order.
    pub numeric: Vec<(f64, f64)>,
    /// (min, max) of the response.
    pub response: (f64, f64),
}

impl ScalingStats {
    /// Gather stats from a raw table.
    pub fn from_table(table: &RawTable) -> Result<Self> {
        if table.n_rows() == 0 {
            return Err(Error::Argument(
                "cannot compute scaling stats from an empty table".into(),
            ));
        }
        let m = table.schema.num_numerical();
        let mut numeric = vec![(f64::INFINITY, f64::NEG_INFINITY); m];
        for (i, &v) in table.num.iter().enumerate() {
            let j = i % m;
            numeric[j].0 = numeric[j].0.min(v);
            numeric[j].1 = numeric[j].1.max(v);
        }
        let response = table
            .y
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        Ok(ScalingStats { numeric, response })
    }

    fn scale(&self, value: f64, (lo, hi): (f64, f64)) -> (f64, bool) {
        if hi <= lo {
            // Constant column: collapse to 0.0 rather than erroring.
            (0.0, true)
        } else {
            (((value - lo) / (hi - lo)).clamp(0.0, 1.0), false)
        }
    }
}

/// Immutable scaled dataset: numerics in [0,1], categorical indices, y in [0,1].
#[derive(Debug, Clone)]
pub struct Dataset {
    schema: Arc<FeatureSchema>,
    /// `n x m`, entries in [0,1].
    num: DMatrix<f64>,
    /// Row-major category indices, `n * t`.
    cat: Vec<usize>,
    /// Responses in [0,1].
    y: DVector<f64>,
}

impl Dataset {
    /// Construct with invariant checks (box bounds and index ranges).
    pub fn new(
        schema: Arc<FeatureSchema>,
        num: DMatrix<f64>,
        cat: Vec<usize>,
        y: DVector<f64>,
    ) -> Result<Self> {
        let n = y.len();
        if num.nrows() != n || num.ncols() != schema.num_numerical() {
            return Err(Error::Argument(format!(
                "numeric block is {}x{}, expected {}x{}",
                num.nrows(),
                num.ncols(),
                n,
                schema.num_numerical()
            )));
        }
        if cat.len() != n * schema.num_categorical() {
            return Err(Error::Argument("categorical block size mismatch".into()));
        }
        for &v in num.iter() {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Argument(format!(
                    "numeric value {v} outside [0,1]; scale the data first"
                )));
            }
        }
        for &v in y.iter() {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Argument(format!(
                    "response value {v} outside [0,1]; scale the data first"
                )));
            }
        }
        let t = schema.num_categorical();
        for i in 0..n {
            for j in 0..t {
                if cat[i * t + j] >= schema.cardinality(j) {
                    return Err(Error::Argument(format!(
                        "category index {} out of range for feature '{}'",
                        cat[i * t + j],
                        schema.categorical[j].name
                    )));
                }
            }
        }
        Ok(Dataset {
            schema,
            num,
            cat,
            y,
        })
    }

    pub fn schema(&self) -> &Arc<FeatureSchema> {
        &self.schema
    }

    pub fn n_samples(&self) -> usize {
        self.y.len()
    }

    pub fn num(&self) -> &DMatrix<f64> {
        &self.num
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    /// Category index of sample `i`, categorical feature `j`.
    pub fn cat(&self, i: usize, j: usize) -> usize {
        self.cat[i * self.schema.num_categorical() + j]
    }

    /// Clone out the rows at `indices` (order preserved).
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let m = self.schema.num_numerical();
        let t = self.schema.num_categorical();
        let mut num = DMatrix::zeros(indices.len(), m);
        let mut cat = Vec::with_capacity(indices.len() * t);
        let mut y = DVector::zeros(indices.len());
        for (r, &i) in indices.iter().enumerate() {
            for j in 0..m {
                num[(r, j)] = self.num[(i, j)];
            }
            for j in 0..t {
                cat.push(self.cat(i, j));
            }
            y[r] = self.y[i];
        }
        Dataset {
            schema: Arc::clone(&self.schema),
            num,
            cat,
            y,
        }
    }
}

/// Min-max scale and encode a raw table into a [`Dataset`].
///
/// When `stats` is `None` the scaling bounds come from the table itself;
/// pass training stats to scale validation/test tables, in which case
/// out-of-range values are clamped into [0,1]. Constant columns map to 0.0
/// and produce a warning record instead of an error.
pub fn encode_and_scale(
    table: &RawTable,
    stats: Option<&ScalingStats>,
) -> Result<(Dataset, ScalingStats, Vec<String>)> {
    let owned;
    let stats = match stats {
        Some(s) => s,
        None => {
            owned = ScalingStats::from_table(table)?;
            &owned
        }
    };
    let schema = &table.schema;
    let m = schema.num_numerical();
    if stats.numeric.len() != m {
        return Err(Error::Argument(format!(
            "scaling stats cover {} numeric features, schema has {m}",
            stats.numeric.len()
        )));
    }

    let n = table.n_rows();
    let mut warnings = Vec::new();
    let mut constant_seen = vec![false; m + 1];
    let mut num = DMatrix::zeros(n, m);
    for i in 0..n {
        for j in 0..m {
            let (v, constant) = stats.scale(table.num[i * m + j], stats.numeric[j]);
            num[(i, j)] = v;
            if constant && !constant_seen[j] {
                constant_seen[j] = true;
                warnings.push(format!(
                    "numeric feature '{}' is constant; mapped to 0.0",
                    schema.numerical[j]
                ));
            }
        }
    }
    let mut y = DVector::zeros(n);
    for i in 0..n {
        let (v, constant) = stats.scale(table.y[i], stats.response);
        y[i] = v;
        if constant && !constant_seen[m] {
            constant_seen[m] = true;
            warnings.push(format!(
                "response '{}' is constant; mapped to 0.0",
                schema.response
            ));
        }
    }

    let dataset = Dataset::new(Arc::clone(schema), num, table.cat.clone(), y)?;
    Ok((dataset, stats.clone(), warnings))
}

/// Deterministic seeded shuffle split of `0..n` into three disjoint index sets.
pub fn split_indices(
    n: usize,
    sizes: (usize, usize, usize),
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>, Vec<usize>)> {
    let (n_train, n_val, n_test) = sizes;
    let total = n_train + n_val + n_test;
    if total > n {
        return Err(Error::Argument(format!(
            "split sizes {n_train}+{n_val}+{n_test} exceed {n} rows"
        )));
    }
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    let train = indices[..n_train].to_vec();
    let val = indices[n_train..n_train + n_val].to_vec();
    let test = indices[n_train + n_val..total].to_vec();
    Ok((train, val, test))
}

/// Split a dataset into (train, validation, test) by a seeded shuffle.
pub fn split(
    dataset: &Dataset,
    sizes: (usize, usize, usize),
    seed: u64,
) -> Result<(Dataset, Dataset, Dataset)> {
    let (train, val, test) = split_indices(dataset.n_samples(), sizes, seed)?;
    Ok((
        dataset.subset(&train),
        dataset.subset(&val),
        dataset.subset(&test),
    ))
}

/// The attacker's decision variables: q poison samples.
///
/// Numeric features are continuous in [0,1]; categorical features are one
/// category index per feature (the SOS-1 one-hot assignment); responses are
/// fixed at initialization and never change during an attack.
#[derive(Debug, Clone)]
pub struct PoisonSet {
    schema: Arc<FeatureSchema>,
    num: DMatrix<f64>,
    cat: Vec<usize>,
    y: DVector<f64>,
    origin_indices: Vec<usize>,
}

impl PoisonSet {
    /// Assemble a poison set from raw parts, validating box and index
    /// invariants. `init_poison` is the usual entry point; this is for
    /// oracle templates and tests that need unflipped responses.
    pub fn from_parts(
        schema: Arc<FeatureSchema>,
        num: DMatrix<f64>,
        cat: Vec<usize>,
        y: DVector<f64>,
        origin_indices: Vec<usize>,
    ) -> Result<Self> {
        let q = y.len();
        if num.nrows() != q || num.ncols() != schema.num_numerical() {
            return Err(Error::Argument("poison numeric block size mismatch".into()));
        }
        if cat.len() != q * schema.num_categorical() {
            return Err(Error::Argument(
                "poison categorical block size mismatch".into(),
            ));
        }
        if origin_indices.len() != q {
            return Err(Error::Argument("origin index count mismatch".into()));
        }
        if num.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Argument("poison numeric value outside [0,1]".into()));
        }
        if y.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Argument("poison response outside [0,1]".into()));
        }
        let t = schema.num_categorical();
        for k in 0..q {
            for j in 0..t {
                if cat[k * t + j] >= schema.cardinality(j) {
                    return Err(Error::Argument("poison category index out of range".into()));
                }
            }
        }
        Ok(PoisonSet {
            schema,
            num,
            cat,
            y,
            origin_indices,
        })
    }

    /// An empty poison set (used for unpoisoned fits and cross-validation).
    pub fn empty(schema: Arc<FeatureSchema>) -> Self {
        let m = schema.num_numerical();
        PoisonSet {
            schema,
            num: DMatrix::zeros(0, m),
            cat: Vec::new(),
            y: DVector::zeros(0),
            origin_indices: Vec::new(),
        }
    }

    pub fn schema(&self) -> &Arc<FeatureSchema> {
        &self.schema
    }

    pub fn n_samples(&self) -> usize {
        self.y.len()
    }

    pub fn num(&self) -> &DMatrix<f64> {
        &self.num
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn cat(&self, k: usize, j: usize) -> usize {
        self.cat[k * self.schema.num_categorical() + j]
    }

    pub fn origin_indices(&self) -> &[usize] {
        &self.origin_indices
    }

    /// Clone out the poison rows at `indices` (order preserved).
    pub fn subset(&self, indices: &[usize]) -> PoisonSet {
        let m = self.schema.num_numerical();
        let t = self.schema.num_categorical();
        let mut num = DMatrix::zeros(indices.len(), m);
        let mut cat = Vec::with_capacity(indices.len() * t);
        let mut y = DVector::zeros(indices.len());
        let mut origin = Vec::with_capacity(indices.len());
        for (r, &k) in indices.iter().enumerate() {
            for j in 0..m {
                num[(r, j)] = self.num[(k, j)];
            }
            for j in 0..t {
                cat.push(self.cat(k, j));
            }
            y[r] = self.y[k];
            origin.push(self.origin_indices[k]);
        }
        PoisonSet {
            schema: Arc::clone(&self.schema),
            num,
            cat,
            y,
            origin_indices: origin,
        }
    }

    /// Set numeric feature `j` of poison sample `k`. Panics outside [0,1].
    pub fn set_num(&mut self, k: usize, j: usize, value: f64) {
        assert!(
            value.is_finite() && (0.0..=1.0).contains(&value),
            "poison numeric value {value} outside [0,1]"
        );
        self.num[(k, j)] = value;
    }

    /// Set the category assignment of poison sample `k`, feature `j`.
    pub fn set_cat(&mut self, k: usize, j: usize, category: usize) {
        assert!(
            category < self.schema.cardinality(j),
            "category {category} out of range for feature {j}"
        );
        let t = self.schema.num_categorical();
        self.cat[k * t + j] = category;
    }
}

/// Round half away from zero; ties at .5 go up for nonnegative input.
pub(crate) fn round_half_away(v: f64) -> f64 {
    v.round() // f64::round rounds half away from zero
}

/// Initialize a poison set: copy `q = round(r * n_train)` seeded-random
/// training rows and flip each response to `round(1 - y)`.
pub fn init_poison(train: &Dataset, rate: f64, seed: u64) -> Result<PoisonSet> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(Error::Argument(format!(
            "poisoning rate must be in (0,1], got {rate}"
        )));
    }
    let n_train = train.n_samples();
    let q = (rate * n_train as f64).round() as usize;
    if q == 0 {
        return Err(Error::Argument(format!(
            "poisoning rate {rate} on {n_train} rows yields q = 0 samples"
        )));
    }
    let mut indices: Vec<usize> = (0..n_train).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    indices.truncate(q);

    let m = train.schema().num_numerical();
    let t = train.schema().num_categorical();
    let mut num = DMatrix::zeros(q, m);
    let mut cat = Vec::with_capacity(q * t);
    let mut y = DVector::zeros(q);
    for (k, &i) in indices.iter().enumerate() {
        for j in 0..m {
            num[(k, j)] = train.num()[(i, j)];
        }
        for j in 0..t {
            cat.push(train.cat(i, j));
        }
        y[k] = round_half_away(1.0 - train.y()[i]);
    }
    Ok(PoisonSet {
        schema: Arc::clone(train.schema()),
        num,
        cat,
        y,
        origin_indices: indices,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::CategoricalSpec;
    use proptest::prelude::*;

    fn small_schema() -> FeatureSchema {
        FeatureSchema::new(
            vec!["x1".into(), "x2".into()],
            vec![CategoricalSpec {
                name: "color".into(),
                labels: vec!["red".into(), "green".into(), "blue".into()],
            }],
            "y".into(),
        )
        .unwrap()
    }

    const CSV: &str = "x1,x2,color,y\n2,0.1,red,0.0\n4,0.5,green,0.5\n6,0.9,blue,1.0\n";

    #[test]
    fn parses_three_rows() {
        let table = load_csv_reader(CSV.as_bytes(), &small_schema()).unwrap();
        assert_eq!(table.n_rows(), 3);
        assert_eq!(table.num[0], 2.0);
        assert_eq!(table.cat, vec![0, 1, 2]);
    }

    #[test]
    fn unknown_label_names_row() {
        let csv = "x1,x2,color,y\n1,1,purple,0\n";
        let err = load_csv_reader(csv.as_bytes(), &small_schema()).unwrap_err();
        match err {
            Error::Schema(msg) => assert!(msg.contains("row 1") && msg.contains("purple")),
            other => panic!("expected schema error, got {other}"),
        }
    }

    #[test]
    fn missing_column_is_schema_error() {
        let csv = "x1,color,y\n1,red,0\n";
        let err = load_csv_reader(csv.as_bytes(), &small_schema()).unwrap_err();
        assert!(matches!(err, Error::Schema(_)));
    }

    #[test]
    fn bad_numeric_cell_reports_position() {
        let csv = "x1,x2,color,y\n1,oops,red,0\n";
        let err = load_csv_reader(csv.as_bytes(), &small_schema()).unwrap_err();
        match err {
            Error::Parse { row, column, .. } => {
                assert_eq!(row, 1);
                assert_eq!(column, "x2");
            }
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn header_only_is_empty_table() {
        let table = load_csv_reader("x1,x2,color,y\n".as_bytes(), &small_schema()).unwrap();
        assert_eq!(table.n_rows(), 0);
    }

    #[test]
    fn extra_columns_are_ignored() {
        let csv = "junk,x1,x2,color,y\nz,2,0.1,red,0\nz,4,0.5,green,1\n";
        let table = load_csv_reader(csv.as_bytes(), &small_schema()).unwrap();
        assert_eq!(table.n_rows(), 2);
        assert_eq!(table.num[0], 2.0);
    }

    #[test]
    fn min_max_scaling_definition() {
        let table = load_csv_reader(CSV.as_bytes(), &small_schema()).unwrap();
        let (ds, stats, warnings) = encode_and_scale(&table, None).unwrap();
        assert!(warnings.is_empty());
        // column {2,4,6} -> {0.0, 0.5, 1.0}
        assert_eq!(ds.num()[(0, 0)], 0.0);
        assert_eq!(ds.num()[(1, 0)], 0.5);
        assert_eq!(ds.num()[(2, 0)], 1.0);
        assert_eq!(stats.numeric[0], (2.0, 6.0));
    }

    #[test]
    fn clamps_with_train_stats() {
        let table = load_csv_reader(CSV.as_bytes(), &small_schema()).unwrap();
        let (_, stats, _) = encode_and_scale(&table, None).unwrap();
        // test value 8 with train stats (min 2, max 6) clamps to 1.0
        let test_csv = "x1,x2,color,y\n8,0.5,red,2.0\n";
        let test_table = load_csv_reader(test_csv.as_bytes(), &small_schema()).unwrap();
        let (ds, _, _) = encode_and_scale(&test_table, Some(&stats)).unwrap();
        assert_eq!(ds.num()[(0, 0)], 1.0);
        assert_eq!(ds.y()[0], 1.0); // response 2.0 clamped with train stats (0,1)
    }

    #[test]
    fn one_hot_index_matches_label_position() {
        let table = load_csv_reader(CSV.as_bytes(), &small_schema()).unwrap();
        let (ds, _, _) = encode_and_scale(&table, None).unwrap();
        // "green" of (red, green, blue) -> index 1, i.e. vector (0,1,0)
        assert_eq!(ds.cat(1, 0), 1);
    }

    #[test]
    fn constant_column_warns_and_zeroes() {
        let csv = "x1,x2,color,y\n3,0.1,red,0\n3,0.9,blue,1\n";
        let table = load_csv_reader(csv.as_bytes(), &small_schema()).unwrap();
        let (ds, _, warnings) = encode_and_scale(&table, None).unwrap();
        assert_eq!(ds.num()[(0, 0)], 0.0);
        assert_eq!(ds.num()[(1, 0)], 0.0);
        assert_eq!(warnings.len(), 1);
        assert!(warnings[0].contains("x1"));
    }

    fn synthetic_dataset(n: usize) -> Dataset {
        let schema = Arc::new(small_schema());
        let num = DMatrix::from_fn(n, 2, |i, j| ((i * 7 + j * 3) % 10) as f64 / 10.0);
        let cat: Vec<usize> = (0..n).map(|i| i % 3).collect();
        let y = DVector::from_fn(n, |i, _| ((i * 13) % 10) as f64 / 10.0);
        Dataset::new(schema, num, cat, y).unwrap()
    }

    #[test]
    fn split_paper_sizes() {
        let ds = synthetic_dataset(1050);
        let (train, val, test) = split(&ds, (300, 250, 500), 7).unwrap();
        assert_eq!(train.n_samples(), 300);
        assert_eq!(val.n_samples(), 250);
        assert_eq!(test.n_samples(), 500);
    }

    #[test]
    fn split_deterministic() {
        let (a1, b1, c1) = split_indices(1050, (300, 250, 500), 7).unwrap();
        let (a2, b2, c2) = split_indices(1050, (300, 250, 500), 7).unwrap();
        assert_eq!(a1, a2);
        assert_eq!(b1, b2);
        assert_eq!(c1, c2);
    }

    #[test]
    fn split_all_in_train() {
        let (train, val, test) = split_indices(10, (10, 0, 0), 3).unwrap();
        assert_eq!(train.len(), 10);
        assert!(val.is_empty() && test.is_empty());
    }

    #[test]
    fn split_too_large_errors() {
        assert!(matches!(
            split_indices(10, (8, 2, 1), 0),
            Err(Error::Argument(_))
        ));
    }

    proptest! {
        #[test]
        fn split_is_partition(n in 1usize..200, seed in any::<u64>()) {
            let n_train = n / 2;
            let n_val = n / 4;
            let n_test = n - n_train - n_val;
            let (a, b, c) = split_indices(n, (n_train, n_val, n_test), seed).unwrap();
            let mut all: Vec<usize> = a.iter().chain(&b).chain(&c).copied().collect();
            all.sort_unstable();
            all.dedup();
            prop_assert_eq!(all.len(), n); // disjoint and covering when sizes sum to n
            prop_assert!(all.iter().all(|&i| i < n));
        }

        #[test]
        fn poison_responses_follow_flip_rule(seed in any::<u64>(), n in 10usize..60) {
            let ds = synthetic_dataset(n);
            let poison = init_poison(&ds, 0.2, seed).unwrap();
            for (k, &i) in poison.origin_indices().iter().enumerate() {
                let expected = round_half_away(1.0 - ds.y()[i]);
                prop_assert_eq!(poison.y()[k], expected);
                prop_assert!(poison.y()[k] == 0.0 || poison.y()[k] == 1.0);
            }
        }
    }

    #[test]
    fn poison_count_at_four_percent() {
        let ds = synthetic_dataset(300);
        let poison = init_poison(&ds, 0.04, 1).unwrap();
        assert_eq!(poison.n_samples(), 12);
    }

    #[test]
    fn flip_rounds_up_from_point_three() {
        // y = 0.3 -> round(0.7) = 1
        assert_eq!(round_half_away(1.0 - 0.3), 1.0);
    }

    #[test]
    fn flip_tie_breaks_away_from_zero() {
        // y = 0.5 -> round(0.5) = 1 under round-half-away-from-zero
        assert_eq!(round_half_away(1.0 - 0.5), 1.0);
    }

    #[test]
    fn zero_q_is_argument_error() {
        let ds = synthetic_dataset(10);
        assert!(matches!(
            init_poison(&ds, 0.01, 0),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn poison_deterministic_per_seed() {
        let ds = synthetic_dataset(50);
        let a = init_poison(&ds, 0.1, 9).unwrap();
        let b = init_poison(&ds, 0.1, 9).unwrap();
        assert_eq!(a.origin_indices(), b.origin_indices());
        assert_eq!(a.num(), b.num());
    }

    #[test]
    fn dataset_rejects_out_of_box_values() {
        let schema = Arc::new(small_schema());
        let num = DMatrix::from_element(1, 2, 1.5);
        let err = Dataset::new(schema, num, vec![0], DVector::from_element(1, 0.5));
        assert!(matches!(err, Err(Error::Argument(_))));
    }
}
