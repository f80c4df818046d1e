//! Feature schema: the declared layout of a tabular dataset.
//!
//! A schema names the numerical features, the categorical features with
//! their category labels, and the response column. Order in the schema
//! defines feature order everywhere downstream, including design-matrix
//! column order.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One categorical feature: a name and its ordered category labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoricalSpec {
    pub name: String,
    pub labels: Vec<String>,
}

impl CategoricalSpec {
    /// Number of categories, `n(j)` in design-matrix terms.
    pub fn cardinality(&self) -> usize {
        self.labels.len()
    }

    /// Index of a label within this feature, if declared.
    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

/// Declared layout of a raw table: numerical feature names, categorical
/// specs, and the response column name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub numerical: Vec<String>,
    pub categorical: Vec<CategoricalSpec>,
    pub response: String,
}

impl FeatureSchema {
    /// Validate and construct a schema.
    ///
    /// Rejects duplicate names (across numerical and categorical features
    /// and the response), categorical features with fewer than two labels,
    /// and duplicate labels within a feature.
    pub fn new(
        numerical: Vec<String>,
        categorical: Vec<CategoricalSpec>,
        response: String,
    ) -> Result<Self> {
        let schema = FeatureSchema {
            numerical,
            categorical,
            response,
        };
        schema.validate()?;
        Ok(schema)
    }

    fn validate(&self) -> Result<()> {
        let mut seen: HashSet<&str> = HashSet::new();
        for name in self
            .numerical
            .iter()
            .chain(self.categorical.iter().map(|c| &c.name))
            .chain(std::iter::once(&self.response))
        {
            if !seen.insert(name.as_str()) {
                return Err(Error::Schema(format!("duplicate name '{name}'")));
            }
        }
        for spec in &self.categorical {
            if spec.labels.len() < 2 {
                return Err(Error::Schema(format!(
                    "categorical feature '{}' must have at least 2 labels, has {}",
                    spec.name,
                    spec.labels.len()
                )));
            }
            let mut labels: HashSet<&str> = HashSet::new();
            for label in &spec.labels {
                if !labels.insert(label.as_str()) {
                    return Err(Error::Schema(format!(
                        "duplicate label '{}' in categorical feature '{}'",
                        label, spec.name
                    )));
                }
            }
        }
        Ok(())
    }

    /// Parse a schema from its JSON file representation.
    pub fn from_json(json: &str) -> Result<Self> {
        let schema: FeatureSchema = serde_json::from_str(json)
            .map_err(|e| Error::Schema(format!("invalid schema JSON: {e}")))?;
        schema.validate()?;
        Ok(schema)
    }

    /// Load a schema from a JSON file on disk.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    /// Serialize to the on-disk JSON representation.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schema serialization cannot fail")
    }

    /// Number of numerical features, `m`.
    pub fn num_numerical(&self) -> usize {
        self.numerical.len()
    }

    /// Number of categorical features, `t`.
    pub fn num_categorical(&self) -> usize {
        self.categorical.len()
    }

    /// Cardinality `n(j)` of categorical feature `j`.
    pub fn cardinality(&self, j: usize) -> usize {
        self.categorical[j].cardinality()
    }

    /// Total one-hot width: m + sum of n(j). Excludes the intercept.
    pub fn design_width(&self) -> usize {
        self.num_numerical() + self.categorical.iter().map(|c| c.cardinality()).sum::<usize>()
    }

    /// Column offset of categorical feature `j`'s block in the design matrix.
    pub fn cat_block_offset(&self, j: usize) -> usize {
        self.num_numerical()
            + self.categorical[..j]
                .iter()
                .map(|c| c.cardinality())
                .sum::<usize>()
    }
}
