//! `fetch-data`: download the public benchmark datasets, decode their
//! pre-encoded one-hot columns back to label form, and emit the CSV +
//! schema files the rest of the toolchain consumes.
//!
//! Everything is staged in a temp directory and renamed into place only
//! after the whole dataset processed cleanly, so a failed fetch leaves no
//! partial files behind.

use std::path::{Path, PathBuf};
use std::time::Duration;

use poisonforge_core::harness::{decode_onehot_table, subset_schema, DecodedTable};
use sha2::{Digest, Sha256};

use crate::{CliError, FetchArgs};

/// Upstream repository holding the processed benchmark datasets.
const HOUSE_URL: &str =
    "https://raw.githubusercontent.com/jagielski/manip-ml/master/files/data/house-processed.csv";
const HEALTHCARE_URL: &str =
    "https://raw.githubusercontent.com/jagielski/manip-ml/master/files/data/pharm-processed.csv";

pub fn cmd_fetch_data(args: FetchArgs) -> Result<(), CliError> {
    let out_dir = args
        .out
        .clone()
        .or_else(|| std::env::var("POISONFORGE_DATA_DIR").ok().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("data"));

    let targets: Vec<(&str, String)> = match args.dataset.as_str() {
        "house" => vec![(
            "house",
            args.url_house.clone().unwrap_or_else(|| HOUSE_URL.into()),
        )],
        "healthcare" => vec![(
            "healthcare",
            args.url_healthcare
                .clone()
                .unwrap_or_else(|| HEALTHCARE_URL.into()),
        )],
        "all" => vec![
            (
                "house",
                args.url_house.clone().unwrap_or_else(|| HOUSE_URL.into()),
            ),
            (
                "healthcare",
                args.url_healthcare
                    .clone()
                    .unwrap_or_else(|| HEALTHCARE_URL.into()),
            ),
        ],
        other => {
            return Err(CliError::new(
                "argument",
                2,
                format!("unknown dataset '{other}' (expected house, healthcare, or all)"),
            ))
        }
    };

    std::fs::create_dir_all(&out_dir)?;
    for (name, url) in targets {
        fetch_one(name, &url, &out_dir, &args)?;
        println!("fetched {name} into {}", out_dir.display());
    }
    Ok(())
}

fn fetch_one(name: &str, url: &str, out_dir: &Path, args: &FetchArgs) -> Result<(), CliError> {
    let bytes = download(url)?;
    let sha256 = hex_digest(&bytes);

    let text = String::from_utf8(bytes.clone())
        .map_err(|_| CliError::new("integrity", 3, format!("{name}: payload is not UTF-8")))?;
    let (headers, rows) = parse_numeric_csv(name, &text)?;

    let response_col = match &args.response {
        Some(resp) => headers
            .iter()
            .position(|h| h == resp)
            .ok_or_else(|| {
                CliError::new(
                    "argument",
                    2,
                    format!("{name}: response column '{resp}' not found"),
                )
            })?,
        None => headers.len() - 1,
    };

    let mut decoded = decode_onehot_table(&headers, &rows, response_col)?;
    if let Some(prefer) = &args.cat_features {
        reorder_categoricals(&mut decoded, prefer)?;
    }

    // stage everything, then rename into place
    let stage = tempfile::tempdir_in(out_dir)?;
    let write_stage = |file: &str, contents: &[u8]| -> Result<PathBuf, CliError> {
        let path = stage.path().join(file);
        std::fs::write(&path, contents)?;
        Ok(path)
    };

    let mut csv_text = decoded.headers.join(",");
    csv_text.push('\n');
    for row in &decoded.rows {
        csv_text.push_str(&row.join(","));
        csv_text.push('\n');
    }

    let mut staged = vec![
        write_stage(&format!("{name}.raw.csv"), &bytes)?,
        write_stage(&format!("{name}.csv"), csv_text.as_bytes())?,
        write_stage(
            &format!("{name}.schema.all.json"),
            decoded.schema.to_json().as_bytes(),
        )?,
        write_stage(
            &format!("{name}.schema.cat5.json"),
            subset_schema(&decoded.schema, 5).to_json().as_bytes(),
        )?,
        write_stage(
            &format!("{name}.schema.cat10.json"),
            subset_schema(&decoded.schema, 10).to_json().as_bytes(),
        )?,
    ];

    let manifest = serde_json::json!({
        "dataset": name,
        "source_url": url,
        "sha256": sha256,
        "bytes": bytes.len(),
        "response_column": decoded.schema.response,
        "n_rows": decoded.rows.len(),
        "n_numerical": decoded.schema.num_numerical(),
        "n_categorical": decoded.schema.num_categorical(),
        "files": {
            "raw": format!("{name}.raw.csv"),
            "decoded": format!("{name}.csv"),
            "schemas": [
                format!("{name}.schema.all.json"),
                format!("{name}.schema.cat5.json"),
                format!("{name}.schema.cat10.json"),
            ],
        },
    });
    staged.push(write_stage(
        &format!("{name}.manifest.json"),
        serde_json::to_string_pretty(&manifest)
            .expect("manifest serialization cannot fail")
            .as_bytes(),
    )?);

    for path in staged {
        let file = path.file_name().expect("staged file name");
        std::fs::rename(&path, out_dir.join(file))?;
    }
    Ok(())
}

fn download(url: &str) -> Result<Vec<u8>, CliError> {
    let network_err = |e: String| {
        CliError::new(
            "network",
            3,
            format!("failed to fetch {url}: {e}; check connectivity and retry"),
        )
    };
    let client = reqwest::blocking::Client::builder()
        .timeout(Duration::from_secs(120))
        .build()
        .map_err(|e| network_err(e.to_string()))?;
    let response = client
        .get(url)
        .send()
        .map_err(|e| network_err(e.to_string()))?;
    if !response.status().is_success() {
        return Err(network_err(format!("HTTP status {}", response.status())));
    }
    response
        .bytes()
        .map(|b| b.to_vec())
        .map_err(|e| network_err(e.to_string()))
}

fn hex_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Parse a fully numeric CSV. A header row is detected by its cells not all
/// parsing as numbers; headerless files get synthetic `c0..cN` names.
fn parse_numeric_csv(name: &str, text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>), CliError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let first = lines
        .next()
        .ok_or_else(|| CliError::new("integrity", 3, format!("{name}: empty payload")))?;
    let first_cells: Vec<&str> = first.split(',').map(str::trim).collect();
    let headerless = first_cells.iter().all(|c| c.parse::<f64>().is_ok());

    let headers: Vec<String> = if headerless {
        (0..first_cells.len()).map(|i| format!("c{i}")).collect()
    } else {
        first_cells.iter().map(|c| c.to_string()).collect()
    };

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let data_lines: Vec<&str> = if headerless {
        std::iter::once(first).chain(lines).collect()
    } else {
        lines.collect()
    };
    for (i, line) in data_lines.iter().enumerate() {
        let mut row = Vec::with_capacity(headers.len());
        for cell in line.split(',').map(str::trim) {
            let v: f64 = cell.parse().map_err(|_| {
                CliError::new(
                    "integrity",
                    3,
                    format!("{name}: non-numeric cell '{cell}' in data row {}", i + 1),
                )
            })?;
            row.push(v);
        }
        if row.len() != headers.len() {
            return Err(CliError::new(
                "integrity",
                3,
                format!("{name}: row {} has {} cells, expected {}", i + 1, row.len(), headers.len()),
            ));
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::new(
            "integrity",
            3,
            format!("{name}: no data rows"),
        ));
    }
    Ok((headers, rows))
}

/// Move the listed categorical features (by name, in the given order) to
/// the front of the schema so the cat5/cat10 subsets pick them first.
fn reorder_categoricals(decoded: &mut DecodedTable, prefer: &str) -> Result<(), CliError> {
    let names: Vec<&str> = prefer.split(',').map(str::trim).collect();
    let t = decoded.schema.num_categorical();
    let m = decoded.schema.num_numerical();
    let mut order: Vec<usize> = Vec::with_capacity(t);
    for name in &names {
        let idx = decoded
            .schema
            .categorical
            .iter()
            .position(|c| c.name == *name)
            .ok_or_else(|| {
                CliError::new(
                    "argument",
                    2,
                    format!("unknown categorical feature '{name}' in --cat-features"),
                )
            })?;
        if !order.contains(&idx) {
            order.push(idx);
        }
    }
    for idx in 0..t {
        if !order.contains(&idx) {
            order.push(idx);
        }
    }

    decoded.schema.categorical = order
        .iter()
        .map(|&i| decoded.schema.categorical[i].clone())
        .collect();
    // permute the categorical cells (they sit between numericals and response)
    for row in &mut decoded.rows {
        let cats: Vec<String> = order.iter().map(|&i| row[m + i].clone()).collect();
        row.splice(m..m + t, cats);
    }
    let cat_names: Vec<String> = order
        .iter()
        .map(|&i| decoded.headers[m + i].clone())
        .collect();
    decoded.headers.splice(m..m + t, cat_names);
    Ok(())
}
