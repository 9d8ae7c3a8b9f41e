//! The vehicle-manufacturer application: cluster car makers on averaged
//! model attributes from one era and test the split on the next era.
//!
//! Input is a long CSV of models, one row per model and year, with columns
//! `manufacturer, model_year, acceleration, cylinders, displacement,
//! horsepower, mpg, weight`. The pipeline: drop incomplete rows, take
//! log(weight), partition years into an estimation era (through 1975) and a
//! testing era (1976 on), keep manufacturers observed in both, average each
//! manufacturer's model rows per era, and z-score those averages against the
//! era's model-level mean and standard deviation. Each era then contributes
//! one observation per manufacturer, so the group-mean-residual variance
//! (the short-panel form) backs the test.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::inference::{finite_t_f_test, TestResult};
use crate::kmeans::KMeansOptions;
use crate::panel::{Panel, SplitMode, SplitSpec};

pub const ATTRIBUTES: [&str; 6] =
    ["acceleration", "cylinders", "displacement", "horsepower", "mpg", "log_weight"];

/// Last model year of the estimation era.
pub const SPLIT_YEAR: i64 = 1975;

const EXPECTED_HEADER: [&str; 8] = [
    "manufacturer",
    "model_year",
    "acceleration",
    "cylinders",
    "displacement",
    "horsepower",
    "mpg",
    "weight",
];

/// Makers sold under US nameplates in this data; everything else counts as
/// foreign when the report checks how cleanly the clusters track origin.
const AMERICAN: [&str; 12] = [
    "amc",
    "buick",
    "cadillac",
    "chevrolet",
    "chrysler",
    "dodge",
    "ford",
    "hi",
    "mercury",
    "oldsmobile",
    "plymouth",
    "pontiac",
];

pub fn is_american(manufacturer: &str) -> bool {
    AMERICAN.binary_search(&manufacturer).is_ok()
}

/// One complete model-year observation, weight already in logs.
#[derive(Debug, Clone)]
pub struct ModelRow {
    pub manufacturer: String,
    pub model_year: i64,
    pub attrs: [f64; 6],
}

/// Parses the raw CSV, dropping rows with missing or unusable fields.
pub fn load_rows(text: &str) -> Result<Vec<ModelRow>> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| Error::MalformedRow {
        line: 1,
        detail: format!("unreadable header: {e}"),
    })?;
    let got: Vec<&str> = header.iter().map(str::trim).collect();
    if got != EXPECTED_HEADER {
        return Err(Error::MalformedRow {
            line: 1,
            detail: format!("expected header {:?}, got {:?}", EXPECTED_HEADER.join(","), got.join(",")),
        });
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::MalformedRow {
            line: e.position().map_or(0, |p| p.line()),
            detail: e.to_string(),
        })?;
        let Some(row) = parse_row(&record) else { continue };
        rows.push(row);
    }
    Ok(rows)
}

fn parse_row(record: &csv::StringRecord) -> Option<ModelRow> {
    if record.len() != EXPECTED_HEADER.len() {
        return None;
    }
    let manufacturer = record.get(0)?.trim().to_lowercase();
    if manufacturer.is_empty() {
        return None;
    }
    let model_year: i64 = record.get(1)?.trim().parse().ok()?;
    let mut attrs = [0.0; 6];
    for (j, slot) in attrs.iter_mut().enumerate() {
        let v: f64 = record.get(2 + j)?.trim().parse().ok()?;
        if !v.is_finite() {
            return None;
        }
        *slot = v;
    }
    if attrs[5] <= 0.0 {
        return None;
    }
    attrs[5] = attrs[5].ln();
    Some(ModelRow { manufacturer, model_year, attrs })
}

/// Everything the study produces, ready for reporting.
#[derive(Debug, Clone)]
pub struct VehicleStudy {
    /// Surviving manufacturers in unit order (alphabetical).
    pub manufacturers: Vec<String>,
    /// N x 2 x 6 standardized panel (period 1 = estimation era average,
    /// period 2 = testing era average).
    pub panel: Panel,
    pub result: TestResult,
    /// Manufacturers by fitted group, canonical order.
    pub groups: Vec<Vec<String>>,
    /// Testing-era group means mapped back to raw units (G x 6).
    pub raw_p_means: DMatrix<f64>,
    /// Model rows entering each era's averages.
    pub rows_r: usize,
    pub rows_p: usize,
}

impl VehicleStudy {
    /// True when every group is uniform in origin and the two origins land
    /// in different groups.
    pub fn splits_by_origin(&self) -> bool {
        let flags: Vec<Option<bool>> = self
            .groups
            .iter()
            .map(|members| {
                let american = members.iter().filter(|m| is_american(m)).count();
                if american == 0 {
                    Some(false)
                } else if american == members.len() {
                    Some(true)
                } else {
                    None
                }
            })
            .collect();
        flags.iter().all(Option::is_some)
            && flags.iter().filter(|f| **f == Some(true)).count() == 1
    }
}

struct EraBlock {
    /// Standardized per-manufacturer averages, unit order.
    standardized: DMatrix<f64>,
    /// Model-level means and standard deviations used for the z-scores.
    basis_mean: [f64; 6],
    basis_sd: [f64; 6],
    n_rows: usize,
}

fn era_block(rows: &[&ModelRow], manufacturers: &[String]) -> Result<EraBlock> {
    let n_rows = rows.len();
    let mut basis_mean = [0.0; 6];
    for row in rows {
        for j in 0..6 {
            basis_mean[j] += row.attrs[j];
        }
    }
    basis_mean.iter_mut().for_each(|m| *m /= n_rows as f64);
    let mut basis_sd = [0.0; 6];
    for row in rows {
        for j in 0..6 {
            basis_sd[j] += (row.attrs[j] - basis_mean[j]).powi(2);
        }
    }
    for (j, sd) in basis_sd.iter_mut().enumerate() {
        *sd = (*sd / (n_rows as f64 - 1.0)).sqrt();
        if !(*sd > 0.0) {
            return Err(Error::DegenerateAttribute { dim: j + 1 });
        }
    }
    let mut standardized = DMatrix::zeros(manufacturers.len(), 6);
    for (i, name) in manufacturers.iter().enumerate() {
        let mine: Vec<&&ModelRow> = rows.iter().filter(|r| r.manufacturer == *name).collect();
        for j in 0..6 {
            let avg = mine.iter().map(|r| r.attrs[j]).sum::<f64>() / mine.len() as f64;
            standardized[(i, j)] = (avg - basis_mean[j]) / basis_sd[j];
        }
    }
    Ok(EraBlock { standardized, basis_mean, basis_sd, n_rows })
}

/// Runs the whole study on raw CSV text.
pub fn run_vehicle_study(text: &str, restarts: usize, seed: u64) -> Result<VehicleStudy> {
    let rows = load_rows(text)?;
    let r_rows: Vec<&ModelRow> = rows.iter().filter(|r| r.model_year <= SPLIT_YEAR).collect();
    let p_rows: Vec<&ModelRow> = rows.iter().filter(|r| r.model_year > SPLIT_YEAR).collect();

    let mut manufacturers: Vec<String> = Vec::new();
    for row in &rows {
        if manufacturers.iter().any(|m| *m == row.manufacturer) {
            continue;
        }
        let in_r = r_rows.iter().any(|r| r.manufacturer == row.manufacturer);
        let in_p = p_rows.iter().any(|r| r.manufacturer == row.manufacturer);
        if in_r && in_p {
            manufacturers.push(row.manufacturer.clone());
        }
    }
    manufacturers.sort_unstable();
    let n = manufacturers.len();
    if n < 2 {
        return Err(Error::InsufficientUnits { n, need: 2 });
    }

    let r_rows: Vec<&ModelRow> =
        r_rows.into_iter().filter(|r| manufacturers.contains(&r.manufacturer)).collect();
    let p_rows: Vec<&ModelRow> =
        p_rows.into_iter().filter(|r| manufacturers.contains(&r.manufacturer)).collect();
    let block_r = era_block(&r_rows, &manufacturers)?;
    let block_p = era_block(&p_rows, &manufacturers)?;

    let mut values = Vec::with_capacity(n * 2 * 6);
    for i in 0..n {
        for block in [&block_r, &block_p] {
            for j in 0..6 {
                values.push(block.standardized[(i, j)]);
            }
        }
    }
    let panel = Panel::from_parts(manufacturers.clone(), vec![SPLIT_YEAR, 1982], 6, values)?;

    let split = SplitMode::Explicit(SplitSpec::new(vec![1], vec![2])?);
    let opts = KMeansOptions { restarts, seed, ..KMeansOptions::default() };
    let result = finite_t_f_test(&panel, &split, 2, &opts)?;

    let mut groups = vec![Vec::new(); 2];
    for (i, &g) in result.diagnostics.assignments.iter().enumerate() {
        groups[g].push(manufacturers[i].clone());
    }
    let mut raw_p_means = DMatrix::zeros(2, 6);
    for g in 0..2 {
        for j in 0..6 {
            raw_p_means[(g, j)] =
                result.diagnostics.means_p[(g, j)] * block_p.basis_sd[j] + block_p.basis_mean[j];
        }
    }

    Ok(VehicleStudy {
        manufacturers,
        panel,
        result,
        groups,
        raw_p_means,
        rows_r: block_r.n_rows,
        rows_p: block_p.n_rows,
    })
}
