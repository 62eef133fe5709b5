//! CSV input and output.
//!
//! Datasets are CSV files with a header row of variable names and one row
//! per sample. A directory of such files with identical headers is read as a
//! multi-dataset [`CovSet`], ordered by file name.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use num_bigint::BigUint;

use crate::copula::{copula_covariance, estimate_covariance, CovSet, DataMatrix};
use crate::error::{HoiError, Result};

pub fn read_data_csv(path: &Path) -> Result<DataMatrix> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let names: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let n_vars = names.len();
    let mut values = Vec::new();
    let mut n_samples = 0;
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != n_vars {
            return Err(HoiError::InvalidData(format!(
                "{}: row {} has {} fields, expected {n_vars}",
                path.display(),
                line + 1,
                record.len()
            )));
        }
        for (col, field) in record.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                HoiError::InvalidData(format!(
                    "{}: row {}, column `{}`: `{field}` is not a number",
                    path.display(),
                    line + 1,
                    names[col]
                ))
            })?;
            values.push(v);
        }
        n_samples += 1;
    }
    DataMatrix::new(values, n_samples, n_vars)?.with_column_names(names)
}

pub fn write_data_csv(data: &DataMatrix, out: impl Write) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(data.names_or_default())?;
    let mut row = Vec::with_capacity(data.n_vars());
    for t in 0..data.n_samples() {
        row.clear();
        row.extend((0..data.n_vars()).map(|j| data.get(t, j).to_string()));
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

/// CSV files in `dir`, sorted by file name.
pub fn list_csv_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x.eq_ignore_ascii_case("csv")))
        .collect();
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    if files.is_empty() {
        return Err(HoiError::InvalidData(format!("no CSV files in {}", dir.display())));
    }
    Ok(files)
}

/// A loaded input: one or more datasets sharing variable names.
#[derive(Debug, Clone)]
pub struct Input {
    /// Covariances, with the header names as variable names.
    pub covs: CovSet,
    /// File stems, one per dataset.
    pub dataset_ids: Vec<String>,
}

/// Reads a CSV file or a directory of CSV files and estimates one covariance
/// per dataset, through the copula unless `copula` is false.
pub fn load_input(path: &Path, copula: bool) -> Result<Input> {
    if !path.exists() {
        return Err(HoiError::InvalidData(format!("{} does not exist", path.display())));
    }
    let files = if path.is_dir() {
        list_csv_files(path)?
    } else {
        vec![path.to_path_buf()]
    };
    let mut mats = Vec::with_capacity(files.len());
    let mut ids = Vec::with_capacity(files.len());
    let mut variable_names: Option<Vec<String>> = None;
    for file in &files {
        let data = read_data_csv(file)?;
        let names = data.names_or_default();
        match &variable_names {
            None => variable_names = Some(names),
            Some(first) if *first != names => {
                return Err(HoiError::InvalidData(format!(
                    "{}: header differs from {}",
                    file.display(),
                    files[0].display()
                )))
            }
            Some(_) => {}
        }
        let cov = if copula {
            copula_covariance(&data)
        } else {
            estimate_covariance(&data)
        }
        .map_err(|e| match e {
            HoiError::DegenerateColumn { column } => HoiError::InvalidData(format!(
                "{}: column `{}` is constant",
                file.display(),
                data.names_or_default()[column]
            )),
            other => other,
        })?;
        mats.push(cov);
        ids.push(
            file.file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default(),
        );
    }
    Ok(Input {
        covs: CovSet::new(mats)?.with_names(variable_names.unwrap_or_default())?,
        dataset_ids: ids,
    })
}

/// Hex bitmask of an n-plet, bit `i` set for variable `i`.
pub fn mask_hex(nplet: &[usize]) -> String {
    let mut mask = BigUint::default();
    for &i in nplet {
        mask.set_bit(i as u64, true);
    }
    format!("{mask:x}")
}

/// Inverse of [`mask_hex`].
pub fn parse_mask_hex(hex: &str) -> Result<Vec<usize>> {
    let mask = BigUint::parse_bytes(hex.trim_start_matches("0x").as_bytes(), 16)
        .ok_or_else(|| HoiError::InvalidNplet(format!("`{hex}` is not a hex mask")))?;
    Ok((0..mask.bits()).filter(|&i| mask.bit(i)).map(|i| i as usize).collect())
}

pub fn nplet_names(nplet: &[usize], names: &[String]) -> String {
    nplet
        .iter()
        .map(|&i| names[i].as_str())
        .collect::<Vec<_>>()
        .join(",")
}
