//! CSV matrix files: one matrix row per line, comma-separated decimal floats,
//! no header.

use std::fs::File;
use std::path::Path;

use blockspec::Matrix;

use crate::error::CliError;

pub fn read_matrix_csv(path: &Path) -> Result<Matrix, CliError> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::parse(path, e.to_string()))?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        match cols {
            None => cols = Some(record.len()),
            Some(c) if c != record.len() => {
                return Err(CliError::Shape {
                    path: path.into(),
                    msg: format!(
                        "row {} has {} entries, expected {c}",
                        line + 1,
                        record.len()
                    ),
                })
            }
            Some(_) => {}
        }
        for (j, field) in record.iter().enumerate() {
            let x: f64 = field.parse().map_err(|_| {
                CliError::parse(
                    path,
                    format!("row {} column {}: not a number: {field:?}", line + 1, j + 1),
                )
            })?;
            if !x.is_finite() {
                return Err(CliError::parse(
                    path,
                    format!("row {} column {}: non-finite value", line + 1, j + 1),
                ));
            }
            data.push(x);
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| CliError::parse(path, "empty matrix file"))?;
    Matrix::from_row_major(rows, cols, data).map_err(|e| CliError::parse(path, e.to_string()))
}

/// Writes `a` so that [`read_matrix_csv`] recovers it bit-exactly.
pub fn write_matrix_csv(path: &Path, a: &Matrix) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(file);
    for i in 0..a.rows() {
        writer
            .write_record(a.row(i).iter().map(|x| format!("{x:?}")))
            .map_err(|e| CliError::parse(path, e.to_string()))?;
    }
    writer.flush().map_err(|e| CliError::io(path, e))
}
