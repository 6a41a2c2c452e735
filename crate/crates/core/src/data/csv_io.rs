use std::path::Path;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::numeric::Matrix;

fn csv_error(path: &Path, source: csv::Error) -> Error {
    Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// Reads a headered, comma-separated numeric file. Row numbers in errors are
/// 1-based data rows (the header is not counted).
pub fn load_csv(
    path: impl AsRef<Path>,
    feature_cols: &[String],
    label_cols: &[String],
) -> Result<Dataset> {
    let path = path.as_ref();
    if feature_cols.is_empty() || label_cols.is_empty() {
        return Err(Error::Config(
            "feature and label columns must be listed".into(),
        ));
    }
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let locate = |name: &String| {
        header
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn(name.clone()))
    };
    let fidx = feature_cols
        .iter()
        .map(locate)
        .collect::<Result<Vec<_>>>()?;
    let lidx = label_cols.iter().map(locate).collect::<Result<Vec<_>>>()?;

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut n = 0usize;
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        n += 1;
        for (target, cols, names) in [(&mut xs, &fidx, feature_cols), (&mut ys, &lidx, label_cols)]
        {
            for (&c, name) in cols.iter().zip(names) {
                let cell = record.get(c).unwrap_or("").trim();
                let v: f64 = cell.parse().map_err(|_| Error::Parse {
                    row: n,
                    col: name.clone(),
                    message: format!("'{cell}' is not a number"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        row: n,
                        col: name.clone(),
                        message: format!("non-finite value '{cell}'"),
                    });
                }
                target.push(v);
            }
        }
    }
    if n == 0 {
        return Err(Error::EmptyData(format!(
            "{} has no data rows",
            path.display()
        )));
    }
    Dataset::new(
        Matrix::from_vec(n, fidx.len(), xs)?,
        Matrix::from_vec(n, lidx.len(), ys)?,
    )
}

/// Writes features then labels under the given column names. Values use the
/// shortest representation that parses back to the same `f64`.
pub fn write_csv(
    path: impl AsRef<Path>,
    data: &Dataset,
    feature_cols: &[String],
    label_cols: &[String],
) -> Result<()> {
    let path = path.as_ref();
    if feature_cols.len() != data.feature_dim() || label_cols.len() != data.label_dim() {
        return Err(Error::invalid(
            "column names do not match dataset dimensions",
        ));
    }
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    writer
        .write_record(feature_cols.iter().chain(label_cols))
        .map_err(|e| csv_error(path, e))?;
    for i in 0..data.len() {
        let cells = data
            .x
            .row(i)
            .iter()
            .chain(data.y.row(i))
            .map(|v| v.to_string());
        writer.write_record(cells).map_err(|e| csv_error(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}
