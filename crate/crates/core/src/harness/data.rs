//! CSV panels: a header row, an optional leading date-label column, one
//! response column, and numeric predictor columns in file order.

use std::collections::HashSet;
use std::io::Write;
use std::path::Path;

use crate::error::{AlqrError, Result};
use crate::model::{PredictorPanel, ResponseSeries};

/// Header names recognized as a leading date-label column.
const LABEL_HEADERS: [&str; 6] = ["date", "time", "month", "yyyymm", "period", "t"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoadOptions {
    /// Name of the response column.
    pub response: String,
    /// Treat the first column as labels. `None` decides from its header
    /// (see [`LABEL_HEADERS`]) or from non-numeric content.
    pub date_column: Option<bool>,
}

impl LoadOptions {
    pub fn response(name: &str) -> Self {
        Self { response: name.to_string(), date_column: None }
    }
}

/// A parsed file with every numeric column kept by name.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub labels: Option<Vec<String>>,
    pub names: Vec<String>,
    /// Column-major values.
    pub columns: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.names.iter().position(|n| n == name).map(|j| self.columns[j].as_slice())
    }

    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(self.labels.as_ref().map_or(0, Vec::len), Vec::len)
    }

    /// Splits into predictors (every column except `response`) and response.
    pub fn split(&self, response: &str) -> Result<(PredictorPanel, ResponseSeries)> {
        let r = self.names.iter().position(|n| n == response).ok_or_else(|| {
            AlqrError::Data(format!("response column \"{response}\" not found (columns: {})", self.names.join(", ")))
        })?;
        let n = self.n_rows();
        let keep: Vec<usize> = (0..self.names.len()).filter(|&j| j != r).collect();
        let mut values = Vec::with_capacity(n * keep.len());
        for t in 0..n {
            values.extend(keep.iter().map(|&j| self.columns[j][t]));
        }
        let names = keep.iter().map(|&j| self.names[j].clone()).collect();
        let panel = PredictorPanel::new(values, n, names, self.labels.clone())?;
        Ok((panel, ResponseSeries::new(self.columns[r].clone())?))
    }
}

fn read_err(path: &Path, e: impl std::fmt::Display) -> AlqrError {
    AlqrError::Data(format!("{}: {e}", path.display()))
}

/// Reads every column of a CSV file. Rows are numbered from 1 after the
/// header in error messages.
pub fn read_table(path: &Path, date_column: Option<bool>) -> Result<Table> {
    let file = std::fs::File::open(path).map_err(|e| AlqrError::Io(format!("{}: {e}", path.display())))?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(file);
    let headers: Vec<String> = rdr.headers().map_err(|e| read_err(path, e))?.iter().map(str::to_string).collect();
    if headers.is_empty() || headers.iter().all(String::is_empty) {
        return Err(read_err(path, "missing header row"));
    }
    let mut seen = HashSet::new();
    for h in &headers {
        if h.is_empty() {
            return Err(read_err(path, "empty column name in header"));
        }
        if !seen.insert(h.as_str()) {
            return Err(read_err(path, format!("duplicate column name \"{h}\"")));
        }
    }
    let mut rows: Vec<Vec<String>> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| read_err(path, format!("row {}: {e}", i + 1)))?;
        if rec.len() != headers.len() {
            return Err(read_err(path, format!("row {} has {} cells, header has {}", i + 1, rec.len(), headers.len())));
        }
        rows.push(rec.iter().map(str::to_string).collect());
    }
    if rows.is_empty() {
        return Err(read_err(path, "no data rows"));
    }
    let has_labels = date_column.unwrap_or_else(|| {
        LABEL_HEADERS.contains(&headers[0].to_ascii_lowercase().as_str())
            || rows.iter().any(|r| !r[0].is_empty() && r[0].parse::<f64>().is_err())
    });
    let first = usize::from(has_labels);
    if headers.len() <= first {
        return Err(read_err(path, "no numeric columns"));
    }
    let labels = has_labels.then(|| rows.iter().map(|r| r[0].clone()).collect());
    let mut columns = vec![Vec::with_capacity(rows.len()); headers.len() - first];
    for (i, row) in rows.iter().enumerate() {
        for (j, cell) in row.iter().enumerate().skip(first) {
            let bad = |what: &str| {
                read_err(path, format!("row {}, column \"{}\": {what}", i + 1, headers[j]))
            };
            if cell.is_empty() {
                return Err(bad("blank cell"));
            }
            let v: f64 = cell.parse().map_err(|_| bad(&format!("not a number: \"{cell}\"")))?;
            if !v.is_finite() {
                return Err(bad(&format!("non-finite value \"{cell}\"")));
            }
            columns[j - first].push(v);
        }
    }
    Ok(Table { labels, names: headers[first..].to_vec(), columns })
}

pub fn load_csv(path: &Path, opts: &LoadOptions) -> Result<(PredictorPanel, ResponseSeries)> {
    read_table(path, opts.date_column)?.split(&opts.response)
}

/// Writes `date` (when the panel has labels), the response, then predictors.
/// Values use the shortest representation that parses back exactly.
pub fn save_csv(path: &Path, panel: &PredictorPanel, y: &ResponseSeries, response: &str) -> Result<()> {
    let mut out = Vec::new();
    write_csv(&mut out, panel, y, response)?;
    std::fs::write(path, out).map_err(|e| AlqrError::Io(format!("{}: {e}", path.display())))
}

pub fn write_csv(out: &mut impl Write, panel: &PredictorPanel, y: &ResponseSeries, response: &str) -> Result<()> {
    if y.len() != panel.n_rows() {
        return Err(AlqrError::DimensionMismatch(format!("{} responses for {} rows", y.len(), panel.n_rows())));
    }
    if panel.col_names().iter().any(|c| c == response) {
        return Err(AlqrError::Data(format!("predictor name \"{response}\" clashes with the response")));
    }
    let mut w = csv::Writer::from_writer(out);
    let labels = panel.time_labels();
    let mut header: Vec<&str> = Vec::new();
    if labels.is_some() {
        header.push("date");
    }
    header.push(response);
    header.extend(panel.col_names().iter().map(String::as_str));
    let io = |e: csv::Error| AlqrError::Io(e.to_string());
    w.write_record(&header).map_err(io)?;
    for t in 0..panel.n_rows() {
        let mut rec: Vec<String> = Vec::with_capacity(header.len());
        if let Some(l) = labels {
            rec.push(l[t].clone());
        }
        rec.push(format!("{}", y.values()[t]));
        rec.extend(panel.row(t).iter().map(|v| format!("{v}")));
        w.write_record(&rec).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}
