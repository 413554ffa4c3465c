//! CSV ingestion into [`MatrixSample`].
//!
//! Long form has the header `obs,row,col,value` with 0-based indices and one
//! line per cell. Wide form has one observation per line with `p·q` values in
//! row-major order, optionally preceded by a label column; a header line is
//! allowed if its first field is not numeric.

use std::path::Path;

use mpp_core::MatrixSample;

use crate::error::{CliError, CliResult};

/// Dimensions supplied on the command line.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Dims {
    pub n: Option<usize>,
    pub p: Option<usize>,
    pub q: Option<usize>,
}

fn line_err(line: u64, msg: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("line {line}: {msg}"))
}

fn records(text: &str) -> CliResult<Vec<(u64, csv::StringRecord)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            line_err(line, e)
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        out.push((line, rec));
    }
    Ok(out)
}

pub fn parse(text: &str, dims: Dims) -> CliResult<MatrixSample> {
    let recs = records(text)?;
    let Some((_, first)) = recs.first() else {
        return Err(CliError::Usage("CSV is empty".into()));
    };
    let header: Vec<&str> = first.iter().collect();
    if header == ["obs", "row", "col", "value"] {
        parse_long(&recs[1..], dims)
    } else {
        parse_wide(&recs, dims)
    }
}

pub fn read(path: &Path, dims: Dims) -> CliResult<MatrixSample> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse(&text, dims)
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, k: usize, line: u64, what: &str) -> CliResult<T> {
    rec.get(k)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| line_err(line, format!("cannot parse {what} from {:?}", rec.get(k).unwrap_or(""))))
}

fn parse_long(recs: &[(u64, csv::StringRecord)], dims: Dims) -> CliResult<MatrixSample> {
    let mut cells = Vec::with_capacity(recs.len());
    for (line, rec) in recs {
        if rec.len() != 4 {
            return Err(line_err(*line, format!("expected 4 fields, found {}", rec.len())));
        }
        let obs: usize = field(rec, 0, *line, "obs")?;
        let row: usize = field(rec, 1, *line, "row")?;
        let col: usize = field(rec, 2, *line, "col")?;
        let value: f64 = field(rec, 3, *line, "value")?;
        if !value.is_finite() {
            return Err(line_err(*line, "value is not finite"));
        }
        cells.push((*line, obs, row, col, value));
    }
    let infer = |given: Option<usize>, f: fn(&(u64, usize, usize, usize, f64)) -> usize| {
        given.unwrap_or_else(|| cells.iter().map(|c| f(c) + 1).max().unwrap_or(0))
    };
    let n = infer(dims.n, |c| c.1);
    let p = infer(dims.p, |c| c.2);
    let q = infer(dims.q, |c| c.3);
    if n == 0 || p == 0 || q == 0 {
        return Err(CliError::Usage("CSV holds no cells".into()));
    }
    let mut data = vec![0.0; n * p * q];
    let mut seen = vec![false; n * p * q];
    for &(line, obs, row, col, value) in &cells {
        if obs >= n || row >= p || col >= q {
            return Err(line_err(line, format!("cell ({obs},{row},{col}) is outside {n}x{p}x{q}")));
        }
        let k = (obs * p + row) * q + col;
        if seen[k] {
            return Err(line_err(line, format!("duplicate cell ({obs},{row},{col})")));
        }
        seen[k] = true;
        data[k] = value;
    }
    if let Some(k) = seen.iter().position(|s| !s) {
        let (obs, row, col) = (k / (p * q), (k / q) % p, k % q);
        return Err(CliError::Usage(format!("missing cell ({obs},{row},{col})")));
    }
    Ok(MatrixSample::new(n, p, q, data, None)?)
}

fn parse_wide(recs: &[(u64, csv::StringRecord)], dims: Dims) -> CliResult<MatrixSample> {
    let (Some(p), Some(q)) = (dims.p, dims.q) else {
        return Err(CliError::Usage("wide CSV needs explicit p and q".into()));
    };
    let first = &recs[0].1;
    let has_header = first.get(0).is_some_and(|s| s.parse::<f64>().is_err());
    let body = if has_header { &recs[1..] } else { recs };
    let labeled = match (has_header, first.len()) {
        (true, len) => first.get(0) == Some("label") && len == p * q + 1,
        (false, len) => len == p * q + 1,
    };
    let width = p * q + usize::from(labeled);
    let mut data = Vec::with_capacity(body.len() * p * q);
    let mut labels = Vec::new();
    for (line, rec) in body {
        if rec.len() != width {
            return Err(line_err(*line, format!("expected {width} fields, found {}", rec.len())));
        }
        if labeled {
            let g: u8 = field(rec, 0, *line, "label")?;
            if g != 1 && g != 2 {
                return Err(line_err(*line, "label must be 1 or 2"));
            }
            labels.push(g);
        }
        for k in usize::from(labeled)..width {
            let x: f64 = field(rec, k, *line, "value")?;
            if !x.is_finite() {
                return Err(line_err(*line, "value is not finite"));
            }
            data.push(x);
        }
    }
    let n = body.len();
    if let Some(expected) = dims.n {
        if expected != n {
            return Err(CliError::Usage(format!("expected {expected} observations, found {n}")));
        }
    }
    Ok(MatrixSample::new(n, p, q, data, labeled.then_some(labels))?)
}

/// Long-form CSV of a sample with 17 significant digits per value.
pub fn export_long(sample: &MatrixSample) -> String {
    let mut out = String::from("obs,row,col,value\n");
    let q = sample.q();
    for i in 0..sample.n() {
        for (k, x) in sample.obs(i).iter().enumerate() {
            out.push_str(&format!("{i},{},{},{}\n", k / q, k % q, crate::fmt_f64(*x)));
        }
    }
    out
}
