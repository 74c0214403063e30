use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fitting::Trace;

/// Locale-independent number with 17 significant digits.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

/// A cell of an output table.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(x) => fmt_num(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(i: usize) -> Self {
        Cell::Int(i as i64)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

/// Header plus rows with a fixed column order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.header.len(), "row width differs from header");
        self.rows.push(row);
    }

    /// RFC 4180 CSV with `\n` line endings.
    pub fn to_csv(&self) -> Vec<u8> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// Writes `bytes`, creating parent directories, and returns their SHA-256.
pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<String> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| io_err(path, e))?;
    Ok(sha256_hex(bytes))
}

/// Reads a trace CSV: a header row, then `x,y` or `x,y,sigma` columns.
/// No minimum length is imposed here; fits check their own.
pub fn read_trace(path: &Path) -> Result<Trace> {
    let text = std::fs::read(path).map_err(|e| io_err(path, e))?;
    parse_trace(&text, &path.display().to_string())
}

pub fn parse_trace(bytes: &[u8], origin: &str) -> Result<Trace> {
    let parse_err = |line: usize, column: usize, message: String| Error::Parse {
        path: origin.to_string(),
        line,
        column,
        message,
    };
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
    let header = r.headers().map_err(|e| parse_err(1, 1, e.to_string()))?;
    let width = header.len();
    if header.iter().all(|h| h.trim().parse::<f64>().is_ok()) {
        return Err(parse_err(1, 1, "header row required".into()));
    }
    if !(2..=3).contains(&width) {
        return Err(parse_err(1, 1, format!("expected 2 or 3 columns, found {width}")));
    }
    let (mut x, mut y, mut s) = (Vec::new(), Vec::new(), Vec::new());
    for rec in r.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, 1, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let mut vals = [0.0; 3];
        for (k, field) in rec.iter().enumerate() {
            vals[k] = field
                .trim()
                .parse()
                .map_err(|_| parse_err(line, k + 1, format!("not a number: {field:?}")))?;
        }
        x.push(vals[0]);
        y.push(vals[1]);
        s.push(vals[2]);
    }
    let sigma = (width == 3).then_some(s);
    Trace::series(x, y, sigma)
}

/// Trace as an `x,y[,sigma]` table with the given column names.
pub fn trace_table(trace: &Trace, x_name: &str, y_name: &str) -> Table {
    let mut t = match trace.sigma {
        Some(_) => Table::new(&[x_name, y_name, "sigma"]),
        None => Table::new(&[x_name, y_name]),
    };
    for k in 0..trace.len() {
        let mut row = vec![Cell::Num(trace.x[k]), Cell::Num(trace.y[k])];
        if let Some(s) = &trace.sigma {
            row.push(Cell::Num(s[k]));
        }
        t.push(row);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_keep_seventeen_digits() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            let s = fmt_num(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
            let mantissa = s.split('e').next().unwrap().trim_start_matches('-');
            assert_eq!(mantissa.chars().filter(char::is_ascii_digit).count(), 17);
        }
    }

    #[test]
    fn text_cells_are_quoted() {
        let mut t = Table::new(&["a", "note"]);
        t.push(vec![1.5.into(), "x, \"y\"".into()]);
        let csv = String::from_utf8(t.to_csv()).unwrap();
        assert_eq!(csv, "a,note\n1.5000000000000000e0,\"x, \"\"y\"\"\"\n");
    }

    #[test]
    fn trace_round_trip() {
        let tr = Trace::series(vec![0.0, 0.5, 1.0], vec![1.0 / 3.0, 2.0, -1e-12], Some(vec![0.1; 3])).unwrap();
        let bytes = trace_table(&tr, "x", "y").to_csv();
        assert_eq!(parse_trace(&bytes, "mem").unwrap(), tr);
        let two = Trace::series(vec![1.0, 2.0], vec![3.0, 4.0], None).unwrap();
        assert_eq!(parse_trace(&trace_table(&two, "x", "y").to_csv(), "mem").unwrap(), two);
    }

    #[test]
    fn malformed_traces() {
        assert!(parse_trace(b"1,2\n3,4\n", "mem").is_err());
        assert!(parse_trace(b"x\n1\n", "mem").is_err());
        match parse_trace(b"x,y\n1,2\n2,abc\n", "mem").unwrap_err() {
            Error::Parse { line, column, .. } => assert_eq!((line, column), (3, 2)),
            e => panic!("{e:?}"),
        }
        assert!(parse_trace(b"x,y\n1,1\n1,2\n", "mem").is_err());
    }

    #[test]
    fn write_reports_checksum() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/a.csv");
        let sum = write_bytes(&p, b"abc").unwrap();
        assert_eq!(sum, "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
        assert_eq!(std::fs::read(&p).unwrap(), b"abc");
    }
}
