//! CSV and JSON emission with atomic writes, and the matching parsers.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::exact::{format_rational, parse_rational, Rational};

/// One CSV field. Floats print as the shortest decimal that round-trips; rationals as `num/den`.
#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Rational(Rational),
    Text(String),
    Bool(bool),
}

impl Cell {
    pub fn render(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Float(x) => format_float(*x),
            Cell::Rational(r) => format_rational(r),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<i64> for Cell {
    fn from(x: i64) -> Self {
        Cell::Int(x)
    }
}

impl From<u32> for Cell {
    fn from(x: u32) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Bool(x)
    }
}

impl From<Rational> for Cell {
    fn from(x: Rational) -> Self {
        Cell::Rational(x)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}

impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::Text(x)
    }
}

/// Shortest round-trip decimal; non-finite values as `NaN`, `inf`, `-inf`.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        // Both forms are the shortest digits that parse back to the same bits; Debug switches to
        // an exponent for very large or small magnitudes, Display never does.
        let debug = format!("{x:?}");
        if debug.contains('e') {
            debug
        } else {
            format!("{x}")
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) -> Result<()> {
        if row.len() != self.header.len() {
            return Err(Error::Validation(format!(
                "row has {} fields but the header has {}",
                row.len(),
                self.header.len()
            )));
        }
        self.rows.push(row.iter().map(Cell::render).collect());
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// RFC-4180 text with LF line endings; the header is always present.
    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.header).map_err(csv_err)?;
        for row in &self.rows {
            w.write_record(row).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Parse(format!("csv: {e}")))?;
        String::from_utf8(bytes).map_err(|e| Error::Parse(format!("csv: {e}")))
    }

    pub fn parse(text: &str) -> Result<Table> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let header: Vec<String> = r.headers().map_err(csv_err)?.iter().map(String::from).collect();
        if header.is_empty() || header.iter().all(|h| h.is_empty()) {
            return Err(Error::Parse("csv: missing header row".into()));
        }
        let rows = r
            .records()
            .map(|rec| rec.map(|rec| rec.iter().map(String::from).collect()).map_err(csv_err))
            .collect::<Result<Vec<Vec<String>>>>()?;
        Ok(Table { header, rows })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_csv_string()?.as_bytes())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(format!("csv: {e}"))
}

/// Field parsers matching [`Cell::render`].
pub fn parse_float(field: &str) -> Result<f64> {
    match field {
        "NaN" => Ok(f64::NAN),
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => field.parse::<f64>().map_err(|_| Error::Parse(format!("not a number: {field:?}"))),
    }
}

pub fn parse_exact(field: &str) -> Result<Rational> {
    parse_rational(field)
}

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = path.file_name().ok_or_else(|| Error::Validation(format!("{} is not a file path", path.display())))?;
    let tmp: PathBuf = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).and_then(|_| f.sync_all()).map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Parse(format!("json: {e}")))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Time series read back from `trajectory.csv` (t, x) or `msd.csv` (lag, msd_time_avg, ...).
#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

fn parse_two_columns(text: &str, first: &str, second: &str) -> Result<Series> {
    let t = Table::parse(text)?;
    let (a, b) = match (t.column(first), t.column(second)) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::Parse(format!("csv: expected columns {first:?} and {second:?}, got {:?}", t.header))),
    };
    let mut out = Series { x: Vec::with_capacity(t.rows.len()), y: Vec::with_capacity(t.rows.len()) };
    for (i, row) in t.rows.iter().enumerate() {
        let get = |k: usize| row.get(k).ok_or_else(|| Error::Parse(format!("csv: row {} is short", i + 1)));
        let x = parse_float(get(a)?)?;
        let y = parse_float(get(b)?)?;
        if !x.is_finite() {
            return Err(Error::Parse(format!("csv: non-finite {first} in row {}", i + 1)));
        }
        out.x.push(x);
        out.y.push(y);
    }
    if out.x.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Parse(format!("csv: {first} must be strictly increasing")));
    }
    Ok(out)
}

pub fn parse_trajectory_csv(text: &str) -> Result<Series> {
    parse_two_columns(text, "t", "x")
}

pub fn parse_msd_csv(text: &str) -> Result<Series> {
    parse_two_columns(text, "lag", "msd_time_avg")
}

/// Run record written next to every command's outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub precision_bits: usize,
    pub inputs: serde_json::Value,
    pub outputs: Vec<String>,
    pub wall_time_s: f64,
    pub status: String,
}

impl Manifest {
    pub fn write(&self, dir: &Path) -> Result<()> {
        write_json(&dir.join("manifest.json"), self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::exact::rat;
    use proptest::prelude::*;

    #[test]
    fn exact_and_float_cells() {
        let mut t = Table::new(["a", "b", "c"]);
        t.push(vec![rat(1, 3).into(), 0.1.into(), "x,y".into()]).unwrap();
        let text = t.to_csv_string().unwrap();
        assert_eq!(text, "a,b,c\n1/3,0.1,\"x,y\"\n");
        assert_eq!(Table::parse(&text).unwrap(), t);
        assert!(t.push(vec![1i64.into()]).is_err());
    }

    #[test]
    fn float_spellings() {
        assert_eq!(format_float(4.0), "4");
        assert_eq!(format_float(0.1), "0.1");
        assert_eq!(format_float(1e-7), "1e-7");
        assert_eq!(format_float(1.7466666666666668e19), "1.7466666666666668e19");
        assert_eq!(format_float(-0.0), "-0");
    }

    #[test]
    fn empty_table_is_header_only() {
        let t = Table::new(["lag", "msd_time_avg", "msd_ensemble"]);
        assert_eq!(t.to_csv_string().unwrap(), "lag,msd_time_avg,msd_ensemble\n");
        assert_eq!(parse_msd_csv("lag,msd_time_avg,msd_ensemble\n").unwrap(), Series { x: vec![], y: vec![] });
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/out.csv");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }

    #[test]
    fn trajectory_parser_rejects_garbage() {
        assert!(parse_trajectory_csv("").is_err());
        assert!(parse_trajectory_csv("t,y\n1,2\n").is_err());
        assert!(parse_trajectory_csv("t,x\n1,abc\n").is_err());
        assert!(parse_trajectory_csv("t,x\n2,1\n1,1\n").is_err());
        assert!(parse_trajectory_csv("t,x\n1\n").is_err());
        let s = parse_trajectory_csv("t,x\n0,1.5\n0.5,-2e-3\n").unwrap();
        assert_eq!(s.y, vec![1.5, -2e-3]);
    }

    proptest! {
        #[test]
        fn csv_round_trip(rows in prop::collection::vec((any::<f64>(), -1000i64..1000, 1i64..1000, any::<i64>(), "[ -~]{0,12}"), 0..20)) {
            let mut t = Table::new(["f", "q", "i", "s"]);
            for (f, n, d, i, s) in &rows {
                t.push(vec![(*f).into(), rat(*n, *d).into(), (*i).into(), s.clone().into()]).unwrap();
            }
            let back = Table::parse(&t.to_csv_string().unwrap()).unwrap();
            prop_assert_eq!(&back, &t);
            for (row, (f, n, d, i, _)) in back.rows.iter().zip(&rows) {
                let g = parse_float(&row[0]).unwrap();
                prop_assert!(g.to_bits() == f.to_bits() || (g.is_nan() && f.is_nan()));
                prop_assert_eq!(parse_exact(&row[1]).unwrap(), rat(*n, *d));
                prop_assert_eq!(row[2].parse::<i64>().unwrap(), *i);
            }
        }
    }
}
