//! Wide CSV layout: a header row of series names, one column per series,
//! optionally preceded by a date column.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Series;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvLayout {
    /// First column holds dates (or any labels) and is skipped.
    #[serde(default)]
    pub date_column: bool,
}

pub fn load_csv(path: impl AsRef<Path>, layout: CsvLayout) -> Result<Vec<Series>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, layout)
}

fn parse_error(err: csv::Error) -> Error {
    let line = match err.kind() {
        csv::ErrorKind::UnequalLengths { pos, .. } => pos.as_ref().map(|p| p.line()),
        csv::ErrorKind::Utf8 { pos, .. } => pos.as_ref().map(|p| p.line()),
        _ => err.position().map(|p| p.line()),
    };
    Error::Parse { line: line.unwrap_or(0), message: err.to_string() }
}

pub fn read_csv(reader: impl Read, layout: CsvLayout) -> Result<Vec<Series>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(false).from_reader(reader);
    let skip = usize::from(layout.date_column);
    let headers = rdr.headers().map_err(parse_error)?.clone();
    if headers.len() <= skip || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(Error::Parse { line: 1, message: "missing header row or no series columns".into() });
    }
    let names: Vec<String> = headers.iter().skip(skip).map(|h| h.trim().to_string()).collect();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); names.len()];

    let mut last_line = 1;
    for record in rdr.records() {
        let record = record.map_err(parse_error)?;
        let line = record.position().map_or(0, |p| p.line());
        last_line = line;
        for (col, cell) in record.iter().skip(skip).enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                line,
                message: format!("non-numeric value '{cell}' in column '{}'", names[col]),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse { line, message: format!("non-finite value '{cell}' in column '{}'", names[col]) });
            }
            columns[col].push(v);
        }
    }
    if columns[0].len() < 2 {
        return Err(Error::Parse {
            line: last_line + 1,
            message: format!("need at least 2 data rows, found {}", columns[0].len()),
        });
    }
    names.into_iter().zip(columns).map(|(name, values)| Series::new(name, values)).collect()
}

/// Write equally long series as a wide CSV.
pub fn write_csv(path: impl AsRef<Path>, series: &[Series]) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write_csv_to(&mut buf, series)?;
    let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&buf).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_csv_to(out: &mut Vec<u8>, series: &[Series]) -> Result<()> {
    let len = series.first().map(Series::len).ok_or_else(|| Error::Argument("no series to write".into()))?;
    if series.iter().any(|s| s.len() != len) {
        return Err(Error::Argument("wide CSV needs series of equal length".into()));
    }
    let mut w = csv::Writer::from_writer(out);
    let to_err = |e: csv::Error| Error::Argument(format!("csv encoding failed: {e}"));
    w.write_record(series.iter().map(|s| s.name.as_str())).map_err(to_err)?;
    for i in 0..len {
        w.write_record(series.iter().map(|s| s.values[i].to_string())).map_err(to_err)?;
    }
    w.flush().map_err(|e| Error::Argument(format!("csv encoding failed: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(text: &str, date_column: bool) -> Result<Vec<Series>> {
        read_csv(text.as_bytes(), CsvLayout { date_column })
    }

    #[test]
    fn minimal_wide_file() {
        let s = read("a,b\n1,2\n3,4\n5,6.5\n", false).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].name, "a");
        assert_eq!(s[0].values, vec![1.0, 3.0, 5.0]);
        assert_eq!(s[1].values, vec![2.0, 4.0, 6.5]);
    }

    #[test]
    fn date_column_is_skipped() {
        let s = read("date,x\n2005-07-12,10.5\n2005-07-13,11\n", true).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].name, "x");
        assert_eq!(s[0].values, vec![10.5, 11.0]);
    }

    #[test]
    fn non_numeric_cell_reports_its_line() {
        let text = "a,b\n1,1\n2,2\n3,3\n4,4\n5,5\n6,oops\n7,7\n";
        match read(text, false) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 7);
                assert!(message.contains("oops"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ragged_row_reports_its_line() {
        match read("a,b\n1,2\n3\n", false) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_input_is_a_parse_error() {
        assert!(matches!(read("", false), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(read("a,b\n", false), Err(Error::Parse { .. })));
    }

    #[test]
    fn written_files_read_back_exactly() {
        let series = vec![
            Series::new("p", vec![0.1, 1.0 / 3.0, 1e-17]).unwrap(),
            Series::new("q", vec![123456.789, -2.5, 0.0]).unwrap(),
        ];
        let mut buf = Vec::new();
        write_csv_to(&mut buf, &series).unwrap();
        assert_eq!(read_csv(buf.as_slice(), CsvLayout::default()).unwrap(), series);
    }
}
