//! File formats shared by the library and the CLI: CSV tables, JSON
//! documents and JSON-lines streams.
//!
//! CSV numbers are written with 17 significant digits (`{:.16e}`), which
//! round-trips every `f64` exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes a header line and numeric rows.
pub fn write_csv<W: Write>(mut w: W, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        if row.len() != header.len() {
            return Err(Error::InvalidParameter(format!(
                "row has {} columns, header {}",
                row.len(),
                header.len()
            )));
        }
        let cells: Vec<String> = row.iter().map(|&x| format_float(x)).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}

/// Parses a numeric CSV with a header line.
pub fn read_csv<R: Read>(r: R) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = BufReader::new(r).lines();
    let header: Vec<String> = match lines.next() {
        Some(line) => line?.split(',').map(|s| s.trim().to_string()).collect(),
        None => return Err(Error::InvalidParameter("empty CSV input".into())),
    };
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|cell| cell.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| Error::InvalidParameter(format!("CSV line {}: {e}", k + 2)))?;
        if row.len() != header.len() {
            return Err(Error::InvalidParameter(format!(
                "CSV line {} has {} columns",
                k + 2,
                row.len()
            )));
        }
        rows.push(row);
    }
    Ok((header, rows))
}

pub fn write_json<W: Write, T: Serialize>(w: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(w, value)?;
    Ok(())
}

pub fn read_json<R: Read, T: DeserializeOwned>(r: R) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(r))?)
}

/// One compact JSON document per line.
pub fn write_jsonl<W: Write, T: Serialize>(mut w: W, items: &[T]) -> Result<()> {
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl<R: Read, T: DeserializeOwned>(r: R) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for line in BufReader::new(r).lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

/// Buffered writer for a new file, creating parent directories.
pub fn create_file(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    Ok(BufWriter::new(File::create(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for x in [0.0, 1.0, -0.1, 1.0 / 3.0, 6.02214076e23, 5e-324, f64::MAX] {
            let s = format_float(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert_eq!(format_float(0.5), "5.0000000000000000e-1");
    }

    #[test]
    fn csv_round_trip() {
        let rows = vec![vec![0.0, 0.25], vec![1.5, -1.0 / 7.0]];
        let mut buf = Vec::new();
        write_csv(&mut buf, &["t", "x"], &rows).unwrap();
        let (header, back) = read_csv(buf.as_slice()).unwrap();
        assert_eq!(header, ["t", "x"]);
        assert_eq!(back, rows);
        assert!(write_csv(Vec::new(), &["t"], &rows).is_err());
        assert!(read_csv("".as_bytes()).is_err());
        assert!(read_csv("t,x\n1,abc\n".as_bytes()).is_err());
    }

    #[test]
    fn jsonl_round_trip() {
        let items = vec![vec![1u32, 2], vec![], vec![3]];
        let mut buf = Vec::new();
        write_jsonl(&mut buf, &items).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "[1,2]\n[]\n[3]\n");
        let back: Vec<Vec<u32>> = read_jsonl(buf.as_slice()).unwrap();
        assert_eq!(back, items);
    }
}
