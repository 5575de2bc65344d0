//! Tab-separated table I/O for generated artifacts and plot data.
//!
//! The format is deliberately trivial: optional `# key=value` comment lines,
//! one tab-separated header row, then tab-separated data rows. Floats are
//! written with Rust's shortest round-trip formatting, so reading a file back
//! reproduces the exact `f64` bits.

use crate::{Error, Result};
use std::io::{BufWriter, Write};
use std::path::Path;

/// An in-memory tab-separated table with `# key=value` metadata.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TsvTable {
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// Shortest round-trip representation of a float (full precision).
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

fn check_cell(cell: &str) -> Result<()> {
    if cell.contains('\t') || cell.contains('\n') || cell.contains('\r') {
        return Err(Error::Config(format!(
            "table cell {cell:?} contains a tab or newline"
        )));
    }
    Ok(())
}

impl TsvTable {
    pub fn new<I, S>(columns: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        TsvTable {
            meta: Vec::new(),
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    /// Append a `# key=value` metadata line (builder style).
    pub fn with_meta(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.meta.push((key.into(), value.into()));
        self
    }

    pub fn push_row<I, S>(&mut self, row: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let row: Vec<String> = row.into_iter().map(Into::into).collect();
        if row.len() != self.columns.len() {
            return Err(Error::Shape(format!(
                "row has {} cells, table has {} columns",
                row.len(),
                self.columns.len()
            )));
        }
        for cell in &row {
            check_cell(cell)?;
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Parse one column as floats.
    pub fn float_column(&self, name: &str) -> Result<Vec<f64>> {
        let idx = self
            .column_index(name)
            .ok_or_else(|| Error::Parse(format!("table has no column {name:?}")))?;
        self.rows
            .iter()
            .map(|r| {
                r[idx]
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("bad float {:?} in column {name:?}", r[idx])))
            })
            .collect()
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        for (k, v) in &self.meta {
            check_cell(k)?;
            check_cell(v)?;
        }
        for c in &self.columns {
            check_cell(c)?;
        }
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        (|| -> std::io::Result<()> {
            for (k, v) in &self.meta {
                writeln!(w, "# {k}={v}")?;
            }
            writeln!(w, "{}", self.columns.join("\t"))?;
            for row in &self.rows {
                writeln!(w, "{}", row.join("\t"))?;
            }
            w.flush()
        })()
        .map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<TsvTable> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut meta = Vec::new();
        let mut columns: Option<Vec<String>> = None;
        let mut rows = Vec::new();
        for line in text.lines() {
            if let Some(comment) = line.strip_prefix('#') {
                let comment = comment.trim_start();
                match comment.split_once('=') {
                    Some((k, v)) => meta.push((k.trim().to_string(), v.to_string())),
                    None => meta.push((comment.to_string(), String::new())),
                }
                continue;
            }
            let cells: Vec<String> = line.split('\t').map(str::to_string).collect();
            match &columns {
                None => columns = Some(cells),
                Some(cols) => {
                    if cells.len() != cols.len() {
                        return Err(Error::Parse(format!(
                            "row with {} cells in a {}-column table ({})",
                            cells.len(),
                            cols.len(),
                            path.display()
                        )));
                    }
                    rows.push(cells);
                }
            }
        }
        let columns =
            columns.ok_or_else(|| Error::Parse(format!("{}: no header row", path.display())))?;
        Ok(TsvTable {
            meta,
            columns,
            rows,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_everything() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.tsv");
        let mut table = TsvTable::new(["t", "y"])
            .with_meta("tool_version", "0.1.0")
            .with_meta("config_hash", "deadbeef");
        table.push_row([fmt_f64(0.1), fmt_f64(0.9)]).unwrap();
        table
            .push_row([fmt_f64(0.30000000000000004), fmt_f64(1e-300)])
            .unwrap();
        table.write(&path).unwrap();

        let back = TsvTable::read(&path).unwrap();
        assert_eq!(back, table);
        // Shortest round-trip formatting restores the exact bits.
        assert_eq!(back.float_column("t").unwrap()[1], 0.30000000000000004);
        assert_eq!(back.float_column("y").unwrap()[1], 1e-300);
    }

    #[test]
    fn arity_and_cell_validation() {
        let mut table = TsvTable::new(["a", "b"]);
        assert!(table.push_row(["1"]).is_err());
        assert!(table.push_row(["1", "x\ty"]).is_err());
        assert!(table.push_row(["1", "2"]).is_ok());
    }

    #[test]
    fn headers_only_file_is_valid() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.tsv");
        TsvTable::new(["a", "b"])
            .with_meta("note", "no rows")
            .write(&path)
            .unwrap();
        let back = TsvTable::read(&path).unwrap();
        assert!(back.rows.is_empty());
        assert_eq!(back.columns, vec!["a", "b"]);
        assert_eq!(back.meta[0].1, "no rows");
    }

    #[test]
    fn read_errors_carry_context() {
        let dir = tempfile::tempdir().unwrap();
        let missing = TsvTable::read(&dir.path().join("nope.tsv"));
        match missing {
            Err(Error::Io { path, .. }) => assert!(path.ends_with("nope.tsv")),
            other => panic!("expected io error, got {other:?}"),
        }
        let ragged = dir.path().join("ragged.tsv");
        std::fs::write(&ragged, "a\tb\n1\t2\t3\n").unwrap();
        assert!(TsvTable::read(&ragged).is_err());
        assert!(TsvTable::read(&dir.path().join("ragged.tsv")).is_err());
        let no_header = dir.path().join("comments.tsv");
        std::fs::write(&no_header, "# only=comments\n").unwrap();
        assert!(TsvTable::read(&no_header).is_err());
        assert!(
            TsvTable::new(["a"]).float_column("b").is_err(),
            "unknown column must error"
        );
    }
}
