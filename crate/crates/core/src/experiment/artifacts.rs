//! Minimal CSV writing/reading for the numeric artifacts. Fields never
//! contain commas or quotes, so no escaping is needed; every artifact
//! round-trips through its own parser.

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

pub fn write_csv(path: impl AsRef<Path>, table: &CsvTable) -> Result<()> {
    let mut text = table.header.join(",");
    text.push('\n');
    for row in &table.rows {
        if row.len() != table.header.len() {
            return Err(Error::invalid("write_csv", "row arity mismatch"));
        }
        text.push_str(&row.join(","));
        text.push('\n');
    }
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<CsvTable> {
    let name = path.as_ref().display().to_string();
    let text = std::fs::read_to_string(path.as_ref()).map_err(|_| Error::MissingFile(name.clone()))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::parse(&name, 1, "empty csv"))?
        .split(',')
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let row: Vec<String> = line.split(',').map(str::to_string).collect();
        if row.len() != header.len() {
            return Err(Error::parse(&name, i + 2, "row arity mismatch"));
        }
        rows.push(row);
    }
    Ok(CsvTable { header, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_roundtrip_is_identity() {
        let table = CsvTable {
            header: vec!["a".into(), "b".into()],
            rows: vec![
                vec!["1".into(), "0.5".into()],
                vec!["2".into(), "-3.25".into()],
            ],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_csv(&path, &table).unwrap();
        let back = read_csv(&path).unwrap();
        assert_eq!(table, back);
    }

    #[test]
    fn arity_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "a,b\n1\n").unwrap();
        assert!(read_csv(&path).is_err());
    }
}
