//! User CSV ingestion.
//!
//! Comma-separated UTF-8. A header row is assumed when the label column is
//! named, or when any non-label cell of the first row is not a number.
//! Labels are remapped to `0..C` in order of first appearance.

use std::collections::HashMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Dataset, LabeledSample};
use crate::error::{Error, Result};

/// Upload size limit.
pub const MAX_CSV_BYTES: usize = 50 * 1024 * 1024;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LabelColumn {
    Index(usize),
    Name(String),
}

impl Default for LabelColumn {
    fn default() -> Self {
        LabelColumn::Name("label".into())
    }
}

pub fn load_csv(path: impl AsRef<Path>, label: &LabelColumn) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "csv".into());
    load_reader(file, label, name)
}

pub fn load_csv_bytes(bytes: &[u8], label: &LabelColumn, name: impl Into<String>) -> Result<Dataset> {
    load_reader(bytes, label, name.into())
}

fn load_reader<R: Read>(reader: R, label: &LabelColumn, name: String) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            column: None,
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(rows.len() + 1, |p| p.line() as usize);
        if rec.iter().all(str::is_empty) {
            continue;
        }
        rows.push((line, rec));
    }
    let Some((_, first)) = rows.first() else {
        return Err(Error::config("CSV file has no rows"));
    };
    let width = first.len();

    let (label_idx, has_header) = match label {
        LabelColumn::Name(n) => {
            let idx = first.iter().position(|h| h == n).ok_or_else(|| {
                Error::config(format!("label column {n:?} not found in header row"))
            })?;
            (idx, true)
        }
        LabelColumn::Index(i) => {
            if *i >= width {
                return Err(Error::config(format!(
                    "label column index {i} out of range for {width} columns"
                )));
            }
            let header = first
                .iter()
                .enumerate()
                .any(|(c, v)| c != *i && v.parse::<f64>().is_err());
            (*i, header)
        }
    };
    let data_rows = &rows[usize::from(has_header)..];
    if data_rows.len() < 2 {
        return Err(Error::config(format!(
            "CSV needs at least 2 data rows, found {}",
            data_rows.len()
        )));
    }

    let mut label_ids: HashMap<String, usize> = HashMap::new();
    let mut label_names = Vec::new();
    let mut samples = Vec::with_capacity(data_rows.len());
    for (line, rec) in data_rows {
        if rec.len() != width {
            return Err(Error::Parse {
                line: *line,
                column: None,
                message: format!("expected {width} fields, found {}", rec.len()),
            });
        }
        let mut features = Vec::with_capacity(width - 1);
        let mut raw_label = "";
        for (col, cell) in rec.iter().enumerate() {
            if col == label_idx {
                raw_label = cell;
                continue;
            }
            let v = cell.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::Parse {
                line: *line,
                column: Some(col + 1),
                message: format!("non-numeric feature value {cell:?}"),
            })?;
            features.push(v);
        }
        let next = label_ids.len();
        let id = *label_ids.entry(raw_label.to_string()).or_insert_with(|| {
            label_names.push(raw_label.to_string());
            next
        });
        samples.push(LabeledSample::new(features, id));
    }
    if label_names.len() < 2 {
        return Err(Error::config(format!(
            "label column holds a single class ({:?}); at least two are required",
            label_names.first().map(String::as_str).unwrap_or("")
        )));
    }
    if width < 2 {
        return Err(Error::config("CSV needs at least one feature column"));
    }
    Dataset::new(name, label_names.len(), samples, label_names)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn named_label_with_header() {
        let d = load_csv_bytes(
            b"f1,f2,label\n1,2,cat\n3,4,dog\n5,6,cat\n7,8,dog\n",
            &LabelColumn::Name("label".into()),
            "pets",
        )
        .unwrap();
        assert_eq!((d.num_classes, d.feature_dim, d.len()), (2, 2, 4));
        assert_eq!(d.label_names, vec!["cat", "dog"]);
        assert_eq!(d.samples[1], LabeledSample::new(vec![3.0, 4.0], 1));
    }

    #[test]
    fn numeric_labels_first_appearance() {
        let d = load_csv_bytes(b"0.5,3\n0.1,7\n0.9,3\n", &LabelColumn::Index(1), "n").unwrap();
        assert_eq!(d.num_classes, 2);
        assert_eq!(d.label_names, vec!["3", "7"]);
        assert_eq!(d.samples.iter().map(|s| s.label).collect::<Vec<_>>(), vec![0, 1, 0]);
    }

    #[test]
    fn header_autodetected_for_index() {
        let d = load_csv_bytes(b"a,b,y\n1,2,x\n3,4,z\n", &LabelColumn::Index(2), "h").unwrap();
        assert_eq!(d.len(), 2);
        let d = load_csv_bytes(b"1,2,x\n3,4,z\n", &LabelColumn::Index(2), "h").unwrap();
        assert_eq!(d.len(), 2);
    }

    #[test]
    fn errors() {
        let one_row = load_csv_bytes(b"f,label\n1,a\n", &LabelColumn::Name("label".into()), "x");
        assert!(matches!(one_row, Err(Error::Config(_))));

        let ragged = load_csv_bytes(b"f,g,label\n1,2,a\n3,b\n", &LabelColumn::Name("label".into()), "x")
            .unwrap_err();
        match ragged {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            e => panic!("{e:?}"),
        }

        let bad = load_csv_bytes(b"f,g,label\n1,2,a\n3,oops,b\n", &LabelColumn::Name("label".into()), "x")
            .unwrap_err();
        match bad {
            Error::Parse { line, column, .. } => assert_eq!((line, column), (3, Some(2))),
            e => panic!("{e:?}"),
        }

        let single = load_csv_bytes(b"1,a\n2,a\n", &LabelColumn::Index(1), "x");
        assert!(matches!(single, Err(Error::Config(_))));

        let missing = load_csv_bytes(b"f,g\n1,2\n3,4\n", &LabelColumn::Name("label".into()), "x");
        assert!(matches!(missing, Err(Error::Config(_))));
    }
}
