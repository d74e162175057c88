//! Dataset persistence: a human-readable CSV interchange format and a
//! compact binary format for large synthetic sets.
//!
//! CSV layout (as written by [`save_csv`]): one column per feature named
//! `f0..f{d-1}`, an integer `label` column, and a `split` column with values
//! `train`/`val`/`test`. [`load_csv`] accepts any column names via
//! [`CsvSchema`]; a missing split column marks every row as train.
//!
//! Binary layout: 8 magic bytes, a little-endian u64 header length, a JSON
//! header (row count, dimension, class count, labels, splits, provenance),
//! then the feature matrix as row-major little-endian f64.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Split};
use crate::error::{Error, Result};
use crate::numerics::Matrix;

pub const DATASET_MAGIC: [u8; 8] = *b"IDACDS01";

/// Column mapping for [`load_csv`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvSchema {
    /// Feature columns in matrix order; `None` uses every column that is
    /// neither the label nor the split column, in file order.
    pub feature_cols: Option<Vec<String>>,
    pub label_col: String,
    /// `None` assigns every row to the train split.
    pub split_col: Option<String>,
    /// `None` infers `max(label) + 1` (at least 2).
    pub num_classes: Option<usize>,
}

impl CsvSchema {
    /// The layout produced by [`save_csv`].
    pub fn standard() -> CsvSchema {
        CsvSchema {
            feature_cols: None,
            label_col: "label".to_string(),
            split_col: Some("split".to_string()),
            num_classes: None,
        }
    }
}

fn column_index(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::InvalidConfig(format!("CSV has no '{name}' column")))
}

fn record_line(record: &csv::StringRecord) -> usize {
    record.position().map(|p| p.line() as usize).unwrap_or(0)
}

pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<Dataset> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.kind() {
        csv::ErrorKind::Io(_) => Error::InvalidInput(format!("{}: {e}", path.display())),
        _ => Error::Parse { line: 0, detail: e.to_string() },
    })?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse { line: 1, detail: e.to_string() })?
        .clone();

    let label_idx = column_index(&headers, &schema.label_col)?;
    let split_idx = match &schema.split_col {
        Some(name) => Some(column_index(&headers, name)?),
        None => None,
    };
    let feature_idx: Vec<usize> = match &schema.feature_cols {
        Some(names) => names
            .iter()
            .map(|n| column_index(&headers, n))
            .collect::<Result<_>>()?,
        None => (0..headers.len())
            .filter(|&i| i != label_idx && Some(i) != split_idx)
            .collect(),
    };
    if feature_idx.is_empty() {
        return Err(Error::InvalidConfig("CSV has no feature columns".to_string()));
    }

    let mut data = Vec::new();
    let mut labels = Vec::new();
    let mut splits = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line() as usize).unwrap_or(0),
            detail: e.to_string(),
        })?;
        let line = record_line(&record);
        let field = |idx: usize| -> Result<&str> {
            record.get(idx).ok_or_else(|| Error::Parse {
                line,
                detail: format!("row has only {} fields", record.len()),
            })
        };
        for &idx in &feature_idx {
            let raw = field(idx)?;
            let value: f64 = raw.trim().parse().map_err(|_| Error::Parse {
                line,
                detail: format!("'{raw}' is not a float (column {})", headers[idx].to_string()),
            })?;
            data.push(value);
        }
        let raw = field(label_idx)?;
        let label: usize = raw.trim().parse().map_err(|_| Error::Parse {
            line,
            detail: format!("'{raw}' is not an integer label"),
        })?;
        labels.push(label);
        splits.push(match split_idx {
            Some(idx) => Split::parse(field(idx)?.trim())
                .map_err(|e| Error::Parse { line, detail: e.to_string() })?,
            None => Split::Train,
        });
    }
    if labels.is_empty() {
        return Err(Error::InvalidInput(format!("{}: no data rows", path.display())));
    }

    let num_classes = match schema.num_classes {
        Some(k) => k,
        None => labels.iter().max().map_or(2, |&m| (m + 1).max(2)),
    };
    let dataset = Dataset {
        features: Matrix::from_vec(labels.len(), feature_idx.len(), data)?,
        labels,
        splits,
        num_classes,
        provenance: format!("csv:{}", path.display()),
    };
    dataset.validate()?;
    Ok(dataset)
}

/// Writes the standard layout: `f0..f{d-1},label,split`. Floats use Rust's
/// shortest-round-trip formatting, so a save/load cycle is lossless.
pub fn save_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    dataset.validate()?;
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
    let mut header: Vec<String> = (0..dataset.dim()).map(|i| format!("f{i}")).collect();
    header.push("label".to_string());
    header.push("split".to_string());
    writer.write_record(&header).map_err(csv_io_error)?;
    for r in 0..dataset.len() {
        let mut row: Vec<String> = dataset.features.row(r).iter().map(|v| v.to_string()).collect();
        row.push(dataset.labels[r].to_string());
        row.push(dataset.splits[r].name().to_string());
        writer.write_record(&row).map_err(csv_io_error)?;
    }
    writer.flush()?;
    Ok(())
}

fn csv_io_error(e: csv::Error) -> Error {
    Error::InvalidInput(format!("CSV write failed: {e}"))
}

#[derive(Serialize, Deserialize)]
struct BinaryHeader {
    version: u32,
    n: usize,
    d: usize,
    num_classes: usize,
    labels: Vec<usize>,
    splits: Vec<Split>,
    provenance: String,
}

pub fn save_binary(dataset: &Dataset, path: &Path) -> Result<()> {
    dataset.validate()?;
    let header = BinaryHeader {
        version: 1,
        n: dataset.len(),
        d: dataset.dim(),
        num_classes: dataset.num_classes,
        labels: dataset.labels.clone(),
        splits: dataset.splits.clone(),
        provenance: dataset.provenance.clone(),
    };
    let header_bytes = serde_json::to_vec(&header)?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&DATASET_MAGIC)?;
    w.write_all(&(header_bytes.len() as u64).to_le_bytes())?;
    w.write_all(&header_bytes)?;
    for &v in dataset.features.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_binary(path: &Path) -> Result<Dataset> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Format(format!("{}: too short for a dataset file", path.display())))?;
    if magic != DATASET_MAGIC {
        return Err(Error::Format(format!(
            "{}: bad magic bytes (not a binary dataset)",
            path.display()
        )));
    }
    let mut len_bytes = [0u8; 8];
    r.read_exact(&mut len_bytes)
        .map_err(|_| Error::Format(format!("{}: truncated header length", path.display())))?;
    let header_len = u64::from_le_bytes(len_bytes) as usize;
    let mut header_bytes = vec![0u8; header_len];
    r.read_exact(&mut header_bytes)
        .map_err(|_| Error::Format(format!("{}: truncated header", path.display())))?;
    let header: BinaryHeader = serde_json::from_slice(&header_bytes)
        .map_err(|e| Error::Format(format!("{}: header is not valid JSON: {e}", path.display())))?;
    if header.labels.len() != header.n || header.splits.len() != header.n {
        return Err(Error::Format(format!(
            "{}: header row counts disagree",
            path.display()
        )));
    }

    let mut payload = vec![0u8; header.n * header.d * 8];
    r.read_exact(&mut payload)
        .map_err(|_| Error::Format(format!("{}: truncated feature payload", path.display())))?;
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::Format(format!(
            "{}: trailing bytes after feature payload",
            path.display()
        )));
    }
    let data: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();

    let dataset = Dataset {
        features: Matrix::from_vec(header.n, header.d, data)?,
        labels: header.labels,
        splits: header.splits,
        num_classes: header.num_classes,
        provenance: header.provenance,
    };
    dataset.validate()?;
    Ok(dataset)
}

/// Loads either format, sniffing by magic bytes. CSV files are read with the
/// standard layout (a `label` column, a `split` column if present, every
/// other column a feature).
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let mut probe = [0u8; 8];
    let is_binary = {
        let mut f = File::open(path)?;
        match f.read_exact(&mut probe) {
            Ok(()) => probe == DATASET_MAGIC,
            Err(_) => false,
        }
    };
    if is_binary {
        return load_binary(path);
    }
    let mut schema = CsvSchema::standard();
    let header_has_split = csv::Reader::from_path(path)
        .ok()
        .and_then(|mut r| r.headers().ok().map(|h| h.iter().any(|c| c == "split")))
        .unwrap_or(false);
    if !header_has_split {
        schema.split_col = None;
    }
    load_csv(path, &schema)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_dataset() -> Dataset {
        let features = Matrix::from_vec(
            4,
            2,
            vec![0.1 + 0.2, -3.5e300, 1e-17, 2.0, f64::MIN_POSITIVE, -0.0, 42.0, 7.25],
        )
        .unwrap();
        Dataset {
            features,
            labels: vec![0, 1, 1, 0],
            splits: vec![Split::Train, Split::Train, Split::Val, Split::Test],
            num_classes: 2,
            provenance: "unit fixture".to_string(),
        }
    }

    #[test]
    fn three_row_fixture_parses_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fixture.csv");
        let mut f = File::create(&path).unwrap();
        writeln!(f, "f0,f1,label,split").unwrap();
        writeln!(f, "1.5,-2.25,0,train").unwrap();
        writeln!(f, "0.0,3.0,1,val").unwrap();
        writeln!(f, "-7.125,0.5,1,test").unwrap();
        drop(f);

        let ds = load_csv(&path, &CsvSchema::standard()).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.dim(), 2);
        assert_eq!(ds.features.data(), &[1.5, -2.25, 0.0, 3.0, -7.125, 0.5]);
        assert_eq!(ds.labels, vec![0, 1, 1]);
        assert_eq!(ds.splits, vec![Split::Train, Split::Val, Split::Test]);
        assert_eq!(ds.num_classes, 2);
    }

    #[test]
    fn missing_label_column_is_a_schema_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("no_label.csv");
        std::fs::write(&path, "f0,f1,target\n1.0,2.0,0\n").unwrap();
        let err = load_csv(&path, &CsvSchema::standard()).unwrap_err();
        assert!(matches!(err, Error::InvalidConfig(_)), "got {err:?}");
    }

    #[test]
    fn malformed_row_reports_its_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "f0,label\n1.0,0\nnot_a_number,1\n").unwrap();
        match load_csv(&path, &CsvSchema { split_col: None, ..CsvSchema::standard() }) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected a parse error with a line number, got {other:?}"),
        }
    }

    #[test]
    fn fractional_label_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("frac.csv");
        std::fs::write(&path, "f0,label\n1.0,0.5\n").unwrap();
        assert!(matches!(
            load_csv(&path, &CsvSchema { split_col: None, ..CsvSchema::standard() }),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn label_outside_declared_classes_is_invalid() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("wide.csv");
        std::fs::write(&path, "f0,label\n1.0,0\n2.0,5\n").unwrap();
        let schema = CsvSchema {
            split_col: None,
            num_classes: Some(2),
            ..CsvSchema::standard()
        };
        assert!(matches!(
            load_csv(&path, &schema),
            Err(Error::InvalidLabel { label: 5, num_classes: 2 })
        ));
    }

    #[test]
    fn without_split_column_every_row_is_train() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("plain.csv");
        std::fs::write(&path, "f0,f1,label\n1.0,2.0,0\n3.0,4.0,1\n").unwrap();
        let ds = load_dataset(&path).unwrap();
        assert_eq!(ds.splits, vec![Split::Train, Split::Train]);
    }

    #[test]
    fn explicit_feature_columns_select_and_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cols.csv");
        std::fs::write(&path, "a,b,c,label\n1.0,2.0,3.0,0\n4.0,5.0,6.0,1\n").unwrap();
        let schema = CsvSchema {
            feature_cols: Some(vec!["c".to_string(), "a".to_string()]),
            label_col: "label".to_string(),
            split_col: None,
            num_classes: None,
        };
        let ds = load_csv(&path, &schema).unwrap();
        assert_eq!(ds.features.data(), &[3.0, 1.0, 6.0, 4.0]);
    }

    #[test]
    fn csv_round_trip_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("round.csv");
        let original = sample_dataset();
        save_csv(&original, &path).unwrap();
        let loaded = load_dataset(&path).unwrap();
        assert_eq!(loaded.features, original.features);
        assert_eq!(loaded.labels, original.labels);
        assert_eq!(loaded.splits, original.splits);
        assert_eq!(loaded.num_classes, original.num_classes);
    }

    #[test]
    fn binary_round_trip_preserves_everything() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("round.bin");
        let original = sample_dataset();
        save_binary(&original, &path).unwrap();
        let loaded = load_dataset(&path).unwrap();
        assert_eq!(loaded, original);
    }

    #[test]
    fn corrupt_binary_inputs_are_format_errors() {
        let dir = tempfile::tempdir().unwrap();

        let bad_magic = dir.path().join("magic.bin");
        std::fs::write(&bad_magic, b"NOTMYFMT rest of file").unwrap();
        assert!(matches!(load_binary(&bad_magic), Err(Error::Format(_))));

        let truncated = dir.path().join("trunc.bin");
        let full = dir.path().join("full.bin");
        save_binary(&sample_dataset(), &full).unwrap();
        let bytes = std::fs::read(&full).unwrap();
        std::fs::write(&truncated, &bytes[..bytes.len() - 9]).unwrap();
        assert!(matches!(load_binary(&truncated), Err(Error::Format(_))));

        let padded = dir.path().join("padded.bin");
        let mut extended = bytes.clone();
        extended.push(0);
        std::fs::write(&padded, &extended).unwrap();
        assert!(matches!(load_binary(&padded), Err(Error::Format(_))));
    }

    #[test]
    fn empty_csv_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.csv");
        std::fs::write(&path, "f0,label\n").unwrap();
        assert!(load_csv(&path, &CsvSchema { split_col: None, ..CsvSchema::standard() }).is_err());
    }
}
