//! Embedding records, datasets, and the JSON Lines interchange format.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::Deserialize;

use crate::error::{io_err, Error, Result};
use crate::textfmt::format_f64;

/// Embedding width used when nothing else is configured.
pub const DEFAULT_DIM: usize = 128;

/// One face image: identity keys plus its embedding coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRecord {
    pub subject_id: String,
    pub image_id: String,
    pub vector: Vec<f64>,
}

impl EmbeddingRecord {
    /// Builds a record, rejecting empty or non-finite vectors.
    pub fn new(
        subject_id: impl Into<String>,
        image_id: impl Into<String>,
        vector: Vec<f64>,
    ) -> Result<Self> {
        let subject_id = subject_id.into();
        let image_id = image_id.into();
        if vector.is_empty() {
            return Err(Error::InvalidConfig(
                "embedding vector must not be empty".into(),
            ));
        }
        if let Some(i) = vector.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("vector entry {i} of record ({subject_id}, {image_id})"),
            });
        }
        Ok(Self {
            subject_id,
            image_id,
            vector,
        })
    }

    /// The (subject, image) pair that uniquely identifies the record.
    pub fn key(&self) -> (&str, &str) {
        (&self.subject_id, &self.image_id)
    }
}

/// An ordered, non-empty collection of embedding records sharing one
/// dimension, with unique (subject, image) keys.
#[derive(Debug, Clone)]
pub struct Dataset {
    records: Vec<EmbeddingRecord>,
    index: HashMap<(String, String), usize>,
    dim: usize,
}

impl Dataset {
    /// Validates dimension consistency and key uniqueness.
    pub fn new(records: Vec<EmbeddingRecord>) -> Result<Self> {
        let dim = records
            .first()
            .map(|r| r.vector.len())
            .ok_or(Error::EmptyDataset)?;
        let mut index = HashMap::with_capacity(records.len());
        for (i, record) in records.iter().enumerate() {
            if record.vector.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: record.vector.len(),
                });
            }
            let key = (record.subject_id.clone(), record.image_id.clone());
            if index.insert(key, i).is_some() {
                return Err(Error::DuplicateKey {
                    subject: record.subject_id.clone(),
                    image: record.image_id.clone(),
                });
            }
        }
        Ok(Self {
            records,
            index,
            dim,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    /// Always false; construction rejects empty record lists. Present so the
    /// type behaves like a collection.
    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[EmbeddingRecord] {
        &self.records
    }

    pub fn get(&self, subject_id: &str, image_id: &str) -> Option<&EmbeddingRecord> {
        self.index
            .get(&(subject_id.to_owned(), image_id.to_owned()))
            .map(|&i| &self.records[i])
    }
}

#[derive(Deserialize)]
struct JsonlRecord {
    subject: String,
    image: String,
    vec: Vec<f64>,
}

/// Reads a JSON Lines embedding file, one object per line:
/// `{"subject": "<id>", "image": "<id>", "vec": [<reals>]}`.
///
/// Malformed lines, inconsistent dimensions, non-finite entries, and
/// duplicate keys are rejected with the offending line number. Blank lines
/// are skipped.
pub fn read_jsonl(path: &Path) -> Result<Dataset> {
    let file = File::open(path).map_err(io_err(path))?;
    let reader = BufReader::new(file);
    let mut records = Vec::new();
    let mut dim: Option<usize> = None;
    let mut seen: HashMap<(String, String), usize> = HashMap::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let malformed = |message: String| Error::Malformed {
            path: path.to_owned(),
            line: lineno,
            message,
        };
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: JsonlRecord =
            serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
        match dim {
            None => dim = Some(parsed.vec.len()),
            Some(d) if parsed.vec.len() != d => {
                return Err(malformed(format!(
                    "vector has {} entries, expected {}",
                    parsed.vec.len(),
                    d
                )));
            }
            Some(_) => {}
        }
        if let Some(first) = seen.insert((parsed.subject.clone(), parsed.image.clone()), lineno) {
            return Err(malformed(format!(
                "duplicate record key ({}, {}), first seen on line {first}",
                parsed.subject, parsed.image
            )));
        }
        let record = EmbeddingRecord::new(parsed.subject, parsed.image, parsed.vec)
            .map_err(|e| malformed(e.to_string()))?;
        records.push(record);
    }
    Dataset::new(records)
}

/// Writes the JSON Lines embedding format with round-trip-exact reals.
pub fn write_jsonl(dataset: &Dataset, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for record in dataset.records() {
        write_record(&mut w, record).map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn write_record(w: &mut impl Write, record: &EmbeddingRecord) -> std::io::Result<()> {
    // serde_json handles string escaping; the reals are formatted by hand
    let subject =
        serde_json::to_string(&record.subject_id).expect("string serialization cannot fail");
    let image = serde_json::to_string(&record.image_id).expect("string serialization cannot fail");
    write!(
        w,
        "{{\"subject\": {subject}, \"image\": {image}, \"vec\": ["
    )?;
    for (i, v) in record.vector.iter().enumerate() {
        if i > 0 {
            write!(w, ", ")?;
        }
        write!(w, "{}", format_f64(*v))?;
    }
    writeln!(w, "]}}")
}

#[cfg(test)]
mod tests {
    use std::fs;

    use super::*;

    fn rec(subject: &str, image: &str, vector: Vec<f64>) -> EmbeddingRecord {
        EmbeddingRecord::new(subject, image, vector).unwrap()
    }

    #[test]
    fn rejects_empty_and_non_finite_vectors() {
        assert!(matches!(
            EmbeddingRecord::new("s", "i", vec![]),
            Err(Error::InvalidConfig(_))
        ));
        assert!(matches!(
            EmbeddingRecord::new("s", "i", vec![1.0, f64::NAN]),
            Err(Error::NonFinite { .. })
        ));
        assert!(matches!(
            EmbeddingRecord::new("s", "i", vec![f64::INFINITY]),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn dataset_enforces_uniform_dimension_and_unique_keys() {
        let err = Dataset::new(vec![
            rec("a", "1", vec![0.0, 1.0]),
            rec("a", "2", vec![0.0]),
        ])
        .unwrap_err();
        assert!(matches!(
            err,
            Error::DimensionMismatch {
                expected: 2,
                got: 1
            }
        ));

        let err =
            Dataset::new(vec![rec("a", "1", vec![0.0]), rec("a", "1", vec![1.0])]).unwrap_err();
        assert!(matches!(err, Error::DuplicateKey { .. }));

        assert!(matches!(Dataset::new(vec![]), Err(Error::EmptyDataset)));
    }

    #[test]
    fn get_looks_up_by_key() {
        let ds = Dataset::new(vec![rec("a", "1", vec![0.0]), rec("b", "1", vec![2.0])]).unwrap();
        assert_eq!(ds.get("b", "1").unwrap().vector, vec![2.0]);
        assert!(ds.get("b", "2").is_none());
        assert_eq!(ds.dim(), 1);
        assert_eq!(ds.len(), 2);
    }

    #[test]
    fn jsonl_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.jsonl");
        let ds = Dataset::new(vec![
            rec("s, with comma", "i\"1", vec![0.1, -1.0 / 3.0]),
            rec("t", "i2", vec![1e-300, 2.5]),
        ])
        .unwrap();
        write_jsonl(&ds, &path).unwrap();
        let back = read_jsonl(&path).unwrap();
        assert_eq!(back.len(), 2);
        for (a, b) in ds.records().iter().zip(back.records()) {
            assert_eq!(a.subject_id, b.subject_id);
            assert_eq!(a.image_id, b.image_id);
            let bits_a: Vec<u64> = a.vector.iter().map(|v| v.to_bits()).collect();
            let bits_b: Vec<u64> = b.vector.iter().map(|v| v.to_bits()).collect();
            assert_eq!(bits_a, bits_b);
        }
    }

    #[test]
    fn read_reports_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");

        fs::write(
            &path,
            "{\"subject\": \"a\", \"image\": \"1\", \"vec\": [1.0]}\nnot json\n",
        )
        .unwrap();
        match read_jsonl(&path).unwrap_err() {
            Error::Malformed { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error: {other:?}"),
        }

        fs::write(
            &path,
            concat!(
                "{\"subject\": \"a\", \"image\": \"1\", \"vec\": [1.0]}\n",
                "{\"subject\": \"a\", \"image\": \"2\", \"vec\": [1.0, 2.0]}\n",
            ),
        )
        .unwrap();
        match read_jsonl(&path).unwrap_err() {
            Error::Malformed { line, message, .. } => {
                assert_eq!(line, 2);
                assert!(message.contains("expected 1"), "message: {message}");
            }
            other => panic!("unexpected error: {other:?}"),
        }

        fs::write(
            &path,
            concat!(
                "{\"subject\": \"a\", \"image\": \"1\", \"vec\": [1.0]}\n",
                "\n",
                "{\"subject\": \"a\", \"image\": \"1\", \"vec\": [2.0]}\n",
            ),
        )
        .unwrap();
        match read_jsonl(&path).unwrap_err() {
            Error::Malformed { line, message, .. } => {
                assert_eq!(line, 3);
                assert!(message.contains("duplicate"), "message: {message}");
            }
            other => panic!("unexpected error: {other:?}"),
        }
    }

    #[test]
    fn missing_file_reports_path() {
        let err = read_jsonl(Path::new("/nonexistent/ds.jsonl")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/ds.jsonl"));
    }

    #[test]
    fn empty_file_is_an_empty_dataset_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.jsonl");
        fs::write(&path, "").unwrap();
        assert!(matches!(read_jsonl(&path), Err(Error::EmptyDataset)));
    }
}
