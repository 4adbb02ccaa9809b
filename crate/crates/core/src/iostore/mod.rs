//! File formats: binary embeddings, label files, plain-text feature import,
//! experiment configs, saved models and line-delimited JSON logs.

mod config;
mod embedding;
mod labels;

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use log::warn;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::classifier::ClassifierParams;
use crate::numerics::{FeatureMatrix, Matrix};
use crate::{Error, Result};

pub use config::{format_config, parse_config, read_config, write_config};
pub use embedding::{
    checksum, read_embedding_file, read_embeddings, write_embedding_file, write_embeddings, EmbeddingFile,
};
pub use labels::{read_labels, write_labels, LabelFile, UNLABELED};

/// Parse delimiter-separated floats, one sample per non-blank line. A
/// whitespace delimiter matches any run of whitespace.
pub fn parse_text_features(text: &str, delimiter: char) -> Result<Matrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = if delimiter.is_whitespace() {
            line.split_whitespace().collect()
        } else {
            line.split(delimiter).map(str::trim).collect()
        };
        let row = fields
            .into_iter()
            .enumerate()
            .map(|(j, f)| {
                f.parse::<f64>()
                    .map_err(|_| Error::Format(format!("line {}, column {}: {f:?} is not a number", i + 1, j + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::Format(format!(
                    "line {}: expected {} columns, found {}",
                    i + 1,
                    first.len(),
                    row.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Empty("feature text"));
    }
    Matrix::from_rows(&rows)
}

/// Features from a text export, ids `0..n`.
pub fn import_text(path: &Path, delimiter: char) -> Result<FeatureMatrix> {
    FeatureMatrix::with_sequential_ids(parse_text_features(&fs::read_to_string(path)?, delimiter)?)
}

pub fn save_model(path: &Path, params: &ClassifierParams) -> Result<()> {
    fs::write(path, serde_json::to_vec(params)?)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<ClassifierParams> {
    let p: ClassifierParams = serde_json::from_slice(&fs::read(path)?)?;
    if !p.is_finite() || p.w1.len() != p.hidden * p.input || p.w2.len() != p.classes * p.hidden {
        return Err(Error::Format(format!("model file {} is inconsistent", path.display())));
    }
    Ok(p)
}

/// Append one JSON line and flush it to disk.
pub fn append_jsonl<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    let mut line = serde_json::to_vec(value)?;
    line.push(b'\n');
    f.write_all(&line)?;
    f.sync_data()?;
    Ok(())
}

/// Every complete line of a JSON-lines file. A final line without its
/// newline is a write cut short by a crash and is skipped with a warning.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    let mut buf = String::new();
    let mut line_no = 0;
    loop {
        buf.clear();
        if reader.read_line(&mut buf)? == 0 {
            break;
        }
        line_no += 1;
        if !buf.ends_with('\n') {
            warn!("{}: ignoring incomplete final line {line_no}", path.display());
            break;
        }
        if buf.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&buf)
                .map_err(|e| Error::Format(format!("{} line {line_no}: {e}", path.display())))?,
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::TrainConfig;

    #[test]
    fn text_import() {
        let m = parse_text_features("1,2,3\n\n4, 5 ,6\n", ',').unwrap();
        assert_eq!((m.rows(), m.cols()), (2, 3));
        assert_eq!(m[(1, 1)], 5.0);
        let ws = parse_text_features("1  2\t3\n4 5 6\n", ' ').unwrap();
        assert_eq!(ws.cols(), 3);
        let tabs = parse_text_features("1\t2\n3\t4\n", '\t').unwrap();
        assert_eq!(tabs[(1, 0)], 3.0);
        let e = parse_text_features("1,2\n3,x\n", ',').unwrap_err().to_string();
        assert!(e.contains("line 2, column 2"), "{e}");
        let e = parse_text_features("1,2\n3\n", ',').unwrap_err().to_string();
        assert!(e.contains("expected 2 columns"), "{e}");
    }

    #[test]
    fn model_and_jsonl_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = ClassifierParams::init(3, &TrainConfig::for_classes(2, 1)).unwrap();
        let path = dir.path().join("m.json");
        save_model(&path, &p).unwrap();
        assert_eq!(load_model(&path).unwrap(), p);

        let log = dir.path().join("log.jsonl");
        append_jsonl(&log, &1u32).unwrap();
        append_jsonl(&log, &2u32).unwrap();
        std::fs::OpenOptions::new().append(true).open(&log).unwrap().write_all(b"3").unwrap();
        assert_eq!(read_jsonl::<u32>(&log).unwrap(), vec![1, 2]);
        assert!(read_jsonl::<u32>(&dir.path().join("absent")).unwrap().is_empty());
    }
}
