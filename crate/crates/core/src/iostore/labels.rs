//! `id,label` text files; `-1` marks an unlabeled sample.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use crate::{Error, Result, SampleId};

pub const UNLABELED: i64 = -1;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LabelFile {
    pub entries: Vec<(SampleId, Option<usize>)>,
}

impl LabelFile {
    pub fn from_labels(ids: &[SampleId], labels: &[Option<usize>]) -> Result<Self> {
        if ids.len() != labels.len() {
            return Err(Error::DimensionMismatch { expected: ids.len(), got: labels.len() });
        }
        Ok(LabelFile { entries: ids.iter().copied().zip(labels.iter().copied()).collect() })
    }

    pub fn labeled(&self) -> impl Iterator<Item = (SampleId, usize)> + '_ {
        self.entries.iter().filter_map(|(id, l)| l.map(|c| (*id, c)))
    }

    /// Label of every id in `ids`; ids absent from the file count as
    /// unlabeled, ids absent from `ids` are rejected.
    pub fn aligned(&self, ids: &[SampleId]) -> Result<Vec<Option<usize>>> {
        let known: HashSet<SampleId> = ids.iter().copied().collect();
        if let Some((id, _)) = self.entries.iter().find(|(id, _)| !known.contains(id)) {
            return Err(Error::UnknownId(*id));
        }
        let map: HashMap<SampleId, Option<usize>> = self.entries.iter().copied().collect();
        Ok(ids.iter().map(|id| map.get(id).copied().flatten()).collect())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("id,label\n");
        for (id, label) in &self.entries {
            let l = label.map_or(UNLABELED, |c| c as i64);
            s.push_str(&format!("{id},{l}\n"));
        }
        s
    }

    /// Parse and validate against `classes`; errors name the data row
    /// (1-based, header excluded).
    pub fn parse(text: &str, classes: usize) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let header = reader.headers()?.clone();
        if header.len() != 2 || &header[0] != "id" || &header[1] != "label" {
            return Err(Error::Format(format!("label header must be \"id,label\", found {:?}", header.iter().collect::<Vec<_>>().join(","))));
        }
        let mut seen = HashSet::new();
        let mut entries = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let row = i + 1;
            let rec = rec.map_err(|e| Error::Format(format!("row {row}: {e}")))?;
            let id: SampleId = rec[0]
                .parse()
                .map_err(|_| Error::Format(format!("row {row}: id {:?} is not a non-negative integer", &rec[0])))?;
            let label: i64 = rec[1]
                .parse()
                .map_err(|_| Error::Format(format!("row {row}: label {:?} is not an integer", &rec[1])))?;
            let label = match label {
                UNLABELED => None,
                c if c >= 0 && (c as usize) < classes => Some(c as usize),
                c => {
                    return Err(Error::Format(format!("row {row}: label {c} for id {id} outside 0..{}", classes.saturating_sub(1))))
                }
            };
            if !seen.insert(id) {
                return Err(Error::Format(format!("row {row}: duplicate id {id}")));
            }
            entries.push((id, label));
        }
        Ok(LabelFile { entries })
    }
}

pub fn write_labels(path: &Path, labels: &LabelFile) -> Result<()> {
    fs::write(path, labels.to_text())?;
    Ok(())
}

pub fn read_labels(path: &Path, classes: usize) -> Result<LabelFile> {
    LabelFile::parse(&fs::read_to_string(path)?, classes)
}
