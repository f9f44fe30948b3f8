use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::losses::DataPoint;
use crate::{Error, Result};

use super::Dataset;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Op {
    Add,
    Delete,
}

/// One line of the update stream: `{"op":"add","x":[…],"y":…}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Update {
    pub op: Op,
    #[serde(flatten)]
    pub point: DataPoint,
}

impl Update {
    pub fn add(point: DataPoint) -> Self {
        Update { op: Op::Add, point }
    }

    pub fn delete(point: DataPoint) -> Self {
        Update { op: Op::Delete, point }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SequenceKind {
    Random,
    Churn,
    Drift,
    Deletes,
    ReplayFile,
}

#[derive(Clone, Debug, PartialEq)]
pub struct UpdateSequence {
    pub kind: SequenceKind,
    pub updates: Vec<Update>,
}

impl UpdateSequence {
    pub fn empty(kind: SequenceKind) -> Self {
        UpdateSequence { kind, updates: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.updates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.updates.is_empty()
    }

    /// Replays against `data` and reports the first update that breaks the floor.
    pub fn validate_against(&self, data: &Dataset) -> Result<()> {
        let mut d = data.clone();
        for (i, u) in self.updates.iter().enumerate() {
            d.apply(u).map_err(|e| e.at_round(i + 1))?;
        }
        Ok(())
    }

    pub fn read_jsonl(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut updates = Vec::new();
        for line in BufReader::new(file).lines() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            updates.push(serde_json::from_str(&line)?);
        }
        Ok(UpdateSequence { kind: SequenceKind::ReplayFile, updates })
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        for u in &self.updates {
            serde_json::to_writer(&mut w, u)?;
            w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}
