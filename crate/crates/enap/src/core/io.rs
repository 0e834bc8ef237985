use std::collections::BTreeSet;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Dataset, DatasetError, Pmm, PmmEdge, PmmState, Trajectory};

#[derive(Debug, Error)]
pub enum CoreIoError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error at line {line}: {source}")]
    JsonLine {
        line: usize,
        source: serde_json::Error,
    },
    #[error("parse error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("dataset invalid: {0}")]
    Dataset(#[from] DatasetError),
    #[error("pmm file references state {0} that is not declared")]
    UnknownState(usize),
}

/// Reads a trajectory file: JSON Lines, one trajectory object per line.
pub fn load_dataset(path: &Path) -> Result<Dataset, CoreIoError> {
    let file = fs::File::open(path)?;
    let mut trajectories = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let traj: Trajectory = serde_json::from_str(&line)
            .map_err(|source| CoreIoError::JsonLine { line: i + 1, source })?;
        trajectories.push(traj);
    }
    Ok(Dataset::new(trajectories)?)
}

/// Writes a dataset as JSON Lines with LF line endings.
pub fn save_dataset(ds: &Dataset, path: &Path) -> Result<(), CoreIoError> {
    let mut out = fs::File::create(path)?;
    for traj in &ds.trajectories {
        let line = serde_json::to_string(traj)?;
        out.write_all(line.as_bytes())?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

// File mirror of Pmm with the exact key order and array sorting the format
// pins down, so byte determinism falls out of serde field order.
#[derive(Serialize, Deserialize)]
struct PmmFile {
    alphabet_size: usize,
    action_dim: usize,
    initial: usize,
    states: Vec<StateFile>,
    edges: Vec<EdgeFile>,
}

#[derive(Serialize, Deserialize)]
struct StateFile {
    id: usize,
    nis: Vec<usize>,
    centroid: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct EdgeFile {
    src: usize,
    input: usize,
    dst: usize,
    prob: f64,
    action_mean: Vec<f64>,
    action_samples: usize,
}

pub fn pmm_to_json(pmm: &Pmm) -> String {
    let mut states: Vec<&PmmState> = pmm.states.iter().collect();
    states.sort_by_key(|s| s.id);
    let mut edges: Vec<&PmmEdge> = pmm.edges.iter().collect();
    edges.sort_by_key(|e| (e.src, e.input, e.dst));
    let file = PmmFile {
        alphabet_size: pmm.alphabet_size,
        action_dim: pmm.action_dim,
        initial: pmm.initial().unwrap_or(0),
        states: states
            .iter()
            .map(|s| StateFile {
                id: s.id,
                nis: s.nis.iter().copied().collect(),
                centroid: s.centroid.clone(),
            })
            .collect(),
        edges: edges
            .iter()
            .map(|e| EdgeFile {
                src: e.src,
                input: e.input,
                dst: e.dst,
                prob: e.prob,
                action_mean: e.action_mean.clone(),
                action_samples: e.action_samples,
            })
            .collect(),
    };
    let mut s = serde_json::to_string(&file).expect("pmm serializes");
    s.push('\n');
    s
}

pub fn pmm_from_json(text: &str) -> Result<Pmm, CoreIoError> {
    let file: PmmFile = serde_json::from_str(text)?;
    let n = file.states.len();
    for e in &file.edges {
        if e.src >= n {
            return Err(CoreIoError::UnknownState(e.src));
        }
        if e.dst >= n {
            return Err(CoreIoError::UnknownState(e.dst));
        }
    }
    if file.initial >= n {
        return Err(CoreIoError::UnknownState(file.initial));
    }
    Ok(Pmm {
        states: file
            .states
            .into_iter()
            .map(|s| PmmState {
                id: s.id,
                centroid: s.centroid,
                nis: s.nis.into_iter().collect::<BTreeSet<_>>(),
                is_initial: s.id == file.initial,
            })
            .collect(),
        edges: file
            .edges
            .into_iter()
            .map(|e| PmmEdge {
                src: e.src,
                input: e.input,
                dst: e.dst,
                prob: e.prob,
                action_mean: e.action_mean,
                action_samples: e.action_samples,
            })
            .collect(),
        alphabet_size: file.alphabet_size,
        action_dim: file.action_dim,
    })
}

pub fn save_pmm(pmm: &Pmm, path: &Path) -> Result<(), CoreIoError> {
    fs::write(path, pmm_to_json(pmm))?;
    Ok(())
}

pub fn load_pmm(path: &Path) -> Result<Pmm, CoreIoError> {
    pmm_from_json(&fs::read_to_string(path)?)
}
