//! Shared domain types: trajectories, datasets, the probabilistic Mealy
//! machine, and their file formats.

mod dot;
mod io;
mod pmm;
mod types;

pub use dot::pmm_to_dot;
pub use io::{
    load_dataset, load_pmm, pmm_from_json, pmm_to_json, save_dataset, save_pmm, CoreIoError,
};
pub use pmm::{pmm_trace, pmm_validate, Pmm, PmmEdge, PmmState, TraceError, Violation};
pub use types::{Dataset, DatasetError, Step, SymbolId, Trajectory};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SimilarityError {
    #[error("cosine similarity undefined for a zero vector")]
    ZeroVector,
}

/// Cosine similarity x.y / (|x||y|).
pub fn cosine_sim(x: &[f64], y: &[f64]) -> Result<f64, SimilarityError> {
    let nx = norm2(x);
    let ny = norm2(y);
    if nx == 0.0 || ny == 0.0 {
        return Err(SimilarityError::ZeroVector);
    }
    Ok(dot_product(x, y) / (nx * ny))
}

pub fn dot_product(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn norm2(x: &[f64]) -> f64 {
    dot_product(x, x).sqrt()
}

pub fn euclidean(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// L2-normalize in place; leaves zero vectors untouched and reports false.
pub fn normalize_in_place(x: &mut [f64]) -> bool {
    let n = norm2(x);
    if n == 0.0 {
        return false;
    }
    for v in x.iter_mut() {
        *v /= n;
    }
    true
}
