use crate::core::{cosine_sim, Dataset, SymbolId};
use crate::history_encoder::{embed_history, HistoryEncoder, HistoryError};

/// One observed transition: from the embedding of the first `t` steps, the
/// step-`t` symbol was observed, the step-`t` action taken, and the history
/// extended to `t + 1` steps. Rows with `t = 0` leave the shared root
/// embedding (the empty history).
#[derive(Debug, Clone)]
pub struct DbRow {
    pub traj_idx: usize,
    pub t: usize,
    pub src: Vec<f64>,
    pub input: SymbolId,
    pub action: Vec<f64>,
    pub dst: Vec<f64>,
}

/// The trajectory database queried in place of an oracle: per-trajectory
/// prefix embeddings plus the flat transition rows in (trajectory, t) order.
#[derive(Debug, Clone)]
pub struct EmbeddedDb {
    pub traj_ids: Vec<String>,
    /// prefixes[i][j] = embedding of trajectory i's first j+1 steps.
    pub prefixes: Vec<Vec<Vec<f64>>>,
    pub symbols: Vec<Vec<SymbolId>>,
    pub actions: Vec<Vec<Vec<f64>>>,
    pub rows: Vec<DbRow>,
    pub root: Vec<f64>,
    pub embed_dim: usize,
    pub alphabet_size: usize,
    pub action_dim: usize,
}

impl EmbeddedDb {
    pub fn step_count(&self) -> usize {
        self.rows.len()
    }

    /// Embedding of trajectory `traj_idx`'s first `len` steps.
    pub fn prefix_embedding(&self, traj_idx: usize, len: usize) -> &Vec<f64> {
        &self.prefixes[traj_idx][len - 1]
    }
}

/// Embeds every prefix of every trajectory. The dataset must be annotated.
pub fn build_embedded_db(ds: &Dataset, enc: &HistoryEncoder) -> Result<EmbeddedDb, HistoryError> {
    if ds.trajectories.is_empty() {
        return Err(HistoryError::EmptyDataset);
    }
    if !ds.is_annotated() {
        return Err(HistoryError::NotAnnotated);
    }
    let root = enc.root_embedding();
    let mut db = EmbeddedDb {
        traj_ids: Vec::new(),
        prefixes: Vec::new(),
        symbols: Vec::new(),
        actions: Vec::new(),
        rows: Vec::new(),
        root: root.clone(),
        embed_dim: enc.embed_dim,
        alphabet_size: ds.alphabet_size().unwrap_or(0),
        action_dim: ds.action_dim,
    };
    for (traj_idx, traj) in ds.trajectories.iter().enumerate() {
        let steps: Vec<(Vec<f64>, SymbolId)> = traj
            .steps
            .iter()
            .map(|s| (s.action.clone(), s.symbol.unwrap()))
            .collect();
        let mut prefixes = Vec::with_capacity(steps.len());
        for j in 1..=steps.len() {
            prefixes.push(embed_history(enc, &steps[..j])?);
        }
        for (t, step) in traj.steps.iter().enumerate() {
            let src = if t == 0 {
                root.clone()
            } else {
                prefixes[t - 1].clone()
            };
            db.rows.push(DbRow {
                traj_idx,
                t,
                src,
                input: step.symbol.unwrap(),
                action: step.action.clone(),
                dst: prefixes[t].clone(),
            });
        }
        db.traj_ids.push(traj.traj_id.clone());
        db.symbols.push(steps.iter().map(|(_, c)| *c).collect());
        db.actions.push(steps.into_iter().map(|(a, _)| a).collect());
        db.prefixes.push(prefixes);
    }
    Ok(db)
}

/// The generalized membership query: every observed transition whose source
/// history is at least `tau_sim`-cosine-similar to the representative `u`,
/// in (trajectory, t) order.
pub fn generalized_mq<'a>(db: &'a EmbeddedDb, u: &[f64], tau_sim: f64) -> Vec<&'a DbRow> {
    db.rows
        .iter()
        .filter(|row| cosine_sim(&row.src, u).map(|c| c >= tau_sim).unwrap_or(false))
        .collect()
}
