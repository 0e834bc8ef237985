use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::db::{build_embedded_db, generalized_mq, EmbeddedDb};
use crate::core::{cosine_sim, Dataset, Pmm, PmmEdge, PmmState, SymbolId};
use crate::history_encoder::{HistoryEncoder, HistoryError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MineConfig {
    pub tau_sim: f64,
    pub eps_err: f64,
    pub max_eq_rounds: usize,
    pub prune: bool,
}

impl Default for MineConfig {
    fn default() -> Self {
        MineConfig {
            tau_sim: 0.9,
            eps_err: 0.1,
            max_eq_rounds: 50,
            prune: true,
        }
    }
}

/// One representative history embedding, one automaton state. Members are
/// frozen at first insertion; ids are dense in discovery order. Member 0 is
/// the root (empty history).
#[derive(Debug, Clone)]
pub struct PrefixMember {
    pub embedding: Vec<f64>,
    /// (traj_id, prefix length) of first insertion; None for the root.
    pub provenance: Option<(String, usize)>,
}

#[derive(Debug, Clone)]
pub struct PrefixSet {
    pub members: Vec<PrefixMember>,
    pub tau_sim: f64,
}

impl PrefixSet {
    pub fn new(root: Vec<f64>, tau_sim: f64) -> Self {
        PrefixSet {
            members: vec![PrefixMember {
                embedding: root,
                provenance: None,
            }],
            tau_sim,
        }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Most similar member and its cosine; ties keep the lowest id.
    pub fn best_match(&self, h: &[f64]) -> (usize, f64) {
        let mut best = 0;
        let mut best_cos = f64::NEG_INFINITY;
        for (i, m) in self.members.iter().enumerate() {
            let c = cosine_sim(&m.embedding, h).unwrap_or(f64::NEG_INFINITY);
            if c > best_cos {
                best_cos = c;
                best = i;
            }
        }
        (best, best_cos)
    }

    pub fn covering_member(&self, h: &[f64]) -> Option<usize> {
        let (id, cos) = self.best_match(h);
        (cos >= self.tau_sim).then_some(id)
    }

    /// Inserts unless a member already covers `h`. Returns the id it now
    /// maps to and whether an insertion happened.
    pub fn insert_if_new(&mut self, h: &[f64], provenance: Option<(String, usize)>) -> (usize, bool) {
        if let Some(id) = self.covering_member(h) {
            return (id, false);
        }
        self.force_insert(h, provenance)
    }

    fn force_insert(&mut self, h: &[f64], provenance: Option<(String, usize)>) -> (usize, bool) {
        self.members.push(PrefixMember {
            embedding: h.to_vec(),
            provenance,
        });
        (self.members.len() - 1, true)
    }
}

#[derive(Debug, Error)]
pub enum MineError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("dataset is not symbol-annotated")]
    NotAnnotated,
    #[error("no hypothesis passed the equivalence check within {0} rounds")]
    MaxRoundsExceeded(usize),
    #[error("prefix set grew past the database size ({0} members); encoder is degenerate")]
    BudgetExceeded(usize),
    #[error(transparent)]
    History(#[from] HistoryError),
}

/// One expansion ply: scans the members present at entry and inserts every
/// reachable next-step embedding not yet covered. Newly inserted members are
/// not followed until the next ply. Returns the number of insertions.
pub fn expand_step(u: &mut PrefixSet, db: &EmbeddedDb) -> usize {
    let frontier = u.len();
    let mut inserted = 0;
    for idx in 0..frontier {
        let member = u.members[idx].embedding.clone();
        for row in generalized_mq(db, &member, u.tau_sim) {
            let prov = Some((db.traj_ids[row.traj_idx].clone(), row.t + 1));
            if u.insert_if_new(&row.dst, prov).1 {
                inserted += 1;
            }
        }
    }
    inserted
}

/// Expands to the closedness fixed point: every next-step embedding reachable
/// from any member is covered by some member.
pub fn expand_until_closed(u: &mut PrefixSet, db: &EmbeddedDb) -> Result<(), MineError> {
    let budget = db.step_count() + 1;
    loop {
        let inserted = expand_step(u, db);
        if u.len() > budget {
            return Err(MineError::BudgetExceeded(u.len()));
        }
        if inserted == 0 {
            return Ok(());
        }
    }
}

/// Builds the hypothesis machine over the current prefix set: one state per
/// member, edges from the generalized membership query of each member,
/// grouped by (state, input, destination state). Transition probabilities are
/// the normalized frequencies within each (state, input); the action prior is
/// the group's empirical action mean. Rows whose destination no member covers
/// yet are left out (at the closedness fixed point nothing is left out).
pub fn build_hypothesis(u: &PrefixSet, db: &EmbeddedDb, cfg: &MineConfig) -> Pmm {
    // group key -> (count, action accumulator)
    let mut groups: BTreeMap<(usize, SymbolId, usize), (usize, Vec<f64>)> = BTreeMap::new();
    for (q, member) in u.members.iter().enumerate() {
        for row in generalized_mq(db, &member.embedding, cfg.tau_sim) {
            let Some(dst) = u.covering_member(&row.dst) else {
                continue;
            };
            let entry = groups
                .entry((q, row.input, dst))
                .or_insert_with(|| (0, vec![0.0; db.action_dim]));
            entry.0 += 1;
            for (acc, &a) in entry.1.iter_mut().zip(&row.action) {
                *acc += a;
            }
        }
    }

    let mut totals: BTreeMap<(usize, SymbolId), usize> = BTreeMap::new();
    for (&(q, input, _), &(count, _)) in &groups {
        *totals.entry((q, input)).or_insert(0) += count;
    }

    let edges: Vec<PmmEdge> = groups
        .into_iter()
        .map(|((src, input, dst), (count, acc))| PmmEdge {
            src,
            input,
            dst,
            prob: count as f64 / totals[&(src, input)] as f64,
            action_mean: acc.into_iter().map(|v| v / count as f64).collect(),
            action_samples: count,
        })
        .collect();

    let mut pmm = Pmm {
        states: u
            .members
            .iter()
            .enumerate()
            .map(|(id, m)| PmmState {
                id,
                centroid: m.embedding.clone(),
                nis: BTreeSet::new(),
                is_initial: id == 0,
            })
            .collect(),
        edges,
        alphabet_size: db.alphabet_size,
        action_dim: db.action_dim,
    };
    pmm.rebuild_nis();
    pmm.sort_canonical();
    pmm
}

/// Result of the nondeterministic equivalence check of one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub enum EqOutcome {
    Pass,
    /// Length (in steps) of the shortest failing prefix.
    Counterexample(usize),
}

/// Tracks every machine path consistent with the trajectory's symbols whose
/// edge action priors stay within `eps_err` (infinity norm) of the observed
/// actions. Passes iff some path survives the whole trajectory; otherwise
/// reports the shortest failing prefix.
pub fn nd_equivalence_query(
    pmm: &Pmm,
    symbols: &[SymbolId],
    actions: &[Vec<f64>],
    eps_err: f64,
) -> EqOutcome {
    let Some(init) = pmm.initial() else {
        return EqOutcome::Counterexample(1);
    };
    let mut frontier: BTreeSet<usize> = BTreeSet::from([init]);
    for (t, (&c, a)) in symbols.iter().zip(actions).enumerate() {
        let mut next = BTreeSet::new();
        for &q in &frontier {
            for e in pmm.edges_from(q, c) {
                let ok = a
                    .iter()
                    .zip(&e.action_mean)
                    .all(|(x, m)| (x - m).abs() <= eps_err);
                if ok {
                    next.insert(e.dst);
                }
            }
        }
        if next.is_empty() {
            return EqOutcome::Counterexample(t + 1);
        }
        frontier = next;
    }
    EqOutcome::Pass
}

/// Inserts the embeddings of every prefix (length 1..=t) of the counterexample
/// trajectory, skipping those already covered. If nothing at all is new, the
/// failing prefix itself is force-inserted so every round refines the
/// hypothesis (progress guarantee).
pub fn add_counterexample(
    u: &mut PrefixSet,
    db: &EmbeddedDb,
    traj_idx: usize,
    t: usize,
) -> usize {
    let mut inserted = 0;
    let t = t.min(db.prefixes[traj_idx].len());
    for j in 1..=t {
        let h = db.prefix_embedding(traj_idx, j).clone();
        let prov = Some((db.traj_ids[traj_idx].clone(), j));
        if u.insert_if_new(&h, prov).1 {
            inserted += 1;
        }
    }
    if inserted == 0 && t >= 1 {
        let h = db.prefix_embedding(traj_idx, t).clone();
        let prov = Some((db.traj_ids[traj_idx].clone(), t));
        u.force_insert(&h, prov);
        inserted += 1;
    }
    inserted
}

/// Merges a destination state into its source wherever the source self-loops
/// on the same input that reaches the destination, repeating until no such
/// edge remains. Probabilities re-normalize from pooled sample counts.
pub fn stable_phase_prune(pmm: &Pmm) -> Pmm {
    let mut current = pmm.clone();
    loop {
        let mut edges: Vec<&PmmEdge> = current.edges.iter().collect();
        edges.sort_by_key(|e| (e.src, e.input, e.dst));
        let mergeable = edges.iter().find(|e| {
            e.src != e.dst
                && current
                    .edges
                    .iter()
                    .any(|l| l.src == e.src && l.input == e.input && l.dst == e.src)
        });
        let Some(edge) = mergeable else {
            return current;
        };
        let (survivor, removed) = (edge.src, edge.dst);
        let mut target: Vec<usize> = (0..current.states.len()).collect();
        target[removed] = survivor;
        current = apply_state_map(&current, &target);
    }
}

/// Single-pass unification of states with identical outgoing behavior: equal
/// next-input sets and, per input, identical (destination, probability,
/// action mean) edge sets. Duplicate tail states produced by distinct
/// histories with the same future collapse into one.
pub fn merge_equivalent_states(pmm: &Pmm) -> Pmm {
    const TOL: f64 = 1e-9;
    let n = pmm.states.len();
    let mut target: Vec<usize> = (0..n).collect();
    for i in 0..n {
        if target[i] != i {
            continue;
        }
        for j in (i + 1)..n {
            if target[j] != j {
                continue;
            }
            if states_equivalent(pmm, i, j, TOL) {
                target[j] = i;
            }
        }
    }
    if target.iter().enumerate().all(|(i, &t)| i == t) {
        return pmm.clone();
    }
    apply_state_map(pmm, &target)
}

fn states_equivalent(pmm: &Pmm, a: usize, b: usize, tol: f64) -> bool {
    if pmm.states[a].nis != pmm.states[b].nis {
        return false;
    }
    let mut ea = pmm.outgoing(a);
    let mut eb = pmm.outgoing(b);
    if ea.len() != eb.len() {
        return false;
    }
    ea.sort_by_key(|e| (e.input, e.dst));
    eb.sort_by_key(|e| (e.input, e.dst));
    ea.iter().zip(&eb).all(|(x, y)| {
        x.input == y.input
            && x.dst == y.dst
            && (x.prob - y.prob).abs() <= tol
            && x.action_mean
                .iter()
                .zip(&y.action_mean)
                .all(|(p, q)| (p - q).abs() <= tol)
    })
}

/// Rewrites states through `target` (old id -> representative old id), pools
/// parallel edges, re-normalizes probabilities from sample counts, compacts
/// ids densely, and re-homes the initial flag onto its representative.
///
/// Parallel edges pool only when their action means agree (1e-9 per
/// component); otherwise they stay side by side, so every action prior that
/// existed before the rewrite still exists after it and trajectory checks
/// that passed keep passing.
fn apply_state_map(pmm: &Pmm, target: &[usize]) -> Pmm {
    const MEAN_TOL: f64 = 1e-9;
    let resolve = |mut s: usize| -> usize {
        while target[s] != s {
            s = target[s];
        }
        s
    };
    let survivors: Vec<usize> = (0..pmm.states.len()).filter(|&s| resolve(s) == s).collect();
    let dense: BTreeMap<usize, usize> = survivors
        .iter()
        .enumerate()
        .map(|(new, &old)| (old, new))
        .collect();

    let initial_old = resolve(pmm.initial().unwrap_or(0));
    // (src, input, dst) -> groups of (samples, weighted mean acc, repr mean)
    type Group = (usize, Vec<f64>, Vec<f64>);
    let mut pooled: BTreeMap<(usize, SymbolId, usize), Vec<Group>> = BTreeMap::new();
    let mut canonical: Vec<&PmmEdge> = pmm.edges.iter().collect();
    canonical.sort_by_key(|e| (e.src, e.input, e.dst));
    for e in canonical {
        let key = (dense[&resolve(e.src)], e.input, dense[&resolve(e.dst)]);
        let groups = pooled.entry(key).or_default();
        let slot = groups.iter_mut().find(|(_, _, repr)| {
            repr.iter()
                .zip(&e.action_mean)
                .all(|(a, b)| (a - b).abs() <= MEAN_TOL)
        });
        match slot {
            Some((samples, acc, _)) => {
                *samples += e.action_samples;
                for (a, &m) in acc.iter_mut().zip(&e.action_mean) {
                    *a += m * e.action_samples as f64;
                }
            }
            None => groups.push((
                e.action_samples,
                e.action_mean
                    .iter()
                    .map(|&m| m * e.action_samples as f64)
                    .collect(),
                e.action_mean.clone(),
            )),
        }
    }
    let mut totals: BTreeMap<(usize, SymbolId), usize> = BTreeMap::new();
    for (&(src, input, _), groups) in &pooled {
        let sum: usize = groups.iter().map(|(s, _, _)| s).sum();
        *totals.entry((src, input)).or_insert(0) += sum;
    }

    let mut edges = Vec::new();
    for ((src, input, dst), groups) in pooled {
        for (samples, acc, _) in groups {
            edges.push(PmmEdge {
                src,
                input,
                dst,
                prob: samples as f64 / totals[&(src, input)] as f64,
                action_mean: acc.into_iter().map(|v| v / samples as f64).collect(),
                action_samples: samples,
            });
        }
    }

    let mut out = Pmm {
        states: survivors
            .iter()
            .enumerate()
            .map(|(new, &old)| PmmState {
                id: new,
                centroid: pmm.states[old].centroid.clone(),
                nis: BTreeSet::new(),
                is_initial: old == initial_old,
            })
            .collect(),
        edges,
        alphabet_size: pmm.alphabet_size,
        action_dim: pmm.action_dim,
    };
    out.rebuild_nis();
    out.sort_canonical();
    out
}

/// Per-round mining diagnostics, serialized as JSON Lines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundDiagnostics {
    pub round: usize,
    #[serde(rename = "|U|")]
    pub u_size: usize,
    pub counterexample: Option<CexInfo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CexInfo {
    pub traj_id: String,
    pub t: usize,
}

#[derive(Debug, Clone)]
pub struct MineResult {
    pub pmm: Pmm,
    pub diagnostics: Vec<RoundDiagnostics>,
    pub rounds_used: usize,
}

impl MineResult {
    pub fn diagnostics_jsonl(&self) -> String {
        let mut out = String::new();
        for d in &self.diagnostics {
            out.push_str(&serde_json::to_string(d).expect("diagnostics serialize"));
            out.push('\n');
        }
        out
    }
}

/// Mines a machine from an annotated dataset: grow the prefix set one
/// expansion ply per round, build a hypothesis, and check it against every
/// test trajectory; the shortest failing prefix of the first failing
/// trajectory is absorbed and the loop continues. On pass, duplicate tail
/// states are unified and, if configured, stable phases pruned.
pub fn mine(ds: &Dataset, enc: &HistoryEncoder, cfg: &MineConfig) -> Result<MineResult, MineError> {
    mine_with_test(ds, ds, enc, cfg)
}

/// `mine` with an explicit equivalence-check set (defaults to the training
/// set itself in the offline setting).
pub fn mine_with_test(
    train: &Dataset,
    test: &Dataset,
    enc: &HistoryEncoder,
    cfg: &MineConfig,
) -> Result<MineResult, MineError> {
    if train.trajectories.is_empty() || test.trajectories.is_empty() {
        return Err(MineError::EmptyDataset);
    }
    if !train.is_annotated() || !test.is_annotated() {
        return Err(MineError::NotAnnotated);
    }
    let db = build_embedded_db(train, enc)?;
    let same = std::ptr::eq(train, test) || train == test;
    let test_db = if same {
        None
    } else {
        Some(build_embedded_db(test, enc)?)
    };
    let eq_db: &EmbeddedDb = test_db.as_ref().unwrap_or(&db);
    let budget = db.step_count() + eq_db.step_count() + 2;

    let mut u = PrefixSet::new(db.root.clone(), cfg.tau_sim);
    u.insert_if_new(db.prefix_embedding(0, 1), Some((db.traj_ids[0].clone(), 1)));

    let mut diagnostics = Vec::new();
    for round in 1..=cfg.max_eq_rounds {
        expand_step(&mut u, &db);
        if u.len() > budget {
            return Err(MineError::BudgetExceeded(u.len()));
        }
        let pmm = build_hypothesis(&u, &db, cfg);
        debug_assert!(
            !crate::core::pmm_validate(&pmm)
                .iter()
                .any(|v| matches!(v, crate::core::Violation::Normalization { .. })),
            "hypothesis violates probability normalization"
        );

        let mut failure: Option<(usize, usize)> = None;
        for traj_idx in 0..eq_db.traj_ids.len() {
            match nd_equivalence_query(
                &pmm,
                &eq_db.symbols[traj_idx],
                &eq_db.actions[traj_idx],
                cfg.eps_err,
            ) {
                EqOutcome::Pass => {}
                EqOutcome::Counterexample(t) => {
                    failure = Some((traj_idx, t));
                    break;
                }
            }
        }

        match failure {
            Some((traj_idx, t)) => {
                add_counterexample(&mut u, eq_db, traj_idx, t);
                if u.len() > budget {
                    return Err(MineError::BudgetExceeded(u.len()));
                }
                diagnostics.push(RoundDiagnostics {
                    round,
                    u_size: u.len(),
                    counterexample: Some(CexInfo {
                        traj_id: eq_db.traj_ids[traj_idx].clone(),
                        t,
                    }),
                });
            }
            None => {
                diagnostics.push(RoundDiagnostics {
                    round,
                    u_size: u.len(),
                    counterexample: None,
                });
                let mut final_pmm = merge_equivalent_states(&pmm);
                if cfg.prune {
                    final_pmm = stable_phase_prune(&final_pmm);
                }
                return Ok(MineResult {
                    pmm: final_pmm,
                    diagnostics,
                    rounds_used: round,
                });
            }
        }
    }
    Err(MineError::MaxRoundsExceeded(cfg.max_eq_rounds))
}

/// Structural isomorphism: a state bijection preserving the initial state and
/// every (input, destination) edge relation (probabilities and action priors
/// are not compared). Backtracking matcher; machines here are small.
pub fn pmm_isomorphic(a: &Pmm, b: &Pmm) -> bool {
    if a.states.len() != b.states.len() || a.edges.len() != b.edges.len() {
        return false;
    }
    let (Some(ia), Some(ib)) = (a.initial(), b.initial()) else {
        return false;
    };
    let mut map = vec![usize::MAX; a.states.len()];
    let mut used = vec![false; b.states.len()];
    match_states(a, b, ia, ib, &mut map, &mut used)
}

fn match_states(
    a: &Pmm,
    b: &Pmm,
    sa: usize,
    sb: usize,
    map: &mut Vec<usize>,
    used: &mut Vec<bool>,
) -> bool {
    if map[sa] != usize::MAX {
        return map[sa] == sb;
    }
    if used[sb] || a.states[sa].nis != b.states[sb].nis {
        return false;
    }
    map[sa] = sb;
    used[sb] = true;
    let ok = a.states[sa].nis.iter().all(|&input| {
        let dsts_a: Vec<usize> = a.edges_from(sa, input).iter().map(|e| e.dst).collect();
        let dsts_b: Vec<usize> = b.edges_from(sb, input).iter().map(|e| e.dst).collect();
        dsts_a.len() == dsts_b.len() && match_dst_sets(a, b, &dsts_a, &dsts_b, map, used)
    });
    if !ok {
        map[sa] = usize::MAX;
        used[sb] = false;
        return false;
    }
    true
}

fn match_dst_sets(
    a: &Pmm,
    b: &Pmm,
    dsts_a: &[usize],
    dsts_b: &[usize],
    map: &mut Vec<usize>,
    used: &mut Vec<bool>,
) -> bool {
    if dsts_a.is_empty() {
        return true;
    }
    let da = dsts_a[0];
    for (i, &db_) in dsts_b.iter().enumerate() {
        let snapshot_map = map.clone();
        let snapshot_used = used.clone();
        if match_states(a, b, da, db_, map, used) {
            let mut rest_b = dsts_b.to_vec();
            rest_b.remove(i);
            if match_dst_sets(a, b, &dsts_a[1..], &rest_b, map, used) {
                return true;
            }
        }
        *map = snapshot_map;
        *used = snapshot_used;
    }
    false
}
