use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};
use std::fmt;

use thiserror::Error;

use super::SymbolId;

pub const PROB_TOL: f64 = 1e-9;

/// A state of the machine. `centroid` is the unit-norm history embedding that
/// represents it; `nis` is its next-input set, i.e. the symbols labeling its
/// outgoing edges.
#[derive(Debug, Clone, PartialEq)]
pub struct PmmState {
    pub id: usize,
    pub centroid: Vec<f64>,
    pub nis: BTreeSet<SymbolId>,
    pub is_initial: bool,
}

/// A probabilistic transition. `action_mean` is the empirical mean of the
/// continuous actions observed along this edge and `action_samples` how many
/// observations back it.
#[derive(Debug, Clone, PartialEq)]
pub struct PmmEdge {
    pub src: usize,
    pub input: SymbolId,
    pub dst: usize,
    pub prob: f64,
    pub action_mean: Vec<f64>,
    pub action_samples: usize,
}

/// Probabilistic Mealy machine: states, edges, and the sizes the ids index
/// into. Immutable once constructed; all mining mutation happens on builder
/// data, not here.
#[derive(Debug, Clone, PartialEq)]
pub struct Pmm {
    pub states: Vec<PmmState>,
    pub edges: Vec<PmmEdge>,
    pub alphabet_size: usize,
    pub action_dim: usize,
}

impl Pmm {
    pub fn initial(&self) -> Option<usize> {
        self.states.iter().find(|s| s.is_initial).map(|s| s.id)
    }

    /// Edges leaving `src` on `input`.
    pub fn edges_from(&self, src: usize, input: SymbolId) -> Vec<&PmmEdge> {
        self.edges
            .iter()
            .filter(|e| e.src == src && e.input == input)
            .collect()
    }

    pub fn outgoing(&self, src: usize) -> Vec<&PmmEdge> {
        self.edges.iter().filter(|e| e.src == src).collect()
    }

    /// Recomputes every state's next-input set from the edge list.
    pub fn rebuild_nis(&mut self) {
        for s in self.states.iter_mut() {
            s.nis.clear();
        }
        for e in &self.edges {
            self.states[e.src].nis.insert(e.input);
        }
    }

    /// Sorts edges into the canonical (src, input, dst) order used by the
    /// file format.
    pub fn sort_canonical(&mut self) {
        self.states.sort_by_key(|s| s.id);
        self.edges.sort_by_key(|e| (e.src, e.input, e.dst));
    }
}

/// A violated machine invariant. Violations are data, not failures: a machine
/// under construction may legitimately report some.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// Per-(src, input) outgoing probabilities do not sum to 1.
    Normalization {
        src: usize,
        input: SymbolId,
        total: f64,
    },
    /// An edge references a state id that does not exist.
    DanglingEdge { src: usize, dst: usize },
    /// A state's next-input set disagrees with its outgoing edge labels.
    NisMismatch { state: usize },
    /// A state cannot be reached from the initial state.
    Unreachable { state: usize },
    /// Zero or more than one state is flagged initial.
    InitialCount { count: usize },
    /// A state id is duplicated or out of dense order.
    BadStateId { state: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Normalization { src, input, total } => write!(
                f,
                "probabilities out of q{src} on c{input} sum to {total}, not 1"
            ),
            Violation::DanglingEdge { src, dst } => {
                write!(f, "edge {src} -> {dst} references a missing state")
            }
            Violation::NisMismatch { state } => {
                write!(f, "q{state}: next-input set does not match outgoing edges")
            }
            Violation::Unreachable { state } => write!(f, "q{state} unreachable from initial"),
            Violation::InitialCount { count } => write!(f, "{count} initial states"),
            Violation::BadStateId { state } => write!(f, "state id {state} not dense"),
        }
    }
}

/// Checks every machine invariant and returns all violations found.
pub fn pmm_validate(pmm: &Pmm) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = pmm.states.len();

    for (i, s) in pmm.states.iter().enumerate() {
        if s.id != i {
            out.push(Violation::BadStateId { state: s.id });
        }
    }

    let initials = pmm.states.iter().filter(|s| s.is_initial).count();
    if initials != 1 {
        out.push(Violation::InitialCount { count: initials });
    }

    for e in &pmm.edges {
        if e.src >= n || e.dst >= n {
            out.push(Violation::DanglingEdge {
                src: e.src,
                dst: e.dst,
            });
        }
    }

    // Normalization per (src, input) over non-dangling edges.
    let mut totals: BTreeMap<(usize, SymbolId), f64> = BTreeMap::new();
    for e in pmm.edges.iter().filter(|e| e.src < n && e.dst < n) {
        *totals.entry((e.src, e.input)).or_insert(0.0) += e.prob;
    }
    for (&(src, input), &total) in &totals {
        if (total - 1.0).abs() > PROB_TOL {
            out.push(Violation::Normalization { src, input, total });
        }
    }

    // NIS must equal the outgoing labels.
    for s in &pmm.states {
        let actual: BTreeSet<SymbolId> = pmm
            .edges
            .iter()
            .filter(|e| e.src == s.id)
            .map(|e| e.input)
            .collect();
        if actual != s.nis {
            out.push(Violation::NisMismatch { state: s.id });
        }
    }

    // Reachability from the initial state.
    if let Some(init) = pmm.initial() {
        let mut seen: HashSet<usize> = HashSet::new();
        let mut queue = VecDeque::from([init]);
        seen.insert(init);
        while let Some(q) = queue.pop_front() {
            for e in pmm.edges.iter().filter(|e| e.src == q && e.dst < n) {
                if seen.insert(e.dst) {
                    queue.push_back(e.dst);
                }
            }
        }
        for s in &pmm.states {
            if !seen.contains(&s.id) {
                out.push(Violation::Unreachable { state: s.id });
            }
        }
    }

    out
}

#[derive(Debug, Error, PartialEq)]
pub enum TraceError {
    #[error("symbol {symbol} out of range (alphabet size {alphabet_size})")]
    SymbolOutOfRange {
        symbol: SymbolId,
        alphabet_size: usize,
    },
    #[error("machine has no initial state")]
    NoInitial,
}

/// Follows every path from the initial state that is consistent with the
/// symbol sequence (nondeterministic frontier tracking). Returns the set of
/// complete state-id paths; empty iff no path survives.
pub fn pmm_trace(pmm: &Pmm, symbols: &[SymbolId]) -> Result<BTreeSet<Vec<usize>>, TraceError> {
    for &c in symbols {
        if c >= pmm.alphabet_size {
            return Err(TraceError::SymbolOutOfRange {
                symbol: c,
                alphabet_size: pmm.alphabet_size,
            });
        }
    }
    let init = pmm.initial().ok_or(TraceError::NoInitial)?;
    let mut paths: BTreeSet<Vec<usize>> = BTreeSet::from([vec![init]]);
    for &c in symbols {
        let mut next = BTreeSet::new();
        for path in &paths {
            let q = *path.last().unwrap();
            for e in pmm.edges_from(q, c) {
                let mut p = path.clone();
                p.push(e.dst);
                next.insert(p);
            }
        }
        paths = next;
        if paths.is_empty() {
            break;
        }
    }
    Ok(paths)
}
