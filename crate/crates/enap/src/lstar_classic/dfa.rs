use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

/// Deterministic finite automaton over a char alphabet. Transitions are
/// indexed [state][alphabet position].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dfa {
    pub alphabet: Vec<char>,
    pub transitions: Vec<Vec<usize>>,
    pub accepting: Vec<bool>,
    pub initial: usize,
}

impl Dfa {
    pub fn state_count(&self) -> usize {
        self.transitions.len()
    }

    fn symbol_index(&self, c: char) -> Option<usize> {
        self.alphabet.iter().position(|&a| a == c)
    }

    pub fn accepts(&self, word: &[char]) -> bool {
        self.accepts_from(self.initial, word)
    }

    pub fn accepts_from(&self, state: usize, word: &[char]) -> bool {
        let mut q = state;
        for &c in word {
            match self.symbol_index(c) {
                Some(ci) => q = self.transitions[q][ci],
                None => return false,
            }
        }
        self.accepting[q]
    }

    /// Random machine for round-trip tests: every state reachable is not
    /// guaranteed, which is fine for language comparison.
    pub fn random<R: Rng>(states: usize, alphabet: &[char], rng: &mut R) -> Dfa {
        Dfa {
            alphabet: alphabet.to_vec(),
            transitions: (0..states)
                .map(|_| (0..alphabet.len()).map(|_| rng.gen_range(0..states)).collect())
                .collect(),
            accepting: (0..states).map(|_| rng.gen_bool(0.5)).collect(),
            initial: 0,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string(self).expect("dfa serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// DOT export mirroring the machine conventions used elsewhere: node label
/// "q{id}" (accepting states doublecircle), edge label the input symbol.
pub fn dfa_to_dot(dfa: &Dfa) -> String {
    let mut out = String::from("digraph dfa {\n");
    for q in 0..dfa.state_count() {
        let shape = if dfa.accepting[q] {
            ", shape=doublecircle"
        } else {
            ""
        };
        writeln!(out, "  q{q} [label=\"q{q}\"{shape}];").unwrap();
    }
    for q in 0..dfa.state_count() {
        for (ci, &c) in dfa.alphabet.iter().enumerate() {
            writeln!(out, "  q{} -> q{} [label=\"{}\"];", q, dfa.transitions[q][ci], c).unwrap();
        }
    }
    out.push_str("}\n");
    out
}
