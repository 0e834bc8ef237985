use std::collections::BTreeMap;

use super::{Dfa, LearnError, Teacher, Word};

/// The L* observation table (U, E, T): upper rows are the candidate state
/// prefixes, lower rows their one-symbol extensions, columns the
/// distinguishing suffixes. Entries are the teacher's membership bits.
#[derive(Debug, Clone)]
pub struct ObservationTable {
    pub alphabet: Vec<char>,
    /// Prefixes U in insertion order; the empty word first.
    pub upper: Vec<Word>,
    /// Suffixes E in insertion order; the empty word first.
    pub suffixes: Vec<Word>,
    entries: BTreeMap<(Word, Word), bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Closedness {
    Closed,
    /// Lower row whose signature matches no upper row (lexicographically
    /// first such row).
    Violating(Word),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Consistency {
    Consistent,
    /// Suffix sigma.e exposing two equal upper rows that diverge (shortest,
    /// then lexicographic).
    Distinguishing(Word),
}

impl ObservationTable {
    pub fn new(alphabet: Vec<char>) -> Self {
        ObservationTable {
            alphabet,
            upper: vec![Vec::new()],
            suffixes: vec![Vec::new()],
            entries: BTreeMap::new(),
        }
    }

    /// All lower rows: one-symbol extensions of upper rows that are not
    /// themselves upper rows, in lexicographic order.
    pub fn lower_rows(&self) -> Vec<Word> {
        let mut rows: Vec<Word> = Vec::new();
        for u in &self.upper {
            for &c in &self.alphabet {
                let mut w = u.clone();
                w.push(c);
                if !self.upper.contains(&w) && !rows.contains(&w) {
                    rows.push(w);
                }
            }
        }
        rows.sort();
        rows
    }

    /// Issues membership queries for every unfilled (row, suffix) cell.
    pub fn fill<T: Teacher>(&mut self, teacher: &mut T) {
        let mut rows = self.upper.clone();
        rows.extend(self.lower_rows());
        for row in rows {
            for suffix in self.suffixes.clone() {
                let key = (row.clone(), suffix.clone());
                if !self.entries.contains_key(&key) {
                    let mut word = row.clone();
                    word.extend_from_slice(&suffix);
                    let bit = teacher.membership(&word);
                    self.entries.insert(key, bit);
                }
            }
        }
    }

    fn entry(&self, row: &Word, suffix: &Word) -> Result<bool, LearnError> {
        self.entries
            .get(&(row.clone(), suffix.clone()))
            .copied()
            .ok_or_else(|| {
                LearnError::UnfilledTable(
                    row.iter().collect::<String>(),
                    suffix.iter().collect::<String>(),
                )
            })
    }

    /// Output signature of a row over all suffixes.
    pub fn row_signature(&self, row: &Word) -> Result<Vec<bool>, LearnError> {
        self.suffixes.iter().map(|s| self.entry(row, s)).collect()
    }

    pub fn is_closed(&self) -> Result<Closedness, LearnError> {
        let upper_sigs: Vec<Vec<bool>> = self
            .upper
            .iter()
            .map(|u| self.row_signature(u))
            .collect::<Result<_, _>>()?;
        for low in self.lower_rows() {
            let sig = self.row_signature(&low)?;
            if !upper_sigs.contains(&sig) {
                return Ok(Closedness::Violating(low));
            }
        }
        Ok(Closedness::Closed)
    }

    pub fn is_consistent(&self) -> Result<Consistency, LearnError> {
        let mut best: Option<Word> = None;
        for i in 0..self.upper.len() {
            for j in (i + 1)..self.upper.len() {
                let u1 = &self.upper[i];
                let u2 = &self.upper[j];
                if self.row_signature(u1)? != self.row_signature(u2)? {
                    continue;
                }
                for &c in &self.alphabet {
                    let mut e1 = u1.clone();
                    e1.push(c);
                    let mut e2 = u2.clone();
                    e2.push(c);
                    for suffix in &self.suffixes {
                        if self.entry(&e1, suffix)? != self.entry(&e2, suffix)? {
                            let mut cand = vec![c];
                            cand.extend_from_slice(suffix);
                            let better = match &best {
                                None => true,
                                Some(b) => {
                                    (cand.len(), &cand) < (b.len(), b)
                                }
                            };
                            if better {
                                best = Some(cand);
                            }
                        }
                    }
                }
            }
        }
        Ok(match best {
            Some(s) => Consistency::Distinguishing(s),
            None => Consistency::Consistent,
        })
    }

    /// Moves a lower row into U.
    pub fn promote(&mut self, row: Word) {
        if !self.upper.contains(&row) {
            self.upper.push(row);
        }
    }

    pub fn add_suffix(&mut self, suffix: Word) {
        if !self.suffixes.contains(&suffix) {
            self.suffixes.push(suffix);
        }
    }

    /// Absorbs a counterexample together with all its prefixes.
    pub fn add_counterexample_with_prefixes(&mut self, cex: &[char]) {
        for len in 1..=cex.len() {
            self.promote(cex[..len].to_vec());
        }
    }

    /// Builds the hypothesis machine from a closed, consistent table. States
    /// are the distinct upper-row signatures in first-occurrence order;
    /// the initial state is row(epsilon); accepting states are those with
    /// T(row, epsilon) = 1.
    pub fn build_hypothesis(&self) -> Result<Dfa, LearnError> {
        if self.is_closed()? != Closedness::Closed {
            return Err(LearnError::NotClosed);
        }
        if self.is_consistent()? != Consistency::Consistent {
            return Err(LearnError::NotConsistent);
        }

        let mut sig_to_state: Vec<(Vec<bool>, Word)> = Vec::new();
        for u in &self.upper {
            let sig = self.row_signature(u)?;
            if !sig_to_state.iter().any(|(s, _)| *s == sig) {
                sig_to_state.push((sig, u.clone()));
            }
        }
        let state_of = |sig: &Vec<bool>| -> usize {
            sig_to_state
                .iter()
                .position(|(s, _)| s == sig)
                .expect("closed table covers the signature")
        };

        let n = sig_to_state.len();
        let mut transitions = vec![vec![0usize; self.alphabet.len()]; n];
        let mut accepting = vec![false; n];
        for (idx, (sig, rep)) in sig_to_state.iter().enumerate() {
            accepting[idx] = sig[0]; // suffix 0 is epsilon
            for (ci, &c) in self.alphabet.iter().enumerate() {
                let mut ext = rep.clone();
                ext.push(c);
                let esig = self.row_signature(&ext)?;
                transitions[idx][ci] = state_of(&esig);
            }
        }
        let init_sig = self.row_signature(&Vec::new())?;
        Ok(Dfa {
            alphabet: self.alphabet.clone(),
            transitions,
            accepting,
            initial: state_of(&init_sig),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lstar_classic::{even_a_even_b, BoundedTeacher};

    fn filled_initial() -> ObservationTable {
        let mut t = ObservationTable::new(vec!['a', 'b']);
        let mut teacher = BoundedTeacher::new(even_a_even_b, vec!['a', 'b'], 8);
        t.fill(&mut teacher);
        t
    }

    #[test]
    fn initial_table_not_closed_with_violating_row_a() {
        let t = filled_initial();
        assert_eq!(t.is_closed().unwrap(), Closedness::Violating(vec!['a']));
    }

    #[test]
    fn promoting_a_closes_the_table() {
        let mut t = filled_initial();
        t.promote(vec!['a']);
        let mut teacher = BoundedTeacher::new(even_a_even_b, vec!['a', 'b'], 8);
        t.fill(&mut teacher);
        assert_eq!(t.is_closed().unwrap(), Closedness::Closed);
        assert_eq!(t.is_consistent().unwrap(), Consistency::Consistent);
        let dfa = t.build_hypothesis().unwrap();
        assert_eq!(dfa.state_count(), 2);
    }

    #[test]
    fn bb_prefixes_expose_distinguishing_suffix_a() {
        let mut t = filled_initial();
        t.promote(vec!['a']);
        t.add_counterexample_with_prefixes(&['b', 'b']);
        let mut teacher = BoundedTeacher::new(even_a_even_b, vec!['a', 'b'], 8);
        t.fill(&mut teacher);
        assert_eq!(t.is_closed().unwrap(), Closedness::Closed);
        assert_eq!(
            t.is_consistent().unwrap(),
            Consistency::Distinguishing(vec!['a'])
        );
    }

    #[test]
    fn all_distinct_rows_are_vacuously_consistent() {
        let mut t = filled_initial();
        t.promote(vec!['a']);
        let mut teacher = BoundedTeacher::new(even_a_even_b, vec!['a', 'b'], 8);
        t.fill(&mut teacher);
        // rows epsilon=[1], a=[0]: distinct, so consistency is vacuous.
        assert_eq!(t.is_consistent().unwrap(), Consistency::Consistent);
    }

    #[test]
    fn trivial_all_accepting_table_builds_one_state() {
        let mut t = ObservationTable::new(vec!['a', 'b']);
        let mut teacher = BoundedTeacher::new(|_: &[char]| true, vec!['a', 'b'], 4);
        t.fill(&mut teacher);
        let dfa = t.build_hypothesis().unwrap();
        assert_eq!(dfa.state_count(), 1);
        assert!(dfa.accepts(&['a', 'b', 'a']));
    }
}
