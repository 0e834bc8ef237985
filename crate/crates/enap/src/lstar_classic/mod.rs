//! Textbook active DFA learning with an observation table and a minimally
//! adequate teacher. Counterexamples are absorbed together with all their
//! prefixes; closedness promotes rows, consistency adds distinguishing
//! suffixes. The bounded brute-force teacher used in tests prefers, among the
//! shortest counterexamples, strings the hypothesis wrongly rejects, then
//! lexicographic order.

mod dfa;
mod table;

pub use dfa::{dfa_to_dot, Dfa};
pub use table::{Closedness, Consistency, ObservationTable};

use thiserror::Error;

/// The learner's word type: a string over the alphabet.
pub type Word = Vec<char>;

pub fn word_to_string(w: &[char]) -> String {
    w.iter().collect()
}

/// Minimally adequate teacher: answers membership queries and checks
/// hypothesis equivalence, producing a counterexample on failure.
pub trait Teacher {
    fn membership(&mut self, word: &[char]) -> bool;
    fn equivalence(&mut self, hypothesis: &Dfa) -> Option<Word>;
}

#[derive(Debug, Error, PartialEq)]
pub enum LearnError {
    #[error("table not closed")]
    NotClosed,
    #[error("table not consistent")]
    NotConsistent,
    #[error("table entry for ({0}, {1}) unfilled")]
    UnfilledTable(String, String),
    #[error("teacher returned counterexample {0:?} on which hypothesis and teacher agree")]
    TeacherInconsistent(String),
    #[error("equivalence loop exceeded {0} rounds")]
    RoundLimit(usize),
}

/// What happened during a learning run, for walkthrough inspection.
#[derive(Debug, Clone, PartialEq)]
pub enum LearnEvent {
    RowPromoted(String),
    SuffixAdded(String),
    Hypothesis { states: usize },
    Counterexample(String),
}

/// Runs L* to convergence; returns the final machine and the event log.
pub fn learn<T: Teacher>(
    teacher: &mut T,
    alphabet: &[char],
) -> Result<(Dfa, Vec<LearnEvent>), LearnError> {
    let mut table = ObservationTable::new(alphabet.to_vec());
    let mut events = Vec::new();
    table.fill(teacher);
    const MAX_ROUNDS: usize = 10_000;

    for _ in 0..MAX_ROUNDS {
        loop {
            match table.is_closed()? {
                Closedness::Violating(row) => {
                    events.push(LearnEvent::RowPromoted(word_to_string(&row)));
                    table.promote(row);
                    table.fill(teacher);
                    continue;
                }
                Closedness::Closed => {}
            }
            match table.is_consistent()? {
                Consistency::Distinguishing(suffix) => {
                    events.push(LearnEvent::SuffixAdded(word_to_string(&suffix)));
                    table.add_suffix(suffix);
                    table.fill(teacher);
                    continue;
                }
                Consistency::Consistent => break,
            }
        }

        let hypothesis = table.build_hypothesis()?;
        events.push(LearnEvent::Hypothesis {
            states: hypothesis.state_count(),
        });
        match teacher.equivalence(&hypothesis) {
            None => return Ok((hypothesis, events)),
            Some(cex) => {
                // A true counterexample must separate teacher and hypothesis.
                if hypothesis.accepts(&cex) == teacher.membership(&cex) {
                    return Err(LearnError::TeacherInconsistent(word_to_string(&cex)));
                }
                events.push(LearnEvent::Counterexample(word_to_string(&cex)));
                table.add_counterexample_with_prefixes(&cex);
                table.fill(teacher);
            }
        }
    }
    Err(LearnError::RoundLimit(MAX_ROUNDS))
}

/// Teacher over a membership function with brute-force bounded equivalence.
pub struct BoundedTeacher<F: FnMut(&[char]) -> bool> {
    membership_fn: F,
    alphabet: Vec<char>,
    max_len: usize,
}

impl<F: FnMut(&[char]) -> bool> BoundedTeacher<F> {
    pub fn new(membership_fn: F, alphabet: Vec<char>, max_len: usize) -> Self {
        BoundedTeacher {
            membership_fn,
            alphabet,
            max_len,
        }
    }
}

impl<F: FnMut(&[char]) -> bool> Teacher for BoundedTeacher<F> {
    fn membership(&mut self, word: &[char]) -> bool {
        (self.membership_fn)(word)
    }

    fn equivalence(&mut self, hypothesis: &Dfa) -> Option<Word> {
        // Scan lengths in order; at the first length with any disagreement,
        // prefer words the target accepts but the hypothesis rejects, in
        // lexicographic order, before wrongly accepted ones.
        let mut words: Vec<Word> = vec![Vec::new()];
        for _ in 0..=self.max_len {
            let mut false_negative: Option<Word> = None;
            let mut false_positive: Option<Word> = None;
            for w in &words {
                let truth = (self.membership_fn)(w);
                let hyp = hypothesis.accepts(w);
                if truth && !hyp && false_negative.is_none() {
                    false_negative = Some(w.clone());
                }
                if !truth && hyp && false_positive.is_none() {
                    false_positive = Some(w.clone());
                }
            }
            if let Some(w) = false_negative.or(false_positive) {
                return Some(w);
            }
            let mut next = Vec::with_capacity(words.len() * self.alphabet.len());
            for w in &words {
                for &c in &self.alphabet {
                    let mut ww = w.clone();
                    ww.push(c);
                    next.push(ww);
                }
            }
            words = next;
        }
        None
    }
}

/// Language of words with an even number of 'a's and an even number of 'b's.
pub fn even_a_even_b(word: &[char]) -> bool {
    let a = word.iter().filter(|&&c| c == 'a').count();
    let b = word.iter().filter(|&&c| c == 'b').count();
    a % 2 == 0 && b % 2 == 0
}
