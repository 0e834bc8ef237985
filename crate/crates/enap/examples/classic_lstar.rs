//! Classical active DFA learning, narrated: learn the language of words with
//! an even number of a's and an even number of b's from a membership oracle
//! and a bounded equivalence teacher, printing each table event.
//!
//! ```bash
//! cargo run --example classic_lstar
//! ```

use enap::lstar_classic::{dfa_to_dot, even_a_even_b, learn, BoundedTeacher, LearnEvent};

fn main() {
    let alphabet = vec!['a', 'b'];
    let mut teacher = BoundedTeacher::new(even_a_even_b, alphabet.clone(), 8);
    let (dfa, events) = learn(&mut teacher, &alphabet).expect("learning converges");

    println!("events:");
    for e in &events {
        match e {
            LearnEvent::RowPromoted(r) => println!("  closedness: promoted row {r:?}"),
            LearnEvent::SuffixAdded(s) => println!("  consistency: added suffix {s:?}"),
            LearnEvent::Hypothesis { states } => println!("  hypothesis with {states} states"),
            LearnEvent::Counterexample(c) => println!("  counterexample {c:?}"),
        }
    }
    println!("\nfinal machine: {} states", dfa.state_count());
    for word in ["", "aabb", "ba", "abab", "bb"] {
        let chars: Vec<char> = word.chars().collect();
        println!("  accepts {word:?}: {}", dfa.accepts(&chars));
    }
    println!("\n{}", dfa_to_dot(&dfa));
}
