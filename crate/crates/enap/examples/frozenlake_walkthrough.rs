//! Mining the gridworld machine from exactly two demonstration walks with the
//! exact-history encoder. Prints the counterexample progression, the final
//! machine, and its DOT rendering: a shared chain to the decision cell, a
//! probabilistic branch, and re-convergence where the walks rejoin.
//!
//! ```bash
//! cargo run --example frozenlake_walkthrough
//! ```

use enap::core::{pmm_to_dot, pmm_validate};
use enap::envs::gridworld_demos;
use enap::history_encoder::HistoryEncoder;
use enap::lstar_extended::{mine, MineConfig};

fn main() {
    let ds = gridworld_demos();
    for traj in &ds.trajectories {
        let cells: Vec<String> = traj.symbols().iter().map(|c| format!("c{c}")).collect();
        println!("{}: {}", traj.traj_id, cells.join(" -> "));
    }

    let enc = HistoryEncoder::exact(64);
    let cfg = MineConfig::default();
    let result = mine(&ds, &enc, &cfg).expect("mining terminates");

    println!("\nequivalence rounds:");
    for d in &result.diagnostics {
        match &d.counterexample {
            Some(c) => {
                let traj = ds
                    .trajectories
                    .iter()
                    .find(|t| t.traj_id == c.traj_id)
                    .unwrap();
                let prefix: Vec<String> = traj.symbols()[..c.t]
                    .iter()
                    .map(|s| format!("c{s}"))
                    .collect();
                println!(
                    "  round {}: |U| = {}, counterexample ({})",
                    d.round,
                    d.u_size,
                    prefix.join(", ")
                );
            }
            None => println!("  round {}: |U| = {}, pass", d.round, d.u_size),
        }
    }

    println!(
        "\nfinal machine: {} states, {} edges, {} violations",
        result.pmm.states.len(),
        result.pmm.edges.len(),
        pmm_validate(&result.pmm).len()
    );
    println!("\n{}", pmm_to_dot(&result.pmm));
}
