//! Structural metrics over a mined machine: mine the gridworld demos, run the
//! six-metric report against the dataset, and print the radar-style CSV.
//!
//! ```bash
//! cargo run --example structural_report
//! ```

use enap::abstraction::{Codebook, EncoderParams};
use enap::envs::gridworld_demos;
use enap::history_encoder::HistoryEncoder;
use enap::lstar_extended::{mine, MineConfig};
use enap::metrics::structural_metrics;

fn main() {
    let ds = gridworld_demos();
    let enc = HistoryEncoder::exact(64);
    let result = mine(&ds, &enc, &MineConfig::default()).expect("mining terminates");

    // One-hot cell codebook: nearest centroid recovers the cell index.
    let codebook = Codebook {
        centroids: (0..16)
            .map(|i| {
                let mut v = vec![0.0; 16];
                v[i] = 1.0;
                v
            })
            .collect(),
        min_cluster_size: 1,
        refined: false,
    };
    let report = structural_metrics(
        &result.pmm,
        &[],
        &ds,
        &codebook,
        &EncoderParams::identity(16),
        0.1,
    )
    .expect("dataset traces through the machine");

    println!("machine: {} states / {} edges", report.node_count, report.edge_count);
    println!("action prior fidelity (mse): {}", report.apf);
    println!("self-loop ratio:             {}", report.lvr);
    println!("cluster separability:        {:.4}", report.css);
    println!("action separation:           {:.4}", report.asd);
    println!("success rates: n/a (no rollouts supplied)");
    println!("\nradar csv:\n{}", report.to_csv());
}
