//! Training the recurrent history encoder on a two-phase dataset and watching
//! what the contrastive term does to the embedding geometry: consecutive
//! embeddings inside one phase stay close while the phase boundary tears
//! them apart. Also prints the saturation diagnostics that justify a cosine
//! threshold as a state-identity test.
//!
//! ```bash
//! cargo run --example history_embeddings
//! ```

use enap::core::{cosine_sim, Dataset, Step, Trajectory};
use enap::history_encoder::{
    embed_history, saturation_report, train_history_encoder, TrainConfig,
};

fn two_phase_dataset() -> Dataset {
    let mut trajectories = Vec::new();
    for i in 0..4 {
        let steps = (0..20)
            .map(|t| {
                let (sym, act) = if t < 10 { (0, 0.5) } else { (1, -0.5) };
                Step {
                    obs: vec![t as f64 + i as f64 * 0.1],
                    action: vec![act],
                    symbol: Some(sym),
                }
            })
            .collect();
        trajectories.push(Trajectory {
            traj_id: format!("traj{i}"),
            steps,
        });
    }
    Dataset::new(trajectories).unwrap()
}

fn main() {
    let ds = two_phase_dataset();
    let cfg = TrainConfig {
        hidden_dim: 32,
        sym_embed_dim: 8,
        epochs: 40,
        ..TrainConfig::default()
    };
    let (enc, curve) = train_history_encoder(&ds, &cfg).expect("training succeeds");
    println!(
        "loss: {:.4} at init, {:.4} after {} epochs",
        curve[0],
        curve.last().unwrap(),
        cfg.epochs
    );

    let traj = &ds.trajectories[0];
    let steps: Vec<(Vec<f64>, usize)> = traj
        .steps
        .iter()
        .map(|s| (s.action.clone(), s.symbol.unwrap()))
        .collect();
    let embeddings: Vec<Vec<f64>> = (1..=steps.len())
        .map(|t| embed_history(&enc, &steps[..t]).unwrap())
        .collect();
    println!("\nconsecutive cosine similarities along one trajectory:");
    for t in 0..embeddings.len() - 1 {
        let cos = cosine_sim(&embeddings[t], &embeddings[t + 1]).unwrap();
        let marker = if steps[t].1 != steps[t + 1].1 {
            "  <- phase boundary"
        } else {
            ""
        };
        println!("  t{:02} -> t{:02}: {cos:+.4}{marker}", t, t + 1);
    }

    let report = saturation_report(&enc, &ds).unwrap();
    println!(
        "\nsaturation: mean |h_i| = {:.3}, epsilon_hat = {:.3}, kappa_max = {:?}",
        report.mean_abs_component, report.epsilon_hat, report.kappa_max
    );
}
