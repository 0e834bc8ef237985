//! End-to-end run on the two-phase point-mass task: generate bimodal demos,
//! train the full bi-level policy with the EM loop, then evaluate rollout
//! success against a plain behavior-cloning baseline of equal capacity.
//!
//! ```bash
//! cargo run --release --example full_pipeline
//! ```

use enap::abstraction::{annotate_dataset, EncoderParams};
use enap::control::{
    behavior_cloning, em_train, label_dataset_states, run_episode, run_episode_with, EmConfig,
};
use enap::envs::{multiphase2d_demos, DemoMode, MultiPhase2D};
use enap::lstar_extended::MineConfig;
use enap::metrics::structural_metrics;
use enap::pipeline::stage_seed;

fn main() {
    let start = std::time::Instant::now();
    let n_demos = 200;
    let ds = multiphase2d_demos(n_demos, 0, DemoMode::Bimodal);
    println!(
        "dataset: {} demos, {} steps",
        ds.trajectories.len(),
        ds.step_count()
    );

    let cfg = EmConfig {
        mine: MineConfig {
            tau_sim: 0.9,
            eps_err: 0.6,
            max_eq_rounds: 400,
            prune: true,
        },
        rnn_epochs: 20,
        m_epochs: 150,
        ..EmConfig::default()
    };
    let bundle = em_train(&ds, &EncoderParams::identity(4), 3, &cfg).unwrap();
    println!(
        "bundle: {} machine states, {} edges (t = {:.1?})",
        bundle.pmm.states.len(),
        bundle.pmm.edges.len(),
        start.elapsed()
    );

    // Rollouts: 100 seeded episodes, goals alternating.
    let episodes = 100;
    let mut wins = 0;
    let mut fallbacks = 0;
    for ep in 0..episodes {
        let mut env = MultiPhase2D::seeded(stage_seed(0, &format!("episode{ep}")));
        env.goal_idx = ep % 2;
        let trace = run_episode(&mut env, &bundle, 60).unwrap();
        wins += trace.success as usize;
        fallbacks += trace.fallback_events;
    }
    println!(
        "bundle success: {}/{episodes} (fallback events: {fallbacks})",
        wins
    );

    // Behavior-cloning baseline with the residual's capacity.
    let bc = behavior_cloning(&ds, &[64], 2000, 1e-3, stage_seed(0, "bc")).unwrap();
    let mut bc_wins = 0;
    for ep in 0..episodes {
        let mut env = MultiPhase2D::seeded(stage_seed(0, &format!("episode{ep}")));
        env.goal_idx = ep % 2;
        if run_episode_with(&mut env, |obs| bc.forward(obs).output, 60) {
            bc_wins += 1;
        }
    }
    println!("behavior-cloning baseline: {bc_wins}/{episodes}");

    // Structural report on the training data.
    let annotated = annotate_dataset(&ds, &bundle.codebook, &bundle.encoder).unwrap();
    let labels = label_dataset_states(&bundle.pmm, &annotated, cfg.mine.eps_err);
    println!("all trajectories trace: {}", labels.is_ok());
    let report = structural_metrics(
        &bundle.pmm,
        &[],
        &annotated,
        &bundle.codebook,
        &bundle.encoder,
        cfg.mine.eps_err,
    )
    .unwrap();
    println!(
        "metrics: apf {:.4}, lvr {:.2}, css {:.3}, asd {:.3}",
        report.apf, report.lvr, report.css, report.asd
    );
    println!("total {:.1?}", start.elapsed());
}
