//! Effect of the phase-aware contrastive term on machine size: mining with
//! the contrast weight on yields a more compact machine than with it off,
//! at identical similarity thresholds.
//!
//! ```bash
//! cargo run --release --example contrast_ablation
//! ```

use enap::abstraction::EncoderParams;
use enap::envs::{multiphase2d_demos, DemoMode};
use enap::history_encoder::{train_history_encoder, TrainConfig};
use enap::lstar_extended::{mine, MineConfig};
use enap::pipeline::{abstract_stage, PipelineConfig};

fn main() {
    let ds = multiphase2d_demos(60, 0, DemoMode::Bimodal);
    let pcfg = PipelineConfig::default();
    let (_, annotated) =
        abstract_stage(&ds, &EncoderParams::identity(4), &pcfg).unwrap();

    let mine_cfg = MineConfig {
        tau_sim: 0.9,
        eps_err: 0.6,
        max_eq_rounds: 400,
        prune: true,
    };

    for seed in 0..3u64 {
        let mut sizes = Vec::new();
        for lambda in [0.5, 0.0] {
            let rnn_cfg = TrainConfig {
                epochs: 60,
                lambda_contrast: lambda,
                seed,
                ..TrainConfig::default()
            };
            let (enc, _) = train_history_encoder(&annotated, &rnn_cfg).unwrap();
            let result = mine(&annotated, &enc, &mine_cfg).unwrap();
            sizes.push(result.pmm.states.len());
        }
        println!(
            "seed {seed}: |Q| with contrast = {}, without = {} ({})",
            sizes[0],
            sizes[1],
            if sizes[0] < sizes[1] { "smaller" } else { "NOT smaller" }
        );
    }
}
