use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use enap::abstraction::{Codebook, EncoderParams};
use enap::control::{run_episode, EpisodeTrace, PolicyBundle};
use enap::core::{
    load_dataset, load_pmm, pmm_to_dot, pmm_validate, save_dataset, save_pmm, Dataset,
};
use enap::envs::{gridworld_demos, multiphase2d_demos, DemoMode, GridWorld, MultiPhase2D};
use enap::history_encoder::HistoryEncoder;
use enap::lstar_extended::{mine_with_test, stable_phase_prune};
use enap::metrics::structural_metrics;
use enap::pipeline::{
    abstract_stage, encoder_stage, split_holdout, stage_seed, train_residual_stage,
    PipelineConfig,
};

#[derive(Parser)]
#[command(name = "enap", about = "Mine probabilistic Mealy machines from trajectories and run them as hierarchical controllers", version)]
struct Cli {
    /// Structured JSON on stdout instead of human-readable text.
    #[arg(long, global = true)]
    json: bool,
    /// Declarative key = value configuration file; flags win over it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed; every stage derives its own stream from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum EncoderModeArg {
    Exact,
    RandomRnn,
    TrainedRnn,
}

impl EncoderModeArg {
    fn as_str(self) -> &'static str {
        match self {
            EncoderModeArg::Exact => "exact",
            EncoderModeArg::RandomRnn => "random-rnn",
            EncoderModeArg::TrainedRnn => "trained-rnn",
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum EnvArg {
    Frozenlake,
    Multiphase2d,
}

#[derive(Clone, Copy, ValueEnum)]
enum DemoModeArg {
    SingleGoal,
    Bimodal,
}

#[derive(Subcommand)]
enum Command {
    /// Write a demonstration dataset in trajectory JSONL format.
    Demo {
        #[arg(value_enum)]
        env: EnvArg,
        #[arg(long)]
        out: PathBuf,
        /// Number of episodes (multiphase2d only).
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[arg(long, value_enum, default_value_t = DemoModeArg::Bimodal)]
        mode: DemoModeArg,
    },
    /// Discover the symbol alphabet and annotate every step.
    Abstract {
        #[arg(long)]
        data: PathBuf,
        /// Annotated dataset output (JSONL).
        #[arg(long)]
        out: PathBuf,
        /// Codebook output (JSON).
        #[arg(long)]
        codebook: PathBuf,
        #[arg(long)]
        min_cluster_size: Option<usize>,
    },
    /// Train the recurrent history encoder on an annotated dataset.
    TrainEncoder {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        lambda_contrast: Option<f64>,
    },
    /// Mine a probabilistic Mealy machine from an annotated dataset.
    Mine {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        encoder: Option<EncoderModeArg>,
        /// Checkpoint of a trained history encoder (for trained-rnn mode).
        #[arg(long)]
        encoder_path: Option<PathBuf>,
        #[arg(long)]
        tau_sim: Option<f64>,
        #[arg(long)]
        eps_err: Option<f64>,
        #[arg(long)]
        max_rounds: Option<usize>,
        /// Per-round diagnostics output (JSON Lines).
        #[arg(long)]
        diagnostics: Option<PathBuf>,
        #[arg(long)]
        no_prune: bool,
        /// Run the equivalence check on a held-out trajectory split.
        #[arg(long)]
        holdout: bool,
    },
    /// Apply stable-phase pruning to a machine file.
    Prune {
        pmm: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the full bi-level policy (EM loop) and write a bundle directory.
    TrainResidual {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// EM iterations.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        eps_err: Option<f64>,
        #[arg(long)]
        tau_sim: Option<f64>,
        #[arg(long)]
        max_rounds: Option<usize>,
    },
    /// Roll out a trained bundle in an environment.
    Rollout {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long, value_enum)]
        env: EnvArg,
        #[arg(long, default_value_t = 100)]
        episodes: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        max_steps: Option<usize>,
    },
    /// Structural metrics of a machine against a dataset (and rollouts).
    Metrics {
        #[arg(long)]
        pmm: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        codebook: PathBuf,
        #[arg(long)]
        rollouts: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Radar-style CSV (six columns).
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        eps_err: Option<f64>,
    },
    /// Render a machine file as Graphviz DOT.
    ExportDot {
        pmm: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check an artifact's invariants; exits non-zero on violations.
    Validate { file: PathBuf },
}

#[derive(Args)]
struct Shared {}

/// Print that tolerates a closed pipe (e.g. piping into `head`).
fn emit(line: &str) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout(), "{line}");
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("ENAP_LOG")).init();
    let cli = Cli::parse();
    let json = cli.json;
    match run(cli) {
        Ok(payload) => {
            if json {
                emit(&payload.to_string());
            } else if let Some(msg) = payload.get("message").and_then(|m| m.as_str()) {
                if !msg.is_empty() {
                    emit(msg);
                }
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            let obj = json!({"error": {"message": err.to_string()}});
            if json {
                emit(&obj.to_string());
            } else {
                eprintln!("error: {err}");
            }
            ExitCode::FAILURE
        }
    }
}

type AnyError = Box<dyn std::error::Error>;

fn load_config(cli_config: &Option<PathBuf>, seed: Option<u64>) -> Result<PipelineConfig, AnyError> {
    let mut cfg = match cli_config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<serde_json::Value, AnyError> {
    let mut cfg = load_config(&cli.config, cli.seed)?;
    let stamp = |cfg: &PipelineConfig, extra: serde_json::Value| -> serde_json::Value {
        let mut obj = json!({"ok": true, "config_hash": cfg.hash(), "seed": cfg.seed});
        if let (Some(map), Some(add)) = (obj.as_object_mut(), extra.as_object()) {
            for (k, v) in add {
                map.insert(k.clone(), v.clone());
            }
        }
        obj
    };

    match cli.command {
        Command::Demo { env, out, n, mode } => {
            let ds = match env {
                EnvArg::Frozenlake => gridworld_demos(),
                EnvArg::Multiphase2d => multiphase2d_demos(
                    n,
                    cfg.seed,
                    match mode {
                        DemoModeArg::SingleGoal => DemoMode::SingleGoal,
                        DemoModeArg::Bimodal => DemoMode::Bimodal,
                    },
                ),
            };
            save_dataset(&ds, &out)?;
            log::info!("wrote {} trajectories to {}", ds.trajectories.len(), out.display());
            Ok(stamp(
                &cfg,
                json!({"message": format!("wrote {} trajectories", ds.trajectories.len()),
                       "trajectories": ds.trajectories.len(), "out": out}),
            ))
        }
        Command::Abstract {
            data,
            out,
            codebook,
            min_cluster_size,
        } => {
            if let Some(mcs) = min_cluster_size {
                cfg.min_cluster_size = Some(mcs);
            }
            let ds = load_dataset(&data)?;
            let enc = EncoderParams::identity(ds.obs_dim);
            let (cb, annotated) = abstract_stage(&ds, &enc, &cfg)?;
            cb.save(&codebook)?;
            save_dataset(&annotated, &out)?;
            Ok(stamp(
                &cfg,
                json!({"message": format!("alphabet size {}", cb.alphabet_size()),
                       "alphabet_size": cb.alphabet_size(), "out": out, "codebook": codebook}),
            ))
        }
        Command::TrainEncoder {
            data,
            out,
            epochs,
            lambda_contrast,
        } => {
            if let Some(e) = epochs {
                cfg.rnn_epochs = e;
            }
            if let Some(l) = lambda_contrast {
                cfg.lambda_contrast = l;
            }
            let ds = load_dataset(&data)?;
            let (enc, curve) =
                enap::history_encoder::train_history_encoder(&ds, &cfg.train_config())?;
            enc.to_checkpoint().save(&out)?;
            Ok(stamp(
                &cfg,
                json!({"message": format!("trained encoder, loss {:.6} -> {:.6}",
                                           curve.first().unwrap(), curve.last().unwrap()),
                       "initial_loss": curve.first(), "final_loss": curve.last(), "out": out}),
            ))
        }
        Command::Mine {
            data,
            out,
            encoder,
            encoder_path,
            tau_sim,
            eps_err,
            max_rounds,
            diagnostics,
            no_prune,
            holdout,
        } => {
            if let Some(e) = encoder {
                cfg.encoder_mode = e.as_str().to_string();
            }
            if let Some(t) = tau_sim {
                cfg.tau_sim = t;
            }
            if let Some(e) = eps_err {
                cfg.eps_err = e;
            }
            if let Some(m) = max_rounds {
                cfg.max_eq_rounds = m;
            }
            if no_prune {
                cfg.prune = false;
            }
            cfg.validate()?;
            let ds = load_dataset(&data)?;
            let enc = match &encoder_path {
                Some(p) => HistoryEncoder::from_checkpoint(&enap::nnkit::Checkpoint::load(p)?)?,
                None => encoder_stage(&ds, &cfg)?,
            };
            let result = if holdout {
                let (train, hold) = split_holdout(&ds, cfg.holdout_fraction);
                mine_with_test(&train, &hold, &enc, &cfg.mine_config())?
            } else {
                mine_with_test(&ds, &ds, &enc, &cfg.mine_config())?
            };
            save_pmm(&result.pmm, &out)?;
            if let Some(diag) = &diagnostics {
                std::fs::write(diag, result.diagnostics_jsonl())?;
            }
            Ok(stamp(
                &cfg,
                json!({"message": format!("mined {} states, {} edges in {} rounds",
                                           result.pmm.states.len(), result.pmm.edges.len(),
                                           result.rounds_used),
                       "states": result.pmm.states.len(), "edges": result.pmm.edges.len(),
                       "rounds": result.rounds_used, "out": out}),
            ))
        }
        Command::Prune { pmm, out } => {
            let machine = load_pmm(&pmm)?;
            let pruned = stable_phase_prune(&machine);
            save_pmm(&pruned, &out)?;
            Ok(stamp(
                &cfg,
                json!({"message": format!("{} -> {} states", machine.states.len(), pruned.states.len()),
                       "states_before": machine.states.len(), "states_after": pruned.states.len(),
                       "out": out}),
            ))
        }
        Command::TrainResidual {
            data,
            out,
            k,
            eps_err,
            tau_sim,
            max_rounds,
        } => {
            if let Some(k) = k {
                cfg.em_iters = k;
            }
            if let Some(e) = eps_err {
                cfg.eps_err = e;
            }
            if let Some(t) = tau_sim {
                cfg.tau_sim = t;
            }
            if let Some(m) = max_rounds {
                cfg.max_eq_rounds = m;
            }
            cfg.validate()?;
            let ds = load_dataset(&data)?;
            let enc = EncoderParams::identity(ds.obs_dim);
            let bundle = train_residual_stage(&ds, &enc, &cfg)?;
            bundle.save_dir(&out)?;
            Ok(stamp(
                &cfg,
                json!({"message": format!("bundle with {} machine states written to {}",
                                           bundle.pmm.states.len(), out.display()),
                       "states": bundle.pmm.states.len(), "out": out}),
            ))
        }
        Command::Rollout {
            bundle,
            env,
            episodes,
            out,
            max_steps,
        } => {
            let bundle = PolicyBundle::load_dir(&bundle)?;
            let steps = max_steps.unwrap_or(cfg.max_episode_steps);
            let mut traces: Vec<EpisodeTrace> = Vec::with_capacity(episodes);
            for ep in 0..episodes {
                let ep_seed = stage_seed(cfg.seed, &format!("episode{ep}"));
                let trace = match env {
                    EnvArg::Frozenlake => {
                        let mut e = GridWorld::default();
                        run_episode(&mut e, &bundle, steps)?
                    }
                    EnvArg::Multiphase2d => {
                        let mut e = MultiPhase2D::seeded(ep_seed);
                        // Alternate goals across episodes for coverage.
                        e.goal_idx = ep % 2;
                        run_episode(&mut e, &bundle, steps)?
                    }
                };
                traces.push(trace);
            }
            let wins = traces.iter().filter(|t| t.success).count();
            let success_rate = wins as f64 / episodes.max(1) as f64;
            if let Some(path) = &out {
                let mut text = serde_json::to_string(&json!({"episodes": traces}))?;
                text.push('\n');
                std::fs::write(path, text)?;
            }
            Ok(stamp(
                &cfg,
                json!({"message": format!("success rate {success_rate:.2} over {episodes} episodes"),
                       "success_rate": success_rate, "episodes": episodes}),
            ))
        }
        Command::Metrics {
            pmm,
            data,
            codebook,
            rollouts,
            out,
            csv,
            eps_err,
        } => {
            if let Some(e) = eps_err {
                cfg.eps_err = e;
            }
            let machine = load_pmm(&pmm)?;
            let ds = load_dataset(&data)?;
            let cb = Codebook::load(&codebook)?;
            let traces: Vec<EpisodeTrace> = match &rollouts {
                Some(path) => {
                    let v: serde_json::Value =
                        serde_json::from_str(&std::fs::read_to_string(path)?)?;
                    serde_json::from_value(v["episodes"].clone())?
                }
                None => Vec::new(),
            };
            let enc = EncoderParams::identity(ds.obs_dim);
            let report = structural_metrics(&machine, &traces, &ds, &cb, &enc, cfg.eps_err)?;
            if let Some(path) = &out {
                std::fs::write(path, report.to_json())?;
            }
            if let Some(path) = &csv {
                std::fs::write(path, report.to_csv())?;
            }
            Ok(stamp(
                &cfg,
                json!({"message": format!("apf {:.4} lvr {:.2} css {:.3} asd {:.3}",
                                           report.apf, report.lvr, report.css, report.asd),
                       "report": serde_json::from_str::<serde_json::Value>(&report.to_json())?}),
            ))
        }
        Command::ExportDot { pmm, out } => {
            let machine = load_pmm(&pmm)?;
            let dot = pmm_to_dot(&machine);
            match &out {
                Some(path) => std::fs::write(path, &dot)?,
                None => {
                    use std::io::Write;
                    let _ = write!(std::io::stdout(), "{dot}");
                }
            }
            Ok(stamp(&cfg, json!({"message": "", "dot_bytes": dot.len()})))
        }
        Command::Validate { file } => {
            let report = validate_artifact(&file)?;
            if report.is_empty() {
                Ok(stamp(&cfg, json!({"message": "0 violations", "violations": []})))
            } else {
                Err(format!("{} violation(s): {}", report.len(), report.join("; ")).into())
            }
        }
    }
}

/// Artifact-type sniffing: trajectory JSONL, machine JSON, or codebook JSON.
fn validate_artifact(path: &Path) -> Result<Vec<String>, AnyError> {
    let text = std::fs::read_to_string(path)?;
    let trimmed = text.trim_start();
    if trimmed.starts_with('{') && trimmed.contains("\"alphabet_size\"") {
        let pmm = enap::core::pmm_from_json(&text)?;
        return Ok(pmm_validate(&pmm).iter().map(|v| v.to_string()).collect());
    }
    if trimmed.starts_with('{') && trimmed.contains("\"centroids\"") {
        let cb: Codebook = serde_json::from_str(&text)?;
        let mut out = Vec::new();
        if cb.centroids.is_empty() {
            out.push("codebook has no centroids".to_string());
        }
        let dim = cb.dim();
        if cb.centroids.iter().any(|c| c.len() != dim) {
            out.push("codebook centroid dimensions differ".to_string());
        }
        return Ok(out);
    }
    // Trajectory JSONL: constructing the dataset runs every invariant.
    let ds: Dataset = load_dataset(path)?;
    ds.validate()?;
    Ok(Vec::new())
}
