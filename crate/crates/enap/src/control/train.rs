use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::bundle::{FallbackPolicy, PolicyBundle};
use super::ControlError;
use crate::abstraction::{
    annotate_dataset, assign_symbol, cluster_features, encode_dataset, encode_observation,
    refine_kmeans, ClusterParams, Codebook, EncoderParams,
};
use crate::core::{Dataset, Pmm, SymbolId};
use crate::history_encoder::{train_history_encoder, TrainConfig};
use crate::lstar_extended::{mine, MineConfig};
use crate::nnkit::{optimizer_step, mlp_loss_and_grads_mse, MlpParams, OptimizerState};

/// One supervised item for the policy objective: the observation, the expert
/// action, and the machine state and symbol active at that step.
#[derive(Debug, Clone)]
pub struct LabeledStep {
    pub obs: Vec<f64>,
    pub action: Vec<f64>,
    pub state: usize,
    pub symbol: SymbolId,
}

/// The unique (or lexicographically smallest) surviving machine path of a
/// trajectory under the per-step action tolerance. Returns the state sequence
/// q_0..q_T where q_t is the state the step-t symbol is consumed from.
pub fn nd_trace_path(
    pmm: &Pmm,
    symbols: &[SymbolId],
    actions: &[Vec<f64>],
    eps_err: f64,
) -> Option<Vec<usize>> {
    let init = pmm.initial()?;
    let t_len = symbols.len();
    // Forward frontiers.
    let mut frontiers: Vec<Vec<usize>> = vec![vec![init]];
    for t in 0..t_len {
        let mut next: Vec<usize> = Vec::new();
        for &q in &frontiers[t] {
            for e in pmm.edges_from(q, symbols[t]) {
                let ok = actions[t]
                    .iter()
                    .zip(&e.action_mean)
                    .all(|(a, m)| (a - m).abs() <= eps_err);
                if ok && !next.contains(&e.dst) {
                    next.push(e.dst);
                }
            }
        }
        if next.is_empty() {
            return None;
        }
        next.sort_unstable();
        frontiers.push(next);
    }
    // Backward pruning to states that can finish the trajectory.
    let mut surviving: Vec<Vec<usize>> = vec![Vec::new(); t_len + 1];
    surviving[t_len] = frontiers[t_len].clone();
    for t in (0..t_len).rev() {
        surviving[t] = frontiers[t]
            .iter()
            .copied()
            .filter(|&q| {
                pmm.edges_from(q, symbols[t]).iter().any(|e| {
                    surviving[t + 1].contains(&e.dst)
                        && actions[t]
                            .iter()
                            .zip(&e.action_mean)
                            .all(|(a, m)| (a - m).abs() <= eps_err)
                })
            })
            .collect();
        if surviving[t].is_empty() {
            return None;
        }
    }
    // Greedy smallest path through the surviving sets.
    let mut path = vec![init];
    for t in 0..t_len {
        let q = *path.last().unwrap();
        let next = pmm
            .edges_from(q, symbols[t])
            .iter()
            .filter(|e| {
                surviving[t + 1].contains(&e.dst)
                    && actions[t]
                        .iter()
                        .zip(&e.action_mean)
                        .all(|(a, m)| (a - m).abs() <= eps_err)
            })
            .map(|e| e.dst)
            .min()?;
        path.push(next);
    }
    Some(path)
}

/// Labels every step of every trajectory with its machine state along the
/// smallest surviving path.
pub fn label_dataset_states(
    pmm: &Pmm,
    ds: &Dataset,
    eps_err: f64,
) -> Result<Vec<LabeledStep>, ControlError> {
    let mut out = Vec::with_capacity(ds.step_count());
    for traj in &ds.trajectories {
        let symbols = traj.symbols();
        let actions: Vec<Vec<f64>> = traj.steps.iter().map(|s| s.action.clone()).collect();
        let path = nd_trace_path(pmm, &symbols, &actions, eps_err)
            .ok_or_else(|| ControlError::NoValidPath(traj.traj_id.clone()))?;
        for (t, step) in traj.steps.iter().enumerate() {
            out.push(LabeledStep {
                obs: step.obs.clone(),
                action: step.action.clone(),
                state: path[t],
                symbol: symbols[t],
            });
        }
    }
    Ok(out)
}

/// Gradients of the joint policy objective. The machine and codebook stay
/// frozen; the encoder gradient is present only for trainable encoders.
#[derive(Debug, Clone)]
pub struct JointGrads {
    pub residual: MlpParams,
    pub state_embed: Vec<Vec<f64>>,
    pub encoder: Option<MlpParams>,
}

/// Behavior-cloning loss with a center-pull regularizer: per step,
/// || a - (a_base + residual(e_q, f, a_base)) ||^2
///   + lambda_reg * 0.5 * || f - mu_c ||^2,
/// averaged over the batch. a_base is the frozen coarse prior of the step's
/// (state, symbol); mu_c the frozen centroid of its symbol.
pub fn joint_loss(
    bundle: &PolicyBundle,
    batch: &[LabeledStep],
    lambda_reg: f64,
) -> Result<(f64, JointGrads), ControlError> {
    let train_encoder = !bundle.encoder.is_identity();
    let mut grads = JointGrads {
        residual: MlpParams::zeros_like(&bundle.residual),
        state_embed: bundle
            .state_embed
            .iter()
            .map(|r| vec![0.0; r.len()])
            .collect(),
        encoder: match &bundle.encoder {
            EncoderParams::Mlp(m) => Some(MlpParams::zeros_like(m)),
            EncoderParams::Identity { .. } => None,
        },
    };
    let scale = 1.0 / batch.len().max(1) as f64;
    let mut loss = 0.0;
    let se_dim = bundle.state_embed_dim();

    for item in batch {
        let enc_fwd = match &bundle.encoder {
            EncoderParams::Mlp(m) => Some(m.forward(&item.obs)),
            EncoderParams::Identity { .. } => None,
        };
        let feature = match &enc_fwd {
            Some(fwd) => fwd.output.clone(),
            None => item.obs.clone(),
        };
        let a_base = super::coarse_action(&bundle.pmm, item.state, item.symbol)?;
        let u = bundle.residual_input(item.state, &feature, &a_base);
        let res_fwd = bundle.residual.forward(&u);
        let pred: Vec<f64> = a_base
            .iter()
            .zip(&res_fwd.output)
            .map(|(b, r)| b + r)
            .collect();

        let mut d_pred = vec![0.0; pred.len()];
        for ((d, y), t) in d_pred.iter_mut().zip(&pred).zip(&item.action) {
            let e = y - t;
            loss += e * e * scale;
            *d = 2.0 * e * scale;
        }
        let (res_grads, du) = bundle.residual.backward(&res_fwd, &d_pred);
        grads.residual.add_scaled(&res_grads, 1.0);

        for (g, &d) in grads.state_embed[item.state].iter_mut().zip(&du[..se_dim]) {
            *g += d;
        }

        let mut d_feature: Vec<f64> = du[se_dim..se_dim + feature.len()].to_vec();
        let mu = &bundle.codebook.centroids[item.symbol];
        for ((df, f), m) in d_feature.iter_mut().zip(&feature).zip(mu) {
            let diff = f - m;
            loss += lambda_reg * 0.5 * diff * diff * scale;
            *df += lambda_reg * diff * scale;
        }
        if train_encoder {
            if let (Some(fwd), Some(genc)) = (&enc_fwd, grads.encoder.as_mut()) {
                if let EncoderParams::Mlp(m) = &bundle.encoder {
                    let (g, _) = m.backward(fwd, &d_feature);
                    genc.add_scaled(&g, 1.0);
                }
            }
        }
    }

    if !loss.is_finite() {
        return Err(ControlError::NonFiniteLoss);
    }
    Ok((loss, grads))
}

fn flatten_embed(rows: &[Vec<f64>]) -> Vec<f64> {
    rows.iter().flatten().copied().collect()
}

fn assign_embed(rows: &mut [Vec<f64>], flat: &[f64]) {
    let mut it = flat.iter();
    for row in rows.iter_mut() {
        for v in row.iter_mut() {
            *v = *it.next().unwrap();
        }
    }
}

#[derive(Debug, Clone)]
pub struct EmConfig {
    pub mine: MineConfig,
    pub rnn_hidden: usize,
    pub sym_embed_dim: usize,
    pub rnn_epochs: usize,
    pub lambda_contrast: f64,
    pub min_cluster_size: Option<usize>,
    pub refine: bool,
    pub state_embed_dim: usize,
    pub residual_hidden: Vec<usize>,
    pub m_epochs: usize,
    pub lr: f64,
    pub lambda_reg: f64,
    pub loss_tol: f64,
    pub eps_tiebreak: f64,
    pub fallback: FallbackPolicy,
    pub seed: u64,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            mine: MineConfig::default(),
            rnn_hidden: 64,
            sym_embed_dim: 16,
            rnn_epochs: 30,
            lambda_contrast: 0.5,
            min_cluster_size: None,
            refine: true,
            state_embed_dim: 16,
            residual_hidden: vec![64],
            m_epochs: 200,
            lr: 1e-3,
            lambda_reg: 0.01,
            loss_tol: 1e-6,
            eps_tiebreak: 0.5,
            fallback: FallbackPolicy::NearestStateJump,
            seed: 0,
        }
    }
}

/// Deterministic per-stage seed split.
pub(crate) fn stage_seed(root: u64, tag: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(root.to_le_bytes());
    hasher.update(tag.as_bytes());
    let d = hasher.finalize();
    u64::from_le_bytes(d[..8].try_into().unwrap())
}

/// Expectation-maximization style training: each iteration re-extracts the
/// structure (features, alphabet, history encoder, machine) and then
/// optimizes the residual (and a trainable encoder) against the frozen
/// machine to convergence. Fully deterministic given the seed.
pub fn em_train(
    ds: &Dataset,
    init_enc: &EncoderParams,
    k: usize,
    cfg: &EmConfig,
) -> Result<PolicyBundle, ControlError> {
    assert!(k >= 1, "need at least one EM iteration");
    let mut encoder = init_enc.clone();
    let mut bundle: Option<PolicyBundle> = None;

    for _iter in 0..k {
        // E-step: structure extraction under the current encoder.
        let features = encode_dataset(&encoder, ds)?;
        let mcs = cfg
            .min_cluster_size
            .unwrap_or_else(|| (ds.step_count() / 100).max(5));
        let clustering = cluster_features(
            &features,
            ClusterParams {
                min_cluster_size: mcs,
                min_samples: mcs,
            },
        )?;
        let codebook = if cfg.refine {
            let (centroids, _) = refine_kmeans(
                &features,
                clustering.centroids.len(),
                stage_seed(cfg.seed, "kmeans"),
            )?;
            Codebook {
                centroids,
                min_cluster_size: mcs,
                refined: true,
            }
        } else {
            Codebook {
                centroids: clustering.centroids,
                min_cluster_size: mcs,
                refined: false,
            }
        };
        let annotated = annotate_dataset(ds, &codebook, &encoder)?;

        let rnn_cfg = TrainConfig {
            hidden_dim: cfg.rnn_hidden,
            sym_embed_dim: cfg.sym_embed_dim,
            epochs: cfg.rnn_epochs,
            lr: cfg.lr,
            lambda_contrast: cfg.lambda_contrast,
            seed: stage_seed(cfg.seed, "rnn"),
            normalize_output: true,
        };
        let (hist_enc, _) = train_history_encoder(&annotated, &rnn_cfg)?;
        let mined = mine(&annotated, &hist_enc, &cfg.mine)?;

        // M-step: freeze the machine, fit residual + state embeddings (+
        // encoder when trainable) by gradient descent to convergence.
        let labels = label_dataset_states(&mined.pmm, &annotated, cfg.mine.eps_err)?;
        let feature_dim = encoder.output_dim();
        let mut dims = vec![cfg.state_embed_dim + feature_dim + ds.action_dim];
        dims.extend_from_slice(&cfg.residual_hidden);
        dims.push(ds.action_dim);
        let residual = MlpParams::seeded(&dims, stage_seed(cfg.seed, "residual"));
        let mut embed_rng = ChaCha8Rng::seed_from_u64(stage_seed(cfg.seed, "state-embed"));
        let state_embed: Vec<Vec<f64>> = (0..mined.pmm.states.len())
            .map(|_| {
                (0..cfg.state_embed_dim)
                    .map(|_| rand::Rng::gen_range(&mut embed_rng, -0.1..0.1))
                    .collect()
            })
            .collect();

        let mut working = PolicyBundle {
            pmm: mined.pmm,
            codebook,
            encoder: encoder.clone(),
            residual,
            state_embed,
            eps_tiebreak: cfg.eps_tiebreak,
            fallback: cfg.fallback,
        };

        let train_encoder = !working.encoder.is_identity();
        let n_params = working.residual.flatten().len()
            + flatten_embed(&working.state_embed).len()
            + if train_encoder {
                match &working.encoder {
                    EncoderParams::Mlp(m) => m.flatten().len(),
                    _ => 0,
                }
            } else {
                0
            };
        let mut opt = OptimizerState::new(cfg.lr, n_params);
        let mut prev_loss = f64::INFINITY;
        for _epoch in 0..cfg.m_epochs {
            let (loss, grads) = joint_loss(&working, &labels, cfg.lambda_reg)?;
            let mut flat_p = working.residual.flatten();
            flat_p.extend(flatten_embed(&working.state_embed));
            let mut flat_g = grads.residual.flatten();
            flat_g.extend(flatten_embed(&grads.state_embed));
            if train_encoder {
                if let (EncoderParams::Mlp(m), Some(ge)) = (&working.encoder, &grads.encoder) {
                    flat_p.extend(m.flatten());
                    flat_g.extend(ge.flatten());
                }
            }
            optimizer_step(&mut opt, &mut flat_p, &flat_g)?;
            let res_len = working.residual.flatten().len();
            let se_len = flatten_embed(&working.state_embed).len();
            working.residual.assign_from_flat(&flat_p[..res_len]);
            assign_embed(&mut working.state_embed, &flat_p[res_len..res_len + se_len]);
            if train_encoder {
                if let EncoderParams::Mlp(m) = &mut working.encoder {
                    m.assign_from_flat(&flat_p[res_len + se_len..]);
                }
            }
            if (prev_loss - loss).abs() < cfg.loss_tol {
                break;
            }
            prev_loss = loss;
        }

        encoder = working.encoder.clone();
        bundle = Some(working);
    }

    Ok(bundle.expect("k >= 1"))
}

/// Plain behavior cloning: a feedforward net regressing actions from raw
/// observations, trained with the same optimizer and budget as the residual.
pub fn behavior_cloning(
    ds: &Dataset,
    hidden: &[usize],
    epochs: usize,
    lr: f64,
    seed: u64,
) -> Result<MlpParams, ControlError> {
    let mut dims = vec![ds.obs_dim];
    dims.extend_from_slice(hidden);
    dims.push(ds.action_dim);
    let mut net = MlpParams::seeded(&dims, seed);
    let batch: Vec<(Vec<f64>, Vec<f64>)> = ds
        .trajectories
        .iter()
        .flat_map(|t| t.steps.iter().map(|s| (s.obs.clone(), s.action.clone())))
        .collect();
    let mut opt = OptimizerState::new(lr, net.flatten().len());
    let mut prev = f64::INFINITY;
    for _ in 0..epochs {
        let (loss, grads) = mlp_loss_and_grads_mse(&net, &batch)?;
        let mut flat = net.flatten();
        optimizer_step(&mut opt, &mut flat, &grads.flatten())?;
        net.assign_from_flat(&flat);
        if (prev - loss).abs() < 1e-9 {
            break;
        }
        prev = loss;
    }
    Ok(net)
}

/// Mean squared error of the bundle's actions against labeled steps (used to
/// compare EM budgets).
pub fn bundle_action_mse(
    bundle: &PolicyBundle,
    labels: &[LabeledStep],
) -> Result<f64, ControlError> {
    let mut total = 0.0;
    for item in labels {
        let feature = encode_observation(&bundle.encoder, &item.obs)?;
        let symbol = assign_symbol(&bundle.codebook, &feature)?;
        let _ = symbol;
        let a_base = super::coarse_action(&bundle.pmm, item.state, item.symbol)?;
        let u = bundle.residual_input(item.state, &feature, &a_base);
        let out = bundle.residual.forward(&u).output;
        total += item
            .action
            .iter()
            .zip(a_base.iter().zip(&out))
            .map(|(a, (b, r))| {
                let e = a - (b + r);
                e * e
            })
            .sum::<f64>();
    }
    Ok(total / labels.len().max(1) as f64)
}
