use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ControlError;
use crate::abstraction::{assign_symbol, encode_observation, Codebook, EncoderParams};
use crate::core::{cosine_sim, Pmm, SymbolId};
use crate::envs::Environment;
use crate::nnkit::{MlpParams, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FallbackPolicy {
    /// Repeat the previous action when the current (state, symbol) has no
    /// edge (zero action at the first step).
    HoldLastAction,
    /// Jump to the state most centroid-similar to the current one among
    /// those that accept the current symbol.
    NearestStateJump,
}

/// The executable bi-level policy: frozen machine + codebook + feature
/// encoder + residual network + learnable state embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyBundle {
    pub pmm: Pmm,
    pub codebook: Codebook,
    pub encoder: EncoderParams,
    pub residual: MlpParams,
    pub state_embed: Vec<Vec<f64>>,
    pub eps_tiebreak: f64,
    pub fallback: FallbackPolicy,
}

impl PolicyBundle {
    pub fn state_embed_dim(&self) -> usize {
        self.state_embed.first().map(|v| v.len()).unwrap_or(0)
    }

    pub fn residual_input(&self, state: usize, feature: &[f64], a_base: &[f64]) -> Vec<f64> {
        let mut u = self.state_embed[state].clone();
        u.extend_from_slice(feature);
        u.extend_from_slice(a_base);
        u
    }
}

/// Mutable per-episode controller state.
#[derive(Debug, Clone)]
pub struct ControllerState {
    pub state: usize,
    pub step: usize,
    pub last_symbol: Option<SymbolId>,
    pub last_action: Vec<f64>,
}

impl ControllerState {
    pub fn new(bundle: &PolicyBundle) -> Self {
        ControllerState {
            state: bundle.pmm.initial().unwrap_or(0),
            step: 0,
            last_symbol: None,
            last_action: vec![0.0; bundle.pmm.action_dim],
        }
    }
}

/// Sample-count-weighted mean of the action priors over edges (q, c, *).
pub fn coarse_action(pmm: &Pmm, state: usize, symbol: SymbolId) -> Result<Vec<f64>, ControlError> {
    let edges = pmm.edges_from(state, symbol);
    if edges.is_empty() {
        return Err(ControlError::NoTransition { state, symbol });
    }
    let mut mean = vec![0.0; pmm.action_dim];
    let mut total = 0usize;
    for e in edges {
        total += e.action_samples;
        for (m, &v) in mean.iter_mut().zip(&e.action_mean) {
            *m += v * e.action_samples as f64;
        }
    }
    for m in mean.iter_mut() {
        *m /= total as f64;
    }
    Ok(mean)
}

#[derive(Debug, Clone)]
pub struct ActOutput {
    pub action: Vec<f64>,
    pub symbol: SymbolId,
    /// State the prior was actually read from (differs from the controller
    /// state after a nearest-state fallback jump).
    pub effective_state: usize,
    pub fallback_used: bool,
}

/// One predict-act step: ground the observation to a symbol, read the coarse
/// prior for (state, symbol), and add the residual correction. Deterministic.
pub fn act(
    bundle: &PolicyBundle,
    state: &mut ControllerState,
    obs: &[f64],
) -> Result<ActOutput, ControlError> {
    let feature = encode_observation(&bundle.encoder, obs)?;
    let symbol = assign_symbol(&bundle.codebook, &feature)?;

    let (effective_state, fallback_used) = if bundle.pmm.edges_from(state.state, symbol).is_empty()
    {
        match bundle.fallback {
            FallbackPolicy::HoldLastAction => {
                let action = state.last_action.clone();
                state.last_symbol = Some(symbol);
                state.step += 1;
                return Ok(ActOutput {
                    action,
                    symbol,
                    effective_state: state.state,
                    fallback_used: true,
                });
            }
            FallbackPolicy::NearestStateJump => {
                let current = &bundle.pmm.states[state.state].centroid;
                let mut best: Option<(usize, f64)> = None;
                for s in &bundle.pmm.states {
                    if s.nis.contains(&symbol) {
                        let c = cosine_sim(&s.centroid, current).unwrap_or(f64::NEG_INFINITY);
                        if best.map(|(_, bc)| c > bc).unwrap_or(true) {
                            best = Some((s.id, c));
                        }
                    }
                }
                match best {
                    Some((id, _)) => (id, true),
                    None => {
                        let action = state.last_action.clone();
                        state.last_symbol = Some(symbol);
                        state.step += 1;
                        return Ok(ActOutput {
                            action,
                            symbol,
                            effective_state: state.state,
                            fallback_used: true,
                        });
                    }
                }
            }
        }
    } else {
        (state.state, false)
    };
    if fallback_used {
        state.state = effective_state;
    }

    let a_base = coarse_action(&bundle.pmm, effective_state, symbol)?;
    let u = bundle.residual_input(effective_state, &feature, &a_base);
    let correction = bundle.residual.forward(&u).output;
    let action: Vec<f64> = a_base
        .iter()
        .zip(&correction)
        .map(|(b, r)| b + r)
        .collect();

    state.last_action = action.clone();
    state.last_symbol = Some(symbol);
    state.step += 1;
    Ok(ActOutput {
        action,
        symbol,
        effective_state,
        fallback_used,
    })
}

/// State update: among the destinations reachable from (q, c), prefer those
/// whose next-input set contains the observed next symbol, then the more
/// probable; ties resolve to the lowest state id. `eps` keeps the probability
/// term strictly dominated by the signature indicator.
pub fn next_state(
    pmm: &Pmm,
    state: usize,
    symbol: SymbolId,
    next_symbol: SymbolId,
    eps: f64,
) -> Result<usize, ControlError> {
    let edges = pmm.edges_from(state, symbol);
    if edges.is_empty() {
        return Err(ControlError::DeadEnd { state, symbol });
    }
    // Pool parallel edges into per-destination probabilities.
    let mut probs: Vec<(usize, f64)> = Vec::new();
    for e in edges {
        match probs.iter_mut().find(|(d, _)| *d == e.dst) {
            Some((_, p)) => *p += e.prob,
            None => probs.push((e.dst, e.prob)),
        }
    }
    probs.sort_by_key(|&(d, _)| d);
    let mut best = probs[0].0;
    let mut best_score = f64::NEG_INFINITY;
    for (dst, p) in probs {
        let indicator = if pmm.states[dst].nis.contains(&next_symbol) {
            1.0
        } else {
            0.0
        };
        let score = indicator + eps * p;
        if score > best_score {
            best_score = score;
            best = dst;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub obs: Vec<f64>,
    pub action: Vec<f64>,
    pub symbol: SymbolId,
    pub state: usize,
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub steps: Vec<TraceStep>,
    pub visited_states: Vec<usize>,
    pub success: bool,
    pub fallback_events: usize,
}

/// Runs the predict-act-update cycle until the environment terminates or the
/// step budget runs out.
pub fn run_episode<E: Environment>(
    env: &mut E,
    bundle: &PolicyBundle,
    max_steps: usize,
) -> Result<EpisodeTrace, ControlError> {
    let mut state = ControllerState::new(bundle);
    let mut trace = EpisodeTrace {
        steps: Vec::new(),
        visited_states: vec![state.state],
        success: env.is_success(),
        fallback_events: 0,
    };
    for _ in 0..max_steps {
        if env.is_terminal() {
            break;
        }
        let obs = env.observe();
        let out = act(bundle, &mut state, &obs)?;
        env.step(&out.action);
        trace.steps.push(TraceStep {
            obs,
            action: out.action.clone(),
            symbol: out.symbol,
            state: out.effective_state,
            fallback: out.fallback_used,
        });
        if out.fallback_used {
            trace.fallback_events += 1;
        }
        if env.is_terminal() {
            break;
        }
        // Observe the next symbol and update the machine state.
        let next_obs = env.observe();
        let next_feature = encode_observation(&bundle.encoder, &next_obs)?;
        let next_symbol = assign_symbol(&bundle.codebook, &next_feature)?;
        if !bundle
            .pmm
            .edges_from(out.effective_state, out.symbol)
            .is_empty()
        {
            state.state = next_state(
                &bundle.pmm,
                out.effective_state,
                out.symbol,
                next_symbol,
                bundle.eps_tiebreak,
            )?;
            trace.visited_states.push(state.state);
        }
    }
    trace.success = env.is_success();
    Ok(trace)
}

/// Rollout for an arbitrary observation-to-action policy (used by the plain
/// behavior-cloning baseline).
pub fn run_episode_with<E: Environment, F: FnMut(&[f64]) -> Vec<f64>>(
    env: &mut E,
    mut policy: F,
    max_steps: usize,
) -> bool {
    for _ in 0..max_steps {
        if env.is_terminal() {
            break;
        }
        let obs = env.observe();
        let action = policy(&obs);
        env.step(&action);
    }
    env.is_success()
}

const BUNDLE_VERSION: &str = "1";

#[derive(Serialize, Deserialize)]
struct BundleManifest {
    eps_tiebreak: f64,
    fallback: FallbackPolicy,
    versions: std::collections::BTreeMap<String, String>,
}

impl PolicyBundle {
    /// Writes the bundle as a directory: pmm.json, codebook.json,
    /// encoder.json, residual.json and the bundle.json manifest.
    pub fn save_dir(&self, dir: &Path) -> Result<(), Box<dyn std::error::Error>> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("pmm.json"), crate::core::pmm_to_json(&self.pmm))?;
        self.codebook.save(&dir.join("codebook.json"))?;
        let mut enc = serde_json::to_string(&self.encoder)?;
        enc.push('\n');
        fs::write(dir.join("encoder.json"), enc)?;
        let mut ck = self.residual.to_checkpoint();
        ck.tensors
            .push(Tensor::matrix("state_embed", &self.state_embed));
        ck.save(&dir.join("residual.json"))?;
        let manifest = BundleManifest {
            eps_tiebreak: self.eps_tiebreak,
            fallback: self.fallback,
            versions: [
                ("bundle".to_string(), BUNDLE_VERSION.to_string()),
                ("params".to_string(), "nnkit_v1".to_string()),
            ]
            .into_iter()
            .collect(),
        };
        let mut m = serde_json::to_string(&manifest)?;
        m.push('\n');
        fs::write(dir.join("bundle.json"), m)?;
        Ok(())
    }

    pub fn load_dir(dir: &Path) -> Result<Self, Box<dyn std::error::Error>> {
        let pmm = crate::core::load_pmm(&dir.join("pmm.json"))?;
        let codebook = Codebook::load(&dir.join("codebook.json"))?;
        let encoder: EncoderParams =
            serde_json::from_str(&fs::read_to_string(dir.join("encoder.json"))?)?;
        let ck = crate::nnkit::Checkpoint::load(&dir.join("residual.json"))?;
        let residual = MlpParams::from_checkpoint(&ck)?;
        let state_embed = ck.tensor("state_embed")?.to_matrix();
        let manifest: BundleManifest =
            serde_json::from_str(&fs::read_to_string(dir.join("bundle.json"))?)?;
        Ok(PolicyBundle {
            pmm,
            codebook,
            encoder,
            residual,
            state_embed,
            eps_tiebreak: manifest.eps_tiebreak,
            fallback: manifest.fallback,
        })
    }
}
