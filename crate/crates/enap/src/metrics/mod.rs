//! Structural evaluation of a mined machine: success rate (plain and per
//! node), action-prior fidelity, self-loop ratio, cluster separability, and
//! action separation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abstraction::{encode_dataset, Codebook, EncoderParams};
use crate::control::{nd_trace_path, EpisodeTrace};
use crate::core::{cosine_sim, euclidean, Dataset, Pmm};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("no rollouts supplied")]
    EmptyRollouts,
    #[error("trajectory {0} does not trace through the machine")]
    UntracedDataset(String),
    #[error(transparent)]
    Abstraction(#[from] crate::abstraction::AbstractionError),
}

/// The six structural metrics. `sr`/`srn` are None when no rollouts were
/// supplied (dataset-only evaluation); they serialize as null.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuralReport {
    pub sr: Option<f64>,
    pub srn: Option<f64>,
    pub apf: f64,
    pub lvr: f64,
    pub css: f64,
    pub asd: f64,
    pub node_count: usize,
    pub edge_count: usize,
}

impl StructuralReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Six-column CSV row for radar-style plotting.
    pub fn to_csv(&self) -> String {
        let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_else(|| "n/a".into());
        format!(
            "sr,srn,apf,lvr,css,asd\n{},{},{},{},{},{}\n",
            fmt(self.sr),
            fmt(self.srn),
            self.apf,
            self.lvr,
            self.css,
            self.asd
        )
    }
}

/// Mean squared error between each step's expert action and the action prior
/// of the machine edge the step traverses, over every training trajectory.
pub fn apf(pmm: &Pmm, ds: &Dataset, eps_err: f64) -> Result<f64, MetricsError> {
    let mut total = 0.0;
    let mut count = 0usize;
    for traj in &ds.trajectories {
        let symbols = traj.symbols();
        let actions: Vec<Vec<f64>> = traj.steps.iter().map(|s| s.action.clone()).collect();
        let path = nd_trace_path(pmm, &symbols, &actions, eps_err)
            .ok_or_else(|| MetricsError::UntracedDataset(traj.traj_id.clone()))?;
        for (t, step) in traj.steps.iter().enumerate() {
            // The matched edge along the traced path.
            let edge = pmm
                .edges_from(path[t], symbols[t])
                .into_iter()
                .find(|e| e.dst == path[t + 1])
                .expect("traced path follows edges");
            total += step
                .action
                .iter()
                .zip(&edge.action_mean)
                .map(|(a, m)| (a - m) * (a - m))
                .sum::<f64>();
            count += 1;
        }
    }
    Ok(total / count.max(1) as f64)
}

/// Ratio of self-loop edges to total edges.
pub fn loop_ratio(pmm: &Pmm) -> f64 {
    if pmm.edges.is_empty() {
        return 0.0;
    }
    let loops = pmm.edges.iter().filter(|e| e.src == e.dst).count();
    loops as f64 / pmm.edges.len() as f64
}

/// Mean pairwise Euclidean distance between distinct edges' action means;
/// zero for machines with fewer than two edges.
pub fn action_separation(pmm: &Pmm) -> f64 {
    let n = pmm.edges.len();
    if n < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..n {
        for j in (i + 1)..n {
            total += euclidean(&pmm.edges[i].action_mean, &pmm.edges[j].action_mean);
            pairs += 1;
        }
    }
    total / pairs as f64
}

const CSS_REPRESENTATIVES: usize = 5;
const CSS_DENOM_FLOOR: f64 = 1e-6;

/// Cluster semantic separability over encoder features: the mean cosine
/// similarity among each cluster's representative points (the ones nearest
/// its centroid) divided by the mean cosine between representatives of
/// distinct clusters. The denominator is floored when inter-cluster
/// similarity is non-positive.
pub fn cluster_separability(
    ds: &Dataset,
    cb: &Codebook,
    enc: &EncoderParams,
) -> Result<f64, MetricsError> {
    let features = encode_dataset(enc, ds)?;
    let symbols: Vec<usize> = ds
        .trajectories
        .iter()
        .flat_map(|t| t.steps.iter().map(|s| s.symbol.unwrap_or(0)))
        .collect();

    let mut reps: Vec<Vec<&Vec<f64>>> = Vec::new();
    for (c, centroid) in cb.centroids.iter().enumerate() {
        let mut members: Vec<(f64, usize)> = features
            .iter()
            .enumerate()
            .filter(|(i, _)| symbols[*i] == c)
            .map(|(i, f)| (euclidean(f, centroid), i))
            .collect();
        members.sort_by(|a, b| a.partial_cmp(b).unwrap());
        reps.push(
            members
                .iter()
                .take(CSS_REPRESENTATIVES)
                .map(|&(_, i)| &features[i])
                .collect(),
        );
    }

    let mut intra = Vec::new();
    for cluster in &reps {
        for i in 0..cluster.len() {
            for j in (i + 1)..cluster.len() {
                if let Ok(c) = cosine_sim(cluster[i], cluster[j]) {
                    intra.push(c);
                }
            }
        }
    }
    let mut inter = Vec::new();
    for a in 0..reps.len() {
        for b in (a + 1)..reps.len() {
            for fa in &reps[a] {
                for fb in &reps[b] {
                    if let Ok(c) = cosine_sim(fa, fb) {
                        inter.push(c);
                    }
                }
            }
        }
    }
    let mean = |v: &[f64]| {
        if v.is_empty() {
            0.0
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    };
    let denominator = mean(&inter).max(CSS_DENOM_FLOOR);
    Ok(mean(&intra) / denominator)
}

/// All six metrics. Pass an empty rollout slice for dataset-only evaluation
/// (success rates come out as n/a).
pub fn structural_metrics(
    pmm: &Pmm,
    rollouts: &[EpisodeTrace],
    ds: &Dataset,
    cb: &Codebook,
    enc: &EncoderParams,
    eps_err: f64,
) -> Result<StructuralReport, MetricsError> {
    let sr = if rollouts.is_empty() {
        None
    } else {
        let wins = rollouts.iter().filter(|r| r.success).count();
        Some(wins as f64 / rollouts.len() as f64)
    };
    let node_count = pmm.states.len();
    Ok(StructuralReport {
        sr,
        srn: sr.map(|s| s / node_count as f64),
        apf: apf(pmm, ds, eps_err)?,
        lvr: loop_ratio(pmm),
        css: cluster_separability(ds, cb, enc)?,
        asd: action_separation(pmm),
        node_count,
        edge_count: pmm.edges.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::{PmmEdge, PmmState};
    use std::collections::BTreeSet;

    fn handcrafted() -> Pmm {
        // Three states, five edges, two self-loops.
        let mut pmm = Pmm {
            states: vec![
                PmmState {
                    id: 0,
                    centroid: vec![1.0],
                    nis: BTreeSet::new(),
                    is_initial: true,
                },
                PmmState {
                    id: 1,
                    centroid: vec![1.0],
                    nis: BTreeSet::new(),
                    is_initial: false,
                },
                PmmState {
                    id: 2,
                    centroid: vec![1.0],
                    nis: BTreeSet::new(),
                    is_initial: false,
                },
            ],
            edges: vec![
                PmmEdge {
                    src: 0,
                    input: 0,
                    dst: 0,
                    prob: 0.5,
                    action_mean: vec![0.0, 0.0],
                    action_samples: 1,
                },
                PmmEdge {
                    src: 0,
                    input: 0,
                    dst: 1,
                    prob: 0.5,
                    action_mean: vec![1.0, 0.0],
                    action_samples: 1,
                },
                PmmEdge {
                    src: 1,
                    input: 1,
                    dst: 1,
                    prob: 1.0,
                    action_mean: vec![0.0, 1.0],
                    action_samples: 1,
                },
                PmmEdge {
                    src: 1,
                    input: 2,
                    dst: 2,
                    prob: 1.0,
                    action_mean: vec![3.0, 4.0],
                    action_samples: 1,
                },
                PmmEdge {
                    src: 2,
                    input: 0,
                    dst: 0,
                    prob: 1.0,
                    action_mean: vec![-1.0, 0.0],
                    action_samples: 1,
                },
            ],
            alphabet_size: 3,
            action_dim: 2,
        };
        pmm.rebuild_nis();
        pmm
    }

    fn one_hot_codebook() -> Codebook {
        Codebook {
            centroids: (0..16)
                .map(|i| {
                    let mut v = vec![0.0; 16];
                    v[i] = 1.0;
                    v
                })
                .collect(),
            min_cluster_size: 1,
            refined: false,
        }
    }

    #[test]
    fn loop_ratio_counts_self_loops() {
        assert_eq!(loop_ratio(&handcrafted()), 2.0 / 5.0);
    }

    #[test]
    fn asd_matches_brute_force() {
        let pmm = handcrafted();
        let means: Vec<&Vec<f64>> = pmm.edges.iter().map(|e| &e.action_mean).collect();
        let mut total = 0.0;
        let mut n = 0;
        for i in 0..means.len() {
            for j in (i + 1)..means.len() {
                total += euclidean(means[i], means[j]);
                n += 1;
            }
        }
        assert!((action_separation(&pmm) - total / n as f64).abs() < 1e-12);
    }

    #[test]
    fn asd_two_edges_is_plain_distance() {
        let mut pmm = handcrafted();
        pmm.edges.truncate(2);
        pmm.edges[0].action_mean = vec![0.0, 0.0];
        pmm.edges[1].action_mean = vec![3.0, 4.0];
        assert_eq!(action_separation(&pmm), 5.0);
        pmm.edges.truncate(1);
        assert_eq!(action_separation(&pmm), 0.0);
    }

    #[test]
    fn srn_is_sr_over_nodes() {
        let rollouts: Vec<EpisodeTrace> = (0..10)
            .map(|i| EpisodeTrace {
                steps: vec![],
                visited_states: vec![],
                success: i < 8,
                fallback_events: 0,
            })
            .collect();
        let ds = crate::envs::gridworld_demos();
        let enc = crate::history_encoder::HistoryEncoder::exact(32);
        let pmm = crate::lstar_extended::mine(
            &ds,
            &enc,
            &crate::lstar_extended::MineConfig::default(),
        )
        .unwrap()
        .pmm;
        let report = structural_metrics(
            &pmm,
            &rollouts,
            &ds,
            &one_hot_codebook(),
            &EncoderParams::identity(16),
            0.1,
        )
        .unwrap();
        assert_eq!(report.sr, Some(0.8));
        assert!((report.srn.unwrap() * report.node_count as f64 - 0.8).abs() < 1e-15);
        // One-hot actions are identical within each edge: perfect fidelity.
        assert_eq!(report.apf, 0.0);
        // sr 0.8 with |Q| = 4 gives srn 0.2 (arithmetic identity).
        let srn_example: f64 = 0.8 / 4.0;
        assert!((srn_example - 0.2).abs() < 1e-15);
    }

    #[test]
    fn apf_counts_offsets() {
        // Single edge whose mean is offset by [1,0] from the only action.
        let ds = Dataset::new(vec![crate::core::Trajectory {
            traj_id: "t".into(),
            steps: vec![crate::core::Step {
                obs: vec![0.0],
                action: vec![1.0, 0.0],
                symbol: Some(0),
            }],
        }])
        .unwrap();
        let mut pmm = Pmm {
            states: vec![
                PmmState {
                    id: 0,
                    centroid: vec![1.0],
                    nis: BTreeSet::new(),
                    is_initial: true,
                },
                PmmState {
                    id: 1,
                    centroid: vec![1.0],
                    nis: BTreeSet::new(),
                    is_initial: false,
                },
            ],
            edges: vec![PmmEdge {
                src: 0,
                input: 0,
                dst: 1,
                prob: 1.0,
                action_mean: vec![0.0, 0.0],
                action_samples: 1,
            }],
            alphabet_size: 1,
            action_dim: 2,
        };
        pmm.rebuild_nis();
        assert_eq!(apf(&pmm, &ds, 1.5).unwrap(), 1.0);
        // With a tight tolerance the trajectory no longer traces.
        assert!(matches!(
            apf(&pmm, &ds, 0.1),
            Err(MetricsError::UntracedDataset(_))
        ));
    }

    #[test]
    fn metrics_are_pure() {
        let ds = crate::envs::gridworld_demos();
        let enc = crate::history_encoder::HistoryEncoder::exact(32);
        let pmm = crate::lstar_extended::mine(
            &ds,
            &enc,
            &crate::lstar_extended::MineConfig::default(),
        )
        .unwrap()
        .pmm;
        let id = EncoderParams::identity(16);
        let a = structural_metrics(&pmm, &[], &ds, &one_hot_codebook(), &id, 0.1).unwrap();
        let b = structural_metrics(&pmm, &[], &ds, &one_hot_codebook(), &id, 0.1).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.sr, None);
        assert!(a.lvr >= 0.0 && a.lvr <= 1.0);
    }
}
