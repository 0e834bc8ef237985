//! Acceptance suite: one test per shipped guarantee, each printing a
//! pass/fail line. Run with `cargo test --test acceptance -- --nocapture`.

use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use enap::abstraction::{annotate_dataset, EncoderParams};
use enap::control::{
    behavior_cloning, em_train, joint_loss, label_dataset_states, run_episode, run_episode_with,
    EmConfig, FallbackPolicy, PolicyBundle,
};
use enap::core::{cosine_sim, normalize_in_place, pmm_validate, Dataset, Pmm, Step, Trajectory};
use enap::envs::{gridworld_demos, multiphase2d_demos, DemoMode, MultiPhase2D};
use enap::history_encoder::{saturation_bound, HistoryEncoder, SaturationBound};
use enap::lstar_classic::{even_a_even_b, learn, BoundedTeacher, LearnEvent};
use enap::lstar_extended::{
    mine, nd_equivalence_query, pmm_isomorphic, stable_phase_prune, EqOutcome, MineConfig,
};
use enap::metrics::{action_separation, loop_ratio};
use enap::nnkit::{rnn_loss_and_grads, RnnParams, RnnSequence};
use enap::pipeline::stage_seed;

fn report(criterion: usize, name: &str, ok: bool, detail: &str) {
    println!(
        "[acceptance] criterion {criterion:2} ({name}): {} — {detail}",
        if ok { "PASS" } else { "FAIL" }
    );
}

fn check_valid(pmm: &Pmm, context: &str) {
    let violations = pmm_validate(pmm);
    assert!(
        violations.is_empty(),
        "{context}: machine violates invariants: {violations:?}"
    );
}

fn eq_passes_all(pmm: &Pmm, ds: &Dataset, eps: f64) -> bool {
    ds.trajectories.iter().all(|t| {
        let actions: Vec<Vec<f64>> = t.steps.iter().map(|s| s.action.clone()).collect();
        nd_equivalence_query(pmm, &t.symbols(), &actions, eps) == EqOutcome::Pass
    })
}

#[test]
fn criterion_01_classical_walkthrough() {
    let start = Instant::now();
    let alphabet = vec!['a', 'b'];
    let mut teacher = BoundedTeacher::new(even_a_even_b, alphabet.clone(), 8);
    let (dfa, events) = learn(&mut teacher, &alphabet).unwrap();

    let first_event_is_promotion_of_a = events.first() == Some(&LearnEvent::RowPromoted("a".into()));
    let first_suffix = events.iter().find_map(|e| match e {
        LearnEvent::SuffixAdded(s) => Some(s.as_str()),
        _ => None,
    });
    let counterexamples: Vec<&str> = events
        .iter()
        .filter_map(|e| match e {
            LearnEvent::Counterexample(c) => Some(c.as_str()),
            _ => None,
        })
        .collect();

    let mut language_equal = true;
    let mut words: Vec<Vec<char>> = vec![Vec::new()];
    for _ in 0..=8 {
        for w in &words {
            if dfa.accepts(w) != even_a_even_b(w) {
                language_equal = false;
            }
        }
        words = words
            .iter()
            .flat_map(|w| {
                alphabet.iter().map(move |&c| {
                    let mut ww = w.clone();
                    ww.push(c);
                    ww
                })
            })
            .collect();
    }

    let elapsed = start.elapsed();
    let ok = first_event_is_promotion_of_a
        && first_suffix == Some("a")
        && counterexamples.first() == Some(&"bb")
        && dfa.state_count() == 4
        && language_equal
        && elapsed.as_secs_f64() < 1.0;
    report(
        1,
        "classical L* walkthrough",
        ok,
        &format!(
            "violating row 'a' first: {first_event_is_promotion_of_a}, first suffix {first_suffix:?}, \
             counterexamples {counterexamples:?}, {} states, language-equal <=8: {language_equal}, {elapsed:.1?}",
            dfa.state_count()
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_02_extended_walkthrough() {
    let start = Instant::now();
    let ds = gridworld_demos();
    let enc = HistoryEncoder::exact(64);
    let cfg = MineConfig::default();
    let result = mine(&ds, &enc, &cfg).unwrap();
    check_valid(&result.pmm, "gridworld machine");

    let cex_prefixes: Vec<Vec<usize>> = result
        .diagnostics
        .iter()
        .filter_map(|d| d.counterexample.as_ref())
        .map(|c| {
            let traj = ds
                .trajectories
                .iter()
                .find(|t| t.traj_id == c.traj_id)
                .unwrap();
            traj.symbols()[..c.t].to_vec()
        })
        .collect();
    let printed = vec![
        vec![0, 4, 8],
        vec![0, 4, 8, 9, 13],
        vec![0, 4, 8, 9, 10, 14],
    ];

    let passes = eq_passes_all(&result.pmm, &ds, cfg.eps_err);

    // Convergence: the state reached via c13 and the one via c10 both push
    // into one shared state on input c14.
    let dst_after = |input: usize| -> Vec<usize> {
        result
            .pmm
            .edges
            .iter()
            .filter(|e| e.input == input)
            .map(|e| e.dst)
            .collect()
    };
    let c13_states = dst_after(13);
    let c10_states = dst_after(10);
    let converged = c13_states.len() == 1 && c10_states.len() == 1 && {
        let out13: Vec<usize> = result
            .pmm
            .edges_from(c13_states[0], 14)
            .iter()
            .map(|e| e.dst)
            .collect();
        let out10: Vec<usize> = result
            .pmm
            .edges_from(c10_states[0], 14)
            .iter()
            .map(|e| e.dst)
            .collect();
        out13.len() == 1 && out13 == out10
    };

    let elapsed = start.elapsed();
    let ok = cex_prefixes == printed
        && result.rounds_used <= 5
        && passes
        && converged
        && elapsed.as_secs_f64() < 1.0;
    report(
        2,
        "extended L* walkthrough",
        ok,
        &format!(
            "counterexamples printed: {}, rounds {}, final passes: {passes}, \
             convergence under c14: {converged}, {elapsed:.1?}",
            cex_prefixes == printed,
            result.rounds_used
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_03_gradient_correctness() {
    // Sequence loss on random nets across >= 20 seeds.
    let mut worst_rnn: f64 = 0.0;
    for seed in 0..20u64 {
        let p = RnnParams::seeded(8, 2, 3, 4, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(10_000 + seed);
        let batch = vec![RnnSequence {
            actions: (0..5)
                .map(|_| (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect(),
            symbols: (0..5).map(|_| rng.gen_range(0..4)).collect(),
        }];
        let (_, grads) = rnn_loss_and_grads(&p, &batch, 0.5).unwrap();
        let flat_g = grads.flatten();
        let flat_p = p.flatten();
        for i in 0..flat_p.len() {
            let h = 1e-5;
            let mut fp = flat_p.clone();
            let mut plus = p.clone();
            fp[i] += h;
            plus.assign_from_flat(&fp);
            let mut minus = p.clone();
            fp[i] -= 2.0 * h;
            minus.assign_from_flat(&fp);
            let (lp, _) = rnn_loss_and_grads(&plus, &batch, 0.5).unwrap();
            let (lm, _) = rnn_loss_and_grads(&minus, &batch, 0.5).unwrap();
            let num = (lp - lm) / (2.0 * h);
            let rel = (flat_g[i] - num).abs() / flat_g[i].abs().max(num.abs()).max(1e-6);
            worst_rnn = worst_rnn.max(rel);
        }
    }

    // Joint policy loss across >= 20 seeds.
    let base_ds = Dataset::new(vec![Trajectory {
        traj_id: "t".into(),
        steps: (0..4)
            .map(|t| Step {
                obs: vec![0.37 + 0.41 * t as f64],
                action: vec![0.1 * t as f64],
                symbol: Some(t % 2),
            })
            .collect(),
    }])
    .unwrap();
    let machine = mine(&base_ds, &HistoryEncoder::exact(32), &MineConfig::default())
        .unwrap()
        .pmm;
    let labels = label_dataset_states(&machine, &base_ds, 0.1).unwrap();
    let mut worst_joint: f64 = 0.0;
    for seed in 0..20u64 {
        let bundle = PolicyBundle {
            codebook: enap::abstraction::Codebook {
                centroids: vec![vec![0.25], vec![0.75]],
                min_cluster_size: 1,
                refined: false,
            },
            encoder: EncoderParams::Mlp(enap::nnkit::MlpParams::seeded(&[1, 4, 2], 100 + seed)),
            residual: enap::nnkit::MlpParams::seeded(&[2 + 2 + 1, 8, 1], 200 + seed),
            state_embed: (0..machine.states.len())
                .map(|i| vec![0.03 * (i as f64 + 1.0), -0.05 * (seed as f64 + 1.0) / 20.0])
                .collect(),
            eps_tiebreak: 0.5,
            fallback: FallbackPolicy::NearestStateJump,
            pmm: machine.clone(),
        };
        let flatten = |b: &PolicyBundle| -> Vec<f64> {
            let mut f = b.residual.flatten();
            f.extend(b.state_embed.iter().flatten().copied());
            if let EncoderParams::Mlp(m) = &b.encoder {
                f.extend(m.flatten());
            }
            f
        };
        let rebuild = |b: &PolicyBundle, f: &[f64]| -> PolicyBundle {
            let mut nb = b.clone();
            let res_len = nb.residual.flatten().len();
            nb.residual.assign_from_flat(&f[..res_len]);
            let se_dim = nb.state_embed[0].len();
            let se_len = nb.state_embed.len() * se_dim;
            for (i, row) in nb.state_embed.iter_mut().enumerate() {
                row.copy_from_slice(&f[res_len + i * se_dim..res_len + (i + 1) * se_dim]);
            }
            if let EncoderParams::Mlp(m) = &mut nb.encoder {
                m.assign_from_flat(&f[res_len + se_len..]);
            }
            nb
        };
        let (_, grads) = joint_loss(&bundle, &labels, 0.3).unwrap();
        let mut flat_g = grads.residual.flatten();
        flat_g.extend(grads.state_embed.iter().flatten().copied());
        flat_g.extend(grads.encoder.as_ref().unwrap().flatten());
        let flat_p = flatten(&bundle);
        for i in 0..flat_p.len() {
            let h = 1e-5;
            let mut fp = flat_p.clone();
            fp[i] += h;
            let (lp, _) = joint_loss(&rebuild(&bundle, &fp), &labels, 0.3).unwrap();
            fp[i] -= 2.0 * h;
            let (lm, _) = joint_loss(&rebuild(&bundle, &fp), &labels, 0.3).unwrap();
            let num = (lp - lm) / (2.0 * h);
            let rel = (flat_g[i] - num).abs() / flat_g[i].abs().max(num.abs()).max(1e-6);
            worst_joint = worst_joint.max(rel);
        }
    }

    let ok = worst_rnn < 1e-4 && worst_joint < 1e-4;
    report(
        3,
        "gradient correctness",
        ok,
        &format!("max rel err: sequence loss {worst_rnn:.2e}, joint loss {worst_joint:.2e}, 20 seeds each"),
    );
    assert!(ok);
}

#[test]
fn criterion_04_automaton_invariants() {
    let mut failures: Vec<String> = Vec::new();

    // Machines produced across representative inputs all validate, and
    // pruning preserves the equivalence pass on the data they were mined
    // from.
    let gridworld = gridworld_demos();
    let multiphase = {
        let raw = multiphase2d_demos(40, 1, DemoMode::Bimodal);
        let cfg = enap::pipeline::PipelineConfig::default();
        let (_, annotated) = enap::pipeline::abstract_stage(&raw, &EncoderParams::identity(4), &cfg).unwrap();
        annotated
    };
    let cases: Vec<(&str, Dataset, f64)> = vec![
        ("gridworld", gridworld, 0.1),
        ("multiphase", multiphase, 0.6),
    ];
    for (name, ds, eps) in &cases {
        let cfg = MineConfig {
            eps_err: *eps,
            prune: false,
            max_eq_rounds: 400,
            ..MineConfig::default()
        };
        let enc = HistoryEncoder::exact(64);
        let result = mine(ds, &enc, &cfg).unwrap();
        let violations = pmm_validate(&result.pmm);
        if !violations.is_empty() {
            failures.push(format!("{name}: {violations:?}"));
        }
        if !eq_passes_all(&result.pmm, ds, *eps) {
            failures.push(format!("{name}: EQ fails before pruning"));
        }
        let pruned = stable_phase_prune(&result.pmm);
        if !pmm_validate(&pruned).is_empty() {
            failures.push(format!("{name}: pruned machine invalid"));
        }
        if !eq_passes_all(&pruned, ds, *eps) {
            failures.push(format!("{name}: pruning broke the equivalence pass"));
        }
    }

    // Probability normalization is already part of validation; spot-check
    // the sums directly on a fresh gridworld machine.
    let result = mine(
        &gridworld_demos(),
        &HistoryEncoder::exact(64),
        &MineConfig::default(),
    )
    .unwrap();
    let mut by_src_input: std::collections::BTreeMap<(usize, usize), f64> = Default::default();
    for e in &result.pmm.edges {
        *by_src_input.entry((e.src, e.input)).or_insert(0.0) += e.prob;
    }
    for ((src, input), total) in by_src_input {
        if (total - 1.0).abs() > 1e-9 {
            failures.push(format!("prob sum at (q{src}, c{input}) = {total}"));
        }
    }

    // Four-state self-loop chain collapses to a single node.
    let mut states = Vec::new();
    let mut edges = Vec::new();
    for i in 0..4usize {
        states.push(enap::core::PmmState {
            id: i,
            centroid: vec![1.0],
            nis: Default::default(),
            is_initial: i == 0,
        });
        let own = enap::core::PmmEdge {
            src: i,
            input: 0,
            dst: i,
            prob: if i < 3 { 0.5 } else { 1.0 },
            action_mean: vec![0.25],
            action_samples: 2,
        };
        edges.push(own);
        if i < 3 {
            edges.push(enap::core::PmmEdge {
                src: i,
                input: 0,
                dst: i + 1,
                prob: 0.5,
                action_mean: vec![0.25],
                action_samples: 2,
            });
        }
    }
    let mut chain = Pmm {
        states,
        edges,
        alphabet_size: 1,
        action_dim: 1,
    };
    chain.rebuild_nis();
    let collapsed = stable_phase_prune(&chain);
    if collapsed.states.len() != 1 {
        failures.push(format!(
            "self-loop chain pruned to {} states",
            collapsed.states.len()
        ));
    }

    let ok = failures.is_empty();
    report(
        4,
        "automaton invariants",
        ok,
        &format!(
            "normalization, NIS, prune-preserves-EQ, chain collapse{}",
            if ok {
                String::new()
            } else {
                format!("; failures: {failures:?}")
            }
        ),
    );
    assert!(ok, "{failures:?}");
}

#[test]
fn criterion_05_identifiability() {
    // saturation_bound(4, 0.1) = 0.32 exactly (to 1e-12).
    let bound = saturation_bound(4, 0.1);
    let bound_ok = matches!(bound, SaturationBound::Bound(v) if (v - 0.32).abs() <= 1e-12);

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut total_violations = 0usize;
    let trials_per_dim = 10_000;
    for d in [2usize, 3, 4] {
        let inv_sqrt_d = 1.0 / (d as f64).sqrt();
        for _ in 0..trials_per_dim {
            let eps_budget = rng.gen_range(0.0..0.9 * inv_sqrt_d);
            let sample = |rng: &mut ChaCha8Rng| -> (Vec<f64>, Vec<f64>) {
                let vertex: Vec<f64> = (0..d)
                    .map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 } * inv_sqrt_d)
                    .collect();
                let mut delta: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
                normalize_in_place(&mut delta);
                let radius = rng.gen_range(0.0..eps_budget);
                let mut h: Vec<f64> = vertex
                    .iter()
                    .zip(&delta)
                    .map(|(v, x)| v + radius * x)
                    .collect();
                normalize_in_place(&mut h);
                (vertex, h)
            };
            let (v1, h1) = sample(&mut rng);
            let (v2, h2) = sample(&mut rng);
            let dist = |a: &[f64], b: &[f64]| -> f64 {
                a.iter()
                    .zip(b)
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt()
            };
            let eff_eps = dist(&h1, &v1).max(dist(&h2, &v2));
            let Some(kappa_max) = saturation_bound(d, eff_eps).value() else {
                continue;
            };
            let cos = cosine_sim(&h1, &h2).unwrap();
            if cos >= 1.0 - kappa_max && v1 != v2 {
                total_violations += 1;
            }
        }
    }

    let ok = bound_ok && total_violations == 0;
    report(
        5,
        "identifiability",
        ok,
        &format!(
            "bound(4, 0.1) = 0.32: {bound_ok}, {total_violations} violations over 3 x {trials_per_dim} trials"
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_06_end_to_end_multiphase() {
    let start = Instant::now();
    let ds = multiphase2d_demos(200, 0, DemoMode::Bimodal);
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
    check_valid(&bundle.pmm, "multiphase bundle machine");

    // Branching: the two goal modes trace along paths that share a state and
    // then diverge from it.
    let annotated = annotate_dataset(&ds, &bundle.codebook, &bundle.encoder).unwrap();
    let path_of = |idx: usize| -> Vec<usize> {
        let t = &annotated.trajectories[idx];
        let actions: Vec<Vec<f64>> = t.steps.iter().map(|s| s.action.clone()).collect();
        enap::control::nd_trace_path(&bundle.pmm, &t.symbols(), &actions, cfg.mine.eps_err)
            .expect("training trajectory traces")
    };
    let path_goal1 = path_of(0);
    let path_goal2 = path_of(1);
    let mut branch_state = None;
    for i in 0..path_goal1.len().min(path_goal2.len()) - 1 {
        if path_goal1[i] == path_goal2[i] && path_goal1[i + 1] != path_goal2[i + 1] {
            branch_state = Some(path_goal1[i]);
            break;
        }
    }
    let has_branch = branch_state.is_some();

    // 100 seeded rollouts with alternating goals.
    let episodes = 100;
    let mut wins = 0;
    for ep in 0..episodes {
        let mut env = MultiPhase2D::seeded(stage_seed(0, &format!("episode{ep}")));
        env.goal_idx = ep % 2;
        if run_episode(&mut env, &bundle, 60).unwrap().success {
            wins += 1;
        }
    }
    let success = wins as f64 / episodes as f64;

    // Equal-capacity behavior-cloning baseline, recorded alongside (no
    // ordering asserted).
    let bc = behavior_cloning(&ds, &cfg.residual_hidden, 2000, cfg.lr, stage_seed(0, "bc")).unwrap();
    let mut bc_wins = 0;
    for ep in 0..episodes {
        let mut env = MultiPhase2D::seeded(stage_seed(0, &format!("episode{ep}")));
        env.goal_idx = ep % 2;
        if run_episode_with(&mut env, |obs| bc.forward(obs).output, 60) {
            bc_wins += 1;
        }
    }
    let bc_success = bc_wins as f64 / episodes as f64;

    let elapsed = start.elapsed();
    let ok = has_branch && success >= 0.90 && elapsed.as_secs_f64() < 300.0;
    report(
        6,
        "end-to-end multiphase",
        ok,
        &format!(
            "branching state: {:?}, bundle success {success:.2}, behavior-cloning baseline {bc_success:.2} \
             (recorded, not compared), |Q| = {}, {elapsed:.1?}",
            branch_state,
            bundle.pmm.states.len()
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_07_contrast_ablation() {
    let ds = multiphase2d_demos(60, 0, DemoMode::Bimodal);
    let pcfg = enap::pipeline::PipelineConfig::default();
    let (_, annotated) =
        enap::pipeline::abstract_stage(&ds, &EncoderParams::identity(4), &pcfg).unwrap();
    let mine_cfg = MineConfig {
        tau_sim: 0.9,
        eps_err: 0.6,
        max_eq_rounds: 400,
        prune: true,
    };

    let mut results = Vec::new();
    let mut all_smaller = true;
    for seed in 0..3u64 {
        let mut sizes = Vec::new();
        for lambda in [0.5, 0.0] {
            let rnn_cfg = enap::history_encoder::TrainConfig {
                epochs: 60,
                lambda_contrast: lambda,
                seed,
                ..enap::history_encoder::TrainConfig::default()
            };
            let (enc, _) =
                enap::history_encoder::train_history_encoder(&annotated, &rnn_cfg).unwrap();
            let result = mine(&annotated, &enc, &mine_cfg).unwrap();
            check_valid(&result.pmm, "ablation machine");
            sizes.push(result.pmm.states.len());
        }
        all_smaller &= sizes[0] < sizes[1];
        results.push((seed, sizes[0], sizes[1]));
    }

    report(
        7,
        "contrastive ablation",
        all_smaller,
        &format!("|Q| (with, without) per seed: {results:?}"),
    );
    assert!(all_smaller);
}

#[test]
fn criterion_08_data_scaling_isomorphism() {
    // Full data: two copies of each branch mode; subsample: one copy of
    // each. Structures must be isomorphic.
    let sub = gridworld_demos();
    let mut full_trajs = sub.trajectories.clone();
    for t in &sub.trajectories {
        let mut copy = t.clone();
        copy.traj_id = format!("{}-copy", t.traj_id);
        full_trajs.push(copy);
    }
    let full = Dataset::new(full_trajs).unwrap();
    let enc = HistoryEncoder::exact(64);
    let cfg = MineConfig::default();
    let pmm_sub = mine(&sub, &enc, &cfg).unwrap().pmm;
    let pmm_full = mine(&full, &enc, &cfg).unwrap().pmm;
    check_valid(&pmm_sub, "subsample machine");
    check_valid(&pmm_full, "full machine");
    let iso = pmm_isomorphic(&pmm_sub, &pmm_full);
    report(
        8,
        "data-scaling stability",
        iso,
        &format!(
            "half-data machine ({} states) isomorphic to full-data machine ({} states): {iso}",
            pmm_sub.states.len(),
            pmm_full.states.len()
        ),
    );
    assert!(iso);
}

#[test]
fn criterion_09_metrics_arithmetic() {
    // Handcrafted three-state machine with known counts.
    let mut pmm = Pmm {
        states: (0..3)
            .map(|i| enap::core::PmmState {
                id: i,
                centroid: vec![1.0],
                nis: Default::default(),
                is_initial: i == 0,
            })
            .collect(),
        edges: vec![
            enap::core::PmmEdge {
                src: 0,
                input: 0,
                dst: 0,
                prob: 0.5,
                action_mean: vec![0.0, 0.0],
                action_samples: 1,
            },
            enap::core::PmmEdge {
                src: 0,
                input: 0,
                dst: 1,
                prob: 0.5,
                action_mean: vec![3.0, 4.0],
                action_samples: 1,
            },
            enap::core::PmmEdge {
                src: 1,
                input: 1,
                dst: 2,
                prob: 1.0,
                action_mean: vec![0.0, 8.0],
                action_samples: 1,
            },
        ],
        alphabet_size: 2,
        action_dim: 2,
    };
    pmm.rebuild_nis();

    // Brute-force oracles.
    let lvr_oracle = 1.0 / 3.0;
    let asd_oracle = (5.0 + 8.0 + ((3.0f64 - 0.0).powi(2) + (4.0 - 8.0f64).powi(2)).sqrt()) / 3.0;
    let lvr_ok = (loop_ratio(&pmm) - lvr_oracle).abs() < 1e-15;
    let asd_ok = (action_separation(&pmm) - asd_oracle).abs() < 1e-12;
    let srn_ok = (0.8 / 4.0 - 0.2f64).abs() < 1e-15;

    let ok = lvr_ok && asd_ok && srn_ok;
    report(
        9,
        "metrics arithmetic",
        ok,
        &format!(
            "lvr {} (oracle {lvr_oracle}), asd {} (oracle {asd_oracle}), srn(0.8, |Q|=4) = 0.2",
            loop_ratio(&pmm),
            action_separation(&pmm)
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_10_cli_determinism() {
    use std::process::Command;
    let bin = env!("CARGO_BIN_EXE_enap");
    let dir = tempfile::tempdir().unwrap();
    let path = |name: &str| dir.path().join(name);
    let run = |args: &[&str]| {
        let out = Command::new(bin)
            .args(args)
            .output()
            .expect("binary runs");
        assert!(
            out.status.success(),
            "command {args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    };

    // Demo + mine twice.
    run(&["demo", "frozenlake", "--out", path("d.jsonl").to_str().unwrap()]);
    for name in ["pmm_a.json", "pmm_b.json"] {
        run(&[
            "mine",
            "--data",
            path("d.jsonl").to_str().unwrap(),
            "--encoder",
            "exact",
            "--tau-sim",
            "0.9",
            "--out",
            path(name).to_str().unwrap(),
        ]);
    }
    let mine_identical =
        std::fs::read(path("pmm_a.json")).unwrap() == std::fs::read(path("pmm_b.json")).unwrap();

    // Small residual-training run twice, via a config file.
    let config = path("cfg.toml");
    std::fs::write(
        &config,
        "eps_err = 0.6\nmax_eq_rounds = 400\nrnn_epochs = 8\nm_epochs = 30\nseed = 3\n",
    )
    .unwrap();
    run(&[
        "demo",
        "multiphase2d",
        "--n",
        "30",
        "--out",
        path("m.jsonl").to_str().unwrap(),
        "--seed",
        "3",
    ]);
    for name in ["bundle_a", "bundle_b"] {
        run(&[
            "train-residual",
            "--data",
            path("m.jsonl").to_str().unwrap(),
            "--k",
            "1",
            "--config",
            config.to_str().unwrap(),
            "--out",
            path(name).to_str().unwrap(),
        ]);
    }
    let mut residual_identical = true;
    for file in ["pmm.json", "codebook.json", "encoder.json", "residual.json", "bundle.json"] {
        let a = std::fs::read(path("bundle_a").join(file)).unwrap();
        let b = std::fs::read(path("bundle_b").join(file)).unwrap();
        residual_identical &= a == b;
    }

    // The machine from the golden run also validates cleanly.
    run(&["validate", path("pmm_a.json").to_str().unwrap()]);

    let ok = mine_identical && residual_identical;
    report(
        10,
        "artifact determinism",
        ok,
        &format!("mine byte-identical: {mine_identical}, train-residual byte-identical: {residual_identical}"),
    );
    assert!(ok);
}
