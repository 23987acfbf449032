//! The round loop against plaintext re-computations of the same round.

use fedfence_core::attacks::{AttackKind, AttackSpec, Trigger};
use fedfence_core::codec::encode_fixed;
use fedfence_core::estimators::{Estimator, FilterConfig};
use fedfence_core::secagg::{
    generate_masks, mask_encoded, partition_shards, ServerTranscript, ShardPlan,
};
use fedfence_core::sim::{
    local_train, run_protocol, run_round, HeterogeneitySpec, Loss, ProtocolConfig, SimState,
    TaskKind, TaskSpec, TrainTask,
};
use fedfence_core::{FixedPointParams, Purpose, RealVector, SeededRng};

fn gaussian_task(d: usize) -> TrainTask {
    TaskSpec {
        kind: TaskKind::GaussianMean,
        feature_dim: d,
        classes: 0,
        loss: Loss::Squared,
        train_samples: 0,
        test_samples: 0,
    }
    .build(0)
    .unwrap()
}

fn logistic_task() -> TrainTask {
    TaskSpec {
        kind: TaskKind::SyntheticLogistic {
            separation: 1.0,
            noise: 1.0,
        },
        feature_dim: 10,
        classes: 5,
        loss: Loss::CrossEntropy,
        train_samples: 2000,
        test_samples: 500,
    }
    .build(4)
    .unwrap()
}

fn config(n: usize, p: usize) -> ProtocolConfig {
    ProtocolConfig {
        n,
        p,
        rounds: 4,
        lr: 0.1,
        batch: 8,
        local_steps: 3,
        seed: 31,
        estimator: Estimator::Average,
        attack: AttackSpec::none(),
        malicious: 0,
        fixed_point: FixedPointParams::default(),
        shared_init: true,
        reshard_every_round: true,
        hetero: HeterogeneitySpec::Iid,
        samples_per_client: 10,
    }
}

fn plan_for(cfg: &ProtocolConfig, round: u64) -> ShardPlan {
    let mut r = SeededRng::for_purpose(cfg.seed, Purpose::Partition, &[round]);
    partition_shards(cfg.n, cfg.p, &mut r).unwrap()
}

#[test]
fn masked_rounds_match_plaintext_shard_averaging() {
    let task = logistic_task();
    for p in [1, 4, 20] {
        let cfg = config(20, p);
        let mut state = SimState::init(&cfg, &task).unwrap();
        for round in 1..=cfg.rounds as u64 {
            let before = state.model.clone();
            let honest: Vec<RealVector> = (0..cfg.n)
                .map(|c| {
                    let mut r =
                        SeededRng::for_purpose(cfg.seed, Purpose::Train, &[round, c as u64]);
                    local_train(
                        &task,
                        &before,
                        &state.clients[c],
                        cfg.lr,
                        cfg.batch,
                        cfg.local_steps,
                        &mut r,
                    )
                    .unwrap()
                })
                .collect();
            let plan = plan_for(&cfg, round);
            let shard_means: Vec<f64> = (0..task.param_dim())
                .map(|k| {
                    plan.shards()
                        .iter()
                        .map(|s| s.iter().map(|&c| honest[c][k]).sum::<f64>() / s.len() as f64)
                        .sum::<f64>()
                        / p as f64
                })
                .collect();
            run_round(&mut state, &cfg, &task).unwrap();
            for (k, want) in shard_means.iter().enumerate() {
                let got = state.model[k] - before[k];
                assert!(
                    (got - want).abs() <= cfg.fixed_point.resolution(),
                    "p={p} round {round} coord {k}: {got} vs {want}"
                );
            }
        }
    }
}

#[test]
fn one_client_per_shard_reproduces_quantized_updates() {
    let params = FixedPointParams::default();
    let n = 12;
    let mut r = SeededRng::for_purpose(5, Purpose::Check, &[0]);
    let updates: Vec<RealVector> = (0..n)
        .map(|i| {
            RealVector::new((0..5).map(|k| ((i * 7 + k) as f64).sin() * 3.0).collect()).unwrap()
        })
        .collect();
    let plan = partition_shards(n, n, &mut r).unwrap();
    let table = generate_masks(&plan, 5, &mut r).unwrap();
    assert!(table.is_empty());
    let masked = (0..n)
        .map(|c| {
            mask_encoded(&encode_fixed(&updates[c], &params).vector, c, &plan, &table).unwrap()
        })
        .collect();
    let means = ServerTranscript::new(masked, plan.clone(), 1)
        .unwrap()
        .shard_means(&params)
        .unwrap();
    for (s, mean) in plan.shards().iter().zip(&means) {
        let want: Vec<f64> = updates[s[0]].iter().map(|&x| params.quantize(x)).collect();
        assert_eq!(mean.as_slice(), want.as_slice());
    }
}

#[test]
fn malicious_displacement_dilutes_as_one_over_shard_size() {
    let params = FixedPointParams::default();
    let d = 4;
    let attack = [8.0, -4.0, 2.0, 1.0];
    for h in [1usize, 2, 4, 8, 16] {
        let n = 4 * h;
        let plan = ShardPlan::contiguous(n, 4).unwrap();
        let mut r = SeededRng::for_purpose(6, Purpose::Mask, &[h as u64]);
        let table = generate_masks(&plan, d, &mut r).unwrap();
        let shard_means = |with_attack: bool| {
            let masked = (0..n)
                .map(|c| {
                    let base: Vec<f64> = (0..d).map(|k| ((c + k) as f64).cos()).collect();
                    let v: Vec<f64> = if with_attack && c % h == 0 {
                        base.iter().zip(&attack).map(|(x, a)| x + a).collect()
                    } else {
                        base
                    };
                    let e = encode_fixed(&RealVector::new(v).unwrap(), &params).vector;
                    mask_encoded(&e, c, &plan, &table).unwrap()
                })
                .collect();
            ServerTranscript::new(masked, plan.clone(), 0)
                .unwrap()
                .shard_means(&params)
                .unwrap()
        };
        let clean = shard_means(false);
        let dirty = shard_means(true);
        for (a, b) in clean.iter().zip(&dirty) {
            for k in 0..d {
                let shift = (b[k] - a[k]) * h as f64;
                assert!(
                    (shift - attack[k]).abs() <= 2.0 * params.resolution() * h as f64,
                    "h={h}"
                );
            }
        }
    }
}

#[test]
fn malicious_shard_fraction_respects_the_bound() {
    let task = gaussian_task(6);
    let mut cfg = config(120, 30);
    cfg.rounds = 20;
    cfg.malicious = 2;
    cfg.attack = AttackSpec {
        kind: AttackKind::DirectedDeviation,
        scale: 10.0,
        ..AttackSpec::none()
    };
    cfg.estimator = Estimator::FilterL2(FilterConfig::default());
    assert!(cfg.robust_bound_ok());
    let bound = cfg.malicious as f64 / cfg.p as f64;
    let run = run_protocol(&cfg, &task).unwrap();
    for m in &run.metrics {
        assert!(m.malicious_shard_fraction > 0.0);
        assert!(m.malicious_shard_fraction <= bound);
        assert!(m.malicious_shard_fraction <= 1.0 / 12.0);
    }
}

#[test]
fn identical_seeds_identical_metrics_under_attack() {
    let task = logistic_task();
    let mut cfg = config(20, 20);
    cfg.malicious = 4;
    cfg.estimator = Estimator::FilterL2(FilterConfig::default());
    cfg.attack = AttackSpec {
        kind: AttackKind::ModelPoisoning,
        scale: 10.0,
        trigger: Some(Trigger::new(vec![0, 1, 2], 4.0, 0).unwrap()),
        ..AttackSpec::none()
    };
    let strip = |ms: Vec<fedfence_core::sim::RoundMetrics>| {
        ms.into_iter()
            .map(|mut m| {
                m.wall_ms = 0.0;
                m
            })
            .collect::<Vec<_>>()
    };
    let a = run_protocol(&cfg, &task).unwrap();
    let b = run_protocol(&cfg, &task).unwrap();
    assert_eq!(strip(a.metrics), strip(b.metrics));
    assert_eq!(a.model, b.model);

    cfg.seed += 1;
    let c = run_protocol(&cfg, &task).unwrap();
    assert_ne!(a.model, c.model);
}

#[test]
fn boosted_poisoning_shards_are_downweighted() {
    let task = logistic_task();
    let mut cfg = config(20, 20);
    cfg.rounds = 5;
    cfg.malicious = 5;
    cfg.estimator = Estimator::FilterL2(FilterConfig::default());
    cfg.attack = AttackSpec {
        kind: AttackKind::ModelPoisoning,
        scale: 10.0,
        trigger: Some(Trigger::new(vec![0, 1, 2], 4.0, 0).unwrap()),
        ..AttackSpec::none()
    };
    let mut state = SimState::init(&cfg, &task).unwrap();
    for round in 1..=cfg.rounds as u64 {
        let m = run_round(&mut state, &cfg, &task).unwrap();
        let weights = m.shard_weights.expect("filter reports weights");
        let plan = plan_for(&cfg, round);
        for (j, s) in plan.shards().iter().enumerate() {
            if s.iter().any(|&c| state.malicious.contains(c)) {
                assert!(
                    weights[j] < 0.1,
                    "round {round} shard {j}: weight {}",
                    weights[j]
                );
            }
        }
    }
}

#[test]
fn attacks_leave_benign_client_data_alone() {
    let task = logistic_task();
    let clean_cfg = config(20, 10);
    let mut cfg = clean_cfg.clone();
    cfg.malicious = 5;
    cfg.attack = AttackSpec {
        kind: AttackKind::Backdoor,
        trigger: Some(Trigger::new(vec![0, 1], 3.0, 2).unwrap()),
        ..AttackSpec::none()
    };
    let clean = SimState::init(&clean_cfg, &task).unwrap();
    let dirty = SimState::init(&cfg, &task).unwrap();
    for c in 0..cfg.n {
        assert_eq!(clean.clients[c], dirty.clients[c]);
        assert_eq!(dirty.poisoned[c].is_some(), dirty.malicious.contains(c));
    }
}
