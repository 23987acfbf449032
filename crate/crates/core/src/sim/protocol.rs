//! The round loop: reshard, broadcast, local training (malicious clients
//! substitute attack uploads), pairwise masking, per-shard aggregation,
//! robust estimation over shard means, and `w_t = w_{t−1} + g_t`.

use std::time::Instant;

use rand_distr::{Distribution, Normal};

use crate::attacks::{
    boosted_poison_update, clamp_norm, directed_deviation_update, jitter, model_replacement_update,
    poison_dataset, split_trigger, AttackKind, AttackSpec, MaliciousSet,
};
use crate::codec::{encode_fixed, FixedPointParams, RealVector};
use crate::error::{Error, Result};
use crate::estimators::{Estimator, UpdateSet};
use crate::rng::{Purpose, SeededRng};
use crate::secagg::{
    generate_masks, mask_encoded, partition_shards, verify_cancellation, ServerTranscript,
    ShardPlan,
};

use super::data::Dataset;
use super::hetero::{assign_heterogeneous, HeterogeneitySpec};
use super::task::TrainTask;
use super::train::local_train;

/// Spread of the per-client starting point when clients do not share the
/// broadcast model.
const UNSHARED_INIT_SD: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolConfig {
    pub n: usize,
    pub p: usize,
    pub rounds: usize,
    pub lr: f64,
    pub batch: usize,
    pub local_steps: usize,
    pub seed: u64,
    pub estimator: Estimator,
    pub attack: AttackSpec,
    pub malicious: usize,
    pub fixed_point: FixedPointParams,
    /// Clients start local training from the broadcast model. When false,
    /// each client starts from an independently perturbed copy.
    pub shared_init: bool,
    /// Draw a fresh shard partition every round; otherwise reuse round 1's.
    pub reshard_every_round: bool,
    pub hetero: HeterogeneitySpec,
    /// Local sample count for the Gaussian-mean task.
    pub samples_per_client: usize,
}

impl ProtocolConfig {
    /// Whether `12·εn < p` holds.
    pub fn robust_bound_ok(&self) -> bool {
        12 * self.malicious < self.p
    }

    /// Checks everything that can fail before round 1, including the
    /// estimator's row requirement over `p` shard means.
    pub fn validate(&self, task: &TrainTask) -> Result<()> {
        if self.p == 0 || self.p > self.n {
            return Err(Error::InvalidShardCount {
                n: self.n,
                p: self.p,
            });
        }
        if self.rounds == 0 {
            return Err(Error::InvalidConfig("rounds must be >= 1".into()));
        }
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(Error::InvalidConfig("lr must be >= 0".into()));
        }
        if self.batch == 0 {
            return Err(Error::InvalidConfig("batch must be positive".into()));
        }
        if self.malicious >= self.n {
            return Err(Error::InvalidConfig(
                "at least one client must be benign".into(),
            ));
        }
        self.attack.validate()?;
        if self.attack.kind != AttackKind::None && self.malicious == 0 {
            return Err(Error::InvalidConfig(
                "attack configured without malicious clients".into(),
            ));
        }
        if let Some(t) = &self.attack.trigger {
            if self.attack.kind != AttackKind::None {
                if !task.is_classification() {
                    return Err(Error::InvalidAttack(
                        "triggers need a classification task".into(),
                    ));
                }
                t.validate_for(task.feature_dim, task.classes)?;
            }
        }
        if let Some(target) = &self.attack.target_model {
            if target.dim() != task.param_dim() {
                return Err(Error::DimensionMismatch {
                    expected: task.param_dim(),
                    found: target.dim(),
                });
            }
        }
        self.fixed_point.validate_for(self.n.div_ceil(self.p))?;
        self.hetero.validate(task, self.n)?;
        self.estimator.check_shape(self.p, task.param_dim())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoundMetrics {
    pub round: usize,
    /// Test accuracy (classification tasks).
    pub accuracy: Option<f64>,
    /// Attack success rate (when a trigger is configured).
    pub asr: Option<f64>,
    /// `‖g_t − mean of benign plaintext updates‖`.
    pub est_error: f64,
    pub lambda_max: Option<f64>,
    /// Per-shard weights from FilterL2.
    pub shard_weights: Option<Vec<f64>>,
    /// Fraction of shards holding at least one malicious client.
    pub malicious_shard_fraction: f64,
    pub robust_bound_ok: bool,
    /// Coordinates clamped by the fixed-point encoder this round.
    pub saturated: usize,
    pub wall_ms: f64,
}

/// Everything carried between rounds.
#[derive(Clone, Debug)]
pub struct SimState {
    pub round: usize,
    pub model: RealVector,
    pub clients: Vec<Dataset>,
    /// Training data of malicious clients for backdoor-style attacks.
    pub poisoned: Vec<Option<Dataset>>,
    pub malicious: MaliciousSet,
    static_plan: Option<ShardPlan>,
}

impl SimState {
    pub fn init(cfg: &ProtocolConfig, task: &TrainTask) -> Result<Self> {
        cfg.validate(task)?;
        let mut data_rng = SeededRng::for_purpose(cfg.seed, Purpose::Data, &[1]);
        let clients = assign_heterogeneous(
            task,
            &cfg.hetero,
            cfg.n,
            cfg.samples_per_client,
            &mut data_rng,
        )?;
        let mut mal_rng = SeededRng::for_purpose(cfg.seed, Purpose::Malicious, &[]);
        let malicious = MaliciousSet::sample(cfg.malicious, cfg.n, &mut mal_rng)?;

        let mut poisoned = vec![None; cfg.n];
        let needs_data = cfg.attack.kind.is_backdoor()
            || (cfg.attack.kind == AttackKind::ModelReplacement
                && cfg.attack.target_model.is_none());
        if needs_data {
            let trigger = cfg.attack.trigger.as_ref().expect("validated");
            let pieces = if cfg.attack.kind == AttackKind::DistributedBackdoor {
                split_trigger(trigger, malicious.len().min(trigger.indices.len()))?
            } else {
                vec![trigger.clone()]
            };
            for (rank, c) in malicious.iter().enumerate() {
                let piece = &pieces[rank % pieces.len()];
                poisoned[c] = Some(poison_dataset(
                    &clients[c],
                    piece,
                    cfg.attack.poison_fraction,
                )?);
            }
        }
        Ok(Self {
            round: 0,
            model: task.init_model(),
            clients,
            poisoned,
            malicious,
            static_plan: None,
        })
    }
}

fn train_from(
    task: &TrainTask,
    cfg: &ProtocolConfig,
    global: &RealVector,
    data: &Dataset,
    round: u64,
    client: usize,
) -> Result<RealVector> {
    let mut rng = SeededRng::for_purpose(cfg.seed, Purpose::Train, &[round, client as u64]);
    if cfg.shared_init {
        return local_train(
            task,
            global,
            data,
            cfg.lr,
            cfg.batch,
            cfg.local_steps,
            &mut rng,
        );
    }
    let mut init_rng = SeededRng::for_purpose(cfg.seed, Purpose::Init, &[round, client as u64]);
    let noise = Normal::new(0.0, UNSHARED_INIT_SD).expect("constant");
    let start = RealVector::new(
        global
            .iter()
            .map(|w| w + noise.sample(&mut init_rng))
            .collect(),
    )?;
    let delta = local_train(
        task,
        &start,
        data,
        cfg.lr,
        cfg.batch,
        cfg.local_steps,
        &mut rng,
    )?;
    start.add(&delta)?.sub(global)
}

/// Uploads of the malicious clients, given every client's honest update.
fn attack_updates(
    state: &SimState,
    cfg: &ProtocolConfig,
    task: &TrainTask,
    honest: &[RealVector],
    round: u64,
) -> Result<Vec<(usize, RealVector)>> {
    let spec = &cfg.attack;
    let mal: Vec<usize> = state.malicious.iter().collect();
    let pooled = if spec.collusion && !mal.is_empty() {
        let rows: Vec<RealVector> = mal.iter().map(|&c| honest[c].clone()).collect();
        Some(RealVector::mean_of(&rows)?)
    } else {
        None
    };
    let global = &state.model;
    mal.iter()
        .map(|&c| {
            let own = &honest[c];
            let poisoned_delta = || -> Result<RealVector> {
                let data = state.poisoned[c]
                    .as_ref()
                    .expect("poisoned data prepared at init");
                train_from(task, cfg, global, data, round, c)
            };
            let clamp = |v: RealVector| match spec.norm_clamp {
                Some(k) => clamp_norm(&v, k * own.norm()),
                None => Ok(v),
            };
            let up = match spec.kind {
                AttackKind::None => own.clone(),
                AttackKind::DirectedDeviation => {
                    let view = pooled.as_ref().unwrap_or(own);
                    let mut rng =
                        SeededRng::for_purpose(cfg.seed, Purpose::Attack, &[round, c as u64]);
                    jitter(
                        &directed_deviation_update(view, spec.scale)?,
                        spec.jitter,
                        &mut rng,
                    )?
                }
                AttackKind::ModelReplacement => {
                    let target = match &spec.target_model {
                        Some(t) => t.clone(),
                        None => global.add(&poisoned_delta()?)?,
                    };
                    model_replacement_update(global, &target, (cfg.n / mal.len()).max(1))?
                }
                AttackKind::ModelPoisoning => {
                    let local = global.add(&poisoned_delta()?)?;
                    clamp(boosted_poison_update(&local, global, spec.scale)?)?
                }
                AttackKind::Backdoor => clamp(poisoned_delta()?)?,
                AttackKind::DistributedBackdoor => {
                    let local = global.add(&poisoned_delta()?)?;
                    clamp(boosted_poison_update(&local, global, spec.scale)?)?
                }
            };
            Ok((c, up))
        })
        .collect()
}

/// One round of the protocol. Advances `state` and returns its metrics.
pub fn run_round(
    state: &mut SimState,
    cfg: &ProtocolConfig,
    task: &TrainTask,
) -> Result<RoundMetrics> {
    let start = Instant::now();
    state.round += 1;
    let round = state.round as u64;
    let d = task.param_dim();

    let plan = match (&state.static_plan, cfg.reshard_every_round) {
        (Some(plan), false) => plan.clone(),
        _ => {
            let mut rng = SeededRng::for_purpose(cfg.seed, Purpose::Partition, &[round]);
            let plan = partition_shards(cfg.n, cfg.p, &mut rng)?;
            state.static_plan = Some(plan.clone());
            plan
        }
    };

    let honest: Vec<RealVector> = (0..cfg.n)
        .map(|c| train_from(task, cfg, &state.model, &state.clients[c], round, c))
        .collect::<Result<_>>()?;
    let mut uploads = honest.clone();
    for (c, up) in attack_updates(state, cfg, task, &honest, round)? {
        uploads[c] = up;
    }

    let benign: Vec<RealVector> = (0..cfg.n)
        .filter(|&c| !state.malicious.contains(c))
        .map(|c| honest[c].clone())
        .collect();
    let benign_mean = RealVector::mean_of(&benign)?;

    let mut saturated = 0;
    let encodings: Vec<_> = uploads
        .iter()
        .map(|u| {
            let e = encode_fixed(u, &cfg.fixed_point);
            saturated += e.saturated;
            e.vector
        })
        .collect();
    let mut mask_rng = SeededRng::for_purpose(cfg.seed, Purpose::Mask, &[round]);
    let table = generate_masks(&plan, d, &mut mask_rng)?;
    let masked = encodings
        .iter()
        .enumerate()
        .map(|(c, e)| mask_encoded(e, c, &plan, &table))
        .collect::<Result<Vec<_>>>()?;
    verify_cancellation(&masked, &encodings, &plan)?;
    let transcript = ServerTranscript::new(masked, plan.clone(), round)?;
    let shard_means = transcript.shard_means(&cfg.fixed_point)?;

    let agg = cfg.estimator.aggregate(&UpdateSet::new(&shard_means)?)?;
    state.model = state.model.add(&agg.mean)?;

    let bad_shards = plan
        .shards()
        .iter()
        .filter(|s| s.iter().any(|&c| state.malicious.contains(c)))
        .count();
    let trigger = cfg
        .attack
        .trigger
        .as_ref()
        .filter(|_| cfg.attack.kind != AttackKind::None);
    let (accuracy, asr) = if task.is_classification() {
        let acc = task.evaluate(&state.model, &task.test)?;
        let asr = trigger
            .map(|t| task.attack_success_rate(&state.model, &task.test, t))
            .transpose()?;
        (Some(acc), asr)
    } else {
        (None, None)
    };
    Ok(RoundMetrics {
        round: state.round,
        accuracy,
        asr,
        est_error: agg.mean.distance(&benign_mean)?,
        lambda_max: agg.lambda_max,
        shard_weights: agg.weights,
        malicious_shard_fraction: bad_shards as f64 / cfg.p as f64,
        robust_bound_ok: cfg.robust_bound_ok(),
        saturated,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

#[derive(Clone, Debug)]
pub struct ProtocolRun {
    pub metrics: Vec<RoundMetrics>,
    pub model: RealVector,
    pub malicious: MaliciousSet,
}

/// Runs `cfg.rounds` rounds from `w_0 = 0`.
pub fn run_protocol(cfg: &ProtocolConfig, task: &TrainTask) -> Result<ProtocolRun> {
    let mut state = SimState::init(cfg, task)?;
    let metrics = (0..cfg.rounds)
        .map(|_| run_round(&mut state, cfg, task))
        .collect::<Result<Vec<_>>>()?;
    Ok(ProtocolRun {
        metrics,
        model: state.model,
        malicious: state.malicious,
    })
}
