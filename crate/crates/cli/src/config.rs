//! Experiment configuration files.
//!
//! A config is a TOML document with the sections `[run]`, `[protocol]`,
//! `[fixed_point]`, `[task]`, `[hetero]`, `[estimator]`, `[attack]` and
//! `[sweep]`. `[protocol]`, `[task]` and `[estimator]` are required; the
//! others fall back to defaults. Unknown keys are rejected.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use fedfence_core::attacks::{AttackKind, AttackSpec, Trigger};
use fedfence_core::estimators::{
    BulyanInner, Estimator, FilterConfig, KrumConfig, TrimConfig, TrimReading,
};
use fedfence_core::sim::{HeterogeneitySpec, Loss, ProtocolConfig, TaskKind, TaskSpec};
use fedfence_core::{FixedPointParams, RealVector};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub run: RunSection,
    pub protocol: ProtocolSection,
    #[serde(default)]
    pub fixed_point: FixedPointSection,
    pub task: TaskSection,
    #[serde(default)]
    pub hetero: HeteroSection,
    pub estimator: EstimatorSection,
    #[serde(default)]
    pub attack: AttackSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Seeds used by `sweep`; defaults to the single run seed.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSection {
    pub n: usize,
    pub p: usize,
    pub rounds: usize,
    pub lr: f64,
    pub batch: usize,
    pub local_steps: usize,
    #[serde(default = "yes")]
    pub shared_init: bool,
    #[serde(default = "yes")]
    pub reshard_every_round: bool,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedPointSection {
    pub scale_bits: u32,
    pub clamp_abs: f64,
}

impl Default for FixedPointSection {
    fn default() -> Self {
        let p = FixedPointParams::default();
        Self {
            scale_bits: p.scale_bits(),
            clamp_abs: p.clamp_abs(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKindName {
    GaussianMean,
    SyntheticLogistic,
    Idx,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossName {
    Squared,
    CrossEntropy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSection {
    pub kind: TaskKindName,
    pub feature_dim: usize,
    #[serde(default)]
    pub classes: usize,
    pub loss: LossName,
    #[serde(default)]
    pub train_samples: usize,
    #[serde(default)]
    pub test_samples: usize,
    #[serde(default = "one")]
    pub separation: f64,
    #[serde(default = "one")]
    pub noise: f64,
    /// Gaussian-mean task only.
    #[serde(default)]
    pub samples_per_client: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_images: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_labels: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_images: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_labels: Option<PathBuf>,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeteroMode {
    #[default]
    Iid,
    Labels,
    Components,
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeteroSection {
    #[serde(default)]
    pub mode: HeteroMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels_per_client: Option<usize>,
    /// Component `i` has mean `component_means[i] · 1`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub component_means: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub component_stddevs: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorName {
    Average,
    Median,
    TrimmedMean,
    Krum,
    BulyanKrum,
    BulyanTrimmedMean,
    FilterL2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrimReadingName {
    #[default]
    Total,
    PerTail,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSection {
    pub kind: EstimatorName,
    /// Assumed Byzantine rows for Krum and Bulyan.
    #[serde(default)]
    pub f: usize,
    #[serde(default = "default_trim")]
    pub trim_fraction: f64,
    #[serde(default)]
    pub trim_reading: TrimReadingName,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_eta")]
    pub eta: usize,
    #[serde(default = "default_sections")]
    pub sections: usize,
    #[serde(default = "default_factor")]
    pub spectral_factor: f64,
    #[serde(default = "default_power_iters")]
    pub power_iters: usize,
    #[serde(default = "default_power_tol")]
    pub power_tol: f64,
}

fn default_trim() -> f64 {
    0.3
}
fn default_sigma() -> f64 {
    FilterConfig::default().sigma
}
fn default_eta() -> usize {
    FilterConfig::default().eta
}
fn default_sections() -> usize {
    1
}
fn default_factor() -> f64 {
    FilterConfig::default().spectral_factor
}
fn default_power_iters() -> usize {
    FilterConfig::default().power_iters
}
fn default_power_tol() -> f64 {
    FilterConfig::default().power_tol
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackName {
    #[default]
    None,
    ModelReplacement,
    DirectedDeviation,
    ModelPoisoning,
    Backdoor,
    DistributedBackdoor,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackSection {
    #[serde(default)]
    pub kind: AttackName,
    #[serde(default)]
    pub malicious: usize,
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default = "yes")]
    pub collusion: bool,
    #[serde(default)]
    pub jitter: f64,
    #[serde(default = "half")]
    pub poison_fraction: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norm_clamp: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trigger_indices: Vec<usize>,
    #[serde(default = "one")]
    pub trigger_value: f64,
    #[serde(default)]
    pub target_label: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_model: Option<Vec<f64>>,
}

fn half() -> f64 {
    0.5
}

impl Default for AttackSection {
    fn default() -> Self {
        Self {
            kind: AttackName::None,
            malicious: 0,
            scale: 1.0,
            collusion: true,
            jitter: 0.0,
            poison_fraction: 0.5,
            norm_clamp: None,
            trigger_indices: Vec::new(),
            trigger_value: 1.0,
            target_label: 0,
            target_model: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SweepParam {
    P,
    Epsilon,
    Sections,
    Eta,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

fn schema(key: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Schema(format!("{key}: {msg}"))
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Schema(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn task_spec(&self) -> Result<TaskSpec, CliError> {
        let t = &self.task;
        let path = |p: &Option<PathBuf>, key: &str| {
            p.clone()
                .ok_or_else(|| schema(key, "required for the idx task"))
        };
        let kind = match t.kind {
            TaskKindName::GaussianMean => TaskKind::GaussianMean,
            TaskKindName::SyntheticLogistic => TaskKind::SyntheticLogistic {
                separation: t.separation,
                noise: t.noise,
            },
            TaskKindName::Idx => TaskKind::Idx {
                train_images: path(&t.train_images, "task.train_images")?,
                train_labels: path(&t.train_labels, "task.train_labels")?,
                test_images: path(&t.test_images, "task.test_images")?,
                test_labels: path(&t.test_labels, "task.test_labels")?,
            },
        };
        let spec = TaskSpec {
            kind,
            feature_dim: t.feature_dim,
            classes: t.classes,
            loss: match t.loss {
                LossName::Squared => Loss::Squared,
                LossName::CrossEntropy => Loss::CrossEntropy,
            },
            train_samples: t.train_samples,
            test_samples: t.test_samples,
        };
        spec.validate().map_err(|e| schema("task", e))?;
        Ok(spec)
    }

    pub fn estimator(&self) -> Result<Estimator, CliError> {
        let e = &self.estimator;
        Ok(match e.kind {
            EstimatorName::Average => Estimator::Average,
            EstimatorName::Median => Estimator::Median,
            EstimatorName::TrimmedMean => {
                let reading = match e.trim_reading {
                    TrimReadingName::Total => TrimReading::Total,
                    TrimReadingName::PerTail => TrimReading::PerTail,
                };
                Estimator::TrimmedMean(
                    TrimConfig::from_fraction(e.trim_fraction, reading).map_err(|err| {
                        CliError::Precondition(format!("estimator.trim_fraction: {err}"))
                    })?,
                )
            }
            EstimatorName::Krum => Estimator::Krum(KrumConfig { f: e.f }),
            EstimatorName::BulyanKrum => Estimator::Bulyan {
                cfg: KrumConfig { f: e.f },
                inner: BulyanInner::Krum,
            },
            EstimatorName::BulyanTrimmedMean => Estimator::Bulyan {
                cfg: KrumConfig { f: e.f },
                inner: BulyanInner::TrimmedMean,
            },
            EstimatorName::FilterL2 => Estimator::FilterL2(FilterConfig {
                sigma: e.sigma,
                eta: e.eta,
                spectral_factor: e.spectral_factor,
                power_iters: e.power_iters,
                power_tol: e.power_tol,
                sections: e.sections,
            }),
        })
    }

    pub fn attack(&self) -> Result<AttackSpec, CliError> {
        let a = &self.attack;
        let trigger = if a.trigger_indices.is_empty() {
            None
        } else {
            Some(
                Trigger::new(a.trigger_indices.clone(), a.trigger_value, a.target_label)
                    .map_err(|e| schema("attack.trigger_indices", e))?,
            )
        };
        let target_model = a
            .target_model
            .clone()
            .map(RealVector::new)
            .transpose()
            .map_err(|e| schema("attack.target_model", e))?;
        let spec = AttackSpec {
            kind: match a.kind {
                AttackName::None => AttackKind::None,
                AttackName::ModelReplacement => AttackKind::ModelReplacement,
                AttackName::DirectedDeviation => AttackKind::DirectedDeviation,
                AttackName::ModelPoisoning => AttackKind::ModelPoisoning,
                AttackName::Backdoor => AttackKind::Backdoor,
                AttackName::DistributedBackdoor => AttackKind::DistributedBackdoor,
            },
            scale: a.scale,
            target_model,
            trigger,
            collusion: a.collusion,
            jitter: a.jitter,
            poison_fraction: a.poison_fraction,
            norm_clamp: a.norm_clamp,
        };
        spec.validate().map_err(|e| schema("attack", e))?;
        Ok(spec)
    }

    pub fn hetero(&self) -> Result<HeterogeneitySpec, CliError> {
        let h = &self.hetero;
        Ok(match h.mode {
            HeteroMode::Iid => HeterogeneitySpec::Iid,
            HeteroMode::Labels => HeterogeneitySpec::Labels {
                per_client: h
                    .labels_per_client
                    .ok_or_else(|| schema("hetero.labels_per_client", "required in labels mode"))?,
            },
            HeteroMode::Components => {
                if h.component_means.is_empty()
                    || h.component_means.len() != h.component_stddevs.len()
                {
                    return Err(schema(
                        "hetero.component_means",
                        "need one mean and one stddev per component",
                    ));
                }
                HeterogeneitySpec::Components {
                    means: h
                        .component_means
                        .iter()
                        .map(|&m| RealVector::filled(self.task.feature_dim.max(1), m))
                        .collect(),
                    stddevs: h.component_stddevs.clone(),
                    phi: None,
                }
            }
        })
    }

    pub fn fixed_point(&self) -> Result<FixedPointParams, CliError> {
        FixedPointParams::new(self.fixed_point.scale_bits, self.fixed_point.clamp_abs)
            .map_err(|e| schema("fixed_point", e))
    }

    /// Resolves the full protocol configuration for `seed`. Shape checks that
    /// need the built task happen in [`crate::commands::simulate::prepare`].
    pub fn protocol(&self, seed: u64) -> Result<ProtocolConfig, CliError> {
        let p = &self.protocol;
        let need = |ok: bool, key: &str, msg: &str| if ok { Ok(()) } else { Err(schema(key, msg)) };
        need(p.n >= 1, "protocol.n", "must be >= 1")?;
        need(p.p >= 1 && p.p <= p.n, "protocol.p", "must lie in 1..=n")?;
        need(p.rounds >= 1, "protocol.rounds", "must be >= 1")?;
        need(
            p.lr.is_finite() && p.lr >= 0.0,
            "protocol.lr",
            "must be >= 0",
        )?;
        need(p.batch >= 1, "protocol.batch", "must be >= 1")?;
        need(
            self.attack.malicious < p.n,
            "attack.malicious",
            "must be < n",
        )?;
        Ok(ProtocolConfig {
            n: p.n,
            p: p.p,
            rounds: p.rounds,
            lr: p.lr,
            batch: p.batch,
            local_steps: p.local_steps,
            seed,
            estimator: self.estimator()?,
            attack: self.attack()?,
            malicious: self.attack.malicious,
            fixed_point: self.fixed_point()?,
            shared_init: p.shared_init,
            reshard_every_round: p.reshard_every_round,
            hetero: self.hetero()?,
            samples_per_client: self.task.samples_per_client,
        })
    }
}
