//! Byzantine client behaviours.
//!
//! Malicious clients follow the masking protocol and only change the values
//! they upload (and, for backdoors, the data they train on).

use std::collections::BTreeSet;

use rand_distr::{Distribution, Normal};

use crate::codec::RealVector;
use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::sim::data::Dataset;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum AttackKind {
    #[default]
    None,
    ModelReplacement,
    DirectedDeviation,
    ModelPoisoning,
    Backdoor,
    DistributedBackdoor,
}

impl AttackKind {
    pub fn is_backdoor(&self) -> bool {
        matches!(
            self,
            AttackKind::Backdoor | AttackKind::DistributedBackdoor | AttackKind::ModelPoisoning
        )
    }
}

/// Feature pattern stamped onto inputs plus the label the attacker wants.
#[derive(Clone, Debug, PartialEq)]
pub struct Trigger {
    pub indices: Vec<usize>,
    pub value: f64,
    pub target_label: usize,
}

impl Trigger {
    pub fn new(indices: Vec<usize>, value: f64, target_label: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidAttack(
                "trigger needs at least one feature index".into(),
            ));
        }
        if !value.is_finite() {
            return Err(Error::InvalidAttack("trigger value must be finite".into()));
        }
        Ok(Self {
            indices,
            value,
            target_label,
        })
    }

    pub fn stamp(&self, x: &mut [f64]) {
        for &i in &self.indices {
            x[i] = self.value;
        }
    }

    pub fn validate_for(&self, feature_dim: usize, classes: usize) -> Result<()> {
        if let Some(&bad) = self.indices.iter().find(|&&i| i >= feature_dim) {
            return Err(Error::InvalidAttack(format!(
                "trigger index {bad} out of range for {feature_dim} features"
            )));
        }
        if self.target_label >= classes {
            return Err(Error::InvalidAttack(format!(
                "target label {} out of range for {classes} classes",
                self.target_label
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttackSpec {
    pub kind: AttackKind,
    /// Deviation magnitude `z` (directed deviation) or boost (poisoning and
    /// distributed backdoor).
    pub scale: f64,
    pub target_model: Option<RealVector>,
    pub trigger: Option<Trigger>,
    /// Malicious clients pool their honest updates before attacking.
    pub collusion: bool,
    /// Standard deviation of the per-client jitter added to directed
    /// deviation uploads.
    pub jitter: f64,
    /// Fraction of local samples copied with the trigger stamped on.
    pub poison_fraction: f64,
    /// Poisoned uploads are clamped to this multiple of the client's honest
    /// update norm.
    pub norm_clamp: Option<f64>,
}

impl Default for AttackSpec {
    fn default() -> Self {
        Self {
            kind: AttackKind::None,
            scale: 1.0,
            target_model: None,
            trigger: None,
            collusion: true,
            jitter: 0.0,
            poison_fraction: 0.5,
            norm_clamp: None,
        }
    }
}

impl AttackSpec {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(Error::InvalidAttack("scale must be positive".into()));
        }
        if !(self.jitter.is_finite() && self.jitter >= 0.0) {
            return Err(Error::InvalidAttack("jitter must be non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.poison_fraction) {
            return Err(Error::InvalidAttack(
                "poison_fraction must lie in [0, 1]".into(),
            ));
        }
        if self.norm_clamp.is_some_and(|c| !(c.is_finite() && c > 0.0)) {
            return Err(Error::InvalidAttack("norm_clamp must be positive".into()));
        }
        match self.kind {
            AttackKind::ModelReplacement
                if self.target_model.is_none() && self.trigger.is_none() =>
            {
                Err(Error::InvalidAttack(
                    "model replacement needs a target model or a trigger to train one".into(),
                ))
            }
            AttackKind::ModelPoisoning | AttackKind::DistributedBackdoor if self.scale < 1.0 => {
                Err(Error::InvalidAttack("boost must be >= 1".into()))
            }
            k if k.is_backdoor() && self.trigger.is_none() => {
                Err(Error::InvalidAttack(format!("{k:?} needs a trigger")))
            }
            _ => Ok(()),
        }
    }
}

/// The Byzantine clients, fixed for a whole run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MaliciousSet {
    indices: BTreeSet<usize>,
    n: usize,
}

impl MaliciousSet {
    pub fn new(indices: impl IntoIterator<Item = usize>, n: usize) -> Result<Self> {
        let indices: BTreeSet<usize> = indices.into_iter().collect();
        if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
            return Err(Error::UnknownClient(bad));
        }
        Ok(Self { indices, n })
    }

    /// `count` distinct clients drawn uniformly.
    pub fn sample(count: usize, n: usize, rng: &mut SeededRng) -> Result<Self> {
        if count > n {
            return Err(Error::InvalidAttack(format!(
                "{count} malicious clients out of {n}"
            )));
        }
        Self::new(rand::seq::index::sample(rng, n, count), n)
    }

    pub fn contains(&self, client: usize) -> bool {
        self.indices.contains(&client)
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.indices.iter().copied()
    }

    pub fn epsilon(&self) -> f64 {
        self.indices.len() as f64 / self.n as f64
    }

    /// Rank of `client` within the set.
    pub fn position(&self, client: usize) -> Option<usize> {
        self.indices.iter().position(|&c| c == client)
    }
}

/// `n_effective · (target − global)`: under plain averaging over
/// `n_effective` uploads with silent peers the next model is `target`.
pub fn model_replacement_update(
    global: &RealVector,
    target: &RealVector,
    n_effective: usize,
) -> Result<RealVector> {
    if n_effective == 0 {
        return Err(Error::InvalidAttack("n_effective must be >= 1".into()));
    }
    target.sub(global)?.scale(n_effective as f64)
}

/// `−z · sign(benign_estimate)` with `sign(0) = 0`.
pub fn directed_deviation_update(benign_estimate: &RealVector, z: f64) -> Result<RealVector> {
    if !(z.is_finite() && z > 0.0) {
        return Err(Error::InvalidAttack("z must be positive".into()));
    }
    RealVector::new(
        benign_estimate
            .iter()
            .map(|&v| if v == 0.0 { 0.0 } else { -z * v.signum() })
            .collect(),
    )
}

/// Adds `N(0, sd²)` noise per coordinate.
pub fn jitter(update: &RealVector, sd: f64, rng: &mut SeededRng) -> Result<RealVector> {
    if sd == 0.0 {
        return Ok(update.clone());
    }
    let n = Normal::new(0.0, sd).map_err(|e| Error::InvalidAttack(e.to_string()))?;
    RealVector::new(update.iter().map(|v| v + n.sample(rng)).collect())
}

/// Appends trigger-stamped, relabelled copies of the first
/// `floor(fraction · len)` samples. The clean samples are kept.
pub fn poison_dataset(data: &Dataset, trigger: &Trigger, fraction: f64) -> Result<Dataset> {
    if data.labels().is_none() {
        return Err(Error::InvalidAttack(
            "backdoors need a labelled dataset".into(),
        ));
    }
    if trigger.indices.is_empty() {
        return Err(Error::InvalidAttack("empty trigger".into()));
    }
    if let Some(&bad) = trigger.indices.iter().find(|&&i| i >= data.dim()) {
        return Err(Error::InvalidAttack(format!(
            "trigger index {bad} out of range"
        )));
    }
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidAttack("fraction must lie in [0, 1]".into()));
    }
    let k = (fraction * data.len() as f64 + 1e-9).floor() as usize;
    let mut out = data.clone();
    let mut x = vec![0.0; data.dim()];
    for i in 0..k {
        x.copy_from_slice(data.x(i));
        trigger.stamp(&mut x);
        out.push(&x, Some(trigger.target_label));
    }
    Ok(out)
}

/// Partitions the trigger's indices into `parts` disjoint contiguous pieces
/// of near-equal size, one per colluding client.
pub fn split_trigger(trigger: &Trigger, parts: usize) -> Result<Vec<Trigger>> {
    let len = trigger.indices.len();
    if parts == 0 || parts > len {
        return Err(Error::InvalidAttack(format!(
            "cannot split {len} trigger indices into {parts} parts"
        )));
    }
    let (base, extra) = (len / parts, len % parts);
    let mut lo = 0;
    Ok((0..parts)
        .map(|s| {
            let hi = lo + base + usize::from(s < extra);
            let t = Trigger {
                indices: trigger.indices[lo..hi].to_vec(),
                ..trigger.clone()
            };
            lo = hi;
            t
        })
        .collect())
}

/// `boost · (local_trained − global)`.
pub fn boosted_poison_update(
    local_trained: &RealVector,
    global: &RealVector,
    boost: f64,
) -> Result<RealVector> {
    if !(boost.is_finite() && boost >= 1.0) {
        return Err(Error::InvalidAttack("boost must be >= 1".into()));
    }
    local_trained.sub(global)?.scale(boost)
}

/// Rescales `v` onto the ball of radius `max_norm` if it lies outside.
pub fn clamp_norm(v: &RealVector, max_norm: f64) -> Result<RealVector> {
    let n = v.norm();
    if n <= max_norm || n == 0.0 {
        return Ok(v.clone());
    }
    v.scale(max_norm / n)
}
