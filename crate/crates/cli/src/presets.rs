//! Shipped experiment presets for the two evaluation settings: i.i.d. with
//! 20 clients (5 malicious when attacked) and non-i.i.d. with 100 clients
//! holding 3 labels each in 25 shards (10 malicious when attacked).

use crate::config::ExperimentConfig;
use crate::CliError;

pub const PRESETS: &[(&str, &str)] = &[
    ("iid-noattack", include_str!("../presets/iid-noattack.toml")),
    ("iid-mra", include_str!("../presets/iid-mra.toml")),
    ("iid-mpa", include_str!("../presets/iid-mpa.toml")),
    ("iid-dd", include_str!("../presets/iid-dd.toml")),
    ("iid-dba", include_str!("../presets/iid-dba.toml")),
    (
        "noniid-noattack",
        include_str!("../presets/noniid-noattack.toml"),
    ),
    ("noniid-mra", include_str!("../presets/noniid-mra.toml")),
    ("noniid-mpa", include_str!("../presets/noniid-mpa.toml")),
    ("noniid-dd", include_str!("../presets/noniid-dd.toml")),
];

pub fn names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}

pub fn preset(name: &str) -> Result<ExperimentConfig, CliError> {
    let (_, text) = PRESETS.iter().find(|(n, _)| *n == name).ok_or_else(|| {
        CliError::Schema(format!(
            "unknown preset {name:?}; available: {}",
            names().collect::<Vec<_>>().join(", ")
        ))
    })?;
    ExperimentConfig::parse(text)
}
