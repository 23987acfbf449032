use std::fmt::Write;

use crate::config::{ExperimentConfig, SweepParam};
use crate::{cell, num, CliError};

use super::simulate::simulate;

pub const CSV_HEADER: &str = "param,value,seed,regime,n,p,malicious,robust_bound_ok,final_accuracy,final_asr,mean_est_error,final_est_error,wall_ms";

fn param_name(p: SweepParam) -> &'static str {
    match p {
        SweepParam::P => "p",
        SweepParam::Epsilon => "epsilon",
        SweepParam::Sections => "sections",
        SweepParam::Eta => "eta",
    }
}

fn as_count(param: SweepParam, v: f64) -> Result<usize, CliError> {
    if v.is_finite() && v >= 1.0 && v.fract() == 0.0 {
        Ok(v as usize)
    } else {
        Err(CliError::Schema(format!(
            "sweep.values: {} needs positive integers, got {v}",
            param_name(param)
        )))
    }
}

/// `base` with the swept parameter set to `v`. Epsilon is converted to a
/// malicious-client count `round(v·n)`.
pub fn apply(
    base: &ExperimentConfig,
    param: SweepParam,
    v: f64,
) -> Result<ExperimentConfig, CliError> {
    let mut c = base.clone();
    match param {
        SweepParam::P => c.protocol.p = as_count(param, v)?,
        SweepParam::Sections => c.estimator.sections = as_count(param, v)?,
        SweepParam::Eta => c.estimator.eta = as_count(param, v)?,
        SweepParam::Epsilon => {
            if !(0.0..1.0).contains(&v) {
                return Err(CliError::Schema(format!(
                    "sweep.values: epsilon {v} must lie in [0, 1)"
                )));
            }
            c.attack.malicious = (v * c.protocol.n as f64).round() as usize;
        }
    }
    c.sweep = None;
    Ok(c)
}

/// `zero-privacy` when every client is its own shard, `single-shard` when
/// all clients share one shard.
pub fn regime(n: usize, p: usize) -> &'static str {
    if p == n {
        "zero-privacy"
    } else if p == 1 {
        "single-shard"
    } else {
        "sharded"
    }
}

/// Runs the grid `values × seeds` and writes one row per point, values in
/// the given order and seeds ascending within each value.
pub fn sweep(
    base: &ExperimentConfig,
    param: SweepParam,
    values: &[f64],
    seeds: &[u64],
    wall_clock: bool,
) -> Result<String, CliError> {
    if values.is_empty() {
        return Err(CliError::Schema("sweep.values: empty value list".into()));
    }
    if seeds.is_empty() {
        return Err(CliError::Schema("run.seeds: empty seed list".into()));
    }
    let points = values
        .iter()
        .map(|&v| apply(base, param, v).map(|c| (v, c)))
        .collect::<Result<Vec<_>, _>>()?;
    let mut seeds = seeds.to_vec();
    seeds.sort_unstable();
    seeds.dedup();

    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for (v, cfg) in &points {
        for &seed in &seeds {
            let res = simulate(cfg, seed, wall_clock)?;
            let ms = &res.run.metrics;
            let last = ms.last().expect("rounds >= 1");
            let mean_err = ms.iter().map(|m| m.est_error).sum::<f64>() / ms.len() as f64;
            let wall: f64 = if wall_clock {
                ms.iter().map(|m| m.wall_ms).sum()
            } else {
                0.0
            };
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                param_name(param),
                v,
                seed,
                regime(cfg.protocol.n, cfg.protocol.p),
                cfg.protocol.n,
                cfg.protocol.p,
                cfg.attack.malicious,
                last.robust_bound_ok,
                cell(last.accuracy),
                cell(last.asr),
                num(mean_err),
                num(last.est_error),
                num(wall)
            )
            .expect("string write");
        }
    }
    Ok(out)
}
