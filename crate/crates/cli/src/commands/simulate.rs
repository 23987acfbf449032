use std::fmt::Write;

use fedfence_core::sim::{run_protocol, ProtocolConfig, ProtocolRun, RoundMetrics, TrainTask};

use crate::config::ExperimentConfig;
use crate::{cell, num, CliError};

pub const CSV_HEADER: &str = "round,accuracy,asr,est_error,lambda_max,wall_ms,robust_bound_ok";

/// Resolves and validates everything a run needs before round 1.
pub fn prepare(cfg: &ExperimentConfig, seed: u64) -> Result<(ProtocolConfig, TrainTask), CliError> {
    let pc = cfg.protocol(seed)?;
    let task = cfg
        .task_spec()?
        .build(seed)
        .map_err(|e| CliError::Schema(format!("task: {e}")))?;
    pc.validate(&task).map_err(CliError::from_validation)?;
    Ok((pc, task))
}

/// One CSV line per round. `wall_ms` is written as 0 unless `wall_clock`
/// is set, so repeated runs produce byte-identical files.
pub fn metrics_csv(metrics: &[RoundMetrics], wall_clock: bool) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for m in metrics {
        let wall = if wall_clock { m.wall_ms } else { 0.0 };
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            m.round,
            cell(m.accuracy),
            cell(m.asr),
            num(m.est_error),
            cell(m.lambda_max),
            num(wall),
            m.robust_bound_ok
        )
        .expect("string write");
    }
    out
}

pub fn summary_line(m: &RoundMetrics) -> String {
    let fmt = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into());
    format!(
        "round {}: accuracy={} asr={} est_error={:.6} robust_bound_ok={}",
        m.round,
        fmt(m.accuracy),
        fmt(m.asr),
        m.est_error,
        m.robust_bound_ok
    )
}

pub struct SimulateOutput {
    pub csv: String,
    pub run: ProtocolRun,
}

pub fn simulate(
    cfg: &ExperimentConfig,
    seed: u64,
    wall_clock: bool,
) -> Result<SimulateOutput, CliError> {
    let (pc, task) = prepare(cfg, seed)?;
    let run = run_protocol(&pc, &task)?;
    Ok(SimulateOutput {
        csv: metrics_csv(&run.metrics, wall_clock),
        run,
    })
}
