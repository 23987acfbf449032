use std::fmt::Write;

use fedfence_core::sim::{clt_check, clt_trials, CltReport, CltSpec};
use fedfence_core::thresholds::{
    CLT_MAX_ABS_EXCESS_KURTOSIS, CLT_MAX_ABS_SKEWNESS, CLT_MIN_TRIALS, CLT_VARIANCE_RATIO,
};
use fedfence_core::{Purpose, SeededRng};

use crate::{num, CliError};

pub const CSV_HEADER: &str =
    "shard_size,trials,mean,variance,predicted_variance,variance_ratio,skewness,excess_kurtosis";

#[derive(Clone, Debug)]
pub struct CltTable {
    pub spec: CltSpec,
    pub rows: Vec<CltReport>,
}

impl CltTable {
    /// Threshold breaches of the largest shard size, empty when it passes.
    pub fn breaches(&self) -> Vec<String> {
        let Some(r) = self.rows.iter().max_by_key(|r| r.shard_size) else {
            return vec!["no shard sizes".into()];
        };
        let mut out = Vec::new();
        let (lo, hi) = CLT_VARIANCE_RATIO;
        if !(lo..=hi).contains(&r.variance_ratio) {
            out.push(format!(
                "|H|={}: variance ratio {:.4} outside [{lo}, {hi}]",
                r.shard_size, r.variance_ratio
            ));
        }
        if r.moments.skewness.abs() >= CLT_MAX_ABS_SKEWNESS {
            out.push(format!(
                "|H|={}: |skewness| {:.4} >= {CLT_MAX_ABS_SKEWNESS}",
                r.shard_size,
                r.moments.skewness.abs()
            ));
        }
        if r.moments.excess_kurtosis.abs() >= CLT_MAX_ABS_EXCESS_KURTOSIS {
            out.push(format!(
                "|H|={}: |excess kurtosis| {:.4} >= {CLT_MAX_ABS_EXCESS_KURTOSIS}",
                r.shard_size,
                r.moments.excess_kurtosis.abs()
            ));
        }
        out
    }

    pub fn csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            let m = &r.moments;
            writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                r.shard_size,
                m.count,
                num(m.mean),
                num(m.variance),
                num(r.predicted_variance),
                num(r.variance_ratio),
                num(m.skewness),
                num(m.excess_kurtosis)
            )
            .unwrap();
        }
        s
    }

    /// Human-readable notes: the law-of-total-variance gap at `|H| = 1`.
    pub fn notes(&self) -> String {
        let mut s = String::new();
        let sb = self.spec.sigma_bar_sq();
        writeln!(
            s,
            "sigma_bar^2={sb:.6} between-component variance={:.6}",
            self.spec.between_variance()
        )
        .unwrap();
        if let Some(r) = self.rows.iter().find(|r| r.shard_size == 1) {
            writeln!(
                s,
                "|H|=1: empirical variance exceeds sigma_bar^2 by {:.6} (expected {:.6})",
                r.moments.variance - sb,
                self.spec.between_variance()
            )
            .unwrap();
        }
        s
    }
}

pub fn run_clt(
    spec: &CltSpec,
    sizes: &[usize],
    trials: usize,
    seed: u64,
) -> Result<CltTable, CliError> {
    if trials < CLT_MIN_TRIALS {
        return Err(CliError::Schema(format!(
            "trials: {trials} is below the minimum of {CLT_MIN_TRIALS}"
        )));
    }
    if sizes.is_empty() {
        return Err(CliError::Schema("sizes: empty list".into()));
    }
    spec.validate()
        .map_err(|e| CliError::Schema(e.to_string()))?;
    let rows = sizes
        .iter()
        .map(|&h| {
            let mut rng = SeededRng::for_purpose(seed, Purpose::Clt, &[h as u64]);
            let xs = clt_trials(spec, h, trials, &mut rng)
                .map_err(|e| CliError::Schema(format!("sizes: {e}")))?;
            Ok(clt_check(&xs, h, spec)?)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(CltTable {
        spec: spec.clone(),
        rows,
    })
}
