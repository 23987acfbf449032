use std::fmt::Write;
use std::time::Instant;

use rand_distr::{Distribution, Normal};

use fedfence_core::estimators::{
    BulyanInner, Estimator, FilterConfig, KrumConfig, TrimConfig, TrimReading, UpdateSet,
};
use fedfence_core::{Purpose, SeededRng};

use crate::config::EstimatorName;
use crate::{num, CliError};

pub const CSV_HEADER: &str = "d,estimator,sections,m,epsilon,error,wall_ms";

/// Contaminated Gaussian instance: `m − round(ε·m)` benign rows from
/// `N(0, I/d)` (total variance 1 in every dimension) followed by
/// `round(ε·m)` identical rows at `shift · 1`. The true mean is 0.
pub fn contaminated_gaussian(m: usize, d: usize, epsilon: f64, shift: f64, seed: u64) -> UpdateSet {
    let bad = (epsilon * m as f64).round() as usize;
    let mut rng = SeededRng::for_purpose(seed, Purpose::Bench, &[m as u64, d as u64]);
    let noise = Normal::new(0.0, 1.0 / (d as f64).sqrt()).expect("positive sd");
    let mut data = Vec::with_capacity(m * d);
    for i in 0..m {
        if i < m - bad {
            data.extend((0..d).map(|_| noise.sample(&mut rng)));
        } else {
            data.extend(std::iter::repeat_n(shift, d));
        }
    }
    UpdateSet::from_flat(data, m, d).expect("finite data")
}

#[derive(Clone, Debug)]
pub struct BenchSpec {
    pub dims: Vec<usize>,
    pub m: usize,
    pub epsilon: f64,
    pub shift: f64,
    pub estimators: Vec<EstimatorName>,
    pub sections: Vec<usize>,
    /// FilterL2 `σ`.
    pub sigma: f64,
    /// Assumed Byzantine rows for Krum and Bulyan; defaults to `round(ε·m)`.
    pub f: Option<usize>,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub d: usize,
    pub estimator: &'static str,
    pub sections: usize,
    pub error: f64,
    pub wall_ms: f64,
}

fn build(name: EstimatorName, spec: &BenchSpec, sections: usize) -> Result<Estimator, CliError> {
    let f = spec
        .f
        .unwrap_or((spec.epsilon * spec.m as f64).round() as usize);
    Ok(match name {
        EstimatorName::Average => Estimator::Average,
        EstimatorName::Median => Estimator::Median,
        EstimatorName::TrimmedMean => Estimator::TrimmedMean(
            TrimConfig::from_fraction(0.3, TrimReading::Total)
                .map_err(|e| CliError::Precondition(e.to_string()))?,
        ),
        EstimatorName::Krum => Estimator::Krum(KrumConfig { f }),
        EstimatorName::BulyanKrum => Estimator::Bulyan {
            cfg: KrumConfig { f },
            inner: BulyanInner::Krum,
        },
        EstimatorName::BulyanTrimmedMean => Estimator::Bulyan {
            cfg: KrumConfig { f },
            inner: BulyanInner::TrimmedMean,
        },
        EstimatorName::FilterL2 => Estimator::FilterL2(FilterConfig {
            sigma: spec.sigma,
            sections,
            ..FilterConfig::default()
        }),
    })
}

/// Estimation error `‖μ̂ − 0‖` of every estimator at every dimension.
/// Section counts apply to FilterL2 only; other rules get one row per `d`.
pub fn estimator_bench(spec: &BenchSpec) -> Result<Vec<BenchRow>, CliError> {
    if spec.dims.is_empty() || spec.estimators.is_empty() || spec.sections.is_empty() {
        return Err(CliError::Schema(
            "dims, estimators and sections must be non-empty".into(),
        ));
    }
    if spec.m == 0 || !(0.0..0.5).contains(&spec.epsilon) {
        return Err(CliError::Schema(
            "m must be positive and epsilon in [0, 0.5)".into(),
        ));
    }
    let mut rows = Vec::new();
    for &d in &spec.dims {
        if d == 0 {
            return Err(CliError::Schema("dims: dimension must be positive".into()));
        }
        let u = contaminated_gaussian(spec.m, d, spec.epsilon, spec.shift, spec.seed);
        for &name in &spec.estimators {
            let sections: &[usize] = if name == EstimatorName::FilterL2 {
                &spec.sections
            } else {
                &[1]
            };
            for &k in sections {
                let est = build(name, spec, k)?;
                est.check_shape(spec.m, d)
                    .map_err(crate::CliError::from_validation)?;
                let start = Instant::now();
                let agg = est.aggregate(&u)?;
                let wall_ms = start.elapsed().as_secs_f64() * 1e3;
                rows.push(BenchRow {
                    d,
                    estimator: est.name(),
                    sections: k,
                    error: agg.mean.norm(),
                    wall_ms,
                });
            }
        }
    }
    Ok(rows)
}

pub fn bench_csv(spec: &BenchSpec, rows: &[BenchRow], wall_clock: bool) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in rows {
        writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.d,
            r.estimator,
            r.sections,
            spec.m,
            spec.epsilon,
            num(r.error),
            num(if wall_clock { r.wall_ms } else { 0.0 })
        )
        .unwrap();
    }
    s
}
