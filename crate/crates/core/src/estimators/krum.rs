use crate::codec::RealVector;
use crate::error::{Error, Result};

use super::basic::trimmed_mean_by_count;
use super::UpdateSet;

/// Assumed number of Byzantine rows.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KrumConfig {
    pub f: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct KrumSelection {
    pub index: usize,
    pub value: RealVector,
}

/// Which rule Bulyan runs repeatedly to build its selection set.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BulyanInner {
    Krum,
    TrimmedMean,
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Krum scores over the listed rows: each row's sum of squared distances to
/// its `neighbours` nearest other rows.
fn krum_scores(u: &UpdateSet, idx: &[usize], neighbours: usize) -> Vec<f64> {
    let r = idx.len();
    let mut dist = vec![0.0; r * r];
    for a in 0..r {
        for b in a + 1..r {
            let d = squared_distance(u.row(idx[a]), u.row(idx[b]));
            dist[a * r + b] = d;
            dist[b * r + a] = d;
        }
    }
    let mut others = Vec::with_capacity(r);
    (0..r)
        .map(|a| {
            others.clear();
            others.extend((0..r).filter(|&b| b != a).map(|b| dist[a * r + b]));
            others.sort_unstable_by(f64::total_cmp);
            others.iter().take(neighbours).sum()
        })
        .collect()
}

/// Position of the minimum, first one on ties.
fn argmin(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x < xs[best] {
            best = i;
        }
    }
    best
}

/// Position of the minimum; ties go to the lexicographically smallest row so
/// the pick does not depend on row order.
fn argmin_by_value(u: &UpdateSet, idx: &[usize], xs: &[f64]) -> usize {
    let lex = |a: usize, b: usize| {
        u.row(idx[a])
            .iter()
            .zip(u.row(idx[b]))
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    };
    let mut best = 0;
    for i in 1..xs.len() {
        if xs[i] < xs[best] || (xs[i] == xs[best] && lex(i, best).is_lt()) {
            best = i;
        }
    }
    best
}

/// Selects the row with the smallest sum of squared distances to its
/// `m − f − 2` nearest neighbours. Ties go to the lowest index.
pub fn krum(u: &UpdateSet, cfg: &KrumConfig) -> Result<KrumSelection> {
    let m = u.len();
    if m < 2 * cfg.f + 3 {
        return Err(Error::TooFewRows {
            rule: "krum",
            required: 2 * cfg.f + 3,
            found: m,
        });
    }
    let idx: Vec<usize> = (0..m).collect();
    let scores = krum_scores(u, &idx, m - cfg.f - 2);
    let index = argmin(&scores);
    Ok(KrumSelection {
        index,
        value: RealVector::new(u.row(index).to_vec())?,
    })
}

/// Bulyan: repeatedly apply `inner` to pick `m − 2f` rows (each pick leaves
/// the pool), then per coordinate average the `m − 4f` selected values
/// closest to the selection's median.
///
/// With `BulyanInner::Krum` a pick is the Krum winner of the remaining pool,
/// scored over `r − f − 2` neighbours, or all `r − 1` once that drops to 0. With
/// `BulyanInner::TrimmedMean` a pick is the remaining row nearest to the
/// pool's trimmed mean, trimming `min(f, (r − 1)/2)` values per tail. Ties
/// between picks go to the lexicographically smallest row.
pub fn bulyan(u: &UpdateSet, cfg: &KrumConfig, inner: BulyanInner) -> Result<RealVector> {
    let m = u.len();
    let f = cfg.f;
    if m < 4 * f + 3 {
        return Err(Error::TooFewRows {
            rule: match inner {
                BulyanInner::Krum => "bulyan-krum",
                BulyanInner::TrimmedMean => "bulyan-trimmed-mean",
            },
            required: 4 * f + 3,
            found: m,
        });
    }
    let theta = m - 2 * f;
    let beta = m - 4 * f;
    let mut pool: Vec<usize> = (0..m).collect();
    let mut chosen = Vec::with_capacity(theta);
    while chosen.len() < theta {
        let r = pool.len();
        let pick = match inner {
            BulyanInner::Krum => {
                let k = if r >= f + 3 { r - f - 2 } else { r - 1 };
                argmin_by_value(u, &pool, &krum_scores(u, &pool, k))
            }
            BulyanInner::TrimmedMean => {
                let sub = u.select(&pool);
                let centre = trimmed_mean_by_count(&sub, f.min((r - 1) / 2));
                let d: Vec<f64> = pool
                    .iter()
                    .map(|&i| squared_distance(u.row(i), &centre))
                    .collect();
                argmin_by_value(u, &pool, &d)
            }
        };
        chosen.push(pool.remove(pick));
    }

    let mut col: Vec<f64> = Vec::with_capacity(theta);
    let out = (0..u.dim())
        .map(|j| {
            col.clear();
            col.extend(chosen.iter().map(|&i| u.row(i)[j]));
            col.sort_unstable_by(f64::total_cmp);
            let med = col[(theta - 1) / 2];
            // The beta values nearest the median form a window of the sorted
            // column; slide it to the best position, leftmost on ties.
            let mut best = 0;
            let mut best_cost = f64::INFINITY;
            for start in 0..=theta - beta {
                let cost = (col[start] - med)
                    .abs()
                    .max((col[start + beta - 1] - med).abs());
                if cost < best_cost {
                    best_cost = cost;
                    best = start;
                }
            }
            col[best..best + beta].iter().sum::<f64>() / beta as f64
        })
        .collect();
    RealVector::new(out)
}
