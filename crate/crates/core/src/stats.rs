//! Statistics helpers: chi-square tests, sample moments, silhouette score.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Outcome of a chi-square test.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

fn survival(statistic: f64, dof: usize) -> f64 {
    if dof == 0 {
        return 1.0;
    }
    if statistic <= 0.0 {
        return 1.0;
    }
    ChiSquared::new(dof as f64)
        .map(|d| d.sf(statistic))
        .unwrap_or(f64::NAN)
}

/// Goodness-of-fit p-value of `counts` against the uniform distribution.
pub fn chi_square_uniform_p(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    if total == 0 || counts.len() < 2 {
        return 1.0;
    }
    let expected = total as f64 / counts.len() as f64;
    let stat: f64 = counts
        .iter()
        .map(|&c| {
            let diff = c as f64 - expected;
            diff * diff / expected
        })
        .sum();
    survival(stat, counts.len() - 1)
}

/// Two-sample chi-square homogeneity test on binned counts.
///
/// Uses the unequal-sample-size form
/// `Σ (√(S/R)·r_b − √(R/S)·s_b)² / (r_b + s_b)` over non-empty bins.
pub fn chi_square_two_sample(r: &[u64], s: &[u64]) -> ChiSquare {
    assert_eq!(r.len(), s.len(), "bin counts must align");
    let rt: u64 = r.iter().sum();
    let st: u64 = s.iter().sum();
    if rt == 0 || st == 0 {
        return ChiSquare {
            statistic: 0.0,
            dof: 0,
            p_value: 1.0,
        };
    }
    let k1 = (st as f64 / rt as f64).sqrt();
    let k2 = (rt as f64 / st as f64).sqrt();
    let mut stat = 0.0;
    let mut used = 0usize;
    for (&a, &b) in r.iter().zip(s) {
        if a + b == 0 {
            continue;
        }
        used += 1;
        let diff = k1 * a as f64 - k2 * b as f64;
        stat += diff * diff / (a + b) as f64;
    }
    let dof = used.saturating_sub(1);
    ChiSquare {
        statistic: stat,
        dof,
        p_value: survival(stat, dof),
    }
}

/// Sample moments of a scalar sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Moments {
    pub count: usize,
    pub mean: f64,
    /// Unbiased (n − 1) variance.
    pub variance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
}

/// Computes mean, unbiased variance, and the moment-based skewness
/// `m3 / m2^{3/2}` and excess kurtosis `m4 / m2² − 3`.
pub fn moments(xs: &[f64]) -> Moments {
    let n = xs.len();
    assert!(n >= 2, "moments need at least two samples");
    let nf = n as f64;
    let mean = xs.iter().sum::<f64>() / nf;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in xs {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= nf;
    m3 /= nf;
    m4 /= nf;
    let (skewness, excess_kurtosis) = if m2 > 0.0 {
        (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
    } else {
        (0.0, 0.0)
    };
    Moments {
        count: n,
        mean,
        variance: m2 * nf / (nf - 1.0),
        skewness,
        excess_kurtosis,
    }
}

/// Mean silhouette coefficient of labelled points under Euclidean distance.
/// Points in singleton clusters contribute 0.
pub fn silhouette(points: &[&[f64]], labels: &[usize]) -> f64 {
    assert_eq!(points.len(), labels.len());
    let n = points.len();
    let k = labels.iter().copied().max().map_or(0, |m| m + 1);
    let dist = |a: &[f64], b: &[f64]| -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    };
    let mut total = 0.0;
    for i in 0..n {
        let mut sums = vec![0.0; k];
        let mut counts = vec![0usize; k];
        for j in 0..n {
            if i == j {
                continue;
            }
            sums[labels[j]] += dist(points[i], points[j]);
            counts[labels[j]] += 1;
        }
        let own = labels[i];
        if counts[own] == 0 {
            continue;
        }
        let a = sums[own] / counts[own] as f64;
        let b = (0..k)
            .filter(|&c| c != own && counts[c] > 0)
            .map(|c| sums[c] / counts[c] as f64)
            .fold(f64::INFINITY, f64::min);
        if b.is_finite() {
            total += (b - a) / a.max(b);
        }
    }
    total / n as f64
}
