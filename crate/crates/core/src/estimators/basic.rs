use crate::codec::RealVector;
use crate::error::{Error, Result};

use super::UpdateSet;

/// Weighted mean of the rows.
pub fn average(u: &UpdateSet) -> RealVector {
    let total: f64 = u.weights().iter().sum();
    let mut acc = vec![0.0; u.dim()];
    for (row, &w) in u.rows().zip(u.weights()) {
        if w == 0.0 {
            continue;
        }
        for (a, x) in acc.iter_mut().zip(row) {
            *a += w * x;
        }
    }
    acc.iter_mut().for_each(|a| *a /= total);
    RealVector::new(acc).expect("mean of finite rows is finite")
}

/// Per-coordinate lower median.
pub fn coordinate_median(u: &UpdateSet) -> RealVector {
    let m = u.len();
    let mut col = vec![0.0; m];
    let out = (0..u.dim())
        .map(|j| {
            for (c, row) in col.iter_mut().zip(u.rows()) {
                *c = row[j];
            }
            col.sort_unstable_by(f64::total_cmp);
            col[(m - 1) / 2]
        })
        .collect();
    RealVector::new(out).expect("median of finite rows is finite")
}

/// How a configured trimming fraction maps to the per-tail `beta`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum TrimReading {
    /// The fraction is the total trimmed mass, split evenly over both tails.
    #[default]
    Total,
    /// The fraction is trimmed from each tail.
    PerTail,
}

/// Fraction trimmed from each tail of every coordinate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrimConfig {
    pub beta: f64,
}

impl TrimConfig {
    pub fn new(beta: f64) -> Result<Self> {
        let c = Self { beta };
        c.validate()?;
        Ok(c)
    }

    pub fn from_fraction(fraction: f64, reading: TrimReading) -> Result<Self> {
        match reading {
            TrimReading::Total => Self::new(fraction / 2.0),
            TrimReading::PerTail => Self::new(fraction),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta.is_finite() && (0.0..0.5).contains(&self.beta)) {
            return Err(Error::InvalidTrim(self.beta));
        }
        Ok(())
    }

    /// Values dropped from each tail of a column of `m` values.
    pub fn trim_count(&self, m: usize) -> usize {
        // Guards products like 0.29 · 100 = 28.999999999999996.
        let k = (self.beta * m as f64 + 1e-9).floor() as usize;
        k.min((m - 1) / 2)
    }
}

/// Per coordinate: sort, drop `floor(beta·m)` values from each tail, average
/// the rest.
pub fn trimmed_mean(u: &UpdateSet, cfg: &TrimConfig) -> Result<RealVector> {
    cfg.validate()?;
    Ok(trimmed_mean_by_count(u, cfg.trim_count(u.len())))
}

pub(crate) fn trimmed_mean_by_count(u: &UpdateSet, k: usize) -> RealVector {
    let m = u.len();
    let kept = (m - 2 * k) as f64;
    let mut col = vec![0.0; m];
    let out = (0..u.dim())
        .map(|j| {
            for (c, row) in col.iter_mut().zip(u.rows()) {
                *c = row[j];
            }
            col.sort_unstable_by(f64::total_cmp);
            col[k..m - k].iter().sum::<f64>() / kept
        })
        .collect();
    RealVector::new(out).expect("trimmed mean of finite rows is finite")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{Purpose, SeededRng};
    use proptest::prelude::*;
    use rand::Rng;

    fn set(rows: &[&[f64]]) -> UpdateSet {
        let rs: Vec<RealVector> = rows
            .iter()
            .map(|r| RealVector::new(r.to_vec()).unwrap())
            .collect();
        UpdateSet::new(&rs).unwrap()
    }

    #[test]
    fn average_examples() {
        assert_eq!(
            average(&set(&[&[1.0, 1.0], &[3.0, 3.0]])).as_slice(),
            &[2.0, 2.0]
        );
        assert_eq!(average(&set(&[&[4.0, -1.0]])).as_slice(), &[4.0, -1.0]);
        let c = 7.0;
        let rows: Vec<&[f64]> = vec![&[7.0], &[0.0], &[0.0], &[0.0]];
        assert_eq!(average(&set(&rows)).as_slice(), &[c / 4.0]);
    }

    #[test]
    fn weighted_average() {
        let u = set(&[&[0.0], &[10.0]])
            .with_weights(vec![3.0, 1.0])
            .unwrap();
        assert_eq!(average(&u).as_slice(), &[2.5]);
    }

    #[test]
    fn median_examples() {
        assert_eq!(
            coordinate_median(&set(&[&[1.0], &[2.0], &[100.0]])).as_slice(),
            &[2.0]
        );
        assert_eq!(
            coordinate_median(&set(&[&[4.0], &[1.0], &[3.0], &[2.0]])).as_slice(),
            &[2.0]
        );
        assert_eq!(
            coordinate_median(&set(&[&[5.0, 6.0], &[5.0, 6.0]])).as_slice(),
            &[5.0, 6.0]
        );
    }

    #[test]
    fn trimmed_examples() {
        let u = set(&[&[0.0], &[1.0], &[2.0], &[3.0], &[1000.0]]);
        assert_eq!(
            trimmed_mean(&u, &TrimConfig::new(0.2).unwrap())
                .unwrap()
                .as_slice(),
            &[2.0]
        );
        let v = set(&[&[1.0, 2.0], &[3.0, 5.0], &[8.0, -1.0]]);
        assert_eq!(
            trimmed_mean(&v, &TrimConfig::new(0.0).unwrap()).unwrap(),
            average(&v)
        );
        let same = set(&[&[3.5], &[3.5], &[3.5], &[3.5]]);
        assert_eq!(
            trimmed_mean(&same, &TrimConfig::new(0.49).unwrap())
                .unwrap()
                .as_slice(),
            &[3.5]
        );
        assert!(TrimConfig::new(0.5).is_err());
        assert!(TrimConfig::new(-0.1).is_err());
    }

    #[test]
    fn trim_readings() {
        assert_eq!(
            TrimConfig::from_fraction(0.3, TrimReading::Total)
                .unwrap()
                .beta,
            0.15
        );
        assert_eq!(
            TrimConfig::from_fraction(0.3, TrimReading::PerTail)
                .unwrap()
                .beta,
            0.3
        );
        assert_eq!(TrimConfig::new(0.29).unwrap().trim_count(100), 29);
    }

    fn naive_trimmed(col: &[f64], k: usize) -> f64 {
        let mut v = col.to_vec();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let kept = &v[k..v.len() - k];
        kept.iter().sum::<f64>() / kept.len() as f64
    }

    #[test]
    fn permutation_invariance() {
        let mut r = SeededRng::for_purpose(1, Purpose::Check, &[40]);
        let rows: Vec<RealVector> = (0..9)
            .map(|_| RealVector::new((0..3).map(|_| r.random_range(-5.0..5.0)).collect()).unwrap())
            .collect();
        let mut shuffled = rows.clone();
        shuffled.reverse();
        shuffled.swap(0, 4);
        let a = UpdateSet::new(&rows).unwrap();
        let b = UpdateSet::new(&shuffled).unwrap();
        assert_eq!(coordinate_median(&a), coordinate_median(&b));
        let t = TrimConfig::new(0.2).unwrap();
        assert_eq!(trimmed_mean(&a, &t).unwrap(), trimmed_mean(&b, &t).unwrap());
        for (x, y) in average(&a).iter().zip(average(&b).iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn trimmed_matches_naive(rows in prop::collection::vec(prop::collection::vec(-100.0f64..100.0, 3), 1..12),
                                 beta in 0.0f64..0.49) {
            let rs: Vec<RealVector> = rows.iter().map(|r| RealVector::new(r.clone()).unwrap()).collect();
            let u = UpdateSet::new(&rs).unwrap();
            let cfg = TrimConfig::new(beta).unwrap();
            let k = cfg.trim_count(u.len());
            let got = trimmed_mean(&u, &cfg).unwrap();
            for j in 0..3 {
                prop_assert_eq!(got[j], naive_trimmed(&u.column(j), k));
            }
        }

        #[test]
        fn translation_equivariance(rows in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 2), 1..10),
                                    c in prop::collection::vec(-50.0f64..50.0, 2)) {
            let rs: Vec<RealVector> = rows.iter().map(|r| RealVector::new(r.clone()).unwrap()).collect();
            let shifted: Vec<RealVector> = rows
                .iter()
                .map(|r| RealVector::new(r.iter().zip(&c).map(|(a, b)| a + b).collect()).unwrap())
                .collect();
            let u = UpdateSet::new(&rs).unwrap();
            let v = UpdateSet::new(&shifted).unwrap();
            let t = TrimConfig::new(0.2).unwrap();
            let pairs = [
                (average(&u), average(&v)),
                (coordinate_median(&u), coordinate_median(&v)),
                (trimmed_mean(&u, &t).unwrap(), trimmed_mean(&v, &t).unwrap()),
            ];
            for (a, b) in pairs {
                for j in 0..2 {
                    prop_assert!((a[j] + c[j] - b[j]).abs() < 1e-9);
                }
            }
        }
    }
}
