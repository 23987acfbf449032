//! Property tests over random inputs: masking algebra, the fixed-point
//! homomorphism and estimator symmetries.

use fedfence_core::codec::{decode_fixed, encode_fixed};
use fedfence_core::estimators::{
    BulyanInner, Estimator, FilterConfig, KrumConfig, TrimConfig, UpdateSet,
};
use fedfence_core::secagg::{
    generate_masks, mask_update, partition_shards, verify_cancellation, ServerTranscript,
};
use fedfence_core::{FieldVector, FixedPointParams, Purpose, RealVector, SeededRng};
use proptest::prelude::*;

fn rows(m: usize, d: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-10.0f64..10.0, d), m)
}

fn set(rows: &[Vec<f64>]) -> UpdateSet {
    let rv: Vec<RealVector> = rows
        .iter()
        .map(|r| RealVector::new(r.clone()).unwrap())
        .collect();
    UpdateSet::new(&rv).unwrap()
}

fn all_rules(m: usize) -> Vec<Estimator> {
    let f = (m.saturating_sub(3)) / 4;
    vec![
        Estimator::Average,
        Estimator::Median,
        Estimator::TrimmedMean(TrimConfig::new(0.15).unwrap()),
        Estimator::Krum(KrumConfig { f }),
        Estimator::Bulyan {
            cfg: KrumConfig { f },
            inner: BulyanInner::Krum,
        },
        Estimator::Bulyan {
            cfg: KrumConfig { f },
            inner: BulyanInner::TrimmedMean,
        },
        Estimator::FilterL2(FilterConfig {
            sigma: 1.0,
            ..FilterConfig::default()
        }),
    ]
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.iter()
        .zip(b)
        .all(|(x, y)| (x - y).abs() <= tol * (1.0 + x.abs().max(y.abs())))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shard_sums_cancel_exactly(n in 1usize..40, pfrac in 0.0f64..1.0, d in 1usize..8, seed in any::<u64>()) {
        let p = 1 + ((n - 1) as f64 * pfrac) as usize;
        let params = FixedPointParams::default();
        let mut r = SeededRng::for_purpose(seed, Purpose::Partition, &[0]);
        let plan = partition_shards(n, p, &mut r).unwrap();
        let mut mr = SeededRng::for_purpose(seed, Purpose::Mask, &[0]);
        let table = generate_masks(&plan, d, &mut mr).unwrap();
        for ((i, j), u) in table.entries() {
            let back = table.get(*j, *i).unwrap();
            prop_assert_eq!(u.wrapping_neg(), back.clone());
        }
        let mut vr = SeededRng::for_purpose(seed, Purpose::Check, &[0]);
        let updates: Vec<RealVector> = (0..n)
            .map(|_| RealVector::new(uniform_field(&mut vr, d)).unwrap())
            .collect();
        let enc: Vec<FieldVector> = updates.iter().map(|u| encode_fixed(u, &params).vector).collect();
        let masked: Vec<FieldVector> = (0..n).map(|c| mask_update(&updates[c], c, &plan, &table, &params).unwrap()).collect();
        prop_assert!(verify_cancellation(&masked, &enc, &plan).is_ok());

        // Server-side shard means are the plaintext shard means at fixed-point resolution.
        let means = ServerTranscript::new(masked, plan.clone(), 0).unwrap().shard_means(&params).unwrap();
        for (members, mean) in plan.shards().iter().zip(&means) {
            for k in 0..d {
                let plain = members.iter().map(|&c| updates[c][k]).sum::<f64>() / members.len() as f64;
                prop_assert!((mean[k] - plain).abs() <= params.resolution());
            }
        }
    }

    #[test]
    fn decode_of_field_sum_is_sum_of_quantized(vals in prop::collection::vec(prop::collection::vec(-1000.0f64..1000.0, 4), 1..20)) {
        let params = FixedPointParams::default();
        let enc: Vec<FieldVector> = vals.iter().map(|v| encode_fixed(&RealVector::new(v.clone()).unwrap(), &params).vector).collect();
        let sum = FieldVector::sum_of(&enc).unwrap();
        let dec = decode_fixed(&sum, 1, &params).unwrap();
        for k in 0..4 {
            let want: f64 = vals.iter().map(|v| params.quantize(v[k])).sum();
            prop_assert_eq!(dec[k], want);
        }
    }

    #[test]
    fn estimators_ignore_row_order(rs in (3usize..14).prop_flat_map(|m| rows(m, 3)), shift in 0usize..13) {
        prop_assume!(distinct_distances(&rs));
        let u = set(&rs);
        let mut perm = rs.clone();
        perm.rotate_left(shift % rs.len());
        perm.reverse();
        let v = set(&perm);
        for est in all_rules(rs.len()) {
            if let Estimator::Krum(KrumConfig { f }) = est {
                if !unique_krum_minimum(&rs, f) {
                    continue;
                }
            }
            let a = est.aggregate(&u).unwrap().mean;
            let b = est.aggregate(&v).unwrap().mean;
            prop_assert!(close(&a, &b, 1e-9), "{}: {:?} vs {:?}", est.name(), a, b);
        }
    }

    #[test]
    fn location_rules_are_translation_equivariant(rs in (3usize..14).prop_flat_map(|m| rows(m, 3)), c in prop::collection::vec(-50.0f64..50.0, 3)) {
        let u = set(&rs);
        let shifted: Vec<Vec<f64>> = rs.iter().map(|r| r.iter().zip(&c).map(|(x, y)| x + y).collect()).collect();
        let v = set(&shifted);
        for est in all_rules(rs.len()).into_iter().filter(|e| !matches!(e, Estimator::Krum(_) | Estimator::Bulyan { .. })) {
            let a = est.aggregate(&u).unwrap().mean;
            let b = est.aggregate(&v).unwrap().mean;
            let back: Vec<f64> = b.iter().zip(&c).map(|(x, y)| x - y).collect();
            prop_assert!(close(&a, &back, 1e-7), "{}: {:?} vs {:?}", est.name(), a, back);
        }
    }
}

fn distinct_distances(rs: &[Vec<f64>]) -> bool {
    let mut ds = Vec::new();
    for a in 0..rs.len() {
        for b in a + 1..rs.len() {
            ds.push(
                rs[a]
                    .iter()
                    .zip(&rs[b])
                    .map(|(x, y)| (x - y).powi(2))
                    .sum::<f64>(),
            );
        }
    }
    ds.sort_by(f64::total_cmp);
    ds.windows(2).all(|w| w[1] - w[0] > 1e-6 * (1.0 + w[1]))
}

/// Krum's tie-break is by index, so its value is only order free when the
/// best score is unique.
fn unique_krum_minimum(rs: &[Vec<f64>], f: usize) -> bool {
    let m = rs.len();
    let mut scores: Vec<f64> = (0..m)
        .map(|a| {
            let mut d: Vec<f64> = (0..m)
                .filter(|&b| b != a)
                .map(|b| rs[a].iter().zip(&rs[b]).map(|(x, y)| (x - y).powi(2)).sum())
                .collect();
            d.sort_by(f64::total_cmp);
            d[..m - f - 2].iter().sum()
        })
        .collect();
    scores.sort_by(f64::total_cmp);
    scores[1] - scores[0] > 1e-6 * (1.0 + scores[1])
}

fn uniform_field(r: &mut SeededRng, d: usize) -> Vec<f64> {
    use rand::Rng;
    (0..d).map(|_| r.random_range(-100.0..100.0)).collect()
}

#[test]
fn one_far_row_moves_only_the_average() {
    let m = 11;
    let mu = [0.5, -1.0, 2.0];
    let mut bounded = Vec::new();
    let mut avg = Vec::new();
    for big in [1e2, 1e4, 1e6] {
        let mut rs = vec![mu.to_vec(); m - 1];
        rs.push(mu.iter().map(|x| x + big).collect());
        let u = set(&rs);
        let rules = [
            Estimator::Median,
            Estimator::TrimmedMean(TrimConfig::new(1.0 / m as f64).unwrap()),
            Estimator::Krum(KrumConfig { f: 1 }),
            Estimator::FilterL2(FilterConfig::default()),
        ];
        let worst = rules
            .iter()
            .map(|e| {
                let out = e.aggregate(&u).unwrap().mean;
                out.iter()
                    .zip(&mu)
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max);
        bounded.push(worst);
        let a = Estimator::Average.aggregate(&u).unwrap().mean;
        avg.push(
            a.iter()
                .zip(&mu)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt(),
        );
    }
    assert!(bounded.iter().all(|&e| e < 1e-6), "{bounded:?}");
    let expected = |big: f64| big * 3f64.sqrt() / m as f64;
    for (e, big) in avg.iter().zip([1e2, 1e4, 1e6]) {
        assert!((e / expected(big) - 1.0).abs() < 1e-9);
    }
}
