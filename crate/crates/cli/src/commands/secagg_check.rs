use std::fmt::Write;

use rand_distr::{Distribution, Uniform};

use fedfence_core::codec::encode_fixed;
use fedfence_core::secagg::{
    generate_masks_with_fault, mask_encoded, partition_shards, simulate_ideal_transcript,
    transcript_uniformity_test, verify_cancellation, MaskFault, ResidueBits, ServerTranscript,
};
use fedfence_core::stats::ChiSquare;
use fedfence_core::thresholds::{TRANSCRIPT_BINS, TRANSCRIPT_MIN_COORDS, UNIFORMITY_P_FLOOR};
use fedfence_core::{Error, FixedPointParams, Purpose, RealVector, SeededRng};

use crate::CliError;

#[derive(Clone, Debug)]
pub struct SecaggReport {
    pub n: usize,
    pub p: usize,
    pub d: usize,
    pub trials: usize,
    pub cancellation_failures: usize,
    /// `(trial, shard)` of the first mismatch.
    pub first_failure: Option<(usize, usize)>,
    pub coords: usize,
    pub low_bits: ChiSquare,
    pub high_bits: ChiSquare,
}

impl SecaggReport {
    /// Every shard of a plan with `p = n` holds one client: no mask pairs.
    pub fn degenerate(&self) -> bool {
        self.p == self.n
    }

    pub fn uniformity_pass(&self) -> bool {
        self.low_bits.p_value > UNIFORMITY_P_FLOOR && self.high_bits.p_value > UNIFORMITY_P_FLOOR
    }

    pub fn pass(&self) -> bool {
        self.cancellation_failures == 0 && self.uniformity_pass()
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let w = &mut s;
        writeln!(
            w,
            "secagg-check n={} p={} d={} trials={}",
            self.n, self.p, self.d, self.trials
        )
        .unwrap();
        if self.degenerate() {
            writeln!(
                w,
                "note: p = n, every shard has one client and masking degenerates (no pairs)"
            )
            .unwrap();
        }
        match self.first_failure {
            None => writeln!(w, "cancellation: exact in all {} trials", self.trials).unwrap(),
            Some((t, shard)) => writeln!(
                w,
                "cancellation: FAIL in {} trials (first: trial {t}, shard {shard})",
                self.cancellation_failures
            )
            .unwrap(),
        }
        if self.coords < TRANSCRIPT_MIN_COORDS {
            writeln!(
                w,
                "note: {} masked coordinates, below the {TRANSCRIPT_MIN_COORDS} minimum",
                self.coords
            )
            .unwrap();
        }
        for (name, c) in [("low bits", &self.low_bits), ("high bits", &self.high_bits)] {
            writeln!(
                w,
                "uniformity ({name}): chi2={:.3} dof={} p={:.4e} floor={UNIFORMITY_P_FLOOR}",
                c.statistic, c.dof, c.p_value
            )
            .unwrap();
        }
        writeln!(w, "result: {}", if self.pass() { "PASS" } else { "FAIL" }).unwrap();
        s
    }
}

/// Runs `trials` rounds of masking on random updates, checks exact
/// cancellation per shard, and compares the real transcripts against the
/// ideal simulator's with a two-sample chi-square test on residues.
pub fn secagg_check(
    n: usize,
    p: usize,
    d: usize,
    trials: usize,
    seed: u64,
    fault: MaskFault,
) -> Result<SecaggReport, CliError> {
    if n == 0 || p == 0 || d == 0 || trials == 0 {
        return Err(CliError::Schema(
            "n, p, d and trials must be positive".into(),
        ));
    }
    let params = FixedPointParams::default();
    let values = Uniform::new(-1.0, 1.0).expect("valid range");
    let mut failures = 0;
    let mut first = None;
    let mut real = Vec::with_capacity(trials);
    let mut ideal = Vec::with_capacity(trials);
    for t in 0..trials {
        let round = t as u64;
        let mut part = SeededRng::for_purpose(seed, Purpose::Partition, &[round]);
        let plan =
            partition_shards(n, p, &mut part).map_err(|e| CliError::Schema(e.to_string()))?;
        let mut data = SeededRng::for_purpose(seed, Purpose::Check, &[round]);
        let updates: Vec<RealVector> = (0..n)
            .map(|_| RealVector::new((0..d).map(|_| values.sample(&mut data)).collect()))
            .collect::<Result<_, _>>()?;
        let encodings: Vec<_> = updates
            .iter()
            .map(|u| encode_fixed(u, &params).vector)
            .collect();
        let mut mask_rng = SeededRng::for_purpose(seed, Purpose::Mask, &[round]);
        let table = generate_masks_with_fault(&plan, d, &mut mask_rng, fault)?;
        let masked = encodings
            .iter()
            .enumerate()
            .map(|(c, e)| mask_encoded(e, c, &plan, &table))
            .collect::<Result<Vec<_>, _>>()?;
        match verify_cancellation(&masked, &encodings, &plan) {
            Ok(()) => {}
            Err(Error::CancellationMismatch { shard }) => {
                failures += 1;
                first.get_or_insert((t, shard));
            }
            Err(e) => return Err(e.into()),
        }
        let sums: Vec<RealVector> = plan
            .shards()
            .iter()
            .map(|members| {
                let rows: Vec<RealVector> = members.iter().map(|&c| updates[c].clone()).collect();
                RealVector::mean_of(&rows)?.scale(members.len() as f64)
            })
            .collect::<Result<_, _>>()?;
        let mut sim_rng = SeededRng::for_purpose(seed, Purpose::IdealTranscript, &[round]);
        ideal.push(simulate_ideal_transcript(
            &sums,
            &plan,
            &params,
            &mut sim_rng,
            round,
        )?);
        real.push(ServerTranscript::new(masked, plan, round)?);
    }
    let low_bits = transcript_uniformity_test(&real, &ideal, TRANSCRIPT_BINS, ResidueBits::Low)?;
    let high_bits = transcript_uniformity_test(&real, &ideal, TRANSCRIPT_BINS, ResidueBits::High)?;
    Ok(SecaggReport {
        n,
        p,
        d,
        trials,
        cancellation_failures: failures,
        first_failure: first,
        coords: n * d * trials,
        low_bits,
        high_bits,
    })
}
