//! Sharded pairwise-mask secure aggregation.
//!
//! Clients are partitioned into shards. Within a shard every unordered pair
//! `{i, j}` shares a uniform mask `u_ij ∈ Z_q^d` with `u_ji = −u_ij`. Client
//! `i` uploads `encode(g_i) + Σ_{k ∈ H∖i} u_ik`, so the masks cancel in the
//! shard sum and the server recovers exactly `Σ encode(g_i)`.
//!
//! Masks come from a trusted simulation oracle; there is no key agreement and
//! no dropout recovery.

use std::collections::BTreeMap;
use std::io::{self, Read, Write};

use rand::seq::SliceRandom;

use crate::codec::{
    decode_fixed, encode_fixed, uniform_field_vector, FieldVector, FixedPointParams, RealVector,
};
use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::stats::{chi_square_two_sample, ChiSquare};

/// A partition of clients `0..n` into `p` shards whose sizes differ by at
/// most one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShardPlan {
    assignment: Vec<usize>,
    shards: Vec<Vec<usize>>,
}

impl ShardPlan {
    /// Builds a plan from explicit shard member lists. Every client in
    /// `0..n` must appear exactly once.
    pub fn from_shards(n: usize, shards: Vec<Vec<usize>>) -> Result<Self> {
        let p = shards.len();
        if p == 0 || p > n {
            return Err(Error::InvalidShardCount { n, p });
        }
        let mut assignment = vec![usize::MAX; n];
        for (j, members) in shards.iter().enumerate() {
            if members.is_empty() {
                return Err(Error::InvalidShardCount { n, p });
            }
            for &c in members {
                if c >= n || assignment[c] != usize::MAX {
                    return Err(Error::UnknownClient(c));
                }
                assignment[c] = j;
            }
        }
        if let Some(c) = assignment.iter().position(|&a| a == usize::MAX) {
            return Err(Error::UnknownClient(c));
        }
        let mut shards = shards;
        shards.iter_mut().for_each(|s| s.sort_unstable());
        Ok(Self { assignment, shards })
    }

    /// Deterministic contiguous plan (client `c` goes to shard by index
    /// order). Used for static-shard ablations and tests.
    pub fn contiguous(n: usize, p: usize) -> Result<Self> {
        if p == 0 || p > n {
            return Err(Error::InvalidShardCount { n, p });
        }
        let order: Vec<usize> = (0..n).collect();
        Ok(Self::from_order(&order, p))
    }

    fn from_order(order: &[usize], p: usize) -> Self {
        let n = order.len();
        let (base, extra) = (n / p, n % p);
        let mut shards = Vec::with_capacity(p);
        let mut start = 0;
        for j in 0..p {
            let size = base + usize::from(j < extra);
            let mut members = order[start..start + size].to_vec();
            members.sort_unstable();
            shards.push(members);
            start += size;
        }
        let mut assignment = vec![0; n];
        for (j, members) in shards.iter().enumerate() {
            for &c in members {
                assignment[c] = j;
            }
        }
        Self { assignment, shards }
    }

    pub fn n(&self) -> usize {
        self.assignment.len()
    }

    pub fn p(&self) -> usize {
        self.shards.len()
    }

    pub fn shard_of(&self, client: usize) -> Result<usize> {
        self.assignment
            .get(client)
            .copied()
            .ok_or(Error::UnknownClient(client))
    }

    pub fn members(&self, shard: usize) -> &[usize] {
        &self.shards[shard]
    }

    pub fn shards(&self) -> &[Vec<usize>] {
        &self.shards
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.shards.iter().map(Vec::len).collect()
    }

    pub fn max_shard_size(&self) -> usize {
        self.shards.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Number of unordered client pairs that share a shard.
    pub fn pair_count(&self) -> usize {
        self.shards
            .iter()
            .map(|s| s.len() * (s.len() - 1) / 2)
            .sum()
    }
}

/// Uniformly random balanced partition of `n` clients into `p` shards.
pub fn partition_shards(n: usize, p: usize, rng: &mut SeededRng) -> Result<ShardPlan> {
    if p == 0 || p > n {
        return Err(Error::InvalidShardCount { n, p });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    Ok(ShardPlan::from_order(&order, p))
}

/// Fault injection for negative controls. Production paths use `None`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum MaskFault {
    #[default]
    None,
    /// Clear the top bit of every freshly drawn mask: biased, still cancels.
    ClearTopBit,
    /// Store `u_ji = u_ij` instead of its negation: masks no longer cancel.
    SignBug,
}

/// Pairwise masks `u_ij` for all ordered pairs that share a shard.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskTable {
    dim: usize,
    masks: BTreeMap<(usize, usize), FieldVector>,
}

impl MaskTable {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of stored ordered entries (twice the number of pairs).
    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> Option<&FieldVector> {
        self.masks.get(&(i, j))
    }

    pub fn entries(&self) -> impl Iterator<Item = (&(usize, usize), &FieldVector)> {
        self.masks.iter()
    }
}

/// Draws one uniform mask per unordered in-shard pair and stores both
/// orientations.
pub fn generate_masks(plan: &ShardPlan, d: usize, rng: &mut SeededRng) -> Result<MaskTable> {
    generate_masks_with_fault(plan, d, rng, MaskFault::None)
}

pub fn generate_masks_with_fault(
    plan: &ShardPlan,
    d: usize,
    rng: &mut SeededRng,
    fault: MaskFault,
) -> Result<MaskTable> {
    if d == 0 {
        return Err(Error::EmptyVector);
    }
    let mut masks = BTreeMap::new();
    for members in plan.shards() {
        for (a, &i) in members.iter().enumerate() {
            for &j in &members[a + 1..] {
                let mut u = uniform_field_vector(d, rng)?;
                if fault == MaskFault::ClearTopBit {
                    u = u.map(|x| x & (u64::MAX >> 1));
                }
                let back = match fault {
                    MaskFault::SignBug => u.clone(),
                    _ => u.wrapping_neg(),
                };
                masks.insert((i, j), u);
                masks.insert((j, i), back);
            }
        }
    }
    Ok(MaskTable { dim: d, masks })
}

/// Blinds an already encoded update: `enc + Σ_{k ∈ H∖i} u_ik (mod q)`.
pub fn mask_encoded(
    enc: &FieldVector,
    client: usize,
    plan: &ShardPlan,
    table: &MaskTable,
) -> Result<FieldVector> {
    let shard = plan.shard_of(client)?;
    let mut out = enc.clone();
    for &k in plan.members(shard) {
        if k == client {
            continue;
        }
        let u = table.get(client, k).ok_or_else(|| {
            Error::InvalidConfig(format!("mask table lacks pair ({client}, {k})"))
        })?;
        out.wrapping_add_assign(u)?;
    }
    Ok(out)
}

/// Encodes `g` and blinds it for upload.
pub fn mask_update(
    g: &RealVector,
    client: usize,
    plan: &ShardPlan,
    table: &MaskTable,
    params: &FixedPointParams,
) -> Result<FieldVector> {
    mask_encoded(&encode_fixed(g, params).vector, client, plan, table)
}

/// Server side: modular sum of a shard's masked uploads, decoded as a mean
/// over `shard_size` clients.
pub fn aggregate_shard(
    masked: &[FieldVector],
    shard_size: usize,
    params: &FixedPointParams,
) -> Result<RealVector> {
    if masked.is_empty() {
        return Err(Error::EmptyInput(
            "aggregate_shard needs at least one upload",
        ));
    }
    let sum = FieldVector::sum_of(masked)?;
    decode_fixed(&sum, shard_size as u64, params)
}

/// Checks `Σ_{i∈H} masked_i ≡ Σ_{i∈H} enc_i (mod q)` for every shard.
pub fn verify_cancellation(
    masked: &[FieldVector],
    encodings: &[FieldVector],
    plan: &ShardPlan,
) -> Result<()> {
    if masked.len() != plan.n() || encodings.len() != plan.n() {
        return Err(Error::DimensionMismatch {
            expected: plan.n(),
            found: masked.len().min(encodings.len()),
        });
    }
    for (j, members) in plan.shards().iter().enumerate() {
        let lhs = FieldVector::sum_of(members.iter().map(|&c| &masked[c]))?;
        let rhs = FieldVector::sum_of(members.iter().map(|&c| &encodings[c]))?;
        if lhs != rhs {
            return Err(Error::CancellationMismatch { shard: j });
        }
    }
    Ok(())
}

/// What the server sees in one round: the masked uploads and the shard plan.
/// The constructor accepts field vectors only, so plaintext real updates
/// cannot reach server-side code through this type.
#[derive(Clone, Debug, PartialEq)]
pub struct ServerTranscript {
    masked: Vec<FieldVector>,
    plan: ShardPlan,
    round: u64,
}

impl ServerTranscript {
    pub fn new(masked: Vec<FieldVector>, plan: ShardPlan, round: u64) -> Result<Self> {
        if masked.len() != plan.n() {
            return Err(Error::DimensionMismatch {
                expected: plan.n(),
                found: masked.len(),
            });
        }
        let d = masked[0].dim();
        if let Some(bad) = masked.iter().find(|m| m.dim() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: bad.dim(),
            });
        }
        Ok(Self {
            masked,
            plan,
            round,
        })
    }

    pub fn masked(&self) -> &[FieldVector] {
        &self.masked
    }

    pub fn plan(&self) -> &ShardPlan {
        &self.plan
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn dim(&self) -> usize {
        self.masked[0].dim()
    }

    /// Modular sum of each shard's uploads.
    pub fn shard_sums(&self) -> Result<Vec<FieldVector>> {
        self.plan
            .shards()
            .iter()
            .map(|members| FieldVector::sum_of(members.iter().map(|&c| &self.masked[c])))
            .collect()
    }

    /// Per-shard means, decoded with each shard's actual size as divisor.
    pub fn shard_means(&self, params: &FixedPointParams) -> Result<Vec<RealVector>> {
        self.plan
            .shards()
            .iter()
            .map(|members| {
                let uploads: Vec<FieldVector> =
                    members.iter().map(|&c| self.masked[c].clone()).collect();
                aggregate_shard(&uploads, members.len(), params)
            })
            .collect()
    }

    /// Writes the binary layout: `b"FSA1"`, then `n`, `d`, `p` as
    /// little-endian `u64`, then the `n × d` masked values row-major as
    /// little-endian `u64`.
    pub fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(TRANSCRIPT_MAGIC)?;
        for v in [self.plan.n(), self.dim(), self.plan.p()] {
            w.write_all(&(v as u64).to_le_bytes())?;
        }
        for row in &self.masked {
            for &x in row.iter() {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(28 + 8 * self.masked.len() * self.dim());
        self.write_to(&mut buf)
            .expect("writing to a Vec cannot fail");
        buf
    }
}

pub const TRANSCRIPT_MAGIC: &[u8; 4] = b"FSA1";

/// A transcript read back from its binary layout. The layout does not carry
/// the shard assignment, only its shard count.
#[derive(Clone, Debug, PartialEq)]
pub struct RawTranscript {
    pub n: usize,
    pub d: usize,
    pub p: usize,
    pub masked: Vec<FieldVector>,
}

impl RawTranscript {
    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let io_err = |e: io::Error| Error::Transcript(e.to_string());
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(io_err)?;
        if &magic != TRANSCRIPT_MAGIC {
            return Err(Error::Transcript("bad magic".into()));
        }
        let mut word = [0u8; 8];
        let mut header = [0usize; 3];
        for h in header.iter_mut() {
            r.read_exact(&mut word).map_err(io_err)?;
            *h = u64::from_le_bytes(word) as usize;
        }
        let [n, d, p] = header;
        if n == 0 || d == 0 || p == 0 || p > n {
            return Err(Error::Transcript(format!("bad header n={n} d={d} p={p}")));
        }
        let mut masked = Vec::with_capacity(n);
        for _ in 0..n {
            let mut row = Vec::with_capacity(d);
            for _ in 0..d {
                r.read_exact(&mut word).map_err(io_err)?;
                row.push(u64::from_le_bytes(word));
            }
            masked.push(FieldVector::new(row)?);
        }
        Ok(Self { n, d, p, masked })
    }
}

/// The simulator's view: per shard, `|H| − 1` uniform vectors plus one
/// residual so the shard sums to the encoded shard sum.
pub fn simulate_ideal_transcript(
    shard_sums: &[RealVector],
    plan: &ShardPlan,
    params: &FixedPointParams,
    rng: &mut SeededRng,
    round: u64,
) -> Result<ServerTranscript> {
    if shard_sums.len() != plan.p() {
        return Err(Error::DimensionMismatch {
            expected: plan.p(),
            found: shard_sums.len(),
        });
    }
    let d = shard_sums[0].dim();
    let mut masked = vec![FieldVector::zeros(d); plan.n()];
    for (members, sum) in plan.shards().iter().zip(shard_sums) {
        let mut residual = encode_fixed(sum, params).vector;
        let (last, rest) = members.split_last().expect("shards are non-empty");
        for &c in rest {
            let v = uniform_field_vector(d, rng)?;
            residual.wrapping_sub_assign(&v)?;
            masked[c] = v;
        }
        masked[*last] = residual;
    }
    ServerTranscript::new(masked, plan.clone(), round)
}

/// Which bits of a `u64` select the residue bin.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ResidueBits {
    /// `x mod bins`.
    Low,
    /// The top `log2(bins)` bits.
    High,
}

fn bin_counts(
    transcripts: &[ServerTranscript],
    bins: usize,
    bits: ResidueBits,
    ranks: usize,
) -> Vec<u64> {
    let width = bins.trailing_zeros();
    let mut counts = vec![0u64; ranks * bins];
    for t in transcripts {
        for members in t.plan.shards() {
            for (rank, &c) in members.iter().enumerate() {
                for &x in t.masked[c].iter() {
                    let b = match bits {
                        ResidueBits::Low => x & (bins as u64 - 1),
                        ResidueBits::High => x >> (64 - width),
                    };
                    counts[rank * bins + b as usize] += 1;
                }
            }
        }
    }
    counts
}

/// Two-sample chi-square test between the residues of two transcript
/// collections, binned jointly by the uploader's rank within its shard and
/// the residue. Pooling ranks would hide mask biases that are mirrored
/// between pair partners. `bins` must be a power of two in `2..=65536`.
pub fn transcript_uniformity_test(
    real: &[ServerTranscript],
    ideal: &[ServerTranscript],
    bins: usize,
    bits: ResidueBits,
) -> Result<ChiSquare> {
    if !(2..=65536).contains(&bins) || !bins.is_power_of_two() {
        return Err(Error::InvalidConfig(format!(
            "bins={bins} must be a power of two in 2..=65536"
        )));
    }
    if real.len() != ideal.len() || real.is_empty() {
        return Err(Error::DimensionMismatch {
            expected: real.len(),
            found: ideal.len(),
        });
    }
    for (a, b) in real.iter().zip(ideal) {
        if a.plan.n() != b.plan.n() || a.plan.p() != b.plan.p() || a.dim() != b.dim() {
            return Err(Error::Transcript("transcript shapes differ".into()));
        }
    }
    let ranks = real
        .iter()
        .chain(ideal)
        .map(|t| t.plan.max_shard_size())
        .max()
        .unwrap_or(1);
    let r = bin_counts(real, bins, bits, ranks);
    let s = bin_counts(ideal, bins, bits, ranks);
    Ok(chi_square_two_sample(&r, &s))
}
