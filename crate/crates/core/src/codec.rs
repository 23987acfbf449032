//! Real vectors, field vectors over `Z_{2^64}`, and the fixed-point map
//! between them.
//!
//! A real `x` encodes to `round_half_even(clamp(x, ±clamp_abs) · 2^scale_bits)`
//! embedded in two's complement, so modular sums of encodings decode to the
//! exact sum of the quantized inputs as long as the sum does not overflow
//! `q/2 = 2^63`.

use std::ops::Deref;

use rand::RngCore;

use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// A finite real vector of fixed dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct RealVector(Vec<f64>);

impl RealVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyVector);
        }
        if let Some(index) = values.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self(values))
    }

    pub fn zeros(d: usize) -> Self {
        assert!(d > 0, "RealVector::zeros needs d > 0");
        Self(vec![0.0; d])
    }

    pub fn filled(d: usize, value: f64) -> Self {
        assert!(d > 0 && value.is_finite());
        Self(vec![value; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    fn check_dim(&self, other: &RealVector) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &RealVector) -> Result<RealVector> {
        self.check_dim(other)?;
        RealVector::new(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &RealVector) -> Result<RealVector> {
        self.check_dim(other)?;
        RealVector::new(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn scale(&self, factor: f64) -> Result<RealVector> {
        RealVector::new(self.0.iter().map(|a| a * factor).collect())
    }

    pub fn dot(&self, other: &RealVector) -> Result<f64> {
        self.check_dim(other)?;
        Ok(self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum())
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    pub fn distance(&self, other: &RealVector) -> Result<f64> {
        self.check_dim(other)?;
        Ok(self
            .0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt())
    }

    /// Arithmetic mean of equally sized vectors.
    pub fn mean_of(vectors: &[RealVector]) -> Result<RealVector> {
        let first = vectors
            .first()
            .ok_or(Error::EmptyInput("mean of no vectors"))?;
        let mut acc = vec![0.0; first.dim()];
        for v in vectors {
            first.check_dim(v)?;
            for (a, x) in acc.iter_mut().zip(&v.0) {
                *a += x;
            }
        }
        let n = vectors.len() as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        RealVector::new(acc)
    }
}

impl Deref for RealVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for RealVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        RealVector::new(values)
    }
}

/// A vector over `Z_q` with `q = 2^64`; all arithmetic wraps.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FieldVector(Vec<u64>);

impl FieldVector {
    pub fn new(values: Vec<u64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyVector);
        }
        Ok(Self(values))
    }

    pub fn zeros(d: usize) -> Self {
        assert!(d > 0, "FieldVector::zeros needs d > 0");
        Self(vec![0; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.0
    }

    fn check_dim(&self, other: &FieldVector) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(())
    }

    pub fn wrapping_add_assign(&mut self, other: &FieldVector) -> Result<()> {
        self.check_dim(other)?;
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a = a.wrapping_add(*b);
        }
        Ok(())
    }

    pub fn wrapping_sub_assign(&mut self, other: &FieldVector) -> Result<()> {
        self.check_dim(other)?;
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a = a.wrapping_sub(*b);
        }
        Ok(())
    }

    pub fn wrapping_neg(&self) -> FieldVector {
        FieldVector(self.0.iter().map(|a| a.wrapping_neg()).collect())
    }

    /// Multiplies every entry by a scalar modulo `q`.
    pub fn wrapping_mul_scalar(&self, k: u64) -> FieldVector {
        FieldVector(self.0.iter().map(|a| a.wrapping_mul(k)).collect())
    }

    /// Modular sum of equally sized vectors.
    pub fn sum_of<'a, I>(vectors: I) -> Result<FieldVector>
    where
        I: IntoIterator<Item = &'a FieldVector>,
    {
        let mut iter = vectors.into_iter();
        let mut acc = iter
            .next()
            .ok_or(Error::EmptyInput("sum of no field vectors"))?
            .clone();
        for v in iter {
            acc.wrapping_add_assign(v)?;
        }
        Ok(acc)
    }

    /// Applies `f` to every entry. Used to inject faults in negative controls.
    pub fn map(&self, f: impl Fn(u64) -> u64) -> FieldVector {
        FieldVector(self.0.iter().map(|&a| f(a)).collect())
    }
}

impl Deref for FieldVector {
    type Target = [u64];

    fn deref(&self) -> &[u64] {
        &self.0
    }
}

/// Fixed-point encoding parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FixedPointParams {
    scale_bits: u32,
    clamp_abs: f64,
}

impl Default for FixedPointParams {
    fn default() -> Self {
        Self {
            scale_bits: 24,
            clamp_abs: 32768.0,
        }
    }
}

impl FixedPointParams {
    pub fn new(scale_bits: u32, clamp_abs: f64) -> Result<Self> {
        if scale_bits == 0 || scale_bits >= 40 {
            return Err(Error::FixedPoint(format!(
                "scale_bits={scale_bits} must be in 1..40"
            )));
        }
        if !(clamp_abs.is_finite() && clamp_abs > 0.0) {
            return Err(Error::FixedPoint(format!(
                "clamp_abs={clamp_abs} must be positive and finite"
            )));
        }
        let p = Self {
            scale_bits,
            clamp_abs,
        };
        if p.max_shard_size() == 0 {
            return Err(Error::FixedPoint(
                "clamp_abs · 2^scale_bits already reaches q/2".into(),
            ));
        }
        Ok(p)
    }

    pub fn scale_bits(&self) -> u32 {
        self.scale_bits
    }

    pub fn clamp_abs(&self) -> f64 {
        self.clamp_abs
    }

    fn scale(&self) -> f64 {
        (1u64 << self.scale_bits) as f64
    }

    /// Largest shard whose encoded sum cannot overflow `q/2`, i.e. the largest
    /// `n` with `clamp_abs · 2^scale_bits · n < 2^63`.
    pub fn max_shard_size(&self) -> usize {
        let per = (self.clamp_abs * self.scale()).round();
        let half_q = 2f64.powi(63);
        let n = (half_q / per).floor();
        let n = if n * per >= half_q { n - 1.0 } else { n };
        n.max(0.0).min(usize::MAX as f64) as usize
    }

    /// Checks the no-overflow invariant for shards of up to `n_max` clients.
    pub fn validate_for(&self, n_max: usize) -> Result<()> {
        if n_max > self.max_shard_size() {
            return Err(Error::FixedPoint(format!(
                "shards of {n_max} clients can overflow; at most {} supported",
                self.max_shard_size()
            )));
        }
        Ok(())
    }

    /// The value `x` survives as after encode and decode with divisor 1.
    pub fn quantize(&self, x: f64) -> f64 {
        let c = x.clamp(-self.clamp_abs, self.clamp_abs);
        (c * self.scale()).round_ties_even() / self.scale()
    }

    /// Per-coordinate quantization error bound, `2^-(scale_bits+1)`.
    pub fn resolution(&self) -> f64 {
        1.0 / self.scale()
    }
}

/// Result of [`encode_fixed`]: the field vector plus how many entries were
/// clamped.
#[derive(Clone, Debug, PartialEq)]
pub struct Encoded {
    pub vector: FieldVector,
    pub saturated: usize,
}

pub fn encode_fixed(v: &RealVector, params: &FixedPointParams) -> Encoded {
    let scale = params.scale();
    let mut saturated = 0;
    let values = v
        .iter()
        .map(|&x| {
            if x.abs() > params.clamp_abs {
                saturated += 1;
            }
            let c = x.clamp(-params.clamp_abs, params.clamp_abs);
            ((c * scale).round_ties_even() as i64) as u64
        })
        .collect();
    Encoded {
        vector: FieldVector(values),
        saturated,
    }
}

/// Interprets `z` as signed integers and divides by `divisor · 2^scale_bits`.
pub fn decode_fixed(
    z: &FieldVector,
    divisor: u64,
    params: &FixedPointParams,
) -> Result<RealVector> {
    if divisor == 0 {
        return Err(Error::ZeroDivisor);
    }
    let denom = divisor as f64 * params.scale();
    RealVector::new(z.iter().map(|&a| (a as i64) as f64 / denom).collect())
}

/// Draws `d` entries uniformly from `[0, 2^64)`.
pub fn uniform_field_vector(d: usize, rng: &mut SeededRng) -> Result<FieldVector> {
    if d == 0 {
        return Err(Error::EmptyVector);
    }
    Ok(FieldVector((0..d).map(|_| rng.next_u64()).collect()))
}
