//! Federated learning with sharded secure aggregation and robust mean
//! estimation.
//!
//! Clients are split into shards. Inside a shard, updates are blinded with
//! pairwise cancelling masks over `Z_{2^64}` so the server only learns the
//! shard mean. The server then runs a robust estimator (spectral filtering by
//! default) over the shard means, which tolerates a bounded fraction of
//! Byzantine shards.
//!
//! Layout:
//! - [`codec`]: real vectors, the fixed-point map into the field, uniform masks
//! - [`secagg`]: shard plans, mask tables, masking, shard aggregation, transcripts
//! - [`estimators`]: average, median, trimmed mean, Krum, Bulyan, FilterL2
//! - [`attacks`]: Byzantine client behaviours
//! - [`sim`]: tasks, heterogeneous data, local training, the round loop, CLT checks
//! - [`stats`]: small statistics helpers shared by the checks
//! - [`thresholds`]: pre-registered acceptance thresholds

pub mod attacks;
pub mod codec;
pub mod error;
pub mod estimators;
pub mod rng;
pub mod secagg;
pub mod sim;
pub mod stats;
pub mod thresholds;

pub use codec::{FieldVector, FixedPointParams, RealVector};
pub use error::{Error, Result};
pub use rng::{Purpose, SeededRng};
