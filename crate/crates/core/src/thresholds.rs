//! Pre-registered statistical thresholds.
//!
//! Every pass/fail boundary used by the verification commands and the
//! acceptance suite lives here, fixed before the corresponding runs were made.

/// Floor for uniformity / indistinguishability p-values. A correct masking
/// implementation fails this one time in a thousand.
pub const UNIFORMITY_P_FLOOR: f64 = 1e-3;

/// Negative controls (deliberately biased masks) must be rejected below this.
pub const NEGATIVE_CONTROL_P_CEIL: f64 = 1e-6;

/// Number of residue bins used by the transcript test.
pub const TRANSCRIPT_BINS: usize = 16;

/// Minimum number of masked coordinates fed to the transcript test.
pub const TRANSCRIPT_MIN_COORDS: usize = 100_000;

/// Accepted band for empirical shard-mean variance over `σ̄²/|H|`.
pub const CLT_VARIANCE_RATIO: (f64, f64) = (0.8, 1.2);

/// Shape bounds on shard means once the CLT has kicked in.
pub const CLT_MAX_ABS_SKEWNESS: f64 = 0.2;
pub const CLT_MAX_ABS_EXCESS_KURTOSIS: f64 = 0.5;

/// Minimum trials for a CLT check.
pub const CLT_MIN_TRIALS: usize = 200;

/// Constant `C` in the robust-estimation bound `error ≤ C·√ε`, frozen from the
/// brute-force reference run on the contaminated-Gaussian benchmark.
pub const FILTER_ERROR_CONSTANT: f64 = 3.0;

/// Allowed max/min ratio of FilterL2 error across dimensions.
pub const DIMENSION_FREE_RATIO: f64 = 2.0;

/// Lower bound on the averaging error at d = 1024 under the 0.5·1 shift
/// (analytic value ε·0.5·√1024 = 1.6).
pub const AVERAGE_ERROR_FLOOR_D1024: f64 = 0.7;

/// Sectioned filtering: required speed-up and error inflation allowance
/// (multiplier on √k).
pub const SECTION_SPEEDUP: f64 = 2.0;
pub const SECTION_ERROR_SLACK: f64 = 1.5;

/// Relative tolerance for analytic vs. finite-difference gradients.
pub const GRADIENT_REL_TOL: f64 = 1e-5;

/// Model replacement must land within this distance of the target.
pub const REPLACEMENT_TOL: f64 = 1.0 / (1u64 << 20) as f64;

/// Bounded-regime robustness: attack error multipliers relative to the
/// no-attack run on the same seed.
pub const ROBUST_FILTER_MAX_INFLATION: f64 = 3.0;
pub const ROBUST_AVERAGE_MIN_INFLATION: f64 = 10.0;

/// End-to-end learning: accuracy gaps in percentage points.
pub const NOATTACK_ACCURACY_GAP: f64 = 0.02;
pub const ATTACK_ACCURACY_ADVANTAGE: f64 = 0.10;
