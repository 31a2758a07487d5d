//! Shared numerical thresholds.
//!
//! Checks across the crate and the command line read their limits from here
//! so that a tightened bound changes in one place.

/// Unit norms and orthogonality of the vectors handed to `g2_frame`.
pub const FRAME_PRECONDITION: f64 = 1e-9;

/// Algebraic identities evaluated on random data.
pub const ALGEBRAIC: f64 = 1e-12;

/// Entry-wise match of a matrix against the 14-parameter pattern.
pub const PATTERN: f64 = 1e-10;

/// Frames along an integrated path must pass `is_g2` at this level.
pub const FRAME_IN_G2: f64 = 1e-8;

/// Curve type predicates, relative to the largest coefficient modulus.
pub const CLASSIFY_RELATIVE: f64 = 1e-7;

/// Membership of a Toda state in the type (iii) invariant set.
pub const INVARIANT_SET: f64 = 1e-9;

/// Largest exponent allowed inside the Toda vector field.
pub const EXPONENT_GUARD: f64 = 300.0;

/// State norm treated as blow-up by the integrators.
pub const DIVERGENCE_NORM: f64 = 1e8;

/// Default denominator bound for rational spectrum detection.
pub const MAX_DENOMINATOR: u64 = 10_000;

/// Relative gap accepted between a spectrum ratio and its convergent.
pub const RATIO_MATCH: f64 = 1e-13;

/// Almost complex and cone residual on a built grid.
pub const GRID_GEOMETRY: f64 = 1e-4;

/// `|alpha| = 1` and reality of `beta` for the special Lagrangian normal.
pub const SL_ALPHA: f64 = 1e-8;

/// Constancy of the special Lagrangian normal across a grid.
pub const SL_NORMAL: f64 = 1e-6;

/// Isotropy `(Phi, Phi) = 0` of the quadric lift.
pub const QUADRIC_ISOTROPY: f64 = 1e-12;

/// Frame consistency `k^-1 A k = P` along a flow.
pub const AKS_CONSISTENCY: f64 = 1e-5;

/// Conservation of `v1 + v2 + v3`.
pub const SUM_V_DRIFT: f64 = 1e-9;

/// Drift of the rotation angles of `P`.
pub const SPECTRAL_DRIFT: f64 = 1e-8;

/// Closure of a doubly periodic surface.
pub const CLOSURE: f64 = 1e-6;

/// Closeness of `exp(s A)` to the identity at a detected period.
pub const PERIOD_IDENTITY: f64 = 1e-9;
