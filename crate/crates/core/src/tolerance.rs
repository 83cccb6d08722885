//! Numerical tolerances shared across the crate.

/// Probability-level slack used when validating boxes and channels.
pub const PROB: f64 = 1e-9;

/// Residual allowed on linear-program reconstructions.
pub const LP: f64 = 1e-8;

/// Slack on the intrinsic-information minimizer.
pub const OPT: f64 = 1e-3;

/// Runtime-overridable tolerance set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub prob: f64,
    pub lp: f64,
    pub opt: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            prob: PROB,
            lp: LP,
            opt: OPT,
        }
    }
}
