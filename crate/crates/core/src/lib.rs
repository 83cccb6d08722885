//! Two-input, two-output no-signaling correlations and the secrecy of keys
//! distilled from them against a no-signaling eavesdropper.
//!
//! * [`boxes`]: validated boxes, CHSH, twirling, serialization.
//! * [`polytope`]: the 24 extremal boxes and minimal-nonlocal decompositions.
//! * [`attack`]: the optimal individual attack and the sifted joint `P(a, b, e)`.
//! * [`rates`]: one-way, pre-processed, intrinsic and two-way key rates.
//! * [`simulate`]: round-level Monte Carlo with finite-sample estimates.

#![allow(clippy::needless_range_loop)]

pub mod attack;
pub mod boxes;
pub mod error;
pub mod polytope;
pub mod rates;
pub mod simplex;
pub mod simulate;
pub mod tolerance;

pub use attack::{
    alice_bob_stats, optimal_attack, sift, sift_alice_announces, AliceBobStats, AnnouncedSymbol,
    Block, EveSymbol, FullAttack, JointAbe,
};
pub use boxes::{NsBox, Visibility};
pub use error::{Error, Party, Result};
pub use polytope::{
    is_local, min_nonlocal_decomposition, vertices, Decomposition, Vertex, VertexKind,
};
pub use rates::{Channel, IntrinsicConfig, RateReport};
pub use simulate::{EstimateReport, RoundRecord};
pub use tolerance::Tolerances;
