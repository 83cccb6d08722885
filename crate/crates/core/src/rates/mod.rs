//! Secret-key rates against the optimal individual attack.

pub mod advantage;
pub mod entropy;
pub mod intrinsic;
pub mod nelder_mead;

use rayon::prelude::*;
use serde::Serialize;

use crate::attack::{
    optimal_attack, sift, sift_alice_announces, AnnouncedSymbol, Block, EveSymbol, JointAbe,
};
use crate::boxes::Visibility;
use crate::error::{Error, Party, Result};

pub use advantage::{
    ad_preprocessed_threshold, ad_stats, ad_threshold, ad_with_preprocessing, add_noise,
    AdPreprocessed, AdStats, AdThreshold, AdZero,
};
pub use entropy::{binary_entropy, conditional_mutual_information, entropy, mutual_information};
pub use intrinsic::{intrinsic_numeric, Channel, IntrinsicConfig, IntrinsicResult};

fn check_p_nl(p_nl: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p_nl) {
        return Err(Error::Domain(format!("p_nl {p_nl} outside [0,1]")));
    }
    Ok(())
}

/// Sifted joint of the optimal attack at nonlocal weight `p_nl`.
pub fn table_one(p_nl: f64) -> Result<JointAbe<EveSymbol>> {
    sift(&optimal_attack(Visibility::from_p_nl(p_nl)?))
}

pub fn table_one_blocks(p_nl: f64) -> Result<Vec<Block>> {
    Ok(table_one(p_nl)?.blocks())
}

/// Sifted joint when Alice announces her input as well.
pub fn alice_announces(p_nl: f64) -> Result<JointAbe<AnnouncedSymbol>> {
    Ok(sift_alice_announces(&optimal_attack(
        Visibility::from_p_nl(p_nl)?,
    )))
}

/// One-way key rate `1 − h(p_L/4) − p_L/2`, `p_L = 1 − p_nl`.
pub fn ck_rate(p_nl: f64) -> Result<f64> {
    check_p_nl(p_nl)?;
    let p_l = 1.0 - p_nl;
    Ok(1.0 - entropy::h2(p_l / 4.0) - p_l / 2.0)
}

/// `I(A:B) − I(A:E)` evaluated on a joint.
pub fn ck_rate_from_blocks(blocks: &[Block]) -> f64 {
    entropy::mi_ab(blocks) - entropy::mi_ae(blocks)
}

/// Bisection for the sign change of a rate that is negative at `lo` and
/// positive at `hi`.
pub fn bisect_sign(
    mut positive: impl FnMut(f64) -> Result<bool>,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
) -> Result<f64> {
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if positive(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Root of [`ck_rate`] in `p_nl`.
pub fn ck_threshold() -> Result<f64> {
    bisect_sign(|p| Ok(ck_rate(p)? > 0.0), 0.0, 1.0, 1e-12)
}

/// One-way rate after Alice flips her bit with probability `q`.
pub fn preprocessed_rate(p_nl: f64, q: f64) -> Result<f64> {
    check_q(q)?;
    Ok(preprocessed_rate_blocks(&table_one_blocks(p_nl)?, q))
}

pub fn preprocessed_rate_blocks(blocks: &[Block], q: f64) -> f64 {
    ck_rate_from_blocks(&add_noise(blocks, q, Party::Alice))
}

fn check_q(q: f64) -> Result<()> {
    if !(0.0..=0.5).contains(&q) {
        return Err(Error::Domain(format!(
            "noise parameter {q} outside [0, 1/2]"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Preprocessing {
    pub q_opt: f64,
    pub rate: f64,
}

const Q_GRID_STEP: f64 = 1e-3;

/// Maximizes the pre-processed rate over `q ∈ [0, 1/2]`: grid of step
/// `1e−3`, then golden-section refinement around the best grid point.
pub fn optimize_preprocessing(p_nl: f64) -> Result<Preprocessing> {
    Ok(optimize_preprocessing_blocks(&table_one_blocks(p_nl)?))
}

pub fn optimize_preprocessing_blocks(blocks: &[Block]) -> Preprocessing {
    let f = |q: f64| preprocessed_rate_blocks(blocks, q);
    let steps = (0.5 / Q_GRID_STEP).round() as usize;
    let (mut k_best, mut r_best) = (0, f(0.0));
    for k in 1..=steps {
        let r = f(k as f64 * Q_GRID_STEP);
        if r > r_best {
            (k_best, r_best) = (k, r);
        }
    }
    let q_grid = k_best as f64 * Q_GRID_STEP;
    let lo = (q_grid - Q_GRID_STEP).max(0.0);
    let hi = (q_grid + Q_GRID_STEP).min(0.5);
    let (q_ref, r_ref) = golden_max(f, lo, hi, 1e-10);
    if r_ref > r_best {
        Preprocessing {
            q_opt: q_ref,
            rate: r_ref,
        }
    } else {
        Preprocessing {
            q_opt: q_grid,
            rate: r_best,
        }
    }
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc > fd {
            b = d;
            (d, fd) = (c, fc);
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            (c, fc) = (d, fd);
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Leading coefficient of the pre-processed rate as `q → 1/2`:
/// `rate ≈ (1−2q)²/(2 ln 2) · κ` with
/// `κ = Σ_b P(b) E[(−1)^a | b]² − Σ_e P(e) E[(−1)^a | e]²`.
///
/// Close to the threshold the optimal noise tends to `1/2` and the rate
/// vanishes quadratically, so positivity is decided by the sign of `κ`.
pub fn near_half_noise_coefficient(blocks: &[Block]) -> f64 {
    let bias_sq = |p0: f64, p1: f64| {
        let t = p0 + p1;
        if t > 0.0 {
            (p0 - p1).powi(2) / t
        } else {
            0.0
        }
    };
    let mut by_b = 0.0;
    for b in 0..2 {
        let p0: f64 = blocks.iter().map(|k| k[0][b]).sum();
        let p1: f64 = blocks.iter().map(|k| k[1][b]).sum();
        by_b += bias_sq(p0, p1);
    }
    let by_e: f64 = blocks
        .iter()
        .map(|k| bias_sq(k[0][0] + k[0][1], k[1][0] + k[1][1]))
        .sum();
    by_b - by_e
}

/// Whether some pre-processing noise gives a strictly positive rate.
pub fn preprocessing_helps(p_nl: f64) -> Result<bool> {
    let blocks = table_one_blocks(p_nl)?;
    Ok(near_half_noise_coefficient(&blocks) > 0.0
        || optimize_preprocessing_blocks(&blocks).rate > 1e-12)
}

/// Smallest `p_nl` at which optimized pre-processing yields a positive rate.
pub fn preprocessing_threshold() -> Result<f64> {
    bisect_sign(preprocessing_helps, 0.0, 1.0, 1e-10)
}

/// Closed-form intrinsic-information curve
/// `h(1 − p/2) − (1+p)/4 · h((1−p)/(1+p))`.
pub fn intrinsic_closed(p_nl: f64) -> Result<f64> {
    check_p_nl(p_nl)?;
    let p = p_nl;
    Ok(entropy::h2(1.0 - p / 2.0) - (1.0 + p) / 4.0 * entropy::h2((1.0 - p) / (1.0 + p)))
}

/// `p_nl = √2(1 − 2D) − 1`, clamped to `[0, 1]`.
pub fn disturbance_to_pnl(d: f64) -> Result<f64> {
    if !(0.0..=0.5).contains(&d) {
        return Err(Error::Domain(format!("disturbance {d} outside [0, 1/2]")));
    }
    Ok((std::f64::consts::SQRT_2 * (1.0 - 2.0 * d) - 1.0).clamp(0.0, 1.0))
}

/// Inverse of [`disturbance_to_pnl`] on the quantum range `[0, √2 − 1]`.
pub fn pnl_to_disturbance(p_nl: f64) -> Result<f64> {
    let max = std::f64::consts::SQRT_2 - 1.0;
    if !(0.0..=max + 1e-15).contains(&p_nl) {
        return Err(Error::Domain(format!(
            "p_nl {p_nl} outside the quantum range [0, {max}]"
        )));
    }
    Ok(((1.0 - (p_nl + 1.0) / std::f64::consts::SQRT_2) / 2.0).max(0.0))
}

/// Disturbance at which the isotropic box becomes local.
pub fn local_disturbance() -> f64 {
    (1.0 - std::f64::consts::FRAC_1_SQRT_2) / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateReport {
    pub p_nl: f64,
    pub rate_oneway: f64,
    pub rate_oneway_preprocessed: f64,
    pub q_opt: f64,
    pub intrinsic_closed: f64,
    pub intrinsic_numeric: f64,
    /// `None` above the quantum range, where no disturbance corresponds.
    pub disturbance: Option<f64>,
}

pub fn rate_report(p_nl: f64, cfg: &IntrinsicConfig) -> Result<RateReport> {
    let joint = table_one(p_nl)?;
    let blocks = joint.blocks();
    let pre = optimize_preprocessing_blocks(&blocks);
    Ok(RateReport {
        p_nl,
        rate_oneway: ck_rate(p_nl)?,
        rate_oneway_preprocessed: pre.rate,
        q_opt: pre.q_opt,
        intrinsic_closed: intrinsic_closed(p_nl)?,
        intrinsic_numeric: intrinsic_numeric(&blocks, cfg)?.value,
        disturbance: pnl_to_disturbance(p_nl).ok(),
    })
}

/// One row of the rate-versus-disturbance curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurveRow {
    pub d: f64,
    pub p_nl: f64,
    pub rate_q0: f64,
    pub rate_opt: f64,
    pub q_opt: f64,
    pub intrinsic_closed: f64,
    pub intrinsic_numeric: f64,
}

/// Rates at `grid + 1` evenly spaced disturbances from 0 to the local point.
pub fn curve(grid: usize, cfg: &IntrinsicConfig) -> Result<Vec<CurveRow>> {
    if grid == 0 {
        return Err(Error::Domain("grid needs at least one interval".into()));
    }
    let d_max = local_disturbance();
    (0..=grid)
        .into_par_iter()
        .map(|i| {
            let d = d_max * i as f64 / grid as f64;
            let p_nl = disturbance_to_pnl(d)?;
            let r = rate_report(p_nl, cfg)?;
            Ok(CurveRow {
                d,
                p_nl,
                rate_q0: r.rate_oneway,
                rate_opt: r.rate_oneway_preprocessed,
                q_opt: r.q_opt,
                intrinsic_closed: r.intrinsic_closed,
                intrinsic_numeric: r.intrinsic_numeric,
            })
        })
        .collect()
}

pub fn curve_to_csv(rows: &[CurveRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}
