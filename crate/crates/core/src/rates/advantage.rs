//! Repetition-code advantage distillation.
//!
//! Alice draws a secret bit `r` and publishes `c_i = a_i ⊕ r` for a block of
//! `N` sifted rounds. Bob accepts when every `b_i ⊕ c_i` takes the same value
//! `r'`. Eve sees her `N` symbols and the public `c`.
//!
//! When the joint is symmetric under flipping both outputs (with a matching
//! relabeling `σ` of Eve's symbols), a round with `c_i = 1` and symbol `e` is
//! statistically the same as `c_i = 0` with `σ(e)`. Eve's view then reduces to
//! the counts of each symbol, and with `G_s(r, δ) = P(a = r, b = r ⊕ δ, s)`
//!
//! ```text
//! P(r, n, δ, accept) = multinomial(n) · 2^N · ½ · Π_s G_s(r, δ)^{n_s}
//! ```
//!
//! so everything is an exact sum over compositions of `N`.

use rayon::prelude::*;
use serde::Serialize;

use super::entropy::h2;
use crate::attack::Block;
use crate::error::{Error, Party, Result};

/// Statistics of one accepted block of length `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdStats {
    pub n: usize,
    /// Probability that Bob accepts a block.
    pub p_accept: f64,
    /// `P(r' ≠ r | accept)`.
    pub bob_error: f64,
    /// `H(R | E', accept)`.
    pub eve_entropy: f64,
    /// Error of Eve's maximum-a-posteriori guess of `r`.
    pub eve_guess_error: f64,
    /// `I(R:R') − I(R:E')` per accepted block.
    pub rate: f64,
}

impl AdStats {
    /// `I(R:E' | accept)`.
    pub fn eve_information(&self) -> f64 {
        1.0 - self.eve_entropy
    }

    /// Key bits per sifted round.
    pub fn rate_per_round(&self) -> f64 {
        self.rate * self.p_accept / self.n as f64
    }
}

const SYM_TOL: f64 = 1e-12;

fn flipped(b: &Block) -> Block {
    [[b[1][1], b[1][0]], [b[0][1], b[0][0]]]
}

fn same(x: &Block, y: &Block) -> bool {
    x.iter()
        .flatten()
        .zip(y.iter().flatten())
        .all(|(u, v)| (u - v).abs() <= SYM_TOL)
}

/// Checks that flipping both outputs permutes Eve's symbols.
pub fn check_flip_symmetric(blocks: &[Block]) -> Result<()> {
    let mut used = vec![false; blocks.len()];
    for blk in blocks {
        let f = flipped(blk);
        let partner = (0..blocks.len()).find(|&j| !used[j] && same(&blocks[j], &f));
        match partner {
            Some(j) => used[j] = true,
            None => return Err(Error::NotFlipSymmetric),
        }
    }
    Ok(())
}

fn ln_factorials(n: usize) -> Vec<f64> {
    let mut t = vec![0.0; n + 1];
    for k in 1..=n {
        t[k] = t[k - 1] + (k as f64).ln();
    }
    t
}

/// Exact statistics of an `n`-block.
pub fn ad_stats(blocks: &[Block], n: usize) -> Result<AdStats> {
    if n == 0 {
        return Err(Error::Domain("block length must be at least 1".into()));
    }
    check_flip_symmetric(blocks)?;
    // g[s] = [G(0,0), G(0,1), G(1,0), G(1,1)] indexed by (r, δ), times 2.
    let g: Vec<[f64; 4]> = blocks
        .iter()
        .filter(|b| b.iter().flatten().any(|&v| v > 0.0))
        .map(|b| [2.0 * b[0][0], 2.0 * b[0][1], 2.0 * b[1][1], 2.0 * b[1][0]])
        .collect();
    let k = g.len();
    // powers[s][c][j] = g[s][j]^c
    let powers: Vec<Vec<[f64; 4]>> = g
        .iter()
        .map(|gs| {
            let mut col = vec![[1.0; 4]; n + 1];
            for c in 1..=n {
                for j in 0..4 {
                    col[c][j] = col[c - 1][j] * gs[j];
                }
            }
            col
        })
        .collect();
    let lnf = ln_factorials(n);

    #[derive(Default)]
    struct Acc {
        accept: f64,
        err: f64,
        h: f64,
        guess: f64,
    }

    fn walk(
        s: usize,
        left: usize,
        prod: [f64; 4],
        ln_coef: f64,
        powers: &[Vec<[f64; 4]>],
        lnf: &[f64],
        acc: &mut Acc,
    ) {
        let k = powers.len();
        if s + 1 == k {
            let p = powers[s][left];
            let coef = 0.5 * (ln_coef - lnf[left]).exp();
            let w: [f64; 4] = std::array::from_fn(|j| coef * prod[j] * p[j]);
            let r0 = w[0] + w[1];
            let r1 = w[2] + w[3];
            let tot = r0 + r1;
            acc.accept += tot;
            acc.err += w[1] + w[3];
            if tot > 0.0 {
                acc.h += tot * h2(r0 / tot);
                acc.guess += r0.min(r1);
            }
            return;
        }
        for c in 0..=left {
            let p = powers[s][c];
            let next: [f64; 4] = std::array::from_fn(|j| prod[j] * p[j]);
            walk(s + 1, left - c, next, ln_coef - lnf[c], powers, lnf, acc);
        }
    }

    let mut acc = Acc::default();
    if k > 0 {
        walk(0, n, [1.0; 4], lnf[n], &powers, &lnf, &mut acc);
    }
    if acc.accept <= 0.0 {
        return Err(Error::Domain("no block is ever accepted".into()));
    }
    let bob_error = acc.err / acc.accept;
    let eve_entropy = acc.h / acc.accept;
    Ok(AdStats {
        n,
        p_accept: acc.accept,
        bob_error,
        eve_entropy,
        eve_guess_error: acc.guess / acc.accept,
        rate: eve_entropy - h2(bob_error),
    })
}

/// Smallest `p_nl` in `[0, 1]` with positive rate, assuming the sign of the
/// rate changes once. `None` if the rate is not positive at `p_nl = 1`.
pub fn zero_crossing(mut rate: impl FnMut(f64) -> Result<f64>, tol: f64) -> Result<Option<f64>> {
    if rate(1.0)? <= 0.0 {
        return Ok(None);
    }
    if rate(0.0)? > 0.0 {
        return Ok(Some(0.0));
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if rate(mid)? > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}

const ZERO_TOL: f64 = 1e-10;

/// Point of the per-`N` threshold curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdZero {
    pub n: usize,
    /// Smallest `p_nl` with positive rate at this block length.
    pub zero: f64,
    /// Noise parameter and the party applying it, if any.
    pub q: f64,
    pub party: Option<Party>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdThreshold {
    pub threshold_estimate: f64,
    pub per_n: Vec<AdZero>,
    /// Block lengths used in the extrapolation.
    pub fit_range: (usize, usize),
}

impl AdThreshold {
    /// Smallest zero found at any finite block length.
    pub fn best_finite(&self) -> AdZero {
        *self
            .per_n
            .iter()
            .min_by(|a, b| a.zero.total_cmp(&b.zero))
            .expect("at least one block length")
    }
}

/// Least-squares fit `zero ≈ c₀ + c₁/N` over `points`, returning `c₀`.
pub fn extrapolate_inverse_n(points: &[(usize, f64)]) -> f64 {
    let m = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|&(n, _)| 1.0 / n as f64).collect();
    let mx = xs.iter().sum::<f64>() / m;
    let my = points.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return my;
    }
    let sxy: f64 = xs
        .iter()
        .zip(points)
        .map(|(x, p)| (x - mx) * (p.1 - my))
        .sum();
    my - sxy / sxx * mx
}

fn fit(per_n: &[AdZero], n_max: usize) -> (f64, (usize, usize)) {
    let start = n_max.div_ceil(2);
    let pts: Vec<(usize, f64)> = per_n
        .iter()
        .filter(|z| z.n >= start)
        .map(|z| (z.n, z.zero))
        .collect();
    (extrapolate_inverse_n(&pts), (start, n_max))
}

/// Applies Bernoulli(`q`) noise to one party's output.
pub fn add_noise(blocks: &[Block], q: f64, party: Party) -> Vec<Block> {
    blocks
        .iter()
        .map(|b| {
            let mut o = [[0.0; 2]; 2];
            for a in 0..2 {
                for bb in 0..2 {
                    o[a][bb] = match party {
                        Party::Alice => (1.0 - q) * b[a][bb] + q * b[1 - a][bb],
                        Party::Bob => (1.0 - q) * b[a][bb] + q * b[a][1 - bb],
                    };
                }
            }
            o
        })
        .collect()
}

/// Per-`N` zeros of the advantage-distillation rate for a family of joints,
/// extrapolated to `N → ∞` by a `1/N` fit over `N ∈ [⌈n_max/2⌉, n_max]`.
pub fn ad_threshold_for<F>(joint: F, n_max: usize) -> Result<AdThreshold>
where
    F: Fn(f64) -> Result<Vec<Block>> + Sync,
{
    if n_max < 2 {
        return Err(Error::Domain("n_max must be at least 2".into()));
    }
    let per_n: Vec<AdZero> = (1..=n_max)
        .into_par_iter()
        .map(|n| {
            let z = zero_crossing(|p| Ok(ad_stats(&joint(p)?, n)?.rate), ZERO_TOL)?;
            Ok(AdZero {
                n,
                zero: z.unwrap_or(f64::NAN),
                q: 0.0,
                party: None,
            })
        })
        .collect::<Result<_>>()?;
    let (threshold_estimate, fit_range) = fit(&per_n, n_max);
    Ok(AdThreshold {
        threshold_estimate,
        per_n,
        fit_range,
    })
}

/// Advantage-distillation threshold on the sifted optimal-attack joint.
pub fn ad_threshold(n_max: usize) -> Result<AdThreshold> {
    ad_threshold_for(super::table_one_blocks, n_max)
}

/// Same as [`ad_threshold`], but at each `N` the smallest zero over
/// pre-processing noise `q ∈ q_grid` applied by either party.
pub fn ad_preprocessed_threshold(n_max: usize, q_grid: &[f64]) -> Result<AdThreshold> {
    if n_max < 2 {
        return Err(Error::Domain("n_max must be at least 2".into()));
    }
    check_q_grid(q_grid)?;
    let mut jobs = Vec::new();
    for n in 1..=n_max {
        for &q in q_grid {
            for party in [Party::Alice, Party::Bob] {
                jobs.push((n, q, party));
            }
        }
    }
    let zeros: Vec<AdZero> = jobs
        .into_par_iter()
        .map(|(n, q, party)| {
            let z = zero_crossing(
                |p| {
                    let noisy = add_noise(&super::table_one_blocks(p)?, q, party);
                    Ok(ad_stats(&noisy, n)?.rate)
                },
                ZERO_TOL,
            )?;
            Ok(AdZero {
                n,
                zero: z.unwrap_or(f64::INFINITY),
                q,
                party: (q > 0.0).then_some(party),
            })
        })
        .collect::<Result<_>>()?;
    let per_n: Vec<AdZero> = (1..=n_max)
        .map(|n| {
            *zeros
                .iter()
                .filter(|z| z.n == n)
                .min_by(|a, b| a.zero.total_cmp(&b.zero))
                .expect("grid is nonempty")
        })
        .collect();
    let (threshold_estimate, fit_range) = fit(&per_n, n_max);
    Ok(AdThreshold {
        threshold_estimate,
        per_n,
        fit_range,
    })
}

fn check_q_grid(q_grid: &[f64]) -> Result<()> {
    if q_grid.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(q) = q_grid.iter().find(|q| !(0.0..=0.5).contains(*q)) {
        return Err(Error::Domain(format!(
            "noise parameter {q} outside [0, 1/2]"
        )));
    }
    Ok(())
}

/// Best advantage-distillation rate at a fixed `p_nl` over block lengths and
/// pre-processing noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdPreprocessed {
    pub p_nl: f64,
    pub best_rate: f64,
    pub n: usize,
    pub q: f64,
    pub party: Option<Party>,
}

impl AdPreprocessed {
    pub fn positive(&self) -> bool {
        self.best_rate > 0.0
    }
}

pub fn ad_with_preprocessing(p_nl: f64, n_max: usize, q_grid: &[f64]) -> Result<AdPreprocessed> {
    if n_max < 1 {
        return Err(Error::Domain("n_max must be at least 1".into()));
    }
    check_q_grid(q_grid)?;
    let base = super::table_one_blocks(p_nl)?;
    let mut jobs = Vec::new();
    for n in 1..=n_max {
        for &q in q_grid {
            for party in [Party::Alice, Party::Bob] {
                jobs.push((n, q, party));
            }
        }
    }
    let results: Vec<AdPreprocessed> = jobs
        .into_par_iter()
        .map(|(n, q, party)| {
            let s = ad_stats(&add_noise(&base, q, party), n)?;
            Ok(AdPreprocessed {
                p_nl,
                best_rate: s.rate,
                n,
                q,
                party: (q > 0.0).then_some(party),
            })
        })
        .collect::<Result<_>>()?;
    Ok(results
        .into_iter()
        .reduce(|a, b| if b.best_rate > a.best_rate { b } else { a })
        .expect("nonempty job list"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rates::{ck_rate, table_one_blocks};
    use std::collections::HashMap;

    /// Direct enumeration over all outcome strings, without the symmetry
    /// reduction: Eve's view is the literal pair (c, e-string).
    fn brute_force(blocks: &[Block], n: usize) -> AdStats {
        let k = blocks.len();
        let cells = 4 * k;
        let mut views: HashMap<(Vec<usize>, Vec<usize>), [f64; 2]> = HashMap::new();
        let (mut accept, mut err) = (0.0, 0.0);
        for r in 0..2 {
            let total = cells.pow(n as u32);
            for code in 0..total {
                let mut rest = code;
                let mut prob = 0.5;
                let mut c = Vec::with_capacity(n);
                let mut e = Vec::with_capacity(n);
                let mut deltas = Vec::with_capacity(n);
                for _ in 0..n {
                    let cell = rest % cells;
                    rest /= cells;
                    let (s, a, b) = (cell / 4, (cell / 2) % 2, cell % 2);
                    prob *= blocks[s][a][b];
                    c.push(a ^ r);
                    e.push(s);
                    deltas.push(a ^ b);
                }
                if prob == 0.0 || deltas.iter().any(|&d| d != deltas[0]) {
                    continue;
                }
                accept += prob;
                if deltas[0] == 1 {
                    err += prob;
                }
                views.entry((c, e)).or_insert([0.0; 2])[r] += prob;
            }
        }
        let mut h = 0.0;
        let mut guess = 0.0;
        for w in views.values() {
            let t = w[0] + w[1];
            h += t * h2(w[0] / t);
            guess += w[0].min(w[1]);
        }
        let bob_error = err / accept;
        AdStats {
            n,
            p_accept: accept,
            bob_error,
            eve_entropy: h / accept,
            eve_guess_error: guess / accept,
            rate: h / accept - h2(bob_error),
        }
    }

    #[test]
    fn dp_matches_brute_force() {
        for p in [0.0, 0.2, 0.45, 0.8] {
            let base = table_one_blocks(p).unwrap();
            for blocks in [
                base.clone(),
                add_noise(&base, 0.07, Party::Alice),
                add_noise(&base, 0.03, Party::Bob),
            ] {
                for n in 1..=3 {
                    let dp = ad_stats(&blocks, n).unwrap();
                    let bf = brute_force(&blocks, n);
                    for (x, y) in [
                        (dp.p_accept, bf.p_accept),
                        (dp.bob_error, bf.bob_error),
                        (dp.eve_entropy, bf.eve_entropy),
                        (dp.eve_guess_error, bf.eve_guess_error),
                        (dp.rate, bf.rate),
                    ] {
                        assert!((x - y).abs() < 1e-12, "p={p} n={n}: {x} vs {y}");
                    }
                }
            }
        }
    }

    #[test]
    fn single_round_is_one_way() {
        for i in 0..=20 {
            let p = i as f64 / 20.0;
            let s = ad_stats(&table_one_blocks(p).unwrap(), 1).unwrap();
            assert!((s.rate - ck_rate(p).unwrap()).abs() < 1e-12, "p={p}");
            assert!((s.p_accept - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn asymmetric_joint_is_rejected() {
        let blocks = vec![
            [[0.5, 0.0], [0.0, 0.0]],
            [[0.0, 0.0], [0.0, 0.5]],
            [[0.0; 2]; 2],
        ];
        assert!(ad_stats(&blocks, 2).is_ok());
        let skew = vec![[[0.6, 0.0], [0.0, 0.4]]];
        assert!(matches!(ad_stats(&skew, 2), Err(Error::NotFlipSymmetric)));
    }

    #[test]
    fn longer_blocks_shrink_bob_error() {
        let blocks = table_one_blocks(0.3).unwrap();
        let e: Vec<f64> = (1..=6)
            .map(|n| ad_stats(&blocks, n).unwrap().bob_error)
            .collect();
        assert!(e.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn extrapolation_recovers_exact_line() {
        let pts: Vec<(usize, f64)> = (10..=20).map(|n| (n, 0.2 + 0.5 / n as f64)).collect();
        assert!((extrapolate_inverse_n(&pts) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn q_zero_reproduces_plain_distillation() {
        let base = table_one_blocks(0.3).unwrap();
        for n in [1, 4] {
            let plain = ad_stats(&base, n).unwrap();
            let noisy = ad_stats(&add_noise(&base, 0.0, Party::Bob), n).unwrap();
            assert_eq!(plain, noisy);
        }
    }

    #[test]
    fn positive_rate_at_point_three() {
        let best = ad_with_preprocessing(0.3, 8, &[0.0]).unwrap();
        assert!(best.positive());
        assert!(best.n > 1);
    }
}
