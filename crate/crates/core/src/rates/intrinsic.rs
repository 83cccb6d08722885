//! Intrinsic information `I(A:B↓E) = min over channels E→Ē of I(A:B|Ē)`.
//!
//! The minimum is searched numerically: each row of the channel is a softmax
//! over free logits and Nelder–Mead runs from many random starting points.
//! Symbols whose `(a, b)` blocks are proportional carry identical information
//! and are merged before the search, which shrinks the problem without
//! changing the minimum.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::entropy::{block_cmi_term, cmi_blocks, mi_ab};
use super::nelder_mead::NelderMead;
use crate::attack::{Block, EveLabel, JointAbe};
use crate::error::{Error, Result};
use crate::tolerance;

/// Stochastic matrix `P(ē|e)`, one row per input symbol.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Channel {
    rows: Vec<Vec<f64>>,
}

impl Channel {
    pub fn new(rows: Vec<Vec<f64>>, tol: f64) -> Result<Self> {
        let width = rows.first().map_or(0, Vec::len);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != width {
                return Err(Error::WrongLength {
                    expected: width,
                    got: row.len(),
                });
            }
            for &v in row {
                if !v.is_finite() {
                    return Err(Error::NonFinite { idx: i, value: v });
                }
                if v < -tol {
                    return Err(Error::NegativeProbability { idx: i, value: v });
                }
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > tol {
                return Err(Error::DistributionNotNormalized { sum });
            }
        }
        Ok(Self { rows })
    }

    pub fn identity(n: usize) -> Self {
        let rows = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self { rows }
    }

    /// Maps every symbol to a single output, erasing Eve's information.
    pub fn constant(n: usize) -> Self {
        Self {
            rows: vec![vec![1.0]; n],
        }
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn n_inputs(&self) -> usize {
        self.rows.len()
    }

    pub fn n_outputs(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn apply(&self, blocks: &[Block]) -> Result<Vec<Block>> {
        if blocks.len() != self.rows.len() {
            return Err(Error::WrongLength {
                expected: self.rows.len(),
                got: blocks.len(),
            });
        }
        let mut out = vec![[[0.0; 2]; 2]; self.n_outputs()];
        for (blk, row) in blocks.iter().zip(&self.rows) {
            for (o, &w) in out.iter_mut().zip(row) {
                for a in 0..2 {
                    for b in 0..2 {
                        o[a][b] += w * blk[a][b];
                    }
                }
            }
        }
        Ok(out)
    }
}

/// `I(A:B|Ē)` after passing Eve's symbol through `channel`.
pub fn conditional_information(blocks: &[Block], channel: &Channel) -> Result<f64> {
    Ok(cmi_blocks(&channel.apply(blocks)?))
}

#[derive(Debug, Clone, Copy)]
pub struct IntrinsicConfig {
    pub restarts: usize,
    pub seed: u64,
    pub max_outputs: usize,
    pub search: NelderMead,
}

impl Default for IntrinsicConfig {
    fn default() -> Self {
        Self {
            restarts: 64,
            seed: 0,
            max_outputs: 5,
            search: NelderMead::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IntrinsicResult {
    /// Best `I(A:B|Ē)` found.
    pub value: f64,
    /// Channel achieving `value`, rows in the order of the input symbols.
    pub channel: Channel,
    /// `I(A:B|E)`, the identity-channel value.
    pub conditional: f64,
    /// `I(A:B)`, the constant-channel value.
    pub mutual: f64,
    pub evaluations: usize,
}

/// Groups of input symbols with proportional blocks; zero-mass symbols are
/// left out.
fn merge_proportional(blocks: &[Block]) -> Vec<(Block, Vec<usize>)> {
    let mut groups: Vec<(Block, Vec<usize>)> = Vec::new();
    for (i, blk) in blocks.iter().enumerate() {
        let mass: f64 = blk.iter().flatten().sum();
        if mass <= 0.0 {
            continue;
        }
        let shape = |b: &Block| -> [f64; 4] {
            let m: f64 = b.iter().flatten().sum();
            [b[0][0] / m, b[0][1] / m, b[1][0] / m, b[1][1] / m]
        };
        let s = shape(blk);
        match groups
            .iter_mut()
            .find(|(g, _)| shape(g).iter().zip(&s).all(|(u, v)| (u - v).abs() <= 1e-12))
        {
            Some((g, members)) => {
                for a in 0..2 {
                    for b in 0..2 {
                        g[a][b] += blk[a][b];
                    }
                }
                members.push(i);
            }
            None => groups.push((*blk, vec![i])),
        }
    }
    groups
}

fn softmax_rows(z: &[f64], n_out: usize) -> Vec<Vec<f64>> {
    z.chunks(n_out)
        .map(|row| {
            let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = row.iter().map(|v| (v - m).exp()).collect();
            let s: f64 = e.iter().sum();
            e.into_iter().map(|v| v / s).collect()
        })
        .collect()
}

fn objective(groups: &[Block], z: &[f64], n_out: usize) -> f64 {
    let w = softmax_rows(z, n_out);
    let mut total = 0.0;
    for o in 0..n_out {
        let mut blk = [[0.0; 2]; 2];
        for (g, row) in groups.iter().zip(&w) {
            let t = row[o];
            for a in 0..2 {
                for b in 0..2 {
                    blk[a][b] += t * g[a][b];
                }
            }
        }
        total += block_cmi_term(&blk);
    }
    total
}

fn check_blocks(blocks: &[Block]) -> Result<()> {
    let mut sum = 0.0;
    for (idx, &v) in blocks.iter().flatten().flatten().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite { idx, value: v });
        }
        if v < -tolerance::PROB {
            return Err(Error::NegativeProbability { idx, value: v });
        }
        sum += v;
    }
    if (sum - 1.0).abs() > tolerance::PROB {
        return Err(Error::DistributionNotNormalized { sum });
    }
    Ok(())
}

/// Numerical intrinsic information of `P(a, b, e)` given as one block per
/// Eve symbol.
///
/// Restart `k` draws its starting point from a stream determined by
/// `(seed, k)` alone, so raising `restarts` only ever adds candidates and the
/// result cannot increase. The identity and constant channels are always
/// among the candidates.
pub fn intrinsic_numeric(blocks: &[Block], cfg: &IntrinsicConfig) -> Result<IntrinsicResult> {
    if cfg.restarts == 0 {
        return Err(Error::Domain("restarts must be at least 1".into()));
    }
    if cfg.max_outputs == 0 {
        return Err(Error::Domain("channel needs at least one output".into()));
    }
    check_blocks(blocks)?;
    let conditional = cmi_blocks(blocks);
    let mutual = mi_ab(blocks);

    let groups = merge_proportional(blocks);
    let reduced: Vec<Block> = groups.iter().map(|(b, _)| *b).collect();
    let n_in = reduced.len();
    let n_out = cfg.max_outputs.min(n_in);

    let expand = |w: &[Vec<f64>], width: usize| -> Channel {
        let mut rows = vec![vec![0.0; width]; blocks.len()];
        for row in rows.iter_mut() {
            row[0] = 1.0;
        }
        for ((_, members), wr) in groups.iter().zip(w) {
            for &i in members {
                rows[i] = wr.clone();
            }
        }
        Channel { rows }
    };

    // Candidates: forget Eve's symbol, or keep it when the cap allows.
    let (mut value, mut w_best, mut width) = (mutual, vec![vec![1.0]; n_in], 1);
    if n_out == n_in && conditional < value {
        (value, w_best, width) = (conditional, Channel::identity(n_in).rows, n_in);
    }

    let mut evaluations = 0;
    if n_in > 1 && n_out > 1 {
        let dim = n_in * n_out;
        let runs: Vec<(f64, Vec<f64>, usize)> = (0..cfg.restarts)
            .into_par_iter()
            .map(|k| {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(k as u64);
                let z0: Vec<f64> = (0..dim).map(|_| rng.gen_range(-3.0..3.0)).collect();
                let f = |z: &[f64]| objective(&reduced, z, n_out);
                let first = cfg.search.minimize(f, &z0);
                let polish = NelderMead {
                    initial_step: cfg.search.initial_step * 0.25,
                    ..cfg.search
                };
                let second = polish.minimize(f, &first.x);
                let evals = first.evals + second.evals;
                let best = if second.f <= first.f { second } else { first };
                (best.f.max(0.0), best.x, evals)
            })
            .collect();
        for (f, z, evals) in runs {
            evaluations += evals;
            if f < value {
                value = f;
                w_best = softmax_rows(&z, n_out);
                width = n_out;
            }
        }
    }
    let channel = expand(&w_best, width);
    Ok(IntrinsicResult {
        value,
        channel,
        conditional,
        mutual,
        evaluations,
    })
}

/// Convenience wrapper over a sifted joint.
pub fn intrinsic_numeric_joint<S: EveLabel>(
    joint: &JointAbe<S>,
    cfg: &IntrinsicConfig,
) -> Result<IntrinsicResult> {
    intrinsic_numeric(&joint.blocks(), cfg)
}
